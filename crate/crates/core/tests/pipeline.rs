use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seq2act::action::build_graph;
use seq2act::controller::ConstraintLevel;
use seq2act::decode::{parse, DecodeError, DecodeOptions};
use seq2act::model::ModelConfig;
use seq2act::schema::{load_schema, KbSchema};
use seq2act::synth::{toy_corpus, TOY_SCHEMA};
use seq2act::train::{preprocess, to_bytes, train, Preprocessed, RawExample, TrainConfig};

fn setup(n: usize) -> (KbSchema, Preprocessed) {
    let schema = load_schema(TOY_SCHEMA).unwrap();
    let raw: Vec<RawExample> = toy_corpus(n, &schema, &mut ChaCha8Rng::seed_from_u64(4))
        .into_iter()
        .enumerate()
        .map(|(line, (utterance, logical_form))| RawExample {
            line: line + 1,
            utterance,
            logical_form,
        })
        .collect();
    let data = preprocess(&raw, &schema, 1).unwrap();
    (schema, data)
}

fn small_config(epochs: usize) -> TrainConfig {
    let mut c = TrainConfig {
        model: ModelConfig {
            hidden_size: 16,
            word_embed_dim: 8,
            struct_embed_dim: 6,
            sem_embed_dim: 6,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    c.schedule.epochs = epochs;
    c
}

#[test]
fn training_is_deterministic_and_lowers_loss() {
    let (_, data) = setup(40);
    let (a, ma) = train(&small_config(4), &data).unwrap();
    let (b, mb) = train(&small_config(4), &data).unwrap();
    assert_eq!(to_bytes(&a), to_bytes(&b));
    assert_eq!(ma, mb);
    assert!(ma.last().unwrap().loss < ma[0].loss);
}

#[test]
fn constrained_decoding_yields_valid_graphs() {
    let (schema, data) = setup(40);
    let (model, _) = train(&small_config(1), &data).unwrap();
    let vocab: Vec<&str> = vec![
        "what", "is", "the", "largest", "state", "river", "texas", "austin", "how", "many",
        "border", "in", "not", "cities", "lakes", "iowa", "through", "runs",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut parsed, mut exhausted) = (0, 0);
    for i in 0..60 {
        let len = rng.gen_range(1..9);
        let sentence: Vec<&str> = (0..len)
            .map(|_| vocab[rng.gen_range(0..vocab.len())])
            .collect();
        let level = if i % 2 == 0 {
            ConstraintLevel::C1
        } else {
            ConstraintLevel::C1plusC2
        };
        let opts = DecodeOptions {
            level,
            ..DecodeOptions::default()
        };
        match parse(&model, &schema, &sentence.join(" "), &opts) {
            Ok(p) => {
                parsed += 1;
                assert!(
                    p.graph.validate_wellformed().is_empty(),
                    "{}",
                    p.logical_form
                );
                if level == ConstraintLevel::C1plusC2 {
                    assert!(
                        p.graph.schema_violations(&schema).is_empty(),
                        "{}",
                        p.logical_form
                    );
                }
                assert_eq!(build_graph(&p.actions, &schema).unwrap(), p.graph);
                assert_eq!(p.diagnostics.len(), p.actions.len() + 1);
                let again = parse(&model, &schema, &sentence.join(" "), &opts).unwrap();
                assert_eq!(again.actions, p.actions);
            }
            Err(DecodeError::NoCompleteParse { .. }) => exhausted += 1,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(parsed > exhausted, "{parsed} parsed, {exhausted} exhausted");
}

#[test]
fn blank_sentence_is_rejected() {
    let (schema, data) = setup(10);
    let (model, _) = train(&small_config(1), &data).unwrap();
    assert!(matches!(
        parse(&model, &schema, "  ", &DecodeOptions::default()),
        Err(DecodeError::EmptySentence)
    ));
}
