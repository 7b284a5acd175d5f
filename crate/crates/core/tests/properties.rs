use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seq2act::action::{build_graph, format_sequence, parse_sequence};
use seq2act::controller::{ConstraintLevel, Controller};
use seq2act::eval::exact_match;
use seq2act::lf::{actions_to_lf, canonicalize, lf_to_actions, parse_lf, print_lf};
use seq2act::model::{ModelConfig, Seq2Act};
use seq2act::schema::{load_schema, KbSchema};
use seq2act::synth::{random_lf, random_walk, walk_universe, TOY_SCHEMA};
use seq2act::train::{from_bytes, to_bytes};
use seq2act::vocab::{ActionVocab, WordVocab};

fn schema() -> KbSchema {
    load_schema(TOY_SCHEMA).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn action_text_round_trips(seed in any::<u64>()) {
        let s = schema();
        let c = Controller::new(&s, ConstraintLevel::C1);
        let u = walk_universe(&s, &["A", "B", "C"]);
        if let Some(seq) = random_walk(&c, &u, 30, 0.2, &mut ChaCha8Rng::seed_from_u64(seed)) {
            prop_assert_eq!(parse_sequence(&format_sequence(&seq)).unwrap(), seq);
        }
    }

    #[test]
    fn printed_forms_reparse(seed in any::<u64>(), depth in 0usize..4) {
        let s = schema();
        let lf = random_lf(&s, depth, &mut ChaCha8Rng::seed_from_u64(seed));
        let text = print_lf(&lf);
        let back = parse_lf(&text, &s).unwrap();
        prop_assert_eq!(print_lf(&back), text);
        let raw = parse_lf(&lf.to_raw_string(), &s).unwrap();
        prop_assert!(exact_match(&raw, &lf, &s));
    }

    #[test]
    fn canonicalize_is_idempotent(seed in any::<u64>()) {
        let s = schema();
        let lf = random_lf(&s, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        let once = canonicalize(&lf);
        prop_assert_eq!(canonicalize(&once), once);
    }

    #[test]
    fn walks_convert_to_forms_and_back(seed in any::<u64>()) {
        let s = schema();
        let c = Controller::new(&s, ConstraintLevel::C1plusC2);
        let u = walk_universe(&s, &["A", "B", "C"]);
        if let Some(seq) = random_walk(&c, &u, 30, 0.2, &mut ChaCha8Rng::seed_from_u64(seed)) {
            let lf = actions_to_lf(&seq, &s).unwrap();
            let again = lf_to_actions(&lf, &s).unwrap();
            let g1 = build_graph(&seq, &s).unwrap();
            let g2 = build_graph(&again, &s).unwrap();
            prop_assert!(seq2act::graph::graphs_isomorphic(&g1, &g2));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn checkpoint_bytes_are_stable(seed in any::<u64>(), hidden in 1usize..6) {
        let words: WordVocab = ["<unk>", "x", "y"].iter().map(|w| w.to_string()).collect::<Vec<_>>().into();
        let actions = ActionVocab::from_actions(parse_sequence("add_variable:A add_type_node:state arg:A").unwrap());
        let config = ModelConfig { hidden_size: hidden, word_embed_dim: 3, struct_embed_dim: 2, sem_embed_dim: 2, init_scale: 0.5, seed };
        let model = Seq2Act::new(config, words, actions).unwrap();
        let bytes = to_bytes(&model);
        prop_assert_eq!(to_bytes(&from_bytes(&bytes).unwrap()), bytes);
    }
}
