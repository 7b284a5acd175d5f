//! Trains on the bundled toy split and reports held-out accuracy per
//! constraint level.
//!
//! cargo run --release -p seq2act-core --example toy_run

use std::time::Instant;

use seq2act::controller::ConstraintLevel;
use seq2act::decode::{parse_tokens, DecodeOptions};
use seq2act::eval::evaluate;
use seq2act::schema::load_schema;
use seq2act::train::{preprocess, read_corpus, train_with, EntityMatcher, TrainConfig};

fn main() {
    let schema = load_schema(&std::fs::read_to_string("data/geo_toy/schema.txt").unwrap()).unwrap();
    let train = read_corpus(&std::fs::read_to_string("data/geo_toy/train.tsv").unwrap()).unwrap();
    let test = read_corpus(&std::fs::read_to_string("data/geo_toy/test.tsv").unwrap()).unwrap();
    let data = preprocess(&train, &schema, 2).unwrap();
    println!("{} words, {} actions", data.words.len(), data.actions.len());
    let t = Instant::now();
    let (model, _) = train_with(&TrainConfig::default(), &data, |m| {
        println!(
            "epoch {:>2} lr {:.4} loss {:.4} acc {:.4} ({:.1?})",
            m.epoch,
            m.lr,
            m.loss,
            m.accuracy,
            t.elapsed()
        )
    })
    .unwrap();
    let matcher = EntityMatcher::new(&schema);
    let gold: Vec<String> = test.iter().map(|r| r.logical_form.clone()).collect();
    for level in [
        ConstraintLevel::None,
        ConstraintLevel::C1,
        ConstraintLevel::C1plusC2,
    ] {
        let opts = DecodeOptions {
            level,
            ..Default::default()
        };
        let preds: Vec<Option<String>> = seq2act::par::map(&test, |r| {
            let toks = seq2act::train::tokenize_utterance(&r.utterance);
            let (toks, map) = matcher.replace(&toks, &schema);
            parse_tokens(&model, &schema, &toks, &map, &opts)
                .ok()
                .map(|p| p.logical_form)
        });
        let rep = evaluate(&preds, &gold, &schema);
        println!(
            "{level}: {}/{} = {:.3}",
            rep.correct, rep.total, rep.accuracy
        );
    }
}
