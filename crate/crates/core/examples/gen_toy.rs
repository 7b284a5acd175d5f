//! Regenerates `data/geo_toy` from the synthetic templates.
//!
//! cargo run -p seq2act-core --example gen_toy -- data/geo_toy

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seq2act::schema::load_schema;
use seq2act::synth::{to_tsv, toy_corpus, TOY_SCHEMA};

/// Seed of the bundled split.
const SEED: u64 = 2016;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "data/geo_toy".into()),
    );
    std::fs::create_dir_all(&dir)?;
    let schema = load_schema(TOY_SCHEMA).expect("toy schema parses");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let all = toy_corpus(250, &schema, &mut rng);
    std::fs::write(dir.join("schema.txt"), TOY_SCHEMA)?;
    std::fs::write(dir.join("train.tsv"), to_tsv(&all[..200]))?;
    std::fs::write(dir.join("test.tsv"), to_tsv(&all[200..]))?;
    Ok(())
}
