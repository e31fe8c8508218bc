//! Seeded inputs shared by the benchmarks.

use monorank::letordata::{synth_generate, SynthConfig};
use monorank::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn uniform(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn dataset(n_queries: usize, docs_per_query: usize, seed: u64) -> Dataset {
    let cfg = SynthConfig { n_queries, docs_per_query, noise_sd: 0.1, seed, ..SynthConfig::default() };
    synth_generate(&cfg).expect("valid synthetic config").0
}
