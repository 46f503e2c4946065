//! Seeded input generators shared by tests, benchmarks and the CLI.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, Zipf};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::blocks::{BlockError, BlockRecord, BlockStore, KVRecord, Point, TextSlot, KEY_BYTES};
use crate::oalg::{DistMatrix, SortRecord};

pub type WorkloadRng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> WorkloadRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn random_bytes(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.random()).collect()
}

pub fn sort_records(rng: &mut impl Rng, n: usize) -> Vec<SortRecord> {
    (0..n as u64).map(|i| SortRecord::new(rng.random(), i)).collect()
}

/// A word of 1 to 12 mixed-case ASCII letters.
pub fn random_word(rng: &mut impl Rng) -> String {
    let len = rng.random_range(1..=KEY_BYTES);
    (0..len)
        .map(|_| {
            let c = rng.random_range(b'a'..=b'z');
            char::from(if rng.random_bool(0.1) { c.to_ascii_uppercase() } else { c })
        })
        .collect()
}

/// `n` words drawn from a vocabulary of `vocab` words with Zipf-distributed
/// frequencies, like natural text.
pub fn random_words(rng: &mut impl Rng, n: usize, vocab: usize) -> Vec<String> {
    let vocab = vocab.max(1);
    let words: Vec<String> = (0..vocab).map(|_| random_word(rng)).collect();
    let zipf = Zipf::new(vocab as f64, 1.1).expect("vocabulary is non-empty");
    (0..n)
        .map(|_| words[zipf.sample(rng) as usize - 1].clone())
        .collect()
}

/// `blocks` full blocks of text slots.
pub fn text_store(rng: &mut impl Rng, blocks: usize, vocab: usize) -> Result<BlockStore, BlockError> {
    let slots: Vec<TextSlot> = random_words(rng, blocks * TextSlot::PER_BLOCK, vocab)
        .iter()
        .map(|w| TextSlot::from_bytes(w.as_bytes()))
        .collect();
    BlockStore::from_records(&slots)
}

/// `blocks` full blocks of random-word keys with random values.
pub fn kv_store(rng: &mut impl Rng, blocks: usize) -> Result<BlockStore, BlockError> {
    let recs: Vec<KVRecord> = (0..blocks * KVRecord::PER_BLOCK)
        .map(|_| KVRecord::new(random_word(rng).to_ascii_lowercase().as_bytes(), rng.random()))
        .collect();
    BlockStore::from_records(&recs)
}

/// Points around `clusters` centres in `[0, 1000)^2` with unit-ten spread.
pub fn blob_points(rng: &mut impl Rng, n: usize, clusters: usize) -> Vec<Point> {
    let centres: Vec<(f64, f64)> = (0..clusters.max(1))
        .map(|_| (rng.random_range(50.0..950.0), rng.random_range(50.0..950.0)))
        .collect();
    let noise = Normal::new(0.0, 10.0).expect("positive spread");
    (0..n)
        .map(|_| {
            let (cx, cy) = centres[rng.random_range(0..centres.len())];
            Point::from_f64(cx + noise.sample(rng), cy + noise.sample(rng))
        })
        .collect()
}

/// `blocks` full blocks of clustered points.
pub fn point_store(rng: &mut impl Rng, blocks: usize, clusters: usize) -> Result<BlockStore, BlockError> {
    BlockStore::from_records(&blob_points(rng, blocks * Point::PER_BLOCK, clusters))
}

/// Directed graph where each ordered pair is an edge with probability
/// `density`, weights in `1..=max_weight`.
pub fn random_graph(rng: &mut impl Rng, n: usize, density: f64, max_weight: u64) -> DistMatrix {
    let mut m = DistMatrix::new(n);
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(density) {
                m.add_edge(u, v, rng.random_range(1..=max_weight));
            }
        }
    }
    m
}
