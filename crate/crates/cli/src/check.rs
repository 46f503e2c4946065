//! Checks that an implementation's access trace does not depend on its
//! input, by running it on random pairs of same-shape inputs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use obliv_core::apps::{kmeans, wordcount, KMeansConfig};
use obliv_core::blocks::{block_bitonic_sort, o_block_read_linear, BlockRecord};
use obliv_core::oprim::{o_array_read, o_array_write};
use obliv_core::workload::{self, WorkloadRng};
use obliv_core::{
    bitonic_sort, capture, check_invariance, o_edit_distance, o_floyd_warshall, BlockStore,
    InstrumentedBuffer, InvarianceReport, KMeansImpl, KVRecord, Point, WordCountImpl,
};
use rand::Rng;

use crate::error::{CliError, Result};
use crate::scenario::{Impl, Kind};

/// Iterations used by the KMeans check unless the shape gives a third value.
pub const CHECK_KMEANS_ITERATIONS: usize = 3;

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub kind: Kind,
    pub imp: Impl,
    pub shape: Vec<usize>,
    pub invariance: InvarianceReport,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.invariance.all_passed()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let shape: Vec<String> = self.shape.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{} {} shape {}", self.kind, self.imp, shape.join(","));
        for o in &self.invariance.outcomes {
            match o.divergence {
                None => {
                    let _ = writeln!(out, "pair {}: identical ({} events)", o.pair, o.events);
                }
                Some(i) => {
                    let show = |e: Option<obliv_core::AccessEvent>| {
                        e.map_or_else(|| "<end of trace>".to_owned(), |e| e.to_string())
                    };
                    let _ = writeln!(
                        out,
                        "pair {}: DIVERGED at event {}: {} vs {}",
                        o.pair,
                        i,
                        show(o.left),
                        show(o.right)
                    );
                }
            }
        }
        let _ = writeln!(
            out,
            "{}/{} pairs identical",
            self.invariance.passed(),
            self.invariance.outcomes.len()
        );
        out
    }
}

/// Distinct input seeds for the two sides of each pair.
fn input_rng(seed: u64, pair: usize, side: usize) -> WorkloadRng {
    let tag = ((pair as u64) << 1) | side as u64;
    workload::rng(seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn dims<const N: usize>(kind: Kind, shape: &[usize], what: &str) -> Result<[usize; N]> {
    shape
        .get(..N)
        .filter(|s| s.iter().all(|&d| d > 0))
        .map(|s| s.try_into().expect("slice has N elements"))
        .ok_or_else(|| CliError::usage(format!("{kind} needs --shape {what} (positive values)")))
}

type Job = Box<dyn FnMut(&mut WorkloadRng) -> Result<()>>;

const OBLIVIOUS_KINDS: &str = "array-access linear, block-access linear, sort manual, \
    block-sort manual, edit-distance manual, floyd-warshall manual, wordcount manual, \
    wordcount framework, kmeans manual-cmov";

fn job(kind: Kind, imp: Impl, shape: &[usize]) -> Result<Job> {
    Ok(match (kind, imp) {
        (Kind::ArrayAccess, Impl::Linear) => {
            let [n] = dims(kind, shape, "N")?;
            Box::new(move |rng| {
                let mut buf = InstrumentedBuffer::new((0..n).map(|_| rng.random()).collect());
                let i = rng.random_range(0..n as u64);
                let v: u64 = o_array_read(&buf, i);
                o_array_write(&mut buf, rng.random_range(0..n as u64), v ^ 1);
                Ok(())
            })
        }
        (Kind::BlockAccess, Impl::Linear) => {
            let [b] = dims(kind, shape, "BLOCKS")?;
            Box::new(move |rng| {
                let store = workload::kv_store(rng, b)?;
                o_block_read_linear(&store, rng.random_range(0..b as u64))?;
                Ok(())
            })
        }
        (Kind::Sort, Impl::Manual) => {
            let [n] = dims(kind, shape, "N")?;
            Box::new(move |rng| {
                let mut buf = InstrumentedBuffer::new((0..n).map(|_| rng.random::<u64>()).collect());
                bitonic_sort(&mut buf, true);
                Ok(())
            })
        }
        (Kind::BlockSort, Impl::Manual) => {
            let [b] = dims(kind, shape, "BLOCKS")?;
            Box::new(move |rng| {
                // A secret fill level: only the block count is public.
                let n = rng.random_range((b - 1) * KVRecord::PER_BLOCK + 1..=b * KVRecord::PER_BLOCK);
                let recs: Vec<KVRecord> = (0..n)
                    .map(|_| KVRecord::new(workload::random_word(rng).as_bytes(), rng.random()))
                    .collect();
                let mut store = BlockStore::from_records(&recs)?;
                block_bitonic_sort::<KVRecord>(&mut store, true)?;
                Ok(())
            })
        }
        (Kind::EditDistance, Impl::Manual) => {
            let [l1, l2] = match shape {
                [l] => [*l, *l],
                _ => dims(kind, shape, "LEN1,LEN2")?,
            };
            Box::new(move |rng| {
                let a = InstrumentedBuffer::new(workload::random_bytes(rng, l1));
                let b = InstrumentedBuffer::new(workload::random_bytes(rng, l2));
                o_edit_distance(&a, &b);
                Ok(())
            })
        }
        (Kind::FloydWarshall, Impl::Manual) => {
            let [n] = dims(kind, shape, "NODES")?;
            Box::new(move |rng| {
                let density = rng.random_range(0.05..0.9);
                let mut m = workload::random_graph(rng, n, density, 100);
                o_floyd_warshall(&mut m);
                Ok(())
            })
        }
        (Kind::WordCount, Impl::Manual | Impl::Framework) => {
            let [b] = dims(kind, shape, "BLOCKS")?;
            let imp = if imp == Impl::Manual {
                WordCountImpl::Manual
            } else {
                WordCountImpl::Framework
            };
            Box::new(move |rng| {
                let vocab = rng.random_range(1..2000);
                let input = workload::text_store(rng, b, vocab)?;
                wordcount(&input, imp)?;
                Ok(())
            })
        }
        (Kind::KMeans, Impl::ManualCmov) => {
            let [points, k] = dims(kind, shape, "POINTS,K[,ITERS]")?;
            let iters = shape.get(2).copied().unwrap_or(CHECK_KMEANS_ITERATIONS);
            if points < k {
                return Err(CliError::usage("kmeans needs at least k points"));
            }
            Box::new(move |rng| {
                let clusters = rng.random_range(1..=k);
                let pts = workload::blob_points(rng, points, clusters);
                let store = BlockStore::from_records(&pts)?;
                kmeans(&store, &KMeansConfig::new(k).iterations(iters), KMeansImpl::ManualCmov)?;
                Ok(())
            })
        }
        (Kind::KMeans, Impl::OramHash) => {
            return Err(CliError::Refused(
                "kmeans oram-hash is not trace-invariant: which centroid blocks miss the \
                 LRU cache depends on the data. Use the miss-sequence report \
                 (check-oblivious --miss-report) to measure that residual leakage."
                    .into(),
            ))
        }
        _ => {
            return Err(CliError::usage(format!(
                "{kind} {imp} has no obliviousness guarantee to check; checkable pairs are: \
                 {OBLIVIOUS_KINDS}"
            )))
        }
    })
}

/// Runs `pairs` random same-shape input pairs of `kind`/`imp` and compares
/// raw traces. With `dump`, the trace of the first input is also written
/// there, one event per line.
pub fn check_oblivious(
    kind: Kind,
    imp: Impl,
    shape: &[usize],
    pairs: usize,
    seed: u64,
    dump: Option<&Path>,
) -> Result<CheckReport> {
    if pairs == 0 {
        return Err(CliError::usage("at least one pair is needed"));
    }
    let mut run = job(kind, imp, shape)?;
    if let Some(path) = dump {
        let (res, trace) = capture(|| run(&mut input_rng(seed, 0, 0)))?;
        res?;
        trace.write_dump(BufWriter::new(File::create(path)?))?;
    }
    let mut failure = None;
    let invariance = check_invariance(
        pairs,
        |pair, side| input_rng(seed, pair, side),
        |mut rng| {
            if let Err(e) = run(&mut rng) {
                failure.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(CheckReport {
        kind,
        imp,
        shape: shape.to_vec(),
        invariance,
    })
}

/// How much the ORAM fetch sequence of OramHash KMeans varies with the data.
#[derive(Clone, Debug, PartialEq)]
pub struct MissReport {
    pub runs: usize,
    pub distinct_sequences: usize,
    /// Shannon entropy of the empirical distribution of miss sequences.
    pub entropy_bits: f64,
    pub min_misses: usize,
    pub max_misses: usize,
}

impl MissReport {
    pub fn render(&self) -> String {
        format!(
            "miss sequences over {} runs: {} distinct, {:.3} bits of entropy, {}..={} misses per run\n",
            self.runs, self.distinct_sequences, self.entropy_bits, self.min_misses, self.max_misses
        )
    }
}

/// Runs OramHash KMeans on `runs` random inputs of shape
/// `POINTS,K[,CACHE_BLOCKS]` and summarises the ORAM fetch sequences.
pub fn miss_report(shape: &[usize], runs: usize, seed: u64) -> Result<MissReport> {
    let [points, k] = dims(Kind::KMeans, shape, "POINTS,K[,CACHE_BLOCKS]")?;
    if runs == 0 || points < k {
        return Err(CliError::usage("need at least one run and at least k points"));
    }
    let mut cfg = KMeansConfig::new(k)
        .iterations(CHECK_KMEANS_ITERATIONS)
        .seed(seed);
    if let Some(&m) = shape.get(2) {
        cfg = cfg.cache_blocks(m);
    }
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let (mut lo, mut hi) = (usize::MAX, 0);
    for r in 0..runs {
        let mut rng = input_rng(seed, r, 0);
        let clusters = rng.random_range(1..=k);
        let pts: Vec<Point> = workload::blob_points(&mut rng, points, clusters);
        let store = BlockStore::from_records(&pts)?;
        let log = kmeans(&store, &cfg, KMeansImpl::OramHash)?
            .buffer_stats
            .map(|s| s.miss_log)
            .unwrap_or_default();
        lo = lo.min(log.len());
        hi = hi.max(log.len());
        *seen.entry(log).or_default() += 1;
    }
    let entropy_bits = seen
        .values()
        .map(|&c| {
            let p = c as f64 / runs as f64;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0);
    Ok(MissReport {
        runs,
        distinct_sequences: seen.len(),
        entropy_bits,
        min_misses: lo,
        max_misses: hi,
    })
}
