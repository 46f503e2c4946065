//! Timed scenarios: one (kind, implementation, size) point of a benchmark
//! series.

use std::fmt;
use std::hint::black_box;
use std::path::PathBuf;
use std::time::Instant;

use clap::ValueEnum;
use obliv_core::apps::{kmeans, wordcount, KMeansConfig};
use obliv_core::blocks::{
    block_bitonic_sort, external_sort_plain, o_block_read_linear, OramBlocks,
};
use obliv_core::oalg::{edit_distance_plain, floyd_warshall_plain};
use obliv_core::oprim::{o_array_read, o_select};
use obliv_core::workload::{self, WorkloadRng};
use obliv_core::{
    bitonic_sort, o_edit_distance, DistMatrix, o_floyd_warshall, BlockStore, CondSelect, InstrumentedBuffer,
    KMeansImpl, KVRecord, Mask, OramConfig, PathOram, SortRecord, WordCountImpl,
};
use rand::Rng;

use crate::error::{CliError, Result};

/// Random accesses timed together; the reported time is per access.
pub const ARRAY_BATCH: usize = 64;
pub const BLOCK_BATCH: usize = 16;
/// Inputs sorted per repetition; the reported time is per sort.
pub const SORT_BATCH: usize = 16;
pub const EDIT_BATCH: usize = 4;
pub const DEFAULT_BRANCH_ITERATIONS: usize = 1_000_000;
pub const DEFAULT_REPS: usize = 5;
pub const WORD_VOCABULARY: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum)]
pub enum Kind {
    ArrayAccess,
    Branching,
    Sort,
    BlockAccess,
    BlockSort,
    EditDistance,
    FloydWarshall,
    #[value(name = "wordcount")]
    WordCount,
    #[value(name = "kmeans")]
    KMeans,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum)]
pub enum Impl {
    Unprotected,
    Linear,
    Oram,
    Manual,
    Framework,
    ManualCmov,
    OramHash,
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_owned())
        .unwrap_or_default()
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&value_name(self))
    }
}

impl fmt::Display for Impl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&value_name(self))
    }
}

impl Kind {
    pub fn impls(self) -> &'static [Impl] {
        use Impl::*;
        match self {
            Kind::ArrayAccess | Kind::BlockAccess => &[Unprotected, Linear, Oram],
            Kind::Branching
            | Kind::Sort
            | Kind::BlockSort
            | Kind::EditDistance
            | Kind::FloydWarshall => &[Unprotected, Manual],
            Kind::WordCount => &[Unprotected, Manual, Framework],
            Kind::KMeans => &[Unprotected, ManualCmov, OramHash, Framework],
        }
    }

    /// Fixed record size of block-based kinds; whole blocks for block access.
    pub fn record_bytes(self) -> Option<usize> {
        match self {
            Kind::BlockAccess => Some(obliv_core::BLOCK_BYTES),
            Kind::BlockSort | Kind::WordCount => Some(16),
            Kind::KMeans => Some(8),
            _ => None,
        }
    }

    /// Kinds whose input lives in block files.
    pub fn is_block_kind(self) -> bool {
        matches!(
            self,
            Kind::BlockAccess | Kind::BlockSort | Kind::WordCount | Kind::KMeans
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub kind: Kind,
    pub imp: Impl,
    /// Records, sequence length, nodes, loop iterations or blocks, by kind.
    pub n: usize,
    /// 8 or 16; array access and sort only.
    pub record_bytes: usize,
    /// Clusters for KMeans.
    pub k: usize,
    /// KMeans iterations.
    pub iters: usize,
    pub reps: usize,
    pub seed: u64,
    /// Probability that the secret bit of the branching loop is set.
    pub bias: f64,
    /// Existing block file to use instead of generated input.
    pub input: Option<PathBuf>,
}

impl Scenario {
    pub fn new(kind: Kind, imp: Impl, n: usize) -> Self {
        Self {
            kind,
            imp,
            n,
            record_bytes: 8,
            k: 5,
            iters: 10,
            reps: DEFAULT_REPS,
            seed: 0,
            bias: 0.5,
            input: None,
        }
    }

    pub fn record_bytes(mut self, b: usize) -> Self {
        self.record_bytes = b;
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn iters(mut self, t: usize) -> Self {
        self.iters = t;
        self
    }

    pub fn reps(mut self, r: usize) -> Self {
        self.reps = r;
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = s;
        self
    }

    pub fn bias(mut self, p: f64) -> Self {
        self.bias = p;
        self
    }

    pub fn input(mut self, path: impl Into<PathBuf>) -> Self {
        self.input = Some(path.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kind.impls().contains(&self.imp) {
            return Err(CliError::usage(format!(
                "kind {} has no implementation {}; choose one of {}",
                self.kind,
                self.imp,
                self.kind
                    .impls()
                    .iter()
                    .map(Impl::to_string)
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        if self.n == 0 && self.input.is_none() {
            return Err(CliError::usage("size must be at least 1"));
        }
        if self.reps < 3 {
            return Err(CliError::usage("at least 3 repetitions are needed"));
        }
        if !matches!(self.record_bytes, 8 | 16) {
            return Err(CliError::usage("record size must be 8 or 16 bytes"));
        }
        if self.record_bytes == 16 && !matches!(self.kind, Kind::ArrayAccess | Kind::Sort) {
            return Err(CliError::usage(
                "16-byte records apply to array-access and sort only",
            ));
        }
        if !(0.0..=1.0).contains(&self.bias) {
            return Err(CliError::usage("bias must lie in [0, 1]"));
        }
        if self.kind == Kind::KMeans && (self.k == 0 || self.iters == 0) {
            return Err(CliError::usage("kmeans needs k >= 1 and at least one iteration"));
        }
        if self.input.is_some() && !self.kind.is_block_kind() {
            return Err(CliError::usage(format!("kind {} does not read block files", self.kind)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub scenario: Scenario,
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    /// Comparators for oblivious sorts, distinct words for WordCount, ORAM
    /// fetches for OramHash KMeans.
    pub aux_count: Option<u64>,
}

impl Measurement {
    fn from_samples(scenario: Scenario, mut samples: Vec<f64>, aux_count: Option<u64>) -> Self {
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let median_ms = if n % 2 == 1 {
            samples[n / 2]
        } else {
            (samples[n / 2 - 1] + samples[n / 2]) / 2.0
        };
        Self {
            scenario,
            median_ms,
            min_ms: samples[0],
            max_ms: samples[n - 1],
            aux_count,
        }
    }
}

/// One repetition: elapsed milliseconds of the timed part, plus the
/// auxiliary count.
type Rep<'a> = Box<dyn FnMut() -> Result<(f64, Option<u64>)> + 'a>;

fn ms(start: Instant, per: usize) -> f64 {
    start.elapsed().as_secs_f64() * 1e3 / per as f64
}

/// Builds inputs from the seed, runs once untimed as warm-up, then times
/// `reps` repetitions.
pub fn run_scenario(s: &Scenario) -> Result<Measurement> {
    s.validate()?;
    let mut rng = workload::rng(s.seed);
    let store = match &s.input {
        Some(path) => Some(BlockStore::open(path)?),
        None => None,
    };
    let mut echo = s.clone();
    if let Some(st) = &store {
        echo.n = st.len();
    }
    echo.record_bytes = s.kind.record_bytes().unwrap_or(s.record_bytes);
    let mut rep: Rep = match s.kind {
        Kind::ArrayAccess if s.record_bytes == 8 => array_access::<u64>(s, &mut rng, |x| x)?,
        Kind::ArrayAccess => array_access::<[u64; 2]>(s, &mut rng, |x| [x, !x])?,
        Kind::Branching => branching(s, &mut rng),
        Kind::Sort if s.record_bytes == 8 => {
            let data: Vec<u64> = (0..s.n).map(|_| rng.random()).collect();
            sort(s, data, |v| v.sort_unstable())
        }
        Kind::Sort => {
            let data = workload::sort_records(&mut rng, s.n);
            sort(s, data, |v| v.sort_unstable_by_key(|r| r.key))
        }
        Kind::BlockAccess => block_access(s, &mut rng, store)?,
        Kind::BlockSort => block_sort(s, &mut rng, store)?,
        Kind::EditDistance => edit_distance(s, &mut rng),
        Kind::FloydWarshall => floyd(s, &mut rng),
        Kind::WordCount => word_count(s, &mut rng, store)?,
        Kind::KMeans => k_means(s, &mut rng, store)?,
    };
    rep()?;
    let mut samples = Vec::with_capacity(s.reps);
    let mut aux = None;
    for _ in 0..s.reps {
        let (t, a) = rep()?;
        samples.push(t);
        aux = a;
    }
    Ok(Measurement::from_samples(echo, samples, aux))
}

fn array_access<'a, T>(
    s: &Scenario,
    rng: &mut WorkloadRng,
    make: fn(u64) -> T,
) -> Result<Rep<'a>>
where
    T: CondSelect + Copy + Default + 'a,
{
    let n = s.n;
    let values: Vec<T> = (0..n).map(|_| make(rng.random())).collect();
    let mut idx_rng = workload::rng(s.seed ^ 0xA11CE);
    let mut next_batch = move || -> Vec<u64> {
        (0..ARRAY_BATCH)
            .map(|_| idx_rng.random_range(0..n as u64))
            .collect()
    };
    Ok(match s.imp {
        Impl::Unprotected => Box::new(move || {
            let idx = next_batch();
            let start = Instant::now();
            for &i in &idx {
                black_box(values[black_box(i) as usize]);
            }
            Ok((ms(start, ARRAY_BATCH), None))
        }),
        Impl::Linear => {
            let mut buf = InstrumentedBuffer::new(values);
            buf.set_recording(false);
            Box::new(move || {
                let idx = next_batch();
                let start = Instant::now();
                for &i in &idx {
                    black_box(o_array_read(&buf, black_box(i)));
                }
                Ok((ms(start, ARRAY_BATCH), None))
            })
        }
        _ => {
            let cfg = OramConfig::new(n as u64).seed(s.seed);
            let mut oram = PathOram::load(cfg, &values)?;
            oram.set_recording(false);
            Box::new(move || {
                let idx = next_batch();
                let start = Instant::now();
                for &i in &idx {
                    black_box(oram.read(black_box(i))?);
                }
                Ok((ms(start, ARRAY_BATCH), None))
            })
        }
    })
}

/// Cheap arm of the branching loop.
#[inline]
pub fn cheap_kernel(x: u64) -> u64 {
    x.wrapping_add(0x9E37_79B9_7F4A_7C15)
}

/// Expensive arm: sixteen multiply/xor-shift rounds.
#[inline]
pub fn expensive_kernel(mut x: u64) -> u64 {
    for _ in 0..16 {
        x ^= x >> 31;
        x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    }
    x
}

/// The loop body picks a kernel by a secret bit. The unprotected variant
/// branches; the manual one runs both kernels and selects.
pub fn branch_loop_plain(bits: &[u64], seed: u64) -> u64 {
    let mut acc = seed;
    for &b in bits {
        acc = if b != 0 {
            expensive_kernel(acc)
        } else {
            cheap_kernel(acc)
        };
    }
    acc
}

pub fn branch_loop_oblivious(bits: &[u64], seed: u64) -> u64 {
    let mut acc = seed;
    for &b in bits {
        acc = o_select(Mask::from_bit(b), expensive_kernel(acc), cheap_kernel(acc));
    }
    acc
}

fn branching<'a>(s: &Scenario, rng: &mut WorkloadRng) -> Rep<'a> {
    let bits: Vec<u64> = (0..s.n).map(|_| rng.random_bool(s.bias) as u64).collect();
    let f = match s.imp {
        Impl::Unprotected => branch_loop_plain,
        _ => branch_loop_oblivious,
    };
    let seed = s.seed;
    Box::new(move || {
        let start = Instant::now();
        black_box(f(black_box(&bits), seed));
        Ok((ms(start, 1), None))
    })
}

trait SortInput: obliv_core::oalg::Sortable + Copy + 'static {}
impl SortInput for u64 {}
impl SortInput for SortRecord {}

fn sort<'a, T: SortInput>(s: &Scenario, data: Vec<T>, plain: fn(&mut Vec<T>)) -> Rep<'a> {
    match s.imp {
        Impl::Unprotected => Box::new(move || {
            let mut copies = vec![data.clone(); SORT_BATCH];
            let start = Instant::now();
            for c in copies.iter_mut() {
                plain(black_box(c));
            }
            Ok((ms(start, SORT_BATCH), None))
        }),
        _ => Box::new(move || {
            let mut copies: Vec<InstrumentedBuffer<T>> = (0..SORT_BATCH)
                .map(|_| {
                    let mut b = InstrumentedBuffer::new(data.clone());
                    b.set_recording(false);
                    b
                })
                .collect();
            let start = Instant::now();
            let mut comparators = 0;
            for c in copies.iter_mut() {
                comparators = bitonic_sort(black_box(c), true).comparators;
            }
            Ok((ms(start, SORT_BATCH), Some(comparators)))
        }),
    }
}

fn block_input(
    s: &Scenario,
    store: Option<BlockStore>,
    make: impl FnOnce() -> Result<BlockStore>,
) -> Result<BlockStore> {
    let mut st = match store {
        Some(st) => st,
        None => make()?,
    };
    st.set_recording(false);
    if st.is_empty() {
        return Err(CliError::usage(format!("{} needs a non-empty input", s.kind)));
    }
    Ok(st)
}

fn block_access<'a>(
    s: &Scenario,
    rng: &mut WorkloadRng,
    store: Option<BlockStore>,
) -> Result<Rep<'a>> {
    let store = block_input(s, store, || Ok(workload::kv_store(rng, s.n)?))?;
    let n = store.len() as u64;
    let mut idx_rng = workload::rng(s.seed ^ 0xB10C);
    let mut next_batch = move || -> Vec<u64> {
        (0..BLOCK_BATCH).map(|_| idx_rng.random_range(0..n)).collect()
    };
    Ok(match s.imp {
        Impl::Unprotected => Box::new(move || {
            let idx = next_batch();
            let start = Instant::now();
            for &i in &idx {
                black_box(store.read_block(i as usize)?);
            }
            Ok((ms(start, BLOCK_BATCH), None))
        }),
        Impl::Linear => Box::new(move || {
            let idx = next_batch();
            let start = Instant::now();
            for &i in &idx {
                black_box(o_block_read_linear(&store, black_box(i))?);
            }
            Ok((ms(start, BLOCK_BATCH), None))
        }),
        _ => {
            let mut oram = OramBlocks::load(&store, s.seed)?;
            oram.set_recording(false);
            Box::new(move || {
                let idx = next_batch();
                let start = Instant::now();
                for &i in &idx {
                    black_box(oram.read(black_box(i))?);
                }
                Ok((ms(start, BLOCK_BATCH), None))
            })
        }
    })
}

fn block_sort<'a>(
    s: &Scenario,
    rng: &mut WorkloadRng,
    store: Option<BlockStore>,
) -> Result<Rep<'a>> {
    let store = block_input(s, store, || Ok(workload::kv_store(rng, s.n)?))?;
    let oblivious = s.imp != Impl::Unprotected;
    Ok(Box::new(move || {
        let mut work = store.duplicate()?;
        work.set_recording(false);
        let start = Instant::now();
        let aux = if oblivious {
            Some(block_bitonic_sort::<KVRecord>(&mut work, true)?.block_comparators)
        } else {
            external_sort_plain::<KVRecord>(&mut work)?;
            None
        };
        Ok((ms(start, 1), aux))
    }))
}

fn edit_distance<'a>(s: &Scenario, rng: &mut WorkloadRng) -> Rep<'a> {
    let a = workload::random_bytes(rng, s.n);
    let b = workload::random_bytes(rng, s.n);
    match s.imp {
        Impl::Unprotected => Box::new(move || {
            let start = Instant::now();
            for _ in 0..EDIT_BATCH {
                black_box(edit_distance_plain(black_box(&a), black_box(&b)));
            }
            Ok((ms(start, EDIT_BATCH), None))
        }),
        _ => {
            let mut a = InstrumentedBuffer::new(a);
            let mut b = InstrumentedBuffer::new(b);
            a.set_recording(false);
            b.set_recording(false);
            Box::new(move || {
                let start = Instant::now();
                for _ in 0..EDIT_BATCH {
                    black_box(o_edit_distance(black_box(&a), black_box(&b)));
                }
                Ok((ms(start, EDIT_BATCH), None))
            })
        }
    }
}

fn floyd<'a>(s: &Scenario, rng: &mut WorkloadRng) -> Rep<'a> {
    let graph = workload::random_graph(rng, s.n, 0.3, 100);
    let n = s.n;
    match s.imp {
        Impl::Unprotected => Box::new(move || {
            let mut d = graph.entries().to_vec();
            let start = Instant::now();
            floyd_warshall_plain(n, black_box(&mut d));
            Ok((ms(start, 1), None))
        }),
        _ => Box::new(move || {
            let mut m = DistMatrix::from_entries(n, graph.entries());
            m.set_recording(false);
            let start = Instant::now();
            o_floyd_warshall(black_box(&mut m));
            Ok((ms(start, 1), None))
        }),
    }
}

fn word_count<'a>(
    s: &Scenario,
    rng: &mut WorkloadRng,
    store: Option<BlockStore>,
) -> Result<Rep<'a>> {
    let input = block_input(s, store, || {
        Ok(workload::text_store(rng, s.n, WORD_VOCABULARY)?)
    })?;
    let imp = match s.imp {
        Impl::Unprotected => WordCountImpl::Unprotected,
        Impl::Manual => WordCountImpl::Manual,
        _ => WordCountImpl::Framework,
    };
    Ok(Box::new(move || {
        let start = Instant::now();
        let out = wordcount(&input, imp)?;
        let t = ms(start, 1);
        Ok((t, Some(out.records)))
    }))
}

fn k_means<'a>(
    s: &Scenario,
    rng: &mut WorkloadRng,
    store: Option<BlockStore>,
) -> Result<Rep<'a>> {
    let input = block_input(s, store, || Ok(workload::point_store(rng, s.n, s.k)?))?;
    let imp = match s.imp {
        Impl::Unprotected => KMeansImpl::Unprotected,
        Impl::ManualCmov => KMeansImpl::ManualCmov,
        Impl::OramHash => KMeansImpl::OramHash,
        _ => KMeansImpl::Framework,
    };
    let cfg = KMeansConfig::new(s.k).iterations(s.iters).seed(s.seed);
    Ok(Box::new(move || {
        let start = Instant::now();
        let out = kmeans(&input, &cfg, imp)?;
        let t = ms(start, 1);
        Ok((t, out.buffer_stats.map(|b| b.misses)))
    }))
}
