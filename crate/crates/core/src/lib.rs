//! Data-oblivious primitives, algorithms and block-level processing, with an
//! access-trace recorder for checking that memory behaviour does not depend
//! on secret inputs.
//!
//! * [`trace`] records reads and writes of instrumented memory.
//! * [`oprim`] has branch-free selection and comparison.
//! * [`oram`] is a Path ORAM.
//! * [`oalg`] holds bitonic sort, edit distance and Floyd-Warshall.
//! * [`blocks`] stores 1 KiB blocks in files and sorts or fetches them
//!   obliviously.
//! * [`apps`] builds WordCount and KMeans on top.
//!
//! ```
//! use obliv_core::{bitonic_sort, capture, InstrumentedBuffer};
//!
//! let run = |v: Vec<u64>| {
//!     capture(|| {
//!         let mut buf = InstrumentedBuffer::new(v);
//!         bitonic_sort(&mut buf, true);
//!         buf.into_inner()
//!     })
//!     .unwrap()
//! };
//! let (a, ta) = run(vec![3, 1, 2]);
//! let (_, tb) = run(vec![9, 9, 0]);
//! assert_eq!(a, vec![1, 2, 3]);
//! assert_eq!(ta, tb);
//! ```

pub mod apps;
pub mod blocks;
pub mod oalg;
pub mod oprim;
pub mod oram;
pub mod trace;
pub mod workload;

pub use apps::{AppError, KMeansImpl, WordCountImpl};
pub use blocks::{
    AccessMethod, AggRecord, Block, BlockError, BlockRecord, BlockStore, KVRecord, Point,
    TextSlot, BLOCK_BYTES,
};
pub use oalg::{bitonic_sort, o_edit_distance, o_floyd_warshall, DistMatrix, SortRecord, INF};
pub use oprim::{CondSelect, Mask, SecretWord};
pub use oram::{OramConfig, OramError, OramOp, PathOram};
pub use trace::{
    capture, check_invariance, AccessEvent, AccessKind, AccessTrace, InstrumentedBuffer,
    InvarianceReport, TraceError,
};
