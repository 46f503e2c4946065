//! Fixed-size block storage and block-granular oblivious operations.

mod access;
mod block;
mod buffer;
mod merge;
mod sort;
mod store;

use thiserror::Error;

use crate::oram::OramError;

pub use access::{o_block_read_linear, AccessMethod, BlockAccessor, OramBlocks};
pub use block::{
    AggRecord, Block, BlockRecord, KVRecord, Point, TextSlot, BLOCK_BYTES, BLOCK_LANES,
    BODY_LANES, HEADER_LANES, KEY_BYTES, TEXT_SLOT_BYTES,
};
pub use buffer::{BlockId, BufferConfig, BufferManager, BufferStats, DEFAULT_CACHE_BLOCKS};
pub use merge::{
    merge_split, merge_split_comparators, sort_block, sort_block_comparators, MergeScratch,
};
pub use sort::{block_bitonic_sort, external_sort_plain, BlockSortStats};
pub use store::BlockStore;

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("block I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Oram(#[from] OramError),
    #[error("malformed block file: {0}")]
    Format(String),
    #[error("block {id} out of range for a store of {count} blocks")]
    OutOfRange { id: u64, count: usize },
    #[error("block {id} was never created")]
    UnknownBlock { id: u64 },
    #[error("block capacity of {capacity} exhausted")]
    Capacity { capacity: u64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}
