//! File-backed array of blocks.
//!
//! Every traced read and write is one event of width [`BLOCK_BYTES`] whose
//! offset is the block index. The file always holds exactly
//! `len() * BLOCK_BYTES` bytes.

use std::fs::{File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use super::block::{Block, BlockRecord, BLOCK_BYTES};
use super::BlockError;
use crate::trace::{RegionId, TraceRegion};

#[derive(Debug)]
pub struct BlockStore {
    file: File,
    path: Option<PathBuf>,
    count: usize,
    region: TraceRegion,
}

impl BlockStore {
    /// Creates (or truncates) `path` holding `count` zeroed blocks.
    pub fn create(path: impl AsRef<Path>, count: usize) -> Result<Self, BlockError> {
        let path = path.as_ref();
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)?;
        file.set_len((count * BLOCK_BYTES) as u64)?;
        Ok(Self::wrap(file, Some(path.to_path_buf()), count))
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, BlockError> {
        let path = path.as_ref();
        let file = OpenOptions::new().read(true).write(true).open(path)?;
        let len = file.metadata()?.len();
        if len % BLOCK_BYTES as u64 != 0 {
            return Err(BlockError::Format(format!(
                "{}: length {len} is not a multiple of {BLOCK_BYTES}",
                path.display()
            )));
        }
        let count = (len / BLOCK_BYTES as u64) as usize;
        Ok(Self::wrap(file, Some(path.to_path_buf()), count))
    }

    /// Anonymous store in a temporary file that disappears on drop.
    pub fn scratch(count: usize) -> Result<Self, BlockError> {
        let file = tempfile::tempfile()?;
        file.set_len((count * BLOCK_BYTES) as u64)?;
        Ok(Self::wrap(file, None, count))
    }

    /// Scratch store holding `blocks`, written without tracing.
    pub fn from_blocks(blocks: &[Block]) -> Result<Self, BlockError> {
        let mut s = Self::scratch(blocks.len())?;
        for (i, b) in blocks.iter().enumerate() {
            s.poke(i, b)?;
        }
        Ok(s)
    }

    /// Packs `records` into full blocks, the last one possibly partial.
    pub fn from_records<R: BlockRecord>(records: &[R]) -> Result<Self, BlockError> {
        let blocks: Vec<Block> = records
            .chunks(R::PER_BLOCK)
            .map(Block::from_records)
            .collect();
        Self::from_blocks(&blocks)
    }

    fn wrap(file: File, path: Option<PathBuf>, count: usize) -> Self {
        Self {
            file,
            path,
            count,
            region: TraceRegion::new(BLOCK_BYTES as u32),
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn region(&self) -> RegionId {
        self.region.id()
    }

    pub fn set_recording(&mut self, on: bool) {
        self.region.set_recording(on);
    }

    fn check(&self, id: usize) -> Result<(), BlockError> {
        if id >= self.count {
            return Err(BlockError::OutOfRange {
                id: id as u64,
                count: self.count,
            });
        }
        Ok(())
    }

    pub fn read_block(&self, id: usize) -> Result<Block, BlockError> {
        let b = self.peek(id)?;
        self.region.note_read(id);
        Ok(b)
    }

    pub fn write_block(&mut self, id: usize, b: &Block) -> Result<(), BlockError> {
        self.poke(id, b)?;
        self.region.note_write(id);
        Ok(())
    }

    /// Untraced read, for setup and verification.
    pub fn peek(&self, id: usize) -> Result<Block, BlockError> {
        self.check(id)?;
        let mut buf = [0u8; BLOCK_BYTES];
        self.file
            .read_exact_at(&mut buf, (id * BLOCK_BYTES) as u64)?;
        Ok(Block::from_bytes(&buf))
    }

    /// Untraced write, for setup.
    pub fn poke(&mut self, id: usize, b: &Block) -> Result<(), BlockError> {
        self.check(id)?;
        self.file
            .write_all_at(&b.to_bytes(), (id * BLOCK_BYTES) as u64)?;
        Ok(())
    }

    /// Grows with zeroed blocks or truncates. The count is public.
    pub fn resize(&mut self, count: usize) -> Result<(), BlockError> {
        self.file.set_len((count * BLOCK_BYTES) as u64)?;
        self.count = count;
        Ok(())
    }

    /// All blocks, untraced.
    pub fn snapshot(&self) -> Result<Vec<Block>, BlockError> {
        (0..self.count).map(|i| self.peek(i)).collect()
    }

    /// Records below each block's record count, in block order, untraced.
    pub fn records<R: BlockRecord>(&self) -> Result<Vec<R>, BlockError> {
        let mut out = Vec::new();
        for i in 0..self.count {
            out.extend(self.peek(i)?.records::<R>());
        }
        Ok(out)
    }

    /// Copies every block into a new scratch store, untraced.
    pub fn duplicate(&self) -> Result<BlockStore, BlockError> {
        Self::from_blocks(&self.snapshot()?)
    }

    pub fn sync(&self) -> Result<(), BlockError> {
        self.file.sync_all()?;
        Ok(())
    }
}
