//! Fetching one block by a secret index.

use super::block::Block;
use super::store::BlockStore;
use super::BlockError;
use crate::oprim::{o_equal, CondSelect};
use crate::oram::{OramConfig, PathOram};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AccessMethod {
    /// Read every block and keep the match with a masked select.
    Linear,
    /// One Path ORAM access over a copy of the store.
    Oram,
}

/// Scans the whole store. An index past the end yields a zeroed block.
pub fn o_block_read_linear(store: &BlockStore, id: u64) -> Result<Block, BlockError> {
    let mut out = Block::zeroed();
    for j in 0..store.len() {
        let b = store.read_block(j)?;
        out.cond_assign(o_equal(j as u64, id), &b);
    }
    Ok(out)
}

/// A store's blocks behind a Path ORAM.
pub struct OramBlocks {
    oram: PathOram<Block>,
}

impl OramBlocks {
    /// Bulk-loads `store` (untraced setup) into a fresh ORAM.
    pub fn load(store: &BlockStore, seed: u64) -> Result<Self, BlockError> {
        let blocks = store.snapshot()?;
        let cfg = OramConfig::new(blocks.len().max(1) as u64).seed(seed);
        Ok(Self {
            oram: PathOram::load(cfg, &blocks)?,
        })
    }

    pub fn read(&mut self, id: u64) -> Result<Block, BlockError> {
        Ok(self.oram.read(id)?)
    }

    pub fn write(&mut self, id: u64, b: &Block) -> Result<(), BlockError> {
        self.oram.write(id, *b)?;
        Ok(())
    }

    pub fn oram(&self) -> &PathOram<Block> {
        &self.oram
    }

    pub fn set_recording(&mut self, on: bool) {
        self.oram.set_recording(on);
    }
}

/// Random block reads with a chosen protection.
pub enum BlockAccessor<'a> {
    Linear(&'a BlockStore),
    Oram(Box<OramBlocks>),
}

impl<'a> BlockAccessor<'a> {
    pub fn new(store: &'a BlockStore, method: AccessMethod, seed: u64) -> Result<Self, BlockError> {
        Ok(match method {
            AccessMethod::Linear => BlockAccessor::Linear(store),
            AccessMethod::Oram => BlockAccessor::Oram(Box::new(OramBlocks::load(store, seed)?)),
        })
    }

    /// Out-of-range ids return a zeroed block under both methods.
    pub fn access(&mut self, id: u64) -> Result<Block, BlockError> {
        match self {
            BlockAccessor::Linear(s) => o_block_read_linear(s, id),
            BlockAccessor::Oram(o) => o.read(id),
        }
    }
}
