//! Materialises seeded input block files.

use std::path::Path;

use clap::ValueEnum;
use obliv_core::workload;
use obliv_core::BlockStore;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// Text slots, one word each, for wordcount.
    #[value(name = "wordcount")]
    Text,
    /// Clustered 16.16 fixed-point points, for kmeans.
    #[value(name = "kmeans")]
    Points,
    /// Key/value records, for block-sort and block-access.
    #[value(name = "kv")]
    Kv,
}

/// Writes `blocks` full blocks of `kind` data to `path`. `param` is the
/// vocabulary size for text and the number of clusters for points.
pub fn gen_input(kind: GenKind, blocks: usize, param: usize, seed: u64, path: &Path) -> Result<BlockStore> {
    if blocks == 0 || param == 0 {
        return Err(CliError::usage("blocks and the kind parameter must be positive"));
    }
    let mut rng = workload::rng(seed);
    let data = match kind {
        GenKind::Text => workload::text_store(&mut rng, blocks, param)?,
        GenKind::Points => workload::point_store(&mut rng, blocks, param)?,
        GenKind::Kv => workload::kv_store(&mut rng, blocks)?,
    };
    let mut out = BlockStore::create(path, data.len())?;
    for i in 0..data.len() {
        out.poke(i, &data.peek(i)?)?;
    }
    out.sync()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use obliv_core::Point;

    #[test]
    fn generated_file_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.blk");
        gen_input(GenKind::Points, 3, 5, 7, &path).unwrap();
        let st = BlockStore::open(&path).unwrap();
        assert_eq!(st.len(), 3);
        assert_eq!(st.records::<Point>().unwrap().len(), 3 * 126);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 3 * 1024);
    }

    #[test]
    fn same_seed_same_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        gen_input(GenKind::Text, 2, 50, 1, &a).unwrap();
        gen_input(GenKind::Text, 2, 50, 1, &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
