//! Data-intensive applications built on the block layer.

pub mod geometry;
pub mod kmeans;
pub mod mapreduce;
pub mod wordcount;

use thiserror::Error;

use crate::blocks::BlockError;

pub use geometry::{find_nearest_centroid, nearest_centroid_plain, squared_distance};
pub use kmeans::{
    initial_centroids, kmeans, read_centroids, write_centroids, Centroid, KMeansConfig,
    KMeansImpl, KMeansResult,
};
pub use mapreduce::{mr_run, Mapper, MrConfig, MrOutput, Reducer};
pub use wordcount::{
    normalize_word, normalize_word_plain, pack_text, wordcount, WordCountImpl, WordCountMapper,
    WordCountOutput,
};

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("intermediate data needs {needed} blocks, limit is {limit}")]
    Capacity { needed: usize, limit: usize },
    #[error("mapper emitted {got} records for a block, expected {expected}")]
    Contract { expected: usize, got: usize },
}
