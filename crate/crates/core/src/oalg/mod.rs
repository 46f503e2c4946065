//! Compute-intensive oblivious algorithms, each paired with a plain twin used
//! as a benchmark baseline and test oracle.

pub mod edit;
pub mod floyd;
pub mod sort;

pub use edit::{edit_distance_plain, o_edit_distance, o_edit_distance_with, DpLayout};
pub use floyd::{floyd_warshall_plain, o_floyd_warshall, sat_add, DistMatrix, INF};
pub use sort::{
    bitonic_sort, comparator_count, for_each_comparator, SortRecord, SortStats, Sortable,
};
