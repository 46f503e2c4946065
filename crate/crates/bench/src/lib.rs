//! Criterion benchmark targets live under `benches/`.
