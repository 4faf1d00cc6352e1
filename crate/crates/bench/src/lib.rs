//! Criterion benchmarks for the preprocessing, augmentation and training hot paths.
//! Run with `cargo bench -p sgda-bench`.
