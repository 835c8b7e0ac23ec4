//! Fixtures shared by the criterion benches.

use driftbench_core::{generate_synthetic, FeatureSet, SyntheticSpec};

/// Train/test sets with `classes` classes in `dim` dimensions, two modes per class.
pub fn fixture(classes: usize, dim: usize, train_per_mode: usize) -> (FeatureSet, FeatureSet) {
    let spec = SyntheticSpec {
        num_classes: classes,
        modes_per_class: 2,
        dim,
        stddev: 0.3,
        train_per_mode,
        test_per_mode: 10,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec).expect("valid fixture spec")
}
