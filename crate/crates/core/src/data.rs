//! Labeled feature vectors and the synthetic class/mode generator.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Gaussian};

/// One latent vector with its class and domain annotation.
///
/// The domain label identifies the environment or object the vector was
/// recorded in; lifelong and mixed scenarios slice on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub class_label: u32,
    pub domain_label: u32,
}

impl Example {
    pub fn new(features: Vec<f64>, class_label: u32, domain_label: u32) -> Self {
        Self {
            features,
            class_label,
            domain_label,
        }
    }

    pub fn class(&self) -> usize {
        self.class_label as usize
    }
}

/// An immutable, validated collection of examples sharing one latent dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    num_classes: usize,
    examples: Vec<Example>,
}

impl FeatureSet {
    pub fn new(dim: usize, num_classes: usize, examples: Vec<Example>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation(
                "feature dimension must be positive".into(),
            ));
        }
        if num_classes == 0 {
            return Err(Error::Validation(
                "number of classes must be positive".into(),
            ));
        }
        for (i, ex) in examples.iter().enumerate() {
            if ex.features.len() != dim {
                return Err(Error::Validation(format!(
                    "example {i} has {} features, expected {dim}",
                    ex.features.len()
                )));
            }
            if ex.class() >= num_classes {
                return Err(Error::Validation(format!(
                    "example {i} has class {} but the set declares {num_classes} classes",
                    ex.class_label
                )));
            }
            if let Some(j) = ex.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "example {i} has a non-finite value at feature {j}"
                )));
            }
        }
        Ok(Self {
            dim,
            num_classes,
            examples,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Example> {
        self.examples.get(index)
    }

    pub fn classes_observed(&self) -> BTreeSet<u32> {
        self.examples.iter().map(|e| e.class_label).collect()
    }

    pub fn domains_observed(&self) -> BTreeSet<u32> {
        self.examples.iter().map(|e| e.domain_label).collect()
    }

    /// New set holding the examples at `indices`, in that order.
    ///
    /// Panics if an index is out of bounds.
    pub fn select(&self, indices: &[usize]) -> FeatureSet {
        FeatureSet {
            dim: self.dim,
            num_classes: self.num_classes,
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }
}

/// Parameters of the Gaussian class/mode generator.
///
/// Each class owns `modes_per_class` clusters; the mode index becomes the
/// example's domain label, mirroring a class/environment annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub modes_per_class: usize,
    pub dim: usize,
    pub center_scale: f64,
    pub stddev: f64,
    pub train_per_mode: usize,
    pub test_per_mode: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 10,
            modes_per_class: 5,
            dim: 32,
            center_scale: 1.0,
            stddev: 0.5,
            train_per_mode: 100,
            test_per_mode: 20,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_classes", self.num_classes),
            ("modes_per_class", self.modes_per_class),
            ("dim", self.dim),
            ("train_per_mode", self.train_per_mode),
            ("test_per_mode", self.test_per_mode),
        ];
        for (key, value) in counts {
            if value == 0 {
                return Err(Error::Validation(format!("{key} must be positive")));
            }
        }
        if !(self.center_scale.is_finite() && self.center_scale > 0.0) {
            return Err(Error::Validation("center_scale must be positive".into()));
        }
        if !(self.stddev.is_finite() && self.stddev > 0.0) {
            return Err(Error::Validation("stddev must be positive".into()));
        }
        if u32::try_from(self.num_classes).is_err() || u32::try_from(self.modes_per_class).is_err()
        {
            return Err(Error::Validation("label counts must fit in 32 bits".into()));
        }
        Ok(())
    }
}

const CENTER_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;

/// Draws train and test sets from the same class/mode clusters.
///
/// Values are rounded to `f32` precision so that the in-memory sets are
/// exactly what the feature file format stores.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(FeatureSet, FeatureSet)> {
    spec.validate()?;
    let mut gauss = Gaussian::new();
    let mut center_rng = rng::seeded(rng::derive_seed(spec.seed, CENTER_STREAM));
    let centers: Vec<Vec<f64>> = (0..spec.num_classes * spec.modes_per_class)
        .map(|_| {
            (0..spec.dim)
                .map(|_| spec.center_scale * gauss.sample(&mut center_rng))
                .collect()
        })
        .collect();

    let draw = |stream: u64, per_mode: usize| -> Result<FeatureSet> {
        let mut rng = rng::seeded(rng::derive_seed(spec.seed, stream));
        let mut gauss = Gaussian::new();
        let mut examples = Vec::with_capacity(centers.len() * per_mode);
        for class in 0..spec.num_classes {
            for mode in 0..spec.modes_per_class {
                let center = &centers[class * spec.modes_per_class + mode];
                for _ in 0..per_mode {
                    let features = center
                        .iter()
                        .map(|c| (c + spec.stddev * gauss.sample(&mut rng)) as f32 as f64)
                        .collect();
                    examples.push(Example::new(features, class as u32, mode as u32));
                }
            }
        }
        FeatureSet::new(spec.dim, spec.num_classes, examples)
    };

    Ok((
        draw(TRAIN_STREAM, spec.train_per_mode)?,
        draw(TEST_STREAM, spec.test_per_mode)?,
    ))
}
