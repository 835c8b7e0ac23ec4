//! A single type over every output layer the trainer can drive.

use std::fmt;
use std::str::FromStr;

use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::gradient::{GradientHead, HeadKind, MaskMode};
use crate::similarity::{KnnState, PrototypeMode, PrototypeState, SldaState};

pub const DEFAULT_KNN_K: usize = 5;

/// Which head to build. Parses from strings such as `WeightNorm`,
/// `CosLayer:single`, `Linear:group`, `KNN:3`, `MeanLayer`, `SLDA`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadSpec {
    Gradient { kind: HeadKind, mask: MaskMode },
    Knn { k: usize },
    Mean,
    Median,
    Slda,
}

impl HeadSpec {
    pub fn gradient(kind: HeadKind, mask: MaskMode) -> Self {
        HeadSpec::Gradient { kind, mask }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HeadSpec::Gradient { kind, .. } => kind.name(),
            HeadSpec::Knn { .. } => "KNN",
            HeadSpec::Mean => "MeanLayer",
            HeadSpec::Median => "MedianLayer",
            HeadSpec::Slda => "SLDA",
        }
    }

    pub fn mask(&self) -> MaskMode {
        match self {
            HeadSpec::Gradient { mask, .. } => *mask,
            _ => MaskMode::NoMask,
        }
    }

    pub fn is_gradient(&self) -> bool {
        matches!(self, HeadSpec::Gradient { .. })
    }

    /// Learning rate used when the configuration does not override it.
    pub fn default_lr(&self) -> f64 {
        match self {
            HeadSpec::Gradient { kind, .. } => kind.default_lr(),
            _ => 0.0,
        }
    }

    pub fn build(&self, num_classes: usize, dim: usize, seed: u64) -> Result<Classifier> {
        if num_classes == 0 || dim == 0 {
            return Err(Error::Validation("head shape must be positive".into()));
        }
        Ok(match *self {
            HeadSpec::Gradient { kind, mask } => {
                Classifier::Gradient(GradientHead::new(kind, num_classes, dim, seed, mask))
            }
            HeadSpec::Knn { k } => Classifier::Knn(KnnState::new(k, dim)?),
            HeadSpec::Mean => {
                Classifier::Prototype(PrototypeState::new(PrototypeMode::Mean, num_classes, dim))
            }
            HeadSpec::Median => {
                Classifier::Prototype(PrototypeState::new(PrototypeMode::Median, num_classes, dim))
            }
            HeadSpec::Slda => Classifier::Slda(SldaState::new(num_classes, dim)),
        })
    }
}

impl fmt::Display for HeadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadSpec::Gradient { kind, mask } => write!(f, "{kind}:{mask}"),
            HeadSpec::Knn { k } => write!(f, "KNN:{k}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for HeadSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let key = name.to_ascii_lowercase().replace(['_', '-'], "");
        let spec = match key.as_str() {
            "knn" => {
                let k = match arg {
                    Some(a) => a
                        .parse()
                        .map_err(|_| Error::Config(format!("invalid KNN k in {s:?}")))?,
                    None => DEFAULT_KNN_K,
                };
                if k == 0 {
                    return Err(Error::Config("KNN k must be at least 1".into()));
                }
                return Ok(HeadSpec::Knn { k });
            }
            "meanlayer" | "mean" => HeadSpec::Mean,
            "medianlayer" | "median" => HeadSpec::Median,
            "slda" => HeadSpec::Slda,
            _ => {
                let kind: HeadKind = name.parse()?;
                let mask = arg.map(str::parse).transpose()?.unwrap_or_default();
                return Ok(HeadSpec::Gradient { kind, mask });
            }
        };
        if arg.is_some() {
            return Err(Error::Config(format!("{name} takes no argument")));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Gradient(GradientHead),
    Knn(KnnState),
    Prototype(PrototypeState),
    Slda(SldaState),
}

impl Classifier {
    pub fn is_gradient(&self) -> bool {
        matches!(self, Classifier::Gradient(_))
    }

    pub fn as_gradient(&self) -> Option<&GradientHead> {
        match self {
            Classifier::Gradient(h) => Some(h),
            _ => None,
        }
    }

    pub fn as_gradient_mut(&mut self) -> Option<&mut GradientHead> {
        match self {
            Classifier::Gradient(h) => Some(h),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::Gradient(h) => h.dim(),
            Classifier::Knn(s) => s.dim(),
            Classifier::Prototype(s) => s.dim(),
            Classifier::Slda(s) => s.dim(),
        }
    }

    /// Feeds one example to a similarity head. Gradient heads reject this.
    pub fn observe(&mut self, z: &[f64], y: usize) -> Result<()> {
        match self {
            Classifier::Gradient(_) => Err(Error::State(
                "gradient heads learn through mini-batch updates, not observe".into(),
            )),
            Classifier::Knn(s) => s.observe(z, y),
            Classifier::Prototype(s) => s.observe(z, y),
            Classifier::Slda(s) => s.observe(z, y),
        }
    }

    /// Brings derived state up to date (SLDA weights) after a batch of observations.
    pub fn finalize(&mut self) -> Result<()> {
        match self {
            Classifier::Slda(s) => s.refresh(),
            _ => Ok(()),
        }
    }

    pub fn predict(&self, z: &[f64]) -> Result<usize> {
        match self {
            Classifier::Gradient(h) => h.predict(z),
            Classifier::Knn(s) => s.predict(z),
            Classifier::Prototype(s) => s.predict(z),
            Classifier::Slda(s) => s.predict(z),
        }
    }

    /// Predictions for every example of `set`, reusing per-call derived state.
    pub fn predict_set(&self, set: &FeatureSet) -> Result<Vec<usize>> {
        if set.dim() != self.dim() {
            return Err(Error::shape(self.dim(), set.dim()));
        }
        let zs = set.examples().iter().map(|e| e.features.as_slice());
        match self {
            Classifier::Gradient(h) => h.predict_many(zs),
            Classifier::Knn(s) => zs.map(|z| s.predict(z)).collect(),
            Classifier::Prototype(s) => {
                let protos = s.prototypes();
                zs.map(|z| s.predict_with(&protos, z)).collect()
            }
            Classifier::Slda(s) => {
                let w = s.weights()?;
                Ok(zs.map(|z| crate::linalg::argmax(&w.logits(z))).collect())
            }
        }
    }
}
