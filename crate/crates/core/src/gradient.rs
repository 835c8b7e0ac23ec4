//! Gradient-trained output layers.
//!
//! A head maps a latent vector `z` to one logit per class. The linear layer
//! decomposes as `o_i = ‖z‖‖A_i‖cos∠(z, A_i) + b_i`; the other kinds drop or
//! normalize parts of that product:
//!
//! | kind                 | logit `o_i`                          |
//! |----------------------|--------------------------------------|
//! | `Linear`             | `⟨z, A_i⟩ + b_i`                     |
//! | `LinearNoBias`       | `⟨z, A_i⟩`                           |
//! | `WeightNorm`         | `⟨z, A_i⟩ / ‖A_i‖`                   |
//! | `CosLayer`           | `⟨z, A_i⟩ / (‖z‖ ‖A_i‖)`             |
//! | `OriginalWeightNorm` | `γ_i ⟨z, A_i⟩ / ‖A_i‖ + b_i`         |
//!
//! Norms in denominators are floored at [`NORM_EPS`].
//!
//! Every logit depends only on its own row `(A_i, b_i, γ_i)`, so masking is
//! applied to the loss derivative with respect to the logits: zeroing entry
//! `(e, i)` removes exactly example `e`'s contribution to row `i`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{argmax, dot, norm};
use crate::rng::{self, Gaussian};

pub const NORM_EPS: f64 = 1e-12;

/// A `(features, target)` pair borrowed from a feature set.
pub type Sample<'a> = (&'a [f64], usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeadKind {
    Linear,
    LinearNoBias,
    WeightNorm,
    CosLayer,
    OriginalWeightNorm,
}

impl HeadKind {
    pub const ALL: [HeadKind; 5] = [
        HeadKind::Linear,
        HeadKind::LinearNoBias,
        HeadKind::WeightNorm,
        HeadKind::CosLayer,
        HeadKind::OriginalWeightNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Linear => "Linear",
            HeadKind::LinearNoBias => "LinearNoBias",
            HeadKind::WeightNorm => "WeightNorm",
            HeadKind::CosLayer => "CosLayer",
            HeadKind::OriginalWeightNorm => "OriginalWeightNorm",
        }
    }

    pub fn has_bias(self) -> bool {
        matches!(self, HeadKind::Linear | HeadKind::OriginalWeightNorm)
    }

    pub fn has_gamma(self) -> bool {
        matches!(self, HeadKind::OriginalWeightNorm)
    }

    /// 0.01 for the plain linear layers, 0.1 for the normalized ones.
    pub fn default_lr(self) -> f64 {
        match self {
            HeadKind::Linear | HeadKind::LinearNoBias => 0.01,
            _ => 0.1,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            HeadKind::Linear => 0,
            HeadKind::LinearNoBias => 1,
            HeadKind::WeightNorm => 2,
            HeadKind::CosLayer => 3,
            HeadKind::OriginalWeightNorm => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "linear" => Ok(HeadKind::Linear),
            "linearnobias" | "linearnb" => Ok(HeadKind::LinearNoBias),
            "weightnorm" => Ok(HeadKind::WeightNorm),
            "coslayer" => Ok(HeadKind::CosLayer),
            "originalweightnorm" | "oweightnorm" => Ok(HeadKind::OriginalWeightNorm),
            _ => Err(Error::Config(format!("unknown gradient head {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaskMode {
    #[default]
    NoMask,
    /// Each example only updates the row of its own target.
    SingleMask,
    /// Rows of classes absent from the mini-batch are frozen.
    GroupMask,
}

impl MaskMode {
    pub const ALL: [MaskMode; 3] = [MaskMode::NoMask, MaskMode::SingleMask, MaskMode::GroupMask];

    pub fn name(self) -> &'static str {
        match self {
            MaskMode::NoMask => "none",
            MaskMode::SingleMask => "single",
            MaskMode::GroupMask => "group",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            MaskMode::NoMask => 0,
            MaskMode::SingleMask => 1,
            MaskMode::GroupMask => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.code() == code)
    }
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "nomask" | "no" => Ok(MaskMode::NoMask),
            "single" | "singlemask" | "masked" => Ok(MaskMode::SingleMask),
            "group" | "groupmask" => Ok(MaskMode::GroupMask),
            _ => Err(Error::Config(format!("unknown mask mode {s:?}"))),
        }
    }
}

/// Parameter-shaped tensors: gradients or optimizer velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `N × h`, row-major.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Gradients {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        Self {
            a: vec![0.0; num_classes * dim],
            b: vec![0.0; num_classes],
            gamma: vec![0.0; num_classes],
        }
    }
}

/// Loss and its derivative with respect to every logit of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitGradients {
    pub loss: f64,
    /// `B × N`, row-major: `∂loss/∂o_{e,i}`.
    pub values: Vec<f64>,
    pub num_classes: usize,
}

impl LogitGradients {
    pub fn example(&self, e: usize) -> &[f64] {
        &self.values[e * self.num_classes..(e + 1) * self.num_classes]
    }
}

/// Zeroes the logit derivatives the mask forbids.
///
/// `NoMask` leaves `grads` untouched. `SingleMask` keeps, for each example,
/// only the entry of its own target. `GroupMask` keeps the columns of
/// classes that appear among `targets`.
pub fn apply_mask(grads: &mut LogitGradients, targets: &[usize], mask: MaskMode) {
    let n = grads.num_classes;
    match mask {
        MaskMode::NoMask => {}
        MaskMode::SingleMask => {
            for (row, &y) in grads.values.chunks_mut(n).zip(targets) {
                for (i, v) in row.iter_mut().enumerate() {
                    if i != y {
                        *v = 0.0;
                    }
                }
            }
        }
        MaskMode::GroupMask => {
            let present: BTreeSet<usize> = targets.iter().copied().collect();
            for row in grads.values.chunks_mut(n) {
                for (i, v) in row.iter_mut().enumerate() {
                    if !present.contains(&i) {
                        *v = 0.0;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientHead {
    kind: HeadKind,
    mask: MaskMode,
    num_classes: usize,
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    gamma: Vec<f64>,
    velocity: Gradients,
}

impl GradientHead {
    /// Rows of `A` drawn i.i.d. from `N(0, 1/h)`; `b = 0`, `γ = 1`, zero velocity.
    pub fn new(kind: HeadKind, num_classes: usize, dim: usize, seed: u64, mask: MaskMode) -> Self {
        assert!(num_classes >= 1 && dim >= 1, "head shape must be positive");
        let mut rng = rng::seeded(seed);
        let mut gauss = Gaussian::new();
        let std = 1.0 / (dim as f64).sqrt();
        let a = (0..num_classes * dim)
            .map(|_| std * gauss.sample(&mut rng))
            .collect();
        Self {
            kind,
            mask,
            num_classes,
            dim,
            a,
            b: vec![0.0; num_classes],
            gamma: vec![1.0; num_classes],
            velocity: Gradients::zeros(num_classes, dim),
        }
    }

    pub fn from_parts(
        kind: HeadKind,
        mask: MaskMode,
        num_classes: usize,
        dim: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        if num_classes == 0 || dim == 0 {
            return Err(Error::Validation("head shape must be positive".into()));
        }
        if a.len() != num_classes * dim {
            return Err(Error::shape(num_classes * dim, a.len()));
        }
        if b.len() != num_classes {
            return Err(Error::shape(num_classes, b.len()));
        }
        if gamma.len() != num_classes {
            return Err(Error::shape(num_classes, gamma.len()));
        }
        if a.iter().chain(&b).chain(&gamma).any(|v| !v.is_finite()) {
            return Err(Error::Validation("head parameters must be finite".into()));
        }
        Ok(Self {
            kind,
            mask,
            num_classes,
            dim,
            a,
            b,
            gamma,
            velocity: Gradients::zeros(num_classes, dim),
        })
    }

    pub fn kind(&self) -> HeadKind {
        self.kind
    }

    pub fn mask(&self) -> MaskMode {
        self.mask
    }

    pub fn set_mask(&mut self, mask: MaskMode) {
        self.mask = mask;
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Output vectors, `N × h` row-major.
    pub fn weights(&self) -> &[f64] {
        &self.a
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.a[class * self.dim..(class + 1) * self.dim]
    }

    pub fn bias(&self) -> &[f64] {
        &self.b
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn velocity(&self) -> &Gradients {
        &self.velocity
    }

    pub fn reset_velocity(&mut self) {
        self.velocity = Gradients::zeros(self.num_classes, self.dim);
    }

    fn row_norms(&self) -> Vec<f64> {
        (0..self.num_classes).map(|i| norm(self.row(i))).collect()
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::shape(self.dim, z.len()));
        }
        Ok(())
    }

    fn logits_with(&self, z: &[f64], row_norms: &[f64], out: &mut [f64]) {
        let z_norm = norm(z).max(NORM_EPS);
        for (i, o) in out.iter_mut().enumerate() {
            let d = dot(z, self.row(i));
            let a_norm = row_norms[i].max(NORM_EPS);
            *o = match self.kind {
                HeadKind::Linear => d + self.b[i],
                HeadKind::LinearNoBias => d,
                HeadKind::WeightNorm => d / a_norm,
                HeadKind::CosLayer => d / (z_norm * a_norm),
                HeadKind::OriginalWeightNorm => self.gamma[i] * d / a_norm + self.b[i],
            };
        }
    }

    pub fn logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let mut out = vec![0.0; self.num_classes];
        self.logits_with(z, &self.row_norms(), &mut out);
        Ok(out)
    }

    /// Arg-max class; ties go to the lowest index.
    pub fn predict(&self, z: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(z)?))
    }

    /// Predicts a whole batch, computing row norms once.
    pub fn predict_many<'a>(&self, zs: impl IntoIterator<Item = &'a [f64]>) -> Result<Vec<usize>> {
        let norms = self.row_norms();
        let mut buf = vec![0.0; self.num_classes];
        zs.into_iter()
            .map(|z| {
                self.check_dim(z)?;
                self.logits_with(z, &norms, &mut buf);
                Ok(argmax(&buf))
            })
            .collect()
    }

    /// Mean softmax cross-entropy over the batch and its logit derivatives.
    pub fn loss_and_logit_grads(&self, batch: &[Sample<'_>]) -> Result<LogitGradients> {
        if batch.is_empty() {
            return Err(Error::Validation("empty batch".into()));
        }
        let n = self.num_classes;
        let norms = self.row_norms();
        let inv_b = 1.0 / batch.len() as f64;
        let mut values = vec![0.0; batch.len() * n];
        let mut loss = 0.0;
        for (&(z, y), out) in batch.iter().zip(values.chunks_mut(n)) {
            self.check_dim(z)?;
            if y >= n {
                return Err(Error::Validation(format!(
                    "label {y} out of range for {n} classes"
                )));
            }
            self.logits_with(z, &norms, out);
            let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let target_shifted = out[y] - max;
            let mut sum = 0.0;
            for o in out.iter_mut() {
                *o = (*o - max).exp();
                sum += *o;
            }
            // out now holds exp(o - max); turn it into (softmax - onehot) / B
            loss += sum.ln() - target_shifted;
            for (i, o) in out.iter_mut().enumerate() {
                let p = *o / sum;
                *o = (p - if i == y { 1.0 } else { 0.0 }) * inv_b;
            }
        }
        Ok(LogitGradients {
            loss: loss * inv_b,
            values,
            num_classes: n,
        })
    }

    /// Chains logit derivatives back to `(A, b, γ)` through the kind's
    /// parameterization. Entries for parameters the kind does not use stay zero.
    pub fn backprop(&self, batch: &[Sample<'_>], logit_grads: &LogitGradients) -> Gradients {
        let (n, h) = (self.num_classes, self.dim);
        let norms = self.row_norms();
        let mut grads = Gradients::zeros(n, h);
        for (e, &(z, _)) in batch.iter().enumerate() {
            let g_row = logit_grads.example(e);
            let z_norm = norm(z).max(NORM_EPS);
            for i in 0..n {
                let g = g_row[i];
                if g == 0.0 {
                    continue;
                }
                let a_i = self.row(i);
                let raw_norm = norms[i];
                let a_norm = raw_norm.max(NORM_EPS);
                let guarded = raw_norm.is_nan() || raw_norm <= NORM_EPS;
                // dA_i += cz·z + ca·A_i
                let (cz, ca) = match self.kind {
                    HeadKind::Linear | HeadKind::LinearNoBias => (g, 0.0),
                    HeadKind::WeightNorm => {
                        let d = dot(z, a_i);
                        let ca = if guarded {
                            0.0
                        } else {
                            -g * d / a_norm.powi(3)
                        };
                        (g / a_norm, ca)
                    }
                    HeadKind::CosLayer => {
                        let d = dot(z, a_i);
                        let ca = if guarded {
                            0.0
                        } else {
                            -g * d / (z_norm * a_norm.powi(3))
                        };
                        (g / (z_norm * a_norm), ca)
                    }
                    HeadKind::OriginalWeightNorm => {
                        let d = dot(z, a_i);
                        let gg = g * self.gamma[i];
                        grads.gamma[i] += g * d / a_norm;
                        let ca = if guarded {
                            0.0
                        } else {
                            -gg * d / a_norm.powi(3)
                        };
                        (gg / a_norm, ca)
                    }
                };
                if self.kind.has_bias() {
                    grads.b[i] += g;
                }
                let out = &mut grads.a[i * h..(i + 1) * h];
                for ((o, &zk), &ak) in out.iter_mut().zip(z).zip(a_i) {
                    *o += cz * zk + ca * ak;
                }
            }
        }
        grads
    }

    /// Unmasked loss and parameter gradients.
    pub fn loss_and_gradient(&self, batch: &[Sample<'_>]) -> Result<(f64, Gradients)> {
        let lg = self.loss_and_logit_grads(batch)?;
        Ok((lg.loss, self.backprop(batch, &lg)))
    }

    /// Loss and gradients with the given mask applied per example.
    pub fn masked_gradient(
        &self,
        batch: &[Sample<'_>],
        mask: MaskMode,
    ) -> Result<(f64, Gradients)> {
        let mut lg = self.loss_and_logit_grads(batch)?;
        let targets: Vec<usize> = batch.iter().map(|&(_, y)| y).collect();
        apply_mask(&mut lg, &targets, mask);
        Ok((lg.loss, self.backprop(batch, &lg)))
    }

    /// Heavy-ball update: `v ← μ·v + g`, `θ ← θ − lr·v`.
    /// Bias and scale are only touched when the kind uses them.
    pub fn sgd_momentum_step(&mut self, grads: &Gradients, lr: f64, momentum: f64) {
        fn step(params: &mut [f64], vel: &mut [f64], grads: &[f64], lr: f64, momentum: f64) {
            for ((p, v), &g) in params.iter_mut().zip(vel.iter_mut()).zip(grads) {
                *v = momentum * *v + g;
                *p -= lr * *v;
            }
        }
        step(&mut self.a, &mut self.velocity.a, &grads.a, lr, momentum);
        if self.kind.has_bias() {
            step(&mut self.b, &mut self.velocity.b, &grads.b, lr, momentum);
        }
        if self.kind.has_gamma() {
            step(
                &mut self.gamma,
                &mut self.velocity.gamma,
                &grads.gamma,
                lr,
                momentum,
            );
        }
    }

    /// One masked SGD step on a mini-batch using the head's own mask mode.
    pub fn train_batch(&mut self, batch: &[Sample<'_>], lr: f64, momentum: f64) -> Result<f64> {
        let (loss, grads) = self.masked_gradient(batch, self.mask)?;
        self.sgd_momentum_step(&grads, lr, momentum);
        Ok(loss)
    }
}
