//! Classifiers that are never trained by gradient descent: KNN, nearest
//! class mean/median prototypes and streaming LDA.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{argmax, cholesky, cholesky_solve, dot, sq_dist};

/// k-nearest-neighbour vote over every stored exemplar.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnState {
    k: usize,
    dim: usize,
    stored: Vec<(Vec<f64>, usize)>,
}

impl KnnState {
    pub fn new(k: usize, dim: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(Self {
            k,
            dim,
            stored: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stored(&self) -> &[(Vec<f64>, usize)] {
        &self.stored
    }

    pub fn observe(&mut self, z: &[f64], y: usize) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::shape(self.dim, z.len()));
        }
        self.stored.push((z.to_vec(), y));
        Ok(())
    }

    /// Majority label among the `k` nearest exemplars (Euclidean).
    /// Equal distances favour earlier insertions; tied votes favour the lower label.
    pub fn predict(&self, z: &[f64]) -> Result<usize> {
        if z.len() != self.dim {
            return Err(Error::shape(self.dim, z.len()));
        }
        if self.stored.is_empty() {
            return Err(Error::State("KNN has no stored exemplars".into()));
        }
        let mut dists: Vec<(f64, usize)> = self
            .stored
            .iter()
            .enumerate()
            .map(|(i, (x, _))| (sq_dist(x, z), i))
            .collect();
        let k = self.k.min(dists.len());
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, order);
        }
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for &(_, i) in &dists[..k] {
            *votes.entry(self.stored[i].1).or_default() += 1;
        }
        // BTreeMap iterates labels ascending; keep the first maximum.
        let mut best = (0, 0);
        for (label, count) in votes {
            if count > best.1 {
                best = (label, count);
            }
        }
        Ok(best.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrototypeMode {
    Mean,
    Median,
}

/// Nearest-prototype classifier. Mean prototypes are kept as streaming
/// averages; median prototypes need every exemplar and are computed
/// coordinate-wise at prediction time.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeState {
    mode: PrototypeMode,
    dim: usize,
    counts: Vec<u64>,
    means: Vec<Vec<f64>>,
    exemplars: Vec<Vec<Vec<f64>>>,
}

impl PrototypeState {
    pub fn new(mode: PrototypeMode, num_classes: usize, dim: usize) -> Self {
        Self {
            mode,
            dim,
            counts: vec![0; num_classes],
            means: vec![vec![0.0; dim]; num_classes],
            exemplars: vec![Vec::new(); num_classes],
        }
    }

    pub(crate) fn from_means(dim: usize, counts: Vec<u64>, means: Vec<Vec<f64>>) -> Self {
        let n = counts.len();
        Self {
            mode: PrototypeMode::Mean,
            dim,
            counts,
            means,
            exemplars: vec![Vec::new(); n],
        }
    }

    pub(crate) fn from_exemplars(dim: usize, exemplars: Vec<Vec<Vec<f64>>>) -> Self {
        let n = exemplars.len();
        Self {
            mode: PrototypeMode::Median,
            dim,
            counts: exemplars.iter().map(|e| e.len() as u64).collect(),
            means: vec![vec![0.0; dim]; n],
            exemplars,
        }
    }

    pub fn mode(&self) -> PrototypeMode {
        self.mode
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn exemplars(&self) -> &[Vec<Vec<f64>>] {
        &self.exemplars
    }

    pub fn observe(&mut self, z: &[f64], y: usize) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::shape(self.dim, z.len()));
        }
        if y >= self.counts.len() {
            return Err(Error::Validation(format!("label {y} out of range")));
        }
        match self.mode {
            PrototypeMode::Mean => {
                let c = self.counts[y] as f64;
                for (m, &v) in self.means[y].iter_mut().zip(z) {
                    *m = (c * *m + v) / (c + 1.0);
                }
            }
            PrototypeMode::Median => self.exemplars[y].push(z.to_vec()),
        }
        self.counts[y] += 1;
        Ok(())
    }

    /// Prototype of each class, `None` for classes never observed.
    pub fn prototypes(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.counts.len())
            .map(|c| {
                if self.counts[c] == 0 {
                    return None;
                }
                Some(match self.mode {
                    PrototypeMode::Mean => self.means[c].clone(),
                    PrototypeMode::Median => coordinate_median(&self.exemplars[c], self.dim),
                })
            })
            .collect()
    }

    pub fn predict(&self, z: &[f64]) -> Result<usize> {
        let protos = self.prototypes();
        self.predict_with(&protos, z)
    }

    /// Nearest prototype; ties go to the lowest label.
    pub fn predict_with(&self, prototypes: &[Option<Vec<f64>>], z: &[f64]) -> Result<usize> {
        if z.len() != self.dim {
            return Err(Error::shape(self.dim, z.len()));
        }
        let mut best: Option<(usize, f64)> = None;
        for (c, p) in prototypes.iter().enumerate() {
            if let Some(p) = p {
                let d = sq_dist(p, z);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((c, d));
                }
            }
        }
        best.map(|(c, _)| c)
            .ok_or_else(|| Error::State("no class has been observed".into()))
    }
}

fn coordinate_median(samples: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut column = Vec::with_capacity(samples.len());
    (0..dim)
        .map(|k| {
            column.clear();
            column.extend(samples.iter().map(|s| s[k]));
            column.sort_by(f64::total_cmp);
            let n = column.len();
            if n % 2 == 1 {
                column[n / 2]
            } else {
                0.5 * (column[n / 2 - 1] + column[n / 2])
            }
        })
        .collect()
}

pub const SLDA_SHRINKAGE: f64 = 1e-4;

/// Linear discriminant weights derived from the SLDA statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SldaWeights {
    /// `w_k = Λ μ_k`, `None` for unobserved classes.
    pub w: Vec<Option<Vec<f64>>>,
    /// `b_k = -½ μ_kᵀ Λ μ_k`.
    pub b: Vec<f64>,
}

impl SldaWeights {
    pub fn logits(&self, z: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(w, &b)| match w {
                Some(w) => dot(z, w) + b,
                None => f64::NEG_INFINITY,
            })
            .collect()
    }
}

/// Streaming linear discriminant analysis: per-class running means plus one
/// shared covariance, updated in a single pass with `O(h²)` work per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SldaState {
    dim: usize,
    shrinkage: f64,
    means: Vec<Vec<f64>>,
    counts: Vec<u64>,
    /// `h × h`, row-major.
    sigma: Vec<f64>,
    total: u64,
    cache: Option<SldaWeights>,
}

impl SldaState {
    pub fn new(num_classes: usize, dim: usize) -> Self {
        Self::with_shrinkage(num_classes, dim, SLDA_SHRINKAGE)
    }

    pub fn with_shrinkage(num_classes: usize, dim: usize, shrinkage: f64) -> Self {
        Self {
            dim,
            shrinkage,
            means: vec![vec![0.0; dim]; num_classes],
            counts: vec![0; num_classes],
            sigma: vec![0.0; dim * dim],
            total: 0,
            cache: None,
        }
    }

    pub(crate) fn from_parts(
        dim: usize,
        shrinkage: f64,
        means: Vec<Vec<f64>>,
        counts: Vec<u64>,
        sigma: Vec<f64>,
        total: u64,
    ) -> Self {
        Self {
            dim,
            shrinkage,
            means,
            counts,
            sigma,
            total,
            cache: None,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn covariance(&self) -> &[f64] {
        &self.sigma
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_fresh(&self) -> bool {
        self.cache.is_some()
    }

    /// Overrides the shared covariance.
    pub fn set_covariance(&mut self, sigma: Vec<f64>) -> Result<()> {
        if sigma.len() != self.dim * self.dim {
            return Err(Error::shape(self.dim * self.dim, sigma.len()));
        }
        self.sigma = sigma;
        self.cache = None;
        Ok(())
    }

    /// `Σ ← (tΣ + Δ)/(t+1)` with `Δ = t/(t+1)·(z−μ_y)(z−μ_y)ᵀ` using the
    /// class mean before this sample, then the streaming mean update.
    pub fn observe(&mut self, z: &[f64], y: usize) -> Result<()> {
        let h = self.dim;
        if z.len() != h {
            return Err(Error::shape(h, z.len()));
        }
        if y >= self.counts.len() {
            return Err(Error::Validation(format!("label {y} out of range")));
        }
        let t = self.total as f64;
        let diff: Vec<f64> = z.iter().zip(&self.means[y]).map(|(a, m)| a - m).collect();
        let scale = t / (t + 1.0);
        for i in 0..h {
            for j in i..h {
                let delta = scale * diff[i] * diff[j];
                let v = (t * self.sigma[i * h + j] + delta) / (t + 1.0);
                self.sigma[i * h + j] = v;
                self.sigma[j * h + i] = v;
            }
        }
        let c = self.counts[y] as f64;
        for (m, &v) in self.means[y].iter_mut().zip(z) {
            *m = (c * *m + v) / (c + 1.0);
        }
        self.counts[y] += 1;
        self.total += 1;
        self.cache = None;
        Ok(())
    }

    /// Solves `[(1−ε)Σ + εI] w_k = μ_k` for every observed class.
    pub fn compute_weights(&self) -> Result<SldaWeights> {
        if self.counts.iter().all(|&c| c == 0) {
            return Err(Error::State("SLDA has not observed any class".into()));
        }
        let h = self.dim;
        let eps = self.shrinkage;
        let mut m: Vec<f64> = self.sigma.iter().map(|s| (1.0 - eps) * s).collect();
        for i in 0..h {
            m[i * h + i] += eps;
        }
        if !cholesky(&mut m, h) {
            return Err(Error::Numerical(
                "shrunk covariance is not positive definite".into(),
            ));
        }
        let mut w = Vec::with_capacity(self.counts.len());
        let mut b = Vec::with_capacity(self.counts.len());
        for (mu, &c) in self.means.iter().zip(&self.counts) {
            if c == 0 {
                w.push(None);
                b.push(f64::NEG_INFINITY);
                continue;
            }
            let wk = cholesky_solve(&m, h, mu);
            let bk = -0.5 * dot(mu, &wk);
            if !bk.is_finite() || wk.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite discriminant weights".into()));
            }
            w.push(Some(wk));
            b.push(bk);
        }
        Ok(SldaWeights { w, b })
    }

    /// Recomputes cached weights if observations arrived since the last call.
    pub fn refresh(&mut self) -> Result<()> {
        if self.cache.is_none() {
            self.cache = Some(self.compute_weights()?);
        }
        Ok(())
    }

    /// Cached weights, or freshly computed ones if the cache is stale.
    pub fn weights(&self) -> Result<std::borrow::Cow<'_, SldaWeights>> {
        match &self.cache {
            Some(w) => Ok(std::borrow::Cow::Borrowed(w)),
            None => Ok(std::borrow::Cow::Owned(self.compute_weights()?)),
        }
    }

    /// `o_k = ⟨z, w_k⟩ + b_k`; unobserved classes score `-∞`.
    pub fn logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim {
            return Err(Error::shape(self.dim, z.len()));
        }
        Ok(self.weights()?.logits(z))
    }

    pub fn predict(&self, z: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(z)?))
    }
}
