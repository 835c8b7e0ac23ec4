//! Introspection of gradient heads: norm/bias unbalance, weight changes
//! across a task, and angle-based interference risk.

use serde::Serialize;

use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::gradient::{GradientHead, HeadKind};
use crate::linalg::{dot, norm};

/// Frozen copy of a head's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub task_index: usize,
    pub kind: HeadKind,
    pub num_classes: usize,
    pub dim: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Snapshot {
    pub fn take(head: &GradientHead, task_index: usize) -> Self {
        Self {
            task_index,
            kind: head.kind(),
            num_classes: head.num_classes(),
            dim: head.dim(),
            a: head.weights().to_vec(),
            b: head.bias().to_vec(),
            gamma: head.gamma().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormBiasReport {
    pub row_norms: Vec<f64>,
    pub biases: Vec<f64>,
}

pub fn norm_bias_report(head: &GradientHead) -> NormBiasReport {
    NormBiasReport {
        row_norms: (0..head.num_classes()).map(|i| norm(head.row(i))).collect(),
        biases: head.bias().to_vec(),
    }
}

/// `after − before`, elementwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightDelta {
    pub num_classes: usize,
    pub dim: usize,
    /// `N × h`, row-major.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl WeightDelta {
    pub fn row(&self, class: usize) -> &[f64] {
        &self.a[class * self.dim..(class + 1) * self.dim]
    }

    pub fn is_zero(&self) -> bool {
        self.a
            .iter()
            .chain(&self.b)
            .chain(&self.gamma)
            .all(|&v| v == 0.0)
    }

    /// Whether row `class` (and its bias and scale) changed at all.
    pub fn row_changed(&self, class: usize) -> bool {
        self.row(class).iter().any(|&v| v != 0.0)
            || self.b[class] != 0.0
            || self.gamma[class] != 0.0
    }
}

pub fn weight_delta(before: &Snapshot, after: &Snapshot) -> Result<WeightDelta> {
    if before.num_classes != after.num_classes {
        return Err(Error::shape(before.num_classes, after.num_classes));
    }
    if before.dim != after.dim {
        return Err(Error::shape(before.dim, after.dim));
    }
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| b - a).collect();
    Ok(WeightDelta {
        num_classes: before.num_classes,
        dim: before.dim,
        a: diff(&before.a, &after.a),
        b: diff(&before.b, &after.b),
        gamma: diff(&before.gamma, &after.gamma),
    })
}

/// How the risk ratio is oriented; recorded alongside every report.
pub const RISK_ORIENTATION: &str = "target_angle_over_wrong_angle";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceReport {
    /// `N × N` degrees between output vectors; `NaN` where a vector has zero norm.
    pub vector_angle: Vec<Vec<f64>>,
    /// Row = data class, column = output vector: mean angle in degrees.
    /// `NaN` rows for classes without usable data.
    pub class_to_vector: Vec<Vec<f64>>,
    /// `risk[c][j] = class_to_vector[c][c] / class_to_vector[c][j]` for
    /// `j ≠ c`, zero on the diagonal. High values mean the class's own
    /// vector is no better aligned with its data than a wrong one.
    pub risk: Vec<Vec<f64>>,
    pub excluded_vectors: usize,
    pub excluded_examples: usize,
    pub risk_orientation: &'static str,
}

/// Angle in degrees from a clamped cosine.
pub fn angle_degrees(u: &[f64], v: &[f64]) -> f64 {
    let cos = dot(u, v) / (norm(u) * norm(v));
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn interference_report(
    head: &GradientHead,
    dataset: &FeatureSet,
) -> Result<InterferenceReport> {
    if dataset.dim() != head.dim() {
        return Err(Error::shape(head.dim(), dataset.dim()));
    }
    let n = head.num_classes();
    let usable: Vec<bool> = (0..n).map(|i| norm(head.row(i)) > 0.0).collect();
    let excluded_vectors = usable.iter().filter(|u| !**u).count();

    let mut vector_angle = vec![vec![f64::NAN; n]; n];
    for i in (0..n).filter(|&i| usable[i]) {
        vector_angle[i][i] = 0.0;
        for j in (i + 1..n).filter(|&j| usable[j]) {
            let angle = angle_degrees(head.row(i), head.row(j));
            vector_angle[i][j] = angle;
            vector_angle[j][i] = angle;
        }
    }

    let mut sums = vec![vec![0.0; n]; n];
    let mut counts = vec![0usize; n];
    let mut excluded_examples = 0;
    for ex in dataset.examples() {
        let c = ex.class();
        if c >= n || norm(&ex.features) == 0.0 {
            excluded_examples += 1;
            continue;
        }
        counts[c] += 1;
        for (i, s) in sums[c].iter_mut().enumerate() {
            if usable[i] {
                *s += angle_degrees(&ex.features, head.row(i));
            }
        }
    }
    let class_to_vector: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            (0..n)
                .map(|i| {
                    if counts[c] == 0 || !usable[i] {
                        f64::NAN
                    } else {
                        sums[c][i] / counts[c] as f64
                    }
                })
                .collect()
        })
        .collect();

    let risk = (0..n)
        .map(|c| {
            (0..n)
                .map(|j| {
                    if j == c {
                        return 0.0;
                    }
                    let target = class_to_vector[c][c];
                    let wrong = class_to_vector[c][j];
                    if target == 0.0 && wrong == 0.0 {
                        1.0
                    } else {
                        target / wrong
                    }
                })
                .collect()
        })
        .collect();

    Ok(InterferenceReport {
        vector_angle,
        class_to_vector,
        risk,
        excluded_vectors,
        excluded_examples,
        risk_orientation: RISK_ORIENTATION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Example;
    use crate::gradient::MaskMode;

    fn eye(n: usize) -> GradientHead {
        let a = (0..n * n)
            .map(|k| if k / n == k % n { 1.0 } else { 0.0 })
            .collect();
        GradientHead::from_parts(
            HeadKind::Linear,
            MaskMode::NoMask,
            n,
            n,
            a,
            vec![0.0; n],
            vec![1.0; n],
        )
        .unwrap()
    }

    #[test]
    fn identity_norms() {
        let r = norm_bias_report(&eye(4));
        assert_eq!(r.row_norms, vec![1.0; 4]);
        assert_eq!(r.biases, vec![0.0; 4]);
        let fresh = GradientHead::new(HeadKind::Linear, 3, 5, 2, MaskMode::NoMask);
        assert_eq!(norm_bias_report(&fresh).biases, vec![0.0; 3]);
    }

    #[test]
    fn delta_of_identical_snapshots_is_zero() {
        let h = GradientHead::new(HeadKind::OriginalWeightNorm, 3, 5, 2, MaskMode::NoMask);
        let s = Snapshot::take(&h, 0);
        assert!(weight_delta(&s, &s).unwrap().is_zero());
        let other = Snapshot::take(
            &GradientHead::new(HeadKind::Linear, 4, 5, 2, MaskMode::NoMask),
            1,
        );
        assert!(weight_delta(&s, &other).is_err());
    }

    #[test]
    fn angles() {
        let u = [1.0, 2.0, -0.5];
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        assert!(angle_degrees(&u, &u).abs() < 1e-6);
        assert!((angle_degrees(&u, &neg) - 180.0).abs() < 1e-6);
    }

    #[test]
    fn orthonormal_rows_and_aligned_data() {
        let head = eye(3);
        let examples = (0..3u32)
            .flat_map(|c| {
                (1..4).map(move |s| {
                    let mut f = vec![0.0; 3];
                    f[c as usize] = s as f64;
                    Example::new(f, c, 0)
                })
            })
            .collect();
        let data = FeatureSet::new(3, 3, examples).unwrap();
        let r = interference_report(&head, &data).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 90.0 };
                assert!((r.vector_angle[i][j] - expected).abs() < 1e-9);
                assert!((r.class_to_vector[i][j] - expected).abs() < 1e-9);
                assert!(r.risk[i][j].abs() < 1e-12);
            }
        }
        assert_eq!(r.excluded_vectors, 0);
    }

    #[test]
    fn zero_rows_and_vectors_are_excluded() {
        let head = GradientHead::from_parts(
            HeadKind::Linear,
            MaskMode::NoMask,
            2,
            2,
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0; 2],
            vec![1.0; 2],
        )
        .unwrap();
        let data = FeatureSet::new(
            2,
            2,
            vec![
                Example::new(vec![0.0, 0.0], 0, 0),
                Example::new(vec![1.0, 1.0], 0, 0),
            ],
        )
        .unwrap();
        let r = interference_report(&head, &data).unwrap();
        assert_eq!(r.excluded_vectors, 1);
        assert_eq!(r.excluded_examples, 1);
        assert!(r.vector_angle[0][1].is_nan());
        assert!((r.class_to_vector[0][0] - 45.0).abs() < 1e-9);
    }
}
