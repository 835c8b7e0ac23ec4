//! Acceptance suite: one check per exit criterion, each printing a
//! PASS/FAIL line. Run with `--nocapture` to see the report.
//!
//! Oracles (finite differences, reference recursions, explicit inverses,
//! brute-force neighbour search) live here and do not call the code paths
//! they check.

use std::sync::Arc;
use std::time::{Duration, Instant};

use driftbench_core::diagnostics::{norm_bias_report, weight_delta, Snapshot};
use driftbench_core::fset::{from_bytes, to_bytes};
use driftbench_core::rng::{seeded, Gaussian, Rng};
use driftbench_core::scenario::{self, Scenario};
use driftbench_core::trainer::{train_scenario_with, train_subset};
use driftbench_core::{
    generate_synthetic, train_scenario, train_with_replay, Classifier, Error, Example, FeatureSet,
    GradientHead, HeadKind, HeadSpec, KnnState, MaskMode, PrototypeMode, PrototypeState,
    ReplayConfig, RunLabel, Sample, SldaState, SyntheticSpec, TrainConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gaussian_vec(rng: &mut Rng, g: &mut Gaussian, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * g.sample(rng)).collect()
}

// ---------------------------------------------------------------------------
// 1. gradient correctness

/// Independent forward pass: mean softmax cross-entropy for a head given
/// explicit parameters.
fn oracle_loss(
    kind: HeadKind,
    n: usize,
    h: usize,
    a: &[f64],
    b: &[f64],
    g: &[f64],
    batch: &[(Vec<f64>, usize)],
) -> f64 {
    let mut total = 0.0;
    for (z, y) in batch {
        let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let logits: Vec<f64> = (0..n)
            .map(|i| {
                let row = &a[i * h..(i + 1) * h];
                let d: f64 = row.iter().zip(z).map(|(p, q)| p * q).sum();
                let an = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                match kind {
                    HeadKind::Linear => d + b[i],
                    HeadKind::LinearNoBias => d,
                    HeadKind::WeightNorm => d / an,
                    HeadKind::CosLayer => d / (zn * an),
                    HeadKind::OriginalWeightNorm => g[i] * d / an + b[i],
                }
            })
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|o| (o - m).exp()).sum::<f64>().ln();
        total += lse - logits[*y];
    }
    total / batch.len() as f64
}

fn criterion_1() -> Outcome {
    const STEP: f64 = 1e-5;
    const TOL: f64 = 1e-4;
    let mut rng = seeded(2024);
    let mut g = Gaussian::new();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for kind in HeadKind::ALL {
        for _ in 0..20 {
            let n = rng.gen_range(2..=5);
            let h = rng.gen_range(1..=16);
            let a = gaussian_vec(&mut rng, &mut g, n * h, 1.0);
            let b = gaussian_vec(&mut rng, &mut g, n, 0.5);
            let gamma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
            let bs = rng.gen_range(1..=6);
            let batch: Vec<(Vec<f64>, usize)> = (0..bs)
                .map(|_| (gaussian_vec(&mut rng, &mut g, h, 1.0), rng.gen_range(0..n)))
                .collect();
            let head = GradientHead::from_parts(
                kind,
                MaskMode::NoMask,
                n,
                h,
                a.clone(),
                b.clone(),
                gamma.clone(),
            )
            .unwrap();
            let samples: Vec<Sample> = batch.iter().map(|(z, y)| (z.as_slice(), *y)).collect();
            let (_, grads) = head.loss_and_gradient(&samples).unwrap();

            let mut analytic = grads.a.clone();
            let mut numeric = Vec::new();
            for k in 0..a.len() {
                let (mut p, mut m) = (a.clone(), a.clone());
                p[k] += STEP;
                m[k] -= STEP;
                numeric.push(
                    (oracle_loss(kind, n, h, &p, &b, &gamma, &batch)
                        - oracle_loss(kind, n, h, &m, &b, &gamma, &batch))
                        / (2.0 * STEP),
                );
            }
            if kind.has_bias() {
                analytic.extend(&grads.b);
                for k in 0..n {
                    let (mut p, mut m) = (b.clone(), b.clone());
                    p[k] += STEP;
                    m[k] -= STEP;
                    numeric.push(
                        (oracle_loss(kind, n, h, &a, &p, &gamma, &batch)
                            - oracle_loss(kind, n, h, &a, &m, &gamma, &batch))
                            / (2.0 * STEP),
                    );
                }
            }
            if kind.has_gamma() {
                analytic.extend(&grads.gamma);
                for k in 0..n {
                    let (mut p, mut m) = (gamma.clone(), gamma.clone());
                    p[k] += STEP;
                    m[k] -= STEP;
                    numeric.push(
                        (oracle_loss(kind, n, h, &a, &b, &p, &batch)
                            - oracle_loss(kind, n, h, &a, &b, &m, &batch))
                            / (2.0 * STEP),
                    );
                }
            }
            let diff = analytic
                .iter()
                .zip(&numeric)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            let na = analytic.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nn = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
            // h = 1 makes the normalized kinds scale invariant: the true gradient is
            // exactly zero and both sides are rounding noise, hence the absolute floor
            let rel = diff / na.max(nn).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    outcome(
        worst <= TOL,
        format!("{checked} configs, worst relative error {worst:.2e} (tol {TOL:.0e})"),
    )
}

// ---------------------------------------------------------------------------
// 2. masking conservation

fn blob_set(classes: &[u32], n_classes: usize, h: usize, per: usize, seed: u64) -> FeatureSet {
    let mut rng = seeded(seed);
    let mut g = Gaussian::new();
    let mut examples = Vec::new();
    for &c in classes {
        let center = gaussian_vec(&mut rng, &mut g, h, 1.0);
        for _ in 0..per {
            let f = center
                .iter()
                .map(|v| v + 0.3 * g.sample(&mut rng))
                .collect();
            examples.push(Example::new(f, c, 0));
        }
    }
    FeatureSet::new(h, n_classes, examples).unwrap()
}

fn class_params(head: &GradientHead, j: usize) -> (Vec<f64>, f64, f64) {
    (head.row(j).to_vec(), head.bias()[j], head.gamma()[j])
}

fn criterion_2() -> Outcome {
    let frozen = 2;
    let mut failures = Vec::new();
    let mut cases = 0;
    for kind in HeadKind::ALL {
        for mask in [MaskMode::SingleMask, MaskMode::GroupMask] {
            // One task without class 2 on a fresh head.
            let data = Arc::new(blob_set(&[0, 1, 3, 4], 5, 8, 40, 5));
            let sc = scenario::build_incremental(Arc::clone(&data), 1).unwrap();
            let mut c = HeadSpec::gradient(kind, mask).build(5, 8, 3).unwrap();
            let before = class_params(c.as_gradient().unwrap(), frozen);
            let cfg = TrainConfig {
                lr: kind.default_lr(),
                ..TrainConfig::default()
            };
            train_scenario(&mut c, &sc, &data, &cfg, &RunLabel::default()).unwrap();
            let after = class_params(c.as_gradient().unwrap(), frozen);
            cases += 1;
            if before != after {
                failures.push(format!("{kind}/{mask} fresh"));
            }

            // Class 2 trained first, then a task without it: nothing may leak through momentum.
            let data = Arc::new(blob_set(&[0, 1, 2, 3, 4, 5], 6, 8, 40, 6));
            let sc = scenario::build_incremental(Arc::clone(&data), 3).unwrap();
            let sc = scenario::permute_tasks(&sc, 0);
            let mut c = HeadSpec::gradient(kind, mask).build(6, 8, 4).unwrap();
            let mut snaps = Vec::new();
            train_scenario_with(&mut c, &sc, &data, &cfg, &RunLabel::default(), |t, cl| {
                snaps.push(Snapshot::take(cl.as_gradient().unwrap(), t));
                Ok(())
            })
            .unwrap();
            // class 2 lives in task 1 ({2, 3}); task 2 ({4, 5}) must leave rows 0..=3 alone
            let delta = weight_delta(&snaps[1], &snaps[2]).unwrap();
            cases += 1;
            if (0..4).any(|j| delta.row_changed(j)) {
                failures.push(format!("{kind}/{mask} after earlier training"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{cases} cases bit-identical, failures: {failures:?}"),
    )
}

// ---------------------------------------------------------------------------
// 3. SLDA streaming equivalence

fn criterion_3() -> Outcome {
    const TOL: f64 = 1e-8;
    let (h, n_classes, n_obs) = (8, 4, 200);
    let eps = 1e-4;
    let mut rng = seeded(77);
    let mut g = Gaussian::new();
    let offsets: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| gaussian_vec(&mut rng, &mut g, h, 2.0))
        .collect();
    let stream: Vec<(Vec<f64>, usize)> = (0..n_obs)
        .map(|_| {
            let y = rng.gen_range(0..n_classes);
            let z = offsets[y].iter().map(|o| o + g.sample(&mut rng)).collect();
            (z, y)
        })
        .collect();

    let mut slda = SldaState::new(n_classes, h);
    for (z, y) in &stream {
        slda.observe(z, *y).unwrap();
    }

    // Reference: the recursions replayed with nalgebra.
    let mut sigma = DMatrix::<f64>::zeros(h, h);
    let mut mus = vec![DVector::<f64>::zeros(h); n_classes];
    let mut counts = vec![0.0; n_classes];
    for (t, (z, y)) in stream.iter().enumerate() {
        let t = t as f64;
        let z = DVector::from_column_slice(z);
        let d = &z - &mus[*y];
        let delta = (&d * d.transpose()) * (t / (t + 1.0));
        sigma = (sigma * t + delta) / (t + 1.0);
        mus[*y] = (&mus[*y] * counts[*y] + &z) / (counts[*y] + 1.0);
        counts[*y] += 1.0;
    }
    let shrunk = &sigma * (1.0 - eps) + DMatrix::<f64>::identity(h, h) * eps;
    let lambda = shrunk.try_inverse().expect("shrunk covariance invertible");

    let mut worst: f64 = 0.0;
    for i in 0..h {
        for j in 0..h {
            worst = worst.max((slda.covariance()[i * h + j] - sigma[(i, j)]).abs());
        }
    }
    let weights = slda.compute_weights().unwrap();
    for (k, mu) in mus.iter().enumerate() {
        let w_ref = &lambda * mu;
        let b_ref = -0.5 * mu.dot(&w_ref);
        let w = weights.w[k].as_ref().unwrap();
        for i in 0..h {
            worst = worst.max((w[i] - w_ref[i]).abs());
        }
        worst = worst.max((weights.b[k] - b_ref).abs());
    }
    outcome(
        worst <= TOL,
        format!("max abs deviation {worst:.2e} over Σ, w_k, b_k (tol {TOL:.0e})"),
    )
}

// ---------------------------------------------------------------------------
// 4. similarity-head oracles

fn brute_force_knn(stored: &[(Vec<f64>, usize)], z: &[f64], k: usize) -> usize {
    let mut d: Vec<(f64, usize, usize)> = stored
        .iter()
        .enumerate()
        .map(|(i, (x, y))| {
            (
                x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
                i,
                *y,
            )
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut votes = vec![0; 64];
    for &(_, _, y) in d.iter().take(k) {
        votes[y] += 1;
    }
    let max = *votes.iter().max().unwrap();
    votes.iter().position(|&v| v == max).unwrap()
}

fn criterion_4() -> Outcome {
    let mut rng = seeded(4);
    let mut g = Gaussian::new();
    let h = 4;
    let points: Vec<(Vec<f64>, usize)> = (0..500)
        .map(|_| (gaussian_vec(&mut rng, &mut g, h, 1.0), rng.gen_range(0..6)))
        .collect();
    let queries: Vec<Vec<f64>> = (0..100)
        .map(|_| gaussian_vec(&mut rng, &mut g, h, 1.0))
        .collect();

    let mut knn_mismatch = 0;
    for k in [1, 3, 5] {
        let mut knn = KnnState::new(k, h).unwrap();
        for (x, y) in &points {
            knn.observe(x, *y).unwrap();
        }
        for q in &queries {
            if knn.predict(q).unwrap() != brute_force_knn(&points, q, k) {
                knn_mismatch += 1;
            }
        }
    }

    // streaming vs batch mean, observation order shuffled
    let mut mean_state = PrototypeState::new(PrototypeMode::Mean, 6, h);
    let mut order: Vec<usize> = (0..points.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    for &i in &order {
        mean_state.observe(&points[i].0, points[i].1).unwrap();
    }
    let mut mean_err: f64 = 0.0;
    for c in 0..6 {
        let members: Vec<&Vec<f64>> = points.iter().filter(|p| p.1 == c).map(|p| &p.0).collect();
        for d in 0..h {
            let batch = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
            mean_err = mean_err.max((mean_state.means()[c][d] - batch).abs());
        }
    }

    // identity covariance SLDA vs nearest mean, equal class counts
    let mut slda = SldaState::new(4, h);
    let mut nm = PrototypeState::new(PrototypeMode::Mean, 4, h);
    for i in 0..200 {
        let z = gaussian_vec(&mut rng, &mut g, h, 1.0);
        slda.observe(&z, i % 4).unwrap();
        nm.observe(&z, i % 4).unwrap();
    }
    let sigma2 = 0.7;
    let iso: Vec<f64> = (0..h * h)
        .map(|k| if k / h == k % h { sigma2 } else { 0.0 })
        .collect();
    slda.set_covariance(iso).unwrap();
    let mut lda_mismatch = 0;
    for _ in 0..100 {
        let q = gaussian_vec(&mut rng, &mut g, h, 1.0);
        if slda.predict(&q).unwrap() != nm.predict(&q).unwrap() {
            lda_mismatch += 1;
        }
    }
    outcome(
        knn_mismatch == 0 && mean_err <= 1e-10 && lda_mismatch == 0,
        format!(
            "KNN mismatches {knn_mismatch}/300, mean abs err {mean_err:.1e} (tol 1e-10), SLDA-vs-nearest-mean mismatches {lda_mismatch}/100"
        ),
    )
}

// ---------------------------------------------------------------------------
// shared synthetic setup for 5–9

const SEEDS: u64 = 8;

fn synthetic(seed: u64, modes: usize) -> (Arc<FeatureSet>, FeatureSet) {
    let spec = SyntheticSpec {
        num_classes: 10,
        modes_per_class: modes,
        dim: 32,
        center_scale: 1.0,
        stddev: 0.2,
        train_per_mode: 100,
        test_per_mode: 20,
        seed,
    };
    let (train, test) = generate_synthetic(&spec).unwrap();
    (Arc::new(train), test)
}

fn run(spec: &str, sc: &Scenario, test: &FeatureSet, seed: u64) -> (f64, Classifier) {
    let spec: HeadSpec = spec.parse().unwrap();
    let mut c = spec.build(10, 32, seed).unwrap();
    let cfg = TrainConfig {
        lr: if spec.is_gradient() {
            spec.default_lr()
        } else {
            0.1
        },
        shuffle_seed: seed,
        ..TrainConfig::default()
    };
    let recs = train_scenario(&mut c, sc, test, &cfg, &RunLabel::default()).unwrap();
    (recs.last().unwrap().overall_accuracy, c)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

struct IncrementalRuns {
    iid_weightnorm: f64,
    linear: f64,
    cos_single: f64,
    slda: f64,
    slda_iid: f64,
    mean_layer: f64,
    mean_iid: f64,
    /// Per seed: (final-task norms > task-0 norms, final-task biases > task-0 biases).
    unbalance: Vec<(bool, bool)>,
}

fn incremental_runs() -> IncrementalRuns {
    let mut cols: [Vec<f64>; 7] = Default::default();
    let mut unbalance = Vec::new();
    for seed in 0..SEEDS {
        let (train, test) = synthetic(seed, 5);
        let iid = scenario::build_incremental(Arc::clone(&train), 1).unwrap();
        let inc = scenario::permute_tasks(
            &scenario::build_incremental(Arc::clone(&train), 5).unwrap(),
            seed,
        );
        cols[0].push(run("WeightNorm", &iid, &test, seed).0);
        let (lin, lin_head) = run("Linear", &inc, &test, seed);
        cols[1].push(lin);
        cols[2].push(run("CosLayer:single", &inc, &test, seed).0);
        cols[3].push(run("SLDA", &inc, &test, seed).0);
        cols[4].push(run("SLDA", &iid, &test, seed).0);
        cols[5].push(run("MeanLayer", &inc, &test, seed).0);
        cols[6].push(run("MeanLayer", &iid, &test, seed).0);

        let report = norm_bias_report(lin_head.as_gradient().unwrap());
        let group = |t: &driftbench_core::TaskView, v: &[f64]| {
            mean(
                &t.classes_present
                    .iter()
                    .map(|&c| v[c as usize])
                    .collect::<Vec<_>>(),
            )
        };
        let first = &inc.tasks()[0];
        let last = inc.tasks().last().unwrap();
        unbalance.push((
            group(last, &report.row_norms) > group(first, &report.row_norms),
            group(last, &report.biases) > group(first, &report.biases),
        ));
    }
    IncrementalRuns {
        iid_weightnorm: mean(&cols[0]),
        linear: mean(&cols[1]),
        cos_single: mean(&cols[2]),
        slda: mean(&cols[3]),
        slda_iid: mean(&cols[4]),
        mean_layer: mean(&cols[5]),
        mean_iid: mean(&cols[6]),
        unbalance,
    }
}

fn criterion_5(r: &IncrementalRuns) -> Outcome {
    let gate = r.iid_weightnorm >= 0.95;
    let pass = gate
        && r.linear < r.cos_single
        && r.linear < r.slda
        && r.slda >= 0.9 * r.slda_iid
        && r.mean_layer >= 0.9 * r.mean_iid;
    outcome(
        pass,
        format!(
            "iid WeightNorm {:.3} (gate 0.95); final Linear {:.3} < CosLayer-single {:.3}, < SLDA {:.3}; SLDA {:.3}/{:.3} iid, MeanLayer {:.3}/{:.3} iid (need >= 0.9)",
            r.iid_weightnorm, r.linear, r.cos_single, r.slda, r.slda, r.slda_iid, r.mean_layer, r.mean_iid
        ),
    )
}

fn criterion_6(r: &IncrementalRuns) -> Outcome {
    let norms = r.unbalance.iter().filter(|u| u.0).count();
    let biases = r.unbalance.iter().filter(|u| u.1).count();
    outcome(
        norms >= 6 && biases >= 6,
        format!(
            "final-task > task-0: norms in {norms}/8 seeds, biases in {biases}/8 seeds (need >= 6)"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut none = Vec::new();
    let mut single = Vec::new();
    for seed in 0..SEEDS {
        let (train, test) = synthetic(seed, 8);
        let sc = scenario::permute_tasks(&scenario::build_lifelong(train, 8).unwrap(), seed);
        none.push(run("WeightNorm", &sc, &test, seed).0);
        single.push(run("WeightNorm:single", &sc, &test, seed).0);
    }
    let (n, s) = (mean(&none), mean(&single));
    outcome(
        n >= s - 0.02,
        format!("lifelong WeightNorm no-mask {n:.3} vs single-mask {s:.3} (need >= single - 0.02)"),
    )
}

fn criterion_8() -> Outcome {
    let sizes = [Some(100), Some(200), Some(500), Some(1000), None];
    let heads = ["WeightNorm", "Linear", "MeanLayer", "SLDA"];
    let mut table = vec![vec![0.0; sizes.len()]; heads.len()];
    for seed in 0..SEEDS {
        let (train, test) = synthetic(seed, 5);
        for (hi, head) in heads.iter().enumerate() {
            let spec: HeadSpec = head.parse().unwrap();
            for (si, size) in sizes.iter().enumerate() {
                let mut c = spec.build(10, 32, seed).unwrap();
                let cfg = TrainConfig {
                    lr: if spec.is_gradient() {
                        spec.default_lr()
                    } else {
                        0.1
                    },
                    shuffle_seed: seed,
                    ..TrainConfig::default()
                };
                let rec = train_subset(
                    &mut c,
                    &train,
                    &test,
                    *size,
                    seed,
                    &cfg,
                    &RunLabel::default(),
                )
                .unwrap();
                table[hi][si] += rec.overall_accuracy / SEEDS as f64;
            }
        }
    }
    let mut pass = true;
    let mut rows = Vec::new();
    for (head, row) in heads.iter().zip(&table) {
        pass &= row.windows(2).all(|w| w[1] >= w[0]);
        rows.push(format!(
            "{head} {}",
            row.iter()
                .map(|v| format!("{v:.3}"))
                .collect::<Vec<_>>()
                .join("→")
        ));
    }
    outcome(pass, rows.join("; "))
}

fn criterion_9() -> Outcome {
    let mut group = Vec::new();
    let mut none = Vec::new();
    for seed in 0..3 {
        let (train, test) = synthetic(seed, 5);
        let sc = scenario::permute_tasks(&scenario::build_incremental(train, 5).unwrap(), seed);
        for (mask, out) in [
            (MaskMode::GroupMask, &mut group),
            (MaskMode::NoMask, &mut none),
        ] {
            let mut c = HeadSpec::gradient(HeadKind::WeightNorm, mask)
                .build(10, 32, seed)
                .unwrap();
            let cfg = TrainConfig {
                lr: HeadKind::WeightNorm.default_lr(),
                batch_size: 8,
                shuffle_seed: seed,
                eval_every_epoch: false,
                ..TrainConfig::default()
            };
            let replay = ReplayConfig {
                buffer_cap_per_class: 2000,
                replay_balance: 0.25,
                selection_seed: seed,
            };
            let recs =
                train_with_replay(&mut c, &sc, &test, &cfg, &replay, &RunLabel::default()).unwrap();
            out.push(recs.last().unwrap().overall_accuracy);
        }
    }
    let (g, n) = (mean(&group), mean(&none));
    outcome(
        g >= n,
        format!("replay balance 0.25, batch 8: GroupMask {g:.3} vs NoMask {n:.3}"),
    )
}

// ---------------------------------------------------------------------------
// 10. file format

fn criterion_10() -> Outcome {
    let mut rng = seeded(10);
    let mut g = Gaussian::new();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let dim = rng.gen_range(1..=16);
        let classes = rng.gen_range(1..=10);
        let count = rng.gen_range(0..=40);
        let examples = (0..count)
            .map(|_| {
                let f = (0..dim)
                    .map(|_| (10.0 * g.sample(&mut rng)) as f32 as f64)
                    .collect();
                Example::new(f, rng.gen_range(0..classes as u32), rng.gen_range(0..50))
            })
            .collect();
        let set = FeatureSet::new(dim, classes, examples).unwrap();
        if from_bytes(&to_bytes(&set)).ok().as_ref() != Some(&set) {
            mismatches += 1;
        }
    }

    let sample = FeatureSet::new(
        2,
        3,
        (0..10)
            .map(|i| Example::new(vec![i as f64, 1.5], (i % 3) as u32, 0))
            .collect(),
    )
    .unwrap();
    let good = to_bytes(&sample);
    let mut magic = good.clone();
    magic[..4].copy_from_slice(b"XXXX");
    let truncated = &good[..good.len() - 16];
    let mut nan = good.clone();
    nan[24 + 8..24 + 12].copy_from_slice(&f32::NAN.to_le_bytes());
    let negatives = [
        matches!(from_bytes(&magic), Err(Error::Format(_))),
        matches!(from_bytes(truncated), Err(Error::Corruption(_))),
        matches!(from_bytes(&nan), Err(Error::Validation(_))),
    ];
    let rejected = negatives.iter().filter(|x| **x).count();
    outcome(
        mismatches == 0 && rejected == 3,
        format!("roundtrip mismatches {mismatches}/1000; corrupted files rejected with expected error {rejected}/3"),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, &str, Outcome, Duration, Option<Duration>)> = Vec::new();
    let mut timed = |id, name, limit: Option<u64>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        results.push((
            id,
            name,
            out,
            start.elapsed(),
            limit.map(Duration::from_secs),
        ));
    };
    timed(1, "gradient correctness", Some(10), &mut criterion_1);
    timed(2, "masking conservation", Some(5), &mut criterion_2);
    timed(3, "SLDA streaming equivalence", Some(5), &mut criterion_3);
    timed(4, "similarity-head oracles", Some(10), &mut criterion_4);
    let start = Instant::now();
    let inc = incremental_runs();
    let inc_time = start.elapsed();
    results.push((
        5,
        "incremental forgetting ordering",
        criterion_5(&inc),
        inc_time,
        Some(Duration::from_secs(120)),
    ));
    results.push((
        6,
        "norm/bias unbalance",
        criterion_6(&inc),
        Duration::ZERO,
        None,
    ));
    let mut timed = |id, name, limit: Option<u64>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        results.push((
            id,
            name,
            out,
            start.elapsed(),
            limit.map(Duration::from_secs),
        ));
    };
    timed(7, "lifelong masking", None, &mut criterion_7);
    timed(8, "subset monotonicity", Some(120), &mut criterion_8);
    timed(
        9,
        "replay balance with group masking",
        None,
        &mut criterion_9,
    );
    timed(10, "feature file format", None, &mut criterion_10);

    let mut failed = Vec::new();
    for (id, name, out, elapsed, limit) in &results {
        let in_time = limit.is_none_or(|l| *elapsed < l);
        let pass = out.pass && in_time;
        let budget = limit
            .map(|l| format!(" / limit {}s", l.as_secs()))
            .unwrap_or_default();
        println!(
            "[{}] criterion {id:>2} {name}: {} ({:.2}s{budget})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
        if !pass {
            failed.push(*id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
