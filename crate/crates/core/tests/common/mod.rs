//! Reference computations shared by the oracle tests and the acceptance
//! report. Each check returns the measured discrepancy; callers decide the
//! tolerance.
#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use prefscreen_core::acquisition::{
    mc_expected_acquisition, thompson_scores, AcquisitionKind, AcquisitionSpec, Candidate, ScoringContext,
};
use prefscreen_core::featurization::{morgan_fingerprint, parse_smiles, write_smiles, Fingerprint, Normalizer};
use prefscreen_core::gp::{fit_gp, AffinitySurrogate, Features, HyperOptions, KernelKind, KernelSpec};
use prefscreen_core::preference::{laplace_fit, PreferenceDatum, PreferenceGpModel};
use prefscreen_core::rng::{seeded, ChaCha8Rng};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn phi(z: f64) -> f64 {
    Normal::standard().pdf(z)
}

fn cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------- SMILES

/// `(smiles, heavy atoms, bonds, total hydrogens, aromatic atoms, net charge)`,
/// counted from each molecule's formula and ring count.
pub const MOLECULES: [(&str, usize, usize, u32, usize, i32); 30] = [
    ("C", 1, 0, 4, 0, 0),
    ("CC", 2, 1, 6, 0, 0),
    ("CCO", 3, 2, 6, 0, 0),
    ("C=C", 2, 1, 4, 0, 0),
    ("C#C", 2, 1, 2, 0, 0),
    ("C1CC1", 3, 3, 6, 0, 0),
    ("c1ccccc1", 6, 6, 6, 6, 0),
    ("C(C)(C)(C)C", 5, 4, 12, 0, 0),
    ("CC(=O)O", 4, 3, 4, 0, 0),
    ("c1ccncc1", 6, 6, 5, 6, 0),
    ("C1CCCCC1", 6, 6, 12, 0, 0),
    ("CC(=O)Oc1ccccc1C(=O)O", 13, 13, 8, 6, 0),
    ("CN1C=NC2=C1C(=O)N(C(=O)N2C)C", 14, 15, 10, 0, 0),
    ("CC(C)Cc1ccc(cc1)C(C)C(=O)O", 15, 15, 18, 6, 0),
    ("CC(=O)Nc1ccc(O)cc1", 11, 11, 9, 6, 0),
    ("c1ccc2ccccc2c1", 10, 11, 8, 10, 0),
    ("C1=CC=CC=C1", 6, 6, 6, 0, 0),
    ("c1ccc2[nH]ccc2c1", 9, 10, 7, 9, 0),
    ("c1cc[nH]c1", 5, 5, 5, 5, 0),
    ("c1ccsc1", 5, 5, 4, 5, 0),
    ("c1ccoc1", 5, 5, 4, 5, 0),
    ("OC[C@H]1OC(O)[C@H](O)[C@@H](O)[C@@H]1O", 12, 12, 12, 0, 0),
    ("C/C=C/C", 4, 3, 8, 0, 0),
    ("CCN(CC)CC", 7, 6, 15, 0, 0),
    ("FC(F)(F)C(=O)O", 7, 6, 1, 0, 0),
    ("ClC(Cl)(Cl)Cl", 5, 4, 0, 0, 0),
    ("OP(=O)(O)O", 5, 4, 3, 0, 0),
    ("CS(=O)C", 4, 3, 6, 0, 0),
    ("C%10CC%10", 3, 3, 6, 0, 0),
    ("[NH4+].[O-]C(=O)CBr", 6, 4, 6, 0, 0),
];

/// Table rows whose parse disagrees with the reference counts.
pub fn smiles_table_mismatches() -> Vec<String> {
    let mut bad = Vec::new();
    for &(s, atoms, bonds, h, aromatic, charge) in &MOLECULES {
        match parse_smiles(s) {
            Err(e) => bad.push(format!("{s}: {e}")),
            Ok(g) => {
                let got = (
                    g.atoms.len(),
                    g.bonds.len(),
                    g.atoms.iter().map(|a| u32::from(a.h_count)).sum::<u32>(),
                    g.atoms.iter().filter(|a| a.aromatic).count(),
                    g.atoms.iter().map(|a| i32::from(a.charge)).sum::<i32>(),
                );
                if got != (atoms, bonds, h, aromatic, charge) {
                    bad.push(format!(
                        "{s}: got {got:?}, expected {:?}",
                        (atoms, bonds, h, aromatic, charge)
                    ));
                }
            }
        }
    }
    bad
}

/// Rewrites each of the first 20 table molecules `rewrites` times in random
/// atom order and lists those whose fingerprint changes.
pub fn permutation_failures(rewrites: usize, seed: u64) -> (usize, Vec<String>) {
    let mut rng = seeded(seed);
    let mut checked = 0;
    let mut bad = Vec::new();
    for &(s, ..) in MOLECULES.iter().take(20) {
        let g = parse_smiles(s).unwrap();
        let reference = morgan_fingerprint(&g, 2, 2048).unwrap();
        for _ in 0..rewrites {
            let w = write_smiles(&g, &mut rng);
            checked += 1;
            match parse_smiles(&w).and_then(|h| morgan_fingerprint(&h, 2, 2048)) {
                Ok(fp) if fp == reference => {}
                Ok(_) => bad.push(format!("{s} -> {w}: fingerprint differs")),
                Err(e) => bad.push(format!("{s} -> {w}: {e}")),
            }
        }
    }
    (checked, bad)
}

fn random_fingerprint(rng: &mut ChaCha8Rng, n_bits: usize) -> (Fingerprint, BTreeSet<usize>) {
    let density: f64 = rng.random_range(0.02..0.4);
    let bits: BTreeSet<usize> = (0..n_bits).filter(|_| rng.random_bool(density)).collect();
    (Fingerprint::from_bits(n_bits, bits.iter().copied()).unwrap(), bits)
}

fn set_tanimoto(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

pub struct TanimotoReport {
    pub bound_violations: usize,
    pub max_set_error: f64,
    pub min_eigenvalue: f64,
}

/// Over `sets` random fingerprint sets: values within [0, 1] with unit
/// diagonal, agreement with the set formula, and the smallest eigenvalue of
/// any kernel matrix.
pub fn tanimoto_checks(sets: usize, seed: u64) -> TanimotoReport {
    let mut rng = seeded(seed);
    let kernel = KernelSpec::<f64>::tanimoto(1.0);
    let mut r = TanimotoReport {
        bound_violations: 0,
        max_set_error: 0.0,
        min_eigenvalue: f64::INFINITY,
    };
    for _ in 0..sets {
        let n = rng.random_range(5..40);
        let n_bits = [64, 128, 256][rng.random_range(0..3)];
        let (fps, bitsets): (Vec<_>, Vec<_>) = (0..n).map(|_| random_fingerprint(&mut rng, n_bits)).unzip();
        let feats: Vec<Features<f64>> = fps.into_iter().map(Features::Bits).collect();
        let k = kernel.matrix(&feats);
        for i in 0..n {
            if (k[(i, i)] - 1.0).abs() > 1e-15 {
                r.bound_violations += 1;
            }
            for j in 0..n {
                let v = k[(i, j)];
                if !(0.0..=1.0).contains(&v) || v != k[(j, i)] {
                    r.bound_violations += 1;
                }
                r.max_set_error = r.max_set_error.max((v - set_tanimoto(&bitsets[i], &bitsets[j])).abs());
            }
        }
        let min = k.symmetric_eigen().eigenvalues.min();
        r.min_eigenvalue = r.min_eigenvalue.min(min);
    }
    r
}

// --------------------------------------------------------- Laplace mode

fn rbf(a: &[f64], b: &[f64], l: f64, s: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    s * (-d2 / (2.0 * l * l)).exp()
}

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Prior covariance as the model defines it, with its relative diagonal
/// jitter of 1e-6.
fn prior(points: &[Vec<f64>], l: f64, s: f64) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| {
        rbf(&points[i], &points[j], l, s) + if i == j { 1e-6 * s } else { 0.0 }
    })
}

/// Maximizes `Σ log σ(f_w − f_l) − ½ fᵀK⁻¹f` by gradient ascent with
/// backtracking in whitened coordinates `f = L v`.
fn brute_force_mode(k: &DMatrix<f64>, pairs: &[(usize, usize)]) -> DVector<f64> {
    let n = k.nrows();
    let l = k.clone().cholesky().expect("prior is positive definite").l();
    let objective = |v: &DVector<f64>| {
        let f = &l * v;
        pairs.iter().map(|&(w, o)| log_sigmoid(f[w] - f[o])).sum::<f64>() - 0.5 * v.norm_squared()
    };
    let gradient = |v: &DVector<f64>| {
        let f = &l * v;
        let mut g = DVector::zeros(n);
        for &(w, o) in pairs {
            let s = sigmoid(-(f[w] - f[o]));
            g[w] += s;
            g[o] -= s;
        }
        l.tr_mul(&g) - v
    };
    let mut v = DVector::zeros(n);
    let mut step = 1.0;
    for _ in 0..200_000 {
        let g = gradient(&v);
        if g.amax() < 1e-12 {
            break;
        }
        let here = objective(&v);
        loop {
            let cand = &v + &g * step;
            if objective(&cand) >= here + 0.25 * step * g.norm_squared() || step < 1e-12 {
                v = cand;
                break;
            }
            step *= 0.5;
        }
        step = (step * 2.0).min(1.0);
    }
    &l * v
}

fn random_instance(rng: &mut ChaCha8Rng) -> Vec<PreferenceDatum<f64>> {
    let n = rng.random_range(2..=5);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let m = rng.random_range(1..=8);
    (0..m)
        .map(|_| {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            PreferenceDatum::new(points[i].clone(), points[j].clone())
        })
        .collect()
}

/// Largest per-coordinate gap between the fitted Laplace mode and the
/// brute-force maximizer over `instances` random problems of at most five
/// points.
pub fn laplace_mode_error(instances: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (l, s) = (1.0, 1.5);
    let kernel = KernelSpec::rbf(vec![l; 2], s);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let data = random_instance(&mut rng);
        let model = laplace_fit(&data, &kernel).unwrap();
        let k = prior(&model.train_points, l, s);
        let mode = brute_force_mode(&k, &model.pairs);
        worst = worst.max((&mode - &model.laplace_mode).amax());
    }
    worst
}

/// Largest gap between the model's predictive moments and the dense
/// formulas `k*ᵀK⁻¹f̂` and `k** − k*ᵀK⁻¹k* + k*ᵀK⁻¹(K⁻¹ + W)⁻¹K⁻¹k*`.
pub fn laplace_predictive_error(instances: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (l, s) = (1.0, 1.5);
    let kernel = KernelSpec::rbf(vec![l; 2], s);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let data = random_instance(&mut rng);
        let model = laplace_fit(&data, &kernel).unwrap();
        let pts = &model.train_points;
        let k = prior(pts, l, s);
        let f = brute_force_mode(&k, &model.pairs);
        let n = pts.len();
        let mut w = DMatrix::zeros(n, n);
        for &(a, b) in &model.pairs {
            let p = sigmoid(f[a] - f[b]);
            let h = p * (1.0 - p);
            w[(a, a)] += h;
            w[(b, b)] += h;
            w[(a, b)] -= h;
            w[(b, a)] -= h;
        }
        let k_inv = k.clone().try_inverse().unwrap();
        let post = (&k_inv + &w).try_inverse().unwrap();
        let queries: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let (mean, var) = model.posterior(&queries).unwrap();
        for (q, x) in queries.iter().enumerate() {
            let ks = DVector::from_iterator(n, pts.iter().map(|p| rbf(p, x, l, s)));
            let a = &k_inv * &ks;
            let m = a.dot(&f);
            let v = s - ks.dot(&a) + a.dot(&(&post * &a));
            worst = worst.max((m - mean[q]).abs()).max((v - var[q]).abs());
        }
    }
    worst
}

// ------------------------------------------------------ GP dense solve

pub struct DenseGpReport {
    pub posterior_error: f64,
    pub lml_error: f64,
    pub jitter: f64,
}

/// Tanimoto GP on random fingerprints against an explicit inverse of
/// `K + σ²I`.
pub fn gp_dense_check(seed: u64) -> DenseGpReport {
    let mut rng = seeded(seed);
    let (signal, noise) = (1.3, 0.05);
    let train: Vec<(Fingerprint, BTreeSet<usize>)> = (0..40).map(|_| random_fingerprint(&mut rng, 128)).collect();
    let test: Vec<(Fingerprint, BTreeSet<usize>)> = (0..12).map(|_| random_fingerprint(&mut rng, 128)).collect();
    let y = DVector::from_iterator(train.len(), (0..train.len()).map(|_| randn(&mut rng)));
    let model = fit_gp(
        train.iter().map(|(f, _)| Features::Bits(f.clone())).collect(),
        y.clone(),
        KernelSpec::tanimoto(signal),
        noise,
    )
    .unwrap();
    let (mean, var) = model
        .posterior(&test.iter().map(|(f, _)| Features::Bits(f.clone())).collect::<Vec<_>>())
        .unwrap();

    let n = train.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        signal * set_tanimoto(&train[i].1, &train[j].1) + if i == j { noise + model.jitter } else { 0.0 }
    });
    let a_inv = a.clone().try_inverse().unwrap();
    let mut posterior_error = 0.0f64;
    for (q, (_, bits)) in test.iter().enumerate() {
        let ks = DVector::from_iterator(n, train.iter().map(|(_, b)| signal * set_tanimoto(b, bits)));
        let m = ks.dot(&(&a_inv * &y));
        let v = signal - ks.dot(&(&a_inv * &ks));
        posterior_error = posterior_error.max((m - mean[q]).abs()).max((v - var[q]).abs());
    }
    let lml =
        -0.5 * y.dot(&(&a_inv * &y)) - 0.5 * a.determinant().ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    DenseGpReport {
        posterior_error,
        lml_error: (lml - model.log_marginal_likelihood()).abs(),
        jitter: model.jitter,
    }
}

// ------------------------------------------- Gauss–Hermite quadrature

/// Nodes and weights for `∫ e^{−x²} g(x) dx` by the Golub–Welsch method.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let j = DMatrix::from_fn(n, n, |a, b| {
        if a.abs_diff(b) == 1 {
            (a.max(b) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = j.symmetric_eigen();
    let mut nodes: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes.into_iter().unzip()
}

/// `E[g(X)]` for `X ~ N(mean, var)`.
pub fn normal_expectation(mean: f64, var: f64, n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(n);
    let sd = var.max(0.0).sqrt();
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| wi * g(mean + std::f64::consts::SQRT_2 * sd * xi))
        .sum::<f64>()
        / std::f64::consts::PI.sqrt()
}

fn acquisition_reference(kind: AcquisitionKind, m: f64, v: f64, spec: &AcquisitionSpec) -> f64 {
    let sd = v.max(0.0).sqrt();
    let inc = spec.incumbent.unwrap_or(0.0);
    match kind {
        AcquisitionKind::QEi => {
            let z = (m - inc) / sd;
            (m - inc) * cdf(z) + sd * phi(z)
        }
        AcquisitionKind::QPi => cdf((m - inc) / sd),
        AcquisitionKind::QUcb => m + spec.beta * sd,
        _ => m,
    }
}

/// Clark's moments of `max(X, Y)` for a bivariate normal.
fn clark_expected_max(mx: f64, vx: f64, my: f64, vy: f64, c: f64) -> f64 {
    let t = (vx + vy - 2.0 * c).max(0.0).sqrt();
    if t == 0.0 {
        return mx.max(my);
    }
    let a = (mx - my) / t;
    mx * cdf(a) + my * cdf(-a) + t * phi(a)
}

/// A fitted utility model over four normalized objectives, an affinity
/// surrogate over fingerprints and three unscreened candidates.
pub struct ScoringFixture {
    pub utility: PreferenceGpModel<f64>,
    pub affinity: AffinitySurrogate<f64>,
    pub normalizer: Normalizer,
    pub candidates: Vec<(Fingerprint, Vec<f64>)>,
    pub incumbent_point: Vec<f64>,
}

fn raw_props(rng: &mut ChaCha8Rng) -> Vec<f64> {
    vec![
        rng.random_range(-11.0..-5.0),
        rng.random_range(200.0..500.0),
        rng.random_range(-1.0..5.0),
        rng.random_range(0.0..12.0),
    ]
}

pub fn scoring_fixture(seed: u64) -> ScoringFixture {
    let mut rng = seeded(seed);
    let rows: Vec<Vec<f64>> = (0..30).map(|_| raw_props(&mut rng)).collect();
    let normalizer = Normalizer::fit(rows.iter().map(|r| r.as_slice()));
    let z: Vec<Vec<f64>> = rows.iter().map(|r| normalizer.apply(r)).collect();
    let u = |x: &[f64]| -1.2 * x[0] - 0.5 * x[1] + 0.4 * x[2] - 0.3 * x[3];
    let data: Vec<PreferenceDatum<f64>> = (0..40)
        .map(|_| {
            let i = rng.random_range(0..z.len());
            let j = (i + rng.random_range(1..z.len())) % z.len();
            let (a, b) = if u(&z[i]) >= u(&z[j]) { (i, j) } else { (j, i) };
            PreferenceDatum::new(z[a].clone(), z[b].clone())
        })
        .collect();
    let utility = laplace_fit(&data, &KernelSpec::rbf(vec![1.5; 4], 2.0)).unwrap();

    let fps: Vec<Fingerprint> = (0..20).map(|_| random_fingerprint(&mut rng, 128).0).collect();
    let targets: Vec<f64> = fps
        .iter()
        .map(|f| -5.0 - 0.15 * f64::from(f.on_count()) + 0.3 * randn(&mut rng))
        .collect();
    let affinity = AffinitySurrogate::fit(
        fps.iter().cloned().map(Features::Bits).collect(),
        &targets,
        KernelKind::Tanimoto,
        &HyperOptions {
            restarts: 0,
            max_hyperopt_points: 64,
        },
        &mut rng,
    )
    .unwrap();
    let candidates = (0..3)
        .map(|_| (random_fingerprint(&mut rng, 128).0, raw_props(&mut rng)))
        .collect();
    let best = z.iter().max_by(|a, b| u(a).total_cmp(&u(b))).cloned().unwrap();
    ScoringFixture {
        utility,
        affinity,
        normalizer,
        candidates,
        incumbent_point: best,
    }
}

/// Largest gap between the sampled acquisition (`samples` affinity draws)
/// and 1-D Gauss–Hermite quadrature over the affinity posterior, over the
/// three fixture candidates and every expectation-scored kind.
pub fn mc_vs_quadrature_error(samples: usize, seed: u64) -> f64 {
    let fx = scoring_fixture(seed);
    let ctx = ScoringContext {
        affinity: Some(&fx.affinity),
        utility: &fx.utility,
        normalizer: &fx.normalizer,
        affinity_index: 0,
        incumbent_point: Some(fx.incumbent_point.clone()),
    };
    let (inc_mean, _) = fx.utility.posterior(std::slice::from_ref(&fx.incumbent_point)).unwrap();
    let mut rng = seeded(seed + 1);
    let mut worst = 0.0f64;
    for (c, (fp, props)) in fx.candidates.iter().enumerate() {
        let (am, av) = fx.affinity.posterior(&[Features::Bits(fp.clone())]).unwrap();
        assert!(av[0] > 1e-3, "candidate affinity must be uncertain");
        let cand = Candidate {
            id: "c",
            fingerprint: fp,
            props: props.clone(),
            stream: c as u64,
            known_affinity: None,
        };
        for kind in [
            AcquisitionKind::QEi,
            AcquisitionKind::QPi,
            AcquisitionKind::QUcb,
            AcquisitionKind::QEubo,
            AcquisitionKind::Greedy,
        ] {
            let spec = AcquisitionSpec {
                mc_affinity_samples: samples,
                incumbent: Some(inc_mean[0]),
                ..AcquisitionSpec::of(kind)
            };
            let sampled = mc_expected_acquisition(&ctx, &cand, &spec, &mut rng)
                .unwrap()
                .acquisition_value;
            let at = |a: f64| {
                let mut x = props.clone();
                x[0] = a;
                fx.normalizer.apply(&x)
            };
            let exact = normal_expectation(am[0], av[0], 80, |a| {
                let q = at(a);
                if kind == AcquisitionKind::QEubo {
                    let (m, cov) = fx.utility.joint_posterior(&[q, fx.incumbent_point.clone()]).unwrap();
                    clark_expected_max(m[0], cov[(0, 0)], m[1], cov[(1, 1)], cov[(0, 1)])
                } else {
                    let (m, v) = fx.utility.posterior(&[q]).unwrap();
                    acquisition_reference(kind, m[0], v[0], &spec)
                }
            });
            worst = worst.max((sampled - exact).abs());
        }
    }
    worst
}

// ------------------------------------------------ Thompson frequencies

/// Probability that coordinate `i` is the largest of a trivariate normal,
/// by one-dimensional integration of the bivariate orthant probability of
/// `(X_i − X_j, X_i − X_k)`.
pub fn argmax_probability(mean: &DVector<f64>, cov: &DMatrix<f64>, i: usize) -> f64 {
    let (j, k) = match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let m1 = mean[i] - mean[j];
    let m2 = mean[i] - mean[k];
    let v1 = cov[(i, i)] + cov[(j, j)] - 2.0 * cov[(i, j)];
    let v2 = cov[(i, i)] + cov[(k, k)] - 2.0 * cov[(i, k)];
    let c12 = cov[(i, i)] - cov[(i, k)] - cov[(i, j)] + cov[(j, k)];
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    let r = (c12 / (s1 * s2)).clamp(-1.0, 1.0);
    let rest = (1.0 - r * r).sqrt();
    // P(D1 > 0, D2 > 0) = ∫_{z > −m1/s1} φ(z) Φ((m2 + s2 r z) / (s2 √(1−r²))) dz
    let lo = -m1 / s1;
    let hi = lo.max(0.0) + 12.0;
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    let g = |z: f64| phi(z) * cdf((m2 + s2 * r * z) / (s2 * rest));
    let mut acc = g(lo) + g(hi);
    for s in 1..steps {
        acc += g(lo + s as f64 * h) * if s % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

pub struct ThompsonReport {
    pub max_error: f64,
    pub exact: [f64; 3],
    pub empirical: [f64; 3],
}

/// Empirical argmax frequencies of `draws` joint Thompson samples over
/// three correlated candidates against the exact probabilities.
pub fn thompson_frequency_check(draws: usize, seed: u64) -> ThompsonReport {
    let mut rng = seeded(seed);
    let pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![-0.5, 1.0], vec![0.8, -0.8]];
    let data = vec![
        PreferenceDatum::new(pts[1].clone(), pts[0].clone()),
        PreferenceDatum::new(pts[2].clone(), pts[0].clone()),
        PreferenceDatum::new(pts[1].clone(), pts[3].clone()),
    ];
    let model = laplace_fit(&data, &KernelSpec::rbf(vec![1.0; 2], 1.0)).unwrap();
    let queries = vec![vec![0.6, 0.4], vec![-0.2, 0.9], vec![0.9, -0.2]];
    let (mean, cov) = model.joint_posterior(&queries).unwrap();
    let exact = [0, 1, 2].map(|i| argmax_probability(&mean, &cov, i));
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        let s = thompson_scores(&model, &queries, 512, &mut rng).unwrap();
        let best = (0..3).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        counts[best] += 1;
    }
    let empirical = counts.map(|c| c as f64 / draws as f64);
    let max_error = (0..3).map(|i| (exact[i] - empirical[i]).abs()).fold(0.0, f64::max);
    ThompsonReport {
        max_error,
        exact,
        empirical,
    }
}

// ------------------------------------------------ hyperparameter search

fn dense_lml(k: &DMatrix<f64>, y: &DVector<f64>, noise: f64) -> f64 {
    let n = y.len();
    let a = k + DMatrix::identity(n, n) * noise;
    let chol = a.cholesky().expect("noisy kernel matrix is positive definite");
    let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    -0.5 * y.dot(&chol.solve(y)) - 0.5 * logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// The optimizer's log marginal likelihood and the best value on a dense
/// grid over (log signal, log noise) for a Tanimoto GP.
pub fn hyperopt_vs_grid(seed: u64) -> (f64, f64) {
    let mut rng = seeded(seed);
    let data: Vec<(Fingerprint, BTreeSet<usize>)> = (0..30).map(|_| random_fingerprint(&mut rng, 128)).collect();
    let y = DVector::from_iterator(
        data.len(),
        data.iter()
            .map(|(f, _)| 0.05 * f64::from(f.on_count()) - 1.0 + 0.4 * randn(&mut rng)),
    );
    let inputs: Vec<Features<f64>> = data.iter().map(|(f, _)| Features::Bits(f.clone())).collect();
    let fit = prefscreen_core::gp::optimize_hyperparameters(
        &inputs,
        &y,
        KernelKind::Tanimoto,
        &HyperOptions {
            restarts: 3,
            max_hyperopt_points: 64,
        },
        &mut rng,
    )
    .unwrap();
    let n = data.len();
    let t = DMatrix::from_fn(n, n, |i, j| set_tanimoto(&data[i].1, &data[j].1));
    let mut best = f64::NEG_INFINITY;
    let steps = 160;
    for a in 0..=steps {
        let log_s = -4.0 + 10.0 * a as f64 / steps as f64;
        for b in 0..=steps {
            let log_n = -8.0 + 10.0 * b as f64 / steps as f64;
            best = best.max(dense_lml(&(&t * log_s.exp()), &y, log_n.exp()));
        }
    }
    (fit.log_marginal_likelihood, best)
}
