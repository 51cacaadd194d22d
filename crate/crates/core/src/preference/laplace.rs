use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PreferenceDatum;
use crate::error::{Error, Result};
use crate::gp::{Features, KernelSpec};
use crate::Scalar;

/// Default sample count for [`predict_preference`] when marginalizing.
pub const DEFAULT_MC_SAMPLES: usize = 64;

const GRAD_TOL: f64 = 1e-6;
const MAX_NEWTON: usize = 100;
/// Relative diagonal jitter on the prior covariance.
const PRIOR_JITTER: f64 = 1e-6;
const QUERY_CHUNK: usize = 1024;

/// `σ(f_winner − f_loser)`.
pub fn bradley_terry_prob<T: Scalar>(f_winner: T, f_loser: T) -> T {
    logistic(f_winner - f_loser)
}

fn logistic<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log σ(z)` without overflow.
fn log_logistic<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Laplace-approximated GP over latent utilities.
#[derive(Debug, Clone)]
pub struct PreferenceGpModel<T: Scalar> {
    pub kernel: KernelSpec<T>,
    /// Deduplicated property vectors.
    pub train_points: Vec<Vec<T>>,
    /// `(preferred, other)` row indices into `train_points`.
    pub pairs: Vec<(usize, usize)>,
    pub laplace_mode: DVector<T>,
    /// `K⁻¹ f̂`.
    pub alpha: DVector<T>,
    /// Likelihood curvature at the mode.
    pub curvature: DMatrix<T>,
    /// `R` with `R Rᵀ = (K + W⁻¹)⁻¹`, used for the predictive covariance.
    pub cov_factor: DMatrix<T>,
    /// Laplace estimate of the log evidence.
    pub log_evidence: f64,
    pub newton_iterations: usize,
}

fn dedup_key<T: Scalar>(x: &[T]) -> Vec<u64> {
    x.iter().map(|v| v.as_f64().to_bits()).collect()
}

/// Fits the model on comparisons, merging repeated property vectors.
pub fn laplace_fit<T: Scalar>(data: &[PreferenceDatum<T>], kernel: &KernelSpec<T>) -> Result<PreferenceGpModel<T>> {
    let (points, pairs) = index_points(data)?;
    laplace_fit_indexed(points, pairs, kernel)
}

/// Mode and evidence of one kernel, before the predictive factor is built.
struct ModeFit<T: Scalar> {
    kernel: KernelSpec<T>,
    points: Vec<Vec<T>>,
    pairs: Vec<(usize, usize)>,
    f: DVector<T>,
    a: DVector<T>,
    w: DMatrix<T>,
    lu: nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    log_evidence: f64,
    iterations: usize,
}

/// Fits the model on explicit points and `(preferred, other)` index pairs.
/// Points may appear in no pair.
pub fn laplace_fit_indexed<T: Scalar>(
    points: Vec<Vec<T>>,
    pairs: Vec<(usize, usize)>,
    kernel: &KernelSpec<T>,
) -> Result<PreferenceGpModel<T>> {
    finish(find_mode(points, pairs, kernel)?)
}

fn index_points<T: Scalar>(data: &[PreferenceDatum<T>]) -> Result<(Vec<Vec<T>>, Vec<(usize, usize)>)> {
    if data.is_empty() {
        return Err(Error::input("laplace_fit needs at least one comparison"));
    }
    let dim = data[0].winner_props.len();
    let mut points: Vec<Vec<T>> = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut pairs = Vec::with_capacity(data.len());
    for d in data {
        let (w, l) = d.oriented();
        if w.len() != dim || l.len() != dim {
            return Err(Error::input("comparison vectors differ in dimension"));
        }
        let mut idx = |x: &[T]| -> Result<usize> {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::input("comparison vectors must be finite"));
            }
            let key = dedup_key(x);
            Ok(*seen.entry(key).or_insert_with(|| {
                points.push(x.to_vec());
                points.len() - 1
            }))
        };
        let (iw, il) = (idx(w)?, idx(l)?);
        pairs.push((iw, il));
    }
    Ok((points, pairs))
}

fn find_mode<T: Scalar>(points: Vec<Vec<T>>, pairs: Vec<(usize, usize)>, kernel: &KernelSpec<T>) -> Result<ModeFit<T>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::input("no points"));
    }
    kernel.validate()?;
    let feats: Vec<Features<T>> = points.iter().map(|p| Features::Real(p.clone())).collect();
    for f in &feats {
        kernel.check(f)?;
    }
    for &(a, b) in &pairs {
        if a >= n || b >= n {
            return Err(Error::input("pair index out of range"));
        }
        if a == b {
            return Err(Error::input("a comparison needs two distinct points"));
        }
    }
    let mut k = kernel.matrix(&feats);
    let jitter = kernel.signal_variance() * T::lit(PRIOR_JITTER);
    for i in 0..n {
        k[(i, i)] += jitter;
    }

    let eval = |f: &DVector<T>, a: &DVector<T>| -> (T, DVector<T>) {
        let mut ll = T::zero();
        let mut g = DVector::zeros(n);
        for &(w, l) in &pairs {
            let z = f[w] - f[l];
            ll += log_logistic(z);
            let s = logistic(-z);
            g[w] += s;
            g[l] -= s;
        }
        (ll - f.dot(a) / T::lit(2.0), g)
    };
    let curvature = |f: &DVector<T>| -> DMatrix<T> {
        let mut w = DMatrix::zeros(n, n);
        for &(a, b) in &pairs {
            let p = logistic(f[a] - f[b]);
            let h = p * (T::one() - p);
            w[(a, a)] += h;
            w[(b, b)] += h;
            w[(a, b)] -= h;
            w[(b, a)] -= h;
        }
        w
    };

    let mut f = DVector::<T>::zeros(n);
    let mut a = DVector::<T>::zeros(n);
    let (mut psi, mut g) = eval(&f, &a);
    let mut iterations = 0;
    loop {
        let grad_norm = (&g - &a).amax().as_f64();
        if grad_norm <= GRAD_TOL {
            break;
        }
        if iterations == MAX_NEWTON {
            return Err(Error::Convergence { grad_norm, iterations });
        }
        iterations += 1;
        let w = curvature(&f);
        let b = &w * &f + &g;
        let system = DMatrix::identity(n, n) + &k * &w;
        let f_full = system
            .lu()
            .solve(&(&k * &b))
            .ok_or_else(|| numerical("Newton system is singular"))?;
        let a_full = &b - &w * &f_full;
        let mut t = T::one();
        let mut moved = false;
        for _ in 0..30 {
            let fc = &f + (&f_full - &f) * t;
            let ac = &a + (&a_full - &a) * t;
            let (pc, gc) = eval(&fc, &ac);
            if pc.is_finite() && pc >= psi {
                f = fc;
                a = ac;
                psi = pc;
                g = gc;
                moved = true;
                break;
            }
            t /= T::lit(2.0);
        }
        if !moved {
            return Err(Error::Convergence { grad_norm, iterations });
        }
    }

    let w = curvature(&f);
    let lu = (DMatrix::identity(n, n) + &w * &k).lu();
    // det(I + WK) = det(I + KW) > 0.
    let log_det: f64 = lu.u().diagonal().iter().map(|d| d.as_f64().abs().ln()).sum();
    if !log_det.is_finite() {
        return Err(numerical("I + WK is singular"));
    }
    Ok(ModeFit {
        kernel: kernel.clone(),
        points,
        pairs,
        f,
        a,
        w,
        lu,
        log_evidence: psi.as_f64() - 0.5 * log_det,
        iterations,
    })
}

fn finish<T: Scalar>(fit: ModeFit<T>) -> Result<PreferenceGpModel<T>> {
    let m = fit.lu.solve(&fit.w).ok_or_else(|| numerical("I + WK is singular"))?;
    let m = (&m + m.transpose()) / T::lit(2.0);
    Ok(PreferenceGpModel {
        cov_factor: psd_factor(&m),
        kernel: fit.kernel,
        train_points: fit.points,
        pairs: fit.pairs,
        laplace_mode: fit.f,
        alpha: fit.a,
        curvature: fit.w,
        log_evidence: fit.log_evidence,
        newton_iterations: fit.iterations,
    })
}

fn numerical(message: &str) -> Error {
    Error::Numerical {
        message: message.into(),
        jitter: PRIOR_JITTER,
        pivot_ratio: 0.0,
    }
}

/// `R` with `R Rᵀ ≈ M`, keeping only positive eigen-directions.
fn psd_factor<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(T::zero(), |acc, &v| acc.max(v));
    let floor = top * T::lit(1e-14);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > floor).collect();
    let mut r = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        r.set_column(c, &(eig.eigenvectors.column(i) * s));
    }
    r
}

impl<T: Scalar> PreferenceGpModel<T> {
    pub fn dim(&self) -> usize {
        self.train_points.first().map_or(0, Vec::len)
    }

    fn check_queries(&self, queries: &[Vec<T>]) -> Result<()> {
        let d = self.dim();
        match queries.iter().find(|q| q.len() != d) {
            Some(q) => Err(Error::Representation(format!(
                "query has {} dimensions, model has {d}",
                q.len()
            ))),
            None => Ok(()),
        }
    }

    fn cross(&self, queries: &[Vec<T>]) -> DMatrix<T> {
        let train: Vec<Features<T>> = self.train_points.iter().map(|p| Features::Real(p.clone())).collect();
        let q: Vec<Features<T>> = queries.iter().map(|p| Features::Real(p.clone())).collect();
        self.kernel.cross(&train, &q)
    }

    /// Predictive mean and variance of the latent utility at each query.
    pub fn posterior(&self, queries: &[Vec<T>]) -> Result<(Vec<T>, Vec<T>)> {
        self.check_queries(queries)?;
        let s = self.kernel.signal_variance();
        let mut mean = Vec::with_capacity(queries.len());
        let mut var = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(QUERY_CHUNK) {
            let kx = self.cross(chunk);
            mean.extend(kx.tr_mul(&self.alpha).iter().copied());
            let p = self.cov_factor.tr_mul(&kx);
            for j in 0..chunk.len() {
                let v = s - p.column(j).norm_squared();
                var.push(if v > T::zero() { v } else { T::zero() });
            }
        }
        Ok((mean, var))
    }

    /// Predictive mean only; skips the covariance work.
    pub fn posterior_mean(&self, queries: &[Vec<T>]) -> Result<Vec<T>> {
        self.check_queries(queries)?;
        let mut mean = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(QUERY_CHUNK) {
            mean.extend(self.cross(chunk).tr_mul(&self.alpha).iter().copied());
        }
        Ok(mean)
    }

    /// Mean, variance and covariance with a fixed `anchor` point at each
    /// query.
    pub fn posterior_with_anchor(&self, queries: &[Vec<T>], anchor: &[T]) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
        self.check_queries(queries)?;
        self.check_queries(std::slice::from_ref(&anchor.to_vec()))?;
        let s = self.kernel.signal_variance();
        let pa = self
            .cov_factor
            .tr_mul(&self.cross(std::slice::from_ref(&anchor.to_vec())));
        let anchor_f = Features::Real(anchor.to_vec());
        let (mut mean, mut var, mut cov) = (Vec::new(), Vec::new(), Vec::new());
        for chunk in queries.chunks(QUERY_CHUNK) {
            let kx = self.cross(chunk);
            mean.extend(kx.tr_mul(&self.alpha).iter().copied());
            let p = self.cov_factor.tr_mul(&kx);
            let pc = p.tr_mul(&pa);
            for (j, q) in chunk.iter().enumerate() {
                let v = s - p.column(j).norm_squared();
                var.push(if v > T::zero() { v } else { T::zero() });
                let k = self.kernel.eval_unchecked(&Features::Real(q.clone()), &anchor_f);
                cov.push(k - pc[(j, 0)]);
            }
        }
        Ok((mean, var, cov))
    }

    /// Predictive mean vector and full covariance over the queries.
    pub fn joint_posterior(&self, queries: &[Vec<T>]) -> Result<(DVector<T>, DMatrix<T>)> {
        self.check_queries(queries)?;
        let kx = self.cross(queries);
        let mean = kx.tr_mul(&self.alpha);
        let feats: Vec<Features<T>> = queries.iter().map(|p| Features::Real(p.clone())).collect();
        let p = self.cov_factor.tr_mul(&kx);
        let cov = self.kernel.matrix(&feats) - p.tr_mul(&p);
        Ok((mean, cov))
    }
}

/// Free-function form of [`PreferenceGpModel::posterior`].
pub fn utility_posterior<T: Scalar>(model: &PreferenceGpModel<T>, queries: &[Vec<T>]) -> Result<(Vec<T>, Vec<T>)> {
    model.posterior(queries)
}

/// Probability that `x_a` is preferred to `x_b`. With `mc_samples = 0` the
/// latent means are plugged in; otherwise the latent difference is sampled
/// from the bivariate predictive.
pub fn predict_preference<T: Scalar, R: Rng + ?Sized>(
    model: &PreferenceGpModel<T>,
    x_a: &[T],
    x_b: &[T],
    mc_samples: usize,
    rng: &mut R,
) -> Result<T> {
    let (mu, cov) = model.joint_posterior(&[x_a.to_vec(), x_b.to_vec()])?;
    let diff = mu[0] - mu[1];
    if mc_samples == 0 {
        return Ok(bradley_terry_prob(mu[0], mu[1]));
    }
    let v = cov[(0, 0)] + cov[(1, 1)] - cov[(0, 1)] - cov[(1, 0)];
    let sd = if v > T::zero() { v.sqrt() } else { T::zero() };
    let mut acc = 0.0;
    for _ in 0..mc_samples {
        let z: f64 = StandardNormal.sample(rng);
        acc += logistic(diff + sd * T::lit(z)).as_f64();
    }
    Ok(T::lit(acc / mc_samples as f64))
}

/// Fits every kernel in `grid` and keeps the one with the largest Laplace
/// evidence. Kernels that fail to fit are skipped.
pub fn select_kernel<T: Scalar>(data: &[PreferenceDatum<T>], grid: &[KernelSpec<T>]) -> Result<PreferenceGpModel<T>> {
    let (points, pairs) = index_points(data)?;
    let mut best: Option<ModeFit<T>> = None;
    let mut last_err = None;
    for spec in grid {
        match find_mode(points.clone(), pairs.clone(), spec) {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.log_evidence > b.log_evidence) {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(m) => finish(m),
        None => Err(last_err.unwrap_or_else(|| Error::input("empty kernel grid"))),
    }
}
