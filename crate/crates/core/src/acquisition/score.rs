use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::base::{base_acquisition, expected_max};
use super::{AcquisitionKind, AcquisitionSpec, CandidateScore};
use crate::error::{Error, Result};
use crate::featurization::{Fingerprint, Normalizer};
use crate::gp::{AffinitySurrogate, Features};
use crate::linalg::cholesky_with_jitter;
use crate::preference::PreferenceGpModel;
use crate::rng::{ChaCha8Rng, RoundSeed};

/// Offset of the per-candidate affinity streams within a round seed, so they
/// never collide with the per-chunk Thompson streams.
pub const AFFINITY_STREAM_BASE: u64 = 1 << 32;
const GROUP: usize = 256;

/// Fitted models plus the mapping from raw objectives to utility inputs.
pub struct ScoringContext<'a> {
    /// May be absent when every candidate has a measured affinity.
    pub affinity: Option<&'a AffinitySurrogate<f64>>,
    pub utility: &'a PreferenceGpModel<f64>,
    pub normalizer: &'a Normalizer,
    /// Position of the affinity objective in the property vector.
    pub affinity_index: usize,
    /// Normalized property vector of the incumbent; required for qEUBO.
    pub incumbent_point: Option<Vec<f64>>,
}

/// An unscreened ligand as seen by the scorer.
#[derive(Debug, Clone)]
pub struct Candidate<'a> {
    pub id: &'a str,
    pub fingerprint: &'a Fingerprint,
    /// Raw objective values; the affinity slot is replaced by draws.
    pub props: Vec<f64>,
    /// Stable index (library position) naming the candidate's RNG stream.
    pub stream: u64,
    /// Measured affinity; when set the affinity model is not consulted.
    pub known_affinity: Option<f64>,
}

/// Posterior affinity mean and variance per candidate; measured values
/// have zero variance.
fn affinity_moments(ctx: &ScoringContext<'_>, candidates: &[Candidate<'_>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let unknown: Vec<Features<f64>> = candidates
        .iter()
        .filter(|c| c.known_affinity.is_none())
        .map(|c| Features::Bits(c.fingerprint.clone()))
        .collect();
    let (pm, pv) = match (unknown.is_empty(), ctx.affinity) {
        (true, _) => (Vec::new(), Vec::new()),
        (false, Some(model)) => model.posterior(&unknown)?,
        (false, None) => return Err(Error::input("unmeasured candidates need an affinity model")),
    };
    let (mut pm, mut pv) = (pm.into_iter(), pv.into_iter());
    let mut mean = Vec::with_capacity(candidates.len());
    let mut var = Vec::with_capacity(candidates.len());
    for c in candidates {
        match c.known_affinity {
            Some(a) => {
                mean.push(a);
                var.push(0.0);
            }
            None => {
                mean.push(pm.next().expect("one posterior per unmeasured candidate"));
                var.push(pv.next().expect("one posterior per unmeasured candidate"));
            }
        }
    }
    Ok((mean, var))
}

fn draw_affinities<R: Rng + ?Sized>(mean: f64, var: f64, samples: usize, rng: &mut R) -> Vec<f64> {
    if !(var > 0.0) {
        return vec![mean];
    }
    let sd = var.sqrt();
    (0..samples)
        .map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn query(ctx: &ScoringContext<'_>, props: &[f64], affinity: f64) -> Vec<f64> {
    let mut x = props.to_vec();
    x[ctx.affinity_index] = affinity;
    ctx.normalizer.apply_in_place(&mut x);
    x
}

/// Averages the base acquisition over each candidate's affinity draws.
/// Returns `(acquisition, utility mean, utility variance)` per candidate,
/// the latter two marginalized over the draws.
fn evaluate_draws(
    ctx: &ScoringContext<'_>,
    group: &[(&[f64], Vec<f64>)],
    spec: &AcquisitionSpec,
) -> Result<Vec<(f64, f64, f64)>> {
    let queries: Vec<Vec<f64>> = group
        .iter()
        .flat_map(|(props, draws)| draws.iter().map(move |&a| query(ctx, props, a)))
        .collect();
    let acq: Vec<f64>;
    let (mean, var): (Vec<f64>, Vec<f64>);
    match spec.kind {
        AcquisitionKind::Greedy | AcquisitionKind::EpsilonGreedy => {
            mean = ctx.utility.posterior_mean(&queries)?;
            var = vec![f64::NAN; mean.len()];
            acq = mean.clone();
        }
        AcquisitionKind::QEubo => {
            let anchor = ctx
                .incumbent_point
                .as_ref()
                .ok_or_else(|| Error::input("qEUBO needs an incumbent point"))?;
            let (am, av) = ctx.utility.posterior(std::slice::from_ref(anchor))?;
            let (m, v, c) = ctx.utility.posterior_with_anchor(&queries, anchor)?;
            acq = (0..m.len())
                .map(|i| expected_max(m[i], v[i], am[0], av[0], c[i]))
                .collect();
            mean = m;
            var = v;
        }
        AcquisitionKind::QEi | AcquisitionKind::QPi | AcquisitionKind::QUcb => {
            let (m, v) = ctx.utility.posterior(&queries)?;
            acq = m
                .iter()
                .zip(&v)
                .map(|(&mu, &s2)| base_acquisition(mu, s2.sqrt(), spec))
                .collect::<Result<_>>()?;
            mean = m;
            var = v;
        }
        k => return Err(Error::input(format!("{} is not scored by expectation", k.name()))),
    }
    let mut out = Vec::with_capacity(group.len());
    let mut at = 0;
    for (_, draws) in group {
        let s = draws.len();
        let n = s as f64;
        let a = acq[at..at + s].iter().sum::<f64>() / n;
        let m = mean[at..at + s].iter().sum::<f64>() / n;
        // Total variance: mean of variances plus variance of means.
        let spread = mean[at..at + s].iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let v = var[at..at + s].iter().sum::<f64>() / n + spread;
        out.push((a, m, v));
        at += s;
    }
    Ok(out)
}

/// Expected acquisition of one candidate under the affinity posterior.
/// With zero affinity variance this is a single plug-in evaluation.
pub fn mc_expected_acquisition<R: Rng + ?Sized>(
    ctx: &ScoringContext<'_>,
    candidate: &Candidate<'_>,
    spec: &AcquisitionSpec,
    rng: &mut R,
) -> Result<CandidateScore> {
    let (am, av) = affinity_moments(ctx, std::slice::from_ref(candidate))?;
    let draws = draw_affinities(am[0], av[0], spec.mc_affinity_samples, rng);
    let (a, m, v) = evaluate_draws(ctx, &[(&candidate.props, draws)], spec)?[0];
    Ok(CandidateScore {
        ligand_id: candidate.id.to_string(),
        acquisition_value: a,
        predicted_utility_mean: m,
        predicted_utility_var: v,
    })
}

/// Scores every candidate. Candidate `i` draws its affinities from
/// `seed.stream(AFFINITY_STREAM_BASE + candidates[i].stream)`, so the result
/// does not depend on grouping or thread count and matches
/// [`mc_expected_acquisition`] called with that stream.
pub fn score_candidates(
    ctx: &ScoringContext<'_>,
    candidates: &[Candidate<'_>],
    spec: &AcquisitionSpec,
    seed: &RoundSeed,
) -> Result<Vec<CandidateScore>> {
    spec.validate()?;
    if candidates.is_empty() {
        return Err(Error::input("no candidates to score"));
    }
    let (am, av) = affinity_moments(ctx, candidates)?;
    let stream = |c: &Candidate<'_>| seed.stream(AFFINITY_STREAM_BASE + c.stream);

    if spec.kind == AcquisitionKind::QTs {
        let queries: Vec<Vec<f64>> = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let a = draw_affinities(am[i], av[i], 1, &mut stream(c))[0];
                query(ctx, &c.props, a)
            })
            .collect();
        let (samples, mean, var) = thompson_chunks(ctx.utility, &queries, spec.thompson_chunk, seed)?;
        return Ok(candidates
            .iter()
            .enumerate()
            .map(|(i, c)| CandidateScore {
                ligand_id: c.id.to_string(),
                acquisition_value: samples[i],
                predicted_utility_mean: mean[i],
                predicted_utility_var: var[i],
            })
            .collect());
    }
    if spec.kind == AcquisitionKind::Random {
        return Err(Error::input("random selection does not score candidates"));
    }

    let parts: Vec<Result<Vec<CandidateScore>>> = candidates
        .par_chunks(GROUP)
        .enumerate()
        .map(|(g, chunk)| {
            let base = g * GROUP;
            let group: Vec<(&[f64], Vec<f64>)> = chunk
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let i = base + k;
                    (
                        &c.props[..],
                        draw_affinities(am[i], av[i], spec.mc_affinity_samples, &mut stream(c)),
                    )
                })
                .collect();
            let vals = evaluate_draws(ctx, &group, spec)?;
            Ok(chunk
                .iter()
                .zip(vals)
                .map(|(c, (a, m, v))| CandidateScore {
                    ligand_id: c.id.to_string(),
                    acquisition_value: a,
                    predicted_utility_mean: m,
                    predicted_utility_var: v,
                })
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(candidates.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn sample_chunk(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let n = mean.len();
    let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    match cholesky_with_jitter(cov, |_, _| true) {
        Ok(f) => mean + f.l * z,
        Err(_) => {
            let eig = cov.clone().symmetric_eigen();
            let scaled = DVector::from_iterator(n, (0..n).map(|i| eig.eigenvalues[i].max(0.0).sqrt() * z[i]));
            mean + eig.eigenvectors * scaled
        }
    }
}

/// Joint draws over consecutive chunks; chunk `c` uses `seed.stream(c)`.
fn thompson_chunks(
    model: &PreferenceGpModel<f64>,
    queries: &[Vec<f64>],
    chunk: usize,
    seed: &RoundSeed,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let parts: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = queries
        .par_chunks(chunk.clamp(1, 2048))
        .enumerate()
        .map(|(c, q)| {
            let (mean, cov) = model.joint_posterior(q)?;
            let s = sample_chunk(&mean, &cov, &mut seed.stream(c as u64));
            let var = (0..q.len()).map(|i| cov[(i, i)].max(0.0)).collect();
            Ok((s.iter().copied().collect(), mean.iter().copied().collect(), var))
        })
        .collect();
    let (mut s, mut m, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for p in parts {
        let (a, b, c) = p?;
        s.extend(a);
        m.extend(b);
        v.extend(c);
    }
    Ok((s, m, v))
}

/// One posterior draw of the utility at every query, drawn jointly within
/// chunks of `chunk` queries (at most 2048).
pub fn thompson_scores<R: Rng + ?Sized>(
    model: &PreferenceGpModel<f64>,
    queries: &[Vec<f64>],
    chunk: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if queries.is_empty() {
        return Err(Error::input("no candidates to score"));
    }
    let seed = RoundSeed::draw(rng);
    Ok(thompson_chunks(model, queries, chunk, &seed)?.0)
}
