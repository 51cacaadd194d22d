use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;

use super::{AcquisitionKind, AcquisitionSpec, CandidateScore};
use crate::error::{Error, Result};

/// Positions sorted by decreasing acquisition value, ties by id.
fn ranking(scored: &[CandidateScore]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        scored[b]
            .acquisition_value
            .total_cmp(&scored[a].acquisition_value)
            .then_with(|| scored[a].ligand_id.cmp(&scored[b].ligand_id))
    });
    order
}

/// Chooses `batch_size` ligands.
///
/// Ranked kinds take the top of the ranking. ε-greedy then keeps each slot
/// with probability 1 − ε and refills the dropped slots with a uniform
/// sample, without replacement, from the candidates not kept. Random ignores
/// the scores.
pub fn select_batch<R: Rng + ?Sized>(
    scored: &[CandidateScore],
    batch_size: usize,
    spec: &AcquisitionSpec,
    rng: &mut R,
) -> Result<Vec<String>> {
    if scored.is_empty() {
        return Err(Error::input("no candidates to select from"));
    }
    if batch_size > scored.len() {
        return Err(Error::input(format!(
            "batch of {batch_size} requested from {} candidates",
            scored.len()
        )));
    }
    let id = |i: usize| scored[i].ligand_id.clone();
    if spec.kind == AcquisitionKind::Random {
        return Ok(sample(rng, scored.len(), batch_size).into_iter().map(id).collect());
    }
    let top: Vec<usize> = ranking(scored).into_iter().take(batch_size).collect();
    if spec.kind != AcquisitionKind::EpsilonGreedy || spec.epsilon == 0.0 {
        return Ok(top.into_iter().map(id).collect());
    }
    let keep: Vec<bool> = top.iter().map(|_| !rng.random_bool(spec.epsilon)).collect();
    let kept: HashSet<usize> = top.iter().zip(&keep).filter(|(_, &k)| k).map(|(&i, _)| i).collect();
    let pool: Vec<usize> = (0..scored.len()).filter(|i| !kept.contains(i)).collect();
    let n_fill = keep.iter().filter(|&&k| !k).count();
    let mut fill = sample(rng, pool.len(), n_fill).into_iter().map(|j| pool[j]);
    Ok(top
        .iter()
        .zip(&keep)
        .map(|(&i, &k)| {
            if k {
                i
            } else {
                fill.next().expect("pool covers dropped slots")
            }
        })
        .map(id)
        .collect())
}

/// Distinct unordered pairs drawn uniformly from the `top_k` highest-scored
/// candidates; every pair when there are no more than `n_pairs`. `top_k`
/// larger than the candidate list is clamped to it. Each pair's sides are
/// ordered at random.
pub fn sample_preference_queries<R: Rng + ?Sized>(
    scored: &[CandidateScore],
    top_k: usize,
    n_pairs: usize,
    rng: &mut R,
) -> Result<Vec<(String, String)>> {
    let k = top_k.min(scored.len());
    if top_k < 2 || k < 2 {
        return Err(Error::input("pair sampling needs at least two candidates"));
    }
    if n_pairs == 0 {
        return Err(Error::input("n_pairs must be at least 1"));
    }
    let top: Vec<usize> = ranking(scored).into_iter().take(k).collect();
    let total = k * (k - 1) / 2;
    let codes: Vec<usize> = if total <= n_pairs {
        (0..total).collect()
    } else {
        sample(rng, total, n_pairs).into_vec()
    };
    Ok(codes
        .into_iter()
        .map(|c| {
            let (i, j) = crate::oracles::pairs::decode_pair(c, k);
            let (a, b) = (scored[top[i]].ligand_id.clone(), scored[top[j]].ligand_id.clone());
            if rng.random_bool(0.5) {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(vals: &[f64]) -> Vec<CandidateScore> {
        vals.iter()
            .enumerate()
            .map(|(i, &v)| CandidateScore {
                ligand_id: format!("L{i:02}"),
                acquisition_value: v,
                predicted_utility_mean: v,
                predicted_utility_var: 0.0,
            })
            .collect()
    }

    #[test]
    fn greedy_top_with_id_ties() {
        let s = scores(&[0.1, 0.9, 0.5, 0.9]);
        let mut rng = crate::rng::seeded(0);
        let b = select_batch(&s, 3, &AcquisitionSpec::of(AcquisitionKind::Greedy), &mut rng).unwrap();
        assert_eq!(b, ["L01", "L03", "L02"]);
    }

    #[test]
    fn epsilon_zero_is_greedy() {
        let s = scores(&[0.3, 0.2, 0.8, 0.5, 0.1]);
        let spec = AcquisitionSpec {
            epsilon: 0.0,
            ..AcquisitionSpec::of(AcquisitionKind::EpsilonGreedy)
        };
        let mut rng = crate::rng::seeded(0);
        let g = select_batch(&s, 2, &AcquisitionSpec::of(AcquisitionKind::Greedy), &mut rng).unwrap();
        assert_eq!(select_batch(&s, 2, &spec, &mut rng).unwrap(), g);
    }

    #[test]
    fn exhaustion_and_errors() {
        let s = scores(&[0.3, 0.2, 0.8]);
        let mut rng = crate::rng::seeded(0);
        let mut all = select_batch(&s, 3, &AcquisitionSpec::of(AcquisitionKind::Random), &mut rng).unwrap();
        all.sort();
        assert_eq!(all, ["L00", "L01", "L02"]);
        assert!(select_batch(&s, 4, &AcquisitionSpec::default(), &mut rng).is_err());
        assert!(select_batch(&[], 0, &AcquisitionSpec::default(), &mut rng).is_err());
    }

    #[test]
    fn pairs_exhaust_small_top_k() {
        let s = scores(&[0.3, 0.2, 0.8]);
        let mut rng = crate::rng::seeded(0);
        let p = sample_preference_queries(&s, 2, 5, &mut rng).unwrap();
        assert_eq!(p.len(), 1);
        let mut ids = [p[0].0.clone(), p[0].1.clone()];
        ids.sort();
        assert_eq!(ids, ["L00", "L02"]);
        assert!(sample_preference_queries(&s, 1, 5, &mut rng).is_err());
    }

    #[test]
    fn pairs_distinct_and_reproducible() {
        let s = scores(&(0..80).map(|i| i as f64).collect::<Vec<_>>());
        let a = sample_preference_queries(&s, 50, 200, &mut crate::rng::seeded(5)).unwrap();
        let b = sample_preference_queries(&s, 50, 200, &mut crate::rng::seeded(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
        let set: HashSet<_> = a
            .iter()
            .map(|(x, y)| {
                if x < y {
                    (x.clone(), y.clone())
                } else {
                    (y.clone(), x.clone())
                }
            })
            .collect();
        assert_eq!(set.len(), 200);
        // Only the 50 best (L30..L79) take part.
        assert!(a.iter().all(|(x, y)| x.as_str() >= "L30" && y.as_str() >= "L30"));
    }
}
