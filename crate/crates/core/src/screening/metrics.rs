use std::collections::HashSet;

use super::state::{CampaignState, MetricRecord};
use crate::oracles::GroundTruth;

/// `u_star` minus the best true utility among `found`; `None` when nothing
/// was found.
pub fn regret(utilities: &[f64], found: impl IntoIterator<Item = usize>, u_star: f64) -> Option<f64> {
    let best = best_utility(utilities, found)?;
    Some(u_star - best)
}

fn best_utility(utilities: &[f64], found: impl IntoIterator<Item = usize>) -> Option<f64> {
    found.into_iter().map(|i| utilities[i]).max_by(f64::total_cmp)
}

/// Fraction of `true_top_k` present in `found`.
pub fn top_k_accuracy(found: &HashSet<usize>, true_top_k: &HashSet<usize>) -> f64 {
    if true_top_k.is_empty() {
        return 0.0;
    }
    true_top_k.iter().filter(|i| found.contains(i)).count() as f64 / true_top_k.len() as f64
}

/// Metrics of the current state. Failed ligands count as screened but not
/// as found.
pub fn compute_metrics(state: &CampaignState, truth: Option<&GroundTruth>, ks: &[usize]) -> MetricRecord {
    let found: HashSet<usize> = state.measured().map(|(i, _)| i).collect();
    let (regret_v, acc, best) = match truth {
        Some(t) => {
            let best = best_utility(&t.utilities, found.iter().copied());
            let acc = ks.iter().map(|&k| Some(top_k_accuracy(&found, &t.top_k(k)))).collect();
            (best.map(|b| t.u_star - b), acc, best)
        }
        None => (None, vec![None; ks.len()], None),
    };
    MetricRecord {
        iteration: state.iteration,
        n_screened: state.screened.len(),
        n_failed: state.n_failed(),
        regret: regret_v,
        top_k_accuracy: acc,
        best_utility_found: best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_arithmetic() {
        let u = [10.0, 7.0, 3.0];
        assert_eq!(regret(&u, [1, 2], 10.0), Some(3.0));
        assert_eq!(regret(&u, [0, 2], 10.0), Some(0.0));
        assert_eq!(regret(&u, [], 10.0), None);
    }

    #[test]
    fn accuracy_fractions() {
        let top: HashSet<usize> = [0, 1, 2, 3].into();
        assert_eq!(top_k_accuracy(&[0, 2, 9].into(), &top), 0.5);
        assert_eq!(top_k_accuracy(&[0, 1, 2, 3].into(), &top), 1.0);
        assert_eq!(top_k_accuracy(&HashSet::new(), &top), 0.0);
    }
}
