use rand::seq::index::sample;
use rand::Rng;

use super::benchmark::BenchmarkFunction;
use super::expert::{simulate_expert_label, ExpertUtility, SimulatedExpert};
use crate::error::{Error, Result};
use crate::preference::PreferenceDatum;

/// Draws `n_points` uniformly from the unit cube and labels `n_pairs`
/// distinct random pairs with a noiseless expert whose utility is the
/// negated benchmark on the stretched cube. Pair members appear in random
/// order, so labels are balanced.
pub fn benchmark_pairs<R: Rng + ?Sized>(
    function: &BenchmarkFunction,
    n_points: usize,
    n_pairs: usize,
    label_noise: f64,
    rng: &mut R,
) -> Result<Vec<PreferenceDatum<f64>>> {
    function.validate()?;
    let total = n_points * n_points.saturating_sub(1) / 2;
    if n_points < 2 || n_pairs > total {
        return Err(Error::input(format!(
            "cannot draw {n_pairs} distinct pairs from {n_points} points"
        )));
    }
    let d = function.dimension;
    let points: Vec<Vec<f64>> = (0..n_points)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let expert = SimulatedExpert::new(ExpertUtility::Benchmark(function.clone()), label_noise)?;
    let mut out = Vec::with_capacity(n_pairs);
    for code in sample(rng, total, n_pairs) {
        let (i, j) = decode_pair(code, n_points);
        let (a, b) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
        let label = simulate_expert_label(&expert, &points[a], &points[b], rng)?;
        out.push(PreferenceDatum {
            winner_props: points[a].clone(),
            loser_props: points[b].clone(),
            label,
        });
    }
    Ok(out)
}

/// Maps `0..n(n-1)/2` onto pairs `i < j` row by row.
pub(crate) fn decode_pair(mut code: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if code < row {
            return (i, i + 1 + code);
        }
        code -= row;
        i += 1;
    }
}
