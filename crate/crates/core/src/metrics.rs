//! Disagreement and optimality measures over the reliable agents.

use alloc::vec;
use alloc::vec::Vec;

use crate::objectives::checked_gap;
use crate::Result;

/// `Σ_i ‖x_i − x̄‖²` over the given models.
pub fn consensus_error(models: &[&[f64]]) -> f64 {
    let Some(first) = models.first() else {
        return 0.0;
    };
    let mut mean = vec![0.0; first.len()];
    spread_with_mean(models.iter().copied(), &mut mean)
}

/// Same measure applied to the half-steps before aggregation.
pub fn pre_agg_disagreement(half_steps: &[&[f64]]) -> f64 {
    consensus_error(half_steps)
}

/// Writes the mean into `mean` and returns the summed squared deviation.
pub(crate) fn spread_with_mean<'a, I>(models: I, mean: &mut [f64]) -> f64
where
    I: Iterator<Item = &'a [f64]> + Clone,
{
    mean.iter_mut().for_each(|m| *m = 0.0);
    let mut count = 0usize;
    for x in models.clone() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
        count += 1;
    }
    if count == 0 {
        return 0.0;
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    models
        .map(|x| {
            x.iter()
                .zip(mean.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

/// Running minimum of `f(x̄_k)` minus `f*`.
pub fn optimal_gap_series(f_values: &[f64], f_star: f64) -> Result<Vec<f64>> {
    let mut best = f64::INFINITY;
    f_values
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            best = best.min(f);
            checked_gap(best, f_star, || alloc::format!("iteration {k}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consensus_examples() {
        assert_eq!(consensus_error(&[&[1.5], &[1.5], &[1.5]]), 0.0);
        assert_eq!(consensus_error(&[&[0.0], &[2.0]]), 2.0);
        let d = consensus_error(&[&[1.0, -2.0], &[3.0, 0.5], &[-1.0, 4.0]]);
        let d3 = consensus_error(&[&[3.0, -6.0], &[9.0, 1.5], &[-3.0, 12.0]]);
        assert!((d3 - 9.0 * d).abs() < 1e-12);
        assert_eq!(consensus_error(&[]), 0.0);
    }

    #[test]
    fn gap_series_examples() {
        assert_eq!(
            optimal_gap_series(&[3.0, 2.0, 2.5], 1.0).unwrap(),
            vec![2.0, 1.0, 1.0]
        );
        assert_eq!(
            optimal_gap_series(&[1.0, 1.0], 1.0).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            optimal_gap_series(&[4.0, 3.0, 1.5], 1.0).unwrap(),
            vec![3.0, 2.0, 0.5]
        );
        assert!(optimal_gap_series(&[0.5], 1.0).is_err());
    }
}
