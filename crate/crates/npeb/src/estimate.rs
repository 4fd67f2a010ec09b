//! Estimators derived from a fitted mixture.
//!
//! The headline estimator is the plug-in mean `Σ_k w_k η(θ_k)`. The naive
//! estimator averages the response summary `h` over responders only — the
//! quantity the plug-in is meant to de-bias. Posterior means per observed
//! outcome connect the two: at any maximizer the plug-in equals the
//! count-weighted average of posterior means.

use crate::model::{ModelError, ModelSpec};
use crate::solver::{marginal_at, LikelihoodMatrix, MixtureWeights, ObservationSet, SupportGrid};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("posterior undefined: observed outcome row {row} has zero marginal")]
    UndefinedPosterior { row: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Point estimates for one dataset.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    /// Plug-in estimate `Σ_k w_k η(θ_k)`.
    pub eta_hat: Vec<f64>,
    /// Responder-only average of `h`; `None` when there are no responders.
    pub naive: Option<Vec<f64>>,
    pub n_responders: u64,
    pub n_total: u64,
}

/// Plug-in mean `Σ_k w_k η(θ_k)` of the fitted mixture.
pub fn eta_gmle(
    spec: &ModelSpec,
    grid: &SupportGrid,
    weights: &MixtureWeights,
) -> Result<Vec<f64>, EstimateError> {
    if weights.len() != grid.len() {
        return Err(EstimateError::DimensionMismatch(format!(
            "{} weights for {} grid points",
            weights.len(),
            grid.len()
        )));
    }
    let mut acc = vec![0.0; spec.eta_dim()];
    for (theta, &w) in grid.points().iter().zip(weights.as_slice()) {
        if w == 0.0 {
            continue;
        }
        for (a, e) in acc.iter_mut().zip(spec.eta(theta)?) {
            *a += w * e;
        }
    }
    Ok(acc)
}

/// Multiplicity-weighted mean of `h` over response outcomes; `None` when the
/// set contains no responders.
pub fn naive(
    spec: &ModelSpec,
    obs: &ObservationSet,
) -> Result<Option<Vec<f64>>, EstimateError> {
    let mut acc = vec![0.0; spec.eta_dim()];
    let mut responders = 0u64;
    for (outcome, count) in obs.iter() {
        if !outcome.is_response() {
            continue;
        }
        responders += count;
        for (a, h) in acc.iter_mut().zip(spec.h_value(outcome)?) {
            *a += count as f64 * h;
        }
    }
    if responders == 0 {
        return Ok(None);
    }
    for a in &mut acc {
        *a /= responders as f64;
    }
    Ok(Some(acc))
}

/// Posterior mean of `η(θ)` given observed outcome row `d`:
/// `Σ_k w_k L[d][k] η(θ_k) / Σ_k w_k L[d][k]`.
pub fn posterior_eta(
    spec: &ModelSpec,
    grid: &SupportGrid,
    weights: &MixtureWeights,
    matrix: &LikelihoodMatrix,
    d: usize,
) -> Result<Vec<f64>, EstimateError> {
    let marginal = marginal_at(matrix, weights, d);
    if marginal <= 0.0 {
        return Err(EstimateError::UndefinedPosterior { row: d });
    }
    let mut acc = vec![0.0; spec.eta_dim()];
    let row = matrix.row(d);
    for (k, theta) in grid.points().iter().enumerate() {
        let wl = weights.as_slice()[k] * row[k];
        if wl == 0.0 {
            continue;
        }
        for (a, e) in acc.iter_mut().zip(spec.eta(theta)?) {
            *a += wl * e;
        }
    }
    for a in &mut acc {
        *a /= marginal;
    }
    Ok(acc)
}

/// Max-norm gap between the plug-in mean and the count-weighted average of
/// posterior means over the observed outcomes. Vanishes (to solver tolerance)
/// at any maximizer of the likelihood; nonzero elsewhere.
pub fn posterior_identity_gap(
    spec: &ModelSpec,
    grid: &SupportGrid,
    weights: &MixtureWeights,
    matrix: &LikelihoodMatrix,
    counts: &[u64],
) -> Result<f64, EstimateError> {
    if counts.len() != matrix.n_outcomes() {
        return Err(EstimateError::DimensionMismatch(format!(
            "{} counts for {} matrix rows",
            counts.len(),
            matrix.n_outcomes()
        )));
    }
    let plug_in = eta_gmle(spec, grid, weights)?;
    let n: f64 = counts.iter().map(|&c| c as f64).sum();
    let mut avg = vec![0.0; spec.eta_dim()];
    for (d, &count) in counts.iter().enumerate() {
        let post = posterior_eta(spec, grid, weights, matrix, d)?;
        for (a, p) in avg.iter_mut().zip(post) {
            *a += count as f64 * p;
        }
    }
    let gap = plug_in
        .iter()
        .zip(&avg)
        .map(|(e, a)| (e - a / n).abs())
        .fold(0.0, f64::max);
    Ok(gap)
}

/// Bundles the plug-in and naive estimates for one dataset.
pub fn estimate_report(
    spec: &ModelSpec,
    grid: &SupportGrid,
    weights: &MixtureWeights,
    obs: &ObservationSet,
) -> Result<EstimateReport, EstimateError> {
    Ok(EstimateReport {
        eta_hat: eta_gmle(spec, grid, weights)?,
        naive: naive(spec, obs)?,
        n_responders: obs.n_responders(),
        n_total: obs.n_total(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BernoulliEta, Outcome, ThetaPoint};
    use crate::solver::{
        build_likelihood_matrix, em_fit, GridProvenance, ObservationMode,
    };
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn theta(coords: &[f64]) -> ThetaPoint {
        ThetaPoint::new(coords.to_vec())
    }

    fn example1_setup() -> (ModelSpec, SupportGrid, ObservationSet) {
        let spec = ModelSpec::bernoulli(BernoulliEta::Identity);
        let grid = SupportGrid::new(
            &spec,
            vec![theta(&[0.25]), theta(&[0.5]), theta(&[0.75])],
            GridProvenance::Explicit,
        )
        .unwrap();
        let obs = ObservationSet::new(
            vec![
                (Outcome::Bit { value: 0 }, 5),
                (Outcome::Bit { value: 1 }, 5),
            ],
            ObservationMode::Censored,
        )
        .unwrap();
        (spec, grid, obs)
    }

    #[test]
    fn plug_in_on_the_two_flat_maximizers() {
        let (spec, grid, _) = example1_setup();
        let g1 = MixtureWeights::point_mass(3, 1);
        let g2 = MixtureWeights::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert_abs_diff_eq!(eta_gmle(&spec, &grid, &g1).unwrap()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(eta_gmle(&spec, &grid, &g2).unwrap()[0], 0.5, epsilon = 1e-15);

        let square = ModelSpec::bernoulli(BernoulliEta::Square);
        let sgrid = SupportGrid::new(
            &square,
            vec![theta(&[0.25]), theta(&[0.5]), theta(&[0.75])],
            GridProvenance::Explicit,
        )
        .unwrap();
        assert_abs_diff_eq!(
            eta_gmle(&square, &sgrid, &g1).unwrap()[0],
            0.25,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            eta_gmle(&square, &sgrid, &g2).unwrap()[0],
            0.3125,
            epsilon = 1e-15
        );
    }

    #[test]
    fn plug_in_at_point_mass_is_eta() {
        let spec = ModelSpec::binomial(3).unwrap();
        let grid = SupportGrid::new(
            &spec,
            vec![theta(&[0.4, 0.7])],
            GridProvenance::Explicit,
        )
        .unwrap();
        let w = MixtureWeights::point_mass(1, 0);
        assert_eq!(eta_gmle(&spec, &grid, &w).unwrap(), vec![0.7]);
    }

    #[test]
    fn naive_averages_h_over_responders() {
        let spec = ModelSpec::binomial(2).unwrap();
        let obs = ObservationSet::new(
            vec![
                (Outcome::Counts { successes: 1, responders: 1 }, 1),
                (Outcome::Counts { successes: 0, responders: 2 }, 1),
                (Outcome::Nonresponse, 3),
            ],
            ObservationMode::Censored,
        )
        .unwrap();
        let v = naive(&spec, &obs).unwrap().unwrap();
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn naive_is_absent_without_responders() {
        let spec = ModelSpec::binomial(2).unwrap();
        let obs = ObservationSet::new(
            vec![(Outcome::Nonresponse, 4)],
            ObservationMode::Censored,
        )
        .unwrap();
        assert!(naive(&spec, &obs).unwrap().is_none());
    }

    #[test]
    fn naive_constant_data() {
        let spec = ModelSpec::binomial(4).unwrap();
        let obs = ObservationSet::new(
            vec![(Outcome::Counts { successes: 1, responders: 4 }, 9)],
            ObservationMode::Censored,
        )
        .unwrap();
        assert_abs_diff_eq!(naive(&spec, &obs).unwrap().unwrap()[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn posterior_means_on_the_flat_maximizers() {
        let (spec, grid, obs) = example1_setup();
        let matrix = build_likelihood_matrix(&spec, &grid, &obs).unwrap();
        // Row 1 is the outcome y = 1.
        let g1 = MixtureWeights::point_mass(3, 1);
        let g2 = MixtureWeights::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert_abs_diff_eq!(
            posterior_eta(&spec, &grid, &g1, &matrix, 1).unwrap()[0],
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            posterior_eta(&spec, &grid, &g2, &matrix, 1).unwrap()[0],
            0.625,
            epsilon = 1e-15
        );
    }

    #[test]
    fn posterior_at_point_mass_ignores_data() {
        let spec = ModelSpec::binomial(2).unwrap();
        let grid = SupportGrid::new(
            &spec,
            vec![theta(&[0.6, 0.3])],
            GridProvenance::Explicit,
        )
        .unwrap();
        let obs = ObservationSet::new(
            vec![
                (Outcome::Counts { successes: 2, responders: 2 }, 1),
                (Outcome::Nonresponse, 1),
            ],
            ObservationMode::Censored,
        )
        .unwrap();
        let matrix = build_likelihood_matrix(&spec, &grid, &obs).unwrap();
        let w = MixtureWeights::point_mass(1, 0);
        for d in 0..2 {
            assert_abs_diff_eq!(
                posterior_eta(&spec, &grid, &w, &matrix, d).unwrap()[0],
                0.3,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn posterior_rejects_zero_marginal() {
        let spec = ModelSpec::bernoulli(BernoulliEta::Identity);
        let grid = SupportGrid::new(
            &spec,
            vec![theta(&[0.0]), theta(&[1.0])],
            GridProvenance::Explicit,
        )
        .unwrap();
        let obs = ObservationSet::new(
            vec![
                (Outcome::Bit { value: 0 }, 1),
                (Outcome::Bit { value: 1 }, 1),
            ],
            ObservationMode::Censored,
        )
        .unwrap();
        let matrix = build_likelihood_matrix(&spec, &grid, &obs).unwrap();
        let w = MixtureWeights::point_mass(2, 0);
        assert!(matches!(
            posterior_eta(&spec, &grid, &w, &matrix, 1),
            Err(EstimateError::UndefinedPosterior { row: 1 })
        ));
    }

    #[test]
    fn identity_gap_vanishes_on_point_grid() {
        let spec = ModelSpec::binomial(2).unwrap();
        let grid = SupportGrid::new(
            &spec,
            vec![theta(&[0.6, 0.3])],
            GridProvenance::Explicit,
        )
        .unwrap();
        let obs = ObservationSet::new(
            vec![
                (Outcome::Counts { successes: 1, responders: 2 }, 3),
                (Outcome::Nonresponse, 2),
            ],
            ObservationMode::Censored,
        )
        .unwrap();
        let matrix = build_likelihood_matrix(&spec, &grid, &obs).unwrap();
        let w = MixtureWeights::point_mass(1, 0);
        let gap = posterior_identity_gap(&spec, &grid, &w, &matrix, obs.counts()).unwrap();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn identity_gap_vanishes_at_fitted_weights() {
        let (spec, grid, obs) = example1_setup();
        let matrix = build_likelihood_matrix(&spec, &grid, &obs).unwrap();
        let solution = em_fit(
            &matrix,
            obs.counts(),
            MixtureWeights::uniform(3),
            1e-8,
            200_000,
        )
        .unwrap();
        let gap =
            posterior_identity_gap(&spec, &grid, &solution.weights, &matrix, obs.counts())
                .unwrap();
        assert!(gap <= 1e-6, "gap {gap}");
    }

    #[test]
    fn identity_gap_positive_away_from_maximizers() {
        // Bernoulli grid {0.9, 0.1} with one observation of each outcome;
        // the maximizer is symmetric, so lopsided weights are non-stationary.
        let spec = ModelSpec::bernoulli(BernoulliEta::Identity);
        let grid = SupportGrid::new(
            &spec,
            vec![theta(&[0.9]), theta(&[0.1])],
            GridProvenance::Explicit,
        )
        .unwrap();
        let obs = ObservationSet::new(
            vec![
                (Outcome::Bit { value: 1 }, 1),
                (Outcome::Bit { value: 0 }, 1),
            ],
            ObservationMode::Censored,
        )
        .unwrap();
        let matrix = build_likelihood_matrix(&spec, &grid, &obs).unwrap();
        let w = MixtureWeights::new(vec![0.9, 0.1]).unwrap();
        let gap = posterior_identity_gap(&spec, &grid, &w, &matrix, obs.counts()).unwrap();
        assert!(gap > 0.1, "gap {gap}");
    }

    #[test]
    fn report_bundles_counts() {
        let spec = ModelSpec::binomial(2).unwrap();
        let grid = SupportGrid::new(
            &spec,
            vec![theta(&[0.5, 0.5])],
            GridProvenance::Explicit,
        )
        .unwrap();
        let obs = ObservationSet::new(
            vec![
                (Outcome::Counts { successes: 1, responders: 1 }, 2),
                (Outcome::Nonresponse, 3),
            ],
            ObservationMode::Censored,
        )
        .unwrap();
        let w = MixtureWeights::point_mass(1, 0);
        let report = estimate_report(&spec, &grid, &w, &obs).unwrap();
        assert_eq!(report.n_total, 5);
        assert_eq!(report.n_responders, 2);
        assert_eq!(report.eta_hat, vec![0.5]);
        assert_eq!(report.naive, Some(vec![1.0]));
    }

    proptest! {
        #[test]
        fn plug_in_is_linear_in_weights(
            seed in 0u64..1000,
            alpha in 0.0f64..=1.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let spec = ModelSpec::binomial(3).unwrap();
            let m = 40;
            let points: Vec<ThetaPoint> = (0..m)
                .map(|_| theta(&[rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99)]))
                .collect();
            let grid = match SupportGrid::new(&spec, points, GridProvenance::Explicit) {
                Ok(g) => g,
                Err(_) => return Ok(()), // astronomically unlikely duplicate draw
            };
            let w1 = MixtureWeights::random(m, &mut rng);
            let w2 = MixtureWeights::random(m, &mut rng);
            let blended: Vec<f64> = w1
                .as_slice()
                .iter()
                .zip(w2.as_slice())
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect();
            let correction: f64 = 1.0 - blended.iter().sum::<f64>();
            let mut blended = blended;
            blended[0] += correction;
            let wb = MixtureWeights::new(blended).unwrap();
            let e1 = eta_gmle(&spec, &grid, &w1).unwrap()[0];
            let e2 = eta_gmle(&spec, &grid, &w2).unwrap()[0];
            let eb = eta_gmle(&spec, &grid, &wb).unwrap()[0];
            prop_assert!((eb - (alpha * e1 + (1.0 - alpha) * e2)).abs() < 1e-14);
        }

        #[test]
        fn plug_in_stays_in_eta_range(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let spec = ModelSpec::binomial(3).unwrap();
            let m = 25;
            let points: Vec<ThetaPoint> = (0..m)
                .map(|_| theta(&[rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99)]))
                .collect();
            let grid = match SupportGrid::new(&spec, points, GridProvenance::Explicit) {
                Ok(g) => g,
                Err(_) => return Ok(()),
            };
            let w = MixtureWeights::random(m, &mut rng);
            let e = eta_gmle(&spec, &grid, &w).unwrap()[0];
            let lo = grid.points().iter().map(|t| t.coords()[1]).fold(f64::INFINITY, f64::min);
            let hi = grid.points().iter().map(|t| t.coords()[1]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(e >= lo - 1e-12 && e <= hi + 1e-12);
        }
    }
}
