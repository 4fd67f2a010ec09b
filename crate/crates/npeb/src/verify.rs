//! Executable checks of the estimator's structural properties.
//!
//! Each suite exercises one claim on synthetic data and reports per-property
//! pass/fail lines: the flat-likelihood walkthrough (`example1`), multi-start
//! invariance of fitted marginals and plug-in means (`multistart_invariance`),
//! the posterior-mean identity (`identity`), and the shrinking bias of the
//! plug-in mean as the sample grows (`consistency`).

use crate::estimate::{self, EstimateError};
use crate::model::{BernoulliEta, ModelError, ModelSpec, Outcome, ThetaPoint};
use crate::sim::{self, ExperimentConfig, PopulationSpec, SimError};
use crate::solver::{
    self, GridProvenance, LikelihoodMatrix, MixtureWeights, ObservationMode, ObservationSet,
    SolverError, SupportGrid,
};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One named property with its observed values.
#[derive(Clone, Debug)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub details: String,
}

impl PropertyCheck {
    fn new(name: &str, passed: bool, details: String) -> Self {
        PropertyCheck {
            name: name.to_string(),
            passed,
            details,
        }
    }
}

/// Results of one verification suite.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<PropertyCheck>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Plain-text rendering, one line per property.
    pub fn render(&self) -> String {
        let mut out = format!("suite {}\n", self.suite);
        for check in &self.checks {
            let tag = if check.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("  [{tag}] {}: {}\n", check.name, check.details));
        }
        out
    }
}

/// The half-zeros/half-ones Bernoulli dataset on the grid {0.25, 0.5, 0.75}:
/// the point mass at 0.5 and the even 0.25/0.75 mixture both maximize the
/// likelihood, agree on the mean of θ, and disagree on the mean of θ².
pub fn example1() -> Result<SuiteReport, VerifyError> {
    let spec = ModelSpec::bernoulli(BernoulliEta::Identity);
    let grid = SupportGrid::new(
        &spec,
        vec![
            ThetaPoint::new(vec![0.25]),
            ThetaPoint::new(vec![0.5]),
            ThetaPoint::new(vec![0.75]),
        ],
        GridProvenance::Explicit,
    )?;
    let n = 10u64;
    let obs = ObservationSet::new(
        vec![
            (Outcome::Bit { value: 0 }, n / 2),
            (Outcome::Bit { value: 1 }, n / 2),
        ],
        ObservationMode::Censored,
    )?;
    let matrix = solver::build_likelihood_matrix(&spec, &grid, &obs)?;

    let point_mass = MixtureWeights::point_mass(3, 1);
    let two_atom = MixtureWeights::new(vec![0.5, 0.0, 0.5])?;
    let em = solver::em_fit(
        &matrix,
        obs.counts(),
        MixtureWeights::uniform(3),
        1e-10,
        solver::DEFAULT_MAX_ITER,
    )?;

    let ll_point = solver::log_likelihood(&matrix, obs.counts(), &point_mass);
    let ll_mix = solver::log_likelihood(&matrix, obs.counts(), &two_atom);
    let ll_em = em.loglik;
    let flat = n as f64 * 0.5f64.ln();
    let ll_spread = [ll_point, ll_mix, ll_em, flat]
        .iter()
        .fold(0.0f64, |acc, &v| acc.max((v - flat).abs()));

    let eta_point = estimate::eta_gmle(&spec, &grid, &point_mass)?[0];
    let eta_mix = estimate::eta_gmle(&spec, &grid, &two_atom)?[0];
    let eta_em = estimate::eta_gmle(&spec, &grid, &em.weights)?[0];
    let eta_spread = [eta_point, eta_mix, eta_em]
        .iter()
        .fold(0.0f64, |acc, &v| acc.max((v - 0.5).abs()));

    let square = ModelSpec::bernoulli(BernoulliEta::Square);
    let sq_grid = SupportGrid::new(
        &square,
        grid.points().to_vec(),
        GridProvenance::Explicit,
    )?;
    let sq_point = estimate::eta_gmle(&square, &sq_grid, &point_mass)?[0];
    let sq_mix = estimate::eta_gmle(&square, &sq_grid, &two_atom)?[0];

    let checks = vec![
        PropertyCheck::new(
            "maximizers tie on the likelihood",
            ll_spread <= 1e-10,
            format!(
                "log-likelihoods {ll_point:.12}, {ll_mix:.12}, {ll_em:.12} vs n·ln(1/2) = {flat:.12}"
            ),
        ),
        PropertyCheck::new(
            "plug-in mean of θ is shared",
            eta_spread <= 1e-6,
            format!("η̂ = {eta_point}, {eta_mix}, {eta_em}"),
        ),
        PropertyCheck::new(
            "mean of θ² separates the maximizers",
            (sq_point - 0.25).abs() <= 1e-12
                && (sq_mix - 0.3125).abs() <= 1e-12
                && (sq_mix - sq_point).abs() > 0.05,
            format!("θ² plug-ins {sq_point} vs {sq_mix} (intentionally different)"),
        ),
    ];
    Ok(SuiteReport {
        suite: "example1".into(),
        checks,
    })
}

/// Settings for [`multistart_invariance`].
#[derive(Clone, Debug)]
pub struct MultistartOptions {
    pub datasets: usize,
    pub starts: usize,
    pub n_strata: usize,
    /// Attempted sample sizes cycled across datasets.
    pub kappas: Vec<u32>,
    pub delta: f64,
    pub grid_resolution: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for MultistartOptions {
    fn default() -> Self {
        MultistartOptions {
            datasets: 20,
            starts: 5,
            n_strata: 1000,
            kappas: vec![2, 4],
            delta: 0.2,
            grid_resolution: 15,
            tol: 1e-8,
            max_iter: 2_000_000,
            seed: 29,
        }
    }
}

/// Disagreement measured across EM starts on one dataset.
#[derive(Clone, Debug)]
pub struct DatasetInvariance {
    pub dataset: usize,
    pub kappa: u32,
    /// Max over outcomes of the relative spread of fitted marginals.
    pub marginal_disagreement: f64,
    /// Max-norm spread of the plug-in means.
    pub eta_disagreement: f64,
    /// Max-norm spread of the weight vectors themselves.
    pub weight_disagreement: f64,
    /// Largest posterior-identity gap among the starts.
    pub identity_gap: f64,
    pub all_converged: bool,
}

#[derive(Clone, Debug)]
pub struct MultistartReport {
    pub datasets: Vec<DatasetInvariance>,
}

impl MultistartReport {
    pub fn max_marginal_disagreement(&self) -> f64 {
        self.datasets
            .iter()
            .map(|d| d.marginal_disagreement)
            .fold(0.0, f64::max)
    }

    pub fn max_eta_disagreement(&self) -> f64 {
        self.datasets
            .iter()
            .map(|d| d.eta_disagreement)
            .fold(0.0, f64::max)
    }

    pub fn max_weight_disagreement(&self) -> f64 {
        self.datasets
            .iter()
            .map(|d| d.weight_disagreement)
            .fold(0.0, f64::max)
    }

    pub fn max_identity_gap(&self) -> f64 {
        self.datasets.iter().map(|d| d.identity_gap).fold(0.0, f64::max)
    }
}

fn max_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Fits each seeded censored-binomial dataset from several strictly positive
/// starts and measures how much the converged fits disagree.
pub fn multistart_invariance(
    options: &MultistartOptions,
) -> Result<MultistartReport, VerifyError> {
    let datasets: Vec<Result<DatasetInvariance, VerifyError>> = (0..options.datasets)
        .into_par_iter()
        .map(|ds| {
            let kappa = options.kappas[ds % options.kappas.len()];
            let spec = ModelSpec::binomial(kappa)?;
            let mut rng = sim::replication_rng(options.seed, ds as u64);
            let population = sim::gen_population(
                &PopulationSpec::TwoType {
                    delta: options.delta,
                    n_strata: options.n_strata,
                },
                &mut rng,
            );
            let obs = sim::draw_observations(&spec, &population, &mut rng)?;
            let grid = solver::default_grid(&spec, options.grid_resolution)?;
            let matrix = solver::build_likelihood_matrix(&spec, &grid, &obs)?;

            let mut solutions = Vec::with_capacity(options.starts);
            for start in 0..options.starts {
                let init = if start == 0 {
                    MixtureWeights::uniform(grid.len())
                } else {
                    MixtureWeights::random(grid.len(), &mut rng)
                };
                solutions.push(solver::em_fit(
                    &matrix,
                    obs.counts(),
                    init,
                    options.tol,
                    options.max_iter,
                )?);
            }

            let etas: Vec<Vec<f64>> = solutions
                .iter()
                .map(|s| estimate::eta_gmle(&spec, &grid, &s.weights))
                .collect::<Result<_, _>>()?;
            let reference = &solutions[0];
            let mut marginal_disagreement = 0.0f64;
            let mut eta_disagreement = 0.0f64;
            let mut weight_disagreement = 0.0f64;
            for (solution, eta) in solutions.iter().zip(&etas).skip(1) {
                for d in 0..matrix.n_outcomes() {
                    let a = solver::marginal_at(&matrix, &reference.weights, d);
                    let b = solver::marginal_at(&matrix, &solution.weights, d);
                    marginal_disagreement = marginal_disagreement.max((a - b).abs() / a);
                }
                eta_disagreement =
                    eta_disagreement.max(max_norm_diff(&etas[0], eta));
                weight_disagreement = weight_disagreement.max(max_norm_diff(
                    reference.weights.as_slice(),
                    solution.weights.as_slice(),
                ));
            }
            let mut identity_gap = 0.0f64;
            for solution in &solutions {
                identity_gap = identity_gap.max(estimate::posterior_identity_gap(
                    &spec,
                    &grid,
                    &solution.weights,
                    &matrix,
                    obs.counts(),
                )?);
            }
            Ok(DatasetInvariance {
                dataset: ds,
                kappa,
                marginal_disagreement,
                eta_disagreement,
                weight_disagreement,
                identity_gap,
                all_converged: solutions.iter().all(|s| s.converged),
            })
        })
        .collect();
    let datasets = datasets.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(MultistartReport { datasets })
}

/// Multi-start invariance as a pass/fail suite.
pub fn lemma1(options: &MultistartOptions) -> Result<SuiteReport, VerifyError> {
    let report = multistart_invariance(options)?;
    let marginal = report.max_marginal_disagreement();
    let eta = report.max_eta_disagreement();
    let weights = report.max_weight_disagreement();
    let converged = report.datasets.iter().all(|d| d.all_converged);
    let checks = vec![
        PropertyCheck::new(
            "fitted marginals agree across starts",
            marginal <= 1e-4,
            format!("max relative disagreement {marginal:.3e} (bound 1e-4)"),
        ),
        PropertyCheck::new(
            "plug-in means agree across starts",
            eta <= 1e-4,
            format!("max disagreement {eta:.3e} (bound 1e-4)"),
        ),
        PropertyCheck::new(
            "weight vectors themselves differ",
            weights > 0.01,
            format!("max max-norm weight spread {weights:.3e} (> 0.01 somewhere)"),
        ),
        PropertyCheck::new(
            "all starts converged",
            converged,
            format!(
                "{} datasets × {} starts at tol {:.1e}",
                options.datasets, options.starts, options.tol
            ),
        ),
    ];
    Ok(SuiteReport {
        suite: "lemma1".into(),
        checks,
    })
}

/// Checks the posterior-mean identity: zero gap on a point grid, vanishing
/// gap at converged fits, positive gap away from stationarity.
pub fn identity() -> Result<SuiteReport, VerifyError> {
    let spec = ModelSpec::binomial(4)?;

    // Point grid: both sides equal η(θ) exactly.
    let point_grid = SupportGrid::new(
        &spec,
        vec![ThetaPoint::new(vec![0.6, 0.3])],
        GridProvenance::Explicit,
    )?;
    let mut rng = sim::replication_rng(41, 0);
    let population = sim::gen_population(
        &PopulationSpec::TwoType {
            delta: 0.2,
            n_strata: 500,
        },
        &mut rng,
    );
    let obs = sim::draw_observations(&spec, &population, &mut rng)?;
    let point_matrix = solver::build_likelihood_matrix(&spec, &point_grid, &obs)?;
    let point_gap = estimate::posterior_identity_gap(
        &spec,
        &point_grid,
        &MixtureWeights::point_mass(1, 0),
        &point_matrix,
        obs.counts(),
    )?;

    // Converged fit on a dense grid.
    let grid = solver::default_grid(&spec, 20)?;
    let matrix = solver::build_likelihood_matrix(&spec, &grid, &obs)?;
    let solution = solver::em_fit(
        &matrix,
        obs.counts(),
        MixtureWeights::uniform(grid.len()),
        1e-8,
        2_000_000,
    )?;
    let fitted_gap = estimate::posterior_identity_gap(
        &spec,
        &grid,
        &solution.weights,
        &matrix,
        obs.counts(),
    )?;

    // A deliberately non-stationary weight vector on the same grid.
    let mut skew = vec![0.0; grid.len()];
    skew[0] = 0.9;
    skew[grid.len() - 1] = 0.1;
    let skew_gap = estimate::posterior_identity_gap(
        &spec,
        &grid,
        &MixtureWeights::new(skew)?,
        &matrix,
        obs.counts(),
    )?;

    let checks = vec![
        PropertyCheck::new(
            "gap is exactly zero on a point grid",
            point_gap == 0.0,
            format!("gap {point_gap:.3e}"),
        ),
        PropertyCheck::new(
            "gap vanishes at a converged fit",
            fitted_gap <= 1e-4,
            format!(
                "gap {fitted_gap:.3e} at certificate {:.3e}",
                solution.certificate
            ),
        ),
        PropertyCheck::new(
            "gap is positive away from stationarity",
            skew_gap > 1e-3,
            format!("gap {skew_gap:.3e} at a skewed weight vector"),
        ),
    ];
    Ok(SuiteReport {
        suite: "identity".into(),
        checks,
    })
}

/// Settings for [`consistency`].
#[derive(Clone, Debug)]
pub struct ConsistencyOptions {
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub delta: f64,
    pub kappa: u32,
    pub grid_resolution: usize,
    pub seed: u64,
    /// Monte-Carlo slack allowed when requiring the bias to shrink.
    pub slack: f64,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        ConsistencyOptions {
            sample_sizes: vec![250, 1000, 4000],
            replications: 50,
            delta: 0.2,
            kappa: 4,
            grid_resolution: 50,
            seed: sim::DEFAULT_EXPERIMENT_SEED,
            slack: 0.01,
        }
    }
}

/// Truncated-mode plug-in bias trend over growing sample sizes: the absolute
/// bias of the replication mean must not grow (within Monte-Carlo slack).
pub fn consistency(options: &ConsistencyOptions) -> Result<SuiteReport, VerifyError> {
    let mut biases = Vec::with_capacity(options.sample_sizes.len());
    for &n in &options.sample_sizes {
        let config = ExperimentConfig {
            config_id: format!("consistency_n{n}"),
            model: ModelSpec::binomial(options.kappa)?,
            population: PopulationSpec::TwoType {
                delta: options.delta,
                n_strata: n,
            },
            mode: ObservationMode::Truncated,
            grid_resolution: options.grid_resolution,
            tol: solver::DEFAULT_TOL,
            max_iter: solver::DEFAULT_MAX_ITER,
            replications: options.replications,
            seed: options.seed,
        };
        let report = sim::run_experiment(&config)?;
        let mean = report.gmle.as_ref().expect("successful replications").mean[0];
        biases.push((n, (mean - 0.5).abs()));
    }
    let trend_ok = biases
        .windows(2)
        .all(|pair| pair[1].1 <= pair[0].1 + options.slack);
    let details = biases
        .iter()
        .map(|(n, b)| format!("n={n}: |bias| {b:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    let checks = vec![PropertyCheck::new(
        "plug-in bias shrinks with the sample",
        trend_ok,
        format!("{details} (slack {})", options.slack),
    )];
    Ok(SuiteReport {
        suite: "consistency".into(),
        checks,
    })
}
