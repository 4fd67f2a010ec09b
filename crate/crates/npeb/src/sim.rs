//! Seeded replication experiments.
//!
//! An [`ExperimentConfig`] fixes a model, a synthetic population, an
//! observation mode and solver settings. [`run_experiment`] replays
//! `replications` independent draw–fit–estimate cycles and aggregates the
//! plug-in and naive estimates into means and standard deviations.
//!
//! Reproducibility: replication `r` draws from a ChaCha8 stream keyed by the
//! experiment seed with stream index `r`, so each replication's data is a
//! pure function of `(seed, r)` — results do not depend on execution order,
//! and replications run in parallel.

use crate::estimate::{self, EstimateError};
use crate::model::{ModelError, ModelSpec, Outcome, ThetaPoint};
use crate::solver::{
    self, ObservationMode, ObservationSet, SolverError, SupportGrid,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seed used by the bundled table presets.
pub const DEFAULT_EXPERIMENT_SEED: u64 = 7;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("{failed} of {total} replications failed the solve")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

/// Synthetic population of stratum parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopulationSpec {
    /// Half the strata at `(0.5-δ, 0.5-δ)`, half at `(0.5+δ, 0.5+δ)`;
    /// fixed, no randomness.
    TwoType { delta: f64, n_strata: usize },
    /// Half the strata draw both coordinates i.i.d. uniform on `range_a`,
    /// half on `range_b`; redrawn every replication.
    UniformMix {
        range_a: (f64, f64),
        range_b: (f64, f64),
        n_strata: usize,
    },
    /// Fixed list of parameter points.
    Explicit { thetas: Vec<ThetaPoint> },
}

impl PopulationSpec {
    pub fn n_strata(&self) -> usize {
        match self {
            PopulationSpec::TwoType { n_strata, .. }
            | PopulationSpec::UniformMix { n_strata, .. } => *n_strata,
            PopulationSpec::Explicit { thetas } => thetas.len(),
        }
    }

    /// Whether the population changes between replications.
    pub fn is_random(&self) -> bool {
        matches!(self, PopulationSpec::UniformMix { .. })
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<(), SimError> {
        match self {
            PopulationSpec::TwoType { delta, n_strata } => {
                if !(0.0..0.5).contains(delta) {
                    return Err(SimError::InvalidConfig(format!(
                        "two-type delta must lie in [0, 0.5), got {delta}"
                    )));
                }
                if *n_strata < 2 || n_strata % 2 != 0 {
                    return Err(SimError::InvalidConfig(
                        "two-type populations split the strata exactly in half; \
                         n_strata must be even and at least 2"
                            .into(),
                    ));
                }
                if spec.theta_dim() != 2 {
                    return Err(SimError::InvalidConfig(format!(
                        "two-type populations produce (π, p) pairs; incompatible with the {} family",
                        spec.family_name()
                    )));
                }
            }
            PopulationSpec::UniformMix {
                range_a,
                range_b,
                n_strata,
            } => {
                for (lo, hi) in [range_a, range_b] {
                    if !(0.0 < *lo && lo < hi && *hi < 1.0) {
                        return Err(SimError::InvalidConfig(format!(
                            "uniform ranges must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
                        )));
                    }
                }
                if *n_strata < 2 || n_strata % 2 != 0 {
                    return Err(SimError::InvalidConfig(
                        "uniform-mix populations split the strata exactly in half; \
                         n_strata must be even and at least 2"
                            .into(),
                    ));
                }
                if spec.theta_dim() != 2 {
                    return Err(SimError::InvalidConfig(format!(
                        "uniform-mix populations produce (π, p) pairs; incompatible with the {} family",
                        spec.family_name()
                    )));
                }
            }
            PopulationSpec::Explicit { thetas } => {
                if thetas.is_empty() {
                    return Err(SimError::InvalidConfig(
                        "explicit population must contain at least one stratum".into(),
                    ));
                }
                for t in thetas {
                    spec.validate_theta(t)?;
                }
            }
        }
        Ok(())
    }
}

/// Generates the stratum parameters for one replication.
pub fn gen_population<R: Rng + ?Sized>(pspec: &PopulationSpec, rng: &mut R) -> Vec<ThetaPoint> {
    match pspec {
        PopulationSpec::TwoType { delta, n_strata } => {
            let lo = 0.5 - delta;
            let hi = 0.5 + delta;
            let half = n_strata / 2;
            let mut out = Vec::with_capacity(*n_strata);
            out.extend((0..half).map(|_| ThetaPoint::new(vec![lo, lo])));
            out.extend((0..n_strata - half).map(|_| ThetaPoint::new(vec![hi, hi])));
            out
        }
        PopulationSpec::UniformMix {
            range_a,
            range_b,
            n_strata,
        } => {
            let half = n_strata / 2;
            let mut out = Vec::with_capacity(*n_strata);
            for i in 0..*n_strata {
                let (lo, hi) = if i < half { *range_a } else { *range_b };
                let pi = rng.gen_range(lo..hi);
                let p = rng.gen_range(lo..hi);
                out.push(ThetaPoint::new(vec![pi, p]));
            }
            out
        }
        PopulationSpec::Explicit { thetas } => thetas.clone(),
    }
}

/// Draws one censored outcome per stratum.
pub fn draw_outcomes<R: Rng + ?Sized>(
    spec: &ModelSpec,
    population: &[ThetaPoint],
    rng: &mut R,
) -> Result<Vec<Outcome>, SimError> {
    let mut out = Vec::with_capacity(population.len());
    for theta in population {
        spec.validate_theta(theta)?;
        let c = theta.coords();
        let outcome = match spec {
            ModelSpec::Binomial { attempts } => {
                let responders =
                    Binomial::new(u64::from(*attempts), c[0]).unwrap().sample(rng) as u32;
                if responders == 0 {
                    Outcome::Nonresponse
                } else {
                    let successes =
                        Binomial::new(u64::from(responders), c[1]).unwrap().sample(rng) as u32;
                    Outcome::Counts {
                        successes,
                        responders,
                    }
                }
            }
            ModelSpec::Poisson { .. } => {
                let responders = Poisson::new(c[0]).unwrap().sample(rng) as u32;
                if responders == 0 {
                    Outcome::Nonresponse
                } else {
                    let successes =
                        Binomial::new(u64::from(responders), c[1]).unwrap().sample(rng) as u32;
                    Outcome::Counts {
                        successes,
                        responders,
                    }
                }
            }
            ModelSpec::Geometric { max_attempts, .. } => {
                let mut outcome = Outcome::Nonresponse;
                for attempt in 1..=*max_attempts {
                    if rng.gen_bool(c[0]) {
                        let u: f64 = rng.gen();
                        let mut cum = 0.0;
                        let mut category = c.len() as u32 - 1;
                        for (i, &p) in c[1..].iter().enumerate() {
                            cum += p;
                            if u < cum {
                                category = i as u32 + 1;
                                break;
                            }
                        }
                        outcome = Outcome::Attempt { category, attempt };
                        break;
                    }
                }
                outcome
            }
            ModelSpec::Bernoulli { .. } => Outcome::Bit {
                value: u8::from(rng.gen_bool(c[0])),
            },
        };
        out.push(outcome);
    }
    Ok(out)
}

/// Draws one replication worth of data and aggregates it in censored form.
pub fn draw_observations<R: Rng + ?Sized>(
    spec: &ModelSpec,
    population: &[ThetaPoint],
    rng: &mut R,
) -> Result<ObservationSet, SimError> {
    let outcomes = draw_outcomes(spec, population, rng)?;
    Ok(ObservationSet::from_outcomes(
        outcomes,
        ObservationMode::Censored,
    )?)
}

/// Drops the nonresponse entry, keeping responder multiplicities.
pub fn to_truncated(obs: &ObservationSet) -> Result<ObservationSet, SimError> {
    let pairs: Vec<(Outcome, u64)> = obs
        .iter()
        .filter(|(o, _)| o.is_response())
        .map(|(o, c)| (*o, c))
        .collect();
    if pairs.is_empty() {
        return Err(SimError::DegenerateData(
            "all strata are nonresponse; the truncated sample is empty".into(),
        ));
    }
    Ok(ObservationSet::new(pairs, ObservationMode::Truncated)?)
}

/// One experiment: model, population, mode, solver settings, seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub config_id: String,
    pub model: ModelSpec,
    pub population: PopulationSpec,
    pub mode: ObservationMode,
    pub grid_resolution: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub replications: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.population.validate(&self.model)?;
        if self.replications == 0 {
            return Err(SimError::InvalidConfig(
                "need at least one replication".into(),
            ));
        }
        if self.grid_resolution < 2 {
            return Err(SimError::InvalidConfig(
                "grid resolution must be at least 2".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(SimError::InvalidConfig("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// The RNG for replication `rep`: a ChaCha8 generator keyed by the
/// experiment seed, moved to stream `rep`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Regenerates the population and raw per-stratum outcomes of replication
/// `rep`, exactly as [`run_experiment`] sees them.
pub fn replication_draws(
    config: &ExperimentConfig,
    rep: usize,
) -> Result<(Vec<ThetaPoint>, Vec<Outcome>), SimError> {
    let mut rng = replication_rng(config.seed, rep as u64);
    let population = gen_population(&config.population, &mut rng);
    let outcomes = draw_outcomes(&config.model, &population, &mut rng)?;
    Ok((population, outcomes))
}

/// Estimates recorded for one replication; `error` is set when the
/// replication failed and was excluded from the summaries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub gmle: Option<Vec<f64>>,
    pub naive: Option<Vec<f64>>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

/// Mean and standard deviation (denominator `n-1`) per estimand coordinate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Number of replications contributing values.
    pub n_values: usize,
}

fn summarize(values: &[&Vec<f64>], dim: usize) -> Option<EstimatorSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in values {
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut sd = vec![0.0; dim];
    if values.len() > 1 {
        for v in values {
            for ((s, x), m) in sd.iter_mut().zip(v.iter()).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut sd {
            *s = (*s / (n - 1.0)).sqrt();
        }
    }
    Some(EstimatorSummary {
        mean,
        sd,
        n_values: values.len(),
    })
}

/// Full record of one experiment run.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub replications: Vec<ReplicationRecord>,
    pub n_failed: usize,
    pub gmle: Option<EstimatorSummary>,
    pub naive: Option<EstimatorSummary>,
}

fn run_replication(
    config: &ExperimentConfig,
    grid: &SupportGrid,
    rep: usize,
) -> ReplicationRecord {
    let mut record = ReplicationRecord {
        replication: rep,
        gmle: None,
        naive: None,
        converged: None,
        error: None,
    };
    let result = (|| -> Result<(), SimError> {
        let mut rng = replication_rng(config.seed, rep as u64);
        let population = gen_population(&config.population, &mut rng);
        let censored = draw_observations(&config.model, &population, &mut rng)?;
        let fit_obs = match config.mode {
            ObservationMode::Censored => censored.clone(),
            ObservationMode::Truncated => to_truncated(&censored)?,
        };
        let (solution, _) = solver::fit_observations(
            &config.model,
            grid,
            &fit_obs,
            config.tol,
            config.max_iter,
        )?;
        record.gmle = Some(estimate::eta_gmle(&config.model, grid, &solution.weights)?);
        record.naive = estimate::naive(&config.model, &censored)?;
        record.converged = Some(solution.converged);
        Ok(())
    })();
    if let Err(e) = result {
        record.error = Some(e.to_string());
        record.gmle = None;
        record.naive = None;
        record.converged = None;
    }
    record
}

/// Runs every replication of `config` (in parallel) and aggregates the
/// estimates. Fails if more than 10% of the replications fail to solve.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, SimError> {
    config.validate()?;
    let grid = solver::default_grid(&config.model, config.grid_resolution)?;
    let replications: Vec<ReplicationRecord> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, &grid, rep))
        .collect();
    let n_failed = replications.iter().filter(|r| r.error.is_some()).count();
    if n_failed * 10 > config.replications {
        return Err(SimError::TooManyFailures {
            failed: n_failed,
            total: config.replications,
        });
    }
    let dim = config.model.eta_dim();
    let gmle_values: Vec<&Vec<f64>> = replications.iter().filter_map(|r| r.gmle.as_ref()).collect();
    let naive_values: Vec<&Vec<f64>> =
        replications.iter().filter_map(|r| r.naive.as_ref()).collect();
    Ok(ExperimentReport {
        config: config.clone(),
        n_failed,
        gmle: summarize(&gmle_values, dim),
        naive: summarize(&naive_values, dim),
        replications,
    })
}

/// The two bundled experiment tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TablePreset {
    /// Two-type binomial populations, κ = 4, δ ∈ {0.3, 0.2, 0.1}.
    Table1,
    /// Uniform-mix binomial populations, κ ∈ {1, …, 5}.
    Table2,
}

impl std::str::FromStr for TablePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table1" => Ok(TablePreset::Table1),
            "table2" => Ok(TablePreset::Table2),
            other => Err(format!("unknown preset `{other}` (expected table1 or table2)")),
        }
    }
}

/// The experiment configurations behind a preset: 1000 strata, censored
/// fitting, a 50×50 grid, 50 seeded replications each.
pub fn table_preset(preset: TablePreset) -> Vec<ExperimentConfig> {
    let base = |config_id: String, model: ModelSpec, population: PopulationSpec| ExperimentConfig {
        config_id,
        model,
        population,
        mode: ObservationMode::Censored,
        grid_resolution: 50,
        tol: solver::DEFAULT_TOL,
        max_iter: solver::DEFAULT_MAX_ITER,
        replications: 50,
        seed: DEFAULT_EXPERIMENT_SEED,
    };
    match preset {
        TablePreset::Table1 => [0.3, 0.2, 0.1]
            .iter()
            .map(|&delta| {
                base(
                    format!("table1_delta{delta}"),
                    ModelSpec::Binomial { attempts: 4 },
                    PopulationSpec::TwoType {
                        delta,
                        n_strata: 1000,
                    },
                )
            })
            .collect(),
        TablePreset::Table2 => (1..=5)
            .map(|kappa| {
                base(
                    format!("table2_kappa{kappa}"),
                    ModelSpec::Binomial { attempts: kappa },
                    PopulationSpec::UniformMix {
                        range_a: (0.1, 0.6),
                        range_b: (0.4, 0.9),
                        n_strata: 1000,
                    },
                )
            })
            .collect(),
    }
}

/// Renders reports as CSV: one row per config × estimator (coordinates of a
/// vector estimand get bracketed suffixes).
pub fn reports_to_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("config_id,estimator,mean,sd,n_reps,n_failed\n");
    for report in reports {
        let dim = report.config.model.eta_dim();
        let mut push_rows = |name: &str, summary: &Option<EstimatorSummary>| {
            let Some(summary) = summary else { return };
            for i in 0..dim {
                let label = if dim == 1 {
                    name.to_string()
                } else {
                    format!("{name}[{i}]")
                };
                out.push_str(&format!(
                    "{},{},{:.6},{:.6},{},{}\n",
                    report.config.config_id,
                    label,
                    summary.mean[i],
                    summary.sd[i],
                    summary.n_values,
                    report.n_failed
                ));
            }
        };
        push_rows("naive", &report.naive);
        push_rows("gmle", &report.gmle);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BernoulliEta;
    use approx::assert_abs_diff_eq;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            config_id: "unit".into(),
            model: ModelSpec::Binomial { attempts: 2 },
            population: PopulationSpec::TwoType {
                delta: 0.2,
                n_strata: 60,
            },
            mode: ObservationMode::Censored,
            grid_resolution: 8,
            tol: 1e-6,
            max_iter: 50_000,
            replications: 3,
            seed: 11,
        }
    }

    #[test]
    fn two_type_population_is_deterministic() {
        let mut rng = replication_rng(0, 0);
        let pop = gen_population(
            &PopulationSpec::TwoType {
                delta: 0.3,
                n_strata: 4,
            },
            &mut rng,
        );
        let coords: Vec<&[f64]> = pop.iter().map(|t| t.coords()).collect();
        assert_eq!(
            coords,
            vec![&[0.2, 0.2][..], &[0.2, 0.2], &[0.8, 0.8], &[0.8, 0.8]]
        );

        let degenerate = gen_population(
            &PopulationSpec::TwoType {
                delta: 0.0,
                n_strata: 4,
            },
            &mut rng,
        );
        assert!(degenerate.iter().all(|t| t.coords() == [0.5, 0.5]));
    }

    #[test]
    fn uniform_mix_centers_on_half() {
        let pspec = PopulationSpec::UniformMix {
            range_a: (0.1, 0.6),
            range_b: (0.4, 0.9),
            n_strata: 1_000_000,
        };
        let mut rng = replication_rng(123, 0);
        let pop = gen_population(&pspec, &mut rng);
        let mean_p: f64 =
            pop.iter().map(|t| t.coords()[1]).sum::<f64>() / pop.len() as f64;
        assert_abs_diff_eq!(mean_p, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn certain_response_and_certain_nonresponse() {
        let spec = ModelSpec::Binomial { attempts: 3 };
        let mut rng = replication_rng(5, 0);
        let sure = vec![ThetaPoint::new(vec![1.0, 0.5]); 50];
        let obs = draw_observations(&spec, &sure, &mut rng).unwrap();
        assert_eq!(obs.n_responders(), 50);

        let never = vec![ThetaPoint::new(vec![0.0, 0.5]); 50];
        let obs = draw_observations(&spec, &never, &mut rng).unwrap();
        assert_eq!(obs.n_responders(), 0);
        assert_eq!(obs.n_total(), 50);
    }

    #[test]
    fn nonresponse_rate_matches_closed_form() {
        // Two-type δ=0.3, κ=4: mean of (1-π)^4 over the two types.
        let spec = ModelSpec::Binomial { attempts: 4 };
        let pspec = PopulationSpec::TwoType {
            delta: 0.3,
            n_strata: 1_000_000,
        };
        let mut rng = replication_rng(77, 0);
        let pop = gen_population(&pspec, &mut rng);
        let obs = draw_observations(&spec, &pop, &mut rng).unwrap();
        let nr_fraction =
            (obs.n_total() - obs.n_responders()) as f64 / obs.n_total() as f64;
        assert_abs_diff_eq!(nr_fraction, (0.4096 + 0.0016) / 2.0, epsilon = 1e-3);
    }

    #[test]
    fn truncation_bookkeeping() {
        let spec = ModelSpec::Binomial { attempts: 2 };
        let mut rng = replication_rng(9, 0);
        let pop = gen_population(
            &PopulationSpec::TwoType {
                delta: 0.25,
                n_strata: 200,
            },
            &mut rng,
        );
        let censored = draw_observations(&spec, &pop, &mut rng).unwrap();
        let truncated = to_truncated(&censored).unwrap();
        assert_eq!(truncated.mode(), ObservationMode::Truncated);
        assert_eq!(truncated.n_total(), censored.n_responders());
        assert!(truncated.distinct().iter().all(|o| o.is_response()));

        // Without nonresponse entries truncation is the identity on outcomes.
        let sure = vec![ThetaPoint::new(vec![1.0, 0.5]); 20];
        let all_resp = draw_observations(&spec, &sure, &mut rng).unwrap();
        let trunc = to_truncated(&all_resp).unwrap();
        assert_eq!(trunc.distinct(), all_resp.distinct());
        assert_eq!(trunc.counts(), all_resp.counts());

        let never = vec![ThetaPoint::new(vec![0.0, 0.5]); 20];
        let none = draw_observations(&spec, &never, &mut rng).unwrap();
        assert!(matches!(
            to_truncated(&none),
            Err(SimError::DegenerateData(_))
        ));
    }

    #[test]
    fn experiment_is_reproducible() {
        let config = small_config();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );

        let one_rep = ExperimentConfig {
            replications: 1,
            ..small_config()
        };
        let r1 = run_experiment(&one_rep).unwrap();
        let r2 = run_experiment(&one_rep).unwrap();
        assert_eq!(r1.replications[0].gmle, r2.replications[0].gmle);
    }

    #[test]
    fn replications_are_order_independent() {
        let config = small_config();
        let report = run_experiment(&config).unwrap();
        // Recompute each replication in reverse order through the public
        // draw/fit path and compare.
        let grid = solver::default_grid(&config.model, config.grid_resolution).unwrap();
        for rep in (0..config.replications).rev() {
            let (_, outcomes) = replication_draws(&config, rep).unwrap();
            let obs =
                ObservationSet::from_outcomes(outcomes, ObservationMode::Censored).unwrap();
            let (solution, _) =
                solver::fit_observations(&config.model, &grid, &obs, config.tol, config.max_iter)
                    .unwrap();
            let eta = estimate::eta_gmle(&config.model, &grid, &solution.weights).unwrap();
            assert_eq!(report.replications[rep].gmle.as_ref(), Some(&eta));
        }
    }

    #[test]
    fn experiment_report_shape() {
        let config = small_config();
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.replications.len(), 3);
        assert_eq!(report.n_failed, 0);
        let gmle = report.gmle.as_ref().unwrap();
        assert_eq!(gmle.n_values, 3);
        assert!(gmle.mean[0] > 0.0 && gmle.mean[0] < 1.0);
        let naive = report.naive.as_ref().unwrap();
        assert!(naive.mean[0] > 0.0 && naive.mean[0] < 1.0);
    }

    #[test]
    fn config_validation() {
        let mut config = small_config();
        config.replications = 0;
        assert!(matches!(
            run_experiment(&config),
            Err(SimError::InvalidConfig(_))
        ));

        let bad_delta = ExperimentConfig {
            population: PopulationSpec::TwoType {
                delta: 0.5,
                n_strata: 10,
            },
            ..small_config()
        };
        assert!(bad_delta.validate().is_err());

        let odd = ExperimentConfig {
            population: PopulationSpec::TwoType {
                delta: 0.1,
                n_strata: 11,
            },
            ..small_config()
        };
        assert!(odd.validate().is_err());

        let bad_range = ExperimentConfig {
            population: PopulationSpec::UniformMix {
                range_a: (0.0, 0.6),
                range_b: (0.4, 0.9),
                n_strata: 10,
            },
            ..small_config()
        };
        assert!(bad_range.validate().is_err());

        let wrong_family = ExperimentConfig {
            model: ModelSpec::bernoulli(BernoulliEta::Identity),
            ..small_config()
        };
        assert!(wrong_family.validate().is_err());
    }

    #[test]
    fn presets_match_their_tables() {
        let t1 = table_preset(TablePreset::Table1);
        assert_eq!(t1.len(), 3);
        for config in &t1 {
            assert_eq!(config.model, ModelSpec::Binomial { attempts: 4 });
            assert_eq!(config.population.n_strata(), 1000);
            assert_eq!(config.replications, 50);
            assert_eq!(config.mode, ObservationMode::Censored);
        }

        let t2 = table_preset(TablePreset::Table2);
        assert_eq!(t2.len(), 5);
        for (i, config) in t2.iter().enumerate() {
            assert_eq!(
                config.model,
                ModelSpec::Binomial {
                    attempts: i as u32 + 1
                }
            );
            assert_eq!(config.replications, 50);
        }
    }

    #[test]
    fn csv_layout() {
        let config = small_config();
        let report = run_experiment(&config).unwrap();
        let csv = reports_to_csv(&[report]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "config_id,estimator,mean,sd,n_reps,n_failed");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("unit,naive,"));
        assert!(lines[2].starts_with("unit,gmle,"));
    }
}
