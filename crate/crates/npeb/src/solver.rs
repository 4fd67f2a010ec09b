//! Grid-based nonparametric maximum likelihood for the mixing distribution.
//!
//! The mixing distribution is restricted to a fixed finite grid of parameter
//! points; fitting then maximizes the observed-data log-likelihood over the
//! probability simplex on that grid. The maximizer is computed by the EM
//! multiplicative update
//!
//! ```text
//! w_k ← w_k · (1/n) Σ_d counts_d · L[d][k] / f_w(d),    f_w(d) = Σ_j w_j L[d][j]
//! ```
//!
//! which never decreases the log-likelihood. Convergence is declared through
//! a first-order certificate: `max_k (1/n) Σ_d counts_d L[d][k] / f_w(d) − 1`
//! is nonpositive at a global maximizer (the objective is concave), and a
//! value of `ε` bounds the log-likelihood gap to the optimum by `n·ε`.

use crate::model::{ModelError, ModelSpec, Outcome, ThetaPoint};
use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

/// Certificate tolerance used when none is specified.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Iteration budget used when none is specified.
pub const DEFAULT_MAX_ITER: usize = 200_000;
/// Weights below this are zeroed (and the rest renormalized) before a
/// solution is returned.
pub const WEIGHT_PRUNE_THRESHOLD: f64 = 1e-12;
/// Hard cap on grid size.
pub const MAX_GRID_POINTS: usize = 1_000_000;

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("observed outcome {outcome} has zero probability at every grid point")]
    ImpossibleOutcome { outcome: String },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("grid of {requested} points exceeds the capacity of {MAX_GRID_POINTS}")]
    GridTooLarge { requested: u128 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How the points of a [`SupportGrid`] were produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum GridProvenance {
    Preset(String),
    Explicit,
}

/// The fixed support on which mixing distributions are represented.
#[derive(Clone, Debug)]
pub struct SupportGrid {
    points: Vec<ThetaPoint>,
    provenance: GridProvenance,
}

impl SupportGrid {
    /// Validates that the points are nonempty, pairwise distinct and inside
    /// the model's parameter domain.
    pub fn new(
        spec: &ModelSpec,
        points: Vec<ThetaPoint>,
        provenance: GridProvenance,
    ) -> Result<Self, SolverError> {
        if points.is_empty() {
            return Err(SolverError::InvalidArgument(
                "support grid must contain at least one point".into(),
            ));
        }
        if points.len() > MAX_GRID_POINTS {
            return Err(SolverError::GridTooLarge {
                requested: points.len() as u128,
            });
        }
        let mut seen = HashSet::with_capacity(points.len());
        for theta in &points {
            spec.validate_theta(theta)?;
            let key: Vec<u64> = theta.coords().iter().map(|v| v.to_bits()).collect();
            if !seen.insert(key) {
                return Err(SolverError::InvalidArgument(format!(
                    "duplicate grid point {:?}",
                    theta.coords()
                )));
            }
        }
        Ok(SupportGrid { points, provenance })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ThetaPoint] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &ThetaPoint {
        &self.points[k]
    }

    pub fn provenance(&self) -> &GridProvenance {
        &self.provenance
    }
}

/// A probability vector over the points of a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MixtureWeights(Vec<f64>);

impl MixtureWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, SolverError> {
        if weights.is_empty() {
            return Err(SolverError::InvalidArgument("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SolverError::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(SolverError::InvalidArgument(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(MixtureWeights(weights))
    }

    pub fn uniform(m: usize) -> Self {
        MixtureWeights(vec![1.0 / m as f64; m])
    }

    pub fn point_mass(m: usize, k: usize) -> Self {
        let mut w = vec![0.0; m];
        w[k] = 1.0;
        MixtureWeights(w)
    }

    /// Draws strictly positive weights from the flat Dirichlet distribution
    /// (exponential spacings, normalized). Used for multi-start fitting.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let mut w: Vec<f64> = (0..m)
            .map(|_| {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                -u.ln()
            })
            .collect();
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        MixtureWeights(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Whether nonresponse entries are present in the data (censored) or have
/// been discarded (truncated).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    Truncated,
    Censored,
}

impl std::fmt::Display for ObservationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObservationMode::Truncated => write!(f, "truncated"),
            ObservationMode::Censored => write!(f, "censored"),
        }
    }
}

/// Distinct observed outcomes with multiplicities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservationSet {
    distinct: Vec<Outcome>,
    counts: Vec<u64>,
    mode: ObservationMode,
}

impl ObservationSet {
    pub fn new(
        pairs: Vec<(Outcome, u64)>,
        mode: ObservationMode,
    ) -> Result<Self, SolverError> {
        if pairs.is_empty() {
            return Err(SolverError::InvalidArgument(
                "observation set must contain at least one outcome".into(),
            ));
        }
        let mut seen = HashSet::new();
        for (outcome, count) in &pairs {
            if *count == 0 {
                return Err(SolverError::InvalidArgument(format!(
                    "outcome {outcome} has zero multiplicity"
                )));
            }
            if mode == ObservationMode::Truncated && !outcome.is_response() {
                return Err(SolverError::InvalidArgument(
                    "truncated observation sets cannot contain nonresponse".into(),
                ));
            }
            if !seen.insert(*outcome) {
                return Err(SolverError::InvalidArgument(format!(
                    "outcome {outcome} listed twice"
                )));
            }
        }
        let (distinct, counts) = pairs.into_iter().unzip();
        Ok(ObservationSet {
            distinct,
            counts,
            mode,
        })
    }

    /// Aggregates raw per-stratum outcomes into multiplicity form, in the
    /// canonical (ordered) outcome order.
    pub fn from_outcomes<I: IntoIterator<Item = Outcome>>(
        outcomes: I,
        mode: ObservationMode,
    ) -> Result<Self, SolverError> {
        let mut tally: BTreeMap<Outcome, u64> = BTreeMap::new();
        for o in outcomes {
            *tally.entry(o).or_insert(0) += 1;
        }
        Self::new(tally.into_iter().collect(), mode)
    }

    pub fn mode(&self) -> ObservationMode {
        self.mode
    }

    pub fn distinct(&self) -> &[Outcome] {
        &self.distinct
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of distinct outcomes.
    pub fn len(&self) -> usize {
        self.distinct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distinct.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Outcome, u64)> {
        self.distinct.iter().zip(self.counts.iter().copied())
    }

    pub fn n_total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn n_responders(&self) -> u64 {
        self.iter()
            .filter(|(o, _)| o.is_response())
            .map(|(_, c)| c)
            .sum()
    }
}

/// Row-major `D × m` matrix of outcome probabilities: rows index observed
/// outcomes, columns index grid points.
#[derive(Clone, Debug)]
pub struct LikelihoodMatrix {
    data: Vec<f64>,
    n_outcomes: usize,
    n_points: usize,
}

impl LikelihoodMatrix {
    pub fn new(data: Vec<f64>, n_outcomes: usize, n_points: usize) -> Result<Self, SolverError> {
        if n_outcomes == 0 || n_points == 0 || data.len() != n_outcomes * n_points {
            return Err(SolverError::InvalidArgument(format!(
                "matrix data length {} does not match {n_outcomes}×{n_points}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SolverError::InvalidArgument(
                "matrix entries must be finite and nonnegative".into(),
            ));
        }
        Ok(LikelihoodMatrix {
            data,
            n_outcomes,
            n_points,
        })
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn at(&self, d: usize, k: usize) -> f64 {
        self.data[d * self.n_points + k]
    }

    pub fn row(&self, d: usize) -> &[f64] {
        &self.data[d * self.n_points..(d + 1) * self.n_points]
    }
}

/// A converged (or iteration-capped) fit.
#[derive(Clone, Debug, Serialize)]
pub struct GmleSolution {
    pub weights: MixtureWeights,
    pub loglik: f64,
    /// `max_k (1/n) Σ_d counts_d L[d][k] / f_w(d) − 1` at the returned
    /// weights; at most the tolerance when `converged`.
    pub certificate: f64,
    /// Number of multiplicative updates applied.
    pub iterations: usize,
    pub converged: bool,
}

/// Fills the likelihood matrix for the observed outcomes under the set's
/// mode. Fails if some observed outcome is impossible at every grid point.
pub fn build_likelihood_matrix(
    spec: &ModelSpec,
    grid: &SupportGrid,
    obs: &ObservationSet,
) -> Result<LikelihoodMatrix, SolverError> {
    let d_count = obs.len();
    let m = grid.len();
    let mut data = vec![0.0; d_count * m];
    for (d, outcome) in obs.distinct().iter().enumerate() {
        let row = &mut data[d * m..(d + 1) * m];
        let mut any_positive = false;
        for (k, theta) in grid.points().iter().enumerate() {
            let p = match obs.mode() {
                ObservationMode::Censored => spec.outcome_prob_censored(theta, outcome)?,
                ObservationMode::Truncated => spec.outcome_prob_truncated(theta, outcome)?,
            };
            row[k] = p;
            any_positive |= p > 0.0;
        }
        if !any_positive {
            return Err(SolverError::ImpossibleOutcome {
                outcome: outcome.to_string(),
            });
        }
    }
    LikelihoodMatrix::new(data, d_count, m)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Mixture marginal `f_w(d) = Σ_k w_k L[d][k]` of observed outcome `d`.
pub fn marginal_at(matrix: &LikelihoodMatrix, weights: &MixtureWeights, d: usize) -> f64 {
    dot(matrix.row(d), weights.as_slice())
}

/// `Σ_d counts_d · ln f_w(d)`, or `-∞` when some observed outcome has zero
/// marginal under `weights`.
pub fn log_likelihood(matrix: &LikelihoodMatrix, counts: &[u64], weights: &MixtureWeights) -> f64 {
    let mut total = 0.0;
    for (d, &count) in counts.iter().enumerate() {
        let f = marginal_at(matrix, weights, d);
        if f <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += count as f64 * f.ln();
    }
    total
}

/// Runs the EM multiplicative update from `init` until the optimality
/// certificate drops to `tol` or `max_iter` updates have been applied.
pub fn em_fit(
    matrix: &LikelihoodMatrix,
    counts: &[u64],
    init: MixtureWeights,
    tol: f64,
    max_iter: usize,
) -> Result<GmleSolution, SolverError> {
    em_fit_with_trace(matrix, counts, init, tol, max_iter).map(|(solution, _)| solution)
}

/// Like [`em_fit`], additionally returning the log-likelihood after the
/// initialization and after every update.
pub fn em_fit_with_trace(
    matrix: &LikelihoodMatrix,
    counts: &[u64],
    init: MixtureWeights,
    tol: f64,
    max_iter: usize,
) -> Result<(GmleSolution, Vec<f64>), SolverError> {
    let d_count = matrix.n_outcomes();
    let m = matrix.n_points();
    if counts.len() != d_count {
        return Err(SolverError::InvalidArgument(format!(
            "got {} counts for {d_count} matrix rows",
            counts.len()
        )));
    }
    if init.len() != m {
        return Err(SolverError::InvalidArgument(format!(
            "got {} initial weights for {m} grid points",
            init.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(SolverError::InvalidArgument(
            "tolerance must be positive".into(),
        ));
    }
    let n: f64 = counts.iter().map(|&c| c as f64).sum();
    if n <= 0.0 {
        return Err(SolverError::InvalidArgument(
            "observation counts sum to zero".into(),
        ));
    }

    let mut w = init.into_vec();
    let mut marginals = vec![0.0; d_count];
    let mut multiplier = vec![0.0; m];
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let (loglik, certificate, converged) = loop {
        let loglik = eval_state(matrix, counts, &w, &mut marginals, &mut multiplier, n)?;
        trace.push(loglik);
        let certificate = multiplier.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0;
        if certificate <= tol {
            break (loglik, certificate, true);
        }
        if iterations >= max_iter {
            break (loglik, certificate, false);
        }
        let mut total = 0.0;
        for (wk, gk) in w.iter_mut().zip(&multiplier) {
            *wk *= *gk;
            total += *wk;
        }
        let inv_total = 1.0 / total;
        for wk in &mut w {
            *wk *= inv_total;
        }
        iterations += 1;
    };

    // Drop numerically dead atoms; marginals move by less than ~1e-10, but
    // the reported log-likelihood and certificate are recomputed so they
    // refer to the weights actually returned.
    let (loglik, certificate) = if prune_weights(&mut w) {
        let loglik = eval_state(matrix, counts, &w, &mut marginals, &mut multiplier, n)?;
        let certificate = multiplier.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0;
        if let Some(last) = trace.last_mut() {
            *last = loglik;
        }
        (loglik, certificate)
    } else {
        (loglik, certificate)
    };

    Ok((
        GmleSolution {
            weights: MixtureWeights(w),
            loglik,
            certificate,
            iterations,
            converged,
        },
        trace,
    ))
}

/// Computes marginals, the EM multiplier vector and the log-likelihood at `w`.
fn eval_state(
    matrix: &LikelihoodMatrix,
    counts: &[u64],
    w: &[f64],
    marginals: &mut [f64],
    multiplier: &mut [f64],
    n: f64,
) -> Result<f64, SolverError> {
    let mut loglik = 0.0;
    for (d, &count) in counts.iter().enumerate() {
        let f = dot(matrix.row(d), w);
        if !(f > 0.0 && f.is_finite()) {
            return Err(SolverError::NumericalFailure(format!(
                "marginal of observed outcome row {d} is {f}"
            )));
        }
        marginals[d] = f;
        loglik += count as f64 * f.ln();
    }
    multiplier.fill(0.0);
    for (d, &count) in counts.iter().enumerate() {
        axpy(count as f64 / marginals[d], matrix.row(d), multiplier);
    }
    let inv_n = 1.0 / n;
    for g in multiplier.iter_mut() {
        *g *= inv_n;
    }
    Ok(loglik)
}

fn prune_weights(w: &mut [f64]) -> bool {
    let mut pruned = false;
    let mut total = 0.0;
    for wk in w.iter_mut() {
        if *wk < WEIGHT_PRUNE_THRESHOLD {
            if *wk > 0.0 {
                pruned = true;
            }
            *wk = 0.0;
        }
        total += *wk;
    }
    if pruned {
        let inv_total = 1.0 / total;
        for wk in w.iter_mut() {
            *wk *= inv_total;
        }
    }
    pruned
}

/// Builds the likelihood matrix and runs [`em_fit`] from uniform weights.
pub fn fit_observations(
    spec: &ModelSpec,
    grid: &SupportGrid,
    obs: &ObservationSet,
    tol: f64,
    max_iter: usize,
) -> Result<(GmleSolution, LikelihoodMatrix), SolverError> {
    let matrix = build_likelihood_matrix(spec, grid, obs)?;
    let init = MixtureWeights::uniform(grid.len());
    let solution = em_fit(&matrix, obs.counts(), init, tol, max_iter)?;
    Ok((solution, matrix))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
    v[n - 1] = hi;
    v
}

fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// All `S`-part compositions of `total`, in lexicographic order.
fn compositions(total: u32, parts: u32) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            let mut c = Vec::with_capacity(parts as usize);
            c.push(first);
            c.append(&mut rest);
            out.push(c);
        }
    }
    out
}

fn count_compositions(total: u128, parts: u128) -> Option<u128> {
    // C(total + parts - 1, parts - 1)
    let mut acc: u128 = 1;
    for i in 1..parts {
        acc = acc.checked_mul(total + i)?;
        acc /= i;
    }
    Some(acc)
}

/// A lattice of grid points covering the model's parameter domain, with
/// `resolution` values per free coordinate. Unit-interval coordinates span
/// `[0.01, 0.99]`; Poisson rates are log-spaced on `[0.05, lambda_max]`.
pub fn default_grid(spec: &ModelSpec, resolution: usize) -> Result<SupportGrid, SolverError> {
    if resolution < 2 {
        return Err(SolverError::InvalidArgument(
            "grid resolution must be at least 2".into(),
        ));
    }
    let res_u128 = resolution as u128;
    let unit = || linspace(0.01, 0.99, resolution);
    let points: Vec<ThetaPoint> = match spec {
        ModelSpec::Bernoulli { .. } => unit().into_iter().map(|t| ThetaPoint::new(vec![t])).collect(),
        ModelSpec::Binomial { .. } => {
            check_capacity(res_u128 * res_u128)?;
            let axis = unit();
            let mut points = Vec::with_capacity(resolution * resolution);
            for &pi in &axis {
                for &p in &axis {
                    points.push(ThetaPoint::new(vec![pi, p]));
                }
            }
            points
        }
        ModelSpec::Poisson { lambda_max, .. } => {
            check_capacity(res_u128 * res_u128)?;
            let lo = 0.05f64.min(*lambda_max);
            let lambdas = geomspace(lo, *lambda_max, resolution);
            let ps = unit();
            let mut points = Vec::with_capacity(resolution * resolution);
            for &lambda in &lambdas {
                for &p in &ps {
                    points.push(ThetaPoint::new(vec![lambda, p]));
                }
            }
            points
        }
        ModelSpec::Geometric { categories, .. } => {
            let s = *categories as u128;
            let lattice_count = count_compositions((resolution - 1) as u128, s)
                .ok_or(SolverError::GridTooLarge { requested: u128::MAX })?;
            check_capacity(res_u128 * lattice_count)?;
            // Shrink lattice fractions k/(res-1) toward the barycenter so
            // every category probability lands in [~0.01, ~0.99].
            let r = (resolution - 1) as f64;
            let gamma = r / 98.0;
            let denom = r + *categories as f64 * gamma;
            let pis = unit();
            let mut points = Vec::new();
            for comp in compositions(resolution as u32 - 1, *categories) {
                let mut probs: Vec<f64> =
                    comp.iter().map(|&k| (f64::from(k) + gamma) / denom).collect();
                let correction: f64 = 1.0 - probs.iter().sum::<f64>();
                probs[0] += correction;
                for &pi in &pis {
                    let mut coords = vec![pi];
                    coords.extend_from_slice(&probs);
                    points.push(ThetaPoint::new(coords));
                }
            }
            points
        }
    };
    let preset = format!("{}-lattice-res{}", spec.family_name(), resolution);
    SupportGrid::new(spec, points, GridProvenance::Preset(preset))
}

fn check_capacity(requested: u128) -> Result<(), SolverError> {
    if requested > MAX_GRID_POINTS as u128 {
        Err(SolverError::GridTooLarge { requested })
    } else {
        Ok(())
    }
}
