//! Model families for stratified sampling with nonignorable nonresponse.
//!
//! Each family defines a finite outcome space per stratum, the probability of
//! every outcome given the stratum parameter `θ`, and the pair of functions
//! that drive mean estimation: `η(θ)` (the estimand) and `h(y)` (a response
//! summary with `E[h(Y) | response, θ] = η(θ)`).
//!
//! Nonresponse is modelled explicitly: a stratum that produces no response is
//! recorded as [`Outcome::Nonresponse`]. The *censored* probability of that
//! outcome is the total mass of the nonresponse region, while *truncated*
//! probabilities condition on response having occurred.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Tolerance for probability-vector coordinates summing to one.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point in a model's parameter space.
///
/// Coordinate layout is family-specific: binomial `(π, p)`, Poisson `(λ, p)`,
/// Bernoulli `(θ)`, geometric `(π, p_1, …, p_S)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint(Vec<f64>);

impl ThetaPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        ThetaPoint(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ThetaPoint {
    fn from(coords: Vec<f64>) -> Self {
        ThetaPoint(coords)
    }
}

/// One observed stratum outcome.
///
/// The response payload depends on the family: binomial and Poisson strata
/// report success/responder counts, geometric surveys report the answer
/// category and the attempt at which it was obtained, Bernoulli trials report
/// a single bit. `Nonresponse` carries no payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    /// `successes` among `responders` (binomial and Poisson strata; `responders ≥ 1`).
    Counts { successes: u32, responders: u32 },
    /// Answer in `category` obtained at attempt number `attempt` (geometric surveys; 1-based).
    Attempt { category: u32, attempt: u32 },
    /// A single Bernoulli outcome in `{0, 1}`.
    Bit { value: u8 },
    /// No response was obtained from the stratum.
    Nonresponse,
}

impl Outcome {
    pub fn is_response(&self) -> bool {
        !matches!(self, Outcome::Nonresponse)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Counts {
                successes,
                responders,
            } => write!(f, "response(x={successes}, r={responders})"),
            Outcome::Attempt { category, attempt } => {
                write!(f, "response(s={category}, k={attempt})")
            }
            Outcome::Bit { value } => write!(f, "y={value}"),
            Outcome::Nonresponse => write!(f, "nonresponse"),
        }
    }
}

/// Choice of estimand for the Bernoulli family.
///
/// `Identity` targets `η(θ) = θ`, which admits the response summary
/// `h(y) = y`. `Square` targets `η(θ) = θ²`, for which no such summary
/// exists; it is kept to exercise the non-identifiable case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BernoulliEta {
    Identity,
    Square,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter out of domain for {family}: {detail}")]
    OutOfDomain {
        family: &'static str,
        detail: String,
    },
    #[error("outcome {outcome} is not valid for the {family} family: {detail}")]
    MalformedOutcome {
        family: &'static str,
        outcome: Outcome,
        detail: String,
    },
    #[error("response probability is zero at {detail}; truncated density undefined")]
    SingularParameter { detail: String },
    #[error("operation requires a response outcome, got nonresponse")]
    ResponseRequired,
    #[error("no response summary h satisfies E[h | response, θ] = η(θ) for {detail}")]
    UnsupportedEta { detail: String },
}

/// A model family together with its design constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `κ` units attempted per stratum; `κ_r ~ Binomial(κ, π)` respond and
    /// `x ~ Binomial(κ_r, p)` of them are successes. `θ = (π, p)`.
    Binomial { attempts: u32 },
    /// Up to `K` contact attempts; response at attempt `k` with probability
    /// `π(1-π)^{k-1}`, answer category `s` with probability `p_s`.
    /// `θ = (π, p_1, …, p_S)`.
    Geometric { max_attempts: u32, categories: u32 },
    /// `κ_r ~ Poisson(λ)` units observed per stratum in a unit window,
    /// `x ~ Binomial(κ_r, p)` successes; `κ_r = 0` is nonresponse.
    /// `θ = (λ, p)` with `0 < λ ≤ lambda_max`. The enumerated outcome space
    /// caps responders at `responder_cap`, leaving < 1e-12 probability mass
    /// outside the enumeration for any in-domain `θ`.
    Poisson {
        lambda_max: f64,
        responder_cap: u32,
    },
    /// A single `Bernoulli(θ)` observation per stratum, `θ ∈ [0, 1]`;
    /// every stratum responds.
    Bernoulli { eta: BernoulliEta },
}

/// Leaked Poisson tail mass beyond `cap` must stay below this bound.
const POISSON_LEAK_BOUND: f64 = 1e-12;

fn poisson_tail_above(lambda: f64, cap: u32) -> f64 {
    let mut term = (-lambda).exp();
    let mut cdf = term;
    for k in 1..=cap {
        term *= lambda / k as f64;
        cdf += term;
    }
    (1.0 - cdf).max(0.0)
}

impl ModelSpec {
    pub fn binomial(attempts: u32) -> Result<Self, ModelError> {
        if attempts == 0 {
            return Err(ModelError::OutOfDomain {
                family: "binomial",
                detail: "attempts must be at least 1".into(),
            });
        }
        Ok(ModelSpec::Binomial { attempts })
    }

    pub fn geometric(max_attempts: u32, categories: u32) -> Result<Self, ModelError> {
        if max_attempts == 0 {
            return Err(ModelError::OutOfDomain {
                family: "geometric",
                detail: "max_attempts must be at least 1".into(),
            });
        }
        if categories < 2 {
            return Err(ModelError::OutOfDomain {
                family: "geometric",
                detail: "need at least 2 answer categories".into(),
            });
        }
        Ok(ModelSpec::Geometric {
            max_attempts,
            categories,
        })
    }

    /// Builds a Poisson spec, sizing the responder cap so that the mass left
    /// outside the enumerated outcome space is below 1e-12 for every
    /// `λ ≤ lambda_max`.
    pub fn poisson(lambda_max: f64) -> Result<Self, ModelError> {
        if !(lambda_max.is_finite() && lambda_max > 0.0) {
            return Err(ModelError::OutOfDomain {
                family: "poisson",
                detail: format!("lambda_max must be positive and finite, got {lambda_max}"),
            });
        }
        let mut cap = (lambda_max + 10.0 * lambda_max.sqrt()).ceil() as u32;
        // The Gaussian-style cap leaks more than allowed for small rates;
        // extend until the tail is clear of the bound with margin.
        while poisson_tail_above(lambda_max, cap) >= POISSON_LEAK_BOUND / 10.0 {
            cap += 1;
        }
        assert!(
            poisson_tail_above(lambda_max, cap) < POISSON_LEAK_BOUND,
            "poisson responder cap does not meet the leak bound"
        );
        Ok(ModelSpec::Poisson {
            lambda_max,
            responder_cap: cap,
        })
    }

    pub fn bernoulli(eta: BernoulliEta) -> Self {
        ModelSpec::Bernoulli { eta }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            ModelSpec::Binomial { .. } => "binomial",
            ModelSpec::Geometric { .. } => "geometric",
            ModelSpec::Poisson { .. } => "poisson",
            ModelSpec::Bernoulli { .. } => "bernoulli",
        }
    }

    /// Dimension of `η(θ)` and `h(y)`.
    pub fn eta_dim(&self) -> usize {
        match self {
            ModelSpec::Geometric { categories, .. } => *categories as usize,
            _ => 1,
        }
    }

    /// Number of parameter coordinates in a `ThetaPoint` for this family.
    pub fn theta_dim(&self) -> usize {
        match self {
            ModelSpec::Binomial { .. } | ModelSpec::Poisson { .. } => 2,
            ModelSpec::Geometric { categories, .. } => 1 + *categories as usize,
            ModelSpec::Bernoulli { .. } => 1,
        }
    }

    pub fn validate_theta(&self, theta: &ThetaPoint) -> Result<(), ModelError> {
        let family = self.family_name();
        let c = theta.coords();
        if c.len() != self.theta_dim() {
            return Err(ModelError::OutOfDomain {
                family,
                detail: format!("expected {} coordinates, got {}", self.theta_dim(), c.len()),
            });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::OutOfDomain {
                family,
                detail: "non-finite coordinate".into(),
            });
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            ModelSpec::Binomial { .. } => {
                if !unit(c[0]) || !unit(c[1]) {
                    return Err(ModelError::OutOfDomain {
                        family,
                        detail: format!("(π, p) = ({}, {}) outside [0,1]²", c[0], c[1]),
                    });
                }
            }
            ModelSpec::Geometric { .. } => {
                if !unit(c[0]) || c[1..].iter().any(|&p| !unit(p)) {
                    return Err(ModelError::OutOfDomain {
                        family,
                        detail: "coordinates outside [0,1]".into(),
                    });
                }
                let total: f64 = c[1..].iter().sum();
                if (total - 1.0).abs() > SIMPLEX_TOL {
                    return Err(ModelError::OutOfDomain {
                        family,
                        detail: format!("category probabilities sum to {total}, not 1"),
                    });
                }
            }
            ModelSpec::Poisson { lambda_max, .. } => {
                if !(c[0] > 0.0 && c[0] <= *lambda_max) {
                    return Err(ModelError::OutOfDomain {
                        family,
                        detail: format!("λ = {} outside (0, {lambda_max}]", c[0]),
                    });
                }
                if !unit(c[1]) {
                    return Err(ModelError::OutOfDomain {
                        family,
                        detail: format!("p = {} outside [0,1]", c[1]),
                    });
                }
            }
            ModelSpec::Bernoulli { .. } => {
                if !unit(c[0]) {
                    return Err(ModelError::OutOfDomain {
                        family,
                        detail: format!("θ = {} outside [0,1]", c[0]),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn validate_outcome(&self, outcome: &Outcome) -> Result<(), ModelError> {
        let family = self.family_name();
        let bad = |detail: String| ModelError::MalformedOutcome {
            family,
            outcome: *outcome,
            detail,
        };
        match (self, outcome) {
            (ModelSpec::Binomial { attempts }, Outcome::Counts { successes, responders }) => {
                if *responders == 0 || responders > attempts {
                    Err(bad(format!("responders must lie in 1..={attempts}")))
                } else if successes > responders {
                    Err(bad("successes exceed responders".into()))
                } else {
                    Ok(())
                }
            }
            (ModelSpec::Binomial { .. }, Outcome::Nonresponse) => Ok(()),
            (
                ModelSpec::Geometric {
                    max_attempts,
                    categories,
                },
                Outcome::Attempt { category, attempt },
            ) => {
                if *category == 0 || category > categories {
                    Err(bad(format!("category must lie in 1..={categories}")))
                } else if *attempt == 0 || attempt > max_attempts {
                    Err(bad(format!("attempt must lie in 1..={max_attempts}")))
                } else {
                    Ok(())
                }
            }
            (ModelSpec::Geometric { .. }, Outcome::Nonresponse) => Ok(()),
            (ModelSpec::Poisson { .. }, Outcome::Counts { successes, responders }) => {
                if *responders == 0 {
                    Err(bad("responders must be at least 1".into()))
                } else if successes > responders {
                    Err(bad("successes exceed responders".into()))
                } else {
                    Ok(())
                }
            }
            (ModelSpec::Poisson { .. }, Outcome::Nonresponse) => Ok(()),
            (ModelSpec::Bernoulli { .. }, Outcome::Bit { value }) => {
                if *value > 1 {
                    Err(bad("bit outcomes must be 0 or 1".into()))
                } else {
                    Ok(())
                }
            }
            (ModelSpec::Bernoulli { .. }, Outcome::Nonresponse) => {
                Err(bad("the bernoulli family has no nonresponse arm".into()))
            }
            _ => Err(bad("outcome variant does not match the family".into())),
        }
    }

    /// All outcomes of the family in canonical order: response outcomes first
    /// (lexicographic in their payload), then `Nonresponse` (absent for the
    /// Bernoulli family). For the Poisson family responders are capped at
    /// `responder_cap`.
    pub fn enumerate_outcomes(&self) -> Vec<Outcome> {
        let mut out = Vec::new();
        match self {
            ModelSpec::Binomial { attempts } => {
                for responders in 1..=*attempts {
                    for successes in 0..=responders {
                        out.push(Outcome::Counts {
                            successes,
                            responders,
                        });
                    }
                }
                out.push(Outcome::Nonresponse);
            }
            ModelSpec::Geometric {
                max_attempts,
                categories,
            } => {
                for attempt in 1..=*max_attempts {
                    for category in 1..=*categories {
                        out.push(Outcome::Attempt { category, attempt });
                    }
                }
                out.push(Outcome::Nonresponse);
            }
            ModelSpec::Poisson { responder_cap, .. } => {
                for responders in 1..=*responder_cap {
                    for successes in 0..=responders {
                        out.push(Outcome::Counts {
                            successes,
                            responders,
                        });
                    }
                }
                out.push(Outcome::Nonresponse);
            }
            ModelSpec::Bernoulli { .. } => {
                out.push(Outcome::Bit { value: 0 });
                out.push(Outcome::Bit { value: 1 });
            }
        }
        out
    }

    /// `P(response | θ)`, i.e. the mass of the response region.
    pub fn response_prob(&self, theta: &ThetaPoint) -> Result<f64, ModelError> {
        self.validate_theta(theta)?;
        let c = theta.coords();
        Ok(match self {
            ModelSpec::Binomial { attempts } => 1.0 - (1.0 - c[0]).powi(*attempts as i32),
            ModelSpec::Geometric { max_attempts, .. } => {
                1.0 - (1.0 - c[0]).powi(*max_attempts as i32)
            }
            ModelSpec::Poisson { .. } => 1.0 - (-c[0]).exp(),
            ModelSpec::Bernoulli { .. } => 1.0,
        })
    }

    /// Probability of `outcome` under `θ` in the censored regime, where
    /// nonresponse is observed as such and carries the whole mass of the
    /// nonresponse region.
    pub fn outcome_prob_censored(
        &self,
        theta: &ThetaPoint,
        outcome: &Outcome,
    ) -> Result<f64, ModelError> {
        self.validate_theta(theta)?;
        self.validate_outcome(outcome)?;
        let c = theta.coords();
        Ok(match (self, outcome) {
            (ModelSpec::Binomial { attempts }, Outcome::Counts { successes, responders }) => {
                let (pi, p) = (c[0], c[1]);
                binomial_pmf(*attempts, *responders, pi) * binomial_pmf(*responders, *successes, p)
            }
            (ModelSpec::Binomial { attempts }, Outcome::Nonresponse) => {
                (1.0 - c[0]).powi(*attempts as i32)
            }
            (ModelSpec::Geometric { .. }, Outcome::Attempt { category, attempt }) => {
                let pi = c[0];
                pi * (1.0 - pi).powi(*attempt as i32 - 1) * c[*category as usize]
            }
            (ModelSpec::Geometric { max_attempts, .. }, Outcome::Nonresponse) => {
                (1.0 - c[0]).powi(*max_attempts as i32)
            }
            (ModelSpec::Poisson { .. }, Outcome::Counts { successes, responders }) => {
                let (lambda, p) = (c[0], c[1]);
                poisson_pmf(lambda, *responders) * binomial_pmf(*responders, *successes, p)
            }
            (ModelSpec::Poisson { .. }, Outcome::Nonresponse) => (-c[0]).exp(),
            (ModelSpec::Bernoulli { .. }, Outcome::Bit { value }) => {
                if *value == 1 {
                    c[0]
                } else {
                    1.0 - c[0]
                }
            }
            _ => unreachable!("validate_outcome admits only matching variants"),
        })
    }

    /// Probability of a response outcome under `θ` conditional on response,
    /// i.e. the censored probability renormalised to the response region.
    pub fn outcome_prob_truncated(
        &self,
        theta: &ThetaPoint,
        outcome: &Outcome,
    ) -> Result<f64, ModelError> {
        if !outcome.is_response() {
            return Err(ModelError::ResponseRequired);
        }
        let numer = self.outcome_prob_censored(theta, outcome)?;
        let resp = self.response_prob(theta)?;
        if resp <= 0.0 {
            return Err(ModelError::SingularParameter {
                detail: format!("θ = {:?}", theta.coords()),
            });
        }
        Ok(numer / resp)
    }

    /// The estimand `η(θ)`, as a vector of length [`eta_dim`](Self::eta_dim).
    pub fn eta(&self, theta: &ThetaPoint) -> Result<Vec<f64>, ModelError> {
        self.validate_theta(theta)?;
        let c = theta.coords();
        Ok(match self {
            ModelSpec::Binomial { .. } | ModelSpec::Poisson { .. } => vec![c[1]],
            ModelSpec::Geometric { .. } => c[1..].to_vec(),
            ModelSpec::Bernoulli { eta } => match eta {
                BernoulliEta::Identity => vec![c[0]],
                BernoulliEta::Square => vec![c[0] * c[0]],
            },
        })
    }

    /// The response summary `h(y)` satisfying `E[h | response, θ] = η(θ)`.
    ///
    /// Fails for [`BernoulliEta::Square`]: no such summary exists for `θ²`.
    pub fn h_value(&self, outcome: &Outcome) -> Result<Vec<f64>, ModelError> {
        if !outcome.is_response() {
            return Err(ModelError::ResponseRequired);
        }
        self.validate_outcome(outcome)?;
        match (self, outcome) {
            (
                ModelSpec::Binomial { .. } | ModelSpec::Poisson { .. },
                Outcome::Counts { successes, responders },
            ) => Ok(vec![f64::from(*successes) / f64::from(*responders)]),
            (ModelSpec::Geometric { categories, .. }, Outcome::Attempt { category, .. }) => {
                let mut v = vec![0.0; *categories as usize];
                v[*category as usize - 1] = 1.0;
                Ok(v)
            }
            (ModelSpec::Bernoulli { eta }, Outcome::Bit { value }) => match eta {
                BernoulliEta::Identity => Ok(vec![f64::from(*value)]),
                BernoulliEta::Square => Err(ModelError::UnsupportedEta {
                    detail: "η(θ) = θ² under Bernoulli sampling".into(),
                }),
            },
            _ => unreachable!("validate_outcome admits only matching variants"),
        }
    }
}

/// `C(n, k) p^k (1-p)^(n-k)`. Uses `powi`, so `0^0 = 1` holds at the
/// boundary values of `p`.
fn binomial_pmf(n: u32, k: u32, p: f64) -> f64 {
    binomial_coefficient(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

fn binomial_coefficient(n: u32, k: u32) -> f64 {
    let k = k.min(n - k.min(n));
    let mut acc = 1.0;
    for i in 1..=k {
        acc *= f64::from(n - k + i) / f64::from(i);
    }
    acc
}

fn poisson_pmf(lambda: f64, k: u32) -> f64 {
    let mut t = (-lambda).exp();
    for i in 1..=k {
        t *= lambda / f64::from(i);
    }
    t
}
