//! Value functions of the three risk perception models.
//!
//! A value function maps a random cost (a [`DiscreteCost`]) to a scalar
//! perceived risk. ER is the expectation, CVaR the expectation of the upper
//! tail, CPT a rank-dependent expectation of `v(c) = λ c^γ` under decision
//! weights built from `w(p) = exp(-β(-ln p)^α)`.
//!
//! Besides the lottery forms, this module carries the closed forms used for
//! truncated-Gaussian costs and their partial derivatives with respect to the
//! cost mean `c_mu` and spread `c_sigma`, which drive the barrier gradient.

use alloc::vec::Vec;

use crate::distributions::{check_moments, std_normal_pdf, std_normal_quantile, DiscreteCost, GaussianGrid, PROBABILITY_SUM_TOL, TRUNCATION};
use crate::{Error, Result};

/// CPT parameters `θ = {α, β, γ, λ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CptParams {
    /// Probability-weighting curvature, `> 0`.
    pub alpha: f64,
    /// Probability-weighting elevation, `> 0`.
    pub beta: f64,
    /// Risk sensitivity, in `[0, 1]`.
    pub gamma: f64,
    /// Risk aversion, `>= 1`.
    pub lambda: f64,
}

impl CptParams {
    /// `θ = (1, 1, 1, 1)`, for which CPT coincides with ER.
    pub const NEUTRAL: CptParams = CptParams {
        alpha: 1.0,
        beta: 1.0,
        gamma: 1.0,
        lambda: 1.0,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        let params = CptParams {
            alpha,
            beta,
            gamma,
            lambda,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", self.alpha, "a finite value > 0"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param("beta", self.beta, "a finite value > 0"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::param("gamma", self.gamma, "a value in [0, 1]"));
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return Err(Error::param("lambda", self.lambda, "a finite value >= 1"));
        }
        Ok(())
    }
}

/// The model parameter: which value function, with which parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "model", rename_all = "lowercase"))]
pub enum RiskSpec {
    Er,
    Cvar { q: f64 },
    Cpt(CptParams),
}

impl RiskSpec {
    pub fn cvar(q: f64) -> Result<Self> {
        let spec = RiskSpec::Cvar { q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn cpt(alpha: f64, beta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        CptParams::new(alpha, beta, gamma, lambda).map(RiskSpec::Cpt)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RiskSpec::Er => Ok(()),
            RiskSpec::Cvar { q } if (0.0..=1.0).contains(q) => Ok(()),
            RiskSpec::Cvar { q } => Err(Error::param("q", *q, "a value in [0, 1]")),
            RiskSpec::Cpt(params) => params.validate(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            RiskSpec::Er => ModelKind::Er,
            RiskSpec::Cvar { .. } => ModelKind::Cvar,
            RiskSpec::Cpt(_) => ModelKind::Cpt,
        }
    }
}

/// The three model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ModelKind {
    Er,
    Cvar,
    Cpt,
}

/// Denominator used by the Gaussian CVaR closed form.
///
/// `LowerTail` evaluates `c_mu + c_sigma·φ(Φ⁻¹(q))/q`, the form the barrier
/// constants are derived from. `UpperTail` evaluates the textbook
/// `c_mu + c_sigma·φ(Φ⁻¹(q))/(1-q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CvarConvention {
    #[default]
    LowerTail,
    #[cfg_attr(feature = "serde", serde(alias = "rockafellar"))]
    UpperTail,
}

/// Partial derivatives of a value function with respect to the cost
/// moments.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RiskPartials {
    /// `∂R/∂c_mu`
    pub d_mu: f64,
    /// `∂R/∂c_sigma`
    pub d_sigma: f64,
}

/// CPT utility `v(c) = λ c^γ`, with `v(0) = 0`.
#[inline]
pub fn utility(c: f64, gamma: f64, lambda: f64) -> f64 {
    if c <= 0.0 {
        0.0
    } else {
        lambda * libm::pow(c, gamma)
    }
}

/// Probability weighting `w(p) = exp(-β(-ln p)^α)` with `w(0) = 0`.
#[inline]
pub fn prob_weight(p: f64, alpha: f64, beta: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if p >= 1.0 {
        1.0
    } else {
        libm::exp(-beta * libm::pow(-libm::log(p), alpha))
    }
}

/// CPT decision weights `Π_j = w(S_j) - w(S_{j+1})`, where
/// `S_j = Σ_{i≥j} p_i` is the probability of doing at least as badly as
/// outcome `j` (outcomes ranked ascending) and `S_{M+1} = 0`.
pub fn decision_weights(probabilities: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let m = probabilities.len();
    let mut weights = alloc::vec![0.0; m];
    let mut tail = 0.0;
    let mut w_above = 0.0;
    for j in (0..m).rev() {
        tail += probabilities[j];
        // w is steep at 1 when α < 1, so a rounding residue in the full sum
        // would leak into the lowest weight.
        if j == 0 && (tail - 1.0).abs() <= PROBABILITY_SUM_TOL {
            tail = 1.0;
        }
        let w_here = prob_weight(tail, alpha, beta);
        weights[j] = w_here - w_above;
        w_above = w_here;
    }
    weights
}

/// Expected risk `Σ c_i p_i`.
pub fn er_value(cost: &DiscreteCost) -> f64 {
    cost.iter().map(|(c, p)| c * p).sum()
}

/// Discrete CVaR: `E[c | c ≥ d*]` with `d* = min {d : P(c ≤ d) ≥ q}`.
///
/// `q = 0` gives the expectation, `q = 1` the largest outcome in the
/// support.
pub fn cvar_value(cost: &DiscreteCost, q: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q), "q = {q}");
    if q >= 1.0 {
        return cost.max_outcome();
    }
    let outcomes = cost.outcomes();
    let probabilities = cost.probabilities();
    let mut cumulative = 0.0;
    let mut threshold = outcomes[outcomes.len() - 1];
    for (c, p) in cost.iter() {
        cumulative += p;
        if cumulative >= q {
            threshold = c;
            break;
        }
    }
    // Accumulate from the top so a larger tail extends the same partial
    // sums; this keeps the result monotone in q to the last bit.
    let (mut num, mut den) = (0.0, 0.0);
    for k in (0..outcomes.len()).rev() {
        if outcomes[k] < threshold {
            break;
        }
        num += outcomes[k] * probabilities[k];
        den += probabilities[k];
    }
    if den > 0.0 {
        // The quotient can land an ulp outside the tail's range.
        (num / den).clamp(threshold, cost.max_outcome().max(threshold))
    } else {
        threshold
    }
}

/// Coefficient `k^v_σ = ∂R/∂c_sigma` of the Gaussian CVaR closed form.
pub fn cvar_sigma_coefficient(q: f64, convention: CvarConvention) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param("q", q, "a value in [0, 1]"));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(TRUNCATION);
    }
    let density = std_normal_pdf(std_normal_quantile(q)?);
    Ok(match convention {
        CvarConvention::LowerTail => density / q,
        CvarConvention::UpperTail => density / (1.0 - q),
    })
}

/// Gaussian CVaR `c_mu + c_sigma·k^v_σ(q)`.
///
/// `q = 0` returns `c_mu` and `q = 1` the upper truncation bound
/// `c_mu + 3c_sigma`.
pub fn cvar_gaussian_closed_form(c_mu: f64, c_sigma: f64, q: f64, convention: CvarConvention) -> Result<f64> {
    Ok(c_mu + c_sigma * cvar_sigma_coefficient(q, convention)?)
}

/// CPT value `Σ_j v(c_j) Π_j` of a lottery.
pub fn cpt_value(cost: &DiscreteCost, theta: &CptParams) -> f64 {
    let weights = decision_weights(cost.probabilities(), theta.alpha, theta.beta);
    cost.outcomes()
        .iter()
        .zip(&weights)
        .map(|(c, w)| utility(*c, theta.gamma, theta.lambda) * w)
        .sum()
}

/// CPT evaluation for truncated-Gaussian costs with the decision weights
/// computed once.
///
/// The lottery probabilities do not depend on `(c_mu, c_sigma)`, so the
/// decision weights are shared by every point of a field. Sums run over the
/// descending grid `c_mu + c_sigma(3 - 6i/M)`, `i = 1..M`.
#[derive(Debug, Clone)]
pub struct CptKernel {
    theta: CptParams,
    /// `3 - 6i/M` for `i = 1..M`.
    offsets: Vec<f64>,
    /// Decision weight attached to `offsets[i]`.
    weights: Vec<f64>,
}

impl CptKernel {
    pub fn new(theta: CptParams, m: usize) -> Result<Self> {
        theta.validate()?;
        let grid = GaussianGrid::new(m)?;
        Ok(Self::from_grid(theta, &grid))
    }

    pub fn from_grid(theta: CptParams, grid: &GaussianGrid) -> Self {
        let m = grid.len();
        let ascending = decision_weights(grid.probabilities(), theta.alpha, theta.beta);
        let offsets = (1..=m)
            .map(|i| TRUNCATION - 2.0 * TRUNCATION * i as f64 / m as f64)
            .collect();
        let weights = (1..=m).map(|i| ascending[m - i]).collect();
        CptKernel {
            theta,
            offsets,
            weights,
        }
    }

    pub fn theta(&self) -> &CptParams {
        &self.theta
    }

    /// Decision weights in descending-outcome order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn value(&self, c_mu: f64, c_sigma: f64) -> f64 {
        let CptParams { gamma, lambda, .. } = self.theta;
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| utility((c_mu + c_sigma * z).max(0.0), gamma, lambda) * w)
            .sum()
    }

    /// `k^c_mu` and `k^c_sigma`, with the decision weights held fixed.
    pub fn partials(&self, c_mu: f64, c_sigma: f64) -> Result<RiskPartials> {
        let CptParams { gamma, lambda, .. } = self.theta;
        let (mut d_mu, mut d_sigma) = (0.0, 0.0);
        for (z, w) in self.offsets.iter().zip(&self.weights) {
            let c = c_mu + c_sigma * z;
            let slope = if gamma == 1.0 {
                // Clamped grid points do not move with the moments.
                if c < 0.0 {
                    0.0
                } else {
                    1.0
                }
            } else if c > 0.0 {
                gamma * libm::pow(c, gamma - 1.0)
            } else {
                return Err(Error::SingularPartial { grid_value: c, gamma });
            };
            d_mu += slope * w;
            d_sigma += z * slope * w;
        }
        Ok(RiskPartials {
            d_mu: lambda * d_mu,
            d_sigma: lambda * d_sigma,
        })
    }
}

/// CPT value of a truncated-Gaussian cost, summed directly over the grid
/// `λ(c_mu + c_sigma(3 - 6i/M))^γ Π_i`.
pub fn cpt_closed_form(c_mu: f64, c_sigma: f64, theta: &CptParams, m: usize) -> Result<f64> {
    check_moments(c_mu, c_sigma)?;
    Ok(CptKernel::new(*theta, m)?.value(c_mu, c_sigma))
}

/// Partial derivatives of the closed-form value functions.
///
/// ER is `(1, 0)`; CVaR is `(1, k^v_σ)`; CPT follows the grid sums with the
/// decision weights held constant.
pub fn partials(
    spec: &RiskSpec,
    c_mu: f64,
    c_sigma: f64,
    m: usize,
    convention: CvarConvention,
) -> Result<RiskPartials> {
    check_moments(c_mu, c_sigma)?;
    match spec {
        RiskSpec::Er => Ok(RiskPartials {
            d_mu: 1.0,
            d_sigma: 0.0,
        }),
        RiskSpec::Cvar { q } => Ok(RiskPartials {
            d_mu: 1.0,
            d_sigma: cvar_sigma_coefficient(*q, convention)?,
        }),
        RiskSpec::Cpt(theta) => CptKernel::new(*theta, m)?.partials(c_mu, c_sigma),
    }
}

/// A risk spec bound to a discretization size and CVaR convention, with the
/// CPT decision weights precomputed.
#[derive(Debug, Clone)]
pub struct RiskEvaluator {
    spec: RiskSpec,
    convention: CvarConvention,
    grid: GaussianGrid,
    kernel: Option<CptKernel>,
    cvar_coefficient: f64,
}

impl RiskEvaluator {
    pub fn new(spec: RiskSpec, m: usize, convention: CvarConvention) -> Result<Self> {
        spec.validate()?;
        let grid = GaussianGrid::new(m)?;
        let kernel = match spec {
            RiskSpec::Cpt(theta) => Some(CptKernel::from_grid(theta, &grid)),
            _ => None,
        };
        let cvar_coefficient = match spec {
            RiskSpec::Cvar { q } => cvar_sigma_coefficient(q, convention)?,
            _ => 0.0,
        };
        Ok(RiskEvaluator {
            spec,
            convention,
            grid,
            kernel,
            cvar_coefficient,
        })
    }

    pub fn spec(&self) -> &RiskSpec {
        &self.spec
    }

    pub fn convention(&self) -> CvarConvention {
        self.convention
    }

    pub fn grid(&self) -> &GaussianGrid {
        &self.grid
    }

    /// Closed-form perceived risk: `c_mu` for ER, the Gaussian CVaR formula,
    /// and the grid sum for CPT.
    pub fn value(&self, c_mu: f64, c_sigma: f64) -> f64 {
        match (&self.spec, &self.kernel) {
            (RiskSpec::Cpt(_), Some(kernel)) => kernel.value(c_mu, c_sigma),
            (RiskSpec::Cvar { .. }, _) => c_mu + c_sigma * self.cvar_coefficient,
            _ => c_mu,
        }
    }

    /// Perceived risk evaluated on the discretized lottery with the
    /// definitional value functions.
    pub fn lottery_value(&self, c_mu: f64, c_sigma: f64) -> Result<f64> {
        let cost = self.grid.lottery(c_mu, c_sigma)?;
        Ok(match &self.spec {
            RiskSpec::Er => er_value(&cost),
            RiskSpec::Cvar { q } => cvar_value(&cost, *q),
            RiskSpec::Cpt(theta) => cpt_value(&cost, theta),
        })
    }

    pub fn partials(&self, c_mu: f64, c_sigma: f64) -> Result<RiskPartials> {
        match (&self.spec, &self.kernel) {
            (RiskSpec::Cpt(_), Some(kernel)) => kernel.partials(c_mu, c_sigma),
            (RiskSpec::Cvar { .. }, _) => Ok(RiskPartials {
                d_mu: 1.0,
                d_sigma: self.cvar_coefficient,
            }),
            _ => Ok(RiskPartials {
                d_mu: 1.0,
                d_sigma: 0.0,
            }),
        }
    }
}
