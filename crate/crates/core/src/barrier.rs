//! Perceived-risk control barrier function `h = ρ − R_c(ξ)` and the safety
//! filter built on it.
//!
//! `η₂` is the identity and `η₁(s) = gain·s`, so the barrier condition
//! `ḣ ≥ −η₁(h)` is a single affine constraint on the control and the filter
//! is a closed-form halfspace projection.

use alloc::vec::Vec;

use crate::field::{CostFieldParams, RiskField};
use crate::risk::{CvarConvention, RiskSpec};
use crate::{Error, Mat2, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BarrierConfig {
    /// Risk tolerance, in cost units.
    pub rho: f64,
    pub eta1_gain: f64,
}

impl BarrierConfig {
    pub fn new(rho: f64, eta1_gain: f64) -> Result<Self> {
        let config = Self { rho, eta1_gain };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::param("rho", self.rho, "finite and > 0"));
        }
        if !(self.eta1_gain.is_finite() && self.eta1_gain > 0.0) {
            return Err(Error::param("eta1_gain", self.eta1_gain, "finite and > 0"));
        }
        Ok(())
    }

    pub fn eta1(&self, s: f64) -> f64 {
        self.eta1_gain * s
    }
}

/// The halfspace `a·u ≥ b` in control space.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AffineConstraint {
    pub a: Vec2,
    pub b: f64,
}

impl AffineConstraint {
    pub fn slack(&self, u: Vec2) -> f64 {
        self.a.dot(u) - self.b
    }

    pub fn is_satisfied(&self, u: Vec2) -> bool {
        self.slack(u) >= 0.0
    }
}

/// Everything the constraint needs at one instant: agent state `x` with
/// dynamics `ẋ = f + G·u`, obstacle position `y` and velocity `f_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateContext {
    pub x: Vec2,
    pub y: Vec2,
    pub f: Vec2,
    pub g: Mat2,
    pub f_y: Vec2,
}

impl StateContext {
    /// Single integrator `ẋ = u` next to an obstacle moving at `f_y`.
    pub fn single_integrator(x: Vec2, y: Vec2, f_y: Vec2) -> Self {
        Self { x, y, f: Vec2::ZERO, g: Mat2::IDENTITY, f_y }
    }

    pub fn xi(&self) -> Vec2 {
        self.y - self.x
    }

    /// `ξ̇ = f_y − f − G·u`.
    pub fn xi_dot(&self, u: Vec2) -> Vec2 {
        self.f_y - self.f - self.g.mul_vec(u)
    }
}

/// A perceived-risk field paired with its barrier settings.
#[derive(Debug, Clone)]
pub struct Barrier {
    field: RiskField,
    config: BarrierConfig,
}

impl Barrier {
    pub fn new(spec: RiskSpec, params: CostFieldParams, config: BarrierConfig) -> Result<Self> {
        Self::with_convention(spec, params, config, CvarConvention::default())
    }

    pub fn with_convention(
        spec: RiskSpec,
        params: CostFieldParams,
        config: BarrierConfig,
        convention: CvarConvention,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self { field: RiskField::new(spec, params, convention)?, config })
    }

    pub fn field(&self) -> &RiskField {
        &self.field
    }

    pub fn config(&self) -> &BarrierConfig {
        &self.config
    }

    /// `h(ξ) = ρ − R_c(ξ)`; positive exactly where the state is perceived
    /// safe.
    pub fn value(&self, xi: Vec2) -> f64 {
        self.config.rho - self.field.value(xi)
    }

    /// `a = Gᵀ·g`, `b = −η₁(h) + g·(f_y − f)` with `g = ∂R_c/∂ξ`, so that
    /// `a·u ≥ b` is `ḣ ≥ −η₁(h)`.
    pub fn constraint(&self, ctx: &StateContext) -> Result<AffineConstraint> {
        let xi = ctx.xi();
        let g = self.field.gradient(xi)?;
        let h = self.value(xi);
        Ok(AffineConstraint { a: ctx.g.transpose().mul_vec(g), b: -self.config.eta1(h) + g.dot(ctx.f_y - ctx.f) })
    }

    /// `ḣ` along the closed loop with control `u`.
    pub fn h_dot(&self, ctx: &StateContext, u: Vec2) -> Result<f64> {
        let g = self.field.gradient(ctx.xi())?;
        Ok(-g.dot(ctx.xi_dot(u)))
    }

    /// Separated form of the barrier condition: the component of `ξ̇`
    /// along `∂h/∂ξ` against `−η₁(h)/‖∂R_c/∂ξ‖`.
    pub fn feasibility_margin(&self, ctx: &StateContext, u: Vec2) -> Result<FeasibilityMargin> {
        let xi = ctx.xi();
        let partials = self.field.partials(xi)?;
        let g = self.field.gradient(xi)?;
        let h = self.value(xi);
        let k = self.config.eta1(h);
        let xi_dot = ctx.xi_dot(u);
        let grad_norm = g.norm();
        let speed = xi_dot.norm();
        let (lhs, rhs, eta, feasible) = if grad_norm > 0.0 {
            let lhs = -g.dot(xi_dot) / grad_norm;
            let eta = k / grad_norm;
            (lhs, -eta, eta, lhs >= -eta)
        } else {
            // ḣ vanishes identically; the condition reduces to h ≥ 0.
            (0.0, -k, f64::INFINITY, k >= 0.0)
        };
        Ok(FeasibilityMargin {
            h,
            k,
            k_mu: partials.d_mu,
            k_sigma: partials.d_sigma,
            grad_norm,
            eta,
            lhs,
            rhs,
            angle_defined: grad_norm > 0.0 && speed > 0.0,
            feasible,
        })
    }
}

/// Per-state breakdown of the barrier condition for one model.
///
/// `k = η₁(h)`; `k_mu`, `k_sigma` are `∂R/∂c_mu`, `∂R/∂c_sigma`;
/// `eta = k/‖k_mu·c_mu′ + k_sigma·c_sigma′‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeasibilityMargin {
    pub h: f64,
    pub k: f64,
    pub k_mu: f64,
    pub k_sigma: f64,
    pub grad_norm: f64,
    pub eta: f64,
    /// `‖ξ̇‖·cos φ`.
    pub lhs: f64,
    pub rhs: f64,
    pub angle_defined: bool,
    pub feasible: bool,
}

/// Minimum-norm correction of `k_nominal` onto `a·u ≥ b`.
pub fn qp_filter(k_nominal: Vec2, c: &AffineConstraint) -> Result<Vec2> {
    let slack = c.slack(k_nominal);
    if slack >= 0.0 {
        return Ok(k_nominal);
    }
    let a2 = c.a.norm_squared();
    if a2 == 0.0 {
        return Err(Error::Infeasible { b: c.b });
    }
    Ok(k_nominal + c.a * (-slack / a2))
}

/// The barrier value and constraint of the worst obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composed {
    pub index: usize,
    pub h: f64,
    pub constraint: AffineConstraint,
}

/// Picks the obstacle with the smallest barrier value, lowest index on
/// ties. `None` for an empty list.
pub fn min_compose(items: &[(f64, AffineConstraint)]) -> Option<Composed> {
    let mut best: Option<Composed> = None;
    for (index, &(h, constraint)) in items.iter().enumerate() {
        if best.is_none_or(|b| h < b.h) {
            best = Some(Composed { index, h, constraint });
        }
    }
    best
}

/// Sample-wise view of the admissible control sets at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSetProbe {
    pub specs: Vec<RiskSpec>,
    /// `feasible[s][n]`: sample `n` satisfies the constraint of spec `s`.
    pub feasible: Vec<Vec<bool>>,
    pub eta: Vec<f64>,
}

impl ControlSetProbe {
    pub fn counts(&self) -> Vec<usize> {
        self.feasible.iter().map(|f| f.iter().filter(|&&x| x).count()).collect()
    }

    /// Whether every sample feasible for spec `i` is feasible for spec `j`.
    pub fn contained_in(&self, i: usize, j: usize) -> bool {
        self.feasible[i].iter().zip(&self.feasible[j]).all(|(&a, &b)| !a || b)
    }

    /// The member of the given kind with the loosest constraint (largest
    /// `eta`).
    pub fn loosest(&self, kind: crate::risk::ModelKind) -> Option<usize> {
        (0..self.specs.len())
            .filter(|&s| self.specs[s].kind() == kind)
            .fold(None, |best: Option<usize>, s| match best {
                Some(b) if self.eta[b] >= self.eta[s] => Some(b),
                _ => Some(s),
            })
    }
}

/// Checks each control sample against the constraint of each model.
pub fn control_set_probe(
    specs: &[RiskSpec],
    params: CostFieldParams,
    config: BarrierConfig,
    ctx: &StateContext,
    samples: &[Vec2],
) -> Result<ControlSetProbe> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter { name: "samples", value: 0.0, expected: "at least one control sample" });
    }
    let mut feasible = Vec::with_capacity(specs.len());
    let mut eta = Vec::with_capacity(specs.len());
    for spec in specs {
        let barrier = Barrier::new(*spec, params, config)?;
        let c = barrier.constraint(ctx)?;
        feasible.push(samples.iter().map(|&u| c.is_satisfied(u)).collect());
        eta.push(barrier.feasibility_margin(ctx, Vec2::ZERO)?.eta);
    }
    Ok(ControlSetProbe { specs: specs.to_vec(), feasible, eta })
}
