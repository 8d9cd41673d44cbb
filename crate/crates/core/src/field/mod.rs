//! Spatial cost fields over the relative coordinate `ξ = y - x`, the
//! perceived-risk fields built from them, rasterization, level sets and the
//! empirical inclusiveness/versatility auditors.

mod audit;
mod contour;
mod grid;

pub use self::audit::{
    cost_levels, inclusiveness_audit, versatility_audit, AuditDomain, InclusivenessReport, InclusivenessVerdict, LevelCheck,
    SetRelation, VersatilityReport,
};
pub use self::contour::{level_set, Polyline};
pub use self::grid::{rasterize, safe_mask, Bounds, FieldGrid, Mask};

use crate::distributions::DEFAULT_OUTCOMES;
use crate::risk::{CvarConvention, RiskEvaluator, RiskPartials, RiskSpec};
use crate::{Error, Result, Vec2};

const FRAC_1_2PI: f64 = 0.159_154_943_091_895_35;

/// Constants of the distance-to-endangerment cost
/// `c_mu(ξ) = k1·exp(-k2‖ξ‖²)` and `c_sigma(ξ) = c_mu(r̄)·N(ξ; 0, I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostFieldParams {
    /// Peak cost at the source.
    pub k1: f64,
    /// Decay rate, 1/length².
    pub k2: f64,
    /// Localization radius of the source.
    pub r_bar: f64,
    /// Number of lottery outcomes.
    pub m: usize,
}

impl CostFieldParams {
    pub fn new(k1: f64, k2: f64, r_bar: f64, m: usize) -> Result<Self> {
        let params = CostFieldParams { k1, k2, r_bar, m };
        params.validate()?;
        Ok(params)
    }

    /// `k1 = 200`, `k2 = 0.01` with the given localization radius.
    pub fn standard(r_bar: f64) -> Self {
        CostFieldParams {
            k1: 200.0,
            k2: 0.01,
            r_bar,
            m: DEFAULT_OUTCOMES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::param("k1", self.k1, "a finite value > 0"));
        }
        if !(self.k2 > 0.0 && self.k2.is_finite()) {
            return Err(Error::param("k2", self.k2, "a finite value > 0"));
        }
        if !(self.r_bar >= 0.0 && self.r_bar.is_finite()) {
            return Err(Error::param("r_bar", self.r_bar, "a finite value >= 0"));
        }
        if self.m < 2 {
            return Err(Error::param("m", self.m as f64, "at least 2"));
        }
        Ok(())
    }

    fn mean_at_distance_squared(&self, d2: f64) -> f64 {
        self.k1 * libm::exp(-self.k2 * d2)
    }

    /// `c_mu(r̄)`, the cost at the edge of the localization ball. Used as the
    /// reference risk tolerance `ρ`.
    pub fn reference_threshold(&self) -> f64 {
        self.mean_at_distance_squared(self.r_bar * self.r_bar)
    }

    pub fn cost_mean(&self, xi: Vec2) -> f64 {
        self.mean_at_distance_squared(xi.norm_squared())
    }

    pub fn cost_sigma(&self, xi: Vec2) -> f64 {
        self.reference_threshold() * FRAC_1_2PI * libm::exp(-0.5 * xi.norm_squared())
    }

    /// `(∂c_mu/∂ξ, ∂c_sigma/∂ξ)`.
    pub fn cost_gradients(&self, xi: Vec2) -> (Vec2, Vec2) {
        let grad_mu = xi * (-2.0 * self.k2 * self.cost_mean(xi));
        let grad_sigma = xi * -self.cost_sigma(xi);
        (grad_mu, grad_sigma)
    }
}

/// A perceived-risk field `R_c(ξ) = R(c(ξ))`.
#[derive(Debug, Clone)]
pub struct RiskField {
    params: CostFieldParams,
    evaluator: RiskEvaluator,
}

impl RiskField {
    pub fn new(spec: RiskSpec, params: CostFieldParams, convention: CvarConvention) -> Result<Self> {
        params.validate()?;
        let evaluator = RiskEvaluator::new(spec, params.m, convention)?;
        Ok(RiskField { params, evaluator })
    }

    pub fn spec(&self) -> &RiskSpec {
        self.evaluator.spec()
    }

    pub fn params(&self) -> &CostFieldParams {
        &self.params
    }

    pub fn evaluator(&self) -> &RiskEvaluator {
        &self.evaluator
    }

    /// Moments `(c_mu, c_sigma)` at `ξ`.
    pub fn moments(&self, xi: Vec2) -> (f64, f64) {
        (self.params.cost_mean(xi), self.params.cost_sigma(xi))
    }

    /// Closed-form perceived risk; the route the barrier differentiates.
    pub fn value(&self, xi: Vec2) -> f64 {
        let (mu, sigma) = self.moments(xi);
        self.evaluator.value(mu, sigma)
    }

    /// Perceived risk of the discretized lottery under the definitional
    /// value function.
    pub fn lottery_value(&self, xi: Vec2) -> f64 {
        let (mu, sigma) = self.moments(xi);
        // Moments of this field are finite and non-negative by construction.
        self.evaluator
            .lottery_value(mu, sigma)
            .expect("cost moments are non-negative")
    }

    pub fn partials(&self, xi: Vec2) -> Result<RiskPartials> {
        let (mu, sigma) = self.moments(xi);
        self.evaluator.partials(mu, sigma)
    }

    /// `∂R_c/∂ξ = (∂R/∂c_mu)·∂c_mu/∂ξ + (∂R/∂c_sigma)·∂c_sigma/∂ξ`.
    pub fn gradient(&self, xi: Vec2) -> Result<Vec2> {
        let partials = self.partials(xi)?;
        let (grad_mu, grad_sigma) = self.params.cost_gradients(xi);
        Ok(grad_mu * partials.d_mu + grad_sigma * partials.d_sigma)
    }
}

/// Convenience wrapper: closed-form perceived risk at `ξ`.
pub fn perceived_risk(spec: &RiskSpec, params: &CostFieldParams, xi: Vec2) -> Result<f64> {
    Ok(RiskField::new(*spec, *params, CvarConvention::default())?.value(xi))
}

/// Convenience wrapper: gradient of the closed-form perceived risk at `ξ`.
pub fn risk_gradient(spec: &RiskSpec, params: &CostFieldParams, xi: Vec2) -> Result<Vec2> {
    RiskField::new(*spec, *params, CvarConvention::default())?.gradient(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::CptParams;

    fn params() -> CostFieldParams {
        CostFieldParams::standard(0.5)
    }

    #[test]
    fn cost_mean_values() {
        let p = params();
        assert_eq!(p.cost_mean(Vec2::ZERO), 200.0);
        let v = p.cost_mean(Vec2::new(6.0, 8.0));
        assert!((v - 200.0 * libm::exp(-1.0)).abs() < 1e-12);
        assert!((v - 73.58).abs() < 5e-3);
        assert_eq!(p.cost_mean(Vec2::new(3.0, 4.0)), p.cost_mean(Vec2::new(5.0, 0.0)));
    }

    #[test]
    fn cost_sigma_values() {
        let p = params();
        let peak = p.reference_threshold() / (2.0 * core::f64::consts::PI);
        assert!((p.cost_sigma(Vec2::ZERO) - peak).abs() < 1e-12);
        let oracle = 200.0 * libm::exp(-0.0025) / (2.0 * core::f64::consts::PI) * libm::exp(-0.5);
        assert!((p.cost_sigma(Vec2::new(1.0, 0.0)) - oracle).abs() < 1e-12);
        assert!(p.cost_sigma(Vec2::new(40.0, 0.0)) < 1e-300);
    }

    #[test]
    fn gradients_vanish_at_source_and_point_inward() {
        let p = params();
        let (gm, gs) = p.cost_gradients(Vec2::ZERO);
        assert_eq!((gm, gs), (Vec2::ZERO, Vec2::ZERO));
        let xi = Vec2::new(1.5, -0.7);
        let (gm, gs) = p.cost_gradients(xi);
        assert!(gm.dot(xi) < 0.0 && gs.dot(xi) < 0.0);
    }

    #[test]
    fn er_field_is_the_mean() {
        let field = RiskField::new(RiskSpec::Er, params(), CvarConvention::LowerTail).unwrap();
        let xi = Vec2::new(2.0, 1.0);
        assert_eq!(field.value(xi), params().cost_mean(xi));
        assert_eq!(field.gradient(xi).unwrap(), params().cost_gradients(xi).0);
    }

    #[test]
    fn cpt_field_scales_with_lambda() {
        let one = RiskField::new(RiskSpec::Cpt(CptParams::NEUTRAL), params(), CvarConvention::LowerTail).unwrap();
        let two = RiskField::new(RiskSpec::cpt(1.0, 1.0, 1.0, 2.0).unwrap(), params(), CvarConvention::LowerTail).unwrap();
        for xi in [Vec2::new(0.3, 0.1), Vec2::new(2.0, -1.0), Vec2::new(7.0, 7.0)] {
            let (mu, sigma) = one.moments(xi);
            assert!((one.value(xi) - mu).abs() <= 3.0 * sigma / params().m as f64 + 1e-9);
            assert!((two.value(xi) - 2.0 * one.value(xi)).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_zero_at_source() {
        for spec in [RiskSpec::Er, RiskSpec::Cvar { q: 0.4 }, RiskSpec::cpt(0.74, 1.0, 0.88, 2.0).unwrap()] {
            let field = RiskField::new(spec, params(), CvarConvention::LowerTail).unwrap();
            assert_eq!(field.gradient(Vec2::ZERO).unwrap(), Vec2::ZERO);
        }
    }
}
