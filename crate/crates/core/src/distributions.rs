//! Standard-normal special functions and the M-outcome lottery that stands
//! in for a truncated-Gaussian cost.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Default number of outcomes used when discretizing a cost.
pub const DEFAULT_OUTCOMES: usize = 10;

/// Half-width of the truncation interval, in standard deviations.
pub const TRUNCATION: f64 = 3.0;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Tolerance on `Σ p = 1` accepted by [`DiscreteCost::new`].
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Density of the standard normal distribution.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * z * z)
}

/// Cumulative distribution function of the standard normal distribution.
///
/// Evaluated as `Φ(z) = ½·erfc(-z/√2)`. `erfc` is the msun rational
/// approximation shipped by `libm`, accurate to about one ulp, so the
/// absolute error here is far below `1e-7`. Using `erfc` rather than
/// `1 + erf` keeps full relative precision in the lower tail.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * core::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse of [`std_normal_cdf`].
///
/// Safeguarded Newton iteration on `Φ(z) - p` inside a shrinking bisection
/// bracket, run until the bracket collapses to a few ulps.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", p, "a probability in (0, 1)"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Solve in the lower half and reflect, which keeps the residual
    // meaningful for p close to 1.
    let upper = p > 0.5;
    let target = if upper { 1.0 - p } else { p };
    let (mut lo, mut hi) = (-40.0_f64, 0.0_f64);
    let mut z = -libm::sqrt(-2.0 * libm::log(target));
    for _ in 0..200 {
        let residual = std_normal_cdf(z) - target;
        if residual == 0.0 {
            break;
        }
        if residual > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let density = std_normal_pdf(z);
        let newton = z - residual / density;
        z = if density > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * libm::fabs(z).max(1.0) {
            break;
        }
    }
    Ok(if upper { -z } else { z })
}

/// A discrete random cost: outcomes sorted ascending with their
/// probabilities. Every risk model consumes one of these.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteCost {
    outcomes: Vec<f64>,
    probabilities: Vec<f64>,
    clamped: bool,
}

impl DiscreteCost {
    /// Builds a lottery, checking every invariant.
    pub fn new(outcomes: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if outcomes.len() != probabilities.len() {
            return Err(Error::InvalidLottery("outcome and probability counts differ"));
        }
        if outcomes.len() < 2 {
            return Err(Error::InvalidLottery("at least two outcomes are required"));
        }
        if outcomes.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidLottery("outcomes must be finite and non-negative"));
        }
        if outcomes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidLottery("outcomes must be sorted ascending"));
        }
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidLottery("probabilities must lie in [0, 1]"));
        }
        let total: f64 = probabilities.iter().sum();
        if libm::fabs(total - 1.0) > PROBABILITY_SUM_TOL {
            return Err(Error::InvalidLottery("probabilities must sum to 1"));
        }
        Ok(DiscreteCost {
            outcomes,
            probabilities,
            clamped: false,
        })
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Number of outcomes `M`.
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// True when some grid point fell below zero and was clamped.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    /// Largest outcome carrying positive probability.
    pub fn max_outcome(&self) -> f64 {
        self.outcomes
            .iter()
            .zip(&self.probabilities)
            .rev()
            .find(|(_, p)| **p > 0.0)
            .map(|(c, _)| *c)
            .unwrap_or(self.outcomes[self.outcomes.len() - 1])
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (f64, f64)> + '_ {
        self.outcomes
            .iter()
            .copied()
            .zip(self.probabilities.iter().copied())
    }
}

/// The standardized outcome grid of an `M`-point truncated-Gaussian lottery.
///
/// Offsets are `z_k = -3 + 6(k-1)/M` for `k = 1..M` (the descending grid
/// `3 - 6i/M`, `i = 1..M`, stored ascending). Outcome `k` carries the
/// truncated-Gaussian mass of the cell `[z_k, z_k + 6/M]`, so the top cell
/// ends at the upper truncation bound and the masses sum to one.
///
/// Neither offsets nor masses depend on the mean or spread of the cost,
/// which is why CPT decision weights are constant across a field.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGrid {
    offsets: Vec<f64>,
    probabilities: Vec<f64>,
}

impl GaussianGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::param("M", m as f64, "at least 2 outcomes"));
        }
        let width = 2.0 * TRUNCATION / m as f64;
        let offsets: Vec<f64> = (0..m).map(|k| -TRUNCATION + width * k as f64).collect();
        let mut probabilities: Vec<f64> = (0..m)
            .map(|k| {
                let upper = if k + 1 == m {
                    TRUNCATION
                } else {
                    offsets[k + 1]
                };
                std_normal_cdf(upper) - std_normal_cdf(offsets[k])
            })
            .collect();
        // Analytically the total is Φ(3) - Φ(-3); dividing by the computed
        // sum applies that re-normalization and pins Σ p to 1.
        let total: f64 = probabilities.iter().sum();
        for p in &mut probabilities {
            *p /= total;
        }
        Ok(GaussianGrid {
            offsets,
            probabilities,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Standardized offsets `z_k`, ascending.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Un-clamped outcome values `c_mu + c_sigma·z_k`.
    pub fn raw_outcomes(&self, c_mu: f64, c_sigma: f64) -> impl Iterator<Item = f64> + '_ {
        self.offsets.iter().map(move |z| c_mu + c_sigma * z)
    }

    /// Lottery for a cost with the given mean and spread.
    pub fn lottery(&self, c_mu: f64, c_sigma: f64) -> Result<DiscreteCost> {
        check_moments(c_mu, c_sigma)?;
        let mut clamped = false;
        let outcomes = self
            .raw_outcomes(c_mu, c_sigma)
            .map(|c| {
                if c < 0.0 {
                    clamped = true;
                    0.0
                } else {
                    c
                }
            })
            .collect();
        Ok(DiscreteCost {
            outcomes,
            probabilities: self.probabilities.clone(),
            clamped,
        })
    }
}

pub(crate) fn check_moments(c_mu: f64, c_sigma: f64) -> Result<()> {
    if !(c_mu >= 0.0 && c_mu.is_finite()) {
        return Err(Error::param("c_mu", c_mu, "a finite value >= 0"));
    }
    if !(c_sigma >= 0.0 && c_sigma.is_finite()) {
        return Err(Error::param("c_sigma", c_sigma, "a finite value >= 0"));
    }
    Ok(())
}

/// `M`-outcome lottery approximating a cost distributed as a Gaussian
/// truncated to `[c_mu - 3c_sigma, c_mu + 3c_sigma]`.
///
/// With `c_sigma = 0` every outcome equals `c_mu`, which is the degenerate
/// single-support lottery.
pub fn discretize_truncated_gaussian(c_mu: f64, c_sigma: f64, m: usize) -> Result<DiscreteCost> {
    GaussianGrid::new(m)?.lottery(c_mu, c_sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule, used as an independent oracle for Φ.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + h * i as f64);
        }
        acc * h / 3.0
    }

    fn density(z: f64) -> f64 {
        libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI)
    }

    #[test]
    fn pdf_values() {
        assert!((std_normal_pdf(0.0) - 0.398_942_280_4).abs() < 1e-10);
        assert_eq!(std_normal_pdf(1.0), std_normal_pdf(-1.0));
        assert!((std_normal_pdf(3.0) - 0.004_431_848_4).abs() < 1e-10);
    }

    #[test]
    fn cdf_matches_quadrature() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        // Φ(z) = 0.5 + ∫_0^z φ.
        for &z in &[-4.0, -2.5, -1.0, -0.3, 0.7, 1.0, 2.0, 3.0, 5.0] {
            let (a, b, sgn) = if z >= 0.0 { (0.0, z, 1.0) } else { (z, 0.0, -1.0) };
            let oracle = 0.5 + sgn * simpson(density, a, b, 2000);
            assert!(
                (std_normal_cdf(z) - oracle).abs() < 1e-10,
                "z = {z}: {} vs {oracle}",
                std_normal_cdf(z)
            );
        }
        let oracle_one = 0.5 + simpson(density, 0.0, 1.0, 2000);
        assert!((oracle_one - 0.841_344_7).abs() < 1e-7);
        assert!((std_normal_cdf(1.0) - 0.841_344_7).abs() < 1e-7);
    }

    #[test]
    fn cdf_is_symmetric() {
        for i in 0..100 {
            let z = -6.0 + 0.12 * i as f64;
            assert!((std_normal_cdf(z) + std_normal_cdf(-z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(0.841_344_7).unwrap() - 1.0).abs() < 1e-6);
        for &p in &[1e-300, 1e-12, 1e-6, 0.001, 0.1, 0.4, 0.8, 0.95, 0.999, 1.0 - 1e-12] {
            let z = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(z) - p).abs() <= 1e-9, "p = {p}, z = {z}");
            if p > 1e-9 && p < 1.0 - 1e-9 {
                let mirrored = std_normal_quantile(1.0 - p).unwrap();
                assert!((z + mirrored).abs() < 1e-6, "p = {p}");
            }
        }
    }

    #[test]
    fn quantile_rejects_out_of_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(std_normal_quantile(p).is_err());
        }
    }

    #[test]
    fn degenerate_spread_replicates_mean() {
        let cost = discretize_truncated_gaussian(5.0, 0.0, 4).unwrap();
        assert!(cost.outcomes().iter().all(|c| *c == 5.0));
        let total: f64 = cost.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn six_point_grid() {
        let grid = GaussianGrid::new(6).unwrap();
        let expected = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0];
        for (z, e) in grid.offsets().iter().zip(expected) {
            assert!((z - e).abs() < 1e-15);
        }
        // Cell masses from the CDF differences, re-normalized by Φ(3)-Φ(-3).
        let z = std_normal_cdf(3.0) - std_normal_cdf(-3.0);
        let edges = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        for k in 0..6 {
            let oracle = (std_normal_cdf(edges[k + 1]) - std_normal_cdf(edges[k])) / z;
            assert!((grid.probabilities()[k] - oracle).abs() < 1e-14);
        }
        // Mass is mirror-symmetric about the centre of the truncation range.
        let p = grid.probabilities();
        for k in 0..3 {
            assert!((p[k] - p[5 - k]).abs() < 1e-14);
        }
        // With c_mu = 0 the negative half of the grid is clamped.
        let cost = discretize_truncated_gaussian(0.0, 1.0, 6).unwrap();
        assert!(cost.clamped());
        assert_eq!(cost.outcomes(), &[0.0, 0.0, 0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn mean_bias_bounded_and_shrinking() {
        let (mu, sigma) = (40.0, 3.0);
        let mut last = f64::INFINITY;
        for m in [6, 12, 24, 48] {
            let cost = discretize_truncated_gaussian(mu, sigma, m).unwrap();
            let mean: f64 = cost.iter().map(|(c, p)| c * p).sum();
            let err = (mean - mu).abs();
            assert!(err <= 3.0 / m as f64 * sigma + 1e-10, "M = {m}: {err}");
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(discretize_truncated_gaussian(1.0, 1.0, 1).is_err());
        assert!(discretize_truncated_gaussian(-1.0, 1.0, 4).is_err());
        assert!(discretize_truncated_gaussian(1.0, -1.0, 4).is_err());
        assert!(DiscreteCost::new(alloc::vec![1.0], alloc::vec![1.0]).is_err());
        assert!(DiscreteCost::new(alloc::vec![2.0, 1.0], alloc::vec![0.5, 0.5]).is_err());
        assert!(DiscreteCost::new(alloc::vec![1.0, 2.0], alloc::vec![0.5, 0.6]).is_err());
        assert!(DiscreteCost::new(alloc::vec![-1.0, 2.0], alloc::vec![0.5, 0.5]).is_err());
    }
}
