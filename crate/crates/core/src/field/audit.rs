//! Cell-wise empirical auditors for the set relations between families of
//! risk models.
//!
//! Both audits fix one cost field and one source location and work on the
//! cells of a finite grid; they check the set relations on that instance
//! only. Membership uses the definitional value of the discretized lottery,
//! so the exact identities between the models (CPT at unit parameters, CVaR
//! at `q -> 0`, and ER) carry over to the masks.

use alloc::vec::Vec;

use super::{Bounds, CostFieldParams, FieldGrid, Mask, RiskField};
use crate::distributions::GaussianGrid;
use crate::risk::{CvarConvention, RiskSpec};
use crate::{Error, Result, Vec2};

/// The finite instance an audit runs on: field, source, grid and threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditDomain {
    params: CostFieldParams,
    source: Vec2,
    rho: f64,
    mean: FieldGrid,
    sigma: FieldGrid,
    excluded: Mask,
}

impl AuditDomain {
    pub fn new(params: CostFieldParams, source: Vec2, bounds: Bounds, nx: usize, ny: usize, rho: f64) -> Result<Self> {
        params.validate()?;
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::param("rho", rho, "finite and > 0"));
        }
        if !source.is_finite() {
            return Err(Error::param("source", f64::NAN, "finite coordinates"));
        }
        let mean = FieldGrid::from_fn(bounds, nx, ny, |p| params.cost_mean(source - p))?;
        let sigma = FieldGrid::from_fn(bounds, nx, ny, |p| params.cost_sigma(source - p))?;
        let grid = GaussianGrid::new(params.m)?;
        let cells = mean
            .values()
            .iter()
            .zip(sigma.values())
            .map(|(&mu, &s)| grid.raw_outcomes(mu, s).any(|c| c < 0.0))
            .collect();
        Ok(Self { params, source, rho, mean, sigma, excluded: Mask::new(nx, ny, cells) })
    }

    /// `X = [0, 15]²` at 150×150 cells around a source at `(10, 10)`, with
    /// `rho = c_mu(r̄)`.
    pub fn standard(params: CostFieldParams) -> Result<Self> {
        let rho = params.reference_threshold();
        Self::new(params, Vec2::new(10.0, 10.0), Bounds::square(0.0, 15.0), 150, 150, rho)
    }

    pub fn params(&self) -> &CostFieldParams {
        &self.params
    }

    pub fn source(&self) -> Vec2 {
        self.source
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::param("rho", rho, "finite and > 0"));
        }
        self.rho = rho;
        Ok(self)
    }

    /// Mean cost `c_mu` per cell.
    pub fn mean_grid(&self) -> &FieldGrid {
        &self.mean
    }

    /// Cells whose discretized outcomes needed clamping at zero; audits
    /// leave them out.
    pub fn excluded(&self) -> &Mask {
        &self.excluded
    }

    /// `(c_min, c_max)` of the mean cost over the grid.
    pub fn cost_range(&self) -> (f64, f64) {
        (self.mean.min(), self.mean.max())
    }

    /// Per-cell lottery value of one model.
    pub fn risk_grid(&self, spec: &RiskSpec) -> Result<FieldGrid> {
        let field = RiskField::new(*spec, self.params, CvarConvention::default())?;
        let values = self
            .mean
            .values()
            .iter()
            .zip(self.sigma.values())
            .map(|(&mu, &s)| field.evaluator().lottery_value(mu, s))
            .collect::<Result<Vec<_>>>()?;
        let (nx, ny) = self.mean.resolution();
        FieldGrid::from_values(self.mean.bounds(), nx, ny, values)
    }

    /// `(safe, risky)` masks of one model, excluded cells cleared in both.
    pub fn masks(&self, spec: &RiskSpec) -> Result<(Mask, Mask)> {
        let risk = self.risk_grid(spec)?;
        let (nx, ny) = risk.resolution();
        let excluded = self.excluded.cells();
        let safe = risk.values().iter().zip(excluded).map(|(&r, &x)| !x && r <= self.rho).collect();
        let risky = risk.values().iter().zip(excluded).map(|(&r, &x)| !x && r > self.rho).collect();
        Ok((Mask::new(nx, ny, safe), Mask::new(nx, ny, risky)))
    }

    /// Unions of the per-model safe and risky masks.
    pub fn total_sets(&self, family: &[RiskSpec]) -> Result<(Mask, Mask)> {
        let (nx, ny) = self.mean.resolution();
        let mut safe = Mask::filled(nx, ny, false);
        let mut risky = Mask::filled(nx, ny, false);
        for spec in family {
            let (s, r) = self.masks(spec)?;
            safe.union_with(&s);
            risky.union_with(&r);
        }
        Ok((safe, risky))
    }
}

/// Cell counts behind a relation `A ⊆ B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SetRelation {
    /// Cells in `A` but not in `B`.
    pub violations: usize,
    /// Cells in `B` but not in `A`.
    pub witnesses: usize,
}

impl SetRelation {
    fn of(a: &Mask, b: &Mask) -> Self {
        Self { violations: a.count_not_in(b), witnesses: b.count_not_in(a) }
    }

    pub fn holds(&self) -> bool {
        self.violations == 0
    }

    pub fn strict(&self) -> bool {
        self.holds() && self.witnesses > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InclusivenessVerdict {
    StrictlyMoreInclusive,
    MoreInclusive,
    /// Identical total safe and risky sets.
    Equivalent,
    Incomparable,
}

/// Outcome of comparing family 1 against family 2.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InclusivenessReport {
    pub cells: usize,
    pub excluded_cells: usize,
    /// Total safe set of family 2 inside that of family 1.
    pub safe: SetRelation,
    /// Total risky set of family 2 inside that of family 1.
    pub risky: SetRelation,
    pub safe_counts: [usize; 2],
    pub risky_counts: [usize; 2],
    pub verdict: InclusivenessVerdict,
}

impl InclusivenessReport {
    /// Family 2 against family 1, from the same counts.
    pub fn reversed(&self) -> Self {
        let flip = |r: SetRelation| SetRelation { violations: r.witnesses, witnesses: r.violations };
        let (safe, risky) = (flip(self.safe), flip(self.risky));
        Self {
            cells: self.cells,
            excluded_cells: self.excluded_cells,
            safe,
            risky,
            safe_counts: [self.safe_counts[1], self.safe_counts[0]],
            risky_counts: [self.risky_counts[1], self.risky_counts[0]],
            verdict: verdict(safe, risky),
        }
    }
}

fn verdict(safe: SetRelation, risky: SetRelation) -> InclusivenessVerdict {
    match (safe.holds() && risky.holds(), safe.strict(), risky.strict()) {
        (false, _, _) => InclusivenessVerdict::Incomparable,
        (true, true, true) => InclusivenessVerdict::StrictlyMoreInclusive,
        (true, false, false) => InclusivenessVerdict::Equivalent,
        (true, _, _) => InclusivenessVerdict::MoreInclusive,
    }
}

/// Compares the total safe and risky sets of two families on one domain.
pub fn inclusiveness_audit(
    family1: &[RiskSpec],
    family2: &[RiskSpec],
    domain: &AuditDomain,
) -> Result<InclusivenessReport> {
    if family1.is_empty() || family2.is_empty() {
        return Err(Error::InvalidParameter { name: "family", value: 0.0, expected: "at least one model" });
    }
    let (s1, r1) = domain.total_sets(family1)?;
    let (s2, r2) = domain.total_sets(family2)?;
    let safe = SetRelation::of(&s2, &s1);
    let risky = SetRelation::of(&r2, &r1);
    Ok(InclusivenessReport {
        cells: s1.cells().len(),
        excluded_cells: domain.excluded().count(),
        safe,
        risky,
        safe_counts: [s1.count(), s2.count()],
        risky_counts: [r1.count(), r2.count()],
        verdict: verdict(safe, risky),
    })
}

/// Whether the sublevel set `{c_mu ≤ level}` is perceived safe by some
/// member of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelCheck {
    pub level: f64,
    pub achieved: bool,
    /// Index of the first member covering the sublevel set.
    pub member: Option<usize>,
    /// Fewest sublevel cells left unsafe by any member.
    pub uncovered: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VersatilityReport {
    pub levels: Vec<LevelCheck>,
    /// Longest run of consecutive achieved levels, as `[low, high]`.
    pub interval: Option<[f64; 2]>,
}

impl VersatilityReport {
    pub fn width(&self) -> f64 {
        self.interval.map_or(0.0, |[lo, hi]| hi - lo)
    }

    pub fn achieved_count(&self) -> usize {
        self.levels.iter().filter(|l| l.achieved).count()
    }
}

/// Evenly spaced levels across `[c_min, c_max]` of the domain, both ends
/// included.
pub fn cost_levels(domain: &AuditDomain, count: usize) -> Vec<f64> {
    let (lo, hi) = domain.cost_range();
    match count {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        n => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Checks, level by level, which mean-cost sublevel sets the family can
/// perceive as safe. Levels are sorted ascending before checking.
pub fn versatility_audit(family: &[RiskSpec], domain: &AuditDomain, levels: &[f64]) -> Result<VersatilityReport> {
    if family.is_empty() {
        return Err(Error::InvalidParameter { name: "family", value: 0.0, expected: "at least one model" });
    }
    let (c_min, c_max) = domain.cost_range();
    let tol = 1e-9 * c_max.max(1.0);
    for &level in levels {
        if !(level >= c_min - tol && level <= c_max + tol) {
            return Err(Error::param("level", level, "within [c_min, c_max] of the field"));
        }
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);

    let safe_masks = family.iter().map(|s| domain.masks(s).map(|m| m.0)).collect::<Result<Vec<_>>>()?;
    let (nx, ny) = domain.mean_grid().resolution();
    let excluded = domain.excluded().cells();

    let checks: Vec<LevelCheck> = sorted
        .iter()
        .map(|&level| {
            let cells = domain.mean_grid().values().iter().zip(excluded).map(|(&c, &x)| !x && c <= level).collect();
            let sublevel = Mask::new(nx, ny, cells);
            let uncovered: Vec<usize> = safe_masks.iter().map(|m| sublevel.count_not_in(m)).collect();
            let member = uncovered.iter().position(|&u| u == 0);
            LevelCheck {
                level,
                achieved: member.is_some(),
                member,
                uncovered: uncovered.iter().copied().min().unwrap_or(0),
            }
        })
        .collect();

    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (k, check) in checks.iter().enumerate() {
        match (check.achieved, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if best.is_none_or(|(a, b)| k - s > b - a + 1) {
                    best = Some((s, k - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        let k = checks.len();
        if best.is_none_or(|(a, b)| k - s > b - a + 1) {
            best = Some((s, k - 1));
        }
    }
    let interval = best.map(|(a, b)| [checks[a].level, checks[b].level]);
    Ok(VersatilityReport { levels: checks, interval })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain() -> AuditDomain {
        let params = CostFieldParams::standard(0.5);
        let rho = params.reference_threshold();
        AuditDomain::new(params, Vec2::new(10.0, 10.0), Bounds::square(0.0, 15.0), 40, 40, rho).unwrap()
    }

    fn cvar_family() -> Vec<RiskSpec> {
        [0.001, 0.1, 0.4, 0.8, 0.95, 0.999].iter().map(|&q| RiskSpec::cvar(q).unwrap()).collect()
    }

    #[test]
    fn family_against_itself_is_equivalent() {
        let d = domain();
        let fam = cvar_family();
        let report = inclusiveness_audit(&fam, &fam, &d).unwrap();
        assert_eq!(report.safe, SetRelation { violations: 0, witnesses: 0 });
        assert_eq!(report.risky, SetRelation { violations: 0, witnesses: 0 });
        assert_eq!(report.verdict, InclusivenessVerdict::Equivalent);
    }

    #[test]
    fn cvar_grid_is_more_inclusive_than_er() {
        let d = domain();
        let report = inclusiveness_audit(&cvar_family(), &[RiskSpec::Er], &d).unwrap();
        assert_eq!(report.verdict, InclusivenessVerdict::MoreInclusive);
        assert!(report.risky.witnesses > 0);
        assert_eq!(report.excluded_cells, 0);
        assert_eq!(report.reversed().verdict, InclusivenessVerdict::Incomparable);
    }

    #[test]
    fn single_cpt_member_is_not_more_inclusive() {
        let d = domain();
        let cpt = [RiskSpec::cpt(0.74, 1.0, 0.9, 1.0).unwrap()];
        let report = inclusiveness_audit(&cpt, &cvar_family(), &d).unwrap();
        assert_eq!(report.verdict, InclusivenessVerdict::Incomparable);
    }

    #[test]
    fn masks_partition_included_cells() {
        let d = domain();
        for spec in cvar_family() {
            let (safe, risky) = d.masks(&spec).unwrap();
            assert_eq!(safe.count() + risky.count() + d.excluded().count(), safe.cells().len());
            assert_eq!(safe.count_not_in(&risky.complement()), 0);
        }
    }

    #[test]
    fn er_versatility_follows_the_threshold() {
        let d = domain().with_rho(120.0).unwrap();
        let levels = cost_levels(&d, 30);
        let er = d.risk_grid(&RiskSpec::Er).unwrap();
        let report = versatility_audit(&[RiskSpec::Er], &d, &levels).unwrap();
        for check in &report.levels {
            // Oracle: the level is covered iff every cell at or below it has
            // an ER value within the threshold.
            let expected = d
                .mean_grid()
                .values()
                .iter()
                .zip(er.values())
                .all(|(&c, &r)| c > check.level || r <= 120.0);
            assert_eq!(check.achieved, expected, "{check:?}");
        }
        let [lo, hi] = report.interval.unwrap();
        assert_eq!(lo, levels[0]);
        assert!(hi <= 120.0);
    }

    #[test]
    fn level_outside_range_is_rejected() {
        let d = domain();
        let (_, hi) = d.cost_range();
        assert!(versatility_audit(&[RiskSpec::Er], &d, &[hi + 1.0]).is_err());
        assert!(versatility_audit(&[], &d, &[hi]).is_err());
        assert!(inclusiveness_audit(&[], &[RiskSpec::Er], &d).is_err());
    }
}
