//! Closed-loop simulation of an agent filtered by the perceived-risk
//! barrier among moving obstacles.
//!
//! Integration is forward Euler at a fixed step. The barrier always acts on
//! the controlled point `p` with `ṗ = u`: the position itself for a single
//! integrator, the point `l` ahead of the wheel axis for a unicycle.

use alloc::vec::Vec;

use crate::barrier::{min_compose, qp_filter, Barrier, BarrierConfig, StateContext};
use crate::field::CostFieldParams;
use crate::risk::{CvarConvention, RiskSpec};
use crate::{Error, Result, Vec2};

pub const DEFAULT_DT: f64 = 0.02;
pub const DEFAULT_T_MAX: f64 = 60.0;
pub const DEFAULT_GOAL_TOL: f64 = 0.1;
pub const DEFAULT_UNICYCLE_OFFSET: f64 = 0.2;
pub const MULTI_DT: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum AgentModel {
    SingleIntegrator { position: Vec2 },
    Unicycle { position: Vec2, heading: f64, offset: f64 },
}

impl AgentModel {
    /// Unicycle at `position` facing `toward`.
    pub fn unicycle_facing(position: Vec2, toward: Vec2, offset: f64) -> Self {
        let d = toward - position;
        Self::Unicycle { position, heading: libm::atan2(d.y, d.x), offset }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::SingleIntegrator { position } if !position.is_finite() => {
                Err(Error::param("agent.position", f64::NAN, "finite coordinates"))
            }
            Self::Unicycle { position, heading, offset } => {
                if !position.is_finite() || !heading.is_finite() {
                    return Err(Error::param("agent.position", f64::NAN, "finite coordinates"));
                }
                if !(offset.is_finite() && offset > 0.0) {
                    return Err(Error::param("agent.offset", offset, "finite and > 0"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn position(&self) -> Vec2 {
        match *self {
            Self::SingleIntegrator { position } | Self::Unicycle { position, .. } => position,
        }
    }

    pub fn heading(&self) -> Option<f64> {
        match *self {
            Self::SingleIntegrator { .. } => None,
            Self::Unicycle { heading, .. } => Some(heading),
        }
    }

    /// The point whose velocity is the control input.
    pub fn controlled_point(&self) -> Vec2 {
        match *self {
            Self::SingleIntegrator { position } => position,
            Self::Unicycle { position, heading, offset } => {
                position + Vec2::new(libm::cos(heading), libm::sin(heading)) * offset
            }
        }
    }

    /// One Euler step under control `u` of the controlled point.
    pub fn step(&self, u: Vec2, dt: f64) -> Self {
        match *self {
            Self::SingleIntegrator { position } => Self::SingleIntegrator { position: position + u * dt },
            Self::Unicycle { position, heading, offset } => {
                let (v, omega) = unicycle_transform(u, heading, offset);
                let dir = Vec2::new(libm::cos(heading), libm::sin(heading));
                Self::Unicycle { position: position + dir * (v * dt), heading: heading + omega * dt, offset }
            }
        }
    }
}

/// Maps a desired velocity of the point `l` ahead of the axle to forward
/// speed and turn rate.
pub fn unicycle_transform(u: Vec2, heading: f64, l: f64) -> (f64, f64) {
    let (s, c) = (libm::sin(heading), libm::cos(heading));
    (c * u.x + s * u.y, (-s * u.x + c * u.y) / l)
}

/// Proportional controller `gain ⊙ (goal − state)`.
pub fn nominal_control(state: Vec2, goal: Vec2, gain: Vec2) -> Vec2 {
    (goal - state).hadamard(gain)
}

/// A point obstacle moving on a straight line from `start` to `goal` at
/// constant speed, stopping at `goal`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObstacleModel {
    pub position: Vec2,
    pub start: Vec2,
    pub goal: Vec2,
    pub speed: f64,
}

impl ObstacleModel {
    pub fn new(start: Vec2, goal: Vec2, speed: f64) -> Result<Self> {
        let obs = Self { position: start, start, goal, speed };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.position.is_finite() && self.start.is_finite() && self.goal.is_finite()) {
            return Err(Error::param("obstacle", f64::NAN, "finite coordinates"));
        }
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return Err(Error::param("obstacle.speed", self.speed, "finite and >= 0"));
        }
        Ok(())
    }

    pub fn velocity(&self) -> Vec2 {
        let d = self.goal - self.position;
        let n = d.norm();
        if n == 0.0 || self.speed == 0.0 {
            Vec2::ZERO
        } else {
            d * (self.speed / n)
        }
    }
}

/// Advances the obstacle by `speed·dt` toward its goal without overshooting.
pub fn step_obstacle(obs: &ObstacleModel, dt: f64) -> ObstacleModel {
    let d = obs.goal - obs.position;
    let remaining = d.norm();
    let travel = obs.speed * dt;
    let position = if travel >= remaining { obs.goal } else { obs.position + d * (travel / remaining) };
    ObstacleModel { position, ..*obs }
}

/// Obstacle speed that makes its traverse take as long as the agent's
/// characteristic approach: `‖goal − start‖ · gain / ‖agent goal − agent start‖`.
pub fn default_obstacle_speed(start: Vec2, goal: Vec2, agent_start: Vec2, agent_goal: Vec2, gain: Vec2) -> f64 {
    let agent_span = (agent_goal - agent_start).norm();
    if agent_span == 0.0 {
        return 0.0;
    }
    (goal - start).norm() * 0.5 * (gain.x + gain.y) / agent_span
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub agent: AgentModel,
    pub goal: Vec2,
    pub nominal_gain: Vec2,
    pub obstacles: Vec<ObstacleModel>,
    pub field: CostFieldParams,
    pub risk: RiskSpec,
    pub barrier: BarrierConfig,
    #[cfg_attr(feature = "serde", serde(default))]
    pub convention: CvarConvention,
    pub dt: f64,
    pub t_max: f64,
    pub goal_tol: f64,
}

impl Scenario {
    /// One obstacle crossing the agent's path: agent `(5, 2) → (10, 10)`,
    /// obstacle `(13, 13) → (2, 3)`, `r̄ = 0.5`.
    pub fn crossing(risk: RiskSpec) -> Self {
        let (start, goal, gain) = (Vec2::new(5.0, 2.0), Vec2::new(10.0, 10.0), Vec2::new(0.6, 0.6));
        Self::preset(risk, start, goal, gain, 0.5, &[(Vec2::new(13.0, 13.0), Vec2::new(2.0, 3.0))])
    }

    /// Three obstacles: agent `(−15, −15) → (15, 15)`, `r̄ = 2.5`. The agent
    /// starts at about 68 units/s, so the step is reduced to `MULTI_DT`.
    pub fn three_obstacles(risk: RiskSpec) -> Self {
        let (start, goal, gain) = (Vec2::new(-15.0, -15.0), Vec2::new(15.0, 15.0), Vec2::new(1.6, 1.6));
        let obstacles = [
            (Vec2::new(-17.0, 0.0), Vec2::new(17.0, 0.0)),
            (Vec2::new(0.0, 14.0), Vec2::new(0.0, -14.0)),
            (Vec2::new(10.0, -10.0), Vec2::new(-10.0, 10.0)),
        ];
        Self { dt: MULTI_DT, ..Self::preset(risk, start, goal, gain, 2.5, &obstacles) }
    }

    fn preset(risk: RiskSpec, start: Vec2, goal: Vec2, gain: Vec2, r_bar: f64, obstacles: &[(Vec2, Vec2)]) -> Self {
        let field = CostFieldParams::standard(r_bar);
        Self {
            agent: AgentModel::unicycle_facing(start, goal, DEFAULT_UNICYCLE_OFFSET),
            goal,
            nominal_gain: gain,
            obstacles: obstacles
                .iter()
                .map(|&(s, g)| ObstacleModel {
                    position: s,
                    start: s,
                    goal: g,
                    speed: default_obstacle_speed(s, g, start, goal, gain),
                })
                .collect(),
            field,
            risk,
            barrier: BarrierConfig { rho: field.reference_threshold(), eta1_gain: 1.0 },
            convention: CvarConvention::default(),
            dt: DEFAULT_DT,
            t_max: DEFAULT_T_MAX,
            goal_tol: DEFAULT_GOAL_TOL,
        }
    }

    pub fn with_risk(&self, risk: RiskSpec) -> Self {
        Self { risk, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        if !(self.goal.is_finite() && self.nominal_gain.is_finite()) {
            return Err(Error::param("goal", f64::NAN, "finite coordinates"));
        }
        for obs in &self.obstacles {
            obs.validate()?;
        }
        self.field.validate()?;
        self.risk.validate()?;
        self.barrier.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", self.dt, "finite and > 0"));
        }
        if !(self.t_max.is_finite() && self.t_max > self.dt) {
            return Err(Error::param("t_max", self.t_max, "finite and > dt"));
        }
        if !(self.goal_tol.is_finite() && self.goal_tol > 0.0) {
            return Err(Error::param("goal_tol", self.goal_tol, "finite and > 0"));
        }
        Ok(())
    }

    /// Number of integration steps until `t_max`.
    pub fn max_steps(&self) -> usize {
        libm::ceil(self.t_max / self.dt - 1e-9) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub agent: AgentModel,
    pub point: Vec2,
    pub obstacles: Vec<Vec2>,
    pub u_nominal: Vec2,
    pub u_filtered: Vec2,
    /// `u_nominal − u_filtered`.
    pub delta: Vec2,
    /// `None` without obstacles.
    pub h_min: Option<f64>,
    pub active_obstacle: Option<usize>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimSummary {
    pub reached_goal: bool,
    pub goal_time: Option<f64>,
    pub min_h: Option<f64>,
    /// `Σ ‖δ‖·dt`.
    pub total_deviation: f64,
    pub max_deviation: f64,
    pub infeasible_steps: usize,
    pub steps: usize,
    pub final_position: Vec2,
    pub final_point: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimLog {
    pub summary: SimSummary,
    pub records: Vec<StepRecord>,
}

impl SimLog {
    /// Number of times the active obstacle changes between logged steps.
    pub fn active_switches(&self) -> usize {
        self.records.windows(2).filter(|w| w[0].active_obstacle != w[1].active_obstacle).count()
    }
}

/// Runs the scenario until the controlled point is within `goal_tol` of the
/// goal or `t_max` elapses, logging every step.
///
/// Steps where the filter has no admissible control keep the previous
/// control and are flagged. Fails if the start is not perceived safe.
pub fn run(scenario: &Scenario) -> Result<SimLog> {
    scenario.validate()?;
    let barrier = Barrier::with_convention(scenario.risk, scenario.field, scenario.barrier, scenario.convention)?;
    let dt = scenario.dt;
    let max_steps = scenario.max_steps();

    let mut agent = scenario.agent;
    let mut obstacles = scenario.obstacles.clone();
    let mut u_prev = Vec2::ZERO;
    let mut records = Vec::new();
    let mut reached = false;

    for step in 0..=max_steps {
        let t = step as f64 * dt;
        let p = agent.controlled_point();
        let mut items = Vec::with_capacity(obstacles.len());
        for obs in &obstacles {
            let ctx = StateContext::single_integrator(p, obs.position, obs.velocity());
            items.push((barrier.value(ctx.xi()), barrier.constraint(&ctx)?));
        }
        let active = min_compose(&items);
        if step == 0 {
            if let Some(c) = active {
                if c.h <= 0.0 {
                    return Err(Error::UnsafeStart { h: c.h });
                }
            }
        }

        let u_nominal = nominal_control(p, scenario.goal, scenario.nominal_gain);
        let (u, feasible) = match active {
            None => (u_nominal, true),
            Some(c) => match qp_filter(u_nominal, &c.constraint) {
                Ok(u) => (u, true),
                Err(_) => (u_prev, false),
            },
        };
        records.push(StepRecord {
            step,
            t,
            agent,
            point: p,
            obstacles: obstacles.iter().map(|o| o.position).collect(),
            u_nominal,
            u_filtered: u,
            delta: u_nominal - u,
            h_min: active.map(|c| c.h),
            active_obstacle: active.map(|c| c.index),
            feasible,
        });

        if (scenario.goal - p).norm() <= scenario.goal_tol {
            reached = true;
            break;
        }
        if step == max_steps {
            break;
        }
        agent = agent.step(u, dt);
        for obs in &mut obstacles {
            *obs = step_obstacle(obs, dt);
        }
        u_prev = u;
    }

    let last = records.last().expect("at least one step is logged");
    let summary = SimSummary {
        reached_goal: reached,
        goal_time: reached.then_some(last.t),
        min_h: records.iter().filter_map(|r| r.h_min).fold(None, |m: Option<f64>, h| Some(m.map_or(h, |m| m.min(h)))),
        total_deviation: records.iter().map(|r| r.delta.norm() * dt).sum(),
        max_deviation: records.iter().map(|r| r.delta.norm()).fold(0.0, f64::max),
        infeasible_steps: records.iter().filter(|r| !r.feasible).count(),
        steps: records.len(),
        final_position: last.agent.position(),
        final_point: last.point,
    };
    Ok(SimLog { summary, records })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonRow {
    pub spec: RiskSpec,
    pub summary: SimSummary,
}

/// Runs the same scenario once per risk model.
pub fn compare_models(template: &Scenario, specs: &[RiskSpec]) -> Result<Vec<ComparisonRow>> {
    specs
        .iter()
        .map(|&spec| Ok(ComparisonRow { spec, summary: run(&template.with_risk(spec))?.summary }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cpt(gamma: f64, lambda: f64) -> RiskSpec {
        RiskSpec::cpt(0.74, 1.0, gamma, lambda).unwrap()
    }

    #[test]
    fn nominal_control_examples() {
        let gain = Vec2::new(0.6, 0.6);
        let u = nominal_control(Vec2::new(5.0, 2.0), Vec2::new(10.0, 10.0), gain);
        assert!((u.x - 3.0).abs() < 1e-12 && (u.y - 4.8).abs() < 1e-12);
        assert_eq!(nominal_control(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0), gain), Vec2::ZERO);
    }

    #[test]
    fn unicycle_transform_examples() {
        assert_eq!(unicycle_transform(Vec2::new(1.0, 0.0), 0.0, 0.2), (1.0, 0.0));
        assert_eq!(unicycle_transform(Vec2::new(0.0, 1.0), 0.0, 0.5), (0.0, 2.0));
    }

    #[test]
    fn projected_point_follows_input() {
        let agent = AgentModel::Unicycle { position: Vec2::new(1.0, 2.0), heading: 0.7, offset: 0.2 };
        let u = Vec2::new(-0.4, 1.3);
        let mut prev_err = f64::INFINITY;
        for dt in [1e-2, 1e-3, 1e-4] {
            let p0 = agent.controlled_point();
            let p1 = agent.step(u, dt).controlled_point();
            let err = ((p1 - p0) * (1.0 / dt) - u).norm();
            assert!(err < 10.0 * dt, "{err}");
            assert!(err < prev_err);
            prev_err = err;
        }
    }

    #[test]
    fn obstacle_motion() {
        let still = ObstacleModel::new(Vec2::new(1.0, 1.0), Vec2::new(5.0, 1.0), 0.0).unwrap();
        assert_eq!(step_obstacle(&still, 1.0).position, still.position);
        let mut obs = ObstacleModel::new(Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0), 2.0).unwrap();
        for _ in 0..125 {
            obs = step_obstacle(&obs, 0.01);
        }
        assert!((obs.position - Vec2::new(1.5, 2.0)).norm() < 1e-9);
        for _ in 0..200 {
            obs = step_obstacle(&obs, 0.01);
        }
        assert_eq!(obs.position, obs.goal);
        assert_eq!(obs.velocity(), Vec2::ZERO);
        assert!(ObstacleModel::new(Vec2::ZERO, Vec2::ZERO, -1.0).is_err());
    }

    #[test]
    fn no_obstacles_goes_straight() {
        let mut s = Scenario::crossing(RiskSpec::Er);
        s.obstacles.clear();
        s.agent = AgentModel::SingleIntegrator { position: Vec2::new(5.0, 2.0) };
        let log = run(&s).unwrap();
        assert!(log.summary.reached_goal);
        assert_eq!(log.summary.total_deviation, 0.0);
        assert!(log.summary.min_h.is_none());
        let dir = Vec2::new(5.0, 8.0) * (1.0 / 89f64.sqrt());
        for r in &log.records {
            let off = r.point - Vec2::new(5.0, 2.0);
            assert!((off.x * dir.y - off.y * dir.x).abs() < 1e-9);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let s = Scenario::crossing(cpt(0.88, 3.0));
        assert_eq!(run(&s).unwrap(), run(&s).unwrap());
    }

    #[test]
    fn record_count_is_bounded() {
        let mut s = Scenario::crossing(RiskSpec::Er);
        s.t_max = 0.5;
        let log = run(&s).unwrap();
        assert!(log.records.len() <= s.max_steps() + 1);
        assert!(!log.summary.reached_goal);
    }

    #[test]
    fn high_threshold_reproduces_nominal_path() {
        let s = Scenario::crossing(cpt(0.88, 3.5));
        let mut loose = s.clone();
        loose.barrier.rho = 1e6;
        let mut free = s.clone();
        free.obstacles.clear();
        let a = run(&loose).unwrap();
        let b = run(&free).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.agent, y.agent);
        }
    }

    #[test]
    fn unsafe_start_is_rejected() {
        let mut s = Scenario::crossing(RiskSpec::Er);
        s.obstacles[0].position = s.agent.controlled_point() + Vec2::new(0.1, 0.0);
        assert!(matches!(run(&s), Err(Error::UnsafeStart { .. })));
    }

    #[test]
    fn invalid_scenarios() {
        let base = Scenario::crossing(RiskSpec::Er);
        let mut s = base.clone();
        s.dt = 0.0;
        assert!(run(&s).is_err());
        let mut s = base.clone();
        s.t_max = 0.01;
        assert!(run(&s).is_err());
        let mut s = base;
        s.agent = AgentModel::Unicycle { position: Vec2::ZERO, heading: 0.0, offset: 0.0 };
        assert!(run(&s).is_err());
    }

    #[test]
    fn duplicate_rows_match() {
        let s = Scenario::crossing(RiskSpec::Er);
        let rows = compare_models(&s, &[cpt(0.9, 2.0), cpt(0.9, 2.0)]).unwrap();
        assert_eq!(rows[0], rows[1]);
    }
}
