//! Scenario files: TOML documents whose sections mirror the library types.

use std::fmt;
use std::path::Path;

use rpa_core::barrier::BarrierConfig;
use rpa_core::field::{Bounds, CostFieldParams};
use rpa_core::risk::{CptParams, CvarConvention, ModelKind, RiskSpec};
use rpa_core::sim::{
    default_obstacle_speed, AgentModel, ObstacleModel, Scenario, DEFAULT_DT, DEFAULT_GOAL_TOL, DEFAULT_T_MAX,
    DEFAULT_UNICYCLE_OFFSET,
};
use rpa_core::Vec2;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    field: Option<RawField>,
    grid: Option<RawGrid>,
    barrier: Option<RawBarrier>,
    scenario: Option<RawScenario>,
    #[serde(default)]
    obstacles: Vec<RawObstacle>,
    #[serde(default)]
    specs: Vec<RawSpec>,
    audit: Option<RawAudit>,
    feasibility: Option<RawFeasibility>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    k1: f64,
    k2: f64,
    r_bar: f64,
    #[serde(default = "default_outcomes")]
    outcomes: usize,
    #[serde(default)]
    cvar_convention: CvarConvention,
}

fn default_outcomes() -> usize {
    rpa_core::distributions::DEFAULT_OUTCOMES
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    min: [f64; 2],
    max: [f64; 2],
    resolution: [usize; 2],
    source: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBarrier {
    rho: Option<f64>,
    #[serde(default = "one")]
    eta1_gain: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum AgentKind {
    SingleIntegrator,
    Unicycle,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    agent: AgentKind,
    start: [f64; 2],
    goal: [f64; 2],
    heading: Option<f64>,
    offset: Option<f64>,
    gain: [f64; 2],
    dt: Option<f64>,
    t_max: Option<f64>,
    goal_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObstacle {
    start: [f64; 2],
    goal: [f64; 2],
    speed: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: String,
    model: ModelKind,
    q: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    lambda: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAudit {
    rho: Option<f64>,
    levels: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeasibility {
    states: Option<usize>,
    samples: Option<usize>,
    control_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedSpec {
    pub name: String,
    pub spec: RiskSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSettings {
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
    pub source: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSettings {
    pub rho: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilitySettings {
    pub states: usize,
    pub samples: usize,
    pub control_radius: f64,
}

/// A validated scenario file. Sections a command does not need may be
/// absent; commands ask for them through the accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub field: CostFieldParams,
    pub convention: CvarConvention,
    pub barrier: BarrierConfig,
    pub specs: Vec<NamedSpec>,
    grid: Option<GridSettings>,
    scenario: Option<Scenario>,
    pub audit: AuditSettings,
    pub feasibility: FeasibilitySettings,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        Validator { text }.build(raw)
    }

    pub fn grid(&self) -> Result<&GridSettings, ConfigError> {
        self.grid.as_ref().ok_or_else(|| missing("grid"))
    }

    /// The scenario with its risk model still to be chosen.
    pub fn scenario(&self) -> Result<&Scenario, ConfigError> {
        self.scenario.as_ref().ok_or_else(|| missing("scenario"))
    }

    /// Specs matching a comma-separated list of names or model kinds, or
    /// `all`.
    pub fn select(&self, selector: &str) -> Result<Vec<NamedSpec>, ConfigError> {
        if self.specs.is_empty() {
            return Err(missing("specs"));
        }
        let mut out: Vec<NamedSpec> = Vec::new();
        for token in selector.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let matched: Vec<&NamedSpec> = match token {
                "all" => self.specs.iter().collect(),
                "er" | "cvar" | "cpt" => self.specs.iter().filter(|s| kind_name(s.spec.kind()) == token).collect(),
                name => self.specs.iter().filter(|s| s.name == name).collect(),
            };
            if matched.is_empty() {
                return Err(ConfigError { line: None, message: format!("--spec {token:?} matches no spec") });
            }
            for s in matched {
                if !out.iter().any(|o| o.name == s.name) {
                    out.push(s.clone());
                }
            }
        }
        if out.is_empty() {
            return Err(ConfigError { line: None, message: "empty --spec selector".into() });
        }
        Ok(out)
    }
}

pub fn kind_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Er => "er",
        ModelKind::Cvar => "cvar",
        ModelKind::Cpt => "cpt",
    }
}

fn missing(section: &str) -> ConfigError {
    ConfigError { line: None, message: format!("missing [{section}] section") }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (or the `index`-th `[[section]]`).
pub fn locate(text: &str, section: &str, index: Option<usize>, key: &str) -> Option<usize> {
    let mut current: Option<(String, usize)> = None;
    let mut seen = std::collections::HashMap::<String, usize>::new();
    let mut header_line = None;
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix("[[").and_then(|r| r.split("]]").next()) {
            let name = name.trim().to_string();
            let k = seen.entry(name.clone()).or_insert(0);
            current = Some((name, *k));
            *k += 1;
        } else if let Some(name) = t.strip_prefix('[').and_then(|r| r.split(']').next()) {
            current = Some((name.trim().to_string(), 0));
        } else {
            if let Some((name, k)) = &current {
                let here = name == section && index.is_none_or(|i| i == *k);
                if here && t.split('=').next().map(str::trim) == Some(key) && t.contains('=') {
                    return Some(n + 1);
                }
            }
            continue;
        }
        if let Some((name, k)) = &current {
            if name == section && index.is_none_or(|i| i == *k) {
                header_line = Some(n + 1);
            }
        }
    }
    header_line
}

struct Validator<'a> {
    text: &'a str,
}

impl Validator<'_> {
    fn err(&self, section: &str, index: Option<usize>, key: &str, message: String) -> ConfigError {
        let location = match index {
            Some(i) => format!("{section}[{i}].{key}"),
            None => format!("{section}.{key}"),
        };
        ConfigError { line: locate(self.text, section, index, key), message: format!("{location}: {message}") }
    }

    fn positive(&self, section: &str, index: Option<usize>, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(section, index, key, format!("must be finite and > 0, got {v}")))
        }
    }

    fn finite2(&self, section: &str, index: Option<usize>, key: &str, v: [f64; 2]) -> Result<Vec2, ConfigError> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(v.into())
        } else {
            Err(self.err(section, index, key, "coordinates must be finite".into()))
        }
    }

    fn build(&self, raw: RawConfig) -> Result<Config, ConfigError> {
        let rf = raw.field.ok_or_else(|| missing("field"))?;
        self.positive("field", None, "k1", rf.k1)?;
        self.positive("field", None, "k2", rf.k2)?;
        self.positive("field", None, "r_bar", rf.r_bar)?;
        if rf.outcomes < 2 {
            return Err(self.err("field", None, "outcomes", format!("must be at least 2, got {}", rf.outcomes)));
        }
        let field = CostFieldParams::new(rf.k1, rf.k2, rf.r_bar, rf.outcomes)
            .map_err(|e| ConfigError { line: locate(self.text, "field", None, "k1"), message: e.to_string() })?;

        let barrier = match raw.barrier {
            Some(b) => {
                let rho = match b.rho {
                    Some(r) => self.positive("barrier", None, "rho", r)?,
                    None => field.reference_threshold(),
                };
                let gain = self.positive("barrier", None, "eta1_gain", b.eta1_gain)?;
                BarrierConfig { rho, eta1_gain: gain }
            }
            None => BarrierConfig { rho: field.reference_threshold(), eta1_gain: 1.0 },
        };

        let grid = match raw.grid {
            Some(g) => {
                let min = self.finite2("grid", None, "min", g.min)?;
                let max = self.finite2("grid", None, "max", g.max)?;
                if !(max.x > min.x && max.y > min.y) {
                    return Err(self.err("grid", None, "max", "must exceed min in both coordinates".into()));
                }
                if g.resolution.iter().any(|&n| n < 2) {
                    return Err(self.err("grid", None, "resolution", "needs at least 2 cells per axis".into()));
                }
                let source = self.finite2("grid", None, "source", g.source)?;
                let bounds = Bounds::new(min, max)
                    .map_err(|e| ConfigError { line: locate(self.text, "grid", None, "min"), message: e.to_string() })?;
                Some(GridSettings { bounds, nx: g.resolution[0], ny: g.resolution[1], source })
            }
            None => None,
        };

        let mut specs: Vec<NamedSpec> = Vec::new();
        for (i, s) in raw.specs.into_iter().enumerate() {
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
                return Err(self.err("specs", Some(i), "name", "use letters, digits, '_', '-' or '.'".into()));
            }
            if specs.iter().any(|o| o.name == s.name) {
                return Err(self.err("specs", Some(i), "name", format!("duplicate name {:?}", s.name)));
            }
            let spec = self.spec(i, &s)?;
            specs.push(NamedSpec { name: s.name, spec });
        }

        let scenario = match raw.scenario {
            Some(sc) => Some(self.scenario(sc, &raw.obstacles, field, barrier, rf.cvar_convention)?),
            None => {
                if !raw.obstacles.is_empty() {
                    return Err(ConfigError {
                        line: locate(self.text, "obstacles", Some(0), "start"),
                        message: "[[obstacles]] given without a [scenario]".into(),
                    });
                }
                None
            }
        };

        let audit = match raw.audit {
            Some(a) => AuditSettings {
                rho: match a.rho {
                    Some(r) => self.positive("audit", None, "rho", r)?,
                    None => barrier.rho,
                },
                levels: match a.levels {
                    Some(n) if n >= 2 => n,
                    Some(n) => return Err(self.err("audit", None, "levels", format!("must be at least 2, got {n}"))),
                    None => 40,
                },
            },
            None => AuditSettings { rho: barrier.rho, levels: 40 },
        };

        let feasibility = match raw.feasibility {
            Some(f) => FeasibilitySettings {
                states: match f.states {
                    Some(0) => return Err(self.err("feasibility", None, "states", "must be at least 1".into())),
                    Some(n) => n,
                    None => 50,
                },
                samples: match f.samples {
                    Some(0) => return Err(self.err("feasibility", None, "samples", "must be at least 1".into())),
                    Some(n) => n,
                    None => 200,
                },
                control_radius: match f.control_radius {
                    Some(r) => self.positive("feasibility", None, "control_radius", r)?,
                    None => 10.0,
                },
            },
            None => FeasibilitySettings { states: 50, samples: 200, control_radius: 10.0 },
        };

        Ok(Config { field, convention: rf.cvar_convention, barrier, specs, grid, scenario, audit, feasibility })
    }

    fn spec(&self, i: usize, s: &RawSpec) -> Result<RiskSpec, ConfigError> {
        let stray = |key: &str, present: bool| -> Result<(), ConfigError> {
            if present {
                Err(self.err("specs", Some(i), key, format!("not a parameter of model {}", kind_name(s.model))))
            } else {
                Ok(())
            }
        };
        let required = |key: &str, v: Option<f64>| v.ok_or_else(|| self.err("specs", Some(i), key, "missing".into()));
        match s.model {
            ModelKind::Er => {
                stray("q", s.q.is_some())?;
                for (k, v) in [("alpha", s.alpha), ("beta", s.beta), ("gamma", s.gamma), ("lambda", s.lambda)] {
                    stray(k, v.is_some())?;
                }
                Ok(RiskSpec::Er)
            }
            ModelKind::Cvar => {
                for (k, v) in [("alpha", s.alpha), ("beta", s.beta), ("gamma", s.gamma), ("lambda", s.lambda)] {
                    stray(k, v.is_some())?;
                }
                let q = required("q", s.q)?;
                RiskSpec::cvar(q).map_err(|_| self.err("specs", Some(i), "q", format!("must lie in [0, 1], got {q}")))
            }
            ModelKind::Cpt => {
                stray("q", s.q.is_some())?;
                let theta = CptParams {
                    alpha: required("alpha", s.alpha)?,
                    beta: required("beta", s.beta)?,
                    gamma: required("gamma", s.gamma)?,
                    lambda: required("lambda", s.lambda)?,
                };
                for (k, v) in [("alpha", theta.alpha), ("beta", theta.beta), ("gamma", theta.gamma), ("lambda", theta.lambda)] {
                    self.positive("specs", Some(i), k, v)?;
                }
                theta.validate().map_err(|e| ConfigError { line: locate(self.text, "specs", Some(i), "gamma"), message: e.to_string() })?;
                Ok(RiskSpec::Cpt(theta))
            }
        }
    }

    fn scenario(
        &self,
        sc: RawScenario,
        obstacles: &[RawObstacle],
        field: CostFieldParams,
        barrier: BarrierConfig,
        convention: CvarConvention,
    ) -> Result<Scenario, ConfigError> {
        let start = self.finite2("scenario", None, "start", sc.start)?;
        let goal = self.finite2("scenario", None, "goal", sc.goal)?;
        let gain = self.finite2("scenario", None, "gain", sc.gain)?;
        if gain.x < 0.0 || gain.y < 0.0 {
            return Err(self.err("scenario", None, "gain", "gains must be non-negative".into()));
        }
        let agent = match sc.agent {
            AgentKind::SingleIntegrator => {
                if sc.offset.is_some() || sc.heading.is_some() {
                    let key = if sc.offset.is_some() { "offset" } else { "heading" };
                    return Err(self.err("scenario", None, key, "only meaningful for agent = \"unicycle\"".into()));
                }
                AgentModel::SingleIntegrator { position: start }
            }
            AgentKind::Unicycle => {
                let offset = self.positive("scenario", None, "offset", sc.offset.unwrap_or(DEFAULT_UNICYCLE_OFFSET))?;
                match sc.heading {
                    Some(h) if h.is_finite() => AgentModel::Unicycle { position: start, heading: h, offset },
                    Some(h) => return Err(self.err("scenario", None, "heading", format!("must be finite, got {h}"))),
                    None => AgentModel::unicycle_facing(start, goal, offset),
                }
            }
        };
        let dt = self.positive("scenario", None, "dt", sc.dt.unwrap_or(DEFAULT_DT))?;
        let t_max = sc.t_max.unwrap_or(DEFAULT_T_MAX);
        if !(t_max.is_finite() && t_max > dt) {
            return Err(self.err("scenario", None, "t_max", format!("must be finite and > dt, got {t_max}")));
        }
        let goal_tol = self.positive("scenario", None, "goal_tol", sc.goal_tol.unwrap_or(DEFAULT_GOAL_TOL))?;

        let mut obs = Vec::with_capacity(obstacles.len());
        for (i, o) in obstacles.iter().enumerate() {
            let s = self.finite2("obstacles", Some(i), "start", o.start)?;
            let g = self.finite2("obstacles", Some(i), "goal", o.goal)?;
            let speed = match o.speed {
                Some(v) if v.is_finite() && v >= 0.0 => v,
                Some(v) => return Err(self.err("obstacles", Some(i), "speed", format!("must be finite and >= 0, got {v}"))),
                None => default_obstacle_speed(s, g, start, goal, gain),
            };
            obs.push(ObstacleModel { position: s, start: s, goal: g, speed });
        }
        let scenario = Scenario {
            agent,
            goal,
            nominal_gain: gain,
            obstacles: obs,
            field,
            risk: RiskSpec::Er,
            barrier,
            convention,
            dt,
            t_max,
            goal_tol,
        };
        scenario.validate().map_err(|e| ConfigError { line: locate(self.text, "scenario", None, "agent"), message: e.to_string() })?;
        Ok(scenario)
    }
}
