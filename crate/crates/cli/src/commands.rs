use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpa_core::barrier::{control_set_probe, min_compose, Barrier, StateContext};
use rpa_core::field::{
    cost_levels, inclusiveness_audit, level_set, rasterize, safe_mask, versatility_audit, AuditDomain, FieldGrid,
    RiskField,
};
use rpa_core::risk::{ModelKind, RiskSpec};
use rpa_core::sim::{nominal_control, run, step_obstacle};
use rpa_core::Vec2;
use serde_json::{json, Value};

use crate::config::{kind_name, Config, NamedSpec};
use crate::output::{self, Format};
use crate::CliError;

pub fn field(cfg: &Config, specs: &[NamedSpec], out: &Path, format: Format) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let (src, bounds, nx, ny) = (grid.source, grid.bounds, grid.nx, grid.ny);
    let params = cfg.field;
    let mean = FieldGrid::from_fn(bounds, nx, ny, |p| params.cost_mean(src - p))?;
    let sigma = FieldGrid::from_fn(bounds, nx, ny, |p| params.cost_sigma(src - p))?;
    output::write_grid(out, "c_mu", &mean, format)?;
    output::write_grid(out, "c_sigma", &sigma, format)?;
    println!("c_mu range [{:.4}, {:.4}], rho {}", mean.min(), mean.max(), cfg.barrier.rho);
    for s in specs {
        let field = RiskField::new(s.spec, params, cfg.convention)?;
        let risk = rasterize(&field, src, bounds, nx, ny)?;
        let safe = safe_mask(&risk, cfg.barrier.rho);
        output::write_grid(out, &format!("risk_{}", s.name), &risk, format)?;
        output::write_grid(out, &format!("safe_{}", s.name), &output::mask_grid(&safe, &risk), format)?;
        let lines = level_set(&risk, cfg.barrier.rho);
        output::write_json(out, &format!("levelset_{}.json", s.name), &output::level_sets_json(&lines))?;
        println!("{}: {:.2}% safe, {} level-set curve(s)", s.name, 100.0 * safe.fraction(), lines.len());
    }
    Ok(())
}

pub fn audit(cfg: &Config, specs: &[NamedSpec], out: &Path) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let domain = AuditDomain::new(cfg.field, grid.source, grid.bounds, grid.nx, grid.ny, cfg.audit.rho)?;
    let mut families: BTreeMap<ModelKind, Vec<&NamedSpec>> = BTreeMap::new();
    for s in specs {
        families.entry(s.spec.kind()).or_default().push(s);
    }
    let family_specs = |kind: ModelKind| -> Vec<RiskSpec> { families[&kind].iter().map(|s| s.spec).collect() };
    let (c_min, c_max) = domain.cost_range();

    let mut relations = Vec::new();
    for (a, b) in [(ModelKind::Cpt, ModelKind::Cvar), (ModelKind::Cpt, ModelKind::Er), (ModelKind::Cvar, ModelKind::Er)] {
        if !(families.contains_key(&a) && families.contains_key(&b)) {
            continue;
        }
        let report = inclusiveness_audit(&family_specs(a), &family_specs(b), &domain)?;
        println!("{} vs {}: {:?}", kind_name(a), kind_name(b), report.verdict);
        relations.push(json!({
            "family1": kind_name(a),
            "family2": kind_name(b),
            "report": report,
        }));
    }

    let levels = cost_levels(&domain, cfg.audit.levels);
    let mut versatility = serde_json::Map::new();
    for (&kind, members) in &families {
        let report = versatility_audit(&family_specs(kind), &domain, &levels)?;
        match report.interval {
            Some([lo, hi]) => println!("{} versatility interval [{lo:.4}, {hi:.4}]", kind_name(kind)),
            None => println!("{} versatility interval empty", kind_name(kind)),
        }
        versatility.insert(
            kind_name(kind).to_string(),
            json!({
                "members": members.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(),
                "report": report,
            }),
        );
    }

    let report = json!({
        "scope": format!(
            "single source at ({}, {}), {}x{} cells over [{}, {}] x [{}, {}], rho = {}; relations hold for this instance only",
            grid.source.x, grid.source.y, grid.nx, grid.ny,
            grid.bounds.min.x, grid.bounds.max.x, grid.bounds.min.y, grid.bounds.max.y, cfg.audit.rho
        ),
        "rho": cfg.audit.rho,
        "cost_range": [c_min, c_max],
        "families": families.iter().map(|(k, v)| {
            (kind_name(*k).to_string(), json!(v.iter().map(|s| json!({"name": s.name, "spec": s.spec})).collect::<Vec<_>>()))
        }).collect::<serde_json::Map<_, _>>(),
        "inclusiveness": relations,
        "versatility": versatility,
    });
    output::write_json(out, "audit.json", &report)?;
    Ok(())
}

pub fn simulate(cfg: &Config, specs: &[NamedSpec], out: &Path, format: Format) -> Result<(), CliError> {
    let template = cfg.scenario()?;
    let mut rows = Vec::new();
    for s in specs {
        let log = run(&template.with_risk(s.spec))?;
        let name = format!("sim_{}.{}", s.name, format.extension());
        match format {
            Format::Csv => output::write_text(out, &name, &output::sim_csv(&log))?,
            Format::Json => output::write_json(out, &name, &output::sim_json(&log))?,
        };
        let sm = &log.summary;
        println!(
            "{}: reached {} min_h {} total_deviation {:.4} infeasible_steps {}",
            s.name,
            sm.reached_goal,
            sm.min_h.map_or("-".to_string(), |h| format!("{h:.4}")),
            sm.total_deviation,
            sm.infeasible_steps
        );
        rows.push((s.name.clone(), kind_name(s.spec.kind()), log.summary));
    }
    if rows.len() >= 2 {
        output::write_text(out, "comparison.csv", &output::comparison_csv(&rows))?;
    }
    Ok(())
}

/// Margins of the barrier condition for the nominal control along the
/// unfiltered trajectory, plus a sampled control-set probe at each state.
pub fn feasibility(cfg: &Config, specs: &[NamedSpec], out: &Path, seed: u64) -> Result<(), CliError> {
    let scenario = cfg.scenario()?;
    let settings = &cfg.feasibility;
    if scenario.obstacles.is_empty() {
        return Err(CliError::Config(crate::config::ConfigError {
            line: None,
            message: "feasibility needs at least one [[obstacles]] entry".into(),
        }));
    }
    let barriers = specs
        .iter()
        .map(|s| Barrier::with_convention(s.spec, scenario.field, scenario.barrier, scenario.convention))
        .collect::<Result<Vec<_>, _>>()?;

    // Unfiltered trajectory up to the goal, then evenly spaced states on it.
    let mut trajectory = Vec::new();
    let mut agent = scenario.agent;
    let mut obstacles = scenario.obstacles.clone();
    for step in 0..=scenario.max_steps() {
        let p = agent.controlled_point();
        let u = nominal_control(p, scenario.goal, scenario.nominal_gain);
        trajectory.push((step, p, u, obstacles.clone()));
        if (scenario.goal - p).norm() <= scenario.goal_tol {
            break;
        }
        agent = agent.step(u, scenario.dt);
        for o in &mut obstacles {
            *o = step_obstacle(o, scenario.dt);
        }
    }
    let count = settings.states.min(trajectory.len());
    let picks: Vec<usize> = match count {
        0 => Vec::new(),
        1 => vec![0],
        n => (0..n).map(|k| k * (trajectory.len() - 1) / (n - 1)).collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::new();
    let mut feasible_counts = vec![0usize; specs.len()];
    let mut probe_counts = vec![0usize; specs.len()];
    // Per non-CPT spec: (states where its samples sit inside the loosest CPT member, states checked).
    let mut contained = vec![(0usize, 0usize); specs.len()];
    let has_cpt = specs.iter().any(|s| s.spec.kind() == ModelKind::Cpt);
    let all: Vec<RiskSpec> = specs.iter().map(|s| s.spec).collect();

    for &k in &picks {
        let (step, p, u, obstacles) = &trajectory[k];
        let samples: Vec<Vec2> = (0..settings.samples)
            .map(|_| {
                let r = settings.control_radius * rng.gen::<f64>().sqrt();
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        // Each model guards against its own worst obstacle, as in the closed loop.
        let mut contexts = Vec::new();
        for b in &barriers {
            let items = obstacles
                .iter()
                .map(|o| {
                    let ctx = StateContext::single_integrator(*p, o.position, o.velocity());
                    Ok((b.value(ctx.xi()), b.constraint(&ctx)?))
                })
                .collect::<Result<Vec<_>, rpa_core::Error>>()?;
            let o = &obstacles[min_compose(&items).expect("at least one obstacle").index];
            contexts.push(StateContext::single_integrator(*p, o.position, o.velocity()));
        }
        let mut models = Vec::new();
        for (i, (s, b)) in specs.iter().zip(&barriers).enumerate() {
            let m = b.feasibility_margin(&contexts[i], *u)?;
            let probe = control_set_probe(&[s.spec], scenario.field, scenario.barrier, &contexts[i], &samples)?;
            let admissible = probe.counts()[0];
            feasible_counts[i] += usize::from(m.feasible);
            probe_counts[i] += admissible;
            models.push(json!({ "name": s.name, "margin": m, "probe_feasible": admissible }));
        }
        if has_cpt {
            for i in (0..specs.len()).filter(|&i| specs[i].spec.kind() != ModelKind::Cpt) {
                let probe = control_set_probe(&all, scenario.field, scenario.barrier, &contexts[i], &samples)?;
                if let Some(best) = probe.loosest(ModelKind::Cpt) {
                    contained[i].1 += 1;
                    contained[i].0 += usize::from(probe.contained_in(i, best));
                }
            }
        }
        states.push(json!({
            "step": step,
            "t": *step as f64 * scenario.dt,
            "point": [p.x, p.y],
            "models": models,
        }));
    }
    let evaluated = picks.len();

    let summary: Vec<Value> = specs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            println!(
                "{}: nominal control feasible at {}/{} states, {} of {} sampled controls admissible",
                s.name,
                feasible_counts[k],
                evaluated,
                probe_counts[k],
                evaluated * settings.samples
            );
            json!({
                "name": s.name,
                "spec": s.spec,
                "feasible_states": feasible_counts[k],
                "feasible_fraction": feasible_counts[k] as f64 / evaluated.max(1) as f64,
                "probe_feasible": probe_counts[k],
                "contained_in_loosest_cpt": (s.spec.kind() != ModelKind::Cpt && has_cpt)
                    .then(|| json!({ "holds": contained[k].0, "states": contained[k].1 })),
            })
        })
        .collect();
    let report = json!({
        "seed": seed,
        "states": evaluated,
        "samples_per_state": settings.samples,
        "control_radius": settings.control_radius,
        "summary": summary,
        "per_state": states,
    });
    output::write_json(out, "feasibility.json", &report)?;
    Ok(())
}
