//! File formats: grids, level sets, simulation logs and comparison tables.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rpa_core::field::{FieldGrid, Mask, Polyline};
use rpa_core::sim::{SimLog, SimSummary};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Row-major grid with a leading metadata comment.
pub fn grid_csv(grid: &FieldGrid) -> String {
    let b = grid.bounds();
    let (nx, ny) = grid.resolution();
    let mut out = format!(
        "# bounds={},{},{},{} resolution={nx},{ny}\ni,j,x,y,value\n",
        b.min.x, b.min.y, b.max.x, b.max.y
    );
    for j in 0..ny {
        for i in 0..nx {
            let c = grid.cell_center(i, j);
            let _ = writeln!(out, "{i},{j},{},{},{}", c.x, c.y, grid.get(i, j));
        }
    }
    out
}

pub fn grid_json(grid: &FieldGrid) -> Value {
    let b = grid.bounds();
    let (nx, ny) = grid.resolution();
    json!({
        "bounds": { "min": [b.min.x, b.min.y], "max": [b.max.x, b.max.y] },
        "resolution": [nx, ny],
        "values": grid.values(),
    })
}

/// A mask as a 0/1 grid on the same lattice.
pub fn mask_grid(mask: &Mask, like: &FieldGrid) -> FieldGrid {
    let (nx, ny) = like.resolution();
    let values = mask.cells().iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    FieldGrid::from_values(like.bounds(), nx, ny, values).expect("mask and grid share a lattice")
}

/// Each polyline as an array of `[x, y]` pairs.
pub fn level_sets_json(lines: &[Polyline]) -> Value {
    Value::Array(lines.iter().map(|l| json!(l.points.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>())).collect())
}

pub fn sim_csv(log: &SimLog) -> String {
    let n_obs = log.records.first().map_or(0, |r| r.obstacles.len());
    let mut out = String::from(
        "step,t,agent_x,agent_y,heading,point_x,point_y,u_nom_x,u_nom_y,u_x,u_y,delta_x,delta_y,h_min,active_obstacle,feasible",
    );
    for k in 0..n_obs {
        let _ = write!(out, ",obs{k}_x,obs{k}_y");
    }
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &log.records {
        let p = r.agent.position();
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.t,
            p.x,
            p.y,
            opt(r.agent.heading()),
            r.point.x,
            r.point.y,
            r.u_nominal.x,
            r.u_nominal.y,
            r.u_filtered.x,
            r.u_filtered.y,
            r.delta.x,
            r.delta.y,
            opt(r.h_min),
            r.active_obstacle.map(|i| i.to_string()).unwrap_or_default(),
            u8::from(r.feasible),
        );
        for o in &r.obstacles {
            let _ = write!(out, ",{},{}", o.x, o.y);
        }
        out.push('\n');
    }
    out
}

pub fn sim_json(log: &SimLog) -> Value {
    serde_json::to_value(log).expect("simulation logs serialize")
}

pub const COMPARISON_HEADER: &str =
    "name,model,reached_goal,goal_time,min_h,total_deviation,max_deviation,infeasible_steps,steps,final_x,final_y";

pub fn comparison_csv(rows: &[(String, &'static str, SimSummary)]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (name, model, s) in rows {
        let _ = writeln!(
            out,
            "{name},{model},{},{},{},{},{},{},{},{},{}",
            s.reached_goal,
            opt(s.goal_time),
            opt(s.min_h),
            s.total_deviation,
            s.max_deviation,
            s.infeasible_steps,
            s.steps,
            s.final_position.x,
            s.final_position.y,
        );
    }
    out
}

pub fn write_text(dir: &Path, name: &str, contents: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> io::Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_text(dir, name, &text)
}

pub fn write_grid(dir: &Path, stem: &str, grid: &FieldGrid, format: Format) -> io::Result<PathBuf> {
    let name = format!("{stem}.{}", format.extension());
    match format {
        Format::Csv => write_text(dir, &name, &grid_csv(grid)),
        Format::Json => write_json(dir, &name, &grid_json(grid)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rpa_core::field::Bounds;

    #[test]
    fn grid_csv_layout() {
        let grid = FieldGrid::from_fn(Bounds::square(0.0, 2.0), 2, 2, |p| p.x + 10.0 * p.y).unwrap();
        let csv = grid_csv(&grid);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# bounds=0,0,2,2 resolution=2,2");
        assert_eq!(lines[1], "i,j,x,y,value");
        assert_eq!(lines[2], "0,0,0.5,0.5,5.5");
        assert_eq!(lines[3], "1,0,1.5,0.5,6.5");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn grid_json_keys() {
        let grid = FieldGrid::from_fn(Bounds::square(0.0, 1.0), 3, 2, |_| 1.0).unwrap();
        let v = grid_json(&grid);
        assert_eq!(v["resolution"], json!([3, 2]));
        assert_eq!(v["values"].as_array().unwrap().len(), 6);
        assert_eq!(v["bounds"]["max"], json!([1.0, 1.0]));
    }
}
