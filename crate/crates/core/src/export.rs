//! CSV writers. Column layouts are documented in `docs/formats.md`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{DensityGrid, LineGrid, NodeClass, TriangleGrid};
use crate::harness::ConvergencePoint;
use crate::master::{ProbabilityField, StateSpace};
use crate::sim::TrajectoryEnsemble;

/// Shortest round-trip text, in exponent form below `1e-4`.
pub fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn header(n: usize, prefix: &[&str], suffix: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend(suffix.iter().map(|s| s.to_string()));
    h
}

/// `run,seed,step,x1..xn`: every recorded state of every run.
pub fn write_trajectories<W: Write>(out: W, ensemble: &TrajectoryEnsemble) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = ensemble.trajectories.first().map_or(0, |t| t.initial().agents());
    w.write_record(header(n, &["run", "seed", "step"], &[]))?;
    for (run, tr) in ensemble.trajectories.iter().enumerate() {
        for (step, state) in &tr.states {
            let mut rec = vec![run.to_string(), tr.seed.to_string(), step.to_string()];
            rec.extend(state.wealth_vec().iter().map(f64::to_string));
            w.write_record(rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `run,seed,absorbed_step,corner`: absorption events (empty fields if none).
pub fn write_absorptions<W: Write>(out: W, ensemble: &TrajectoryEnsemble) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "seed", "absorbed_step", "corner"])?;
    for (run, tr) in ensemble.trajectories.iter().enumerate() {
        let (step, corner) = tr
            .absorbed_at
            .map_or((String::new(), String::new()), |a| (a.step.to_string(), (a.corner + 1).to_string()));
        w.write_record([run.to_string(), tr.seed.to_string(), step, corner])?;
    }
    w.flush()?;
    Ok(())
}

/// `step,time,x1..xn,probability` for each field, skipping zero entries.
pub fn write_fields<W: Write>(out: W, space: &StateSpace, fields: &[ProbabilityField]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(space.agents(), &["step", "time"], &["probability"]))?;
    let l = space.step();
    for f in fields {
        for (i, &p) in f.mass.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut rec = vec![f.time.to_string(), (f.time as f64 * l * l).to_string()];
            rec.extend(space.state(i).wealth_vec().iter().map(f64::to_string));
            rec.push(num(p));
            w.write_record(rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `time,x,kind,density,mass` with `kind` one of `density` or `atom`.
pub fn write_line_grids<W: Write>(out: W, grids: &[LineGrid]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "x", "kind", "density", "mass"])?;
    for g in grids {
        let masses = g.node_masses();
        for i in 0..=g.cells {
            let t = g.time.to_string();
            let x = g.node(i).to_string();
            if i == 0 || i == g.cells {
                w.write_record([t, x, "atom".into(), String::new(), num(masses[i])])?;
            } else {
                w.write_record([t, x, "density".into(), num(g.density[i]), num(masses[i])])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `time,x1,x2,x3,kind,density,mass` with `kind` one of `interior`,
/// `edge` (density per unit edge coordinate) or `corner`.
pub fn write_triangle_grids<W: Write>(out: W, grids: &[TriangleGrid]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "x1", "x2", "x3", "kind", "density", "mass"])?;
    for g in grids {
        let h = g.spacing();
        let masses = g.node_masses();
        for ((i, j), m) in g.nodes().zip(masses) {
            let x1 = i as f64 * h;
            let x2 = j as f64 * h;
            let x3 = (g.cells - i - j) as f64 * h;
            let (kind, density) = match g.classify(i, j) {
                NodeClass::Interior => ("interior", num(g.density[g.index(i, j)])),
                NodeClass::Edge { edge, s } => ("edge", num(g.edges[edge][s])),
                NodeClass::Corner(_) => ("corner", String::new()),
            };
            w.write_record([
                g.time.to_string(),
                x1.to_string(),
                x2.to_string(),
                x3.to_string(),
                kind.to_string(),
                density,
                num(m),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Interior density as a matrix: row `i` is `x1 = i h`, column `j` is
/// `x2 = j h`; boundary nodes and points outside the triangle are empty.
pub fn write_triangle_matrix<W: Write>(out: W, grid: &TriangleGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let h = grid.spacing();
    let mut head = vec!["x1\\x2".to_string()];
    head.extend((0..=grid.cells).map(|j| (j as f64 * h).to_string()));
    w.write_record(head)?;
    for i in 0..=grid.cells {
        let mut row = vec![(i as f64 * h).to_string()];
        for j in 0..=grid.cells {
            let cell = if i + j <= grid.cells && grid.classify(i, j) == NodeClass::Interior {
                num(grid.density[grid.index(i, j)])
            } else {
                String::new()
            };
            row.push(cell);
        }
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Masses held off the interior of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMasses {
    pub time: f64,
    pub interior: f64,
    /// Segment only: atoms at `x1 = 0` and `x1 = N`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<[f64; 2]>,
    /// Triangle only: mass on the faces `x1 = 0`, `x2 = 0`, `x3 = 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<[f64; 3]>,
    /// Triangle only: atoms where agent 1, 2 or 3 holds everything.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corners: Option<[f64; 3]>,
}

pub fn boundary_masses(grid: &DensityGrid) -> BoundaryMasses {
    match grid {
        DensityGrid::Line(g) => BoundaryMasses {
            time: g.time,
            interior: g.interior_mass(),
            atoms: Some(g.atoms),
            edges: None,
            corners: None,
        },
        DensityGrid::Triangle(g) => BoundaryMasses {
            time: g.time,
            interior: g.interior_mass(),
            atoms: None,
            edges: Some(g.edge_masses()),
            corners: Some(g.corners),
        },
    }
}

/// `step,tv,ks,noise,pre_absorption_variance`, one row per lattice step.
pub fn write_convergence<W: Write>(out: W, points: &[ConvergencePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "tv", "ks", "noise", "pre_absorption_variance"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), num);
    for p in points {
        w.write_record([
            p.step.to_string(),
            num(p.report.metrics.tv),
            opt(p.report.metrics.ks),
            opt(p.report.routes[0].noise),
            opt(p.pre_absorption_variance),
        ])?;
    }
    w.flush()?;
    Ok(())
}
