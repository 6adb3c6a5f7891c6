//! Deterministic CSV emission and gnuplot script generation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::CriterionResult;
use crate::dynamics::{interaction_free_energy, Trajectory};
use crate::phase_space::quantum_hamiltonian;
use crate::effective::ContourGrid;
use crate::error::{Error, Result};
use crate::model::PotentialModel;
use crate::pulse::{FieldPulse, FrameSpec};

/// Shortest round-trip representation; rejects non-finite values.
pub fn fmt_f64(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(Error::domain(format!("non-finite value {v} in output")));
    }
    Ok(format!("{v}"))
}

fn fmt_opt(v: Option<f64>) -> Result<String> {
    match v {
        Some(v) => fmt_f64(v),
        None => Ok(String::new()),
    }
}

/// One row of a criteria table, already flattened for CSV.
#[derive(Debug, Clone)]
pub struct CriteriaRow {
    pub result: CriterionResult,
    pub f0: f64,
    pub omega: f64,
    /// Carrier cycles of the pulse (0 for static fields).
    pub n_cycles: f64,
    pub intensity_wcm2: f64,
    pub spot_size: Option<f64>,
    pub offset_angle_deg: Option<f64>,
}

impl CriteriaRow {
    /// Longitudinal exit coordinate: the single axis in 1-D, the radial
    /// distance in 3-D (the static ray lies on the third axis, so this is
    /// x3 there).
    fn exit_x(&self) -> Option<f64> {
        self.result.exit_position.as_ref().map(|x| {
            if x.len() == 1 {
                x[0]
            } else {
                x.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
        })
    }

    /// Exit momentum projected on the exit direction (the momentum itself
    /// in 1-D).
    fn exit_p(&self) -> Option<f64> {
        let p = self.result.exit_momentum.as_ref()?;
        if p.len() == 1 {
            return Some(p[0]);
        }
        let x = self.result.exit_position.as_ref()?;
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < 1e-12 {
            return Some(p.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        Some(x.iter().zip(p).map(|(xi, pi)| xi * pi).sum::<f64>() / r)
    }
}

pub const CRITERIA_HEADER: &str = "criterion,F0,omega,N,intensity_Wcm2,tau_max,tau_exit,tau_ion,exit_x,exit_p,spot_size,offset_angle_deg,found";

pub fn criteria_csv(rows: &[CriteriaRow]) -> Result<String> {
    let mut out = String::from(CRITERIA_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.result;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.criterion.as_str(),
            fmt_f64(row.f0)?,
            fmt_f64(row.omega)?,
            fmt_f64(row.n_cycles)?,
            fmt_f64(row.intensity_wcm2)?,
            fmt_f64(r.tau_max)?,
            fmt_opt(r.tau_exit)?,
            fmt_opt(r.tau_ionization())?,
            fmt_opt(row.exit_x())?,
            fmt_opt(row.exit_p())?,
            fmt_opt(row.spot_size)?,
            fmt_opt(row.offset_angle_deg)?,
            r.found
        )
        .expect("write to string");
    }
    Ok(out)
}

pub fn trajectory_csv(
    traj: &Trajectory,
    model: &PotentialModel,
    pulse: &FieldPulse,
    frame: &FrameSpec,
) -> Result<String> {
    let dim = traj.dim();
    let mut out = String::from("t");
    for name in ["x", "p", "s", "ps"] {
        for i in 1..=dim {
            write!(out, ",{name}{i}").expect("write to string");
        }
    }
    out.push_str(",HQ,E_nofield");
    let field_cols = ["Fx", "Fy", "Fz"];
    for col in field_cols.iter().take(if dim == 1 { 1 } else { 3 }) {
        write!(out, ",{col}").expect("write to string");
    }
    out.push('\n');
    for st in traj.samples() {
        let t = st.t;
        let hq = quantum_hamiltonian(&st, model, pulse, frame)?;
        let e_nf = interaction_free_energy(traj, t, model, pulse, frame)?;
        let field = pulse.field_vector(t);
        out.push_str(&fmt_f64(t)?);
        for a in st.axes() {
            write!(out, ",{}", fmt_f64(a.x)?).expect("write to string");
        }
        for a in st.axes() {
            write!(out, ",{}", fmt_f64(a.p)?).expect("write to string");
        }
        for a in st.axes() {
            write!(out, ",{}", fmt_f64(a.s)?).expect("write to string");
        }
        for a in st.axes() {
            write!(out, ",{}", fmt_f64(a.ps)?).expect("write to string");
        }
        write!(out, ",{},{}", fmt_f64(hq)?, fmt_f64(e_nf)?).expect("write to string");
        for f in field.iter().take(if dim == 1 { 1 } else { 3 }) {
            write!(out, ",{}", fmt_f64(*f)?).expect("write to string");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn contour_csv(grid: &ContourGrid) -> Result<String> {
    let mut out = String::from("x3,s3,segment_id\n");
    for (id, line) in grid.polylines.iter().enumerate() {
        for &(x, s) in line {
            writeln!(out, "{},{},{id}", fmt_f64(x)?, fmt_f64(s)?).expect("write to string");
        }
    }
    Ok(out)
}

/// Back-propagation comparison table: quantum expectation value vs the
/// classical back-propagated path.
pub fn backprop_csv(
    traj: &Trajectory,
    back: &crate::dynamics::ClassicalTrajectory,
    n: usize,
) -> Result<String> {
    let dim = traj.dim();
    let mut out = String::from("t");
    for i in 1..=dim {
        write!(out, ",xq{i}").expect("write to string");
    }
    for i in 1..=dim {
        write!(out, ",xcl{i}").expect("write to string");
    }
    for i in 1..=dim {
        write!(out, ",pcl{i}").expect("write to string");
    }
    out.push('\n');
    let t0 = back.sol.t_end.min(back.sol.t0);
    let t1 = back.sol.t_end.max(back.sol.t0);
    let dt = (t1 - t0) / (n - 1) as f64;
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        let st = traj.state_at(t)?;
        let x_cl = back.position_at(t);
        let p_cl = back.momentum_at(t);
        out.push_str(&fmt_f64(t)?);
        for a in st.axes() {
            write!(out, ",{}", fmt_f64(a.x)?).expect("write to string");
        }
        for v in &x_cl {
            write!(out, ",{}", fmt_f64(*v)?).expect("write to string");
        }
        for v in &p_cl {
            write!(out, ",{}", fmt_f64(*v)?).expect("write to string");
        }
        out.push('\n');
    }
    Ok(out)
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content.as_bytes())?;
    Ok(())
}

pub fn write_criteria_csv(path: &Path, rows: &[CriteriaRow]) -> Result<()> {
    write_atomic(path, &criteria_csv(rows)?)
}

pub fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory,
    model: &PotentialModel,
    pulse: &FieldPulse,
    frame: &FrameSpec,
) -> Result<()> {
    write_atomic(path, &trajectory_csv(traj, model, pulse, frame)?)
}

pub fn write_contour_csv(path: &Path, grid: &ContourGrid) -> Result<()> {
    write_atomic(path, &contour_csv(grid)?)
}

const CRITERIA_PLOT: &str = "set datafile separator ','\n\
set key autotitle columnhead\n\
set xlabel 'intensity (W/cm^2)'\n\
set ylabel 'tau_ion (a.u.)'\n\
set logscale x\n\
set grid\n\
plot 'criteria.csv' using 5:8 with linespoints title 'tau_ion'\n";

const TRAJECTORY_PLOT_3D: &str = "set datafile separator ','\n\
set key autotitle columnhead\n\
set xlabel 't (a.u.)'\n\
set grid\n\
plot 'trajectory.csv' using 1:4 with lines title 'x3', \\\n\
     'trajectory.csv' using 1:10 with lines title 's3', \\\n\
     'trajectory.csv' using 1:8 with lines title 's1'\n";

const TRAJECTORY_PLOT_1D: &str = "set datafile separator ','\n\
set key autotitle columnhead\n\
set xlabel 't (a.u.)'\n\
set grid\n\
plot 'trajectory.csv' using 1:2 with lines title 'x', \\\n\
     'trajectory.csv' using 1:4 with lines title 's'\n";

const CONTOUR_PLOT: &str = "set datafile separator ','\n\
set xlabel 'x3 (a.u.)'\n\
set ylabel 's3 (a.u.)'\n\
set grid\n\
plot 'contour.csv' using 1:2 with dots title 'equipotential'\n";

/// Generate gnuplot scripts next to the CSVs already present in `dir`.
/// Returns the script paths; errors if none of the known CSVs exist.
pub fn emit_plot_scripts(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let pairs: [(&str, &str, &str); 3] = [
        ("criteria.csv", "plot_criteria.gp", CRITERIA_PLOT),
        ("trajectory.csv", "plot_trajectory.gp", TRAJECTORY_PLOT_3D),
        ("contour.csv", "plot_contour.gp", CONTOUR_PLOT),
    ];
    for (csv, script, mut body) in pairs {
        let csv_path = dir.join(csv);
        if !csv_path.exists() {
            continue;
        }
        if csv == "trajectory.csv" {
            // a 1-D trajectory has fewer columns
            let head = std::fs::read_to_string(&csv_path)?;
            let ncols = head.lines().next().map_or(0, |l| l.split(',').count());
            if ncols < 19 {
                body = TRAJECTORY_PLOT_1D;
            }
        }
        let path = dir.join(script);
        write_atomic(&path, body)?;
        written.push(path);
    }
    if written.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "no criteria.csv, trajectory.csv or contour.csv in {}",
            dir.display()
        )));
    }
    Ok(written)
}
