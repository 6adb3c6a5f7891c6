//! Scenario execution: ground-state reports, trajectory runs, criteria
//! evaluation, sweeps and artifact emission.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::analysis::{
    exit_time_energy, exit_time_fluct_fit, exit_time_fluct_inflection,
    exit_time_momentum_backprop, offset_angle, spot_size, static_traversal, transverse_fluctuation,
    wkb_like_time, CriterionId, CriterionResult, FitParams, FluctuationOpts,
};
use crate::config::RunConfig;
use crate::dynamics::{
    classical_backpropagate, ground_state_init, integrate, IntegratorConfig, Trajectory,
};
use crate::effective::{contour_lines, ContourGrid, GridSpec};
use crate::error::{Error, Result};
use crate::model::PotentialModel;
use crate::output::{
    backprop_csv, emit_plot_scripts, write_contour_csv, write_criteria_csv, write_trajectory_csv,
    CriteriaRow,
};
use crate::pulse::{intensity_conversion, FieldPulse};

/// Number of sweep workers: `TUNNEL_THREADS` overrides the CLI flag, which
/// overrides the machine's parallelism.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    if let Ok(v) = std::env::var("TUNNEL_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    if let Some(n) = flag {
        if n >= 1 {
            return n;
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Amplitude, frequency and cycle count describing a pulse in the criteria
/// table (static fields report their magnitude and zeros).
pub fn pulse_meta(pulse: &FieldPulse) -> (f64, f64, f64) {
    match pulse {
        FieldPulse::Static { f } => {
            ((f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt(), 0.0, 0.0)
        }
        FieldPulse::HalfCycleSin3 { f0, omega } => (*f0, *omega, 0.5),
        FieldPulse::MultiCycle { f0, omega, cycles } => (*f0, *omega, *cycles),
        FieldPulse::CosEnvelope { a0, omega, cycles, .. } => (*a0, *omega, *cycles),
        FieldPulse::RotatingHalfCycle { e0, omega } => (*e0, *omega, 0.5),
    }
}

pub struct ScenarioReport {
    pub rows: Vec<CriteriaRow>,
    pub files: Vec<PathBuf>,
}

/// Ground-state summary serialized as JSON.
pub fn ground_state_report(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let model = cfg.model.resolve(cfg.u)?;
    let (state, energy) = ground_state_init(&model, cfg.u)?;
    let s: Vec<f64> = state.fluctuations();
    let mut map = serde_json::Map::new();
    map.insert("energy".into(), serde_json::json!(energy));
    map.insert("s".into(), serde_json::json!(s));
    map.insert("u".into(), serde_json::json!(cfg.u));
    if let PotentialModel::GaussianWell1d { depth } = &model {
        map.insert("depth".into(), serde_json::json!(depth));
    }
    Ok(serde_json::Value::Object(map).to_string())
}

fn integration_config(cfg: &RunConfig, pulse: &FieldPulse) -> IntegratorConfig {
    let mut t_end = cfg.integrator.t_end;
    let (_, support_end) = pulse.support();
    if support_end.is_finite() {
        t_end = t_end.max(support_end + 1.0);
    }
    if cfg.criteria.contains(&CriterionId::MomentumBackprop) {
        t_end = t_end.max(cfg.t_backprop);
    }
    IntegratorConfig { t_end, ..cfg.integrator }
}

/// Integrate one pulse from the ground state.
pub fn run_trajectory(cfg: &RunConfig, pulse: &FieldPulse) -> Result<Trajectory> {
    let model = cfg.model.resolve(cfg.u)?;
    let (state, _) = ground_state_init(&model, cfg.u)?;
    integrate(&state, &model, pulse, &cfg.frame, &integration_config(cfg, pulse))
}

fn fluct_series(
    cfg: &RunConfig,
    traj: &Trajectory,
    pulse: &FieldPulse,
) -> Result<crate::analysis::FluctuationSeries> {
    let (a, b) = pulse.support();
    let t_max = if a.is_finite() && b.is_finite() {
        Some(b + (b - a).min(traj.t_end() - b).max(0.0))
    } else {
        None
    };
    let opts = FluctuationOpts {
        n: cfg.fluct.samples,
        t_max,
        window_frac: cfg.fluct.window_frac,
    };
    transverse_fluctuation(traj, pulse, &opts)
}

/// Evaluate every requested criterion for one pulse; returns the rows and
/// the underlying trajectory.
pub fn evaluate_point(cfg: &RunConfig, pulse: &FieldPulse) -> Result<(Vec<CriteriaRow>, Trajectory)> {
    let model = cfg.model.resolve(cfg.u)?;
    let (state, e0) = ground_state_init(&model, cfg.u)?;
    let int_cfg = integration_config(cfg, pulse);
    let traj = integrate(&state, &model, pulse, &cfg.frame, &int_cfg)?;
    let (f0, omega, n_cycles) = pulse_meta(pulse);
    let intensity = intensity_conversion(f0);

    // shared per-point observables for 3-D runs
    let (spot, angle_deg) = if traj.dim() == 3 {
        let spot = spot_size(&traj, cfg.detection_radius)?.map(|(s, _)| s);
        let angle = offset_angle(&traj, cfg.detection_radius, 2000)?
            .final_angle
            .map(|a| a.to_degrees());
        (spot, angle)
    } else {
        (None, None)
    };

    let mut rows = Vec::with_capacity(cfg.criteria.len());
    for &criterion in &cfg.criteria {
        let result: CriterionResult = match criterion {
            CriterionId::Energy => exit_time_energy(&traj, &model, pulse, &cfg.frame),
            CriterionId::MomentumBackprop => {
                exit_time_momentum_backprop(&traj, &model, pulse, cfg.t_backprop, &int_cfg)?
            }
            CriterionId::StaticTraversal => {
                let FieldPulse::Static { f } = pulse else {
                    return Err(Error::config(
                        "static_traversal criterion requires a static pulse",
                    ));
                };
                static_traversal(&traj, &model, f, e0)?
            }
            CriterionId::WkbIntegral => {
                let FieldPulse::Static { f } = pulse else {
                    return Err(Error::config(
                        "wkb_integral criterion requires a static pulse",
                    ));
                };
                match wkb_like_time(&model, f, e0, cfg.u, cfg.kinetic_factor_two) {
                    Ok(tau) => CriterionResult {
                        criterion: CriterionId::WkbIntegral,
                        found: true,
                        tau_exit: Some(tau),
                        tau_max: 0.0,
                        exit_position: None,
                        exit_momentum: None,
                    },
                    Err(Error::NoBarrier(_)) => CriterionResult {
                        criterion: CriterionId::WkbIntegral,
                        found: false,
                        tau_exit: None,
                        tau_max: 0.0,
                        exit_position: None,
                        exit_momentum: None,
                    },
                    Err(e) => return Err(e),
                }
            }
            CriterionId::FluctFit => {
                let series = fluct_series(cfg, &traj, pulse)?;
                let params = FitParams {
                    plateau_slope_tol: cfg.fluct.plateau_slope_tol,
                    suffix_stability: cfg.fluct.suffix_stability,
                };
                exit_time_fluct_fit(&series, pulse, &params)
            }
            CriterionId::FluctInflection => {
                let series = fluct_series(cfg, &traj, pulse)?;
                exit_time_fluct_inflection(&series, pulse).0
            }
        };
        rows.push(CriteriaRow {
            result,
            f0,
            omega,
            n_cycles,
            intensity_wcm2: intensity,
            spot_size: spot,
            offset_angle_deg: angle_deg,
        });
    }
    Ok((rows, traj))
}

/// Equipotential contour of the effective potential in the (x3, s3) plane
/// (the (x, s) plane in 1-D), with the remaining coordinates frozen at their
/// ground-state values.
pub fn contour_grid(cfg: &RunConfig) -> Result<ContourGrid> {
    let spec = cfg
        .contour
        .as_ref()
        .ok_or_else(|| Error::config("no contour section in config"))?;
    let model = cfg.model.resolve(cfg.u)?;
    let (state, e0) = ground_state_init(&model, cfg.u)?;
    let s_ground = state.fluctuations();
    let t = spec.time.unwrap_or_else(|| cfg.pulse.peak_time());
    let field = cfg.pulse.field_vector(t);
    let level = spec.level.unwrap_or(e0);
    let dim = model.dim();
    let u = cfg.u;
    let f = |x: f64, s: f64| {
        let s = s.max(1e-6);
        let v = if dim == 1 {
            model.effective_potential(field, &[x], &[s], u)
        } else {
            model.effective_potential(field, &[0.0, 0.0, x], &[s_ground[0], s_ground[1], s], u)
        };
        v.unwrap_or(f64::INFINITY)
    };
    let grid = GridSpec {
        x_min: spec.x_min,
        x_max: spec.x_max,
        s_min: spec.s_min,
        s_max: spec.s_max,
        nx: spec.resolution,
        ns: spec.resolution,
    };
    Ok(contour_lines(f, &grid, level))
}

/// Run a full scenario: sweep (or single point), criteria table, first
/// trajectory, optional contour and plot scripts.
pub fn run_scenario(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<ScenarioReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let points: Vec<FieldPulse> = match &cfg.sweep {
        Some(sweep) => sweep
            .values
            .iter()
            .map(|&v| cfg.pulse_with(sweep.parameter, v))
            .collect::<Result<_>>()?,
        None => vec![cfg.pulse.clone()],
    };

    let n_points = points.len();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<(Vec<CriteriaRow>, Trajectory)>>>> =
        Mutex::new((0..n_points).map(|_| None).collect());
    let workers = threads.clamp(1, n_points.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n_points {
                    break;
                }
                let res = evaluate_point(cfg, &points[i]);
                slots.lock().expect("worker panicked")[i] = Some(res);
            });
        }
    });
    let results = slots.into_inner().expect("worker panicked");

    let mut rows = Vec::new();
    let mut first_traj: Option<(Trajectory, FieldPulse)> = None;
    for (i, slot) in results.into_iter().enumerate() {
        let (point_rows, traj) = slot.expect("all points scheduled")?;
        rows.extend(point_rows);
        if i == 0 {
            first_traj = Some((traj, points[0].clone()));
        }
    }

    let mut files = Vec::new();
    let model = cfg.model.resolve(cfg.u)?;
    if let Some((traj, pulse)) = &first_traj {
        let path = out_dir.join("trajectory.csv");
        write_trajectory_csv(&path, traj, &model, pulse, &cfg.frame)?;
        files.push(path);
    }
    if !cfg.criteria.is_empty() {
        let path = out_dir.join("criteria.csv");
        write_criteria_csv(&path, &rows)?;
        files.push(path);
    }
    if cfg.contour.is_some() {
        let grid = contour_grid(cfg)?;
        let path = out_dir.join("contour.csv");
        write_contour_csv(&path, &grid)?;
        files.push(path);
    }
    files.extend(emit_plot_scripts(out_dir)?);
    Ok(ScenarioReport { rows, files })
}

/// Back-propagation comparison artifact: forward quantum run plus the
/// classical path integrated backwards from `t_backprop`.
pub fn run_backprop(cfg: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let model = cfg.model.resolve(cfg.u)?;
    let mut int_cfg = integration_config(cfg, &cfg.pulse);
    int_cfg.t_end = int_cfg.t_end.max(cfg.t_backprop);
    let (state, _) = ground_state_init(&model, cfg.u)?;
    let traj = integrate(&state, &model, &cfg.pulse, &cfg.frame, &int_cfg)?;
    let st = traj.state_at(cfg.t_backprop)?;
    let x_f = st.positions();
    let p_f: Vec<f64> = st.axes().iter().map(|a| a.p).collect();
    let back = classical_backpropagate(
        &x_f,
        &p_f,
        cfg.t_backprop,
        traj.t_start(),
        &model,
        &cfg.pulse,
        &int_cfg,
    )?;
    let path = out_dir.join("backprop.csv");
    std::fs::write(&path, backprop_csv(&traj, &back, 2000)?)?;
    Ok(path)
}
