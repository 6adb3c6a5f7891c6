//! Tunneling-time criteria and derived observables.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    classical_backpropagate, criterion_energy_flat, ground_state_init, integrate, IntegratorConfig,
    Trajectory,
};
use crate::effective::v_eff;
use crate::error::{Error, Result};
use crate::integrator::{find_all_zeros, find_zero};
use crate::model::PotentialModel;
use crate::pulse::{FieldPulse, FrameSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionId {
    Energy,
    MomentumBackprop,
    StaticTraversal,
    WkbIntegral,
    FluctFit,
    FluctInflection,
}

impl CriterionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriterionId::Energy => "energy",
            CriterionId::MomentumBackprop => "momentum_backprop",
            CriterionId::StaticTraversal => "static_traversal",
            CriterionId::WkbIntegral => "wkb_integral",
            CriterionId::FluctFit => "fluct_fit",
            CriterionId::FluctInflection => "fluct_inflection",
        }
    }
}

/// One tunneling-time determination.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub criterion: CriterionId,
    pub found: bool,
    pub tau_exit: Option<f64>,
    /// Instant of maximum field strength.
    pub tau_max: f64,
    pub exit_position: Option<Vec<f64>>,
    pub exit_momentum: Option<Vec<f64>>,
}

impl CriterionResult {
    pub fn tau_ionization(&self) -> Option<f64> {
        self.tau_exit.map(|t| t - self.tau_max)
    }

    fn not_found(criterion: CriterionId, tau_max: f64) -> Self {
        CriterionResult {
            criterion,
            found: false,
            tau_exit: None,
            tau_max,
            exit_position: None,
            exit_momentum: None,
        }
    }
}

const EVENT_T_TOL: f64 = 1e-8;

/// Energy criterion: first upward zero of the interaction-free energy
/// `H_Q - <x>.F(t)` after t = 0.
pub fn exit_time_energy(
    traj: &Trajectory,
    model: &PotentialModel,
    pulse: &FieldPulse,
    frame: &FrameSpec,
) -> CriterionResult {
    let tau_max = pulse.peak_time();
    let dim = traj.dim();
    let u = traj.u();
    let signal =
        |t: f64, y: &[f64]| criterion_energy_flat(y, t, dim, u, model, pulse, frame);
    match find_zero(&traj.sol, &signal, 0.0, Some(true), EVENT_T_TOL) {
        Some(t) => {
            let st = traj.state_at(t).ok();
            CriterionResult {
                criterion: CriterionId::Energy,
                found: true,
                tau_exit: Some(t),
                tau_max,
                exit_position: st.as_ref().map(|s| s.positions()),
                exit_momentum: st.map(|s| s.axes().iter().map(|a| a.p).collect()),
            }
        }
        None => CriterionResult::not_found(CriterionId::Energy, tau_max),
    }
}

/// Unit vector of the field at time `t`, with `t` clamped into the pulse
/// support; in one dimension this is the single axis.
fn field_direction(pulse: &FieldPulse, t: f64, dim: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![1.0];
    }
    let (a, b) = pulse.support();
    let tc = if a.is_finite() && b.is_finite() {
        t.clamp(a + 1e-6 * (b - a), b - 1e-6 * (b - a))
    } else {
        t
    };
    let f = pulse.field_vector(tc);
    let n = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
    if n < 1e-14 {
        vec![0.0, 0.0, 1.0]
    } else {
        vec![f[0] / n, f[1] / n, f[2] / n]
    }
}

/// Momentum criterion via classical back-propagation: zeros of the
/// longitudinal momentum on the back-propagated path, keeping the one
/// whose position is closest to the atom.
pub fn exit_time_momentum_backprop(
    traj: &Trajectory,
    model: &PotentialModel,
    pulse: &FieldPulse,
    t_f: f64,
    cfg: &IntegratorConfig,
) -> Result<CriterionResult> {
    let tau_max = pulse.peak_time();
    let fwd = traj.t_end().max(traj.t_start());
    if t_f > fwd + 1e-9 {
        return Err(Error::config(format!(
            "forward trajectory ends at {fwd}, before back-propagation start t_f = {t_f}"
        )));
    }
    let st = traj.state_at(t_f)?;
    let x_f: Vec<f64> = st.positions();
    let p_f: Vec<f64> = st.axes().iter().map(|a| a.p).collect();
    let t0 = traj.t_start();
    let back = classical_backpropagate(&x_f, &p_f, t_f, t0, model, pulse, cfg)?;
    let dim = traj.dim();
    let p_long = |t: f64, y: &[f64]| {
        let e = field_direction(pulse, t, dim);
        (0..dim).map(|i| y[dim + i] * e[i]).sum::<f64>()
    };
    let zeros = find_all_zeros(&back.sol, &p_long, EVENT_T_TOL);
    if zeros.is_empty() {
        return Ok(CriterionResult::not_found(CriterionId::MomentumBackprop, tau_max));
    }
    let mut best: Option<(f64, f64)> = None; // (|x|, t)
    for &t in &zeros {
        let x = back.position_at(t);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if best.map(|(br, _)| r < br).unwrap_or(true) {
            best = Some((r, t));
        }
    }
    let (_, t_exit) = best.unwrap();
    Ok(CriterionResult {
        criterion: CriterionId::MomentumBackprop,
        found: true,
        tau_exit: Some(t_exit),
        tau_max,
        exit_position: Some(back.position_at(t_exit)),
        exit_momentum: Some(back.momentum_at(t_exit)),
    })
}

/// Effective potential along the tunneling ray `s3 = x3` with the other
/// coordinates frozen at their ground-state values.
fn v_eff_on_ray(
    model: &PotentialModel,
    field: &[f64; 3],
    s_ground: f64,
    u: f64,
    x3: f64,
) -> Result<f64> {
    let pot = model.at_field(*field);
    v_eff(&pot, &[0.0, 0.0, x3], &[s_ground, s_ground, x3], u)
}

/// Exit position `x3*`: the upper root of the radicand
/// `V_eff(ray) - E0` along the tunneling ray.
pub fn ray_exit_position(
    model: &PotentialModel,
    field: &[f64; 3],
    e0: f64,
    u: f64,
) -> Result<f64> {
    let (state, _) = ground_state_init(&field_free(model), u)?;
    let s_ground = state.axes()[0].s;
    let radicand = |x3: f64| v_eff_on_ray(model, field, s_ground, u, x3).map(|v| v - e0);
    // scan for the last sign change; the radicand diverges to +inf at
    // x3 -> 0 and to -inf with the field term at large x3
    let x_max = 60.0;
    let n = 6000;
    let mut last_cross: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..=n {
        let x = x_max * i as f64 / n as f64;
        let g = radicand(x)?;
        if let Some((xp, gp)) = prev {
            if gp > 0.0 && g <= 0.0 {
                last_cross = Some((xp, x));
            }
        }
        prev = Some((x, g));
    }
    let Some((mut a, mut b)) = last_cross else {
        return Err(Error::NoBarrier(
            "effective potential along the tunneling ray never returns to the ground energy"
                .into(),
        ));
    };
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if radicand(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Whether a barrier exists at all: with the fluctuations frozen at their
/// ground-state values, the effective potential ahead of the atom must rise
/// above the ground energy before the field term pulls it down.
pub fn barrier_present(
    model: &PotentialModel,
    field: &[f64; 3],
    e0: f64,
    u: f64,
) -> Result<bool> {
    let (state, _) = ground_state_init(&field_free(model), u)?;
    let s = state.fluctuations();
    let pot = model.at_field(*field);
    let mut vmax = f64::NEG_INFINITY;
    for i in 1..=4000 {
        let x3 = 20.0 * i as f64 / 4000.0;
        let v = v_eff(&pot, &[0.0, 0.0, x3], &s, u)?;
        vmax = vmax.max(v);
    }
    Ok(vmax > e0)
}

fn field_free(model: &PotentialModel) -> PotentialModel {
    model.clone()
}

/// Static-field traversal time: from the initial rest point (t = 0) to the
/// first instant with `x3(t) >= x3*`.
pub fn static_traversal(
    traj: &Trajectory,
    model: &PotentialModel,
    field: &[f64; 3],
    e0: f64,
) -> Result<CriterionResult> {
    if !barrier_present(model, field, e0, traj.u())? {
        return Ok(CriterionResult::not_found(CriterionId::StaticTraversal, 0.0));
    }
    let x3_star = match ray_exit_position(model, field, e0, traj.u()) {
        Ok(x) => x,
        Err(Error::NoBarrier(_)) => {
            return Ok(CriterionResult::not_found(CriterionId::StaticTraversal, 0.0))
        }
        Err(e) => return Err(e),
    };
    let signal = |_t: f64, y: &[f64]| y[2] - x3_star; // x3 component
    match find_zero(&traj.sol, &signal, 0.0, Some(true), EVENT_T_TOL) {
        Some(t) => {
            let st = traj.state_at(t)?;
            Ok(CriterionResult {
                criterion: CriterionId::StaticTraversal,
                found: true,
                tau_exit: Some(t),
                tau_max: 0.0,
                exit_position: Some(st.positions()),
                exit_momentum: Some(st.axes().iter().map(|a| a.p).collect()),
            })
        }
        None => Ok(CriterionResult::not_found(CriterionId::StaticTraversal, 0.0)),
    }
}

/// WKB-like integral time along the tunneling ray:
/// `tau = int_0^{x3*} dx3 / sqrt(V_eff(ray) - E0)` (optionally with the
/// standard kinetic factor 2 inside the square root).
pub fn wkb_like_time(
    model: &PotentialModel,
    field: &[f64; 3],
    e0: f64,
    u: f64,
    kinetic_factor_two: bool,
) -> Result<f64> {
    let (state, _) = ground_state_init(&field_free(model), u)?;
    let s_ground = state.axes()[0].s;
    let x3_star = ray_exit_position(model, field, e0, u)?;
    let factor = if kinetic_factor_two { 2.0 } else { 1.0 };
    let radicand = |x3: f64| -> Result<f64> {
        let g = v_eff_on_ray(model, field, s_ground, u, x3)? - e0;
        Ok(factor * g)
    };
    // sanity: the integrand must be real inside the tunnel
    for i in 1..50 {
        let x = x3_star * i as f64 / 50.0;
        if radicand(x)? < 0.0 {
            return Err(Error::Quadrature(format!(
                "radicand negative inside the ray at x3 = {x}"
            )));
        }
    }
    let integrand = |x3: f64| -> Result<f64> {
        if x3 <= 0.0 {
            return Ok(0.0);
        }
        let g = radicand(x3)?;
        // root-placement error can leave a vanishing negative sliver at the
        // endpoint; it carries no measure
        if g <= 0.0 {
            return Ok(0.0);
        }
        Ok(1.0 / g.sqrt())
    };
    // main part up to the square-root endpoint, then substitute
    // x3 = x3* - w^2 so the endpoint integrand is smooth
    let split = 0.9 * x3_star;
    let head = adaptive_simpson(&integrand, 0.0, split, 1e-9)?;
    let w_max = (x3_star - split).sqrt();
    let tail_integrand = |w: f64| -> Result<f64> {
        let x3 = x3_star - w * w;
        if x3 >= x3_star {
            return Ok(0.0);
        }
        let g = radicand(x3)?;
        if g <= 0.0 {
            return Ok(0.0);
        }
        Ok(2.0 * w / g.sqrt())
    };
    let tail = adaptive_simpson(&tail_integrand, 0.0, w_max, 1e-9)?;
    Ok(head + tail)
}

fn adaptive_simpson<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> Result<(f64, f64, f64)> {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        Ok((m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)))
    }
    fn recurse<F: Fn(f64) -> Result<f64>>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let (lm, flm, left) = simpson(f, a, fa, m, fm)?;
        let (rm, frm, right) = simpson(f, m, fm, b, fb)?;
        let delta = left + right - whole;
        if delta.abs() > 15.0 * tol && depth == 0 {
            return Err(Error::Quadrature("adaptive Simpson recursion exhausted".into()));
        }
        if delta.abs() <= 15.0 * tol {
            Ok(left + right + delta / 15.0)
        } else {
            // halve the budget per side, but never below the floating-point
            // noise floor (intervals shrink below representable resolution)
            let child = (0.5 * tol).max(1e-15);
            let l = recurse(f, a, fa, m, fm, lm, flm, left, child, depth - 1)?;
            let r = recurse(f, m, fm, b, fb, rm, frm, right, child, depth - 1)?;
            Ok(l + r)
        }
    }
    if b <= a {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let (m, fm, whole) = simpson(f, a, fa, b, fb)?;
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Transverse fluctuation series `s_T(t)` with its smoothed second time
/// derivative (the effective force on the transverse spread).
#[derive(Debug, Clone)]
pub struct FluctuationSeries {
    pub t: Vec<f64>,
    pub s_t: Vec<f64>,
    /// Smoothed d^2 s_T / dt^2.
    pub d2: Vec<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FluctuationOpts {
    /// Number of uniform resampling points.
    pub n: usize,
    /// Optional cap on the resampled time range.
    pub t_max: Option<f64>,
    /// Smoothing window as a fraction of the pulse duration.
    pub window_frac: f64,
}

impl Default for FluctuationOpts {
    fn default() -> Self {
        FluctuationOpts { n: 4000, t_max: None, window_frac: 0.05 }
    }
}

/// Planar offset angle of the expectation value, unwrapped; samples with
/// `|<r>|` below the threshold are gaps, later filled from the nearest
/// defined neighbor for downstream use.
pub fn offset_angle_series(t: &[f64], x: &[f64], y: &[f64]) -> Vec<Option<f64>> {
    debug_assert_eq!(t.len(), x.len());
    let mut theta: Vec<Option<f64>> = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            if (xi * xi + yi * yi).sqrt() < 1e-6 {
                None
            } else {
                Some(yi.atan2(xi))
            }
        })
        .collect();
    // unwrap across defined samples
    let mut prev: Option<f64> = None;
    for th in theta.iter_mut() {
        if let Some(v) = th {
            if let Some(p) = prev {
                let mut val = *v;
                while val - p > std::f64::consts::PI {
                    val -= 2.0 * std::f64::consts::PI;
                }
                while p - val > std::f64::consts::PI {
                    val += 2.0 * std::f64::consts::PI;
                }
                *v = val;
            }
            prev = Some(*v);
        }
    }
    theta
}

fn fill_gaps(theta: &[Option<f64>]) -> Vec<f64> {
    let n = theta.len();
    let mut out = vec![0.0; n];
    let mut last: Option<f64> = None;
    // forward fill, then backward fill the leading gap
    for i in 0..n {
        if let Some(v) = theta[i] {
            last = Some(v);
        }
        out[i] = last.unwrap_or(f64::NAN);
    }
    if out[0].is_nan() {
        let first = theta.iter().flatten().next().copied().unwrap_or(0.0);
        for v in out.iter_mut() {
            if v.is_nan() {
                *v = first;
            } else {
                break;
            }
        }
    }
    out
}

/// Transverse fluctuation `s_T = sqrt(cos^2(theta) s_x^2 + sin^2(theta) s_y^2)`
/// on a uniform resampling of a 3-D trajectory.
pub fn transverse_fluctuation(
    traj: &Trajectory,
    pulse: &FieldPulse,
    opts: &FluctuationOpts,
) -> Result<FluctuationSeries> {
    if traj.dim() != 3 {
        return Err(Error::Unsupported(
            "transverse fluctuations require a 3-D trajectory".into(),
        ));
    }
    let t0 = traj.t_start();
    let t1 = opts.t_max.map_or(traj.t_end(), |m| m.min(traj.t_end()));
    let n = opts.n.max(16);
    let dt = (t1 - t0) / (n - 1) as f64;
    let mut t = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut sx = Vec::with_capacity(n);
    let mut sy = Vec::with_capacity(n);
    for i in 0..n {
        let ti = (t0 + i as f64 * dt).min(t1);
        let st = traj.state_at(ti)?;
        let a = st.axes();
        t.push(ti);
        xs.push(a[0].x);
        ys.push(a[1].x);
        sx.push(a[0].s);
        sy.push(a[1].s);
    }
    let theta = fill_gaps(&offset_angle_series(&t, &xs, &ys));
    let s_t: Vec<f64> = (0..n)
        .map(|i| {
            let (c, s) = (theta[i].cos(), theta[i].sin());
            (c * c * sx[i] * sx[i] + s * s * sy[i] * sy[i]).sqrt()
        })
        .collect();
    let (p0, p1) = pulse.support();
    let duration = if p0.is_finite() && p1.is_finite() { p1 - p0 } else { t1 - t0 };
    let half_window = ((opts.window_frac * duration / dt / 2.0).round() as usize).max(2);
    let d2 = savitzky_golay_d2(&s_t, dt, half_window);
    Ok(FluctuationSeries { t, s_t, d2, dt })
}

/// Symmetric local quadratic fit: second-derivative estimate at each sample
/// (endpoints are padded with the nearest interior value).
pub fn savitzky_golay_d2(y: &[f64], dt: f64, half_window: usize) -> Vec<f64> {
    let n = y.len();
    let m = half_window.max(1);
    let mut out = vec![0.0; n];
    let fm = m as f64;
    let kbar = fm * (fm + 1.0) / 3.0;
    let denom: f64 = (1..=m)
        .map(|k| {
            let kk = k as f64 * k as f64;
            2.0 * (kk - kbar) * (kk - kbar)
        })
        .sum::<f64>()
        + kbar * kbar;
    for i in m..n - m {
        let mut acc = -kbar * y[i];
        for k in 1..=m {
            let kk = (k * k) as f64;
            acc += (kk - kbar) * (y[i + k] + y[i - k]);
        }
        out[i] = 2.0 * acc / denom / (dt * dt);
    }
    for i in 0..m {
        out[i] = out[m];
        out[n - 1 - i] = out[n - 1 - m];
    }
    out
}

/// Local least-squares slope (first derivative) with the same windowing.
pub fn savitzky_golay_d1(y: &[f64], dt: f64, half_window: usize) -> Vec<f64> {
    let n = y.len();
    let m = half_window.max(1);
    let mut out = vec![0.0; n];
    let denom: f64 = (1..=m).map(|k| 2.0 * (k * k) as f64).sum();
    for i in m..n - m {
        let mut acc = 0.0;
        for k in 1..=m {
            acc += k as f64 * (y[i + k] - y[i - k]);
        }
        out[i] = acc / denom / dt;
    }
    for i in 0..m {
        out[i] = out[m];
        out[n - 1 - i] = out[n - 1 - m];
    }
    out
}

fn least_squares_line(t: &[f64], y: &[f64], from: usize, to: usize) -> (f64, f64) {
    let n = (to - from) as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for i in from..to {
        st += t[i];
        sy += y[i];
        stt += t[i] * t[i];
        sty += t[i] * y[i];
    }
    let denom = n * stt - st * st;
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    (slope, intercept)
}

#[derive(Debug, Clone, Copy)]
pub struct FitParams {
    /// Slope magnitude below which the initial stage counts as flat.
    pub plateau_slope_tol: f64,
    /// Relative slope stability required of the final linear stage.
    pub suffix_stability: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams { plateau_slope_tol: 1e-4, suffix_stability: 0.01 }
    }
}

/// Exit time from the intersection of linear fits to the initial plateau
/// and the final linear stage of `s_T(t)`.
pub fn exit_time_fluct_fit(
    series: &FluctuationSeries,
    pulse: &FieldPulse,
    params: &FitParams,
) -> CriterionResult {
    let tau_max = pulse.peak_time();
    let n = series.t.len();
    let slopes = savitzky_golay_d1(&series.s_t, series.dt, 5.max(n / 200));
    // longest prefix with |slope| below threshold
    let mut prefix_end = 0;
    while prefix_end < n && slopes[prefix_end].abs() < params.plateau_slope_tol {
        prefix_end += 1;
    }
    if prefix_end < 8 {
        return CriterionResult::not_found(CriterionId::FluctFit, tau_max);
    }
    let (m1, b1) = least_squares_line(&series.t, &series.s_t, 0, prefix_end);
    // final stage: extend the reference suffix backward while the slope
    // stays stable
    let ref_start = n - (n / 10).max(8);
    let (m_ref, _) = least_squares_line(&series.t, &series.s_t, ref_start, n);
    if m_ref.abs() < 1e-12 {
        return CriterionResult::not_found(CriterionId::FluctFit, tau_max);
    }
    let mut start = ref_start;
    while start > prefix_end {
        let cand = start - 1;
        let (m, _) = least_squares_line(&series.t, &series.s_t, cand, n);
        if ((m - m_ref) / m_ref).abs() > params.suffix_stability {
            break;
        }
        start = cand;
    }
    let (m2, b2) = least_squares_line(&series.t, &series.s_t, start, n);
    if (m1 - m2).abs() < 1e-12 {
        return CriterionResult::not_found(CriterionId::FluctFit, tau_max);
    }
    let t_exit = (b2 - b1) / (m1 - m2);
    CriterionResult {
        criterion: CriterionId::FluctFit,
        found: true,
        tau_exit: Some(t_exit),
        tau_max,
        exit_position: None,
        exit_momentum: None,
    }
}

/// Exit time from the last inflection point of the effective force
/// `d^2 s_T / dt^2` within the pulse epoch. Also reports the last local
/// maximum of the force as the exit momentum slot is unused here.
pub fn exit_time_fluct_inflection(
    series: &FluctuationSeries,
    pulse: &FieldPulse,
) -> (CriterionResult, Option<f64>) {
    let tau_max = pulse.peak_time();
    let g = &series.d2;
    let n = g.len();
    let (p0, p1) = pulse.support();
    let lo = series.t.iter().position(|&t| t >= p0.max(series.t[0])).unwrap_or(0);
    let hi = series
        .t
        .iter()
        .rposition(|&t| t <= p1.min(*series.t.last().unwrap()))
        .unwrap_or(n - 1);
    let gmax = g[lo..=hi].iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if gmax < 1e-12 {
        return (CriterionResult::not_found(CriterionId::FluctInflection, tau_max), None);
    }
    let noise = 0.02 * gmax;
    // active region: where the force signal is appreciably nonzero
    let act_lo = (lo..=hi).find(|&i| g[i].abs() > noise).unwrap_or(lo);
    let act_hi = (lo..=hi).rev().find(|&i| g[i].abs() > noise).unwrap_or(hi);
    if act_hi <= act_lo + 4 {
        return (CriterionResult::not_found(CriterionId::FluctInflection, tau_max), None);
    }
    // last local maximum of the force
    let mut last_max: Option<f64> = None;
    for i in (act_lo + 1)..act_hi {
        if g[i] > g[i - 1] && g[i] >= g[i + 1] && g[i] > noise {
            last_max = Some(series.t[i]);
        }
    }
    // last inflection: last sign change of dg/dt slope curvature
    let d2g = savitzky_golay_d2(g, series.dt, 5.max(n / 200));
    let mut last_inflection: Option<f64> = None;
    for i in (act_lo + 1)..=act_hi {
        if d2g[i - 1] * d2g[i] < 0.0 {
            let frac = d2g[i - 1] / (d2g[i - 1] - d2g[i]);
            last_inflection = Some(series.t[i - 1] + frac * series.dt);
        }
    }
    match last_inflection {
        Some(t) => (
            CriterionResult {
                criterion: CriterionId::FluctInflection,
                found: true,
                tau_exit: Some(t),
                tau_max,
                exit_position: None,
                exit_momentum: None,
            },
            last_max,
        ),
        None => (CriterionResult::not_found(CriterionId::FluctInflection, tau_max), last_max),
    }
}

/// Spot size: geometric mean of the two fluctuations transverse to the
/// escape direction at the first crossing of the detection radius.
/// Returns `(spot, crossing time)`.
pub fn spot_size(traj: &Trajectory, detection_radius: f64) -> Result<Option<(f64, f64)>> {
    if traj.dim() != 3 {
        return Err(Error::Unsupported("spot size requires a 3-D trajectory".into()));
    }
    let signal = |_t: f64, y: &[f64]| {
        (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt() - detection_radius
    };
    let Some(t) = find_zero(&traj.sol, &signal, traj.t_start(), Some(true), 1e-6) else {
        return Ok(None);
    };
    let st = traj.state_at(t)?;
    let r = st.positions();
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rhat = [r[0] / rn, r[1] / rn, r[2] / rn];
    // orthonormal transverse pair
    let mut e1 = cross(&[0.0, 0.0, 1.0], &rhat);
    if norm(&e1) < 1e-8 {
        e1 = cross(&[1.0, 0.0, 0.0], &rhat);
    }
    let n1 = norm(&e1);
    let e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
    let e2 = cross(&rhat, &e1);
    let s2: Vec<f64> = st.axes().iter().map(|a| a.s * a.s).collect();
    let quad = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| a[i] * b[i] * s2[i]).sum::<f64>();
    let (aa, bb, ab) = (quad(&e1, &e1), quad(&e2, &e2), quad(&e1, &e2));
    let det = (aa * bb - ab * ab).max(0.0);
    Ok(Some((det.powf(0.25), t)))
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Offset-angle summary of a trajectory: the unwrapped planar angle of
/// `<r>(t)` and its value when the detection radius is first reached (or at
/// the final sample if it never is).
pub struct OffsetAngle {
    pub t: Vec<f64>,
    pub theta: Vec<Option<f64>>,
    pub final_angle: Option<f64>,
}

pub fn offset_angle(traj: &Trajectory, detection_radius: f64, n: usize) -> Result<OffsetAngle> {
    if traj.dim() < 2 {
        return Err(Error::Unsupported("offset angle requires planar motion".into()));
    }
    let t0 = traj.t_start();
    let t1 = traj.t_end();
    let dt = (t1 - t0) / (n - 1) as f64;
    let mut t = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let ti = (t0 + i as f64 * dt).min(t1);
        let st = traj.state_at(ti)?;
        t.push(ti);
        xs.push(st.axes()[0].x);
        ys.push(st.axes()[1].x);
    }
    let theta = offset_angle_series(&t, &xs, &ys);
    let signal = |_t: f64, y: &[f64]| {
        (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt() - detection_radius
    };
    let t_det = find_zero(&traj.sol, &signal, t0, Some(true), 1e-6);
    let final_angle = match t_det {
        Some(td) => {
            let st = traj.state_at(td)?;
            let filled = fill_gaps(&theta);
            // continue the unwrap to the detection sample
            let raw = st.axes()[1].x.atan2(st.axes()[0].x);
            let last = filled.last().copied().unwrap_or(raw);
            let mut v = raw;
            while v - last > std::f64::consts::PI {
                v -= 2.0 * std::f64::consts::PI;
            }
            while last - v > std::f64::consts::PI {
                v += 2.0 * std::f64::consts::PI;
            }
            Some(v)
        }
        None => theta.iter().flatten().last().copied(),
    };
    Ok(OffsetAngle { t, theta, final_angle })
}

/// Amplitude rule of a frequency scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeRule {
    FixedAmplitude,
    FixedFluence,
}

pub struct ScanRow {
    pub omega: f64,
    pub f0: f64,
    pub result: CriterionResult,
}

/// Energy-criterion scan over pulse frequency for the half-cycle family.
pub fn frequency_scan(
    model: &PotentialModel,
    f0_ref: f64,
    omega_ref: f64,
    omegas: &[f64],
    rule: AmplitudeRule,
    u: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<ScanRow>> {
    let (state0, _) = ground_state_init(model, u)?;
    let mut rows = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        let f0 = match rule {
            AmplitudeRule::FixedAmplitude => f0_ref,
            AmplitudeRule::FixedFluence => {
                crate::pulse::fluence_matched_amplitude(omega, f0_ref, omega_ref)
            }
        };
        let pulse = FieldPulse::HalfCycleSin3 { f0, omega };
        let t_end = std::f64::consts::PI / omega + 60.0;
        let run_cfg = IntegratorConfig { t_end, ..*cfg };
        let traj = integrate(&state0, model, &pulse, &FrameSpec::Lab, &run_cfg)?;
        let result = exit_time_energy(&traj, model, &pulse, &FrameSpec::Lab);
        rows.push(ScanRow { omega, f0, result });
    }
    Ok(rows)
}

/// First frequency (ascending) at which the energy criterion stops finding
/// an exit.
pub fn critical_frequency(rows: &[ScanRow]) -> Option<f64> {
    let mut sorted: Vec<&ScanRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    sorted.iter().find(|r| !r.result.found).map(|r| r.omega)
}
