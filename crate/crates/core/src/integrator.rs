//! Adaptive Dormand-Prince 5(4) integrator with dense output.
//!
//! Steps are rejected both on the embedded error estimate and when a stage
//! or the proposed solution leaves the admissible domain (s <= 0), which is
//! how the positivity of the fluctuation coordinates is enforced.

use crate::error::{Error, Result};

/// Right-hand side of an ODE system. `rhs` may fail when evaluated outside
/// the admissible domain; the solver treats that as a step rejection.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> std::result::Result<(), String>;
    /// Whether a candidate solution point is admissible.
    fn admissible(&self, _y: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: Option<f64>,
    pub initial_step: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { rel_tol: 1e-9, abs_tol: 1e-11, max_step: None, initial_step: None }
    }
}

/// Dense-output coefficients of one accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    /// Interpolated solution at `t` within `[t0, t0 + h]`.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        for i in 0..out.len() {
            out[i] = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + th1
                            * (self.rcont[2][i]
                                + theta * (self.rcont[3][i] + th1 * self.rcont[4][i])));
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.h
    }
}

/// Continuous solution of one integration run.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub dim: usize,
    pub t0: f64,
    pub t_end: f64,
    pub steps: Vec<DenseStep>,
    /// State at the accepted step endpoints, including the initial point.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl OdeSolution {
    pub fn forward(&self) -> bool {
        self.t_end >= self.t0
    }

    pub fn contains(&self, t: f64) -> bool {
        if self.forward() {
            t >= self.t0 && t <= self.t_end
        } else {
            t <= self.t0 && t >= self.t_end
        }
    }

    pub fn sample(&self, t: f64, out: &mut [f64]) {
        debug_assert!(self.contains(t));
        if self.steps.is_empty() || t == self.t0 {
            out.copy_from_slice(&self.states[0]);
            return;
        }
        let idx = self.step_index(t);
        self.steps[idx].eval(t, out);
    }

    pub fn sample_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample(t, &mut out);
        out
    }

    fn step_index(&self, t: f64) -> usize {
        let fwd = self.forward();
        let mut lo = 0usize;
        let mut hi = self.steps.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let end = self.steps[mid].t_end();
            let past = if fwd { t > end } else { t < end };
            if past {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrate from `t0` to `t_end` (backward if `t_end < t0`).
pub fn integrate<S: OdeSystem>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<OdeSolution> {
    let n = sys.dim();
    debug_assert_eq!(y0.len(), n);
    if !cfg.rel_tol.is_finite() || cfg.rel_tol <= 0.0 || cfg.abs_tol <= 0.0 {
        return Err(Error::config("integrator tolerances must be > 0"));
    }
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    if span == 0.0 {
        return Ok(OdeSolution {
            dim: n,
            t0,
            t_end,
            steps: vec![],
            times: vec![t0],
            states: vec![y0.to_vec()],
        });
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    sys.rhs(t, &y, &mut k[0])
        .map_err(|reason| Error::Integration { t, reason })?;

    let h_max = cfg.max_step.unwrap_or(span);
    let mut h = dir * cfg.initial_step.unwrap_or((span / 100.0).min(h_max)).min(h_max);

    let mut steps = Vec::new();
    let mut times = vec![t0];
    let mut states = vec![y.clone()];

    let h_min = span * 1e-14;
    let max_steps = 50_000_000usize;
    let mut n_steps = 0usize;

    while (t_end - t) * dir > 0.0 {
        n_steps += 1;
        if n_steps > max_steps {
            return Err(Error::Integration { t, reason: "step budget exhausted".into() });
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }

        // stages
        let mut stage_failed: Option<String> = None;
        for s in 0..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..=s {
                    acc += A[s][j] * k[j][i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            if !sys.admissible(&y_stage) {
                stage_failed = Some("stage left admissible domain".into());
                break;
            }
            if let Err(reason) = sys.rhs(t + C[s] * h, &y_stage, &mut k[s + 1]) {
                stage_failed = Some(reason);
                break;
            }
        }

        if let Some(reason) = stage_failed {
            h *= 0.5;
            if h.abs() < h_min {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size underflow ({reason})"),
                });
            }
            continue;
        }

        // 5th-order solution is stage 6's argument (FSAL): y_stage currently
        // holds it because A[5] are the b coefficients.
        y_new.copy_from_slice(&y_stage);

        // error estimate
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            e *= h;
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / n as f64).sqrt();

        let accept = err <= 1.0 && sys.admissible(&y_new);
        if accept {
            // dense output
            let ydiff: Vec<f64> = (0..n).map(|i| y_new[i] - y[i]).collect();
            let bspl: Vec<f64> = (0..n).map(|i| h * k[0][i] - ydiff[i]).collect();
            let rcont4: Vec<f64> = (0..n).map(|i| ydiff[i] - h * k[6][i] - bspl[i]).collect();
            let rcont5: Vec<f64> = (0..n)
                .map(|i| {
                    h * (D[0] * k[0][i]
                        + D[2] * k[2][i]
                        + D[3] * k[3][i]
                        + D[4] * k[4][i]
                        + D[5] * k[5][i]
                        + D[6] * k[6][i])
                })
                .collect();
            steps.push(DenseStep {
                t0: t,
                h,
                rcont: [y.clone(), ydiff, bspl, rcont4, rcont5],
            });

            t += h;
            y.copy_from_slice(&y_new);
            k.swap(0, 6); // FSAL
            times.push(t);
            states.push(y.clone());
        }

        // step-size control
        let fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        let fac = if accept { fac } else { fac.min(1.0).min(0.9) };
        h *= fac;
        if h.abs() > h_max {
            h = dir * h_max;
        }
        if h.abs() < h_min {
            return Err(Error::Integration { t, reason: "step size underflow".into() });
        }
    }

    Ok(OdeSolution { dim: n, t0, t_end, steps, times, states })
}

/// Locate a zero of `f` along the solution by scanning dense samples and
/// bisecting; returns the first crossing after `from_t` (in integration
/// direction). `upward` restricts the sign of the crossing.
pub fn find_zero<F: Fn(f64, &[f64]) -> f64>(
    sol: &OdeSolution,
    f: &F,
    from_t: f64,
    upward: Option<bool>,
    t_tol: f64,
) -> Option<f64> {
    let subdiv = 8;
    let mut buf = vec![0.0; sol.dim];
    let mut prev: Option<(f64, f64)> = None;
    let fwd = sol.forward();
    for step in &sol.steps {
        for i in 0..=subdiv {
            let t = step.t0 + step.h * i as f64 / subdiv as f64;
            if (fwd && t < from_t) || (!fwd && t > from_t) {
                continue;
            }
            step.eval(t, &mut buf);
            let v = f(t, &buf);
            if let Some((tp, vp)) = prev {
                if tp < t || tp > t {
                    let crossing = vp == 0.0 && v != 0.0 || vp * v < 0.0;
                    let dir_ok = match upward {
                        None => true,
                        Some(true) => vp < 0.0 && v >= 0.0,
                        Some(false) => vp > 0.0 && v <= 0.0,
                    };
                    if crossing && dir_ok {
                        return Some(bisect_on(sol, f, tp, t, t_tol));
                    }
                }
            }
            prev = Some((t, v));
        }
    }
    None
}

/// All zero crossings of `f` along the solution (both directions).
pub fn find_all_zeros<F: Fn(f64, &[f64]) -> f64>(
    sol: &OdeSolution,
    f: &F,
    t_tol: f64,
) -> Vec<f64> {
    let subdiv = 8;
    let mut out = Vec::new();
    let mut buf = vec![0.0; sol.dim];
    let mut prev: Option<(f64, f64)> = None;
    for step in &sol.steps {
        for i in 0..=subdiv {
            let t = step.t0 + step.h * i as f64 / subdiv as f64;
            step.eval(t, &mut buf);
            let v = f(t, &buf);
            if let Some((tp, vp)) = prev {
                if tp != t && vp * v < 0.0 {
                    out.push(bisect_on(sol, f, tp, t, t_tol));
                }
            }
            prev = Some((t, v));
        }
    }
    out
}

fn bisect_on<F: Fn(f64, &[f64]) -> f64>(
    sol: &OdeSolution,
    f: &F,
    mut a: f64,
    mut b: f64,
    t_tol: f64,
) -> f64 {
    let mut buf = vec![0.0; sol.dim];
    let mut eval = |t: f64| {
        sol.sample(t, &mut buf);
        f(t, &buf)
    };
    let mut fa = eval(a);
    for _ in 0..200 {
        if (b - a).abs() <= t_tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = eval(m);
        if fa * fm <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Sho;
    impl OdeSystem for Sho {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> std::result::Result<(), String> {
            dydt[0] = y[1];
            dydt[1] = -y[0];
            Ok(())
        }
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let cfg = SolverConfig::default();
        let sol = integrate(&Sho, 0.0, &[1.0, 0.0], 20.0, &cfg).unwrap();
        let y = sol.final_state();
        assert_relative_eq!(y[0], 20.0f64.cos(), epsilon = 1e-7);
        assert_relative_eq!(y[1], -20.0f64.sin(), epsilon = 1e-7);
    }

    #[test]
    fn dense_output_accuracy() {
        let cfg = SolverConfig::default();
        let sol = integrate(&Sho, 0.0, &[1.0, 0.0], 20.0, &cfg).unwrap();
        let mut buf = [0.0; 2];
        for i in 0..500 {
            let t = 20.0 * i as f64 / 500.0;
            sol.sample(t, &mut buf);
            assert_relative_eq!(buf[0], t.cos(), epsilon = 1e-7);
        }
    }

    #[test]
    fn backward_integration() {
        let cfg = SolverConfig::default();
        let sol = integrate(&Sho, 10.0, &[10.0f64.cos(), -10.0f64.sin()], 0.0, &cfg).unwrap();
        let y = sol.final_state();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-7);
        assert_relative_eq!(y[1], 0.0, epsilon = 1e-7);
        // dense sampling inside the backward run
        let mut buf = [0.0; 2];
        sol.sample(5.0, &mut buf);
        assert_relative_eq!(buf[0], 5.0f64.cos(), epsilon = 1e-7);
    }

    #[test]
    fn event_location() {
        let cfg = SolverConfig::default();
        let sol = integrate(&Sho, 0.0, &[1.0, 0.0], 10.0, &cfg).unwrap();
        // first zero of y[0] is at pi/2
        let t = find_zero(&sol, &|_t, y: &[f64]| y[0], 0.0, Some(false), 1e-10).unwrap();
        assert_relative_eq!(t, std::f64::consts::FRAC_PI_2, epsilon = 1e-8);
        let zeros = find_all_zeros(&sol, &|_t, y: &[f64]| y[0], 1e-10);
        assert_eq!(zeros.len(), 3); // pi/2, 3pi/2, 5pi/2 < 10
    }

    struct Domain;
    impl OdeSystem for Domain {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> std::result::Result<(), String> {
            if y[0] <= 0.0 {
                return Err("left domain".into());
            }
            dydt[0] = -1.0;
            Ok(())
        }
        fn admissible(&self, y: &[f64]) -> bool {
            y[0] > 0.0
        }
    }

    #[test]
    fn domain_violation_reports_failure() {
        let cfg = SolverConfig::default();
        let r = integrate(&Domain, 0.0, &[1.0], 10.0, &cfg);
        assert!(matches!(r, Err(Error::Integration { .. })));
    }
}
