//! Hamiltonian flow on the extended phase space, ground-state
//! initialization, well-depth calibration and classical back-propagation.

use serde::{Deserialize, Serialize};

use crate::effective::{grad_v_eff, v_eff};
use crate::error::{Error, Result};
use crate::integrator::{self, OdeSolution, OdeSystem, SolverConfig};
use crate::model::{ClassicalPotential, PotentialModel};
use crate::phase_space::{effective_field, quantum_hamiltonian, AxisState, ExtendedState};
use crate::pulse::{FieldPulse, FrameSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: Option<f64>,
    pub t_end: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rel_tol: 1e-9, abs_tol: 1e-11, max_step: None, t_end: 150.0 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 {
            return Err(Error::config("integrator tolerances must be > 0"));
        }
        Ok(())
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            initial_step: None,
        }
    }
}

/// Dense, interpolable extended-phase-space trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub sol: OdeSolution,
    dim: usize,
    u: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn t_start(&self) -> f64 {
        self.sol.t0
    }

    pub fn t_end(&self) -> f64 {
        self.sol.t_end
    }

    pub fn state_at(&self, t: f64) -> Result<ExtendedState> {
        let y = self.sol.sample_vec(t);
        ExtendedState::from_flat(self.dim, &y, self.u, t)
    }

    /// States at the accepted step endpoints.
    pub fn samples(&self) -> impl Iterator<Item = ExtendedState> + '_ {
        self.sol
            .times
            .iter()
            .zip(self.sol.states.iter())
            .map(|(&t, y)| ExtendedState::from_flat(self.dim, y, self.u, t).expect("valid sample"))
    }
}

/// Classical trajectory (expectation values only).
#[derive(Debug, Clone)]
pub struct ClassicalTrajectory {
    pub sol: OdeSolution,
    pub dim: usize,
}

impl ClassicalTrajectory {
    pub fn position_at(&self, t: f64) -> Vec<f64> {
        self.sol.sample_vec(t)[..self.dim].to_vec()
    }

    pub fn momentum_at(&self, t: f64) -> Vec<f64> {
        self.sol.sample_vec(t)[self.dim..].to_vec()
    }
}

struct ExtendedSystem<'a> {
    model: &'a PotentialModel,
    pulse: &'a FieldPulse,
    frame: &'a FrameSpec,
    u: f64,
    dim: usize,
}

impl OdeSystem for ExtendedSystem<'_> {
    fn dim(&self) -> usize {
        4 * self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> std::result::Result<(), String> {
        let d = self.dim;
        let (x, rest) = y.split_at(d);
        let (p, rest) = rest.split_at(d);
        let (s, ps) = rest.split_at(d);
        for &si in s {
            if si <= 0.0 {
                return Err("fluctuation coordinate s reached 0".into());
            }
        }
        let field = effective_field(self.pulse, self.frame, t).map_err(|e| e.to_string())?;
        let mut gx = vec![0.0; d];
        let mut gs = vec![0.0; d];
        self.model
            .effective_gradient(field, x, s, self.u, &mut gx, &mut gs)
            .map_err(|e| e.to_string())?;
        for i in 0..d {
            dydt[i] = p[i];
            dydt[d + i] = -gx[i];
            dydt[2 * d + i] = ps[i];
            dydt[3 * d + i] = -gs[i];
        }
        if let FrameSpec::CoRotating { rate } = self.frame {
            // H += rate (P1 R2 - P2 R1)
            dydt[0] += rate * x[1];
            dydt[1] -= rate * x[0];
            dydt[d] += rate * p[1];
            dydt[d + 1] -= rate * p[0];
        }
        Ok(())
    }

    fn admissible(&self, y: &[f64]) -> bool {
        y[2 * self.dim..3 * self.dim].iter().all(|&s| s > 0.0)
    }
}

/// Time derivative of the extended state under the quantum Hamiltonian.
pub fn eom(
    state: &ExtendedState,
    model: &PotentialModel,
    pulse: &FieldPulse,
    frame: &FrameSpec,
) -> Result<Vec<f64>> {
    if state.dim() != model.dim() {
        return Err(Error::config("state/model dimension mismatch"));
    }
    let sys = ExtendedSystem { model, pulse, frame, u: state.u(), dim: state.dim() };
    let y = state.to_flat();
    let mut dydt = vec![0.0; y.len()];
    sys.rhs(state.t, &y, &mut dydt)
        .map_err(|reason| Error::Integration { t: state.t, reason })?;
    Ok(dydt)
}

/// Integrate the extended system from `state0.t` to `cfg.t_end`.
pub fn integrate(
    state0: &ExtendedState,
    model: &PotentialModel,
    pulse: &FieldPulse,
    frame: &FrameSpec,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if state0.dim() != model.dim() {
        return Err(Error::config("state/model dimension mismatch"));
    }
    let sys = ExtendedSystem { model, pulse, frame, u: state0.u(), dim: state0.dim() };
    let sol = integrator::integrate(&sys, state0.t, &state0.to_flat(), cfg.t_end, &cfg.solver())?;
    Ok(Trajectory { sol, dim: state0.dim(), u: state0.u() })
}

/// Field-free ground state: minimize the effective energy over (x, s) with
/// all momenta zero. Returns the minimizing state and its energy.
pub fn ground_state_init(model: &PotentialModel, u: f64) -> Result<(ExtendedState, f64)> {
    if u <= 0.0 {
        return Err(Error::domain("U must be > 0"));
    }
    match model {
        PotentialModel::Coulomb3d { .. } | PotentialModel::Hydrogen3d { .. } => {
            // isotropic closed form: s_i = 3 sqrt(3) U, x = 0
            let s0 = 3.0 * 3.0_f64.sqrt() * u;
            let axes = (0..3).map(|_| AxisState { x: 0.0, p: 0.0, s: s0, ps: 0.0 }).collect();
            let state = ExtendedState::new(axes, u, 0.0)?;
            let pot = model.at_field([0.0; 3]);
            let e = v_eff(&pot, &[0.0; 3], &[s0, s0, s0], u)?;
            // stationarity check of the closed form
            let mut gx = [0.0; 3];
            let mut gs = [0.0; 3];
            grad_v_eff(&pot, &[0.0; 3], &[s0, s0, s0], u, &mut gx, &mut gs)?;
            let gnorm = gs.iter().chain(gx.iter()).map(|g| g * g).sum::<f64>().sqrt();
            if gnorm > 1e-9 {
                return Err(Error::Minimization(format!(
                    "closed-form ground state is not stationary (|grad| = {gnorm:.3e})"
                )));
            }
            Ok((state, e))
        }
        PotentialModel::GaussianWell1d { depth } => {
            let (s0, e) = gaussian_ground_state(*depth, u)?;
            let state = ExtendedState::new(vec![AxisState { x: 0.0, p: 0.0, s: s0, ps: 0.0 }], u, 0.0)?;
            Ok((state, e))
        }
    }
}

/// Ground state of `V_eff(0, s) = U/(2 s^2) - D / sqrt(1 + 2 s^2)`.
///
/// With `v = s^2`, stationarity reads `D = U (1 + 2v)^{3/2} / (2 v^2)`; the
/// right-hand side decreases strictly from infinity to zero, so every depth
/// has exactly one stationary width and it is the minimum. Substituting back
/// gives the ground energy `E = -U (1 + v) / (2 v^2) < 0`: the averaged well
/// always binds.
fn gaussian_ground_state(depth: f64, u: f64) -> Result<(f64, f64)> {
    if depth <= 0.0 {
        return Err(Error::domain("well depth must be > 0"));
    }
    let h = |v: f64| u * (1.0 + 2.0 * v).powf(1.5) / (2.0 * v * v) - depth;
    let mut lo = 1e-9;
    let mut hi = 1.0;
    while h(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e18 {
            return Err(Error::Minimization("stationary width bracket overflow".into()));
        }
    }
    while h(lo) < 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Minimization("stationary width bracket underflow".into()));
        }
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if h(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let v = 0.5 * (lo + hi);
    let e = -u * (1.0 + v) / (2.0 * v * v);
    Ok((v.sqrt(), e))
}

/// Find the Gaussian well depth whose ground-state energy is `target_e`.
///
/// Inverts the closed forms of [`gaussian_ground_state`]: the energy
/// relation `2 E v^2 + U v + U = 0` fixes the squared ground width `v`, and
/// the stationarity relation then yields the depth.
pub fn calibrate_well_depth(target_e: f64, u: f64) -> Result<f64> {
    if target_e >= 0.0 {
        return Err(Error::domain("target ground-state energy must be < 0"));
    }
    let v = (u + (u * u - 8.0 * target_e * u).sqrt()) / (-4.0 * target_e);
    Ok(u * (1.0 + 2.0 * v).powf(1.5) / (2.0 * v * v))
}

struct ClassicalSystem<'a> {
    model: &'a PotentialModel,
    pulse: &'a FieldPulse,
    dim: usize,
}

impl OdeSystem for ClassicalSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> std::result::Result<(), String> {
        let d = self.dim;
        let field = self.pulse.field_vector(t);
        let pot = self.model.at_field(field);
        let mut g = vec![0.0; d];
        pot.gradient(&y[..d], &mut g).map_err(|e| e.to_string())?;
        for i in 0..d {
            dydt[i] = y[d + i];
            dydt[d + i] = -g[i];
        }
        Ok(())
    }
}

/// Back-propagate classically from `(x_f, p_f)` at `t_f` down to `t0` using
/// `H_cl = p^2/2 + V(x; t)` (fluctuation variables play no role).
pub fn classical_backpropagate(
    x_f: &[f64],
    p_f: &[f64],
    t_f: f64,
    t0: f64,
    model: &PotentialModel,
    pulse: &FieldPulse,
    cfg: &IntegratorConfig,
) -> Result<ClassicalTrajectory> {
    if t_f <= t0 {
        return Err(Error::config("back-propagation requires t_f > t0"));
    }
    let dim = model.dim();
    let sys = ClassicalSystem { model, pulse, dim };
    let mut y0 = x_f.to_vec();
    y0.extend_from_slice(p_f);
    let sol = integrator::integrate(&sys, t_f, &y0, t0, &cfg.solver())?;
    Ok(ClassicalTrajectory { sol, dim })
}

/// Forward classical integration with the same contract (used in tests and
/// for reversibility checks).
pub fn classical_forward(
    x0: &[f64],
    p0: &[f64],
    t0: f64,
    t_end: f64,
    model: &PotentialModel,
    pulse: &FieldPulse,
    cfg: &IntegratorConfig,
) -> Result<ClassicalTrajectory> {
    let dim = model.dim();
    let sys = ClassicalSystem { model, pulse, dim };
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(p0);
    let sol = integrator::integrate(&sys, t0, &y0, t_end, &cfg.solver())?;
    Ok(ClassicalTrajectory { sol, dim })
}

/// Quantum Hamiltonian along a trajectory sample.
pub fn hq_at(
    traj: &Trajectory,
    t: f64,
    model: &PotentialModel,
    pulse: &FieldPulse,
    frame: &FrameSpec,
) -> Result<f64> {
    let st = traj.state_at(t)?;
    quantum_hamiltonian(&st, model, pulse, frame)
}

/// Interaction-free energy `H_Q - <x>.F(t)` (per-model coupling term),
/// the signal of the energy tunneling-exit criterion.
pub fn interaction_free_energy(
    traj: &Trajectory,
    t: f64,
    model: &PotentialModel,
    pulse: &FieldPulse,
    frame: &FrameSpec,
) -> Result<f64> {
    let st = traj.state_at(t)?;
    let h = quantum_hamiltonian(&st, model, pulse, frame)?;
    let field = effective_field(pulse, frame, t)?;
    Ok(h - model.interaction(&st.positions(), &field))
}

/// The same criterion signal from a raw flat state, for event scans.
pub fn criterion_energy_flat(
    y: &[f64],
    t: f64,
    dim: usize,
    u: f64,
    model: &PotentialModel,
    pulse: &FieldPulse,
    frame: &FrameSpec,
) -> f64 {
    let Ok(st) = ExtendedState::from_flat(dim, y, u, t) else {
        return f64::NAN;
    };
    let Ok(h) = quantum_hamiltonian(&st, model, pulse, frame) else {
        return f64::NAN;
    };
    let Ok(field) = effective_field(pulse, frame, t) else {
        return f64::NAN;
    };
    h - model.interaction(&st.positions(), &field)
}
