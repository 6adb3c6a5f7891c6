//! Extended phase space: expectation values plus canonical fluctuation
//! variables, the map to second-order moments, and the quantum Hamiltonian.

use crate::error::{Error, Result};
use crate::model::PotentialModel;
use crate::pulse::{corotating_field, FieldPulse, FrameSpec};

/// Per-axis block of the extended phase space: `x = <x>`, `p = <p>`,
/// fluctuation coordinate `s = sqrt(Delta(x^2)) > 0` and its momentum `ps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisState {
    pub x: f64,
    pub p: f64,
    pub s: f64,
    pub ps: f64,
}

/// Full state at time `t`, in 1 or 3 dimensions, with the conserved
/// per-axis uncertainty parameter `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    axes: Vec<AxisState>,
    u: f64,
    pub t: f64,
}

impl ExtendedState {
    pub fn new(axes: Vec<AxisState>, u: f64, t: f64) -> Result<Self> {
        if axes.len() != 1 && axes.len() != 3 {
            return Err(Error::config("extended state must have 1 or 3 axes"));
        }
        if u <= 0.0 {
            return Err(Error::domain("uncertainty parameter U must be > 0"));
        }
        for a in &axes {
            if a.s <= 0.0 {
                return Err(Error::domain("fluctuation coordinate s must be > 0"));
            }
        }
        Ok(ExtendedState { axes, u, t })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn axes(&self) -> &[AxisState] {
        &self.axes
    }

    pub fn positions(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.x).collect()
    }

    pub fn fluctuations(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.s).collect()
    }

    /// Flat layout `[x_1.., p_1.., s_1.., ps_1..]` used by the integrator.
    pub fn to_flat(&self) -> Vec<f64> {
        let d = self.dim();
        let mut y = vec![0.0; 4 * d];
        for (i, a) in self.axes.iter().enumerate() {
            y[i] = a.x;
            y[d + i] = a.p;
            y[2 * d + i] = a.s;
            y[3 * d + i] = a.ps;
        }
        y
    }

    pub fn from_flat(dim: usize, y: &[f64], u: f64, t: f64) -> Result<Self> {
        debug_assert_eq!(y.len(), 4 * dim);
        let axes = (0..dim)
            .map(|i| AxisState {
                x: y[i],
                p: y[dim + i],
                s: y[2 * dim + i],
                ps: y[3 * dim + i],
            })
            .collect();
        ExtendedState::new(axes, u, t)
    }
}

/// Second-order central moments of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub dxx: f64,
    pub dxp: f64,
    pub dpp: f64,
}

/// `Delta(x^2) = s^2`, `Delta(xp) = s ps`, `Delta(p^2) = ps^2 + U/s^2`.
pub fn moments_from_canonical(s: f64, ps: f64, u: f64) -> Result<MomentSet> {
    if s <= 0.0 {
        return Err(Error::domain("s must be > 0"));
    }
    if u < 0.0 {
        return Err(Error::domain("U must be >= 0"));
    }
    Ok(MomentSet {
        dxx: s * s,
        dxp: s * ps,
        dpp: ps * ps + u / (s * s),
    })
}

/// Inverse map; also recovers the uncertainty parameter
/// `U = dxx dpp - dxp^2`.
pub fn canonical_from_moments(m: &MomentSet) -> Result<(f64, f64, f64)> {
    if m.dxx <= 0.0 {
        return Err(Error::domain("Delta(x^2) must be > 0"));
    }
    let u = m.dxx * m.dpp - m.dxp * m.dxp;
    if u < 0.0 {
        return Err(Error::domain("uncertainty product dxx*dpp - dxp^2 must be >= 0"));
    }
    let s = m.dxx.sqrt();
    Ok((s, m.dxp / s, u))
}

/// Total quantum Hamiltonian of the extended system:
/// `sum_i (p_i^2 + ps_i^2)/2 + V_eff(x, s; t)`, plus the rotation coupling
/// `rate (P1 R2 - P2 R1)` in a co-rotating frame.
pub fn quantum_hamiltonian(
    state: &ExtendedState,
    model: &PotentialModel,
    pulse: &FieldPulse,
    frame: &FrameSpec,
) -> Result<f64> {
    if state.dim() != model.dim() {
        return Err(Error::config(format!(
            "state dimension {} does not match model dimension {}",
            state.dim(),
            model.dim()
        )));
    }
    let field = effective_field(pulse, frame, state.t)?;
    let x = state.positions();
    let s = state.fluctuations();
    let veff = model.effective_potential(field, &x, &s, state.u())?;
    let kinetic: f64 = state.axes().iter().map(|a| 0.5 * (a.p * a.p + a.ps * a.ps)).sum();
    let mut h = kinetic + veff;
    if let FrameSpec::CoRotating { rate } = frame {
        let a = state.axes();
        h += rate * (a[0].p * a[1].x - a[1].p * a[0].x);
    }
    Ok(h)
}

/// Field vector seen by the model in the requested frame.
pub fn effective_field(pulse: &FieldPulse, frame: &FrameSpec, t: f64) -> Result<[f64; 3]> {
    match frame {
        FrameSpec::Lab => Ok(pulse.field_vector(t)),
        FrameSpec::CoRotating { .. } => {
            let e0 = corotating_field(pulse, t)?;
            Ok([e0, 0.0, 0.0])
        }
    }
}
