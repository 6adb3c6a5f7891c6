//! Classical potentials for the ionization models.
//!
//! Each variant keeps the sign conventions of its defining Hamiltonian:
//! the 3-D Coulomb model couples to the field through `-x.F` (plus the
//! polarizability correction), while the hydrogen model uses `+r.E`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SOFTENING: f64 = 1e-6;

/// A classical potential evaluated at a fixed instant (the field, if any,
/// is already baked in).
pub trait ClassicalPotential {
    fn dim(&self) -> usize;
    fn value(&self, r: &[f64]) -> Result<f64>;
    fn gradient(&self, r: &[f64], out: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialModel {
    /// `V = -1/|x| - x.F - alpha_I (F.x)/|x|^3`
    #[serde(rename = "coulomb")]
    Coulomb3d {
        alpha_i: f64,
        #[serde(default = "default_softening")]
        softening: f64,
    },
    /// `V = -D exp(-x^2) + x F`
    #[serde(rename = "gaussian_well")]
    GaussianWell1d { depth: f64 },
    /// `V = -1/|r| + r.E`
    #[serde(rename = "hydrogen")]
    Hydrogen3d {
        #[serde(default = "default_softening")]
        softening: f64,
    },
}

fn default_softening() -> f64 {
    DEFAULT_SOFTENING
}

impl PotentialModel {
    pub fn dim(&self) -> usize {
        match self {
            PotentialModel::GaussianWell1d { .. } => 1,
            _ => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialModel::Coulomb3d { softening, .. }
            | PotentialModel::Hydrogen3d { softening } => {
                if *softening < 0.0 {
                    return Err(Error::config("softening must be >= 0"));
                }
            }
            PotentialModel::GaussianWell1d { depth } => {
                if *depth <= 0.0 {
                    return Err(Error::config("well depth must be > 0"));
                }
            }
        }
        Ok(())
    }

    /// Bind an instantaneous field vector, yielding a potential of position only.
    pub fn at_field(&self, field: [f64; 3]) -> Fielded<'_> {
        Fielded { model: self, field }
    }

    /// Effective potential on the extended phase space at a fixed instant,
    /// including the field coupling at the expectation value. The 1-D
    /// Gaussian well uses the exact Gaussian average of the potential
    /// (closed form); the 3-D models use the corner average.
    pub fn effective_potential(
        &self,
        field: [f64; 3],
        x: &[f64],
        s: &[f64],
        u: f64,
    ) -> Result<f64> {
        match self {
            PotentialModel::GaussianWell1d { depth } => {
                let v = crate::effective::gaussian_well_v_eff(*depth, x[0], s[0], u)?;
                Ok(v + x[0] * field[0])
            }
            _ => crate::effective::v_eff(&self.at_field(field), x, s, u),
        }
    }

    /// Gradient of [`Self::effective_potential`] with respect to the
    /// positions and the fluctuation coordinates.
    pub fn effective_gradient(
        &self,
        field: [f64; 3],
        x: &[f64],
        s: &[f64],
        u: f64,
        gx: &mut [f64],
        gs: &mut [f64],
    ) -> Result<()> {
        match self {
            PotentialModel::GaussianWell1d { depth } => {
                let (dx, ds) = crate::effective::gaussian_well_grad(*depth, x[0], s[0], u)?;
                gx[0] = dx + field[0];
                gs[0] = ds;
                Ok(())
            }
            _ => crate::effective::grad_v_eff(&self.at_field(field), x, s, u, gx, gs),
        }
    }

    /// The field-coupling part of the potential at the expectation value,
    /// i.e. the term removed by the interaction-free energy criterion.
    pub fn interaction(&self, r: &[f64], field: &[f64; 3]) -> f64 {
        match self {
            PotentialModel::Coulomb3d { alpha_i, softening } => {
                let rho2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + softening * softening;
                let rho = rho2.sqrt();
                let fx = r[0] * field[0] + r[1] * field[1] + r[2] * field[2];
                -fx - alpha_i * fx / (rho * rho2)
            }
            PotentialModel::GaussianWell1d { .. } => r[0] * field[0],
            PotentialModel::Hydrogen3d { .. } => {
                r[0] * field[0] + r[1] * field[1] + r[2] * field[2]
            }
        }
    }
}

/// `PotentialModel` with an instantaneous field attached.
pub struct Fielded<'a> {
    model: &'a PotentialModel,
    field: [f64; 3],
}

impl ClassicalPotential for Fielded<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, r: &[f64]) -> Result<f64> {
        match self.model {
            PotentialModel::Coulomb3d { alpha_i, softening } => {
                let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
                if r2 == 0.0 && *softening == 0.0 {
                    return Err(Error::Singularity);
                }
                let rho2 = r2 + softening * softening;
                let rho = rho2.sqrt();
                let fx = r[0] * self.field[0] + r[1] * self.field[1] + r[2] * self.field[2];
                Ok(-1.0 / rho - fx - alpha_i * fx / (rho * rho2))
            }
            PotentialModel::GaussianWell1d { depth } => {
                let x = r[0];
                Ok(-depth * (-x * x).exp() + x * self.field[0])
            }
            PotentialModel::Hydrogen3d { softening } => {
                let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
                if r2 == 0.0 && *softening == 0.0 {
                    return Err(Error::Singularity);
                }
                let rho = (r2 + softening * softening).sqrt();
                let re = r[0] * self.field[0] + r[1] * self.field[1] + r[2] * self.field[2];
                Ok(-1.0 / rho + re)
            }
        }
    }

    fn gradient(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        match self.model {
            PotentialModel::Coulomb3d { alpha_i, softening } => {
                let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
                if r2 == 0.0 && *softening == 0.0 {
                    return Err(Error::Singularity);
                }
                let rho2 = r2 + softening * softening;
                let rho = rho2.sqrt();
                let rho3 = rho * rho2;
                let rho5 = rho3 * rho2;
                let fx = r[0] * self.field[0] + r[1] * self.field[1] + r[2] * self.field[2];
                for i in 0..3 {
                    out[i] = r[i] / rho3
                        - self.field[i]
                        - alpha_i * (self.field[i] / rho3 - 3.0 * fx * r[i] / rho5);
                }
                Ok(())
            }
            PotentialModel::GaussianWell1d { depth } => {
                let x = r[0];
                out[0] = 2.0 * depth * x * (-x * x).exp() + self.field[0];
                Ok(())
            }
            PotentialModel::Hydrogen3d { softening } => {
                let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
                if r2 == 0.0 && *softening == 0.0 {
                    return Err(Error::Singularity);
                }
                let rho2 = r2 + softening * softening;
                let rho3 = rho2.sqrt() * rho2;
                for i in 0..3 {
                    out[i] = r[i] / rho3 + self.field[i];
                }
                Ok(())
            }
        }
    }
}

/// Evaluate the bare classical potential at position `r` with field `f`.
pub fn classical_potential(model: &PotentialModel, r: &[f64], f: &[f64; 3]) -> Result<f64> {
    model.at_field(*f).value(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coulomb_with_polarizability() {
        // Argon at r = (0,0,1), F = (0,0,0.015): -1 - 0.015 - 7*0.015 = -1.12
        let m = PotentialModel::Coulomb3d { alpha_i: 7.0, softening: 0.0 };
        let v = classical_potential(&m, &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.015]).unwrap();
        assert_relative_eq!(v, -1.12, max_relative = 1e-12);
    }

    #[test]
    fn bare_coulomb() {
        let m = PotentialModel::Coulomb3d { alpha_i: 0.0, softening: 0.0 };
        let v = classical_potential(&m, &[0.0, 0.0, 2.0], &[0.0; 3]).unwrap();
        assert_relative_eq!(v, -0.5, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_well_at_origin() {
        let m = PotentialModel::GaussianWell1d { depth: 0.5 };
        let v = classical_potential(&m, &[0.0], &[0.0; 3]).unwrap();
        assert_relative_eq!(v, -0.5, max_relative = 1e-12);
    }

    #[test]
    fn origin_without_softening_is_singular() {
        let m = PotentialModel::Coulomb3d { alpha_i: 0.0, softening: 0.0 };
        assert!(matches!(
            classical_potential(&m, &[0.0; 3], &[0.0; 3]),
            Err(Error::Singularity)
        ));
    }

    #[test]
    fn softening_negligible_away_from_core() {
        let bare = PotentialModel::Coulomb3d { alpha_i: 7.0, softening: 0.0 };
        let soft = PotentialModel::Coulomb3d { alpha_i: 7.0, softening: 1e-6 };
        let f = [0.0, 0.0, 0.015];
        for r in [[0.1, 0.0, 0.05], [0.0, 0.0, 0.1], [1.0, 2.0, -0.5]] {
            let a = classical_potential(&bare, &r, &f).unwrap();
            let b = classical_potential(&soft, &r, &f).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = PotentialModel::Coulomb3d { alpha_i: 7.0, softening: 1e-6 };
        let f = [0.0, 0.01, 0.015];
        let pot = m.at_field(f);
        let r = [0.3, -0.7, 1.2];
        let mut g = [0.0; 3];
        pot.gradient(&r, &mut g).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut rp = r;
            let mut rm = r;
            rp[i] += h;
            rm[i] -= h;
            let fd = (pot.value(&rp).unwrap() - pot.value(&rm).unwrap()) / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn hydrogen_matches_bare_coulomb_when_field_free() {
        let hy = PotentialModel::Hydrogen3d { softening: 0.0 };
        let cl = PotentialModel::Coulomb3d { alpha_i: 0.0, softening: 0.0 };
        let r = [0.4, 0.5, -0.6];
        let a = classical_potential(&hy, &r, &[0.0; 3]).unwrap();
        let b = classical_potential(&cl, &r, &[0.0; 3]).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }
}
