//! External field pulses, frame specifications and derived pulse quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard atomic-unit intensity conversion, W/cm^2 per (a.u. field)^2.
pub const INTENSITY_AU_TO_WCM2: f64 = 3.50945e16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldPulse {
    /// Constant field vector.
    Static { f: [f64; 3] },
    /// 1-D half-cycle pulse `F(t) = -F0 sin^3(w t)` on `(0, pi/w)`, along axis 1.
    #[serde(rename = "half_cycle")]
    HalfCycleSin3 { f0: f64, omega: f64 },
    /// 1-D generalization of the half-cycle pulse to `N` carrier cycles,
    /// with the carrier crest at the pulse center `T/2`:
    /// `F(t) = -F0 cos^2(w (t - T/2) / 2N) cos(w (t - T/2))` on
    /// `(0, T = 2 pi N / w)`. `cycles = 1/2` reproduces `HalfCycleSin3`.
    MultiCycle { f0: f64, omega: f64, cycles: f64 },
    /// 2-D field of the cos^4-envelope vector potential with ellipticity
    /// `epsilon`, supported on `(-N pi / w, N pi / w)`.
    CosEnvelope { a0: f64, omega: f64, cycles: f64, epsilon: f64 },
    /// Rotating half-cycle pulse `E(t) = -E0 sin^2(w t) (sin w t, cos w t, 0)`
    /// on `[0, pi/w]`.
    RotatingHalfCycle { e0: f64, omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameSpec {
    #[default]
    Lab,
    CoRotating { rate: f64 },
}

impl FieldPulse {
    pub fn validate(&self) -> Result<()> {
        match self {
            FieldPulse::Static { .. } => Ok(()),
            FieldPulse::HalfCycleSin3 { f0, omega } => {
                check_amp_omega(*f0, *omega)
            }
            FieldPulse::MultiCycle { f0, omega, cycles } => {
                check_amp_omega(*f0, *omega)?;
                if *cycles < 0.5 {
                    return Err(Error::config("cycles must be >= 1/2"));
                }
                Ok(())
            }
            FieldPulse::CosEnvelope { a0, omega, cycles, .. } => {
                check_amp_omega(*a0, *omega)?;
                if *cycles < 0.5 {
                    return Err(Error::config("cycles must be >= 1/2"));
                }
                Ok(())
            }
            FieldPulse::RotatingHalfCycle { e0, omega } => check_amp_omega(*e0, *omega),
        }
    }

    /// Instantaneous field vector; identically zero outside the pulse support.
    pub fn field_vector(&self, t: f64) -> [f64; 3] {
        match self {
            FieldPulse::Static { f } => *f,
            FieldPulse::HalfCycleSin3 { f0, omega } => {
                let end = std::f64::consts::PI / omega;
                if t <= 0.0 || t >= end {
                    [0.0; 3]
                } else {
                    let s = (omega * t).sin();
                    [-f0 * s * s * s, 0.0, 0.0]
                }
            }
            FieldPulse::MultiCycle { f0, omega, cycles } => {
                let end = 2.0 * std::f64::consts::PI * cycles / omega;
                if t <= 0.0 || t >= end {
                    [0.0; 3]
                } else {
                    let phase = omega * (t - 0.5 * end);
                    let env = (phase / (2.0 * cycles)).cos();
                    [-f0 * env * env * phase.cos(), 0.0, 0.0]
                }
            }
            FieldPulse::CosEnvelope { a0, omega, cycles, epsilon } => {
                let half = cycles * std::f64::consts::PI / omega;
                if t <= -half || t >= half {
                    return [0.0; 3];
                }
                let amp = a0 * omega / (1.0 + epsilon * epsilon).sqrt();
                let c = (omega * t / (2.0 * cycles)).cos();
                let tn = (omega * t / (2.0 * cycles)).tan();
                let c4 = c * c * c * c;
                let (sw, cw) = (omega * t).sin_cos();
                let ex = amp * c4 * (sw + (2.0 / cycles) * tn * cw);
                let ey = epsilon * amp * c4 * (cw - (2.0 / cycles) * tn * sw);
                [ex, ey, 0.0]
            }
            FieldPulse::RotatingHalfCycle { e0, omega } => {
                let end = std::f64::consts::PI / omega;
                if t <= 0.0 || t >= end {
                    [0.0; 3]
                } else {
                    let (s, c) = (omega * t).sin_cos();
                    let env = -e0 * s * s;
                    [env * s, env * c, 0.0]
                }
            }
        }
    }

    /// Support of the pulse `(t_on, t_off)`; `Static` is supported everywhere.
    pub fn support(&self) -> (f64, f64) {
        match self {
            FieldPulse::Static { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            FieldPulse::HalfCycleSin3 { omega, .. }
            | FieldPulse::RotatingHalfCycle { omega, .. } => {
                (0.0, std::f64::consts::PI / omega)
            }
            FieldPulse::MultiCycle { omega, cycles, .. } => {
                (0.0, 2.0 * std::f64::consts::PI * cycles / omega)
            }
            FieldPulse::CosEnvelope { omega, cycles, .. } => {
                let half = cycles * std::f64::consts::PI / omega;
                (-half, half)
            }
        }
    }

    /// Reference instant that ionization delays are measured from.
    ///
    /// For most pulses this is the earliest global maximum of |F|. The
    /// multi-cycle family instead shares the peak instant of its half-cycle
    /// member, `pi / (2 w)`: the members only differ by how slowly the
    /// envelope builds up, so a common reference keeps their delays
    /// comparable across cycle counts.
    pub fn peak_time(&self) -> f64 {
        match self {
            FieldPulse::Static { .. } => 0.0,
            FieldPulse::HalfCycleSin3 { omega, .. }
            | FieldPulse::RotatingHalfCycle { omega, .. }
            | FieldPulse::MultiCycle { omega, .. } => 0.5 * std::f64::consts::PI / omega,
            _ => {
                let (a, b) = self.support();
                argmax_field(self, a, b)
            }
        }
    }
}

fn check_amp_omega(amp: f64, omega: f64) -> Result<()> {
    if amp < 0.0 {
        return Err(Error::config("pulse amplitude must be >= 0"));
    }
    if omega <= 0.0 {
        return Err(Error::config("omega must be > 0"));
    }
    Ok(())
}

fn field_norm(pulse: &FieldPulse, t: f64) -> f64 {
    let f = pulse.field_vector(t);
    (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt()
}

fn argmax_field(pulse: &FieldPulse, a: f64, b: f64) -> f64 {
    let n = 20_000;
    let dt = (b - a) / n as f64;
    let mut best_t = a;
    let mut best = -1.0; // |F| >= 0, so the first sample always updates
    for i in 0..=n {
        let t = a + i as f64 * dt;
        let v = field_norm(pulse, t);
        if v > best + 1e-12 * v.abs().max(1.0) {
            best = v;
            best_t = t;
        }
    }
    // golden-section refinement around the sampled peak
    let mut lo = (best_t - dt).max(a);
    let mut hi = (best_t + dt).min(b);
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = hi - phi * (hi - lo);
        let d = lo + phi * (hi - lo);
        if field_norm(pulse, c) > field_norm(pulse, d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    0.5 * (lo + hi)
}

/// Co-rotating-frame field amplitude along the fixed axis for the
/// circularly polarized two-cycle envelope: `E0(t) = (A0 w / sqrt 2) cos^3(w t / 4)`.
/// Only defined for `CosEnvelope` with `epsilon = 1`, `cycles = 2`.
pub fn corotating_field(pulse: &FieldPulse, t: f64) -> Result<f64> {
    match pulse {
        FieldPulse::CosEnvelope { a0, omega, cycles, epsilon }
            if *epsilon == 1.0 && *cycles == 2.0 =>
        {
            let half = 2.0 * std::f64::consts::PI / omega;
            if t <= -half || t >= half {
                return Ok(0.0);
            }
            let c = (omega * t / 4.0).cos();
            Ok(a0 * omega / 2.0_f64.sqrt() * c * c * c)
        }
        _ => Err(Error::Unsupported(
            "co-rotating field is only derived for CosEnvelope with epsilon = 1, cycles = 2"
                .into(),
        )),
    }
}

/// Frame rotation rate of the co-rotating specialization: `5 w / 4`.
pub fn corotating_rate(omega: f64) -> f64 {
    1.25 * omega
}

/// Keldysh time and parameter: `tau_K = sqrt(2|Ip|)/F`, `gamma_K = w tau_K`.
pub fn keldysh(omega: f64, ip: f64, f: f64) -> Result<(f64, f64)> {
    if f <= 0.0 {
        return Err(Error::domain("Keldysh parameter requires F > 0"));
    }
    let tau_k = (2.0 * ip.abs()).sqrt() / f;
    Ok((tau_k, omega * tau_k))
}

/// Peak intensity in W/cm^2 for a field amplitude in atomic units.
pub fn intensity_conversion(f: f64) -> f64 {
    INTENSITY_AU_TO_WCM2 * f * f
}

/// Amplitude of a half-cycle pulse at frequency `omega` carrying the same
/// fluence (time-integrated F^2) as the reference pulse `(f0_ref, omega_ref)`.
pub fn fluence_matched_amplitude(omega: f64, f0_ref: f64, omega_ref: f64) -> f64 {
    // int_0^{pi/w} sin^6(w t) dt = (5 pi / 16) / w for the sin^3 pulse,
    // so the fluence scales as F0^2 / w.
    f0_ref * (omega / omega_ref).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn half_cycle_peak_value() {
        let p = FieldPulse::HalfCycleSin3 { f0: 0.14, omega: 0.05811 };
        let t = PI / (2.0 * 0.05811);
        assert!((t - 27.03).abs() < 0.05);
        let f = p.field_vector(t);
        assert_relative_eq!(f[0], -0.14, max_relative = 1e-12);
    }

    #[test]
    fn zero_outside_support() {
        let p = FieldPulse::HalfCycleSin3 { f0: 0.14, omega: 0.05811 };
        assert_eq!(p.field_vector(-1.0), [0.0; 3]);
        assert_eq!(p.field_vector(PI / 0.05811 + 1.0), [0.0; 3]);
    }

    #[test]
    fn cos_envelope_at_zero() {
        let (a0, omega) = (1.3, 0.05811);
        let p = FieldPulse::CosEnvelope { a0, omega, cycles: 2.0, epsilon: 1.0 };
        let f = p.field_vector(0.0);
        assert_relative_eq!(f[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(f[1], a0 * omega / 2.0_f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn corotating_specialization() {
        let (a0, omega) = (1.3, 0.05811);
        let p = FieldPulse::CosEnvelope { a0, omega, cycles: 2.0, epsilon: 1.0 };
        assert_relative_eq!(
            corotating_field(&p, 0.0).unwrap(),
            a0 * omega / 2.0_f64.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            corotating_field(&p, 2.0 * PI / omega - 1e-9).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(corotating_rate(0.05811), 0.0726375, max_relative = 1e-12);
        let bad = FieldPulse::CosEnvelope { a0, omega, cycles: 1.0, epsilon: 1.0 };
        assert!(corotating_field(&bad, 0.0).is_err());
    }

    #[test]
    fn lab_field_equals_rotated_corotating_field() {
        let (a0, omega) = (0.9, 0.05811);
        let p = FieldPulse::CosEnvelope { a0, omega, cycles: 2.0, epsilon: 1.0 };
        for i in 0..200 {
            let t = -2.0 * PI / omega + i as f64 * (4.0 * PI / omega) / 200.0;
            let lab = p.field_vector(t);
            let e0 = corotating_field(&p, t).unwrap();
            let a = 1.25 * omega * t;
            let rx = a.sin() * e0;
            let ry = a.cos() * e0;
            assert_relative_eq!(lab[0], rx, epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(lab[1], ry, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn pulses_vanish_smoothly_at_support_edges() {
        let pulses = [
            FieldPulse::HalfCycleSin3 { f0: 0.14, omega: 0.05811 },
            FieldPulse::MultiCycle { f0: 0.45, omega: 0.05811, cycles: 1.0 },
            FieldPulse::MultiCycle { f0: 0.75, omega: 0.05811, cycles: 2.0 },
            FieldPulse::RotatingHalfCycle { e0: 0.1, omega: 0.05811 },
        ];
        for p in &pulses {
            let (a, b) = p.support();
            for edge in [a, b] {
                assert!(field_norm(p, edge) == 0.0);
                // first derivative also vanishes: the field just inside is tiny
                let eps = 1e-5;
                let inside = if edge == a { edge + eps } else { edge - eps };
                assert!(field_norm(p, inside) < 1e-8, "field not smooth at support edge");
            }
        }
    }

    #[test]
    fn multi_cycle_half_cycle_reduces_to_sin3() {
        // cos^2(w(t - T/2)) cos(w(t - T/2)) = sin^3(w t) at T = pi/w
        let a = FieldPulse::HalfCycleSin3 { f0: 0.14, omega: 0.05811 };
        let b = FieldPulse::MultiCycle { f0: 0.14, omega: 0.05811, cycles: 0.5 };
        for i in 0..100 {
            let t = i as f64 * 0.6;
            assert_relative_eq!(
                a.field_vector(t)[0],
                b.field_vector(t)[0],
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn multi_cycle_center_crest_and_build_up() {
        let omega = 0.05811;
        for cycles in [1.0, 2.0, 3.0] {
            let p = FieldPulse::MultiCycle { f0: 0.45, omega, cycles };
            let (_, end) = p.support();
            assert_relative_eq!(end, 2.0 * PI * cycles / omega, max_relative = 1e-12);
            // full amplitude at the pulse center
            assert_relative_eq!(p.field_vector(0.5 * end)[0], -0.45, max_relative = 1e-12);
            // the center is the global |F| maximum
            let n = 5000;
            for i in 0..=n {
                let t = end * i as f64 / n as f64;
                assert!(p.field_vector(t)[0].abs() <= 0.45 + 1e-12);
            }
        }
        // the envelope cos^2(w(t - T/2)/2N) = sin^2(w t / 2N) rises more
        // slowly with more cycles: early fluence drops as N grows
        let fluence_until = |cycles: f64, t_cut: f64| {
            let p = FieldPulse::MultiCycle { f0: 0.45, omega, cycles };
            let n = 20_000;
            let dt = t_cut / n as f64;
            (0..n)
                .map(|i| {
                    let f = p.field_vector((i as f64 + 0.5) * dt)[0];
                    f * f * dt
                })
                .sum::<f64>()
        };
        let t_cut = 0.5 * PI / omega;
        let early: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&c| fluence_until(c, t_cut)).collect();
        assert!(early[0] > early[1] && early[1] > early[2], "{early:?}");
    }

    #[test]
    fn keldysh_values() {
        let (tau, gamma) = keldysh(0.05811, -2.0 / 9.0, 0.14).unwrap();
        assert_relative_eq!(tau, (2.0 / 3.0) / 0.14, max_relative = 1e-12);
        assert_relative_eq!(gamma, 0.05811 * (2.0 / 3.0) / 0.14, max_relative = 1e-12);
        assert!((tau - 4.7619).abs() < 1e-3);
        assert!((gamma - 0.27670).abs() < 1e-4);
        let (tau2, _) = keldysh(0.05811, -2.0 / 9.0, 0.07).unwrap();
        assert_relative_eq!(tau2, 2.0 * tau, max_relative = 1e-12);
        assert!(keldysh(0.05811, -2.0 / 9.0, 0.0).is_err());
    }

    #[test]
    fn intensity_values() {
        assert_relative_eq!(intensity_conversion(0.0), 0.0);
        let i14 = intensity_conversion(0.14);
        assert!((i14 - 6.88e14).abs() / 6.88e14 < 0.01);
        let i015 = intensity_conversion(0.015);
        assert!((i015 - 7.90e12).abs() / 7.90e12 < 0.01);
    }

    #[test]
    fn fluence_matching() {
        let f0 = 0.14;
        let w0 = 0.05811;
        assert_relative_eq!(fluence_matched_amplitude(w0, f0, w0), f0);
        assert_relative_eq!(
            fluence_matched_amplitude(4.0 * w0, f0, w0),
            2.0 * f0,
            max_relative = 1e-12
        );
        // defining property: integral of F^2 matches the reference
        let fluence = |f0: f64, w: f64| {
            let p = FieldPulse::HalfCycleSin3 { f0, omega: w };
            let (a, b) = p.support();
            let n = 200_000;
            let dt = (b - a) / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let t = a + (i as f64 + 0.5) * dt;
                let f = p.field_vector(t)[0];
                acc += f * f * dt;
            }
            acc
        };
        let w1 = 2.5 * w0;
        let f1 = fluence_matched_amplitude(w1, f0, w0);
        let (e0, e1) = (fluence(f0, w0), fluence(f1, w1));
        assert_relative_eq!(e0, e1, max_relative = 1e-8);
    }

    #[test]
    fn peak_times() {
        let p = FieldPulse::HalfCycleSin3 { f0: 0.14, omega: 0.05811 };
        assert_relative_eq!(p.peak_time(), PI / (2.0 * 0.05811), max_relative = 1e-12);
        // the whole multi-cycle family shares its half-cycle member's peak
        for cycles in [0.5, 1.0, 2.0] {
            let p = FieldPulse::MultiCycle { f0: 0.45, omega: 0.05811, cycles };
            assert_relative_eq!(p.peak_time(), PI / (2.0 * 0.05811), max_relative = 1e-12);
        }
        let r = FieldPulse::RotatingHalfCycle { e0: 0.1, omega: 0.05811 };
        assert_relative_eq!(r.peak_time(), PI / (2.0 * 0.05811), max_relative = 1e-12);
    }
}
