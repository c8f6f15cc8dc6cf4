//! Effective two-level model of double Bragg diffraction at p = 0.
//!
//! Basis {|0⟩, |1⟩} with |1⟩ the symmetric superposition of ±2ħk_L.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::ode::{self, Tolerance};
use crate::units::{Envelope, Pulse};

pub type Matrix2 = [[C64; 2]; 2];
pub type TlsState = [C64; 2];

/// Guard radius around the poles of the |1⟩ AC-Stark shift.
pub const POLE_GUARD: f64 = 1e-6;

/// Effective Hamiltonian with Δ evaluated at `t` inside the phase factors.
pub fn tls_hamiltonian(t: f64, pulse: &Pulse, epsilon: f64) -> Matrix2 {
    let omega = pulse.envelope.rabi(t);
    let delta = pulse.detuning.eval(t);
    let o2 = omega * omega;
    let e = epsilon;
    let h00 = o2 * (0.25 * e - 0.5 * e * e);
    let h11 = o2 * (-3.0 / 64.0 - 0.25 * e + 5.0 / 12.0 * e * e);
    let h01 = FRAC_1_SQRT_2
        * omega
        * (C64::from_polar(1.0, delta * t)
            + C64::from_polar(1.0, -(delta + 8.0) * t)
            + 2.0 * e * C64::from_polar(1.0, -4.0 * t));
    [[C64::new(h00, 0.0), h01], [h01.conj(), C64::new(h11, 0.0)]]
}

/// Rotating-wave Hamiltonian [[0, Ω/√2], [Ω/√2, δ_diff]].
pub fn rwa_hamiltonian(t: f64, envelope: &Envelope, delta_diff: f64) -> Matrix2 {
    let c = C64::new(FRAC_1_SQRT_2 * envelope.rabi(t), 0.0);
    [[C64::new(0.0, 0.0), c], [c, C64::new(delta_diff, 0.0)]]
}

/// Differential detuning δ_diff = −Δ − 3Ω²/64.
pub fn rwa_detuning(omega: f64, delta: f64) -> f64 {
    -delta - 3.0 / 64.0 * omega * omega
}

/// Rabi formula (2Ω²/(2Ω² + δ²)) sin²(√(2Ω² + δ²) t/2).
pub fn rwa_probability(omega: f64, delta_diff: f64, t: f64) -> f64 {
    let w2 = 2.0 * omega * omega + delta_diff * delta_diff;
    if w2 == 0.0 {
        return 0.0;
    }
    2.0 * omega * omega / w2 * (0.5 * w2.sqrt() * t).sin().powi(2)
}

/// Resonant transfer sin²(√π Ω_R τ) of a Gaussian pulse.
pub fn pulse_area_probability(peak: f64, width: f64) -> f64 {
    (PI.sqrt() * peak * width).sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcStarkCoefficients {
    pub shift00: f64,
    pub shift11: f64,
    pub omega: f64,
    pub delta: f64,
    pub epsilon: f64,
}

/// Light shifts of |0⟩ and |1⟩, the latter including the virtual ±4ħk_L couplings.
pub fn ac_stark_coefficients(omega: f64, delta: f64, epsilon: f64) -> Result<AcStarkCoefficients> {
    if (delta - 8.0).abs() < POLE_GUARD || (delta + 16.0).abs() < POLE_GUARD {
        return Err(Error::PoleProximity { delta, radius: POLE_GUARD });
    }
    let o2 = omega * omega;
    let e = epsilon;
    Ok(AcStarkCoefficients {
        shift00: o2 * (0.25 * e - 0.5 * e * e),
        shift11: o2 * (6.0 / ((delta - 8.0) * (delta + 16.0)) - 0.25 * e + 5.0 / 12.0 * e * e),
        omega,
        delta,
        epsilon,
    })
}

fn apply(h: &Matrix2, y: &[C64], dy: &mut [C64]) {
    let mi = C64::new(0.0, -1.0);
    dy[0] = mi * (h[0][0] * y[0] + h[0][1] * y[1]);
    dy[1] = mi * (h[1][0] * y[0] + h[1][1] * y[1]);
}

/// Integrates the effective Hamiltonian from `t_start`, sampling at the ascending `samples`.
pub fn evolve_tls(
    initial: TlsState,
    pulse: &Pulse,
    epsilon: f64,
    t_start: f64,
    samples: &[f64],
) -> Result<Vec<TlsState>> {
    let traj = ode::integrate(
        |t, y, dy| apply(&tls_hamiltonian(t, pulse, epsilon), y, dy),
        t_start,
        &initial,
        samples,
        Tolerance::default(),
    )?;
    Ok(traj.into_iter().map(|v| [v[0], v[1]]).collect())
}

/// Integrates the rotating-wave Hamiltonian with a fixed δ_diff.
pub fn evolve_rwa(
    initial: TlsState,
    envelope: &Envelope,
    delta_diff: f64,
    t_start: f64,
    samples: &[f64],
) -> Result<Vec<TlsState>> {
    let traj = ode::integrate(
        |t, y, dy| apply(&rwa_hamiltonian(t, envelope, delta_diff), y, dy),
        t_start,
        &initial,
        samples,
        Tolerance::default(),
    )?;
    Ok(traj.into_iter().map(|v| [v[0], v[1]]).collect())
}

/// Final |1⟩ population after the full pulse support starting from |0⟩.
pub fn tls_transfer(pulse: &Pulse, epsilon: f64) -> Result<f64> {
    let (a, b) = pulse.envelope.support;
    let out = evolve_tls([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], pulse, epsilon, a, &[b])?;
    Ok(out[0][1].norm_sqr())
}

/// Pulse-area condition √2 Ω t = π for a box pulse.
pub fn box_pi_time(omega: f64) -> f64 {
    PI / (SQRT_2 * omega)
}
