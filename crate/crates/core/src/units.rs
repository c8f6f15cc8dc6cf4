//! Recoil units and the shared pulse, detuning and wave-packet types.
//!
//! Everything is dimensionless: ħ = k_L = ω_rec = 1 and the atomic mass is 1/2, so a plane
//! wave |p⟩ has kinetic energy p². Momenta are in ħk_L, times in 1/ω_rec, frequencies in
//! ω_rec, lengths in 1/k_L and accelerations in ω_rec²/k_L.

use std::f64::consts::{FRAC_PI_4, PI};
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Atomic mass in recoil units.
pub const MASS: f64 = 0.5;

/// Default detuning bound |Δ(t)| ≤ 4ω_rec.
pub const DEFAULT_DETUNING_BOUND: f64 = 4.0;

/// Gaussian envelopes are truncated at this many widths on either side of the center.
pub const GAUSSIAN_SUPPORT_WIDTHS: f64 = 6.0;

/// Number of Gauss-Legendre nodes used for momentum averages.
pub const QUADRATURE_NODES: usize = 64;

/// Half-width of the momentum quadrature window in units of σ_p.
pub const QUADRATURE_HALF_WIDTH: f64 = 6.0;

/// Kinetic energy of the plane wave |p⟩.
pub fn kinetic_energy(p: f64) -> f64 {
    p * p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Gaussian,
    Box,
}

/// Time-dependent two-photon Rabi frequency Ω(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub shape: Shape,
    /// Peak Rabi frequency Ω_R.
    pub peak: f64,
    /// Width τ (standard deviation for Gaussians, duration for box pulses).
    pub width: f64,
    /// Center t₀ for Gaussians, switch-on time for box pulses.
    pub center: f64,
    /// Window outside of which Ω(t) = 0.
    pub support: (f64, f64),
}

impl Envelope {
    pub fn gaussian(peak: f64, width: f64, center: f64) -> Self {
        let half = GAUSSIAN_SUPPORT_WIDTHS * width;
        Envelope { shape: Shape::Gaussian, peak, width, center, support: (center - half, center + half) }
    }

    pub fn boxcar(peak: f64, width: f64, start: f64) -> Self {
        Envelope { shape: Shape::Box, peak, width, center: start, support: (start, start + width) }
    }

    pub fn with_support(mut self, start: f64, end: f64) -> Self {
        self.support = (start, end);
        self
    }

    pub fn with_peak(mut self, peak: f64) -> Self {
        self.peak = peak;
        self
    }

    pub fn rabi(&self, t: f64) -> f64 {
        if t < self.support.0 || t > self.support.1 {
            return 0.0;
        }
        match self.shape {
            Shape::Gaussian => {
                let x = (t - self.center) / self.width;
                self.peak * (-0.5 * x * x).exp()
            }
            Shape::Box => {
                if t >= self.center && t <= self.center + self.width {
                    self.peak
                } else {
                    0.0
                }
            }
        }
    }

    /// Instant at which the pulse is treated as acting when it is composed with free
    /// propagation: the Gaussian center, or the midpoint of a box pulse.
    pub fn reference_time(&self) -> f64 {
        match self.shape {
            Shape::Gaussian => self.center,
            Shape::Box => self.center + 0.5 * self.width,
        }
    }

    pub fn duration(&self) -> f64 {
        self.support.1 - self.support.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak.is_finite() && self.peak >= 0.0) {
            return Err(Error::invalid("envelope.peak", "Rabi frequency must be finite and >= 0"));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::invalid("envelope.width", "width must be finite and > 0"));
        }
        if !(self.center.is_finite() && self.support.0.is_finite() && self.support.1.is_finite()) {
            return Err(Error::invalid("envelope.support", "times must be finite"));
        }
        if self.support.1 <= self.support.0 {
            return Err(Error::invalid("envelope.support", "support end must follow its start"));
        }
        Ok(())
    }
}

/// Natural cubic spline through strictly increasing knots; constant beyond the end knots.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != y.len() || t.len() < 2 {
            return Err(Error::invalid("detuning.knots", "need at least two (t, delta) pairs"));
        }
        if t.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("detuning.knots", "knot values must be finite"));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("detuning.knots", "knot times must be strictly increasing"));
        }
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for the interior second derivatives (Thomas algorithm).
            let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
            }
        }
        Ok(NaturalSpline { t, y, m })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.y.iter().copied())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.y[0];
        }
        if t >= self.t[n - 1] {
            return self.y[n - 1];
        }
        let i = match self.t.partition_point(|&x| x <= t) {
            0 => 0,
            j => (j - 1).min(n - 2),
        };
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - t) / h;
        let b = (t - self.t[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DetuningKind {
    Constant(f64),
    /// Δ(t) = (slope/width)(t − center) + offset.
    Linear {
        slope: f64,
        offset: f64,
        center: f64,
        width: f64,
    },
    Knots(NaturalSpline),
}

/// Two-photon detuning Δ(t) entering cos[(4 + Δ(t))t].
#[derive(Debug, Clone, PartialEq)]
pub struct Detuning {
    pub kind: DetuningKind,
    pub bound: f64,
}

impl Detuning {
    pub fn constant(delta: f64) -> Self {
        Detuning { kind: DetuningKind::Constant(delta), bound: DEFAULT_DETUNING_BOUND }
    }

    pub fn linear(slope: f64, offset: f64, center: f64, width: f64) -> Self {
        Detuning {
            kind: DetuningKind::Linear { slope, offset, center, width },
            bound: DEFAULT_DETUNING_BOUND,
        }
    }

    pub fn knots(t: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        Ok(Detuning {
            kind: DetuningKind::Knots(NaturalSpline::new(t, delta)?),
            bound: DEFAULT_DETUNING_BOUND,
        })
    }

    /// Sweep Δ(t) = (t − t₀ + τ)/(2.5τ), crossing zero one width before the pulse center.
    pub fn linear_sweep(center: f64, width: f64) -> Self {
        Detuning::linear(0.4, 0.4, center, width)
    }

    /// Doppler-compensating sweep Δ(t) = (t − t₀ + 0.9τ)/(5τ).
    pub fn doppler_sweep_2024(center: f64, width: f64) -> Self {
        Detuning::linear(0.2, 0.18, center, width)
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    /// Unchecked evaluation; knot curves are clamped to ±bound.
    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            DetuningKind::Constant(d) => *d,
            DetuningKind::Linear { slope, offset, center, width } => slope / width * (t - center) + offset,
            DetuningKind::Knots(s) => s.eval(t).clamp(-self.bound, self.bound),
        }
    }

    /// Evaluation that reports a bound violation.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        let value = self.eval(t);
        if value.abs() > self.bound {
            return Err(Error::BoundViolation { t, value, bound: self.bound });
        }
        Ok(value)
    }

    /// Checks |Δ(t)| ≤ bound over `[start, end]`.
    pub fn check_window(&self, start: f64, end: f64) -> Result<()> {
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(Error::invalid("detuning.bound", "bound must be finite and > 0"));
        }
        match &self.kind {
            DetuningKind::Constant(_) => self.evaluate(start).map(|_| ()),
            DetuningKind::Linear { width, .. } => {
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::invalid("detuning.width", "reference width must be > 0"));
                }
                self.evaluate(start)?;
                self.evaluate(end).map(|_| ())
            }
            DetuningKind::Knots(_) => Ok(()),
        }
    }
}

/// A single DBD pulse: envelope plus detuning protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub envelope: Envelope,
    pub detuning: Detuning,
}

impl Pulse {
    pub fn new(envelope: Envelope, detuning: Detuning) -> Self {
        Pulse { envelope, detuning }
    }

    /// A pulse with vanishing Rabi frequency.
    pub fn null() -> Self {
        Pulse::new(Envelope::gaussian(0.0, 0.5, 0.0), Detuning::constant(0.0))
    }

    pub fn validate(&self) -> Result<()> {
        self.envelope.validate()?;
        self.detuning.check_window(self.envelope.support.0, self.envelope.support.1)
    }

    /// Lattice modulation C(t, ε) = cos[(4 + Δ(t))t] + ε.
    pub fn modulation(&self, t: f64, epsilon: f64) -> f64 {
        ((4.0 + self.detuning.eval(t)) * t).cos() + epsilon
    }
}

/// Gaussian momentum distribution of the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWavePacket {
    pub p0: f64,
    pub sigma_p: f64,
}

impl GaussianWavePacket {
    pub fn new(p0: f64, sigma_p: f64) -> Result<Self> {
        let wp = GaussianWavePacket { p0, sigma_p };
        wp.validate()?;
        Ok(wp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_p.is_finite() && self.sigma_p > 0.0) {
            return Err(Error::invalid("source.sigma_p", "momentum width must be > 0"));
        }
        if !self.p0.is_finite() {
            return Err(Error::invalid("source.p0", "must be finite"));
        }
        Ok(())
    }

    /// Requires |p0| + 6σ_p < 1.
    pub fn check_in_zone(&self) -> Result<()> {
        let edge = self.p0.abs() + QUADRATURE_HALF_WIDTH * self.sigma_p;
        if edge >= 1.0 {
            return Err(Error::OutOfZone(edge));
        }
        Ok(())
    }

    /// ψ(p) = (2πσ_p²)^(−1/4) exp(−(p − p0)²/(4σ_p²)).
    pub fn amplitude(&self, p: f64) -> f64 {
        let s2 = self.sigma_p * self.sigma_p;
        let x = p - self.p0;
        (2.0 * PI * s2).powf(-0.25) * (-x * x / (4.0 * s2)).exp()
    }

    pub fn density(&self, p: f64) -> f64 {
        let a = self.amplitude(p);
        a * a
    }

    /// Gauss-Legendre nodes over [p0 − 6σ_p, p0 + 6σ_p] paired with weight·|ψ(p)|², rescaled so
    /// the weights sum to one (the truncated tails hold 2·10⁻⁹).
    pub fn quadrature(&self) -> Vec<(f64, f64)> {
        let mut nodes: Vec<(f64, f64)> = gauss_legendre(
            self.p0 - QUADRATURE_HALF_WIDTH * self.sigma_p,
            self.p0 + QUADRATURE_HALF_WIDTH * self.sigma_p,
            QUADRATURE_NODES,
        )
        .into_iter()
        .map(|(p, w)| (p, w * self.density(p)))
        .collect();
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        nodes.iter_mut().for_each(|n| n.1 /= total);
        nodes
    }
}

/// Gauss-Legendre nodes and weights mapped to [a, b].
pub fn gauss_legendre(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.as_node_weight_pairs().iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

/// Residual overlap of the lattice polarizations, 0 (ideal) to 1 (parallel).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PolarizationError(f64);

impl PolarizationError {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", format!("polarization error {epsilon} outside [0, 1]")));
        }
        Ok(PolarizationError(epsilon))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// ε = |cos(2(π/4 + θ))| for a wave plate misaligned by θ.
pub fn polarization_error_from_waveplate_angle(theta: f64) -> PolarizationError {
    PolarizationError((2.0 * (FRAC_PI_4 + theta)).cos().abs().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_envelope_values() {
        let env = Envelope::gaussian(2.0, 0.47, 0.0);
        assert_eq!(env.rabi(0.0), 2.0);
        assert!((env.rabi(0.47) - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((env.rabi(0.47) - 1.21306).abs() < 1e-5);
        assert_eq!(env.rabi(6.0 * 0.47 + 1e-9), 0.0);
        assert_eq!(env.rabi(-10.0), 0.0);
    }

    #[test]
    fn box_envelope_values() {
        let env = Envelope::boxcar(2.0, 1.0, 0.5);
        assert_eq!(env.rabi(0.4), 0.0);
        assert_eq!(env.rabi(0.5), 2.0);
        assert_eq!(env.rabi(1.5), 2.0);
        assert_eq!(env.rabi(1.6), 0.0);
        assert_eq!(env.reference_time(), 1.0);
    }

    #[test]
    fn detuning_presets() {
        let sweep = Detuning::linear_sweep(1.3, 0.45);
        assert!(sweep.evaluate(1.3 - 0.45).unwrap().abs() < 1e-15);
        assert_eq!(Detuning::constant(0.27).evaluate(12.0).unwrap(), 0.27);
        assert_eq!(Detuning::linear(0.37, 0.315, 0.0, 0.47).evaluate(0.0).unwrap(), 0.315);
        let doppler = Detuning::doppler_sweep_2024(0.0, 0.5);
        assert!((doppler.eval(0.7) - (0.7 + 0.45) / 2.5).abs() < 1e-15);
    }

    #[test]
    fn detuning_bound_violation() {
        let d = Detuning::linear(0.75, -4.0, 0.0, 0.64);
        assert!(matches!(d.evaluate(-1.0), Err(Error::BoundViolation { .. })));
        assert!(d.clone().with_bound(9.0).check_window(-3.84, 3.84).is_ok());
        assert!(d.check_window(-3.84, 3.84).is_err());
    }

    #[test]
    fn spline_interpolates_knots_and_is_clamped() {
        let d = Detuning::knots(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, -1.0, 0.5]).unwrap();
        for (t, v) in [(0.0, 0.0), (1.0, 1.0), (2.0, -1.0), (3.0, 0.5)] {
            assert!((d.eval(t) - v).abs() < 1e-14);
        }
        let big = Detuning::knots(vec![0.0, 1.0], vec![10.0, -10.0]).unwrap();
        assert_eq!(big.eval(0.0), 4.0);
        assert_eq!(big.eval(1.0), -4.0);
        assert!(Detuning::knots(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn spline_reproduces_straight_line() {
        let t: Vec<f64> = (0..6).map(|i| i as f64 * 0.7).collect();
        let y: Vec<f64> = t.iter().map(|x| 0.3 * x - 1.0).collect();
        let s = NaturalSpline::new(t, y).unwrap();
        for i in 0..50 {
            let x = i as f64 * 0.07;
            assert!((s.eval(x) - (0.3 * x - 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn waveplate_angles() {
        assert!(polarization_error_from_waveplate_angle(0.0).value() < 1e-15);
        assert!((polarization_error_from_waveplate_angle(0.01 * PI).value() - 0.0628).abs() < 1e-4);
        assert!((polarization_error_from_waveplate_angle(FRAC_PI_4).value() - 1.0).abs() < 1e-15);
        assert!(PolarizationError::new(1.2).is_err());
    }

    #[test]
    fn wavepacket_amplitude_and_norm() {
        let wp = GaussianWavePacket::new(0.0, 0.05).unwrap();
        assert!((wp.amplitude(0.0) - (2.0 * PI * 0.0025f64).powf(-0.25)).abs() < 1e-12);
        assert!((wp.amplitude(0.0) - 2.824685).abs() < 1e-6);
        assert!(wp.amplitude(0.5) < 1e-10 * wp.amplitude(0.0));
        let norm: f64 = gauss_legendre(-1.0, 1.0, 200).iter().map(|&(p, w)| w * wp.density(p)).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let q: f64 = wp.quadrature().iter().map(|&(_, w)| w).sum();
        assert!((q - 1.0).abs() < 1e-8);
    }
}
