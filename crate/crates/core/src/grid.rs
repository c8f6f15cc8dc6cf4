//! Exact 1D split-step spectral solver for H = p² + 2Ω(t)C(t, ε)cos(2z).
//!
//! The periodic box has length L = 2πM, so the lattice couples momentum bins exactly 2M
//! apart. States carry a global momentum offset (a Bloch phase), which lets gravity shifts
//! of gT/2 be applied exactly without interpolating the spectrum.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::units::{GaussianWavePacket, Pulse};

/// Probability that may wrap around the spectrum edge before a shift is rejected.
pub const OVERFLOW_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_points: usize,
    pub length: f64,
    pub dt: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_points: 8192, length: 64.0 * PI, dt: 0.001 }
    }
}

impl GridSpec {
    pub fn new(n_points: usize, length: f64, dt: f64) -> Result<Self> {
        let spec = GridSpec { n_points, length, dt };
        spec.validate()?;
        Ok(spec)
    }

    /// Smallest grid with spacing ≤ σ_p/4 and a momentum cutoff of at least 16ħk_L.
    pub fn for_wavepacket(wp: &GaussianWavePacket, dt: f64) -> Result<Self> {
        let m = ((4.0 / wp.sigma_p).ceil() as usize).next_power_of_two().max(32);
        let n = (32 * m).next_power_of_two().max(1024);
        GridSpec::new(n, 2.0 * PI * m as f64, dt)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_points.is_power_of_two() || self.n_points < 1024 {
            return Err(Error::invalid("grid.n_points", "must be a power of two >= 1024"));
        }
        let m = self.length / (2.0 * PI);
        if !(m.is_finite() && m >= 1.0 && (m - m.round()).abs() < 1e-9 * m) {
            return Err(Error::invalid("grid.length", "must equal 2*pi*M for integer M"));
        }
        if self.dk() > 0.05 {
            return Err(Error::invalid("grid.length", "momentum resolution 2*pi/L must be <= 0.05"));
        }
        if self.cutoff() < 10.0 {
            return Err(Error::invalid("grid.n_points", "momentum cutoff pi*n/L must be >= 10"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("grid.dt", "time step must be > 0"));
        }
        Ok(())
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn dz(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn cutoff(&self) -> f64 {
        PI * self.n_points as f64 / self.length
    }

    /// Number of bins between lattice-coupled momenta (2ħk_L).
    pub fn lattice_bins(&self) -> usize {
        (self.length / PI).round() as usize
    }

    /// Signed bin index in FFT ordering.
    fn bin(&self, j: usize) -> i64 {
        let n = self.n_points as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }
}

/// Planned forward/inverse transforms of one grid size, shareable across threads.
#[derive(Clone)]
pub struct Transforms {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transforms {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Transforms { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub spec: GridSpec,
    /// Periodic part of ψ(z) on the position grid, normalized so Σ|ψ|²dz = 1.
    pub field: Vec<C64>,
    pub time: f64,
    /// Momentum added to every spectral bin.
    pub momentum_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumPortHistogram {
    /// (k, population) for ports centered at p0 + 2k, ascending in k.
    pub populations: Vec<(i64, f64)>,
    pub residual: f64,
}

impl MomentumPortHistogram {
    pub fn port(&self, k: i64) -> f64 {
        self.populations.iter().find(|(j, _)| *j == k).map_or(0.0, |(_, v)| *v)
    }
}

impl GridState {
    pub fn norm(&self) -> f64 {
        self.field.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.spec.dz()
    }

    /// Momentum of FFT bin `j`.
    pub fn momentum(&self, j: usize) -> f64 {
        self.momentum_offset + self.spec.bin(j) as f64 * self.spec.dk()
    }

    /// Discrete spectral amplitudes c_j with Σ|c_j|² = Σ|ψ|²dz, in FFT ordering.
    pub fn spectrum(&self, fft: &Transforms) -> Vec<C64> {
        let mut buf = self.field.clone();
        fft.forward.process(&mut buf);
        let scale = (self.spec.dz() / self.spec.n_points as f64).sqrt();
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    fn set_spectrum(&mut self, mut c: Vec<C64>, fft: &Transforms) {
        fft.inverse.process(&mut c);
        let scale = 1.0 / (self.spec.dz() * self.spec.n_points as f64).sqrt();
        c.iter_mut().for_each(|v| *v *= scale);
        self.field = c;
    }

    /// Probability density |ψ̃(p)|² per bin, with bin momenta, sorted by momentum.
    pub fn momentum_density(&self, fft: &Transforms) -> Vec<(f64, f64)> {
        let c = self.spectrum(fft);
        let dk = self.spec.dk();
        let mut out: Vec<(f64, f64)> =
            c.iter().enumerate().map(|(j, a)| (self.momentum(j), a.norm_sqr() / dk)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Writes |ψ̃(p)|² as little-endian f64 after a 16-byte header {n_points (u64), L (f64)}.
    pub fn write_snapshot<W: Write>(&self, mut w: W, fft: &Transforms) -> std::io::Result<()> {
        w.write_all(&(self.spec.n_points as u64).to_le_bytes())?;
        w.write_all(&self.spec.length.to_le_bytes())?;
        for (_, d) in self.momentum_density(fft) {
            w.write_all(&d.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Gaussian packet sampled on the momentum grid and normalized.
pub fn prepare_wavepacket(spec: GridSpec, wp: &GaussianWavePacket, fft: &Transforms) -> Result<GridState> {
    spec.validate()?;
    wp.validate()?;
    if wp.sigma_p < 2.0 * spec.dk() {
        return Err(Error::Resolution(format!(
            "sigma_p = {} below twice the momentum spacing {}",
            wp.sigma_p,
            spec.dk()
        )));
    }
    if wp.p0.abs() + 8.0 * wp.sigma_p > spec.cutoff() {
        return Err(Error::Resolution("wave packet exceeds the momentum cutoff".into()));
    }
    let mut state =
        GridState { spec, field: vec![C64::new(0.0, 0.0); spec.n_points], time: 0.0, momentum_offset: 0.0 };
    let mut c: Vec<C64> =
        (0..spec.n_points).map(|j| C64::new(wp.amplitude(state.momentum(j)), 0.0)).collect();
    let norm: f64 = c.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|a| *a /= norm);
    state.set_spectrum(c, fft);
    Ok(state)
}

/// Second-order split-step evolution across the pulse support on the pulse's own clock.
pub fn split_step_pulse(state: &GridState, pulse: &Pulse, epsilon: f64, fft: &Transforms) -> GridState {
    let (t0, t1) = pulse.envelope.support;
    let duration = t1 - t0;
    let steps = ((duration / state.spec.dt).ceil() as usize).max(1);
    let dt = duration / steps as f64;
    let mut out = state.clone();
    let mut c = state.spectrum(fft);
    let half: Vec<C64> = (0..c.len())
        .map(|j| {
            let k = state.momentum(j);
            C64::from_polar(1.0, -0.5 * k * k * dt)
        })
        .collect();
    let n = state.spec.n_points;
    let dz = state.spec.dz();
    // cos(2z) repeats every n/(2M) grid points.
    let period = n / state.spec.lattice_bins();
    let cos2z: Vec<f64> = (0..period).map(|i| (2.0 * i as f64 * dz).cos()).collect();
    let mut phase = vec![C64::new(0.0, 0.0); period];
    let inv_n = 1.0 / n as f64;
    // Work with the unnormalized transform pair; the scale is restored at the end.
    for step in 0..steps {
        let t = t0 + (step as f64 + 0.5) * dt;
        let amp = 2.0 * pulse.envelope.rabi(t) * pulse.modulation(t, epsilon);
        c.iter_mut().zip(&half).for_each(|(a, h)| *a *= h);
        if amp != 0.0 {
            fft.inverse.process(&mut c);
            for (ph, cz) in phase.iter_mut().zip(&cos2z) {
                *ph = C64::from_polar(inv_n, -amp * cz * dt);
            }
            for chunk in c.chunks_exact_mut(period) {
                chunk.iter_mut().zip(&phase).for_each(|(a, ph)| *a *= ph);
            }
            fft.forward.process(&mut c);
        }
        c.iter_mut().zip(&half).for_each(|(a, h)| *a *= h);
    }
    out.set_spectrum(c, fft);
    out.time = state.time + duration;
    out
}

/// Multiplies each spectral component by exp(−i k² τ) (τ may be negative).
pub fn kinetic_phase(state: &GridState, tau: f64, fft: &Transforms) -> GridState {
    let mut c = state.spectrum(fft);
    for (j, a) in c.iter_mut().enumerate() {
        let k = state.momentum(j);
        *a *= C64::from_polar(1.0, -k * k * tau);
    }
    let mut out = state.clone();
    out.set_spectrum(c, fft);
    out
}

/// Applies a pulse as an instantaneous operation at its reference time: free evolution over
/// the pulse window is removed on both sides, matching the S-matrix convention.
pub fn apply_pulse_centered(state: &GridState, pulse: &Pulse, epsilon: f64, fft: &Transforms) -> GridState {
    let (t0, t1) = pulse.envelope.support;
    let tr = pulse.envelope.reference_time();
    let before = kinetic_phase(state, -(tr - t0), fft);
    let evolved = split_step_pulse(&before, pulse, epsilon, fft);
    let mut out = kinetic_phase(&evolved, -(t1 - tr), fft);
    out.time = state.time;
    out
}

fn port_of(p: f64, p0: f64) -> i64 {
    ((p - p0 + 1.0) / 2.0).floor() as i64
}

/// Port populations over windows [p0 + 2k − 1, p0 + 2k + 1) for |k| ≤ `k_max`.
pub fn momentum_histogram(state: &GridState, p0: f64, k_max: i64, fft: &Transforms) -> MomentumPortHistogram {
    let c = state.spectrum(fft);
    let mut pops = vec![0.0; (2 * k_max + 1) as usize];
    let mut residual = 0.0;
    for (j, a) in c.iter().enumerate() {
        let k = port_of(state.momentum(j), p0);
        if k.abs() <= k_max {
            pops[(k + k_max) as usize] += a.norm_sqr();
        } else {
            residual += a.norm_sqr();
        }
    }
    MomentumPortHistogram { populations: (-k_max..=k_max).zip(pops).collect(), residual }
}

/// Zeroes spectral weight outside the kept ports; returns the state and the removed probability.
pub fn apply_port_projector(
    state: &GridState,
    keep_ports: &[i64],
    p0: f64,
    renormalize: bool,
    fft: &Transforms,
) -> Result<(GridState, f64)> {
    let mut c = state.spectrum(fft);
    let mut removed = 0.0;
    let mut kept = 0.0;
    for (j, a) in c.iter_mut().enumerate() {
        if keep_ports.contains(&port_of(state.momentum(j), p0)) {
            kept += a.norm_sqr();
        } else {
            removed += a.norm_sqr();
            *a = C64::new(0.0, 0.0);
        }
    }
    if kept <= 1e-14 {
        return Err(Error::EmptyState);
    }
    if renormalize {
        let s = 1.0 / kept.sqrt();
        c.iter_mut().for_each(|a| *a *= s);
    }
    let mut out = state.clone();
    out.set_spectrum(c, fft);
    Ok((out, removed))
}

/// Absorbing slit: zeroes the field outside |z − center| < half_width (periodic distance);
/// returns the state and the removed probability.
pub fn apply_position_slit(state: &GridState, center: f64, half_width: f64) -> Result<(GridState, f64)> {
    let l = state.spec.length;
    let dz = state.spec.dz();
    let mut out = state.clone();
    let mut removed = 0.0;
    for (i, a) in out.field.iter_mut().enumerate() {
        let d = (i as f64 * dz - center).rem_euclid(l);
        let d = d.min(l - d);
        if d >= half_width {
            removed += a.norm_sqr() * dz;
            *a = C64::new(0.0, 0.0);
        }
    }
    if out.norm() <= 1e-14 {
        return Err(Error::EmptyState);
    }
    Ok((out, removed))
}

/// Exact free fall: phases exp[−i(Tk² + (gT²/2)k)] and a momentum shift of gT/2.
pub fn free_propagate_analytic(state: &GridState, g: f64, t: f64, fft: &Transforms) -> Result<GridState> {
    if t < 0.0 {
        return Err(Error::invalid("T", "interrogation time must be >= 0"));
    }
    let mut c = state.spectrum(fft);
    for (j, a) in c.iter_mut().enumerate() {
        let k = state.momentum(j);
        *a *= C64::from_polar(1.0, -(t * k * k + 0.5 * g * t * t * k));
    }
    let mut out = state.clone();
    out.momentum_offset += 0.5 * g * t;
    out.time += t;
    // Keep the offset within half a bin by relabelling bins; weight that would wrap across the
    // spectrum edge is an overflow.
    let dk = out.spec.dk();
    let shift = (out.momentum_offset / dk).round() as i64;
    if shift != 0 {
        let n = c.len() as i64;
        let mut wrapped = 0.0;
        for (j, a) in c.iter().enumerate() {
            let b = out.spec.bin(j) + shift;
            if b >= n / 2 || b < -n / 2 {
                wrapped += a.norm_sqr();
            }
        }
        if wrapped > OVERFLOW_TOLERANCE {
            return Err(Error::SpectralOverflow(wrapped));
        }
        let s = shift.rem_euclid(n) as usize;
        c.rotate_right(s);
        out.momentum_offset -= shift as f64 * dk;
    }
    out.set_spectrum(c, fft);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid() {
        let s = GridSpec::default();
        s.validate().unwrap();
        assert_eq!(s.cutoff(), 128.0);
        assert_eq!(s.lattice_bins(), 64);
        assert!(GridSpec::new(1000, 64.0 * PI, 0.001).is_err());
        assert!(GridSpec::new(8192, 63.0, 0.001).is_err());
    }

    #[test]
    fn prepared_packet_moments() {
        let wp = GaussianWavePacket::new(0.2, 0.05).unwrap();
        let spec = GridSpec::for_wavepacket(&wp, 0.001).unwrap();
        let fft = Transforms::new(spec.n_points);
        let s = prepare_wavepacket(spec, &wp, &fft).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-10);
        let dens = s.momentum_density(&fft);
        let dk = spec.dk();
        let mean: f64 = dens.iter().map(|(p, d)| p * d * dk).sum();
        let var: f64 = dens.iter().map(|(p, d)| (p - mean).powi(2) * d * dk).sum();
        assert!((mean - 0.2).abs() < 1e-3);
        assert!((var / 0.0025 - 1.0).abs() < 0.02);
    }

    #[test]
    fn unresolvable_packet_is_rejected() {
        let wp = GaussianWavePacket::new(0.0, 0.01).unwrap();
        let spec = GridSpec::default();
        let fft = Transforms::new(spec.n_points);
        assert!(matches!(prepare_wavepacket(spec, &wp, &fft), Err(Error::Resolution(_))));
        let auto = GridSpec::for_wavepacket(&wp, 0.001).unwrap();
        let fft = Transforms::new(auto.n_points);
        let s = prepare_wavepacket(auto, &wp, &fft).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn free_fall_shifts_centroid() {
        let wp = GaussianWavePacket::new(0.0, 0.05).unwrap();
        let spec = GridSpec::for_wavepacket(&wp, 0.001).unwrap();
        let fft = Transforms::new(spec.n_points);
        let s = prepare_wavepacket(spec, &wp, &fft).unwrap();
        let out = free_propagate_analytic(&s, 0.000357, 50.0, &fft).unwrap();
        let dk = spec.dk();
        let mean: f64 = out.momentum_density(&fft).iter().map(|(p, d)| p * d * dk).sum();
        assert!((mean - 0.008925).abs() < 1e-9);
        let before = s.momentum_density(&fft);
        let same = free_propagate_analytic(&s, 0.0, 7.3, &fft).unwrap().momentum_density(&fft);
        for (a, b) in before.iter().zip(&same) {
            assert!((a.1 - b.1).abs() * dk < 1e-12);
        }
    }

    #[test]
    fn histogram_partitions_probability() {
        let wp = GaussianWavePacket::new(0.0, 0.05).unwrap();
        let spec = GridSpec::for_wavepacket(&wp, 0.001).unwrap();
        let fft = Transforms::new(spec.n_points);
        let s = prepare_wavepacket(spec, &wp, &fft).unwrap();
        let h = momentum_histogram(&s, 0.0, 4, &fft);
        assert!(h.port(0) > 1.0 - 1e-8);
        let total: f64 = h.populations.iter().map(|x| x.1).sum::<f64>() + h.residual;
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projector_keep_all_is_identity() {
        let wp = GaussianWavePacket::new(0.1, 0.05).unwrap();
        let spec = GridSpec::for_wavepacket(&wp, 0.001).unwrap();
        let fft = Transforms::new(spec.n_points);
        let s = prepare_wavepacket(spec, &wp, &fft).unwrap();
        let ports: Vec<i64> = (-40..=40).collect();
        let (out, removed) = apply_port_projector(&s, &ports, 0.0, false, &fft).unwrap();
        assert!(removed < 1e-30);
        for (a, b) in s.field.iter().zip(&out.field) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(matches!(apply_port_projector(&s, &[3], 0.0, false, &fft), Err(Error::EmptyState)));
    }
}
