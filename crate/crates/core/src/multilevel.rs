//! (2n+1)-level Doppler-aware model of a single DBD pulse at fixed quasi-momentum p.
//!
//! Basis ordering is {|p⟩, |1,+⟩, |1,−⟩, …, |n,+⟩, |n,−⟩} where
//! |n,±⟩ = (|p+2n⟩ ± |p−2n⟩)/√2. The same index pattern is used for bare momenta:
//! index 0 is |p⟩, index 2n−1 is |p+2n⟩ and index 2n is |p−2n⟩.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ode::{self, Tolerance};
use crate::units::{GaussianWavePacket, Pulse};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelBasis {
    pub n_max: usize,
    pub p: f64,
}

impl LevelBasis {
    pub fn new(n_max: usize, p: f64) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::invalid("n_max", "need at least one diffraction order"));
        }
        if !(p.abs() < 1.0) {
            return Err(Error::OutOfZone(p));
        }
        Ok(LevelBasis { n_max, p })
    }

    pub fn dim(&self) -> usize {
        2 * self.n_max + 1
    }

    /// Index of |n,+⟩ (or |p+2n⟩ in the bare ordering).
    pub fn plus(n: usize) -> usize {
        2 * n - 1
    }

    /// Index of |n,−⟩ (or |p−2n⟩ in the bare ordering).
    pub fn minus(n: usize) -> usize {
        2 * n
    }

    /// Momentum offset in units of 2ħk_L carried by bare index `i`.
    pub fn order_of(i: usize) -> i64 {
        if i == 0 {
            0
        } else if i % 2 == 1 {
            (i as i64 + 1) / 2
        } else {
            -(i as i64) / 2
        }
    }

    /// Bare index carrying momentum p + 2k.
    pub fn index_of(k: i64) -> usize {
        match k {
            0 => 0,
            k if k > 0 => Self::plus(k as usize),
            k => Self::minus((-k) as usize),
        }
    }

    /// Diagonal energies p² + 4n² shared by |n,+⟩ and |n,−⟩.
    pub fn level_energy(&self, i: usize) -> f64 {
        let n = Self::order_of(i).unsigned_abs() as f64;
        self.p * self.p + 4.0 * n * n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLevelState {
    pub basis: LevelBasis,
    pub amplitudes: Vec<C64>,
}

impl MultiLevelState {
    pub fn basis_state(basis: LevelBasis, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; basis.dim()];
        amplitudes[index] = C64::new(1.0, 0.0);
        MultiLevelState { basis, amplitudes }
    }

    /// Bare momentum eigenstate |p + 2k⟩.
    pub fn bare(basis: LevelBasis, k: i64) -> Self {
        let mut b = vec![ZERO; basis.dim()];
        b[LevelBasis::index_of(k)] = C64::new(1.0, 0.0);
        MultiLevelState { basis, amplitudes: from_bare(&b) }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Symmetric/antisymmetric amplitudes to bare-momentum amplitudes.
pub fn to_bare(a: &[C64]) -> Vec<C64> {
    let mut b = a.to_vec();
    for n in 1..=(a.len() - 1) / 2 {
        let (i, j) = (LevelBasis::plus(n), LevelBasis::minus(n));
        b[i] = (a[i] + a[j]) * FRAC_1_SQRT_2;
        b[j] = (a[i] - a[j]) * FRAC_1_SQRT_2;
    }
    b
}

/// Bare-momentum amplitudes to symmetric/antisymmetric amplitudes (the map is an involution).
pub fn from_bare(b: &[C64]) -> Vec<C64> {
    to_bare(b)
}

/// Populations of |p + 2k⟩ for k = −n_max..=n_max, in ascending k.
pub fn bare_momentum_populations(state: &MultiLevelState) -> Vec<(f64, f64)> {
    let b = to_bare(&state.amplitudes);
    let n = state.basis.n_max as i64;
    (-n..=n).map(|k| (state.basis.p + 2.0 * k as f64, b[LevelBasis::index_of(k)].norm_sqr())).collect()
}

/// Schrödinger-picture Hamiltonian: kinetic diagonal, Doppler couplings 4np, lattice couplings.
pub fn build_hamiltonian(basis: &LevelBasis, t: f64, pulse: &Pulse, epsilon: f64) -> Vec<Vec<C64>> {
    let d = basis.dim();
    let mut h = vec![vec![ZERO; d]; d];
    let w = pulse.envelope.rabi(t) * pulse.modulation(t, epsilon);
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = C64::new(basis.level_energy(i), 0.0);
    }
    h[0][1] = C64::new(SQRT_2 * w, 0.0);
    h[1][0] = h[0][1];
    for n in 1..=basis.n_max {
        let (i, j) = (LevelBasis::plus(n), LevelBasis::minus(n));
        let doppler = C64::new(4.0 * n as f64 * basis.p, 0.0);
        h[i][j] = doppler;
        h[j][i] = doppler;
        if n < basis.n_max {
            let (i2, j2) = (LevelBasis::plus(n + 1), LevelBasis::minus(n + 1));
            h[i][i2] = C64::new(w, 0.0);
            h[i2][i] = C64::new(w, 0.0);
            h[j][j2] = C64::new(w, 0.0);
            h[j2][j] = C64::new(w, 0.0);
        }
    }
    h
}

/// Interaction-picture Hamiltonian with the p² + 4n² diagonal removed.
pub fn interaction_hamiltonian(basis: &LevelBasis, t: f64, pulse: &Pulse, epsilon: f64) -> Vec<Vec<C64>> {
    let d = basis.dim();
    let mut h = vec![vec![ZERO; d]; d];
    let w = pulse.envelope.rabi(t) * pulse.modulation(t, epsilon);
    let c01 = C64::from_polar(SQRT_2 * w, -4.0 * t);
    h[0][1] = c01;
    h[1][0] = c01.conj();
    for n in 1..=basis.n_max {
        let (i, j) = (LevelBasis::plus(n), LevelBasis::minus(n));
        let doppler = C64::new(4.0 * n as f64 * basis.p, 0.0);
        h[i][j] = doppler;
        h[j][i] = doppler;
        if n < basis.n_max {
            let c = C64::from_polar(w, -4.0 * (2 * n + 1) as f64 * t);
            let (i2, j2) = (LevelBasis::plus(n + 1), LevelBasis::minus(n + 1));
            h[i][i2] = c;
            h[i2][i] = c.conj();
            h[j][j2] = c;
            h[j2][j] = c.conj();
        }
    }
    h
}

/// Writes −i H̄(t) y for every column of the column-major block `y` (dimension `d`).
fn interaction_rhs(basis: &LevelBasis, pulse: &Pulse, epsilon: f64, t: f64, y: &[C64], dy: &mut [C64]) {
    let d = basis.dim();
    let n_max = basis.n_max;
    let w = pulse.envelope.rabi(t) * pulse.modulation(t, epsilon);
    let base = C64::from_polar(1.0, -4.0 * t);
    let c01 = SQRT_2 * w * base;
    // Coupling between orders n and n + 1 rotates at 4(2n + 1).
    let base2 = base * base;
    let mut c = w * base * base2;
    for (col, dcol) in y.chunks_exact(d).zip(dy.chunks_exact_mut(d)) {
        dcol[0] = c01 * col[1];
        dcol[1] = c01.conj() * col[0];
        for v in dcol[2..].iter_mut() {
            *v = ZERO;
        }
    }
    for n in 1..=n_max {
        let (i, j) = (2 * n - 1, 2 * n);
        let doppler = 4.0 * n as f64 * basis.p;
        let cc = c.conj();
        for (col, dcol) in y.chunks_exact(d).zip(dy.chunks_exact_mut(d)) {
            dcol[i] += doppler * col[j];
            dcol[j] += doppler * col[i];
            if n < n_max {
                let (i2, j2) = (i + 2, j + 2);
                dcol[i] += c * col[i2];
                dcol[i2] += cc * col[i];
                dcol[j] += c * col[j2];
                dcol[j2] += cc * col[j];
            }
        }
        c *= base2;
    }
    for v in dy.iter_mut() {
        *v = C64::new(v.im, -v.re);
    }
}

/// Solver settings for the multilevel model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiLevel {
    pub n_max: usize,
    pub tol: Tolerance,
}

impl Default for MultiLevel {
    fn default() -> Self {
        MultiLevel { n_max: 2, tol: Tolerance::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EfficiencyKind {
    BeamSplitter,
    MirrorPlus,
    MirrorMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEfficiency {
    pub kind: EfficiencyKind,
    pub value: f64,
    pub p: f64,
    pub epsilon: f64,
}

impl MultiLevel {
    pub fn with_order(n_max: usize) -> Self {
        MultiLevel { n_max, ..Default::default() }
    }

    pub fn basis(&self, p: f64) -> Result<LevelBasis> {
        LevelBasis::new(self.n_max, p)
    }

    /// Interaction-picture propagator over the pulse support for the given columns
    /// (column-major, each of length 2n_max + 1).
    pub fn propagate_interaction(
        &self,
        basis: &LevelBasis,
        pulse: &Pulse,
        epsilon: f64,
        columns: &[C64],
    ) -> Result<Vec<C64>> {
        let (t0, t1) = pulse.envelope.support;
        if pulse.envelope.peak == 0.0 {
            // Only the Doppler coupling remains; it is time independent.
            let mut out = columns.to_vec();
            let d = basis.dim();
            let dt = t1 - t0;
            for col in out.chunks_exact_mut(d) {
                for n in 1..=basis.n_max {
                    let (i, j) = (2 * n - 1, 2 * n);
                    let phi = 4.0 * n as f64 * basis.p * dt;
                    let (c, s) = (phi.cos(), phi.sin());
                    let (a, b) = (col[i], col[j]);
                    col[i] = c * a - C64::new(0.0, s) * b;
                    col[j] = c * b - C64::new(0.0, s) * a;
                }
            }
            return Ok(out);
        }
        ode::integrate_to(
            |t, y, dy| interaction_rhs(basis, pulse, epsilon, t, y, dy),
            t0,
            columns,
            t1,
            self.tol,
        )
    }

    /// Evolves a Schrödinger-picture state across the pulse support.
    pub fn evolve_pulse(
        &self,
        initial: &MultiLevelState,
        pulse: &Pulse,
        epsilon: f64,
    ) -> Result<MultiLevelState> {
        let basis = initial.basis;
        let (t0, t1) = pulse.envelope.support;
        let into: Vec<C64> = initial
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a * C64::from_polar(1.0, basis.level_energy(i) * t0))
            .collect();
        let out = self.propagate_interaction(&basis, pulse, epsilon, &into)?;
        let amplitudes = out
            .iter()
            .enumerate()
            .map(|(i, a)| a * C64::from_polar(1.0, -basis.level_energy(i) * t1))
            .collect();
        Ok(MultiLevelState { basis, amplitudes })
    }

    /// Bare populations after the pulse for input |p + 2k_in⟩.
    pub fn transfer_populations(&self, p: f64, k_in: i64, pulse: &Pulse, epsilon: f64) -> Result<Vec<f64>> {
        let basis = self.basis(p)?;
        let init = MultiLevelState::bare(basis, k_in);
        let out = self.propagate_interaction(&basis, pulse, epsilon, &init.amplitudes)?;
        Ok(to_bare(&out).iter().map(|a| a.norm_sqr()).collect())
    }

    /// F_BS(p) = P(|p⟩→|p+2⟩) + P(|p⟩→|p−2⟩).
    pub fn bs_efficiency(&self, p: f64, epsilon: f64, pulse: &Pulse) -> Result<PulseEfficiency> {
        let pop = self.transfer_populations(p, 0, pulse, epsilon)?;
        Ok(PulseEfficiency {
            kind: EfficiencyKind::BeamSplitter,
            value: (pop[1] + pop[2]).min(1.0),
            p,
            epsilon,
        })
    }

    /// F_M⁺(p) = P(|p+2⟩→|p−2⟩) or F_M⁻(p) = P(|p−2⟩→|p+2⟩).
    pub fn mirror_efficiency(
        &self,
        p: f64,
        epsilon: f64,
        pulse: &Pulse,
        direction: Direction,
    ) -> Result<PulseEfficiency> {
        let (k_in, out, kind) = match direction {
            Direction::Plus => (1, 2, EfficiencyKind::MirrorPlus),
            Direction::Minus => (-1, 1, EfficiencyKind::MirrorMinus),
        };
        let pop = self.transfer_populations(p, k_in, pulse, epsilon)?;
        Ok(PulseEfficiency { kind, value: pop[out].min(1.0), p, epsilon })
    }

    pub fn efficiency(
        &self,
        kind: EfficiencyKind,
        p: f64,
        epsilon: f64,
        pulse: &Pulse,
    ) -> Result<PulseEfficiency> {
        match kind {
            EfficiencyKind::BeamSplitter => self.bs_efficiency(p, epsilon, pulse),
            EfficiencyKind::MirrorPlus => self.mirror_efficiency(p, epsilon, pulse, Direction::Plus),
            EfficiencyKind::MirrorMinus => self.mirror_efficiency(p, epsilon, pulse, Direction::Minus),
        }
    }

    /// η = ∫|ψ(p)|² F(p) dp over the Gauss-Legendre nodes of the packet. For mirrors p is the
    /// deviation from the ±2ħk_L carrier.
    pub fn integrated_efficiency(
        &self,
        wp: &GaussianWavePacket,
        kind: EfficiencyKind,
        pulse: &Pulse,
        epsilon: f64,
    ) -> Result<f64> {
        wp.check_in_zone()?;
        let nodes = wp.quadrature();
        let values: Result<Vec<f64>> =
            nodes.par_iter().map(|&(p, w)| Ok(w * self.efficiency(kind, p, epsilon, pulse)?.value)).collect();
        Ok(values?.iter().sum())
    }

    /// Independent efficiency evaluations over a p × ε grid (rows follow `p_grid`).
    pub fn efficiency_landscape(
        &self,
        p_grid: &[f64],
        eps_grid: &[f64],
        kind: EfficiencyKind,
        pulse: &Pulse,
    ) -> Vec<Vec<Result<PulseEfficiency>>> {
        let cells: Vec<(f64, f64)> =
            p_grid.iter().flat_map(|&p| eps_grid.iter().map(move |&e| (p, e))).collect();
        let flat: Vec<Result<PulseEfficiency>> =
            cells.par_iter().map(|&(p, e)| self.efficiency(kind, p, e, pulse)).collect();
        let mut it = flat.into_iter();
        p_grid.iter().map(|_| it.by_ref().take(eps_grid.len()).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{Detuning, Envelope};

    fn c_bs() -> Pulse {
        Pulse::new(Envelope::gaussian(2.0, 0.47, 0.0), Detuning::constant(0.0))
    }

    #[test]
    fn doppler_couplings() {
        let b = LevelBasis::new(2, 0.1).unwrap();
        let h = build_hamiltonian(&b, 0.3, &c_bs(), 0.0);
        assert!((h[1][2].re - 0.4).abs() < 1e-15);
        assert!((h[3][4].re - 0.8).abs() < 1e-15);
        let b0 = LevelBasis::new(2, 0.0).unwrap();
        let h0 = interaction_hamiltonian(&b0, 0.3, &c_bs(), 0.0);
        assert_eq!(h0[1][2], ZERO);
        assert_eq!(h0[3][4], ZERO);
    }

    #[test]
    fn bare_conversion() {
        let b = LevelBasis::new(2, 0.0).unwrap();
        let s = MultiLevelState::basis_state(b, 1);
        let pop = bare_momentum_populations(&s);
        assert!((pop[1].1 - 0.5).abs() < 1e-15 && (pop[3].1 - 0.5).abs() < 1e-15);
        let s = MultiLevelState::bare(b, 1);
        let pop = bare_momentum_populations(&s);
        assert!((pop[3].1 - 1.0).abs() < 1e-15);
        assert_eq!(pop[3].0, 2.0);
    }

    #[test]
    fn index_round_trip() {
        for k in -4..=4 {
            assert_eq!(LevelBasis::order_of(LevelBasis::index_of(k)), k);
        }
    }

    #[test]
    fn null_pulse_efficiencies_vanish() {
        let ml = MultiLevel::default();
        let null = Pulse::null();
        assert!(ml.bs_efficiency(0.1, 0.0, &null).unwrap().value < 1e-20);
        assert!(ml.mirror_efficiency(0.1, 0.0, &null, Direction::Plus).unwrap().value < 1e-20);
    }

    #[test]
    fn landscape_degenerates_to_single_call() {
        let ml = MultiLevel::default();
        let grid = ml.efficiency_landscape(&[0.05], &[0.1], EfficiencyKind::BeamSplitter, &c_bs());
        let single = ml.bs_efficiency(0.05, 0.1, &c_bs()).unwrap();
        assert_eq!(grid[0][0].as_ref().unwrap().value, single.value);
    }
}
