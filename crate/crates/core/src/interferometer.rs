//! Mach–Zehnder sequences BS·U·M·U·BS composed from per-pulse S-matrices in the bare basis
//! {|p⟩, |p+2⟩, |p−2⟩, |p+4⟩, |p−4⟩}, plus the grid-oracle version of the same sequence.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::RwLock;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{self, GridSpec, Transforms};
use crate::multilevel::{from_bare, to_bare, LevelBasis, MultiLevel};
use crate::strategies::{StrategyName, StrategySpec};
use crate::units::{GaussianWavePacket, PolarizationError, Pulse};

pub type Mat5 = [[C64; 5]; 5];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Momentum order k of bare basis index a (momentum p + 2k).
const ORDERS: [i64; 5] = [0, 1, -1, 2, -2];

/// Fringe-phase step 4gT² between neighbouring points of the default T grid.
pub const FRINGE_STEP: f64 = PI / 40.0;

/// Number of points of the default T grid (1.25 fringe periods).
pub const FRINGE_POINTS: usize = 100;

pub fn identity5() -> Mat5 {
    let mut m = [[ZERO; 5]; 5];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

pub fn matmul5(a: &Mat5, b: &Mat5) -> Mat5 {
    let mut out = [[ZERO; 5]; 5];
    for i in 0..5 {
        for k in 0..5 {
            let aik = a[i][k];
            for j in 0..5 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// max |(S†S − I)_ij|.
pub fn unitarity_error(s: &Mat5) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            let mut acc = ZERO;
            for row in s {
                acc += row[i].conj() * row[j];
            }
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((acc - target).norm());
        }
    }
    worst
}

/// Transfer matrix of one pulse; `matrix[a][b]` is the amplitude for |p + 2k_b⟩ → |p + 2k_a⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSMatrix {
    pub p: f64,
    pub matrix: Mat5,
}

/// S-matrix of a pulse acting instantaneously at its reference time t_r: the propagator over
/// the support [t_s, t_e] with free evolution over [t_s, t_r] and [t_r, t_e] removed.
pub fn pulse_s_matrix(solver: &MultiLevel, p: f64, pulse: &Pulse, epsilon: f64) -> Result<PulseSMatrix> {
    let columns = pulse_s_columns(solver, p, pulse, epsilon, &[0, 1, 2, 3, 4])?;
    let mut matrix = [[ZERO; 5]; 5];
    for (b, col) in columns.iter().enumerate() {
        for a in 0..5 {
            matrix[a][b] = col[a];
        }
    }
    Ok(PulseSMatrix { p, matrix })
}

/// Selected columns of `pulse_s_matrix`, one per bare input index.
pub fn pulse_s_columns(
    solver: &MultiLevel,
    p: f64,
    pulse: &Pulse,
    epsilon: f64,
    inputs: &[usize],
) -> Result<Vec<[C64; 5]>> {
    if solver.n_max < 2 {
        return Err(Error::invalid("solver.n_max", "S-matrices need at least second-order states"));
    }
    let basis = solver.basis(p)?;
    let d = basis.dim();
    let mut columns = Vec::with_capacity(inputs.len() * d);
    for &b in inputs {
        let mut e = vec![ZERO; d];
        e[b] = ONE;
        columns.extend(from_bare(&e));
    }
    let out = solver.propagate_interaction(&basis, pulse, epsilon, &columns)?;
    let (ts, te) = pulse.envelope.support;
    let tr = pulse.envelope.reference_time();
    let doppler = |a: usize| 4.0 * ORDERS[a] as f64 * p;
    let h0 = |a: usize| basis.level_energy(a);
    Ok(out
        .chunks_exact(d)
        .zip(inputs)
        .map(|(col, &b)| {
            let bare = to_bare(col);
            let right = C64::from_polar(1.0, h0(b) * tr + doppler(b) * (tr - ts));
            let mut s = [ZERO; 5];
            for (a, v) in s.iter_mut().enumerate() {
                let left = C64::from_polar(1.0, doppler(a) * (te - tr) - h0(a) * tr);
                *v = left * bare[a] * right;
            }
            s
        })
        .collect())
}

/// Ideal 50/50 beam splitter on {|p⟩, |p±2⟩}, identity on |p±4⟩.
pub fn ideal_beam_splitter() -> Mat5 {
    let h = C64::new(0.0, -FRAC_1_SQRT_2);
    let mut m = identity5();
    m[0][0] = ZERO;
    m[0][1] = h;
    m[0][2] = h;
    m[1][0] = h;
    m[2][0] = h;
    m[1][1] = C64::new(0.5, 0.0);
    m[2][2] = C64::new(0.5, 0.0);
    m[1][2] = C64::new(-0.5, 0.0);
    m[2][1] = C64::new(-0.5, 0.0);
    m
}

/// Ideal mirror |p±2⟩ → −|p∓2⟩, |p⟩ → −|p⟩, identity on |p±4⟩.
pub fn ideal_mirror() -> Mat5 {
    let mut m = identity5();
    m[0][0] = -ONE;
    m[1][1] = ZERO;
    m[2][2] = ZERO;
    m[1][2] = -ONE;
    m[2][1] = -ONE;
    m
}

/// Diagonal free-fall propagator of the bare states and the quasi-momentum it hands on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreePropagator {
    pub phases: [C64; 5],
    pub p_out: f64,
}

/// Propagation phase θ(p) = −(Tp² + (gT²/2)p).
pub fn propagation_phase(g: f64, p: f64, t: f64) -> f64 {
    -(t * p * p + 0.5 * g * t * t * p)
}

pub fn free_propagator(p: f64, g: f64, t: f64) -> FreePropagator {
    let mut phases = [ONE; 5];
    for (a, ph) in phases.iter_mut().enumerate() {
        *ph = C64::from_polar(1.0, propagation_phase(g, p + 2.0 * ORDERS[a] as f64, t));
    }
    FreePropagator { phases, p_out: p + 0.5 * g * t }
}

/// Accumulated phase 4aT² of a Mach–Zehnder sequence with effective wave number 4k_L.
pub fn semiclassical_phase(a: f64, t: f64) -> f64 {
    4.0 * a * t * t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detection {
    /// All intermediate paths interfere.
    Unresolved,
    /// Only momentum-reversal path pairs reach the detector.
    Resolved,
}

/// Paths (k after the first beam splitter, l after the mirror) kept by resolved detection.
/// The |p±4⟩ reversal pairs are dropped: their mirror elements need an eight-photon process.
const RESOLVED_PATHS: [(usize, usize); 3] = [(0, 0), (1, 2), (2, 1)];

/// Time-ordered product B₃·U₂·M·U₁·B₁ (unresolved) or its path-restricted sum (resolved).
pub fn compose(b1: &Mat5, u1: &[C64; 5], m: &Mat5, u2: &[C64; 5], b3: &Mat5, detection: Detection) -> Mat5 {
    match detection {
        Detection::Unresolved => {
            let mut inner = [[ZERO; 5]; 5];
            for l in 0..5 {
                for k in 0..5 {
                    inner[l][k] = u2[l] * m[l][k] * u1[k];
                }
            }
            matmul5(b3, &matmul5(&inner, b1))
        }
        Detection::Resolved => {
            let mut out = [[ZERO; 5]; 5];
            for &(k, l) in &RESOLVED_PATHS {
                let w = u2[l] * m[l][k] * u1[k];
                for i in 0..5 {
                    let left = b3[i][l] * w;
                    for j in 0..5 {
                        out[i][j] += left * b1[k][j];
                    }
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PulseModel {
    Strategy(StrategySpec),
    /// Analytic 50/50 beam splitters and perfect mirror.
    Ideal,
}

impl PulseModel {
    pub fn label(&self) -> &'static str {
        match self {
            PulseModel::Strategy(s) => s.name.as_str(),
            PulseModel::Ideal => "ideal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MzConfig {
    pub pulses: PulseModel,
    pub g: f64,
    pub t: f64,
    pub source: GaussianWavePacket,
    pub epsilon: f64,
    pub detection: Detection,
    pub solver: MultiLevel,
}

impl MzConfig {
    pub fn new(strategy: StrategySpec, g: f64, source: GaussianWavePacket) -> Self {
        MzConfig {
            pulses: PulseModel::Strategy(strategy),
            g,
            t: 0.0,
            source,
            epsilon: 0.0,
            detection: Detection::Unresolved,
            solver: MultiLevel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g.is_finite() {
            return Err(Error::invalid("g", "acceleration must be finite"));
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::invalid("T", "interrogation time must be finite and >= 0"));
        }
        PolarizationError::new(self.epsilon)?;
        self.source.validate()?;
        self.source.check_in_zone()?;
        if let PulseModel::Strategy(s) = &self.pulses {
            s.validate()?;
        }
        Ok(())
    }

    /// Checks that the final quasi-momenta p + gT of the source support stay in-zone.
    pub fn check_zone(&self, t: f64) -> Result<()> {
        let reach = self.source.p0.abs() + crate::units::QUADRATURE_HALF_WIDTH * self.source.sigma_p;
        let shift = self.g * t;
        if reach + shift.abs() >= 1.0 {
            return Err(Error::OutOfZone(self.source.p0 + shift));
        }
        Ok(())
    }

    pub fn strategy(&self) -> Result<&StrategySpec> {
        match &self.pulses {
            PulseModel::Strategy(s) => Ok(s),
            PulseModel::Ideal => Err(Error::invalid("pulses", "operation needs a pulse strategy")),
        }
    }
}

/// Pulse S-matrices memoized on the exact quasi-momentum; safe for concurrent use.
#[derive(Default)]
pub struct SMatrixCache {
    bs: RwLock<HashMap<u64, Mat5>>,
    mirror: RwLock<HashMap<u64, Mat5>>,
}

impl SMatrixCache {
    fn lookup(
        map: &RwLock<HashMap<u64, Mat5>>,
        p: f64,
        compute: impl FnOnce() -> Result<Mat5>,
    ) -> Result<Mat5> {
        if let Some(m) = map.read().unwrap().get(&p.to_bits()) {
            return Ok(*m);
        }
        let m = compute()?;
        map.write().unwrap().insert(p.to_bits(), m);
        Ok(m)
    }

    fn beam_splitter(&self, config: &MzConfig, p: f64) -> Result<Mat5> {
        match &config.pulses {
            PulseModel::Ideal => Ok(ideal_beam_splitter()),
            PulseModel::Strategy(s) => Self::lookup(&self.bs, p, || {
                Ok(pulse_s_matrix(&config.solver, p, &s.bs, config.epsilon)?.matrix)
            }),
        }
    }

    fn mirror(&self, config: &MzConfig, p: f64) -> Result<Mat5> {
        match &config.pulses {
            PulseModel::Ideal => Ok(ideal_mirror()),
            PulseModel::Strategy(s) => Self::lookup(&self.mirror, p, || {
                Ok(pulse_s_matrix(&config.solver, p, &s.mirror, config.epsilon)?.matrix)
            }),
        }
    }
}

fn total_cached(config: &MzConfig, p: f64, t: f64, cache: &SMatrixCache) -> Result<Mat5> {
    let u1 = free_propagator(p, config.g, t);
    let p2 = u1.p_out;
    let u2 = free_propagator(p2, config.g, t);
    let p3 = u2.p_out;
    for q in [p, p3] {
        LevelBasis::new(2, q)?;
    }
    let b1 = cache.beam_splitter(config, p)?;
    let m = cache.mirror(config, p2)?;
    let b3 = cache.beam_splitter(config, p3)?;
    Ok(compose(&b1, &u1.phases, &m, &u2.phases, &b3, config.detection))
}

/// Full sequence matrix at quasi-momentum p and the configured T.
pub fn total_s_matrix(config: &MzConfig, p: f64) -> Result<Mat5> {
    total_cached(config, p, config.t, &SMatrixCache::default())
}

/// Output-port populations: P₁ (|p⟩), P₂ (|p+2⟩), P₃ (|p−2⟩) and the |p±4⟩ remainder.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PortPopulations {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub higher: f64,
}

impl PortPopulations {
    pub fn p_sum(&self) -> f64 {
        self.p2 + self.p3
    }

    pub fn total(&self) -> f64 {
        self.p1 + self.p2 + self.p3 + self.higher
    }

    fn from_column(s: &Mat5, weight: f64) -> Self {
        PortPopulations {
            p1: weight * s[0][0].norm_sqr(),
            p2: weight * s[1][0].norm_sqr(),
            p3: weight * s[2][0].norm_sqr(),
            higher: weight * (s[3][0].norm_sqr() + s[4][0].norm_sqr()),
        }
    }

    fn add(&mut self, o: &PortPopulations) {
        self.p1 += o.p1;
        self.p2 += o.p2;
        self.p3 += o.p3;
        self.higher += o.higher;
    }
}

/// Port populations for a single input momentum p.
pub fn port_populations_at(config: &MzConfig, p: f64) -> Result<PortPopulations> {
    Ok(PortPopulations::from_column(&total_s_matrix(config, p)?, 1.0))
}

/// Port populations integrated over the source distribution at the configured T.
pub fn port_populations(config: &MzConfig) -> Result<PortPopulations> {
    let scan = t_scan(config, &[config.t])?;
    Ok(PortPopulations { p1: scan.p1[0], p2: scan.p2[0], p3: scan.p3[0], higher: scan.higher[0] })
}

/// Sampled signals over a T grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeScan {
    pub t: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub p3: Vec<f64>,
    pub p_sum: Vec<f64>,
    pub higher: Vec<f64>,
}

/// Default T grid: 4gT² = kπ/40 for k = 1..=100.
pub fn default_t_grid(g: f64) -> Result<Vec<f64>> {
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::invalid("g", "a fringe grid needs g > 0"));
    }
    Ok((1..=FRINGE_POINTS).map(|k| (k as f64 * FRINGE_STEP / (4.0 * g)).sqrt()).collect())
}

/// Evaluates the port populations at every T of an ascending grid. Work items run in
/// parallel; the reduction follows grid and quadrature order.
pub fn t_scan(config: &MzConfig, t_grid: &[f64]) -> Result<FringeScan> {
    config.validate()?;
    if t_grid.is_empty() {
        return Err(Error::invalid("T_grid", "grid must not be empty"));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("T_grid", "grid must be finite, >= 0 and ascending"));
    }
    for &t in t_grid {
        config.check_zone(t)?;
    }
    let nodes = config.source.quadrature();
    let items: Vec<(usize, usize)> =
        (0..t_grid.len()).flat_map(|i| (0..nodes.len()).map(move |j| (i, j))).collect();
    let cache = SMatrixCache::default();
    let parts: Result<Vec<PortPopulations>> = items
        .par_iter()
        .map(|&(i, j)| {
            let (p, w) = nodes[j];
            let s = total_cached(config, p, t_grid[i], &cache)?;
            Ok(PortPopulations::from_column(&s, w))
        })
        .collect();
    let parts = parts?;
    let mut scan = FringeScan {
        t: t_grid.to_vec(),
        p1: Vec::with_capacity(t_grid.len()),
        p2: Vec::with_capacity(t_grid.len()),
        p3: Vec::with_capacity(t_grid.len()),
        p_sum: Vec::with_capacity(t_grid.len()),
        higher: Vec::with_capacity(t_grid.len()),
    };
    for chunk in parts.chunks_exact(nodes.len()) {
        let mut acc = PortPopulations::default();
        chunk.iter().for_each(|c| acc.add(c));
        scan.p1.push(acc.p1);
        scan.p2.push(acc.p2);
        scan.p3.push(acc.p3);
        scan.p_sum.push(acc.p_sum());
        scan.higher.push(acc.higher);
    }
    Ok(scan)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastResult {
    pub contrast: f64,
    pub t_max: f64,
    pub t_min: f64,
    pub p_max: f64,
    pub p_min: f64,
    pub method: &'static str,
}

/// Peak-to-trough spread below which a scan counts as flat.
const FLAT_TOLERANCE: f64 = 1e-6;

/// Vertex of the parabola through three points, falling back to the middle sample when the
/// vertex leaves the bracket.
fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let denom = (x[0] - x[1]) * (x[0] - x[2]) * (x[1] - x[2]);
    let a = (x[2] * (y[1] - y[0]) + x[1] * (y[0] - y[2]) + x[0] * (y[2] - y[1])) / denom;
    let b = (x[2] * x[2] * (y[0] - y[1]) + x[1] * x[1] * (y[2] - y[0]) + x[0] * x[0] * (y[1] - y[2])) / denom;
    let c = (x[1] * x[2] * (x[1] - x[2]) * y[0]
        + x[2] * x[0] * (x[2] - x[0]) * y[1]
        + x[0] * x[1] * (x[0] - x[1]) * y[2])
        / denom;
    if a == 0.0 || !a.is_finite() {
        return (x[1], y[1]);
    }
    let xv = -b / (2.0 * a);
    if !(x[0]..=x[2]).contains(&xv) {
        return (x[1], y[1]);
    }
    (xv, c - b * b / (4.0 * a))
}

/// Contrast from the first maximum of P_sum at T > 0 and the following minimum, each refined
/// by a parabola in T² (the fringe variable).
pub fn extract_contrast(scan: &FringeScan) -> Result<ContrastResult> {
    let y = &scan.p_sum;
    let n = y.len();
    if n < 3 || scan.t.len() != n {
        return Err(Error::NoExtremaFound("scan needs at least three points".into()));
    }
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    if hi - lo < FLAT_TOLERANCE {
        return Err(Error::NoExtremaFound("signal is flat over the scan".into()));
    }
    let refine = |i: usize| {
        let x = [scan.t[i - 1].powi(2), scan.t[i].powi(2), scan.t[i + 1].powi(2)];
        let (xv, yv) = parabolic_vertex(x, [y[i - 1], y[i], y[i + 1]]);
        (xv.sqrt(), yv)
    };
    // Extrema of the dominant fringe: the largest sample of the first excursion above the
    // mid level, then the smallest sample of the following excursion below it. Small
    // parasitic ripples that never cross the mid level are skipped.
    let mid = 0.5 * (hi + lo);
    let start = (0..n)
        .find(|&i| scan.t[i] > 0.0 && y[i] > mid)
        .ok_or_else(|| Error::NoExtremaFound("no sample above the mid level".into()))?;
    let end_high = (start..n)
        .find(|&i| y[i] < mid)
        .ok_or_else(|| Error::NoExtremaFound("scan ends before the first maximum is passed".into()))?;
    let imax = (start..end_high).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
    let end_low = (end_high..n).find(|&i| y[i] > mid).unwrap_or(n);
    let imin = (end_high..end_low).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
    if imax == 0 || imin + 1 >= n {
        return Err(Error::NoExtremaFound("an extremum sits on the scan boundary".into()));
    }
    let (t_max, p_max) = refine(imax);
    let (t_min, p_min) = refine(imin);
    Ok(ContrastResult {
        contrast: (p_max - p_min).clamp(0.0, 1.0),
        t_max,
        t_min,
        p_max,
        p_min,
        method: "first-extrema-parabolic-T2",
    })
}

/// Contrast of a configuration over the default T grid.
pub fn mz_contrast(config: &MzConfig) -> Result<ContrastResult> {
    extract_contrast(&t_scan(config, &default_t_grid(config.g)?)?)
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = [[0.0; 4]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&m[i]);
        a[i][3] = r[i];
    }
    for c in 0..3 {
        let piv = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        a.swap(c, piv);
        if a[c][c] == 0.0 {
            return None;
        }
        for i in 0..3 {
            if i != c {
                let f = a[i][c] / a[c][c];
                for k in c..4 {
                    a[i][k] -= f * a[c][k];
                }
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

fn sinusoid_residual(x: &[f64], y: &[f64], w: f64) -> f64 {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let f = [1.0, (w * xi).cos(), (w * xi).sin()];
        for i in 0..3 {
            r[i] += f[i] * yi;
            for j in 0..3 {
                m[i][j] += f[i] * f[j];
            }
        }
    }
    let Some(c) = solve3(m, r) else { return f64::INFINITY };
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - c[0] - c[1] * (w * xi).cos() - c[2] * (w * xi).sin()).powi(2))
        .sum()
}

/// Angular frequency ω of P_sum ≈ a + b cos(ωT²) + c sin(ωT²), by least squares.
pub fn fit_fringe_frequency(scan: &FringeScan) -> Result<f64> {
    let c = extract_contrast(scan)?;
    let guess = PI / (c.t_min.powi(2) - c.t_max.powi(2));
    let x: Vec<f64> = scan.t.iter().map(|t| t * t).collect();
    let f = |w: f64| sinusoid_residual(&x, &scan.p_sum, w);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.7 * guess, 1.3 * guess);
    let mut c1 = b - golden * (b - a);
    let mut c2 = a + golden * (b - a);
    let (mut f1, mut f2) = (f(c1), f(c2));
    while b - a > 1e-13 * guess {
        if f1 < f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - golden * (b - a);
            f1 = f(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + golden * (b - a);
            f2 = f(c2);
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SigmaP,
    P0,
    Epsilon,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::SigmaP => "sigma_p",
            SweepAxis::P0 => "p0",
            SweepAxis::Epsilon => "epsilon",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma_p" => Ok(SweepAxis::SigmaP),
            "p0" => Ok(SweepAxis::P0),
            "epsilon" => Ok(SweepAxis::Epsilon),
            _ => Err(Error::invalid("sweep.axis", format!("unknown axis '{s}' (sigma_p, p0, epsilon)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub strategy: StrategyName,
    pub value: f64,
    /// NaN when the scan shows no fringe extrema.
    pub contrast: f64,
}

/// Contrast per swept value and strategy, each over the default T grid of the template's g.
pub fn contrast_sweep(
    template: &MzConfig,
    axis: SweepAxis,
    values: &[f64],
    strategies: &[StrategySpec],
) -> Result<Vec<SweepRow>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sweep.values", "values must be finite"));
    }
    let grid = default_t_grid(template.g)?;
    let mut rows = Vec::with_capacity(values.len() * strategies.len());
    for strategy in strategies {
        for &value in values {
            let mut config = template.clone();
            config.pulses = PulseModel::Strategy(strategy.clone());
            match axis {
                SweepAxis::SigmaP => config.source.sigma_p = value,
                SweepAxis::P0 => config.source.p0 = value,
                SweepAxis::Epsilon => config.epsilon = value,
            }
            let contrast = match extract_contrast(&t_scan(&config, &grid)?) {
                Ok(c) => c.contrast,
                Err(Error::NoExtremaFound(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            rows.push(SweepRow { strategy: strategy.name, value, contrast });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationResult {
    pub mean: f64,
    /// Sample standard deviation over shots.
    pub std: f64,
    pub contrasts: Vec<f64>,
    pub peaks: Vec<(f64, f64)>,
}

/// Shot-to-shot Rabi-frequency noise: each shot draws Ω_BS and Ω_M independently from
/// Normal(Ω_R, (σ_R Ω_R)²) and rebuilds every pulse matrix. Deterministic per seed.
pub fn fluctuation_robustness(
    config: &MzConfig,
    sigma_r: f64,
    n_shots: usize,
    seed: u64,
    t_grid: &[f64],
) -> Result<FluctuationResult> {
    if !(sigma_r.is_finite() && sigma_r >= 0.0) {
        return Err(Error::invalid("fluctuation.sigma_r", "relative spread must be finite and >= 0"));
    }
    if n_shots < 2 {
        return Err(Error::invalid("fluctuation.n_shots", "at least two shots are required"));
    }
    let base = config.strategy()?.clone();
    let draw = |peak: f64| {
        Normal::new(peak, sigma_r * peak).map_err(|e| Error::invalid("fluctuation.sigma_r", e.to_string()))
    };
    let bs_dist = draw(base.bs.envelope.peak)?;
    let m_dist = draw(base.mirror.envelope.peak)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let peaks: Vec<(f64, f64)> = (0..n_shots)
        .map(|_| {
            let b = bs_dist.sample(&mut rng).abs();
            let m = m_dist.sample(&mut rng).abs();
            (b, m)
        })
        .collect();
    let mut contrasts = Vec::with_capacity(n_shots);
    for &(b, m) in &peaks {
        let mut shot = config.clone();
        shot.pulses = PulseModel::Strategy(base.with_peaks(b, m));
        contrasts.push(extract_contrast(&t_scan(&shot, t_grid)?)?.contrast);
    }
    let n = contrasts.len() as f64;
    let mean = contrasts.iter().sum::<f64>() / n;
    let var = contrasts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(FluctuationResult { mean, std: var.sqrt(), contrasts, peaks })
}

/// Runs the sequence on the exact grid: centered pulses, analytic free fall and a momentum
/// histogram around p₀ + gT. Resolved detection places an absorbing slit of half-width 4T
/// around the recombination point before the final beam splitter.
pub fn oracle_port_populations(config: &MzConfig, spec: GridSpec) -> Result<PortPopulations> {
    config.validate()?;
    config.check_zone(config.t)?;
    let s = config.strategy()?;
    let (g, t, eps) = (config.g, config.t, config.epsilon);
    let fft = Transforms::new(spec.n_points);
    let mut state = grid::prepare_wavepacket(spec, &config.source, &fft)?;
    state = grid::apply_pulse_centered(&state, &s.bs, eps, &fft);
    state = grid::free_propagate_analytic(&state, g, t, &fft)?;
    state = grid::apply_pulse_centered(&state, &s.mirror, eps, &fft);
    state = grid::free_propagate_analytic(&state, g, t, &fft)?;
    if config.detection == Detection::Resolved {
        let center = 4.0 * config.source.p0 * t + 2.0 * g * t * t;
        state = grid::apply_position_slit(&state, center, 4.0 * t)?.0;
    }
    state = grid::apply_pulse_centered(&state, &s.bs, eps, &fft);
    let h = grid::momentum_histogram(&state, config.source.p0 + g * t, 2, &fft);
    Ok(PortPopulations {
        p1: h.port(0),
        p2: h.port(1),
        p3: h.port(-1),
        higher: h.port(2) + h.port(-2) + h.residual,
    })
}
