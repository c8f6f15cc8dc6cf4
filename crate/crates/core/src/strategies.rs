//! Named detuning-control strategies and the cost functionals used to design them.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interferometer::pulse_s_columns;
use crate::multilevel::{to_bare, LevelBasis, MultiLevel, MultiLevelState};
use crate::units::{Detuning, Envelope, Pulse};

/// Knot table of the optimized hybrid mirror detuning.
const OCT_MIRROR_KNOTS: &str = include_str!("../data/oct_hybrid_mirror.knots");

/// Envelope of the optimized hybrid mirror (peak, width, center); the pulse runs from 0 to 2t₀.
pub const OCT_MIRROR_ENVELOPE: (f64, f64, f64) = (2.502, 1.829, 3.879);

/// Detuning bound that admits the full DS mirror sweep, which reaches −8.5 at the support edge.
pub const DS_MIRROR_BOUND: f64 = 9.0;

/// Detuning bound of the optimized mirror; its knots were searched over [−12, 4].
pub const OCT_MIRROR_BOUND: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyName {
    CDbd,
    CdDbd,
    DsDbd,
    OctHybrid,
    Custom,
}

impl StrategyName {
    pub const BUILTIN: [StrategyName; 4] =
        [StrategyName::CDbd, StrategyName::CdDbd, StrategyName::DsDbd, StrategyName::OctHybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyName::CDbd => "c_dbd",
            StrategyName::CdDbd => "cd_dbd",
            StrategyName::DsDbd => "ds_dbd",
            StrategyName::OctHybrid => "oct_hybrid",
            StrategyName::Custom => "custom",
        }
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c_dbd" => Ok(StrategyName::CDbd),
            "cd_dbd" => Ok(StrategyName::CdDbd),
            "ds_dbd" => Ok(StrategyName::DsDbd),
            "oct_hybrid" => Ok(StrategyName::OctHybrid),
            "custom" => Ok(StrategyName::Custom),
            _ => Err(Error::invalid(
                "strategy",
                format!("unknown strategy '{s}' (expected c_dbd, cd_dbd, ds_dbd, oct_hybrid or custom)"),
            )),
        }
    }
}

/// Beam-splitter and mirror pulses of a Mach–Zehnder sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub name: StrategyName,
    pub bs: Pulse,
    pub mirror: Pulse,
}

impl StrategySpec {
    pub fn validate(&self) -> Result<()> {
        self.bs.validate()?;
        self.mirror.validate()
    }

    /// Copy with the peak Rabi frequencies replaced.
    pub fn with_peaks(&self, bs_peak: f64, mirror_peak: f64) -> Self {
        let mut out = self.clone();
        out.bs.envelope = out.bs.envelope.with_peak(bs_peak);
        out.mirror.envelope = out.mirror.envelope.with_peak(mirror_peak);
        out
    }
}

fn c_bs_envelope() -> Envelope {
    Envelope::gaussian(2.0, 0.47, 0.0)
}

fn c_mirror_envelope() -> Envelope {
    Envelope::gaussian(2.89, 0.64, 0.0)
}

fn ds_bs() -> Pulse {
    Pulse::new(c_bs_envelope(), Detuning::linear(0.37, 0.315, 0.0, 0.47))
}

/// Optimized hybrid mirror built from a knot table.
pub fn oct_mirror(knots: &KnotTable) -> Result<Pulse> {
    let (peak, width, center) = OCT_MIRROR_ENVELOPE;
    let envelope = Envelope::gaussian(peak, width, center).with_support(0.0, 2.0 * center);
    Ok(Pulse::new(envelope, knots.detuning()?.with_bound(OCT_MIRROR_BOUND)))
}

/// Published parameterization of a named strategy.
pub fn builtin_strategy(name: StrategyName) -> Result<StrategySpec> {
    let (bs, mirror) = match name {
        StrategyName::CDbd => (
            Pulse::new(c_bs_envelope(), Detuning::constant(0.0)),
            Pulse::new(c_mirror_envelope(), Detuning::constant(0.0)),
        ),
        StrategyName::CdDbd => (
            Pulse::new(c_bs_envelope(), Detuning::constant(0.27)),
            Pulse::new(c_mirror_envelope(), Detuning::constant(0.0)),
        ),
        StrategyName::DsDbd => (
            ds_bs(),
            Pulse::new(
                c_mirror_envelope(),
                Detuning::linear(0.75, -4.0, 0.0, 0.64).with_bound(DS_MIRROR_BOUND),
            ),
        ),
        StrategyName::OctHybrid => (ds_bs(), oct_mirror(&KnotTable::parse(OCT_MIRROR_KNOTS)?)?),
        StrategyName::Custom => {
            return Err(Error::invalid("strategy", "custom strategies have no built-in parameters"))
        }
    };
    Ok(StrategySpec { name, bs, mirror })
}

/// Detuning knots serialized as "t_value delta_value" rows under a header naming the
/// strategy and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotTable {
    pub strategy: String,
    pub seed: u64,
    pub knots: Vec<(f64, f64)>,
}

impl KnotTable {
    pub fn detuning(&self) -> Result<Detuning> {
        let (t, d) = self.knots.iter().copied().unzip();
        Detuning::knots(t, d)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# strategy={} seed={}\n", self.strategy, self.seed);
        for (t, d) in &self.knots {
            s.push_str(&format!("{t:.16e} {d:.16e}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut strategy = None;
        let mut seed = None;
        let mut knots = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for field in header.split_whitespace() {
                    match field.split_once('=') {
                        Some(("strategy", v)) => strategy = Some(v.to_string()),
                        Some(("seed", v)) => {
                            seed = Some(
                                v.parse()
                                    .map_err(|_| Error::invalid("knots.seed", format!("bad seed '{v}'")))?,
                            )
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(t)), Some(Ok(d)), None) => knots.push((t, d)),
                _ => {
                    return Err(Error::invalid(
                        "knots",
                        format!("line {}: expected 't_value delta_value'", no + 1),
                    ))
                }
            }
        }
        let strategy = strategy.ok_or_else(|| Error::invalid("knots", "missing strategy in header"))?;
        let seed = seed.ok_or_else(|| Error::invalid("knots", "missing seed in header"))?;
        Ok(KnotTable { strategy, seed, knots })
    }
}

/// Bare output populations for several bare inputs |p + 2k⟩, propagated together.
pub fn bare_transfer(
    ml: &MultiLevel,
    p: f64,
    inputs: &[i64],
    pulse: &Pulse,
    epsilon: f64,
) -> Result<Vec<Vec<f64>>> {
    let basis = ml.basis(p)?;
    let columns: Vec<C64> = inputs.iter().flat_map(|&k| MultiLevelState::bare(basis, k).amplitudes).collect();
    let out = ml.propagate_interaction(&basis, pulse, epsilon, &columns)?;
    Ok(out.chunks_exact(basis.dim()).map(|c| to_bare(c).iter().map(|a| a.norm_sqr()).collect()).collect())
}

/// Beam-splitter cost ⟨|0.5 − P₊| + |0.5 − P₋| + |P₊ − P₋|⟩ over all (p, ε) sample pairs,
/// with P± the ±2ħk_L populations after the pulse for input |p⟩.
pub fn bs_cost(ml: &MultiLevel, pulse: &Pulse, momenta: &[f64], epsilons: &[f64]) -> Result<f64> {
    if momenta.is_empty() || epsilons.is_empty() {
        return Err(Error::invalid("samples", "momentum and epsilon samples must be non-empty"));
    }
    let pairs: Vec<(f64, f64)> =
        momenta.iter().flat_map(|&p| epsilons.iter().map(move |&e| (p, e))).collect();
    let plus = LevelBasis::index_of(1);
    let minus = LevelBasis::index_of(-1);
    let terms: Result<Vec<f64>> = pairs
        .par_iter()
        .map(|&(p, e)| {
            let pop = &bare_transfer(ml, p, &[0], pulse, e)?[0];
            let (a, b) = (pop[plus], pop[minus]);
            Ok((0.5 - a).abs() + (0.5 - b).abs() + (a - b).abs())
        })
        .collect();
    Ok(terms?.iter().sum::<f64>() / pairs.len() as f64)
}

/// Mirror cost ⟨|1 − P(+2 ← −2)| + |1 − P(−2 ← +2)|⟩ over the momentum samples at ε = 0.
pub fn mirror_cost(ml: &MultiLevel, pulse: &Pulse, momenta: &[f64]) -> Result<f64> {
    if momenta.is_empty() {
        return Err(Error::invalid("samples", "momentum samples must be non-empty"));
    }
    let plus = LevelBasis::index_of(1);
    let minus = LevelBasis::index_of(-1);
    let terms: Result<Vec<f64>> = momenta
        .par_iter()
        .map(|&p| {
            let pops = bare_transfer(ml, p, &[-1, 1], pulse, 0.0)?;
            Ok((1.0 - pops[0][plus]).abs() + (1.0 - pops[1][minus]).abs())
        })
        .collect();
    Ok(terms?.iter().sum::<f64>() / momenta.len() as f64)
}

/// Coherent mirror cost ⟨|1 − P(+2 ← −2)| + |1 − P(−2 ← +2)| + |A(+2 ← −2) − A(−2 ← +2)|⟩,
/// with A the centered S-matrix amplitudes. The last term vanishes when both arms of an
/// interferometer pick up the same mirror phase at every momentum.
pub fn coherent_mirror_cost(ml: &MultiLevel, pulse: &Pulse, momenta: &[f64]) -> Result<f64> {
    if momenta.is_empty() {
        return Err(Error::invalid("samples", "momentum samples must be non-empty"));
    }
    let plus = LevelBasis::index_of(1);
    let minus = LevelBasis::index_of(-1);
    let terms: Result<Vec<f64>> = momenta
        .par_iter()
        .map(|&p| {
            let cols = pulse_s_columns(ml, p, pulse, 0.0, &[minus, plus])?;
            let (up, down) = (cols[0][plus], cols[1][minus]);
            Ok((1.0 - up.norm_sqr()).abs() + (1.0 - down.norm_sqr()).abs() + (up - down).norm())
        })
        .collect();
    Ok(terms?.iter().sum::<f64>() / momenta.len() as f64)
}
