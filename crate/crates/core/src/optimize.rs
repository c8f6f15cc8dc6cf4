//! Derivative-free pulse design: random global sampling followed by bounded Nelder–Mead
//! descents, deterministic for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::multilevel::MultiLevel;
use crate::strategies::{bs_cost, coherent_mirror_cost, mirror_cost, KnotTable};
use crate::units::{Detuning, Envelope, Pulse};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    BsBalanced,
    MirrorBidirectional,
    /// Bidirectional transfer with matched arm amplitudes (`coherent_mirror_cost`).
    MirrorCoherent,
}

/// How the pulse window follows the Gaussian center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportRule {
    /// center ± 6τ.
    Symmetric,
    /// [0, 2 t₀].
    FromZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub target: Target,
    pub momentum_samples: Vec<f64>,
    pub epsilon_samples: Vec<f64>,
    /// Bounds (lo, hi) on Ω_R, τ and t₀; lo == hi fixes the variable.
    pub peak: (f64, f64),
    pub width: (f64, f64),
    pub center: (f64, f64),
    /// Number K of equally spaced detuning knots across the support (0 means Δ ≡ 0).
    pub knots: usize,
    /// Knot values are confined to [lo, hi]; the detuning bound is max(|lo|, |hi|).
    pub knot_range: (f64, f64),
    pub support: SupportRule,
    /// Maximum number of cost evaluations.
    pub budget: usize,
    pub starts: usize,
    /// Optional starting point in full parameter order (Ω_R, τ, t₀, knots…), clamped into the bounds.
    pub initial: Option<Vec<f64>>,
    pub solver: MultiLevel,
}

impl OptimizationProblem {
    pub fn dimension(&self) -> usize {
        3 + self.knots
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![self.peak, self.width, self.center];
        b.extend(std::iter::repeat_n(self.knot_range, self.knots));
        b
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 100 {
            return Err(Error::invalid("optimize.budget", "budget must be at least 100 evaluations"));
        }
        if self.starts == 0 {
            return Err(Error::invalid("optimize.starts", "at least one start is required"));
        }
        if self.momentum_samples.is_empty() || self.momentum_samples.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("optimize.momenta", "momentum samples must be finite and non-empty"));
        }
        if self.epsilon_samples.is_empty() || self.epsilon_samples.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::invalid(
                "optimize.epsilons",
                "epsilon samples must lie in [0, 1] and be non-empty",
            ));
        }
        let (lo, hi) = self.knot_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && self.detuning_bound() > 0.0) {
            return Err(Error::invalid("optimize.knot_range", "knot range must be finite with lo <= hi"));
        }
        for (name, (lo, hi)) in [("peak", self.peak), ("width", self.width), ("center", self.center)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(
                    format!("optimize.{name}"),
                    "bounds must be finite with lo <= hi",
                ));
            }
        }
        if self.peak.0 < 0.0 || self.width.0 <= 0.0 {
            return Err(Error::invalid("optimize.width", "peak must be >= 0 and width > 0"));
        }
        if self.support == SupportRule::FromZero && self.center.0 <= 0.0 {
            return Err(Error::invalid("optimize.center", "a window starting at 0 needs t0 > 0"));
        }
        if let Some(x) = &self.initial {
            if x.len() != self.dimension() {
                return Err(Error::invalid("optimize.initial", "initial point has the wrong length"));
            }
        }
        Ok(())
    }

    pub fn detuning_bound(&self) -> f64 {
        self.knot_range.0.abs().max(self.knot_range.1.abs())
    }

    fn window(&self, width: f64, center: f64) -> (f64, f64) {
        match self.support {
            SupportRule::Symmetric => {
                let h = crate::units::GAUSSIAN_SUPPORT_WIDTHS * width;
                (center - h, center + h)
            }
            SupportRule::FromZero => (0.0, 2.0 * center),
        }
    }

    /// Knot positions for the given envelope parameters.
    pub fn knot_times(&self, width: f64, center: f64) -> Vec<f64> {
        let (a, b) = self.window(width, center);
        match self.knots {
            0 => vec![],
            1 => vec![0.5 * (a + b)],
            k => (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect(),
        }
    }

    /// Pulse described by a full parameter vector.
    pub fn pulse(&self, x: &[f64]) -> Result<Pulse> {
        let (peak, width, center) = (x[0], x[1], x[2]);
        let (a, b) = self.window(width, center);
        let envelope = Envelope::gaussian(peak, width, center).with_support(a, b);
        let values = &x[3..];
        let detuning = match values.len() {
            0 => Detuning::constant(0.0),
            1 => Detuning::constant(values[0]),
            _ => Detuning::knots(self.knot_times(width, center), values.to_vec())?,
        };
        Ok(Pulse::new(envelope, detuning.with_bound(self.detuning_bound())))
    }

    pub fn cost(&self, x: &[f64]) -> Result<f64> {
        let pulse = self.pulse(x)?;
        match self.target {
            Target::BsBalanced => {
                bs_cost(&self.solver, &pulse, &self.momentum_samples, &self.epsilon_samples)
            }
            Target::MirrorBidirectional => mirror_cost(&self.solver, &pulse, &self.momentum_samples),
            Target::MirrorCoherent => coherent_mirror_cost(&self.solver, &pulse, &self.momentum_samples),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRecord {
    pub evaluation: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best: Pulse,
    pub parameters: Vec<f64>,
    pub cost: f64,
    /// Best-so-far cost each time it improved.
    pub cost_history: Vec<CostRecord>,
    pub evaluations: usize,
    pub seed: u64,
    /// Set when the budget ran out before the final descent converged.
    pub exhausted: bool,
}

impl OptimizationResult {
    /// Detuning knots of the best candidate.
    pub fn knot_table(&self, problem: &OptimizationProblem, strategy: &str) -> KnotTable {
        let times = problem.knot_times(self.parameters[1], self.parameters[2]);
        KnotTable {
            strategy: strategy.to_string(),
            seed: self.seed,
            knots: times.into_iter().zip(self.parameters[3..].iter().copied()).collect(),
        }
    }

    pub fn check_budget(&self) -> Result<()> {
        if self.exhausted {
            return Err(Error::BudgetExhausted { evaluations: self.evaluations });
        }
        Ok(())
    }
}

const FTOL: f64 = 1e-9;
const XTOL: f64 = 1e-6;
/// Standard deviation of restart perturbations in unit-cube coordinates.
const HOP_SCALE: f64 = 0.05;

/// Tracks the evaluation budget and best point in unit-cube coordinates.
struct Search<'a> {
    problem: &'a OptimizationProblem,
    bounds: Vec<(f64, f64)>,
    free: Vec<usize>,
    evaluations: usize,
    best_u: Vec<f64>,
    best_cost: f64,
    history: Vec<CostRecord>,
}

impl Search<'_> {
    fn full(&self, u: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = self.bounds.iter().map(|b| b.0).collect();
        for (k, &i) in self.free.iter().enumerate() {
            let (lo, hi) = self.bounds[i];
            x[i] = lo + (hi - lo) * u[k].clamp(0.0, 1.0);
        }
        x
    }

    fn remaining(&self) -> usize {
        self.problem.budget - self.evaluations
    }

    fn eval(&mut self, u: &[f64]) -> Result<f64> {
        let c = self.problem.cost(&self.full(u))?;
        self.evaluations += 1;
        if c < self.best_cost {
            self.best_cost = c;
            self.best_u = u.to_vec();
            self.history.push(CostRecord { evaluation: self.evaluations, cost: c });
        }
        Ok(c)
    }

    /// Bounded Nelder–Mead from `start`; returns true when the simplex collapsed.
    fn nelder_mead(&mut self, start: &[f64], step: f64, budget: usize) -> Result<bool> {
        let d = start.len();
        let limit = self.evaluations + budget.min(self.remaining());
        if self.evaluations + d + 1 > limit {
            return Ok(false);
        }
        let clamp = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect() };
        let mut simplex = vec![start.to_vec()];
        for k in 0..d {
            let mut v = start.to_vec();
            v[k] += if v[k] + step <= 1.0 { step } else { -step };
            simplex.push(clamp(v));
        }
        let mut f = Vec::with_capacity(d + 1);
        for v in &simplex {
            f.push(self.eval(v)?);
        }
        loop {
            let mut order: Vec<usize> = (0..=d).collect();
            order.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            f = order.iter().map(|&i| f[i]).collect();

            let spread = f[d] - f[0];
            let size = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= FTOL * (1.0 + f[0].abs()) && size <= XTOL {
                return Ok(true);
            }
            if self.evaluations + 2 > limit {
                return Ok(false);
            }

            let centroid: Vec<f64> =
                (0..d).map(|k| simplex[..d].iter().map(|v| v[k]).sum::<f64>() / d as f64).collect();
            let along = |coef: f64, simplex: &[Vec<f64>]| {
                clamp((0..d).map(|k| centroid[k] + coef * (simplex[d][k] - centroid[k])).collect())
            };
            let xr = along(-1.0, &simplex);
            let fr = self.eval(&xr)?;
            if fr < f[0] {
                let xe = along(-2.0, &simplex);
                let fe = self.eval(&xe)?;
                if fe < fr {
                    simplex[d] = xe;
                    f[d] = fe;
                } else {
                    simplex[d] = xr;
                    f[d] = fr;
                }
                continue;
            }
            if fr < f[d - 1] {
                simplex[d] = xr;
                f[d] = fr;
                continue;
            }
            let (xc, fc) = if fr < f[d] {
                let xc = along(-0.5, &simplex);
                let fc = self.eval(&xc)?;
                (xc, fc)
            } else {
                let xc = along(0.5, &simplex);
                let fc = self.eval(&xc)?;
                (xc, fc)
            };
            if fc < f[d].min(fr) {
                simplex[d] = xc;
                f[d] = fc;
                continue;
            }
            if self.evaluations + d > limit {
                return Ok(false);
            }
            for i in 1..=d {
                let v: Vec<f64> =
                    (0..d).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
                simplex[i] = v;
                f[i] = self.eval(&simplex[i])?;
            }
        }
    }
}

/// Minimizes the problem's cost within its bounds: Nelder-Mead descents from the initial
/// point and random starts, then perturbed restarts around the best point until `starts`
/// consecutive hops fail to improve it. A result whose search was cut short by the budget
/// carries `exhausted = true`.
pub fn optimize(problem: &OptimizationProblem, seed: u64) -> Result<OptimizationResult> {
    problem.validate()?;
    let bounds = problem.bounds();
    let free: Vec<usize> = (0..bounds.len()).filter(|&i| bounds[i].1 > bounds[i].0).collect();
    let to_unit = |x: &[f64]| -> Vec<f64> {
        free.iter().map(|&i| (x[i] - bounds[i].0) / (bounds[i].1 - bounds[i].0)).collect()
    };
    let start = match &problem.initial {
        Some(x) => to_unit(x).into_iter().map(|u| u.clamp(0.0, 1.0)).collect(),
        None => vec![0.5; free.len()],
    };
    let mut search = Search {
        problem,
        bounds: bounds.clone(),
        free: free.clone(),
        evaluations: 0,
        best_u: start.clone(),
        best_cost: f64::INFINITY,
        history: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut candidates = vec![(search.eval(&start)?, start)];
    let d = free.len();
    let mut converged = d == 0;
    if d > 0 {
        let global = (problem.budget / 10).max(problem.starts);
        for _ in 1..global {
            let u: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            candidates.push((search.eval(&u)?, u));
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        candidates.truncate(problem.starts);

        let local = search.remaining() / 2;
        let share = local / problem.starts;
        for (_, u) in &candidates {
            search.nelder_mead(u, 0.15, share)?;
        }
        let mut step = 0.05;
        while search.remaining() > d + 1 {
            let from = search.best_u.clone();
            let before = search.best_cost;
            let remaining = search.remaining();
            if search.nelder_mead(&from, step, remaining)? && search.best_cost >= before {
                converged = true;
                break;
            }
            step = (step * 0.5).max(1e-3);
        }
        // Perturbed restarts from the best point until `starts` hops in a row fail to improve.
        let kick = Normal::new(0.0, HOP_SCALE).expect("finite scale");
        let mut stale = 0;
        while converged && stale < problem.starts && search.remaining() > d + 1 {
            let before = search.best_cost;
            let from: Vec<f64> =
                search.best_u.iter().map(|u| (u + kick.sample(&mut rng)).clamp(0.0, 1.0)).collect();
            let remaining = search.remaining();
            converged = search.nelder_mead(&from, HOP_SCALE, remaining)?;
            stale = if search.best_cost < before - FTOL * (1.0 + before.abs()) { 0 } else { stale + 1 };
        }
    }

    let parameters = search.full(&search.best_u);
    Ok(OptimizationResult {
        best: problem.pulse(&parameters)?,
        parameters,
        cost: search.best_cost,
        cost_history: search.history,
        evaluations: search.evaluations,
        seed,
        exhausted: !converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(budget: usize) -> OptimizationProblem {
        OptimizationProblem {
            target: Target::BsBalanced,
            momentum_samples: vec![0.0],
            epsilon_samples: vec![0.0],
            peak: (1.0, 3.0),
            width: (0.47, 0.47),
            center: (0.0, 0.0),
            knots: 1,
            knot_range: (-2.0, 2.0),
            support: SupportRule::Symmetric,
            budget,
            starts: 2,
            initial: None,
            solver: MultiLevel::default(),
        }
    }

    #[test]
    fn rejects_small_budget() {
        assert!(matches!(optimize(&problem(10), 1), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn deterministic_and_monotone() {
        let a = optimize(&problem(120), 3).unwrap();
        let b = optimize(&problem(120), 3).unwrap();
        assert_eq!(a.cost_history, b.cost_history);
        assert!(a.cost_history.windows(2).all(|w| w[1].cost <= w[0].cost));
        assert!(a.evaluations <= 120);
        let bounds = problem(120).bounds();
        assert!(a.parameters.iter().zip(&bounds).all(|(x, b)| *x >= b.0 && *x <= b.1));
    }
}
