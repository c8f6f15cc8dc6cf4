//! Command-line front end: reads a scenario config, runs one library operation and writes a
//! result table.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{self, GridSpec, Transforms};
use crate::interferometer::{
    self, default_t_grid, extract_contrast, Detection, MzConfig, PulseModel, SweepAxis,
};
use crate::io::{format_number, Config, Format, Provenance, ResultTable};
use crate::multilevel::{EfficiencyKind, MultiLevel};
use crate::ode::Tolerance;
use crate::optimize::{self, OptimizationProblem, SupportRule, Target};
use crate::strategies::{builtin_strategy, KnotTable, StrategyName, StrategySpec};
use crate::tls;
use crate::units::{Detuning, Envelope, GaussianWavePacket, Pulse, Shape};

pub const WORKERS_ENV: &str = "DBD_SIM_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dbd-sim", version, about = "Double Bragg diffraction pulse and interferometer simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file with `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, global = true, default_value = "csv")]
    pub format: String,
    /// Overrides the `seed` config key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; DBD_SIM_WORKERS takes precedence.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Pulse efficiency over a (tau, omega) or (p, epsilon) grid.
    EfficiencyScan,
    /// Mach-Zehnder port populations over interrogation times.
    Tscan,
    /// Contrast against sigma_p, p0 or epsilon for several strategies.
    ContrastSweep,
    /// Contrast statistics under shot-to-shot Rabi-frequency noise.
    Fluctuation,
    /// Pulse optimization; writes the cost history and a knot table.
    Optimize,
    /// Multilevel or S-matrix results against the grid solver.
    OracleCompare,
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter { .. }
        | Error::BoundViolation { .. }
        | Error::PoleProximity { .. }
        | Error::Resolution(_)
        | Error::OutOfZone(_) => EXIT_CONFIG,
        Error::IntegratorFailure { .. }
        | Error::SpectralOverflow(_)
        | Error::EmptyState
        | Error::NoExtremaFound(_) => EXIT_NUMERICAL,
        Error::BudgetExhausted { .. } => EXIT_BUDGET,
    }
}

/// Table plus side files produced by one command.
struct Output {
    table: ResultTable,
    side_files: Vec<(PathBuf, String)>,
    status: i32,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let format: Format = cli.format.parse()?;
    let config = match &cli.config {
        Some(path) => Config::parse(&read(path)?)?,
        None => Config::default(),
    };
    init_workers(resolve_workers(cli.workers, std::env::var(WORKERS_ENV).ok().as_deref())?);
    let seed = match cli.seed {
        Some(s) => s,
        None => config.value_or("seed", 0u64)?,
    };
    let mut provenance = Provenance::new(&config.hash(), seed);
    provenance.push("command", command_name(cli.command));
    let out = match cli.command {
        Command::EfficiencyScan => efficiency_scan(&config, provenance)?,
        Command::Tscan => tscan(&config, provenance)?,
        Command::ContrastSweep => contrast_sweep(&config, provenance)?,
        Command::Fluctuation => fluctuation(&config, provenance, seed)?,
        Command::Optimize => run_optimize(&config, provenance, seed, cli.out.as_deref())?,
        Command::OracleCompare => oracle_compare(&config, provenance)?,
    };
    let mut table = out.table;
    table.provenance.stamp();
    let text = table.render(format);
    match &cli.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    for (path, body) in &out.side_files {
        write(path, body)?;
    }
    if out.status == EXIT_BUDGET {
        eprintln!("warning: optimization budget exhausted; best-so-far result written");
    }
    Ok(out.status)
}

pub fn command_name(c: Command) -> &'static str {
    match c {
        Command::EfficiencyScan => "efficiency-scan",
        Command::Tscan => "tscan",
        Command::ContrastSweep => "contrast-sweep",
        Command::Fluctuation => "fluctuation",
        Command::Optimize => "optimize",
        Command::OracleCompare => "oracle-compare",
    }
}

/// The environment value wins over the flag; zero means one thread per core.
pub fn resolve_workers(flag: Option<usize>, env: Option<&str>) -> Result<usize> {
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(WORKERS_ENV, format!("expected a thread count, got '{v}'"))),
        None => Ok(flag.unwrap_or(0)),
    }
}

fn init_workers(n: usize) {
    // The global pool can be built once per process; later calls keep the first size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::invalid("config", format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::invalid("out", format!("cannot write {}: {e}", path.display())))
}

const COMMON_KEYS: &[&str] = &["seed", "model.n_max", "model.rtol", "model.atol"];
const PULSE_FIELDS: &[&str] = &[
    "shape",
    "peak",
    "width",
    "center",
    "support",
    "detuning",
    "delta",
    "slope",
    "offset",
    "knots_file",
    "bound",
];
const SOURCE_KEYS: &[&str] = &["source.p0", "source.sigma_p"];
const MZ_KEYS: &[&str] = &["strategy", "mz.g", "mz.epsilon", "mz.detection"];

fn allowed(groups: &[&[&str]], pulse_prefixes: &[&str]) -> Vec<String> {
    let mut keys: Vec<String> = groups.iter().flat_map(|g| g.iter().map(|k| k.to_string())).collect();
    for prefix in pulse_prefixes {
        keys.extend(PULSE_FIELDS.iter().map(|f| format!("{prefix}.{f}")));
    }
    keys
}

fn check_keys(c: &Config, keys: &[String]) -> Result<()> {
    let refs: Vec<&str> = keys.iter().map(String::as_str).collect();
    c.check_known(&refs)
}

fn solver(c: &Config) -> Result<MultiLevel> {
    let d = Tolerance::default();
    let ml = MultiLevel {
        n_max: c.value_or("model.n_max", 2usize)?,
        tol: Tolerance {
            rtol: c.value_or("model.rtol", d.rtol)?,
            atol: c.value_or("model.atol", d.atol)?,
            ..d
        },
    };
    ml.basis(0.0)?;
    Ok(ml)
}

fn source(c: &Config) -> Result<GaussianWavePacket> {
    GaussianWavePacket::new(c.value_or("source.p0", 0.0)?, c.value_or("source.sigma_p", 0.05)?)
}

/// Explicit pulse under `prefix.` keys.
fn pulse_from(c: &Config, prefix: &str) -> Result<Pulse> {
    let key = |f: &str| format!("{prefix}.{f}");
    let peak: f64 = c.require(&key("peak"))?;
    let width: f64 = c.require(&key("width"))?;
    let center: f64 = c.value_or(&key("center"), 0.0)?;
    let mut envelope = match c.str_or(&key("shape"), "gaussian") {
        "gaussian" => Envelope::gaussian(peak, width, center),
        "box" => Envelope::boxcar(peak, width, center),
        other => {
            return Err(Error::invalid(key("shape"), format!("unknown shape '{other}' (gaussian, box)")))
        }
    };
    if let Some((a, b)) = c.range(&key("support"))? {
        envelope = envelope.with_support(a, b);
    }
    let mut detuning =
        match c.str_or(&key("detuning"), "constant") {
            "constant" => Detuning::constant(c.value_or(&key("delta"), 0.0)?),
            "linear" => {
                Detuning::linear(c.require(&key("slope"))?, c.value_or(&key("offset"), 0.0)?, center, width)
            }
            "linear_sweep" => Detuning::linear_sweep(center, width),
            "doppler_sweep_2024" => Detuning::doppler_sweep_2024(center, width),
            "knots" => {
                let path: String = c.require(&key("knots_file"))?;
                KnotTable::parse(&read(Path::new(&path))?)?.detuning()?
            }
            other => return Err(Error::invalid(
                key("detuning"),
                format!(
                    "unknown detuning '{other}' (constant, linear, linear_sweep, doppler_sweep_2024, knots)"
                ),
            )),
        };
    if let Some(bound) = c.parse_value(&key("bound"))? {
        detuning = detuning.with_bound(bound);
    }
    let pulse = Pulse::new(envelope, detuning);
    pulse.validate()?;
    Ok(pulse)
}

/// `strategy = ideal | c_dbd | cd_dbd | ds_dbd | oct_hybrid | custom` (custom reads bs.* and mirror.*).
fn pulse_model(c: &Config) -> Result<PulseModel> {
    match c.str_or("strategy", "ds_dbd") {
        "ideal" => Ok(PulseModel::Ideal),
        name => Ok(PulseModel::Strategy(strategy_spec(c, name.parse()?)?)),
    }
}

fn strategy_spec(c: &Config, name: StrategyName) -> Result<StrategySpec> {
    match name {
        StrategyName::Custom => {
            let spec = StrategySpec { name, bs: pulse_from(c, "bs")?, mirror: pulse_from(c, "mirror")? };
            spec.validate()?;
            Ok(spec)
        }
        _ => builtin_strategy(name),
    }
}

fn mz_config(c: &Config) -> Result<MzConfig> {
    let pulses = pulse_model(c)?;
    let detection = match c.str_or("mz.detection", "unresolved") {
        "unresolved" => Detection::Unresolved,
        "resolved" => Detection::Resolved,
        other => {
            return Err(Error::invalid(
                "mz.detection",
                format!("unknown mode '{other}' (unresolved, resolved)"),
            ))
        }
    };
    let config = MzConfig {
        pulses,
        g: c.require("mz.g")?,
        t: 0.0,
        source: source(c)?,
        epsilon: c.value_or("mz.epsilon", 0.0)?,
        detection,
        solver: solver(c)?,
    };
    config.validate()?;
    Ok(config)
}

fn t_grid(c: &Config, key: &str, g: f64) -> Result<Vec<f64>> {
    match c.list(key)? {
        Some(t) => {
            if t.iter().any(|&x| x < 0.0) || t.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid(key, "interrogation times must be ascending and >= 0"));
            }
            Ok(t)
        }
        None => default_t_grid(g),
    }
}

fn efficiency_kind(c: &Config) -> Result<EfficiencyKind> {
    match c.str_or("scan.kind", "bs") {
        "bs" => Ok(EfficiencyKind::BeamSplitter),
        "mirror_plus" => Ok(EfficiencyKind::MirrorPlus),
        "mirror_minus" => Ok(EfficiencyKind::MirrorMinus),
        other => Err(Error::invalid(
            "scan.kind",
            format!("unknown kind '{other}' (bs, mirror_plus, mirror_minus)"),
        )),
    }
}

/// The scanned pulse: `pulse.*` keys, or the `scan.role` pulse of `strategy`.
fn scan_pulse(c: &Config, kind: EfficiencyKind) -> Result<Pulse> {
    if c.contains("pulse.peak") || !c.contains("strategy") {
        return pulse_from(c, "pulse");
    }
    let spec = strategy_spec(c, c.str_or("strategy", "ds_dbd").parse()?)?;
    let default_role = if kind == EfficiencyKind::BeamSplitter { "bs" } else { "mirror" };
    match c.str_or("scan.role", default_role) {
        "bs" => Ok(spec.bs),
        "mirror" => Ok(spec.mirror),
        other => Err(Error::invalid("scan.role", format!("unknown role '{other}' (bs, mirror)"))),
    }
}

fn with_envelope(pulse: &Pulse, peak: f64, width: f64) -> Result<Pulse> {
    let e = &pulse.envelope;
    let envelope = match e.shape {
        Shape::Gaussian => Envelope::gaussian(peak, width, e.center),
        Shape::Box => Envelope::boxcar(peak, width, e.support.0),
    };
    let p = Pulse::new(envelope, pulse.detuning.clone());
    p.validate()?;
    Ok(p)
}

/// Efficiency of one cell. The grid model launches the source packet shifted to the input
/// order and reads the target port around the cell's quasi-momentum.
fn cell_efficiency(
    model: &str,
    ml: &MultiLevel,
    kind: EfficiencyKind,
    pulse: &Pulse,
    p: f64,
    eps: f64,
    sigma_p: f64,
) -> Result<f64> {
    match model {
        "tls" => tls::tls_transfer(pulse, eps),
        "multilevel" => Ok(ml.efficiency(kind, p, eps, pulse)?.value),
        "grid" => {
            let (k_in, out): (i64, &[i64]) = match kind {
                EfficiencyKind::BeamSplitter => (0, &[1, -1]),
                EfficiencyKind::MirrorPlus => (1, &[-1]),
                EfficiencyKind::MirrorMinus => (-1, &[1]),
            };
            let wp = GaussianWavePacket::new(p + 2.0 * k_in as f64, sigma_p)?;
            let spec = GridSpec::for_wavepacket(&wp, GridSpec::default().dt)?;
            let fft = Transforms::new(spec.n_points);
            let state = grid::prepare_wavepacket(spec, &wp, &fft)?;
            let state = grid::split_step_pulse(&state, pulse, eps, &fft);
            let h = grid::momentum_histogram(&state, p, 2, &fft);
            Ok(out.iter().map(|&k| h.port(k)).sum())
        }
        other => {
            Err(Error::invalid("scan.model", format!("unknown model '{other}' (tls, multilevel, grid)")))
        }
    }
}

fn efficiency_scan(c: &Config, provenance: Provenance) -> Result<Output> {
    let keys = allowed(
        &[
            COMMON_KEYS,
            &[
                "strategy",
                "scan.model",
                "scan.kind",
                "scan.role",
                "scan.tau",
                "scan.omega",
                "scan.p",
                "scan.epsilon",
            ],
            &["source.sigma_p"],
        ],
        &["pulse"],
    );
    check_keys(c, &keys)?;
    let model = c.str_or("scan.model", "multilevel");
    let kind = efficiency_kind(c)?;
    let ml = solver(c)?;
    let sigma_p: f64 = c.value_or("source.sigma_p", 0.05)?;
    let base = scan_pulse(c, kind)?;
    let taus = c.list("scan.tau")?;
    let omegas = c.list("scan.omega")?;
    let mut provenance = provenance;
    provenance.push("model", model);
    let (columns, cells): ([&str; 3], Vec<(f64, f64, Pulse, f64, f64)>) = match (taus, omegas) {
        (Some(taus), Some(omegas)) => {
            let p: f64 = c.list("scan.p")?.map_or(0.0, |v| v[0]);
            let eps: f64 = c.list("scan.epsilon")?.map_or(0.0, |v| v[0]);
            let mut cells = Vec::new();
            for &tau in &taus {
                for &omega in &omegas {
                    cells.push((tau, omega, with_envelope(&base, omega, tau)?, p, eps));
                }
            }
            (["tau", "omega", "efficiency"], cells)
        }
        (None, None) => {
            let ps = c.list("scan.p")?.unwrap_or_else(|| vec![0.0]);
            let es = c.list("scan.epsilon")?.unwrap_or_else(|| vec![0.0]);
            for &e in &es {
                crate::units::PolarizationError::new(e)?;
            }
            let cells = ps
                .iter()
                .flat_map(|&p| es.iter().map(move |&e| (p, e)))
                .map(|(p, e)| (p, e, base.clone(), p, e))
                .collect();
            (["p", "epsilon", "efficiency"], cells)
        }
        _ => return Err(Error::invalid("scan.tau", "scan.tau and scan.omega must be given together")),
    };
    let values: Result<Vec<f64>> = cells
        .par_iter()
        .map(|(_, _, pulse, p, e)| cell_efficiency(model, &ml, kind, pulse, *p, *e, sigma_p))
        .collect();
    let mut table = ResultTable::new(&columns, provenance);
    for ((a, b, ..), v) in cells.iter().zip(values?) {
        table.push(vec![*a, *b, v])?;
    }
    Ok(Output { table, side_files: Vec::new(), status: EXIT_OK })
}

fn tscan(c: &Config, mut provenance: Provenance) -> Result<Output> {
    let keys = allowed(&[COMMON_KEYS, SOURCE_KEYS, MZ_KEYS, &["tscan.t"]], &["bs", "mirror"]);
    check_keys(c, &keys)?;
    let config = mz_config(c)?;
    let grid = t_grid(c, "tscan.t", config.g)?;
    let scan = interferometer::t_scan(&config, &grid)?;
    provenance.push("strategy", config.pulses.label());
    match extract_contrast(&scan) {
        Ok(r) => {
            provenance.push("contrast", format_number(r.contrast));
            provenance.push("t_max", format_number(r.t_max));
            provenance.push("t_min", format_number(r.t_min));
            provenance.push("contrast_method", r.method);
        }
        Err(Error::NoExtremaFound(reason)) => provenance.push("contrast", format!("NaN ({reason})")),
        Err(e) => return Err(e),
    }
    let resolved = config.detection == Detection::Resolved;
    let mut columns = vec!["T", "P1", "P2", "P3", "P_sum", "P_higher"];
    if resolved {
        columns.extend(["P_0hk", "P_pm2hk"]);
    }
    let mut table = ResultTable::new(&columns, provenance);
    for i in 0..scan.t.len() {
        let mut row = vec![scan.t[i], scan.p1[i], scan.p2[i], scan.p3[i], scan.p_sum[i], scan.higher[i]];
        if resolved {
            row.extend([scan.p1[i], scan.p2[i] + scan.p3[i]]);
        }
        table.push(row)?;
    }
    Ok(Output { table, side_files: Vec::new(), status: EXIT_OK })
}

fn strategy_list(c: &Config) -> Result<Vec<StrategySpec>> {
    let names = c.str_or("sweep.strategies", "c_dbd, cd_dbd, ds_dbd, oct_hybrid");
    names.split(',').map(|n| strategy_spec(c, n.trim().parse()?)).collect()
}

fn contrast_sweep(c: &Config, mut provenance: Provenance) -> Result<Output> {
    let keys = allowed(
        &[COMMON_KEYS, SOURCE_KEYS, MZ_KEYS, &["sweep.axis", "sweep.values", "sweep.strategies"]],
        &["bs", "mirror"],
    );
    check_keys(c, &keys)?;
    let template = mz_config(c)?;
    let axis: SweepAxis = c.require::<String>("sweep.axis")?.parse()?;
    let values =
        c.list("sweep.values")?.ok_or_else(|| Error::invalid("sweep.values", "required key is missing"))?;
    let strategies = strategy_list(c)?;
    let rows = interferometer::contrast_sweep(&template, axis, &values, &strategies)?;
    provenance.push("axis", axis.as_str());
    let mut columns = vec![axis.as_str()];
    columns.extend(strategies.iter().map(|s| s.name.as_str()));
    let mut table = ResultTable::new(&columns, provenance);
    for (i, &v) in values.iter().enumerate() {
        let mut row = vec![v];
        row.extend((0..strategies.len()).map(|s| rows[s * values.len() + i].contrast));
        table.push(row)?;
    }
    Ok(Output { table, side_files: Vec::new(), status: EXIT_OK })
}

fn fluctuation(c: &Config, mut provenance: Provenance, seed: u64) -> Result<Output> {
    let keys = allowed(
        &[COMMON_KEYS, SOURCE_KEYS, MZ_KEYS, &["fluctuation.sigma_r", "fluctuation.n_shots", "tscan.t"]],
        &["bs", "mirror"],
    );
    check_keys(c, &keys)?;
    let config = mz_config(c)?;
    let grid = t_grid(c, "tscan.t", config.g)?;
    let sigmas = c
        .list("fluctuation.sigma_r")?
        .ok_or_else(|| Error::invalid("fluctuation.sigma_r", "required key is missing"))?;
    let n_shots: usize = c.value_or("fluctuation.n_shots", 10)?;
    provenance.push("strategy", config.pulses.label());
    provenance.push("n_shots", n_shots);
    let mut table = ResultTable::new(
        &["sigma_r", "mean_contrast", "std_contrast", "min_contrast", "max_contrast"],
        provenance,
    );
    for &s in &sigmas {
        let r = interferometer::fluctuation_robustness(&config, s, n_shots, seed, &grid)?;
        let min = r.contrasts.iter().copied().fold(f64::INFINITY, f64::min);
        let max = r.contrasts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        table.push(vec![s, r.mean, r.std, min, max])?;
    }
    Ok(Output { table, side_files: Vec::new(), status: EXIT_OK })
}

const OPTIMIZE_KEYS: &[&str] = &[
    "optimize.target",
    "optimize.momenta",
    "optimize.epsilons",
    "optimize.peak",
    "optimize.width",
    "optimize.center",
    "optimize.knots",
    "optimize.knot_range",
    "optimize.support",
    "optimize.budget",
    "optimize.starts",
    "optimize.initial",
    "optimize.strategy_name",
    "optimize.knots_out",
];

fn optimization_problem(c: &Config) -> Result<OptimizationProblem> {
    let target = match c.str_or("optimize.target", "mirror_bidirectional") {
        "bs_balanced" => Target::BsBalanced,
        "mirror_bidirectional" => Target::MirrorBidirectional,
        "mirror_coherent" => Target::MirrorCoherent,
        other => {
            return Err(Error::invalid(
                "optimize.target",
                format!("unknown target '{other}' (bs_balanced, mirror_bidirectional, mirror_coherent)"),
            ))
        }
    };
    let support = match c.str_or("optimize.support", "symmetric") {
        "symmetric" => SupportRule::Symmetric,
        "from_zero" => SupportRule::FromZero,
        other => {
            return Err(Error::invalid(
                "optimize.support",
                format!("unknown rule '{other}' (symmetric, from_zero)"),
            ))
        }
    };
    let need_range = |k: &str| c.range(k)?.ok_or_else(|| Error::invalid(k, "required key is missing"));
    let problem = OptimizationProblem {
        target,
        momentum_samples: c.list("optimize.momenta")?.unwrap_or_else(|| vec![0.0]),
        epsilon_samples: c.list("optimize.epsilons")?.unwrap_or_else(|| vec![0.0]),
        peak: need_range("optimize.peak")?,
        width: need_range("optimize.width")?,
        center: c.range("optimize.center")?.unwrap_or((0.0, 0.0)),
        knots: c.value_or("optimize.knots", 0usize)?,
        knot_range: c.range("optimize.knot_range")?.unwrap_or((-4.0, 4.0)),
        support,
        budget: c.require("optimize.budget")?,
        starts: c.value_or("optimize.starts", 4usize)?,
        initial: c.list("optimize.initial")?,
        solver: solver(c)?,
    };
    problem.validate()?;
    Ok(problem)
}

fn run_optimize(c: &Config, mut provenance: Provenance, seed: u64, out: Option<&Path>) -> Result<Output> {
    let keys = allowed(&[COMMON_KEYS, OPTIMIZE_KEYS], &[]);
    check_keys(c, &keys)?;
    let problem = optimization_problem(c)?;
    let result = optimize::optimize(&problem, seed)?;
    provenance.push("final_cost", format_number(result.cost));
    provenance.push("evaluations", result.evaluations);
    provenance.push("exhausted", result.exhausted);
    let params: Vec<String> = result.parameters.iter().map(|&x| format_number(x)).collect();
    provenance.push("parameters", params.join(" "));
    let mut table = ResultTable::new(&["evaluation", "cost"], provenance);
    for r in &result.cost_history {
        table.push(vec![r.evaluation as f64, r.cost])?;
    }
    let mut side_files = Vec::new();
    if problem.knots > 0 {
        let name = c.str_or("optimize.strategy_name", "custom");
        let path = match (c.str("optimize.knots_out"), out) {
            (Some(p), _) => Some(PathBuf::from(p)),
            (None, Some(o)) => Some(o.with_extension("knots")),
            (None, None) => None,
        };
        if let Some(path) = path {
            side_files.push((path, result.knot_table(&problem, name).to_text()));
        }
    }
    let status = if result.exhausted { EXIT_BUDGET } else { EXIT_OK };
    Ok(Output { table, side_files, status })
}

fn oracle_compare(c: &Config, mut provenance: Provenance) -> Result<Output> {
    let keys = allowed(
        &[
            COMMON_KEYS,
            SOURCE_KEYS,
            MZ_KEYS,
            &[
                "compare.scenario",
                "compare.input",
                "compare.t",
                "compare.epsilon",
                "grid.n_points",
                "grid.length",
                "grid.dt",
            ],
        ],
        &["pulse", "bs", "mirror"],
    );
    check_keys(c, &keys)?;
    let wp = source(c)?;
    let spec = {
        let auto = GridSpec::for_wavepacket(&wp, c.value_or("grid.dt", GridSpec::default().dt)?)?;
        GridSpec::new(
            c.value_or("grid.n_points", auto.n_points)?,
            c.value_or("grid.length", auto.length)?,
            auto.dt,
        )?
    };
    provenance.push("grid_points", spec.n_points);
    let columns = ["index", "order", "multilevel", "grid", "abs_diff"];
    match c.str_or("compare.scenario", "pulse") {
        "pulse" => {
            let pulse = pulse_from(c, "pulse")?;
            let eps: f64 = c.value_or("compare.epsilon", 0.0)?;
            let k_in: i64 = c.value_or("compare.input", 0)?;
            if !(-1..=1).contains(&k_in) {
                return Err(Error::invalid("compare.input", "input order must be -1, 0 or 1"));
            }
            let ml = solver(c)?;
            wp.check_in_zone()?;
            let orders = [0i64, 1, -1, 2, -2];
            let mut multilevel = [0.0; 5];
            for (p, w) in wp.quadrature() {
                let pops = ml.transfer_populations(p, k_in, &pulse, eps)?;
                for (m, &k) in multilevel.iter_mut().zip(&orders) {
                    *m += w * pops[crate::multilevel::LevelBasis::index_of(k)];
                }
            }
            let launched = GaussianWavePacket::new(wp.p0 + 2.0 * k_in as f64, wp.sigma_p)?;
            let fft = Transforms::new(spec.n_points);
            let state = grid::prepare_wavepacket(spec, &launched, &fft)?;
            let state = grid::split_step_pulse(&state, &pulse, eps, &fft);
            let h = grid::momentum_histogram(&state, wp.p0, 2, &fft);
            let mut table = ResultTable::new(&columns, provenance);
            let mut max_diff: f64 = 0.0;
            for (i, (&k, &m)) in orders.iter().zip(&multilevel).enumerate() {
                let g = h.port(k);
                max_diff = max_diff.max((m - g).abs());
                table.push(vec![i as f64, k as f64, m, g, (m - g).abs()])?;
            }
            table.provenance.push("max_abs_diff", format_number(max_diff));
            Ok(Output { table, side_files: Vec::new(), status: EXIT_OK })
        }
        "mz" => {
            let config = mz_config(c)?;
            let times =
                c.list("compare.t")?.ok_or_else(|| Error::invalid("compare.t", "required key is missing"))?;
            provenance.push("strategy", config.pulses.label());
            let mut table = ResultTable::new(&["T", "P_sum_smatrix", "P_sum_grid", "abs_diff"], provenance);
            let mut max_diff: f64 = 0.0;
            let rows: Result<Vec<(f64, f64, f64)>> = times
                .par_iter()
                .map(|&t| {
                    let mut cfg = config.clone();
                    cfg.t = t;
                    let s = interferometer::port_populations(&cfg)?.p_sum();
                    let g = interferometer::oracle_port_populations(&cfg, spec)?.p_sum();
                    Ok((t, s, g))
                })
                .collect();
            for (t, s, g) in rows? {
                max_diff = max_diff.max((s - g).abs());
                table.push(vec![t, s, g, (s - g).abs()])?;
            }
            table.provenance.push("max_abs_diff", format_number(max_diff));
            Ok(Output { table, side_files: Vec::new(), status: EXIT_OK })
        }
        other => Err(Error::invalid("compare.scenario", format!("unknown scenario '{other}' (pulse, mz)"))),
    }
}
