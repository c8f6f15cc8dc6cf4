//! Acceptance criteria. Prints one PASS/FAIL line per criterion and a summary; with `--strict`
//! any failure also makes the exit status non-zero. Runs as a plain binary so the lines are
//! never captured.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dbd_sim::grid::{self, GridSpec, Transforms};
use dbd_sim::interferometer::{
    self, default_t_grid, extract_contrast, fluctuation_robustness, pulse_s_matrix, t_scan, total_s_matrix,
    unitarity_error, Detection, MzConfig, PulseModel, SweepAxis,
};
use dbd_sim::multilevel::{
    build_hamiltonian, Direction, EfficiencyKind, LevelBasis, MultiLevel, MultiLevelState,
};
use dbd_sim::strategies::{builtin_strategy, StrategyName, StrategySpec};
use dbd_sim::tls;
use dbd_sim::units::{Detuning, Envelope, GaussianWavePacket, Pulse};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn strategy(name: StrategyName) -> StrategySpec {
    builtin_strategy(name).expect("built-in strategy")
}

fn mz(name: StrategyName, g: f64, p0: f64, sigma_p: f64, detection: Detection) -> MzConfig {
    let mut c = MzConfig::new(strategy(name), g, GaussianWavePacket::new(p0, sigma_p).unwrap());
    c.detection = detection;
    c
}

fn contrast(config: &MzConfig) -> f64 {
    let grid = default_t_grid(config.g).unwrap();
    extract_contrast(&t_scan(config, &grid).unwrap()).map_or(f64::NAN, |c| c.contrast)
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Integrated efficiencies at σ_p = 0.05 against the published table.
fn table_efficiencies() -> Outcome {
    let start = Instant::now();
    let ml = MultiLevel::default();
    let wp = GaussianWavePacket::new(0.0, 0.05).unwrap();
    let published = [
        (StrategyName::CDbd, 0.9735, 0.9643),
        (StrategyName::CdDbd, 0.9976, 0.9643),
        (StrategyName::DsDbd, 0.9994, 0.9747),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, bs_ref, m_ref) in published {
        let s = strategy(name);
        let bs = ml.integrated_efficiency(&wp, EfficiencyKind::BeamSplitter, &s.bs, 0.0).unwrap();
        let m = ml.integrated_efficiency(&wp, EfficiencyKind::MirrorPlus, &s.mirror, 0.0).unwrap();
        pass &= within(bs, bs_ref, 0.005) && within(m, m_ref, 0.005);
        detail.push(format!("{name} ({:.2}, {:.2})", 100.0 * bs, 100.0 * m));
    }
    let oct = strategy(StrategyName::OctHybrid);
    let eta = ml.integrated_efficiency(&wp, EfficiencyKind::MirrorPlus, &oct.mirror, 0.0).unwrap();
    pass &= eta >= 0.99;
    detail.push(format!("oct_hybrid eta_M {:.2} (>= 99.0)", 100.0 * eta));
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    check(pass, format!("{} in {:.1} s", detail.join(", "), elapsed.as_secs_f64()))
}

/// Constant detuning maximizing the p = 0 beam-splitter transfer, by grid search and a
/// parabolic refinement around the best cell.
fn optimal_detunings() -> Outcome {
    let start = Instant::now();
    let ml = MultiLevel::default();
    let f = |delta: f64, eps: f64| {
        let pulse = Pulse::new(Envelope::gaussian(2.0, 0.47, 0.0), Detuning::constant(delta));
        ml.bs_efficiency(0.0, eps, &pulse).unwrap().value
    };
    let step = 0.01;
    let mut pass = true;
    let mut found = Vec::new();
    for (eps, target) in [(0.0, 0.25), (0.1, 0.55), (0.2, 0.80), (0.3, 1.10)] {
        let grid: Vec<f64> = (0..=200).map(|i| -0.5 + step * i as f64).collect();
        let values: Vec<f64> = grid.iter().map(|&d| f(d, eps)).collect();
        let i = (1..grid.len() - 1).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        let best = grid[i] + 0.5 * step * (a - c) / (a - 2.0 * b + c);
        pass &= within(best, target, 0.05);
        found.push(format!("{best:.3}"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    check(
        pass,
        format!(
            "optimal delta ({}) vs (0.25, 0.55, 0.80, 1.10) in {:.1} s",
            found.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn timed_contrast(config: &MzConfig) -> (f64, Duration) {
    let start = Instant::now();
    let c = contrast(config);
    (c, start.elapsed())
}

/// Unresolved T-scan contrasts.
fn unresolved_contrasts() -> Outcome {
    let five_min = Duration::from_secs(300);
    let (ds, t1) = timed_contrast(&mz(StrategyName::DsDbd, 0.000357, 0.0, 0.05, Detection::Unresolved));
    let (cd, t2) = timed_contrast(&mz(StrategyName::CdDbd, 0.000357, 0.1, 0.01, Detection::Unresolved));
    let pass = within(ds, 0.97, 0.01) && within(cd, 0.83, 0.02) && t1 < five_min && t2 < five_min;
    check(
        pass,
        format!(
            "ds_dbd C = {ds:.4} ({:.1} s), cd_dbd p0 = 0.1 C = {cd:.4} ({:.1} s)",
            t1.as_secs_f64(),
            t2.as_secs_f64()
        ),
    )
}

fn free_phase(g: f64, q: f64, t: f64) -> C64 {
    C64::from_polar(1.0, -(t * q * q + 0.5 * g * t * t * q))
}

/// Three-path closed form for the first column of the resolved interferometer matrix.
fn three_path_column(spec: &StrategySpec, g: f64, p: f64, t: f64) -> [C64; 3] {
    let ml = MultiLevel::default();
    let (p1, p2, p3) = (p, p + 0.5 * g * t, p + g * t);
    let b1 = pulse_s_matrix(&ml, p1, &spec.bs, 0.0).unwrap().matrix;
    let m = pulse_s_matrix(&ml, p2, &spec.mirror, 0.0).unwrap().matrix;
    let b3 = pulse_s_matrix(&ml, p3, &spec.bs, 0.0).unwrap().matrix;
    // Indices 0, 1, 2 hold |q>, |q+2>, |q-2>.
    let th = |q: f64| free_phase(g, q, t);
    let path1 = m[0][0] * b1[0][0] * th(p) * th(p2);
    let path2 = m[1][2] * b1[2][0] * th(p - 2.0) * th(p2 + 2.0);
    let path3 = m[2][1] * b1[1][0] * th(p + 2.0) * th(p2 - 2.0);
    [0, 1, 2].map(|i| b3[i][0] * path1 + b3[i][1] * path2 + b3[i][2] * path3)
}

/// Resolved-detection contrasts and the three-path identity.
fn resolved_detection() -> Outcome {
    let ds = contrast(&mz(StrategyName::DsDbd, 0.000714, 0.0, 0.05, Detection::Resolved));
    let oct = contrast(&mz(StrategyName::OctHybrid, 0.000714, 0.0, 0.05, Detection::Resolved));
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let spec = strategy(StrategyName::DsDbd);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let g = rng.gen_range(1e-4..1e-3);
        let p = rng.gen_range(-0.3..0.3);
        let t = rng.gen_range(1.0..60.0);
        let mut config = mz(StrategyName::DsDbd, g, 0.0, 0.05, Detection::Resolved);
        config.t = t;
        let s = total_s_matrix(&config, p).unwrap();
        let oracle = three_path_column(&spec, g, p, t);
        for i in 0..3 {
            worst = worst.max((s[i][0] - oracle[i]).norm());
        }
    }
    let pass = within(ds, 0.97, 0.01) && within(oct, 0.99, 0.01) && worst <= 1e-10;
    check(pass, format!("ds_dbd C = {ds:.4}, oct_hybrid C = {oct:.4}, three-path max deviation {worst:.1e}"))
}

/// Contrast against momentum width for all strategies.
fn momentum_width_robustness() -> Outcome {
    let sigmas = [0.03, 0.05, 0.075, 0.097, 0.132];
    let names = [StrategyName::CDbd, StrategyName::CdDbd, StrategyName::DsDbd, StrategyName::OctHybrid];
    let specs: Vec<StrategySpec> = names.iter().map(|&n| strategy(n)).collect();
    let template = mz(StrategyName::DsDbd, 0.000357, 0.0, 0.05, Detection::Unresolved);
    let rows = interferometer::contrast_sweep(&template, SweepAxis::SigmaP, &sigmas, &specs).unwrap();
    let at = |s: usize, i: usize| rows[s * sigmas.len() + i].contrast;
    let mut ranked = true;
    let mut table = Vec::new();
    for (i, sigma) in sigmas.iter().enumerate() {
        let (c, cd, ds, oct) = (at(0, i), at(1, i), at(2, i), at(3, i));
        ranked &= oct > ds && ds > c && ds > cd;
        table.push(format!("{sigma}: {c:.3}/{cd:.3}/{ds:.3}/{oct:.3}"));
    }
    let ds_097 = at(2, 3);
    let oct_132 = at(3, 4);
    let pass = ds_097 >= 0.90 && oct_132 >= 0.95 && ranked;
    check(
        pass,
        format!(
            "ds_dbd(0.097) = {ds_097:.4}, oct_hybrid(0.132) = {oct_132:.4}, ranking {} [C/CD/DS/OCT {}]",
            if ranked { "holds" } else { "broken" },
            table.join("; ")
        ),
    )
}

/// Seeded lattice-depth noise.
fn fluctuations() -> Outcome {
    let grid = default_t_grid(0.000357).unwrap();
    let ds = mz(StrategyName::DsDbd, 0.000357, 0.0, 0.05, Detection::Unresolved);
    let oct = mz(StrategyName::OctHybrid, 0.000357, 0.0, 0.05, Detection::Unresolved);
    let r_ds = fluctuation_robustness(&ds, 0.03, 10, 7, &grid).unwrap();
    let r_oct = fluctuation_robustness(&oct, 0.045, 10, 7, &grid).unwrap();
    let pass = r_ds.mean >= 0.95 && r_oct.mean >= 0.95;
    check(
        pass,
        format!(
            "ds_dbd sigma_R = 3%: {:.4} +- {:.4}, oct_hybrid sigma_R = 4.5%: {:.4} +- {:.4} (seed 7)",
            r_ds.mean, r_ds.std, r_oct.mean, r_oct.std
        ),
    )
}

/// Ports of a single pulse from the multilevel model and the grid, input |p0⟩.
fn single_pulse_ports(pulse: &Pulse, wp: &GaussianWavePacket, eps: f64) -> f64 {
    let ml = MultiLevel::default();
    let mut model = [0.0; 5];
    for (p, w) in wp.quadrature() {
        let pops = ml.transfer_populations(p, 0, pulse, eps).unwrap();
        for (m, v) in model.iter_mut().zip(pops) {
            *m += w * v;
        }
    }
    let spec = GridSpec::for_wavepacket(wp, 0.002).unwrap();
    let fft = Transforms::new(spec.n_points);
    let state = grid::prepare_wavepacket(spec, wp, &fft).unwrap();
    let state = grid::split_step_pulse(&state, pulse, eps, &fft);
    let h = grid::momentum_histogram(&state, wp.p0, 2, &fft);
    (0..5).map(|i| (model[i] - h.port(LevelBasis::order_of(i))).abs()).fold(0.0, f64::max)
}

/// Grid oracle against the multilevel and S-matrix pipelines.
fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_pulse: f64 = 0.0;
    for _ in 0..25 {
        let peak = rng.gen_range(0.5..2.5);
        let width = rng.gen_range(0.3..0.9);
        let delta = rng.gen_range(-0.5..0.5);
        let p0 = rng.gen_range(-0.3..0.3);
        let sigma = [0.01, 0.05, 0.1][rng.gen_range(0..3)];
        let eps = rng.gen_range(0.0..0.2);
        let pulse = Pulse::new(Envelope::gaussian(peak, width, 0.0), Detuning::constant(delta));
        let wp = GaussianWavePacket::new(p0, sigma).unwrap();
        worst_pulse = worst_pulse.max(single_pulse_ports(&pulse, &wp, eps));
    }
    let mut config = mz(StrategyName::DsDbd, 0.000357, 0.0, 0.05, Detection::Resolved);
    let grid_t = default_t_grid(config.g).unwrap();
    let spec = GridSpec::new(8192, 2.0 * PI * 256.0, 0.002).unwrap();
    let mut worst_mz: f64 = 0.0;
    for &t in grid_t.iter().skip(4).step_by(5) {
        config.t = t;
        let s = interferometer::port_populations(&config).unwrap().p_sum();
        let o = interferometer::oracle_port_populations(&config, spec).unwrap().p_sum();
        worst_mz = worst_mz.max((s - o).abs());
    }
    let pass = worst_pulse <= 1e-2 && worst_mz <= 0.02;
    check(
        pass,
        format!("25 single pulses max port deviation {worst_pulse:.2e}, MZ P_sum max deviation {worst_mz:.2e} over 20 T"),
    )
}

/// Ideal fringe, fringe frequency and the pulse-area formula.
fn analytic_identities() -> Outcome {
    let g = 0.000357;
    let mut config = mz(StrategyName::DsDbd, g, 0.0, 0.05, Detection::Unresolved);
    config.pulses = PulseModel::Ideal;
    let grid = default_t_grid(g).unwrap();
    let scan = t_scan(&config, &grid).unwrap();
    let fringe = scan
        .t
        .iter()
        .zip(&scan.p_sum)
        .map(|(t, p)| (p - 0.5 * (1.0 - (4.0 * g * t * t).cos())).abs())
        .fold(0.0, f64::max);
    let freq = interferometer::fit_fringe_frequency(&scan).unwrap();
    let freq_err = (freq - 4.0 * g).abs() / (4.0 * g);
    let mut rwa: f64 = 0.0;
    for (peak, width) in [(0.2, 1.5), (0.35, 2.0), (0.5, 1.2), (0.5, 2.5)] {
        let env = Envelope::gaussian(peak, width, 0.0);
        let (a, b) = env.support;
        let out = tls::evolve_rwa([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], &env, 0.0, a, &[b]).unwrap();
        rwa = rwa.max((out[0][1].norm_sqr() - tls::pulse_area_probability(peak, width)).abs());
    }
    let pass = fringe <= 1e-10 && freq_err <= 1e-6 && rwa <= 1e-6;
    check(
        pass,
        format!("ideal fringe {fringe:.1e}, fringe frequency relative error {freq_err:.1e}, pulse-area formula {rwa:.1e}"),
    )
}

/// Hermiticity, norm conservation, parity, unitarity and truncation convergence.
fn structural_properties() -> Outcome {
    let specs: Vec<StrategySpec> = StrategyName::BUILTIN.iter().map(|&n| strategy(n)).collect();
    let pulses: Vec<&Pulse> = specs.iter().flat_map(|s| [&s.bs, &s.mirror]).collect();

    let mut herm: f64 = 0.0;
    for n_max in [2, 3] {
        let basis = LevelBasis::new(n_max, 0.13).unwrap();
        for pulse in &pulses {
            for k in 0..20 {
                let t = pulse.envelope.support.0 + k as f64 * 0.37;
                let h = build_hamiltonian(&basis, t, pulse, 0.1);
                for i in 0..h.len() {
                    for j in 0..h.len() {
                        herm = herm.max((h[i][j] - h[j][i].conj()).norm());
                    }
                }
            }
        }
    }

    let ml = MultiLevel::default();
    let mut norm_drift: f64 = 0.0;
    for pulse in &pulses {
        let basis = ml.basis(0.07).unwrap();
        let out = ml.evolve_pulse(&MultiLevelState::bare(basis, 0), pulse, 0.05).unwrap();
        norm_drift = norm_drift.max((out.norm_sqr() - 1.0).abs());
        let (a, b) = pulse.envelope.support;
        let tls_out =
            tls::evolve_tls([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], pulse, 0.05, a, &[b]).unwrap();
        norm_drift = norm_drift.max((tls_out[0][0].norm_sqr() + tls_out[0][1].norm_sqr() - 1.0).abs());
    }

    let wp = GaussianWavePacket::new(0.0, 0.1).unwrap();
    let spec = GridSpec::new(1024, 2.0 * PI * 32.0, 1e-4).unwrap();
    let fft = Transforms::new(spec.n_points);
    let state = grid::prepare_wavepacket(spec, &wp, &fft).unwrap();
    // 1e5 steps of 1e-4 across a 10-unit box pulse.
    let long = Pulse::new(Envelope::boxcar(1.5, 10.0, 0.0), Detuning::constant(0.0));
    let grid_drift = (grid::split_step_pulse(&state, &long, 0.1, &fft).norm() - 1.0).abs();

    let mut parity: f64 = 0.0;
    for pulse in &pulses {
        let pops = ml.transfer_populations(0.0, 0, pulse, 0.2).unwrap();
        let basis = ml.basis(0.0).unwrap();
        let out = ml.evolve_pulse(&MultiLevelState::bare(basis, 0), pulse, 0.2).unwrap();
        let bare = dbd_sim::multilevel::to_bare(&out.amplitudes);
        for (plus, minus) in [(1, 2), (3, 4)] {
            parity = parity
                .max((0.5 * (bare[plus] - bare[minus]).norm_sqr()).max((pops[plus] - pops[minus]).abs()));
        }
    }

    let mut mirror: f64 = 0.0;
    for s in &specs {
        for p in [-0.2, -0.11, 0.05, 0.17] {
            let plus = ml.mirror_efficiency(-p, 0.1, &s.mirror, Direction::Plus).unwrap().value;
            let minus = ml.mirror_efficiency(p, 0.1, &s.mirror, Direction::Minus).unwrap().value;
            mirror = mirror.max((plus - minus).abs());
        }
    }

    let mut unitarity: f64 = 0.0;
    for pulse in &pulses {
        for p in [-0.25, 0.0, 0.18] {
            unitarity = unitarity.max(unitarity_error(&pulse_s_matrix(&ml, p, pulse, 0.05).unwrap().matrix));
        }
    }

    // Main ports |p>, |p+2>, |p-2> for the published pulses with peak Rabi frequency <= 2.5.
    let ml3 = MultiLevel::with_order(3);
    let mut truncation: f64 = 0.0;
    for pulse in pulses.iter().filter(|p| p.envelope.peak <= 2.5) {
        for k_in in [0, 1] {
            for p in [0.0, 0.05, 0.2] {
                let a = ml.transfer_populations(p, k_in, pulse, 0.0).unwrap();
                let b = ml3.transfer_populations(p, k_in, pulse, 0.0).unwrap();
                for i in 0..3 {
                    truncation = truncation.max((a[i] - b[i]).abs());
                }
            }
        }
    }

    let pass = herm <= 1e-14
        && norm_drift <= 1e-9
        && grid_drift <= 1e-9
        && parity <= 1e-12
        && mirror <= 1e-6
        && unitarity <= 1e-5
        && truncation <= 1e-4;
    check(
        pass,
        format!(
            "hermiticity {herm:.1e}, norm {norm_drift:.1e}, grid norm {grid_drift:.1e}, parity {parity:.1e}, mirror parity {mirror:.1e}, unitarity {unitarity:.1e}, n_max 2->3 {truncation:.1e}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 integrated pulse efficiencies", table_efficiencies),
        ("2 optimal constant detunings", optimal_detunings),
        ("3 unresolved fringe contrast", unresolved_contrasts),
        ("4 resolved detection", resolved_detection),
        ("5 momentum-width robustness", momentum_width_robustness),
        ("6 lattice-depth fluctuations", fluctuations),
        ("7 grid oracle equivalence", oracle_equivalence),
        ("8 analytic identities", analytic_identities),
        ("9 structural properties", structural_properties),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    let strict = args.iter().any(|a| a == "--strict");
    let selected: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let (mut ran, mut failed) = (0, 0);
    for (name, run) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| name.starts_with(s.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{status} [{name}] {} ({:.1} s)", outcome.detail, start.elapsed().as_secs_f64());
        ran += 1;
        failed += usize::from(!outcome.pass);
    }
    println!("{} of {ran} acceptance criteria passed", ran - failed);
    // Failures are reported above; --strict also turns them into a failing exit status.
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
