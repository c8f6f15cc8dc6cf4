//! Randomized invariants of the pulse models, interferometer and serialization layers.

use proptest::prelude::*;

use dbd_sim::interferometer::{pulse_s_matrix, unitarity_error};
use dbd_sim::io::{Config, Format, Provenance, ResultTable};
use dbd_sim::multilevel::{build_hamiltonian, Direction, MultiLevel, MultiLevelState};
use dbd_sim::strategies::KnotTable;
use dbd_sim::units::{Detuning, Envelope, Pulse};

fn gaussian_pulse(peak: f64, width: f64, delta: f64) -> Pulse {
    Pulse::new(Envelope::gaussian(peak, width, 6.0 * width), Detuning::constant(delta))
}

fn swap_orders(pop: &[f64]) -> Vec<f64> {
    // Bare order 0, +1, −1, +2, −2 maps to 0, −1, +1, −2, +2 under p → −p.
    vec![pop[0], pop[2], pop[1], pop[4], pop[3]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelope_is_non_negative(peak in 0.0..5.0f64, width in 0.1..2.0f64, t in -5.0..30.0f64) {
        let e = Envelope::gaussian(peak, width, 6.0 * width);
        prop_assert!(e.rabi(t) >= 0.0);
        prop_assert!(e.rabi(t) <= peak);
        let b = Envelope::boxcar(peak, width, 0.0);
        prop_assert!(b.rabi(t) >= 0.0);
    }

    #[test]
    fn linear_detuning_is_affine(
        slope in -2.0..2.0f64, offset in -1.0..1.0f64, width in 0.2..2.0f64,
        a in 0.0..10.0f64, b in 0.0..10.0f64, s in 0.0..1.0f64,
    ) {
        let d = Detuning::linear(slope, offset, 3.0, width);
        let mid = d.eval(a + s * (b - a));
        let interp = d.eval(a) + s * (d.eval(b) - d.eval(a));
        prop_assert!((mid - interp).abs() <= 1e-12 * (1.0 + interp.abs()));
        prop_assert!((d.eval(3.0) - offset).abs() <= 1e-15);
    }

    #[test]
    fn hamiltonian_is_hermitian(
        n_max in 1usize..6, p in -0.9..0.9f64, t in 0.0..6.0f64,
        peak in 0.0..4.0f64, eps in 0.0..0.3f64,
    ) {
        let basis = MultiLevel::with_order(n_max).basis(p).unwrap();
        let h = build_hamiltonian(&basis, t, &gaussian_pulse(peak, 0.5, 0.3), eps);
        for (i, row) in h.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                prop_assert!((v - h[j][i].conj()).norm() <= 1e-14);
            }
        }
    }

    #[test]
    fn config_canonical_form_round_trips(
        entries in proptest::collection::btree_map("[a-z]{1,6}\\.[a-z_]{1,8}", "[A-Za-z0-9.,:-]{1,12}", 0..8),
    ) {
        let mut cfg = Config::default();
        for (k, v) in &entries {
            cfg.set(k, v.clone());
        }
        let again = Config::parse(&cfg.canonical()).unwrap();
        prop_assert_eq!(again.canonical(), cfg.canonical());
        prop_assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn result_table_round_trips(
        rows in proptest::collection::vec(proptest::collection::vec(proptest::num::f64::ANY, 3), 0..6),
        seed in any::<u64>(),
    ) {
        let mut table = ResultTable::new(&["a", "b", "c"], Provenance::new("abc", seed));
        for r in rows {
            table.push(r).unwrap();
        }
        for format in [Format::Csv, Format::Json] {
            let text = table.render(format);
            let back = ResultTable::parse(&text, format).unwrap();
            prop_assert_eq!(back.render(format), text);
        }
    }

    #[test]
    fn knot_table_round_trips(
        knots in proptest::collection::vec((-10.0..10.0f64, -4.0..4.0f64), 0..10),
        seed in any::<u64>(),
    ) {
        let table = KnotTable { strategy: "trial".into(), seed, knots };
        prop_assert_eq!(KnotTable::parse(&table.to_text()).unwrap(), table);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pulse_evolution_preserves_norm(
        n_max in 1usize..4, p in -0.5..0.5f64, k_in in -1i64..=1,
        peak in 0.2..3.0f64, width in 0.3..1.0f64, eps in 0.0..0.2f64,
    ) {
        let ml = MultiLevel::with_order(n_max);
        let init = MultiLevelState::bare(ml.basis(p).unwrap(), k_in);
        let out = ml.evolve_pulse(&init, &gaussian_pulse(peak, width, 0.2), eps).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn momentum_parity(
        p in 0.0..0.5f64, k_in in -1i64..=1, peak in 0.2..3.0f64,
        width in 0.3..1.0f64, delta in -0.5..0.5f64, eps in 0.0..0.2f64,
    ) {
        let ml = MultiLevel::with_order(2);
        let pulse = gaussian_pulse(peak, width, delta);
        let plus = ml.transfer_populations(p, k_in, &pulse, eps).unwrap();
        let minus = ml.transfer_populations(-p, -k_in, &pulse, eps).unwrap();
        for (a, b) in plus.iter().zip(swap_orders(&minus)) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn mirror_directions_are_mirror_images(
        p in -0.3..0.3f64, peak in 0.5..3.0f64, width in 0.5..1.5f64, delta in -0.5..0.5f64,
    ) {
        let ml = MultiLevel::default();
        let pulse = gaussian_pulse(peak, width, delta);
        let plus = ml.mirror_efficiency(p, 0.0, &pulse, Direction::Plus).unwrap().value;
        let minus = ml.mirror_efficiency(-p, 0.0, &pulse, Direction::Minus).unwrap().value;
        prop_assert!((plus - minus).abs() <= 1e-6);
    }

    #[test]
    fn pulse_s_matrix_is_nearly_unitary(
        p in -0.3..0.3f64, peak in 0.2..2.0f64, width in 0.3..1.0f64, delta in -0.5..0.5f64,
    ) {
        // The 5×5 block misses only the small leakage into orders beyond ±2.
        let s = pulse_s_matrix(&MultiLevel::with_order(4), p, &gaussian_pulse(peak, width, delta), 0.0).unwrap();
        prop_assert!(unitarity_error(&s.matrix) <= 5e-2);
    }
}
