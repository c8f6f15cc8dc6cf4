//! Adaptive Dormand-Prince 8(5,3) integration of complex linear systems i ẏ = H(t) y.
//!
//! Step control follows Hairer, Nørsett and Wanner: the error estimate blends the fifth- and
//! third-order embedded solutions.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-10, atol: 1e-12, max_steps: 1_000_000 }
    }
}

const A: [[f64; 12]; 12] = [
    [0.0; 12],
    [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        0.037037037037037035,
        0.0,
        0.0,
        0.17082860872947386,
        0.12546768756682242,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.037109375,
        0.0,
        0.0,
        0.17025221101954405,
        0.06021653898045596,
        -0.017578125,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.03709200011850479,
        0.0,
        0.0,
        0.17038392571223998,
        0.10726203044637328,
        -0.015319437748624402,
        0.008273789163814023,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.6241109587160757,
        0.0,
        0.0,
        -3.3608926294469414,
        -0.868219346841726,
        27.59209969944671,
        20.154067550477894,
        -43.48988418106996,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.47766253643826434,
        0.0,
        0.0,
        -2.4881146199716677,
        -0.590290826836843,
        21.230051448181193,
        15.279233632882423,
        -33.28821096898486,
        -0.020331201708508627,
        0.0,
        0.0,
        0.0,
    ],
    [
        -0.9371424300859873,
        0.0,
        0.0,
        5.186372428844064,
        1.0914373489967295,
        -8.149787010746927,
        -18.52006565999696,
        22.739487099350505,
        2.4936055526796523,
        -3.0467644718982196,
        0.0,
        0.0,
    ],
    [
        2.273310147516538,
        0.0,
        0.0,
        -10.53449546673725,
        -2.0008720582248625,
        -17.9589318631188,
        27.94888452941996,
        -2.8589982771350235,
        -8.87285693353063,
        12.360567175794303,
        0.6433927460157636,
        0.0,
    ],
];
const C: [f64; 12] = [
    0.0,
    0.05260015195876773,
    0.0789002279381516,
    0.1183503419072274,
    0.2816496580927726,
    0.3333333333333333,
    0.25,
    0.3076923076923077,
    0.6512820512820513,
    0.6,
    0.8571428571428571,
    1.0,
];
const B: [f64; 12] = [
    0.054293734116568765,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    0.3111643669578199,
    -0.1521609496625161,
    0.20136540080403034,
    0.04471061572777259,
];
const BHH: [f64; 3] = [0.2440944881889764, 0.7338466882816118, 0.022058823529411766];
const ER: [f64; 12] = [
    0.01312004499419488,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.2251564463762044,
    -0.4957589496572502,
    1.6643771824549864,
    -0.35032884874997366,
    0.3341791187130175,
    0.08192320648511571,
    -0.022355307863886294,
];

const STAGES: usize = 12;

/// Integrates `dy/dt = f(t, y)` from `t0` through each time in `stops` (ascending, all ≥ t0),
/// returning the state at every stop. `f` writes the derivative into its last argument.
pub fn integrate<F>(mut f: F, t0: f64, y0: &[C64], stops: &[f64], tol: Tolerance) -> Result<Vec<Vec<C64>>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let zero = C64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<C64>> = vec![vec![zero; n]; STAGES];
    let mut tmp = vec![zero; n];
    let mut ynew = vec![zero; n];
    let mut out = Vec::with_capacity(stops.len());

    let span = stops.last().map(|&e| e - t0).unwrap_or(0.0);
    let mut h = (span.abs() * 1e-2).max(1e-6);
    f(t, &y, &mut k[0]);
    let mut steps = 0usize;

    for &stop in stops {
        if stop < t {
            return Err(Error::IntegratorFailure { t, reason: "stop times must ascend".into() });
        }
        while t < stop {
            if steps >= tol.max_steps {
                return Err(Error::IntegratorFailure { t, reason: "step budget exceeded".into() });
            }
            let remaining = stop - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };

            for s in 1..STAGES {
                for i in 0..n {
                    let mut acc = zero;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += a * kj[i];
                        }
                    }
                    tmp[i] = y[i] + hs * acc;
                }
                f(t + C[s] * hs, &tmp, &mut k[s]);
            }

            let mut err5 = 0.0;
            let mut err3 = 0.0;
            for i in 0..n {
                let mut incr = zero;
                let mut e5 = zero;
                for s in 0..STAGES {
                    incr += B[s] * k[s][i];
                    e5 += ER[s] * k[s][i];
                }
                ynew[i] = y[i] + hs * incr;
                let e3 = incr - BHH[0] * k[0][i] - BHH[1] * k[8][i] - BHH[2] * k[11][i];
                let scale = tol.atol + tol.rtol * y[i].norm().max(ynew[i].norm());
                err5 += (e5.norm() / scale).powi(2);
                err3 += (e3.norm() / scale).powi(2);
            }
            let mut deno = err5 + 0.01 * err3;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = hs * err5 / (deno * n as f64).sqrt();
            steps += 1;

            if !err.is_finite() {
                return Err(Error::IntegratorFailure { t, reason: "non-finite error estimate".into() });
            }
            let fac = (err.powf(0.125) / 0.9).clamp(1.0 / 6.0, 3.0);
            if err <= 1.0 {
                t = if last { stop } else { t + hs };
                std::mem::swap(&mut y, &mut ynew);
                f(t, &y, &mut k[0]);
                if !last {
                    h = hs / fac;
                }
            } else {
                h = hs / fac.max(1.0);
            }
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::IntegratorFailure { t, reason: "step size underflow".into() });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Convenience wrapper returning only the state at `t1`.
pub fn integrate_to<F>(f: F, t0: f64, y0: &[C64], t1: f64, tol: Tolerance) -> Result<Vec<C64>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    Ok(integrate(f, t0, y0, &[t1], tol)?.pop().unwrap())
}
