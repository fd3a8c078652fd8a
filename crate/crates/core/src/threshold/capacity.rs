//! Capacity functionals of the binary-input AWGN channel, parameterized by
//! the mean `m` of the consistent Gaussian LLR density `N(m, 2m)`.
//!
//! `uncertainty(m) = E[log2(1 + e^-L)]` and `capacity(m) = 1 - uncertainty(m)`.
//! The reciprocal channel map `R` is defined by `capacity(R(m)) =
//! uncertainty(m)`; it is an involution taking `0` to `inf` and back.
//!
//! Both tails are kept in the log domain so that `R` stays accurate when one
//! side is a near-perfect channel: `ln uncertainty(m)` is computed as
//! `-m/4 - ln(4 pi m)/2 + ln I(m)` with a well-conditioned integral `I`, and
//! small capacities use the `tanh` power series. The map `R` is served from
//! a table on a uniform `ln m` grid with cubic interpolation.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

const LN_M_MIN: f64 = -23.025_850_929_940_457; // ln 1e-10
const LN_M_MAX: f64 = 5.991_464_547_107_982; // ln 400
const GRID: usize = 8193;
/// Below this mean the capacity comes from the `tanh` series.
const SERIES_M: f64 = 1e-3;

/// `h(l) = e^l log2(1 + e^-l) + log2(1 + e^l)` for `l >= 0`.
fn h(l: f64) -> f64 {
    let t = (-l).exp().ln_1p();
    (l.exp() * t + l + t) / LN_2
}

/// `ln I(m)`, `I(m) = int_0^inf exp(-l/2 - l^2/(4m)) h(l) dl`, by composite
/// Simpson over the range where the integrand exceeds `e^-60`.
fn ln_core_integral(m: f64) -> f64 {
    let upper = -m + (m * m + 240.0 * m).sqrt();
    let n = 2048;
    let step = upper / n as f64;
    let g = |l: f64| (-0.5 * l - l * l / (4.0 * m)).exp() * h(l);
    let mut acc = g(0.0) + g(upper);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(k as f64 * step);
    }
    (acc * step / 3.0).ln()
}

/// `ln E[log2(1 + e^-L)]` evaluated directly (no table).
pub fn ln_uncertainty_exact(m: f64) -> f64 {
    if m <= 0.0 {
        return 0.0;
    }
    -m / 4.0 - 0.5 * (4.0 * PI * m).ln() + ln_core_integral(m)
}

/// `ln capacity(m)` evaluated directly (no table).
pub fn ln_capacity_exact(m: f64) -> f64 {
    if m <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if m >= SERIES_M {
        return (-ln_uncertainty_exact(m).exp()).ln_1p();
    }
    // capacity = (1/ln2) sum_k E[tanh^{2k}(L/2)] / (2k (2k - 1)),
    // expectation over L = m + sqrt(2m) z by Simpson in z on [-12, 12].
    let s = (2.0 * m).sqrt();
    let n = 600;
    let step = 24.0 / n as f64;
    let mut moments = [0.0f64; 16];
    for k in 0..=n {
        let z = -12.0 + k as f64 * step;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let phi = (-0.5 * z * z).exp();
        let t2 = ((m + s * z) / 2.0).tanh().powi(2);
        let mut p = 1.0;
        for mom in moments.iter_mut() {
            p *= t2;
            *mom += w * phi * p;
        }
    }
    let norm = step / 3.0 / (2.0 * PI).sqrt();
    let c: f64 = moments
        .iter()
        .enumerate()
        .map(|(i, &mom)| {
            let k = (i + 1) as f64;
            mom * norm / (2.0 * k * (2.0 * k - 1.0))
        })
        .sum::<f64>()
        / LN_2;
    c.ln()
}

struct Tables {
    step: f64,
    ln_f: Vec<f64>,
    ln_c: Vec<f64>,
    ln_r: Vec<f64>,
    /// Mean where capacity equals uncertainty; `R` maps it to itself.
    ln_m_half: f64,
}

fn u_at(i: usize, step: f64) -> f64 {
    LN_M_MIN + i as f64 * step
}

/// Catmull-Rom interpolation of `ys` on the uniform grid at fractional
/// index `x`.
fn cubic(ys: &[f64], x: f64) -> f64 {
    let last = ys.len() - 1;
    let i = (x.floor() as usize).min(last - 1);
    let t = x - i as f64;
    let p1 = ys[i];
    let p2 = ys[i + 1];
    let p0 = if i == 0 { 2.0 * p1 - p2 } else { ys[i - 1] };
    let p3 = if i + 2 > last {
        2.0 * p2 - p1
    } else {
        ys[i + 2]
    };
    p1 + 0.5
        * t
        * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
}

/// Solves `cubic(ys, x) = target` for a monotone table; `None` when the
/// target is outside the tabulated range.
fn inverse(ys: &[f64], target: f64) -> Option<f64> {
    let increasing = ys[ys.len() - 1] > ys[0];
    let (lo_v, hi_v) = if increasing {
        (ys[0], ys[ys.len() - 1])
    } else {
        (ys[ys.len() - 1], ys[0])
    };
    if !(lo_v..=hi_v).contains(&target) {
        return None;
    }
    let key = |v: f64| if increasing { v } else { -v };
    let t = key(target);
    let j = ys.partition_point(|&v| key(v) < t).clamp(1, ys.len() - 1);
    let (mut a, mut b) = ((j - 1) as f64, j as f64);
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if key(cubic(ys, mid)) < t {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let step = (LN_M_MAX - LN_M_MIN) / (GRID - 1) as f64;
        let ln_f: Vec<f64> = (0..GRID)
            .map(|i| ln_uncertainty_exact(u_at(i, step).exp()))
            .collect();
        let ln_c: Vec<f64> = (0..GRID)
            .map(|i| ln_capacity_exact(u_at(i, step).exp()))
            .collect();
        let half = inverse(
            &ln_c
                .iter()
                .zip(&ln_f)
                .map(|(c, f)| c - f)
                .collect::<Vec<_>>(),
            0.0,
        )
        .expect("capacity crosses one half inside the table");
        let ln_m_half = LN_M_MIN + half * step;
        let mut t = Tables {
            step,
            ln_f,
            ln_c,
            ln_r: Vec::new(),
            ln_m_half,
        };
        t.ln_r = (0..GRID)
            .map(|i| {
                let u = u_at(i, step);
                ln_reciprocal_slow(&t, u, t.ln_f[i], t.ln_c[i])
            })
            .collect();
        t
    })
}

/// `ln R(m)` by inverting whichever side of the relation is well
/// conditioned: `capacity(R) = uncertainty(m)` for large `m`,
/// `uncertainty(R) = capacity(m)` for small `m`.
fn ln_reciprocal_slow(t: &Tables, ln_m: f64, ln_f_m: f64, ln_c_m: f64) -> f64 {
    if ln_m >= t.ln_m_half {
        match inverse(&t.ln_c, ln_f_m) {
            Some(x) => LN_M_MIN + x * t.step,
            // capacity(R) ~ R / (4 ln 2) below the grid
            None => ln_f_m + (4.0 * LN_2).ln(),
        }
    } else {
        match inverse(&t.ln_f, ln_c_m) {
            Some(x) => LN_M_MIN + x * t.step,
            None => extrapolate_ln_m_for_ln_f(t, ln_c_m),
        }
    }
}

/// Mean whose uncertainty has the given (very small) logarithm, beyond the
/// grid: `ln f(m) ~ ln f(M) - (m - M)/4 - ln(m/M)/2` for `m > M`.
fn extrapolate_ln_m_for_ln_f(t: &Tables, target: f64) -> f64 {
    let big = LN_M_MAX.exp();
    let top = t.ln_f[GRID - 1];
    let mut m = big + 4.0 * (top - target);
    for _ in 0..50 {
        let g = top - (m - big) / 4.0 - 0.5 * (m / big).ln() - target;
        let dg = -0.25 - 0.5 / m;
        m -= g / dg;
    }
    m.ln()
}

fn ln_f_extrapolated(t: &Tables, m: f64) -> f64 {
    let big = LN_M_MAX.exp();
    t.ln_f[GRID - 1] - (m - big) / 4.0 - 0.5 * (m / big).ln()
}

/// `E[log2(1 + e^-L)]`, the residual uncertainty of a channel with LLR mean `m`.
pub fn uncertainty(m: f64) -> f64 {
    ln_uncertainty(m).exp()
}

pub fn ln_uncertainty(m: f64) -> f64 {
    if m <= 0.0 {
        return 0.0;
    }
    let t = tables();
    let u = m.ln();
    if u < LN_M_MIN {
        return (-capacity(m)).ln_1p();
    }
    if u > LN_M_MAX {
        return ln_f_extrapolated(t, m);
    }
    cubic(&t.ln_f, (u - LN_M_MIN) / t.step)
}

/// Mutual information between the code bit and an LLR of mean `m`.
pub fn capacity(m: f64) -> f64 {
    if m <= 0.0 {
        return 0.0;
    }
    if m == f64::INFINITY {
        return 1.0;
    }
    let t = tables();
    let u = m.ln();
    if u < LN_M_MIN {
        return m / (4.0 * LN_2);
    }
    if u > LN_M_MAX {
        return -ln_f_extrapolated(t, m).exp_m1();
    }
    cubic(&t.ln_c, (u - LN_M_MIN) / t.step).exp()
}

/// The reciprocal channel map: `capacity(reciprocal(m)) = 1 - capacity(m)`.
pub fn reciprocal(m: f64) -> f64 {
    if m <= 0.0 {
        return f64::INFINITY;
    }
    if m == f64::INFINITY {
        return 0.0;
    }
    let t = tables();
    let u = m.ln();
    if u < LN_M_MIN {
        let ln_c = (m / (4.0 * LN_2)).ln();
        return match inverse(&t.ln_f, ln_c) {
            Some(x) => (LN_M_MIN + x * t.step).exp(),
            None => extrapolate_ln_m_for_ln_f(t, ln_c).exp(),
        };
    }
    if u > LN_M_MAX {
        return (ln_f_extrapolated(t, m) + (4.0 * LN_2).ln()).exp();
    }
    cubic(&t.ln_r, (u - LN_M_MIN) / t.step).exp()
}

/// LLR mean of the BI-AWGN channel at the given `Es/N0` (linear): `4 Es/N0`.
pub fn channel_mean(es_n0: f64) -> f64 {
    4.0 * es_n0
}
