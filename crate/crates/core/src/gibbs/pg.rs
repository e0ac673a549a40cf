//! Exact Polya-Gamma PG(1, c) draws.
//!
//! Devroye-style accept-reject: a proposal mixing a truncated exponential
//! (right of `TRUNC`) and a truncated inverse Gaussian (left of `TRUNC`) is
//! accepted by evaluating the alternating series for the Jacobi density.
//! The draw is `J*(1, |c|/2) / 4`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::erfc;

const TRUNC: f64 = 0.64;

/// `ln Φ(x)`, accurate in the far left tail.
pub(crate) fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio expansion
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Probability of choosing the exponential branch.
fn exponential_branch_mass(z: f64) -> f64 {
    let t = TRUNC;
    let k = PI * PI / 8.0 + z * z / 2.0;
    let rt = t.sqrt();
    let b = (t * z - 1.0) / rt;
    let a = -(t * z + 1.0) / rt;
    let x0 = k.ln() + k * t;
    let xb = x0 - z + ln_norm_cdf(b);
    let xa = x0 + z + ln_norm_cdf(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// n-th coefficient of the alternating series for the J*(1, 0) density.
fn series_coef(n: u32, x: f64) -> f64 {
    let half = n as f64 + 0.5;
    let kk = half * PI;
    if x > TRUNC {
        kk * (-0.5 * kk * kk * x).exp()
    } else {
        let e = -1.5 * (FRAC_PI_2.ln() + x.ln()) + kk.ln() - 2.0 * half * half / x;
        e.exp()
    }
}

/// Inverse Gaussian IG(1/z, 1) truncated to (0, TRUNC).
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = TRUNC;
    let mu = 1.0 / z;
    if mu > t {
        loop {
            let (mut e1, mut e2): (f64, f64);
            loop {
                e1 = Exp1.sample(rng);
                e2 = Exp1.sample(rng);
                if e1 * e1 <= 2.0 * e2 / t {
                    break;
                }
            }
            let x = t / ((1.0 + t * e1) * (1.0 + t * e1));
            let accept = (-0.5 * z * z * x).exp();
            if rng.random::<f64>() <= accept {
                return x;
            }
        }
    } else {
        loop {
            let n: f64 = StandardNormal.sample(rng);
            let y = n * n;
            let my = mu * y;
            let mut x = mu + 0.5 * mu * my - 0.5 * mu * (4.0 * my + my * my).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x <= t {
                return x;
            }
        }
    }
}

/// One draw from PG(1, c).
pub fn sample_pg<R: Rng + ?Sized>(c: f64, rng: &mut R) -> f64 {
    let z = 0.5 * c.abs();
    let k = PI * PI / 8.0 + z * z / 2.0;
    let p_exp = exponential_branch_mass(z);
    loop {
        let x = if rng.random::<f64>() < p_exp {
            let e: f64 = Exp1.sample(rng);
            TRUNC + e / k
        } else {
            truncated_inverse_gaussian(z, rng)
        };
        let mut s = series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// `E[PG(1, c)] = tanh(c/2) / (2c)`, with limit 1/4 at 0.
pub fn pg_mean(c: f64) -> f64 {
    if c.abs() < 1e-8 {
        0.25 - c * c / 48.0
    } else {
        (0.5 * c).tanh() / (2.0 * c)
    }
}

/// `Var[PG(1, c)]`, with limit 1/24 at 0.
pub fn pg_variance(c: f64) -> f64 {
    if c.abs() < 1e-3 {
        1.0 / 24.0 - c * c / 120.0
    } else {
        let ch = (0.5 * c).cosh();
        (c.sinh() - c) / (4.0 * c * c * c * ch * ch)
    }
}
