//! Normal draws truncated to the positive half-line.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use statrs::distribution::{ContinuousCDF, Normal};

/// Standardized bound above which Robert's exponential rejection is used.
const TAIL_SWITCH: f64 = 8.0;

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Standard normal truncated to `(lower, ∞)`.
fn standard_tail<R: Rng + ?Sized>(lower: f64, rng: &mut R) -> f64 {
    if lower < TAIL_SWITCH {
        // invert the upper tail: x = −Φ⁻¹(u·Φ(−lower))
        let nd = standard_normal();
        let upper_mass = nd.cdf(-lower);
        loop {
            let u: f64 = rng.random();
            let t = u * upper_mass;
            if t > 0.0 {
                let x = -nd.inverse_cdf(t);
                if x > lower && x.is_finite() {
                    return x;
                }
            }
        }
    } else {
        let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
        loop {
            let e: f64 = Exp1.sample(rng);
            let x = lower + e / rate;
            let log_accept = -0.5 * (x - rate) * (x - rate);
            if rng.random::<f64>().ln() <= log_accept {
                return x;
            }
        }
    }
}

/// `N(mean, sd²)` truncated to `(0, ∞)`.
pub fn sample_positive_normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    let lower = -mean / sd;
    let x = mean + sd * standard_tail(lower, rng);
    // guard against round-off landing exactly on the bound
    if x > 0.0 {
        x
    } else {
        f64::MIN_POSITIVE
    }
}
