//! Small numerical helpers shared across the crate: log-space arithmetic,
//! standard normal functions and a few log-densities.

use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};
pub use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `log(sum(exp(xs)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Draws an index with probability proportional to `exp(log_weights[i])`.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(max.is_finite(), "no category with positive finite weight");
    let w: Vec<f64> = log_weights.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            return i;
        }
        u -= wi;
    }
    // Rounding can leave a sliver of mass at the end.
    w.iter().rposition(|&x| x > 0.0).unwrap()
}

pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }
}

/// Standard normal quantile.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
    }
}

/// Log-density of the location-scale Student-t with squared scale `scale2`.
pub fn student_t_ln_pdf(x: f64, loc: f64, scale2: f64, dof: f64) -> f64 {
    let z2 = (x - loc) * (x - loc) / scale2;
    ln_gamma(0.5 * (dof + 1.0)) - ln_gamma(0.5 * dof)
        - 0.5 * (dof * std::f64::consts::PI * scale2).ln()
        - 0.5 * (dof + 1.0) * (z2 / dof).ln_1p()
}

pub fn ln_binomial(n: u32, k: u32) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Samples `N(mean, var)` truncated to `(lower, upper]` by CDF inversion.
///
/// The inversion is carried out on whichever tail keeps the CDF values away
/// from 1, so intervals deep in the upper tail stay accurate. When both CDF
/// values underflow, falls back to exponential rejection on the near edge.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    var: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> f64 {
    let sd = var.sqrt();
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    debug_assert!(a < b);
    // Reflect so that the interval sits on the left side where CDF values are small.
    let (lo, hi, flip) = if a > 0.0 { (-b, -a, true) } else { (a, b, false) };
    let plo = std_normal_cdf(lo);
    let phi = std_normal_cdf(hi);
    let z = if phi - plo > 1e-300 && phi > 0.0 {
        let u = rng.random::<f64>();
        let z = std_normal_quantile(plo + u * (phi - plo));
        z.clamp(lo, hi)
    } else {
        // Interval far in the lower tail: sample near `hi` (the edge closest to the mode).
        -tail_rejection(-hi, -lo, rng)
    };
    let z = if flip { -z } else { z };
    mean + sd * z
}

/// Standard normal restricted to `[a, b)` with `a > 0` large, via the
/// exponential proposal of Robert (1995).
fn tail_rejection<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a - rng.random::<f64>().ln() / rate;
        if z >= b {
            continue;
        }
        let rho = (-0.5 * (z - rate) * (z - rate)).exp();
        if rng.random::<f64>() <= rho {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_and_quantile_agree() {
        for &x in &[-8.0, -3.0, -0.5, 0.0, 0.7, 2.5] {
            let p = std_normal_cdf(x);
            assert!((std_normal_quantile(p) - x).abs() < 1e-8, "{x}");
        }
        assert!((std_normal_cdf(0.5) - 0.691_462_461_274_013).abs() < 1e-12);
    }

    #[test]
    fn student_t_matches_known_value() {
        // t_1 is Cauchy: density at 0 is 1/pi.
        let v = student_t_ln_pdf(0.0, 0.0, 1.0, 1.0).exp();
        assert!((v - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn truncated_normal_respects_bounds_in_far_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let z = sample_truncated_normal(-50.0, 1.0, 0.0, f64::INFINITY, &mut rng);
            assert!(z > 0.0 && z < 1.0, "{z}");
            let z = sample_truncated_normal(0.0, 1.0, 3.0, 3.5, &mut rng);
            assert!((3.0..=3.5).contains(&z));
            let z = sample_truncated_normal(0.0, 4.0, f64::NEG_INFINITY, -40.0, &mut rng);
            assert!(z <= -40.0 && z > -41.0, "{z}");
        }
    }

    #[test]
    fn categorical_sampler_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lw = [0.0f64.ln(), 1.0f64.ln(), 3.0f64.ln()];
        let mut counts = [0usize; 3];
        for _ in 0..40_000 {
            counts[sample_log_categorical(&lw, &mut rng)] += 1;
        }
        assert_eq!(counts[0], 0);
        assert!((counts[2] as f64 / 40_000.0 - 0.75).abs() < 0.01);
    }
}
