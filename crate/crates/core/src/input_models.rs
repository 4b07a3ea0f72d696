//! Conjugate input models: marginal, predictive and joint marginal
//! likelihoods of the inputs with the cluster parameters integrated out.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::InputFamily;
use crate::special::{ln_binomial, ln_gamma, student_t_ln_pdf, LN_2PI};

/// Sufficient statistics of one input dimension within a cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DimStats {
    Gaussian { sum: f64, sum_sq: f64 },
    /// Counts per category.
    Categorical { counts: Vec<u32> },
    /// Counts per value `0..=trials`; kept as integers so updates are exact.
    Binomial { counts: Vec<u32> },
}

/// Sufficient statistics of a set of inputs under a per-dimension input spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuffStats {
    n: usize,
    dims: Vec<DimStats>,
}

impl SuffStats {
    pub fn empty(spec: &[InputFamily]) -> Self {
        let dims = spec
            .iter()
            .map(|f| match f {
                InputFamily::GaussianNig { .. } => DimStats::Gaussian { sum: 0.0, sum_sq: 0.0 },
                InputFamily::CategoricalDirichlet { gamma } => DimStats::Categorical { counts: vec![0; gamma.len()] },
                InputFamily::BinomialBeta { trials, .. } => DimStats::Binomial { counts: vec![0; *trials as usize + 1] },
            })
            .collect();
        SuffStats { n: 0, dims }
    }

    pub fn from_rows<'a>(spec: &[InputFamily], rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut s = Self::empty(spec);
        for r in rows {
            s.add(r);
        }
        s
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> &[DimStats] {
        &self.dims
    }

    /// Statistics of dimension `d` alone.
    pub fn dim(&self, d: usize) -> (usize, &DimStats) {
        (self.n, &self.dims[d])
    }

    pub fn add(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dims.len());
        self.n += 1;
        for (s, &v) in self.dims.iter_mut().zip(x) {
            match s {
                DimStats::Gaussian { sum, sum_sq } => {
                    *sum += v;
                    *sum_sq += v * v;
                }
                DimStats::Categorical { counts } | DimStats::Binomial { counts } => counts[v as usize] += 1,
            }
        }
    }

    /// Removes a point previously added. Panics when the statistics are empty.
    pub fn remove(&mut self, x: &[f64]) {
        assert!(self.n > 0, "removing a point from empty sufficient statistics");
        self.n -= 1;
        let empty = self.n == 0;
        for (s, &v) in self.dims.iter_mut().zip(x) {
            match s {
                DimStats::Gaussian { sum, sum_sq } => {
                    if empty {
                        // Clear rounding residue.
                        *sum = 0.0;
                        *sum_sq = 0.0;
                    } else {
                        *sum -= v;
                        *sum_sq -= v * v;
                    }
                }
                DimStats::Categorical { counts } | DimStats::Binomial { counts } => {
                    let c = &mut counts[v as usize];
                    assert!(*c > 0, "removing a value that was never added");
                    *c -= 1;
                }
            }
        }
    }

    /// Adds all points summarised by `other`.
    pub fn merge(&mut self, other: &SuffStats) {
        self.n += other.n;
        for (a, b) in self.dims.iter_mut().zip(&other.dims) {
            match (a, b) {
                (DimStats::Gaussian { sum, sum_sq }, DimStats::Gaussian { sum: s2, sum_sq: q2 }) => {
                    *sum += s2;
                    *sum_sq += q2;
                }
                (DimStats::Categorical { counts }, DimStats::Categorical { counts: c2 })
                | (DimStats::Binomial { counts }, DimStats::Binomial { counts: c2 }) => {
                    counts.iter_mut().zip(c2).for_each(|(c, d)| *c += d)
                }
                _ => panic!("merging statistics of different input families"),
            }
        }
    }

    /// `log h(x | X)` where `X` are the points summarised here (unchecked).
    pub fn ln_predictive(&self, x: &[f64], spec: &[InputFamily]) -> f64 {
        self.dims
            .iter()
            .zip(spec)
            .zip(x)
            .map(|((s, f), &v)| ln_predictive_dim(v, self.n, s, f))
            .sum()
    }

    /// `log h(X)` for the points summarised here.
    pub fn ln_joint(&self, spec: &[InputFamily]) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.dims.iter().zip(spec).map(|(s, f)| ln_joint_dim(self.n, s, f)).sum()
    }
}

/// Posterior NIG hyperparameters `(u_hat, c_hat, a_hat, b_hat)` after `n` points.
pub fn nig_posterior(u0: f64, c: f64, a: f64, b: f64, n: usize, sum: f64, sum_sq: f64) -> (f64, f64, f64, f64) {
    let nf = n as f64;
    let c_hat = c + nf;
    let a_hat = a + 0.5 * nf;
    let u_hat = (c * u0 + sum) / c_hat;
    let mut b_hat = b + 0.5 * (c * u0 * u0 - c_hat * u_hat * u_hat + sum_sq);
    if !(b_hat > 0.0) || n == 0 {
        b_hat = if n == 0 {
            b
        } else {
            let mean = sum / nf;
            let ss = (sum_sq - nf * mean * mean).max(0.0);
            b + 0.5 * ss + 0.5 * (c * nf / c_hat) * (mean - u0) * (mean - u0)
        };
    }
    (u_hat, c_hat, a_hat, b_hat)
}

/// Predictive log-density of one dimension given `n` points with stats `s`.
pub fn ln_predictive_dim(x: f64, n: usize, s: &DimStats, family: &InputFamily) -> f64 {
    match (s, family) {
        (DimStats::Gaussian { sum, sum_sq }, &InputFamily::GaussianNig { u0, c, a, b }) => {
            let (u_hat, c_hat, a_hat, b_hat) = nig_posterior(u0, c, a, b, n, *sum, *sum_sq);
            student_t_ln_pdf(x, u_hat, (b_hat / a_hat) * (c_hat + 1.0) / c_hat, 2.0 * a_hat)
        }
        (DimStats::Categorical { counts }, InputFamily::CategoricalDirichlet { gamma }) => {
            let g = x as usize;
            let total: f64 = gamma.iter().sum();
            ((gamma[g] + counts[g] as f64) / (total + n as f64)).ln()
        }
        (DimStats::Binomial { counts }, &InputFamily::BinomialBeta { trials, gamma0, gamma1 }) => {
            let (succ, fail) = binomial_totals(counts, trials);
            beta_binomial_ln_pmf(x as u32, trials, gamma0 + succ, gamma1 + fail)
        }
        _ => panic!("statistics do not match the input family"),
    }
}

/// Joint marginal log-density of one dimension for `n >= 1` points.
pub fn ln_joint_dim(n: usize, s: &DimStats, family: &InputFamily) -> f64 {
    let nf = n as f64;
    match (s, family) {
        (DimStats::Gaussian { sum, sum_sq }, &InputFamily::GaussianNig { u0, c, a, b }) => {
            let (_, c_hat, a_hat, b_hat) = nig_posterior(u0, c, a, b, n, *sum, *sum_sq);
            ln_gamma(a_hat) - ln_gamma(a) + a * b.ln() - a_hat * b_hat.ln() + 0.5 * (c / c_hat).ln()
                - 0.5 * nf * LN_2PI
        }
        (DimStats::Categorical { counts }, InputFamily::CategoricalDirichlet { gamma }) => {
            let total: f64 = gamma.iter().sum();
            let mut v = ln_gamma(total) - ln_gamma(total + nf);
            for (g, &cnt) in gamma.iter().zip(counts) {
                if cnt > 0 {
                    v += ln_gamma(g + cnt as f64) - ln_gamma(*g);
                }
            }
            v
        }
        (DimStats::Binomial { counts }, &InputFamily::BinomialBeta { trials, gamma0, gamma1 }) => {
            let (succ, fail) = binomial_totals(counts, trials);
            let mut v = ln_beta(gamma0 + succ, gamma1 + fail) - ln_beta(gamma0, gamma1);
            for (x, &cnt) in counts.iter().enumerate() {
                if cnt > 0 {
                    v += cnt as f64 * ln_binomial(trials, x as u32);
                }
            }
            v
        }
        _ => panic!("statistics do not match the input family"),
    }
}

/// Draws one value from the predictive of one dimension given `n` points.
pub fn sample_predictive_dim<R: Rng + ?Sized>(n: usize, s: &DimStats, family: &InputFamily, rng: &mut R) -> f64 {
    match (s, family) {
        (DimStats::Gaussian { sum, sum_sq }, &InputFamily::GaussianNig { u0, c, a, b }) => {
            let (u_hat, c_hat, a_hat, b_hat) = nig_posterior(u0, c, a, b, n, *sum, *sum_sq);
            // t = z / sqrt(chi2_nu / nu)
            let nu = 2.0 * a_hat;
            let z: f64 = StandardNormal.sample(rng);
            let chi2 = Gamma::new(0.5 * nu, 2.0).unwrap().sample(rng);
            let scale = ((b_hat / a_hat) * (c_hat + 1.0) / c_hat).sqrt();
            u_hat + scale * z / (chi2 / nu).sqrt()
        }
        (DimStats::Categorical { counts }, InputFamily::CategoricalDirichlet { gamma }) => {
            let w: Vec<f64> = gamma.iter().zip(counts).map(|(g, &c)| g + c as f64).collect();
            let total: f64 = w.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (g, wg) in w.iter().enumerate() {
                if u < *wg {
                    return g as f64;
                }
                u -= wg;
            }
            (w.len() - 1) as f64
        }
        (DimStats::Binomial { counts }, &InputFamily::BinomialBeta { trials, gamma0, gamma1 }) => {
            let (succ, fail) = binomial_totals(counts, trials);
            let p = Beta::new(gamma0 + succ, gamma1 + fail).unwrap().sample(rng);
            (0..trials).filter(|_| rng.random::<f64>() < p).count() as f64
        }
        _ => panic!("statistics do not match the input family"),
    }
}

fn binomial_totals(counts: &[u32], trials: u32) -> (f64, f64) {
    let mut succ = 0u64;
    let mut n = 0u64;
    for (x, &c) in counts.iter().enumerate() {
        succ += x as u64 * c as u64;
        n += c as u64;
    }
    (succ as f64, (n * trials as u64 - succ) as f64)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn beta_binomial_ln_pmf(x: u32, trials: u32, a: f64, b: f64) -> f64 {
    ln_binomial(trials, x) + ln_beta(a + x as f64, b + (trials - x) as f64) - ln_beta(a, b)
}

fn check_row(x: &[f64], spec: &[InputFamily]) -> Result<()> {
    if x.len() != spec.len() {
        return Err(crate::Error::SizeMismatch(x.len(), spec.len()));
    }
    for (v, f) in x.iter().zip(spec) {
        f.check_value(*v)?;
    }
    Ok(())
}

/// `log h(x_n)`: the prior marginal of one input vector.
pub fn log_marginal_point(x: &[f64], spec: &[InputFamily]) -> Result<f64> {
    check_row(x, spec)?;
    Ok(SuffStats::empty(spec).ln_predictive(x, spec))
}

/// `log h(x_n | X)` for the points summarised by `stats` (which must exclude `x_n`).
pub fn log_predictive_point(x: &[f64], stats: &SuffStats, spec: &[InputFamily]) -> Result<f64> {
    check_row(x, spec)?;
    Ok(stats.ln_predictive(x, spec))
}

/// `log h(X)` for the points summarised by `stats`; zero for an empty set.
pub fn log_joint_marginal(stats: &SuffStats, spec: &[InputFamily]) -> f64 {
    stats.ln_joint(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(g: usize) -> Vec<InputFamily> {
        vec![InputFamily::CategoricalDirichlet { gamma: vec![1.0; g] }]
    }

    #[test]
    fn symmetric_dirichlet_marginal() {
        let p = log_marginal_point(&[2.0], &cat(3)).unwrap().exp();
        assert!((p - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_beta_binomial_marginal() {
        let spec = vec![InputFamily::BinomialBeta { trials: 1, gamma0: 1.0, gamma1: 1.0 }];
        let p = log_marginal_point(&[1.0], &spec).unwrap().exp();
        assert!((p - 0.5).abs() < 1e-14);
    }

    #[test]
    fn invalid_category_is_domain_error() {
        assert!(log_marginal_point(&[3.0], &cat(3)).is_err());
        assert!(log_marginal_point(&[0.5], &cat(3)).is_err());
    }

    #[test]
    fn dirichlet_posterior_mean() {
        let spec = cat(2);
        let s = SuffStats::from_rows(&spec, [&[0.0][..]]);
        let p = log_predictive_point(&[0.0], &s, &spec).unwrap().exp();
        assert!((p - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn categorical_joint_by_hand() {
        let spec = cat(2);
        let s = SuffStats::from_rows(&spec, [&[0.0][..], &[1.0][..]]);
        assert!((log_joint_marginal(&s, &spec).exp() - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn empty_stats_reduce_to_marginal() {
        let spec = vec![
            InputFamily::GaussianNig { u0: 0.0, c: 1.0, a: 2.0, b: 1.0 },
            InputFamily::BinomialBeta { trials: 4, gamma0: 0.5, gamma1: 2.0 },
        ];
        let x = [0.7, 3.0];
        let s = SuffStats::empty(&spec);
        let a = log_predictive_point(&x, &s, &spec).unwrap();
        let b = log_marginal_point(&x, &spec).unwrap();
        assert_eq!(a, b);
        let one = SuffStats::from_rows(&spec, [&x[..]]);
        assert!((log_joint_marginal(&one, &spec) - b).abs() < 1e-12);
        assert_eq!(log_joint_marginal(&s, &spec), 0.0);
    }

    #[test]
    fn add_remove_round_trip() {
        let spec = vec![InputFamily::GaussianNig { u0: 0.0, c: 1.0, a: 2.0, b: 1.0 }];
        let mut s = SuffStats::empty(&spec);
        s.add(&[1.0]);
        assert_eq!(s.count(), 1);
        assert_eq!(s.dims()[0], DimStats::Gaussian { sum: 1.0, sum_sq: 1.0 });
        s.add(&[2.5]);
        s.remove(&[2.5]);
        assert_eq!(s.dims()[0], DimStats::Gaussian { sum: 1.0, sum_sq: 1.0 });

        let spec = cat(3);
        let s = SuffStats::from_rows(&spec, [&[0.0][..], &[0.0][..], &[2.0][..]]);
        assert_eq!(s.dims()[0], DimStats::Categorical { counts: vec![2, 0, 1] });
    }

    #[test]
    #[should_panic]
    fn remove_from_empty_panics() {
        let spec = cat(2);
        SuffStats::empty(&spec).remove(&[0.0]);
    }

    #[test]
    fn discrete_predictives_sum_to_one() {
        let spec = vec![InputFamily::BinomialBeta { trials: 5, gamma0: 0.7, gamma1: 1.3 }];
        let s = SuffStats::from_rows(&spec, [&[1.0][..], &[4.0][..], &[5.0][..]]);
        let total: f64 = (0..=5).map(|x| s.ln_predictive(&[x as f64], &spec).exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nig_guard_matches_algebraic_form() {
        let (u, c, a, b) = nig_posterior(0.3, 0.25, 2.0, 1.0, 3, 1.5, 2.0);
        let mean: f64 = 0.5;
        let centered = 1.0 + 0.5 * (2.0 - 3.0 * mean * mean) + 0.5 * (0.25 * 3.0 / 3.25) * (mean - 0.3f64).powi(2);
        assert!((b - centered).abs() < 1e-12);
        assert!((u - (0.075 + 1.5) / 3.25).abs() < 1e-15 && c == 3.25 && a == 3.5);
    }
}
