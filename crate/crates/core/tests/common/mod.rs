//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::HashMap;

use edpmoe::input_models::{log_joint_marginal, SuffStats};
use edpmoe::sampler::{Chain, Schedule};
use edpmoe::special::{ln_gamma, log_sum_exp};
use edpmoe::{Dataset, ExpertParams, HmcSettings, InputFamily, OutputKind, PriorConfig, ScalarPrior};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// All set partitions of `0..n` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(z: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if z.len() == n {
            out.push(z.clone());
            return;
        }
        for l in 0..=max + 1 {
            z.push(l);
            rec(z, n, max.max(l), out);
            z.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut z = vec![0];
    rec(&mut z, n, 0, &mut out);
    out
}

/// All nested partitions of `0..n` as `(zy, zx)` with canonical labels.
pub fn nested_partitions(n: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    for zy in set_partitions(n) {
        let k = zy.iter().max().unwrap() + 1;
        let blocks: Vec<Vec<usize>> = (0..k).map(|j| (0..n).filter(|&i| zy[i] == j).collect()).collect();
        let mut choices: Vec<Vec<Vec<usize>>> = blocks.iter().map(|b| set_partitions(b.len())).collect();
        // Cartesian product over blocks.
        let mut acc: Vec<Vec<usize>> = vec![vec![0; n]];
        for (b, parts) in blocks.iter().zip(choices.drain(..)) {
            let mut next = Vec::new();
            for zx in &acc {
                for p in &parts {
                    let mut z = zx.clone();
                    for (&i, &l) in b.iter().zip(p) {
                        z[i] = l;
                    }
                    next.push(z);
                }
            }
            acc = next;
        }
        for zx in acc {
            out.push((zy.clone(), zx));
        }
    }
    out
}

/// Dense Gaussian log-density `log N(y | mean 1, sigma^2 I + K)`, evaluated
/// with an LU solve and determinant rather than a Cholesky factor.
pub fn dense_gp_log_marginal(y: &[f64], xs: &[Vec<f64>], p: &ExpertParams) -> f64 {
    let n = y.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let r2: f64 = xs[i].iter().zip(&xs[j]).zip(&p.length_scales).map(|((a, b), l)| ((a - b) / l).powi(2)).sum();
        p.magnitude * (-0.5 * r2).exp() + if i == j { p.noise_var } else { 0.0 }
    });
    let e = DVector::from_iterator(n, y.iter().map(|v| v - p.mean));
    let lu = k.clone().lu();
    let sol = lu.solve(&e).unwrap();
    -0.5 * (n as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * k.determinant().ln() - 0.5 * e.dot(&sol)
}

/// Log of the enriched-DP probability of a nested partition.
pub fn edp_prior_ln(zy: &[usize], zx: &[usize], alpha_theta: f64, alpha_psi: f64) -> f64 {
    let n = zy.len();
    let k = zy.iter().max().unwrap() + 1;
    let mut lp = k as f64 * alpha_theta.ln() + ln_gamma(alpha_theta) - ln_gamma(alpha_theta + n as f64);
    for j in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| zy[i] == j).collect();
        let nj = members.len() as f64;
        lp += ln_gamma(nj);
        let kj = members.iter().map(|&i| zx[i]).max().unwrap() + 1;
        lp += kj as f64 * alpha_psi.ln() + ln_gamma(alpha_psi) - ln_gamma(alpha_psi + nj);
        for l in 0..kj {
            let nl = members.iter().filter(|&&i| zx[i] == l).count() as f64;
            lp += ln_gamma(nl);
        }
    }
    lp
}

/// Log of the DP probability of a partition.
pub fn dp_prior_ln(zy: &[usize], alpha: f64) -> f64 {
    let n = zy.len();
    let k = zy.iter().max().unwrap() + 1;
    let mut lp = k as f64 * alpha.ln() + ln_gamma(alpha) - ln_gamma(alpha + n as f64);
    for j in 0..k {
        lp += ln_gamma(zy.iter().filter(|&&z| z == j).count() as f64);
    }
    lp
}

/// Point-mass priors at `params`, so expert updates are identities.
pub fn fixed_priors(d: usize, params: &ExpertParams) -> PriorConfig {
    PriorConfig {
        noise_var: ScalarPrior::fixed(params.noise_var),
        mean: ScalarPrior::fixed(params.mean),
        magnitude: ScalarPrior::fixed(params.magnitude),
        length_scales: params.length_scales.iter().map(|&l| ScalarPrior::fixed(l)).collect::<Vec<_>>()[..d].to_vec(),
        alpha_theta: ScalarPrior::fixed(1.0),
        alpha_psi: ScalarPrior::fixed(1.0),
        hmc: HmcSettings::default(),
        new_cluster_candidates: 3,
        mc_samples: 1000,
    }
}

/// A small problem with every expert parameter and concentration fixed.
pub struct FrozenProblem {
    pub data: Dataset,
    pub priors: PriorConfig,
    pub params: ExpertParams,
    pub alpha_theta: f64,
    pub alpha_psi: f64,
}

impl FrozenProblem {
    pub fn new(n: usize) -> Self {
        let xs = [0.0, 0.4, 2.0, 2.3, 3.5];
        let ys = [0.1, 0.3, 1.0, 0.8, -0.4];
        let inputs: Vec<Vec<f64>> = xs[..n].iter().map(|&x| vec![x]).collect();
        let mean = xs[..n].iter().sum::<f64>() / n as f64;
        let spec = vec![InputFamily::GaussianNig { u0: mean, c: 0.25, a: 2.0, b: 1.0 }];
        let data = Dataset::new(inputs, ys[..n].to_vec(), OutputKind::Gaussian, spec).unwrap();
        let params = ExpertParams { noise_var: 0.1, mean: 0.2, magnitude: 0.5, length_scales: vec![1.5] };
        let (alpha_theta, alpha_psi) = (1.0, 0.7);
        let priors = PriorConfig {
            noise_var: ScalarPrior::fixed(params.noise_var),
            mean: ScalarPrior::fixed(params.mean),
            magnitude: ScalarPrior::fixed(params.magnitude),
            length_scales: vec![ScalarPrior::fixed(params.length_scales[0])],
            alpha_theta: ScalarPrior::fixed(alpha_theta),
            alpha_psi: ScalarPrior::fixed(alpha_psi),
            hmc: HmcSettings::default(),
            new_cluster_candidates: 3,
            mc_samples: 100,
        };
        FrozenProblem { data, priors, params, alpha_theta, alpha_psi }
    }

    fn ln_likelihood(&self, zy: &[usize], zx: &[usize], nested: bool) -> f64 {
        let n = zy.len();
        let k = zy.iter().max().unwrap() + 1;
        let mut ll = 0.0;
        for j in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| zy[i] == j).collect();
            let y: Vec<f64> = members.iter().map(|&i| self.data.outputs()[i]).collect();
            let x: Vec<Vec<f64>> = members.iter().map(|&i| self.data.row(i).to_vec()).collect();
            ll += dense_gp_log_marginal(&y, &x, &self.params);
            let kj = if nested { members.iter().map(|&i| zx[i]).max().unwrap() + 1 } else { 1 };
            for l in 0..kj {
                let cell = members.iter().filter(|&&i| !nested || zx[i] == l).map(|&i| self.data.row(i));
                let stats = SuffStats::from_rows(&self.data.input_spec, cell);
                ll += log_joint_marginal(&stats, &self.data.input_spec);
            }
        }
        ll
    }

    /// Exact posterior over nested partitions.
    pub fn edp_posterior(&self) -> HashMap<(Vec<usize>, Vec<usize>), f64> {
        let parts = nested_partitions(self.data.len());
        let lp: Vec<f64> = parts
            .iter()
            .map(|(zy, zx)| edp_prior_ln(zy, zx, self.alpha_theta, self.alpha_psi) + self.ln_likelihood(zy, zx, true))
            .collect();
        let c = log_sum_exp(&lp);
        parts.into_iter().zip(lp).map(|(p, l)| (p, (l - c).exp())).collect()
    }

    /// Exact posterior over partitions under the plain DP (x-labels all zero).
    pub fn dp_posterior(&self) -> HashMap<(Vec<usize>, Vec<usize>), f64> {
        let n = self.data.len();
        let parts = set_partitions(n);
        let lp: Vec<f64> =
            parts.iter().map(|zy| dp_prior_ln(zy, self.alpha_theta) + self.ln_likelihood(zy, zy, false)).collect();
        let c = log_sum_exp(&lp);
        parts.into_iter().zip(lp).map(|(zy, l)| ((zy, vec![0; n]), (l - c).exp())).collect()
    }

    /// Empirical distribution of the chain's nested partition.
    pub fn run(&self, schedule: Schedule, iters: usize, seed: u64) -> HashMap<(Vec<usize>, Vec<usize>), f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chain = Chain::new(&self.data, &self.priors, schedule, &mut rng).unwrap();
        let mut counts: HashMap<(Vec<usize>, Vec<usize>), f64> = HashMap::new();
        for it in 0..iters {
            chain.iterate(false, &mut rng).unwrap();
            if it % 10_000 == 0 {
                chain.check_consistency().unwrap();
            }
            let p = chain.to_state().partition;
            *counts.entry((p.zy().to_vec(), p.zx().to_vec())).or_default() += 1.0;
        }
        counts.values_mut().for_each(|c| *c /= iters as f64);
        counts
    }
}

pub fn total_variation(
    p: &HashMap<(Vec<usize>, Vec<usize>), f64>,
    q: &HashMap<(Vec<usize>, Vec<usize>), f64>,
) -> f64 {
    let mut tv = 0.0;
    for (k, &pv) in p {
        tv += (pv - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &qv) in q {
        if !p.contains_key(k) {
            tv += qv;
        }
    }
    0.5 * tv
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        // Below rounding level further bisection cannot help.
        if depth == 0 || delta.abs() <= 15.0 * tol.max(1e-15 * whole.abs()) {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    // Split the range first so narrow features are not missed.
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            rec(f, lo, hi, fa, fm, fb, simpson(fa, fm, fb, lo, hi), tol / pieces as f64, 40)
        })
        .sum()
}

/// Kolmogorov–Smirnov statistic of a sample against a continuous CDF.
pub fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// `log h(X)` for a normal-inverse-gamma input model: the mean integrated
/// analytically, the variance by quadrature in `t = log sigma^2`.
pub fn nig_joint_by_quadrature(x: &[f64], u0: f64, c: f64, a: f64, b: f64) -> f64 {
    let n = x.len() as f64;
    let s: f64 = x.iter().map(|v| v - u0).sum();
    let ss: f64 = x.iter().map(|v| (v - u0).powi(2)).sum();
    // x | sigma^2 ~ N(u0 1, sigma^2 (I + 11^T / c)).
    let q = ss - s * s / (c + n);
    let ln_f = |t: f64| {
        let s2 = t.exp();
        let ln_lik = -0.5 * n * (std::f64::consts::TAU * s2).ln() - 0.5 * (1.0 + n / c).ln() - 0.5 * q / s2;
        let ln_prior = a * b.ln() - ln_gamma(a) - (a + 1.0) * t - b / s2;
        ln_lik + ln_prior + t
    };
    let mode = ((b + 0.5 * q) / (a + 0.5 * n)).ln();
    let peak = ln_f(mode);
    let total = integrate(&|t| (ln_f(t) - peak).exp(), mode - 40.0, mode + 40.0, 1e-14);
    peak + total.ln()
}
