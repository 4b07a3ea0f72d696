//! Mixture of two damped cosines with correlated Gaussian inputs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, InputFamily, OutputKind};
use crate::special::normal_ln_pdf;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampedCosineConfig {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// `(beta_{c,0}, beta_{c,1})` per component.
    pub beta: [(f64, f64); 2],
    /// Noise standard deviations.
    pub sigma: [f64; 2],
    pub tau: [f64; 2],
    pub mu: [f64; 2],
    pub input_mean: f64,
    pub input_var: f64,
    /// Covariance between inputs `2..D`.
    pub input_cov: f64,
}

impl DampedCosineConfig {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        DampedCosineConfig {
            n,
            d,
            seed,
            beta: [(0.1, 0.6), (-0.1, 0.4)],
            sigma: [0.15, 0.05],
            tau: [0.8, 0.8],
            mu: [3.0, 5.0],
            input_mean: 4.0,
            input_var: 4.0,
            input_cov: 3.5,
        }
    }

    /// Input covariance: the first input is independent of the others.
    pub fn input_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |h, l| {
            if h == l {
                self.input_var
            } else if h == 0 || l == 0 {
                0.0
            } else {
                self.input_cov
            }
        })
    }

    pub fn truth(&self) -> TrueDensity {
        TrueDensity { beta: self.beta, sigma: self.sigma, tau: self.tau, mu: self.mu }
    }
}

/// The generating conditional density of `y` given `x_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueDensity {
    pub beta: [(f64, f64); 2],
    pub sigma: [f64; 2],
    pub tau: [f64; 2],
    pub mu: [f64; 2],
}

impl TrueDensity {
    /// Probability of the first component at `x1`.
    pub fn weight(&self, x1: f64) -> f64 {
        let bump = |c: usize| self.tau[c].ln() - 0.5 * self.tau[c] * (x1 - self.mu[c]).powi(2);
        let (a, b) = (bump(0), bump(1));
        1.0 / (1.0 + (b - a).exp())
    }

    /// Mean of component `c` at `x1`.
    pub fn component_mean(&self, c: usize, x1: f64) -> f64 {
        let (b0, b1) = self.beta[c];
        (b0 * x1).exp() * (b1 * std::f64::consts::PI * x1).cos()
    }

    pub fn density(&self, y: f64, x1: f64) -> f64 {
        let w = self.weight(x1);
        let s2 = |c: usize| self.sigma[c] * self.sigma[c];
        w * normal_ln_pdf(y, self.component_mean(0, x1), s2(0)).exp()
            + (1.0 - w) * normal_ln_pdf(y, self.component_mean(1, x1), s2(1)).exp()
    }

    pub fn mean(&self, x1: f64) -> f64 {
        let w = self.weight(x1);
        w * self.component_mean(0, x1) + (1.0 - w) * self.component_mean(1, x1)
    }

    /// Draws a component label (0 or 1) and an output.
    pub fn sample<R: Rng + ?Sized>(&self, x1: f64, rng: &mut R) -> (usize, f64) {
        let c = if rng.random::<f64>() < self.weight(x1) { 0 } else { 1 };
        let z: f64 = StandardNormal.sample(rng);
        (c, self.component_mean(c, x1) + self.sigma[c] * z)
    }
}

/// Simulated dataset with its true component labels.
#[derive(Clone, Debug)]
pub struct Simulated {
    pub data: Dataset,
    pub labels: Vec<usize>,
    pub truth: TrueDensity,
}

/// Draws `n` inputs from the configured multivariate normal.
pub fn sample_inputs<R: Rng + ?Sized>(cfg: &DampedCosineConfig, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let chol = cfg
        .input_covariance()
        .cholesky()
        .ok_or_else(|| Error::Config("input covariance is not positive definite".into()))?;
    let l = chol.l();
    Ok((0..n)
        .map(|_| {
            let z = DVector::from_iterator(cfg.d, (0..cfg.d).map(|_| StandardNormal.sample(rng)));
            (&l * z).iter().map(|v| v + cfg.input_mean).collect()
        })
        .collect())
}

/// Generates the benchmark dataset. Input hyperparameters use the sample
/// mean of each dimension as the NIG location.
pub fn generate(cfg: &DampedCosineConfig) -> Result<Simulated> {
    if cfg.n == 0 || cfg.d == 0 || cfg.sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Config(format!("invalid damped-cosine configuration: {cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let truth = cfg.truth();
    let inputs = sample_inputs(cfg, cfg.n, &mut rng)?;
    let mut labels = Vec::with_capacity(cfg.n);
    let mut outputs = Vec::with_capacity(cfg.n);
    for x in &inputs {
        let (c, y) = truth.sample(x[0], &mut rng);
        labels.push(c);
        outputs.push(y);
    }
    let mut means = vec![0.0; cfg.d];
    for x in &inputs {
        for (m, v) in means.iter_mut().zip(x) {
            *m += v / cfg.n as f64;
        }
    }
    let spec = means.into_iter().map(InputFamily::default_gaussian).collect();
    let data = Dataset::new(inputs, outputs, OutputKind::Gaussian, spec)?;
    Ok(Simulated { data, labels, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_at_three() {
        let t = DampedCosineConfig::new(1, 1, 0).truth();
        let expected = 1.0 / (1.0 + (-1.6f64).exp());
        assert!((t.weight(3.0) - expected).abs() < 1e-15);
        assert!((t.weight(3.0) - 0.832).abs() < 1e-3);
    }

    #[test]
    fn component_mean_at_zero() {
        let t = DampedCosineConfig::new(1, 1, 0).truth();
        assert_eq!(t.component_mean(0, 0.0), 1.0);
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate(&DampedCosineConfig::new(20, 3, 9)).unwrap();
        let b = generate(&DampedCosineConfig::new(20, 3, 9)).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.labels, b.labels);
    }
}
