//! Gaussian-process experts with constant mean and ARD squared-exponential
//! kernel: marginal likelihoods, conditionals, predictions and gradients.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::model::{ExpertParams, PriorConfig};
use crate::special::LN_2PI;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// `s_f^2 exp(-1/2 sum_d (x_d - x'_d)^2 / l_d^2)`.
pub fn kernel(x: &[f64], y: &[f64], p: &ExpertParams) -> f64 {
    let mut s = 0.0;
    for ((a, b), l) in x.iter().zip(y).zip(&p.length_scales) {
        let d = (a - b) / l;
        s += d * d;
    }
    p.magnitude * (-0.5 * s).exp()
}

/// `sigma^2 I + K` over the given inputs.
pub fn covariance(xs: &[&[f64]], p: &ExpertParams) -> DMatrix<f64> {
    let n = xs.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = p.magnitude + p.noise_var;
        for j in 0..i {
            let k = kernel(xs[i], xs[j], p);
            c[(i, j)] = k;
            c[(j, i)] = k;
        }
    }
    c
}

/// Kernel matrix between two input sets (no noise).
pub fn cross_kernel(xs: &[&[f64]], ys: &[&[f64]], p: &ExpertParams) -> DMatrix<f64> {
    DMatrix::from_fn(xs.len(), ys.len(), |i, j| kernel(xs[i], ys[j], p))
}

/// Cholesky factorisation with escalating diagonal jitter.
///
/// Tries the plain matrix first, then adds `1e-10 * mean(diag)` growing by
/// a factor of ten up to `1e-4 * mean(diag)`. Returns the factor and the
/// jitter used.
pub fn cholesky_jitter(m: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite { jitter: 0.0 });
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, 0.0));
    }
    let n = m.nrows();
    let scale = m.diagonal().mean().abs().max(f64::MIN_POSITIVE);
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut mj = m.clone();
        for i in 0..n {
            mj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(mj) {
            return Ok((c, jitter));
        }
        rel *= 10.0;
    }
    Err(Error::NotPositiveDefinite { jitter: JITTER_MAX * scale })
}

fn ln_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

fn centered(y: &[f64], beta0: f64) -> DVector<f64> {
    DVector::from_iterator(y.len(), y.iter().map(|v| v - beta0))
}

/// Log-density of `r ~ N(0, C)` given the Cholesky factor of `C`.
fn gaussian_ln_pdf(r: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let alpha = chol.solve(r);
    -0.5 * (r.dot(&alpha) + ln_det(chol) + r.len() as f64 * LN_2PI)
}

/// `log N(y | beta_0 1, sigma^2 I + K)`.
pub fn log_marginal(y: &[f64], xs: &[&[f64]], p: &ExpertParams) -> Result<f64> {
    if y.is_empty() {
        return Ok(0.0);
    }
    let (chol, _) = cholesky_jitter(covariance(xs, p))?;
    Ok(gaussian_ln_pdf(&centered(y, p.mean), &chol))
}

/// Log-density of a block of outputs conditional on other outputs of the
/// same expert, under the joint GP-marginal covariance.
pub fn log_conditional_block(
    y_block: &[f64],
    x_block: &[&[f64]],
    y_other: &[f64],
    x_other: &[&[f64]],
    p: &ExpertParams,
) -> Result<f64> {
    if y_other.is_empty() {
        return log_marginal(y_block, x_block, p);
    }
    let (chol_o, _) = cholesky_jitter(covariance(x_other, p))?;
    let k_ob = cross_kernel(x_other, x_block, p);
    let alpha_o = chol_o.solve(&centered(y_other, p.mean));
    let v = chol_o.solve(&k_ob);
    let mut cov = covariance(x_block, p) - k_ob.transpose() * v;
    cov = (&cov + cov.transpose()) * 0.5;
    let mean = k_ob.transpose() * alpha_o;
    let r = centered(y_block, p.mean) - mean;
    let (chol_b, _) = cholesky_jitter(cov)?;
    Ok(gaussian_ln_pdf(&r, &chol_b))
}

/// A GP expert conditioned on its members, reusable for many predictions.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    params: ExpertParams,
    xs: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    ln_marginal: f64,
}

impl GpPosterior {
    pub fn new(y: &[f64], xs: &[&[f64]], p: &ExpertParams) -> Result<Self> {
        let (chol, _) = cholesky_jitter(covariance(xs, p))?;
        let r = centered(y, p.mean);
        let alpha = chol.solve(&r);
        let ln_marginal = -0.5 * (r.dot(&alpha) + ln_det(&chol) + r.len() as f64 * LN_2PI);
        Ok(GpPosterior {
            params: p.clone(),
            xs: xs.iter().map(|x| x.to_vec()).collect(),
            chol,
            alpha,
            ln_marginal,
        })
    }

    pub fn log_marginal(&self) -> f64 {
        self.ln_marginal
    }

    pub fn params(&self) -> &ExpertParams {
        &self.params
    }

    /// Predictive mean of the latent function and predictive variance of a
    /// new output (`K_hat(x*, x*) + sigma^2`).
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(self.xs.len(), self.xs.iter().map(|xi| kernel(xi, x, &self.params)));
        let mean = self.params.mean + k.dot(&self.alpha);
        let v = self.chol.l_dirty().solve_lower_triangular(&k).expect("triangular solve");
        let f_var = (self.params.magnitude - v.norm_squared()).max(0.0);
        (mean, f_var + self.params.noise_var)
    }
}

/// GP predictive mean and variance (including noise) at `x_star`.
pub fn predict(x_star: &[f64], y: &[f64], xs: &[&[f64]], p: &ExpertParams) -> Result<(f64, f64)> {
    Ok(GpPosterior::new(y, xs, p)?.predict(x_star))
}

/// Squared per-dimension input differences of one cluster, precomputed for
/// repeated gradient evaluations.
#[derive(Clone, Debug)]
pub struct SqDiffs {
    per_dim: Vec<DMatrix<f64>>,
}

impl SqDiffs {
    pub fn new(xs: &[&[f64]]) -> Self {
        let n = xs.len();
        let d = xs.first().map_or(0, |x| x.len());
        let per_dim = (0..d)
            .map(|k| DMatrix::from_fn(n, n, |i, j| (xs[i][k] - xs[j][k]).powi(2)))
            .collect();
        SqDiffs { per_dim }
    }

    pub fn len(&self) -> usize {
        self.per_dim.first().map_or(0, |m| m.nrows())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Log marginal likelihood plus log prior (in unconstrained coordinates,
/// Jacobian included) and its gradient with respect to
/// `(log sigma^2, beta_0, log s_f^2, log l_1..l_D)`.
pub fn log_posterior_grad_with(
    sq: &SqDiffs,
    y: &[f64],
    p: &ExpertParams,
    priors: &PriorConfig,
) -> Result<(f64, Vec<f64>)> {
    let n = y.len();
    let d = p.dim();
    let mut k = DMatrix::from_element(n, n, 0.0);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for (m, l) in sq.per_dim.iter().zip(&p.length_scales) {
                s += m[(i, j)] / (l * l);
            }
            let v = p.magnitude * (-0.5 * s).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let mut c = k.clone();
    for i in 0..n {
        c[(i, i)] += p.noise_var;
    }
    let (chol, _) = cholesky_jitter(c)?;
    let r = centered(y, p.mean);
    let alpha = chol.solve(&r);
    let mut value = -0.5 * (r.dot(&alpha) + ln_det(&chol) + n as f64 * LN_2PI);

    // W = alpha alpha^T - C^{-1}; d log N / d u = 1/2 tr(W dC/du).
    let mut w = chol.inverse();
    w.neg_mut();
    w.ger(1.0, &alpha, &alpha, 1.0);

    let mut grad = vec![0.0; 3 + d];
    grad[0] = 0.5 * p.noise_var * w.trace();
    grad[1] = alpha.sum();
    let wk = w.component_mul(&k);
    grad[2] = 0.5 * wk.sum();
    for (dd, (m, l)) in sq.per_dim.iter().zip(&p.length_scales).enumerate() {
        grad[3 + dd] = 0.5 * wk.dot(m) / (l * l);
    }

    let u = p.to_unconstrained();
    for (i, prior) in priors.coordinate_priors().into_iter().enumerate() {
        let (lp, g) = prior.ln_density_unconstrained(u[i]);
        value += lp;
        grad[i] += g;
    }
    Ok((value, grad))
}

/// Gradient of the log posterior of one expert's parameters over the
/// unconstrained coordinates; see [`log_posterior_grad_with`].
pub fn grad_log_posterior(y: &[f64], xs: &[&[f64]], p: &ExpertParams, priors: &PriorConfig) -> Result<Vec<f64>> {
    Ok(log_posterior_grad_with(&SqDiffs::new(xs), y, p, priors)?.1)
}
