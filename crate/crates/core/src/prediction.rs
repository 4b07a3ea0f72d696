//! Posterior predictive weights, densities, means, ordinal probabilities
//! and subset-of-inputs predictions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::input_models::{sample_predictive_dim, DimStats, SuffStats, ln_predictive_dim};
use crate::model::{Dataset, ExpertParams, OutputKind, PriorConfig, SamplerState};
use crate::sampler::{Mode, PosteriorDraws};
use crate::special::{log_sum_exp, normal_ln_pdf, std_normal_cdf};

/// Unnormalised predictive weights of one draw, in log-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawWeights {
    pub ln_new: f64,
    pub ln_clusters: Vec<f64>,
}

/// Mixture weights over draws and clusters at one test input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveWeights {
    pub draws: Vec<DrawWeights>,
    /// Log of the normaliser `C`.
    pub ln_norm: f64,
}

impl PredictiveWeights {
    fn from_draws(draws: Vec<DrawWeights>) -> Self {
        let all: Vec<f64> = draws.iter().flat_map(|d| std::iter::once(d.ln_new).chain(d.ln_clusters.iter().copied())).collect();
        let ln_norm = log_sum_exp(&all);
        PredictiveWeights { draws, ln_norm }
    }

    /// Normalised weight of the new-cluster term of draw `m`.
    pub fn new_weight(&self, m: usize) -> f64 {
        (self.draws[m].ln_new - self.ln_norm).exp()
    }

    pub fn cluster_weight(&self, m: usize, j: usize) -> f64 {
        (self.draws[m].ln_clusters[j] - self.ln_norm).exp()
    }

    pub fn total(&self) -> f64 {
        (0..self.draws.len())
            .map(|m| self.new_weight(m) + (0..self.draws[m].ln_clusters.len()).map(|j| self.cluster_weight(m, j)).sum::<f64>())
            .sum()
    }
}

/// Predictive distribution of the latent output at one test input: a
/// Gaussian mixture over draws and clusters plus the new-cluster term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    /// `(weight, mean, variance)` of existing-cluster components.
    pub components: Vec<(f64, f64, f64)>,
    /// Total weight of the new-cluster term.
    pub new_weight: f64,
}

/// Prior Monte Carlo sample defining the new-cluster marginal
/// `h(y*) ~ (1/S) sum_s N(y* | beta_0^s, sigma^2_s + s_f^2_s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewClusterSample {
    pub params: Vec<ExpertParams>,
    /// Prior mean of `beta_0`.
    pub mean_beta: f64,
}

impl NewClusterSample {
    pub fn draw(priors: &PriorConfig, s: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NewClusterSample {
            params: (0..s).map(|_| priors.sample_expert(&mut rng)).collect(),
            mean_beta: priors.mean.mean(),
        }
    }

    fn components(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.params.iter().map(|p| (p.mean, p.noise_var + p.magnitude))
    }

    pub fn density(&self, y: f64) -> f64 {
        let s = self.params.len() as f64;
        self.components().map(|(m, v)| normal_ln_pdf(y, m, v).exp()).sum::<f64>() / s
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let s = self.params.len() as f64;
        self.components().map(|(m, v)| std_normal_cdf((y - m) / v.sqrt())).sum::<f64>() / s
    }
}

/// Probability of each ordinal category under `N(mean, var)`.
pub fn ordinal_probs(mean: f64, var: f64, cutoffs: &[f64]) -> Vec<f64> {
    let sd = var.sqrt();
    let mut cdf = Vec::with_capacity(cutoffs.len() + 2);
    cdf.push(0.0);
    cdf.extend(cutoffs.iter().map(|c| std_normal_cdf((c - mean) / sd)));
    cdf.push(1.0);
    cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect()
}

/// A point prediction with a 95% credible region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    /// Components of the highest-density region (Gaussian outputs).
    pub region: Vec<(f64, f64)>,
    /// Category probabilities (ordinal outputs).
    pub probs: Option<Vec<f64>>,
}

impl Prediction {
    /// Whether `y` lies in the credible region (the union of intervals for
    /// Gaussian outputs, the category interval for ordinal outputs).
    pub fn covers(&self, y: f64) -> bool {
        if self.probs.is_some() {
            y >= self.lower && y <= self.upper
        } else {
            self.region.iter().any(|&(a, b)| y >= a && y <= b)
        }
    }
}

impl Mixture {
    pub fn density(&self, y: f64, new: &NewClusterSample) -> f64 {
        let mut f: f64 = self.components.iter().map(|&(w, m, v)| w * normal_ln_pdf(y, m, v).exp()).sum();
        if self.new_weight > 0.0 {
            f += self.new_weight * new.density(y);
        }
        f
    }

    pub fn cdf(&self, y: f64, new: &NewClusterSample) -> f64 {
        let mut f: f64 = self.components.iter().map(|&(w, m, v)| w * std_normal_cdf((y - m) / v.sqrt())).sum();
        if self.new_weight > 0.0 {
            f += self.new_weight * new.cdf(y);
        }
        f
    }

    /// Predictive mean; the new-cluster term contributes the prior mean of `beta_0`.
    pub fn mean(&self, new: &NewClusterSample) -> f64 {
        self.components.iter().map(|&(w, m, _)| w * m).sum::<f64>() + self.new_weight * new.mean_beta
    }

    pub fn ordinal(&self, cutoffs: &[f64], new: &NewClusterSample) -> Vec<f64> {
        let mut probs = vec![0.0; cutoffs.len() + 1];
        for &(w, m, v) in &self.components {
            for (p, q) in probs.iter_mut().zip(ordinal_probs(m, v, cutoffs)) {
                *p += w * q;
            }
        }
        if self.new_weight > 0.0 {
            let s = new.params.len() as f64;
            for (m, v) in new.components() {
                for (p, q) in probs.iter_mut().zip(ordinal_probs(m, v, cutoffs)) {
                    *p += self.new_weight * q / s;
                }
            }
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        probs
    }

    /// Highest-density region of mass `level`, found on a density grid.
    /// Returns the disjoint intervals in increasing order.
    pub fn hpd(&self, level: f64, new: &NewClusterSample, grid: usize) -> Vec<(f64, f64)> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut spread = |m: f64, v: f64| {
            let s = v.sqrt();
            lo = lo.min(m - 6.0 * s);
            hi = hi.max(m + 6.0 * s);
        };
        for &(w, m, v) in &self.components {
            if w > 1e-12 {
                spread(m, v);
            }
        }
        if self.new_weight > 1e-12 {
            for (m, v) in new.components() {
                spread(m, v);
            }
        }
        let step = (hi - lo) / (grid - 1) as f64;
        let mut dens = vec![0.0; grid];
        let mut add = |w: f64, m: f64, v: f64| {
            let s = v.sqrt();
            let a = (((m - 8.0 * s - lo) / step).floor().max(0.0)) as usize;
            let b = ((((m + 8.0 * s - lo) / step).ceil()) as usize).min(grid - 1);
            for (i, d) in dens.iter_mut().enumerate().take(b + 1).skip(a) {
                *d += w * normal_ln_pdf(lo + i as f64 * step, m, v).exp();
            }
        };
        for &(w, m, v) in &self.components {
            add(w, m, v);
        }
        if self.new_weight > 0.0 {
            let s = new.params.len() as f64;
            for (m, v) in new.components() {
                add(self.new_weight / s, m, v);
            }
        }
        let total: f64 = dens.iter().sum::<f64>() * step;
        let mut order: Vec<usize> = (0..grid).collect();
        order.sort_by(|&a, &b| dens[b].total_cmp(&dens[a]));
        let mut mass = 0.0;
        let mut threshold = 0.0;
        for &i in &order {
            mass += dens[i] * step / total;
            threshold = dens[i];
            if mass >= level {
                break;
            }
        }
        let mut region = Vec::new();
        let mut start: Option<usize> = None;
        for (i, &d) in dens.iter().enumerate() {
            let inside = d >= threshold;
            match (inside, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    region.push((lo + (s as f64 - 0.5).max(0.0) * step, lo + (i as f64 - 0.5) * step));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            region.push((lo + (s as f64 - 0.5).max(0.0) * step, hi));
        }
        region
    }
}

/// Settings for prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictSettings {
    /// Prior Monte Carlo samples for the new-cluster marginal (`S`).
    pub mc_samples: usize,
    /// Completions per subset prediction (`R`).
    pub completions: usize,
    pub seed: u64,
    /// Credible level of the reported intervals.
    pub level: f64,
    /// Grid size for highest-density regions.
    pub grid: usize,
}

impl Default for PredictSettings {
    fn default() -> Self {
        PredictSettings { mc_samples: 1000, completions: 200, seed: 0, level: 0.95, grid: 1000 }
    }
}

/// Sufficient statistics and sizes of one draw, for input-dependent weights.
struct DrawInputs {
    alpha_theta: f64,
    n: usize,
    /// Per y-cluster: `(N_j, alpha_psi, stats of each x-cluster)`.
    clusters: Vec<(usize, f64, Vec<SuffStats>)>,
}

impl DrawInputs {
    fn new(data: &Dataset, s: &SamplerState) -> Self {
        let p = &s.partition;
        let spec = &data.input_spec;
        let mut clusters: Vec<(usize, f64, Vec<SuffStats>)> = p
            .counts()
            .x_sizes
            .iter()
            .zip(&s.conc.alpha_psi)
            .map(|(xs, &a)| (0, a, xs.iter().map(|_| SuffStats::empty(spec)).collect()))
            .collect();
        for i in 0..data.len() {
            let c = &mut clusters[p.zy()[i]];
            c.0 += 1;
            c.2[p.zx()[i]].add(data.row(i));
        }
        DrawInputs { alpha_theta: s.conc.alpha_theta, n: data.len(), clusters }
    }

    /// Log weights given per-cluster input log-likelihood functions:
    /// `ln_h0` is the prior marginal and `ln_hl(j, l)` the x-cluster predictive.
    fn weights(&self, dp: bool, ln_h0: f64, ln_hl: impl Fn(usize, usize) -> f64) -> (DrawWeights, Vec<Vec<f64>>) {
        let ln_denom = (self.alpha_theta + self.n as f64).ln();
        let ln_new = self.alpha_theta.ln() - ln_denom + ln_h0;
        let mut ln_clusters = Vec::with_capacity(self.clusters.len());
        // Per cluster: log weights of [new x-cluster, existing x-clusters...].
        let mut parts = Vec::with_capacity(self.clusters.len());
        for (j, (nj, a, xs)) in self.clusters.iter().enumerate() {
            let nj = *nj as f64;
            let mut terms = Vec::with_capacity(xs.len() + 1);
            if dp {
                terms.push(f64::NEG_INFINITY);
                terms.push(nj.ln() - ln_denom + ln_hl(j, 0));
            } else {
                let ln_inner = (a + nj).ln();
                terms.push(nj.ln() - ln_denom + a.ln() - ln_inner + ln_h0);
                for (l, x) in xs.iter().enumerate() {
                    terms.push(nj.ln() - ln_denom + (x.count() as f64).ln() - ln_inner + ln_hl(j, l));
                }
            }
            ln_clusters.push(log_sum_exp(&terms));
            parts.push(terms);
        }
        (DrawWeights { ln_new, ln_clusters }, parts)
    }
}

/// Posterior predictive engine over a set of retained draws.
pub struct Predictor<'a> {
    data: &'a Dataset,
    draws: &'a [SamplerState],
    inputs: Vec<DrawInputs>,
    dp: bool,
    new: NewClusterSample,
    settings: PredictSettings,
}

impl<'a> Predictor<'a> {
    pub fn new(data: &'a Dataset, draws: &'a PosteriorDraws, settings: PredictSettings) -> Result<Self> {
        let dp = draws.settings.schedule.mode == Mode::Dp;
        Self::from_states(data, &draws.states, &draws.priors, dp, settings)
    }

    pub fn from_states(
        data: &'a Dataset,
        draws: &'a [SamplerState],
        priors: &PriorConfig,
        dp: bool,
        settings: PredictSettings,
    ) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Config("no posterior draws to predict from".into()));
        }
        if settings.mc_samples == 0 || settings.completions == 0 {
            return Err(Error::Config("mc_samples and completions must be positive".into()));
        }
        let priors = priors.effective_for(&data.output_kind);
        let inputs = draws.iter().map(|s| DrawInputs::new(data, s)).collect();
        let new = NewClusterSample::draw(&priors, settings.mc_samples, settings.seed);
        Ok(Predictor { data, draws, inputs, dp, new, settings })
    }

    pub fn new_cluster_sample(&self) -> &NewClusterSample {
        &self.new
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.data.dim() {
            return Err(Error::SizeMismatch(x.len(), self.data.dim()));
        }
        for (v, f) in x.iter().zip(&self.data.input_spec) {
            f.check_value(*v)?;
        }
        Ok(())
    }

    /// Mixture weights at `x_star`.
    pub fn weights(&self, x_star: &[f64]) -> Result<PredictiveWeights> {
        self.check_input(x_star)?;
        let spec = &self.data.input_spec;
        let ln_h0 = SuffStats::empty(spec).ln_predictive(x_star, spec);
        let draws = self
            .inputs
            .iter()
            .map(|di| di.weights(self.dp, ln_h0, |j, l| di.clusters[j].2[l].ln_predictive(x_star, spec)).0)
            .collect();
        Ok(PredictiveWeights::from_draws(draws))
    }

    fn gp_of(&self, s: &SamplerState, j: usize) -> Result<GpPosterior> {
        let members: Vec<usize> = (0..self.data.len()).filter(|&i| s.partition.zy()[i] == j).collect();
        let y: Vec<f64> = members.iter().map(|&i| s.latent[i]).collect();
        let rows: Vec<&[f64]> = members.iter().map(|&i| self.data.row(i)).collect();
        GpPosterior::new(&y, &rows, &s.experts[j])
    }

    /// Predictive mixtures at many test inputs (draw-major, so each expert
    /// is factorised once).
    pub fn mixtures(&self, xs: &[Vec<f64>]) -> Result<Vec<Mixture>> {
        let weights: Vec<PredictiveWeights> = xs.iter().map(|x| self.weights(x)).collect::<Result<_>>()?;
        let mut out: Vec<Mixture> = weights
            .iter()
            .map(|w| Mixture { components: Vec::new(), new_weight: (0..w.draws.len()).map(|m| w.new_weight(m)).sum() })
            .collect();
        for (m, s) in self.draws.iter().enumerate() {
            for j in 0..s.partition.k() {
                let gp = self.gp_of(s, j)?;
                for ((x, w), mix) in xs.iter().zip(&weights).zip(out.iter_mut()) {
                    let (mean, var) = gp.predict(x);
                    mix.components.push((w.cluster_weight(m, j), mean, var));
                }
            }
        }
        Ok(out)
    }

    pub fn mixture(&self, x_star: &[f64]) -> Result<Mixture> {
        Ok(self.mixtures(&[x_star.to_vec()])?.remove(0))
    }

    /// Predictive mean of the output at `x_star` (Gaussian outputs).
    pub fn predictive_mean(&self, x_star: &[f64]) -> Result<f64> {
        self.require_gaussian()?;
        Ok(self.mixture(x_star)?.mean(&self.new))
    }

    /// Predictive density of `y_star` at `x_star` (Gaussian outputs).
    pub fn predictive_density(&self, y_star: f64, x_star: &[f64]) -> Result<f64> {
        self.require_gaussian()?;
        Ok(self.mixture(x_star)?.density(y_star, &self.new))
    }

    /// Category probabilities at `x_star` (ordinal outputs).
    pub fn predictive_ordinal(&self, x_star: &[f64]) -> Result<Vec<f64>> {
        let cutoffs = self.cutoffs()?;
        Ok(self.mixture(x_star)?.ordinal(cutoffs, &self.new))
    }

    fn require_gaussian(&self) -> Result<()> {
        if self.data.output_kind.is_gaussian() {
            Ok(())
        } else {
            Err(Error::Config("this prediction needs Gaussian outputs".into()))
        }
    }

    fn cutoffs(&self) -> Result<&[f64]> {
        match &self.data.output_kind {
            OutputKind::OrdinalProbit { cutoffs } => Ok(cutoffs),
            OutputKind::Gaussian => Err(Error::Config("this prediction needs ordinal outputs".into())),
        }
    }

    /// Point predictions with credible regions: the predictive mean and a
    /// highest-density region for Gaussian outputs; the posterior median
    /// category and a central interval for ordinal outputs.
    pub fn predict(&self, xs: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        let mixtures = self.mixtures(xs)?;
        let level = self.settings.level;
        Ok(mixtures
            .iter()
            .map(|mix| match &self.data.output_kind {
                OutputKind::Gaussian => {
                    let region = mix.hpd(level, &self.new, self.settings.grid);
                    Prediction {
                        point: mix.mean(&self.new),
                        lower: region.first().map_or(f64::NAN, |r| r.0),
                        upper: region.last().map_or(f64::NAN, |r| r.1),
                        region,
                        probs: None,
                    }
                }
                OutputKind::OrdinalProbit { cutoffs } => {
                    let probs = mix.ordinal(cutoffs, &self.new);
                    let quantile = |q: f64| {
                        let mut c = 0.0;
                        for (l, p) in probs.iter().enumerate() {
                            c += p;
                            if c >= q - 1e-12 {
                                return l as f64;
                            }
                        }
                        (probs.len() - 1) as f64
                    };
                    let tail = 0.5 * (1.0 - level);
                    Prediction {
                        point: quantile(0.5),
                        lower: quantile(tail),
                        upper: quantile(1.0 - tail),
                        region: Vec::new(),
                        probs: Some(probs),
                    }
                }
            })
            .collect())
    }

    /// Predictive mean given only input dimension `d` at `x_d`, averaging the
    /// GP means over `R` completions of the remaining inputs drawn from the
    /// input-model predictives (Gaussian outputs).
    pub fn predict_subset(&self, x_d: f64, d: usize) -> Result<f64> {
        self.require_gaussian()?;
        if d >= self.data.dim() {
            return Err(Error::Config(format!("input dimension {d} out of range")));
        }
        let spec = &self.data.input_spec;
        spec[d].check_value(x_d)?;
        let r = self.settings.completions;
        let mut rng = ChaCha8Rng::seed_from_u64(self.settings.seed ^ 0x5eed);
        let empty = SuffStats::empty(spec);
        let (_, empty_d) = empty.dim(d);
        let ln_h0 = ln_predictive_dim(x_d, 0, empty_d, &spec[d]);

        let mut ln_terms = Vec::new();
        let mut means = Vec::new();
        let complete = |n: usize, stats: &[DimStats], rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..spec.len())
                .map(|dd| if dd == d { x_d } else { sample_predictive_dim(n, &stats[dd], &spec[dd], rng) })
                .collect()
        };
        for (s, di) in self.draws.iter().zip(&self.inputs) {
            let (w, parts) = di.weights(self.dp, ln_h0, |j, l| {
                let (n, st) = di.clusters[j].2[l].dim(d);
                ln_predictive_dim(x_d, n, st, &spec[d])
            });
            ln_terms.push(w.ln_new);
            means.push(self.new.mean_beta);
            for (j, part) in parts.iter().enumerate() {
                let gp = self.gp_of(s, j)?;
                for (t, &lw) in part.iter().enumerate() {
                    if lw == f64::NEG_INFINITY {
                        continue;
                    }
                    // t == 0: new x-cluster, completions from the prior predictive.
                    let (n, stats) = if t == 0 {
                        (0, empty.dims())
                    } else {
                        let st = &di.clusters[j].2[t - 1];
                        (st.count(), st.dims())
                    };
                    let avg = if spec.len() == 1 {
                        gp.predict(&[x_d]).0
                    } else {
                        (0..r).map(|_| gp.predict(&complete(n, stats, &mut rng)).0).sum::<f64>() / r as f64
                    };
                    ln_terms.push(lw);
                    means.push(avg);
                }
            }
        }
        let ln_c = log_sum_exp(&ln_terms);
        Ok(ln_terms.iter().zip(&means).map(|(lw, m)| (lw - ln_c).exp() * m).sum())
    }
}
