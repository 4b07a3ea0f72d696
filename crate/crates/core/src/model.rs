//! Domain types: datasets, nested partitions, expert parameters, priors and
//! the sampler state exchanged between modules.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How observed outputs relate to the latent Gaussian outputs of the experts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputKind {
    /// Real-valued outputs; latent outputs are the observations themselves.
    Gaussian,
    /// Ordered categories `0..=L` with cutoffs `eps_0 = 0 < eps_1 < ... < eps_{L-1}`.
    OrdinalProbit { cutoffs: Vec<f64> },
}

impl OutputKind {
    /// Ordinal outputs with `levels = L` and unit-spaced cutoffs `eps_l = l`.
    pub fn ordinal_unit(levels: usize) -> Self {
        OutputKind::OrdinalProbit {
            cutoffs: (0..levels).map(|l| l as f64).collect(),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, OutputKind::Gaussian)
    }

    /// Highest category `L`, or `None` for Gaussian outputs.
    pub fn levels(&self) -> Option<usize> {
        match self {
            OutputKind::Gaussian => None,
            OutputKind::OrdinalProbit { cutoffs } => Some(cutoffs.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let OutputKind::OrdinalProbit { cutoffs } = self {
            if cutoffs.is_empty() {
                return Err(Error::Config("ordinal outputs need at least one cutoff".into()));
            }
            if cutoffs[0] != 0.0 {
                return Err(Error::Config("the first ordinal cutoff must be 0".into()));
            }
            if cutoffs.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config("ordinal cutoffs must be strictly increasing".into()));
            }
        }
        Ok(())
    }

    /// Interval `(lower, upper]` of latent values compatible with category `y`.
    pub fn latent_interval(&self, y: f64) -> (f64, f64) {
        match self {
            OutputKind::Gaussian => (y, y),
            OutputKind::OrdinalProbit { cutoffs } => {
                let l = y as usize;
                let lower = if l == 0 { f64::NEG_INFINITY } else { cutoffs[l - 1] };
                let upper = if l == cutoffs.len() { f64::INFINITY } else { cutoffs[l] };
                (lower, upper)
            }
        }
    }

    /// Category implied by a latent value (the deterministic map `p(y | y~)`).
    pub fn category_of(&self, latent: f64) -> usize {
        match self {
            OutputKind::Gaussian => panic!("category_of called for Gaussian outputs"),
            OutputKind::OrdinalProbit { cutoffs } => cutoffs.iter().take_while(|&&c| latent > c).count(),
        }
    }
}

/// Conjugate exponential-family model for one input dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InputFamily {
    /// Normal likelihood with normal-inverse-gamma prior `NIG(u0, c, a, b)`.
    GaussianNig { u0: f64, c: f64, a: f64, b: f64 },
    /// Unordered categories `0..=G` with a Dirichlet prior (`gamma.len() == G + 1`).
    CategoricalDirichlet { gamma: Vec<f64> },
    /// Ordered counts `0..=trials` with a Beta prior.
    BinomialBeta { trials: u32, gamma0: f64, gamma1: f64 },
}

impl InputFamily {
    /// Normal-inverse-gamma defaults used for the simulated benchmark: `c = 1/4, a = 2, b = 1`.
    pub fn default_gaussian(u0: f64) -> Self {
        InputFamily::GaussianNig { u0, c: 0.25, a: 2.0, b: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            InputFamily::GaussianNig { u0, c, a, b } => u0.is_finite() && *c > 0.0 && *a > 0.0 && *b > 0.0,
            InputFamily::CategoricalDirichlet { gamma } => gamma.len() >= 2 && gamma.iter().all(|g| *g > 0.0),
            InputFamily::BinomialBeta { trials, gamma0, gamma1 } => *trials >= 1 && *gamma0 > 0.0 && *gamma1 > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid input family hyperparameters: {self:?}")))
        }
    }

    /// Checks that `x` lies in the support.
    pub fn check_value(&self, x: f64) -> Result<()> {
        let ok = match self {
            InputFamily::GaussianNig { .. } => x.is_finite(),
            InputFamily::CategoricalDirichlet { gamma } => {
                x.fract() == 0.0 && x >= 0.0 && (x as usize) < gamma.len()
            }
            InputFamily::BinomialBeta { trials, .. } => x.fract() == 0.0 && x >= 0.0 && x <= *trials as f64,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("value {x} outside the support of {self:?}")))
        }
    }
}

/// Observed data: an `N x D` input matrix (row-major), outputs and their types.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    d: usize,
    inputs: Vec<f64>,
    outputs: Vec<f64>,
    pub output_kind: OutputKind,
    pub input_spec: Vec<InputFamily>,
}

impl Dataset {
    pub fn new(
        inputs: Vec<Vec<f64>>,
        outputs: Vec<f64>,
        output_kind: OutputKind,
        input_spec: Vec<InputFamily>,
    ) -> Result<Self> {
        let n = inputs.len();
        if n == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        let d = input_spec.len();
        if d == 0 {
            return Err(Error::Data("dataset has no input dimensions".into()));
        }
        if outputs.len() != n {
            return Err(Error::Data(format!("{} inputs but {} outputs", n, outputs.len())));
        }
        output_kind.validate()?;
        for f in &input_spec {
            f.validate()?;
        }
        let mut flat = Vec::with_capacity(n * d);
        for (i, row) in inputs.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Data(format!("row {i} has {} values, expected {d}", row.len())));
            }
            for (x, f) in row.iter().zip(&input_spec) {
                f.check_value(*x).map_err(|e| Error::Data(format!("row {i}: {e}")))?;
            }
            flat.extend_from_slice(row);
        }
        for (i, y) in outputs.iter().enumerate() {
            let ok = match &output_kind {
                OutputKind::Gaussian => y.is_finite(),
                OutputKind::OrdinalProbit { cutoffs } => {
                    y.fract() == 0.0 && *y >= 0.0 && *y <= cutoffs.len() as f64
                }
            };
            if !ok {
                return Err(Error::Data(format!("output {y} at row {i} is invalid for {output_kind:?}")));
            }
        }
        Ok(Dataset { n, d, inputs: flat, outputs, output_kind, input_spec })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.d..(i + 1) * self.d]
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    /// Column means of the inputs.
    pub fn input_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for i in 0..self.n {
            for (mj, x) in m.iter_mut().zip(self.row(i)) {
                *mj += x;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }
}

/// Nested partition in canonical form: y-labels `0..k` numbered in order of
/// first appearance, and x-labels numbered in order of first appearance
/// within each y-cluster.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "RawPartition", into = "RawPartition")]
pub struct NestedPartition {
    zy: Vec<usize>,
    zx: Vec<usize>,
    counts: PartitionCounts,
}

#[derive(Serialize, Deserialize)]
struct RawPartition {
    zy: Vec<usize>,
    zx: Vec<usize>,
}

impl From<RawPartition> for NestedPartition {
    fn from(r: RawPartition) -> Self {
        let n = r.zy.len().min(r.zx.len());
        NestedPartition::recount_raw(&r.zy[..n], &r.zx[..n])
    }
}

impl From<NestedPartition> for RawPartition {
    fn from(p: NestedPartition) -> Self {
        RawPartition { zy: p.zy, zx: p.zx }
    }
}

/// Counts derived from the raw labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PartitionCounts {
    /// `N_j`.
    pub sizes: Vec<usize>,
    /// `N_{l|j}`; `x_sizes[j].len() == k_j`.
    pub x_sizes: Vec<Vec<usize>>,
}

impl PartitionCounts {
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn kj(&self, j: usize) -> usize {
        self.x_sizes[j].len()
    }

    /// Number of x-clusters nested in y-clusters holding more than one x-cluster.
    pub fn kx_2plus(&self) -> usize {
        self.x_sizes.iter().map(Vec::len).filter(|&k| k > 1).sum()
    }

    /// Number of y-clusters holding a single x-cluster.
    pub fn kx_1(&self) -> usize {
        self.x_sizes.iter().filter(|v| v.len() == 1).count()
    }

    /// Number of x-clusters with more than one member.
    pub fn kx_1plus(&self) -> usize {
        self.x_sizes.iter().flatten().filter(|&&s| s > 1).count()
    }
}

impl NestedPartition {
    /// Builds a partition from arbitrary labels, relabelling canonically.
    pub fn new(zy: Vec<usize>, zx: Vec<usize>) -> Result<Self> {
        if zy.len() != zx.len() {
            return Err(Error::SizeMismatch(zy.len(), zx.len()));
        }
        Ok(Self::recount_raw(&zy, &zx))
    }

    /// Single y-cluster holding a single x-cluster.
    pub fn one_cluster(n: usize) -> Self {
        Self::recount_raw(&vec![0; n], &vec![0; n])
    }

    /// Relabels canonically and recomputes every derived count.
    pub fn recount(&self) -> Self {
        Self::recount_raw(&self.zy, &self.zx)
    }

    fn recount_raw(zy: &[usize], zx: &[usize]) -> Self {
        use std::collections::HashMap;
        let mut ymap: HashMap<usize, usize> = HashMap::new();
        let mut xmaps: Vec<HashMap<usize, usize>> = Vec::new();
        let mut counts = PartitionCounts::default();
        let mut new_zy = Vec::with_capacity(zy.len());
        let mut new_zx = Vec::with_capacity(zy.len());
        for (&y, &x) in zy.iter().zip(zx) {
            let next = ymap.len();
            let j = *ymap.entry(y).or_insert(next);
            if j == counts.sizes.len() {
                counts.sizes.push(0);
                counts.x_sizes.push(Vec::new());
                xmaps.push(HashMap::new());
            }
            let next = xmaps[j].len();
            let l = *xmaps[j].entry(x).or_insert(next);
            if l == counts.x_sizes[j].len() {
                counts.x_sizes[j].push(0);
            }
            counts.sizes[j] += 1;
            counts.x_sizes[j][l] += 1;
            new_zy.push(j);
            new_zx.push(l);
        }
        NestedPartition { zy: new_zy, zx: new_zx, counts }
    }

    pub fn len(&self) -> usize {
        self.zy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zy.is_empty()
    }

    pub fn zy(&self) -> &[usize] {
        &self.zy
    }

    pub fn zx(&self) -> &[usize] {
        &self.zx
    }

    pub fn counts(&self) -> &PartitionCounts {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.counts.k()
    }

    /// Flat labelling of the joint `(y, x)` cells, canonical.
    pub fn joint_labels(&self) -> Vec<usize> {
        let offsets: Vec<usize> = self
            .counts
            .x_sizes
            .iter()
            .scan(0, |acc, v| {
                let o = *acc;
                *acc += v.len();
                Some(o)
            })
            .collect();
        let raw: Vec<usize> = self.zy.iter().zip(&self.zx).map(|(&j, &l)| offsets[j] + l).collect();
        canonical_labels(&raw)
    }

    /// Members of every y-cluster, in index order.
    pub fn y_members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &j) in self.zy.iter().enumerate() {
            out[j].push(i);
        }
        out
    }
}

/// Relabels a flat partition in order of first appearance.
pub fn canonical_labels(z: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    z.iter()
        .map(|&v| {
            let next = map.len();
            *map.entry(v).or_insert(next)
        })
        .collect()
}

/// GP expert parameters for one y-cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertParams {
    /// Observation noise variance `sigma^2`.
    pub noise_var: f64,
    /// Constant GP mean `beta_0`.
    pub mean: f64,
    /// ARD kernel magnitude `s_f^2`.
    pub magnitude: f64,
    /// ARD length-scales, one per input dimension.
    pub length_scales: Vec<f64>,
}

impl ExpertParams {
    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn is_valid(&self) -> bool {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        pos(self.noise_var)
            && self.mean.is_finite()
            && pos(self.magnitude)
            && self.length_scales.iter().all(|&l| pos(l))
    }

    /// Unconstrained coordinates `(log sigma^2, beta_0, log s_f^2, log l_1..l_D)`.
    pub fn to_unconstrained(&self) -> Vec<f64> {
        let mut u = Vec::with_capacity(3 + self.dim());
        u.push(self.noise_var.ln());
        u.push(self.mean);
        u.push(self.magnitude.ln());
        u.extend(self.length_scales.iter().map(|l| l.ln()));
        u
    }

    pub fn from_unconstrained(u: &[f64]) -> Self {
        ExpertParams {
            noise_var: u[0].exp(),
            mean: u[1],
            magnitude: u[2].exp(),
            length_scales: u[3..].iter().map(|v| v.exp()).collect(),
        }
    }
}

/// Convention for the second parameter of gamma priors in configuration files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaConvention {
    #[default]
    ShapeRate,
    ShapeScale,
}

/// Prior on a single scalar parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ScalarPrior {
    /// Gamma with shape and rate.
    Gamma { shape: f64, rate: f64 },
    /// `log(theta) ~ N(mu, sigma2)`.
    LogNormal { mu: f64, sigma2: f64 },
    Normal { mean: f64, var: f64 },
    /// Point mass; the parameter is never updated.
    Fixed { value: f64 },
}

impl ScalarPrior {
    pub fn gamma(shape: f64, second: f64, convention: GammaConvention) -> Self {
        let rate = match convention {
            GammaConvention::ShapeRate => second,
            GammaConvention::ShapeScale => 1.0 / second,
        };
        ScalarPrior::Gamma { shape, rate }
    }

    pub fn fixed(value: f64) -> Self {
        ScalarPrior::Fixed { value }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, ScalarPrior::Fixed { .. })
    }

    pub fn validate(&self, positive: bool) -> Result<()> {
        let ok = match *self {
            ScalarPrior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && positive,
            ScalarPrior::LogNormal { mu, sigma2 } => mu.is_finite() && sigma2 > 0.0 && positive,
            ScalarPrior::Normal { mean, var } => mean.is_finite() && var > 0.0 && !positive,
            ScalarPrior::Fixed { value } => value.is_finite() && (!positive || value > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid prior {self:?} for a {} parameter",
                if positive { "positive" } else { "real" }
            )))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScalarPrior::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).unwrap().sample(rng),
            ScalarPrior::LogNormal { mu, sigma2 } => {
                Normal::new(mu, sigma2.sqrt()).unwrap().sample(rng).exp()
            }
            ScalarPrior::Normal { mean, var } => Normal::new(mean, var.sqrt()).unwrap().sample(rng),
            ScalarPrior::Fixed { value } => value,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ScalarPrior::Gamma { shape, rate } => shape / rate,
            ScalarPrior::LogNormal { mu, sigma2 } => (mu + 0.5 * sigma2).exp(),
            ScalarPrior::Normal { mean, .. } => mean,
            ScalarPrior::Fixed { value } => value,
        }
    }

    /// Log-density and its derivative in the unconstrained coordinate `u`,
    /// where `u = log(theta)` for positive parameters (Jacobian included) and
    /// `u = theta` otherwise. Constants are dropped. Fixed priors return zeros.
    pub fn ln_density_unconstrained(&self, u: f64) -> (f64, f64) {
        match *self {
            // theta = e^u: shape*u - rate*e^u
            ScalarPrior::Gamma { shape, rate } => {
                let t = u.exp();
                (shape * u - rate * t, shape - rate * t)
            }
            ScalarPrior::LogNormal { mu, sigma2 } => {
                let d = u - mu;
                (-0.5 * d * d / sigma2, -d / sigma2)
            }
            ScalarPrior::Normal { mean, var } => {
                let d = u - mean;
                (-0.5 * d * d / var, -d / var)
            }
            ScalarPrior::Fixed { .. } => (0.0, 0.0),
        }
    }
}

/// Hamiltonian Monte Carlo settings for the expert parameter updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmcSettings {
    pub leapfrog_steps: usize,
    pub step_size: f64,
    /// Dual-averaging target acceptance during burn-in.
    pub target_accept: f64,
    /// Adapt the step size during burn-in, then freeze it.
    pub adapt: bool,
}

impl Default for HmcSettings {
    fn default() -> Self {
        HmcSettings { leapfrog_steps: 10, step_size: 0.1, target_accept: 0.8, adapt: true }
    }
}

/// Priors on expert parameters and concentrations, plus sampler constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub noise_var: ScalarPrior,
    pub mean: ScalarPrior,
    pub magnitude: ScalarPrior,
    pub length_scales: Vec<ScalarPrior>,
    pub alpha_theta: ScalarPrior,
    pub alpha_psi: ScalarPrior,
    pub hmc: HmcSettings,
    /// Auxiliary new-cluster proposals per Gibbs step (`m`).
    pub new_cluster_candidates: usize,
    /// Prior Monte Carlo samples for new-cluster predictive marginals (`S`).
    pub mc_samples: usize,
}

impl PriorConfig {
    /// Prior used for the simulated damped-cosine benchmark with `d` inputs.
    pub fn damped_cosine(d: usize) -> Self {
        let mut length_scales = vec![ScalarPrior::Gamma { shape: 3.0, rate: 1.0 }];
        length_scales.extend((1..d).map(|_| ScalarPrior::Gamma { shape: 10.0, rate: 0.5 }));
        PriorConfig {
            noise_var: ScalarPrior::LogNormal { mu: 0.01f64.ln(), sigma2: 0.25 },
            mean: ScalarPrior::Normal { mean: 0.0, var: 0.25 },
            magnitude: ScalarPrior::Gamma { shape: 2.0, rate: 1.5 },
            length_scales,
            alpha_theta: ScalarPrior::Gamma { shape: 1.0, rate: 1.0 },
            alpha_psi: ScalarPrior::Gamma { shape: 1.0, rate: 1.0 },
            hmc: HmcSettings::default(),
            new_cluster_candidates: 3,
            mc_samples: 1000,
        }
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if self.length_scales.len() != data.dim() {
            return Err(Error::Config(format!(
                "{} length-scale priors for {} input dimensions",
                self.length_scales.len(),
                data.dim()
            )));
        }
        self.noise_var.validate(true)?;
        self.mean.validate(false)?;
        self.magnitude.validate(true)?;
        for p in &self.length_scales {
            p.validate(true)?;
        }
        self.alpha_theta.validate(true)?;
        self.alpha_psi.validate(true)?;
        for p in [&self.alpha_theta, &self.alpha_psi] {
            if matches!(p, ScalarPrior::LogNormal { .. }) {
                return Err(Error::Config("concentration priors must be gamma or fixed".into()));
            }
        }
        if self.new_cluster_candidates < 1 {
            return Err(Error::Config("new_cluster_candidates (m) must be at least 1".into()));
        }
        if self.mc_samples < 1 {
            return Err(Error::Config("mc_samples (S) must be at least 1".into()));
        }
        if self.hmc.step_size <= 0.0 || !(0.0..1.0).contains(&self.hmc.target_accept) {
            return Err(Error::Config("hmc step_size must be > 0 and target_accept in (0, 1)".into()));
        }
        Ok(())
    }

    /// Priors for each unconstrained expert coordinate, in `ExpertParams` order.
    pub fn coordinate_priors(&self) -> Vec<&ScalarPrior> {
        let mut v = vec![&self.noise_var, &self.mean, &self.magnitude];
        v.extend(self.length_scales.iter());
        v
    }

    pub fn sample_expert<R: Rng + ?Sized>(&self, rng: &mut R) -> ExpertParams {
        ExpertParams {
            noise_var: self.noise_var.sample(rng),
            mean: self.mean.sample(rng),
            magnitude: self.magnitude.sample(rng),
            length_scales: self.length_scales.iter().map(|p| p.sample(rng)).collect(),
        }
    }

    /// Adjusts the prior for the output type: the Bernoulli-probit case
    /// (`L = 1`) has unit latent variance.
    pub fn effective_for(&self, kind: &OutputKind) -> PriorConfig {
        let mut p = self.clone();
        if kind.levels() == Some(1) && p.noise_var != ScalarPrior::fixed(1.0) {
            log::warn!("binary probit outputs: noise variance fixed to 1");
            p.noise_var = ScalarPrior::fixed(1.0);
        }
        p
    }
}

/// Concentration parameters of the enriched Dirichlet process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationParams {
    pub alpha_theta: f64,
    /// One per y-cluster.
    pub alpha_psi: Vec<f64>,
}

/// One MCMC iterate in canonical form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub partition: NestedPartition,
    pub experts: Vec<ExpertParams>,
    pub conc: ConcentrationParams,
    /// Latent Gaussian outputs; equal to the outputs for Gaussian data.
    pub latent: Vec<f64>,
}

impl SamplerState {
    /// Checks the structural invariants against the data.
    pub fn check(&self, data: &Dataset) -> Result<()> {
        let k = self.partition.k();
        if self.experts.len() != k || self.conc.alpha_psi.len() != k {
            return Err(Error::Data("parameter vectors do not match the number of y-clusters".into()));
        }
        if self.partition.recount() != self.partition {
            return Err(Error::Data("partition is not canonical".into()));
        }
        if self.latent.len() != data.len() {
            return Err(Error::Data("latent vector has the wrong length".into()));
        }
        for (i, (&y, &t)) in data.outputs().iter().zip(&self.latent).enumerate() {
            let ok = match &data.output_kind {
                OutputKind::Gaussian => y == t,
                kind => {
                    let (lo, hi) = kind.latent_interval(y);
                    t > lo && t <= hi
                }
            };
            if !ok {
                return Err(Error::Data(format!("latent output {t} inconsistent with y={y} at row {i}")));
            }
        }
        Ok(())
    }
}
