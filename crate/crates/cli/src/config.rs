//! Run configuration: a TOML file whose values can be overridden by flags.

use std::path::{Path, PathBuf};

use edpmoe::io::ColumnRoles;
use edpmoe::sampler::{Mode, RatioForm, RunSettings, Schedule};
use edpmoe::{GammaConvention, HmcSettings, InputFamily, OutputKind, PriorConfig, ScalarPrior};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Prior on one scalar as written in configuration files. The second gamma
/// parameter `b` is a rate or a scale according to `gamma_convention`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Gamma { shape: f64, b: f64 },
    LogNormal { mu: f64, sigma2: f64 },
    Normal { mean: f64, var: f64 },
    Fixed { value: f64 },
}

impl PriorSpec {
    fn resolve(&self, conv: GammaConvention) -> ScalarPrior {
        match *self {
            PriorSpec::Gamma { shape, b } => ScalarPrior::gamma(shape, b, conv),
            PriorSpec::LogNormal { mu, sigma2 } => ScalarPrior::LogNormal { mu, sigma2 },
            PriorSpec::Normal { mean, var } => ScalarPrior::Normal { mean, var },
            PriorSpec::Fixed { value } => ScalarPrior::Fixed { value },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorsSection {
    #[serde(default)]
    pub gamma_convention: GammaConvention,
    pub noise_var: Option<PriorSpec>,
    pub mean: Option<PriorSpec>,
    pub magnitude: Option<PriorSpec>,
    /// One entry per input dimension, or a single entry for all of them.
    pub length_scales: Option<Vec<PriorSpec>>,
    pub alpha_theta: Option<PriorSpec>,
    pub alpha_psi: Option<PriorSpec>,
    pub hmc: Option<HmcSettings>,
    pub new_cluster_candidates: Option<usize>,
    pub mc_samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    #[serde(default)]
    pub inputs: Option<Vec<String>>,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default = "default_output_kind")]
    pub output_kind: OutputKind,
    /// Input models per dimension; NIG centred at the sample mean when absent.
    #[serde(default)]
    pub input_spec: Option<Vec<InputFamily>>,
}

fn default_output() -> String {
    "y".into()
}

fn default_output_kind() -> OutputKind {
    OutputKind::Gaussian
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub mode: Mode,
    pub ratio_form: RatioForm,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection { iters: 5000, burn_in: 1000, thin: 1, seed: 1, chains: 1, mode: Mode::Edp, ratio_form: RatioForm::Exact }
    }
}

/// Evenly spaced test inputs along one dimension, others at their training means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub dim: usize,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionSection {
    pub test: Option<PathBuf>,
    pub grid: Option<GridSpec>,
    pub completions: usize,
    pub level: f64,
    pub grid_points: usize,
    /// Use every `thin`-th retained draw.
    pub thin: usize,
    pub seed: u64,
}

impl Default for PredictionSection {
    fn default() -> Self {
        PredictionSection { test: None, grid: None, completions: 200, level: 0.95, grid_points: 1000, thin: 1, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SummarySection {
    pub psm: bool,
    pub vi: bool,
    pub traces: bool,
    pub refine: bool,
}

impl Default for SummarySection {
    fn default() -> Self {
        SummarySection { psm: true, vi: true, traces: true, refine: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default)]
    pub priors: PriorsSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub prediction: PredictionSection,
    #[serde(default)]
    pub summary: SummarySection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a config file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data.path = resolve(base, &cfg.data.path);
        cfg.prediction.test = cfg.prediction.test.map(|p| resolve(base, &p));
        cfg.output_dir = cfg.output_dir.map(|p| resolve(base, &p));
        Ok(cfg)
    }

    pub fn column_roles(&self) -> ColumnRoles {
        ColumnRoles { inputs: self.data.inputs.clone(), output: self.data.output.clone() }
    }

    /// Checks everything that can be checked before touching the data.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.sampler;
        if !self.data.path.exists() {
            return Err(CliError::Config(format!("data.path: {} does not exist", self.data.path.display())));
        }
        if s.iters <= s.burn_in {
            return Err(CliError::Config(format!(
                "sampler.iters ({}) must exceed sampler.burn_in ({})",
                s.iters, s.burn_in
            )));
        }
        if s.thin == 0 {
            return Err(CliError::Config("sampler.thin must be at least 1".into()));
        }
        if s.chains == 0 {
            return Err(CliError::Config("sampler.chains must be at least 1".into()));
        }
        if let Some(t) = &self.prediction.test {
            if !t.exists() {
                return Err(CliError::Config(format!("prediction.test: {} does not exist", t.display())));
            }
        }
        let p = &self.prediction;
        if !(p.level > 0.0 && p.level < 1.0) {
            return Err(CliError::Config(format!("prediction.level ({}) must lie in (0, 1)", p.level)));
        }
        if p.thin == 0 || p.completions == 0 || p.grid_points < 10 {
            return Err(CliError::Config(
                "prediction.thin and prediction.completions must be positive, prediction.grid_points at least 10".into(),
            ));
        }
        if let Some(g) = &p.grid {
            if g.points == 0 || g.from.partial_cmp(&g.to).is_none_or(|o| o.is_gt()) {
                return Err(CliError::Config("prediction.grid needs from <= to and points >= 1".into()));
            }
        }
        self.data
            .output_kind
            .validate()
            .map_err(|e| CliError::Config(format!("data.output_kind: {e}")))?;
        Ok(())
    }

    pub fn run_settings(&self, chain: usize) -> RunSettings {
        let s = &self.sampler;
        let schedule = match s.mode {
            Mode::Edp => Schedule::default(),
            Mode::Dp => Schedule::dp(),
        };
        RunSettings {
            iters: s.iters,
            burn_in: s.burn_in,
            thin: s.thin,
            seed: s.seed.wrapping_add(chain as u64),
            schedule: Schedule { ratio_form: s.ratio_form, ..schedule },
        }
    }

    /// Priors for `d` input dimensions: the damped-cosine defaults with any
    /// configured entries replacing them.
    pub fn priors(&self, d: usize) -> Result<PriorConfig, CliError> {
        let sec = &self.priors;
        let conv = sec.gamma_convention;
        let mut p = PriorConfig::damped_cosine(d);
        let set = |slot: &mut ScalarPrior, spec: &Option<PriorSpec>| {
            if let Some(s) = spec {
                *slot = s.resolve(conv);
            }
        };
        set(&mut p.noise_var, &sec.noise_var);
        set(&mut p.mean, &sec.mean);
        set(&mut p.magnitude, &sec.magnitude);
        set(&mut p.alpha_theta, &sec.alpha_theta);
        set(&mut p.alpha_psi, &sec.alpha_psi);
        if let Some(ls) = &sec.length_scales {
            p.length_scales = match ls.len() {
                1 => vec![ls[0].resolve(conv); d],
                n if n == d => ls.iter().map(|s| s.resolve(conv)).collect(),
                n => {
                    return Err(CliError::Config(format!(
                        "priors.length_scales has {n} entries for {d} input dimensions"
                    )))
                }
            };
        }
        if let Some(h) = &sec.hmc {
            p.hmc = h.clone();
        }
        if let Some(m) = sec.new_cluster_candidates {
            p.new_cluster_candidates = m;
        }
        if let Some(s) = sec.mc_samples {
            p.mc_samples = s;
        }
        Ok(p)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [data]
        path = "train.csv"
    "#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.sampler, SamplerSection::default());
        assert_eq!(cfg.data.output, "y");
        assert_eq!(cfg.priors(2).unwrap(), PriorConfig::damped_cosine(2));
    }

    #[test]
    fn gamma_convention_switches_second_parameter() {
        let text = format!(
            "{MINIMAL}\n[priors]\ngamma_convention = \"shape_scale\"\nmagnitude = {{ dist = \"gamma\", shape = 2.0, b = 4.0 }}\n"
        );
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg.priors(1).unwrap().magnitude, ScalarPrior::Gamma { shape: 2.0, rate: 0.25 });
    }

    #[test]
    fn single_length_scale_prior_is_broadcast() {
        let text = format!("{MINIMAL}\n[priors]\nlength_scales = [{{ dist = \"fixed\", value = 2.0 }}]\n");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg.priors(3).unwrap().length_scales, vec![ScalarPrior::fixed(2.0); 3]);
        let text = format!("{MINIMAL}\n[priors]\nlength_scales = [{{ dist = \"fixed\", value = 2.0 }}, {{ dist = \"fixed\", value = 1.0 }}]\n");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert!(cfg.priors(3).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = toml::from_str::<RunConfig>(&format!("{MINIMAL}\n[sampler]\niterations = 3\n")).unwrap_err();
        assert!(err.to_string().contains("iterations"));
    }
}
