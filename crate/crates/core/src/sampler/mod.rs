//! MCMC over nested partitions, expert parameters, concentrations and latent
//! outputs.
//!
//! One iteration runs, in order: a collapsed Gibbs sweep over allocations,
//! the global y-cluster moves, the two x-cluster split-merge pairs, HMC for
//! each expert, concentration updates and latent-output resampling.

mod concentration;
mod gibbs;
mod hmc;
mod latent;
mod split_merge;
mod state;
mod ymoves;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ExpertParams, PriorConfig, SamplerState};

pub use concentration::{escobar_west, ew_shape_weight};
pub use hmc::{leapfrog_energy_error, DualAveraging};
pub use state::Chain;

/// Which partition law the engine targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Enriched DP: nested x-clusters inside y-clusters.
    #[default]
    Edp,
    /// Plain DP: one x-cluster per y-cluster; only Gibbs allocation moves.
    Dp,
}

/// How the global-move acceptance ratios are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioForm {
    /// Ratios derived from the proposal and target densities, including the
    /// move-selection probabilities and the post-move cluster counts.
    #[default]
    Exact,
    /// Shorter ratios that leave out the move-selection and reverse-move
    /// proposal terms; not reversible, kept for comparison.
    Simplified,
}

/// Which updates run in each iteration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub gibbs: bool,
    pub y_moves: bool,
    pub x_split_merge: bool,
    pub hmc: bool,
    pub concentrations: bool,
    pub latent: bool,
    pub mode: Mode,
    pub ratio_form: RatioForm,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            gibbs: true,
            y_moves: true,
            x_split_merge: true,
            hmc: true,
            concentrations: true,
            latent: true,
            mode: Mode::Edp,
            ratio_form: RatioForm::Exact,
        }
    }
}

impl Schedule {
    /// Default schedule for the plain DP mixture.
    pub fn dp() -> Self {
        Schedule { y_moves: false, x_split_merge: false, mode: Mode::Dp, ..Schedule::default() }
    }

    /// Partition moves only: parameters and concentrations stay fixed.
    pub fn partition_only() -> Self {
        Schedule { hmc: false, concentrations: false, latent: false, ..Schedule::default() }
    }
}

/// Settings for one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub schedule: Schedule,
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        if self.iters <= self.burn_in {
            return Err(Error::Config(format!(
                "iters ({}) must exceed burn_in ({})",
                self.iters, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        Ok(())
    }
}

/// Proposal and acceptance counts for one move type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counter {
    pub proposed: u64,
    pub accepted: u64,
}

impl Counter {
    pub(crate) fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Per-move acceptance statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    pub move1: Counter,
    pub move2: Counter,
    pub move3: Counter,
    pub smart_split: Counter,
    pub dumb_merge: Counter,
    pub dumb_split: Counter,
    pub smart_merge: Counter,
    pub hmc: Counter,
    pub hmc_divergent: u64,
    /// Final HMC step size.
    pub step_size: f64,
}

/// Retained post-burn-in states of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub iterations: Vec<usize>,
    pub states: Vec<SamplerState>,
    pub priors: PriorConfig,
    pub settings: RunSettings,
    pub move_stats: MoveStats,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Pools several chains; settings and priors are taken from the first.
    pub fn pool(chains: Vec<PosteriorDraws>) -> Result<PosteriorDraws> {
        let mut it = chains.into_iter();
        let mut out = it.next().ok_or_else(|| Error::Config("no chains to pool".into()))?;
        for c in it {
            out.iterations.extend(c.iterations);
            out.states.extend(c.states);
        }
        Ok(out)
    }
}

/// One line of the trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub k: usize,
    pub kj: Vec<usize>,
    pub alpha_theta: f64,
    pub alpha_psi: Vec<f64>,
    pub experts: Vec<ExpertParams>,
    pub zy: Vec<usize>,
    pub zx: Vec<usize>,
}

impl TraceRecord {
    pub fn new(iteration: usize, s: &SamplerState) -> Self {
        TraceRecord {
            iteration,
            k: s.partition.k(),
            kj: s.partition.counts().x_sizes.iter().map(Vec::len).collect(),
            alpha_theta: s.conc.alpha_theta,
            alpha_psi: s.conc.alpha_psi.clone(),
            experts: s.experts.clone(),
            zy: s.partition.zy().to_vec(),
            zx: s.partition.zx().to_vec(),
        }
    }
}

/// Runs one chain from the default initial state.
pub fn run(data: &Dataset, priors: &PriorConfig, settings: &RunSettings) -> Result<PosteriorDraws> {
    run_with(data, priors, settings, None, None)
}

/// Runs one chain, optionally from a given initial state and writing a
/// line-delimited JSON trace of the retained draws.
pub fn run_with(
    data: &Dataset,
    priors: &PriorConfig,
    settings: &RunSettings,
    init: Option<SamplerState>,
    mut trace: Option<&mut dyn Write>,
) -> Result<PosteriorDraws> {
    settings.validate()?;
    priors.validate(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut chain = match init {
        Some(s) => Chain::from_state(data, priors, settings.schedule.clone(), s)?,
        None => Chain::new(data, priors, settings.schedule.clone(), &mut rng)?,
    };
    let mut iterations = Vec::new();
    let mut states = Vec::new();
    for it in 1..=settings.iters {
        chain.iterate(it <= settings.burn_in, &mut rng)?;
        if it > settings.burn_in && (it - settings.burn_in).is_multiple_of(settings.thin) {
            let s = chain.to_state();
            if let Some(w) = trace.as_mut() {
                serde_json::to_writer(&mut *w, &TraceRecord::new(it, &s))?;
                w.write_all(b"\n")?;
            }
            iterations.push(it);
            states.push(s);
        }
        if it % 500 == 0 {
            log::debug!("iteration {it}: k = {}", chain.k());
        }
    }
    let move_stats = chain.move_stats();
    log::info!("move statistics: {move_stats:?}");
    Ok(PosteriorDraws {
        iterations,
        states,
        priors: chain.priors().clone(),
        settings: settings.clone(),
        move_stats,
    })
}
