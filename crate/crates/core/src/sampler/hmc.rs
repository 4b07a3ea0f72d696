//! Hamiltonian Monte Carlo for expert parameters, with dual-averaging
//! step-size adaptation during burn-in.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::state::Chain;
use crate::error::Result;
use crate::gp::{log_posterior_grad_with, SqDiffs};
use crate::model::{ExpertParams, PriorConfig};

/// Dual averaging of the log step size towards a target acceptance rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualAveraging {
    step: f64,
    mu: f64,
    h_bar: f64,
    log_step_bar: f64,
    t: f64,
    target: f64,
    frozen: bool,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(step: f64, target: f64) -> Self {
        DualAveraging {
            step,
            mu: (10.0 * step).ln(),
            h_bar: 0.0,
            log_step_bar: step.ln(),
            t: 0.0,
            target,
            frozen: false,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    /// Feeds the acceptance statistic of the latest iteration.
    pub fn adapt(&mut self, accept_stat: f64) {
        if self.frozen {
            return;
        }
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_stat);
        let log_step = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.t.powf(-Self::KAPPA);
        self.log_step_bar = eta * log_step + (1.0 - eta) * self.log_step_bar;
        self.step = log_step.exp();
    }

    /// Fixes the step size at its averaged value.
    pub fn freeze(&mut self) {
        if !self.frozen && self.t > 0.0 {
            self.step = self.log_step_bar.exp();
        }
        self.frozen = true;
    }
}

/// One HMC trajectory. Returns the new coordinates (or `None` when the
/// trajectory diverged) and the Metropolis log acceptance ratio.
#[allow(clippy::too_many_arguments)]
fn trajectory(
    sq: &SqDiffs,
    y: &[f64],
    u0: &[f64],
    mask: &[usize],
    priors: &PriorConfig,
    eps: f64,
    steps: usize,
    momentum: &[f64],
) -> Option<(Vec<f64>, f64)> {
    let eval = |u: &[f64]| -> Option<(f64, Vec<f64>)> {
        let (lp, g) = log_posterior_grad_with(sq, y, &ExpertParams::from_unconstrained(u), priors).ok()?;
        (lp.is_finite() && g.iter().all(|v| v.is_finite())).then_some((lp, g))
    };
    let (lp0, mut g) = eval(u0)?;
    let mut u = u0.to_vec();
    let mut p = momentum.to_vec();
    let kinetic = |p: &[f64]| 0.5 * p.iter().map(|v| v * v).sum::<f64>();
    let h0 = -lp0 + kinetic(&p);
    let mut lp = lp0;
    for _ in 0..steps {
        for (pi, &c) in p.iter_mut().zip(mask) {
            *pi += 0.5 * eps * g[c];
        }
        for (pi, &c) in p.iter().zip(mask) {
            u[c] += eps * pi;
        }
        let (l, g1) = eval(&u)?;
        lp = l;
        g = g1;
        for (pi, &c) in p.iter_mut().zip(mask) {
            *pi += 0.5 * eps * g[c];
        }
    }
    let h1 = -lp + kinetic(&p);
    h1.is_finite().then_some((u, h0 - h1))
}

/// Energy error `H(end) - H(start)` of a leapfrog trajectory for one
/// expert, with all coordinates free. `None` if the trajectory diverged.
pub fn leapfrog_energy_error(
    y: &[f64],
    xs: &[&[f64]],
    params: &ExpertParams,
    priors: &PriorConfig,
    eps: f64,
    steps: usize,
    momentum: &[f64],
) -> Option<f64> {
    let sq = SqDiffs::new(xs);
    let u0 = params.to_unconstrained();
    let mask: Vec<usize> = (0..u0.len()).collect();
    trajectory(&sq, y, &u0, &mask, priors, eps, steps, momentum).map(|(_, log_ratio)| -log_ratio)
}

impl Chain<'_> {
    /// Updates each expert's parameters by one HMC trajectory.
    pub fn hmc_update<R: Rng + ?Sized>(&mut self, burn_in: bool, rng: &mut R) -> Result<()> {
        let mask: Vec<usize> = self
            .priors
            .coordinate_priors()
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_fixed())
            .map(|(i, _)| i)
            .collect();
        let steps = self.priors.hmc.leapfrog_steps;
        if mask.is_empty() || steps == 0 {
            for _ in 0..self.k() {
                self.stats.hmc.record(true);
            }
            return Ok(());
        }
        if !burn_in || !self.priors.hmc.adapt {
            self.step.freeze();
        }
        let eps = self.step.step_size();
        let mut accept_sum = 0.0;
        for j in 0..self.k() {
            let members = self.ys[j].members.clone();
            let sq = SqDiffs::new(&self.rows(&members));
            let y = self.outputs_of(&members);
            let u0 = self.ys[j].params.to_unconstrained();
            let momentum: Vec<f64> = mask.iter().map(|_| StandardNormal.sample(rng)).collect();
            match trajectory(&sq, &y, &u0, &mask, &self.priors, eps, steps, &momentum) {
                Some((u, log_ratio)) => {
                    let a = log_ratio.min(0.0).exp();
                    accept_sum += a;
                    let ok = rng.random::<f64>() < a;
                    self.stats.hmc.record(ok);
                    if ok {
                        self.ys[j].params = ExpertParams::from_unconstrained(&u);
                        self.ys[j].cache = None;
                    }
                }
                None => {
                    self.stats.hmc.record(false);
                    self.stats.hmc_divergent += 1;
                }
            }
        }
        if burn_in && self.priors.hmc.adapt {
            self.step.adapt(accept_sum / self.k() as f64);
        }
        Ok(())
    }
}
