use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::hmc::DualAveraging;
use super::{MoveStats, Mode, Schedule};
use crate::error::{Error, Result};
use crate::gp;
use crate::input_models::SuffStats;
use crate::model::{
    ConcentrationParams, Dataset, ExpertParams, NestedPartition, OutputKind, PriorConfig, SamplerState,
};

#[derive(Clone, Debug)]
pub(crate) struct XCluster {
    pub members: Vec<usize>,
    pub stats: SuffStats,
}

/// Inverse covariance `A = (sigma^2 I + K)^{-1}` over the members, in member
/// order, and `r = A (y~ - beta_0)`.
#[derive(Clone, Debug)]
pub(crate) struct GpCache {
    pub ainv: DMatrix<f64>,
    pub resid: DVector<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct YCluster {
    pub params: ExpertParams,
    pub alpha_psi: f64,
    pub members: Vec<usize>,
    pub xs: Vec<XCluster>,
    pub cache: Option<GpCache>,
}

impl YCluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Mutable sampler state with per-cluster sufficient statistics and GP caches.
#[derive(Clone, Debug)]
pub struct Chain<'a> {
    pub(crate) data: &'a Dataset,
    pub(crate) priors: PriorConfig,
    pub(crate) schedule: Schedule,
    pub(crate) ys: Vec<YCluster>,
    pub(crate) zy: Vec<usize>,
    pub(crate) zx: Vec<usize>,
    /// Position of each point in its y-cluster's member list.
    pub(crate) pos: Vec<usize>,
    pub(crate) latent: Vec<f64>,
    pub(crate) alpha_theta: f64,
    pub(crate) stats: MoveStats,
    pub(crate) step: DualAveraging,
}

/// Initial latent value inside the interval of category `y`.
fn initial_latent(kind: &OutputKind, y: f64) -> f64 {
    match kind {
        OutputKind::Gaussian => y,
        OutputKind::OrdinalProbit { cutoffs } => {
            let l = y as usize;
            let levels = cutoffs.len();
            if l == 0 {
                -0.5
            } else if l == levels {
                cutoffs[levels - 1] + 0.5
            } else {
                0.5 * (cutoffs[l - 1] + cutoffs[l])
            }
        }
    }
}

impl<'a> Chain<'a> {
    /// Starts with every point in a single y-cluster and a single x-cluster,
    /// expert parameters at their prior means.
    pub fn new<R: Rng + ?Sized>(
        data: &'a Dataset,
        priors: &PriorConfig,
        schedule: Schedule,
        rng: &mut R,
    ) -> Result<Self> {
        let priors = priors.effective_for(&data.output_kind);
        let n = data.len();
        let params = ExpertParams {
            noise_var: priors.noise_var.mean(),
            mean: priors.mean.mean(),
            magnitude: priors.magnitude.mean(),
            length_scales: priors.length_scales.iter().map(|p| p.mean()).collect(),
        };
        let latent = data.outputs().iter().map(|&y| initial_latent(&data.output_kind, y)).collect();
        let state = SamplerState {
            partition: NestedPartition::one_cluster(n),
            experts: vec![params],
            conc: ConcentrationParams {
                alpha_theta: priors.alpha_theta.sample(rng),
                alpha_psi: vec![priors.alpha_psi.sample(rng)],
            },
            latent,
        };
        Self::from_state(data, &priors, schedule, state)
    }

    pub fn from_state(
        data: &'a Dataset,
        priors: &PriorConfig,
        schedule: Schedule,
        state: SamplerState,
    ) -> Result<Self> {
        let priors = priors.effective_for(&data.output_kind);
        priors.validate(data)?;
        state.check(data)?;
        let p = &state.partition;
        if schedule.mode == Mode::Dp && p.counts().x_sizes.iter().any(|v| v.len() != 1) {
            return Err(Error::Config("DP mode needs exactly one x-cluster per y-cluster".into()));
        }
        let spec = &data.input_spec;
        let mut ys: Vec<YCluster> = state
            .experts
            .iter()
            .zip(&state.conc.alpha_psi)
            .zip(&p.counts().x_sizes)
            .map(|((e, &a), xs)| YCluster {
                params: e.clone(),
                alpha_psi: a,
                members: Vec::new(),
                xs: xs
                    .iter()
                    .map(|_| XCluster { members: Vec::new(), stats: SuffStats::empty(spec) })
                    .collect(),
                cache: None,
            })
            .collect();
        let n = data.len();
        let mut pos = vec![0; n];
        for (i, slot) in pos.iter_mut().enumerate() {
            let (j, l) = (p.zy()[i], p.zx()[i]);
            *slot = ys[j].members.len();
            ys[j].members.push(i);
            ys[j].xs[l].members.push(i);
            ys[j].xs[l].stats.add(data.row(i));
        }
        let step = DualAveraging::new(priors.hmc.step_size, priors.hmc.target_accept);
        Ok(Chain {
            data,
            priors,
            schedule,
            ys,
            zy: p.zy().to_vec(),
            zx: p.zx().to_vec(),
            pos,
            latent: state.latent,
            alpha_theta: state.conc.alpha_theta,
            stats: MoveStats::default(),
            step,
        })
    }

    pub fn k(&self) -> usize {
        self.ys.len()
    }

    pub fn priors(&self) -> &PriorConfig {
        &self.priors
    }

    pub fn move_stats(&self) -> MoveStats {
        let mut s = self.stats.clone();
        s.step_size = self.step.step_size();
        s
    }

    /// Canonical snapshot: y-clusters ordered by first appearance.
    pub fn to_state(&self) -> SamplerState {
        let partition = NestedPartition::new(self.zy.clone(), self.zx.clone()).expect("label lengths agree");
        let mut order = Vec::with_capacity(self.k());
        let mut seen = vec![false; self.k()];
        for &j in &self.zy {
            if !seen[j] {
                seen[j] = true;
                order.push(j);
            }
        }
        SamplerState {
            partition,
            experts: order.iter().map(|&j| self.ys[j].params.clone()).collect(),
            conc: ConcentrationParams {
                alpha_theta: self.alpha_theta,
                alpha_psi: order.iter().map(|&j| self.ys[j].alpha_psi).collect(),
            },
            latent: self.latent.clone(),
        }
    }

    /// One full iteration of the sampler.
    pub fn iterate<R: Rng + ?Sized>(&mut self, burn_in: bool, rng: &mut R) -> Result<()> {
        let sched = self.schedule.clone();
        if sched.gibbs {
            self.gibbs_sweep(rng)?;
        }
        if sched.mode == Mode::Edp {
            if sched.y_moves {
                self.y_moves(rng)?;
            }
            if sched.x_split_merge {
                self.split_merge(rng);
            }
        }
        if sched.hmc {
            self.hmc_update(burn_in, rng)?;
        }
        if sched.concentrations {
            self.update_concentrations(rng);
        }
        if sched.latent {
            self.update_latent(rng)?;
        }
        Ok(())
    }

    pub(crate) fn rows(&self, members: &[usize]) -> Vec<&'a [f64]> {
        let data = self.data;
        members.iter().map(|&i| data.row(i)).collect()
    }

    pub(crate) fn outputs_of(&self, members: &[usize]) -> Vec<f64> {
        members.iter().map(|&i| self.latent[i]).collect()
    }

    /// `log N(Y~_members | theta)`.
    pub(crate) fn ln_marginal(&self, members: &[usize], p: &ExpertParams) -> Result<f64> {
        gp::log_marginal(&self.outputs_of(members), &self.rows(members), p)
    }

    /// `log h(Y~_block | Y~_other, theta)`.
    pub(crate) fn ln_conditional(&self, block: &[usize], other: &[usize], p: &ExpertParams) -> Result<f64> {
        gp::log_conditional_block(
            &self.outputs_of(block),
            &self.rows(block),
            &self.outputs_of(other),
            &self.rows(other),
            p,
        )
    }

    /// Recomputes the GP cache of y-cluster `j` from scratch.
    pub(crate) fn rebuild_cache(&mut self, j: usize) -> Result<()> {
        let y = &self.ys[j];
        let rows = self.rows(&y.members);
        let (chol, _) = gp::cholesky_jitter(gp::covariance(&rows, &y.params))?;
        let ainv = chol.inverse();
        let e = DVector::from_iterator(y.members.len(), y.members.iter().map(|&i| self.latent[i] - y.params.mean));
        let resid = &ainv * e;
        self.ys[j].cache = Some(GpCache { ainv, resid });
        Ok(())
    }

    pub(crate) fn rebuild_all_caches(&mut self) -> Result<()> {
        for j in 0..self.k() {
            self.rebuild_cache(j)?;
        }
        Ok(())
    }

    /// Recomputes `zy`, `zx` and `pos` for the members of y-cluster `j`.
    pub(crate) fn relabel(&mut self, j: usize) {
        let y = &self.ys[j];
        for (p, &i) in y.members.iter().enumerate() {
            self.zy[i] = j;
            self.pos[i] = p;
        }
        for (l, x) in y.xs.iter().enumerate() {
            for &i in &x.members {
                self.zx[i] = l;
            }
        }
    }

    /// Removes an empty y-cluster, moving the last cluster into its slot.
    pub(crate) fn drop_y(&mut self, j: usize) {
        debug_assert!(self.ys[j].members.is_empty());
        self.ys.swap_remove(j);
        if j < self.ys.len() {
            self.relabel(j);
        }
    }

    /// Removes an empty x-cluster of y-cluster `j`.
    pub(crate) fn drop_x(&mut self, j: usize, l: usize) {
        debug_assert!(self.ys[j].xs[l].members.is_empty());
        let y = &mut self.ys[j];
        y.xs.swap_remove(l);
        if l < y.xs.len() {
            for &i in &y.xs[l].members {
                self.zx[i] = l;
            }
        }
    }

    /// Counts of the current nested partition (x-cluster sizes per y-cluster).
    pub(crate) fn x_sizes(&self) -> Vec<Vec<usize>> {
        self.ys.iter().map(|y| y.xs.iter().map(|x| x.members.len()).collect()).collect()
    }

    /// Verifies every cached quantity against a from-scratch recomputation.
    pub fn check_consistency(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Data(format!("inconsistent chain: {m}")));
        let n = self.data.len();
        let mut seen = vec![false; n];
        for (j, y) in self.ys.iter().enumerate() {
            if y.members.is_empty() || y.xs.is_empty() {
                return fail(format!("empty y-cluster {j}"));
            }
            if self.schedule.mode == Mode::Dp && y.xs.len() != 1 {
                return fail(format!("y-cluster {j} has {} x-clusters in DP mode", y.xs.len()));
            }
            let mut count = 0;
            for (l, x) in y.xs.iter().enumerate() {
                if x.members.is_empty() {
                    return fail(format!("empty x-cluster ({j},{l})"));
                }
                count += x.members.len();
                let fresh = SuffStats::from_rows(&self.data.input_spec, x.members.iter().map(|&i| self.data.row(i)));
                if fresh.count() != x.stats.count() {
                    return fail(format!("stats count of ({j},{l})"));
                }
                for &i in &x.members {
                    if self.zy[i] != j || self.zx[i] != l {
                        return fail(format!("labels of point {i}"));
                    }
                }
            }
            if count != y.members.len() {
                return fail(format!("x-cluster sizes of {j} do not sum to N_j"));
            }
            for (p, &i) in y.members.iter().enumerate() {
                if seen[i] || self.pos[i] != p {
                    return fail(format!("membership of point {i}"));
                }
                seen[i] = true;
            }
            if !y.params.is_valid() || !(y.alpha_psi > 0.0) {
                return fail(format!("parameters of y-cluster {j}"));
            }
        }
        if seen.iter().any(|s| !s) {
            return fail("unallocated point".into());
        }
        if !(self.alpha_theta > 0.0) {
            return fail("alpha_theta".into());
        }
        self.to_state().check(self.data)
    }
}
