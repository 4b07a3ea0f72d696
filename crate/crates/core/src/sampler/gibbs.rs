//! Collapsed Gibbs updates of single allocations with auxiliary new-cluster
//! candidates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::state::{Chain, GpCache, XCluster, YCluster};
use super::Mode;
use crate::error::Result;
use crate::gp::kernel;
use crate::input_models::SuffStats;
use crate::model::ExpertParams;
use crate::special::{normal_ln_pdf, sample_log_categorical};

enum Choice {
    Existing(usize, usize),
    NewX(usize),
    NewY(usize),
}

/// Predictive of a new output for y-cluster `y` at input `x` given the
/// members' outputs: returns `(mean, var, k*, A k*)`.
fn cluster_predictive(y: &YCluster, x: &[f64], chain: &Chain) -> (f64, f64, DVector<f64>, DVector<f64>) {
    let cache = y.cache.as_ref().expect("GP cache present during Gibbs sweep");
    let p = &y.params;
    let kstar = DVector::from_iterator(y.members.len(), y.members.iter().map(|&i| kernel(chain.data.row(i), x, p)));
    let b = &cache.ainv * &kstar;
    let mean = p.mean + kstar.dot(&cache.resid);
    // The exact predictive variance is at least sigma^2.
    let var = (p.noise_var + p.magnitude - kstar.dot(&b)).max(p.noise_var);
    (mean, var, kstar, b)
}

impl Chain<'_> {
    /// One systematic-scan sweep over all allocations.
    pub fn gibbs_sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.rebuild_all_caches()?;
        for n in 0..self.data.len() {
            self.gibbs_point(n, rng)?;
        }
        Ok(())
    }

    /// Removes point `n` from its clusters, returning the parameters of its
    /// y-cluster if that cluster became empty.
    fn detach(&mut self, n: usize) -> Option<(ExpertParams, f64)> {
        let (j, l, p) = (self.zy[n], self.zx[n], self.pos[n]);
        let x = self.data.row(n);
        let y = &mut self.ys[j];
        let xc = &mut y.xs[l];
        let at = xc.members.iter().position(|&i| i == n).expect("point in its x-cluster");
        xc.members.swap_remove(at);
        xc.stats.remove(x);
        if y.members.len() == 1 {
            let removed = self.ys[j].params.clone();
            let alpha = self.ys[j].alpha_psi;
            self.ys[j].members.clear();
            self.ys[j].xs.clear();
            self.drop_y(j);
            return Some((removed, alpha));
        }
        if xc.members.is_empty() {
            self.drop_x(j, l);
        }
        let y = &mut self.ys[j];
        // Rank-one downdate of the inverse: A' = A_{-p,-p} - a a^T / A_pp.
        if let Some(c) = y.cache.take() {
            let app = c.ainv[(p, p)];
            let rp = c.resid[p];
            let a = c.ainv.column(p).remove_row(p);
            let mut ainv = c.ainv.remove_row(p).remove_column(p);
            ainv.ger(-1.0 / app, &a, &a, 1.0);
            let mut resid = c.resid.remove_row(p);
            resid.axpy(-rp / app, &a, 1.0);
            y.cache = Some(GpCache { ainv, resid });
        }
        y.members.remove(p);
        for (q, &i) in y.members.iter().enumerate().skip(p) {
            self.pos[i] = q;
        }
        None
    }

    fn gibbs_point<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Result<()> {
        let spec = &self.data.input_spec;
        let x = self.data.row(n);
        let yt = self.latent[n];
        let dp = self.schedule.mode == Mode::Dp;

        let released = self.detach(n);

        let mut choices = Vec::new();
        let mut logw = Vec::new();
        let mut predictive_terms = Vec::with_capacity(self.k());
        let ln_hx = SuffStats::empty(spec).ln_predictive(x, spec);
        for (j, y) in self.ys.iter().enumerate() {
            let (mean, var, kstar, b) = cluster_predictive(y, x, self);
            let ln_hy = normal_ln_pdf(yt, mean, var);
            let nj = y.size() as f64;
            if dp {
                choices.push(Choice::Existing(j, 0));
                logw.push(nj.ln() + ln_hy + y.xs[0].stats.ln_predictive(x, spec));
            } else {
                let denom = (y.alpha_psi + nj).ln();
                for (l, xc) in y.xs.iter().enumerate() {
                    choices.push(Choice::Existing(j, l));
                    logw.push(
                        nj.ln() + (xc.members.len() as f64).ln() - denom + ln_hy + xc.stats.ln_predictive(x, spec),
                    );
                }
                choices.push(Choice::NewX(j));
                logw.push(nj.ln() + y.alpha_psi.ln() - denom + ln_hy + ln_hx);
            }
            predictive_terms.push((mean, var, kstar, b));
        }

        let m = self.priors.new_cluster_candidates;
        let mut candidates: Vec<(ExpertParams, f64)> = Vec::with_capacity(m);
        if let Some(r) = released {
            candidates.push(r);
        }
        while candidates.len() < m {
            candidates.push((self.priors.sample_expert(rng), self.priors.alpha_psi.sample(rng)));
        }
        let ln_new = (self.alpha_theta / m as f64).ln();
        for (c, (p, _)) in candidates.iter().enumerate() {
            choices.push(Choice::NewY(c));
            logw.push(ln_new + normal_ln_pdf(yt, p.mean, p.noise_var + p.magnitude) + ln_hx);
        }

        match choices.swap_remove(sample_log_categorical(&logw, rng)) {
            Choice::Existing(j, l) => {
                self.attach_existing(n, j, l, &predictive_terms[j]);
            }
            Choice::NewX(j) => {
                let l = self.ys[j].xs.len();
                self.ys[j].xs.push(XCluster { members: Vec::new(), stats: SuffStats::empty(spec) });
                self.attach_existing(n, j, l, &predictive_terms[j]);
            }
            Choice::NewY(c) => {
                let (params, alpha_psi) = candidates.swap_remove(c);
                let c_nn = params.noise_var + params.magnitude;
                let cache = GpCache {
                    ainv: DMatrix::from_element(1, 1, 1.0 / c_nn),
                    resid: DVector::from_element(1, (yt - params.mean) / c_nn),
                };
                let mut stats = SuffStats::empty(spec);
                stats.add(x);
                self.ys.push(YCluster {
                    params,
                    alpha_psi,
                    members: vec![n],
                    xs: vec![XCluster { members: vec![n], stats }],
                    cache: Some(cache),
                });
                let j = self.ys.len() - 1;
                self.zy[n] = j;
                self.zx[n] = 0;
                self.pos[n] = 0;
            }
        }
        Ok(())
    }

    /// Appends point `n` to x-cluster `(j, l)`, growing the inverse by a
    /// Schur-complement update.
    fn attach_existing(&mut self, n: usize, j: usize, l: usize, pred: &(f64, f64, DVector<f64>, DVector<f64>)) {
        let x = self.data.row(n);
        let yt = self.latent[n];
        let (mean, _, kstar, b) = pred;
        let y = &mut self.ys[j];
        y.xs[l].members.push(n);
        y.xs[l].stats.add(x);
        let p = y.members.len();
        y.members.push(n);
        self.zy[n] = j;
        self.zx[n] = l;
        self.pos[n] = p;

        let c_nn = y.params.noise_var + y.params.magnitude;
        let s = c_nn - kstar.dot(b);
        let cache = y.cache.take().expect("cache present");
        if !(s > 1e-10 * c_nn) {
            // Too ill-conditioned for an incremental update.
            self.rebuild_cache(j).expect("covariance stays positive definite");
            return;
        }
        let mut ainv = DMatrix::zeros(p + 1, p + 1);
        let mut top = cache.ainv;
        top.ger(1.0 / s, b, b, 1.0);
        ainv.view_mut((0, 0), (p, p)).copy_from(&top);
        for i in 0..p {
            ainv[(i, p)] = -b[i] / s;
            ainv[(p, i)] = -b[i] / s;
        }
        ainv[(p, p)] = 1.0 / s;
        let innov = (yt - mean) / s;
        let mut resid = DVector::zeros(p + 1);
        resid.rows_mut(0, p).copy_from(&(&cache.resid - b * innov));
        resid[p] = innov;
        y.cache = Some(GpCache { ainv, resid });
    }
}
