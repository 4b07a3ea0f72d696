//! Split-merge moves for x-clusters within a y-cluster: the smart-split /
//! dumb-merge pair and the dumb-split / smart-merge pair.

use std::f64::consts::LN_2;

use rand::Rng;

use super::state::{Chain, XCluster};
use super::RatioForm;
use crate::input_models::SuffStats;
use crate::special::{ln_gamma, log_add_exp, log_sum_exp, sample_log_categorical};

fn kx_1plus(sizes: &[Vec<usize>]) -> usize {
    sizes.iter().flatten().filter(|&&s| s > 1).count()
}

fn kx_2plus(sizes: &[Vec<usize>]) -> usize {
    sizes.iter().map(Vec::len).filter(|&k| k > 1).sum()
}

/// Probability of proposing a split (rather than a merge).
fn sel_split(sizes: &[Vec<usize>]) -> f64 {
    if kx_1plus(sizes) == 0 {
        0.0
    } else if kx_2plus(sizes) == 0 {
        1.0
    } else {
        0.5
    }
}

fn sel_merge(sizes: &[Vec<usize>]) -> f64 {
    1.0 - sel_split(sizes)
}

fn accept<R: Rng + ?Sized>(log_p: f64, rng: &mut R) -> bool {
    log_p >= 0.0 || rng.random::<f64>().ln() < log_p
}

/// Result of a split proposal of one x-cluster.
struct Split {
    a: Vec<usize>,
    b: Vec<usize>,
    stats_a: SuffStats,
    stats_b: SuffStats,
}

impl Chain<'_> {
    /// Runs both split-merge pairs once.
    pub fn split_merge<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for smart_split in [true, false] {
            let sizes = self.x_sizes();
            let s = sel_split(&sizes);
            if s == 0.0 && kx_2plus(&sizes) == 0 {
                continue;
            }
            let split = rng.random::<f64>() < s;
            match (smart_split, split) {
                (true, true) => self.smart_split(rng),
                (true, false) => self.dumb_merge(rng),
                (false, true) => self.dumb_split(rng),
                (false, false) => self.smart_merge(rng),
            }
        }
    }

    fn exact(&self) -> bool {
        self.schedule.ratio_form == RatioForm::Exact
    }

    fn ln_h(&self, s: &SuffStats) -> f64 {
        s.ln_joint(&self.data.input_spec)
    }

    /// Log-probability of the sequential allocation of `members` (in index
    /// order) reproducing the two-way split given by `in_a`. When `draw` is
    /// set, the sides are sampled instead and `in_a` is overwritten.
    fn sequential<R: Rng + ?Sized>(
        &self,
        members: &[usize],
        in_a: &mut [bool],
        draw: Option<&mut R>,
    ) -> (f64, Split) {
        let spec = &self.data.input_spec;
        let mut split = Split {
            a: Vec::new(),
            b: Vec::new(),
            stats_a: SuffStats::empty(spec),
            stats_b: SuffStats::empty(spec),
        };
        let mut ln_q = 0.0;
        let mut rng = draw;
        for (idx, &i) in members.iter().enumerate() {
            let x = self.data.row(i);
            let la = split.stats_a.ln_predictive(x, spec);
            let lb = split.stats_b.ln_predictive(x, spec);
            let norm = log_add_exp(la, lb);
            if let Some(r) = rng.as_deref_mut() {
                in_a[idx] = r.random::<f64>().ln() < la - norm;
            }
            if in_a[idx] {
                ln_q += la - norm;
                split.a.push(i);
                split.stats_a.add(x);
            } else {
                ln_q += lb - norm;
                split.b.push(i);
                split.stats_b.add(x);
            }
        }
        (ln_q, split)
    }

    /// Log target ratio of splitting x-cluster `(j, l)` into `split`.
    fn ln_split_target(&self, j: usize, l: usize, split: &Split) -> f64 {
        let xc = &self.ys[j].xs[l];
        self.ys[j].alpha_psi.ln() + ln_gamma(split.a.len() as f64) + ln_gamma(split.b.len() as f64)
            - ln_gamma(xc.members.len() as f64)
            + self.ln_h(&split.stats_a)
            + self.ln_h(&split.stats_b)
            - self.ln_h(&xc.stats)
    }

    /// Replaces x-cluster `(j, l)` by the two halves of `split`.
    fn apply_split(&mut self, j: usize, l: usize, split: Split) {
        let y = &mut self.ys[j];
        y.xs[l] = XCluster { members: split.a, stats: split.stats_a };
        y.xs.push(XCluster { members: split.b, stats: split.stats_b });
        self.relabel(j);
    }

    /// Merges x-cluster `l2` into `l1` within y-cluster `j`.
    fn apply_merge(&mut self, j: usize, l1: usize, l2: usize) {
        let y = &mut self.ys[j];
        let other = y.xs[l2].clone();
        y.xs[l1].members.extend_from_slice(&other.members);
        y.xs[l1].stats.merge(&other.stats);
        y.xs[l2].members.clear();
        self.drop_x(j, l2);
        self.relabel(j);
    }

    /// All x-clusters with more than one member, with `log h(X)`.
    fn splittable(&self) -> Vec<((usize, usize), f64)> {
        let mut out = Vec::new();
        for (j, y) in self.ys.iter().enumerate() {
            for (l, x) in y.xs.iter().enumerate() {
                if x.members.len() > 1 {
                    out.push(((j, l), self.ln_h(&x.stats)));
                }
            }
        }
        out
    }

    fn merge_candidates(&self) -> Vec<(usize, usize)> {
        self.ys
            .iter()
            .enumerate()
            .filter(|(_, y)| y.xs.len() > 1)
            .flat_map(|(j, y)| (0..y.xs.len()).map(move |l| (j, l)))
            .collect()
    }

    fn smart_split<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let sizes = self.x_sizes();
        let cand = self.splittable();
        let neg: Vec<f64> = cand.iter().map(|(_, lh)| -lh).collect();
        let pick = sample_log_categorical(&neg, rng);
        let ((j, l), lh) = cand[pick];
        let members = self.ys[j].xs[l].members.clone();
        let n = members.len();
        let mut in_a = vec![true; n];
        let (ln_seq, split) = self.sequential(&members, &mut in_a, Some(rng));
        if split.a.is_empty() || split.b.is_empty() {
            self.stats.smart_split.record(true);
            return;
        }
        let kj = self.ys[j].xs.len();
        let mut sizes_star = sizes.clone();
        sizes_star[j][l] = split.a.len();
        sizes_star[j].push(split.b.len());
        let k2_star = kx_2plus(&sizes_star);

        let ln_q_fwd = (-lh - log_sum_exp(&neg)) + LN_2 + ln_seq;
        let ln_q_rev = LN_2 - ((k2_star * kj) as f64).ln();
        let mut log_p = self.ln_split_target(j, l, &split) + ln_q_rev - ln_q_fwd;
        if self.exact() {
            log_p += sel_merge(&sizes_star).ln() - sel_split(&sizes).ln();
        }
        let ok = accept(log_p, rng);
        self.stats.smart_split.record(ok);
        if ok {
            self.apply_split(j, l, split);
        }
    }

    fn dumb_merge<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let sizes = self.x_sizes();
        let cand = self.merge_candidates();
        let k2 = cand.len();
        let (j, l1) = cand[rng.random_range(0..k2)];
        let kj = self.ys[j].xs.len();
        let mut l2 = rng.random_range(0..kj - 1);
        if l2 >= l1 {
            l2 += 1;
        }
        let (x1, x2) = (&self.ys[j].xs[l1], &self.ys[j].xs[l2]);
        let mut merged = x1.stats.clone();
        merged.merge(&x2.stats);
        let lh_m = self.ln_h(&merged);
        let (n1, n2) = (x1.members.len() as f64, x2.members.len() as f64);
        let ln_target = -self.ys[j].alpha_psi.ln() + ln_gamma(n1 + n2) - ln_gamma(n1) - ln_gamma(n2) + lh_m
            - self.ln_h(&x1.stats)
            - self.ln_h(&x2.stats);

        // Reverse smart split of the merged cluster, visiting members in index order.
        let mut members: Vec<usize> = x1.members.iter().chain(&x2.members).copied().collect();
        members.sort_unstable();
        let mut in_a: Vec<bool> = members.iter().map(|&i| self.zx[i] == l1).collect();
        let (ln_seq, _) = self.sequential::<R>(&members, &mut in_a, None);
        let mut sizes_star = sizes.clone();
        sizes_star[j][l1] += sizes_star[j][l2];
        sizes_star[j].remove(l2);
        let min_size = if self.exact() { 1 } else { 0 };
        let mut neg_star = vec![-lh_m];
        for (jj, y) in self.ys.iter().enumerate() {
            for (ll, x) in y.xs.iter().enumerate() {
                if jj == j && (ll == l1 || ll == l2) {
                    continue;
                }
                if x.members.len() > min_size {
                    neg_star.push(-self.ln_h(&x.stats));
                }
            }
        }
        let ln_q_rev = (-lh_m - log_sum_exp(&neg_star)) + LN_2 + ln_seq;
        let ln_q_fwd = LN_2 - ((k2 * (kj - 1)) as f64).ln();
        let mut log_p = ln_target + ln_q_rev - ln_q_fwd;
        if self.exact() {
            log_p += sel_split(&sizes_star).ln() - sel_merge(&sizes).ln();
        }
        let ok = accept(log_p, rng);
        self.stats.dumb_merge.record(ok);
        if ok {
            self.apply_merge(j, l1, l2);
        }
    }

    fn dumb_split<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let sizes = self.x_sizes();
        let cand = self.splittable();
        let k1p = cand.len();
        let ((j, l), _) = cand[rng.random_range(0..k1p)];
        let spec = &self.data.input_spec;
        let mut split = Split {
            a: Vec::new(),
            b: Vec::new(),
            stats_a: SuffStats::empty(spec),
            stats_b: SuffStats::empty(spec),
        };
        for &i in &self.ys[j].xs[l].members {
            if rng.random::<bool>() {
                split.a.push(i);
                split.stats_a.add(self.data.row(i));
            } else {
                split.b.push(i);
                split.stats_b.add(self.data.row(i));
            }
        }
        if split.a.is_empty() || split.b.is_empty() {
            self.stats.dumb_split.record(true);
            return;
        }
        let n = self.ys[j].xs[l].members.len() as f64;
        let lh = self.ln_h(&self.ys[j].xs[l].stats);
        let mut sizes_star = sizes.clone();
        sizes_star[j][l] = split.a.len();
        sizes_star[j].push(split.b.len());
        let k2_star = kx_2plus(&sizes_star);

        // Reverse smart merge: select either half first, then the other.
        let others: Vec<&SuffStats> =
            self.ys[j].xs.iter().enumerate().filter(|&(ll, _)| ll != l).map(|(_, x)| &x.stats).collect();
        // Merging one half with the other recovers X_l.
        let merge_norm = |half: &SuffStats| {
            let mut terms = vec![lh];
            for s in &others {
                let mut m = half.clone();
                m.merge(s);
                terms.push(self.ln_h(&m));
            }
            log_sum_exp(&terms)
        };
        let ln_sum = log_add_exp(lh - merge_norm(&split.stats_a), lh - merge_norm(&split.stats_b));
        let ln_q_rev = -(k2_star as f64).ln() + ln_sum;
        let ln_q_fwd = -(k1p as f64).ln() + LN_2 - n * LN_2;
        let mut log_p = self.ln_split_target(j, l, &split) + ln_q_rev - ln_q_fwd;
        if self.exact() {
            log_p += sel_merge(&sizes_star).ln() - sel_split(&sizes).ln();
        }
        let ok = accept(log_p, rng);
        self.stats.dumb_split.record(ok);
        if ok {
            self.apply_split(j, l, split);
        }
    }

    fn smart_merge<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let sizes = self.x_sizes();
        let cand = self.merge_candidates();
        let k2 = cand.len();
        let (j, l1) = cand[rng.random_range(0..k2)];
        let xs = &self.ys[j].xs;
        let kj = xs.len();
        // ln h(X_(a,b)) for all pairs in y-cluster j.
        let mut pair = vec![vec![0.0; kj]; kj];
        for a in 0..kj {
            for b in (a + 1)..kj {
                let mut m = xs[a].stats.clone();
                m.merge(&xs[b].stats);
                pair[a][b] = self.ln_h(&m);
                pair[b][a] = pair[a][b];
            }
        }
        let row = |a: usize| -> Vec<f64> { (0..kj).filter(|&b| b != a).map(|b| pair[a][b]).collect() };
        let partners: Vec<usize> = (0..kj).filter(|&b| b != l1).collect();
        let l2 = partners[sample_log_categorical(&row(l1), rng)];
        let lh_m = pair[l1][l2];
        let ln_q_fwd = -(k2 as f64).ln()
            + log_add_exp(lh_m - log_sum_exp(&row(l1)), lh_m - log_sum_exp(&row(l2)));

        let (x1, x2) = (&xs[l1], &xs[l2]);
        let (n1, n2) = (x1.members.len() as f64, x2.members.len() as f64);
        let ln_target = -self.ys[j].alpha_psi.ln() + ln_gamma(n1 + n2) - ln_gamma(n1) - ln_gamma(n2) + lh_m
            - self.ln_h(&x1.stats)
            - self.ln_h(&x2.stats);
        let mut sizes_star = sizes.clone();
        sizes_star[j][l1] += sizes_star[j][l2];
        sizes_star[j].remove(l2);
        let k1p_star = kx_1plus(&sizes_star);
        let ln_q_rev = -(k1p_star as f64).ln() + LN_2 - (n1 + n2) * LN_2;
        let mut log_p = ln_target + ln_q_rev - ln_q_fwd;
        if self.exact() {
            log_p += sel_split(&sizes_star).ln() - sel_merge(&sizes).ln();
        }
        let ok = accept(log_p, rng);
        self.stats.smart_merge.record(ok);
        if ok {
            self.apply_merge(j, l1, l2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_merge_feasibility() {
        // Only singletons: no split possible.
        assert_eq!(sel_split(&[vec![1, 1]]), 0.0);
        // One x-cluster per y-cluster: no merge possible.
        assert_eq!(sel_split(&[vec![3], vec![1]]), 1.0);
        assert_eq!(sel_split(&[vec![3, 1]]), 0.5);
        assert_eq!(kx_1plus(&[vec![3, 1], vec![2]]), 2);
    }

    #[test]
    fn dumb_split_proposal_probability() {
        // N = 3: (1/k_{x,1+}) * 2 / 2^3 = (1/k_{x,1+}) / 2^2.
        let k1p = 2.0f64;
        let ln_q = -k1p.ln() + LN_2 - 3.0 * LN_2;
        assert!((ln_q.exp() - 1.0 / k1p / 4.0).abs() < 1e-15);
    }
}
