//! Global moves relocating whole x-clusters between y-clusters.

use rand::Rng;

use super::state::{Chain, YCluster};
use super::RatioForm;
use crate::error::Result;
use crate::model::ExpertParams;
use crate::special::{ln_gamma, log_sum_exp, sample_log_categorical};

pub(crate) fn kx_2plus(kjs: &[usize]) -> usize {
    kjs.iter().filter(|&&k| k > 1).sum()
}

pub(crate) fn kx_1(kjs: &[usize]) -> usize {
    kjs.iter().filter(|&&k| k == 1).count()
}

/// Probability of choosing Move 2 (rather than Move 3) in a state with the
/// given counts.
fn sel_move2(k2: usize, k1: usize) -> f64 {
    if k2 == 0 {
        0.0
    } else if k1 == 0 {
        1.0
    } else {
        0.5
    }
}

fn accept<R: Rng + ?Sized>(log_p: f64, rng: &mut R) -> bool {
    log_p >= 0.0 || rng.random::<f64>().ln() < log_p
}

impl Chain<'_> {
    fn kjs(&self) -> Vec<usize> {
        self.ys.iter().map(|y| y.xs.len()).collect()
    }

    /// Move 1, then Move 2 or Move 3.
    pub fn y_moves<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if kx_2plus(&self.kjs()) > 0 && self.k() > 1 {
            self.move1(rng)?;
        }
        let kjs = self.kjs();
        let (k2, k1) = (kx_2plus(&kjs), kx_1(&kjs));
        if k2 == 0 && (k1 == 0 || self.k() < 2) {
            return Ok(());
        }
        if rng.random::<f64>() < sel_move2(k2, k1) {
            self.move2(rng)?;
        } else {
            self.move3(rng)?;
        }
        Ok(())
    }

    /// x-clusters nested in y-clusters with more than one x-cluster.
    fn movable_x(&self) -> Vec<(usize, usize)> {
        self.ys
            .iter()
            .enumerate()
            .filter(|(_, y)| y.xs.len() > 1)
            .flat_map(|(j, y)| (0..y.xs.len()).map(move |l| (j, l)))
            .collect()
    }

    /// Members of y-cluster `j` outside x-cluster `l`.
    fn rest_of(&self, j: usize, l: usize) -> Vec<usize> {
        let y = &self.ys[j];
        y.members.iter().copied().filter(|&i| self.zx[i] != l).collect()
    }

    /// Moves x-cluster `(j, l)` into y-cluster `h`, dropping `j` if it empties.
    fn transfer_x(&mut self, j: usize, l: usize, h: usize) {
        let xc = self.ys[j].xs.swap_remove(l);
        let y = &mut self.ys[j];
        y.members.retain(|i| !xc.members.contains(i));
        y.cache = None;
        self.ys[h].members.extend_from_slice(&xc.members);
        self.ys[h].xs.push(xc);
        self.ys[h].cache = None;
        self.relabel(h);
        if self.ys[j].members.is_empty() {
            self.drop_y(j);
        } else {
            self.relabel(j);
        }
    }

    fn move1<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let cand = self.movable_x();
        let k2 = cand.len();
        let (j, l) = cand[rng.random_range(0..k2)];
        let block = self.ys[j].xs[l].members.clone();
        let targets: Vec<usize> = (0..self.k()).filter(|&h| h != j).collect();
        let mut c = Vec::with_capacity(targets.len());
        for &h in &targets {
            c.push(self.ln_conditional(&block, &self.ys[h].members, &self.ys[h].params)?);
        }
        let h = targets[sample_log_categorical(&c, rng)];

        // Reverse proposal normaliser: destinations other than h, with j reduced.
        let rest_j = self.rest_of(j, l);
        let mut c_rev = Vec::with_capacity(targets.len());
        for (&h2, &ch) in targets.iter().zip(&c) {
            if h2 != h {
                c_rev.push(ch);
            }
        }
        c_rev.push(self.ln_conditional(&block, &rest_j, &self.ys[j].params)?);

        let (yj, yh) = (&self.ys[j], &self.ys[h]);
        let (nj, nh, nl) = (yj.size() as f64, yh.size() as f64, block.len() as f64);
        let (aj, ah) = (yj.alpha_psi, yh.alpha_psi);
        let (kj, kh) = (yj.xs.len(), yh.xs.len());
        let k2_star = k2 - (kj == 2) as usize + (kh == 1) as usize;
        let log_p = ln_gamma(nj - nl) + ln_gamma(nh + nl) - ln_gamma(nj) - ln_gamma(nh) + ln_gamma(aj + nj)
            - ln_gamma(aj + nj - nl)
            + ln_gamma(ah + nh)
            - ln_gamma(ah + nh + nl)
            + ah.ln()
            - aj.ln()
            + (k2 as f64).ln()
            - (k2_star as f64).ln()
            + log_sum_exp(&c)
            - log_sum_exp(&c_rev);
        let ok = accept(log_p, rng);
        self.stats.move1.record(ok);
        if ok {
            self.transfer_x(j, l, h);
        }
        Ok(())
    }

    fn move2<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let kjs = self.kjs();
        let (k2, k1) = (kx_2plus(&kjs), kx_1(&kjs));
        let cand = self.movable_x();
        let (j, l) = cand[rng.random_range(0..k2)];
        let fresh: ExpertParams = self.priors.sample_expert(rng);
        let a_new = self.priors.alpha_psi.sample(rng);
        let block = self.ys[j].xs[l].members.clone();
        let ln_new = self.ln_marginal(&block, &fresh)?;

        let rest_j = self.rest_of(j, l);
        let mut c_rev = Vec::with_capacity(self.k());
        for h in 0..self.k() {
            let other = if h == j { &rest_j } else { &self.ys[h].members };
            c_rev.push(self.ln_conditional(&block, other, &self.ys[h].params)?);
        }

        let yj = &self.ys[j];
        let (nj, nl, aj) = (yj.size() as f64, block.len() as f64, yj.alpha_psi);
        let kj = yj.xs.len();
        let mut log_p = ln_gamma(nj - nl) + ln_gamma(nl) - ln_gamma(nj) + ln_gamma(aj + nj) - ln_gamma(aj + nj - nl)
            + ln_gamma(a_new)
            - ln_gamma(a_new + nl)
            + self.alpha_theta.ln()
            + a_new.ln()
            - aj.ln()
            + (k2 as f64).ln()
            + ln_new
            - log_sum_exp(&c_rev);
        match self.schedule.ratio_form {
            RatioForm::Exact => {
                let k1_star = k1 + 1 + (kj == 2) as usize;
                let k2_star = k2 - if kj == 2 { 2 } else { 1 };
                let sel3_star = 1.0 - sel_move2(k2_star, k1_star);
                log_p += -(k1_star as f64).ln() + sel3_star.ln() - sel_move2(k2, k1).ln();
            }
            RatioForm::Simplified => log_p -= (k1 as f64).ln(),
        }
        let ok = accept(log_p, rng);
        self.stats.move2.record(ok);
        if ok {
            self.ys.push(YCluster {
                params: fresh,
                alpha_psi: a_new,
                members: Vec::new(),
                xs: Vec::new(),
                cache: None,
            });
            let h = self.ys.len() - 1;
            self.transfer_x(j, l, h);
        }
        Ok(())
    }

    fn move3<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let kjs = self.kjs();
        let (k2, k1) = (kx_2plus(&kjs), kx_1(&kjs));
        let singles: Vec<usize> = (0..self.k()).filter(|&j| kjs[j] == 1).collect();
        let j = singles[rng.random_range(0..k1)];
        let block = self.ys[j].members.clone();
        let targets: Vec<usize> = (0..self.k()).filter(|&h| h != j).collect();
        let mut c = Vec::with_capacity(targets.len());
        for &h in &targets {
            c.push(self.ln_conditional(&block, &self.ys[h].members, &self.ys[h].params)?);
        }
        let h = targets[sample_log_categorical(&c, rng)];
        let ln_own = self.ln_marginal(&block, &self.ys[j].params)?;

        let (yj, yh) = (&self.ys[j], &self.ys[h]);
        let (nj, nh, aj, ah) = (yj.size() as f64, yh.size() as f64, yj.alpha_psi, yh.alpha_psi);
        let k2_star = k2 + if kjs[h] == 1 { 2 } else { 1 };
        let mut log_p = ln_gamma(nh + nj) - ln_gamma(nh) - ln_gamma(nj) + ln_gamma(aj + nj) + ln_gamma(ah + nh)
            - ln_gamma(ah + nh + nj)
            - ln_gamma(aj)
            - self.alpha_theta.ln()
            + ah.ln()
            - aj.ln()
            + (k1 as f64).ln()
            - (k2_star as f64).ln()
            + log_sum_exp(&c)
            - ln_own;
        if self.schedule.ratio_form == RatioForm::Exact {
            let k1_star = k1 - 1 - (kjs[h] == 1) as usize;
            let sel3 = 1.0 - sel_move2(k2, k1);
            log_p += sel_move2(k2_star, k1_star).ln() - sel3.ln();
        }
        let ok = accept(log_p, rng);
        self.stats.move3.record(ok);
        if ok {
            self.transfer_x(j, 0, h);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_degenerates_to_feasible_move() {
        assert_eq!(sel_move2(0, 3), 0.0);
        assert_eq!(sel_move2(4, 0), 1.0);
        assert_eq!(sel_move2(2, 1), 0.5);
    }

    #[test]
    fn count_helpers() {
        assert_eq!(kx_2plus(&[1, 2, 3]), 5);
        assert_eq!(kx_1(&[1, 2, 1]), 2);
    }
}
