//! Escobar–West auxiliary-variable updates of the concentration parameters.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use super::state::Chain;
use super::Mode;
use crate::model::ScalarPrior;

/// Probability of the shape `u + k - 1` component given the auxiliary
/// variable `xi`.
pub fn ew_shape_weight(xi: f64, k: usize, n: usize, shape: f64, rate: f64) -> f64 {
    let v_hat = rate - xi.ln();
    let a = n as f64 * v_hat;
    a / (a + shape + k as f64 - 1.0)
}

/// One update of a DP concentration `alpha` with `Gamma(shape, rate)` prior
/// given `k` clusters among `n` items.
pub fn escobar_west<R: Rng + ?Sized>(alpha: f64, k: usize, n: usize, shape: f64, rate: f64, rng: &mut R) -> f64 {
    let xi = Beta::new(alpha + 1.0, n as f64).unwrap().sample(rng);
    let v_hat = rate - xi.ln();
    let u_hat = if rng.random::<f64>() < ew_shape_weight(xi, k, n, shape, rate) {
        shape + k as f64 - 1.0
    } else {
        shape + k as f64
    };
    // Tiny alphas can underflow to zero with small shapes.
    Gamma::new(u_hat, 1.0 / v_hat).unwrap().sample(rng).max(f64::MIN_POSITIVE)
}

impl Chain<'_> {
    pub fn update_concentrations<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if let ScalarPrior::Gamma { shape, rate } = self.priors.alpha_theta {
            self.alpha_theta = escobar_west(self.alpha_theta, self.k(), self.data.len(), shape, rate, rng);
        }
        if self.schedule.mode == Mode::Dp {
            return;
        }
        if let ScalarPrior::Gamma { shape, rate } = self.priors.alpha_psi {
            for y in &mut self.ys {
                y.alpha_psi = escobar_west(y.alpha_psi, y.xs.len(), y.members.len(), shape, rate, rng);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_branch_weights() {
        // N_j = 1, k_j = 1: shape u with probability v_hat / (v_hat + u).
        let (u, v, xi) = (1.0, 1.0, 0.5f64);
        let w = ew_shape_weight(xi, 1, 1, u, v);
        let v_hat = v - xi.ln();
        assert!((w - v_hat / (v_hat + u)).abs() < 1e-15);
    }
}
