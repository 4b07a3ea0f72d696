//! Gibbs updates of the latent Gaussian outputs behind ordinal observations.

use rand::Rng;

use super::state::Chain;
use crate::error::Result;
use crate::special::sample_truncated_normal;

impl Chain<'_> {
    /// Single-site Gibbs over the latent outputs of every y-cluster, each
    /// full conditional truncated to the interval of its category.
    pub fn update_latent<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.data.output_kind.is_gaussian() {
            return Ok(());
        }
        for j in 0..self.k() {
            self.rebuild_cache(j)?;
            let members = self.ys[j].members.clone();
            let cache = self.ys[j].cache.as_mut().expect("cache just built");
            for (p, &i) in members.iter().enumerate() {
                let app = cache.ainv[(p, p)];
                let mean = self.latent[i] - cache.resid[p] / app;
                let (lo, hi) = self.data.output_kind.latent_interval(self.data.outputs()[i]);
                let t = sample_truncated_normal(mean, 1.0 / app, lo, hi, rng);
                let delta = t - self.latent[i];
                cache.resid.axpy(delta, &cache.ainv.column(p), 1.0);
                self.latent[i] = t;
            }
            // Keep the stored latent value strictly inside its interval.
            for &i in &members {
                let (lo, hi) = self.data.output_kind.latent_interval(self.data.outputs()[i]);
                if self.latent[i] <= lo {
                    self.latent[i] = lo + f64::EPSILON * lo.abs().max(1.0);
                }
                if self.latent[i] > hi {
                    self.latent[i] = hi;
                }
            }
            self.ys[j].cache = None;
        }
        Ok(())
    }
}
