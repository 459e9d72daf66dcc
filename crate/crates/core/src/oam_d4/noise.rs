use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::D;

/// Imperfections of the four-photon experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Std. dev. (rad) of the residual interferometer phase per splitter.
    pub phase_jitter: f64,
    /// Std. dev. (rad) of a random phase on each OAM level of photons 1 and 4.
    pub oam_dephasing: f64,
    /// Independent loss probability per photon.
    pub loss: f64,
    /// Interference visibility at each splitter's recombining PBS.
    pub visibility: f64,
    pub seed: u64,
    /// Noise realizations averaged in analytic mode.
    pub trajectories: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { phase_jitter: 0.0, oam_dephasing: 0.0, loss: 0.0, visibility: 1.0, seed: 0, trajectories: 64 }
    }
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.phase_jitter >= 0.0 && self.phase_jitter.is_finite()) {
            return bad(format!("phase_jitter must be >= 0, got {}", self.phase_jitter));
        }
        if !(self.oam_dephasing >= 0.0 && self.oam_dephasing.is_finite()) {
            return bad(format!("oam_dephasing must be >= 0, got {}", self.oam_dephasing));
        }
        if !(0.0..=1.0).contains(&self.loss) {
            return bad(format!("loss must lie in [0, 1], got {}", self.loss));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return bad(format!("visibility must lie in [0, 1], got {}", self.visibility));
        }
        if self.trajectories == 0 {
            return bad("trajectories must be positive".into());
        }
        Ok(())
    }

    /// True when no realization differs from the ideal one (loss aside).
    pub fn is_coherent(&self) -> bool {
        self.phase_jitter == 0.0 && self.oam_dephasing == 0.0 && self.visibility == 1.0
    }

    /// The realizations averaged in analytic mode: a single ideal pass when the
    /// noise setting is coherent, otherwise `trajectories` draws from stream 0.
    pub fn draws(&self) -> Result<Vec<Option<NoiseRealization>>> {
        self.validate()?;
        if self.is_coherent() {
            return Ok(vec![None]);
        }
        Ok(self.realizations(self.trajectories, 0)?.into_iter().map(Some).collect())
    }

    /// Independent realizations drawn from stream `stream` of the seed.
    pub fn realizations(&self, count: usize, stream: u64) -> Result<Vec<NoiseRealization>> {
        self.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let jitter = Normal::new(0.0, self.phase_jitter).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let deph = Normal::new(0.0, self.oam_dephasing).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let flip = (1.0 - self.visibility) / 2.0;
        Ok((0..count)
            .map(|_| {
                let mut r = NoiseRealization::default();
                for k in 0..2 {
                    r.jitter[k] = jitter.sample(&mut rng);
                    r.level_phase[k] = std::array::from_fn(|_| deph.sample(&mut rng));
                    r.flip[k] = rng.gen::<f64>() < flip;
                    r.lost[k] = [0, 1].map(|_| rng.gen::<f64>() < self.loss);
                }
                r
            })
            .collect())
    }
}

/// One draw of the noise. Index 0 is splitter/photon 1, index 1 splitter 2
/// (photon 4).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseRealization {
    pub jitter: [f64; 2],
    pub level_phase: [[f64; D]; 2],
    /// Sign flip of the exchanged level on the port-A photon.
    pub flip: [bool; 2],
    /// Loss of (port-A photon, auxiliary photon) at each splitter.
    pub lost: [[bool; 2]; 2],
}

impl NoiseRealization {
    pub fn any_loss(&self) -> bool {
        self.lost.iter().flatten().any(|&l| l)
    }
}
