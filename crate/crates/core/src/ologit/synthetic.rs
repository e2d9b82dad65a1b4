//! Synthetic count/rating cohorts for calibrating the model without scans.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::{OrderedLogit, RatingScale};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which count the synthetic rater looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LabelSource {
    /// Rate the clean count, then perturb it: ratings see the truth.
    #[default]
    Pc,
    /// Rate the perturbed count itself.
    Npc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub seed: u64,
    pub lognormal_mu: f64,
    pub lognormal_sigma: f64,
    pub label_source: LabelSource,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 1000,
            seed: 1,
            lognormal_mu: 2.3,
            lognormal_sigma: 0.9,
            label_source: LabelSource::Pc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSample {
    /// Clean count.
    pub pc: u64,
    /// Count after unit Gaussian noise, rounded and floored at zero.
    pub npc: u64,
    /// Rating class.
    pub rc: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticRatingDataset {
    pub samples: Vec<SyntheticSample>,
    /// Generation settings, seed included.
    pub config: SyntheticConfig,
}

impl SyntheticRatingDataset {
    /// `(npc, rc)` pairs, the form the fit consumes.
    pub fn observations(&self) -> Vec<(f64, usize)> {
        self.samples.iter().map(|s| (s.npc as f64, s.rc)).collect()
    }

    pub fn class_counts(&self, classes: usize) -> Vec<usize> {
        let mut out = vec![0; classes];
        for s in &self.samples {
            if s.rc < classes {
                out[s.rc] += 1;
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
        let wr = |w: &mut csv::Writer<std::fs::File>, rec: &[String]| {
            w.write_record(rec).map_err(|e| Error::parse(path, e.to_string()))
        };
        wr(&mut w, &["pc".into(), "npc".into(), "rc".into()])?;
        for s in &self.samples {
            wr(&mut w, &[s.pc.to_string(), s.npc.to_string(), s.rc.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Draws `PC ~ round(LogNormal)`, `NPC = max(0, round(Normal(PC, 1)))`
/// and rates the chosen count on `scale`.
pub fn generate_synthetic(scale: &RatingScale, cfg: &SyntheticConfig) -> Result<SyntheticRatingDataset> {
    if cfg.n == 0 {
        return Err(Error::TooFewSamples(0));
    }
    if !(cfg.lognormal_mu.is_finite() && cfg.lognormal_sigma.is_finite() && cfg.lognormal_sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "log-normal needs finite mu and positive sigma, got {} and {}",
            cfg.lognormal_mu, cfg.lognormal_sigma
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ln = LogNormal::new(cfg.lognormal_mu, cfg.lognormal_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let pcs: Vec<u64> = (0..cfg.n).map(|_| ln.sample(&mut rng).round() as u64).collect();
    let samples = pcs
        .into_iter()
        .map(|pc| {
            let noisy = Normal::new(pc as f64, 1.0).expect("unit sd").sample(&mut rng);
            let npc = noisy.round().max(0.0) as u64;
            let rated = match cfg.label_source {
                LabelSource::Pc => pc,
                LabelSource::Npc => npc,
            };
            SyntheticSample {
                pc,
                npc,
                rc: scale.class_of(rated),
            }
        })
        .collect();
    Ok(SyntheticRatingDataset {
        samples,
        config: cfg.clone(),
    })
}

/// Draws one rating per count from the model itself, via the latent
/// logistic variable.
pub fn simulate_ratings<T: Scalar>(model: &OrderedLogit<T>, counts: &[T], seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    counts
        .iter()
        .map(|&x| {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let latent = model.beta().as_f64() * x.as_f64() + (u / (1.0 - u)).ln();
            model.mu().partition_point(|m| m.as_f64() < latent)
        })
        .collect()
}
