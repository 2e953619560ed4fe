//! Monte-Carlo sampler of the generation, detection, gating and transmission
//! pipeline, used as an independent check of [`crate::output_engine`].
//!
//! Sample `k` draws from its own ChaCha8 stream selected by `k` under a key
//! derived from the seed, so results do not depend on how samples are split
//! across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_models::all_unit_transmissions;
use crate::output_engine::{OutputDistribution, SourceConfig};
use crate::photon_statistics::PairStatistics;

const BLOCK: u64 = 1 << 14;

/// Below this count binomial draws are done trial by trial.
const DIRECT_BINOMIAL_LIMIT: u64 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationEstimate {
    pub counts: Vec<u64>,
    pub samples: u64,
    pub p_hat: Vec<f64>,
    pub std_err: Vec<f64>,
}

impl SimulationEstimate {
    fn from_counts(counts: Vec<u64>, samples: u64) -> Self {
        let n = samples as f64;
        let p_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let std_err = p_hat.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).collect();
        Self {
            counts,
            samples,
            p_hat,
            std_err,
        }
    }

    pub fn p_hat(&self, i: usize) -> f64 {
        self.p_hat.get(i).copied().unwrap_or(0.0)
    }

    pub fn std_err(&self, i: usize) -> f64 {
        self.std_err.get(i).copied().unwrap_or(0.0)
    }

    /// `|p_hat_i - P_i|` in units of the standard error for output photon
    /// number `i`. The error is floored at one count so that empty bins of
    /// negligible exact probability do not divide by zero.
    pub fn sigma_deviation(&self, i: usize, exact: f64) -> f64 {
        let floor = 1.0 / self.samples as f64;
        (self.p_hat(i) - exact).abs() / self.std_err(i).max(floor)
    }

    /// Largest [`Self::sigma_deviation`] over `i = 0..=i_limit`.
    pub fn max_sigma_deviation(&self, exact: &OutputDistribution, i_limit: usize) -> f64 {
        (0..=i_limit)
            .map(|i| self.sigma_deviation(i, exact.get(i)))
            .fold(0.0, f64::max)
    }
}

enum PairSampler {
    Empty,
    Poisson(Poisson<f64>),
    Thermal(Geometric),
}

impl PairSampler {
    fn new(kind: PairStatistics, mean: f64) -> Result<Self> {
        if mean == 0.0 {
            return Ok(PairSampler::Empty);
        }
        let err = |_| Error::invalid("mean", mean, "cannot be sampled");
        Ok(match kind {
            PairStatistics::Poissonian => PairSampler::Poisson(Poisson::new(mean).map_err(err)?),
            PairStatistics::Thermal => {
                PairSampler::Thermal(Geometric::new(1.0 / (1.0 + mean)).map_err(|_| {
                    Error::invalid("mean", mean, "cannot be sampled")
                })?)
            }
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match self {
            PairSampler::Empty => 0,
            PairSampler::Poisson(d) => d.sample(rng) as u64,
            PairSampler::Thermal(d) => d.sample(rng),
        }
    }
}

fn binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    if n <= DIRECT_BINOMIAL_LIMIT {
        (0..n).filter(|_| rng.random::<f64>() < p).count() as u64
    } else {
        // p lies strictly inside (0, 1) here, so construction cannot fail.
        Binomial::new(n, p).map(|d| d.sample(rng)).unwrap_or(0)
    }
}

fn sample_key(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    ChaCha8Rng::seed_from_u64(seed).fill(&mut key);
    key
}

/// Samples `samples` clock periods of the source described by `cfg`.
pub fn simulate(cfg: &SourceConfig, samples: u64, seed: u64) -> Result<SimulationEstimate> {
    cfg.validate()?;
    if samples == 0 {
        return Err(Error::invalid("samples", 0, "must be at least 1"));
    }
    let transmissions = all_unit_transmissions(&cfg.mux, cfg.units)?;
    let pairs = PairSampler::new(cfg.dist.kind(), cfg.dist.mean())?;
    let vd = cfg.detector.efficiency();
    let key = sample_key(seed);

    let blocks = samples.div_ceil(BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut hist: Vec<u64> = vec![0; 4];
            let end = ((b + 1) * BLOCK).min(samples);
            for k in b * BLOCK..end {
                let mut rng = ChaCha8Rng::from_seed(key);
                rng.set_stream(k);
                let mut out = 0u64;
                for &vn in &transmissions {
                    let l = pairs.sample(&mut rng);
                    let j = binomial(&mut rng, l, vd);
                    if j <= u64::from(u32::MAX) && cfg.strategy.accepts(j as u32) {
                        // survivors come from the generated signal photons, not the detected idlers
                        out = binomial(&mut rng, l, vn);
                        break;
                    }
                }
                let out = out as usize;
                if out >= hist.len() {
                    hist.resize(out + 1, 0);
                }
                hist[out] += 1;
            }
            hist
        })
        .reduce(Vec::new, merge_histograms);
    Ok(SimulationEstimate::from_counts(counts, samples))
}

fn merge_histograms(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}
