//! Pair-source photon statistics, binomial thinning and detector click
//! probabilities.
//!
//! Every function here is a pure function of its arguments. Infinite sums over
//! the generated pair number `l` are truncated at the first `l_max` whose
//! cumulative pair probability reaches `1 - tail_tol`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};

/// Default series truncation tolerance.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Default number of photons the detector can tell apart.
pub const DEFAULT_RESOLUTION_CAP: u32 = 10;

/// Hard ceiling on the truncation point, reached only for absurd means.
const MAX_SERIES_LEN: usize = 200_000;

/// Below this photon number the binomial coefficient is evaluated exactly.
const EXACT_BINOMIAL_LIMIT: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatistics {
    Poissonian,
    Thermal,
}

impl fmt::Display for PairStatistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairStatistics::Poissonian => f.write_str("poissonian"),
            PairStatistics::Thermal => f.write_str("thermal"),
        }
    }
}

/// Photon-pair number distribution of a single nonlinear source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDistribution {
    kind: PairStatistics,
    mean: f64,
}

impl PairDistribution {
    pub fn new(kind: PairStatistics, mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::invalid("mean", mean, "must be a finite non-negative number"));
        }
        Ok(Self { kind, mean })
    }

    pub fn poissonian(mean: f64) -> Result<Self> {
        Self::new(PairStatistics::Poissonian, mean)
    }

    pub fn thermal(mean: f64) -> Result<Self> {
        Self::new(PairStatistics::Thermal, mean)
    }

    pub fn kind(&self) -> PairStatistics {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Same statistics, different mean.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        Self::new(self.kind, mean)
    }

    /// Probability that exactly `l` pairs are generated.
    pub fn pmf(&self, l: u32) -> f64 {
        let lam = self.mean;
        if lam == 0.0 {
            return if l == 0 { 1.0 } else { 0.0 };
        }
        let l_f = f64::from(l);
        match self.kind {
            PairStatistics::Poissonian => (l_f * lam.ln() - lam - ln_factorial(l)).exp(),
            PairStatistics::Thermal => (l_f * lam.ln() - (l_f + 1.0) * lam.ln_1p()).exp(),
        }
    }

    /// Pair probabilities `P(0..=l_max)` where `l_max` is the first index whose
    /// cumulative mass reaches `1 - tail_tol`.
    pub fn pmf_table(&self, tail_tol: f64) -> Vec<f64> {
        let lam = self.mean;
        if lam == 0.0 {
            return vec![1.0];
        }
        let kind = self.kind;
        let mut p = match kind {
            PairStatistics::Poissonian => (-lam).exp(),
            PairStatistics::Thermal => 1.0 / (1.0 + lam),
        };
        let ratio = |l: usize| match kind {
            PairStatistics::Poissonian => lam / (l as f64 + 1.0),
            PairStatistics::Thermal => lam / (1.0 + lam),
        };
        let mut table = Vec::with_capacity(32);
        let mut cumulative = 0.0;
        let target = 1.0 - tail_tol;
        for l in 0..MAX_SERIES_LEN {
            table.push(p);
            cumulative += p;
            if cumulative >= target {
                break;
            }
            // Underflow past the mode means the remaining tail is negligible.
            if p == 0.0 && l as f64 > lam {
                break;
            }
            p *= ratio(l);
        }
        table
    }
}

/// Photon-number-resolving detector with efficiency `V_D` that can
/// distinguish photon numbers up to `resolution_cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    efficiency: f64,
    resolution_cap: u32,
}

impl DetectorModel {
    pub fn new(efficiency: f64, resolution_cap: u32) -> Result<Self> {
        check_unit_interval("detector.efficiency", efficiency)?;
        if resolution_cap == 0 {
            return Err(Error::invalid("detector.resolution_cap", 0, "must be at least 1"));
        }
        Ok(Self {
            efficiency,
            resolution_cap,
        })
    }

    /// Detector with the default resolution cap.
    pub fn with_efficiency(efficiency: f64) -> Result<Self> {
        Self::new(efficiency, DEFAULT_RESOLUTION_CAP)
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn resolution_cap(&self) -> u32 {
        self.resolution_cap
    }
}

/// Which detected idler photon numbers open the multiplexer input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeraldingStrategy {
    /// Any click heralds (threshold-detector operation).
    ThresholdAll,
    /// Only the listed detected photon numbers herald.
    Accepted(BTreeSet<u32>),
}

impl HeraldingStrategy {
    /// Exactly-one-photon heralding.
    pub fn single() -> Self {
        HeraldingStrategy::Accepted(BTreeSet::from([1]))
    }

    /// `{1, 2, ..., max_accepted}`.
    pub fn up_to(max_accepted: u32) -> Result<Self> {
        if max_accepted == 0 {
            return Err(Error::invalid("strategy.max_accepted", 0, "must be at least 1"));
        }
        Ok(HeraldingStrategy::Accepted((1..=max_accepted).collect()))
    }

    pub fn accepted<I: IntoIterator<Item = u32>>(values: I) -> Result<Self> {
        let set: BTreeSet<u32> = values.into_iter().collect();
        if set.is_empty() {
            return Err(Error::invalid("strategy.accepted", "[]", "must not be empty"));
        }
        if set.contains(&0) {
            return Err(Error::invalid("strategy.accepted", 0, "accepted photon numbers start at 1"));
        }
        Ok(HeraldingStrategy::Accepted(set))
    }

    /// Checks the strategy against the detector's resolution cap.
    pub fn validate_for(&self, detector: &DetectorModel) -> Result<()> {
        match self {
            HeraldingStrategy::ThresholdAll => Ok(()),
            HeraldingStrategy::Accepted(set) => {
                if set.is_empty() {
                    return Err(Error::invalid("strategy.accepted", "[]", "must not be empty"));
                }
                if set.contains(&0) {
                    return Err(Error::invalid(
                        "strategy.accepted",
                        0,
                        "accepted photon numbers start at 1",
                    ));
                }
                match set.iter().next_back() {
                    Some(&max) if max > detector.resolution_cap() => Err(Error::invalid(
                        "strategy.accepted",
                        max,
                        "exceeds the detector resolution cap",
                    )),
                    _ => Ok(()),
                }
            }
        }
    }

    /// Whether `j` detected photons herald.
    pub fn accepts(&self, j: u32) -> bool {
        match self {
            HeraldingStrategy::ThresholdAll => j >= 1,
            HeraldingStrategy::Accepted(set) => set.contains(&j),
        }
    }

    /// Short label used in reports: `threshold`, `spd`, or `{1,2}`.
    pub fn label(&self) -> String {
        match self {
            HeraldingStrategy::ThresholdAll => "threshold".to_owned(),
            HeraldingStrategy::Accepted(set) if set.len() == 1 && set.contains(&1) => "spd".to_owned(),
            HeraldingStrategy::Accepted(set) => {
                let items: Vec<String> = set.iter().map(u32::to_string).collect();
                format!("{{{}}}", items.join(";"))
            }
        }
    }
}

impl fmt::Display for HeraldingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| f64::from(k).ln()).sum()
}

fn ln_choose(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| (f64::from(n - k + i) / f64::from(i)).ln()).sum()
}

fn exact_choose(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 1..=u64::from(k) {
        c = c * (u64::from(n - k) + i) / i;
    }
    c as f64
}

/// `C(n, k) p^k (1-p)^(n-k)`, zero when `k > n`.
pub(crate) fn binomial_pmf(k: u32, n: u32, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    if n <= EXACT_BINOMIAL_LIMIT {
        exact_choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    } else {
        (ln_choose(n, k) + f64::from(k) * p.ln() + f64::from(n - k) * (-p).ln_1p()).exp()
    }
}

/// Probability of generating `l` photon pairs.
pub fn pair_pmf(dist: &PairDistribution, l: u32) -> f64 {
    dist.pmf(l)
}

/// Probability that the detector registers `j` of `l` incident photons.
pub fn detect_conditional(j: u32, l: u32, det: &DetectorModel) -> Result<f64> {
    if j > l {
        return Err(Error::Domain(format!("cannot detect {j} of {l} photons")));
    }
    Ok(binomial_pmf(j, l, det.efficiency()))
}

fn check_tail_tol(tail_tol: f64) -> Result<()> {
    if tail_tol > 0.0 && tail_tol < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("tail_tol", tail_tol, "must lie in (0, 1)"))
    }
}

/// Total probability of detecting exactly `j` photons.
pub fn detect_total(j: u32, dist: &PairDistribution, det: &DetectorModel, tail_tol: f64) -> Result<f64> {
    check_tail_tol(tail_tol)?;
    let pairs = dist.pmf_table(tail_tol);
    let v = det.efficiency();
    Ok(pairs
        .iter()
        .enumerate()
        .skip(j as usize)
        .map(|(l, p)| binomial_pmf(j, l as u32, v) * p)
        .sum())
}

/// Probability that a single unit heralds under `strategy`.
pub fn herald_probability(
    strategy: &HeraldingStrategy,
    dist: &PairDistribution,
    det: &DetectorModel,
    tail_tol: f64,
) -> Result<f64> {
    strategy.validate_for(det)?;
    match strategy {
        HeraldingStrategy::ThresholdAll => Ok(1.0 - detect_total(0, dist, det, tail_tol)?),
        HeraldingStrategy::Accepted(set) => set
            .iter()
            .map(|&j| detect_total(j, dist, det, tail_tol))
            .sum(),
    }
}
