//! Monte Carlo estimators over independent trials.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::walk::Protocol;
use super::{FriendRecord, ProtocolConfig, Result, WOutcome};

/// Trials per work unit. Chunk boundaries, not worker count, fix the order
/// in which partial sums are combined.
const CHUNK: u64 = 4096;

pub const STREAM_DERIVATION: &str = "trial i draws from ChaCha8Rng::seed_from_u64(seed) with set_stream(i); \
chunks of 4096 consecutive trials are reduced in trial order";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Execution::Parallel;
        #[cfg(not(feature = "parallel"))]
        Execution::Sequential
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: f64,
}

impl Estimate {
    fn from_sums(sum: f64, sum_sq: f64, n: u64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum_sq - sum * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Self { mean, standard_error: (var / nf).sqrt() }
    }

    fn frequency(count: u64, n: u64) -> Self {
        let c = count as f64;
        Self::from_sums(c, c, n)
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.standard_error == 0.0 {
            if self.mean == target { 0.0 } else { f64::INFINITY }
        } else {
            (self.mean - target).abs() / self.standard_error
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub trials: u64,
    pub seed: u64,
    /// Estimate of `E[1_success · x1 · x2]` (weak scheme).
    pub joint_moment_unnormalized: Option<Estimate>,
    pub success_frequency: Option<Estimate>,
    pub record_counts: BTreeMap<FriendRecord, u64>,
    pub alice_plus: Estimate,
    /// Frequencies of W's z (Q1) and x (Q2) outcomes agreeing with the declared record.
    pub q1_matches_record: Option<Estimate>,
    pub q2_matches_record: Option<Estimate>,
}

impl SummaryStats {
    pub fn record_frequency(&self, r: FriendRecord) -> f64 {
        self.record_counts.get(&r).copied().unwrap_or(0) as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, Default)]
struct Acc {
    n: u64,
    moment: f64,
    moment_sq: f64,
    success: u64,
    weak: u64,
    records: [u64; 6],
    alice_plus: u64,
    q1_match: u64,
    q2_match: u64,
    projective: u64,
}

impl Acc {
    fn merge(mut self, o: &Acc) -> Acc {
        self.n += o.n;
        self.moment += o.moment;
        self.moment_sq += o.moment_sq;
        self.success += o.success;
        self.weak += o.weak;
        for (a, b) in self.records.iter_mut().zip(o.records) {
            *a += b;
        }
        self.alice_plus += o.alice_plus;
        self.q1_match += o.q1_match;
        self.q2_match += o.q2_match;
        self.projective += o.projective;
        self
    }
}

fn run_chunk(protocol: &Protocol, seed: u64, start: u64, end: u64) -> Result<Acc> {
    let mut acc = Acc::default();
    for i in start..end {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i);
        let rec = protocol.trial(&mut rng)?;
        acc.n += 1;
        acc.records[rec.friend_record.slot()] += 1;
        if rec.alice_outcome > 0 {
            acc.alice_plus += 1;
        }
        match rec.w_outcome {
            WOutcome::Weak { postselected, positions } => {
                acc.weak += 1;
                if postselected {
                    acc.success += 1;
                }
                if let Some((x1, x2)) = positions {
                    let v = x1 * x2;
                    acc.moment += v;
                    acc.moment_sq += v * v;
                }
            }
            WOutcome::Projective { q1, q2 } => {
                acc.projective += 1;
                let value = rec.friend_record.value();
                if value == Some(q1) {
                    acc.q1_match += 1;
                }
                if value == Some(q2) {
                    acc.q2_match += 1;
                }
            }
        }
    }
    Ok(acc)
}

pub fn run_monte_carlo(config: &ProtocolConfig, n: u64, seed: u64) -> Result<SummaryStats> {
    run_monte_carlo_with(config, n, seed, Execution::default())
}

pub fn run_monte_carlo_with(config: &ProtocolConfig, n: u64, seed: u64, exec: Execution) -> Result<SummaryStats> {
    let config = ProtocolConfig { trials: n, seed, ..config.clone() };
    let protocol = Protocol::new(&config)?;
    let chunks: Vec<(u64, u64)> = (0..n.div_ceil(CHUNK)).map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(n))).collect();
    let partials: Vec<Result<Acc>> = match exec {
        Execution::Sequential => chunks.iter().map(|&(a, b)| run_chunk(&protocol, seed, a, b)).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            chunks.par_iter().map(|&(a, b)| run_chunk(&protocol, seed, a, b)).collect()
        }
    };
    let mut acc = Acc::default();
    for p in partials {
        acc = acc.merge(&p?);
    }
    let weak = acc.weak > 0;
    let projective = acc.projective > 0;
    Ok(SummaryStats {
        trials: n,
        seed,
        joint_moment_unnormalized: weak.then(|| Estimate::from_sums(acc.moment, acc.moment_sq, n)),
        success_frequency: weak.then(|| Estimate::frequency(acc.success, n)),
        record_counts: FriendRecord::ALL
            .iter()
            .zip(acc.records)
            .filter(|(_, c)| *c > 0)
            .map(|(r, c)| (*r, c))
            .collect(),
        alice_plus: Estimate::frequency(acc.alice_plus, n),
        q1_matches_record: projective.then(|| Estimate::frequency(acc.q1_match, n)),
        q2_matches_record: projective.then(|| Estimate::frequency(acc.q2_match, n)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_exact, MeasurementScheme};

    #[test]
    fn sequential_matches_default_execution() {
        let c = ProtocolConfig::default().with_boost(0.2);
        let a = run_monte_carlo_with(&c, 9000, 5, Execution::Sequential).unwrap();
        let b = run_monte_carlo(&c, 9000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_run_agrees_with_exact() {
        let c = ProtocolConfig::default();
        let s = run_monte_carlo(&c, 20_000, 3).unwrap();
        let e = run_exact(&c).unwrap();
        assert!(s.joint_moment_unnormalized.unwrap().within(e.joint_moment_unnormalized.unwrap(), 5.0));
        assert!(s.success_frequency.unwrap().within(e.success_prob.unwrap(), 5.0));
        assert!(s.alice_plus.within(0.5, 5.0));
    }

    #[test]
    fn projective_frequencies() {
        let c = ProtocolConfig::default().with_scheme(MeasurementScheme::Projective);
        let s = run_monte_carlo(&c, 5000, 1).unwrap();
        assert_eq!(s.q1_matches_record.unwrap().mean, 1.0);
        let s = run_monte_carlo(&c.with_boost(0.2), 5000, 1).unwrap();
        assert_eq!(s.q2_matches_record.unwrap().mean, 1.0);
        assert!(s.joint_moment_unnormalized.is_none());
    }

    #[test]
    fn seed_changes_estimates() {
        let c = ProtocolConfig::default();
        let a = run_monte_carlo(&c, 2000, 1).unwrap();
        let b = run_monte_carlo(&c, 2000, 2).unwrap();
        assert_ne!(a.joint_moment_unnormalized, b.joint_moment_unnormalized);
    }
}
