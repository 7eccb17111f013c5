//! Seeded Monte Carlo simulation of the feed-forward receiver.
//!
//! Every random draw comes from a ChaCha8 stream addressed by
//! `(seed, trial, channel)`: the trial selects the stream and the channel a
//! fixed word offset inside it. A trial's outcome therefore does not depend on
//! which shard or thread runs it, and tallies are integer sums, so results are
//! bit-identical for any shard count.

use core::ops::Range;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::coherent::{Amplitude, BinaryEnsemble, DetectorKind, DetectorModel, Hypothesis};
use crate::error::{Error, Result};
use crate::feedforward::{map_decision, sign_index, ChannelPlan, PreparedChain};

/// Means below this are sampled by CDF inversion, above by rejection.
pub const INVERSION_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub shards: u32,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            shards: 1,
        }
    }

    pub fn with_shards(mut self, shards: u32) -> Self {
        self.shards = shards;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Contract("at least one trial is required"));
        }
        if self.shards == 0 {
            return Err(Error::Contract("at least one shard is required"));
        }
        Ok(())
    }

    /// Contiguous trial ranges, one per shard.
    pub fn shard_ranges(&self) -> impl Iterator<Item = Range<u64>> + '_ {
        let shards = self.shards.max(1) as u64;
        let base = self.trials / shards;
        let extra = self.trials % shards;
        (0..shards).map(move |s| {
            let start = s * base + s.min(extra);
            let len = base + u64::from(s < extra);
            start..start + len
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// Error-rate estimate and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub error_rate: f64,
    /// Binomial standard error for Monte Carlo, 0 for exact results.
    pub std_error: f64,
    pub trials: u64,
    pub method: Method,
    pub seed: Option<u64>,
}

impl ErrorReport {
    pub fn exact(error_rate: f64) -> Self {
        Self {
            error_rate,
            std_error: 0.0,
            trials: 0,
            method: Method::Exact,
            seed: None,
        }
    }

    pub fn from_tally(errors: u64, trials: u64, seed: u64) -> Self {
        let rate = errors as f64 / trials as f64;
        Self {
            error_rate: rate,
            std_error: libm::sqrt(rate * (1.0 - rate) / trials as f64),
            trials,
            method: Method::MonteCarlo,
            seed: Some(seed),
        }
    }
}

/// Draws a detector outcome for displaced amplitude `mu`: a Poisson count of
/// mean `efficiency * mu^2 + dark_mean`, clipped to 1 for on-off detectors.
pub fn sample_outcome<R: RngCore + ?Sized>(mu: Amplitude, det: &DetectorModel, rng: &mut R) -> u64 {
    sample_count(det.effective_mean(mu), det.kind(), rng)
}

fn sample_count<R: RngCore + ?Sized>(mean: f64, kind: DetectorKind, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut p = libm::exp(-mean);
        let mut cdf = p;
        let mut n = 0u64;
        if kind == DetectorKind::OnOff {
            return u64::from(u >= cdf);
        }
        while u >= cdf && p > 0.0 {
            n += 1;
            p *= mean / n as f64;
            cdf += p;
        }
        return n;
    }
    let n = match Poisson::new(mean) {
        Ok(dist) => dist.sample(rng) as u64,
        Err(_) => libm::round(mean) as u64,
    };
    match kind {
        DetectorKind::OnOff => n.min(1),
        DetectorKind::PhotonNumberResolving => n,
    }
}

/// Base key of the counter-based streams for `seed`.
fn stream_key(seed: u64) -> <ChaCha8Rng as SeedableRng>::Seed {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

/// Word offset of the sub-stream used by `slot` inside a trial's stream.
/// Slot 0 draws the true hypothesis, slot `k + 1` serves channel `k`.
#[inline]
fn slot_offset(slot: usize) -> u128 {
    (slot as u128) << 32
}

/// Result of simulating one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub truth: Hypothesis,
    pub decision: Hypothesis,
}

pub(crate) fn run_trial(
    chain: &PreparedChain,
    key: &<ChaCha8Rng as SeedableRng>::Seed,
    trial: u64,
    outcomes: Option<&mut alloc::vec::Vec<u64>>,
) -> TrialOutcome {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(trial);
    rng.set_word_pos(slot_offset(0));
    let truth = if rng.random::<f64>() < chain.p1 {
        Hypothesis::First
    } else {
        Hypothesis::Second
    };
    let h = match truth {
        Hypothesis::First => 0,
        Hypothesis::Second => 1,
    };
    let det = &chain.detector;
    let mut record = outcomes;
    let mut posterior = chain.p1;
    for (k, ch) in chain.channels.iter().enumerate() {
        rng.set_word_pos(slot_offset(k + 1));
        let sign = sign_index(posterior);
        let n = sample_count(ch.means[sign][h], det.kind(), &mut rng);
        if let Some(r) = record.as_deref_mut() {
            r.push(n);
        }
        let (l1, l2) = if n <= ch.n_max {
            let table = &ch.likelihood[sign];
            (table[0][n as usize], table[1][n as usize])
        } else {
            (det.likelihood(n, ch.mu[sign][0]), det.likelihood(n, ch.mu[sign][1]))
        };
        let w1 = posterior * l1;
        let w2 = (1.0 - posterior) * l2;
        if w1 + w2 > 0.0 {
            posterior = w1 / (w1 + w2);
        }
    }
    TrialOutcome {
        truth,
        decision: map_decision(posterior),
    }
}

/// Counts decision errors over the trial indices in `trials`.
pub fn simulate_shard(
    plan: &ChannelPlan,
    e: &BinaryEnsemble,
    seed: u64,
    trials: Range<u64>,
) -> Result<u64> {
    let chain = PreparedChain::new(plan, e)?;
    let key = stream_key(seed);
    Ok(trials
        .filter(|&t| {
            let o = run_trial(&chain, &key, t, None);
            o.truth != o.decision
        })
        .count() as u64)
}

/// Replays trial `trial` and returns its outcomes along with the result.
pub fn replay_trial(
    plan: &ChannelPlan,
    e: &BinaryEnsemble,
    seed: u64,
    trial: u64,
) -> Result<(TrialOutcome, alloc::vec::Vec<u64>)> {
    let chain = PreparedChain::new(plan, e)?;
    let mut outcomes = alloc::vec::Vec::with_capacity(plan.n_channels());
    let o = run_trial(&chain, &stream_key(seed), trial, Some(&mut outcomes));
    Ok((o, outcomes))
}

/// Monte Carlo estimate of the plan's error rate. Shards run one after the
/// other here; any parallel driver that sums [`simulate_shard`] over
/// [`SimConfig::shard_ranges`] gets the same tally.
pub fn simulate(plan: &ChannelPlan, e: &BinaryEnsemble, cfg: &SimConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    let mut errors = 0;
    for range in cfg.shard_ranges() {
        errors += simulate_shard(plan, e, cfg.seed, range)?;
    }
    Ok(ErrorReport::from_tally(errors, cfg.trials, cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedforward::{exact_error, run_chain};
    use alloc::vec::Vec;

    fn bpsk(m: f64, p1: f64) -> BinaryEnsemble {
        BinaryEnsemble::bpsk(m, p1).unwrap()
    }

    fn mean_and_sigma(draws: &[u64], var: f64) -> (f64, f64) {
        let mean = draws.iter().sum::<u64>() as f64 / draws.len() as f64;
        (mean, libm::sqrt(var / draws.len() as f64))
    }

    #[test]
    fn zero_mean_never_clicks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let det = DetectorModel::pnr();
        assert!((0..10_000).all(|_| sample_outcome(Amplitude::ZERO, &det, &mut rng) == 0));
    }

    #[test]
    fn sample_means_match_effective_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mu = Amplitude::new(1.0).unwrap();
        let ideal = DetectorModel::pnr();
        let draws: Vec<u64> = (0..1_000_000).map(|_| sample_outcome(mu, &ideal, &mut rng)).collect();
        let (mean, sigma) = mean_and_sigma(&draws, 1.0);
        assert!((mean - 1.0).abs() < 3.0 * sigma, "{mean}");

        let noisy = ideal.with_efficiency(0.5).unwrap().with_dark_mean(0.1).unwrap();
        let draws: Vec<u64> = (0..1_000_000).map(|_| sample_outcome(mu, &noisy, &mut rng)).collect();
        let (mean, sigma) = mean_and_sigma(&draws, 0.6);
        assert!((mean - 0.6).abs() < 3.0 * sigma, "{mean}");
    }

    /// Chi-square goodness of fit against the pmf, both sampling branches.
    #[test]
    fn sampler_matches_pmf() {
        // 0.999 quantiles of chi-square with the given degrees of freedom
        fn critical(dof: usize) -> f64 {
            // Wilson-Hilferty approximation
            let k = dof as f64;
            let z = 3.090_232_306;
            k * libm::pow(1.0 - 2.0 / (9.0 * k) + z * libm::sqrt(2.0 / (9.0 * k)), 3.0)
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mean in [0.7, 4.0, 25.0] {
            let draws = 200_000usize;
            let n_max = crate::coherent::poisson_truncation(mean) as usize;
            let mut counts = alloc::vec![0usize; n_max + 1];
            for _ in 0..draws {
                let n = sample_count(mean, DetectorKind::PhotonNumberResolving, &mut rng) as usize;
                counts[n.min(n_max)] += 1;
            }
            // pool cells with expected count below 5
            let mut stat = 0.0;
            let mut cells = 0;
            let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
            for (n, &c) in counts.iter().enumerate() {
                obs_acc += c as f64;
                exp_acc += draws as f64 * crate::coherent::poisson_pmf(n as u64, mean).unwrap();
                if exp_acc >= 5.0 {
                    stat += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
                    cells += 1;
                    obs_acc = 0.0;
                    exp_acc = 0.0;
                }
            }
            assert!(stat < critical(cells - 1), "mean={mean} chi2={stat} cells={cells}");
        }
    }

    #[test]
    fn kennedy_rate_is_reproduced() {
        let plan = ChannelPlan::single(0.0, DetectorModel::on_off()).unwrap();
        let r = simulate(&plan, &bpsk(0.25, 0.5), &SimConfig::new(1_000_000, 11)).unwrap();
        let k = 0.5 * libm::exp(-1.0);
        assert!((r.error_rate - k).abs() < 3.0 * r.std_error, "{r:?}");
        assert_eq!(r.method, Method::MonteCarlo);
        assert_eq!(r.seed, Some(11));
    }

    #[test]
    fn certain_prior_only_counts_first_state_errors() {
        let e = bpsk(0.25, 1.0);
        let plan = ChannelPlan::asymptotic(3, 0.25, DetectorModel::on_off()).unwrap();
        let r = simulate(&plan, &e, &SimConfig::new(20_000, 5)).unwrap();
        let exact = exact_error(&plan, &e).unwrap();
        assert_eq!(exact, 0.0);
        assert_eq!(r.error_rate, 0.0);
    }

    #[test]
    fn shard_count_does_not_change_result() {
        let e = bpsk(0.4, 0.45);
        let plan = ChannelPlan::asymptotic(5, 0.4, DetectorModel::on_off()).unwrap();
        let base = simulate(&plan, &e, &SimConfig::new(50_001, 99)).unwrap();
        for shards in [2, 3, 8, 17] {
            let cfg = SimConfig::new(50_001, 99).with_shards(shards);
            let r = simulate(&plan, &e, &cfg).unwrap();
            assert_eq!(r.error_rate.to_bits(), base.error_rate.to_bits());
        }
    }

    #[test]
    fn shard_ranges_cover_trials() {
        let cfg = SimConfig::new(10, 0).with_shards(4);
        let ranges: Vec<_> = cfg.shard_ranges().collect();
        assert_eq!(ranges, alloc::vec![0..3, 3..6, 6..8, 8..10]);
    }

    #[test]
    fn single_trial_report() {
        let plan = ChannelPlan::single(0.0, DetectorModel::on_off()).unwrap();
        let r = simulate(&plan, &bpsk(0.25, 0.5), &SimConfig::new(1, 3)).unwrap();
        assert!(r.error_rate == 0.0 || r.error_rate == 1.0);
        assert_eq!(r.std_error, 0.0);
        assert!(simulate(&plan, &bpsk(0.25, 0.5), &SimConfig::new(0, 3)).is_err());
    }

    #[test]
    fn trial_decisions_agree_with_run_chain() {
        let e = bpsk(0.3, 0.4);
        for det in [DetectorModel::on_off(), DetectorModel::pnr()] {
            let plan = ChannelPlan::new(
                alloc::vec![0.1, 0.3, 0.6],
                alloc::vec![0.4, 0.2, 0.1],
                det,
            )
            .unwrap();
            for t in 0..500 {
                let (o, outcomes) = replay_trial(&plan, &e, 21, t).unwrap();
                let chain = run_chain(&plan, &e, &outcomes).unwrap();
                assert_eq!(chain.decision, o.decision, "trial {t}: {outcomes:?}");
            }
        }
    }
}
