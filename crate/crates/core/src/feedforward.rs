//! Multichannel feed-forward receiver.
//!
//! The signal is split into `N` channels. Channel `k` is displaced with the
//! sign rule of the single-channel receiver applied to the current posterior,
//! detected, and the posterior is updated by Bayes' rule before moving on to
//! channel `k + 1`. The receiver reports the hypothesis with the larger final
//! posterior.
//!
//! Error rates are computed exactly by walking the full outcome tree (every
//! sequence of counts), which is feasible for on-off detection up to 24
//! channels and for small photon-number-resolving plans.

use alloc::vec;
use alloc::vec::Vec;

use crate::coherent::{
    check_probability, Amplitude, BinaryEnsemble, DetectorKind, DetectorModel, Hypothesis,
};
use crate::error::{Error, Result};
use crate::optimizer::{
    first_local_min_scan, golden_section, simplex_minimize_with, BracketKind, SimplexOptions,
};
use crate::single_channel::{build_displaced, BETA_SCAN_POINTS, BETA_TOL};
use crate::sum::NeumaierSum;

/// Largest on-off plan evaluated by enumeration (`2^N` leaves).
pub const MAX_ONOFF_CHANNELS: usize = 24;
/// Largest number of leaves for photon-number-resolving enumeration.
pub const MAX_PNR_BRANCHES: f64 = 1e7;
/// Objective spread at which the joint plan search stops.
pub const PLAN_FTOL: f64 = 1e-9;

const FRACTION_SUM_TOL: f64 = 1e-12;

/// Energy split and displacement increments for every channel.
///
/// `beta_schedule[k]` is the increment applied inside channel `k`, in the
/// same amplitude units as that channel's share `alpha * sqrt(fraction_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    fractions: Vec<f64>,
    betas: Vec<f64>,
    detector: DetectorModel,
}

impl ChannelPlan {
    pub fn new(fractions: Vec<f64>, betas: Vec<f64>, detector: DetectorModel) -> Result<Self> {
        if fractions.is_empty() {
            return Err(Error::Contract("a plan needs at least one channel"));
        }
        if fractions.len() != betas.len() {
            return Err(Error::Contract("fractions and beta schedule differ in length"));
        }
        for &f in &fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::domain("fraction", f, "must lie in [0, 1]"));
            }
        }
        let total: NeumaierSum = fractions.iter().copied().collect();
        if (total.value() - 1.0).abs() > FRACTION_SUM_TOL {
            return Err(Error::domain("sum of fractions", total.value(), "must equal 1"));
        }
        for &b in &betas {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::domain("beta", b, "increment must be finite and >= 0"));
            }
        }
        Ok(Self {
            fractions,
            betas,
            detector,
        })
    }

    /// Equal energy `1/N` in every channel.
    pub fn homogeneous(betas: Vec<f64>, detector: DetectorModel) -> Result<Self> {
        let n = betas.len();
        Self::new(vec![1.0 / n as f64; n], betas, detector)
    }

    pub fn single(beta: f64, detector: DetectorModel) -> Result<Self> {
        Self::new(vec![1.0], vec![beta], detector)
    }

    /// Homogeneous plan following the asymptotic equal-prior schedule,
    /// sampled at channel midpoints `kappa = (k - 1/2) / N` and rescaled to the
    /// channel amplitude by `sqrt(1/N)`.
    pub fn asymptotic(n: usize, m: f64, detector: DetectorModel) -> Result<Self> {
        if n == 0 {
            return Err(Error::Contract("a plan needs at least one channel"));
        }
        let scale = libm::sqrt(1.0 / n as f64);
        let betas = (0..n)
            .map(|k| beta_schedule_asymptotic(m, midpoint_kappa(k, n)).map(|b| b * scale))
            .collect::<Result<Vec<_>>>()?;
        Self::homogeneous(betas, detector)
    }

    pub fn n_channels(&self) -> usize {
        self.fractions.len()
    }

    pub fn energy_fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn beta_schedule(&self) -> &[f64] {
        &self.betas
    }

    pub fn detector(&self) -> &DetectorModel {
        &self.detector
    }

    pub fn with_detector(mut self, detector: DetectorModel) -> Self {
        self.detector = detector;
        self
    }

    pub fn is_homogeneous(&self) -> bool {
        let target = 1.0 / self.n_channels() as f64;
        self.fractions.iter().all(|f| (f - target).abs() <= FRACTION_SUM_TOL)
    }
}

/// Normalized position `(k + 1/2) / N` of the zero-based channel `k`.
pub fn midpoint_kappa(k: usize, n: usize) -> f64 {
    (k as f64 + 0.5) / n as f64
}

/// Equal-prior asymptotic increment at normalized channel position `kappa`:
/// `beta = sqrt(m) (1 - s) / s` with `s = sqrt(1 - e^{-4 m kappa})`.
///
/// This is an amplitude density over `kappa`; it diverges like
/// `sqrt(1 / (4 kappa))` at the start of the signal.
pub fn beta_schedule_asymptotic(m: f64, kappa: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain("m", m, "must be finite and > 0"));
    }
    if !(kappa > 0.0) || kappa.is_nan() {
        return Err(Error::domain("kappa", kappa, "schedule is singular at kappa <= 0"));
    }
    let s = libm::sqrt(-libm::expm1(-4.0 * m * kappa));
    if s == 0.0 {
        return Err(Error::domain("kappa", kappa, "too small to resolve"));
    }
    Ok(libm::sqrt(m) * (1.0 - s) / s)
}

/// Running state of one chain evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardState {
    pub posterior_p1: f64,
    /// Number of channels already measured.
    pub channel_index: usize,
    /// Channels that reported at least one photon.
    pub on_count: usize,
    pub outcome_trace: Vec<u64>,
}

impl FeedForwardState {
    pub fn posterior_p2(&self) -> f64 {
        1.0 - self.posterior_p1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub decision: Hypothesis,
    /// States before the first channel and after each channel, `N + 1` entries.
    pub trace: Vec<FeedForwardState>,
}

/// Maximum-posterior decision; an exact tie goes to hypothesis 2.
#[inline]
pub fn map_decision(posterior_p1: f64) -> Hypothesis {
    if posterior_p1 > 1.0 - posterior_p1 {
        Hypothesis::First
    } else {
        Hypothesis::Second
    }
}

/// Odd number of "on" events selects `|alpha>`, even selects `|-alpha>`.
pub fn parity_decision(on_count: usize) -> Hypothesis {
    if on_count % 2 == 1 {
        Hypothesis::First
    } else {
        Hypothesis::Second
    }
}

#[inline]
fn posterior_from_likelihoods(p1: f64, l1: f64, l2: f64) -> Option<f64> {
    let w1 = p1 * l1;
    let w2 = (1.0 - p1) * l2;
    let total = w1 + w2;
    if total > 0.0 {
        Some(w1 / total)
    } else {
        None
    }
}

/// Posterior of hypothesis 1 after observing `outcome` with displaced
/// amplitudes `mu1`, `mu2`.
pub fn bayes_update(
    p1: f64,
    outcome: u64,
    mu1: Amplitude,
    mu2: Amplitude,
    det: &DetectorModel,
) -> Result<f64> {
    check_probability("p1", p1)?;
    let l1 = det.likelihood(outcome, mu1);
    let l2 = det.likelihood(outcome, mu2);
    posterior_from_likelihoods(p1, l1, l2).ok_or(Error::DegenerateEvidence { outcome })
}

/// Precomputed per-channel likelihoods for both displacement signs.
///
/// Index 0 is the branch that nulls hypothesis 2 (used while `p1 <= p2`),
/// index 1 the branch that nulls hypothesis 1.
#[derive(Debug, Clone)]
pub(crate) struct PreparedChannel {
    pub(crate) mu: [[Amplitude; 2]; 2],
    pub(crate) means: [[f64; 2]; 2],
    /// `likelihood[sign][hypothesis][n]`
    pub(crate) likelihood: [[Vec<f64>; 2]; 2],
    pub(crate) n_max: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct PreparedChain {
    pub(crate) channels: Vec<PreparedChannel>,
    pub(crate) detector: DetectorModel,
    pub(crate) p1: f64,
}

#[inline]
pub(crate) fn sign_index(posterior_p1: f64) -> usize {
    if posterior_p1 <= 1.0 - posterior_p1 {
        0
    } else {
        1
    }
}

impl PreparedChain {
    pub(crate) fn new(plan: &ChannelPlan, e: &BinaryEnsemble) -> Result<Self> {
        let det = plan.detector;
        let mut channels = Vec::with_capacity(plan.n_channels());
        for (&fraction, &beta) in plan.fractions.iter().zip(&plan.betas) {
            let share = e.split(fraction)?;
            let upper = build_displaced(&share.with_prior(0.5)?, beta)?;
            let lower = build_displaced(&share.with_prior(1.0)?, beta)?;
            let mu = [[upper.mu1, upper.mu2], [lower.mu1, lower.mu2]];
            let means = mu.map(|pair| pair.map(|m| det.effective_mean(m)));
            let brightest = means.iter().flatten().copied().fold(0.0_f64, f64::max);
            let n_max = det.max_outcome(brightest);
            let table = |m: Amplitude| (0..=n_max).map(|n| det.likelihood(n, m)).collect::<Vec<_>>();
            let likelihood = [
                [table(mu[0][0]), table(mu[0][1])],
                [table(mu[1][0]), table(mu[1][1])],
            ];
            channels.push(PreparedChannel {
                mu,
                means,
                likelihood,
                n_max,
            });
        }
        Ok(Self {
            channels,
            detector: det,
            p1: e.p1(),
        })
    }

    fn branch_count(&self) -> f64 {
        self.channels.iter().map(|c| (c.n_max + 1) as f64).product()
    }

    fn check_budget(&self) -> Result<()> {
        let n = self.channels.len();
        match self.detector.kind() {
            DetectorKind::OnOff if n > MAX_ONOFF_CHANNELS => Err(Error::BranchBudget {
                branches: libm::exp2(n as f64),
                budget: libm::exp2(MAX_ONOFF_CHANNELS as f64),
            }),
            DetectorKind::PhotonNumberResolving if self.branch_count() > MAX_PNR_BRANCHES => {
                Err(Error::BranchBudget {
                    branches: self.branch_count(),
                    budget: MAX_PNR_BRANCHES,
                })
            }
            _ => Ok(()),
        }
    }
}

/// Runs the receiver on a fixed list of per-channel counts.
pub fn run_chain(plan: &ChannelPlan, e: &BinaryEnsemble, outcomes: &[u64]) -> Result<ChainRun> {
    if outcomes.len() != plan.n_channels() {
        return Err(Error::Contract("outcome list length differs from channel count"));
    }
    let det = plan.detector;
    let mut state = FeedForwardState {
        posterior_p1: e.p1(),
        channel_index: 0,
        on_count: 0,
        outcome_trace: Vec::with_capacity(outcomes.len()),
    };
    let mut trace = Vec::with_capacity(outcomes.len() + 1);
    trace.push(state.clone());
    for (k, &n) in outcomes.iter().enumerate() {
        let share = e
            .split(plan.fractions[k])?
            .with_prior(state.posterior_p1)?;
        let pair = build_displaced(&share, plan.betas[k])?;
        state.posterior_p1 = bayes_update(state.posterior_p1, n, pair.mu1, pair.mu2, &det)?;
        state.channel_index = k + 1;
        if n > 0 {
            state.on_count += 1;
        }
        state.outcome_trace.push(n);
        trace.push(state.clone());
    }
    Ok(ChainRun {
        decision: map_decision(state.posterior_p1),
        trace,
    })
}

/// Result of an exhaustive outcome-tree evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactReport {
    pub error_rate: f64,
    /// Total probability of the enumerated leaves under each hypothesis.
    pub mass: [f64; 2],
    /// Probability left out by count truncation, worst hypothesis.
    pub truncated_tail: f64,
    pub leaves: u64,
}

struct TreeWalk<'a> {
    chain: &'a PreparedChain,
    error: NeumaierSum,
    mass: [NeumaierSum; 2],
    leaves: u64,
}

impl TreeWalk<'_> {
    fn descend(&mut self, k: usize, posterior: f64, m1: f64, m2: f64) {
        let chain = self.chain;
        if k == chain.channels.len() {
            let wrong = match map_decision(posterior) {
                Hypothesis::First => (1.0 - chain.p1) * m2,
                Hypothesis::Second => chain.p1 * m1,
            };
            self.error.add(wrong);
            self.mass[0].add(m1);
            self.mass[1].add(m2);
            self.leaves += 1;
            return;
        }
        let ch = &chain.channels[k];
        let sign = sign_index(posterior);
        let [l1s, l2s] = &ch.likelihood[sign];
        for (&l1, &l2) in l1s.iter().zip(l2s) {
            let (n1, n2) = (m1 * l1, m2 * l2);
            if n1 == 0.0 && n2 == 0.0 {
                continue;
            }
            let next = posterior_from_likelihoods(posterior, l1, l2)
                .or_else(|| posterior_from_likelihoods(chain.p1, n1, n2))
                .unwrap_or_else(|| n1 / (n1 + n2));
            self.descend(k + 1, next, n1, n2);
        }
    }
}

/// Exhaustive evaluation with mass bookkeeping.
pub fn exact_evaluation(plan: &ChannelPlan, e: &BinaryEnsemble) -> Result<ExactReport> {
    let chain = PreparedChain::new(plan, e)?;
    chain.check_budget()?;
    let mut walk = TreeWalk {
        chain: &chain,
        error: NeumaierSum::new(),
        mass: [NeumaierSum::new(), NeumaierSum::new()],
        leaves: 0,
    };
    walk.descend(0, e.p1(), 1.0, 1.0);
    let mass = [walk.mass[0].value(), walk.mass[1].value()];
    Ok(ExactReport {
        error_rate: walk.error.value(),
        mass,
        truncated_tail: (1.0 - mass[0]).max(1.0 - mass[1]).max(0.0),
        leaves: walk.leaves,
    })
}

/// Average error probability of the plan, by enumeration of every outcome
/// sequence.
pub fn exact_error(plan: &ChannelPlan, e: &BinaryEnsemble) -> Result<f64> {
    exact_evaluation(plan, e).map(|r| r.error_rate)
}

/// Result of [`optimize_plan`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptimum {
    pub plan: ChannelPlan,
    pub error_rate: f64,
}

fn softmax_fractions(logits: &[f64]) -> Vec<f64> {
    // the last logit is pinned at zero
    let top = logits.iter().copied().fold(0.0_f64, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|&z| libm::exp(z - top)).collect();
    w.push(libm::exp(-top));
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn fraction_logits(fractions: &[f64]) -> Vec<f64> {
    let last = libm::log(*fractions.last().expect("non-empty plan"));
    fractions[..fractions.len() - 1]
        .iter()
        .map(|&f| libm::log(f) - last)
        .collect()
}

struct PlanSpace {
    n: usize,
    homogeneous: bool,
    detector: DetectorModel,
}

impl PlanSpace {
    fn decode(&self, x: &[f64]) -> Result<ChannelPlan> {
        let betas = x[..self.n].iter().map(|b| b.abs()).collect();
        let fractions = if self.homogeneous {
            vec![1.0 / self.n as f64; self.n]
        } else {
            softmax_fractions(&x[self.n..])
        };
        ChannelPlan::new(fractions, betas, self.detector)
    }

    fn encode(&self, plan: &ChannelPlan) -> Vec<f64> {
        let mut x = plan.betas.clone();
        if !self.homogeneous {
            x.extend(fraction_logits(&plan.fractions));
        }
        x
    }
}

fn optimize_single(e: &BinaryEnsemble, detector: DetectorModel) -> Result<PlanOptimum> {
    let m = e.mean_photon_number();
    let objective = |beta: f64| {
        ChannelPlan::single(beta, detector)
            .and_then(|p| exact_error(&p, e))
            .unwrap_or(f64::NAN)
    };
    let hi = 3.0_f64.max(4.0 * libm::sqrt(m));
    let bracket = first_local_min_scan(objective, 0.0, hi, BETA_SCAN_POINTS)?;
    if bracket.kind == BracketKind::UpperBoundary {
        return Err(Error::Optimizer {
            reason: "error rate still decreasing at the end of the scan",
            lo: bracket.lo,
            hi: bracket.hi,
        });
    }
    let (mut beta, mut error_rate) = golden_section(objective, &bracket, BETA_TOL)?;
    if bracket.kind == BracketKind::LowerBoundary && bracket.f_lo <= error_rate {
        beta = bracket.lo;
        error_rate = bracket.f_lo;
    }
    Ok(PlanOptimum {
        plan: ChannelPlan::single(beta, detector)?,
        error_rate,
    })
}

/// Resamples an `(N-1)`-channel homogeneous schedule onto `N` channels,
/// interpolating the increment density over `kappa`.
fn resample_schedule(prev: &[f64], n: usize) -> Vec<f64> {
    let m = prev.len();
    let density: Vec<f64> = prev.iter().map(|b| b * libm::sqrt(m as f64)).collect();
    (0..n)
        .map(|k| {
            let kappa = midpoint_kappa(k, n);
            let pos = (kappa * m as f64 - 0.5).clamp(0.0, (m - 1) as f64);
            let i = (pos as usize).min(m.saturating_sub(2));
            let t = pos - i as f64;
            let d = if m == 1 {
                density[0]
            } else {
                density[i] * (1.0 - t) + density[i + 1] * t
            };
            d / libm::sqrt(n as f64)
        })
        .collect()
}

fn search(
    space: &PlanSpace,
    e: &BinaryEnsemble,
    starts: Vec<ChannelPlan>,
) -> Result<PlanOptimum> {
    let objective = |x: &[f64]| {
        space
            .decode(x)
            .and_then(|p| exact_error(&p, e))
            .unwrap_or(f64::INFINITY)
    };
    let opts = SimplexOptions {
        xtol: 1e-10,
        ftol: PLAN_FTOL,
        max_iter: 20_000,
        initial_step: 0.05,
    };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for start in &starts {
        let x0 = space.encode(start);
        let r = simplex_minimize_with(objective, &x0, &opts)?;
        if best.as_ref().is_none_or(|(_, f, _)| r.f < *f) {
            best = Some((r.x, r.f, r.converged));
        }
    }
    let (x, f, converged) = best.ok_or(Error::Contract("plan search needs a start"))?;
    let plan = space.decode(&x)?;
    if !converged {
        return Err(Error::PlanSearch {
            error_rate: f,
            betas: plan.betas,
            fractions: plan.fractions,
        });
    }
    Ok(PlanOptimum {
        plan,
        error_rate: f,
    })
}

/// Optimized plans for `1..=n` channels, each search warm-started from the
/// previous channel count.
pub fn optimize_plan_sequence(
    n: usize,
    e: &BinaryEnsemble,
    homogeneous: bool,
    detector: DetectorModel,
) -> Result<Vec<PlanOptimum>> {
    if n == 0 {
        return Err(Error::Contract("a plan needs at least one channel"));
    }
    let m = e.mean_photon_number();
    if !(m > 0.0) {
        return Err(Error::domain("m", m, "signal must carry photons"));
    }
    let first = optimize_single(e, detector)?;
    let beta_1 = first.plan.betas[0];
    // Refuse oversized trees before spending time on the smaller plans.
    let largest = ChannelPlan::homogeneous(vec![beta_1 / libm::sqrt(n as f64); n], detector)?;
    PreparedChain::new(&largest, e)?.check_budget()?;
    let mut out = vec![first];
    let mut prev_homogeneous = out[0].plan.clone();

    for k in 2..=n {
        let uniform = |betas: Vec<f64>| ChannelPlan::homogeneous(betas, detector);
        let replicated = uniform(vec![beta_1 / libm::sqrt(k as f64); k])?;
        PreparedChain::new(&replicated, e)?.check_budget()?;

        let mut starts = vec![
            uniform(resample_schedule(&prev_homogeneous.betas, k))?,
            replicated,
        ];
        if e.p1() == 0.5 {
            starts.push(ChannelPlan::asymptotic(k, m, detector)?);
        }
        let homogeneous_space = PlanSpace {
            n: k,
            homogeneous: true,
            detector,
        };
        let best_homogeneous = search(&homogeneous_space, e, starts)?;
        prev_homogeneous = best_homogeneous.plan.clone();

        if homogeneous {
            out.push(best_homogeneous);
            continue;
        }

        // The previous optimum plus a nearly dark trailing channel reproduces
        // the previous error, so the search cannot end above it.
        let prev = &out[k - 2].plan;
        let mut fractions: Vec<f64> = prev.fractions.iter().map(|f| f * (1.0 - 1e-13)).collect();
        fractions.push(1.0 - fractions.iter().sum::<f64>());
        let mut betas = prev.betas.clone();
        betas.push(0.0);
        let extended = ChannelPlan::new(fractions, betas, detector)?;
        let space = PlanSpace {
            n: k,
            homogeneous: false,
            detector,
        };
        out.push(search(&space, e, vec![best_homogeneous.plan, extended])?);
    }
    Ok(out)
}

/// Minimizes [`exact_error`] over the increment schedule and, unless
/// `homogeneous`, the energy split of an `n`-channel plan.
pub fn optimize_plan(
    n: usize,
    e: &BinaryEnsemble,
    homogeneous: bool,
    detector: DetectorModel,
) -> Result<PlanOptimum> {
    let mut all = optimize_plan_sequence(n, e, homogeneous, detector)?;
    Ok(all.pop().expect("sequence holds n >= 1 plans"))
}
