//! The one-channel displacement receiver.
//!
//! The signal is displaced so that the more probable state lands near the
//! vacuum (offset by an increment `beta >= 0`), then counted. Decisions follow
//! the maximum-posterior rule over the count, or its on-off coarse graining.

use crate::coherent::{
    check_mean_photons, check_probability, ln_poisson_pmf, Amplitude, BinaryEnsemble, DetectorKind,
    DetectorModel, Hypothesis,
};
use crate::error::{Error, Result};
use crate::optimizer::{first_local_min_scan, golden_section, Bracket, BracketKind};
use crate::sum::NeumaierSum;

/// Grid resolution used to bracket the first minimum of `eps(beta)`.
pub const BETA_SCAN_POINTS: usize = 2000;
/// Refinement tolerance on the optimal increment.
pub const BETA_TOL: f64 = 1e-8;

/// Post-displacement amplitudes under each hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacedPair {
    pub mu1: Amplitude,
    pub mu2: Amplitude,
    pub p1: f64,
    pub beta: f64,
    /// The displacement that produced the pair.
    pub delta: Amplitude,
}

impl DisplacedPair {
    pub fn p2(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn mu(&self, h: Hypothesis) -> Amplitude {
        match h {
            Hypothesis::First => self.mu1,
            Hypothesis::Second => self.mu2,
        }
    }

    pub fn prior(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::First => self.p1,
            Hypothesis::Second => self.p2(),
        }
    }

    /// Hypothesis whose displaced state carries more photons, or `None` when
    /// both magnitudes agree.
    pub fn brighter(&self) -> Option<Hypothesis> {
        let (a, b) = (self.mu1.value().abs(), self.mu2.value().abs());
        if a > b {
            Some(Hypothesis::First)
        } else if b > a {
            Some(Hypothesis::Second)
        } else {
            None
        }
    }
}

/// Counts `n >= n_star` go to `assign_high`, smaller counts to the other one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdRule {
    pub n_star: u64,
    pub assign_high: Hypothesis,
}

impl ThresholdRule {
    pub fn decide(&self, n: u64) -> Hypothesis {
        if n >= self.n_star {
            self.assign_high
        } else {
            self.assign_high.other()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    OnOff,
    Pnr,
}

/// Displaces the ensemble by `Delta = +-(alpha + beta)`.
///
/// With `p1 <= p2` (ties included) the second state is nulled up to `beta`:
/// the pair becomes `(2 alpha + beta, beta)`. Otherwise the first state is
/// nulled: `(-beta, -2 alpha - beta)`. Here `alpha` is half the separation of
/// the two amplitudes, so any binary encoding works.
pub fn build_displaced(e: &BinaryEnsemble, beta: f64) -> Result<DisplacedPair> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::domain("beta", beta, "increment must be finite and >= 0"));
    }
    let sep = e.alpha1().value() - e.alpha2().value();
    let dir = if sep < 0.0 { -1.0 } else { 1.0 };
    let delta = if e.p1() <= e.p2() {
        -e.alpha2().value() + dir * beta
    } else {
        -e.alpha1().value() - dir * beta
    };
    Ok(DisplacedPair {
        mu1: Amplitude::raw(e.alpha1().value() + delta),
        mu2: Amplitude::raw(e.alpha2().value() + delta),
        p1: e.p1(),
        beta,
        delta: Amplitude::raw(delta),
    })
}

/// Maximum-posterior error with photon-number resolution,
/// `1 - sum_n max_i p_i P(n, mu_i)`.
///
/// Evaluated as `sum_n min_i p_i P(n, mu_i)`, which is the same quantity
/// without the cancellation, over `n = 0..=n_max` for the brighter state.
pub fn error_map_pnr(d: &DisplacedPair, det: &DetectorModel) -> Result<f64> {
    if det.kind() != DetectorKind::PhotonNumberResolving {
        return Err(Error::Contract("error_map_pnr needs a photon-number-resolving detector"));
    }
    let mean = det.effective_mean(d.mu1).max(det.effective_mean(d.mu2));
    let n_max = det.max_outcome(mean);
    let (p1, p2) = (d.p1, d.p2());
    let total: NeumaierSum = (0..=n_max)
        .map(|n| {
            let a = p1 * det.likelihood(n, d.mu1);
            let b = p2 * det.likelihood(n, d.mu2);
            a.min(b)
        })
        .collect();
    Ok(total.value())
}

/// On-off error of the receiver that nulls `|-alpha>` up to `beta`:
/// `p1 e^{-(2 alpha + beta)^2} + p2 (1 - e^{-beta^2})`.
///
/// The expression is taken as written for any prior; the prior-dependent
/// sign choice lives in [`build_displaced`].
pub fn error_onoff(alpha: f64, beta: f64, p1: f64) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::domain("alpha", alpha, "must be finite and >= 0"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::domain("beta", beta, "must be finite and >= 0"));
    }
    check_probability("p1", p1)?;
    let bright = 2.0 * alpha + beta;
    Ok(p1 * libm::exp(-bright * bright) - (1.0 - p1) * libm::expm1(-beta * beta))
}

/// Error of deciding by a fixed count threshold.
pub fn error_with_threshold(
    d: &DisplacedPair,
    rule: &ThresholdRule,
    det: &DetectorModel,
) -> f64 {
    let high = rule.assign_high;
    let low = high.other();
    let (p_high, p_low) = (d.prior(high), d.prior(low));
    if rule.n_star == 0 {
        return p_low;
    }
    let lam_high = det.effective_mean(d.mu(high));
    let lam_low = det.effective_mean(d.mu(low));
    if rule.n_star == 1 {
        return p_high * libm::exp(-lam_high) - p_low * libm::expm1(-lam_low);
    }
    let below = |lam: f64| -> f64 {
        (0..rule.n_star)
            .map(|n| libm::exp(ln_poisson_pmf(n, lam).unwrap_or(f64::NEG_INFINITY)))
            .collect::<NeumaierSum>()
            .value()
    };
    p_high * below(lam_high) + p_low * (1.0 - below(lam_low)).max(0.0)
}

/// On-off error of a displaced pair: "on" selects the brighter state.
pub fn error_onoff_displaced(d: &DisplacedPair, det: &DetectorModel) -> Result<f64> {
    let high = d
        .brighter()
        .ok_or(Error::NoThreshold("displaced magnitudes are equal"))?;
    Ok(error_with_threshold(
        d,
        &ThresholdRule {
            n_star: 1,
            assign_high: high,
        },
        det,
    ))
}

/// Count threshold of the maximum-posterior rule for an ideal counter.
///
/// The weighted likelihood ratio of the brighter to the dimmer state grows
/// with `n`; `n_star` is the first count where it favours the brighter state.
/// Exact ties go to hypothesis 2.
pub fn discrimination_threshold(d: &DisplacedPair) -> Result<ThresholdRule> {
    let high = d
        .brighter()
        .ok_or(Error::NoThreshold("displaced magnitudes are equal"))?;
    let low = high.other();
    let (p_high, p_low) = (d.prior(high), d.prior(low));
    let lam_high = d.mu(high).mean_photons();
    let lam_low = d.mu(low).mean_photons();
    if p_high == 0.0 {
        return Err(Error::NoThreshold("brighter state has zero prior"));
    }
    let rule = |n_star| ThresholdRule {
        n_star,
        assign_high: high,
    };
    if p_low == 0.0 {
        return Ok(rule(0));
    }

    // log of p_high P(n, high) / (p_low P(n, low)), increasing in n
    let log_ratio = |n: u64| -> f64 {
        let base = libm::log(p_high / p_low) - (lam_high - lam_low);
        if lam_low == 0.0 {
            if n == 0 { base } else { f64::INFINITY }
        } else {
            base + n as f64 * libm::log(lam_high / lam_low)
        }
    };
    let favours_high = |n: u64| {
        let r = log_ratio(n);
        match high {
            Hypothesis::First => r > 0.0,
            Hypothesis::Second => r >= 0.0,
        }
    };
    if favours_high(0) {
        return Ok(rule(0));
    }
    if lam_low == 0.0 {
        return Ok(rule(1));
    }
    let crossing = ((lam_high - lam_low) - libm::log(p_high / p_low))
        / libm::log(lam_high / lam_low);
    let mut n = libm::ceil(crossing).max(1.0) as u64;
    while n > 1 && favours_high(n - 1) {
        n -= 1;
    }
    while !favours_high(n) {
        n += 1;
    }
    Ok(rule(n))
}

/// Result of [`optimize_beta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaOptimum {
    pub beta: f64,
    pub error_rate: f64,
    pub bracket: Bracket,
}

/// Error of the single-channel receiver at increment `beta`.
pub fn single_channel_error(e: &BinaryEnsemble, beta: f64, strategy: Strategy) -> Result<f64> {
    let d = build_displaced(e, beta)?;
    match strategy {
        Strategy::OnOff => error_onoff_displaced(&d, &DetectorModel::on_off()),
        Strategy::Pnr => error_map_pnr(&d, &DetectorModel::pnr()),
    }
}

/// Increment at the first local minimum of `eps(beta)` on `beta >= 0`.
///
/// The scan covers `[0, max(3, 4 sqrt(m))]` with [`BETA_SCAN_POINTS`] points
/// and the bracket is refined by golden section to [`BETA_TOL`].
pub fn optimize_beta(e: &BinaryEnsemble, strategy: Strategy) -> Result<BetaOptimum> {
    let m = e.mean_photon_number();
    check_mean_photons(m)?;
    if m <= 0.0 {
        return Err(Error::domain("m", m, "signal must carry photons"));
    }
    let objective = |beta: f64| single_channel_error(e, beta, strategy).unwrap_or(f64::NAN);
    let hi = 3.0_f64.max(4.0 * libm::sqrt(m));
    let bracket = first_local_min_scan(objective, 0.0, hi, BETA_SCAN_POINTS)?;
    if bracket.kind == BracketKind::UpperBoundary {
        return Err(Error::Optimizer {
            reason: "error rate still decreasing at the end of the scan",
            lo: bracket.lo,
            hi: bracket.hi,
        });
    }
    let (beta, error_rate) = golden_section(objective, &bracket, BETA_TOL)?;
    // The boundary point itself may beat every interior golden probe.
    if bracket.kind == BracketKind::LowerBoundary && bracket.f_lo <= error_rate {
        return Ok(BetaOptimum {
            beta: bracket.lo,
            error_rate: bracket.f_lo,
            bracket,
        });
    }
    Ok(BetaOptimum {
        beta,
        error_rate,
        bracket,
    })
}
