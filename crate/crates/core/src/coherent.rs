//! Coherent-state arithmetic, photon statistics and closed-form baselines.

use crate::error::{Error, Result};

/// Real coherent amplitude in units of √photon. The sign carries the binary
/// phase; the state's mean photon number is the square.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Amplitude(f64);

impl Amplitude {
    /// Largest accepted magnitude. Beyond it `e^{-|a|^2}` and the Poisson
    /// weights lose all meaning in double precision.
    pub const MAX_MAGNITUDE: f64 = 1e3;

    pub const ZERO: Amplitude = Amplitude(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::domain("amplitude", value, "must be finite"));
        }
        if value.abs() > Self::MAX_MAGNITUDE {
            return Err(Error::domain("amplitude", value, "magnitude exceeds 1e3"));
        }
        Ok(Amplitude(value))
    }

    /// Amplitude of a state carrying `m` mean photons, on the positive axis.
    pub fn from_mean_photons(m: f64) -> Result<Self> {
        check_mean_photons(m)?;
        Amplitude::new(libm::sqrt(m))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn mean_photons(self) -> f64 {
        self.0 * self.0
    }

    // Arithmetic on validated amplitudes stays finite but may leave the
    // magnitude guard; internal callers only combine a handful of them.
    #[inline]
    pub(crate) fn raw(value: f64) -> Self {
        Amplitude(value)
    }
}

/// Index of a signal hypothesis: `First` is `|alpha1>`, `Second` is `|alpha2>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    First,
    Second,
}

impl Hypothesis {
    /// 1 or 2.
    pub fn index(self) -> u8 {
        match self {
            Hypothesis::First => 1,
            Hypothesis::Second => 2,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Hypothesis::First => Hypothesis::Second,
            Hypothesis::Second => Hypothesis::First,
        }
    }
}

/// Two candidate coherent states with their prior probabilities.
///
/// Only `p1` is stored; `p2` is always `1 - p1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryEnsemble {
    alpha1: Amplitude,
    alpha2: Amplitude,
    p1: f64,
}

impl BinaryEnsemble {
    pub fn new(alpha1: Amplitude, alpha2: Amplitude, p1: f64) -> Result<Self> {
        check_probability("p1", p1)?;
        Ok(Self { alpha1, alpha2, p1 })
    }

    /// Phase-shift keyed pair `{|+alpha>, |-alpha>}` with `alpha = sqrt(m)`.
    pub fn bpsk(m: f64, p1: f64) -> Result<Self> {
        let a = Amplitude::from_mean_photons(m)?;
        Self::new(a, Amplitude(-a.0), p1)
    }

    pub fn alpha1(&self) -> Amplitude {
        self.alpha1
    }

    pub fn alpha2(&self) -> Amplitude {
        self.alpha2
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn prior(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::First => self.p1(),
            Hypothesis::Second => self.p2(),
        }
    }

    pub fn amplitude(&self, h: Hypothesis) -> Amplitude {
        match h {
            Hypothesis::First => self.alpha1,
            Hypothesis::Second => self.alpha2,
        }
    }

    /// Half the separation of the two amplitudes, `(alpha1 - alpha2) / 2`.
    /// Equals `alpha` for the `{|alpha>, |-alpha>}` pair.
    pub fn half_separation(&self) -> f64 {
        0.5 * (self.alpha1.0 - self.alpha2.0)
    }

    /// Mean photon number `m = alpha^2` of the equivalent phase-shift keyed pair.
    pub fn mean_photon_number(&self) -> f64 {
        let a = self.half_separation();
        a * a
    }

    /// Same states with a different prior.
    pub fn with_prior(&self, p1: f64) -> Result<Self> {
        Self::new(self.alpha1, self.alpha2, p1)
    }

    /// The portion of the signal routed into a channel carrying the energy
    /// fraction `fraction`; both amplitudes scale by `sqrt(fraction)`.
    pub fn split(&self, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::domain("fraction", fraction, "must lie in [0, 1]"));
        }
        let s = libm::sqrt(fraction);
        Ok(Self {
            alpha1: Amplitude(self.alpha1.0 * s),
            alpha2: Amplitude(self.alpha2.0 * s),
            p1: self.p1,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    OnOff,
    PhotonNumberResolving,
}

/// Detection semantics for one channel.
///
/// A detector with efficiency `eta` and dark mean `d` sees a Poisson count of
/// mean `eta * mu^2 + d` from the displaced amplitude `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    kind: DetectorKind,
    n_max: Option<u64>,
    efficiency: f64,
    dark_mean: f64,
}

impl DetectorModel {
    pub fn ideal(kind: DetectorKind) -> Self {
        Self {
            kind,
            n_max: None,
            efficiency: 1.0,
            dark_mean: 0.0,
        }
    }

    pub fn on_off() -> Self {
        Self::ideal(DetectorKind::OnOff)
    }

    pub fn pnr() -> Self {
        Self::ideal(DetectorKind::PhotonNumberResolving)
    }

    pub fn with_efficiency(mut self, efficiency: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::domain("efficiency", efficiency, "must lie in (0, 1]"));
        }
        self.efficiency = efficiency;
        Ok(self)
    }

    pub fn with_dark_mean(mut self, dark_mean: f64) -> Result<Self> {
        if !(dark_mean >= 0.0 && dark_mean.is_finite()) {
            return Err(Error::domain("dark_mean", dark_mean, "must be finite and >= 0"));
        }
        self.dark_mean = dark_mean;
        Ok(self)
    }

    /// Fixes the count truncation of a PNR detector instead of deriving it
    /// from the mean via [`poisson_truncation`].
    pub fn with_n_max(mut self, n_max: u64) -> Self {
        self.n_max = Some(n_max);
        self
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn dark_mean(&self) -> f64 {
        self.dark_mean
    }

    pub fn n_max_override(&self) -> Option<u64> {
        self.n_max
    }

    pub fn effective_mean(&self, mu: Amplitude) -> f64 {
        self.efficiency * mu.mean_photons() + self.dark_mean
    }

    /// Largest outcome the detector reports for a given effective mean:
    /// 1 for on-off detectors, the truncation point for PNR detectors.
    pub fn max_outcome(&self, mean: f64) -> u64 {
        match self.kind {
            DetectorKind::OnOff => 1,
            DetectorKind::PhotonNumberResolving => {
                self.n_max.unwrap_or_else(|| poisson_truncation(mean))
            }
        }
    }

    /// Probability of reporting `outcome` given displaced amplitude `mu`.
    /// On-off detectors map every nonzero count to outcome 1.
    pub fn likelihood(&self, outcome: u64, mu: Amplitude) -> f64 {
        let mean = self.effective_mean(mu);
        match self.kind {
            DetectorKind::OnOff => {
                if outcome == 0 {
                    libm::exp(-mean)
                } else {
                    -libm::expm1(-mean)
                }
            }
            DetectorKind::PhotonNumberResolving => libm::exp(ln_pmf_unchecked(outcome, mean)),
        }
    }
}

/// Truncation point `n_max = ceil(mu + 12 sqrt(mu) + 30)` for a Poisson law of
/// mean `mu`; the discarded tail stays below 1e-12 for `mu` in [0, 100].
pub fn poisson_truncation(mean: f64) -> u64 {
    let mean = mean.max(0.0);
    libm::ceil(mean + 12.0 * libm::sqrt(mean) + 30.0) as u64
}

#[inline]
fn ln_pmf_unchecked(n: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if n == 0 {
        return -mean;
    }
    let n_f = n as f64;
    n_f * libm::log(mean) - mean - libm::lgamma(n_f + 1.0)
}

/// Natural log of the Poisson probability of `n` counts at mean `mean`.
pub fn ln_poisson_pmf(n: u64, mean: f64) -> Result<f64> {
    check_mean("mean", mean)?;
    Ok(ln_pmf_unchecked(n, mean))
}

/// Poisson probability `mean^n e^{-mean} / n!`, evaluated in log space.
pub fn poisson_pmf(n: u64, mean: f64) -> Result<f64> {
    ln_poisson_pmf(n, mean).map(libm::exp)
}

/// `|<a1|a2>|^2 = e^{-(a1 - a2)^2}`.
pub fn overlap(a1: Amplitude, a2: Amplitude) -> f64 {
    libm::exp(log_overlap(a1, a2))
}

/// Log of [`overlap`]; stays finite where the overlap itself underflows.
pub fn log_overlap(a1: Amplitude, a2: Amplitude) -> f64 {
    let d = a1.0 - a2.0;
    -d * d
}

/// Shifts both candidate amplitudes by `delta`. Priors and overlap are unchanged.
pub fn displace(e: &BinaryEnsemble, delta: Amplitude) -> BinaryEnsemble {
    BinaryEnsemble {
        alpha1: Amplitude(e.alpha1.0 + delta.0),
        alpha2: Amplitude(e.alpha2.0 + delta.0),
        p1: e.p1,
    }
}

/// Minimum error probability over all measurements,
/// `(1 - sqrt(1 - 4 p1 p2 s)) / 2` with `s` the overlap.
pub fn helstrom_bound(e: &BinaryEnsemble) -> f64 {
    let x = 4.0 * e.p1() * e.p2() * overlap(e.alpha1, e.alpha2);
    // 1 - sqrt(1 - x) rewritten to keep digits when x is tiny.
    0.5 * x / (1.0 + libm::sqrt((1.0 - x).max(0.0)))
}

/// Kennedy receiver (displace `|-alpha>` to vacuum, single-photon detection):
/// `p1 e^{-4m}`.
pub fn kennedy_error(m: f64, p1: f64) -> Result<f64> {
    check_mean_photons(m)?;
    check_probability("p1", p1)?;
    Ok(p1 * libm::exp(-4.0 * m))
}

/// Homodyne receiver for equal priors: `(1 - erf(sqrt(2m))) / 2`.
pub fn homodyne_error(m: f64) -> Result<f64> {
    check_mean_photons(m)?;
    Ok(0.5 * libm::erfc(libm::sqrt(2.0 * m)))
}

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(name, p, "must be a probability in [0, 1]"))
    }
}

pub(crate) fn check_mean_photons(m: f64) -> Result<()> {
    check_mean("m", m)
}

fn check_mean(name: &'static str, mean: f64) -> Result<()> {
    if mean >= 0.0 && mean.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, mean, "must be finite and >= 0"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E_INV: f64 = 0.367_879_441_171_442_33;

    fn amp(x: f64) -> Amplitude {
        Amplitude::new(x).unwrap()
    }

    #[test]
    fn pmf_examples() {
        for mu in [0.0, 0.3, 2.0, 45.0] {
            assert!((poisson_pmf(0, mu).unwrap() - libm::exp(-mu)).abs() < 1e-15);
        }
        assert!((poisson_pmf(2, 1.0).unwrap() - 0.183_939_720_585_721_16).abs() < 1e-14);
        assert_eq!(poisson_pmf(5, 0.0).unwrap(), 0.0);
        assert_eq!(poisson_pmf(0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn pmf_large_counts_do_not_overflow() {
        let p = poisson_pmf(1000, 1000.0).unwrap();
        // Stirling: 1/sqrt(2 pi 1000)
        assert!((p - 0.012_614_611_348_721_58).abs() < 1e-9, "{p}");
        assert!(poisson_pmf(5000, 1.0).unwrap() == 0.0);
    }

    #[test]
    fn pmf_rejects_bad_mean() {
        assert!(matches!(poisson_pmf(1, -0.1), Err(Error::Domain { .. })));
        assert!(poisson_pmf(1, f64::NAN).is_err());
    }

    #[test]
    fn normalization_with_truncation_rule() {
        for i in 0..=200 {
            let mu = i as f64 * 0.5;
            let n_max = poisson_truncation(mu);
            let total: crate::NeumaierSum =
                (0..=n_max).map(|n| poisson_pmf(n, mu).unwrap()).collect();
            assert!(total.value() >= 1.0 - 1e-12, "mu={mu} total={}", total.value());
        }
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap(amp(0.7), amp(0.7)), 1.0);
        assert!((overlap(amp(0.5), amp(-0.5)) - E_INV).abs() < 1e-15);
        assert_eq!(log_overlap(amp(10.0), amp(-10.0)), -400.0);
        assert_eq!(overlap(amp(10.0), amp(-10.0)), libm::exp(-400.0));
        // the log form stays usable where the overlap itself underflows
        assert_eq!(overlap(amp(20.0), amp(-20.0)), 0.0);
        assert_eq!(log_overlap(amp(20.0), amp(-20.0)), -1600.0);
    }

    #[test]
    fn amplitude_guard() {
        assert!(Amplitude::new(1e3).is_ok());
        assert!(Amplitude::new(1e3 + 1.0).is_err());
        assert!(Amplitude::new(f64::INFINITY).is_err());
        assert!(Amplitude::from_mean_photons(-1.0).is_err());
    }

    #[test]
    fn displace_examples() {
        let e = BinaryEnsemble::new(amp(0.5), amp(-0.5), 0.5).unwrap();
        let d = displace(&e, amp(0.6));
        assert!((d.alpha1().value() - 1.1).abs() < 1e-15);
        assert!((d.alpha2().value() - 0.1).abs() < 1e-15);
        assert_eq!(d.p1(), 0.5);
        assert_eq!(displace(&e, Amplitude::ZERO), e);

        let e = BinaryEnsemble::new(amp(0.5), amp(-0.5), 0.7).unwrap();
        let d = displace(&e, amp(-0.6));
        assert!((d.alpha1().value() + 0.1).abs() < 1e-15);
        assert!((d.alpha2().value() + 1.1).abs() < 1e-15);
        assert_eq!(d.p1(), 0.7);
    }

    #[test]
    fn helstrom_examples() {
        let h = helstrom_bound(&BinaryEnsemble::bpsk(0.25, 0.5).unwrap());
        assert!((h - 0.102_469_951_189_674_95).abs() < 1e-14, "{h}");
        assert_eq!(helstrom_bound(&BinaryEnsemble::bpsk(0.0, 0.5).unwrap()), 0.5);
        assert_eq!(helstrom_bound(&BinaryEnsemble::bpsk(0.25, 0.0).unwrap()), 0.0);
    }

    #[test]
    fn helstrom_matches_equal_prior_formula() {
        for i in 1..50 {
            let m = i as f64 * 0.1;
            let e = BinaryEnsemble::bpsk(m, 0.5).unwrap();
            let direct = 0.5 * (1.0 - libm::sqrt(1.0 - libm::exp(-4.0 * m)));
            assert!((helstrom_bound(&e) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn kennedy_examples() {
        assert!((kennedy_error(0.25, 0.5).unwrap() - 0.5 * E_INV).abs() < 1e-15);
        assert_eq!(kennedy_error(0.0, 0.5).unwrap(), 0.5);
        assert_eq!(kennedy_error(1.3, 0.0).unwrap(), 0.0);
        assert!(kennedy_error(-1.0, 0.5).is_err());
        assert!(kennedy_error(1.0, 1.5).is_err());
    }

    #[test]
    fn homodyne_examples() {
        let h = homodyne_error(0.25).unwrap();
        assert!((h - 0.159).abs() < 1e-3);
        assert!((h - 0.158_655_253_931_457_05).abs() < 1e-13);
        assert_eq!(homodyne_error(0.0).unwrap(), 0.5);
        let h4 = homodyne_error(4.0).unwrap();
        assert!((h4 - 3.167_124_183_311_992e-5).abs() < 1e-15, "{h4}");
    }

    #[test]
    fn baseline_ordering_and_crossover() {
        let mut sign_changes = 0;
        let mut prev: Option<bool> = None;
        for i in 1..=300 {
            let m = i as f64 * 0.01;
            let h = helstrom_bound(&BinaryEnsemble::bpsk(m, 0.5).unwrap());
            let k = kennedy_error(m, 0.5).unwrap();
            let d = homodyne_error(m).unwrap();
            assert!(h < k && h < d, "m={m}");
            let kennedy_better = k < d;
            if prev.is_some_and(|p| p != kennedy_better) {
                sign_changes += 1;
                assert!(m > 0.2 && m < 0.6, "crossover at m={m}");
            }
            prev = Some(kennedy_better);
        }
        assert_eq!(sign_changes, 1);
        assert!(kennedy_error(1.0, 0.5).unwrap() < homodyne_error(1.0).unwrap());
    }

    #[test]
    fn detector_likelihoods() {
        let det = DetectorModel::on_off();
        let mu = amp(1.0);
        assert!((det.likelihood(0, mu) + det.likelihood(1, mu) - 1.0).abs() < 1e-15);
        assert_eq!(det.likelihood(3, mu), det.likelihood(1, mu));

        let noisy = DetectorModel::pnr()
            .with_efficiency(0.5)
            .unwrap()
            .with_dark_mean(0.1)
            .unwrap();
        assert!((noisy.effective_mean(mu) - 0.6).abs() < 1e-15);
        assert!(DetectorModel::pnr().with_efficiency(0.0).is_err());
        assert!(DetectorModel::pnr().with_dark_mean(-1.0).is_err());
    }
}
