//! Derivative-free minimizers: grid bracketing, golden-section refinement
//! and a Nelder-Mead simplex search.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Where a bracket sits relative to the scanned interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketKind {
    /// `f(mid) < f(lo)` and `f(mid) < f(hi)`.
    Interior,
    /// `f` increases from the left end of the scan; `lo == mid`.
    LowerBoundary,
    /// `f` never increases over the scan; `mid == hi`.
    UpperBoundary,
}

/// Three abscissae enclosing a local minimum, with the objective values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub mid: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_mid: f64,
    pub f_hi: f64,
    pub kind: BracketKind,
}

impl Bracket {
    /// Builds an interior bracket, checking the ordering and bracketing
    /// property.
    pub fn new(f: impl Fn(f64) -> f64, lo: f64, mid: f64, hi: f64) -> Result<Self> {
        if !(lo < mid && mid < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Contract("bracket requires lo < mid < hi"));
        }
        let (f_lo, f_mid, f_hi) = (f(lo), f(mid), f(hi));
        if !(f_mid < f_lo && f_mid < f_hi) {
            return Err(Error::Contract("bracket requires f(mid) below both ends"));
        }
        Ok(Self {
            lo,
            mid,
            hi,
            f_lo,
            f_mid,
            f_hi,
            kind: BracketKind::Interior,
        })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn validate(&self) -> Result<()> {
        let ordered = self.lo <= self.mid && self.mid <= self.hi && self.lo < self.hi;
        if !ordered || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Contract("invalid bracket ordering"));
        }
        Ok(())
    }
}

/// Scans `grid_points` equally spaced abscissae upward from `lo` and brackets
/// the first point where `f` turns upward.
///
/// Plateaus are absorbed into the bracket so the interior bracket is strict.
/// A function that rises from `lo` yields a [`BracketKind::LowerBoundary`]
/// bracket at `lo`; one that never rises yields [`BracketKind::UpperBoundary`]
/// at `hi`.
pub fn first_local_min_scan(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    grid_points: usize,
) -> Result<Bracket> {
    if grid_points < 3 {
        return Err(Error::Contract("grid scan needs at least 3 points"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Contract("grid scan needs finite lo < hi"));
    }
    let step = (hi - lo) / (grid_points - 1) as f64;
    let x_at = |i: usize| {
        if i == grid_points - 1 {
            hi
        } else {
            lo + step * i as f64
        }
    };

    let mut values = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let v = f(x_at(i));
        if !v.is_finite() {
            return Err(Error::Optimizer {
                reason: "objective is not finite on the scan grid",
                lo: x_at(i),
                hi: x_at(i),
            });
        }
        values.push(v);
        let j = values.len();
        if j >= 2 && values[j - 1] > values[j - 2] {
            let i_min = j - 2;
            // Walk left over a plateau to a strictly higher point.
            let mut i_lo = i_min;
            while i_lo > 0 && values[i_lo] <= values[i_min] {
                i_lo -= 1;
            }
            if i_lo == i_min || values[i_lo] <= values[i_min] {
                return Ok(Bracket {
                    lo: x_at(0),
                    mid: x_at(0),
                    hi: x_at(i_min + 1),
                    f_lo: values[0],
                    f_mid: values[0],
                    f_hi: values[i_min + 1],
                    kind: BracketKind::LowerBoundary,
                });
            }
            return Ok(Bracket {
                lo: x_at(i_lo),
                mid: x_at(i_min),
                hi: x_at(i_min + 1),
                f_lo: values[i_lo],
                f_mid: values[i_min],
                f_hi: values[i_min + 1],
                kind: BracketKind::Interior,
            });
        }
    }
    let last = grid_points - 1;
    Ok(Bracket {
        lo: x_at(last - 1),
        mid: hi,
        hi,
        f_lo: values[last - 1],
        f_mid: values[last],
        f_hi: values[last],
        kind: BracketKind::UpperBoundary,
    })
}

/// Golden-section refinement inside `[b.lo, b.hi]` until the enclosing
/// interval is narrower than `tol`.
///
/// Uses at most `ceil(ln(width / tol) / ln(phi)) + 2` evaluations of `f`,
/// all inside the bracket. Returns the best evaluated point.
pub fn golden_section(f: impl Fn(f64) -> f64, b: &Bracket, tol: f64) -> Result<(f64, f64)> {
    b.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Contract("golden section tolerance must be positive"));
    }
    let (mut a, mut c) = (b.lo, b.hi);
    let mut x1 = c - INV_PHI * (c - a);
    let mut x2 = a + INV_PHI * (c - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while c - a > tol {
        if f1 <= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - INV_PHI * (c - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (c - a);
            f2 = f(x2);
        }
    }
    if !(f1.is_finite() || f2.is_finite()) {
        return Err(Error::Optimizer {
            reason: "objective is not finite inside the bracket",
            lo: b.lo,
            hi: b.hi,
        });
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Settings for [`simplex_minimize_with`].
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Converged once the simplex diameter (max vertex distance from the best
    /// vertex, infinity norm) falls below this.
    pub xtol: f64,
    /// Converged once the spread of objective values falls to this or below.
    pub ftol: f64,
    pub max_iter: usize,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-8,
            ftol: 0.0,
            max_iter: 10_000,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// False when the iteration cap stopped the search.
    pub converged: bool,
}

pub const MAX_SIMPLEX_DIMENSION: usize = 32;

/// Nelder-Mead minimization from `x0` with tolerance `tol` on the simplex
/// diameter.
pub fn simplex_minimize(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SimplexResult> {
    simplex_minimize_with(
        f,
        x0,
        &SimplexOptions {
            xtol: tol,
            max_iter,
            ..SimplexOptions::default()
        },
    )
}

/// Nelder-Mead with explicit options. After the first convergence the search
/// restarts once from the best vertex with a fresh simplex; the returned point
/// never scores worse than `x0`.
pub fn simplex_minimize_with(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    opts: &SimplexOptions,
) -> Result<SimplexResult> {
    let dim = x0.len();
    if dim == 0 || dim > MAX_SIMPLEX_DIMENSION {
        return Err(Error::Contract("simplex dimension must be in 1..=32"));
    }
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(Error::domain("f(x0)", f0, "objective must be finite at x0"));
    }
    let guarded = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let first = nelder_mead(&guarded, x0, f0, opts, opts.max_iter);
    let remaining = opts.max_iter.saturating_sub(first.iterations).max(1);
    let second = nelder_mead(&guarded, &first.x, first.f, opts, remaining);

    let best = if second.f <= first.f { second.clone() } else { first.clone() };
    Ok(SimplexResult {
        x: best.x,
        f: best.f,
        iterations: first.iterations + second.iterations,
        evaluations: 1 + first.evaluations + second.evaluations,
        converged: second.converged,
    })
}

fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    opts: &SimplexOptions,
    max_iter: usize,
) -> SimplexResult {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let dim = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        f(x)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut values: Vec<f64> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    values.push(f0);
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        values.push(eval(&v));
        simplex.push(v);
    }

    let mut centroid = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut trial2 = vec![0.0; dim];
    let mut iterations = 0;
    let mut converged = false;

    loop {
        // Order vertices by value, best first.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[dim] - values[0];
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        if diameter < opts.xtol || spread <= opts.ftol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let along = |t: &mut Vec<f64>, coef: f64| {
            for ((t, c), w) in t.iter_mut().zip(&centroid).zip(&worst) {
                *t = c + coef * (c - w);
            }
        };

        along(&mut trial, REFLECT);
        let f_r = eval(&trial);
        if f_r < values[0] {
            along(&mut trial2, EXPAND);
            let f_e = eval(&trial2);
            if f_e < f_r {
                simplex[dim].clone_from(&trial2);
                values[dim] = f_e;
            } else {
                simplex[dim].clone_from(&trial);
                values[dim] = f_r;
            }
        } else if f_r < values[dim - 1] {
            simplex[dim].clone_from(&trial);
            values[dim] = f_r;
        } else {
            let outside = f_r < values[dim];
            along(&mut trial2, if outside { CONTRACT } else { -CONTRACT });
            let f_c = eval(&trial2);
            if f_c < if outside { f_r } else { values[dim] } {
                simplex[dim].clone_from(&trial2);
                values[dim] = f_c;
            } else {
                let best = simplex[0].clone();
                for j in 1..=dim {
                    for (x, b) in simplex[j].iter_mut().zip(&best) {
                        *x = b + SHRINK * (*x - b);
                    }
                    values[j] = eval(&simplex[j]);
                }
            }
        }
    }

    SimplexResult {
        x: simplex[0].clone(),
        f: values[0],
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::cell::{Cell, RefCell};

    #[test]
    fn scan_quadratic() {
        let b = first_local_min_scan(|x| (x - 2.0) * (x - 2.0), 0.0, 5.0, 501).unwrap();
        assert_eq!(b.kind, BracketKind::Interior);
        assert!(b.contains(2.0));
        assert!(b.f_mid < b.f_lo && b.f_mid < b.f_hi);
    }

    #[test]
    fn scan_monotone_increasing_gives_lower_boundary() {
        let b = first_local_min_scan(|x| x, 0.0, 1.0, 100).unwrap();
        assert_eq!(b.kind, BracketKind::LowerBoundary);
        assert_eq!(b.lo, 0.0);
        assert_eq!(b.mid, 0.0);
    }

    #[test]
    fn scan_monotone_decreasing_gives_upper_boundary() {
        let b = first_local_min_scan(|x| -x, 0.0, 1.0, 100).unwrap();
        assert_eq!(b.kind, BracketKind::UpperBoundary);
        assert_eq!(b.hi, 1.0);
    }

    #[test]
    fn scan_picks_first_of_several_minima() {
        // minima near pi and 3 pi; the deeper one comes second
        let f = |x: f64| libm::cos(x) - 0.01 * x;
        let b = first_local_min_scan(f, 0.0, 12.0, 1200).unwrap();
        assert!(b.contains(core::f64::consts::PI + libm::asin(0.01)));
        assert!(b.hi < 4.0);
    }

    #[test]
    fn scan_absorbs_plateau() {
        let f = |x: f64| if x < 1.0 { 1.0 - x } else if x < 2.0 { 0.0 } else { x - 2.0 };
        let b = first_local_min_scan(f, 0.0, 3.0, 31).unwrap();
        assert_eq!(b.kind, BracketKind::Interior);
        assert!(b.f_mid < b.f_lo && b.f_mid < b.f_hi);
        assert!(b.lo < 1.0 && b.hi > 2.0 - 1e-12);
    }

    #[test]
    fn scan_contract_errors() {
        assert!(first_local_min_scan(|x| x, 0.0, 1.0, 2).is_err());
        assert!(first_local_min_scan(|x| x, 1.0, 1.0, 10).is_err());
        assert!(first_local_min_scan(|_| f64::NAN, 0.0, 1.0, 10).is_err());
    }

    #[test]
    fn golden_quadratic() {
        let f = |x: f64| (x - 2.0) * (x - 2.0);
        let b = Bracket::new(f, 0.0, 1.0, 5.0).unwrap();
        let (x, fx) = golden_section(f, &b, 1e-8).unwrap();
        assert!((x - 2.0).abs() < 1e-8);
        assert!(fx < 1e-16);
    }

    #[test]
    fn golden_nonsmooth() {
        let f = |x: f64| x.abs();
        let b = Bracket::new(f, -1.0, -0.1, 1.0).unwrap();
        let (x, _) = golden_section(f, &b, 1e-8).unwrap();
        assert!(x.abs() < 1e-8);
    }

    #[test]
    fn golden_evaluation_budget_and_domain() {
        let calls = Cell::new(0usize);
        let seen = RefCell::new(Vec::new());
        let f = |x: f64| {
            calls.set(calls.get() + 1);
            seen.borrow_mut().push(x);
            (x - 0.3) * (x - 0.3)
        };
        let b = Bracket {
            lo: 0.0,
            mid: 0.2,
            hi: 1.0,
            f_lo: 0.09,
            f_mid: 0.01,
            f_hi: 0.49,
            kind: BracketKind::Interior,
        };
        let tol = 1e-8;
        golden_section(f, &b, tol).unwrap();
        let bound = libm::ceil(libm::log(1.0 / tol) / libm::log(1.618_033_988_749_895)) as usize + 2;
        assert!(calls.get() <= bound, "{} > {}", calls.get(), bound);
        assert!(seen.borrow().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn golden_rejects_bad_input() {
        let f = |x: f64| x * x;
        assert!(Bracket::new(f, 1.0, 0.0, 2.0).is_err());
        assert!(Bracket::new(f, 1.0, 2.0, 3.0).is_err());
        let b = Bracket::new(f, -1.0, 0.0, 1.0).unwrap();
        assert!(golden_section(f, &b, 0.0).is_err());
        let broken = Bracket { lo: 1.0, hi: -1.0, ..b };
        assert!(golden_section(f, &broken, 1e-6).is_err());
    }

    #[test]
    fn simplex_sphere() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>();
        let r = simplex_minimize(f, &[0.0; 4], 1e-8, 20_000).unwrap();
        assert!(r.converged);
        assert!(r.x.iter().all(|v| (v - 1.0).abs() < 1e-6), "{:?}", r.x);
    }

    #[test]
    fn simplex_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
        };
        let r = simplex_minimize(f, &[-1.2, 1.0], 1e-10, 20_000).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn simplex_never_worse_than_start_and_flags_cap() {
        let f = |x: &[f64]| libm::sin(5.0 * x[0]) + libm::cos(3.0 * x[1]);
        let x0 = [0.4, 0.2];
        let r = simplex_minimize(f, &x0, 1e-12, 3).unwrap();
        assert!(r.f <= f(&x0));
        assert!(!r.converged);
    }

    #[test]
    fn simplex_errors() {
        let f = |_: &[f64]| f64::NAN;
        assert!(matches!(
            simplex_minimize(f, &[0.0], 1e-6, 10),
            Err(Error::Domain { .. })
        ));
        let g = |x: &[f64]| x[0];
        assert!(simplex_minimize(g, &[0.0; 33], 1e-6, 10).is_err());
        assert!(simplex_minimize(g, &[], 1e-6, 10).is_err());
    }
}
