//! Plateau-aware root location for nonincreasing scalar functions.
//!
//! For a nonincreasing `g` and a residual tolerance `eps`, the solution is the
//! midpoint of the plateau `[sup{x: g(x) > eps}, inf{x: g(x) < -eps}]`. Both
//! edges are located to within `tol` by bracketing searches, so a function with
//! a flat zero set (a bounded influence function on a spread sample) gets a
//! reproducible, symmetric answer.

use crate::error::{Error, Result};

/// Step rule used inside each bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RootMethod {
    /// Plain halving.
    #[default]
    Bisection,
    /// Illinois-modified false position, kept inside the bracket and forced
    /// to bisect whenever it stops halving the width.
    Illinois,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauRoot {
    pub theta: f64,
    /// `[theta - tol, theta + tol]` clipped to the plateau estimate.
    pub bracket: (f64, f64),
    /// Estimated plateau edges.
    pub plateau: (f64, f64),
    /// Number of evaluations of `g`.
    pub iterations: usize,
    /// `g(theta)`.
    pub residual: f64,
}

struct Counter<G> {
    g: G,
    calls: usize,
    max: usize,
    lo: f64,
    hi: f64,
}

impl<G: FnMut(f64) -> f64> Counter<G> {
    fn eval(&mut self, x: f64) -> Result<f64> {
        if self.calls >= self.max {
            return Err(Error::NonConvergence {
                iterations: self.calls,
                lo: self.lo,
                hi: self.hi,
                reason: "evaluation budget exhausted".into(),
            });
        }
        self.calls += 1;
        let v = (self.g)(x);
        if v.is_nan() {
            return Err(Error::Internal(format!("estimating function returned NaN at {x}")));
        }
        Ok(v)
    }
}

/// Locate the plateau midpoint of a nonincreasing `g` on `[lo, hi]`.
///
/// An edge that falls outside the starting bracket is clamped to it, so
/// `g(lo) <= eps` makes `lo` the left edge.
pub fn plateau_midpoint<G: FnMut(f64) -> f64>(
    g: G,
    lo: f64,
    hi: f64,
    tol: f64,
    eps: f64,
    max_iter: usize,
    method: RootMethod,
) -> Result<PlateauRoot> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("bad bracket [{lo}, {hi}]")));
    }
    if !(tol > 0.0) || !(eps >= 0.0) {
        return Err(Error::InvalidArgument("tol must be > 0 and eps >= 0".into()));
    }
    let mut c = Counter { g, calls: 0, max: max_iter.max(2), lo, hi };
    let g_lo = c.eval(lo)?;
    let g_hi = c.eval(hi)?;

    // Knowledge state: a = rightmost x with g > eps, b = leftmost x with g < -eps,
    // [pm_lo, pm_hi] = hull of evaluated plateau points (|g| <= eps).
    let mut a: Option<(f64, f64)> = None;
    let mut b: Option<(f64, f64)> = None;
    let mut pm: Option<(f64, f64)> = None;
    let note = |x: f64, v: f64, a: &mut Option<(f64, f64)>, b: &mut Option<(f64, f64)>, pm: &mut Option<(f64, f64)>| {
        if v > eps {
            if a.map_or(true, |(ax, _)| x > ax) {
                *a = Some((x, v));
            }
        } else if v < -eps {
            if b.map_or(true, |(bx, _)| x < bx) {
                *b = Some((x, v));
            }
        } else {
            *pm = Some(match *pm {
                None => (x, x),
                Some((p0, p1)) => (p0.min(x), p1.max(x)),
            });
        }
    };
    note(lo, g_lo, &mut a, &mut b, &mut pm);
    note(hi, g_hi, &mut a, &mut b, &mut pm);

    // Phase 1: find any plateau point between a and b.
    if pm.is_none() {
        let (mut ax, mut av) = a.expect("g(lo) > eps when no plateau point is known");
        let (mut bx, mut bv) = b.expect("g(hi) < -eps when no plateau point is known");
        let mut stepper = Stepper::new(method);
        loop {
            c.lo = ax;
            c.hi = bx;
            if bx - ax <= tol {
                break;
            }
            let x = stepper.next(ax, av, bx, bv, tol);
            let v = c.eval(x)?;
            if v > eps {
                stepper.moved(true, ax, bx);
                ax = x;
                av = v;
            } else if v < -eps {
                stepper.moved(false, ax, bx);
                bx = x;
                bv = v;
            } else {
                pm = Some((x, x));
                break;
            }
        }
        a = Some((ax, av));
        b = Some((bx, bv));
    }

    // Phase 2: the two edges. With no plateau point the crossing is already
    // confined to an interval of width <= tol.
    let (left, right) = match pm {
        None => {
            let m = 0.5 * (a.unwrap().0 + b.unwrap().0);
            (m, m)
        }
        Some((p0, p1)) => {
            let left = match a {
                None => lo,
                Some((ax, av)) => {
                    let v0 = (c.g)(p0);
                    locate_edge(&mut c, ax, av - eps, p0, v0 - eps, tol, method, eps, true)?
                }
            };
            let right = match b {
                None => hi,
                Some((bx, bv)) => {
                    let v1 = (c.g)(p1);
                    locate_edge(&mut c, p1, v1 + eps, bx, bv + eps, tol, method, -eps, false)?
                }
            };
            (left, right)
        }
    };
    let theta = 0.5 * (left + right);
    let residual = (c.g)(theta);
    Ok(PlateauRoot {
        theta,
        bracket: clip_bracket(theta, tol, left, right),
        plateau: (left, right),
        iterations: c.calls,
        residual,
    })
}

/// `[theta - tol, theta + tol]` intersected with the plateau, pulled inward by
/// whole ulps when rounding would make it wider than `2 tol`.
fn clip_bracket(theta: f64, tol: f64, left: f64, right: f64) -> (f64, f64) {
    let mut lo = (theta - tol).max(left.min(theta));
    let mut hi = (theta + tol).min(right.max(theta));
    while hi - lo > 2.0 * tol && hi > theta {
        hi = hi.next_down();
    }
    while hi - lo > 2.0 * tol && lo < theta {
        lo = lo.next_up();
    }
    (lo, hi)
}

/// Boundary of `{x : h(x) > 0}` (`strict`) or `{x : h(x) >= 0}` where
/// `h = g - shift`, given that `a` is inside the set and `b` is not.
/// Returns the midpoint of a final bracket of width at most `tol`.
#[allow(clippy::too_many_arguments)]
fn locate_edge<G: FnMut(f64) -> f64>(
    c: &mut Counter<G>,
    mut a: f64,
    mut ha: f64,
    mut b: f64,
    mut hb: f64,
    tol: f64,
    method: RootMethod,
    shift: f64,
    strict: bool,
) -> Result<f64> {
    let mut stepper = Stepper::new(method);
    while b - a > tol {
        c.lo = a;
        c.hi = b;
        let x = stepper.next(a, ha, b, hb, tol);
        let hx = c.eval(x)? - shift;
        if hx > 0.0 || (!strict && hx == 0.0) {
            stepper.moved(true, a, b);
            a = x;
            ha = hx;
        } else {
            stepper.moved(false, a, b);
            b = x;
            hb = hx;
        }
    }
    Ok(0.5 * (a + b))
}

struct Stepper {
    method: RootMethod,
    last_side: i8,
    scale_a: f64,
    scale_b: f64,
    stale: u8,
    prev_width: f64,
}

impl Stepper {
    fn new(method: RootMethod) -> Self {
        Stepper { method, last_side: 0, scale_a: 1.0, scale_b: 1.0, stale: 0, prev_width: f64::INFINITY }
    }

    fn next(&mut self, a: f64, ha: f64, b: f64, hb: f64, tol: f64) -> f64 {
        let mid = 0.5 * (a + b);
        if self.method == RootMethod::Bisection || self.stale >= 2 {
            self.stale = 0;
            return mid;
        }
        let fa = ha * self.scale_a;
        let fb = hb * self.scale_b;
        let denom = fa - fb;
        if fa == 0.0 || fb == 0.0 || !(denom > 0.0) || !denom.is_finite() {
            return mid;
        }
        let x = a + (b - a) * (fa / denom);
        // Stay half a tolerance inside so a good estimate closes the bracket.
        let margin = 0.5 * tol;
        if !x.is_finite() {
            mid
        } else {
            x.clamp(a + margin, b - margin)
        }
    }

    fn moved(&mut self, left_end: bool, a: f64, b: f64) {
        let width = b - a;
        if width > 0.5 * self.prev_width {
            self.stale += 1;
        } else {
            self.stale = 0;
        }
        self.prev_width = width;
        let side = if left_end { 1 } else { -1 };
        if side == self.last_side {
            if left_end {
                self.scale_b *= 0.5;
            } else {
                self.scale_a *= 0.5;
            }
        } else {
            self.scale_a = 1.0;
            self.scale_b = 1.0;
        }
        self.last_side = side;
    }
}
