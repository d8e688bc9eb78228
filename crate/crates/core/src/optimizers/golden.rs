use super::{Counted, OptimResult};
use crate::error::{Error, Result};

/// 1/φ = φ − 1, the factor by which each step shrinks the bracket.
pub const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GoldenConfig {
    fn default() -> Self {
        GoldenConfig { tol: 1e-6, max_iter: 200 }
    }
}

/// Golden section search on `[lo, hi]`.
///
/// Stops once the bracket is no wider than `tol` or after `max_iter`
/// reductions, and returns the bracket midpoint. For a strictly unimodal `f`
/// the midpoint lies within `tol` of the minimiser.
pub fn golden_section<F>(f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<OptimResult>
where
    F: FnMut(f64) -> f64,
{
    Ok(golden_section_brackets(f, lo, hi, tol, max_iter)?.0)
}

/// [`golden_section`], also returning the bracket after every reduction
/// (the initial bracket first).
pub fn golden_section_brackets<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(OptimResult, Vec<(f64, f64)>)>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Config(format!("invalid bracket [{lo}, {hi}]")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let mut f = Counted::new(move |x: &[f64]| f(x[0]));
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f.eval(&[x1])?;
    let mut f2 = f.eval(&[x2])?;
    let mut brackets = vec![(a, b)];
    let mut trace = Vec::new();
    let mut incumbent = f1.min(f2);

    let mut iter = 0;
    while b - a > tol && iter < max_iter {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f.eval(&[x1])?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f.eval(&[x2])?;
        }
        incumbent = incumbent.min(f1.min(f2));
        trace.push(incumbent);
        brackets.push((a, b));
        iter += 1;
    }

    let mid = 0.5 * (a + b);
    let value = f.eval(&[mid])?;
    if let Some(last) = trace.last_mut() {
        *last = last.min(value);
    } else {
        trace.push(incumbent.min(value));
    }
    Ok((
        OptimResult { best_point: vec![mid], best_value: value, evaluations: f.evaluations, trace },
        brackets,
    ))
}
