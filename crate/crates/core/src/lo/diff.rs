//! Central differences of sampled vector signals.

use alloc::vec::Vec;

use crate::error::LoError;
use crate::geometry::Vec3;

/// Difference scheme for sampled derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f[k+1] - f[k-1]) / (t[k+1] - t[k-1])`; error grows with the square
    /// of the sample interval.
    ThreePoint,
    /// Fourth-order central difference on uniform samples, falling back to
    /// three points next to the ends.
    #[default]
    FivePoint,
}

fn check(series: &[(f64, Vec3)]) -> Result<(), LoError> {
    let n = series.len();
    if n < 3 {
        return Err(LoError::TooFewSamples { found: n, required: 3 });
    }
    if let Some(i) = series.windows(2).position(|w| !(w[1].0 > w[0].0)) {
        return Err(LoError::NonMonotoneScans { index: i + 1 });
    }
    Ok(())
}

pub fn differentiate_with(series: &[(f64, Vec3)], stencil: Stencil) -> Result<Vec<(f64, Vec3)>, LoError> {
    let mut out = differentiate(series)?;
    if stencil == Stencil::FivePoint {
        for k in 2..series.len().saturating_sub(2) {
            let f = |i: usize| series[i].1;
            // Span of four intervals; uniform sampling assumed.
            let h = (series[k + 2].0 - series[k - 2].0) / 4.0;
            out[k].1 = (8.0 * (f(k + 1) - f(k - 1)) - (f(k + 2) - f(k - 2))) / (12.0 * h);
        }
    }
    Ok(out)
}

/// Derivative of `(t, f(t))` samples. Interior points use the central
/// difference, the two ends one-sided first differences.
pub fn differentiate(series: &[(f64, Vec3)]) -> Result<Vec<(f64, Vec3)>, LoError> {
    check(series)?;
    let n = series.len();
    let slope = |a: &(f64, Vec3), b: &(f64, Vec3)| (b.1 - a.1) / (b.0 - a.0);
    let mut out = Vec::with_capacity(n);
    out.push((series[0].0, slope(&series[0], &series[1])));
    for k in 1..n - 1 {
        out.push((series[k].0, slope(&series[k - 1], &series[k + 1])));
    }
    out.push((series[n - 1].0, slope(&series[n - 2], &series[n - 1])));
    Ok(out)
}
