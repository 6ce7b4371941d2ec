//! Saturation-versus-decay classification of `ln Z^typ` series.

use crate::error::{Error, Result};
use crate::stats::{linear_fit, LogTypical};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// `ln Z^typ` settles to a finite value: mixed or fuzzy.
    Saturating,
    /// `ln Z^typ` keeps falling: pure or sharp.
    Decaying,
}

/// Closed interval `[lo, hi]` of `p` that contains the transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        lo <= self.lo && self.hi <= hi
    }
}

/// Classifies a series (index = generation) from its last third.
///
/// The series decays when the floor swallows every sample, when the
/// surviving fraction halves across the window (the mean of what is left
/// above the floor then stalls even though the bulk keeps moving down), or
/// when the fitted slope is both below minus three standard errors and
/// steep enough to lose another e-fold over a run as long again.
///
/// Pool averages of neighbouring generations are strongly correlated, so
/// the slope error is inflated by the lag-one autocorrelation `φ` of the
/// residuals, `sqrt((1+φ)/(1−φ))`.
pub fn classify(series: &[LogTypical]) -> Result<Phase> {
    if series.len() < 10 {
        return Err(Error::InvalidArgument(format!("need ≥ 10 generations, got {}", series.len())));
    }
    let start = 2 * series.len() / 3;
    let tail = &series[start..];
    if tail.iter().any(|g| g.mean == f64::NEG_INFINITY) {
        return Ok(Phase::Decaying);
    }
    let first = tail[0].frac_nonzero;
    let last = tail[tail.len() - 1].frac_nonzero;
    if last < 0.5 * first {
        return Ok(Phase::Decaying);
    }
    let x: Vec<f64> = (start..series.len()).map(|k| k as f64).collect();
    let y: Vec<f64> = tail.iter().map(|g| g.mean).collect();
    let (a, slope, _, se) = linear_fit(&x, &y)
        .ok_or_else(|| Error::InvalidArgument("degenerate series for the slope fit".into()))?;
    let resid: Vec<f64> = x.iter().zip(&y).map(|(u, v)| v - a - slope * u).collect();
    let ss: f64 = resid.iter().map(|e| e * e).sum();
    let phi = if ss > 0.0 {
        (resid.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / ss).clamp(0.0, 0.99)
    } else {
        0.0
    };
    let se = se * ((1.0 + phi) / (1.0 - phi)).sqrt();
    let horizon = (series.len() - 1) as f64;
    Ok(if slope < -3.0 * se && -slope * horizon > 1.0 { Phase::Decaying } else { Phase::Saturating })
}

/// Brackets the transition from classified scan points. Saturating points
/// are expected below the transition and decaying ones above; when the two
/// sets overlap the bracket spans the overlap.
pub fn bracket(points: &[(f64, Phase)]) -> Result<Bracket> {
    let lo = points.iter().filter(|x| x.1 == Phase::Saturating).map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
    let hi = points.iter().filter(|x| x.1 == Phase::Decaying).map(|x| x.0).fold(f64::INFINITY, f64::min);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InconclusiveScan(format!(
            "classification never changes across the scan ({} points)",
            points.len()
        )));
    }
    Ok(Bracket { lo: lo.min(hi), hi: lo.max(hi) })
}

/// Brackets both transitions: `purification` and `sharpening` hold
/// `(p, series)` pairs, each series already reduced to the protocol's
/// order parameter.
pub fn estimate_critical(
    purification: &[(f64, Vec<LogTypical>)],
    sharpening: &[(f64, Vec<LogTypical>)],
) -> Result<(Bracket, Bracket)> {
    let classify_all = |scan: &[(f64, Vec<LogTypical>)]| -> Result<Vec<(f64, Phase)>> {
        scan.iter().map(|(p, s)| classify(s).map(|c| (*p, c))).collect()
    };
    Ok((bracket(&classify_all(purification)?)?, bracket(&classify_all(sharpening)?)?))
}
