//! Scans of the order parameter over depth and over the angle plane.

use super::ensemble::{enumerate_with, order_parameter_r, summarize_z_eta, EnumerateConfig, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::u1::Z_FLOOR;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub theta1: f64,
    pub theta2: f64,
    pub p: f64,
    pub k: usize,
    pub r: f64,
    pub ln_z_singlet: f64,
    pub ln_z_triplet: f64,
    pub groups: usize,
    /// Log scale of the Born-weight sums.
    pub log_scale: f64,
}

impl ScanPoint {
    pub fn from_ensemble(cfg: &EnumerateConfig, e: &TrajectoryEnsemble) -> Result<Self> {
        let s = summarize_z_eta(e, Z_FLOOR);
        Ok(Self {
            theta1: cfg.theta1,
            theta2: cfg.theta2,
            p: cfg.p,
            k: e.depth,
            r: order_parameter_r(e)?,
            ln_z_singlet: s.ln_z_singlet,
            ln_z_triplet: s.ln_z_triplet,
            groups: e.len(),
            log_scale: e.log_scale[1],
        })
    }
}

/// Cell centres `π (i + ½)/n`, which avoid the lines where the tree
/// sharpens at once.
pub fn grid_angles(n: usize) -> Vec<f64> {
    (0..n).map(|i| std::f64::consts::PI * (i as f64 + 0.5) / n as f64).collect()
}

/// One point per depth `0..=cfg.k_max`.
pub fn depth_series(cfg: &EnumerateConfig) -> Result<Vec<ScanPoint>> {
    let (points, err) = depth_series_partial(cfg);
    match err {
        Some(e) => Err(e),
        None => Ok(points),
    }
}

/// As [`depth_series`], keeping the depths completed before a failure.
pub fn depth_series_partial(cfg: &EnumerateConfig) -> (Vec<ScanPoint>, Option<Error>) {
    let mut out = Vec::new();
    let mut err = None;
    let run = enumerate_with(cfg, |e| {
        if err.is_none() {
            match ScanPoint::from_ensemble(cfg, e) {
                Ok(pt) => out.push(pt),
                Err(x) => err = Some(x),
            }
        }
    });
    (out, err.or(run.err()))
}

/// `n × n` grid at fixed `p` and depth `k`, row-major in `θ1`. Grid
/// points run in parallel, each enumeration sequentially.
pub fn phase_diagram(n: usize, p: f64, k: usize, budget: usize, exec: Execution) -> Result<Vec<ScanPoint>> {
    phase_diagram_points(n, p, k, budget, exec).into_iter().collect()
}

/// As [`phase_diagram`] with a result per grid point.
pub fn phase_diagram_points(n: usize, p: f64, k: usize, budget: usize, exec: Execution) -> Vec<Result<ScanPoint>> {
    let angles = grid_angles(n);
    exec.map(n * n, |i| {
        let cfg = EnumerateConfig {
            budget,
            exec: Execution::Sequential,
            ..EnumerateConfig::new(angles[i / n], angles[i % n], p, k)
        };
        let e = enumerate_with(&cfg, |_| {})?;
        ScanPoint::from_ensemble(&cfg, &e)
    })
}
