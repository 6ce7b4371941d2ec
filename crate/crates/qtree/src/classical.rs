//! The infinite-qudit limit: tree percolation for purification and a
//! classical charge walk for sharpening.

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rng::{born_sample, Draws, RandomStream};
use crate::stats::{log_typical, LogTypical};
use crate::u1::{NodeOutcome, Z_FLOOR};

/// Distribution of the top-site charge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChargeVector {
    pub p0: f64,
    pub p1: f64,
}

impl ChargeVector {
    pub const UNIFORM: ChargeVector = ChargeVector { p0: 0.5, p1: 0.5 };

    /// Normalizes non-negative weights.
    pub fn new(p0: f64, p1: f64) -> Result<Self> {
        let total = p0 + p1;
        if !(p0 >= 0.0 && p1 >= 0.0 && total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidState(format!("charge weights ({p0}, {p1}) are not a distribution")));
        }
        Ok(Self { p0: p0 / total, p1: p1 / total })
    }

    pub fn sharp(charge: usize) -> Self {
        if charge == 0 {
            Self { p0: 1.0, p1: 0.0 }
        } else {
            Self { p0: 0.0, p1: 1.0 }
        }
    }

    /// Weight of the lighter charge.
    pub fn z(&self) -> f64 {
        self.p0.min(self.p1)
    }

    /// The heavier charge; ties go to 0.
    pub fn s(&self) -> usize {
        usize::from(self.p1 > self.p0)
    }

    pub fn weights(&self) -> [f64; 2] {
        [self.p0, self.p1]
    }
}

/// Charge-basis transition matrix on `|q1 q2⟩`, basis order `00, 01, 10, 11`.
pub const TRANSITION: [[f64; 4]; 4] =
    [[1.0, 0.0, 0.0, 0.0], [0.0, 0.5, 0.5, 0.0], [0.0, 0.5, 0.5, 0.0], [0.0, 0.0, 0.0, 1.0]];

/// `V (v1 ⊗ v2)`.
pub fn transition(v1: &ChargeVector, v2: &ChargeVector) -> [f64; 4] {
    let w = [v1.p0 * v2.p0, v1.p0 * v2.p1, v1.p1 * v2.p0, v1.p1 * v2.p1];
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(TRANSITION.iter()) {
        *o = row.iter().zip(&w).map(|(a, b)| a * b).sum();
    }
    out
}

/// Retained vector given the discarded charge, with the branch probability.
pub fn charge_conditional(v1: &ChargeVector, v2: &ChargeVector, sigma_prime: usize) -> Result<(ChargeVector, f64)> {
    let w = transition(v1, v2);
    let (a, b) = (w[sigma_prime], w[2 + sigma_prime]);
    if a + b <= 0.0 {
        return Err(Error::Internal(format!("discarded charge {sigma_prime} has zero probability")));
    }
    Ok((ChargeVector::new(a, b)?, a + b))
}

/// One node: mix, discard the second site's charge, then measure the
/// retained charge with probability `p`.
pub fn node_charge(v1: &ChargeVector, v2: &ChargeVector, p: f64, draws: &mut Draws) -> Result<(ChargeVector, NodeOutcome)> {
    let w = transition(v1, v2);
    let marginal = [w[0] + w[2], w[1] + w[3]];
    let sigma_prime = born_sample(draws, &marginal)?;
    let (mut v, _) = charge_conditional(v1, v2, sigma_prime)?;
    let extra_measured = draws.bernoulli(p);
    let mut sigma = None;
    if extra_measured {
        let q = born_sample(draws, &v.weights())?;
        v = ChargeVector::sharp(q);
        sigma = Some(q);
    }
    Ok((v, NodeOutcome { sigma_prime, extra_measured, sigma }))
}

/// `⟨Z_{k→∞}⟩ = 1 − x` with `x ← p + (1−p)x²` iterated from 0.
///
/// At `p = ½` the map is marginal and converges like `1/n`; past the
/// iteration cap the smaller root `min(1, p/(1−p))` is returned.
pub fn percolation_fixed_point(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    let mut x = 0.0f64;
    for _ in 0..1_000_000 {
        let next = p + (1.0 - p) * x * x;
        if (next - x).abs() < 1e-14 {
            return Ok(1.0 - next);
        }
        x = next;
    }
    let root = if p < 1.0 { (p / (1.0 - p)).min(1.0) } else { 1.0 };
    Ok(1.0 - root)
}

/// `⟨Z_k⟩` after exactly `depth` generations.
pub fn percolation_at_depth(p: f64, depth: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    let mut x = 0.0;
    for _ in 0..depth {
        x = p + (1.0 - p) * x * x;
    }
    Ok(1.0 - x)
}

/// Whether a random measured tree of the given depth connects its top to
/// a leaf. Each node is measured with probability `p`; unmeasured nodes
/// connect through either child.
pub fn sample_connected(depth: usize, p: f64, draws: &mut Draws) -> bool {
    if depth == 0 {
        return true;
    }
    if draws.bernoulli(p) {
        return false;
    }
    sample_connected(depth - 1, p, draws) || sample_connected(depth - 1, p, draws)
}

/// Fraction of connected trees and its standard error.
pub fn percolation_monte_carlo(p: f64, depth: usize, samples: usize, stream: RandomStream, exec: Execution) -> (f64, f64) {
    let hits = exec.map(samples, |i| sample_connected(depth, p, &mut stream.at(0, i as u64)));
    let n = samples as f64;
    let mean = hits.iter().filter(|&&h| h).count() as f64 / n;
    (mean, (mean * (1.0 - mean) / n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalConfig {
    pub p: f64,
    pub pool_size: usize,
    pub k_max: usize,
    pub seed: u64,
    pub z_floor: f64,
    pub exec: Execution,
}

impl ClassicalConfig {
    pub fn new(p: f64) -> Self {
        Self { p, pool_size: 100_000, k_max: 500, seed: 1, z_floor: Z_FLOOR, exec: Execution::Parallel }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.pool_size < 10 {
            return Err(Error::InvalidArgument(format!("pool_size = {} below 10", self.pool_size)));
        }
        Ok(())
    }
}

/// Pool evolution of charge vectors from `(½, ½)` leaves; entry `k` holds
/// the `ln Z` statistics of generation `k`.
pub fn pool_evolve_classical(cfg: &ClassicalConfig) -> Result<Vec<LogTypical>> {
    pool_evolve_classical_with(cfg, |_, _| {})
}

pub fn pool_evolve_classical_with<F>(cfg: &ClassicalConfig, mut observe: F) -> Result<Vec<LogTypical>>
where
    F: FnMut(usize, &[ChargeVector]),
{
    cfg.validate()?;
    let stream = RandomStream::new(cfg.seed);
    let m = cfg.pool_size;
    let mut pool = vec![ChargeVector::UNIFORM; m];
    observe(0, &pool);
    let mut series = vec![log_typical(pool.iter().map(ChargeVector::z), cfg.z_floor)];
    for k in 1..=cfg.k_max {
        let prev = &pool;
        let next = cfg.exec.try_map(m, |i| {
            let mut draws = stream.at(k as u64, i as u64);
            let a = draws.index(m);
            let b = draws.index(m);
            node_charge(&prev[a], &prev[b], cfg.p, &mut draws).map(|r| r.0)
        })?;
        pool = next;
        observe(k, &pool);
        series.push(log_typical(pool.iter().map(ChargeVector::z), cfg.z_floor));
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_is_doubly_stochastic_and_conserving() {
        for i in 0..4 {
            let row: f64 = TRANSITION[i].iter().sum();
            let col: f64 = TRANSITION.iter().map(|r| r[i]).sum();
            assert_eq!(row, 1.0);
            assert_eq!(col, 1.0);
            let charge = |j: usize| (j >> 1) + (j & 1);
            for j in 0..4 {
                if charge(i) != charge(j) {
                    assert_eq!(TRANSITION[i][j], 0.0);
                }
            }
        }
    }

    #[test]
    fn all_zero_charge_is_fixed() {
        let z = ChargeVector::sharp(0);
        let mut dr = RandomStream::new(1).at(0, 0);
        let (v, o) = node_charge(&z, &z, 0.0, &mut dr).unwrap();
        assert_eq!(v, z);
        assert_eq!(o.sigma_prime, 0);
        assert!(!o.extra_measured);
    }

    #[test]
    fn extra_measurement_collapses() {
        let mut dr = RandomStream::new(2).at(0, 0);
        let (v, o) = node_charge(&ChargeVector::UNIFORM, &ChargeVector::UNIFORM, 1.0, &mut dr).unwrap();
        assert_eq!(v.z(), 0.0);
        assert_eq!(Some(v.s()), o.sigma);
    }

    #[test]
    fn linearized_rule_small_z() {
        let z = 1e-4;
        let v1 = ChargeVector::new(1.0 - z, z).unwrap();
        let v2 = ChargeVector::new(z, 1.0 - z).unwrap();
        for sp in 0..2 {
            let (out, _) = charge_conditional(&v1, &v2, sp).unwrap();
            assert!((out.z() / (2.0 * z) - 1.0).abs() < 5.0 * z, "{}", out.z());
        }
        assert!(charge_conditional(&ChargeVector::sharp(0), &ChargeVector::sharp(0), 1).is_err());
    }

    #[test]
    fn conjugation_symmetry_of_the_pool() {
        let cfg = ClassicalConfig { pool_size: 20_000, k_max: 30, ..ClassicalConfig::new(0.25) };
        let mut heavy1 = 0.0;
        pool_evolve_classical_with(&cfg, |k, pool| {
            if k == cfg.k_max {
                heavy1 = pool.iter().filter(|v| v.s() == 1).count() as f64 / pool.len() as f64;
            }
        })
        .unwrap();
        assert!((heavy1 - 0.5).abs() < 5.0 * (0.25 / 20_000f64).sqrt(), "{heavy1}");
    }

    #[test]
    fn percolation_values() {
        assert_eq!(percolation_fixed_point(0.0).unwrap(), 1.0);
        assert!(percolation_fixed_point(0.5).unwrap().abs() < 1e-6);
        assert!((percolation_fixed_point(0.25).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(percolation_fixed_point(0.8).unwrap().abs() < 1e-12);
        assert!(percolation_fixed_point(1.5).is_err());
    }

    #[test]
    fn monte_carlo_matches_recursion() {
        for &p in &[0.1, 0.3, 0.6] {
            let (mc, se) = percolation_monte_carlo(p, 30, 40_000, RandomStream::new(5), Execution::Parallel);
            let exact = percolation_at_depth(p, 30).unwrap();
            assert!((mc - exact).abs() < 3.0 * se.max(1e-4), "p={p}: {mc} vs {exact}");
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut cfg = ClassicalConfig { pool_size: 500, k_max: 10, ..ClassicalConfig::new(0.3) };
        let a = pool_evolve_classical(&cfg).unwrap();
        cfg.exec = Execution::Sequential;
        assert_eq!(a, pool_evolve_classical(&cfg).unwrap());
    }
}
