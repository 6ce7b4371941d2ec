//! Replica-weighted outcome distributions of the SU(2) tree: forced
//! measurements through a pool, and `p(m)^n` weighting through an exact
//! recursion of the moments `x_l = Σ_m σ^l τ^{n−l}`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rng::RandomStream;
use crate::su2::table::{bare_rows, node_apply, projections, Coefficients, NodeCoefficients, Outcome, SigmaTau, Slot};

pub const MAX_REPLICAS: usize = 12;

/// One term `coef · x_a · x_b` of the moment recursion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub a: usize,
    pub b: usize,
    pub coef: f64,
}

/// `x_l(k) = Σ_terms coef · x_a(k−1) x_b(k−1)` for each `l`, outcomes folded in.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionTable {
    pub n: usize,
    pub terms: Vec<Vec<Term>>,
}

impl ExpansionTable {
    pub fn len(&self) -> usize {
        self.terms.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Polynomial in `(a, b)` = exponents of `σ'` and `σ''`.
type Poly = BTreeMap<(usize, usize), f64>;

fn times(poly: &Poly, factor: &[((usize, usize), f64)]) -> Poly {
    let mut out = Poly::new();
    for (&(a, b), &c) in poly {
        for &((da, db), f) in factor {
            if f != 0.0 {
                *out.entry((a + da, b + db)).or_insert(0.0) += c * f;
            }
        }
    }
    out
}

/// Expansion of `σ_out^l τ_out^{n−l}` for a single outcome.
fn expand_outcome(n: usize, l: usize, c: &Coefficients) -> Poly {
    let sigma = [((1, 1), c.s_ss), ((0, 0), c.s_tt)];
    let tau = [((1, 0), c.t_st), ((0, 1), c.t_ts), ((0, 0), c.t_tt)];
    let mut poly = Poly::from([((0, 0), 1.0)]);
    for _ in 0..l {
        poly = times(&poly, &sigma);
    }
    for _ in l..n {
        poly = times(&poly, &tau);
    }
    poly
}

pub fn build_expansion(n: usize, coeffs: &NodeCoefficients) -> Result<ExpansionTable> {
    if !(2..=MAX_REPLICAS).contains(&n) {
        return Err(Error::InvalidArgument(format!("replica number n = {n} outside 2..={MAX_REPLICAS}")));
    }
    let terms = (0..=n)
        .map(|l| {
            let mut sum = Poly::new();
            for (_, c) in coeffs.live() {
                for (k, v) in expand_outcome(n, l, c) {
                    *sum.entry(k).or_insert(0.0) += v;
                }
            }
            sum.into_iter().filter(|&(_, v)| v != 0.0).map(|((a, b), coef)| Term { a, b, coef }).collect()
        })
        .collect();
    Ok(ExpansionTable { n, terms })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    pub n: usize,
    /// `x_l` relative to `exp(log_scale)`.
    pub x: Vec<f64>,
    pub log_scale: f64,
}

impl MomentVector {
    /// Moments of the single depth-0 trajectory `(¼, ¾)`.
    pub fn base(n: usize) -> Self {
        let SigmaTau { sigma, tau } = SigmaTau::BASE;
        let x = (0..=n).map(|l| sigma.powi(l as i32) * tau.powi((n - l) as i32)).collect();
        Self { n, x, log_scale: 0.0 }
    }

    /// Moments of an explicit list of trajectories.
    pub fn from_trajectories(n: usize, weights: &[SigmaTau]) -> Self {
        let x = (0..=n)
            .map(|l| weights.iter().map(|w| w.sigma.powi(l as i32) * w.tau.powi((n - l) as i32)).sum())
            .collect();
        Self { n, x, log_scale: 0.0 }
    }

    pub fn absolute(&self, l: usize) -> f64 {
        self.x[l] * self.log_scale.exp()
    }

    fn normalize(&mut self) -> Result<()> {
        let max = self.x.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) || !max.is_finite() {
            return Err(Error::DegenerateDistribution);
        }
        for v in &mut self.x {
            *v /= max;
        }
        self.log_scale += max.ln();
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ_{l ≤ n−2} C(n−2, l)(x_l + x_{n−l}) / Σ_l C(n, l) x_l`.
pub fn r_n(m: &MomentVector) -> Result<f64> {
    let n = m.n;
    let num: f64 = (0..=n - 2).map(|l| binomial(n - 2, l) * (m.x[l] + m.x[n - l])).sum();
    let den: f64 = (0..=n).map(|l| binomial(n, l) * m.x[l]).sum();
    if !(den > 0.0) {
        return Err(Error::DegenerateDistribution);
    }
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentStep {
    pub k: usize,
    pub moments: MomentVector,
    pub r: f64,
}

pub fn moment_step(table: &ExpansionTable, prev: &MomentVector) -> Result<MomentVector> {
    let x = table
        .terms
        .iter()
        .map(|terms| terms.iter().map(|t| t.coef * prev.x[t.a] * prev.x[t.b]).sum())
        .collect();
    let mut next = MomentVector { n: table.n, x, log_scale: 2.0 * prev.log_scale };
    next.normalize()?;
    Ok(next)
}

/// Moments and `r_n` for `k = 0..=k_max` from `start`.
pub fn iterate_moments_from(table: &ExpansionTable, start: MomentVector, k_max: usize) -> Result<Vec<MomentStep>> {
    let mut m = start;
    m.normalize()?;
    let mut out = vec![MomentStep { k: 0, r: r_n(&m)?, moments: m.clone() }];
    for k in 1..=k_max {
        m = moment_step(table, &m)?;
        out.push(MomentStep { k, r: r_n(&m)?, moments: m.clone() });
    }
    Ok(out)
}

pub fn iterate_moments(table: &ExpansionTable, k_max: usize) -> Result<Vec<MomentStep>> {
    iterate_moments_from(table, MomentVector::base(table.n), k_max)
}

/// `r_n` at depth `k` on an `angles × angles` grid, row-major in `θ1`.
pub fn replica_grid(angles: &[f64], p: f64, n: usize, k: usize, exec: Execution) -> Result<Vec<f64>> {
    let len = angles.len();
    exec.try_map(len * len, |i| {
        let t = crate::su2::node_table(angles[i / len], angles[i % len], p)?;
        let e = build_expansion(n, &t)?;
        let mut m = MomentVector::base(n);
        for _ in 0..k {
            m = moment_step(&e, &m)?;
        }
        r_n(&m)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForcedConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub p: f64,
    pub pool_size: usize,
    pub k_max: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl ForcedConfig {
    pub fn new(theta1: f64, theta2: f64, p: f64) -> Self {
        Self { theta1, theta2, p, pool_size: 10_000, k_max: 50, seed: 1, exec: Execution::Parallel }
    }
}

/// Outcomes lighter than this are not allowed.
pub const ALLOWED_WEIGHT: f64 = 1e-14;

/// Pool under forced measurements: every allowed trajectory is equally
/// likely, so each node draws uniformly among the slot configurations that
/// `p` makes possible and whose output weight is non-negligible. The
/// measurement rate only decides which configurations exist. Entry `k` is
/// the pool's mean sharpness at generation `k`.
pub fn forced_pool(cfg: &ForcedConfig) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&cfg.p) || cfg.pool_size == 0 {
        return Err(Error::InvalidArgument(format!("p = {} or pool size {} invalid", cfg.p, cfg.pool_size)));
    }
    let rows = bare_rows(&projections(cfg.theta1, cfg.theta2));
    let possible = |slot: Slot| if slot == Slot::Absent { cfg.p < 1.0 } else { cfg.p > 0.0 };
    let configs: Vec<&Coefficients> =
        Outcome::ALL.iter().filter(|o| possible(o.inner) && possible(o.outer)).map(|o| &rows[o.index()]).collect();
    let stream = RandomStream::new(cfg.seed);
    let m = cfg.pool_size;
    let mut pool = vec![SigmaTau::BASE; m];
    let mean = |pool: &[SigmaTau]| pool.iter().map(SigmaTau::sharpness).sum::<f64>() / pool.len() as f64;
    let mut series = vec![mean(&pool)];
    for k in 1..=cfg.k_max {
        let prev = &pool;
        pool = cfg.exec.try_map(m, |i| {
            let mut dr = stream.at(k as u64, i as u64);
            let (a, b) = (prev[dr.index(m)], prev[dr.index(m)]);
            let allowed: Vec<SigmaTau> = configs
                .iter()
                .map(|c| node_apply(a, b, c))
                .filter(|st| st.weight() > ALLOWED_WEIGHT)
                .collect();
            if allowed.is_empty() {
                return Err(Error::Internal(format!("no allowed outcome at generation {k}")));
            }
            let st = allowed[dr.index(allowed.len())];
            let w = st.weight();
            Ok(SigmaTau { sigma: st.sigma / w, tau: st.tau / w })
        })?;
        series.push(mean(&pool));
    }
    Ok(series)
}

/// `Δr(θ1, θ2) = r(π−θ1, θ2) − r(θ1, θ2)` on a grid row-major in `θ1`.
pub fn asymmetry_map(theta1s: &[f64], cols: usize, r: &[f64]) -> Result<Vec<f64>> {
    let rows = theta1s.len();
    if r.len() != rows * cols {
        return Err(Error::InvalidArgument(format!("grid holds {} values, expected {rows}×{cols}", r.len())));
    }
    for i in 0..rows {
        let mirror = theta1s[i] + theta1s[rows - 1 - i] - std::f64::consts::PI;
        if mirror.abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("θ1 grid is not symmetric under θ1 → π−θ1 at row {i}")));
        }
    }
    Ok((0..rows * cols).map(|idx| r[(rows - 1 - idx / cols) * cols + idx % cols] - r[idx]).collect())
}
