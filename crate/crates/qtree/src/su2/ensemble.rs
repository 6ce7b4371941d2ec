//! Exact enumeration of the trajectory ensemble, grouped by normalized
//! singlet weight.
//!
//! A child's normalized `(σ̃, τ̃)` depends only on its parents' normalized
//! values and the outcome, so trajectories sharing `σ̃` can be merged
//! whatever their Born weights. Each group keeps power sums
//! `S_j = Σ w^j` over its trajectories, every power with its own log scale.

use super::table::{node_apply, pattern_weight, NodeCoefficients, Outcome, SigmaTau};
use crate::error::{Error, Result};
use crate::par::Execution;

/// Number of power sums `S_0..S_3`.
pub const MOMENTS: usize = 4;

/// Default cap on raw children per generation.
pub const DEFAULT_BUDGET: usize = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Eta {
    SingletLike,
    TripletLike,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Group {
    /// `min(σ, τ)/(σ + τ)`.
    pub z: f64,
    pub eta: Eta,
    /// `S_j` relative to `exp(log_scale[j])`.
    pub sums: [f64; MOMENTS],
}

impl Group {
    fn from_weights(st: SigmaTau) -> (f64, Eta) {
        let w = st.weight();
        if st.sigma > st.tau {
            (st.tau / w, Eta::SingletLike)
        } else {
            (st.sigma / w, Eta::TripletLike)
        }
    }

    /// Normalized `(σ̃, τ̃)`.
    pub fn normalized(&self) -> SigmaTau {
        match self.eta {
            Eta::SingletLike => SigmaTau { sigma: 1.0 - self.z, tau: self.z },
            Eta::TripletLike => SigmaTau { sigma: self.z, tau: 1.0 - self.z },
        }
    }

    pub fn sharpness(&self) -> f64 {
        1.0 - 2.0 * self.z * (1.0 - self.z)
    }
}

/// Grouping key: `z` with its mantissa rounded to 40 bits, `η` in the low bit.
pub fn group_key(z: f64, eta: Eta) -> u64 {
    let rounded = (z.to_bits() + (1 << 11)) >> 12;
    (rounded << 1) | u64::from(eta == Eta::TripletLike)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEnsemble {
    pub depth: usize,
    /// Sorted by key.
    pub groups: Vec<Group>,
    pub log_scale: [f64; MOMENTS],
}

impl TrajectoryEnsemble {
    /// A single group with `(σ, τ) = (¼, ¾)` and unit weight.
    pub fn base() -> Self {
        let (z, eta) = Group::from_weights(SigmaTau::BASE);
        Self { depth: 0, groups: vec![Group { z, eta, sums: [1.0; MOMENTS] }], log_scale: [0.0; MOMENTS] }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `Σ_groups S_j`, in absolute units.
    pub fn power_sum(&self, j: usize) -> f64 {
        self.groups.iter().map(|g| g.sums[j]).sum::<f64>() * self.log_scale[j].exp()
    }

    pub fn born_total(&self) -> f64 {
        self.power_sum(1)
    }

    pub fn singlet_total(&self) -> f64 {
        self.groups.iter().map(|g| g.sums[1] * g.normalized().sigma).sum::<f64>() * self.log_scale[1].exp()
    }

    pub fn triplet_total(&self) -> f64 {
        self.groups.iter().map(|g| g.sums[1] * g.normalized().tau).sum::<f64>() * self.log_scale[1].exp()
    }

    /// `ln` of the number of trajectories with non-zero weight.
    pub fn ln_trajectories(&self) -> f64 {
        self.groups.iter().map(|g| g.sums[0]).sum::<f64>().ln() + self.log_scale[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnumerateConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub p: f64,
    pub k_max: usize,
    pub budget: usize,
    pub exec: Execution,
}

impl EnumerateConfig {
    pub fn new(theta1: f64, theta2: f64, p: f64, k_max: usize) -> Self {
        Self { theta1, theta2, p, k_max, budget: DEFAULT_BUDGET, exec: Execution::Parallel }
    }
}

struct Child {
    key: u64,
    z: f64,
    sums: [f64; MOMENTS],
}

/// One generation: every ordered parent pair under every possible outcome.
pub fn step(
    prev: &TrajectoryEnsemble,
    table: &NodeCoefficients,
    budget: usize,
    exec: Execution,
) -> Result<TrajectoryEnsemble> {
    let live: Vec<_> = table.live().map(|(_, c)| *c).collect();
    let n = prev.len();
    let needed = n.saturating_mul(n).saturating_mul(live.len());
    let depth = prev.depth + 1;
    if needed > budget {
        return Err(Error::BudgetExceeded { depth, budget, needed });
    }
    let parents: Vec<(SigmaTau, [f64; MOMENTS])> = prev.groups.iter().map(|g| (g.normalized(), g.sums)).collect();
    let blocks = exec.map(n, |a| {
        let (sa, wa) = parents[a];
        let mut out = Vec::with_capacity(n * live.len());
        for &(sb, wb) in &parents {
            for c in &live {
                let st = node_apply(sa, sb, c);
                let f = st.weight();
                if !(f > 0.0) {
                    continue;
                }
                let (z, eta) = Group::from_weights(st);
                let mut sums = [0.0; MOMENTS];
                let mut fj = 1.0;
                for j in 0..MOMENTS {
                    sums[j] = wa[j] * wb[j] * fj;
                    fj *= f;
                }
                out.push(Child { key: group_key(z, eta), z, sums });
            }
        }
        out
    });
    let mut children: Vec<Child> = blocks.into_iter().flatten().collect();
    exec.sort_by(&mut children, |x, y| x.key.cmp(&y.key));
    let mut groups: Vec<Group> = Vec::new();
    let mut last_key = None;
    let mut zw = 0.0;
    for ch in &children {
        if last_key != Some(ch.key) {
            if let Some(g) = groups.last_mut() {
                finish_z(g, zw);
            }
            let eta = if ch.key & 1 == 1 { Eta::TripletLike } else { Eta::SingletLike };
            groups.push(Group { z: ch.z, eta, sums: [0.0; MOMENTS] });
            last_key = Some(ch.key);
            zw = 0.0;
        }
        let g = groups.last_mut().expect("group was just pushed");
        for j in 0..MOMENTS {
            g.sums[j] += ch.sums[j];
        }
        zw += ch.sums[1] * ch.z;
    }
    if let Some(g) = groups.last_mut() {
        finish_z(g, zw);
    }
    let mut log_scale = [0.0; MOMENTS];
    for j in 0..MOMENTS {
        let max = groups.iter().map(|g| g.sums[j]).fold(0.0, f64::max);
        log_scale[j] = 2.0 * prev.log_scale[j];
        if max > 0.0 {
            for g in &mut groups {
                g.sums[j] /= max;
            }
            log_scale[j] += max.ln();
        }
    }
    Ok(TrajectoryEnsemble { depth, groups, log_scale })
}

/// Born-weighted mean of the merged `z` values; linear sums stay exact.
fn finish_z(g: &mut Group, zw: f64) {
    if g.sums[1] > 0.0 {
        g.z = (zw / g.sums[1]).clamp(0.0, 0.5);
    }
}

/// Ensembles for `k = 0..=k_max`.
pub fn enumerate(cfg: &EnumerateConfig) -> Result<Vec<TrajectoryEnsemble>> {
    let mut out = Vec::with_capacity(cfg.k_max + 1);
    enumerate_with(cfg, |e| out.push(e.clone()))?;
    Ok(out)
}

/// As [`enumerate`], handing each ensemble to `observe` instead of keeping it.
pub fn enumerate_with<F>(cfg: &EnumerateConfig, mut observe: F) -> Result<TrajectoryEnsemble>
where
    F: FnMut(&TrajectoryEnsemble),
{
    let table = super::table::node_table(cfg.theta1, cfg.theta2, cfg.p)?;
    let mut e = TrajectoryEnsemble::base();
    observe(&e);
    for _ in 0..cfg.k_max {
        e = step(&e, &table, cfg.budget, cfg.exec)?;
        observe(&e);
    }
    Ok(e)
}

/// Born-weighted sharpness `Σ w (σ² + τ²)/(σ + τ)²`.
pub fn order_parameter_r(e: &TrajectoryEnsemble) -> Result<f64> {
    let total: f64 = e.groups.iter().map(|g| g.sums[1]).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidState("ensemble carries no Born weight".into()));
    }
    Ok(e.groups.iter().map(|g| g.sums[1] * g.sharpness()).sum::<f64>() / total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZEtaSummary {
    /// Born-weighted `⟨ln Z⟩` over singlet-like groups with `Z` above the floor.
    pub ln_z_singlet: f64,
    pub ln_z_triplet: f64,
    /// Born weight of each class.
    pub weight_singlet: f64,
    pub weight_triplet: f64,
}

pub fn summarize_z_eta(e: &TrajectoryEnsemble, floor: f64) -> ZEtaSummary {
    let total: f64 = e.groups.iter().map(|g| g.sums[1]).sum();
    let class = |eta: Eta| {
        let (mut w, mut wl, mut all) = (0.0, 0.0, 0.0);
        for g in e.groups.iter().filter(|g| g.eta == eta) {
            all += g.sums[1];
            if g.z > floor {
                w += g.sums[1];
                wl += g.sums[1] * g.z.ln();
            }
        }
        let ln_z = if w > 0.0 { wl / w } else { f64::NEG_INFINITY };
        (ln_z, if total > 0.0 { all / total } else { 0.0 })
    };
    let (ln_z_singlet, weight_singlet) = class(Eta::SingletLike);
    let (ln_z_triplet, weight_triplet) = class(Eta::TripletLike);
    ZEtaSummary { ln_z_singlet, ln_z_triplet, weight_singlet, weight_triplet }
}

/// One explicit trajectory: outcomes in preorder (node, first subtree,
/// second subtree) and its unnormalized `(σ, τ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub outcomes: Vec<Outcome>,
    pub weights: SigmaTau,
}

/// Every trajectory of depth `k`, ungrouped, including zero-weight ones.
/// The outcome set is fixed by `p` alone.
pub fn enumerate_trajectories(table: &NodeCoefficients, k: usize) -> Vec<Trajectory> {
    if k == 0 {
        return vec![Trajectory { outcomes: Vec::new(), weights: SigmaTau::BASE }];
    }
    let sub = enumerate_trajectories(table, k - 1);
    let outcomes: Vec<Outcome> =
        Outcome::ALL.iter().copied().filter(|o| pattern_weight(table.p, o.measured()) > 0.0).collect();
    let mut out = Vec::with_capacity(outcomes.len() * sub.len() * sub.len());
    for o in outcomes {
        for a in &sub {
            for b in &sub {
                let mut rec = Vec::with_capacity(1 + a.outcomes.len() * 2);
                rec.push(o);
                rec.extend_from_slice(&a.outcomes);
                rec.extend_from_slice(&b.outcomes);
                out.push(Trajectory { outcomes: rec, weights: node_apply(a.weights, b.weights, table.row(o)) });
            }
        }
    }
    out
}
