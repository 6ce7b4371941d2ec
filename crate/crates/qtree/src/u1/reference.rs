//! Full-Hilbert-space reference for small collapse trees.
//!
//! Layer `l` of a depth-`k` tree holds `2^{k−l}` nodes; node `i` of a layer
//! acts on sites `2i` (kept) and `2i + 1` (discarded) of the layer below.
//! Nodes are listed layer by layer from the leaves up.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::gate::{BlockUnitary, ChargeLayout};
use super::node::{node_collapse, node_conditional, NodeOutcome};
use super::state::{SiteState, StateKind};
use crate::error::{Error, Result};
use crate::rng::{born_sample, Draws};

/// Gates and outcomes of one sampled tree.
#[derive(Clone, Debug)]
pub struct TreeRecord {
    pub depth: usize,
    pub p: f64,
    pub leaves: Vec<SiteState>,
    pub gates: Vec<BlockUnitary>,
    pub outcomes: Vec<NodeOutcome>,
}

/// Runs the node recursion over a whole tree, recording everything needed
/// to replay it. Returns the record, the top state and the trajectory
/// probability including the `p` / `1 − p` factors.
pub fn sample_recursive(
    leaves: Vec<SiteState>,
    p: f64,
    draws: &mut Draws,
) -> Result<(TreeRecord, SiteState, f64)> {
    let depth = tree_depth(leaves.len())?;
    let d = leaves[0].d();
    let layout = ChargeLayout::new(d)?;
    let mut layer = leaves.clone();
    let (mut gates, mut outcomes) = (Vec::new(), Vec::new());
    let mut prob = 1.0;
    while layer.len() > 1 {
        let mut next = Vec::with_capacity(layer.len() / 2);
        for pair in layer.chunks(2) {
            let gate = BlockUnitary::sample(&layout, draws)?;
            let (state, outcome) = node_collapse(&pair[0], &pair[1], &gate, p, draws)?;
            let (_, born) = node_conditional(&pair[0], &pair[1], &gate, &outcome)?;
            prob *= born * if outcome.extra_measured { p } else { 1.0 - p };
            gates.push(gate);
            outcomes.push(outcome);
            next.push(state);
        }
        layer = next;
    }
    let top = layer.pop().expect("non-empty tree");
    Ok((TreeRecord { depth, p, leaves, gates, outcomes }, top, prob))
}

/// Replays a record on the full leaf Hilbert space: builds `T†|o⟩` for each
/// top basis state `o` and contracts with the product leaf state. Returns the
/// normalized top density matrix and the trajectory probability.
pub fn monolithic_conditional(rec: &TreeRecord) -> Result<(DMatrix<C64>, f64)> {
    let depth = tree_depth(rec.leaves.len())?;
    if rec.gates.len() != rec.leaves.len() - 1 || rec.outcomes.len() != rec.gates.len() {
        return Err(Error::InvalidArgument("record does not describe a full tree".into()));
    }
    let n = rec.leaves[0].site_dim();
    let mut layer_start = vec![0usize; depth + 1];
    for l in 1..=depth {
        layer_start[l] = layer_start[l - 1] + (1usize << (depth - l + 1)) / 2;
    }
    let pullbacks: Vec<DVector<C64>> = (0..n)
        .map(|o| {
            let mut v = DVector::zeros(n);
            v[o] = C64::new(1.0, 0.0);
            let mut sites = 1usize;
            for l in (1..=depth).rev() {
                let base = layer_start[l - 1];
                for i in 0..sites {
                    if let Some(sigma) = rec.outcomes[base + i].sigma.filter(|_| rec.outcomes[base + i].extra_measured) {
                        project_site(&mut v, n, sites, i, sigma);
                    }
                }
                let inserted: Vec<usize> = (0..sites).map(|i| rec.outcomes[base + i].sigma_prime).collect();
                v = interleave_basis(&v, n, sites, &inserted);
                sites *= 2;
                for i in 0..sites / 2 {
                    let u = rec.gates[base + i].two_site_matrix().adjoint();
                    apply_two_site(&mut v, n, sites, 2 * i, &u);
                }
            }
            v
        })
        .collect();
    let leaf_ops: Vec<DMatrix<C64>> = rec.leaves.iter().map(SiteState::density_matrix).collect();
    let mut rho = DMatrix::zeros(n, n);
    for b in 0..n {
        let mut y = pullbacks[b].clone();
        for (s, op) in leaf_ops.iter().enumerate() {
            apply_one_site(&mut y, n, leaf_ops.len(), s, op);
        }
        for a in 0..n {
            rho[(a, b)] = pullbacks[a].dotc(&y);
        }
    }
    let born = rho.trace().re;
    if !(born > 0.0) {
        return Err(Error::Internal("record has zero probability".into()));
    }
    let factor: f64 = rec.outcomes.iter().map(|o| if o.extra_measured { rec.p } else { 1.0 - rec.p }).product();
    Ok((rho / C64::new(born, 0.0), born * factor))
}

/// Forward simulation of a whole tree on the full density matrix, sampling
/// every outcome from the global Born rule. Only practical for tiny trees.
pub fn sample_full_circuit(leaves: &[SiteState], p: f64, draws: &mut Draws) -> Result<SiteState> {
    tree_depth(leaves.len())?;
    let d = leaves[0].d();
    let n = 2 * d;
    let layout: Arc<ChargeLayout> = ChargeLayout::new(d)?;
    let mut rho = leaves[0].density_matrix();
    for leaf in &leaves[1..] {
        rho = rho.kronecker(&leaf.density_matrix());
    }
    let mut sites = leaves.len();
    while sites > 1 {
        for i in 0..sites / 2 {
            let u = BlockUnitary::sample(&layout, draws)?.two_site_matrix();
            let full = embed(&u, n, sites, 2 * i, 2);
            rho = &full * rho * full.adjoint();
            measure_site(&mut rho, n, sites, 2 * i + 1, draws)?;
            if draws.bernoulli(p) {
                measure_site(&mut rho, n, sites, 2 * i, draws)?;
            }
        }
        rho = trace_out_odd(&rho, n, sites);
        sites /= 2;
    }
    let kind = leaves[0].kind();
    let tr = rho.trace();
    let rho = rho / tr;
    match kind {
        StateKind::Mixed => SiteState::mixed(d, rho),
        StateKind::Pure => {
            // Rank one: any non-zero column is proportional to the state.
            let col = (0..n).max_by(|&a, &b| rho[(a, a)].re.total_cmp(&rho[(b, b)].re)).unwrap_or(0);
            let mut v = rho.column(col).into_owned();
            let norm = v.norm();
            v /= C64::new(norm, 0.0);
            SiteState::pure(d, v)
        }
    }
}

fn tree_depth(leaves: usize) -> Result<usize> {
    if leaves < 2 || !leaves.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("{leaves} leaves do not form a binary tree")));
    }
    Ok(leaves.trailing_zeros() as usize)
}

fn digit(idx: usize, n: usize, sites: usize, s: usize) -> usize {
    (idx / n.pow((sites - 1 - s) as u32)) % n
}

fn project_site(v: &mut DVector<C64>, n: usize, sites: usize, s: usize, keep: usize) {
    for idx in 0..v.len() {
        if digit(idx, n, sites, s) != keep {
            v[idx] = C64::new(0.0, 0.0);
        }
    }
}

/// Inserts a fixed basis digit after every site.
fn interleave_basis(v: &DVector<C64>, n: usize, sites: usize, inserted: &[usize]) -> DVector<C64> {
    let mut out = DVector::zeros(v.len() * n.pow(sites as u32));
    for idx in 0..v.len() {
        let mut target = 0usize;
        for s in 0..sites {
            target = (target * n + digit(idx, n, sites, s)) * n + inserted[s];
        }
        out[target] = v[idx];
    }
    out
}

fn apply_two_site(v: &mut DVector<C64>, n: usize, sites: usize, s: usize, u: &DMatrix<C64>) {
    let stride = n.pow((sites - 2 - s) as u32);
    let block = n * n * stride;
    let mut buf = vec![C64::new(0.0, 0.0); n * n];
    for outer in (0..v.len()).step_by(block) {
        for inner in 0..stride {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = v[outer + k * stride + inner];
            }
            for r in 0..n * n {
                let mut acc = C64::new(0.0, 0.0);
                for (c, b) in buf.iter().enumerate() {
                    acc += u[(r, c)] * b;
                }
                v[outer + r * stride + inner] = acc;
            }
        }
    }
}

fn apply_one_site(v: &mut DVector<C64>, n: usize, sites: usize, s: usize, op: &DMatrix<C64>) {
    let stride = n.pow((sites - 1 - s) as u32);
    let block = n * stride;
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for outer in (0..v.len()).step_by(block) {
        for inner in 0..stride {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = v[outer + k * stride + inner];
            }
            for r in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for (c, b) in buf.iter().enumerate() {
                    acc += op[(r, c)] * b;
                }
                v[outer + r * stride + inner] = acc;
            }
        }
    }
}

/// `I ⊗ op ⊗ I` with `op` covering `width` consecutive sites from `s`.
fn embed(op: &DMatrix<C64>, n: usize, sites: usize, s: usize, width: usize) -> DMatrix<C64> {
    let left = DMatrix::<C64>::identity(n.pow(s as u32), n.pow(s as u32));
    let rdim = n.pow((sites - s - width) as u32);
    let right = DMatrix::<C64>::identity(rdim, rdim);
    left.kronecker(op).kronecker(&right)
}

fn measure_site(rho: &mut DMatrix<C64>, n: usize, sites: usize, s: usize, draws: &mut Draws) -> Result<usize> {
    let dim = rho.nrows();
    let mut weights = vec![0.0; n];
    for idx in 0..dim {
        weights[digit(idx, n, sites, s)] += rho[(idx, idx)].re.max(0.0);
    }
    let j = born_sample(draws, &weights)?;
    for r in 0..dim {
        for c in 0..dim {
            if digit(r, n, sites, s) != j || digit(c, n, sites, s) != j {
                rho[(r, c)] = C64::new(0.0, 0.0);
            }
        }
    }
    let tr = rho.trace();
    *rho /= tr;
    Ok(j)
}

fn trace_out_odd(rho: &DMatrix<C64>, n: usize, sites: usize) -> DMatrix<C64> {
    let half = sites / 2;
    let dim = n.pow(half as u32);
    let mut out = DMatrix::zeros(dim, dim);
    let split = |idx: usize| -> (usize, usize) {
        let (mut kept, mut gone) = (0usize, 0usize);
        for s in 0..sites {
            let x = digit(idx, n, sites, s);
            if s % 2 == 0 {
                kept = kept * n + x;
            } else {
                gone = gone * n + x;
            }
        }
        (kept, gone)
    };
    let parts: Vec<(usize, usize)> = (0..rho.nrows()).map(split).collect();
    for r in 0..rho.nrows() {
        for c in 0..rho.ncols() {
            if parts[r].1 == parts[c].1 {
                out[(parts[r].0, parts[c].0)] += rho[(r, c)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    #[test]
    fn recursion_matches_monolithic_small() {
        let s = RandomStream::new(77);
        for (d, depth, kind) in [(1, 2, StateKind::Mixed), (2, 2, StateKind::Pure), (1, 3, StateKind::Pure)] {
            for t in 0..5 {
                let leaf = match kind {
                    StateKind::Mixed => SiteState::maximally_mixed(d).unwrap(),
                    StateKind::Pure => SiteState::charge_superposition(d).unwrap(),
                };
                let leaves = vec![leaf; 1 << depth];
                let (rec, top, prob) = sample_recursive(leaves, 0.3, &mut s.at(d as u64, t)).unwrap();
                let (rho, mono_prob) = monolithic_conditional(&rec).unwrap();
                assert!((top.density_matrix() - rho).camax() < 1e-9);
                assert!((prob - mono_prob).abs() < 1e-9 * prob.max(1e-300));
            }
        }
    }

    #[test]
    fn trace_out_roundtrip() {
        let a = SiteState::maximally_mixed(1).unwrap().density_matrix();
        let b = SiteState::basis(1, 1, StateKind::Mixed).unwrap().density_matrix();
        let t = trace_out_odd(&a.kronecker(&b), 2, 2);
        assert!((t - a).camax() < 1e-15);
    }
}
