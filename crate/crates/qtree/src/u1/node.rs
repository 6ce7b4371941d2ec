//! One collapse node: gate, measure-and-discard site 2, optionally measure
//! the retained site.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::gate::BlockUnitary;
use super::state::{SiteState, StateKind};
use crate::error::{Error, Result};
use crate::rng::{born_sample, Draws};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeOutcome {
    /// Basis index of the discarded site.
    pub sigma_prime: usize,
    pub extra_measured: bool,
    /// Basis index of the retained site when `extra_measured`.
    pub sigma: Option<usize>,
}

/// The two-site state after the gate, as weighted pure components.
pub struct NodeBranches {
    d: usize,
    kind: StateKind,
    components: Vec<(f64, DVector<C64>)>,
}

impl NodeBranches {
    pub fn new(s1: &SiteState, s2: &SiteState, gate: &BlockUnitary) -> Result<Self> {
        let d = s1.d();
        if s2.d() != d || gate.layout().d() != d {
            return Err(Error::InvalidState("node inputs and gate disagree on d".into()));
        }
        if s1.kind() != s2.kind() {
            return Err(Error::InvalidState("node inputs must share a kind".into()));
        }
        let n = 2 * d;
        let c1 = s1.components();
        let c2 = s2.components();
        let mut components = Vec::with_capacity(c1.len() * c2.len());
        let mut prod = vec![C64::new(0.0, 0.0); n * n];
        for &(w1, v1) in &c1 {
            for &(w2, v2) in &c2 {
                for i1 in 0..n {
                    for i2 in 0..n {
                        prod[i1 * n + i2] = v1[i1] * v2[i2];
                    }
                }
                components.push((w1 * w2, gate.apply(&prod)));
            }
        }
        Ok(Self { d, kind: s1.kind(), components })
    }

    /// Born weights of the `2d` outcomes of the discarded site.
    pub fn discard_weights(&self) -> Vec<f64> {
        let n = 2 * self.d;
        let mut w = vec![0.0; n];
        for (weight, phi) in &self.components {
            for i in 0..n {
                for (j, wj) in w.iter_mut().enumerate() {
                    *wj += weight * phi[i * n + j].norm_sqr();
                }
            }
        }
        w
    }

    /// Normalized retained-site state given discarded outcome `j`, and the
    /// outcome's probability.
    pub fn condition(&self, j: usize) -> Result<(SiteState, f64)> {
        let n = 2 * self.d;
        if j >= n {
            return Err(Error::InvalidArgument(format!("outcome {j} out of range")));
        }
        let prob = self.discard_weights()[j];
        if !(prob > 0.0) {
            return Err(Error::Internal(format!("zero-probability outcome {j} selected")));
        }
        let state = match self.kind {
            StateKind::Pure => {
                let phi = &self.components[0].1;
                let scale = C64::new(1.0 / prob.sqrt(), 0.0);
                let v = DVector::from_fn(n, |i, _| phi[i * n + j] * scale);
                SiteState::pure_unchecked(self.d, v)
            }
            StateKind::Mixed => {
                let mut rho = DMatrix::zeros(n, n);
                for (weight, phi) in &self.components {
                    let w = weight / prob;
                    for a in 0..n {
                        let x = phi[a * n + j];
                        if x == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for b in 0..n {
                            rho[(a, b)] += x * phi[b * n + j].conj() * w;
                        }
                    }
                }
                SiteState::mixed_unchecked(self.d, rho)
            }
        };
        Ok((state, prob))
    }
}

/// Projects a site onto basis state `sigma`, keeping its kind.
pub fn collapse_to(state: &SiteState, sigma: usize) -> Result<(SiteState, f64)> {
    let pops = state.populations();
    let prob = *pops.get(sigma).ok_or_else(|| Error::InvalidArgument(format!("outcome {sigma} out of range")))?;
    if !(prob > 0.0) {
        return Err(Error::Internal(format!("zero-probability outcome {sigma} selected")));
    }
    Ok((SiteState::basis(state.d(), sigma, state.kind())?, prob / pops.iter().sum::<f64>()))
}

/// Random node: Born-samples the discarded site, then with probability `p`
/// Born-measures the retained site.
pub fn node_collapse(
    s1: &SiteState,
    s2: &SiteState,
    gate: &BlockUnitary,
    p: f64,
    draws: &mut Draws,
) -> Result<(SiteState, NodeOutcome)> {
    let branches = NodeBranches::new(s1, s2, gate)?;
    let sigma_prime = born_sample(draws, &branches.discard_weights())?;
    let (state, _) = branches.condition(sigma_prime)?;
    if draws.bernoulli(p) {
        let sigma = born_sample(draws, &state.populations())?;
        let (state, _) = collapse_to(&state, sigma)?;
        Ok((state, NodeOutcome { sigma_prime, extra_measured: true, sigma: Some(sigma) }))
    } else {
        Ok((state, NodeOutcome { sigma_prime, extra_measured: false, sigma: None }))
    }
}

/// `d = 1` node on diagonal inputs, given as charge weights. Mixed qubit
/// states stay diagonal under charge-conserving gates, so only the moduli
/// of the charge-1 block enter. Consumes the same draws as [`node_collapse`].
pub fn diagonal_node(a: [f64; 2], b: [f64; 2], gate: &BlockUnitary, p: f64, draws: &mut Draws) -> Result<([f64; 2], NodeOutcome)> {
    if gate.layout().d() != 1 {
        return Err(Error::InvalidArgument("diagonal node needs d = 1".into()));
    }
    let u = gate.block(1);
    // Sector-1 basis is {|01⟩, |10⟩}.
    let (w01_in, w10_in) = (a[0] * b[1], a[1] * b[0]);
    let w01 = u[(0, 0)].norm_sqr() * w01_in + u[(0, 1)].norm_sqr() * w10_in;
    let w10 = u[(1, 0)].norm_sqr() * w01_in + u[(1, 1)].norm_sqr() * w10_in;
    let (w00, w11) = (a[0] * b[0], a[1] * b[1]);
    let sigma_prime = born_sample(draws, &[w00 + w10, w01 + w11])?;
    let kept = if sigma_prime == 0 { [w00, w10] } else { [w01, w11] };
    let total = kept[0] + kept[1];
    let state = [kept[0] / total, kept[1] / total];
    if draws.bernoulli(p) {
        let sigma = born_sample(draws, &state)?;
        let mut sharp = [0.0; 2];
        sharp[sigma] = 1.0;
        Ok((sharp, NodeOutcome { sigma_prime, extra_measured: true, sigma: Some(sigma) }))
    } else {
        Ok((state, NodeOutcome { sigma_prime, extra_measured: false, sigma: None }))
    }
}

/// Deterministic node with prescribed outcomes. Returns the output state and
/// the Born probability of the outcomes, excluding the `p` / `1 − p` factor.
pub fn node_conditional(
    s1: &SiteState,
    s2: &SiteState,
    gate: &BlockUnitary,
    outcome: &NodeOutcome,
) -> Result<(SiteState, f64)> {
    let (state, p1) = NodeBranches::new(s1, s2, gate)?.condition(outcome.sigma_prime)?;
    match (outcome.extra_measured, outcome.sigma) {
        (true, Some(sigma)) => {
            let (state, p2) = collapse_to(&state, sigma)?;
            Ok((state, p1 * p2))
        }
        (false, _) => Ok((state, p1)),
        (true, None) => Err(Error::InvalidArgument("extra measurement without an outcome".into())),
    }
}
