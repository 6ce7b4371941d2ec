//! Forward statevector simulation of the expansion circuit, used as an
//! independent check on the coefficient recursion.
//!
//! Qubits 0 and 1 are references, Bell-paired with the system pair 2, 3.
//! Each node on a pair `(x, y)` brings a fresh singlet `(s1, s2)`, applies
//! `U(θ1)` on `(x, s1)` and `U(θ2)` on `(y, s2)`, then projects the inner
//! pair `(s1, s2)` and the outer pair `(x, y)`. Its children act on
//! `(x, s1)` and `(y, s2)`. The final system is traced out.

use num_complex::Complex64 as C64;

use super::table::{pattern_weight, Outcome, SigmaTau, Slot};
use crate::error::{Error, Result};

type Op = [[C64; 4]; 4];

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn singlet() -> [C64; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [zero(), C64::new(h, 0.0), C64::new(-h, 0.0), zero()]
}

fn singlet_projector() -> Op {
    let s = singlet();
    let mut m = [[zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = s[i] * s[j].conj();
        }
    }
    m
}

fn projector(slot: Slot) -> Option<Op> {
    let ps = singlet_projector();
    match slot {
        Slot::Absent => None,
        Slot::Singlet => Some(ps),
        Slot::Triplet => {
            let mut m = ps;
            for (i, row) in m.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { C64::new(1.0, 0.0) } else { zero() } - *v;
                }
            }
            Some(m)
        }
    }
}

/// `e^{−iθ} P_s + e^{iθ} P_t`.
fn gate(theta: f64) -> Op {
    let ps = singlet_projector();
    let (em, ep) = (C64::from_polar(1.0, -theta), C64::from_polar(1.0, theta));
    let mut m = [[zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let id = if i == j { C64::new(1.0, 0.0) } else { zero() };
            m[i][j] = em * ps[i][j] + ep * (id - ps[i][j]);
        }
    }
    m
}

/// Applies a two-qubit operator; the local index is `2·bit(q1) + bit(q2)`.
fn apply(state: &mut [C64], q1: usize, q2: usize, op: &Op) {
    let (m1, m2) = (1usize << q1, 1usize << q2);
    for base in 0..state.len() {
        if base & (m1 | m2) != 0 {
            continue;
        }
        let idx = [base, base | m2, base | m1, base | m1 | m2];
        let v = idx.map(|i| state[i]);
        for (r, &i) in idx.iter().enumerate() {
            state[i] = (0..4).map(|c| op[r][c] * v[c]).sum();
        }
    }
}

struct Node {
    x: usize,
    y: usize,
    s1: usize,
    s2: usize,
}

/// Nodes in preorder and the number of qubits used.
fn layout(k: usize) -> (Vec<Node>, usize) {
    fn build(x: usize, y: usize, depth: usize, next: &mut usize, out: &mut Vec<Node>) {
        if depth == 0 {
            return;
        }
        let (s1, s2) = (*next, *next + 1);
        *next += 2;
        out.push(Node { x, y, s1, s2 });
        build(x, s1, depth - 1, next, out);
        build(y, s2, depth - 1, next, out);
    }
    let mut nodes = Vec::new();
    let mut next = 4;
    build(2, 3, k, &mut next, &mut nodes);
    (nodes, next)
}

fn initial_state(n: usize, nodes: &[Node]) -> Vec<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut state = vec![zero(); 1 << n];
    // Bell pairs (0, 2) and (1, 3), fresh singlets on every node's ancillas.
    let s = singlet();
    'outer: for (idx, amp) in state.iter_mut().enumerate() {
        let bit = |q: usize| (idx >> q) & 1;
        if bit(0) != bit(2) || bit(1) != bit(3) {
            continue;
        }
        let mut a = C64::new(h * h, 0.0);
        for node in nodes {
            let local = 2 * bit(node.s1) + bit(node.s2);
            if s[local] == zero() {
                continue 'outer;
            }
            a *= s[local];
        }
        *amp = a;
    }
    state
}

/// `(σ, τ)` of the reference pair for every outcome record of depth `k ≤ 2`,
/// in the same preorder and order as the recursive enumeration.
pub fn statevector_trajectories(theta1: f64, theta2: f64, p: f64, k: usize) -> Result<Vec<(Vec<Outcome>, SigmaTau)>> {
    if k == 0 || k > 2 {
        return Err(Error::InvalidArgument(format!("statevector check supports depths 1 and 2, got {k}")));
    }
    let (nodes, n) = layout(k);
    let start = initial_state(n, &nodes);
    let (g1, g2) = (gate(theta1), gate(theta2));
    let outcomes: Vec<Outcome> =
        Outcome::ALL.iter().copied().filter(|o| pattern_weight(p, o.measured()) > 0.0).collect();
    let total = outcomes.len().pow(nodes.len() as u32);
    let ps = singlet_projector();
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        // Most significant digit is the first node in preorder.
        let mut rec = vec![outcomes[0]; nodes.len()];
        let mut rest = code;
        for slot in rec.iter_mut().rev() {
            *slot = outcomes[rest % outcomes.len()];
            rest /= outcomes.len();
        }
        let mut state = start.clone();
        let mut prob = 1.0;
        for (node, o) in nodes.iter().zip(&rec) {
            apply(&mut state, node.x, node.s1, &g1);
            apply(&mut state, node.y, node.s2, &g2);
            if let Some(m) = projector(o.inner) {
                apply(&mut state, node.s1, node.s2, &m);
            }
            if let Some(m) = projector(o.outer) {
                apply(&mut state, node.x, node.y, &m);
            }
            prob *= pattern_weight(p, o.measured()) / 4.0;
        }
        // Reduced state of the references, contracted with the singlet.
        let mut rho = [[zero(); 4]; 4];
        for rest in 0..(1usize << (n - 2)) {
            let amps: [C64; 4] = std::array::from_fn(|r| state[(rest << 2) | ((r & 1) << 1) | (r >> 1)]);
            for i in 0..4 {
                for j in 0..4 {
                    rho[i][j] += amps[i] * amps[j].conj();
                }
            }
        }
        let mut sigma = zero();
        let mut trace = zero();
        for i in 0..4 {
            trace += rho[i][i];
            for j in 0..4 {
                sigma += ps[j][i] * rho[i][j];
            }
        }
        let sigma = sigma.re * prob;
        let trace = trace.re * prob;
        out.push((rec, SigmaTau { sigma, tau: trace - sigma }));
    }
    Ok(out)
}
