//! Fast invariant suite. Every check holds for any seed; the seed only
//! picks the random configurations.

use std::f64::consts::PI;

use qtree::par::Execution;
use qtree::rng::RandomStream;
use qtree::su2::{enumerate_trajectories, node_table, statevector_trajectories, step, NodeCoefficients, TrajectoryEnsemble, DEFAULT_BUDGET};
use qtree::u1::reference::{monolithic_conditional, sample_recursive};
use qtree::u1::SiteState;
use qtree::wavefront::{find_critical_p, minimize_lambda, su2_contour, Family, VelocityCurve};

/// Deliberate damage used to prove that the suite catches broken tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Scales the singlet-to-singlet coefficient of every outcome by 1.05.
    CorruptTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const CONSERVATION: &str = "singlet-weight conservation";

fn table(theta1: f64, theta2: f64, p: f64, fault: Fault) -> qtree::Result<NodeCoefficients> {
    let mut t = node_table(theta1, theta2, p)?;
    if fault == Fault::CorruptTable {
        for row in &mut t.rows {
            row.s_ss *= 1.05;
        }
    }
    Ok(t)
}

/// Born-weighted `Σσ = ¼` and `Στ = ¾` at every depth.
fn conservation(seed: u64, fault: Fault) -> Check {
    let stream = RandomStream::new(seed).fork(1);
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for i in 0..12 {
        let mut dr = stream.at(0, i);
        let (t1, t2) = (PI * dr.uniform(), PI * dr.uniform());
        let p = if i % 3 == 0 { 1.0 } else { dr.uniform() };
        let k = if p == 1.0 { 4 } else { 3 };
        let result = table(t1, t2, p, fault).and_then(|tab| {
            let mut e = TrajectoryEnsemble::base();
            let mut dev = 0.0f64;
            for _ in 0..k {
                e = step(&e, &tab, DEFAULT_BUDGET, Execution::Parallel)?;
                dev = dev.max((e.singlet_total() - 0.25).abs()).max((e.triplet_total() - 0.75).abs());
            }
            Ok(dev)
        });
        match result {
            Ok(dev) if dev > worst || dev.is_nan() => {
                worst = if dev.is_nan() { f64::INFINITY } else { dev };
                worst_at = format!("θ1 = {t1:.4}, θ2 = {t2:.4}, p = {p:.4}, k ≤ {k}");
            }
            Ok(_) => {}
            Err(e) => return Check { name: CONSERVATION, passed: false, detail: e.to_string() },
        }
    }
    Check {
        name: CONSERVATION,
        passed: worst <= 1e-9,
        detail: format!("max |Σσ − 1/4|, |Στ − 3/4| = {worst:.3e} at {worst_at}"),
    }
}

fn su2_oracle(seed: u64, fault: Fault) -> Check {
    let name = "su2 statevector agreement (k ≤ 2)";
    let stream = RandomStream::new(seed).fork(2);
    let mut worst = 0.0f64;
    for (i, p) in [1.0, 0.5].into_iter().enumerate() {
        let mut dr = stream.at(0, i as u64);
        let (t1, t2) = (PI * dr.uniform(), PI * dr.uniform());
        let tab = match table(t1, t2, p, fault) {
            Ok(t) => t,
            Err(e) => return Check { name, passed: false, detail: e.to_string() },
        };
        for k in 1..=2 {
            let rec = enumerate_trajectories(&tab, k);
            let sv = match statevector_trajectories(t1, t2, p, k) {
                Ok(s) => s,
                Err(e) => return Check { name, passed: false, detail: e.to_string() },
            };
            if rec.len() != sv.len() {
                return Check { name, passed: false, detail: format!("{} vs {} trajectories", rec.len(), sv.len()) };
            }
            for (r, (o, st)) in rec.iter().zip(&sv) {
                if &r.outcomes != o {
                    return Check { name, passed: false, detail: "outcome records differ".into() };
                }
                worst = worst.max((r.weights.sigma - st.sigma).abs()).max((r.weights.tau - st.tau).abs());
            }
        }
    }
    Check { name, passed: worst <= 1e-9, detail: format!("max |Δσ|, |Δτ| = {worst:.3e}") }
}

fn u1_oracle(seed: u64) -> Check {
    let name = "u1 full-Hilbert-space agreement (k ≤ 2, d ≤ 2)";
    let stream = RandomStream::new(seed).fork(3);
    let mut worst = 0.0f64;
    for d in 1..=2usize {
        for depth in 1..=2usize {
            for (t, mixed) in [true, false].into_iter().enumerate() {
                let leaf = if mixed { SiteState::maximally_mixed(d) } else { SiteState::charge_superposition(d) };
                let mut dr = stream.at((d * 10 + depth) as u64, t as u64);
                let run = leaf.and_then(|leaf| {
                    let (rec, top, prob) = sample_recursive(vec![leaf; 1 << depth], 0.3, &mut dr)?;
                    let (rho, mono) = monolithic_conditional(&rec)?;
                    Ok(((top.density_matrix() - rho).camax()).max((prob - mono).abs() / prob.max(1e-300)))
                });
                match run {
                    Ok(dev) => worst = worst.max(dev),
                    Err(e) => return Check { name, passed: false, detail: e.to_string() },
                }
            }
        }
    }
    Check { name, passed: worst <= 1e-9, detail: format!("max deviation {worst:.3e}") }
}

fn velocity_zeros() -> Check {
    let name = "velocity zeros and λ* = 1/2";
    let run = || -> qtree::Result<(f64, f64)> {
        let pc = find_critical_p(Family::U1D1)?;
        let ps = find_critical_p(Family::U1Dinf)?;
        let mut dev = (pc - 0.25).abs().max((ps - (1.0 - 2f64.sqrt() / 2.0)).abs());
        let t1 = 1.2;
        let t2 = su2_contour(&[t1])
            .first()
            .map(|x| x.1)
            .ok_or_else(|| qtree::Error::Internal("no contour point at θ1 = 1.2".into()))?;
        let mut lam = 0.0f64;
        for curve in [VelocityCurve::U1D1 { p: pc }, VelocityCurve::U1Dinf { p: ps }, VelocityCurve::Su2P1 { theta1: t1, theta2: t2 }] {
            let m = minimize_lambda(&curve)?;
            lam = lam.max((m.lambda_star - 0.5).abs());
            dev = dev.max(m.v_min.abs());
        }
        Ok((dev, lam))
    };
    match run() {
        Ok((dev, lam)) => Check {
            name,
            passed: dev <= 1e-8 && lam <= 1e-8,
            detail: format!("critical-point/velocity error {dev:.3e}, |λ* − 1/2| ≤ {lam:.3e}"),
        },
        Err(e) => Check { name, passed: false, detail: e.to_string() },
    }
}

pub fn run(seed: u64, fault: Fault) -> Vec<Check> {
    vec![conservation(seed, fault), su2_oracle(seed, fault), u1_oracle(seed), velocity_zeros()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_suite_passes_for_several_seeds() {
        for seed in [1, 2, 12345] {
            for c in run(seed, Fault::None) {
                assert!(c.passed, "seed {seed}: {} failed: {}", c.name, c.detail);
            }
        }
    }

    #[test]
    fn corrupted_table_fails_conservation() {
        let checks = run(1, Fault::CorruptTable);
        let c = checks.iter().find(|c| c.name == CONSERVATION).unwrap();
        assert!(!c.passed, "{}", c.detail);
    }
}
