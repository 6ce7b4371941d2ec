//! Node coefficients of the SU(2) expansion tree.
//!
//! A node maps the operators `X' ⊗ X''` of its two subtrees back to its
//! input pair: `t† (P_i ⊗ P_j) t = α P_s + β P_t`. With subtree states
//! `σ P_s + (τ/3) P_t` this gives a bilinear map on `(σ, τ)`.

use crate::error::{Error, Result};

/// Singlet and triplet weights of a reference-pair state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaTau {
    pub sigma: f64,
    pub tau: f64,
}

impl SigmaTau {
    pub const BASE: SigmaTau = SigmaTau { sigma: 0.25, tau: 0.75 };

    pub fn new(sigma: f64, tau: f64) -> Result<Self> {
        if !(sigma >= 0.0 && tau >= 0.0 && (sigma + tau).is_finite()) {
            return Err(Error::InvalidState(format!("(σ, τ) = ({sigma}, {tau}) must be non-negative")));
        }
        Ok(Self { sigma, tau })
    }

    pub fn weight(&self) -> f64 {
        self.sigma + self.tau
    }

    /// `(σ² + τ²)/(σ + τ)²`.
    pub fn sharpness(&self) -> f64 {
        let w = self.weight();
        (self.sigma * self.sigma + self.tau * self.tau) / (w * w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Absent,
    Singlet,
    Triplet,
}

impl Slot {
    fn symbol(self) -> char {
        match self {
            Slot::Absent => 'I',
            Slot::Singlet => 's',
            Slot::Triplet => 't',
        }
    }
}

/// Measurement record of one node: the inner pair, then the outer pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome {
    pub inner: Slot,
    pub outer: Slot,
}

impl Outcome {
    /// The nine configurations in table order.
    pub const ALL: [Outcome; 9] = {
        use Slot::*;
        [
            Outcome { inner: Absent, outer: Absent },
            Outcome { inner: Singlet, outer: Absent },
            Outcome { inner: Triplet, outer: Absent },
            Outcome { inner: Absent, outer: Singlet },
            Outcome { inner: Absent, outer: Triplet },
            Outcome { inner: Singlet, outer: Singlet },
            Outcome { inner: Singlet, outer: Triplet },
            Outcome { inner: Triplet, outer: Singlet },
            Outcome { inner: Triplet, outer: Triplet },
        ]
    };

    /// Number of measurements that happened.
    pub fn measured(&self) -> i32 {
        i32::from(self.inner != Slot::Absent) + i32::from(self.outer != Slot::Absent)
    }

    pub fn index(&self) -> usize {
        Outcome::ALL.iter().position(|o| o == self).unwrap_or(0)
    }

    pub fn label(&self) -> String {
        format!("({},{})", self.inner.symbol(), self.outer.symbol())
    }
}

/// `t†(P_i ⊗ P_j)t = alpha P_s + beta P_t` for the inputs `ss, st, ts, tt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub alpha: [f64; 4],
    pub beta: [f64; 4],
}

/// Coefficients of the `(σ, τ)` map for one outcome:
/// `σ = s_ss σ'σ'' + s_tt τ'τ''` and
/// `τ = t_st σ'τ'' + t_ts τ'σ'' + t_tt τ'τ''`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Coefficients {
    pub s_ss: f64,
    pub s_tt: f64,
    pub t_st: f64,
    pub t_ts: f64,
    pub t_tt: f64,
}

impl Coefficients {
    pub fn is_zero(&self) -> bool {
        self.s_ss == 0.0 && self.s_tt == 0.0 && self.t_st == 0.0 && self.t_ts == 0.0 && self.t_tt == 0.0
    }

    pub fn entries(&self) -> [f64; 5] {
        [self.s_ss, self.s_tt, self.t_st, self.t_ts, self.t_tt]
    }
}

/// Node map for every outcome at fixed `(θ1, θ2, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeCoefficients {
    pub theta1: f64,
    pub theta2: f64,
    pub p: f64,
    pub projections: [Projection; 9],
    /// Includes the weight `4 (1−p)^{2−δ} p^δ` of the measurement pattern.
    pub rows: [Coefficients; 9],
}

impl NodeCoefficients {
    pub fn row(&self, o: Outcome) -> &Coefficients {
        &self.rows[o.index()]
    }

    /// Outcomes whose coefficients are not all zero.
    pub fn live(&self) -> impl Iterator<Item = (Outcome, &Coefficients)> + '_ {
        Outcome::ALL.iter().copied().zip(self.rows.iter()).filter(|(_, c)| !c.is_zero())
    }
}

/// `4 (1−p)^{2−δ} p^δ`.
pub fn pattern_weight(p: f64, measured: i32) -> f64 {
    4.0 * (1.0 - p).powi(2 - measured) * p.powi(measured)
}

/// The projections `t†(P_i ⊗ P_j)t` in closed form.
pub fn projections(theta1: f64, theta2: f64) -> [Projection; 9] {
    let c1 = (2.0 * theta1).cos();
    let c2 = (2.0 * theta2).cos();
    let cp = (2.0 * theta1 + 2.0 * theta2).cos();
    let cm = (2.0 * theta1 - 2.0 * theta2).cos();
    let x = 3.0 / 32.0 + c1 / 16.0 + c2 / 16.0 + cm / 32.0;
    let y = 3.0 / 32.0 - c1 / 16.0 - c2 / 16.0 + cm / 32.0;
    let s_any = (5.0 + 3.0 * cp) / 32.0;
    let s_tt = 15.0 / 32.0 + 9.0 * cp / 32.0;
    let t_s = 9.0 / 32.0 * (1.0 - cp);
    let t_tt = 3.0 / 32.0 * (1.0 - cp);
    let row = |alpha: [f64; 4], beta: [f64; 4]| Projection { alpha, beta };
    [
        row([0.25, 0.0, 0.0, 0.75], [0.0, 0.25, 0.25, 0.5]),
        row([s_any, 0.0, 0.0, s_tt], [0.0, x, x, 2.0 * x]),
        row(
            [t_s, 0.0, 0.0, t_tt],
            [
                0.0,
                7.0 / 32.0 - 3.0 * c1 / 16.0 + c2 / 16.0 - 3.0 * cm / 32.0,
                7.0 / 32.0 - 3.0 * c2 / 16.0 + c1 / 16.0 - 3.0 * cm / 32.0,
                3.0 / 16.0 - c1 / 8.0 - c2 / 8.0 + cm / 16.0,
            ],
        ),
        row([s_any, 0.0, 0.0, s_tt], [0.0, y, y, 2.0 * y]),
        row(
            [t_s, 0.0, 0.0, t_tt],
            [
                0.0,
                7.0 / 32.0 + 3.0 * c1 / 16.0 - c2 / 16.0 - 3.0 * cm / 32.0,
                7.0 / 32.0 + 3.0 * c2 / 16.0 - c1 / 16.0 - 3.0 * cm / 32.0,
                3.0 / 16.0 + c1 / 8.0 + c2 / 8.0 + cm / 16.0,
            ],
        ),
        row([s_any, 0.0, 0.0, s_tt], [0.0; 4]),
        row([0.0; 4], [0.0, x, x, 2.0 * x]),
        row([0.0; 4], [0.0, y, y, 2.0 * y]),
        row([t_s, 0.0, 0.0, t_tt], [0.0, (1.0 - cm) / 8.0, (1.0 - cm) / 8.0, 0.0]),
    ]
}

pub fn node_table(theta1: f64, theta2: f64, p: f64) -> Result<NodeCoefficients> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    if !(theta1.is_finite() && theta2.is_finite()) {
        return Err(Error::InvalidArgument("gate angles must be finite".into()));
    }
    let projections = projections(theta1, theta2);
    let mut rows = bare_rows(&projections);
    for (row, o) in rows.iter_mut().zip(Outcome::ALL) {
        let w = pattern_weight(p, o.measured());
        for v in [&mut row.s_ss, &mut row.s_tt, &mut row.t_st, &mut row.t_ts, &mut row.t_tt] {
            *v *= w;
        }
    }
    Ok(NodeCoefficients { theta1, theta2, p, projections, rows })
}

/// Coefficients without the measurement-pattern weight.
pub fn bare_rows(projections: &[Projection; 9]) -> [Coefficients; 9] {
    // Rounding can leave entries a few ulps below zero.
    let c = |v: f64| v.max(0.0);
    projections.map(|pr| Coefficients {
        s_ss: c(pr.alpha[0]),
        s_tt: c(pr.alpha[3] / 9.0),
        t_st: c(pr.beta[1]),
        t_ts: c(pr.beta[2]),
        t_tt: c(pr.beta[3] / 3.0),
    })
}

/// The bilinear node map; `a` comes from the subtree on the first output pair.
pub fn node_apply(a: SigmaTau, b: SigmaTau, c: &Coefficients) -> SigmaTau {
    SigmaTau {
        sigma: c.s_ss * a.sigma * b.sigma + c.s_tt * a.tau * b.tau,
        tau: c.t_st * a.sigma * b.tau + c.t_ts * a.tau * b.sigma + c.t_tt * a.tau * b.tau,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn listed_entries() {
        let t = node_table(0.4, 1.1, 0.3).unwrap();
        let none = Outcome { inner: Slot::Absent, outer: Slot::Absent };
        let pr = &t.projections[none.index()];
        assert_eq!((pr.alpha[0], pr.beta[0]), (0.25, 0.0));
        assert_eq!((pr.alpha[3], pr.beta[3]), (0.75, 0.5));
        let tt = Outcome { inner: Slot::Triplet, outer: Slot::Triplet };
        let cp = (2.0 * 0.4 + 2.0 * 1.1f64).cos();
        assert!((t.projections[tt.index()].alpha[3] - 3.0 / 32.0 * (1.0 - cp)).abs() < 1e-15);
        let t = node_table(PI / 2.0, PI / 2.0, 1.0).unwrap();
        assert_eq!(t.projections[tt.index()].alpha[0], 0.0);
        assert_eq!(t.row(tt).s_tt, 0.0);
    }

    #[test]
    fn sharp_outcome_rows() {
        let t = node_table(0.8, 2.3, 0.5).unwrap();
        for o in Outcome::ALL {
            let c = t.row(o);
            match (o.inner, o.outer) {
                (Slot::Singlet, Slot::Triplet) | (Slot::Triplet, Slot::Singlet) => {
                    assert_eq!((c.s_ss, c.s_tt), (0.0, 0.0));
                }
                (Slot::Singlet, Slot::Singlet) => assert_eq!((c.t_st, c.t_ts, c.t_tt), (0.0, 0.0, 0.0)),
                _ => {}
            }
        }
    }

    #[test]
    fn coefficients_non_negative_on_grid() {
        for i in 0..=40 {
            for j in 0..=40 {
                let (a, b) = (PI * i as f64 / 40.0, PI * j as f64 / 40.0);
                for pr in projections(a, b) {
                    assert!(pr.alpha.iter().chain(&pr.beta).all(|&v| v >= -1e-12));
                }
            }
        }
    }

    #[test]
    fn outcome_traces_sum_to_four() {
        // For each measurement pattern, Σ over outcomes and inputs of
        // tr t†(P_i ⊗ P_j)t = tr t†t = 4.
        for &(a, b) in &[(0.3, 1.7), (1.2, 0.1), (2.5, 2.9)] {
            let pr = projections(a, b);
            for delta in 0..=2 {
                let mut by_pattern = std::collections::BTreeMap::new();
                for (o, p) in Outcome::ALL.iter().zip(&pr).filter(|(o, _)| o.measured() == delta) {
                    let key = (o.inner == Slot::Absent, o.outer == Slot::Absent);
                    let tr: f64 = (0..4).map(|c| p.alpha[c] + 3.0 * p.beta[c]).sum();
                    *by_pattern.entry(key).or_insert(0.0) += tr;
                }
                for tr in by_pattern.values() {
                    assert!((tr - 4.0).abs() < 1e-13, "{tr}");
                }
            }
        }
    }

    fn swapped(c: &Coefficients) -> Coefficients {
        Coefficients { t_st: c.t_ts, t_ts: c.t_st, ..*c }
    }

    #[test]
    fn symmetries() {
        for &(a, b) in &[(0.3, 1.7), (1.2, 0.1), (2.5, 2.9)] {
            let t = node_table(a, b, 0.6).unwrap();
            let close = |x: &NodeCoefficients, f: &dyn Fn(&Coefficients) -> Coefficients| {
                x.rows.iter().zip(&t.rows).all(|(u, v)| {
                    f(u).entries().iter().zip(v.entries()).all(|(p, q)| (p - q).abs() < 1e-14)
                })
            };
            assert!(close(&node_table(b, a, 0.6).unwrap(), &swapped));
            assert!(close(&node_table(PI - b, PI - a, 0.6).unwrap(), &swapped));
            assert!(close(&node_table(a + PI, b - PI, 0.6).unwrap(), &|c| *c));
        }
    }

    #[test]
    fn no_sharp_phase_below_one() {
        let tt_in = SigmaTau { sigma: 0.0, tau: 1.0 };
        for i in 1..20 {
            for j in 1..20 {
                let (a, b) = (PI * i as f64 / 20.0 + 0.01, PI * j as f64 / 20.0 + 0.02);
                let t = node_table(a, b, 0.5).unwrap();
                let none = t.row(Outcome { inner: Slot::Absent, outer: Slot::Absent });
                assert!(none.s_tt > 0.0 && none.t_tt > 0.0);
                let out = node_apply(tt_in, tt_in, none);
                assert!(out.sigma * out.tau > 0.0);
            }
        }
    }

    #[test]
    fn node_apply_examples() {
        let t = node_table(0.9, 0.2, 0.0).unwrap();
        let s = SigmaTau { sigma: 1.0, tau: 0.0 };
        let none = t.row(Outcome { inner: Slot::Absent, outer: Slot::Absent });
        assert_eq!(node_apply(s, s, none), SigmaTau { sigma: 1.0, tau: 0.0 });
        let a = SigmaTau { sigma: 0.3, tau: 0.4 };
        let b = SigmaTau { sigma: 0.1, tau: 0.7 };
        let one = node_apply(a, b, none);
        let two = node_apply(SigmaTau { sigma: 0.6, tau: 0.8 }, b, none);
        assert!((two.sigma - 2.0 * one.sigma).abs() < 1e-15 && (two.tau - 2.0 * one.tau).abs() < 1e-15);
        let t = node_table(PI / 2.0, PI / 2.0, 1.0).unwrap();
        let trip = SigmaTau { sigma: 0.0, tau: 1.0 };
        let tt = t.row(Outcome { inner: Slot::Triplet, outer: Slot::Triplet });
        assert_eq!(node_apply(trip, trip, tt).sigma, 0.0);
        assert!(node_table(0.1, 0.2, 1.5).is_err());
    }

    #[test]
    fn sharpness_bounds() {
        assert_eq!(SigmaTau { sigma: 0.2, tau: 0.2 }.sharpness(), 0.5);
        assert_eq!(SigmaTau { sigma: 0.0, tau: 0.2 }.sharpness(), 1.0);
        assert!(SigmaTau::new(-1.0, 0.0).is_err());
    }
}
