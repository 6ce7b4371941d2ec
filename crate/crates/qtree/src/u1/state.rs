//! Single-site states for a charged qubit ⊗ `d`-level qudit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// `(Z, s)` label of a diagonal qubit state `(1−Z)|s⟩⟨s| + Z|1−s⟩⟨1−s|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitSummary {
    pub z: f64,
    pub s: u8,
}

impl QubitSummary {
    pub fn from_weights(p0: f64, p1: f64) -> Self {
        let t = p0 + p1;
        if p0 >= p1 {
            Self { z: p1 / t, s: 0 }
        } else {
            Self { z: p0 / t, s: 1 }
        }
    }

    pub fn weights(&self) -> [f64; 2] {
        if self.s == 0 {
            [1.0 - self.z, self.z]
        } else {
            [self.z, 1.0 - self.z]
        }
    }
}

/// Both order-parameter readings of a site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    /// One minus the largest eigenvalue.
    pub z_pur: f64,
    /// Smaller of the two charge-sector weights.
    pub z_sharp: f64,
    /// Charge of the heavier sector.
    pub charge: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Mixed,
    Pure,
}

#[derive(Clone, Debug)]
struct Eigenpair {
    value: f64,
    vector: DVector<C64>,
}

#[derive(Clone, Debug)]
enum Repr {
    Mixed { rho: DMatrix<C64>, spectrum: Vec<Eigenpair> },
    Pure(DVector<C64>),
}

#[derive(Clone, Debug)]
pub struct SiteState {
    d: usize,
    repr: Repr,
}

impl SiteState {
    pub fn maximally_mixed(d: usize) -> Result<Self> {
        check_d(d)?;
        let n = 2 * d;
        Self::mixed(d, DMatrix::identity(n, n) / C64::new(n as f64, 0.0))
    }

    /// `(|0⟩ + |1⟩)/√2 ⊗ |0⟩` on the qubit and qudit.
    pub fn charge_superposition(d: usize) -> Result<Self> {
        check_d(d)?;
        let mut v = DVector::zeros(2 * d);
        v[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v[d] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::pure(d, v)
    }

    pub fn basis(d: usize, index: usize, kind: StateKind) -> Result<Self> {
        check_d(d)?;
        if index >= 2 * d {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range for d = {d}")));
        }
        let mut v = DVector::zeros(2 * d);
        v[index] = C64::new(1.0, 0.0);
        match kind {
            StateKind::Pure => Self::pure(d, v),
            StateKind::Mixed => Self::mixed(d, &v * v.adjoint()),
        }
    }

    pub fn pure(d: usize, v: DVector<C64>) -> Result<Self> {
        check_d(d)?;
        if v.len() != 2 * d {
            return Err(Error::InvalidState(format!("vector length {} ≠ 2d = {}", v.len(), 2 * d)));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("vector norm {norm} ≠ 1")));
        }
        Ok(Self { d, repr: Repr::Pure(v) })
    }

    pub fn mixed(d: usize, rho: DMatrix<C64>) -> Result<Self> {
        check_d(d)?;
        let n = 2 * d;
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::InvalidState(format!("density matrix is {}×{}, expected {n}×{n}", rho.nrows(), rho.ncols())));
        }
        let herm = (&rho - rho.adjoint()).camax();
        if herm > 1e-12 {
            return Err(Error::InvalidState(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = rho.trace().re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let spectrum = hermitian_spectrum(&rho, d);
        if let Some(e) = spectrum.iter().find(|e| e.value < -1e-10) {
            return Err(Error::InvalidState(format!("negative eigenvalue {}", e.value)));
        }
        Ok(Self::from_parts(d, rho, spectrum))
    }

    /// Trusted constructor for states produced by the node map.
    pub(crate) fn mixed_unchecked(d: usize, rho: DMatrix<C64>) -> Self {
        let spectrum = hermitian_spectrum(&rho, d);
        Self::from_parts(d, rho, spectrum)
    }

    pub(crate) fn pure_unchecked(d: usize, v: DVector<C64>) -> Self {
        Self { d, repr: Repr::Pure(v) }
    }

    fn from_parts(d: usize, mut rho: DMatrix<C64>, mut spectrum: Vec<Eigenpair>) -> Self {
        for e in &mut spectrum {
            e.value = e.value.max(0.0);
        }
        // Enforce exact Hermiticity of the stored matrix.
        let n = rho.nrows();
        for i in 0..n {
            rho[(i, i)].im = 0.0;
            for j in i + 1..n {
                let avg = (rho[(i, j)] + rho[(j, i)].conj()) * 0.5;
                rho[(i, j)] = avg;
                rho[(j, i)] = avg.conj();
            }
        }
        Self { d, repr: Repr::Mixed { rho, spectrum } }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn site_dim(&self) -> usize {
        2 * self.d
    }

    pub fn kind(&self) -> StateKind {
        match self.repr {
            Repr::Mixed { .. } => StateKind::Mixed,
            Repr::Pure(_) => StateKind::Pure,
        }
    }

    pub fn vector(&self) -> Option<&DVector<C64>> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Mixed { .. } => None,
        }
    }

    pub fn density_matrix(&self) -> DMatrix<C64> {
        match &self.repr {
            Repr::Mixed { rho, .. } => rho.clone(),
            Repr::Pure(v) => v * v.adjoint(),
        }
    }

    /// Weighted pure components whose mixture is the state.
    pub(crate) fn components(&self) -> Vec<(f64, &DVector<C64>)> {
        match &self.repr {
            Repr::Pure(v) => vec![(1.0, v)],
            Repr::Mixed { spectrum, .. } => {
                spectrum.iter().filter(|e| e.value > 0.0).map(|e| (e.value, &e.vector)).collect()
            }
        }
    }

    /// Diagonal of the density matrix in the computational basis.
    pub fn populations(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            Repr::Mixed { rho, .. } => (0..rho.nrows()).map(|i| rho[(i, i)].re.max(0.0)).collect(),
        }
    }

    pub fn summarize(&self) -> Summary {
        let pops = self.populations();
        let (p0, p1): (f64, f64) = (pops[..self.d].iter().sum(), pops[self.d..].iter().sum());
        let z_sharp = p0.min(p1) / (p0 + p1);
        let z_pur = match &self.repr {
            Repr::Pure(_) => 0.0,
            Repr::Mixed { spectrum, .. } => {
                let total: f64 = spectrum.iter().map(|e| e.value).sum();
                let imax = (0..spectrum.len())
                    .max_by(|&a, &b| spectrum[a].value.total_cmp(&spectrum[b].value))
                    .unwrap_or(0);
                let rest: f64 = spectrum.iter().enumerate().filter(|(i, _)| *i != imax).map(|(_, e)| e.value).sum();
                if total > 0.0 {
                    rest / total
                } else {
                    0.0
                }
            }
        };
        Summary { z_pur, z_sharp, charge: u8::from(p1 > p0) }
    }

    /// `(Z, s)` label of a d = 1 state, which must be diagonal.
    pub fn qubit_summary(&self) -> Result<QubitSummary> {
        if self.d != 1 {
            return Err(Error::InvalidArgument("qubit summary needs d = 1".into()));
        }
        let rho = self.density_matrix();
        if rho[(0, 1)].norm() > 1e-12 {
            return Err(Error::InvalidState("qubit state is not diagonal".into()));
        }
        Ok(QubitSummary::from_weights(rho[(0, 0)].re, rho[(1, 1)].re))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.repr {
            Repr::Pure(v) => Self::pure(self.d, v.clone()).map(|_| ()),
            Repr::Mixed { rho, .. } => Self::mixed(self.d, rho.clone()).map(|_| ()),
        }
    }
}

fn check_d(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::InvalidArgument("qudit dimension d must be ≥ 1".into()))
    } else {
        Ok(())
    }
}

/// Eigenpairs of a `2d × 2d` Hermitian matrix. When the two charge blocks are
/// exactly decoupled each block is diagonalized separately, so eigenvectors
/// keep a definite charge.
fn hermitian_spectrum(rho: &DMatrix<C64>, d: usize) -> Vec<Eigenpair> {
    let n = 2 * d;
    let decoupled = (0..d).all(|i| (d..n).all(|j| rho[(i, j)] == ZERO && rho[(j, i)] == ZERO));
    let mut out = Vec::with_capacity(n);
    if decoupled {
        for off in [0, d] {
            for (value, v) in block_spectrum(&rho.view((off, off), (d, d)).into_owned()) {
                let mut full = DVector::zeros(n);
                full.rows_mut(off, d).copy_from(&v);
                out.push(Eigenpair { value, vector: full });
            }
        }
    } else {
        for (value, vector) in block_spectrum(rho) {
            out.push(Eigenpair { value, vector });
        }
    }
    out
}

fn block_spectrum(m: &DMatrix<C64>) -> Vec<(f64, DVector<C64>)> {
    let n = m.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == ZERO));
    if diagonal {
        return (0..n)
            .map(|i| {
                let mut v = DVector::zeros(n);
                v[i] = C64::new(1.0, 0.0);
                (m[(i, i)].re, v)
            })
            .collect();
    }
    if n == 2 {
        return spectrum_2x2(m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)]);
    }
    let eig = m.clone().symmetric_eigen();
    (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())).collect()
}

/// Closed form for `[[a, c], [c̄, b]]`; the small eigenvalue comes from the
/// determinant so it keeps relative precision.
fn spectrum_2x2(a: f64, b: f64, c: C64) -> Vec<(f64, DVector<C64>)> {
    let half = 0.5 * (a - b);
    let rad = (half * half + c.norm_sqr()).sqrt();
    let hi = 0.5 * (a + b) + rad;
    let lo = if hi > 0.0 { (a * b - c.norm_sqr()) / hi } else { 0.5 * (a + b) - rad };
    let v1 = DVector::from_vec(vec![c, C64::new(hi - a, 0.0)]);
    let v2 = DVector::from_vec(vec![C64::new(hi - b, 0.0), c.conj()]);
    let mut v = if v1.norm() >= v2.norm() { v1 } else { v2 };
    v /= C64::new(v.norm(), 0.0);
    let w = DVector::from_vec(vec![-v[1].conj(), v[0].conj()]);
    vec![(hi, v), (lo, w)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn charge_eigenstate_summary() {
        for d in 1..=3 {
            for kind in [StateKind::Pure, StateKind::Mixed] {
                let s = SiteState::basis(d, 0, kind).unwrap();
                let z = s.summarize();
                assert_eq!((z.z_pur, z.z_sharp), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn maximally_mixed_qubit() {
        let z = SiteState::maximally_mixed(1).unwrap().summarize();
        assert_eq!((z.z_pur, z.z_sharp), (0.5, 0.5));
    }

    #[test]
    fn charge_sharp_but_mixed_qudit() {
        let mut rho = DMatrix::zeros(4, 4);
        rho[(0, 0)] = c(0.5);
        rho[(1, 1)] = c(0.5);
        let z = SiteState::mixed(2, rho).unwrap().summarize();
        assert!((z.z_pur - 0.5).abs() < 1e-15);
        assert_eq!(z.z_sharp, 0.0);
    }

    #[test]
    fn superposition_is_fuzzy() {
        let s = SiteState::charge_superposition(2).unwrap();
        let z = s.summarize();
        assert_eq!(z.z_pur, 0.0);
        assert!((z.z_sharp - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_states() {
        assert!(SiteState::pure(1, DVector::from_vec(vec![c(1.0), c(1.0)])).is_err());
        assert!(SiteState::mixed(1, DMatrix::identity(2, 2)).is_err());
        let mut neg = DMatrix::zeros(2, 2);
        neg[(0, 0)] = c(1.5);
        neg[(1, 1)] = c(-0.5);
        assert!(SiteState::mixed(1, neg).is_err());
        let mut nh = DMatrix::identity(2, 2) * c(0.5);
        nh[(0, 1)] = c(0.1);
        assert!(SiteState::mixed(1, nh).is_err());
        assert!(SiteState::maximally_mixed(0).is_err());
    }

    #[test]
    fn closed_form_small_eigenvalue_is_accurate() {
        // diag(1 − 1e-20, 1e-20) rotated mildly: det-based value keeps precision.
        let a = 1.0 - 1e-20;
        let b = 1e-20;
        let spec = spectrum_2x2(a, b, ZERO);
        let lo = spec.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        assert!((lo - 1e-20).abs() < 1e-30);
    }

    #[test]
    fn spectra_reconstruct_matrix() {
        let mut dr = crate::rng::RandomStream::new(3).at(0, 0);
        for d in 1..=3 {
            let n = 2 * d;
            let g = DMatrix::from_fn(n, n, |_, _| C64::new(dr.normal(), dr.normal()));
            let mut rho = &g * g.adjoint();
            let tr = rho.trace();
            rho /= tr;
            let s = SiteState::mixed(d, rho.clone()).unwrap();
            let mut rebuilt = DMatrix::zeros(n, n);
            for (w, v) in s.components() {
                rebuilt += v * v.adjoint() * c(w);
            }
            assert!((rebuilt - rho).camax() < 1e-12, "d = {d}");
        }
    }

    #[test]
    fn qubit_summary_roundtrip() {
        let q = QubitSummary::from_weights(0.2, 0.8);
        assert_eq!(q.s, 1);
        assert!((q.z - 0.2).abs() < 1e-15);
        assert_eq!(q.weights(), [0.2, 0.8]);
    }
}
