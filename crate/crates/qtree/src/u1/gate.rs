//! Charge-conserving two-site gates.
//!
//! A site is a charged qubit times a neutral qudit, indexed `q * d + a`.
//! Two sites are indexed `i1 * 2d + i2`. The charge-sorted basis lists the
//! two-site indices in natural order, stably grouped by total charge.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::rng::{haar_unitary, Draws};

/// Index bookkeeping for the charge-sorted two-site basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChargeLayout {
    d: usize,
    /// Natural two-site indices of each total-charge sector, in sorted order.
    sectors: [Vec<usize>; 3],
}

impl ChargeLayout {
    pub fn new(d: usize) -> Result<Arc<Self>> {
        if d == 0 {
            return Err(Error::InvalidArgument("qudit dimension d must be ≥ 1".into()));
        }
        let n = 2 * d;
        let mut sectors: [Vec<usize>; 3] = Default::default();
        for idx in 0..n * n {
            let (i1, i2) = (idx / n, idx % n);
            sectors[i1 / d + i2 / d].push(idx);
        }
        Ok(Arc::new(Self { d, sectors }))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn site_dim(&self) -> usize {
        2 * self.d
    }

    pub fn sector(&self, q: usize) -> &[usize] {
        &self.sectors[q]
    }

    pub fn sector_dims(&self) -> [usize; 3] {
        [self.sectors[0].len(), self.sectors[1].len(), self.sectors[2].len()]
    }

    /// Permutation `P` with `(P v)[r] = v[perm[r]]`: natural → charge-sorted.
    pub fn permutation(&self) -> Vec<usize> {
        self.sectors.iter().flatten().copied().collect()
    }
}

/// Block-diagonal unitary, one Haar block per total-charge sector.
#[derive(Clone, Debug)]
pub struct BlockUnitary {
    layout: Arc<ChargeLayout>,
    blocks: [DMatrix<C64>; 3],
}

impl BlockUnitary {
    pub fn sample(layout: &Arc<ChargeLayout>, draws: &mut Draws) -> Result<Self> {
        let dims = layout.sector_dims();
        let blocks = [
            haar_unitary(draws, dims[0])?,
            haar_unitary(draws, dims[1])?,
            haar_unitary(draws, dims[2])?,
        ];
        Ok(Self { layout: Arc::clone(layout), blocks })
    }

    pub fn from_blocks(layout: &Arc<ChargeLayout>, blocks: [DMatrix<C64>; 3]) -> Result<Self> {
        for (q, (b, dim)) in blocks.iter().zip(layout.sector_dims()).enumerate() {
            if b.nrows() != dim || b.ncols() != dim {
                return Err(Error::InvalidArgument(format!(
                    "sector {q} block is {}×{}, expected {dim}×{dim}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            let err = (b.adjoint() * b - DMatrix::identity(dim, dim)).camax();
            if err > 1e-12 {
                return Err(Error::InvalidArgument(format!("sector {q} block is not unitary ({err:e})")));
            }
        }
        Ok(Self { layout: Arc::clone(layout), blocks })
    }

    pub fn layout(&self) -> &Arc<ChargeLayout> {
        &self.layout
    }

    pub fn block(&self, q: usize) -> &DMatrix<C64> {
        &self.blocks[q]
    }

    /// Dense `P† · blockdiag · P` in the natural two-site basis.
    pub fn two_site_matrix(&self) -> DMatrix<C64> {
        let n2 = self.layout.site_dim().pow(2);
        let perm = self.layout.permutation();
        let mut bd = DMatrix::zeros(n2, n2);
        let mut off = 0;
        for b in &self.blocks {
            let m = b.nrows();
            bd.view_mut((off, off), (m, m)).copy_from(b);
            off += m;
        }
        let mut p = DMatrix::zeros(n2, n2);
        for (r, &c) in perm.iter().enumerate() {
            p[(r, c)] = C64::new(1.0, 0.0);
        }
        p.adjoint() * bd * p
    }

    /// Applies the gate to a natural-basis two-site vector sector by sector.
    pub fn apply(&self, v: &[C64]) -> DVector<C64> {
        let mut out = DVector::zeros(v.len());
        let mut buf = Vec::new();
        for (q, b) in self.blocks.iter().enumerate() {
            let idx = self.layout.sector(q);
            buf.clear();
            buf.extend(idx.iter().map(|&i| v[i]));
            if buf.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                continue;
            }
            for (r, &i) in idx.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (c, x) in buf.iter().enumerate() {
                    acc += b[(r, c)] * x;
                }
                out[i] = acc;
            }
        }
        out
    }
}
