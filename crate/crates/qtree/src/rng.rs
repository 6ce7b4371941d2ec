//! Counter-keyed random streams, Haar unitaries and Born sampling.
//!
//! Every draw is addressed by `(seed, generation, sample)` plus its position
//! within that stream, so results never depend on how work is split across
//! threads.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Root key of a family of independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent family, e.g. one per scan point or experiment.
    pub fn fork(&self, tag: u64) -> Self {
        Self { seed: splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d))) }
    }

    /// Draw sequence addressed by `(generation, sample)`.
    pub fn at(&self, generation: u64, sample: u64) -> Draws {
        let mut key = [0u8; 32];
        let words = [
            splitmix64(self.seed),
            splitmix64(self.seed ^ 0x6a09_e667_f3bc_c908),
            splitmix64(generation ^ 0xbb67_ae85_84ca_a73b),
            splitmix64(generation.rotate_left(17) ^ self.seed.rotate_left(3)),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(sample);
        Draws { rng }
    }
}

/// Sequential draws at one logical address; the draw index is the position
/// in this sequence.
#[derive(Clone, Debug)]
pub struct Draws {
    rng: ChaCha8Rng,
}

impl Draws {
    /// Jumps to the `draw`-th 32-bit word of this stream.
    pub fn skip_to(&mut self, draw: u128) {
        self.rng.set_word_pos(draw);
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        // `p >= 1` always fires and `p <= 0` never does, without consuming
        // a different number of draws.
        self.uniform() < p
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Haar-distributed `dim × dim` unitary: Gram-Schmidt (two passes per
/// column) on a complex Ginibre matrix, which is the QR factor with a
/// positive diagonal in `R`.
pub fn haar_unitary(draws: &mut Draws, dim: usize) -> Result<DMatrix<C64>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("unitary dimension must be positive".into()));
    }
    if dim == 1 {
        let phi = std::f64::consts::TAU * draws.uniform();
        return Ok(DMatrix::from_element(1, 1, C64::from_polar(1.0, phi)));
    }
    let mut q = DMatrix::from_fn(dim, dim, |_, _| C64::new(draws.normal(), draws.normal()));
    let a = q.as_mut_slice();
    for j in 0..dim {
        let (done, rest) = a.split_at_mut(j * dim);
        let col = &mut rest[..dim];
        for _ in 0..2 {
            for basis in done.chunks_exact(dim) {
                let proj: C64 = basis.iter().zip(col.iter()).map(|(b, c)| b.conj() * c).sum();
                for (c, b) in col.iter_mut().zip(basis) {
                    *c -= proj * b;
                }
            }
        }
        let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::DegenerateDistribution);
        }
        let inv = 1.0 / norm;
        for c in col.iter_mut() {
            *c *= inv;
        }
    }
    Ok(q)
}

/// Samples index `i` with probability `weights[i] / Σ weights`.
pub fn born_sample(draws: &mut Draws, weights: &[f64]) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::DegenerateDistribution);
    }
    let target = draws.uniform() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            acc += w;
            if target < acc {
                return Ok(i);
            }
        }
    }
    // Rounding left `target` just past the running sum.
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_unitarity_error(u: &DMatrix<C64>) -> f64 {
        let n = u.nrows();
        let prod = u.adjoint() * u;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        err
    }

    #[test]
    fn same_address_same_draws() {
        let s = RandomStream::new(42);
        let a: Vec<u64> = (0..8).map({
            let mut d = s.at(3, 7);
            move |_| d.next_u64()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut d = s.at(3, 7);
            move |_| d.next_u64()
        }).collect();
        assert_eq!(a, b);
        let c = s.at(3, 8).next_u64();
        let e = s.at(4, 7).next_u64();
        assert_ne!(a[0], c);
        assert_ne!(a[0], e);
        assert_ne!(s.fork(1).at(3, 7).next_u64(), a[0]);
    }

    #[test]
    fn skip_to_matches_sequential() {
        let s = RandomStream::new(9);
        let mut d = s.at(0, 0);
        let _ = d.next_u64();
        let second = d.next_u64();
        let mut e = s.at(0, 0);
        e.skip_to(2);
        assert_eq!(e.next_u64(), second);
    }

    #[test]
    fn uniform_moments_across_addresses() {
        let s = RandomStream::new(5);
        let n = 100_000;
        let mean: f64 = (0..n).map(|i| s.at(1, i).uniform()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 5.0 * (1.0 / 12.0f64 / n as f64).sqrt());
    }

    #[test]
    fn dim_zero_rejected() {
        let mut d = RandomStream::new(0).at(0, 0);
        assert!(matches!(haar_unitary(&mut d, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dim_one_is_phase() {
        let mut d = RandomStream::new(1).at(0, 0);
        let u = haar_unitary(&mut d, 1).unwrap();
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unitary_to_precision() {
        let s = RandomStream::new(2);
        for dim in [2, 3, 4, 8, 18] {
            let u = haar_unitary(&mut s.at(0, dim as u64), dim).unwrap();
            assert!(max_unitarity_error(&u) < 1e-12, "dim {dim}");
        }
    }

    #[test]
    fn haar_two_dim_moments() {
        let s = RandomStream::new(11);
        let n = 100_000;
        let (mut m2, mut m1) = (0.0, 0.0);
        for i in 0..n {
            let u = haar_unitary(&mut s.at(0, i), 2).unwrap();
            let a = u[(0, 0)].norm();
            m2 += a * a;
            m1 += a;
        }
        m2 /= n as f64;
        m1 /= n as f64;
        assert!((m2 - 0.5).abs() < 0.005, "{m2}");
        assert!((m1 - 2.0 / 3.0).abs() < 0.005, "{m1}");
    }

    #[test]
    fn haar_entries_average_inverse_dim() {
        let s = RandomStream::new(12);
        let n = 100_000;
        for dim in [3usize, 4] {
            let mut acc = vec![0.0; dim * dim];
            let mut acc2 = vec![0.0; dim * dim];
            for i in 0..n {
                let u = haar_unitary(&mut s.fork(dim as u64).at(0, i), dim).unwrap();
                for (k, z) in u.iter().enumerate() {
                    let x = z.norm_sqr();
                    acc[k] += x;
                    acc2[k] += x * x;
                }
            }
            for k in 0..dim * dim {
                let mean = acc[k] / n as f64;
                let var = acc2[k] / n as f64 - mean * mean;
                let se = (var / n as f64).sqrt();
                assert!((mean - 1.0 / dim as f64).abs() < 5.0 * se, "dim {dim} entry {k}: {mean}");
            }
        }
    }

    #[test]
    fn left_invariance_of_first_column_phase() {
        // Multiplying by a fixed unitary must not shift the mean of |u00|^2.
        let s = RandomStream::new(13);
        let v = haar_unitary(&mut s.at(99, 0), 3).unwrap();
        let n = 50_000;
        let mut acc = 0.0;
        for i in 0..n {
            let u = &v * haar_unitary(&mut s.at(0, i), 3).unwrap();
            acc += u[(0, 0)].norm_sqr();
        }
        assert!((acc / n as f64 - 1.0 / 3.0).abs() < 0.005);
    }

    #[test]
    fn born_edge_cases() {
        let s = RandomStream::new(3);
        for i in 0..1000 {
            assert_eq!(born_sample(&mut s.at(0, i), &[1.0, 0.0]).unwrap(), 0);
            assert_eq!(born_sample(&mut s.at(0, i), &[0.0, 0.0, 2.0]).unwrap(), 2);
        }
        assert!(matches!(born_sample(&mut s.at(0, 0), &[0.0, 0.0]), Err(Error::DegenerateDistribution)));
        assert!(born_sample(&mut s.at(0, 0), &[]).is_err());
    }

    #[test]
    fn born_frequencies() {
        let s = RandomStream::new(4);
        let n = 100_000;
        let f11 = (0..n).filter(|&i| born_sample(&mut s.at(0, i), &[1.0, 1.0]).unwrap() == 0).count();
        let f31 = (0..n).filter(|&i| born_sample(&mut s.at(1, i), &[3.0, 1.0]).unwrap() == 0).count();
        assert!((f11 as f64 / n as f64 - 0.5).abs() < 0.005);
        assert!((f31 as f64 / n as f64 - 0.75).abs() < 0.005);
    }
}
