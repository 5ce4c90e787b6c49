//! Reproducible random streams and the samplers built on them.
//!
//! A [`RngStream`] is identified by a base seed and a path of 64-bit labels
//! (for example `[setting, replication]`). The path is hashed into a ChaCha8
//! key, so every stream is an independent counter-mode generator and the
//! variates drawn for a given path never depend on which thread, or in which
//! order, other paths were evaluated.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_key(base_seed: u64, path: &[u64]) -> [u8; 32] {
    let mut state = splitmix64(base_seed ^ 0x6D62_665F_7374_7265);
    // Length is mixed in so that [] and [0] differ.
    state = splitmix64(state ^ path.len() as u64);
    for &label in path {
        state = splitmix64(state ^ splitmix64(label));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        state = splitmix64(state.wrapping_add(i as u64));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// A deterministic random stream addressed by `(base_seed, path)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    base_seed: u64,
    path: Vec<u64>,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(base_seed: u64) -> Self {
        RngStream::with_path(base_seed, &[])
    }

    pub fn with_path(base_seed: u64, path: &[u64]) -> Self {
        RngStream {
            base_seed,
            path: path.to_vec(),
            rng: ChaCha8Rng::from_seed(derive_key(base_seed, path)),
        }
    }

    /// A fresh stream whose path extends this one by `label`. The child does
    /// not depend on how many variates the parent has produced.
    pub fn derive(&self, label: u64) -> RngStream {
        let mut path = self.path.clone();
        path.push(label);
        RngStream::with_path(self.base_seed, &path)
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

pub fn sample_std_normal(stream: &mut RngStream) -> f64 {
    StandardNormal.sample(stream)
}

pub fn sample_normal_vec(stream: &mut RngStream, p: usize) -> Vec<f64> {
    (0..p).map(|_| sample_std_normal(stream)).collect()
}

/// χ² variate with (possibly fractional) `df` degrees of freedom, drawn as
/// a Gamma(df/2, 2) variate.
pub fn sample_chisq(stream: &mut RngStream, df: f64) -> Result<f64> {
    let gamma = Gamma::new(0.5 * df, 2.0)
        .map_err(|_| Error::Domain(format!("chi-square df must be positive, got {df}")))?;
    Ok(gamma.sample(stream))
}

/// `mean + L z` with `L` the Cholesky factor of `sigma`.
pub fn sample_mvn(stream: &mut RngStream, mean: &[f64], sigma: &SpdMatrix) -> Result<Vec<f64>> {
    let p = sigma.dim();
    if mean.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: mean.len(),
        });
    }
    let z = sample_normal_vec(stream, p);
    let l = sigma.chol();
    Ok((0..p)
        .map(|i| mean[i] + (0..=i).map(|k| l[(i, k)] * z[k]).sum::<f64>())
        .collect())
}

/// Lower-triangular Bartlett factor `A` of a `W(I_p, df)` draw, so that
/// `A Aᵀ ~ W(I_p, df)`.
pub fn sample_bartlett_factor(stream: &mut RngStream, p: usize, df: usize) -> Result<Matrix> {
    if df < p || p == 0 {
        return Err(Error::DfTooSmall { df, p });
    }
    let mut a = Matrix::zeros(p, p);
    for i in 0..p {
        a[(i, i)] = sample_chisq(stream, (df - i) as f64)?.sqrt();
        for j in 0..i {
            a[(i, j)] = sample_std_normal(stream);
        }
    }
    Ok(a)
}

/// Wishart `W(sigma, df)` draw by the Bartlett construction
/// `W = L A Aᵀ Lᵀ`.
pub fn sample_wishart(stream: &mut RngStream, sigma: &SpdMatrix, df: usize) -> Result<SpdMatrix> {
    let p = sigma.dim();
    let a = sample_bartlett_factor(stream, p, df)?;
    // L A is lower triangular with positive diagonal, hence a Cholesky factor.
    let la = sigma.chol().matmul(&a);
    let mut factor = la;
    for i in 0..p {
        for j in (i + 1)..p {
            factor[(i, j)] = 0.0;
        }
    }
    SpdMatrix::from_cholesky_factor(factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_path_same_sequence() {
        let mut a = RngStream::with_path(7, &[1, 2]);
        let mut b = RngStream::with_path(7, &[1, 2]);
        for _ in 0..100 {
            assert_eq!(
                sample_std_normal(&mut a).to_bits(),
                sample_std_normal(&mut b).to_bits()
            );
        }
    }

    #[test]
    fn derive_ignores_parent_position() {
        let parent = RngStream::new(3);
        let mut used = parent.clone();
        for _ in 0..17 {
            used.next_u64();
        }
        let mut c1 = parent.derive(5);
        let mut c2 = used.derive(5);
        assert_eq!(c1.next_u64(), c2.next_u64());
        assert_eq!(parent.derive(5).path(), &[5]);
    }

    #[test]
    fn distinct_paths_differ() {
        let mut seen = std::collections::HashSet::new();
        for a in 0..20u64 {
            for b in 0..20u64 {
                seen.insert(RngStream::with_path(1, &[a, b]).next_u64());
            }
        }
        seen.insert(RngStream::with_path(1, &[]).next_u64());
        seen.insert(RngStream::with_path(1, &[0]).next_u64());
        assert_eq!(seen.len(), 402);
    }

    #[test]
    fn uniform_in_open_interval() {
        let mut s = RngStream::new(11);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn mvn_identity_is_shifted_normal_vec() {
        let mut a = RngStream::new(9);
        let mut b = RngStream::new(9);
        let x = sample_mvn(&mut a, &[1.0, -2.0, 0.5], &SpdMatrix::identity(3)).unwrap();
        let z = sample_normal_vec(&mut b, 3);
        assert_eq!(x, vec![z[0] + 1.0, z[1] - 2.0, z[2] + 0.5]);
    }

    #[test]
    fn mvn_dimension_checks() {
        let mut s = RngStream::new(1);
        assert!(matches!(
            sample_mvn(&mut s, &[5.0], &SpdMatrix::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        let singular = SpdMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        assert!(matches!(singular, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn wishart_df_too_small() {
        let mut s = RngStream::new(1);
        assert!(matches!(
            sample_wishart(&mut s, &SpdMatrix::identity(3), 2),
            Err(Error::DfTooSmall { df: 2, p: 3 })
        ));
        let w = sample_wishart(&mut s, &SpdMatrix::identity(3), 3).unwrap();
        assert_eq!(w.dim(), 3);
    }
}
