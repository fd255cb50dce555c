//! Input and output matrix storage plus the index conventions shared by every
//! computation path.
//!
//! Logical indices are 1-based throughout: `A(1, 1)` is the top-left input
//! element and `C(1, 1)` the first output entry. Physical storage is 0-based
//! and the conversion happens only inside the accessors below.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Double-precision complex scalar used for both input samples and output
/// covariance entries.
pub type ComplexScalar = Complex64;

/// Position of window element `(r_rel, c_rel)` in the column stack of a
/// window with `p` rows.
///
/// Columns are stacked top to bottom, so the result is `p * (c_rel - 1) + r_rel`.
/// The caller supplies the window width `q` only for range checking.
pub fn column_stack_index(r_rel: usize, c_rel: usize, p: usize, q: usize) -> Result<usize> {
    if r_rel == 0 || c_rel == 0 || r_rel > p || c_rel > q {
        return Err(Error::Index {
            row: r_rel,
            col: c_rel,
            rows: p,
            cols: q,
        });
    }
    Ok(p * (c_rel - 1) + r_rel)
}

/// Offset of upper-triangle entry `(r, c)` within row-major packed storage.
pub fn packed_offset(r: usize, c: usize, dim: usize) -> Result<usize> {
    if r == 0 || c == 0 || r > dim || c > dim {
        return Err(Error::Index {
            row: r,
            col: c,
            rows: dim,
            cols: dim,
        });
    }
    if r > c {
        return Err(Error::LowerTriangle { row: r, col: c });
    }
    Ok(packed_offset_unchecked(r, c, dim))
}

#[inline(always)]
pub(crate) fn packed_offset_unchecked(r: usize, c: usize, dim: usize) -> usize {
    debug_assert!(1 <= r && r <= c && c <= dim);
    // (r-1)*dim - (r-1)(r-2)/2 + (c - r), written to stay in unsigned range
    (r - 1) * dim - (r - 1) * (r.saturating_sub(2)) / 2 + (c - r)
}

/// Number of entries in the packed upper triangle of a `dim`x`dim` matrix.
pub fn packed_len(dim: usize) -> Result<usize> {
    let len = dim
        .checked_add(1)
        .and_then(|d1| d1.checked_mul(dim))
        .map(|x| x / 2)
        .ok_or(Error::Capacity { dim })?;
    len.checked_mul(std::mem::size_of::<ComplexScalar>())
        .filter(|&bytes| bytes <= isize::MAX as usize)
        .ok_or(Error::Capacity { dim })?;
    Ok(len)
}

/// Dense `N`x`M` complex input matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    rows: usize,
    cols: usize,
    data: Vec<ComplexScalar>,
}

impl InputMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<ComplexScalar>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::DataLength {
                got: data.len(),
                rows,
                cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        let len = rows.checked_mul(cols).ok_or(Error::EmptyMatrix)?;
        Self::new(rows, cols, vec![ComplexScalar::default(); len])
    }

    /// Builds a matrix from a function of the 1-based position.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> ComplexScalar,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.saturating_mul(cols));
        for r in 1..=rows {
            for c in 1..=cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Seeded matrix with real and imaginary parts drawn independently and
    /// uniformly from `[-1, 1)` by a ChaCha8 stream. The same seed always
    /// produces the same matrix on every platform.
    pub fn random(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_fn(rows, cols, |_, _| {
            let re = rng.random_range(-1.0..1.0);
            let im = rng.random_range(-1.0..1.0);
            ComplexScalar::new(re, im)
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[ComplexScalar] {
        &self.data
    }

    /// Element `A(r, c)` with 1-based indices.
    pub fn get(&self, r: usize, c: usize) -> Result<ComplexScalar> {
        if r == 0 || c == 0 || r > self.rows || c > self.cols {
            return Err(Error::Index {
                row: r,
                col: c,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.at(r, c))
    }

    #[inline(always)]
    pub(crate) fn at(&self, r: usize, c: usize) -> ComplexScalar {
        self.data[(r - 1) * self.cols + (c - 1)]
    }
}

/// A `P`x`Q` sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowSpec {
    p: usize,
    q: usize,
}

impl WindowSpec {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::Parameter(format!(
                "window dimensions must be positive, got {p}x{q}"
            )));
        }
        Ok(Self { p, q })
    }

    /// Window height.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Window width.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Length of the column-stacked window vector, and the side of the output.
    pub fn dim(&self) -> usize {
        self.p * self.q
    }

    /// Checks `P <= N` and `Q <= M`.
    pub fn validate_for(&self, rows: usize, cols: usize) -> Result<()> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if self.p > rows || self.q > cols {
            return Err(Error::InvalidWindow {
                p: self.p,
                q: self.q,
                n: rows,
                m: cols,
            });
        }
        Ok(())
    }
}

/// Hermitian `PQ`x`PQ` output held as its packed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    dim: usize,
    packed: Vec<ComplexScalar>,
}

impl CovarianceMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        let len = packed_len(dim)?;
        Ok(Self {
            dim,
            packed: vec![ComplexScalar::default(); len],
        })
    }

    pub fn from_packed(dim: usize, packed: Vec<ComplexScalar>) -> Result<Self> {
        let len = packed_len(dim)?;
        if packed.len() != len {
            return Err(Error::DataLength {
                got: packed.len(),
                rows: dim,
                cols: dim,
            });
        }
        Ok(Self { dim, packed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[ComplexScalar] {
        &self.packed
    }

    pub fn packed_mut(&mut self) -> &mut [ComplexScalar] {
        &mut self.packed
    }

    /// Entry `C(r, c)` of the full Hermitian matrix; lower-triangle reads are
    /// served by conjugating the mirrored upper entry.
    pub fn get(&self, r: usize, c: usize) -> Result<ComplexScalar> {
        if r <= c {
            Ok(self.packed[packed_offset(r, c, self.dim)?])
        } else {
            Ok(self.packed[packed_offset(c, r, self.dim)?].conj())
        }
    }

    /// Dense row-major reconstruction with `C(c, r) = conj(C(r, c))`.
    pub fn to_dense(&self) -> Vec<ComplexScalar> {
        let n = self.dim;
        let mut dense = vec![ComplexScalar::default(); n * n];
        let mut k = 0;
        for r in 0..n {
            for c in r..n {
                let v = self.packed[k];
                dense[c * n + r] = v.conj();
                dense[r * n + c] = v;
                k += 1;
            }
        }
        dense
    }

    pub fn trace(&self) -> f64 {
        (1..=self.dim)
            .map(|r| self.packed[packed_offset_unchecked(r, r, self.dim)].re)
            .sum()
    }

    /// Frobenius norm of the packed triangle.
    pub fn packed_norm(&self) -> f64 {
        self.packed.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||self - reference|| / ||reference||` over the packed triangle. Falls
    /// back to the absolute distance when the reference is exactly zero.
    pub fn relative_frobenius_distance(&self, reference: &CovarianceMatrix) -> Result<f64> {
        self.check_same_dim(reference)?;
        let diff = self
            .packed
            .iter()
            .zip(&reference.packed)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale = reference.packed_norm();
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }

    /// Largest entrywise difference, scaled by the largest reference entry.
    pub fn max_relative_entry_difference(&self, reference: &CovarianceMatrix) -> Result<f64> {
        self.check_same_dim(reference)?;
        let diff = self
            .packed
            .iter()
            .zip(&reference.packed)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = reference
            .packed
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }

    /// True when every packed entry has the identical bit pattern.
    pub fn bitwise_eq(&self, other: &CovarianceMatrix) -> bool {
        self.dim == other.dim
            && self
                .packed
                .iter()
                .zip(&other.packed)
                .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits())
    }

    fn check_same_dim(&self, other: &CovarianceMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Parameter(format!(
                "covariance dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_stack_examples() {
        assert_eq!(column_stack_index(1, 1, 13, 13).unwrap(), 1);
        assert_eq!(column_stack_index(3, 2, 4, 2).unwrap(), 7);
        assert_eq!(column_stack_index(13, 7, 13, 7).unwrap(), 91);
        assert!(column_stack_index(0, 1, 4, 4).is_err());
        assert!(column_stack_index(5, 1, 4, 4).is_err());
        assert!(column_stack_index(1, 5, 4, 4).is_err());
    }

    #[test]
    fn column_stack_is_a_bijection() {
        for p in 1..=7 {
            for q in 1..=7 {
                let mut seen = vec![false; p * q + 1];
                for c in 1..=q {
                    for r in 1..=p {
                        let i = column_stack_index(r, c, p, q).unwrap();
                        assert!(!seen[i]);
                        seen[i] = true;
                    }
                }
                assert!(seen[1..].iter().all(|&s| s));
            }
        }
    }

    #[test]
    fn packed_offset_examples() {
        assert_eq!(packed_offset(1, 1, 4).unwrap(), 0);
        assert_eq!(packed_offset(4, 4, 4).unwrap(), 9);
        // row-major triangle enumeration: (1,1..4)=0..3, (2,2)=4, (2,3)=5
        assert_eq!(packed_offset(2, 3, 4).unwrap(), 5);
        assert_eq!(
            packed_offset(3, 2, 4),
            Err(Error::LowerTriangle { row: 3, col: 2 })
        );
        assert!(packed_offset(1, 5, 4).is_err());
    }

    #[test]
    fn packed_offset_matches_enumeration() {
        for dim in 1..=64 {
            let mut next = 0;
            for r in 1..=dim {
                for c in r..=dim {
                    assert_eq!(packed_offset(r, c, dim).unwrap(), next);
                    next += 1;
                }
            }
            assert_eq!(next, packed_len(dim).unwrap());
        }
    }

    #[test]
    fn packed_len_overflow_is_a_capacity_error() {
        assert_eq!(
            packed_len(usize::MAX),
            Err(Error::Capacity { dim: usize::MAX })
        );
        assert!(CovarianceMatrix::zeros(1 << 40).is_err());
    }

    #[test]
    fn input_accessor_rejects_out_of_range() {
        let a = InputMatrix::zeros(2, 3).unwrap();
        assert!(a.get(2, 3).is_ok());
        assert!(a.get(0, 1).is_err());
        assert!(a.get(3, 1).is_err());
        assert!(a.get(1, 4).is_err());
        assert_eq!(InputMatrix::zeros(0, 3), Err(Error::EmptyMatrix));
        assert!(InputMatrix::new(2, 2, vec![ComplexScalar::default(); 3]).is_err());
    }

    #[test]
    fn random_is_seeded_and_bounded() {
        let a = InputMatrix::random(5, 4, 7).unwrap();
        let b = InputMatrix::random(5, 4, 7).unwrap();
        let c = InputMatrix::random(5, 4, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for z in a.data() {
            assert!((-1.0..1.0).contains(&z.re) && (-1.0..1.0).contains(&z.im));
        }
    }

    #[test]
    fn window_validation() {
        assert!(WindowSpec::new(0, 1).is_err());
        let w = WindowSpec::new(3, 2).unwrap();
        assert_eq!(w.dim(), 6);
        assert!(w.validate_for(3, 2).is_ok());
        assert!(w.validate_for(2, 2).is_err());
        assert!(w.validate_for(3, 1).is_err());
    }

    #[test]
    fn dense_reconstruction_is_hermitian() {
        let packed: Vec<_> = (0..10)
            .map(|k| ComplexScalar::new(k as f64, (k * k) as f64 - 3.0))
            .collect();
        let c = CovarianceMatrix::from_packed(4, packed).unwrap();
        let d = c.to_dense();
        for r in 1..=4 {
            for col in 1..=4 {
                assert_eq!(d[(r - 1) * 4 + col - 1], c.get(r, col).unwrap());
                if r != col {
                    assert_eq!(c.get(r, col).unwrap(), c.get(col, r).unwrap().conj());
                }
            }
        }
    }

    #[test]
    fn complex_scalar_conjugation() {
        let z = ComplexScalar::new(2.0, -1.5);
        assert_eq!(z.conj().conj(), z);
        let sq = z * z.conj();
        assert_eq!(sq.im, 0.0);
        assert_eq!(sq.re, z.norm_sqr());
    }
}
