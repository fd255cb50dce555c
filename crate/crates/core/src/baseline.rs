//! Window-by-window reference estimator.
//!
//! Each window is column-stacked into an explicit vector and its rank-1
//! outer product is accumulated into the upper triangle. This path is the
//! oracle every other path is compared against, so it stays single-threaded
//! and deliberately plain.

use crate::analysis;
use crate::error::Result;
use crate::matrix::{ComplexScalar, CovarianceMatrix, InputMatrix, WindowSpec};

/// Upper-left corner of a window placement, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowPosition {
    pub p: usize,
    pub q: usize,
}

/// All in-bounds window placements in row-major order.
///
/// The corner ranges are inclusive: `1..=N-P+1` by `1..=M-Q+1`.
pub fn window_positions(dims: (usize, usize), w: WindowSpec) -> Result<Vec<WindowPosition>> {
    let (n, m) = dims;
    w.validate_for(n, m)?;
    let mut out = Vec::with_capacity((n - w.p() + 1) * (m - w.q() + 1));
    for p in 1..=n - w.p() + 1 {
        for q in 1..=m - w.q() + 1 {
            out.push(WindowPosition { p, q });
        }
    }
    Ok(out)
}

/// Column stack of the window at `pos`.
pub fn column_stack(a: &InputMatrix, w: WindowSpec, pos: WindowPosition) -> Vec<ComplexScalar> {
    let mut v = Vec::with_capacity(w.dim());
    for j in 0..w.q() {
        for i in 0..w.p() {
            v.push(a.at(pos.p + i, pos.q + j));
        }
    }
    v
}

pub fn estimate_naive(a: &InputMatrix, w: WindowSpec) -> Result<CovarianceMatrix> {
    let positions = window_positions(a.dims(), w)?;
    estimate_naive_in_order(a, w, &positions)
}

/// Accumulates the window contributions in the given order. Used to check
/// that the result does not depend on the summation order beyond rounding.
pub fn estimate_naive_in_order(
    a: &InputMatrix,
    w: WindowSpec,
    positions: &[WindowPosition],
) -> Result<CovarianceMatrix> {
    w.validate_for(a.rows(), a.cols())?;
    let dim = w.dim();
    let mut c = CovarianceMatrix::zeros(dim)?;
    let packed = c.packed_mut();
    for &pos in positions {
        let v = column_stack(a, w, pos);
        let mut k = 0;
        for r in 0..dim {
            let vr = v[r];
            for vc in &v[r..] {
                packed[k] += vr * vc.conj();
                k += 1;
            }
        }
    }
    Ok(c)
}

/// Naive multiplication and addition counts `(SM, SA)` in their closed form,
/// which uses `(N-P)(M-Q)` placements rather than the inclusive count.
pub fn count_naive_ops(dims: (usize, usize), w: WindowSpec) -> Result<(u64, u64)> {
    let model = analysis::closed_form_counts(dims.0, dims.1, w.p(), w.q())?;
    Ok((model.sm, model.sa))
}

/// Multiplications and additions `estimate_naive` actually executes: one of
/// each per upper-triangle entry per window placement.
pub fn executed_naive_ops(dims: (usize, usize), w: WindowSpec) -> Result<(u64, u64)> {
    let windows = window_positions(dims, w)?.len() as u64;
    let tri = analysis::upper_triangle_size(w.p(), w.q())?;
    let ops = windows
        .checked_mul(tri)
        .ok_or(crate::Error::Overflow { what: "naive ops" })?;
    Ok((ops, ops))
}
