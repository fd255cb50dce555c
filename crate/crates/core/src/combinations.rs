//! Unique element-pair combinations and their output write patterns.
//!
//! Every product `A(r1,c1) * conj(A(r2,c2))` is identified by its offset
//! `(dr, dc) = (r2 - r1, c2 - c1)`. Products sharing an offset form one
//! combination. Within a window the first element sits at stack position
//! `row = P(j1 - 1) + i1` and the second at `row + dc*P + dr`, so all of a
//! combination's contributions land on a single output diagonal, and two
//! different combinations never share an output index.
//!
//! The unique set keeps one offset of each `(a, b)` / `(-a, -b)` pair:
//!
//! * group 1: `0 <= dr <= P-1`, `0 <= dc <= Q-1`
//! * group 2: `-(P-1) <= dr <= -1`, `1 <= dc <= Q-1`
//!
//! which places every contribution on or above the main diagonal.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::matrix::{column_stack_index, WindowSpec};

/// Inter-element offset `(dr, dc)` naming one combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Combination {
    pub dr: isize,
    pub dc: isize,
}

impl Combination {
    pub const fn new(dr: isize, dc: isize) -> Self {
        Self { dr, dc }
    }

    /// Membership in the unique-combination set for window `w`.
    pub fn is_unique_for(&self, w: WindowSpec) -> bool {
        let (p, q) = (w.p() as isize, w.q() as isize);
        let group1 = (0..p).contains(&self.dr) && (0..q).contains(&self.dc);
        let group2 = (-(p - 1)..=-1).contains(&self.dr) && (1..q).contains(&self.dc);
        group1 || group2
    }

    /// Offset of the output diagonal this combination writes, `dc*P + dr`.
    pub fn diagonal(&self, w: WindowSpec) -> usize {
        let d = self.dc * w.p() as isize + self.dr;
        debug_assert!(d >= 0);
        d as usize
    }

    fn check(&self, w: WindowSpec) -> Result<()> {
        if self.is_unique_for(w) {
            Ok(())
        } else {
            Err(Error::NotACombination {
                dr: self.dr,
                dc: self.dc,
                p: w.p(),
                q: w.q(),
            })
        }
    }
}

/// Two input elements, 1-based `(row, col)` each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ElementPair {
    pub first: (usize, usize),
    pub second: (usize, usize),
}

impl ElementPair {
    pub fn offset(&self) -> Combination {
        Combination::new(
            self.second.0 as isize - self.first.0 as isize,
            self.second.1 as isize - self.first.1 as isize,
        )
    }
}

/// Output indices `(row, col)`, `row <= col`, that one product is added to.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WritePattern {
    pub indices: Vec<(usize, usize)>,
}

/// The unique-combination set, group 1 row-major by `(dr, dc)` followed by
/// group 2 in the same order. Its size is `PQ + (P-1)(Q-1)`.
pub fn enumerate_unique_combinations(w: WindowSpec) -> Vec<Combination> {
    let (p, q) = (w.p() as isize, w.q() as isize);
    let mut out = Vec::with_capacity(unique_combination_count(w));
    for dr in 0..p {
        for dc in 0..q {
            out.push(Combination::new(dr, dc));
        }
    }
    for dr in -(p - 1)..=-1 {
        for dc in 1..q {
            out.push(Combination::new(dr, dc));
        }
    }
    out
}

pub fn unique_combination_count(w: WindowSpec) -> usize {
    w.p() * w.q() + (w.p() - 1) * (w.q() - 1)
}

/// Number of in-bounds element pairs at this offset, `(N-|dr|)(M-|dc|)`.
pub fn mu(c: Combination, dims: (usize, usize)) -> u64 {
    let (n, m) = (dims.0 as u64, dims.1 as u64);
    let (dr, dc) = (c.dr.unsigned_abs() as u64, c.dc.unsigned_abs() as u64);
    n.saturating_sub(dr) * m.saturating_sub(dc)
}

/// Largest number of output indices a single product of this combination
/// can reach, `(P-|dr|)(Q-|dc|)`.
pub fn eta(c: Combination, w: WindowSpec) -> usize {
    w.p().saturating_sub(c.dr.unsigned_abs()) * w.q().saturating_sub(c.dc.unsigned_abs())
}

/// Window-relative positions of a product's first element, as a rectangle
/// of `i1` (row within window) by `j1` (column within window).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftRect {
    pub i: RangeInclusive<usize>,
    pub j: RangeInclusive<usize>,
}

impl ShiftRect {
    pub fn len(&self) -> usize {
        self.i.clone().count() * self.j.clone().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A pair of bounds; meaning depends on the producer.
pub(crate) type Span = (usize, usize);

/// Precomputed geometry of one combination for a fixed input shape and
/// window. Drives both the write-index generation and the estimator's
/// inner loops.
#[derive(Debug, Clone)]
pub struct CombinationGeometry {
    comb: Combination,
    w: WindowSpec,
    n: usize,
    m: usize,
    /// Rows of the window the first element may occupy: `i_lo..=i_lo+height-1`.
    i_lo: usize,
    height: usize,
    /// Columns of the window the first element may occupy: `1..=width`.
    width: usize,
}

impl CombinationGeometry {
    pub fn new(comb: Combination, w: WindowSpec, dims: (usize, usize)) -> Result<Self> {
        w.validate_for(dims.0, dims.1)?;
        comb.check(w)?;
        let height = w.p() - comb.dr.unsigned_abs();
        let width = w.q() - comb.dc.unsigned_abs();
        let i_lo = if comb.dr < 0 {
            1 + comb.dr.unsigned_abs()
        } else {
            1
        };
        Ok(Self {
            comb,
            w,
            n: dims.0,
            m: dims.1,
            i_lo,
            height,
            width,
        })
    }

    pub fn combination(&self) -> Combination {
        self.comb
    }

    pub fn eta(&self) -> usize {
        self.height * self.width
    }

    pub fn mu(&self) -> u64 {
        mu(self.comb, (self.n, self.m))
    }

    pub fn diagonal(&self) -> usize {
        self.comb.diagonal(self.w)
    }

    /// Rows the first element of a pair may take, `r1`.
    pub fn first_rows(&self) -> RangeInclusive<usize> {
        first_rows(self.comb, self.n)
    }

    /// Columns the first element of a pair may take, `c1`.
    pub fn first_cols(&self) -> RangeInclusive<usize> {
        first_cols(self.comb, self.m)
    }

    /// Slot of first-element window position `(i1, j1)` in a dense
    /// per-combination array of length `eta`. Slots follow ascending output
    /// row along the diagonal.
    #[inline(always)]
    pub fn slot(&self, i1: usize, j1: usize) -> usize {
        (j1 - 1) * self.height + (i1 - self.i_lo)
    }

    /// Output `(row, col)` for slot order, i.e. the combination's full
    /// diagonal write set, ascending.
    pub fn slot_targets(&self) -> Vec<(usize, usize)> {
        let d = self.diagonal();
        let mut out = Vec::with_capacity(self.eta());
        for j1 in 1..=self.width {
            for i1 in self.i_lo..self.i_lo + self.height {
                let row = self.w.p() * (j1 - 1) + i1;
                out.push((row, row + d));
            }
        }
        out
    }

    /// Every window placement containing the pair whose first element is
    /// `(r1, c1)`, expressed as the first element's window-relative
    /// positions. The caller guarantees the pair lies inside the input.
    #[inline(always)]
    pub fn shifts(&self, r1: usize, c1: usize) -> ShiftRect {
        let p = self.w.p();
        let q = self.w.q();
        let r2 = (r1 as isize + self.comb.dr) as usize;
        let c2 = c1 + self.comb.dc as usize;
        let (r_min, r_max) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };

        let p_lo = (r_max + 1).saturating_sub(p).max(1);
        let p_hi = r_min.min(self.n - p + 1);
        let q_lo = (c2 + 1).saturating_sub(q).max(1);
        let q_hi = c1.min(self.m - q + 1);

        ShiftRect {
            i: r1 + 1 - p_hi..=r1 + 1 - p_lo,
            j: c1 + 1 - q_hi..=c1 + 1 - q_lo,
        }
    }

    /// Shift rectangle split by axis. The `i` span depends only on `r1` and
    /// the `j` span only on `c1`, so they are tabulated once: entry `k` of
    /// the first list is `(slot row offset, run length)` for the `k`-th
    /// first row, and entry `k` of the second is the zero-based half-open
    /// `j1 - 1` range for the `k`-th first column.
    pub(crate) fn shift_spans(&self) -> (Vec<Span>, Vec<Span>) {
        let (rows, cols) = (self.first_rows(), self.first_cols());
        let (r0, c0) = (*rows.start(), *cols.start());
        let row_spans = rows
            .map(|r1| {
                let i = self.shifts(r1, c0).i;
                (i.start() - self.i_lo, i.end() + 1 - i.start())
            })
            .collect();
        let col_spans = cols
            .map(|c1| {
                let j = self.shifts(r0, c1).j;
                (j.start() - 1, *j.end())
            })
            .collect();
        (row_spans, col_spans)
    }

    pub(crate) fn height(&self) -> usize {
        self.height
    }

    /// All pairs of this combination in row-major order of the first element.
    pub fn pairs(&self) -> impl Iterator<Item = ElementPair> {
        pairs_of(self.comb, (self.n, self.m))
    }

    /// Output indices for one product: initial placement first, then
    /// up-shifts innermost and left-shifts outermost. The result is
    /// ascending along the diagonal.
    pub fn write_pattern(&self, r1: usize, c1: usize) -> WritePattern {
        let rect = self.shifts(r1, c1);
        let d = self.diagonal();
        let p = self.w.p();
        let mut indices = Vec::with_capacity(rect.len());
        for j1 in rect.j.clone() {
            for i1 in rect.i.clone() {
                let row = p * (j1 - 1) + i1;
                indices.push((row, row + d));
            }
        }
        WritePattern { indices }
    }
}

fn first_rows(c: Combination, n: usize) -> RangeInclusive<usize> {
    let lo = if c.dr < 0 { 1 + c.dr.unsigned_abs() } else { 1 };
    let hi = if c.dr > 0 {
        n.saturating_sub(c.dr as usize)
    } else {
        n
    };
    lo..=hi
}

fn first_cols(c: Combination, m: usize) -> RangeInclusive<usize> {
    1..=m.saturating_sub(c.dc.unsigned_abs())
}

fn pairs_of(c: Combination, dims: (usize, usize)) -> impl Iterator<Item = ElementPair> {
    let cols = first_cols(c, dims.1);
    first_rows(c, dims.0).flat_map(move |r1| {
        cols.clone().map(move |c1| ElementPair {
            first: (r1, c1),
            second: ((r1 as isize + c.dr) as usize, (c1 as isize + c.dc) as usize),
        })
    })
}

/// All pairs of combination `c` inside an `N`x`M` input, row-major by first
/// element. The count equals `mu(c, dims)`.
pub fn enumerate_pairs(c: Combination, dims: (usize, usize)) -> Vec<ElementPair> {
    pairs_of(c, dims).collect()
}

/// Output indices the product of `pair` contributes to, one per window
/// placement containing both elements.
pub fn write_indices(
    pair: ElementPair,
    w: WindowSpec,
    dims: (usize, usize),
) -> Result<WritePattern> {
    let (n, m) = dims;
    for &(r, c) in [pair.first, pair.second].iter() {
        if r == 0 || c == 0 || r > n || c > m {
            return Err(Error::Index {
                row: r,
                col: c,
                rows: n,
                cols: m,
            });
        }
    }
    let geom = CombinationGeometry::new(pair.offset(), w, dims)?;
    Ok(geom.write_pattern(pair.first.0, pair.first.1))
}

/// Output `(row, col)` of a product for one explicit window corner, straight
/// from the column-stack definition. Returns `None` when the window does not
/// contain both elements.
pub fn index_in_window(
    pair: ElementPair,
    w: WindowSpec,
    corner: (usize, usize),
) -> Option<(usize, usize)> {
    let rel = |(r, c): (usize, usize)| -> Option<usize> {
        let i = r.checked_sub(corner.0)? + 1;
        let j = c.checked_sub(corner.1)? + 1;
        column_stack_index(i, j, w.p(), w.q()).ok()
    };
    Some((rel(pair.first)?, rel(pair.second)?))
}
