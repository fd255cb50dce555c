//! Combination-based estimator.
//!
//! Each unique combination is one task: compute every product of the
//! combination exactly once and add it to each output index the product
//! reaches. Because no output index is reachable from two combinations,
//! tasks can run on separate threads and write straight into the shared
//! output with no locks or atomics on the matrix itself.
//!
//! Three modes are provided:
//!
//! * [`ExecMode::SeqDirect`] adds every product directly into the packed
//!   triangle, walking the combination's diagonal segments.
//! * [`ExecMode::SeqOptimized`] accumulates each combination into a small
//!   contiguous scratch array and copies it to its diagonal once finished.
//! * [`ExecMode::Parallel`] runs the optimized kernel on a worker pool fed
//!   from a shared queue, one combination per dispatch.

use std::marker::PhantomData;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use crate::combinations::{enumerate_unique_combinations, Combination, CombinationGeometry};
use crate::error::{Error, Result};
use crate::matrix::{
    packed_offset_unchecked, ComplexScalar, CovarianceMatrix, InputMatrix, WindowSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    SeqDirect,
    SeqOptimized,
    Parallel { threads: usize },
}

/// Order in which combinations are handed to workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispatchOrder {
    /// Descending `mu * eta`, so the longest tasks start first.
    #[default]
    LongestFirst,
    /// Plain enumeration order of the unique-combination set.
    Enumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombinationCount {
    pub combination: Combination,
    pub multiplications: u64,
    pub additions: u64,
}

/// Operations actually executed by a run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OpCounters {
    pub multiplications: u64,
    pub additions: u64,
    /// Per-combination counts in enumeration order.
    pub per_combination: Vec<CombinationCount>,
    /// Total scratch entries allocated across all workers.
    pub scratch_entries: usize,
}

impl OpCounters {
    fn from_parts(mut per: Vec<CombinationCount>, order: &[Combination], scratch: usize) -> Self {
        let rank = |c: &Combination| order.iter().position(|o| o == c).unwrap_or(usize::MAX);
        per.sort_by_key(|c| rank(&c.combination));
        Self {
            multiplications: per.iter().map(|c| c.multiplications).sum(),
            additions: per.iter().map(|c| c.additions).sum(),
            per_combination: per,
            scratch_entries: scratch,
        }
    }
}

/// Geometry for every unique combination, in enumeration order.
fn plan(w: WindowSpec, dims: (usize, usize)) -> Result<Vec<CombinationGeometry>> {
    if dims.0 == 0 || dims.1 == 0 {
        return Err(Error::EmptyMatrix);
    }
    w.validate_for(dims.0, dims.1)?;
    enumerate_unique_combinations(w)
        .into_iter()
        .map(|c| CombinationGeometry::new(c, w, dims))
        .collect()
}

fn dispatch_order(geoms: &[CombinationGeometry], order: DispatchOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..geoms.len()).collect();
    if order == DispatchOrder::LongestFirst {
        // stable: equal costs keep enumeration order
        idx.sort_by_key(|&k| std::cmp::Reverse(geoms[k].mu() * geoms[k].eta() as u64));
    }
    idx
}

fn max_eta(geoms: &[CombinationGeometry]) -> usize {
    geoms
        .iter()
        .map(CombinationGeometry::eta)
        .max()
        .unwrap_or(0)
}

/// Accumulates one combination into `scratch[..eta]`, slot order.
fn accumulate(
    a: &InputMatrix,
    g: &CombinationGeometry,
    scratch: &mut [ComplexScalar],
) -> CombinationCount {
    let comb = g.combination();
    let scratch = &mut scratch[..g.eta()];
    scratch.fill(ComplexScalar::default());
    let (row_spans, col_spans) = g.shift_spans();
    let height = g.height();
    let cols = a.cols();
    let c_first = *g.first_cols().start();
    let width = g.eta() / height;

    // Products of one first row reaching window column `j` form a contiguous
    // run of `c1`, since both ends of the `j` span grow with `c1`.
    let mut by_col = vec![(usize::MAX, 0usize); width];
    for (k, &(j_lo, j_hi)) in col_spans.iter().enumerate() {
        for span in &mut by_col[j_lo..j_hi] {
            span.0 = span.0.min(k);
            span.1 = k + 1;
        }
    }

    let mut vals = vec![ComplexScalar::default(); col_spans.len()];
    let (mut mults, mut adds) = (0u64, 0u64);
    for (r1, &(i_off, run)) in g.first_rows().zip(&row_spans) {
        let r2 = (r1 as isize + comb.dr) as usize;
        let row1 = &a.data()[(r1 - 1) * cols + c_first - 1..][..vals.len()];
        let row2 = &a.data()[(r2 - 1) * cols + c_first - 1 + comb.dc as usize..][..vals.len()];
        for (v, (x, y)) in vals.iter_mut().zip(row1.iter().zip(row2)) {
            *v = x * y.conj();
        }
        mults += vals.len() as u64;
        // Each slot still receives its products one at a time in `c1`
        // order, so the sums match the product-by-product kernel bitwise.
        for (j, &(k0, k1)) in by_col.iter().enumerate() {
            if k0 >= k1 {
                continue;
            }
            let vs = &vals[k0..k1];
            add_in_lanes(&mut scratch[j * height + i_off..][..run], vs);
            adds += (run * vs.len()) as u64;
        }
    }
    CombinationCount {
        combination: comb,
        multiplications: mults,
        additions: adds,
    }
}

/// Adds every value of `vs`, in order, to each slot. Slots are independent,
/// so they are processed in fixed-width lanes to overlap add latency.
#[inline(always)]
fn add_in_lanes(mut slots: &mut [ComplexScalar], vs: &[ComplexScalar]) {
    while slots.len() >= 8 {
        let (head, tail) = slots.split_at_mut(8);
        add_lane::<8>(head, vs);
        slots = tail;
    }
    if slots.len() >= 4 {
        let (head, tail) = slots.split_at_mut(4);
        add_lane::<4>(head, vs);
        slots = tail;
    }
    if slots.len() >= 2 {
        let (head, tail) = slots.split_at_mut(2);
        add_lane::<2>(head, vs);
        slots = tail;
    }
    if !slots.is_empty() {
        add_lane::<1>(slots, vs);
    }
}

#[inline(always)]
fn add_lane<const L: usize>(slots: &mut [ComplexScalar], vs: &[ComplexScalar]) {
    let mut acc: [ComplexScalar; L] = slots.try_into().expect("lane width");
    for v in vs {
        for x in &mut acc {
            *x += v;
        }
    }
    slots.copy_from_slice(&acc);
}

/// Packed offsets of a combination's slots.
fn scatter_offsets(g: &CombinationGeometry, dim: usize) -> impl Iterator<Item = usize> + '_ {
    g.slot_targets()
        .into_iter()
        .map(move |(r, c)| packed_offset_unchecked(r, c, dim))
}

fn run_direct(a: &InputMatrix, w: WindowSpec) -> Result<(CovarianceMatrix, OpCounters)> {
    let geoms = plan(w, a.dims())?;
    let dim = w.dim();
    let p = w.p();
    let mut out = CovarianceMatrix::zeros(dim)?;
    let packed = out.packed_mut();
    let mut per = Vec::with_capacity(geoms.len());
    for g in &geoms {
        let comb = g.combination();
        let d = g.diagonal();
        let (mut mults, mut adds) = (0u64, 0u64);
        for r1 in g.first_rows() {
            let r2 = (r1 as isize + comb.dr) as usize;
            for c1 in g.first_cols() {
                let val = a.at(r1, c1) * a.at(r2, c1 + comb.dc as usize).conj();
                mults += 1;
                let rect = g.shifts(r1, c1);
                for j in rect.j {
                    for i in rect.i.clone() {
                        let row = p * (j - 1) + i;
                        packed[packed_offset_unchecked(row, row + d, dim)] += val;
                        adds += 1;
                    }
                }
            }
        }
        per.push(CombinationCount {
            combination: comb,
            multiplications: mults,
            additions: adds,
        });
    }
    let order: Vec<_> = geoms.iter().map(|g| g.combination()).collect();
    Ok((out, OpCounters::from_parts(per, &order, 0)))
}

pub fn estimate_seq_optimized(
    a: &InputMatrix,
    w: WindowSpec,
) -> Result<(CovarianceMatrix, OpCounters)> {
    let geoms = plan(w, a.dims())?;
    let dim = w.dim();
    let mut out = CovarianceMatrix::zeros(dim)?;
    let mut scratch = vec![ComplexScalar::default(); max_eta(&geoms)];
    let mut per = Vec::with_capacity(geoms.len());
    let packed = out.packed_mut();
    for g in &geoms {
        per.push(accumulate(a, g, &mut scratch));
        for (k, off) in scatter_offsets(g, dim).enumerate() {
            packed[off] = scratch[k];
        }
    }
    let order: Vec<_> = geoms.iter().map(|g| g.combination()).collect();
    Ok((out, OpCounters::from_parts(per, &order, scratch.len())))
}

/// Shared view of packed output storage that workers write through without
/// synchronization.
///
/// Sound only while every offset is written by at most one task: each task
/// covers one combination, and distinct combinations own disjoint output
/// indices. Nothing reads the storage until all workers have joined.
struct DisjointOutput<'a> {
    ptr: *mut ComplexScalar,
    len: usize,
    _borrow: PhantomData<&'a mut [ComplexScalar]>,
}

unsafe impl Send for DisjointOutput<'_> {}
unsafe impl Sync for DisjointOutput<'_> {}

impl<'a> DisjointOutput<'a> {
    fn new(slice: &'a mut [ComplexScalar]) -> Self {
        Self {
            ptr: slice.as_mut_ptr(),
            len: slice.len(),
            _borrow: PhantomData,
        }
    }

    /// # Safety
    /// No other thread may access `offset` for the lifetime of `self`.
    #[inline(always)]
    unsafe fn store(&self, offset: usize, value: ComplexScalar) {
        assert!(offset < self.len);
        unsafe { self.ptr.add(offset).write(value) };
    }
}

/// Runs `(matrix, combination)` tasks on `threads` workers pulling from one
/// queue. Returns per-matrix counts in completion order plus scratch size.
fn run_pool(
    inputs: &[&InputMatrix],
    outputs: &mut [CovarianceMatrix],
    geoms: &[CombinationGeometry],
    tasks: &[(usize, usize)],
    threads: usize,
) -> (Vec<Vec<CombinationCount>>, usize) {
    let dim = outputs[0].dim();
    let sinks: Vec<DisjointOutput<'_>> = outputs
        .iter_mut()
        .map(|c| DisjointOutput::new(c.packed_mut()))
        .collect();
    let next = AtomicUsize::new(0);
    let scratch_len = max_eta(geoms);
    let workers = threads.min(tasks.len()).max(1);

    let per_worker: Vec<Vec<(usize, CombinationCount)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                let (sinks, next) = (&sinks, &next);
                s.spawn(move || {
                    let mut scratch = vec![ComplexScalar::default(); scratch_len];
                    let mut done = Vec::new();
                    loop {
                        let t = next.fetch_add(1, Ordering::Relaxed);
                        let Some(&(mat, comb)) = tasks.get(t) else {
                            break;
                        };
                        let g = &geoms[comb];
                        let count = accumulate(inputs[mat], g, &mut scratch);
                        for (k, off) in scatter_offsets(g, dim).enumerate() {
                            // SAFETY: `off` belongs to combination `comb` of
                            // matrix `mat`, and each such task is dequeued once.
                            unsafe { sinks[mat].store(off, scratch[k]) };
                        }
                        done.push((mat, count));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("estimator worker panicked"))
            .collect()
    });

    let mut per_matrix = vec![Vec::new(); inputs.len()];
    for (mat, count) in per_worker.into_iter().flatten() {
        per_matrix[mat].push(count);
    }
    (per_matrix, workers * scratch_len)
}

pub fn estimate_parallel(
    a: &InputMatrix,
    w: WindowSpec,
    threads: usize,
) -> Result<(CovarianceMatrix, OpCounters)> {
    estimate_parallel_with(a, w, threads, DispatchOrder::default())
}

pub fn estimate_parallel_with(
    a: &InputMatrix,
    w: WindowSpec,
    threads: usize,
    order: DispatchOrder,
) -> Result<(CovarianceMatrix, OpCounters)> {
    check_threads(threads)?;
    let geoms = plan(w, a.dims())?;
    let mut outputs = vec![CovarianceMatrix::zeros(w.dim())?];
    let tasks: Vec<_> = dispatch_order(&geoms, order)
        .into_iter()
        .map(|k| (0, k))
        .collect();
    let (mut per, scratch) = run_pool(&[a], &mut outputs, &geoms, &tasks, threads);
    let enumeration: Vec<_> = geoms.iter().map(|g| g.combination()).collect();
    let counters = OpCounters::from_parts(per.pop().unwrap_or_default(), &enumeration, scratch);
    Ok((outputs.pop().expect("one output"), counters))
}

fn check_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Err(Error::Parameter("thread count must be at least 1".into()));
    }
    Ok(())
}

pub fn estimate_combinations(
    a: &InputMatrix,
    w: WindowSpec,
    mode: ExecMode,
) -> Result<(CovarianceMatrix, OpCounters)> {
    match mode {
        ExecMode::SeqDirect => run_direct(a, w),
        ExecMode::SeqOptimized => estimate_seq_optimized(a, w),
        ExecMode::Parallel { threads } => estimate_parallel(a, w, threads),
    }
}

/// The `(matrix index, combination)` task list a batch run dispatches, in
/// dispatch order.
pub fn batch_tasks(
    batch: usize,
    w: WindowSpec,
    dims: (usize, usize),
    order: DispatchOrder,
) -> Result<Vec<(usize, Combination)>> {
    let geoms = plan(w, dims)?;
    Ok(batch_task_indices(batch, &geoms, order)
        .into_iter()
        .map(|(m, k)| (m, geoms[k].combination()))
        .collect())
}

fn batch_task_indices(
    batch: usize,
    geoms: &[CombinationGeometry],
    order: DispatchOrder,
) -> Vec<(usize, usize)> {
    let per_matrix = dispatch_order(geoms, order);
    match order {
        // interleave matrices so equal-cost tasks of every matrix run together
        DispatchOrder::LongestFirst => per_matrix
            .iter()
            .flat_map(|&k| (0..batch).map(move |m| (m, k)))
            .collect(),
        DispatchOrder::Enumeration => (0..batch)
            .flat_map(|m| per_matrix.iter().map(move |&k| (m, k)))
            .collect(),
    }
}

/// Several same-shape matrices estimated from one shared task pool.
pub fn estimate_batch(
    matrices: &[InputMatrix],
    w: WindowSpec,
    threads: usize,
) -> Result<Vec<CovarianceMatrix>> {
    check_threads(threads)?;
    let Some(first) = matrices.first() else {
        return Ok(Vec::new());
    };
    let dims = first.dims();
    if let Some(bad) = matrices.iter().find(|a| a.dims() != dims) {
        return Err(Error::HeterogeneousBatch {
            expected: dims,
            got: bad.dims(),
        });
    }
    let geoms = plan(w, dims)?;
    let mut outputs = (0..matrices.len())
        .map(|_| CovarianceMatrix::zeros(w.dim()))
        .collect::<Result<Vec<_>>>()?;
    let tasks = batch_task_indices(matrices.len(), &geoms, DispatchOrder::default());
    let inputs: Vec<&InputMatrix> = matrices.iter().collect();
    run_pool(&inputs, &mut outputs, &geoms, &tasks, threads);
    Ok(outputs)
}

/// Wall time of each combination under the optimized sequential kernel,
/// minimum over `repeats` runs, in enumeration order.
pub fn time_combinations(
    a: &InputMatrix,
    w: WindowSpec,
    repeats: usize,
) -> Result<Vec<(Combination, Duration)>> {
    let geoms = plan(w, a.dims())?;
    let mut scratch = vec![ComplexScalar::default(); max_eta(&geoms)];
    let mut sink = ComplexScalar::default();
    let mut out = Vec::with_capacity(geoms.len());
    for g in &geoms {
        let mut best = Duration::MAX;
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            accumulate(a, g, &mut scratch);
            best = best.min(start.elapsed());
            sink += scratch[0];
        }
        out.push((g.combination(), best));
    }
    std::hint::black_box(sink);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::closed_form_counts;
    use crate::baseline::{estimate_naive, executed_naive_ops};

    fn w(p: usize, q: usize) -> WindowSpec {
        WindowSpec::new(p, q).unwrap()
    }

    const MODES: [ExecMode; 4] = [
        ExecMode::SeqDirect,
        ExecMode::SeqOptimized,
        ExecMode::Parallel { threads: 1 },
        ExecMode::Parallel { threads: 3 },
    ];

    #[test]
    fn zeros_still_execute_every_product() {
        let a = InputMatrix::zeros(6, 5).unwrap();
        for mode in MODES {
            let (c, ops) = estimate_combinations(&a, w(3, 2), mode).unwrap();
            assert!(c.packed().iter().all(|z| *z == ComplexScalar::default()));
            assert_eq!(
                ops.multiplications,
                closed_form_counts(6, 5, 3, 2).unwrap().um
            );
        }
    }

    #[test]
    fn single_element() {
        let a = InputMatrix::new(1, 1, vec![ComplexScalar::new(2.0, 1.0)]).unwrap();
        for mode in MODES {
            let (c, ops) = estimate_combinations(&a, w(1, 1), mode).unwrap();
            assert_eq!(c.packed(), &[ComplexScalar::new(5.0, 0.0)]);
            assert_eq!(ops.multiplications, 1);
            assert_eq!(ops.additions, 1);
        }
    }

    #[test]
    fn all_modes_match_naive_at_20_8() {
        let a = InputMatrix::random(20, 20, 2024).unwrap();
        let naive = estimate_naive(&a, w(8, 8)).unwrap();
        for mode in MODES {
            let (c, _) = estimate_combinations(&a, w(8, 8), mode).unwrap();
            assert!(
                c.relative_frobenius_distance(&naive).unwrap() < 1e-10,
                "{mode:?}"
            );
        }
    }

    #[test]
    fn counters_at_32_13() {
        let a = InputMatrix::random(32, 32, 5).unwrap();
        let (_, ops) = estimate_seq_optimized(&a, w(13, 13)).unwrap();
        assert_eq!(ops.multiplications, 207_880);
        assert_eq!(ops.per_combination.len(), 313);
        assert_eq!(
            ops.per_combination
                .iter()
                .map(|c| c.multiplications)
                .sum::<u64>(),
            ops.multiplications
        );
        // every (window, upper-triangle index) contribution is added once
        assert_eq!(
            ops.additions,
            executed_naive_ops((32, 32), w(13, 13)).unwrap().1
        );
        assert_eq!(ops.scratch_entries, 169);
    }

    #[test]
    fn direct_and_optimized_are_bitwise_equal() {
        for (n, m, p, q) in [(9, 7, 3, 4), (12, 12, 5, 5), (5, 1, 2, 1)] {
            let a = InputMatrix::random(n, m, 77).unwrap();
            let (d, dops) = estimate_combinations(&a, w(p, q), ExecMode::SeqDirect).unwrap();
            let (o, oops) = estimate_seq_optimized(&a, w(p, q)).unwrap();
            assert!(d.bitwise_eq(&o));
            assert_eq!(dops.per_combination, oops.per_combination);
        }
    }

    #[test]
    fn parallel_is_schedule_independent() {
        let a = InputMatrix::random(32, 32, 9).unwrap();
        let (seq, seq_ops) = estimate_seq_optimized(&a, w(13, 13)).unwrap();
        for threads in [1, 2, 4, 7] {
            for order in [DispatchOrder::LongestFirst, DispatchOrder::Enumeration] {
                let (c, ops) = estimate_parallel_with(&a, w(13, 13), threads, order).unwrap();
                assert!(c.bitwise_eq(&seq), "threads={threads} {order:?}");
                assert_eq!(ops.per_combination, seq_ops.per_combination);
                assert_eq!(ops.scratch_entries, threads * 169);
            }
        }
    }

    #[test]
    fn zero_threads_rejected() {
        let a = InputMatrix::random(4, 4, 1).unwrap();
        assert!(matches!(
            estimate_parallel(&a, w(2, 2), 0),
            Err(Error::Parameter(_))
        ));
        assert!(estimate_batch(&[a], w(2, 2), 0).is_err());
    }

    #[test]
    fn invalid_window_rejected() {
        let a = InputMatrix::random(4, 4, 1).unwrap();
        for mode in MODES {
            assert!(matches!(
                estimate_combinations(&a, w(5, 2), mode),
                Err(Error::InvalidWindow { .. })
            ));
        }
    }

    #[test]
    fn batch_matches_individual_runs() {
        let mats: Vec<_> = (0..3)
            .map(|s| InputMatrix::random(10, 9, s).unwrap())
            .collect();
        let out = estimate_batch(&mats, w(4, 3), 3).unwrap();
        for (a, c) in mats.iter().zip(&out) {
            let (single, _) = estimate_parallel(a, w(4, 3), 1).unwrap();
            assert!(c.bitwise_eq(&single));
        }
        let twins = vec![mats[0].clone(), mats[0].clone()];
        let out = estimate_batch(&twins, w(4, 3), 2).unwrap();
        assert!(out[0].bitwise_eq(&out[1]));
    }

    #[test]
    fn batch_rejects_mixed_shapes() {
        let mats = vec![
            InputMatrix::random(6, 6, 1).unwrap(),
            InputMatrix::random(6, 5, 2).unwrap(),
        ];
        assert!(matches!(
            estimate_batch(&mats, w(2, 2), 2),
            Err(Error::HeterogeneousBatch { .. })
        ));
    }

    #[test]
    fn batch_task_count() {
        let tasks = batch_tasks(2, w(13, 13), (32, 32), DispatchOrder::default()).unwrap();
        assert_eq!(tasks.len(), 626);
        let unique: std::collections::HashSet<_> = tasks.iter().collect();
        assert_eq!(unique.len(), 626);
    }

    #[test]
    fn longest_first_starts_with_the_main_diagonal() {
        let tasks = batch_tasks(1, w(5, 5), (12, 12), DispatchOrder::LongestFirst).unwrap();
        assert_eq!(tasks[0].1, Combination::new(0, 0));
    }

    #[test]
    fn timing_covers_every_combination() {
        let a = InputMatrix::random(12, 12, 3).unwrap();
        let t = time_combinations(&a, w(4, 4), 1).unwrap();
        assert_eq!(t.len(), 16 + 9);
    }
}
