//! Greedy list-scheduling simulator over per-combination task costs.
//!
//! Tasks are handed out in policy order; each goes to whichever core frees
//! up first (lowest index on ties). Costs are integer work units, so every
//! run is exact and reproducible.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt::Write as _;

use crate::combinations::{
    enumerate_unique_combinations, eta, mu, unique_combination_count, Combination,
};
use crate::error::{Error, Result};
use crate::matrix::WindowSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskCost {
    /// Matrix index within a batch; 0 for single-matrix runs.
    pub matrix: usize,
    pub combination: Combination,
    pub cost: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    /// Input order.
    Fifo,
    /// Descending cost, input order on ties.
    #[default]
    LongestFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub start: u64,
    pub core: usize,
    /// Index into the simulated task list.
    pub task: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedResult {
    pub cores: usize,
    pub makespan: u64,
    pub per_core_busy: Vec<u64>,
    /// Time a single core would need, dispatch overhead included.
    pub serial_total: u64,
    pub speedup: f64,
    pub trace: Vec<Assignment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Near-linear: speedup at least 95% of the core count.
    NearOptimal,
    SubLinear,
    /// Starvation: the extra cores bought less than 1%.
    Starvation,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::NearOptimal => "I",
            Region::SubLinear => "II",
            Region::Starvation => "III",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub cores: usize,
    pub makespan: u64,
    pub speedup: f64,
    pub region: Region,
}

/// Modeled task list: one task per (matrix, combination) with cost
/// `mu * (1 + eta)`, i.e. one multiplication plus up to `eta` additions per
/// product.
pub fn model_costs(w: WindowSpec, dims: (usize, usize), batch: usize) -> Result<Vec<TaskCost>> {
    w.validate_for(dims.0, dims.1)?;
    if batch == 0 {
        return Err(Error::Parameter("batch must be at least 1".into()));
    }
    let combos = enumerate_unique_combinations(w);
    let mut out = Vec::with_capacity(combos.len() * batch);
    for matrix in 0..batch {
        for &c in &combos {
            out.push(TaskCost {
                matrix,
                combination: c,
                cost: mu(c, dims) * (1 + eta(c, w) as u64),
            });
        }
    }
    Ok(out)
}

pub fn simulate(tasks: &[TaskCost], cores: usize, policy: Policy) -> Result<SchedResult> {
    simulate_with_overhead(tasks, cores, policy, 0)
}

/// As [`simulate`], with a fixed cost charged for every dispatch.
pub fn simulate_with_overhead(
    tasks: &[TaskCost],
    cores: usize,
    policy: Policy,
    dispatch_overhead: u64,
) -> Result<SchedResult> {
    if tasks.is_empty() {
        return Err(Error::Parameter("empty task list".into()));
    }
    if cores == 0 {
        return Err(Error::Parameter("core count must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    if policy == Policy::LongestFirst {
        order.sort_by_key(|&k| Reverse(tasks[k].cost));
    }

    let mut free: BinaryHeap<Reverse<(u64, usize)>> = (0..cores).map(|c| Reverse((0, c))).collect();
    let mut busy = vec![0u64; cores];
    let mut trace = Vec::with_capacity(tasks.len());
    let mut makespan = 0;
    for k in order {
        let Reverse((start, core)) = free.pop().expect("at least one core");
        let len = tasks[k].cost + dispatch_overhead;
        busy[core] += len;
        makespan = makespan.max(start + len);
        trace.push(Assignment {
            start,
            core,
            task: k,
        });
        free.push(Reverse((start + len, core)));
    }
    let serial_total: u64 = busy.iter().sum();
    let speedup = if makespan == 0 {
        1.0
    } else {
        serial_total as f64 / makespan as f64
    };
    Ok(SchedResult {
        cores,
        makespan,
        per_core_busy: busy,
        serial_total,
        speedup,
        trace,
    })
}

/// Speedup at each core count, classified into the three scaling regions.
pub fn sweep(tasks: &[TaskCost], core_counts: &[usize], policy: Policy) -> Result<Vec<SweepPoint>> {
    if core_counts.is_empty() {
        return Err(Error::Parameter("empty core-count list".into()));
    }
    let mut out: Vec<SweepPoint> = Vec::with_capacity(core_counts.len());
    for &cores in core_counts {
        let r = simulate(tasks, cores, policy)?;
        let region = if r.speedup >= 0.95 * cores as f64 {
            Region::NearOptimal
        } else if out
            .last()
            .is_some_and(|prev| prev.cores < cores && r.speedup < prev.speedup * 1.01)
        {
            Region::Starvation
        } else {
            Region::SubLinear
        };
        out.push(SweepPoint {
            cores,
            makespan: r.makespan,
            speedup: r.speedup,
            region,
        });
    }
    Ok(out)
}

pub const SWEEP_CSV_HEADER: &str = "cores,makespan,speedup,region";
pub const TRACE_CSV_HEADER: &str = "task_id,dr,dc,cost";

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{:.6},{}",
            p.cores,
            p.makespan,
            p.speedup,
            p.region.label()
        );
    }
    out
}

/// Cost trace with task ids assigned in list order.
pub fn cost_trace_csv(tasks: &[TaskCost]) -> String {
    let mut out = format!("{TRACE_CSV_HEADER}\n");
    for (id, t) in tasks.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            id, t.combination.dr, t.combination.dc, t.cost
        );
    }
    out
}

/// Parses a cost trace. Task `id` belongs to matrix `id / |UC|`; the file
/// must hold exactly `|UC| * batch` tasks with distinct ids.
pub fn ingest_measured_costs(text: &str, w: WindowSpec, batch: usize) -> Result<Vec<TaskCost>> {
    let per_matrix = unique_combination_count(w);
    let expected = per_matrix * batch;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {TRACE_CSV_HEADER:?}"),
            })
        }
    }

    let mut rows: Vec<(usize, TaskCost)> = Vec::with_capacity(expected);
    let mut seen = HashSet::new();
    for (k, line) in lines {
        let line_no = k + 1;
        let bad = |msg: String| Error::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [id, dr, dc, cost] = fields[..] else {
            return Err(bad(format!("expected 4 fields, got {}", fields.len())));
        };
        let id: usize = id.parse().map_err(|e| bad(format!("task_id: {e}")))?;
        let dr: isize = dr.parse().map_err(|e| bad(format!("dr: {e}")))?;
        let dc: isize = dc.parse().map_err(|e| bad(format!("dc: {e}")))?;
        let cost: i64 = cost.parse().map_err(|e| bad(format!("cost: {e}")))?;
        if cost < 0 {
            return Err(bad(format!("negative cost {cost}")));
        }
        let combination = Combination::new(dr, dc);
        if !combination.is_unique_for(w) {
            return Err(bad(format!("({dr}, {dc}) is not a unique combination")));
        }
        if id >= expected || !seen.insert(id) {
            return Err(bad(format!("task_id {id} duplicated or out of range")));
        }
        rows.push((
            id,
            TaskCost {
                matrix: id / per_matrix,
                combination,
                cost: cost as u64,
            },
        ));
    }
    if rows.len() != expected {
        return Err(Error::Parameter(format!(
            "trace holds {} tasks, expected {expected}",
            rows.len()
        )));
    }
    rows.sort_by_key(|(id, _)| *id);
    Ok(rows.into_iter().map(|(_, t)| t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(p: usize, q: usize) -> WindowSpec {
        WindowSpec::new(p, q).unwrap()
    }

    fn tasks(costs: &[u64]) -> Vec<TaskCost> {
        costs
            .iter()
            .map(|&cost| TaskCost {
                matrix: 0,
                combination: Combination::new(0, 0),
                cost,
            })
            .collect()
    }

    #[test]
    fn model_sizes() {
        assert_eq!(model_costs(w(13, 13), (32, 32), 1).unwrap().len(), 313);
        assert_eq!(model_costs(w(13, 13), (32, 32), 2).unwrap().len(), 626);
        assert_eq!(model_costs(w(1, 1), (4, 4), 1).unwrap().len(), 1);
        assert!(model_costs(w(1, 1), (4, 4), 0).is_err());
    }

    #[test]
    fn one_core_is_serial() {
        let t = model_costs(w(5, 4), (11, 9), 1).unwrap();
        for policy in [Policy::Fifo, Policy::LongestFirst] {
            assert_eq!(simulate(&t, 1, policy).unwrap().speedup, 1.0);
        }
    }

    #[test]
    fn equal_tasks_split_evenly() {
        let r = simulate(&tasks(&[5, 5, 5, 5]), 2, Policy::Fifo).unwrap();
        assert_eq!(r.makespan, 10);
        assert_eq!(r.speedup, 2.0);
        assert_eq!(r.per_core_busy, vec![10, 10]);
    }

    #[test]
    fn ties_go_to_the_lowest_core() {
        let r = simulate(&tasks(&[3, 3, 1]), 3, Policy::Fifo).unwrap();
        let cores: Vec<_> = r.trace.iter().map(|a| a.core).collect();
        assert_eq!(cores, vec![0, 1, 2]);
        let r = simulate(&tasks(&[2, 2, 1]), 2, Policy::Fifo).unwrap();
        assert_eq!(
            r.trace[2],
            Assignment {
                start: 2,
                core: 0,
                task: 2
            }
        );
    }

    #[test]
    fn longest_first_orders_by_cost() {
        let r = simulate(&tasks(&[1, 9, 4]), 1, Policy::LongestFirst).unwrap();
        let order: Vec<_> = r.trace.iter().map(|a| a.task).collect();
        assert_eq!(order, vec![1, 2, 0]);
    }

    #[test]
    fn errors() {
        assert!(simulate(&[], 2, Policy::Fifo).is_err());
        assert!(simulate(&tasks(&[1]), 0, Policy::Fifo).is_err());
        assert!(sweep(&tasks(&[1]), &[], Policy::Fifo).is_err());
    }

    #[test]
    fn dispatch_overhead_is_charged_per_task() {
        let r = simulate_with_overhead(&tasks(&[4, 4]), 2, Policy::Fifo, 1).unwrap();
        assert_eq!(r.makespan, 5);
        assert_eq!(r.serial_total, 10);
    }

    #[test]
    fn sweep_single_point() {
        let pts = sweep(&tasks(&[3, 1, 2]), &[1], Policy::Fifo).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(
            (pts[0].cores, pts[0].speedup, pts[0].region),
            (1, 1.0, Region::NearOptimal)
        );
    }

    #[test]
    fn modeled_113_tasks_scale_linearly_to_16_cores() {
        let t = model_costs(w(8, 8), (20, 20), 1).unwrap();
        let cores: Vec<_> = (1..=16).collect();
        for p in sweep(&t, &cores, Policy::LongestFirst).unwrap() {
            assert_eq!(p.region, Region::NearOptimal, "{p:?}");
        }
    }

    #[test]
    fn modeled_313_tasks_at_128_cores() {
        let one = model_costs(w(13, 13), (32, 32), 1).unwrap();
        let two = model_costs(w(13, 13), (32, 32), 2).unwrap();
        let s1 = simulate(&one, 128, Policy::LongestFirst).unwrap().speedup;
        let s2 = simulate(&two, 128, Policy::LongestFirst).unwrap().speedup;
        assert!(s1 > 64.0 && s1 < 128.0, "{s1}");
        assert!(s2 > s1);
    }

    #[test]
    fn trace_round_trip_and_rejections() {
        let t = model_costs(w(3, 3), (6, 6), 2).unwrap();
        let text = cost_trace_csv(&t);
        assert_eq!(ingest_measured_costs(&text, w(3, 3), 2).unwrap(), t);
        assert!(ingest_measured_costs(&text, w(3, 3), 1).is_err());

        let negative = text.replacen(",0,0,", ",0,0,-", 1);
        let err = ingest_measured_costs(&negative, w(3, 3), 2).unwrap_err();
        assert!(err.to_string().contains("negative"), "{err}");

        assert!(ingest_measured_costs("id,dr,dc,cost\n", w(3, 3), 1).is_err());
        let not_uc = format!("{TRACE_CSV_HEADER}\n0,0,-1,5\n");
        assert!(ingest_measured_costs(&not_uc, w(1, 2), 1).is_err());
        let dup = format!("{TRACE_CSV_HEADER}\n0,0,0,5\n0,0,0,5\n");
        assert!(ingest_measured_costs(&dup, w(1, 1), 2).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let pts = sweep(&tasks(&[2, 2]), &[1, 2, 3], Policy::Fifo).unwrap();
        let csv = sweep_csv(&pts);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines[1], "1,4,1.000000,I");
        assert_eq!(lines[2], "2,2,2.000000,I");
        assert_eq!(lines[3], "3,2,2.000000,III");
    }

    proptest! {
        #[test]
        fn scheduling_invariants(
            costs in proptest::collection::vec(0u64..1000, 1..40),
            policy in prop_oneof![Just(Policy::Fifo), Just(Policy::LongestFirst)],
        ) {
            prop_assume!(costs.iter().any(|&c| c > 0));
            let t = tasks(&costs);
            let total: u64 = costs.iter().sum();
            let longest = *costs.iter().max().unwrap();
            let mut prev: Option<SchedResult> = None;
            for cores in 1..=costs.len() + 3 {
                let r = simulate(&t, cores, policy).unwrap();
                prop_assert_eq!(r.per_core_busy.iter().sum::<u64>(), total);
                prop_assert!(r.makespan >= longest);
                prop_assert!(r.makespan as u128 * cores as u128 >= total as u128);
                prop_assert!(r.speedup <= cores as f64 + 1e-12);
                if let Some(p) = &prev {
                    prop_assert!(r.makespan <= p.makespan);
                }
                if cores >= costs.len() {
                    prop_assert_eq!(r.makespan, longest);
                }
                prev = Some(r);
            }
        }
    }
}
