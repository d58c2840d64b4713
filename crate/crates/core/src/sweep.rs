//! Parameter sweeps reporting final-step error, solver counts and time.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{Region, TimedSetSequence};
use crate::linear::PartitionSpec;
use crate::oracle::{approx_error, true_bp_hull};
use crate::scenario::{run_pipeline, RunConfig, RunStats, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Partition budget or symbolic period.
    pub param: usize,
    pub error: f64,
    /// LPs (linear) or MILPs (nonlinear) solved.
    pub lp_count: usize,
    pub wall_ms: u128,
}

fn solver_count(stats: &RunStats) -> usize {
    match stats {
        RunStats::Linear(s) => s.bp_lps,
        RunStats::Nonlinear(s) => s.milps,
    }
}

/// Final-step error of each run against one Monte-Carlo hull, sampled
/// inside the smallest final set (every final set contains the true one).
pub fn final_errors(sc: &Scenario, runs: &[TimedSetSequence], samples: usize) -> Result<Vec<f64>> {
    let t = -(sc.config.tau() as i32);
    let domain = runs
        .iter()
        .filter_map(|s| s.get(t).and_then(Region::as_box))
        .min_by(|a, b| a.volume().total_cmp(&b.volume()))
        .ok_or_else(|| Error::DegenerateHull("every final set is empty".into()))?
        .clone();
    let net = sc.policy()?;
    let hull = true_bp_hull(&sc.system.plant(), &net, &sc.target, (-t) as usize, &domain, samples, sc.seed)?.hull;
    runs.iter()
        .map(|s| approx_error(s.get(t).unwrap_or(&Region::Empty), &hull))
        .collect()
}

fn sweep(sc: &Scenario, params: &[usize], samples: usize, set: impl Fn(&mut RunConfig, usize) -> Result<()>) -> Result<Vec<SweepRow>> {
    let net = sc.policy()?;
    let mut runs = Vec::with_capacity(params.len());
    let mut rows = Vec::with_capacity(params.len());
    for &p in params {
        let mut s = sc.clone();
        set(&mut s.config, p)?;
        s.validate()?;
        let (seq, stats) = run_pipeline(&s, &net)?;
        let wall_ms = match &stats {
            RunStats::Linear(st) => st.wall_ms,
            RunStats::Nonlinear(st) => st.wall_ms,
        };
        rows.push(SweepRow {
            param: p,
            error: f64::NAN,
            lp_count: solver_count(&stats),
            wall_ms,
        });
        runs.push(seq);
    }
    for (row, e) in rows.iter_mut().zip(final_errors(sc, &runs, samples)?) {
        row.error = e;
    }
    Ok(rows)
}

/// Guided partitioning with each budget in `budgets` (linear scenarios).
pub fn sweep_partitions(sc: &Scenario, budgets: &[usize], samples: usize) -> Result<Vec<SweepRow>> {
    sweep(sc, budgets, samples, |cfg, r| match cfg {
        RunConfig::Linear(c) => {
            c.partition = match &c.partition {
                PartitionSpec::Guided { v_m, samples, .. } => PartitionSpec::Guided {
                    r,
                    v_m: *v_m,
                    samples: *samples,
                },
                PartitionSpec::Uniform(_) => PartitionSpec::Guided {
                    r,
                    v_m: 1e-4,
                    samples: 10_000,
                },
            };
            Ok(())
        }
        RunConfig::Nonlinear(_) => Err(Error::Config("partition sweeps need a linear scenario".into())),
    })
}

/// Each symbolic period in `periods` (nonlinear scenarios).
pub fn sweep_periods(sc: &Scenario, periods: &[usize], samples: usize) -> Result<Vec<SweepRow>> {
    sweep(sc, periods, samples, |cfg, p| match cfg {
        RunConfig::Nonlinear(c) => {
            c.symbolic_period = p;
            Ok(())
        }
        RunConfig::Linear(_) => Err(Error::Config("period sweeps need a nonlinear scenario".into())),
    })
}

pub fn to_csv(param: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{param},error,lp_count,wall_ms\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.param, r.error, r.lp_count, r.wall_ms);
    }
    out
}
