//! Averaged optimality and outer-value metrics over a time grid.
//!
//! For instance `i`, method `m` and grid time `t`, with `x̃` the last snapshot
//! at or before `t`:
//! `Δφ = (φ(x̃) − φ*_i)/max(1e-12, ‖x*_i‖²)` and `Δω = 1 − ω(x̃)/ω_max^i`,
//! where `x*_i` is the snapshot with the lowest φ over all methods and
//! `ω_max^i` the largest ω over all methods and snapshots. Both are averaged
//! over instances.

use std::fmt::Write as _;

use italex_core::italex::{Snapshot, SolveReport};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Denominator floor for `‖x*‖²`.
pub const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAxis {
    #[default]
    Iterations,
    WallClockMs,
}

impl TimeAxis {
    fn of(&self, s: &Snapshot) -> f64 {
        match self {
            TimeAxis::Iterations => s.iteration as f64,
            TimeAxis::WallClockMs => s.t_ms,
        }
    }
}

/// A report under the label it is aggregated by.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledRun {
    pub label: String,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub t: f64,
    pub method: String,
    pub delta_phi: f64,
    pub delta_omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub rows: Vec<MetricRow>,
    /// Instances whose `‖x*‖²` fell below [`NORM_FLOOR`].
    pub floored_instances: Vec<usize>,
}

impl MetricSeries {
    /// Rows of one method in grid order.
    pub fn method<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a MetricRow> + 'a {
        self.rows.iter().filter(move |r| r.method == label)
    }

    /// The row of `label` at the last grid time.
    pub fn last<'a>(&'a self, label: &'a str) -> Option<&'a MetricRow> {
        self.method(label).last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,method,delta_phi,delta_omega\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:e},{:e}", r.t, r.method, r.delta_phi, r.delta_omega);
        }
        out
    }
}

fn at_time<'a>(snaps: &'a [Snapshot], t: f64, axis: TimeAxis) -> Option<&'a Snapshot> {
    snaps.iter().take_while(|s| axis.of(s) <= t).last()
}

/// `runs[i]` holds every method's run on instance `i`, in the same label
/// order for all instances; `phi_star[i]` is that instance's reference value.
pub fn compute_metrics(
    runs: &[Vec<LabeledRun>],
    phi_star: &[f64],
    time_grid: &[f64],
    axis: TimeAxis,
) -> Result<MetricSeries> {
    if runs.is_empty() || runs.iter().any(|r| r.is_empty()) {
        return Err(BenchError::invalid("no runs to aggregate"));
    }
    if runs.len() != phi_star.len() {
        return Err(BenchError::invalid(format!(
            "{} instances but {} reference values",
            runs.len(),
            phi_star.len()
        )));
    }
    let labels: Vec<&str> = runs[0].iter().map(|r| r.label.as_str()).collect();
    for (i, inst) in runs.iter().enumerate() {
        if inst.iter().map(|r| r.label.as_str()).ne(labels.iter().copied()) {
            return Err(BenchError::invalid(format!("instance {i} has a different method list")));
        }
        if let Some(r) = inst.iter().find(|r| r.report.snapshots.is_empty()) {
            return Err(BenchError::invalid(format!("run {} on instance {i} has no snapshots", r.label)));
        }
    }
    let mut norm_sq = Vec::with_capacity(runs.len());
    let mut omega_max = Vec::with_capacity(runs.len());
    let mut floored = Vec::new();
    for (i, inst) in runs.iter().enumerate() {
        let all = || inst.iter().flat_map(|r| r.report.snapshots.iter());
        let best = all().min_by(|a, b| a.phi.total_cmp(&b.phi)).expect("nonempty");
        if best.norm_sq < NORM_FLOOR {
            floored.push(i);
        }
        norm_sq.push(best.norm_sq.max(NORM_FLOOR));
        omega_max.push(all().map(|s| s.omega).fold(f64::NEG_INFINITY, f64::max));
    }
    if !floored.is_empty() {
        log::warn!("‖x*‖² floored at {NORM_FLOOR:e} on instances {floored:?}");
    }
    let count = runs.len() as f64;
    let mut rows = Vec::with_capacity(time_grid.len() * labels.len());
    for &t in time_grid {
        for (m, label) in labels.iter().enumerate() {
            let mut dphi = 0.0;
            let mut domega = 0.0;
            for (i, inst) in runs.iter().enumerate() {
                let snap = at_time(&inst[m].report.snapshots, t, axis).ok_or_else(|| {
                    BenchError::invalid(format!("run {label} on instance {i} has no snapshot at or before t = {t}"))
                })?;
                dphi += (snap.phi - phi_star[i]) / norm_sq[i];
                domega += if omega_max[i] == 0.0 {
                    0.0
                } else {
                    1.0 - snap.omega / omega_max[i]
                };
            }
            rows.push(MetricRow {
                t,
                method: label.to_string(),
                delta_phi: dphi / count,
                delta_omega: domega / count,
            });
        }
    }
    Ok(MetricSeries {
        rows,
        floored_instances: floored,
    })
}
