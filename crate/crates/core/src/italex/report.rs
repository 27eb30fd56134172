use serde::{Deserialize, Serialize};

use crate::oracles::OracleRecord;
use crate::steps::StepRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// The tolerance target was met.
    Converged,
    /// A caller-imposed iteration budget stopped the run first.
    BudgetReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    pub snapshot_period: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration_budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub eps: f64,
    pub phi_bar: f64,
    pub oracle_calls: usize,
    pub step_iters: usize,
    /// Iterations spent by the inner solver computing φ̄.
    pub inner_solver_iters: usize,
    /// The fixed-tolerance run was skipped because the carried-over point
    /// already met the round's tolerance.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub t_ms: f64,
    pub phi: f64,
    pub omega: f64,
    /// `‖x‖²`, used to normalize inner gaps.
    pub norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub phi: f64,
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Distance to `Lev_ω(ω*)` when ω* is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feas_dist: Option<f64>,
    pub oracle_calls: usize,
    pub step_iterations: usize,
}

/// Everything a solve produces, in a JSON-friendly form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub config: ReportConfig,
    pub status: SolveStatus,
    pub rounds: Vec<RoundRecord>,
    pub alpha_trace: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    #[serde(rename = "final")]
    pub final_summary: FinalSummary,
    pub x_final: Vec<f64>,
    pub z_final: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub oracle_log: Vec<OracleRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub step_log: Vec<StepRecord>,
}

impl SolveReport {
    pub fn rounds_count(&self) -> usize {
        self.rounds.len()
    }

    pub fn oracle_calls(&self) -> usize {
        self.final_summary.oracle_calls
    }

    pub fn step_iterations(&self) -> usize {
        self.final_summary.step_iterations
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
