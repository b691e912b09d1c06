//! Run traces shared by the distributed engines.
//!
//! Per-step scalars (losses, network errors, consensus residuals) are kept
//! for every step so the analysis invariants can be checked after the
//! fact; full iterate vectors are stored only every `record_every` steps to
//! keep memory flat on long runs. Round boundaries (or, for round-free
//! algorithms, the requested mark steps) snapshot the per-node averages that
//! the convergence guarantees are actually about.

use std::io::Write;

use crate::error::Result;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Dogd,
    Dda,
    SerialLazy,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Dogd => "dogd",
            Algorithm::Dda => "dda",
            Algorithm::SerialLazy => "serial_lazy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Online,
    Batch,
    Stochastic,
}

/// Scalar diagnostics captured at every step.
#[derive(Debug, Clone)]
pub struct StepStats {
    /// Round index (1-based); 0 for round-free algorithms.
    pub round: usize,
    /// In-round step (1-based); equals `global_step` when round-free.
    pub in_round_t: usize,
    pub global_step: usize,
    pub step_size: f64,
    /// ||z_i - z_bar|| per node, after the step.
    pub net_err: Vec<f64>,
    /// Network-error bound for this step's round, when the algorithm has one.
    pub net_err_bound: Option<f64>,
    /// Residual of the network-average recursion at this step.
    pub consensus_residual: f64,
    /// Per-node online loss f_i^t evaluated at the iterate the subgradient
    /// was taken at (the regret increments before subtracting the
    /// hindsight-optimal loss).
    pub online_loss: Vec<f64>,
}

/// Full iterates at a recorded step.
#[derive(Debug, Clone)]
pub struct RecordedStep {
    pub global_step: usize,
    pub round: usize,
    pub in_round_t: usize,
    /// Post-step projected iterates, one per node.
    pub w: Vec<Vec<f64>>,
    /// Post-step accumulated variables, one per node.
    pub z: Vec<Vec<f64>>,
}

/// Snapshot of the per-node averaged iterates at a round end (or mark).
#[derive(Debug, Clone)]
pub struct Mark {
    /// Round number k for round-based algorithms, mark index otherwise.
    pub index: usize,
    /// Total gradient steps per node once this mark was reached.
    pub global_step: usize,
    pub step_size: f64,
    /// The averaged iterate per node (w_hat).
    pub w_hat: Vec<Vec<f64>>,
    /// max_i ||z_i|| right after the round reset, with its bound
    /// L * sum_{s<=k} a_s T_s (round-based algorithms only).
    pub z_carry_norm_max: Option<f64>,
    pub z_carry_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub n: usize,
    pub dim: usize,
    /// Gradient steps each node performed.
    pub total_steps: usize,
    pub steps: Vec<StepStats>,
    pub recorded: Vec<RecordedStep>,
    pub marks: Vec<Mark>,
}

impl RunTrace {
    pub fn max_consensus_residual(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.consensus_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_net_err(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| s.net_err.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Worst margin by which a step's network error approached its bound:
    /// max over steps and nodes of (err - bound). Negative means all held.
    pub fn net_err_bound_excess(&self) -> f64 {
        self.steps
            .iter()
            .filter_map(|s| {
                s.net_err_bound
                    .map(|b| s.net_err.iter().copied().fold(f64::NEG_INFINITY, f64::max) - b)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total_online_loss(&self) -> f64 {
        self.steps.iter().flat_map(|s| s.online_loss.iter()).sum()
    }

    pub fn final_mark(&self) -> Option<&Mark> {
        self.marks.last()
    }

    /// Trace CSV: one row per recorded step and node with the step's
    /// diagnostics. `gap` is F(w) - F* of the post-step iterate under the
    /// provided evaluator, and `regret_inc` is the online loss minus the
    /// hindsight-optimal per-step loss under `baseline_loss`.
    pub fn write_csv<W: Write, G, B>(
        &self,
        mut out: W,
        mut gap_of: G,
        mut baseline_loss: B,
    ) -> Result<()>
    where
        G: FnMut(&[f64]) -> f64,
        B: FnMut(usize, usize) -> f64,
    {
        writeln!(out, "round,t,step,node,gap,net_err,regret_inc")?;
        for rec in &self.recorded {
            let stats = &self.steps[rec.global_step - 1];
            for node in 0..self.n {
                let gap = gap_of(&rec.w[node]);
                let regret_inc = stats.online_loss[node] - baseline_loss(node, rec.global_step);
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    rec.round,
                    rec.in_round_t,
                    rec.global_step,
                    node,
                    gap,
                    stats.net_err[node],
                    regret_inc
                )?;
            }
        }
        Ok(())
    }
}

/// Ordered mean over node index: sum in index order, then divide.
pub fn ordered_mean(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len();
    let dim = vectors[0].len();
    let mut out = vec![0.0; dim];
    for v in vectors {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    for o in &mut out {
        *o /= n as f64;
    }
    out
}

/// max_i ||v_i - mean|| against the ordered mean.
pub fn max_deviation_from_mean(vectors: &[Vec<f64>]) -> f64 {
    let mean = ordered_mean(vectors);
    vectors
        .iter()
        .map(|v| linalg::dist(v, &mean))
        .fold(0.0, f64::max)
}
