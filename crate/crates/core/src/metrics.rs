//! Post-run metrics: optimality gaps, distributed regret, network error, and
//! empirical convergence-rate estimation.
//!
//! The headline metric is the worst-node gap F(w_hat) - F(w*) at round ends,
//! since the convergence guarantee holds for every node individually; per-node
//! and mean values are emitted alongside.

use std::io::Write;

use crate::error::{Error, Result};
use crate::objectives::{BatchObjective, GradientSource};
use crate::serial::ReferenceSolution;
use crate::trace::{max_deviation_from_mean, RunTrace};

/// Gap of one iterate against a reference solution, with the sanity check
/// that the gap is not meaningfully negative (which would invalidate the
/// reference, not the iterate).
pub fn gap_at(
    w_hat: &[f64],
    objective: &BatchObjective,
    reference: &ReferenceSolution,
) -> Result<f64> {
    let gap = objective.value(w_hat) - reference.f_star;
    if gap < -reference.tol {
        return Err(Error::ReferenceInvalidated {
            gap,
            tol: reference.tol,
        });
    }
    Ok(gap)
}

/// Worst-node deviation from the network-average accumulated gradient,
/// max_i ||z_i - z_bar||, with z_bar formed by ordered summation.
pub fn network_error(z: &[Vec<f64>]) -> f64 {
    max_deviation_from_mean(z)
}

/// Gap trajectory at round ends (or marks): total steps per node versus the
/// worst-node and mean gap of the averaged iterates.
#[derive(Debug, Clone)]
pub struct GapSeries {
    pub points: Vec<GapPoint>,
}

#[derive(Debug, Clone, Copy)]
pub struct GapPoint {
    pub steps: usize,
    pub worst_gap: f64,
    pub mean_gap: f64,
}

impl GapSeries {
    pub fn final_worst_gap(&self) -> Option<f64> {
        self.points.last().map(|p| p.worst_gap)
    }
}

/// Evaluate the per-mark averaged iterates of a trace against a reference.
pub fn gap_series(
    trace: &RunTrace,
    objective: &BatchObjective,
    reference: &ReferenceSolution,
) -> Result<GapSeries> {
    let mut points = Vec::with_capacity(trace.marks.len());
    let mut prev_steps = 0usize;
    for mark in &trace.marks {
        assert!(
            mark.global_step > prev_steps,
            "marks must be strictly increasing"
        );
        prev_steps = mark.global_step;
        let mut worst = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for w_hat in &mark.w_hat {
            let gap = gap_at(w_hat, objective, reference)?;
            worst = worst.max(gap);
            sum += gap;
        }
        points.push(GapPoint {
            steps: mark.global_step,
            worst_gap: worst,
            mean_gap: sum / mark.w_hat.len() as f64,
        });
    }
    Ok(GapSeries { points })
}

/// Distributed regret of a finished run: the online losses accumulated by
/// the nodes minus the loss of the best fixed feasible point in hindsight
/// (the reference optimum of the pooled consumed batch).
#[derive(Debug, Clone)]
pub struct RegretReport {
    pub total: f64,
    /// R(T) / T with T the per-node step count.
    pub per_step_avg: f64,
    pub horizon: usize,
    /// Cumulative regret at each mark step, same hindsight comparator.
    pub at_marks: Vec<(usize, f64)>,
}

pub fn distributed_regret(
    trace: &RunTrace,
    source: &GradientSource<'_>,
    reference: &ReferenceSolution,
) -> Result<RegretReport> {
    if trace.steps.is_empty() {
        return Err(Error::InvalidParameter {
            name: "trace".into(),
            reason: "empty trace".into(),
        });
    }
    let mark_steps: Vec<usize> = trace.marks.iter().map(|m| m.global_step).collect();
    let mut cumulative = 0.0;
    let mut at_marks = Vec::with_capacity(mark_steps.len());
    for stats in &trace.steps {
        for node in 0..trace.n {
            let baseline = source.loss(node, stats.global_step, &reference.w_star);
            cumulative += stats.online_loss[node] - baseline;
        }
        if mark_steps.contains(&stats.global_step) {
            at_marks.push((stats.global_step, cumulative));
        }
    }
    Ok(RegretReport {
        total: cumulative,
        per_step_avg: cumulative / trace.total_steps as f64,
        horizon: trace.total_steps,
        at_marks,
    })
}

/// Least-squares fit of log(gap) against log(T).
#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub points_used: usize,
    /// Non-positive gaps dropped from the window (already converged).
    pub points_dropped: usize,
}

/// Fit the decay exponent over the last `window` points of a gap series.
pub fn rate_slope(series: &GapSeries, window: usize) -> Result<SlopeFit> {
    if series.points.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "series".into(),
            reason: format!("need at least 3 points, got {}", series.points.len()),
        });
    }
    let start = series.points.len().saturating_sub(window);
    let tail = &series.points[start..];
    let kept: Vec<(f64, f64)> = tail
        .iter()
        .filter(|p| p.worst_gap > 0.0)
        .map(|p| ((p.steps as f64).ln(), p.worst_gap.ln()))
        .collect();
    let dropped = tail.len() - kept.len();
    if kept.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "series".into(),
            reason: format!(
                "only {} positive gaps in the window ({} dropped); nothing to fit",
                kept.len(),
                dropped
            ),
        });
    }
    let n = kept.len() as f64;
    let mean_x: f64 = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y: f64 = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    Ok(SlopeFit {
        slope: sxy / sxx,
        points_used: kept.len(),
        points_dropped: dropped,
    })
}

/// One metrics row per mark.
#[derive(Debug, Clone, Copy)]
pub struct MetricsRow {
    pub steps: usize,
    pub worst_gap: f64,
    pub mean_gap: f64,
    pub regret_avg: f64,
    pub net_err_max: f64,
    pub slope_so_far: f64,
}

pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricsRow]) -> Result<()> {
    writeln!(
        out,
        "T,worst_gap,mean_gap,regret_avg,net_err_max,slope_so_far"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.steps, r.worst_gap, r.mean_gap, r.regret_avg, r.net_err_max, r.slope_so_far
        )?;
    }
    Ok(())
}

/// Assemble metrics rows from a trace and its gap/regret evaluations.
pub fn metrics_rows(
    trace: &RunTrace,
    gaps: &GapSeries,
    regret: &RegretReport,
    slope_window: usize,
) -> Vec<MetricsRow> {
    let mut rows = Vec::with_capacity(gaps.points.len());
    for (idx, point) in gaps.points.iter().enumerate() {
        let net_err_max = trace
            .steps
            .iter()
            .take_while(|s| s.global_step <= point.steps)
            .flat_map(|s| s.net_err.iter().copied())
            .fold(0.0, f64::max);
        let regret_avg = regret
            .at_marks
            .iter()
            .find(|(s, _)| *s == point.steps)
            .map(|(s, r)| r / *s as f64)
            .unwrap_or(f64::NAN);
        let slope_so_far = if idx + 1 >= 3 {
            rate_slope(
                &GapSeries {
                    points: gaps.points[..=idx].to_vec(),
                },
                slope_window.min(idx + 1),
            )
            .map(|f| f.slope)
            .unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        rows.push(MetricsRow {
            steps: point.steps,
            worst_gap: point.worst_gap,
            mean_gap: point.mean_gap,
            regret_avg,
            net_err_max,
            slope_so_far,
        });
    }
    rows
}
