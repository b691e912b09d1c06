//! Single-processor lazy projection, its regret inequality as a runtime
//! assertion, the strong-convexity gap bound check, and the high-accuracy
//! reference optimum used as ground truth by every gap metric.
//!
//! Lazy projection accumulates unprojected gradients in `z` and projects only
//! to produce the iterate:
//!
//! ```text
//! z(t+1) = z(t) - a g(t),    w(t+1) = proj(z(t+1)),    z(1) = w(1)
//! ```
//!
//! After T steps, `sum_t <g(t), w(t) - w*> <= ||w(1) - w*||^2 / 2a + T a L^2 / 2`
//! with `L = max_t ||g(t)||`; `zinkevich_check` evaluates both sides on a
//! finished trace.

use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::linalg;
use crate::objectives::BatchObjective;
use crate::rng::{derive_rng, purpose};

/// Iterates of one lazy-projection run. `w` and `z` hold t = 1..T+1 and `g`
/// holds t = 1..T, so `w[t-1]` is the point `g[t-1]` was evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialTrace {
    pub a: f64,
    pub w: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
}

impl SerialTrace {
    pub fn horizon(&self) -> usize {
        self.g.len()
    }

    pub fn final_w(&self) -> &[f64] {
        self.w.last().unwrap()
    }

    pub fn max_grad_norm(&self) -> f64 {
        self.g.iter().map(|g| linalg::norm(g)).fold(0.0, f64::max)
    }
}

/// Run lazy projection for `horizon` steps. The oracle receives the 1-based
/// step index and the current iterate.
pub fn lazy_projection_run<F>(
    mut grad_oracle: F,
    set: &FeasibleSet,
    a: f64,
    w1: &[f64],
    horizon: usize,
) -> Result<SerialTrace>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
{
    if !(a > 0.0) {
        return Err(Error::InvalidParameter {
            name: "a".into(),
            reason: format!("step size must be positive, got {a}"),
        });
    }
    if !set.contains(w1, 1e-12)? {
        return Err(Error::InvalidParameter {
            name: "w1".into(),
            reason: "starting point must be feasible".into(),
        });
    }
    let mut w = Vec::with_capacity(horizon + 1);
    let mut z = Vec::with_capacity(horizon + 1);
    let mut g = Vec::with_capacity(horizon);
    w.push(w1.to_vec());
    z.push(w1.to_vec()); // z(1) = w(1)
    for t in 1..=horizon {
        let gt = grad_oracle(t, &w[t - 1])?;
        let mut zt = z[t - 1].clone();
        linalg::axpy(&mut zt, -a, &gt);
        let wt = set.project(&zt)?;
        g.push(gt);
        z.push(zt);
        w.push(wt);
    }
    Ok(SerialTrace { a, w, z, g })
}

/// Both sides of the lazy-projection regret inequality on a finished trace.
#[derive(Debug, Clone, Copy)]
pub struct RegretInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

const REGRET_TOL: f64 = 1e-9;

pub fn zinkevich_check(trace: &SerialTrace, w_star: &[f64]) -> RegretInequality {
    let horizon = trace.horizon();
    let l = trace.max_grad_norm();
    let lhs: f64 = (0..horizon)
        .map(|i| {
            let diff = linalg::sub(&trace.w[i], w_star);
            linalg::dot(&trace.g[i], &diff)
        })
        .sum();
    let d0 = linalg::dist(&trace.w[0], w_star);
    let rhs = d0 * d0 / (2.0 * trace.a) + horizon as f64 * trace.a * l * l / 2.0;
    RegretInequality {
        lhs,
        rhs,
        pass: lhs <= rhs + REGRET_TOL,
    }
}

/// A certified (approximate) minimizer of a batch objective over its set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub w_star: Vec<f64>,
    pub f_star: f64,
    /// Accuracy the solver certified (see [`reference_optimum`]).
    pub tol: f64,
}

/// Default certificate tolerance for closed-form (quadratic) references.
pub const QUADRATIC_REF_TOL: f64 = 1e-8;
/// Default certificate tolerance for hinge (SVM) references.
pub const SVM_REF_TOL: f64 = 1e-6;

/// Ground-truth minimizer of a batch objective on a bounded set.
///
/// Quadratics have the closed form `proj(mean of centers)`. The hinge family
/// runs serial epoch-doubling projected subgradient with final-round
/// averaging from two independent starting points, extending both runs round
/// by round until the strong-convexity certificate
/// `(sigma/2) ||w_a - w_b||^2 < tol` holds between their round averages.
pub fn reference_optimum(
    objective: &BatchObjective,
    set: &FeasibleSet,
    tol: f64,
) -> Result<ReferenceSolution> {
    reference_optimum_seeded(objective, set, tol, 0)
}

/// [`reference_optimum`] with an explicit seed for the second run's starting
/// point; distinct seeds give genuinely independent solver pairs.
pub fn reference_optimum_seeded(
    objective: &BatchObjective,
    set: &FeasibleSet,
    tol: f64,
    seed: u64,
) -> Result<ReferenceSolution> {
    if let Some(cbar) = objective.quadratic_center_mean() {
        let w_star = set.project(&cbar)?;
        let f_star = objective.value(&w_star);
        return Ok(ReferenceSolution {
            w_star,
            f_star,
            tol,
        });
    }
    set.max_norm().map_err(|_| {
        Error::UnboundedSet("reference optimum needs a bounded feasible set".into())
    })?;
    let dim = set.dim().expect("bounded set has a dimension");
    let start_a = set.project(&vec![0.0; dim])?;
    let mut rng = derive_rng(seed, &[purpose::REFERENCE]);
    let start_b = set.sample_uniform(&mut rng)?;

    let mut run_a = EpochDoublingRun::new(objective.sigma, start_a);
    let mut run_b = EpochDoublingRun::new(objective.sigma, start_b);
    const MAX_STEPS_PER_RUN: usize = 4_000_000;
    let mut certificate = f64::INFINITY;
    while run_a.total_steps + run_a.next_round_steps() <= MAX_STEPS_PER_RUN {
        run_a.advance_round(objective, set)?;
        run_b.advance_round(objective, set)?;
        let d = linalg::dist(&run_a.round_avg, &run_b.round_avg);
        certificate = 0.5 * objective.sigma * d * d;
        if certificate < tol {
            let (fa, fb) = (
                objective.value(&run_a.round_avg),
                objective.value(&run_b.round_avg),
            );
            let (w_star, f_star) = if fa <= fb {
                (run_a.round_avg, fa)
            } else {
                (run_b.round_avg, fb)
            };
            return Ok(ReferenceSolution {
                w_star,
                f_star,
                tol,
            });
        }
    }
    Err(Error::ReferenceNonConvergence(format!(
        "certificate {certificate:e} >= tol {tol:e} after {} rounds ({} steps per run)",
        run_a.rounds_done, run_a.total_steps
    )))
}

/// One resumable epoch-doubling projected-subgradient run: in round k it takes
/// T1 * 2^(k-1) steps at step size 2^(1-k) and records the round average.
struct EpochDoublingRun {
    t1: usize,
    rounds_done: usize,
    total_steps: usize,
    w: Vec<f64>,
    round_avg: Vec<f64>,
}

impl EpochDoublingRun {
    fn new(sigma: f64, start: Vec<f64>) -> Self {
        EpochDoublingRun {
            t1: (2.0 / sigma).ceil() as usize,
            rounds_done: 0,
            total_steps: 0,
            round_avg: start.clone(),
            w: start,
        }
    }

    fn next_round_steps(&self) -> usize {
        self.t1 << self.rounds_done
    }

    fn advance_round(&mut self, objective: &BatchObjective, set: &FeasibleSet) -> Result<()> {
        let k = self.rounds_done;
        let a = 0.5f64.powi(k as i32);
        let steps = self.t1 << k;
        let mut z = self.w.clone(); // lazy restart: z reset to the projected point
        let mut sum = vec![0.0; self.w.len()];
        for _ in 0..steps {
            let g = objective.subgrad(&self.w);
            linalg::axpy(&mut z, -a, &g);
            self.w = set.project(&z)?;
            linalg::axpy(&mut sum, 1.0, &self.w);
        }
        self.round_avg = linalg::scale(&sum, 1.0 / steps as f64);
        self.rounds_done += 1;
        self.total_steps += steps;
        Ok(())
    }
}

/// Serial restarted lazy projection as a single-node run trace: the exact
/// sequence the distributed engine must reduce to at n = 1. Rounds follow the
/// given schedule; at each boundary the round average is recorded, the last
/// projected iterate carries over, and z restarts at it.
pub fn serial_lazy_run(
    source: &crate::objectives::GradientSource<'_>,
    schedule: &crate::dogd::RoundSchedule,
    options: crate::dogd::DogdOptions,
) -> Result<crate::trace::RunTrace> {
    use crate::trace::{Algorithm, Mark, RecordedStep, RunTrace, StepStats};

    let set = &source.spec.set;
    let dim =
        set.dim()
            .or(source.streams.map(|s| s.dim))
            .ok_or_else(|| Error::InvalidParameter {
                name: "dim".into(),
                reason: "cannot infer dimension".into(),
            })?;
    let l = source.effective_l(dim);
    let record_every = options.record_every.max(1);
    let mut w = set.project(&vec![0.0; dim])?;
    let mut trace = RunTrace {
        algorithm: Algorithm::SerialLazy,
        mode: source.mode,
        n: 1,
        dim,
        total_steps: 0,
        steps: Vec::new(),
        recorded: Vec::new(),
        marks: Vec::new(),
    };
    let mut rounds = schedule.rounds.clone();
    if options.partial_final_round && schedule.leftover() > 0 {
        let last = rounds.last().expect("at least one round");
        rounds.push(crate::dogd::RoundSpec {
            k: last.k + 1,
            steps: schedule.leftover(),
            step_size: last.step_size / schedule.b as f64,
        });
    }
    let mut global_step = 0usize;
    let mut z = w.clone();
    let mut weight_spent = 0.0f64;
    for round in &rounds {
        if !options.carry_z_unprojected {
            z = w.clone();
        }
        let mut accum = vec![0.0; dim];
        for t in 1..=round.steps {
            global_step += 1;
            let g = source.grad(0, global_step, &w);
            let loss = source.loss(0, global_step, &w);
            let norm = linalg::norm(&g);
            if norm > l + 1e-9 {
                return Err(Error::GradientBoundExceeded {
                    norm,
                    bound: l,
                    node: 0,
                    step: global_step,
                });
            }
            linalg::axpy(&mut z, -round.step_size, &g);
            w = set.project(&z)?;
            linalg::axpy(&mut accum, 1.0, &w);
            trace.steps.push(StepStats {
                round: round.k,
                in_round_t: t,
                global_step,
                step_size: round.step_size,
                net_err: vec![0.0],
                net_err_bound: None,
                consensus_residual: 0.0,
                online_loss: vec![loss],
            });
            if global_step % record_every == 0 || t == round.steps {
                trace.recorded.push(RecordedStep {
                    global_step,
                    round: round.k,
                    in_round_t: t,
                    w: vec![w.clone()],
                    z: vec![z.clone()],
                });
            }
        }
        weight_spent += round.step_size * round.steps as f64;
        let w_hat = linalg::scale(&accum, 1.0 / round.steps as f64);
        trace.marks.push(Mark {
            index: round.k,
            global_step,
            step_size: round.step_size,
            w_hat: vec![w_hat],
            z_carry_norm_max: Some(linalg::norm(if options.carry_z_unprojected {
                &z
            } else {
                &w
            })),
            z_carry_bound: Some(l * weight_spent),
        });
    }
    trace.total_steps = global_step;
    Ok(trace)
}

/// Result of sampling the strong-convexity gap bound `F(w) - F(w*) <= 2L^2/sigma`.
#[derive(Debug, Clone)]
pub struct GapBoundReport {
    pub bound: f64,
    pub max_gap: f64,
    pub pass: bool,
    /// Worst sample if the bound failed.
    pub violation: Option<Vec<f64>>,
}

const GAP_BOUND_TOL: f64 = 1e-6;

/// Sample `samples` uniform points of the set and check each against the gap
/// bound with the given subgradient bound `l`.
pub fn lemma1_check(
    objective: &BatchObjective,
    set: &FeasibleSet,
    l: f64,
    reference: &ReferenceSolution,
    samples: usize,
    seed: u64,
) -> Result<GapBoundReport> {
    set.max_norm()
        .map_err(|_| Error::UnboundedSet("gap bound check needs a bounded feasible set".into()))?;
    let bound = 2.0 * l * l / objective.sigma;
    let mut max_gap = f64::NEG_INFINITY;
    let mut violation = None;
    for idx in 0..samples {
        let mut rng = derive_rng(seed, &[purpose::SET_SAMPLE, idx as u64]);
        let w = set.sample_uniform(&mut rng)?;
        let gap = objective.value(&w) - reference.f_star;
        if gap > max_gap {
            max_gap = gap;
            if gap > bound + GAP_BOUND_TOL {
                violation = Some(w);
            }
        }
    }
    Ok(GapBoundReport {
        bound,
        max_gap,
        pass: violation.is_none(),
        violation,
    })
}
