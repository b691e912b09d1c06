//! The distributed online gradient descent engine.
//!
//! Each node keeps an accumulated-gradient variable `z` that mixes with its
//! neighbors through the doubly stochastic consensus matrix while taking
//! local subgradient steps, and projects to get its primal iterate:
//!
//! ```text
//! z_i(t+1) = sum_j p_ij z_j(t) - a_k g_i(t)      g_i(t) in df_i^t(w_i(t))
//! w_i(t+1) = proj(z_i(t+1))
//! ```
//!
//! Steps are organized in rounds: round k runs T_k = c^(k-1) T1 steps at the
//! fixed step size a_k = a1 / b^(k-1) (defaults b = c = 2, T1 = ceil(2/sigma),
//! a1 = 1). At a round boundary each node records the running average of the
//! round's iterates, carries its last projected iterate over, and resets the
//! accumulated variable to that projected point.
//!
//! Execution is synchronous: every consensus read uses the previous step's z
//! values, and the consensus sums reduce in node-index order, so a run is
//! bitwise reproducible and a single-node run is bitwise identical to serial
//! lazy projection with per-round restarts.

use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::linalg;
use crate::objectives::GradientSource;
use crate::topology::ConsensusMatrix;
use crate::trace::{ordered_mean, Algorithm, Mark, RecordedStep, RunTrace, StepStats};

/// Tolerance on the gradient-norm assumption; violations above it are
/// surfaced as errors, never clipped.
const GRAD_BOUND_TOL: f64 = 1e-9;

/// One round of the schedule: `steps` gradient steps at `step_size`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSpec {
    pub k: usize,
    pub steps: usize,
    pub step_size: f64,
}

/// Epoch-doubling schedule: T1 = ceil(2/sigma), a1 = 1, T_{k+1} = c T_k,
/// a_{k+1} = a_k / b, enumerated while the cumulative step count fits the
/// budget. Convergence needs c >= b and sigma a1 T1 > 1, which the T1
/// initialization guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSchedule {
    pub t1: usize,
    pub a1: f64,
    pub b: u32,
    pub c: u32,
    pub horizon: usize,
    pub rounds: Vec<RoundSpec>,
}

impl RoundSchedule {
    pub fn k_total(&self) -> usize {
        self.rounds.len()
    }

    pub fn total_scheduled(&self) -> usize {
        self.rounds.iter().map(|r| r.steps).sum()
    }

    /// Steps the while-loop leaves unused at the end of the budget.
    pub fn leftover(&self) -> usize {
        self.horizon - self.total_scheduled()
    }

    /// Cumulative step counts at each round end.
    pub fn cumulative_ends(&self) -> Vec<usize> {
        let mut acc = 0;
        self.rounds
            .iter()
            .map(|r| {
                acc += r.steps;
                acc
            })
            .collect()
    }
}

pub fn make_schedule(sigma: f64, horizon: usize, b: u32, c: u32) -> Result<RoundSchedule> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma".into(),
            reason: format!("strong convexity modulus must be positive, got {sigma}"),
        });
    }
    if b < 1 || c < b {
        return Err(Error::InvalidParameter {
            name: "b,c".into(),
            reason: format!("need c >= b >= 1, got b = {b}, c = {c}"),
        });
    }
    let t1 = (2.0 / sigma).ceil() as usize;
    let a1 = 1.0;
    if horizon < t1 {
        return Err(Error::HorizonTooSmall { horizon, t1 });
    }
    debug_assert!(sigma * a1 * t1 as f64 > 1.0);
    let mut rounds = Vec::new();
    let mut used = 0usize;
    let mut steps = t1;
    let mut step_size = a1;
    let mut k = 1usize;
    while used + steps <= horizon {
        rounds.push(RoundSpec {
            k,
            steps,
            step_size,
        });
        used += steps;
        steps = steps.saturating_mul(c as usize);
        step_size /= b as f64;
        k += 1;
    }
    Ok(RoundSchedule {
        t1,
        a1,
        b,
        c,
        horizon,
        rounds,
    })
}

/// Per-node state: accumulated gradient `z`, primal iterate `w = proj(z)`,
/// and the running sum behind the round average.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub node_id: usize,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub w_hat_accum: Vec<f64>,
    pub steps_in_round: usize,
}

impl NodeState {
    /// All nodes start at the projection of the origin (the origin itself
    /// whenever 0 is feasible), with z = w.
    pub fn initial(n: usize, dim: usize, set: &FeasibleSet) -> Result<Vec<NodeState>> {
        let w0 = set.project(&vec![0.0; dim])?;
        Ok((0..n)
            .map(|node_id| NodeState {
                node_id,
                z: w0.clone(),
                w: w0.clone(),
                w_hat_accum: vec![0.0; dim],
                steps_in_round: 0,
            })
            .collect())
    }
}

/// Diagnostics of one synchronous step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub consensus_residual: f64,
    pub net_err: Vec<f64>,
}

/// One synchronous DOGD step for all nodes. `grads[i]` must be evaluated at
/// the current `states[i].w` and satisfy the assumed norm bound `l`.
pub fn dogd_step(
    states: &mut [NodeState],
    p: &ConsensusMatrix,
    grads: &[Vec<f64>],
    a_k: f64,
    l: f64,
    set: &FeasibleSet,
    step: usize,
) -> Result<StepOutcome> {
    let n = states.len();
    assert_eq!(p.n(), n);
    assert_eq!(grads.len(), n);
    for (i, g) in grads.iter().enumerate() {
        let norm = linalg::norm(g);
        if norm > l + GRAD_BOUND_TOL {
            return Err(Error::GradientBoundExceeded {
                norm,
                bound: l,
                node: i,
                step,
            });
        }
    }
    let dim = states[0].z.len();
    let old_z: Vec<&Vec<f64>> = states.iter().map(|s| &s.z).collect();

    // Network-average identity: z_bar(t+1) = z_bar(t) - (a_k/n) sum_i g_i,
    // which holds because P is doubly stochastic. Track both sides.
    let mut zbar_old = vec![0.0; dim];
    let mut gbar = vec![0.0; dim];
    for i in 0..n {
        linalg::axpy(&mut zbar_old, 1.0, old_z[i]);
        linalg::axpy(&mut gbar, 1.0, &grads[i]);
    }
    let inv_n = 1.0 / n as f64;
    for v in zbar_old.iter_mut().chain(gbar.iter_mut()) {
        *v *= inv_n;
    }

    let mut new_z = Vec::with_capacity(n);
    for i in 0..n {
        let mut zi = vec![0.0; dim];
        for j in 0..n {
            let w = p.get(i, j);
            for (acc, x) in zi.iter_mut().zip(old_z[j].iter()) {
                *acc += w * x;
            }
        }
        linalg::axpy(&mut zi, -a_k, &grads[i]);
        new_z.push(zi);
    }

    let zbar_new = ordered_mean(&new_z);
    let mut predicted = zbar_old;
    linalg::axpy(&mut predicted, -a_k, &gbar);
    let consensus_residual = linalg::dist(&zbar_new, &predicted);
    let net_err: Vec<f64> = new_z.iter().map(|z| linalg::dist(z, &zbar_new)).collect();

    for (state, zi) in states.iter_mut().zip(new_z) {
        state.w = set.project(&zi)?;
        state.z = zi;
        // The round average covers the iterates produced inside the loop,
        // each of which has seen a gradient.
        linalg::axpy(&mut state.w_hat_accum, 1.0, &state.w);
        state.steps_in_round += 1;
    }
    Ok(StepOutcome {
        consensus_residual,
        net_err,
    })
}

/// Close a round: return each node's round average, carry the last projected
/// iterate into the next round, and reset the accumulated variable to it.
/// With `carry_z_unprojected` the accumulated variable is carried over as is
/// (a variant listed alongside the projecting reset; not the default).
pub fn round_boundary(
    states: &mut [NodeState],
    t_k: usize,
    carry_z_unprojected: bool,
) -> Vec<Vec<f64>> {
    let mut w_hats = Vec::with_capacity(states.len());
    for state in states.iter_mut() {
        assert_eq!(
            state.steps_in_round, t_k,
            "round boundary before the round completed"
        );
        w_hats.push(linalg::scale(&state.w_hat_accum, 1.0 / t_k as f64));
        if !carry_z_unprojected {
            state.z = state.w.clone();
        }
        state.w_hat_accum.iter_mut().for_each(|x| *x = 0.0);
        state.steps_in_round = 0;
    }
    w_hats
}

/// Options for a DOGD run beyond the schedule itself.
#[derive(Debug, Clone, Copy)]
pub struct DogdOptions {
    /// Record full iterates every this many steps (1 = every step).
    pub record_every: usize,
    /// Spend the budget's leftover steps on a truncated final round at the
    /// next step size instead of discarding them.
    pub partial_final_round: bool,
    /// Carry z across rounds without the projecting reset.
    pub carry_z_unprojected: bool,
}

impl Default for DogdOptions {
    fn default() -> Self {
        DogdOptions {
            record_every: 1,
            partial_final_round: false,
            carry_z_unprojected: false,
        }
    }
}

/// Run DOGD over a full schedule.
///
/// `source` supplies per-node subgradients per the run's mode; the feasible
/// set, strong convexity modulus, and subgradient bound come from
/// `source.spec`. Deterministic given the source's seeds.
pub fn dogd_run(
    source: &GradientSource<'_>,
    p: &ConsensusMatrix,
    schedule: &RoundSchedule,
    options: DogdOptions,
) -> Result<RunTrace> {
    let n = p.n();
    let set = &source.spec.set;
    let dim = match (source.spec.set.dim(), source.streams) {
        (Some(d), _) => d,
        (None, Some(s)) => s.dim,
        (None, None) => {
            return Err(Error::InvalidParameter {
                name: "dim".into(),
                reason: "cannot infer dimension from an unconstrained set without streams".into(),
            })
        }
    };
    if let Some(s) = source.streams {
        if s.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.n,
            });
        }
        if s.horizon < schedule.horizon {
            return Err(Error::InvalidParameter {
                name: "streams".into(),
                reason: format!(
                    "streams provide {} steps, schedule needs {}",
                    s.horizon, schedule.horizon
                ),
            });
        }
    }
    let record_every = options.record_every.max(1);
    let l = source.effective_l(dim);
    let one_minus_sqrt_rate = 1.0 - p.lambda2_used().sqrt();
    let sqrt_n = (n as f64).sqrt();

    let mut states = NodeState::initial(n, dim, set)?;
    let mut trace = RunTrace {
        algorithm: Algorithm::Dogd,
        mode: source.mode,
        n,
        dim,
        total_steps: 0,
        steps: Vec::new(),
        recorded: Vec::new(),
        marks: Vec::new(),
    };

    let mut rounds = schedule.rounds.clone();
    if options.partial_final_round && schedule.leftover() > 0 {
        let last = rounds.last().expect("schedule has at least one round");
        rounds.push(RoundSpec {
            k: last.k + 1,
            steps: schedule.leftover(),
            step_size: last.step_size / schedule.b as f64,
        });
    }

    let mut global_step = 0usize;
    let mut spent_step_weight = 0.0f64; // sum_{s<=k} a_s T_s, for the carry bound
    for round in &rounds {
        // The network error bound is constant within a round: the mixing term
        // plus the carried-weight term from earlier rounds.
        let net_err_bound = 2.0 * round.step_size * l * (round.steps as f64 * sqrt_n).ln()
            / one_minus_sqrt_rate
            + 3.0 * round.step_size * l
            + l * spent_step_weight / round.steps as f64;
        for t in 1..=round.steps {
            global_step += 1;
            let mut grads = Vec::with_capacity(n);
            let mut losses = Vec::with_capacity(n);
            for state in &states {
                grads.push(source.grad(state.node_id, global_step, &state.w));
                losses.push(source.loss(state.node_id, global_step, &state.w));
            }
            let outcome = dogd_step(&mut states, p, &grads, round.step_size, l, set, global_step)?;
            trace.steps.push(StepStats {
                round: round.k,
                in_round_t: t,
                global_step,
                step_size: round.step_size,
                net_err: outcome.net_err,
                net_err_bound: Some(net_err_bound),
                consensus_residual: outcome.consensus_residual,
                online_loss: losses,
            });
            if global_step % record_every == 0 || t == round.steps {
                trace.recorded.push(RecordedStep {
                    global_step,
                    round: round.k,
                    in_round_t: t,
                    w: states.iter().map(|s| s.w.clone()).collect(),
                    z: states.iter().map(|s| s.z.clone()).collect(),
                });
            }
        }
        spent_step_weight += round.step_size * round.steps as f64;
        let w_hats = round_boundary(&mut states, round.steps, options.carry_z_unprojected);
        let z_carry_norm_max = states
            .iter()
            .map(|s| linalg::norm(&s.z))
            .fold(0.0, f64::max);
        trace.marks.push(Mark {
            index: round.k,
            global_step,
            step_size: round.step_size,
            w_hat: w_hats,
            z_carry_norm_max: Some(z_carry_norm_max),
            z_carry_bound: Some(l * spent_step_weight),
        });
    }
    trace.total_steps = global_step;
    Ok(trace)
}
