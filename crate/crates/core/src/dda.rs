//! Distributed dual averaging baseline.
//!
//! Nodes accumulate gradients through the same consensus exchange as the main
//! engine, but the primal iterate comes from a proximal step with the l2
//! proximal function and a decaying rate a(t) = A / sqrt(t):
//!
//! ```text
//! z_i(t+1) = sum_j p_ij z_j(t) + g_i(t)
//! w_i(t+1) = argmin_w { <z_i(t+1), w> + (1/a(t+1)) (1/2)||w||^2 }
//!          = proj(-a(t+1) z_i(t+1))
//! ```
//!
//! The running average of each node's iterates is the object the method's
//! O(log(T sqrt(n))/sqrt(T)) guarantee speaks about, so marks snapshot those.

use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::GradientSource;
use crate::topology::ConsensusMatrix;
use crate::trace::{ordered_mean, Algorithm, Mark, RecordedStep, RunTrace, StepStats};

/// Per-node dual state.
#[derive(Debug, Clone, PartialEq)]
pub struct DdaState {
    pub node_id: usize,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

/// Step constant A of the rate a(t) = A / sqrt(t). The suggested default is
/// sqrt(1 - sqrt(lambda2_used)) * R / L; boosting it can speed the baseline
/// up, so it stays configurable.
pub fn suggested_step_constant(p: &ConsensusMatrix, radius: f64, l: f64) -> f64 {
    (1.0 - p.lambda2_used().sqrt()).sqrt() * radius / l
}

/// One synchronous step for all nodes at 1-based step index `t`.
pub fn dda_step(
    states: &mut [DdaState],
    p: &ConsensusMatrix,
    grads: &[Vec<f64>],
    t: usize,
    step_constant: f64,
    set: &crate::feasible::FeasibleSet,
) -> Result<f64> {
    let n = states.len();
    assert_eq!(p.n(), n);
    assert_eq!(grads.len(), n);
    if t < 1 {
        return Err(Error::InvalidParameter {
            name: "t".into(),
            reason: "steps are 1-based".into(),
        });
    }
    let dim = states[0].z.len();
    let old_z: Vec<&Vec<f64>> = states.iter().map(|s| &s.z).collect();

    // Same consensus-average identity as the main engine with the gradient
    // sign flipped: z_bar(t+1) = z_bar(t) + g_bar(t).
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

    let a_next = step_constant / (t as f64).sqrt();
    let mut new_z = Vec::with_capacity(n);
    for i in 0..n {
        let mut zi = vec![0.0; dim];
        for j in 0..n {
            let w = p.get(i, j);
            for (acc, x) in zi.iter_mut().zip(old_z[j].iter()) {
                *acc += w * x;
            }
        }
        linalg::axpy(&mut zi, 1.0, &grads[i]);
        new_z.push(zi);
    }
    let zbar_new = ordered_mean(&new_z);
    let mut predicted = zbar_old;
    linalg::axpy(&mut predicted, 1.0, &gbar);
    let residual = linalg::dist(&zbar_new, &predicted);

    for (state, zi) in states.iter_mut().zip(new_z) {
        state.w = set.project(&linalg::scale(&zi, -a_next))?;
        state.z = zi;
    }
    Ok(residual)
}

/// Run the baseline for `horizon` steps, snapshotting running averages at the
/// requested mark steps (the final step is always a mark).
pub fn dda_run(
    source: &GradientSource<'_>,
    p: &ConsensusMatrix,
    horizon: usize,
    step_constant: f64,
    marks: &[usize],
    record_every: usize,
) -> Result<RunTrace> {
    let n = p.n();
    let set = &source.spec.set;
    let dim =
        set.dim()
            .or(source.streams.map(|s| s.dim))
            .ok_or_else(|| Error::InvalidParameter {
                name: "dim".into(),
                reason: "cannot infer dimension".into(),
            })?;
    if !(step_constant > 0.0) {
        return Err(Error::InvalidParameter {
            name: "step_constant".into(),
            reason: format!("must be positive, got {step_constant}"),
        });
    }
    let record_every = record_every.max(1);
    let w0 = set.project(&vec![0.0; dim])?;
    let mut states: Vec<DdaState> = (0..n)
        .map(|node_id| DdaState {
            node_id,
            z: vec![0.0; dim],
            w: w0.clone(),
        })
        .collect();
    let mut avg_accum: Vec<Vec<f64>> = vec![vec![0.0; dim]; n];

    let mut mark_steps: Vec<usize> = marks
        .iter()
        .copied()
        .filter(|&m| m >= 1 && m <= horizon)
        .collect();
    mark_steps.push(horizon);
    mark_steps.sort_unstable();
    mark_steps.dedup();

    let mut trace = RunTrace {
        algorithm: Algorithm::Dda,
        mode: source.mode,
        n,
        dim,
        total_steps: horizon,
        steps: Vec::new(),
        recorded: Vec::new(),
        marks: Vec::new(),
    };

    for t in 1..=horizon {
        let mut grads = Vec::with_capacity(n);
        let mut losses = Vec::with_capacity(n);
        for state in &states {
            grads.push(source.grad(state.node_id, t, &state.w));
            losses.push(source.loss(state.node_id, t, &state.w));
        }
        let residual = dda_step(&mut states, p, &grads, t, step_constant, set)?;
        for (acc, state) in avg_accum.iter_mut().zip(&states) {
            linalg::axpy(acc, 1.0, &state.w);
        }
        let zbar = ordered_mean(&states.iter().map(|s| s.z.clone()).collect::<Vec<_>>());
        let net_err: Vec<f64> = states.iter().map(|s| linalg::dist(&s.z, &zbar)).collect();
        trace.steps.push(StepStats {
            round: 0,
            in_round_t: t,
            global_step: t,
            step_size: step_constant / (t as f64).sqrt(),
            net_err,
            net_err_bound: None,
            consensus_residual: residual,
            online_loss: losses,
        });
        if t % record_every == 0 || t == horizon {
            trace.recorded.push(RecordedStep {
                global_step: t,
                round: 0,
                in_round_t: t,
                w: states.iter().map(|s| s.w.clone()).collect(),
                z: states.iter().map(|s| s.z.clone()).collect(),
            });
        }
        if mark_steps.contains(&t) {
            let w_hat: Vec<Vec<f64>> = avg_accum
                .iter()
                .map(|acc| linalg::scale(acc, 1.0 / t as f64))
                .collect();
            trace.marks.push(Mark {
                index: trace.marks.len() + 1,
                global_step: t,
                step_size: step_constant / (t as f64).sqrt(),
                w_hat,
                z_carry_norm_max: None,
                z_carry_bound: None,
            });
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasible::FeasibleSet;
    use crate::objectives::{Family, NoiseModel, ObjectiveSpec};
    use crate::topology::{build_graph, metropolis_weights, GraphKind, GraphParams};
    use crate::trace::Mode;

    #[test]
    fn zero_gradients_park_at_projected_origin() {
        let g = build_graph(GraphKind::Cycle, 3, GraphParams::default(), 0).unwrap();
        let p = metropolis_weights(&g).unwrap();
        let set = FeasibleSet::ball(vec![2.0, 2.0], 1.0).unwrap();
        let expected = set.project(&[0.0, 0.0]).unwrap();
        let mut states: Vec<DdaState> = (0..3)
            .map(|node_id| DdaState {
                node_id,
                z: vec![0.0, 0.0],
                w: expected.clone(),
            })
            .collect();
        let grads = vec![vec![0.0, 0.0]; 3];
        dda_step(&mut states, &p, &grads, 1, 0.5, &set).unwrap();
        for s in &states {
            assert!(linalg::dist(&s.w, &expected) < 1e-15);
        }
    }

    /// Independent serial dual-averaging oracle for the n = 1 reduction.
    fn serial_dual_averaging(
        center: &[f64],
        sigma: f64,
        set: &FeasibleSet,
        a_const: f64,
        horizon: usize,
    ) -> Vec<Vec<f64>> {
        let mut z = vec![0.0; center.len()];
        let mut w = set.project(&vec![0.0; center.len()]).unwrap();
        let mut iterates = Vec::new();
        for t in 1..=horizon {
            let g = crate::objectives::quadratic_grad(&w, center, sigma);
            for (zi, gi) in z.iter_mut().zip(&g) {
                *zi += gi;
            }
            let a = a_const / (t as f64).sqrt();
            w = set.project(&linalg::scale(&z, -a)).unwrap();
            iterates.push(w.clone());
        }
        iterates
    }

    #[test]
    fn single_node_matches_serial_recursion() {
        let g = build_graph(GraphKind::Complete, 1, GraphParams::default(), 0).unwrap();
        let p = metropolis_weights(&g).unwrap();
        let center = vec![0.8, -0.3];
        let set = FeasibleSet::centered_ball(2, 2.0).unwrap();
        let spec = ObjectiveSpec {
            family: Family::Quadratic {
                centers: vec![center.clone()],
            },
            sigma: 1.0,
            l: 3.0,
            set: set.clone(),
        };
        let source = GradientSource {
            spec: &spec,
            streams: None,
            noise: NoiseModel::none(),
            mode: Mode::Online,
        };
        let trace = dda_run(&source, &p, 50, 0.4, &[], 1).unwrap();
        let serial = serial_dual_averaging(&center, 1.0, &set, 0.4, 50);
        for (rec, expected) in trace.recorded.iter().zip(&serial) {
            assert_eq!(
                rec.w[0], *expected,
                "divergence at step {}",
                rec.global_step
            );
        }
        assert!(trace.max_consensus_residual() <= 1e-9);
    }

    #[test]
    fn running_averages_approach_network_optimum() {
        let g = build_graph(GraphKind::Complete, 4, GraphParams::default(), 0).unwrap();
        let p = metropolis_weights(&g).unwrap();
        let centers = vec![
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ];
        let set = FeasibleSet::centered_ball(2, 3.0).unwrap();
        let spec = ObjectiveSpec {
            family: Family::Quadratic {
                centers: centers.clone(),
            },
            sigma: 1.0,
            l: 5.0,
            set,
        };
        let source = GradientSource {
            spec: &spec,
            streams: None,
            noise: NoiseModel::none(),
            mode: Mode::Online,
        };
        let a = suggested_step_constant(&p, 3.0, 5.0);
        let trace = dda_run(&source, &p, 400, a, &[100, 200], 50).unwrap();
        assert_eq!(trace.marks.len(), 3);
        // Optimum is the centers' mean = origin; averages should get close.
        let last = trace.final_mark().unwrap();
        for w_hat in &last.w_hat {
            assert!(linalg::norm(w_hat) < 0.5, "w_hat = {w_hat:?}");
        }
        for mark in &trace.marks {
            for w in &mark.w_hat {
                assert!(spec.set.contains(w, 1e-12).unwrap());
            }
        }
    }
}
