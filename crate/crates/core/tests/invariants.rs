//! Property tests for the module-level invariants: projection geometry,
//! strong convexity, subgradient validity and bounds, and mode degeneracies.

use proptest::prelude::*;

use dogd_core::cli::traces_bitwise_equal;
use dogd_core::dogd::{dogd_run, make_schedule, DogdOptions};
use dogd_core::feasible::FeasibleSet;
use dogd_core::harness::{run_experiment, ExperimentConfig, ReferenceCache};
use dogd_core::linalg;
use dogd_core::objectives::{
    gen_svm_streams, hinge_l2_subgrad, hinge_l2_value, lipschitz_bound, quadratic_grad,
    quadratic_value, DataPoint, Family, GradientSource, NoiseModel, ObjectiveSpec,
};
use dogd_core::rng::derive_rng;
use dogd_core::topology::{build_graph, metropolis_weights, GraphKind, GraphParams};
use dogd_core::trace::Mode;

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, 3)
}

fn sets() -> impl Strategy<Value = FeasibleSet> {
    prop_oneof![
        (0.2f64..3.0).prop_map(|r| FeasibleSet::centered_ball(3, r).unwrap()),
        (0.2f64..2.0).prop_map(|h| {
            FeasibleSet::boxed(vec![-h, -2.0 * h, -h], vec![h, 0.5 * h, 2.0 * h]).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn projection_is_nonexpansive_and_idempotent(a in vec3(), b in vec3(), set in sets()) {
        let pa = set.project(&a).unwrap();
        let pb = set.project(&b).unwrap();
        prop_assert!(linalg::dist(&pa, &pb) <= linalg::dist(&a, &b) + 1e-12);
        prop_assert_eq!(&set.project(&pa).unwrap(), &pa);
        prop_assert!(set.contains(&pa, 1e-12).unwrap());
    }

    #[test]
    fn projection_is_optimal(z in vec3(), set in sets(), seed in 0u64..1000) {
        let pz = set.project(&z).unwrap();
        let mut rng = derive_rng(seed, &[1]);
        let member = set.sample_uniform(&mut rng).unwrap();
        prop_assert!(linalg::dist(&pz, &z) <= linalg::dist(&member, &z) + 1e-12);
    }

    #[test]
    fn strong_convexity_inequality(
        u in vec3(),
        w in vec3(),
        theta in 0.01f64..0.99,
        sigma in 0.1f64..3.0,
        y in prop::bool::ANY,
        x in vec3(),
    ) {
        let pt = DataPoint { x, y: if y { 1.0 } else { -1.0 } };
        let mix: Vec<f64> = u.iter().zip(&w).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
        let d = linalg::dist(&u, &w);
        let modulus = 0.5 * sigma * theta * (1.0 - theta) * d * d;

        let lhs = hinge_l2_value(&mix, &pt, sigma);
        let rhs = theta * hinge_l2_value(&u, &pt, sigma)
            + (1.0 - theta) * hinge_l2_value(&w, &pt, sigma)
            - modulus;
        prop_assert!(lhs <= rhs + 1e-9, "hinge: {} > {}", lhs, rhs);

        let center = vec![0.3, -0.2, 0.1];
        let lhs = quadratic_value(&mix, &center, sigma);
        let rhs = theta * quadratic_value(&u, &center, sigma)
            + (1.0 - theta) * quadratic_value(&w, &center, sigma)
            - modulus;
        prop_assert!(lhs <= rhs + 1e-9, "quadratic: {} > {}", lhs, rhs);
    }

    #[test]
    fn subgradients_support_the_function(
        u in vec3(),
        w in vec3(),
        sigma in 0.1f64..3.0,
        y in prop::bool::ANY,
        x in vec3(),
    ) {
        let pt = DataPoint { x, y: if y { 1.0 } else { -1.0 } };
        let g = hinge_l2_subgrad(&w, &pt, sigma);
        let diff = linalg::sub(&u, &w);
        prop_assert!(
            hinge_l2_value(&u, &pt, sigma)
                >= hinge_l2_value(&w, &pt, sigma) + linalg::dot(&g, &diff) - 1e-9
        );

        let center = vec![-0.5, 0.4, 0.0];
        let g = quadratic_grad(&w, &center, sigma);
        prop_assert!(
            quadratic_value(&u, &center, sigma)
                >= quadratic_value(&w, &center, sigma) + linalg::dot(&g, &diff) - 1e-9
        );
    }
}

#[test]
fn subgradient_norms_respect_the_recorded_bound() {
    let streams = gen_svm_streams(4, 50, 6, 17);
    let set = FeasibleSet::centered_ball(6, 2.5).unwrap();
    let sigma = 0.4;
    let l = lipschitz_bound(&Family::HingeL2, sigma, &set, Some(&streams)).unwrap();
    let mut rng = derive_rng(3, &[9]);
    for _ in 0..500 {
        let w = set.sample_uniform(&mut rng).unwrap();
        for node in 0..4 {
            for t in 1..=50 {
                let g = hinge_l2_subgrad(&w, streams.point(node, t), sigma);
                assert!(linalg::norm(&g) <= l + 1e-12);
            }
        }
    }
}

#[test]
fn stochastic_mode_with_no_noise_equals_online_bitwise() {
    let g = build_graph(GraphKind::Cycle, 4, GraphParams::default(), 2).unwrap();
    let p = metropolis_weights(&g).unwrap();
    let streams = gen_svm_streams(4, 40, 5, 8);
    let set = FeasibleSet::centered_ball(5, 3.0).unwrap();
    let sigma = 0.5;
    let l = lipschitz_bound(&Family::HingeL2, sigma, &set, Some(&streams)).unwrap();
    let spec = ObjectiveSpec {
        family: Family::HingeL2,
        sigma,
        l,
        set,
    };
    let schedule = make_schedule(sigma, 40, 2, 2).unwrap();
    let run = |mode| {
        let source = GradientSource {
            spec: &spec,
            streams: Some(&streams),
            noise: NoiseModel::none(),
            mode,
        };
        dogd_run(&source, &p, &schedule, DogdOptions::default()).unwrap()
    };
    let online = run(Mode::Online);
    let stochastic = run(Mode::Stochastic);
    assert!(traces_bitwise_equal(&online, &stochastic));
}

#[test]
fn fig1_gap_curve_decays_and_average_regret_shrinks() {
    let text = dogd_core::harness::preset_text("fig1").unwrap();
    let cfg = ExperimentConfig::parse(text).unwrap();
    let mut cache = ReferenceCache::new(None);
    let res = run_experiment(&cfg, text, &mut cache).unwrap();
    let dogd = res
        .runs
        .iter()
        .find(|r| r.algorithm == dogd_core::trace::Algorithm::Dogd)
        .unwrap();
    let gaps: Vec<f64> = dogd.gaps.points.iter().map(|p| p.worst_gap).collect();
    assert!(gaps.len() >= 4);
    assert!(
        gaps.last().unwrap() < &(gaps[0] / 10.0),
        "final gap {} not an order below the first {}",
        gaps.last().unwrap(),
        gaps[0]
    );
    // Mostly decreasing across round ends: each end at most slightly above
    // the previous.
    for pair in gaps.windows(2) {
        assert!(
            pair[1] <= pair[0] * 1.25,
            "gap curve not decreasing: {gaps:?}"
        );
    }
    // Average regret R(T)/T shrinks across round ends.
    let marks = &dogd.regret.as_ref().unwrap().at_marks;
    let averages: Vec<f64> = marks.iter().map(|(t, r)| r / *t as f64).collect();
    for pair in averages.windows(2) {
        assert!(
            pair[1] <= pair[0] + 1e-12,
            "R(T)/T not decreasing: {averages:?}"
        );
    }
}

#[test]
fn batch_mode_uses_local_batches_and_converges() {
    let g = build_graph(GraphKind::Cycle, 3, GraphParams::default(), 1).unwrap();
    let p = metropolis_weights(&g).unwrap();
    let streams = gen_svm_streams(3, 60, 4, 21);
    let set = FeasibleSet::centered_ball(4, 3.0).unwrap();
    let sigma = 0.5;
    let l = lipschitz_bound(&Family::HingeL2, sigma, &set, Some(&streams)).unwrap();
    let spec = ObjectiveSpec {
        family: Family::HingeL2,
        sigma,
        l,
        set: set.clone(),
    };
    let schedule = make_schedule(sigma, 60, 2, 2).unwrap();
    let source = GradientSource {
        spec: &spec,
        streams: Some(&streams),
        noise: NoiseModel::none(),
        mode: Mode::Batch,
    };
    let trace = dogd_run(&source, &p, &schedule, DogdOptions::default()).unwrap();
    // Batch subgradients are averages over each node's full local dataset:
    // at the start iterate (origin) every stream point has margin 0, so the
    // subgradient is the mean of -y x over the node's batch.
    let w0 = vec![0.0; 4];
    let g0 = source.grad(1, 1, &w0);
    let mut expected = vec![0.0; 4];
    for pt in streams.node(1) {
        linalg::axpy(&mut expected, -pt.y / 60.0, &pt.x);
    }
    assert!(linalg::dist(&g0, &expected) < 1e-12);
    // The run minimizes the pooled batch objective.
    let batch = dogd_core::objectives::BatchObjective::hinge(sigma, streams.pooled(60));
    let reference = dogd_core::serial::reference_optimum(&batch, &set, 1e-6).unwrap();
    let final_mark = trace.final_mark().unwrap();
    for w_hat in &final_mark.w_hat {
        let gap = batch.value(w_hat) - reference.f_star;
        assert!(gap < 0.2, "batch-mode gap did not shrink: {gap}");
    }
}

#[test]
fn schedule_weight_identity_with_unequal_factors() {
    // a_k T_k = a1 T1 (c/b)^(k-1) for general factors.
    let s = make_schedule(0.5, 2000, 2, 3).unwrap();
    let t1 = s.t1 as f64;
    for (i, r) in s.rounds.iter().enumerate() {
        let expected = t1 * (3.0f64 / 2.0).powi(i as i32);
        assert!(
            (r.step_size * r.steps as f64 - expected).abs() < 1e-9,
            "round {}: {} vs {}",
            r.k,
            r.step_size * r.steps as f64,
            expected
        );
    }
}

#[test]
fn replaying_a_config_reproduces_results_exactly() {
    let text = "topology.kind = k_regular_expander\n\
                topology.n = 16\n\
                topology.degree = 4\n\
                data.dim = 6\n\
                data.horizon = 60\n\
                objective.family = hinge_l2\n\
                objective.sigma = 0.5\n\
                set.kind = l2_ball\n\
                set.radius = 3\n\
                algorithm = dogd,dda\n\
                mode = stochastic\n\
                noise.kind = bounded_uniform\n\
                noise.half_width = 0.2\n\
                seeds.graph = 5\n\
                seeds.data = 6\n\
                seeds.noise = 7\n";
    let cfg = ExperimentConfig::parse(text).unwrap();
    let mut cache = ReferenceCache::new(None);
    let a = run_experiment(&cfg, text, &mut cache).unwrap();
    let b = run_experiment(&cfg, text, &mut cache).unwrap();
    for (ra, rb) in a.runs.iter().zip(&b.runs) {
        assert!(traces_bitwise_equal(&ra.trace, &rb.trace));
        assert_eq!(
            ra.final_worst_gap().to_bits(),
            rb.final_worst_gap().to_bits()
        );
    }
}
