//! Named invariant suites: each drives one of the analysis inequalities as a
//! numeric assertion across built-in topologies and objectives. The CLI's
//! `verify` command and the acceptance tests share these.

use rand::Rng;

use crate::dogd::make_schedule;
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::harness::{run_experiment, ExperimentConfig, ReferenceCache};
use crate::objectives::{
    gen_svm_streams, hinge_l2_subgrad, lipschitz_bound, quadratic_grad, quadratic_value,
    BatchObjective, Family,
};
use crate::rng::derive_rng;
use crate::serial::{lazy_projection_run, lemma1_check, reference_optimum, zinkevich_check};
use crate::topology::{build_graph, metropolis_weights, mixing_report, GraphKind, GraphParams};
use crate::trace::Algorithm;

pub const SUITE_NAMES: &[&str] = &[
    "mixing",
    "zinkevich",
    "lemma1",
    "consensus",
    "network-bound",
    "schedule",
];

/// One named check with its outcome and a human-readable detail line.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

pub fn run_suite(name: &str, seed: u64) -> Result<Vec<CheckResult>> {
    match name {
        "mixing" => suite_mixing(),
        "zinkevich" => suite_zinkevich(seed),
        "lemma1" => suite_lemma1(seed),
        "consensus" => suite_consensus(),
        "network-bound" => suite_network_bound(),
        "schedule" => suite_schedule(),
        _ => Err(Error::InvalidParameter {
            name: "suite".into(),
            reason: format!("unknown suite {name:?}; expected one of {SUITE_NAMES:?}"),
        }),
    }
}

/// Built-in topology roster used by the mixing checks.
fn mixing_roster() -> Vec<(&'static str, GraphKind, usize, GraphParams)> {
    vec![
        (
            "complete-10",
            GraphKind::Complete,
            10,
            GraphParams::default(),
        ),
        ("cycle-8", GraphKind::Cycle, 8, GraphParams::default()),
        (
            "rgg-10",
            GraphKind::RandomGeometric,
            10,
            GraphParams {
                radius: Some(0.6),
                degree: None,
            },
        ),
        (
            "expander-16",
            GraphKind::KRegularExpander,
            16,
            GraphParams {
                radius: None,
                degree: Some(4),
            },
        ),
    ]
}

/// Total-variation mixing: every row of P^t must obey both the lemma bound
/// sqrt(n) (sqrt(slem))^t and the tighter geometric decay sqrt(n) slem^t.
fn suite_mixing() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for (label, kind, n, params) in mixing_roster() {
        let graph = build_graph(kind, n, params, 42)?;
        let cm = metropolis_weights(&graph)?;
        let report = mixing_report(&cm, 200)?;
        let sqrt_n = (n as f64).sqrt();
        let mut tight_ok = true;
        let mut worst_margin = f64::NEG_INFINITY;
        for e in &report.entries {
            let tight = sqrt_n * report.lambda2_used.powi(e.t as i32);
            let margin = e.l1_deviation - tight;
            worst_margin = worst_margin.max(margin);
            if margin > 1e-10 {
                tight_ok = false;
            }
        }
        let pass = report.all_pass() && tight_ok;
        out.push(CheckResult::new(
            format!("mixing/{label}"),
            pass,
            format!(
                "slem = {:.4}, worst l1 excess over sqrt(n) slem^t = {:.3e}, cumulative {:.3} <= bound {:.3}",
                report.lambda2_used, worst_margin, report.cumulative_l1_max, report.cumulative_bound
            ),
        ));
    }
    Ok(out)
}

/// The lazy-projection regret inequality on randomized runs: half fixed
/// quadratics, half hinge streams, random step sizes and horizons.
fn suite_zinkevich(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let mut worst_slack = f64::INFINITY;
    let runs = 50usize;
    let mut failures = 0usize;
    let mut regret_failures = 0usize;
    for trial in 0..runs {
        let mut rng = derive_rng(seed, &[0x21, trial as u64]);
        let dim = 1 + rng.gen_range(0..5);
        let a = rng.gen::<f64>().max(1e-3);
        let horizon = rng.gen_range(10..=1000);
        let radius = 0.5 + 2.0 * rng.gen::<f64>();
        let set = FeasibleSet::centered_ball(dim, radius)?;
        let w1 = set.sample_uniform(&mut rng)?;
        // The convexity corollary: the realized regret is bounded by the same
        // right-hand side as the linearized sum.
        let (check, regret) = if trial % 2 == 0 {
            let sigma = 0.3 + 2.0 * rng.gen::<f64>();
            let center: Vec<f64> = (0..dim).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
            let trace = lazy_projection_run(
                |_, w| Ok(quadratic_grad(w, &center, sigma)),
                &set,
                a,
                &w1,
                horizon,
            )?;
            let w_star = set.project(&center)?;
            let regret: f64 = trace.w[..horizon]
                .iter()
                .map(|w| {
                    quadratic_value(w, &center, sigma) - quadratic_value(&w_star, &center, sigma)
                })
                .sum();
            (zinkevich_check(&trace, &w_star), regret)
        } else {
            let sigma = 0.2 + rng.gen::<f64>();
            let streams = gen_svm_streams(1, horizon, dim, seed ^ (trial as u64) << 8);
            let trace = lazy_projection_run(
                |t, w| Ok(hinge_l2_subgrad(w, streams.point(0, t), sigma)),
                &set,
                a,
                &w1,
                horizon,
            )?;
            let batch = BatchObjective::hinge(sigma, streams.pooled(horizon));
            let reference = reference_optimum(&batch, &set, 1e-6)?;
            let regret: f64 = trace.w[..horizon]
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let pt = streams.point(0, i + 1);
                    crate::objectives::hinge_l2_value(w, pt, sigma)
                        - crate::objectives::hinge_l2_value(&reference.w_star, pt, sigma)
                })
                .sum();
            (zinkevich_check(&trace, &reference.w_star), regret)
        };
        worst_slack = worst_slack.min(check.rhs - check.lhs);
        if !check.pass {
            failures += 1;
        }
        if regret > check.rhs + 1e-9 {
            regret_failures += 1;
        }
    }
    out.push(CheckResult::new(
        "zinkevich/randomized-runs",
        failures == 0,
        format!("{runs} runs, {failures} violations, worst slack rhs - lhs = {worst_slack:.3e}"),
    ));
    out.push(CheckResult::new(
        "zinkevich/regret-corollary",
        regret_failures == 0,
        format!("{runs} runs, {regret_failures} regret sums above the bound"),
    ));
    Ok(out)
}

/// The strong-convexity gap bound F(w) - F(w*) <= 2 L^2 / sigma sampled
/// uniformly over the feasible set.
fn suite_lemma1(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    // fig1 objective: the preset's streams, set, and modulus.
    let streams = gen_svm_streams(10, 600, 100, 1);
    let set = FeasibleSet::centered_ball(100, 5.0)?;
    let sigma = 0.1;
    let l = lipschitz_bound(&Family::HingeL2, sigma, &set, Some(&streams))?;
    let batch = BatchObjective::hinge(sigma, streams.pooled(600));
    let reference = reference_optimum(&batch, &set, 1e-6)?;
    let report = lemma1_check(&batch, &set, l, &reference, 1000, seed)?;
    out.push(CheckResult::new(
        "lemma1/fig1-objective",
        report.pass,
        format!("max gap {:.4} <= bound {:.4}", report.max_gap, report.bound),
    ));

    let quadratic_configs: Vec<(&str, f64, Vec<Vec<f64>>, FeasibleSet)> = vec![
        (
            "unit-ball",
            1.0,
            vec![vec![0.0, 0.0]],
            FeasibleSet::centered_ball(2, 1.0)?,
        ),
        (
            "offset-centers",
            0.5,
            vec![
                vec![1.0, 0.0, 0.5],
                vec![-1.0, 0.2, 0.0],
                vec![0.3, -0.7, 1.0],
            ],
            FeasibleSet::centered_ball(3, 2.0)?,
        ),
        (
            "box",
            2.0,
            vec![vec![0.5, -0.5], vec![-0.25, 0.75]],
            FeasibleSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0])?,
        ),
    ];
    for (label, sigma, centers, set) in quadratic_configs {
        let family = Family::Quadratic {
            centers: centers.clone(),
        };
        let l = lipschitz_bound(&family, sigma, &set, None)?;
        let batch = BatchObjective::quadratic(sigma, centers);
        let reference = reference_optimum(&batch, &set, 1e-8)?;
        let report = lemma1_check(&batch, &set, l, &reference, 1000, seed)?;
        out.push(CheckResult::new(
            format!("lemma1/quadratic-{label}"),
            report.pass,
            format!("max gap {:.4} <= bound {:.4}", report.max_gap, report.bound),
        ));
    }
    Ok(out)
}

fn parse_and_run(text: &str) -> Result<crate::harness::ExperimentResult> {
    let cfg = ExperimentConfig::parse(text)?;
    let mut cache = ReferenceCache::new(None);
    run_experiment(&cfg, text, &mut cache)
}

/// The network-average recursion residual across representative runs of both
/// distributed algorithms (also enforced inside every run).
fn suite_consensus() -> Result<Vec<CheckResult>> {
    let cases: Vec<(&str, String)> = vec![
        (
            "complete-4-quadratic",
            "topology.kind = complete\ntopology.n = 4\ndata.dim = 3\ndata.horizon = 30\n\
             objective.family = quadratic\nobjective.sigma = 1\nset.kind = l2_ball\nset.radius = 3\n\
             algorithm = dogd,dda\nseeds.data = 5\n"
                .into(),
        ),
        (
            "cycle-6-hinge",
            "topology.kind = cycle\ntopology.n = 6\ndata.dim = 5\ndata.horizon = 60\n\
             objective.family = hinge_l2\nobjective.sigma = 0.5\nset.kind = l2_ball\nset.radius = 3\n\
             algorithm = dogd,dda\nseeds.data = 6\n"
                .into(),
        ),
        (
            "rgg-10-hinge-stochastic",
            "topology.kind = random_geometric\ntopology.n = 10\ndata.dim = 8\ndata.horizon = 60\n\
             objective.family = hinge_l2\nobjective.sigma = 0.5\nset.kind = l2_ball\nset.radius = 3\n\
             algorithm = dogd,dda\nmode = stochastic\nnoise.kind = bounded_uniform\n\
             noise.half_width = auto\nseeds.graph = 3\nseeds.data = 7\nseeds.noise = 2\n"
                .into(),
        ),
    ];
    let mut out = Vec::new();
    for (label, text) in cases {
        let result = parse_and_run(&text)?;
        for run in &result.runs {
            let residual = run.trace.max_consensus_residual();
            out.push(CheckResult::new(
                format!("consensus/{label}/{}", run.algorithm.name()),
                residual <= crate::harness::CONSENSUS_RESIDUAL_TOL,
                format!("max residual {residual:.3e} <= 1e-9"),
            ));
        }
    }
    Ok(out)
}

/// The per-step network error bound on the fig1 run.
fn suite_network_bound() -> Result<Vec<CheckResult>> {
    let mut text = crate::harness::preset_text("fig1").unwrap().to_string();
    text.push_str("metrics.regret = false\n");
    let result = parse_and_run(&text)?;
    let mut out = Vec::new();
    for run in &result.runs {
        if run.algorithm != Algorithm::Dogd {
            continue;
        }
        let excess = run.trace.net_err_bound_excess();
        out.push(CheckResult::new(
            "network-bound/fig1-dogd",
            excess <= crate::harness::NET_ERR_BOUND_TOL,
            format!(
                "worst (err - bound) = {:.3e} <= 1e-6; max err {:.3}",
                excess,
                run.trace.max_net_err()
            ),
        ));
    }
    Ok(out)
}

/// Golden schedule enumerations.
fn suite_schedule() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let s = make_schedule(0.1, 600, 2, 2)?;
    let specs: Vec<(usize, f64)> = s.rounds.iter().map(|r| (r.steps, r.step_size)).collect();
    let golden = vec![(20, 1.0), (40, 0.5), (80, 0.25), (160, 0.125)];
    out.push(CheckResult::new(
        "schedule/sigma0.1-T600",
        specs == golden && s.total_scheduled() == 300 && s.k_total() == 4,
        format!(
            "rounds {}; {} steps used, k_total = {}",
            specs
                .iter()
                .map(|(t, _)| t.to_string())
                .collect::<Vec<_>>()
                .join("/"),
            s.total_scheduled(),
            s.k_total()
        ),
    ));
    let s = make_schedule(1.0, 2, 2, 2)?;
    out.push(CheckResult::new(
        "schedule/sigma1-T2",
        s.k_total() == 1 && s.rounds[0].steps == 2 && s.rounds[0].step_size == 1.0,
        "single round (2, 1)".to_string(),
    ));
    let s = make_schedule(1.0, 14, 2, 2)?;
    out.push(CheckResult::new(
        "schedule/sigma1-T14",
        s.cumulative_ends() == vec![2, 6, 14],
        format!("cumulative ends {:?}", s.cumulative_ends()),
    ));
    // a_k T_k stays constant at T1 under the default factors.
    let s = make_schedule(0.25, 2000, 2, 2)?;
    let constant = s
        .rounds
        .iter()
        .all(|r| (r.step_size * r.steps as f64 - s.t1 as f64).abs() < 1e-12);
    out.push(CheckResult::new(
        "schedule/step-weight-invariant",
        constant,
        format!("a_k T_k = T1 = {} across {} rounds", s.t1, s.k_total()),
    ));
    Ok(out)
}
