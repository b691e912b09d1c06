//! Experiment orchestration: config parsing, presets, seeding, the
//! build-graph -> weights -> streams -> reference -> run -> metrics pipeline,
//! artifact persistence, and multi-seed sweeps.
//!
//! Configs are flat `key = value` text with dotted keys; unknown keys are
//! rejected so typos fail loudly. Three independent seeds (graph, data,
//! noise) keep ablations orthogonal. Replaying a config byte-identically
//! reproduces every output CSV byte-identically.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::dda::{dda_run, suggested_step_constant};
use crate::dogd::{dogd_run, make_schedule, DogdOptions, RoundSchedule};
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::metrics::{
    distributed_regret, gap_series, metrics_rows, rate_slope, write_metrics_csv, GapSeries,
    RegretReport, SlopeFit,
};
use crate::objectives::{
    gen_svm_streams, lipschitz_bound, BatchObjective, Family, GradientSource, NoiseKind,
    NoiseModel, ObjectiveSpec, StreamSet,
};
use crate::rng::{derive_rng, purpose};
use crate::serial::{
    reference_optimum, serial_lazy_run, ReferenceSolution, QUADRATIC_REF_TOL, SVM_REF_TOL,
};
use crate::topology::{
    build_graph, metropolis_weights, ConsensusMatrix, Graph, GraphKind, GraphParams,
};
use crate::trace::{Algorithm, Mode, RunTrace};

/// Residual ceiling for the network-average recursion, checked on every run.
pub const CONSENSUS_RESIDUAL_TOL: f64 = 1e-9;
/// Slack on the per-step network-error bound.
pub const NET_ERR_BOUND_TOL: f64 = 1e-6;
/// Feasibility slack for recorded iterates.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology_kind: GraphKind,
    pub n: usize,
    pub radius: Option<f64>,
    pub degree: Option<usize>,
    pub dim: usize,
    pub horizon: usize,
    pub family: FamilyKind,
    pub sigma: f64,
    pub center_spread: f64,
    pub center_offset: f64,
    pub set: SetSpec,
    pub algorithms: Vec<Algorithm>,
    pub mode: Mode,
    pub noise_kind: NoiseKindSpec,
    pub seed_graph: u64,
    pub seed_data: u64,
    pub seed_noise: u64,
    pub schedule_b: u32,
    pub schedule_c: u32,
    pub partial_final_round: bool,
    pub carry_z_unprojected: bool,
    pub dda_step_constant: Option<f64>,
    pub reference_tol: Option<f64>,
    pub trace_subsample: usize,
    pub compute_regret: bool,
    pub slope_window: usize,
    pub output_dir: Option<PathBuf>,
    pub output_streams: bool,
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    HingeL2,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetSpec {
    Ball { radius: f64 },
    Box { half_width: f64 },
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKindSpec {
    None,
    /// `half_width = None` means "auto": 0.1 L / sqrt(d), which keeps the
    /// enlarged bound L_noisy = L + half_width sqrt(d) at 1.1 L.
    BoundedUniform {
        half_width: Option<f64>,
    },
    GaussianClipped {
        std: f64,
        clip: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology_kind: GraphKind::Complete,
            n: 2,
            radius: None,
            degree: None,
            dim: 2,
            horizon: 100,
            family: FamilyKind::Quadratic,
            sigma: 1.0,
            center_spread: 1.0,
            center_offset: 0.0,
            set: SetSpec::Ball { radius: 3.0 },
            algorithms: vec![Algorithm::Dogd],
            mode: Mode::Online,
            noise_kind: NoiseKindSpec::None,
            seed_graph: 1,
            seed_data: 1,
            seed_noise: 1,
            schedule_b: 2,
            schedule_c: 2,
            partial_final_round: false,
            carry_z_unprojected: false,
            dda_step_constant: None,
            reference_tol: None,
            trace_subsample: 1,
            compute_regret: true,
            slope_window: 6,
            output_dir: None,
            output_streams: false,
            sweep: None,
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!(
        "key {key}: cannot parse {value:?}, expected {expected}"
    ))
}

impl ExperimentConfig {
    /// Parse the flat dotted-key format. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let mut sweep_param: Option<String> = None;
        let mut sweep_values: Vec<String> = Vec::new();
        let mut sweep_seeds: Vec<u64> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected key = value, got {raw:?}",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(
                key,
                value,
                &mut sweep_param,
                &mut sweep_values,
                &mut sweep_seeds,
            )?;
        }
        if let Some(param) = sweep_param {
            if sweep_values.is_empty() {
                return Err(Error::Config(
                    "sweep.param set but sweep.values empty".into(),
                ));
            }
            if sweep_seeds.is_empty() {
                sweep_seeds.push(cfg.seed_data);
            }
            cfg.sweep = Some(SweepSpec {
                param,
                values: sweep_values,
                seeds: sweep_seeds,
            });
        } else if !sweep_values.is_empty() || !sweep_seeds.is_empty() {
            return Err(Error::Config(
                "sweep.values/seeds without sweep.param".into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(
        &mut self,
        key: &str,
        value: &str,
        sweep_param: &mut Option<String>,
        sweep_values: &mut Vec<String>,
        sweep_seeds: &mut Vec<u64>,
    ) -> Result<()> {
        let parse_f64 = |v: &str, k: &str| v.parse::<f64>().map_err(|_| bad(k, v, "a real"));
        let parse_usize =
            |v: &str, k: &str| v.parse::<usize>().map_err(|_| bad(k, v, "an integer"));
        let parse_u64 = |v: &str, k: &str| v.parse::<u64>().map_err(|_| bad(k, v, "an integer"));
        let parse_bool = |v: &str, k: &str| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(bad(k, v, "true|false")),
        };
        match key {
            "topology.kind" => {
                self.topology_kind = match value {
                    "complete" => GraphKind::Complete,
                    "cycle" => GraphKind::Cycle,
                    "random_geometric" => GraphKind::RandomGeometric,
                    "k_regular_expander" => GraphKind::KRegularExpander,
                    _ => {
                        return Err(bad(
                            key,
                            value,
                            "complete|cycle|random_geometric|k_regular_expander",
                        ))
                    }
                }
            }
            "topology.n" => self.n = parse_usize(value, key)?,
            "topology.radius" => self.radius = Some(parse_f64(value, key)?),
            "topology.degree" => self.degree = Some(parse_usize(value, key)?),
            "data.dim" => self.dim = parse_usize(value, key)?,
            "data.horizon" => self.horizon = parse_usize(value, key)?,
            "objective.family" => {
                self.family = match value {
                    "hinge_l2" => FamilyKind::HingeL2,
                    "quadratic" => FamilyKind::Quadratic,
                    _ => return Err(bad(key, value, "hinge_l2|quadratic")),
                }
            }
            "objective.sigma" => self.sigma = parse_f64(value, key)?,
            "objective.center_spread" => self.center_spread = parse_f64(value, key)?,
            "objective.center_offset" => self.center_offset = parse_f64(value, key)?,
            "set.kind" => {
                self.set = match value {
                    "l2_ball" => SetSpec::Ball { radius: 5.0 },
                    "box" => SetSpec::Box { half_width: 1.0 },
                    "unconstrained" => SetSpec::Unconstrained,
                    _ => return Err(bad(key, value, "l2_ball|box|unconstrained")),
                }
            }
            "set.radius" => match &mut self.set {
                SetSpec::Ball { radius } => *radius = parse_f64(value, key)?,
                _ => return Err(Error::Config("set.radius needs set.kind = l2_ball".into())),
            },
            "set.half_width" => match &mut self.set {
                SetSpec::Box { half_width } => *half_width = parse_f64(value, key)?,
                _ => return Err(Error::Config("set.half_width needs set.kind = box".into())),
            },
            "algorithm" => {
                let mut algos = Vec::new();
                for part in value.split(',') {
                    algos.push(match part.trim() {
                        "dogd" => Algorithm::Dogd,
                        "dda" => Algorithm::Dda,
                        "serial_lazy" => Algorithm::SerialLazy,
                        other => return Err(bad(key, other, "dogd|dda|serial_lazy")),
                    });
                }
                self.algorithms = algos;
            }
            "mode" => {
                self.mode = match value {
                    "online" => Mode::Online,
                    "batch" => Mode::Batch,
                    "stochastic" => Mode::Stochastic,
                    _ => return Err(bad(key, value, "online|batch|stochastic")),
                }
            }
            "noise.kind" => {
                self.noise_kind = match value {
                    "none" => NoiseKindSpec::None,
                    "bounded_uniform" => NoiseKindSpec::BoundedUniform { half_width: None },
                    "gaussian_clipped" => NoiseKindSpec::GaussianClipped {
                        std: 0.1,
                        clip: 1.0,
                    },
                    _ => return Err(bad(key, value, "none|bounded_uniform|gaussian_clipped")),
                }
            }
            "noise.half_width" => match &mut self.noise_kind {
                NoiseKindSpec::BoundedUniform { half_width } => {
                    *half_width = if value == "auto" {
                        None
                    } else {
                        Some(parse_f64(value, key)?)
                    }
                }
                _ => {
                    return Err(Error::Config(
                        "noise.half_width needs noise.kind = bounded_uniform".into(),
                    ))
                }
            },
            "noise.std" => match &mut self.noise_kind {
                NoiseKindSpec::GaussianClipped { std, .. } => *std = parse_f64(value, key)?,
                _ => {
                    return Err(Error::Config(
                        "noise.std needs noise.kind = gaussian_clipped".into(),
                    ))
                }
            },
            "noise.clip" => match &mut self.noise_kind {
                NoiseKindSpec::GaussianClipped { clip, .. } => *clip = parse_f64(value, key)?,
                _ => {
                    return Err(Error::Config(
                        "noise.clip needs noise.kind = gaussian_clipped".into(),
                    ))
                }
            },
            "seeds.graph" => self.seed_graph = parse_u64(value, key)?,
            "seeds.data" => self.seed_data = parse_u64(value, key)?,
            "seeds.noise" => self.seed_noise = parse_u64(value, key)?,
            "schedule.b" => {
                self.schedule_b = value
                    .parse::<u32>()
                    .map_err(|_| bad(key, value, "an integer"))?
            }
            "schedule.c" => {
                self.schedule_c = value
                    .parse::<u32>()
                    .map_err(|_| bad(key, value, "an integer"))?
            }
            "schedule.partial_final_round" => self.partial_final_round = parse_bool(value, key)?,
            "schedule.carry_z_unprojected" => self.carry_z_unprojected = parse_bool(value, key)?,
            "dda.step_constant" => {
                self.dda_step_constant = if value == "auto" {
                    None
                } else {
                    Some(parse_f64(value, key)?)
                }
            }
            "reference.tol" => {
                self.reference_tol = if value == "auto" {
                    None
                } else {
                    Some(parse_f64(value, key)?)
                }
            }
            "trace.subsample" => self.trace_subsample = parse_usize(value, key)?.max(1),
            "metrics.regret" => self.compute_regret = parse_bool(value, key)?,
            "metrics.slope_window" => self.slope_window = parse_usize(value, key)?,
            "output.dir" => self.output_dir = Some(PathBuf::from(value)),
            "output.streams" => self.output_streams = parse_bool(value, key)?,
            "sweep.param" => *sweep_param = Some(value.to_string()),
            "sweep.values" => {
                *sweep_values = value.split(',').map(|s| s.trim().to_string()).collect()
            }
            "sweep.seeds" => {
                let seeds: std::result::Result<Vec<u64>, _> =
                    value.split(',').map(|s| s.trim().parse::<u64>()).collect();
                *sweep_seeds = seeds.map_err(|_| bad(key, value, "comma-separated integers"))?;
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("topology.n must be at least 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config("objective.sigma must be positive".into()));
        }
        if self.dim == 0 || self.horizon == 0 {
            return Err(Error::Config(
                "data.dim and data.horizon must be positive".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        if self.algorithms.contains(&Algorithm::SerialLazy) && self.n != 1 {
            return Err(Error::Config("serial_lazy needs topology.n = 1".into()));
        }
        if matches!(self.set, SetSpec::Unconstrained) {
            return Err(Error::Config(
                "unconstrained feasible set has no subgradient bound; experiments need l2_ball or box".into(),
            ));
        }
        Ok(())
    }

    pub fn feasible_set(&self) -> Result<FeasibleSet> {
        match self.set {
            SetSpec::Ball { radius } => FeasibleSet::centered_ball(self.dim, radius),
            SetSpec::Box { half_width } => {
                FeasibleSet::boxed(vec![-half_width; self.dim], vec![half_width; self.dim])
            }
            SetSpec::Unconstrained => Ok(FeasibleSet::Unconstrained),
        }
    }

    /// Per-node quadratic centers drawn from the data seed.
    pub fn quadratic_centers(&self) -> Vec<Vec<f64>> {
        let mut centers = Vec::with_capacity(self.n);
        for node in 0..self.n {
            let mut rng = derive_rng(self.seed_data, &[purpose::CENTERS, node as u64]);
            let mut c: Vec<f64> = (0..self.dim)
                .map(|_| self.center_spread * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            c[0] += self.center_offset;
            centers.push(c);
        }
        centers
    }
}

/// Built-in presets, echoed to disk on every run so results are reproducible
/// from the echo alone.
pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "fig1" => Some(
            "# online SVM training on a 10-node random geometric graph\n\
             topology.kind = random_geometric\n\
             topology.n = 10\n\
             data.dim = 100\n\
             data.horizon = 600\n\
             objective.family = hinge_l2\n\
             objective.sigma = 0.1\n\
             set.kind = l2_ball\n\
             set.radius = 5\n\
             algorithm = dogd,dda\n\
             mode = online\n\
             noise.kind = none\n\
             seeds.graph = 7\n\
             seeds.data = 1\n\
             seeds.noise = 1\n\
             trace.subsample = 5\n",
        ),
        "single-node-sanity" => Some(
            "# n = 1 reduction: the distributed engine must equal serial\n\
             # restarted lazy projection bitwise\n\
             topology.kind = complete\n\
             topology.n = 1\n\
             data.dim = 8\n\
             data.horizon = 124\n\
             objective.family = quadratic\n\
             objective.sigma = 0.5\n\
             objective.center_spread = 1\n\
             set.kind = l2_ball\n\
             set.radius = 2\n\
             algorithm = dogd,serial_lazy\n\
             mode = online\n\
             seeds.data = 3\n",
        ),
        "stochastic" => Some(
            "# fig1 under bounded gradient noise, swept over 20 noise seeds\n\
             topology.kind = random_geometric\n\
             topology.n = 10\n\
             data.dim = 100\n\
             data.horizon = 600\n\
             objective.family = hinge_l2\n\
             objective.sigma = 0.1\n\
             set.kind = l2_ball\n\
             set.radius = 5\n\
             algorithm = dogd\n\
             mode = stochastic\n\
             noise.kind = bounded_uniform\n\
             noise.half_width = auto\n\
             seeds.graph = 7\n\
             seeds.data = 1\n\
             trace.subsample = 10\n\
             sweep.param = seeds.noise\n\
             sweep.values = 1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20\n",
        ),
        "rate-complete-graph" => Some(
            "# gap decay rate on a complete graph (lambda2 = 0), quadratic costs\n\
             topology.kind = complete\n\
             topology.n = 10\n\
             data.dim = 10\n\
             data.horizon = 2046\n\
             objective.family = quadratic\n\
             objective.sigma = 1\n\
             objective.center_spread = 1\n\
             set.kind = l2_ball\n\
             set.radius = 3\n\
             algorithm = dogd,dda\n\
             mode = online\n\
             seeds.data = 11\n\
             trace.subsample = 64\n\
             metrics.slope_window = 6\n",
        ),
        _ => None,
    }
}

pub fn preset_names() -> &'static [&'static str] {
    &[
        "fig1",
        "single-node-sanity",
        "stochastic",
        "rate-complete-graph",
    ]
}

/// Disk-backed content-addressed cache of reference solutions.
pub struct ReferenceCache {
    dir: Option<PathBuf>,
    map: HashMap<u64, ReferenceSolution>,
}

impl ReferenceCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        ReferenceCache {
            dir,
            map: HashMap::new(),
        }
    }

    pub fn get_or_solve<F>(&mut self, key: u64, solve: F) -> Result<ReferenceSolution>
    where
        F: FnOnce() -> Result<ReferenceSolution>,
    {
        if let Some(r) = self.map.get(&key) {
            return Ok(r.clone());
        }
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{key:016x}.csv"));
            if let Ok(text) = fs::read_to_string(&path) {
                if let Some(r) = parse_reference(&text) {
                    self.map.insert(key, r.clone());
                    return Ok(r);
                }
            }
        }
        let r = solve()?;
        self.map.insert(key, r.clone());
        if let Some(dir) = &self.dir {
            fs::create_dir_all(dir)?;
            let mut text = format!("{},{}\n", r.tol, r.f_star);
            for w in &r.w_star {
                let _ = writeln!(text, "{w}");
            }
            atomic_write(&dir.join(format!("{key:016x}.csv")), text.as_bytes())?;
        }
        Ok(r)
    }
}

fn parse_reference(text: &str) -> Option<ReferenceSolution> {
    let mut lines = text.lines();
    let head = lines.next()?;
    let (tol, f_star) = head.split_once(',')?;
    let tol = tol.parse().ok()?;
    let f_star = f_star.parse().ok()?;
    let w_star: Option<Vec<f64>> = lines.map(|l| l.parse().ok()).collect();
    Some(ReferenceSolution {
        w_star: w_star?,
        f_star,
        tol,
    })
}

/// FNV-1a over a canonical little-endian encoding.
#[derive(Debug, Clone, Copy)]
pub struct ContentHash(u64);

impl ContentHash {
    pub fn new() -> Self {
        ContentHash(0xcbf2_9ce4_8422_2325)
    }

    pub fn u64(mut self, v: u64) -> Self {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self
    }

    pub fn f64(self, v: f64) -> Self {
        self.u64(v.to_bits())
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

impl Default for ContentHash {
    fn default() -> Self {
        Self::new()
    }
}

fn hash_batch(objective: &BatchObjective, set: &FeasibleSet, horizon_used: usize, tol: f64) -> u64 {
    let mut h = ContentHash::new()
        .f64(objective.sigma)
        .u64(horizon_used as u64)
        .f64(tol);
    match &objective.family {
        Family::HingeL2 => {
            h = h.u64(1);
            for p in &objective.points {
                h = h.f64(p.y);
                for x in &p.x {
                    h = h.f64(*x);
                }
            }
        }
        Family::Quadratic { centers } => {
            h = h.u64(2);
            for c in centers {
                for x in c {
                    h = h.f64(*x);
                }
            }
        }
    }
    match set {
        FeasibleSet::L2Ball { center, radius } => {
            h = h.u64(10).f64(*radius);
            for c in center {
                h = h.f64(*c);
            }
        }
        FeasibleSet::Box { lower, upper } => {
            h = h.u64(11);
            for v in lower.iter().chain(upper) {
                h = h.f64(*v);
            }
        }
        FeasibleSet::Unconstrained => h = h.u64(12),
    }
    h.finish()
}

/// Everything one algorithm produced in an experiment.
#[derive(Debug, Clone)]
pub struct AlgoResult {
    pub algorithm: Algorithm,
    pub trace: RunTrace,
    pub gaps: GapSeries,
    pub regret: Option<RegretReport>,
    /// Hindsight comparator behind `regret` (reference on the consumed batch).
    pub regret_reference: Option<ReferenceSolution>,
    pub slope: Option<SlopeFit>,
}

impl AlgoResult {
    pub fn final_worst_gap(&self) -> f64 {
        self.gaps.final_worst_gap().unwrap_or(f64::NAN)
    }
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub graph: Graph,
    pub matrix: ConsensusMatrix,
    pub streams: Option<StreamSet>,
    pub spec: ObjectiveSpec,
    pub schedule: RoundSchedule,
    pub reference: ReferenceSolution,
    pub noise: NoiseModel,
    pub runs: Vec<AlgoResult>,
    pub written: Vec<PathBuf>,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.at_stage(name))
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Run one experiment: build the topology and weights, generate data, solve
/// the reference optimum, run every requested algorithm on the shared
/// streams and graph, evaluate metrics, and persist artifacts. Deterministic
/// in the three seeds; every stage failure names its stage.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    echo: &str,
    cache: &mut ReferenceCache,
) -> Result<ExperimentResult> {
    let graph = stage(
        "build_graph",
        build_graph(
            cfg.topology_kind,
            cfg.n,
            GraphParams {
                radius: cfg.radius,
                degree: cfg.degree,
            },
            cfg.seed_graph,
        ),
    )?;
    let matrix = stage("metropolis_weights", metropolis_weights(&graph))?;
    let set = stage("feasible_set", cfg.feasible_set())?;

    let (family, streams) = match cfg.family {
        FamilyKind::HingeL2 => (
            Family::HingeL2,
            Some(gen_svm_streams(cfg.n, cfg.horizon, cfg.dim, cfg.seed_data)),
        ),
        FamilyKind::Quadratic => (
            Family::Quadratic {
                centers: cfg.quadratic_centers(),
            },
            None,
        ),
    };
    let l = stage(
        "lipschitz_bound",
        lipschitz_bound(&family, cfg.sigma, &set, streams.as_ref()),
    )?;
    let spec = ObjectiveSpec {
        family: family.clone(),
        sigma: cfg.sigma,
        l,
        set: set.clone(),
    };

    let noise = match cfg.noise_kind {
        NoiseKindSpec::None => NoiseModel::none(),
        NoiseKindSpec::BoundedUniform { half_width } => NoiseModel {
            kind: NoiseKind::BoundedUniform {
                half_width: half_width.unwrap_or(0.1 * l / (cfg.dim as f64).sqrt()),
            },
            seed: cfg.seed_noise,
        },
        NoiseKindSpec::GaussianClipped { std, clip } => NoiseModel {
            kind: NoiseKind::GaussianClipped { std, clip },
            seed: cfg.seed_noise,
        },
    };

    let schedule = stage(
        "make_schedule",
        make_schedule(cfg.sigma, cfg.horizon, cfg.schedule_b, cfg.schedule_c),
    )?;

    // Reference on the full batch, shared by the gap metrics of every run.
    let ref_tol = cfg.reference_tol.unwrap_or(match cfg.family {
        FamilyKind::HingeL2 => SVM_REF_TOL,
        FamilyKind::Quadratic => QUADRATIC_REF_TOL,
    });
    let full_batch = batch_objective(&spec, streams.as_ref(), cfg.horizon);
    let reference = stage(
        "reference_optimum",
        cache.get_or_solve(hash_batch(&full_batch, &set, cfg.horizon, ref_tol), || {
            reference_optimum(&full_batch, &set, ref_tol)
        }),
    )?;

    let source = GradientSource {
        spec: &spec,
        streams: streams.as_ref(),
        noise,
        mode: cfg.mode,
    };
    let options = DogdOptions {
        record_every: cfg.trace_subsample,
        partial_final_round: cfg.partial_final_round,
        carry_z_unprojected: cfg.carry_z_unprojected,
    };

    let mut runs = Vec::new();
    for &algo in &cfg.algorithms {
        let trace = match algo {
            Algorithm::Dogd => stage("dogd_run", dogd_run(&source, &matrix, &schedule, options))?,
            Algorithm::Dda => {
                let a = match cfg.dda_step_constant {
                    Some(a) => a,
                    None => suggested_step_constant(&matrix, set.radius_scale()?, l),
                };
                let marks = schedule.cumulative_ends();
                stage(
                    "dda_run",
                    dda_run(
                        &source,
                        &matrix,
                        cfg.horizon,
                        a,
                        &marks,
                        cfg.trace_subsample,
                    ),
                )?
            }
            Algorithm::SerialLazy => stage(
                "serial_lazy_run",
                serial_lazy_run(&source, &schedule, options),
            )?,
        };
        check_run_invariants(&trace, &spec, algo)?;
        let gaps = stage("gap_series", gap_series(&trace, &full_batch, &reference))?;
        let (regret, regret_reference) = if cfg.compute_regret {
            let consumed = trace.total_steps;
            let consumed_batch = batch_objective(&spec, streams.as_ref(), consumed);
            let regret_ref = stage(
                "reference_optimum",
                cache.get_or_solve(hash_batch(&consumed_batch, &set, consumed, ref_tol), || {
                    reference_optimum(&consumed_batch, &set, ref_tol)
                }),
            )?;
            let report = stage(
                "distributed_regret",
                distributed_regret(&trace, &source, &regret_ref),
            )?;
            // Nonnegativity floor applies when nodes cannot specialize:
            // shared-distribution streams or identical local objectives.
            if shared_distribution(cfg) {
                let floor = -(trace.n as f64) * trace.total_steps as f64 * regret_ref.tol;
                if report.total < floor {
                    return Err(Error::BoundViolated {
                        check: "regret nonnegativity".into(),
                        location: format!("{} run", algo.name()),
                        value: -report.total,
                        limit: -floor,
                    });
                }
            }
            (Some(report), Some(regret_ref))
        } else {
            (None, None)
        };
        let slope = if gaps.points.len() >= 3 {
            rate_slope(&gaps, cfg.slope_window).ok()
        } else {
            None
        };
        runs.push(AlgoResult {
            algorithm: algo,
            trace,
            gaps,
            regret,
            regret_reference,
            slope,
        });
    }

    let mut result = ExperimentResult {
        graph,
        matrix,
        streams,
        spec,
        schedule,
        reference,
        noise,
        runs,
        written: Vec::new(),
    };
    if let Some(dir) = &cfg.output_dir {
        stage(
            "write_artifacts",
            write_artifacts(&mut result, cfg, echo, dir),
        )?;
    }
    Ok(result)
}

fn shared_distribution(cfg: &ExperimentConfig) -> bool {
    cfg.family == FamilyKind::HingeL2 || cfg.n == 1 || cfg.center_spread == 0.0
}

fn batch_objective(
    spec: &ObjectiveSpec,
    streams: Option<&StreamSet>,
    horizon: usize,
) -> BatchObjective {
    match &spec.family {
        Family::HingeL2 => BatchObjective::hinge(
            spec.sigma,
            streams.expect("hinge needs streams").pooled(horizon),
        ),
        Family::Quadratic { centers } => BatchObjective::quadratic(spec.sigma, centers.clone()),
    }
}

/// Invariants every run must satisfy, whatever the workload.
fn check_run_invariants(trace: &RunTrace, spec: &ObjectiveSpec, algo: Algorithm) -> Result<()> {
    let residual = trace.max_consensus_residual();
    if residual > CONSENSUS_RESIDUAL_TOL {
        return Err(Error::BoundViolated {
            check: "consensus-average identity".into(),
            location: format!("{} run", algo.name()),
            value: residual,
            limit: CONSENSUS_RESIDUAL_TOL,
        });
    }
    if algo == Algorithm::Dogd {
        let excess = trace.net_err_bound_excess();
        if excess > NET_ERR_BOUND_TOL {
            return Err(Error::BoundViolated {
                check: "network error bound".into(),
                location: format!("{} run", algo.name()),
                value: excess,
                limit: NET_ERR_BOUND_TOL,
            });
        }
        for mark in &trace.marks {
            if let (Some(norm), Some(bound)) = (mark.z_carry_norm_max, mark.z_carry_bound) {
                if norm > bound + 1e-9 {
                    return Err(Error::BoundViolated {
                        check: "accumulated-gradient carry bound".into(),
                        location: format!("round {}", mark.index),
                        value: norm,
                        limit: bound,
                    });
                }
            }
        }
    }
    for rec in &trace.recorded {
        for w in &rec.w {
            if !spec.set.contains(w, FEASIBILITY_TOL)? {
                return Err(Error::BoundViolated {
                    check: "iterate feasibility".into(),
                    location: format!("step {}", rec.global_step),
                    value: 1.0,
                    limit: 0.0,
                });
            }
        }
    }
    for mark in &trace.marks {
        for w in &mark.w_hat {
            if !spec.set.contains(w, FEASIBILITY_TOL)? {
                return Err(Error::BoundViolated {
                    check: "round-average feasibility".into(),
                    location: format!("mark {}", mark.index),
                    value: 1.0,
                    limit: 0.0,
                });
            }
        }
    }
    Ok(())
}

fn write_artifacts(
    result: &mut ExperimentResult,
    cfg: &ExperimentConfig,
    echo: &str,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let config_path = dir.join("config.cfg");
    atomic_write(&config_path, echo.as_bytes())?;
    written.push(config_path);

    let edges_path = dir.join("graph_edges.csv");
    let mut buf = Vec::new();
    result.graph.write_edge_csv(&mut buf)?;
    atomic_write(&edges_path, &buf)?;
    written.push(edges_path);

    let matrix_path = dir.join("consensus_matrix.csv");
    let mut buf = Vec::new();
    result.matrix.write_matrix_csv(&mut buf)?;
    atomic_write(&matrix_path, &buf)?;
    written.push(matrix_path);

    if cfg.output_streams {
        if let Some(streams) = &result.streams {
            let path = dir.join("streams.csv");
            let mut buf = Vec::new();
            streams.write_csv(&mut buf)?;
            atomic_write(&path, &buf)?;
            written.push(path);
        }
    }

    let full_batch = batch_objective(&result.spec, result.streams.as_ref(), cfg.horizon);
    for run in &result.runs {
        let name = run.algorithm.name();
        let trace_path = dir.join(format!("trace_{name}.csv"));
        let mut buf = Vec::new();
        {
            let f_star = result.reference.f_star;
            let source = GradientSource {
                spec: &result.spec,
                streams: result.streams.as_ref(),
                noise: result.noise,
                mode: run.trace.mode,
            };
            // Regret column uses the same hindsight comparator as the regret
            // report; NaN when regret was not requested.
            let hindsight = run.regret_reference.as_ref().map(|r| r.w_star.clone());
            run.trace.write_csv(
                &mut buf,
                |w| full_batch.value(w) - f_star,
                |node, step| match &hindsight {
                    Some(w_star) => source.loss(node, step, w_star),
                    None => f64::NAN,
                },
            )?;
        }
        atomic_write(&trace_path, &buf)?;
        written.push(trace_path);

        let metrics_path = dir.join(format!("metrics_{name}.csv"));
        let rows = metrics_rows(
            &run.trace,
            &run.gaps,
            run.regret.as_ref().unwrap_or(&RegretReport {
                total: f64::NAN,
                per_step_avg: f64::NAN,
                horizon: run.trace.total_steps,
                at_marks: Vec::new(),
            }),
            cfg.slope_window,
        );
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &rows)?;
        atomic_write(&metrics_path, &buf)?;
        written.push(metrics_path);
    }
    result.written = written;
    Ok(())
}

/// One cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub value: String,
    pub seed: u64,
    /// Final worst-node gap per algorithm, or the failure message.
    pub outcome: std::result::Result<Vec<(Algorithm, f64)>, String>,
}

/// Cross-product sweep over one config key and a list of data seeds. Partial
/// failures are recorded per cell and the sweep continues.
pub fn sweep(
    base: &ExperimentConfig,
    spec: &SweepSpec,
    cache: &mut ReferenceCache,
) -> Result<(Vec<SweepCell>, String)> {
    if spec.values.is_empty() {
        return Err(Error::Config("sweep.values is empty".into()));
    }
    let mut cells = Vec::new();
    for value in &spec.values {
        for &seed in &spec.seeds {
            let mut cfg = base.clone();
            cfg.sweep = None;
            cfg.output_dir = None;
            let mut ignored = (None, Vec::new(), Vec::new());
            let applied = cfg
                .apply(
                    &spec.param,
                    value,
                    &mut ignored.0,
                    &mut ignored.1,
                    &mut ignored.2,
                )
                .and_then(|_| {
                    if spec.param != "seeds.data" {
                        cfg.seed_data = seed;
                    }
                    cfg.validate()
                });
            let outcome = match applied {
                Err(e) => Err(e.to_string()),
                Ok(()) => run_experiment(&cfg, "", cache)
                    .map(|res| {
                        res.runs
                            .iter()
                            .map(|r| (r.algorithm, r.final_worst_gap()))
                            .collect()
                    })
                    .map_err(|e| e.to_string()),
            };
            cells.push(SweepCell {
                value: value.clone(),
                seed,
                outcome,
            });
        }
    }
    let csv = sweep_csv(&spec.param, &cells);
    Ok((cells, csv))
}

fn sweep_csv(param: &str, cells: &[SweepCell]) -> String {
    let mut out = String::from("param,value,seed,algorithm,final_worst_gap,status\n");
    for cell in cells {
        match &cell.outcome {
            Ok(gaps) => {
                for (algo, gap) in gaps {
                    let _ = writeln!(
                        out,
                        "{param},{},{},{},{},ok",
                        cell.value,
                        cell.seed,
                        algo.name(),
                        gap
                    );
                }
            }
            Err(msg) => {
                let _ = writeln!(
                    out,
                    "{param},{},{},,,failed: {}",
                    cell.value,
                    cell.seed,
                    msg.replace(',', ";").replace('\n', " ")
                );
            }
        }
    }
    // Aggregates over seeds per (value, algorithm).
    let mut groups: Vec<(String, Algorithm, Vec<f64>)> = Vec::new();
    for cell in cells {
        if let Ok(gaps) = &cell.outcome {
            for (algo, gap) in gaps {
                match groups
                    .iter_mut()
                    .find(|(v, a, _)| v == &cell.value && a == algo)
                {
                    Some((_, _, list)) => list.push(*gap),
                    None => groups.push((cell.value.clone(), *algo, vec![*gap])),
                }
            }
        }
    }
    out.push_str("# aggregate: param,value,algorithm,mean,min,max,count\n");
    for (value, algo, gaps) in &groups {
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            out,
            "#agg,{value},{},{mean},{min},{max},{}",
            algo.name(),
            gaps.len()
        );
    }
    // Grand mean across every successful cell, per algorithm (the mean-gap
    // line for seed sweeps).
    let mut by_algo: Vec<(Algorithm, Vec<f64>)> = Vec::new();
    for (_, algo, gaps) in &groups {
        match by_algo.iter_mut().find(|(a, _)| a == algo) {
            Some((_, list)) => list.extend_from_slice(gaps),
            None => by_algo.push((*algo, gaps.clone())),
        }
    }
    for (algo, gaps) in by_algo {
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            out,
            "#agg_all,{},{mean},{min},{max},{}",
            algo.name(),
            gaps.len()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip_and_unknown_keys() {
        let cfg = ExperimentConfig::parse(preset_text("fig1").unwrap()).unwrap();
        assert_eq!(cfg.n, 10);
        assert_eq!(cfg.dim, 100);
        assert_eq!(cfg.horizon, 600);
        assert_eq!(cfg.algorithms, vec![Algorithm::Dogd, Algorithm::Dda]);
        assert!(matches!(cfg.set, SetSpec::Ball { radius } if radius == 5.0));

        let err = ExperimentConfig::parse("topology.knid = complete\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"));
        let err = ExperimentConfig::parse("topology.n = ten\n").unwrap_err();
        assert!(err.to_string().contains("topology.n"));
    }

    #[test]
    fn all_presets_parse() {
        for name in preset_names() {
            let text = preset_text(name).unwrap();
            ExperimentConfig::parse(text).unwrap_or_else(|e| panic!("preset {name}: {e}"));
        }
    }

    #[test]
    fn small_quadratic_experiment_runs_and_is_deterministic() {
        let text = "topology.kind = cycle\n\
                    topology.n = 4\n\
                    data.dim = 3\n\
                    data.horizon = 30\n\
                    objective.family = quadratic\n\
                    objective.sigma = 1\n\
                    set.kind = l2_ball\n\
                    set.radius = 3\n\
                    algorithm = dogd,dda\n\
                    seeds.data = 5\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let mut cache = ReferenceCache::new(None);
        let a = run_experiment(&cfg, text, &mut cache).unwrap();
        let b = run_experiment(&cfg, text, &mut cache).unwrap();
        assert_eq!(a.runs.len(), 2);
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            assert_eq!(ra.final_worst_gap(), rb.final_worst_gap());
            assert!(ra.final_worst_gap().is_finite());
        }
        // Shared-stream guarantee: both algorithms saw the same graph/data.
        assert_eq!(a.graph, b.graph);
    }

    #[test]
    fn artifacts_are_byte_reproducible() {
        let dir_a = std::env::temp_dir().join("dogd_harness_test_a");
        let dir_b = std::env::temp_dir().join("dogd_harness_test_b");
        let _ = fs::remove_dir_all(&dir_a);
        let _ = fs::remove_dir_all(&dir_b);
        let text = "topology.kind = complete\n\
                    topology.n = 3\n\
                    data.dim = 4\n\
                    data.horizon = 14\n\
                    objective.family = hinge_l2\n\
                    objective.sigma = 1\n\
                    set.kind = l2_ball\n\
                    set.radius = 2\n\
                    algorithm = dogd\n\
                    seeds.data = 2\n";
        for dir in [&dir_a, &dir_b] {
            let mut cfg = ExperimentConfig::parse(text).unwrap();
            cfg.output_dir = Some(dir.clone());
            let mut cache = ReferenceCache::new(None);
            run_experiment(&cfg, text, &mut cache).unwrap();
        }
        for name in [
            "config.cfg",
            "graph_edges.csv",
            "consensus_matrix.csv",
            "trace_dogd.csv",
            "metrics_dogd.csv",
        ] {
            let a = fs::read(dir_a.join(name)).unwrap();
            let b = fs::read(dir_b.join(name)).unwrap();
            assert_eq!(a, b, "artifact {name} not byte-identical");
        }
        let _ = fs::remove_dir_all(&dir_a);
        let _ = fs::remove_dir_all(&dir_b);
    }

    #[test]
    fn box_set_and_clipped_noise_run_end_to_end() {
        let text = "topology.kind = cycle\n\
                    topology.n = 4\n\
                    data.dim = 3\n\
                    data.horizon = 30\n\
                    objective.family = hinge_l2\n\
                    objective.sigma = 1\n\
                    set.kind = box\n\
                    set.half_width = 1.5\n\
                    algorithm = dogd,dda\n\
                    mode = stochastic\n\
                    noise.kind = gaussian_clipped\n\
                    noise.std = 0.1\n\
                    noise.clip = 0.5\n\
                    seeds.data = 8\n\
                    seeds.noise = 9\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert!(matches!(cfg.set, SetSpec::Box { half_width } if half_width == 1.5));
        assert!(matches!(
            cfg.noise_kind,
            NoiseKindSpec::GaussianClipped { std, clip } if std == 0.1 && clip == 0.5
        ));
        let mut cache = ReferenceCache::new(None);
        let result = run_experiment(&cfg, text, &mut cache).unwrap();
        for run in &result.runs {
            assert!(run.final_worst_gap().is_finite());
        }
    }

    #[test]
    fn sweep_records_cells_and_continues_past_failures() {
        let text = "topology.kind = complete\n\
                    topology.n = 3\n\
                    data.dim = 2\n\
                    data.horizon = 14\n\
                    objective.family = quadratic\n\
                    objective.sigma = 1\n\
                    set.kind = l2_ball\n\
                    set.radius = 2\n\
                    algorithm = dogd\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let spec = SweepSpec {
            param: "topology.n".into(),
            // n = 1 cycle... complete n=1 works; horizon below T1 fails.
            values: vec!["4".into(), "8".into()],
            seeds: vec![1, 2],
        };
        let mut cache = ReferenceCache::new(None);
        let (cells, csv) = sweep(&cfg, &spec, &mut cache).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.outcome.is_ok()));
        assert!(csv.contains("#agg,4,dogd"));
        // Grand mean over all successful cells.
        assert!(csv.contains("#agg_all,dogd"));

        // A value that breaks a stage is recorded, not fatal.
        let spec = SweepSpec {
            param: "data.horizon".into(),
            values: vec!["1".into(), "14".into()],
            seeds: vec![1],
        };
        let (cells, csv) = sweep(&cfg, &spec, &mut cache).unwrap();
        assert!(cells[0].outcome.is_err());
        assert!(cells[1].outcome.is_ok());
        assert!(csv.contains("failed"));

        let empty = SweepSpec {
            param: "topology.n".into(),
            values: vec![],
            seeds: vec![1],
        };
        assert!(sweep(&cfg, &empty, &mut cache).is_err());
    }

    #[test]
    fn reference_cache_hits_disk() {
        let dir = std::env::temp_dir().join("dogd_refcache_test");
        let _ = fs::remove_dir_all(&dir);
        let mut calls = 0;
        {
            let mut cache = ReferenceCache::new(Some(dir.clone()));
            let r = cache
                .get_or_solve(42, || {
                    calls += 1;
                    Ok(ReferenceSolution {
                        w_star: vec![1.0, -2.0],
                        f_star: 0.5,
                        tol: 1e-8,
                    })
                })
                .unwrap();
            assert_eq!(r.f_star, 0.5);
        }
        // Fresh in-memory cache, same dir: served from disk.
        let mut cache = ReferenceCache::new(Some(dir.clone()));
        let r = cache
            .get_or_solve(42, || {
                calls += 10;
                unreachable!("disk cache should have answered")
            })
            .unwrap();
        assert_eq!(calls, 1);
        assert_eq!(r.w_star, vec![1.0, -2.0]);
        let _ = fs::remove_dir_all(&dir);
    }
}
