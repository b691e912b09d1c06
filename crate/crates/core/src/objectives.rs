//! Strongly convex cost families, synthetic data streams, subgradient bounds,
//! and the noisy-gradient oracle.
//!
//! Two families are provided: the l2-regularized hinge loss
//! `(sigma/2)||w||^2 + max{0, 1 - y<w, x>}` used by the classifier workload,
//! and per-node quadratics `(sigma/2)||w - c_i||^2` as a closed-form testbed.
//! Both are sigma-strongly convex, and their subgradients are bounded on any
//! bounded feasible set, which is exactly what the convergence analysis
//! assumes.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::linalg;
use crate::rng::{derive_rng, purpose};

/// One labeled observation. Quadratic workloads ignore the label.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Per-node data streams, `streams[i][t - 1]` is node i's point at step t.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSet {
    pub n: usize,
    pub horizon: usize,
    pub dim: usize,
    pub seed: u64,
    streams: Vec<Vec<DataPoint>>,
}

impl StreamSet {
    pub fn node(&self, i: usize) -> &[DataPoint] {
        &self.streams[i]
    }

    pub fn point(&self, node: usize, t: usize) -> &DataPoint {
        &self.streams[node][t - 1]
    }

    pub fn iter_all(&self) -> impl Iterator<Item = &DataPoint> {
        self.streams.iter().flat_map(|s| s.iter())
    }

    /// Pool the first `horizon` points of every node into one batch.
    pub fn pooled(&self, horizon: usize) -> Vec<DataPoint> {
        assert!(horizon <= self.horizon);
        let mut out = Vec::with_capacity(self.n * horizon);
        for s in &self.streams {
            out.extend_from_slice(&s[..horizon]);
        }
        out
    }

    pub fn max_feature_norm(&self) -> f64 {
        self.iter_all()
            .map(|p| linalg::norm(&p.x))
            .fold(0.0, f64::max)
    }

    /// One row per point: `node,t,y,x1..xd`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        writeln!(out, "node,t,y,{}", header.join(","))?;
        for (i, stream) in self.streams.iter().enumerate() {
            for (t, p) in stream.iter().enumerate() {
                let xs: Vec<String> = p.x.iter().map(|v| format!("{v}")).collect();
                writeln!(out, "{},{},{},{}", i, t + 1, p.y, xs.join(","))?;
            }
        }
        Ok(())
    }

    /// Inverse of [`write_csv`], so experiments can be replayed across
    /// implementations.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<StreamSet> {
        let mut rows: Vec<(usize, usize, DataPoint)> = Vec::new();
        let mut dim = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                continue; // header
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 4 {
                return Err(Error::Csv {
                    line: lineno + 1,
                    reason: "expected node,t,y,x1..".into(),
                });
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|_| Error::Csv {
                    line: lineno + 1,
                    reason: format!("bad {what}: {s}"),
                })
            };
            let node = parse(fields[0], "node")? as usize;
            let t = parse(fields[1], "t")? as usize;
            let y = parse(fields[2], "y")?;
            let x: Result<Vec<f64>> = fields[3..].iter().map(|s| parse(s, "x")).collect();
            let x = x?;
            match dim {
                None => dim = Some(x.len()),
                Some(d) if d != x.len() => {
                    return Err(Error::Csv {
                        line: lineno + 1,
                        reason: "inconsistent dimension".into(),
                    })
                }
                _ => {}
            }
            rows.push((node, t, DataPoint { x, y }));
        }
        if rows.is_empty() {
            return Err(Error::Csv {
                line: 1,
                reason: "empty stream file".into(),
            });
        }
        let n = rows.iter().map(|r| r.0).max().unwrap() + 1;
        let horizon = rows.iter().map(|r| r.1).max().unwrap();
        let dim = dim.unwrap();
        let mut streams: Vec<Vec<Option<DataPoint>>> = vec![vec![None; horizon]; n];
        for (node, t, p) in rows {
            streams[node][t - 1] = Some(p);
        }
        let mut out = Vec::with_capacity(n);
        for (i, s) in streams.into_iter().enumerate() {
            let full: Option<Vec<DataPoint>> = s.into_iter().collect();
            out.push(full.ok_or_else(|| Error::Csv {
                line: 0,
                reason: format!("node {i} has missing steps"),
            })?);
        }
        Ok(StreamSet {
            n,
            horizon,
            dim,
            seed: 0,
            streams: out,
        })
    }
}

/// Draw labeled SVM streams: features are i.i.d. standard normal, labels are
/// the side of a unit hyperplane normal drawn once per seed (ties labeled +1).
/// Deterministic in `seed` point by point.
pub fn gen_svm_streams(n: usize, horizon: usize, dim: usize, seed: u64) -> StreamSet {
    assert!(n >= 1 && horizon >= 1 && dim >= 1);
    let h = hyperplane_normal(dim, seed);
    let streams = (0..n)
        .map(|i| {
            (1..=horizon)
                .map(|t| {
                    let mut rng = derive_rng(seed, &[purpose::STREAM, i as u64, t as u64]);
                    let x: Vec<f64> = (0..dim)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    let y = if linalg::dot(&h, &x) >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    };
                    DataPoint { x, y }
                })
                .collect()
        })
        .collect();
    StreamSet {
        n,
        horizon,
        dim,
        seed,
        streams,
    }
}

/// The labeling hyperplane used by [`gen_svm_streams`] for a given seed.
pub fn hyperplane_normal(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = derive_rng(seed, &[purpose::HYPERPLANE]);
    let mut h: Vec<f64> = (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let nh = linalg::norm(&h);
    for v in &mut h {
        *v /= nh;
    }
    h
}

/// `(sigma/2)||w||^2 + max{0, 1 - y<w, x>}`
pub fn hinge_l2_value(w: &[f64], pt: &DataPoint, sigma: f64) -> f64 {
    let margin = pt.y * linalg::dot(w, &pt.x);
    0.5 * sigma * linalg::dot(w, w) + (1.0 - margin).max(0.0)
}

/// Subgradient of the regularized hinge. At the kink (margin exactly 1) the
/// zero-hinge branch is taken; any subdifferential element is valid and a
/// fixed choice keeps runs reproducible.
pub fn hinge_l2_subgrad(w: &[f64], pt: &DataPoint, sigma: f64) -> Vec<f64> {
    let margin = pt.y * linalg::dot(w, &pt.x);
    let mut g = linalg::scale(w, sigma);
    if margin < 1.0 {
        linalg::axpy(&mut g, -pt.y, &pt.x);
    }
    g
}

/// `(sigma/2)||w - center||^2`
pub fn quadratic_value(w: &[f64], center: &[f64], sigma: f64) -> f64 {
    let d = linalg::dist(w, center);
    0.5 * sigma * d * d
}

/// Gradient `sigma (w - center)`.
pub fn quadratic_grad(w: &[f64], center: &[f64], sigma: f64) -> Vec<f64> {
    w.iter()
        .zip(center)
        .map(|(wi, c)| sigma * (wi - c))
        .collect()
}

/// Loss family of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    HingeL2,
    /// One quadratic center per node.
    Quadratic {
        centers: Vec<Vec<f64>>,
    },
}

/// A strongly convex objective: family, modulus, subgradient bound, and the
/// feasible set it lives on. `l` is populated by [`lipschitz_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub family: Family,
    pub sigma: f64,
    pub l: f64,
    pub set: FeasibleSet,
}

impl ObjectiveSpec {
    /// Per-point loss at online step (node, t).
    pub fn point_value(&self, w: &[f64], node: usize, pt: &DataPoint) -> f64 {
        match &self.family {
            Family::HingeL2 => hinge_l2_value(w, pt, self.sigma),
            Family::Quadratic { centers } => quadratic_value(w, &centers[node], self.sigma),
        }
    }

    /// Per-point subgradient at online step (node, t).
    pub fn point_subgrad(&self, w: &[f64], node: usize, pt: &DataPoint) -> Vec<f64> {
        match &self.family {
            Family::HingeL2 => hinge_l2_subgrad(w, pt, self.sigma),
            Family::Quadratic { centers } => quadratic_grad(w, &centers[node], self.sigma),
        }
    }
}

/// Sharp bound on subgradient norms over the feasible set and the given data:
/// hinge takes `sigma sup||w|| + max_t||x(t)||`, quadratics take
/// `sigma sup||w - c_i||`. Fails on unbounded sets, where no such constant
/// exists.
pub fn lipschitz_bound(
    family: &Family,
    sigma: f64,
    set: &FeasibleSet,
    streams: Option<&StreamSet>,
) -> Result<f64> {
    match family {
        Family::HingeL2 => {
            let streams = streams.ok_or_else(|| Error::InvalidParameter {
                name: "streams".into(),
                reason: "hinge bound needs the data".into(),
            })?;
            if streams.n == 0 || streams.horizon == 0 {
                return Err(Error::InvalidParameter {
                    name: "streams".into(),
                    reason: "empty stream".into(),
                });
            }
            let wmax = set.max_norm()?;
            Ok(sigma * wmax + streams.max_feature_norm())
        }
        Family::Quadratic { centers } => {
            let mut worst = 0.0f64;
            for c in centers {
                worst = worst.max(set.max_dist_from(c)?);
            }
            Ok(sigma * worst)
        }
    }
}

/// Additive zero-mean gradient noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    /// Each coordinate uniform on [-half_width, half_width].
    BoundedUniform {
        half_width: f64,
    },
    /// Spherical Gaussian with the norm clipped to `clip` (symmetric, so the
    /// clipped noise stays zero-mean).
    GaussianClipped {
        std: f64,
        clip: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            kind: NoiseKind::None,
            seed: 0,
        }
    }

    /// Worst-case norm of the noise term in dimension `dim`; the recorded
    /// subgradient bound is enlarged by this much in stochastic mode.
    pub fn norm_bound(&self, dim: usize) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::BoundedUniform { half_width } => half_width * (dim as f64).sqrt(),
            NoiseKind::GaussianClipped { clip, .. } => clip,
        }
    }
}

/// Corrupt a subgradient: `g + zeta` with zeta zero-mean, independent across
/// (node, step), and a pure function of (seed, node, step).
pub fn noisy_oracle(g: &[f64], model: &NoiseModel, node: usize, step: usize) -> Vec<f64> {
    match model.kind {
        NoiseKind::None => g.to_vec(),
        NoiseKind::BoundedUniform { half_width } => {
            let mut rng = derive_rng(model.seed, &[purpose::NOISE, node as u64, step as u64]);
            g.iter()
                .map(|gi| gi + half_width * (2.0 * rng.gen::<f64>() - 1.0))
                .collect()
        }
        NoiseKind::GaussianClipped { std, clip } => {
            let mut rng = derive_rng(model.seed, &[purpose::NOISE, node as u64, step as u64]);
            let mut zeta: Vec<f64> = (0..g.len())
                .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let nz = linalg::norm(&zeta);
            if nz > clip {
                let t = clip / nz;
                for z in &mut zeta {
                    *z *= t;
                }
            }
            g.iter().zip(&zeta).map(|(gi, zi)| gi + zi).collect()
        }
    }
}

/// Where the per-node, per-step subgradients of a distributed run come from.
///
/// Online and stochastic runs consume one stream point per step (stochastic
/// additionally corrupts the subgradient through the noise oracle); batch
/// runs use each node's full local dataset for every subgradient.
pub struct GradientSource<'a> {
    pub spec: &'a ObjectiveSpec,
    pub streams: Option<&'a StreamSet>,
    pub noise: NoiseModel,
    pub mode: crate::trace::Mode,
}

impl<'a> GradientSource<'a> {
    fn stream(&self) -> &StreamSet {
        self.streams
            .expect("hinge gradients need streams; validated at construction")
    }

    /// Subgradient for node `node` at 1-based global step `step`, evaluated
    /// at `w`. Stochastic mode passes the clean subgradient through the noise
    /// oracle, whatever the family.
    pub fn grad(&self, node: usize, step: usize, w: &[f64]) -> Vec<f64> {
        use crate::trace::Mode;
        let g = match (&self.spec.family, self.mode) {
            (Family::Quadratic { centers }, _) => {
                quadratic_grad(w, &centers[node], self.spec.sigma)
            }
            (Family::HingeL2, Mode::Batch) => {
                let stream = self.stream();
                let mut g = linalg::scale(w, self.spec.sigma);
                let pts = stream.node(node);
                let inv = 1.0 / pts.len() as f64;
                for p in pts {
                    if p.y * linalg::dot(w, &p.x) < 1.0 {
                        linalg::axpy(&mut g, -p.y * inv, &p.x);
                    }
                }
                g
            }
            (Family::HingeL2, _) => {
                hinge_l2_subgrad(w, self.stream().point(node, step), self.spec.sigma)
            }
        };
        if self.mode == Mode::Stochastic {
            noisy_oracle(&g, &self.noise, node, step)
        } else {
            g
        }
    }

    /// Clean (noise-free) loss of the step the gradient was taken for; the
    /// regret increments sum these.
    pub fn loss(&self, node: usize, step: usize, w: &[f64]) -> f64 {
        use crate::trace::Mode;
        match (&self.spec.family, self.mode) {
            (Family::Quadratic { centers }, _) => {
                quadratic_value(w, &centers[node], self.spec.sigma)
            }
            (Family::HingeL2, Mode::Batch) => {
                let stream = self.stream();
                let pts = stream.node(node);
                let hinge: f64 = pts
                    .iter()
                    .map(|p| (1.0 - p.y * linalg::dot(w, &p.x)).max(0.0))
                    .sum();
                0.5 * self.spec.sigma * linalg::dot(w, w) + hinge / pts.len() as f64
            }
            (Family::HingeL2, _) => {
                hinge_l2_value(w, self.stream().point(node, step), self.spec.sigma)
            }
        }
    }

    /// The subgradient bound runs should be checked against: the recorded
    /// bound plus the worst-case noise norm in stochastic mode.
    pub fn effective_l(&self, dim: usize) -> f64 {
        use crate::trace::Mode;
        match self.mode {
            Mode::Stochastic => self.spec.l + self.noise.norm_bound(dim),
            _ => self.spec.l,
        }
    }
}

/// A batch objective F: the average cost over a fixed dataset (hinge) or the
/// average of the per-node quadratics. This is the function whose minimum
/// defines the optimality gap.
#[derive(Debug, Clone)]
pub struct BatchObjective {
    pub family: Family,
    pub sigma: f64,
    /// Pooled data, hinge family only.
    pub points: Vec<DataPoint>,
}

impl BatchObjective {
    pub fn hinge(sigma: f64, points: Vec<DataPoint>) -> Self {
        assert!(!points.is_empty());
        BatchObjective {
            family: Family::HingeL2,
            sigma,
            points,
        }
    }

    pub fn quadratic(sigma: f64, centers: Vec<Vec<f64>>) -> Self {
        assert!(!centers.is_empty());
        BatchObjective {
            family: Family::Quadratic { centers },
            sigma,
            points: Vec::new(),
        }
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        match &self.family {
            Family::HingeL2 => {
                let mut hinge_sum = 0.0;
                for p in &self.points {
                    hinge_sum += (1.0 - p.y * linalg::dot(w, &p.x)).max(0.0);
                }
                0.5 * self.sigma * linalg::dot(w, w) + hinge_sum / self.points.len() as f64
            }
            Family::Quadratic { centers } => {
                centers
                    .iter()
                    .map(|c| quadratic_value(w, c, self.sigma))
                    .sum::<f64>()
                    / centers.len() as f64
            }
        }
    }

    pub fn subgrad(&self, w: &[f64]) -> Vec<f64> {
        match &self.family {
            Family::HingeL2 => {
                let mut g = linalg::scale(w, self.sigma);
                let inv = 1.0 / self.points.len() as f64;
                for p in &self.points {
                    if p.y * linalg::dot(w, &p.x) < 1.0 {
                        linalg::axpy(&mut g, -p.y * inv, &p.x);
                    }
                }
                g
            }
            Family::Quadratic { centers } => {
                let cbar = linalg::mean_of(centers);
                quadratic_grad(w, &cbar, self.sigma)
            }
        }
    }

    /// Mean of the quadratic centers (the unconstrained minimizer).
    pub fn quadratic_center_mean(&self) -> Option<Vec<f64>> {
        match &self.family {
            Family::Quadratic { centers } => Some(linalg::mean_of(centers)),
            Family::HingeL2 => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svm_streams_shape_and_balance() {
        let s = gen_svm_streams(10, 600, 100, 1);
        assert_eq!(s.iter_all().count(), 6000);
        let positive = s.iter_all().filter(|p| p.y > 0.0).count() as f64 / 6000.0;
        assert!(
            (0.4..=0.6).contains(&positive),
            "label balance off: {positive}"
        );
    }

    #[test]
    fn svm_streams_deterministic() {
        let a = gen_svm_streams(1, 1, 2, 77);
        let b = gen_svm_streams(1, 1, 2, 77);
        assert_eq!(a, b);
    }

    #[test]
    fn labels_flip_with_negated_hyperplane() {
        // Flipping h flips sign(<h, x>) except on ties, which are labeled +1.
        let s = gen_svm_streams(2, 50, 3, 5);
        let h = hyperplane_normal(3, 5);
        for p in s.iter_all() {
            let side = linalg::dot(&h, &p.x);
            if side != 0.0 {
                assert_eq!(p.y, side.signum());
                let flipped = if -side >= 0.0 { 1.0 } else { -1.0 };
                assert_eq!(flipped, -p.y);
            }
        }
    }

    #[test]
    fn hinge_values() {
        let pt = DataPoint {
            x: vec![0.0, 1.0],
            y: 1.0,
        };
        // w = 0: margin 0, hinge 1, regularizer 0.
        assert_eq!(hinge_l2_value(&[0.0, 0.0], &pt, 0.3), 1.0);
        // margin exactly 1: value is just the regularizer.
        let w = vec![0.0, 1.0];
        assert!((hinge_l2_value(&w, &pt, 0.5) - 0.25).abs() < 1e-15);
        // sigma=0.1, w=(1,0), x=(0,1), y=1: 0.05 + 1.
        let w = vec![1.0, 0.0];
        assert!((hinge_l2_value(&w, &pt, 0.1) - 1.05).abs() < 1e-15);
    }

    #[test]
    fn hinge_subgrad_branches() {
        let pt = DataPoint {
            x: vec![2.0],
            y: 1.0,
        };
        // margin > 1: just sigma w.
        let g = hinge_l2_subgrad(&[1.0], &pt, 0.5);
        assert_eq!(g, vec![0.5]);
        // w = 0: margin 0 < 1, so -y x.
        let g = hinge_l2_subgrad(&[0.0], &pt, 0.5);
        assert_eq!(g, vec![-2.0]);
        // kink: zero-hinge branch.
        let g = hinge_l2_subgrad(&[0.5], &pt, 0.5);
        assert_eq!(g, vec![0.25]);
    }

    #[test]
    fn hinge_subgrad_matches_directional_derivative() {
        // Finite-difference oracle at random non-kink points: the directional
        // derivative must dominate <g, dir> up to FD error.
        let mut rng = derive_rng(13, &[1]);
        let sigma = 0.7;
        for trial in 0..200 {
            let d = 4;
            let pt = DataPoint {
                x: (0..d).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect(),
                y: if trial % 2 == 0 { 1.0 } else { -1.0 },
            };
            let w: Vec<f64> = (0..d).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
            let margin = pt.y * linalg::dot(&w, &pt.x);
            if (margin - 1.0).abs() < 1e-3 {
                continue; // too close to the kink for finite differences
            }
            let g = hinge_l2_subgrad(&w, &pt, sigma);
            let dir: Vec<f64> = (0..d).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
            let eps = 1e-7;
            let mut w_eps = w.clone();
            linalg::axpy(&mut w_eps, eps, &dir);
            let fd = (hinge_l2_value(&w_eps, &pt, sigma) - hinge_l2_value(&w, &pt, sigma)) / eps;
            assert!(
                fd >= linalg::dot(&g, &dir) - 1e-6,
                "directional derivative {fd} < <g,dir> {}",
                linalg::dot(&g, &dir)
            );
        }
    }

    #[test]
    fn quadratic_basics() {
        let c = vec![1.0, 2.0];
        assert_eq!(quadratic_value(&c, &c, 3.0), 0.0);
        assert_eq!(quadratic_grad(&c, &c, 3.0), vec![0.0, 0.0]);
        // sigma=2, w-c=(1,0): value 1, gradient (2,0).
        let w = vec![2.0, 2.0];
        assert_eq!(quadratic_value(&w, &c, 2.0), 1.0);
        assert_eq!(quadratic_grad(&w, &c, 2.0), vec![2.0, 0.0]);
    }

    #[test]
    fn quadratic_batch_minimized_at_center_mean() {
        let centers = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 3.0]];
        let f = BatchObjective::quadratic(2.0, centers.clone());
        let cbar = f.quadratic_center_mean().unwrap();
        let g = f.subgrad(&cbar);
        assert!(linalg::norm(&g) < 1e-15);
        // First-order condition: any perturbation increases the value.
        assert!(f.value(&[0.1, 1.0]) > f.value(&cbar));
    }

    #[test]
    fn lipschitz_bounds() {
        // quadratic sigma=1, unit ball, center 0: sup ||w - 0|| = 1.
        let set = FeasibleSet::centered_ball(2, 1.0).unwrap();
        let fam = Family::Quadratic {
            centers: vec![vec![0.0, 0.0]],
        };
        assert!((lipschitz_bound(&fam, 1.0, &set, None).unwrap() - 1.0).abs() < 1e-15);

        // hinge with ||x|| <= 10, ball radius 5, sigma 0.1: L <= 0.5 + 10.
        let mut s = gen_svm_streams(2, 50, 3, 9);
        for p in s.streams.iter_mut().flatten() {
            let n = linalg::norm(&p.x);
            if n > 10.0 {
                for v in &mut p.x {
                    *v *= 10.0 / n;
                }
            }
        }
        let set = FeasibleSet::centered_ball(3, 5.0).unwrap();
        let l = lipschitz_bound(&Family::HingeL2, 0.1, &set, Some(&s)).unwrap();
        assert!(l <= 10.5 + 1e-12);

        // unconstrained set: no bound exists.
        assert!(
            lipschitz_bound(&Family::HingeL2, 0.1, &FeasibleSet::Unconstrained, Some(&s)).is_err()
        );

        // empty stream: no data maximum exists.
        let empty = StreamSet {
            n: 0,
            horizon: 0,
            dim: 3,
            seed: 0,
            streams: Vec::new(),
        };
        let set = FeasibleSet::centered_ball(3, 1.0).unwrap();
        assert!(lipschitz_bound(&Family::HingeL2, 0.1, &set, Some(&empty)).is_err());
    }

    #[test]
    fn noise_none_is_identity() {
        let g = vec![1.0, -2.0];
        assert_eq!(noisy_oracle(&g, &NoiseModel::none(), 3, 14), g);
    }

    #[test]
    fn noise_deterministic_per_slot() {
        let model = NoiseModel {
            kind: NoiseKind::BoundedUniform { half_width: 0.5 },
            seed: 21,
        };
        let g = vec![0.0; 4];
        let a = noisy_oracle(&g, &model, 2, 9);
        let b = noisy_oracle(&g, &model, 2, 9);
        assert_eq!(a, b);
        assert_ne!(a, noisy_oracle(&g, &model, 3, 9));
        assert_ne!(a, noisy_oracle(&g, &model, 2, 10));
    }

    #[test]
    fn noise_is_zero_mean_monte_carlo() {
        // Mean over 1e5 draws within 3 std / sqrt(1e5) per coordinate.
        let half_width = 0.9;
        let model = NoiseModel {
            kind: NoiseKind::BoundedUniform { half_width },
            seed: 5,
        };
        let g = vec![0.0; 3];
        let trials = 100_000usize;
        let mut mean = vec![0.0; 3];
        for step in 0..trials {
            let z = noisy_oracle(&g, &model, 0, step);
            linalg::axpy(&mut mean, 1.0 / trials as f64, &z);
        }
        let std = half_width / 3.0f64.sqrt();
        let tol = 3.0 * std / (trials as f64).sqrt();
        for m in &mean {
            assert!(m.abs() <= tol, "noise mean {m} beyond {tol}");
        }
    }

    #[test]
    fn noise_norm_bounds_hold() {
        let model = NoiseModel {
            kind: NoiseKind::GaussianClipped {
                std: 1.0,
                clip: 0.8,
            },
            seed: 5,
        };
        let g = vec![0.0; 6];
        for step in 0..500 {
            let z = noisy_oracle(&g, &model, 1, step);
            assert!(linalg::norm(&z) <= model.norm_bound(6) + 1e-12);
        }
        let model = NoiseModel {
            kind: NoiseKind::BoundedUniform { half_width: 0.3 },
            seed: 6,
        };
        for step in 0..500 {
            let z = noisy_oracle(&g, &model, 1, step);
            assert!(linalg::norm(&z) <= model.norm_bound(6) + 1e-12);
        }
    }

    #[test]
    fn stream_csv_round_trip() {
        let s = gen_svm_streams(3, 4, 2, 11);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = StreamSet::read_csv(&buf[..]).unwrap();
        assert_eq!(back.n, s.n);
        assert_eq!(back.horizon, s.horizon);
        for i in 0..3 {
            for t in 1..=4 {
                assert_eq!(back.point(i, t), s.point(i, t));
            }
        }
    }
}
