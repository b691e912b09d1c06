//! Convex feasible sets with exact Euclidean projection.
//!
//! Only sets with closed-form projections are offered (ball, box, or no
//! constraint); exact projections keep the downstream bound checks honest.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    L2Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Unconstrained,
}

impl FeasibleSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter {
                name: "radius".into(),
                reason: format!("must be positive, got {radius}"),
            });
        }
        Ok(FeasibleSet::L2Ball { center, radius })
    }

    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; dim], radius)
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidParameter {
                name: "bounds".into(),
                reason: "lower > upper in some component".into(),
            });
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    /// Intrinsic dimension, if the set has one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            FeasibleSet::L2Ball { center, .. } => Some(center.len()),
            FeasibleSet::Box { lower, .. } => Some(lower.len()),
            FeasibleSet::Unconstrained => None,
        }
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        match self.dim() {
            Some(d) if d != z.len() => Err(Error::DimensionMismatch {
                expected: d,
                got: z.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Euclidean projection: the nearest point of the set.
    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        Ok(match self {
            FeasibleSet::L2Ball { center, radius } => {
                let d = linalg::dist(z, center);
                // A few ulps of slack so a just-projected boundary point is an
                // exact fixed point (radial scaling rounds it ~1 ulp outside).
                if d <= radius * (1.0 + 4.0 * f64::EPSILON) {
                    z.to_vec()
                } else {
                    let t = *radius / d;
                    center
                        .iter()
                        .zip(z)
                        .map(|(c, zi)| c + t * (zi - c))
                        .collect()
                }
            }
            FeasibleSet::Box { lower, upper } => z
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(zi, (l, u))| zi.max(*l).min(*u))
                .collect(),
            FeasibleSet::Unconstrained => z.to_vec(),
        })
    }

    /// Membership test with tolerance.
    pub fn contains(&self, w: &[f64], tol: f64) -> Result<bool> {
        self.check_dim(w)?;
        Ok(match self {
            FeasibleSet::L2Ball { center, radius } => linalg::dist(w, center) <= radius + tol,
            FeasibleSet::Box { lower, upper } => w
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(wi, (l, u))| *wi >= l - tol && *wi <= u + tol),
            FeasibleSet::Unconstrained => true,
        })
    }

    /// Largest distance from the origin to a point of the set (sup of ||w||),
    /// used when sizing step constants. Fails for the unconstrained set.
    pub fn max_norm(&self) -> Result<f64> {
        match self {
            FeasibleSet::L2Ball { center, radius } => Ok(linalg::norm(center) + radius),
            FeasibleSet::Box { lower, upper } => Ok(lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt()),
            FeasibleSet::Unconstrained => {
                Err(Error::UnboundedSet("max_norm of unconstrained set".into()))
            }
        }
    }

    /// Largest distance of a point of the set from `w` (sup of ||v - w||).
    pub fn max_dist_from(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        match self {
            FeasibleSet::L2Ball { center, radius } => Ok(linalg::dist(w, center) + radius),
            FeasibleSet::Box { lower, upper } => Ok(w
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(wi, (l, u))| (wi - l).abs().max((wi - u).abs()).powi(2))
                .sum::<f64>()
                .sqrt()),
            FeasibleSet::Unconstrained => {
                Err(Error::UnboundedSet("diameter of unconstrained set".into()))
            }
        }
    }

    /// Radius scale R of the set: half-diameter for boxes, radius for balls.
    pub fn radius_scale(&self) -> Result<f64> {
        match self {
            FeasibleSet::L2Ball { radius, .. } => Ok(*radius),
            FeasibleSet::Box { lower, upper } => Ok(lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (0.5 * (u - l)).powi(2))
                .sum::<f64>()
                .sqrt()),
            FeasibleSet::Unconstrained => {
                Err(Error::UnboundedSet("radius of unconstrained set".into()))
            }
        }
    }

    /// Uniform sample from the set. Fails for the unconstrained set.
    pub fn sample_uniform(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match self {
            FeasibleSet::L2Ball { center, radius } => {
                let d = center.len();
                // Direction from a normalized Gaussian, radius from U^(1/d).
                let mut v: Vec<f64> = (0..d)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let n = linalg::norm(&v);
                let u: f64 = rng.gen::<f64>();
                let r = radius * u.powf(1.0 / d as f64);
                let t = if n > 0.0 { r / n } else { 0.0 };
                for (vi, c) in v.iter_mut().zip(center) {
                    *vi = c + t * *vi;
                }
                Ok(v)
            }
            FeasibleSet::Box { lower, upper } => Ok(lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l + (u - l) * rng.gen::<f64>())
                .collect()),
            FeasibleSet::Unconstrained => Err(Error::UnboundedSet(
                "cannot sample the unconstrained set".into(),
            )),
        }
    }
}
