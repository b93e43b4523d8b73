//! Point clouds under the null (uniform noise) and under the mixture
//! alternative `(1 - eps) Uniform[0,1]^2 + eps Uniform(graph f)`.
//!
//! Every generator draws from a [`ChaCha8Rng`] selected by `(seed, stream)`.
//! Experiments use one stream per trial index, so trials can run in any order
//! or in parallel and still produce the same clouds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counter::PointCloud;
use crate::error::{invalid, Result};
use crate::holder::{ArcLength, CurveSpec, HolderCurve};
use crate::scalar::{Point2, Real};

/// Generator for stream `stream` of seed `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    pub epsilon: f64,
    pub curve: Option<CurveSpec>,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(invalid("epsilon", self.epsilon, "must lie in [0, 1]"));
        }
        match &self.curve {
            None if self.epsilon > 0.0 => Err(invalid("epsilon", self.epsilon, "a positive weight needs a curve")),
            Some(c) => c.validate(),
            None => Ok(()),
        }
    }
}

/// A mixture cloud and how many of its points came from the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample<T> {
    pub cloud: PointCloud<T>,
    pub curve_points: usize,
}

fn uniform_point<T: Real>(rng: &mut impl Rng) -> Point2<T> {
    let x = rng.gen::<f64>();
    let y = rng.gen::<f64>();
    Point2::new(T::of(x), T::of(y))
}

/// `n` i.i.d. uniform points drawn from stream 0 of `seed`.
pub fn sample_null<T: Real>(n: usize, seed: u64) -> PointCloud<T> {
    sample_null_from(n, &mut trial_rng(seed, 0))
}

pub fn sample_null_from<T: Real>(n: usize, rng: &mut impl Rng) -> PointCloud<T> {
    let pts = (0..n).map(|_| uniform_point(rng)).collect();
    PointCloud::new(pts).expect("uniform draws lie in the unit square")
}

/// A point uniform with respect to arc length on the graph.
pub fn sample_curve_point<C: HolderCurve, T: Real>(arc: &ArcLength<C>, rng: &mut impl Rng) -> Point2<T> {
    let x = arc.inverse(rng.gen::<f64>());
    let y = arc.curve().value(x).clamp(0.0, 1.0);
    Point2::new(T::of(x), T::of(y))
}

/// Draws a mixture cloud from stream 0 of `spec.seed`.
pub fn sample_mixture<T: Real>(spec: &MixtureSpec) -> Result<MixtureSample<T>> {
    spec.validate()?;
    let mut rng = trial_rng(spec.seed, 0);
    Ok(match spec.curve {
        Some(c) if spec.epsilon > 0.0 => sample_mixture_from(&ArcLength::new(c), spec.n, spec.epsilon, &mut rng),
        _ => MixtureSample {
            cloud: sample_null_from(spec.n, &mut rng),
            curve_points: 0,
        },
    })
}

/// Mixture draw with a prebuilt arc-length table. Each point consumes one
/// uniform for the component choice and then one or two for the location.
pub fn sample_mixture_from<C: HolderCurve, T: Real>(
    arc: &ArcLength<C>,
    n: usize,
    epsilon: f64,
    rng: &mut impl Rng,
) -> MixtureSample<T> {
    let mut curve_points = 0;
    let pts = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < epsilon {
                curve_points += 1;
                sample_curve_point(arc, rng)
            } else {
                uniform_point(rng)
            }
        })
        .collect();
    MixtureSample {
        cloud: PointCloud::new(pts).expect("mixture draws lie in the unit square"),
        curve_points,
    }
}
