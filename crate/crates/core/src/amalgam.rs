//! Local maximum function, the `W(L^inf, L^2)` amalgam norm, tail masses,
//! and the sampling bound
//!
//! ```text
//! sum_{x_j not in K} |f(x_j)|^2  <=  (C0 / |U|) * sum_{x in K^c U} f#(x)^2 |x|
//! ```
//!
//! with `C0 = || sum_j chi_{x_j U} ||_inf`. Every supremum is an exact maximum
//! over the finite carrier. Tail masses integrate the squared maximal function.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::group::{CompactSet, GroupModel, PointSet};
use crate::hilbert::VoiceTransform;

/// Relative slack allowed in the sampling bound.
pub const SAMPLING_SLACK: f64 = 1e-9;

/// A function on the carrier of a group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFunction {
    values: Vec<Complex64>,
}

impl GroupFunction {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(order: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); order])
    }

    pub fn indicator(order: usize, at: usize) -> Self {
        let mut f = Self::zeros(order);
        f.values[at] = Complex64::new(1.0, 0.0);
        f
    }

    pub fn from_voice(v: &VoiceTransform) -> Self {
        Self::new(v.values().to_vec())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, x: usize) -> Complex64 {
        self.values[x]
    }

    pub fn abs(&self, x: usize) -> f64 {
        self.values[x].norm()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Real parts, for functions known to be real (such as maximal functions).
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }
}

/// `f#(x) = max_{y in xU} |f(y)|`.
pub fn local_max(group: &GroupModel, f: &GroupFunction, u: &CompactSet) -> Result<GroupFunction> {
    group.check_neighborhood(u)?;
    let mut out = Vec::with_capacity(group.order());
    for x in 0..group.order() {
        let mut best = 0.0f64;
        for &v in u.iter() {
            best = best.max(f.abs(group.compose(x, v)?));
        }
        out.push(best);
    }
    Ok(GroupFunction::from_real(&out))
}

/// `|| f ||_{W(L^inf, L^2)} = || f# ||_2`.
pub fn amalgam_norm(group: &GroupModel, f: &GroupFunction, u: &CompactSet) -> Result<f64> {
    let sharp = local_max(group, f, u)?;
    Ok(weighted_square_sum(group, &sharp, &group.full_set()).sqrt())
}

fn weighted_square_sum(group: &GroupModel, f: &GroupFunction, over: &CompactSet) -> f64 {
    over.iter().fold(0.0, |acc, &x| acc + f.abs(x).powi(2) * group.haar_weight(x))
}

/// `sum_{x in L^c U} f#(x)^2 |x|`.
pub fn tail_mass(group: &GroupModel, f: &GroupFunction, u: &CompactSet, l: &CompactSet) -> Result<f64> {
    let sharp = local_max(group, f, u)?;
    let region = group.product_set(&group.complement(l), u)?;
    Ok(weighted_square_sum(group, &sharp, &region))
}

/// Both sides of the sampling bound together with its constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBound {
    pub lhs: f64,
    pub rhs: f64,
    /// `C = C0 / |U|`.
    pub c: f64,
    pub c0: usize,
    /// `sum_{x in K^c U} f#(x)^2 |x|`.
    pub integral: f64,
    pub holds: bool,
}

pub fn sampling_bound_check(
    group: &GroupModel,
    f: &GroupFunction,
    points: &PointSet,
    k: &CompactSet,
    u: &CompactSet,
) -> Result<SamplingBound> {
    let c0 = group.indicator_sum_bound(points, u)?;
    let c = c0 as f64 / group.measure(u);
    let lhs: f64 = points.iter().filter(|&&p| !k.contains(p)).map(|&p| f.abs(p).powi(2)).sum();
    let integral = tail_mass(group, f, u, k)?;
    let rhs = c * integral;
    Ok(SamplingBound { lhs, rhs, c, c0, integral, holds: lhs <= rhs * (1.0 + SAMPLING_SLACK) })
}

/// A randomly drawn `(f, X, K, U)` for exercising the sampling bound.
#[derive(Debug, Clone)]
pub struct SamplingInstance {
    pub f: GroupFunction,
    pub points: PointSet,
    pub k: CompactSet,
    pub u: CompactSet,
    pub k_radius: u64,
    pub u_radius: u64,
}

impl SamplingInstance {
    /// Gaussian `f` with roughly a third of its entries zeroed, `X` of random
    /// size drawn with replacement, `K` a random translate of a ball and `U` a
    /// ball, both radii in `0..=max_radius`.
    pub fn random(group: &GroupModel, max_radius: u64, rng: &mut impl Rng) -> Result<Self> {
        let n = group.order();
        let values = (0..n)
            .map(|_| {
                if rng.random_bool(1.0 / 3.0) {
                    Complex64::new(0.0, 0.0)
                } else {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re, im)
                }
            })
            .collect();
        let m = rng.random_range(1..=2 * n);
        let points = PointSet::new((0..m).map(|_| rng.random_range(0..n)).collect());
        let k_radius = rng.random_range(0..=max_radius);
        let u_radius = rng.random_range(0..=max_radius);
        let center = rng.random_range(0..n);
        let k = group.translate_set(center, &group.ball(k_radius))?;
        Ok(Self { f: GroupFunction::new(values), points, k, u: group.ball(u_radius), k_radius, u_radius })
    }

    pub fn check(&self, group: &GroupModel) -> Result<SamplingBound> {
        sampling_bound_check(group, &self.f, &self.points, &self.k, &self.u)
    }
}
