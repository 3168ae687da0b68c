//! Discrete probability measures on point clouds, plus grid construction,
//! box sampling, moments, and Kullback-Leibler divergence.
//!
//! A measure stores `d`-dimensional support points (flat, row-major) and one
//! nonnegative weight per point. Construction merges points with bitwise
//! identical coordinates (weights add), normalizes the weight vector, and
//! then nudges the largest weight so the sum is exactly one in floating
//! point; every constructed measure satisfies the sum invariant used by the
//! rest of the crate.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::num;
#[cfg(test)]
use crate::tol;

/// How far an explicit weight vector may stray from summing to one before we
/// reject it as malformed rather than normalizing it.
const WEIGHT_SUM_INPUT_ABS: f64 = 1e-9;

/// Proposal budget per accepted sample in rejection sampling.
const SAMPLER_MAX_PROPOSAL_FACTOR: usize = 10_000;

/// A finitely supported probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Serialized shape: `{"points": [[...], ...], "weights": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.points, raw.weights)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure {
            points: (0..m.len()).map(|i| m.point(i).to_vec()).collect(),
            weights: m.weights,
        }
    }
}

impl DiscreteMeasure {
    /// Build a measure from explicit points and probability weights.
    ///
    /// Duplicated points (bitwise identical coordinates) are merged by adding
    /// their weights, keeping first-occurrence order. The weight vector must
    /// already sum to one up to input tolerance; it is then renormalized so
    /// the invariant holds exactly.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        Self::build(points, weights, false)
    }

    /// Build a measure from nonnegative masses that need not sum to one.
    pub fn from_unnormalized(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        Self::build(points, weights, true)
    }

    /// Uniform measure on the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::build(points, vec![1.0; n.max(1)], true)
    }

    fn build(points: Vec<Vec<f64>>, weights: Vec<f64>, rescale_any: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySupport);
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: points.len(),
                got: weights.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidParam {
                name: "points",
                reason: "points must have at least one coordinate".into(),
            });
        }
        let mut sum = 0.0;
        for (i, (p, &w)) in points.iter().zip(weights.iter()).enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "point",
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { what: "point coordinates" });
            }
            if !w.is_finite() {
                return Err(Error::NonFinite { what: "weights" });
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight { index: i, value: w });
            }
            sum += w;
        }
        if !rescale_any && (sum - 1.0).abs() > WEIGHT_SUM_INPUT_ABS {
            return Err(Error::WeightSum { sum });
        }
        if !(sum > 0.0) {
            return Err(Error::WeightSum { sum });
        }

        // Merge bitwise-identical points, first occurrence wins the slot.
        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.len());
        let mut flat: Vec<f64> = Vec::with_capacity(points.len() * dim);
        let mut merged: Vec<f64> = Vec::with_capacity(points.len());
        for (p, &w) in points.iter().zip(weights.iter()) {
            let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
            match index.get(&key) {
                Some(&slot) => merged[slot] += w,
                None => {
                    index.insert(key, merged.len());
                    merged.push(w);
                    flat.extend_from_slice(p);
                }
            }
        }

        let total: f64 = merged.iter().sum();
        for w in merged.iter_mut() {
            *w /= total;
        }
        // Force the sum to one exactly: put the rounding defect on the
        // largest weight, which changes it by at most a few ulp.
        let defect = 1.0 - merged.iter().sum::<f64>();
        if defect != 0.0 {
            let argmax = merged
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            merged[argmax] += defect;
        }

        Ok(DiscreteMeasure {
            dim,
            points: flat,
            weights: merged,
        })
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// True when the support is empty (never for a constructed measure).
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Dimension of the support points.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinates of point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// All weights, in point order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Smallest weight.
    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest weight.
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest Euclidean norm over the support points.
    pub fn support_radius(&self) -> f64 {
        (0..self.len())
            .map(|i| self.point(i).iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Points as owned vectors (serialization and display helper).
    pub fn points_vec(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i).to_vec()).collect()
    }

    /// Replace the weights, keeping the same support (lengths must match).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        DiscreteMeasure::new(self.points_vec(), weights)
    }

    /// Index of the support point with exactly these coordinates, if any.
    pub fn find_point(&self, p: &[f64]) -> Option<usize> {
        (0..self.len()).find(|&i| {
            self.point(i)
                .iter()
                .zip(p.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
        })
    }
}

/// Named density for grids and samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    /// Constant density.
    Uniform,
    /// `exp(-|x - mean|^2 / (2 sigma^2))`, up to normalization.
    Gaussian { mean: Vec<f64>, sigma: f64 },
    /// `exp(-V(x))` with convex quadratic `V(x) = sum_k curvature[k] * (x[k] - center[k])^2`.
    LogConcave { center: Vec<f64>, curvature: Vec<f64> },
}

impl Density {
    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Density::Uniform => Ok(()),
            Density::Gaussian { mean, sigma } => {
                if mean.len() != dim {
                    return Err(Error::DimensionMismatch {
                        what: "density mean",
                        expected: dim,
                        got: mean.len(),
                    });
                }
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidParam {
                        name: "sigma",
                        reason: format!("must be finite and positive, got {sigma}"),
                    });
                }
                Ok(())
            }
            Density::LogConcave { center, curvature } => {
                if center.len() != dim || curvature.len() != dim {
                    return Err(Error::DimensionMismatch {
                        what: "density parameters",
                        expected: dim,
                        got: center.len().min(curvature.len()),
                    });
                }
                if curvature.iter().any(|a| !a.is_finite() || *a < 0.0) {
                    return Err(Error::InvalidParam {
                        name: "curvature",
                        reason: "entries must be finite and nonnegative".into(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Log density (up to an additive constant) at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Density::Uniform => 0.0,
            Density::Gaussian { mean, sigma } => {
                let mut q = 0.0;
                for (xi, mi) in x.iter().zip(mean.iter()) {
                    let d = xi - mi;
                    q += d * d;
                }
                -q / (2.0 * sigma * sigma)
            }
            Density::LogConcave { center, curvature } => {
                let mut v = 0.0;
                for ((xi, ci), ai) in x.iter().zip(center.iter()).zip(curvature.iter()) {
                    let d = xi - ci;
                    v += ai * d * d;
                }
                -v
            }
        }
    }

    /// Point of the box `[lo, hi]` where the log density is maximal.
    fn box_mode(&self, lo: &[f64], hi: &[f64]) -> Vec<f64> {
        match self {
            Density::Uniform => lo.to_vec(),
            Density::Gaussian { mean, .. } => mean
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .map(|(m, (l, h))| m.clamp(*l, *h))
                .collect(),
            Density::LogConcave { center, .. } => center
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .map(|(c, (l, h))| c.clamp(*l, *h))
                .collect(),
        }
    }
}

/// An axis-aligned lattice with a named density on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per axis, endpoints included.
    pub n: usize,
    pub density: Density,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, n: usize, density: Density) -> Result<Self> {
        let spec = GridSpec { lo, hi, n, density };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.lo.len();
        if dim == 0 || self.hi.len() != dim {
            return Err(Error::InvalidGrid {
                reason: format!(
                    "bounds must be non-empty and equally long (lo: {}, hi: {})",
                    self.lo.len(),
                    self.hi.len()
                ),
            });
        }
        if self.n < 2 {
            return Err(Error::InvalidGrid {
                reason: format!("need at least 2 points per axis, got {}", self.n),
            });
        }
        for (l, h) in self.lo.iter().zip(self.hi.iter()) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidGrid {
                    reason: format!("each axis needs finite lo < hi, got [{l}, {h}]"),
                });
            }
        }
        self.density.validate(dim)?;
        Ok(())
    }

    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn axis_value(&self, axis: usize, idx: usize) -> f64 {
        let step = (self.hi[axis] - self.lo[axis]) / (self.n as f64 - 1.0);
        self.lo[axis] + step * idx as f64
    }
}

/// Lattice measure: `n` points per axis including the endpoints, weights
/// proportional to the density at each lattice point, renormalized.
pub fn make_grid_measure(spec: &GridSpec) -> Result<DiscreteMeasure> {
    spec.validate()?;
    let dim = spec.dim();
    let total: usize = spec.n.checked_pow(dim as u32).ok_or(Error::InvalidGrid {
        reason: format!("grid too large: {}^{dim} points", spec.n),
    })?;

    let mut points = Vec::with_capacity(total);
    let mut logw = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    'outer: loop {
        let p: Vec<f64> = (0..dim).map(|a| spec.axis_value(a, idx[a])).collect();
        logw.push(spec.density.log_density(&p));
        points.push(p);
        // Odometer increment, last axis fastest.
        let mut axis = dim - 1;
        loop {
            idx[axis] += 1;
            if idx[axis] < spec.n {
                continue 'outer;
            }
            idx[axis] = 0;
            if axis == 0 {
                break 'outer;
            }
            axis -= 1;
        }
    }
    finish_grid(points, logw)
}

fn finish_grid(points: Vec<Vec<f64>>, logw: Vec<f64>) -> Result<DiscreteMeasure> {
    // Shift by the max before exponentiating so the weights are immune to
    // underflow; proportionality is unchanged.
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::DegenerateDensity);
    }
    let weights: Vec<f64> = logw.iter().map(|&l| (l - m).exp()).collect();
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::DegenerateDensity);
    }
    DiscreteMeasure::from_unnormalized(points, weights)
}

/// A named density restricted to a box, used for drawing i.i.d. samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSampler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub density: Density,
}

impl BoxSampler {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, density: Density) -> Result<Self> {
        let s = BoxSampler { lo, hi, density };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.lo.len();
        if dim == 0 || self.hi.len() != dim {
            return Err(Error::InvalidGrid {
                reason: "sampler bounds must be non-empty and equally long".into(),
            });
        }
        for (l, h) in self.lo.iter().zip(self.hi.iter()) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidGrid {
                    reason: format!("each axis needs finite lo < hi, got [{l}, {h}]"),
                });
            }
        }
        self.density.validate(dim)
    }
}

/// Draw `n` i.i.d. points from the sampler's density restricted to its box
/// (rejection against the uniform proposal) and return the empirical measure
/// with weights `1/n`. Deterministic for a fixed `seed`.
pub fn sample_empirical(sampler: &BoxSampler, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    sampler.validate()?;
    if n == 0 {
        return Err(Error::InvalidParam {
            name: "n",
            reason: "need at least one sample".into(),
        });
    }
    let dim = sampler.lo.len();
    let mode = sampler.density.box_mode(&sampler.lo, &sampler.hi);
    let log_max = sampler.density.log_density(&mode);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut proposals = 0usize;
    let budget = n.saturating_mul(SAMPLER_MAX_PROPOSAL_FACTOR);
    while points.len() < n {
        if proposals >= budget {
            return Err(Error::SamplerStalled);
        }
        proposals += 1;
        let p: Vec<f64> = (0..dim)
            .map(|a| {
                let u: f64 = rng.gen();
                sampler.lo[a] + u * (sampler.hi[a] - sampler.lo[a])
            })
            .collect();
        let accept = (sampler.density.log_density(&p) - log_max).exp();
        let u: f64 = rng.gen();
        if u <= accept {
            points.push(p);
        }
    }
    DiscreteMeasure::new(points, vec![1.0 / n as f64; n])
}

/// Expectation of the vector `f` (one value per support point).
pub fn expectation(m: &DiscreteMeasure, f: &[f64]) -> Result<f64> {
    if f.len() != m.len() {
        return Err(Error::LengthMismatch {
            what: "function values",
            expected: m.len(),
            got: f.len(),
        });
    }
    Ok(num::weighted_mean(m.weights(), f))
}

/// Variance of the vector `f` under the measure.
pub fn variance(m: &DiscreteMeasure, f: &[f64]) -> Result<f64> {
    if f.len() != m.len() {
        return Err(Error::LengthMismatch {
            what: "function values",
            expected: m.len(),
            got: f.len(),
        });
    }
    Ok(num::weighted_variance(m.weights(), f))
}

/// Kullback-Leibler divergence `KL(rho | pi)` between measures on the same
/// support points (paired by identical coordinates, any order).
///
/// Terms with `rho_i = 0` contribute zero; a point with `rho_i > 0` but
/// `pi_i = 0` makes the divergence `+inf`. The result is clamped at zero so
/// rounding on near-identical inputs cannot produce a negative value.
pub fn kl_divergence(rho: &DiscreteMeasure, pi: &DiscreteMeasure) -> Result<f64> {
    if rho.dim() != pi.dim() {
        return Err(Error::SupportMismatch {
            reason: format!(
                "point dimensions differ ({} vs {})",
                rho.dim(),
                pi.dim()
            ),
        });
    }
    if rho.len() != pi.len() {
        return Err(Error::SupportMismatch {
            reason: format!("support sizes differ ({} vs {})", rho.len(), pi.len()),
        });
    }
    let mut pi_index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(pi.len());
    for j in 0..pi.len() {
        let key: Vec<u64> = pi.point(j).iter().map(|x| x.to_bits()).collect();
        pi_index.insert(key, j);
    }
    let mut sum = 0.0;
    for i in 0..rho.len() {
        let key: Vec<u64> = rho.point(i).iter().map(|x| x.to_bits()).collect();
        let j = *pi_index.get(&key).ok_or_else(|| Error::SupportMismatch {
            reason: format!("point {:?} has no partner", rho.point(i)),
        })?;
        let r = rho.weights()[i];
        let p = pi.weights()[j];
        if r > 0.0 {
            if p == 0.0 {
                return Ok(f64::INFINITY);
            }
            sum += r * (r / p).ln();
        }
    }
    Ok(sum.max(0.0))
}

/// KL divergence between two weight vectors over the same indexing (used when
/// both live on one shared support in a known order).
pub fn kl_weights(rho: &[f64], pi: &[f64]) -> f64 {
    debug_assert_eq!(rho.len(), pi.len());
    let mut sum = 0.0;
    for i in 0..rho.len() {
        if rho[i] > 0.0 {
            if pi[i] == 0.0 {
                return f64::INFINITY;
            }
            sum += rho[i] * (rho[i] / pi[i]).ln();
        }
    }
    sum.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn construction_normalizes_and_sums_to_one() {
        let m = DiscreteMeasure::new(pts(&[0.0, 1.0]), vec![0.5, 0.5]).unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() <= tol::WEIGHT_SUM_ABS);
        assert_eq!(m.len(), 2);
        assert_eq!(m.dim(), 1);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            DiscreteMeasure::new(vec![], vec![]),
            Err(Error::EmptySupport)
        ));
        assert!(matches!(
            DiscreteMeasure::new(pts(&[0.0]), vec![0.5, 0.5]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(pts(&[0.0, 1.0]), vec![1.5, -0.5]),
            Err(Error::NegativeWeight { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(pts(&[0.0, 1.0]), vec![0.9, 0.3]),
            Err(Error::WeightSum { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(vec![vec![f64::NAN]], vec![1.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_points_merge_by_adding_weights() {
        let m =
            DiscreteMeasure::new(pts(&[0.0, 1.0, 0.0]), vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(m.len(), 2);
        // First occurrence order: {0, 1} with weights {0.5, 0.5}.
        assert_eq!(m.point(0), &[0.0]);
        assert_eq!(m.point(1), &[1.0]);
        assert!((m.weights()[0] - 0.5).abs() < 1e-15);
        assert!((m.weights()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_grid_on_unit_interval_with_two_points_uses_endpoints() {
        let spec = GridSpec::new(vec![0.0], vec![1.0], 2, Density::Uniform).unwrap();
        let m = make_grid_measure(&spec).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.point(0), &[0.0]);
        assert_eq!(m.point(1), &[1.0]);
        assert!((m.weights()[0] - 0.5).abs() < 1e-15);
        assert!((m.weights()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_grid_weights_are_proportional_to_the_density() {
        // Three points {-1, 0, 1} with density exp(-x^2/2): weights must be
        // proportional to {e^{-1/2}, 1, e^{-1/2}} after renormalization.
        let spec = GridSpec::new(
            vec![-1.0],
            vec![1.0],
            3,
            Density::Gaussian { mean: vec![0.0], sigma: 1.0 },
        )
        .unwrap();
        let m = make_grid_measure(&spec).unwrap();
        let side = (-0.5_f64).exp();
        let z = 2.0 * side + 1.0;
        assert!((m.weights()[0] - side / z).abs() < 1e-15);
        assert!((m.weights()[1] - 1.0 / z).abs() < 1e-15);
        assert!((m.weights()[2] - side / z).abs() < 1e-15);
        // Symmetry of the density about its mean.
        assert_eq!(m.weights()[0], m.weights()[2]);
    }

    #[test]
    fn log_concave_quadratic_density_matches_gaussian_parameterization() {
        let g = GridSpec::new(
            vec![-2.0],
            vec![2.0],
            9,
            Density::Gaussian { mean: vec![0.5], sigma: 2.0 },
        )
        .unwrap();
        let q = GridSpec::new(
            vec![-2.0],
            vec![2.0],
            9,
            Density::LogConcave { center: vec![0.5], curvature: vec![1.0 / 8.0] },
        )
        .unwrap();
        let mg = make_grid_measure(&g).unwrap();
        let mq = make_grid_measure(&q).unwrap();
        assert!(num::sup_abs_diff(mg.weights(), mq.weights()) < 1e-14);
    }

    #[test]
    fn two_dimensional_grid_has_full_cartesian_product() {
        let spec = GridSpec::new(vec![0.0, 0.0], vec![1.0, 2.0], 3, Density::Uniform).unwrap();
        let m = make_grid_measure(&spec).unwrap();
        assert_eq!(m.len(), 9);
        assert_eq!(m.point(0), &[0.0, 0.0]);
        assert_eq!(m.point(1), &[0.0, 1.0]); // last axis varies fastest
        assert_eq!(m.point(8), &[1.0, 2.0]);
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() <= tol::WEIGHT_SUM_ABS);
    }

    #[test]
    fn grid_validation_errors() {
        assert!(GridSpec::new(vec![0.0], vec![0.0], 2, Density::Uniform).is_err());
        assert!(GridSpec::new(vec![0.0], vec![1.0], 1, Density::Uniform).is_err());
        assert!(GridSpec::new(
            vec![0.0],
            vec![1.0],
            2,
            Density::Gaussian { mean: vec![0.0], sigma: 0.0 }
        )
        .is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_roughly_unbiased() {
        let sampler = BoxSampler::new(
            vec![-6.0],
            vec![6.0],
            Density::Gaussian { mean: vec![0.0], sigma: 1.0 },
        )
        .unwrap();
        let a = sample_empirical(&sampler, 10_000, 7).unwrap();
        let b = sample_empirical(&sampler, 10_000, 7).unwrap();
        assert_eq!(a, b);
        let xs: Vec<f64> = (0..a.len()).map(|i| a.point(i)[0]).collect();
        let mean = expectation(&a, &xs).unwrap();
        assert!(mean.abs() < 0.05, "sample mean {mean} too far from 0");
        let var = variance(&a, &xs).unwrap();
        assert!((var - 1.0).abs() < 0.1, "sample variance {var} too far from 1");
        // Weights are 1/N up to the construction-time renormalization,
        // which only moves them by accumulated ulps.
        assert!((a.weights()[0] - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn sampling_different_seeds_differ() {
        let sampler =
            BoxSampler::new(vec![0.0], vec![1.0], Density::Uniform).unwrap();
        let a = sample_empirical(&sampler, 16, 1).unwrap();
        let b = sample_empirical(&sampler, 16, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn expectation_and_variance_match_hand_values() {
        let m = DiscreteMeasure::new(pts(&[0.0, 1.0, 2.0]), vec![0.25, 0.5, 0.25]).unwrap();
        let f = [1.0, 3.0, 5.0];
        assert!((expectation(&m, &f).unwrap() - 3.0).abs() < 1e-15);
        assert!((variance(&m, &f).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            expectation(&m, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            variance(&m, &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn kl_divergence_hand_values_and_edge_cases() {
        let rho = DiscreteMeasure::new(pts(&[0.0, 1.0]), vec![1.0, 0.0]).unwrap();
        let pi = DiscreteMeasure::new(pts(&[0.0, 1.0]), vec![0.5, 0.5]).unwrap();
        let kl = kl_divergence(&rho, &pi).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-15);
        // Reverse direction hits a zero in the denominator.
        assert_eq!(kl_divergence(&pi, &rho).unwrap(), f64::INFINITY);
        // Identical measures have zero divergence.
        assert_eq!(kl_divergence(&pi, &pi).unwrap(), 0.0);
        // Pairing is by coordinates, not storage order.
        let pi_swapped = DiscreteMeasure::new(pts(&[1.0, 0.0]), vec![0.5, 0.5]).unwrap();
        assert!((kl_divergence(&rho, &pi_swapped).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        // Disjoint supports are an error, not infinity.
        let other = DiscreteMeasure::new(pts(&[5.0, 6.0]), vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            kl_divergence(&rho, &other),
            Err(Error::SupportMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn constructed_measures_always_sum_to_one(
            raw in proptest::collection::vec(0.01f64..10.0, 1..40)
        ) {
            let points: Vec<Vec<f64>> = (0..raw.len()).map(|i| vec![i as f64]).collect();
            let m = DiscreteMeasure::from_unnormalized(points, raw).unwrap();
            let sum: f64 = m.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= tol::WEIGHT_SUM_ABS);
            prop_assert!(m.weights().iter().all(|w| *w >= 0.0));
        }

        #[test]
        fn kl_is_nonnegative_and_zero_only_near_equality(
            raw_r in proptest::collection::vec(0.05f64..1.0, 4),
            raw_p in proptest::collection::vec(0.05f64..1.0, 4),
        ) {
            let points: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
            let rho = DiscreteMeasure::from_unnormalized(points.clone(), raw_r).unwrap();
            let pi = DiscreteMeasure::from_unnormalized(points, raw_p).unwrap();
            let kl = kl_divergence(&rho, &pi).unwrap();
            prop_assert!(kl >= 0.0);
            let same = kl_divergence(&rho, &rho).unwrap();
            prop_assert!(same.abs() <= 1e-15);
        }

        #[test]
        fn variance_is_invariant_to_shifts_and_scales_quadratically(
            raw in proptest::collection::vec(0.05f64..1.0, 5),
            f in proptest::collection::vec(-3.0f64..3.0, 5),
            shift in -5.0f64..5.0,
            scale in 0.1f64..3.0,
        ) {
            let points: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
            let m = DiscreteMeasure::from_unnormalized(points, raw).unwrap();
            let v = variance(&m, &f).unwrap();
            let shifted: Vec<f64> = f.iter().map(|x| x + shift).collect();
            let scaled: Vec<f64> = f.iter().map(|x| x * scale).collect();
            prop_assert!((variance(&m, &shifted).unwrap() - v).abs() < 1e-10);
            prop_assert!((variance(&m, &scaled).unwrap() - scale * scale * v).abs() < 1e-9 * (1.0 + v));
        }
    }
}
