//! Seeded random problems, potentials, and directions for tests, examples,
//! and randomized audits. Everything is a pure function of the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cost::CostModel;
use crate::measure::DiscreteMeasure;
use crate::sinkhorn::{Instance, Potential, Problem};

/// The crate-wide deterministic generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive weights summing to one, bounded away from zero.
pub fn random_simplex_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// A measure on the distinct one-dimensional points `0, 1, ..., n-1` with
/// random positive weights.
pub fn random_measure(seed: u64, n: usize) -> DiscreteMeasure {
    let mut r = rng(seed);
    let points: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
    let weights = random_simplex_weights(&mut r, n);
    DiscreteMeasure::new(points, weights).expect("synthetic measure is valid")
}

/// A dense cost matrix with entries uniform in `[-scale/2, scale/2]`, so the
/// oscillation is at most `scale`.
pub fn random_cost_entries(rng: &mut ChaCha8Rng, n_x: usize, n_y: usize, scale: f64) -> Vec<f64> {
    (0..n_x * n_y)
        .map(|_| rng.gen_range(-0.5 * scale..0.5 * scale))
        .collect()
}

/// A random bounded-cost instance (marginal weights and cost entries both
/// derived from the seed).
pub fn random_instance(seed: u64, n_x: usize, n_y: usize, cost_scale: f64) -> Instance {
    let mu = random_measure(seed.wrapping_mul(2).wrapping_add(1), n_x);
    let nu = random_measure(seed.wrapping_mul(2).wrapping_add(2), n_y);
    let mut r = rng(seed.wrapping_mul(2).wrapping_add(3));
    let entries = random_cost_entries(&mut r, n_x, n_y, cost_scale);
    let r_x = mu.support_radius();
    let cost = CostModel::from_matrix(entries, n_x, n_y, 0.0, 0.0, r_x)
        .expect("synthetic cost is valid");
    Instance::new(mu, nu, cost).expect("synthetic instance is valid")
}

/// A random bounded-cost problem at the given regularization.
pub fn random_problem(seed: u64, n_x: usize, n_y: usize, lambda: f64, cost_scale: f64) -> Problem {
    random_instance(seed, n_x, n_y, cost_scale)
        .problem(lambda)
        .expect("synthetic lambda is valid")
}

/// A measure on random points inside `[lo, hi]` with random positive
/// weights (duplicate draws, which have probability zero, would be merged).
pub fn random_measure_in_box(seed: u64, n: usize, lo: f64, hi: f64) -> DiscreteMeasure {
    let mut r = rng(seed);
    let points: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(lo..hi)]).collect();
    let weights = random_simplex_weights(&mut r, n);
    DiscreteMeasure::new(points, weights).expect("synthetic measure is valid")
}

/// Plain uniform values in `[lo, hi]`.
pub fn random_values(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen_range(lo..hi)).collect()
}

/// A potential on the second support with values uniform in `[-scale, scale]`.
pub fn random_potential(seed: u64, n: usize, scale: f64) -> Potential {
    let mut r = rng(seed);
    let values: Vec<f64> = (0..n).map(|_| r.gen_range(-scale..scale)).collect();
    Potential::on_y(values).expect("synthetic potential is valid")
}

/// A direction vector rescaled to oscillation exactly one.
pub fn random_unit_oscillation(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    let mut v: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    if spread > 1e-9 {
        for x in v.iter_mut() {
            *x = (*x - lo) / spread;
        }
    } else {
        // Degenerate draw: fall back to a deterministic ramp.
        for (i, x) in v.iter_mut().enumerate() {
            *x = i as f64 / (n.max(2) - 1) as f64;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_reproduces_same_instance() {
        let a = random_problem(7, 5, 4, 0.5, 1.0);
        let b = random_problem(7, 5, 4, 0.5, 1.0);
        assert_eq!(a.mu().weights(), b.mu().weights());
        assert_eq!(a.cost().entries(), b.cost().entries());
        let c = random_problem(8, 5, 4, 0.5, 1.0);
        assert_ne!(a.cost().entries(), c.cost().entries());
    }

    #[test]
    fn cost_scale_bounds_the_oscillation() {
        let p = random_problem(9, 10, 10, 1.0, 0.3);
        assert!(p.cost().meta().c_osc <= 0.3);
        assert!(p.cost().meta().c_osc > 0.0);
    }

    #[test]
    fn weights_are_positive_and_normalized() {
        let m = random_measure(3, 9);
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(m.min_weight() > 0.01);
    }

    #[test]
    fn unit_oscillation_directions_have_unit_spread() {
        let v = random_unit_oscillation(5, 8);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((hi - lo - 1.0).abs() < 1e-12);
        assert!(lo >= 0.0 && hi <= 1.0);
    }
}
