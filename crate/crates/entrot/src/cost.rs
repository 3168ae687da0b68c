//! Dense cost matrices between two discrete supports.
//!
//! A cost model stores the full `|X| x |Y|` matrix (row-major) together with
//! metadata the checkers consume: the oscillation `max - min` of the entries,
//! a Lipschitz estimate in the first argument when the cost kind provides
//! one, semiconvexity/semiconcavity moduli, and the radius of the first
//! support.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::num;

/// Guard against accidentally huge dense allocations.
pub const MAX_DENSE_ENTRIES: usize = 4000 * 4000;

/// Builtin cost kinds plus user-supplied matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `c(x, y) = -<x, y>`.
    Linear,
    /// `c(x, y) = |x - y|^2`.
    Quadratic,
    /// Entries supplied directly.
    Explicit,
}

/// Analytic metadata attached to a cost matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostMeta {
    /// `max - min` over the stored entries.
    pub c_osc: f64,
    /// Lipschitz modulus of `x -> c(x, y)` over the supports, when known.
    pub lip: Option<f64>,
    /// Semiconvexity modulus of `x -> c(x, y)` (zero for the bilinear kind,
    /// two for squared distance, user-supplied for explicit matrices).
    pub xi: f64,
    /// Semiconcavity modulus, same conventions as `xi`.
    pub zeta: f64,
    /// Largest Euclidean norm over the first support.
    pub r_x: f64,
}

/// Dense cost matrix with metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    kind: CostKind,
    n_x: usize,
    n_y: usize,
    /// Row-major entries, `matrix[i * n_y + j] = c(x_i, y_j)`.
    matrix: Vec<f64>,
    meta: CostMeta,
}

impl CostModel {
    /// Evaluate a builtin kind on the two supports.
    pub fn build(kind: CostKind, x: &DiscreteMeasure, y: &DiscreteMeasure) -> Result<Self> {
        if kind == CostKind::Explicit {
            return Err(Error::InvalidParam {
                name: "kind",
                reason: "explicit costs need a matrix; use from_matrix".into(),
            });
        }
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                what: "cost supports",
                expected: x.dim(),
                got: y.dim(),
            });
        }
        let (n_x, n_y) = (x.len(), y.len());
        check_size(n_x, n_y)?;
        let matrix = num::fill_rows(n_x, n_y, |i, row| {
            let xi = x.point(i);
            for (j, slot) in row.iter_mut().enumerate() {
                let yj = y.point(j);
                *slot = match kind {
                    CostKind::Linear => -num::dot(xi, yj),
                    CostKind::Quadratic => {
                        let mut s = 0.0;
                        for (a, b) in xi.iter().zip(yj.iter()) {
                            let d = a - b;
                            s += d * d;
                        }
                        s
                    }
                    CostKind::Explicit => unreachable!(),
                };
            }
        });
        let r_x = x.support_radius();
        let r_y = y.support_radius();
        let (lip, xi_mod, zeta_mod) = match kind {
            // x -> -<x, y> has gradient -y, so the modulus over the opposite
            // support is its largest norm; the map is linear (moduli zero).
            CostKind::Linear => (Some(r_y), 0.0, 0.0),
            // x -> |x - y|^2 has gradient 2(x - y).
            CostKind::Quadratic => (Some(2.0 * (r_x + r_y)), 2.0, 2.0),
            CostKind::Explicit => unreachable!(),
        };
        let c_osc = num::oscillation(&matrix);
        Ok(CostModel {
            kind,
            n_x,
            n_y,
            matrix,
            meta: CostMeta { c_osc, lip, xi: xi_mod, zeta: zeta_mod, r_x },
        })
    }

    /// Wrap an explicit row-major matrix. Smoothness moduli are supplied by
    /// the caller (zero when unknown); no Lipschitz estimate is available.
    pub fn from_matrix(
        matrix: Vec<f64>,
        n_x: usize,
        n_y: usize,
        xi: f64,
        zeta: f64,
        r_x: f64,
    ) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(Error::EmptySupport);
        }
        check_size(n_x, n_y)?;
        if matrix.len() != n_x * n_y {
            return Err(Error::LengthMismatch {
                what: "cost matrix entries",
                expected: n_x * n_y,
                got: matrix.len(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "cost entries" });
        }
        if !(xi.is_finite() && zeta.is_finite() && r_x.is_finite()) || xi < 0.0 || zeta < 0.0 || r_x < 0.0 {
            return Err(Error::InvalidParam {
                name: "cost moduli",
                reason: "xi, zeta, r_x must be finite and nonnegative".into(),
            });
        }
        let c_osc = num::oscillation(&matrix);
        Ok(CostModel {
            kind: CostKind::Explicit,
            n_x,
            n_y,
            matrix,
            meta: CostMeta { c_osc, lip: None, xi, zeta, r_x },
        })
    }

    /// Rescale every entry by `alpha > 0` (metadata rescales accordingly).
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParam {
                name: "alpha",
                reason: format!("must be finite and positive, got {alpha}"),
            });
        }
        let matrix: Vec<f64> = self.matrix.iter().map(|v| alpha * v).collect();
        let c_osc = num::oscillation(&matrix);
        Ok(CostModel {
            kind: CostKind::Explicit,
            n_x: self.n_x,
            n_y: self.n_y,
            matrix,
            meta: CostMeta {
                c_osc,
                lip: self.meta.lip.map(|l| alpha * l),
                xi: alpha * self.meta.xi,
                zeta: alpha * self.meta.zeta,
                r_x: self.meta.r_x,
            },
        })
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    /// `c(x_i, y_j)`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n_y + j]
    }

    /// Row `i` of the matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_y..(i + 1) * self.n_y]
    }

    /// All entries, row-major.
    pub fn entries(&self) -> &[f64] {
        &self.matrix
    }

    pub fn meta(&self) -> &CostMeta {
        &self.meta
    }

    /// `max - min` over the entries, recomputed from the matrix.
    pub fn oscillation(&self) -> f64 {
        num::oscillation(&self.matrix)
    }
}

fn check_size(n_x: usize, n_y: usize) -> Result<()> {
    let entries = n_x.checked_mul(n_y).unwrap_or(usize::MAX);
    if entries > MAX_DENSE_ENTRIES {
        return Err(Error::InvalidParam {
            name: "cost size",
            reason: format!(
                "{n_x} x {n_y} dense entries exceed the cap of {MAX_DENSE_ENTRIES}"
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DiscreteMeasure;
    use proptest::prelude::*;

    fn two_point() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn bilinear_cost_on_two_points_matches_hand_matrix() {
        let m = two_point();
        let c = CostModel::build(CostKind::Linear, &m, &m).unwrap();
        assert_eq!(c.entries(), &[0.0, 0.0, 0.0, -1.0]);
        assert_eq!(c.oscillation(), 1.0);
        assert_eq!(c.meta().c_osc, 1.0);
        assert_eq!(c.meta().xi, 0.0);
        assert_eq!(c.meta().zeta, 0.0);
        assert_eq!(c.meta().lip, Some(1.0));
        assert_eq!(c.meta().r_x, 1.0);
    }

    #[test]
    fn squared_distance_cost_on_two_points_matches_hand_matrix() {
        let m = two_point();
        let c = CostModel::build(CostKind::Quadratic, &m, &m).unwrap();
        assert_eq!(c.entries(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(c.oscillation(), 1.0);
        assert_eq!(c.meta().xi, 2.0);
        assert_eq!(c.meta().zeta, 2.0);
    }

    #[test]
    fn stored_oscillation_matches_recomputation() {
        let m = two_point();
        for kind in [CostKind::Linear, CostKind::Quadratic] {
            let c = CostModel::build(kind, &m, &m).unwrap();
            assert!((c.meta().c_osc - c.oscillation()).abs() <= 1e-12);
        }
    }

    #[test]
    fn explicit_matrix_roundtrip_and_validation() {
        let c = CostModel::from_matrix(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 3, 0.0, 0.0, 1.0)
            .unwrap();
        assert_eq!(c.at(1, 2), 6.0);
        assert_eq!(c.row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(c.oscillation(), 5.0);
        assert!(c.meta().lip.is_none());
        assert!(CostModel::from_matrix(vec![1.0], 1, 2, 0.0, 0.0, 0.0).is_err());
        assert!(CostModel::from_matrix(vec![f64::INFINITY], 1, 1, 0.0, 0.0, 0.0).is_err());
        assert!(CostModel::from_matrix(vec![1.0], 1, 1, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn nonfinite_support_coordinates_are_rejected_at_measure_construction() {
        // The cost builder can assume finite points because measures reject
        // non-finite coordinates; spot-check that path.
        assert!(DiscreteMeasure::new(vec![vec![f64::INFINITY]], vec![1.0]).is_err());
    }

    #[test]
    fn scaled_costs_scale_entries_and_metadata() {
        let m = two_point();
        let c = CostModel::build(CostKind::Linear, &m, &m).unwrap();
        let s = c.scaled(2.0).unwrap();
        assert_eq!(s.entries(), &[0.0, 0.0, 0.0, -2.0]);
        assert_eq!(s.meta().c_osc, 2.0);
        assert_eq!(s.meta().lip, Some(2.0));
        assert!(c.scaled(0.0).is_err());
    }

    proptest! {
        #[test]
        fn bilinear_entries_are_bounded_by_the_product_of_radii(
            xs in proptest::collection::vec(-3.0f64..3.0, 1..8),
            ys in proptest::collection::vec(-3.0f64..3.0, 1..8),
        ) {
            let mx = DiscreteMeasure::uniform(xs.iter().map(|&v| vec![v]).collect()).unwrap();
            let my = DiscreteMeasure::uniform(ys.iter().map(|&v| vec![v]).collect()).unwrap();
            let c = CostModel::build(CostKind::Linear, &mx, &my).unwrap();
            let bound = mx.support_radius() * my.support_radius() + 1e-12;
            prop_assert!(c.entries().iter().all(|v| v.abs() <= bound));
        }

        #[test]
        fn oscillation_is_shift_invariant(
            vals in proptest::collection::vec(-5.0f64..5.0, 1..25),
            shift in -10.0f64..10.0,
        ) {
            let n = vals.len();
            let c = CostModel::from_matrix(vals.clone(), 1, n, 0.0, 0.0, 0.0).unwrap();
            let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
            let cs = CostModel::from_matrix(shifted, 1, n, 0.0, 0.0, 0.0).unwrap();
            prop_assert!((c.oscillation() - cs.oscillation()).abs() < 1e-12);
        }
    }
}
