//! Projection of a state onto the convex hull of its neighbours.
//!
//! Weights solve `min ‖Ẑw − z‖² + ξ(1ᵀw − 1)² + μ‖w‖²` subject to `w ≥ 0`,
//! with `Ẑ` and `z` the rescaled neighbour matrix and query, written as one
//! stacked NNLS problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::phase_space::{LocalState, Metric};
use crate::projection::nnls::nnls;
use crate::projection::search::Neighborhood;
use crate::scalar::Real;

/// Parameters of the local reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct SolverParams<T> {
    pub k: usize,
    /// Partition-of-unity penalty, relative to the mean squared column norm.
    pub xi_bar: T,
    /// Ridge weight, relative to the mean squared column norm.
    pub mu_bar: T,
    pub nnls_tol: T,
}

impl<T: Real> SolverParams<T> {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Contract("k must be at least 1".into()));
        }
        if !(self.xi_bar > T::zero()) || !self.xi_bar.is_finite() {
            return Err(Error::Contract(format!("xi_bar must be positive, got {}", self.xi_bar)));
        }
        if !(self.mu_bar >= T::zero()) || !self.mu_bar.is_finite() {
            return Err(Error::Contract(format!("mu_bar must be non-negative, got {}", self.mu_bar)));
        }
        if !(self.nnls_tol > T::zero()) {
            return Err(Error::Contract("nnls_tol must be positive".into()));
        }
        Ok(())
    }
}

impl<T: Real> Default for SolverParams<T> {
    fn default() -> Self {
        Self { k: 6, xi_bar: T::lit(1e5), mu_bar: T::lit(1e-4), nnls_tol: T::lit(1e-10) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult<T> {
    pub weights: Vec<T>,
    /// `Ŝ w`.
    pub state: LocalState<T>,
    /// `|1ᵀw − 1|`.
    pub pu_residual: T,
    /// Objective of the stacked least-squares problem at `w`.
    pub objective: T,
}

/// Locally convex reconstruction of `s` from `nbhd`.
pub fn convex_project<T: Real>(
    s: &LocalState<T>,
    nbhd: &Neighborhood<T>,
    m: &Metric<T>,
    params: &SolverParams<T>,
) -> Result<ProjectionResult<T>> {
    params.validate()?;
    let k = nbhd.k();
    let n = 2 * m.q();
    if k == 0 {
        return Err(Error::Contract("empty neighbourhood".into()));
    }
    if s.q() != m.q() || nbhd.matrix.rows() != n {
        return Err(Error::Dimension(format!(
            "state of dimension {} and neighbourhood with {} rows against metric of dimension {}",
            s.q(),
            nbhd.matrix.rows(),
            m.q()
        )));
    }
    let sv = s.to_vector();
    if sv.iter().any(|v| !v.is_finite()) || !nbhd.matrix.is_finite() {
        return Err(Error::Contract("non-finite projection input".into()));
    }

    let zhat = m.sqrt_factor().matmul(&nbhd.matrix);
    let z = m.rescale_vector(&sv);

    let misfit = |w: &[T]| {
        let r: Vec<T> = zhat.mul_vec(w).iter().zip(&z).map(|(&a, &b)| a - b).collect();
        dot(&r, &r)
    };

    // The only hull point is the neighbour itself.
    if k == 1 {
        let w = vec![T::one()];
        return Ok(ProjectionResult {
            objective: misfit(&w),
            state: nbhd.combine(&w),
            weights: w,
            pu_residual: T::zero(),
        });
    }

    let tr = zhat.as_slice().iter().fold(T::zero(), |acc, &v| acc + v * v);
    if tr == T::zero() {
        // Every neighbour is the zero state; any convex weights give it.
        let mut w = vec![T::zero(); k];
        w[0] = T::one();
        return Ok(ProjectionResult {
            objective: misfit(&w),
            state: nbhd.combine(&w),
            weights: w,
            pu_residual: T::zero(),
        });
    }
    let kt = T::from_usize(k).expect("k as scalar");
    let xi = params.xi_bar * tr / kt;
    let mu = params.mu_bar * tr / kt;
    let ridge = mu > T::zero();

    let rows = n + 1 + if ridge { k } else { 0 };
    let mut a = Matrix::zeros(rows, k);
    let mut b = vec![T::zero(); rows];
    for i in 0..n {
        for j in 0..k {
            a[(i, j)] = zhat[(i, j)];
        }
        b[i] = z[i];
    }
    let sx = xi.sqrt();
    for j in 0..k {
        a[(n, j)] = sx;
    }
    b[n] = sx;
    if ridge {
        let sm = mu.sqrt();
        for j in 0..k {
            a[(n + 1 + j, j)] = sm;
        }
    }

    // ‖Aᵀb‖ is dominated by the penalty row, roughly ξ̄ times the data block,
    // so a tolerance relative to it would stop before the data misfit is
    // resolved. Tightening by √(1 + ξ̄) keeps the threshold well above the
    // round-off floor of the stacked system (about ε·ξ̄ of the data block).
    let tol = params.nnls_tol / (T::one() + params.xi_bar).sqrt();
    let w = nnls(&a, &b, tol)?;
    let sum: T = w.iter().copied().sum();
    let objective = crate::projection::nnls::objective(&a, &w, &b);
    Ok(ProjectionResult { state: nbhd.combine(&w), pu_residual: (sum - T::one()).abs(), objective, weights: w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::MaterialDataset;
    use std::collections::BTreeMap;

    fn planar(points: &[(f64, f64)]) -> (MaterialDataset<f64>, Neighborhood<f64>) {
        let d = MaterialDataset::new(points.iter().map(|&(e, s)| LocalState::scalar(e, s)).collect(), BTreeMap::new())
            .unwrap();
        let n = Neighborhood::from_indices(&d, (0..points.len()).collect()).unwrap();
        (d, n)
    }

    // With M = 2 the factor ½ cancels and the rescaled frame is the identity.
    fn unit_metric() -> Metric<f64> {
        Metric::new(Matrix::from_diag(&[2.0]), Matrix::from_diag(&[0.5])).unwrap()
    }

    #[test]
    fn interior_point_is_reproduced() {
        let (_, n) = planar(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]);
        let m = Metric::scalar(1.0).unwrap();
        let r = convex_project(&LocalState::scalar(0.5, 0.5), &n, &m, &SolverParams::with_k(3)).unwrap();
        assert!((r.state.strain[0] - 0.5).abs() < 1e-3);
        assert!((r.state.stress[0] - 0.5).abs() < 1e-3);
        assert!(r.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn segment_projection() {
        let (_, n) = planar(&[(0.0, 0.0), (1.0, 0.0)]);
        let m = unit_metric();
        let p = SolverParams { mu_bar: 0.0, ..SolverParams::with_k(2) };
        let r = convex_project(&LocalState::scalar(0.5, 1.0), &n, &m, &p).unwrap();
        assert!((r.state.strain[0] - 0.5).abs() < 1e-6);
        assert!(r.state.stress[0].abs() < 1e-12);
        assert!((r.weights[0] - 0.5).abs() < 1e-6 && (r.weights[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn single_neighbour_is_returned_exactly() {
        let (_, n) = planar(&[(0.3, 7.0)]);
        let r = convex_project(&LocalState::scalar(1.0, 1.0), &n, &unit_metric(), &SolverParams::with_k(1)).unwrap();
        assert_eq!(r.weights, vec![1.0]);
        assert_eq!(r.state, LocalState::scalar(0.3, 7.0));
    }

    #[test]
    fn zero_neighbourhood_never_fails() {
        let (_, n) = planar(&[(0.0, 0.0), (0.0, 0.0)]);
        let r = convex_project(&LocalState::scalar(1.0, 1.0), &n, &unit_metric(), &SolverParams::with_k(2)).unwrap();
        assert_eq!(r.state, LocalState::scalar(0.0, 0.0));
        assert_eq!(r.weights.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn partition_of_unity_slack_is_bounded() {
        let (_, n) = planar(&[(1.0, 1.0), (2.0, 1.5), (1.5, 3.0)]);
        let p = SolverParams::with_k(3);
        let r = convex_project(&LocalState::scalar(10.0, -4.0), &n, &unit_metric(), &p).unwrap();
        assert!(r.pu_residual <= 10.0 / p.xi_bar);
    }

    #[test]
    fn rejects_non_finite_query() {
        let (_, n) = planar(&[(0.0, 0.0), (1.0, 0.0)]);
        let s = LocalState { strain: vec![f64::NAN], stress: vec![0.0] };
        assert!(matches!(convex_project(&s, &n, &unit_metric(), &SolverParams::with_k(2)), Err(Error::Contract(_))));
    }
}
