//! Strain–stress states and the energy-weighted metric on phase space.
//!
//! Voigt order for plane problems is `[xx, yy, xy]` with engineering shear
//! strain. The distance between two states is
//! `(½ Δεᵀ M_ε Δε + ½ Δσᵀ M_σ Δσ)^{1/2}`; the ½ is folded into
//! [`Metric::sqrt_factor`] so that plain Euclidean distances between
//! rescaled vectors equal metric distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Lu, Matrix};
use crate::scalar::Real;

/// One strain–stress pair at an integration point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LocalState<T> {
    pub strain: Vec<T>,
    pub stress: Vec<T>,
}

impl<T: Real> LocalState<T> {
    pub fn new(strain: Vec<T>, stress: Vec<T>) -> Result<Self> {
        if strain.is_empty() || strain.len() != stress.len() {
            return Err(Error::Dimension(format!(
                "strain has {} components, stress has {}",
                strain.len(),
                stress.len()
            )));
        }
        if strain.iter().chain(&stress).any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite state component".into()));
        }
        Ok(Self { strain, stress })
    }

    /// Uniaxial state (q = 1).
    pub fn scalar(strain: T, stress: T) -> Self {
        Self { strain: vec![strain], stress: vec![stress] }
    }

    pub fn zeros(q: usize) -> Self {
        Self { strain: vec![T::zero(); q], stress: vec![T::zero(); q] }
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.strain.len()
    }

    /// Stacked vector `[εᵀ σᵀ]ᵀ` of length 2q.
    pub fn to_vector(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(2 * self.q());
        v.extend_from_slice(&self.strain);
        v.extend_from_slice(&self.stress);
        v
    }

    pub fn from_vector(v: &[T]) -> Self {
        let q = v.len() / 2;
        Self { strain: v[..q].to_vec(), stress: v[q..].to_vec() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let d = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x - y).collect();
        Self { strain: d(&self.strain, &other.strain), stress: d(&self.stress, &other.stress) }
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            strain: self.strain.iter().map(|&v| v * c).collect(),
            stress: self.stress.iter().map(|&v| v * c).collect(),
        }
    }
}

/// Weighting matrices `(M_ε, M_σ)` of the phase-space norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric<T> {
    m_eps: Matrix<T>,
    m_sig: Matrix<T>,
    sqrt_factor: Matrix<T>,
}

impl<T: Real> Metric<T> {
    /// Builds a metric from both weighting matrices, checking symmetry,
    /// definiteness, and `M_σ = M_ε⁻¹` to 1e-10 relative.
    pub fn new(m_eps: Matrix<T>, m_sig: Matrix<T>) -> Result<Self> {
        let q = m_eps.rows();
        if q == 0 || m_eps.cols() != q || m_sig.rows() != q || m_sig.cols() != q {
            return Err(Error::Dimension("metric blocks must be square and of equal size".into()));
        }
        if !m_eps.is_finite() || !m_sig.is_finite() {
            return Err(Error::Contract("non-finite metric entry".into()));
        }
        let rel = T::lit(1e-10);
        for (name, m) in [("m_eps", &m_eps), ("m_sig", &m_sig)] {
            if m.asymmetry() > rel * m.max_abs() {
                return Err(Error::NotPositiveDefinite(format!("{} is not symmetric", name)));
            }
        }
        let prod = m_eps.matmul(&m_sig);
        let off = (0..q)
            .flat_map(|i| (0..q).map(move |j| (i, j)))
            .map(|(i, j)| (prod[(i, j)] - if i == j { T::one() } else { T::zero() }).abs())
            .fold(T::zero(), T::max);
        if off > rel * T::lit(10.0) {
            return Err(Error::Contract(format!(
                "m_sig is not the inverse of m_eps (max deviation {:e})",
                off.as_f64()
            )));
        }
        // Blocks carry reciprocal units, so definiteness and the square root
        // are taken per block.
        let root_eps = half_sqrt(&m_eps, "m_eps")?;
        let root_sig = half_sqrt(&m_sig, "m_sig")?;
        let sqrt_factor = Matrix::block_diag(&root_eps, &root_sig);
        Ok(Self { m_eps, m_sig, sqrt_factor })
    }

    /// Metric with `M_σ = M_ε⁻¹`.
    pub fn from_stiffness(m_eps: Matrix<T>) -> Result<Self> {
        let inv = Lu::new(&m_eps)?.inverse();
        // Symmetrize the computed inverse; LU round-off is not symmetric.
        let q = inv.rows();
        let mut m_sig = inv.clone();
        for i in 0..q {
            for j in 0..q {
                m_sig[(i, j)] = T::half() * (inv[(i, j)] + inv[(j, i)]);
            }
        }
        Self::new(m_eps, m_sig)
    }

    /// Uniaxial metric with scalar modulus `m` (q = 1).
    pub fn scalar(m: T) -> Result<Self> {
        if !(m > T::zero()) || !m.is_finite() {
            return Err(Error::Contract(format!("metric modulus must be positive, got {}", m)));
        }
        Self::new(Matrix::from_diag(&[m]), Matrix::from_diag(&[T::one() / m]))
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.m_eps.rows()
    }

    pub fn m_eps(&self) -> &Matrix<T> {
        &self.m_eps
    }

    pub fn m_sig(&self) -> &Matrix<T> {
        &self.m_sig
    }

    /// Symmetric square root of `½ diag(M_ε, M_σ)`.
    pub fn sqrt_factor(&self) -> &Matrix<T> {
        &self.sqrt_factor
    }

    fn check(&self, s: &LocalState<T>) -> Result<()> {
        if s.strain.len() != self.q() || s.stress.len() != self.q() {
            return Err(Error::Dimension(format!(
                "state of dimension {} against metric of dimension {}",
                s.q(),
                self.q()
            )));
        }
        Ok(())
    }

    /// Squared norm computed from the quadratic forms directly.
    pub fn norm_sq(&self, s: &LocalState<T>) -> Result<T> {
        self.check(s)?;
        let quad = |m: &Matrix<T>, v: &[T]| crate::linalg::dot(v, &m.mul_vec(v));
        Ok(T::half() * (quad(&self.m_eps, &s.strain) + quad(&self.m_sig, &s.stress)))
    }

    /// Maps a stacked 2q-vector into the Euclidean frame of the metric.
    pub fn rescale_vector(&self, v: &[T]) -> Vec<T> {
        self.sqrt_factor.mul_vec(v)
    }
}

/// Symmetric square root of `½ m`, rejecting matrices whose smallest
/// eigenvalue is not above 1e-12 of the largest.
fn half_sqrt<T: Real>(m: &Matrix<T>, name: &str) -> Result<Matrix<T>> {
    let (vals, vecs) = symmetric_eigen(m);
    let max = vals.iter().copied().fold(T::zero(), T::max);
    let min = vals.iter().copied().fold(T::infinity(), T::min);
    if !(max > T::zero()) || min <= T::lit(1e-12) * max {
        return Err(Error::NotPositiveDefinite(format!(
            "{} eigenvalues in [{:e}, {:e}]",
            name,
            min.as_f64(),
            max.as_f64()
        )));
    }
    let root: Vec<T> = vals.iter().map(|&l| (T::half() * l).sqrt()).collect();
    Ok(vecs.matmul(&Matrix::from_diag(&root)).matmul(&vecs.transpose()))
}

/// Energy norm of a state.
pub fn m_norm<T: Real>(s: &LocalState<T>, m: &Metric<T>) -> Result<T> {
    Ok(m.norm_sq(s)?.max(T::zero()).sqrt())
}

/// Metric distance between two states.
pub fn distance<T: Real>(a: &LocalState<T>, b: &LocalState<T>, m: &Metric<T>) -> Result<T> {
    if a.q() != b.q() {
        return Err(Error::Dimension("states of different dimension".into()));
    }
    m_norm(&a.sub(b), m)
}

/// `M̄^{1/2} s`; its Euclidean length equals [`m_norm`].
pub fn rescale<T: Real>(s: &LocalState<T>, m: &Metric<T>) -> Result<Vec<T>> {
    m.check(s)?;
    Ok(m.rescale_vector(&s.to_vector()))
}

/// Plane-stress isotropic elasticity matrix and its inverse as a metric.
pub fn plane_stress_metric<T: Real>(e: T, nu: T) -> Result<Metric<T>> {
    if !(e > T::zero()) || !e.is_finite() {
        return Err(Error::Contract(format!("Young's modulus must be positive, got {}", e)));
    }
    if !(nu >= T::zero() && nu < T::half()) {
        return Err(Error::Contract(format!("Poisson ratio must lie in [0, 0.5), got {}", nu)));
    }
    Metric::from_stiffness(plane_stress_matrix(e, nu))
}

/// `E/(1-ν²) [[1, ν, 0], [ν, 1, 0], [0, 0, (1-ν)/2]]`.
pub fn plane_stress_matrix<T: Real>(e: T, nu: T) -> Matrix<T> {
    let c = e / (T::one() - nu * nu);
    let z = T::zero();
    Matrix::from_rows(&[vec![c, c * nu, z], vec![c * nu, c, z], vec![z, z, c * (T::one() - nu) * T::half()]])
}

/// One entry of a material database.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DatasetPoint<T> {
    pub state: LocalState<T>,
    pub index: usize,
}
