//! Lawson–Hanson active-set solver for `min ‖A y − z‖` subject to `y ≥ 0`.

use crate::error::{Error, Result};
use crate::linalg::{dot, lstsq_qr, norm, Matrix};
use crate::scalar::Real;

/// Columns whose component orthogonal to the current passive set falls
/// below this fraction of the largest column norm are treated as dependent.
const RANK_TOL: f64 = 1e-11;

/// Solves the non-negative least-squares problem.
///
/// Terminates when the relative residual `‖r‖/‖z‖` drops to `tol`, when no
/// inactive coordinate has a gradient component above `tol·‖Aᵀz‖`, or when
/// every coordinate is passive. Ties in the entering coordinate go to the
/// lowest index.
pub fn nnls<T: Real>(a: &Matrix<T>, z: &[T], tol: T) -> Result<Vec<T>> {
    let (n, p) = (a.rows(), a.cols());
    if n == 0 || p == 0 {
        return Err(Error::Dimension(format!("nnls with a {}x{} matrix", n, p)));
    }
    if z.len() != n {
        return Err(Error::Dimension(format!("nnls rhs has {} entries, matrix {} rows", z.len(), n)));
    }
    if !a.is_finite() || z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("nnls input contains non-finite values".into()));
    }

    let mut y = vec![T::zero(); p];
    let z_norm = norm(z);
    if z_norm == T::zero() {
        return Ok(y);
    }
    let grad_scale = norm(&a.tr_mul_vec(z));
    let grad_tol = tol * grad_scale;

    let mut passive = vec![false; p];
    let mut rejected = vec![false; p];
    let mut r = z.to_vec();
    let mut entered = 0usize;
    let cap = 3 * p;

    loop {
        if norm(&r) <= tol * z_norm || passive.iter().all(|&b| b) {
            break;
        }
        let q = a.tr_mul_vec(&r);
        let mut best: Option<usize> = None;
        for i in 0..p {
            if passive[i] || rejected[i] {
                continue;
            }
            if best.is_none_or(|b| q[i] > q[b]) {
                best = Some(i);
            }
        }
        let j = match best {
            Some(j) if q[j] > grad_tol => j,
            _ => break,
        };

        passive[j] = true;
        let mut s = match solve_passive(a, z, &passive) {
            Some(s) if s[j] > T::zero() => s,
            _ => {
                // Numerically dependent or non-improving column: skip it
                // until the passive set changes.
                passive[j] = false;
                rejected[j] = true;
                continue;
            }
        };
        entered += 1;
        if entered > cap {
            return Err(Error::NnlsStalled(cap));
        }
        rejected.iter_mut().for_each(|b| *b = false);

        // Back off toward feasibility while any passive coefficient is not positive.
        loop {
            let mut alpha = T::infinity();
            let mut leaving = None;
            for i in 0..p {
                if passive[i] && s[i] <= T::zero() {
                    let t = y[i] / (y[i] - s[i]);
                    if t < alpha {
                        alpha = t;
                        leaving = Some(i);
                    }
                }
            }
            let Some(leaving) = leaving else { break };
            for i in 0..p {
                if passive[i] {
                    let yi = y[i];
                    y[i] = yi + alpha * (s[i] - yi);
                }
            }
            y[leaving] = T::zero();
            for i in 0..p {
                if passive[i] && y[i] <= T::zero() {
                    passive[i] = false;
                    y[i] = T::zero();
                }
            }
            s = match solve_passive(a, z, &passive) {
                Some(s) => s,
                None => y.clone(),
            };
        }
        y = s;
        r = residual(a, &y, z);
    }
    Ok(y)
}

/// Unconstrained least squares on the passive columns, zero elsewhere.
fn solve_passive<T: Real>(a: &Matrix<T>, z: &[T], passive: &[bool]) -> Option<Vec<T>> {
    let cols: Vec<usize> = (0..a.cols()).filter(|&i| passive[i]).collect();
    let mut sub = Matrix::zeros(a.rows(), cols.len());
    for r in 0..a.rows() {
        for (c, &j) in cols.iter().enumerate() {
            sub[(r, c)] = a[(r, j)];
        }
    }
    let x = lstsq_qr(&sub, z, T::lit(RANK_TOL))?;
    let mut s = vec![T::zero(); a.cols()];
    for (c, &j) in cols.iter().enumerate() {
        s[j] = x[c];
    }
    Some(s)
}

/// `z − A y`.
pub fn residual<T: Real>(a: &Matrix<T>, y: &[T], z: &[T]) -> Vec<T> {
    a.mul_vec(y).iter().zip(z).map(|(&ay, &zi)| zi - ay).collect()
}

/// Largest violation of the KKT conditions, relative to `‖Aᵀz‖`.
///
/// For `y_i > 0` the gradient component must vanish; for `y_i = 0` it must
/// not point into the feasible set. Negative entries count as violations.
pub fn kkt_violation<T: Real>(a: &Matrix<T>, y: &[T], z: &[T]) -> T {
    let q = a.tr_mul_vec(&residual(a, y, z));
    let scale = norm(&a.tr_mul_vec(z)).max(T::min_positive_value());
    let mut worst = T::zero();
    for (i, &yi) in y.iter().enumerate() {
        let v = if yi > T::zero() {
            q[i].abs()
        } else if yi < T::zero() {
            -yi * scale
        } else {
            q[i].max(T::zero())
        };
        worst = worst.max(v / scale);
    }
    worst
}

/// `‖A y − z‖²`.
pub fn objective<T: Real>(a: &Matrix<T>, y: &[T], z: &[T]) -> T {
    let r = residual(a, y, z);
    dot(&r, &r)
}
