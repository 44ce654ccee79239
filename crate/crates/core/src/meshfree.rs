//! Reproducing-kernel shape functions with a linear basis and smoothed
//! (conforming nodal) strain–displacement rows on rectangular lattices.

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Cholesky, Matrix};
use crate::scalar::Real;

/// Moment matrices with a larger eigenvalue spread count as uncovered.
const MAX_CONDITION: f64 = 1e12;

/// Cubic B-spline kernel on `z = |x − x_I| / a`.
pub fn cubic_bspline<T: Real>(z: T) -> T {
    let z = z.abs();
    let (c4, c23, c43) = (T::lit(4.0), T::lit(2.0 / 3.0), T::lit(4.0 / 3.0));
    if z <= T::half() {
        c23 - c4 * z * z + c4 * z * z * z
    } else if z < T::one() {
        c43 - c4 * z + c4 * z * z - c43 * z * z * z
    } else {
        T::zero()
    }
}

/// Nodes in `D` dimensions with a kernel support radius per node.
#[derive(Clone, Debug)]
pub struct NodeSet<T, const D: usize> {
    pub coords: Vec<[T; D]>,
    pub support: Vec<T>,
}

impl<T: Real, const D: usize> NodeSet<T, D> {
    pub fn new(coords: Vec<[T; D]>, support: Vec<T>) -> Result<Self> {
        if coords.len() != support.len() {
            return Err(Error::Dimension("one support radius per node required".into()));
        }
        if coords.len() < D + 1 {
            return Err(Error::Contract(format!("{} nodes cannot carry a linear basis in {}D", coords.len(), D)));
        }
        if support.iter().any(|&a| !(a > T::zero()) || !a.is_finite()) {
            return Err(Error::Contract("support radii must be positive".into()));
        }
        Ok(Self { coords, support })
    }

    pub fn uniform(coords: Vec<[T; D]>, a: T) -> Result<Self> {
        let n = coords.len();
        Self::new(coords, vec![a; n])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Shape-function values of the covering nodes at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeEval<T, const D: usize> {
    pub point: [T; D],
    pub node_ids: Vec<usize>,
    pub values: Vec<T>,
}

fn coverage_error<T: Real, const D: usize>(x: &[T; D], reason: String) -> Error {
    Error::Coverage { x: x[0].as_f64(), y: if D > 1 { x[1].as_f64() } else { 0.0 }, reason }
}

/// `Ψ_I(x) = H(0)ᵀ M(x)⁻¹ H(x − x_I) Φ_a(x − x_I)` for every node whose
/// support contains `x`.
pub fn rk_shape<T: Real, const D: usize>(x: &[T; D], nodes: &NodeSet<T, D>) -> Result<ShapeEval<T, D>> {
    let mut ids = Vec::new();
    let mut phi = Vec::new();
    let mut scale = T::zero();
    for (i, (c, &a)) in nodes.coords.iter().zip(&nodes.support).enumerate() {
        let r2 = (0..D).fold(T::zero(), |acc, d| acc + (x[d] - c[d]) * (x[d] - c[d]));
        let z = r2.sqrt() / a;
        if z < T::one() {
            ids.push(i);
            phi.push(cubic_bspline(z));
            scale = scale.max(a);
        }
    }
    if ids.len() < D + 1 {
        return Err(coverage_error(x, format!("{} covering nodes", ids.len())));
    }
    // The basis is written in (x − x_I)/scale, which leaves the reproduced
    // space unchanged and keeps the moment matrix well scaled.
    let basis = |i: usize| -> Vec<T> {
        let c = &nodes.coords[i];
        std::iter::once(T::one()).chain((0..D).map(|d| (x[d] - c[d]) / scale)).collect()
    };
    let n = D + 1;
    let mut mm = Matrix::zeros(n, n);
    let hs: Vec<Vec<T>> = ids.iter().map(|&i| basis(i)).collect();
    for (h, &w) in hs.iter().zip(&phi) {
        for r in 0..n {
            for c in 0..n {
                mm[(r, c)] += h[r] * h[c] * w;
            }
        }
    }
    let (vals, _) = symmetric_eigen(&mm);
    let max = vals.iter().copied().fold(T::zero(), T::max);
    let min = vals.iter().copied().fold(T::infinity(), T::min);
    if !(min > T::zero()) || max / min > T::lit(MAX_CONDITION) {
        return Err(coverage_error(
            x,
            format!("moment matrix eigenvalues in [{:e}, {:e}]", min.as_f64(), max.as_f64()),
        ));
    }
    let mut e0 = vec![T::zero(); n];
    e0[0] = T::one();
    let b = Cholesky::new(&mm).map_err(|e| coverage_error(x, e.to_string()))?.solve(&e0);
    let values = hs.iter().zip(&phi).map(|(h, &w)| crate::linalg::dot(&b, h) * w).collect();
    Ok(ShapeEval { point: *x, node_ids: ids, values })
}

/// Regular node lattice on `[x0, x0 + nx_cells·h] × [y0, y0 + ny_cells·h]`.
///
/// Nodes are numbered column by column: node `(i, j)` (x index `i`, y index
/// `j`) has id `i·(ny + 1) + j`, which keeps the stiffness profile narrow
/// for domains longer than they are tall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice<T> {
    pub origin: [T; 2],
    pub h: T,
    pub nx: usize,
    pub ny: usize,
}

impl<T: Real> Lattice<T> {
    /// Lattice over `[0, width] × [0, height]`; both must be multiples of `h`.
    pub fn rectangle(width: T, height: T, h: T) -> Result<Self> {
        if !(h > T::zero()) || !(width > T::zero()) || !(height > T::zero()) {
            return Err(Error::Contract("lattice dimensions must be positive".into()));
        }
        let count = |len: T, name: &str| -> Result<usize> {
            let r = len / h;
            let n = r.round();
            if (r - n).abs() > T::lit(1e-9) * r.max(T::one()) || n < T::one() {
                return Err(Error::Unsupported(format!("{} {} is not a multiple of the spacing {}", name, len, h)));
            }
            Ok(n.to_usize().expect("cell count"))
        };
        Ok(Self { origin: [T::zero(), T::zero()], h, nx: count(width, "width")?, ny: count(height, "height")? })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    #[inline]
    pub fn node_id(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    pub fn node(&self, i: usize, j: usize) -> [T; 2] {
        let f = |n: usize| T::from_usize(n).expect("index");
        [self.origin[0] + f(i) * self.h, self.origin[1] + f(j) * self.h]
    }

    pub fn coords(&self) -> Vec<[T; 2]> {
        let mut v = Vec::with_capacity(self.node_count());
        for i in 0..=self.nx {
            for j in 0..=self.ny {
                v.push(self.node(i, j));
            }
        }
        v
    }

    pub fn width(&self) -> T {
        self.h * T::from_usize(self.nx).expect("nx")
    }

    pub fn height(&self) -> T {
        self.h * T::from_usize(self.ny).expect("ny")
    }
}

/// Nodal integration cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformingCell<T> {
    pub node_id: usize,
    /// Counter-clockwise vertex loop, not repeating the first vertex.
    pub polygon: Vec<[T; 2]>,
    pub volume: T,
    /// Edge `k` runs from `polygon[k]` to `polygon[k + 1]`.
    pub segments: Vec<Segment<T>>,
}

/// One straight boundary piece of a cell with its quadrature rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment<T> {
    pub a: [T; 2],
    pub b: [T; 2],
    /// Outward unit normal.
    pub normal: [T; 2],
    pub length: T,
    /// Quadrature points and weights (weights sum to `length`).
    pub rule: Vec<([T; 2], T)>,
}

impl<T: Real> Segment<T> {
    /// Segment with the two-point trapezoidal rule.
    pub fn trapezoid(a: [T; 2], b: [T; 2]) -> Self {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let length = (dx * dx + dy * dy).sqrt();
        // Counter-clockwise loop: outward normal is the tangent turned clockwise.
        let normal = [dy / length, -dx / length];
        let w = length * T::half();
        Self { a, b, normal, length, rule: vec![(a, w), (b, w)] }
    }
}

impl<T: Real> ConformingCell<T> {
    /// Cell with the trapezoidal rule on every edge.
    pub fn from_polygon(node_id: usize, polygon: Vec<[T; 2]>) -> Self {
        let n = polygon.len();
        let segments: Vec<Segment<T>> = (0..n).map(|k| Segment::trapezoid(polygon[k], polygon[(k + 1) % n])).collect();
        let twice_area = (0..n).fold(T::zero(), |acc, k| {
            let (p, q) = (polygon[k], polygon[(k + 1) % n]);
            acc + p[0] * q[1] - q[0] * p[1]
        });
        Self { node_id, polygon, volume: twice_area * T::half(), segments }
    }
}

/// Voronoi cells of a regular lattice: rectangles clipped to the domain.
///
/// Interior edges use the two-point trapezoidal rule. Edges on the domain
/// boundary are integrated with points at boundary nodes only, exactly for
/// linear integrands: the midpoint rule at the owning node, or on a corner
/// half-edge the weights `3h/8` (corner) and `h/8` (next node along the
/// edge). Test functions built by the transformation method vanish at
/// constrained nodes but not between them, so sampling there would break
/// the linear patch test.
pub fn build_cells<T: Real>(lattice: &Lattice<T>) -> Vec<ConformingCell<T>> {
    let h = lattice.h;
    let half = h * T::half();
    let (w, hgt) = (lattice.width(), lattice.height());
    let [x0, y0] = lattice.origin;
    let (x1, y1) = (x0 + w, y0 + hgt);
    let mut cells = Vec::with_capacity(lattice.node_count());
    for i in 0..=lattice.nx {
        for j in 0..=lattice.ny {
            let node = lattice.node(i, j);
            let [x, y] = node;
            let xl = (x - half).max(x0);
            let xr = (x + half).min(x1);
            let yb = (y - half).max(y0);
            let yt = (y + half).min(y1);
            let mut cell =
                ConformingCell::from_polygon(lattice.node_id(i, j), vec![[xl, yb], [xr, yb], [xr, yt], [xl, yt]]);
            for seg in &mut cell.segments {
                let on_boundary = (seg.a[0] == seg.b[0] && (seg.a[0] == x0 || seg.a[0] == x1))
                    || (seg.a[1] == seg.b[1] && (seg.a[1] == y0 || seg.a[1] == y1));
                if !on_boundary {
                    continue;
                }
                let len = seg.length;
                if (len - h).abs() <= T::lit(1e-12) * h {
                    seg.rule = vec![(node, len)];
                } else {
                    // Corner half-edge: the owning node is one end; the next
                    // lattice node lies a full spacing further along.
                    let far = if seg.a == node { seg.b } else { seg.a };
                    let dir = [(far[0] - node[0]) / len, (far[1] - node[1]) / len];
                    let next = [node[0] + dir[0] * h, node[1] + dir[1] * h];
                    let w_next = len * len / (T::lit(2.0) * h);
                    seg.rule = vec![(node, len - w_next), (next, w_next)];
                }
            }
            cells.push(cell);
        }
    }
    cells
}

/// Smoothed gradients `b̃_I = (1/V) ∮ Ψ_I n dΓ` of the nodes touching a cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedB<T> {
    pub node_ids: Vec<usize>,
    pub grads: Vec<[T; 2]>,
}

impl<T: Real> SmoothedB<T> {
    /// `3 × 2n` matrix with node blocks `[[b1, 0], [0, b2], [b2, b1]]`.
    pub fn matrix(&self) -> Matrix<T> {
        let n = self.node_ids.len();
        let mut m = Matrix::zeros(3, 2 * n);
        for (c, g) in self.grads.iter().enumerate() {
            m[(0, 2 * c)] = g[0];
            m[(1, 2 * c + 1)] = g[1];
            m[(2, 2 * c)] = g[1];
            m[(2, 2 * c + 1)] = g[0];
        }
        m
    }

    /// Strain `[ε_xx, ε_yy, γ_xy]` of a nodal coefficient field `d` (2 per node).
    pub fn strain(&self, d: &[T]) -> [T; 3] {
        let mut e = [T::zero(); 3];
        for (&id, g) in self.node_ids.iter().zip(&self.grads) {
            let (ux, uy) = (d[2 * id], d[2 * id + 1]);
            e[0] += g[0] * ux;
            e[1] += g[1] * uy;
            e[2] += g[1] * ux + g[0] * uy;
        }
        e
    }
}

/// Boundary integral using each segment's quadrature rule.
pub fn smoothed_gradient<T: Real>(cell: &ConformingCell<T>, nodes: &NodeSet<T, 2>) -> Result<SmoothedB<T>> {
    if !(cell.volume > T::zero()) {
        return Err(Error::Contract(format!("cell of node {} has non-positive volume", cell.node_id)));
    }
    let mut acc: std::collections::BTreeMap<usize, [T; 2]> = std::collections::BTreeMap::new();
    let inv_v = T::one() / cell.volume;
    for seg in &cell.segments {
        for &(x, wq) in &seg.rule {
            let w = wq * inv_v;
            let s = rk_shape(&x, nodes)?;
            for (&id, &v) in s.node_ids.iter().zip(&s.values) {
                let e = acc.entry(id).or_insert([T::zero(); 2]);
                e[0] += w * v * seg.normal[0];
                e[1] += w * v * seg.normal[1];
            }
        }
    }
    let (node_ids, grads) = acc.into_iter().unzip();
    Ok(SmoothedB { node_ids, grads })
}

/// `u^h(x) = Σ Ψ_I(x) d_I` for a two-component field.
pub fn interpolate<T: Real>(x: &[T; 2], nodes: &NodeSet<T, 2>, d: &[T]) -> Result<[T; 2]> {
    let s = rk_shape(x, nodes)?;
    let mut u = [T::zero(); 2];
    for (&id, &v) in s.node_ids.iter().zip(&s.values) {
        u[0] += v * d[2 * id];
        u[1] += v * d[2 * id + 1];
    }
    Ok(u)
}
