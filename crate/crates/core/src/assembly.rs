//! Discretizations and the global (physically admissible) step.
//!
//! Both the kinematic solve and the multiplier solve use the same matrix
//! `K = Σ V Bᵀ M_ε B` restricted to free dofs, so it is factored once.
//! Essential conditions are plain dof prescriptions: truss dofs are nodal
//! displacements, and continuum dofs on constrained nodes are converted to
//! nodal values by the transformation method before assembly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Lu, Matrix, SkylineCholesky, SkylineMatrix};
use crate::meshfree::{build_cells, rk_shape, smoothed_gradient, Lattice, NodeSet};
use crate::phase_space::{plane_stress_metric, LocalState, Metric};
use crate::scalar::Real;

/// One stress–strain evaluation point.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationPoint<T> {
    /// Quadrature weight `V_α` (volume).
    pub weight: T,
    /// Global dofs touched by `b`, ascending.
    pub dofs: Vec<usize>,
    /// `q × dofs.len()` strain–displacement rows.
    pub b: Matrix<T>,
    /// Index into [`Discretization::metrics`].
    pub metric: usize,
}

impl<T: Real> IntegrationPoint<T> {
    pub fn strain(&self, d: &[T]) -> Vec<T> {
        let local: Vec<T> = self.dofs.iter().map(|&i| d[i]).collect();
        self.b.mul_vec(&local)
    }
}

#[derive(Clone, Debug)]
pub struct TrussGeometry<T> {
    pub nodes: Vec<[T; 2]>,
    pub members: Vec<(usize, usize)>,
    pub lengths: Vec<T>,
    pub areas: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct ContinuumGeometry<T> {
    pub lattice: Lattice<T>,
    pub nodes: NodeSet<T, 2>,
    /// RK coefficient of node `n` as a combination of generalized node values.
    pub coef_map: Vec<Vec<(usize, T)>>,
}

#[derive(Clone, Debug)]
pub enum Geometry<T> {
    Truss(TrussGeometry<T>),
    Continuum(ContinuumGeometry<T>),
}

#[derive(Clone, Debug)]
pub struct Discretization<T> {
    pub geometry: Geometry<T>,
    pub ndof: usize,
    pub points: Vec<IntegrationPoint<T>>,
    pub metrics: Vec<Metric<T>>,
    /// Prescribed `(dof, value)` pairs, ascending by dof.
    pub essential: Vec<(usize, T)>,
    pub load: Vec<T>,
}

impl<T: Real> Discretization<T> {
    pub fn q(&self) -> usize {
        self.metrics[0].q()
    }

    pub fn metric(&self, point: usize) -> &Metric<T> {
        &self.metrics[self.points[point].metric]
    }

    pub fn weights(&self) -> Vec<T> {
        self.points.iter().map(|p| p.weight).collect()
    }

    pub fn is_truss(&self) -> bool {
        matches!(self.geometry, Geometry::Truss(_))
    }

    fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.metrics.is_empty() {
            return Err(Error::Contract("discretization without integration points".into()));
        }
        let q = self.q();
        if self.metrics.iter().any(|m| m.q() != q) {
            return Err(Error::Dimension("metrics of mixed dimension".into()));
        }
        if self.load.len() != self.ndof {
            return Err(Error::Dimension("load vector length differs from dof count".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(p.weight > T::zero()) {
                return Err(Error::Contract(format!("point {} has non-positive weight", i)));
            }
            if p.b.rows() != q || p.b.cols() != p.dofs.len() || p.metric >= self.metrics.len() {
                return Err(Error::Dimension(format!("point {} has inconsistent B rows", i)));
            }
            if p.dofs.iter().any(|&d| d >= self.ndof) {
                return Err(Error::Dimension(format!("point {} references a dof beyond {}", i, self.ndof)));
            }
        }
        Ok(())
    }

    /// Nodal RK coefficients from generalized dofs (continuum), or the
    /// dofs themselves (truss).
    pub fn coefficients(&self, g: &[T]) -> Vec<T> {
        match &self.geometry {
            Geometry::Truss(_) => g.to_vec(),
            Geometry::Continuum(c) => {
                let mut d = vec![T::zero(); g.len()];
                for (n, row) in c.coef_map.iter().enumerate() {
                    for &(m, w) in row {
                        d[2 * n] += w * g[2 * m];
                        d[2 * n + 1] += w * g[2 * m + 1];
                    }
                }
                d
            }
        }
    }

    /// Displacement field `u^h(x)` of a continuum solution.
    pub fn displacement_at(&self, x: &[T; 2], g: &[T]) -> Result<[T; 2]> {
        match &self.geometry {
            Geometry::Truss(_) => Err(Error::Unsupported("field evaluation on a truss".into())),
            Geometry::Continuum(c) => crate::meshfree::interpolate(x, &c.nodes, &self.coefficients(g)),
        }
    }
}

/// Applies prescriptions, rejecting conflicting values on a repeated dof.
pub fn apply_essential_bcs<T: Real>(ndof: usize, bcs: &[(usize, T)]) -> Result<Vec<(usize, T)>> {
    let mut out: Vec<(usize, T)> = Vec::with_capacity(bcs.len());
    let mut sorted = bcs.to_vec();
    sorted.sort_by_key(|&(d, _)| d);
    for (d, v) in sorted {
        if d >= ndof {
            return Err(Error::Contract(format!("prescribed dof {} outside 0..{}", d, ndof)));
        }
        if !v.is_finite() {
            return Err(Error::Contract(format!("non-finite prescribed value on dof {}", d)));
        }
        match out.last() {
            Some(&(pd, pv)) if pd == d => {
                if pv != v {
                    return Err(Error::Contract(format!("conflicting prescriptions on dof {}: {} and {}", d, pv, v)));
                }
            }
            _ => out.push((d, v)),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- trusses

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Member<T> {
    pub a: usize,
    pub b: usize,
    pub area: T,
}

/// Displacement prescription on a node; `None` leaves the component free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Support<T> {
    pub node: usize,
    #[serde(default)]
    pub ux: Option<T>,
    #[serde(default)]
    pub uy: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PointLoad<T> {
    pub node: usize,
    pub fx: T,
    pub fy: T,
}

/// Planar pin-jointed truss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrussSpec<T> {
    pub nodes: Vec<[T; 2]>,
    pub members: Vec<Member<T>>,
    pub supports: Vec<Support<T>>,
    pub loads: Vec<PointLoad<T>>,
    /// Scalar metric modulus `M` (Pa).
    pub modulus: T,
}

impl<T: Real> TrussSpec<T> {
    /// Single horizontal bar of length 1 m and area 0.02 m², fixed at the
    /// left end and pulled axially by 10 kN at the right.
    pub fn one_bar() -> Self {
        let l = T::lit;
        Self {
            nodes: vec![[l(0.0), l(0.0)], [l(1.0), l(0.0)]],
            members: vec![Member { a: 0, b: 1, area: l(0.02) }],
            supports: vec![
                Support { node: 0, ux: Some(l(0.0)), uy: Some(l(0.0)) },
                Support { node: 1, ux: None, uy: Some(l(0.0)) },
            ],
            loads: vec![PointLoad { node: 1, fx: l(10e3), fy: l(0.0) }],
            modulus: l(100e6),
        }
    }

    /// Three-bay, two-chord truss with bay width 4 m and height 2 m: chords,
    /// four verticals, crossed diagonals in the first two bays and a single
    /// diagonal in the third (15 members, unit area). Pinned at the bottom
    /// left; the bottom right is held vertically and displaced 0.01 m
    /// horizontally; 100 kN acts downward at the second top node.
    pub fn fifteen_bar() -> Self {
        let l = T::lit;
        let (a, h) = (4.0, 2.0);
        let mut nodes = Vec::new();
        for i in 0..4 {
            nodes.push([l(a * i as f64), l(0.0)]);
        }
        for i in 0..4 {
            nodes.push([l(a * i as f64), l(h)]);
        }
        let (b, t) = (|i: usize| i, |i: usize| 4 + i);
        let mut pairs = Vec::new();
        for i in 0..3 {
            pairs.push((b(i), b(i + 1)));
        }
        for i in 0..3 {
            pairs.push((t(i), t(i + 1)));
        }
        for i in 0..4 {
            pairs.push((b(i), t(i)));
        }
        pairs.extend([(b(0), t(1)), (t(0), b(1)), (b(1), t(2)), (t(1), b(2)), (b(2), t(3))]);
        Self {
            nodes,
            members: pairs.into_iter().map(|(a, b)| Member { a, b, area: l(1.0) }).collect(),
            supports: vec![
                Support { node: b(0), ux: Some(l(0.0)), uy: Some(l(0.0)) },
                Support { node: b(3), ux: Some(l(0.01)), uy: Some(l(0.0)) },
            ],
            loads: vec![PointLoad { node: t(1), fx: l(0.0), fy: l(-100e3) }],
            modulus: l(100e6),
        }
    }
}

/// One integration point per member with weight `A l` and the axial strain
/// row `(1/l)[−c, −s, c, s]`.
pub fn build_truss<T: Real>(spec: &TrussSpec<T>) -> Result<Discretization<T>> {
    let nn = spec.nodes.len();
    if nn < 2 || spec.members.is_empty() {
        return Err(Error::Contract("truss needs at least two nodes and one member".into()));
    }
    let metric = Metric::scalar(spec.modulus)?;
    let ndof = 2 * nn;
    let mut points = Vec::with_capacity(spec.members.len());
    let mut lengths = Vec::with_capacity(spec.members.len());
    let mut connected = vec![false; nn];
    for (k, m) in spec.members.iter().enumerate() {
        if m.a >= nn || m.b >= nn || m.a == m.b {
            return Err(Error::Contract(format!("member {} has invalid end nodes", k)));
        }
        if !(m.area > T::zero()) {
            return Err(Error::Contract(format!("member {} has non-positive area", k)));
        }
        let (pa, pb) = (spec.nodes[m.a], spec.nodes[m.b]);
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let l = (dx * dx + dy * dy).sqrt();
        if !(l > T::zero()) {
            return Err(Error::Contract(format!("member {} has zero length", k)));
        }
        let (c, s) = (dx / l, dy / l);
        let mut entries = [(2 * m.a, -c), (2 * m.a + 1, -s), (2 * m.b, c), (2 * m.b + 1, s)];
        entries.sort_by_key(|e| e.0);
        let dofs = entries.iter().map(|e| e.0).collect();
        let row: Vec<T> = entries.iter().map(|e| e.1 / l).collect();
        points.push(IntegrationPoint { weight: m.area * l, dofs, b: Matrix::from_vec(1, 4, row), metric: 0 });
        lengths.push(l);
        connected[m.a] = true;
        connected[m.b] = true;
    }
    let mut bcs = Vec::new();
    for s in &spec.supports {
        if s.node >= nn {
            return Err(Error::Contract(format!("support on missing node {}", s.node)));
        }
        if let Some(v) = s.ux {
            bcs.push((2 * s.node, v));
        }
        if let Some(v) = s.uy {
            bcs.push((2 * s.node + 1, v));
        }
    }
    let essential = apply_essential_bcs(ndof, &bcs)?;
    for (n, &c) in connected.iter().enumerate() {
        let fixed = |d| essential.iter().any(|&(e, _)| e == d);
        if !c && !(fixed(2 * n) && fixed(2 * n + 1)) {
            return Err(Error::Contract(format!("node {} is not attached to any member", n)));
        }
    }
    let mut load = vec![T::zero(); ndof];
    for f in &spec.loads {
        if f.node >= nn {
            return Err(Error::Contract(format!("load on missing node {}", f.node)));
        }
        load[2 * f.node] += f.fx;
        load[2 * f.node + 1] += f.fy;
    }
    let disc = Discretization {
        geometry: Geometry::Truss(TrussGeometry {
            nodes: spec.nodes.clone(),
            members: spec.members.iter().map(|m| (m.a, m.b)).collect(),
            lengths,
            areas: spec.members.iter().map(|m| m.area).collect(),
        }),
        ndof,
        points,
        metrics: vec![metric],
        essential,
        load,
    };
    disc.validate()?;
    Ok(disc)
}

// ------------------------------------------------------------- continuum

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

/// Plane-stress body on a regular lattice.
#[derive(Clone, Debug)]
pub struct ContinuumSpec<T> {
    pub lattice: Lattice<T>,
    /// Kernel support as a multiple of the spacing.
    pub support_factor: T,
    pub metric: Metric<T>,
    /// Nodes with both displacement components prescribed.
    pub essential: Vec<(usize, [T; 2])>,
    /// Uniform tractions (Pa·m, per unit thickness) on lattice edges.
    pub tractions: Vec<(Edge, [T; 2])>,
}

/// Cantilever beam clamped at `x = 0` with a uniform downward shear traction
/// on `x = L` whose resultant is `F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct BeamSpec<T> {
    pub length: T,
    pub height: T,
    pub spacing: T,
    pub youngs_modulus: T,
    pub poisson_ratio: T,
    pub load: T,
    #[serde(default = "default_support_factor")]
    pub support_factor: T,
}

fn default_support_factor<T: Real>() -> T {
    T::lit(1.75)
}

impl<T: Real> BeamSpec<T> {
    /// 48 m × 12 m, E = 30 MPa, ν = 0.3, F = 1000 N, lattice spacing 2 m.
    pub fn standard() -> Self {
        let l = T::lit;
        Self {
            length: l(48.0),
            height: l(12.0),
            spacing: l(2.0),
            youngs_modulus: l(30e6),
            poisson_ratio: l(0.3),
            load: l(1000.0),
            support_factor: default_support_factor(),
        }
    }
}

impl<T: Real> Default for BeamSpec<T> {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn build_beam<T: Real>(spec: &BeamSpec<T>) -> Result<Discretization<T>> {
    let lattice = Lattice::rectangle(spec.length, spec.height, spec.spacing)?;
    let metric = plane_stress_metric(spec.youngs_modulus, spec.poisson_ratio)?;
    let essential = (0..=lattice.ny).map(|j| (lattice.node_id(0, j), [T::zero(); 2])).collect();
    let shear = -spec.load / spec.height;
    build_continuum(&ContinuumSpec {
        lattice,
        support_factor: spec.support_factor,
        metric,
        essential,
        tractions: vec![(Edge::Right, [T::zero(), shear])],
    })
}

/// Lattice nodes lying on one edge, in order along the edge.
pub fn edge_nodes<T: Real>(lattice: &Lattice<T>, edge: Edge) -> Vec<usize> {
    match edge {
        Edge::Left => (0..=lattice.ny).map(|j| lattice.node_id(0, j)).collect(),
        Edge::Right => (0..=lattice.ny).map(|j| lattice.node_id(lattice.nx, j)).collect(),
        Edge::Bottom => (0..=lattice.nx).map(|i| lattice.node_id(i, 0)).collect(),
        Edge::Top => (0..=lattice.nx).map(|i| lattice.node_id(i, lattice.ny)).collect(),
    }
}

/// Every node on the outer boundary of the lattice.
pub fn boundary_nodes<T: Real>(lattice: &Lattice<T>) -> Vec<usize> {
    let mut v: Vec<usize> =
        [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top].iter().flat_map(|&e| edge_nodes(lattice, e)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn build_continuum<T: Real>(spec: &ContinuumSpec<T>) -> Result<Discretization<T>> {
    if spec.metric.q() != 3 {
        return Err(Error::Dimension("plane problems need a 3×3 metric".into()));
    }
    let lat = &spec.lattice;
    let coords = lat.coords();
    let nn = coords.len();
    let nodes = NodeSet::uniform(coords, spec.support_factor * lat.h)?;

    // Transformation: with Λ_JI = Ψ_I(x_J) for constrained J, the constrained
    // coefficients become d_b = Λ_bb⁻¹ (g_b − Λ_bi d_i), where g_b are the
    // nodal values.
    let mut constrained: Vec<usize> = spec.essential.iter().map(|e| e.0).collect();
    constrained.sort_unstable();
    constrained.dedup();
    if constrained.len() != spec.essential.len() {
        return Err(Error::Contract("node prescribed twice".into()));
    }
    if constrained.iter().any(|&n| n >= nn) {
        return Err(Error::Contract("prescription on a missing node".into()));
    }
    let slot: Vec<Option<usize>> = {
        let mut s = vec![None; nn];
        for (k, &n) in constrained.iter().enumerate() {
            s[n] = Some(k);
        }
        s
    };
    let mut coef_map: Vec<Vec<(usize, T)>> = (0..nn).map(|n| vec![(n, T::one())]).collect();
    if !constrained.is_empty() {
        let nb = constrained.len();
        let mut lbb = Matrix::zeros(nb, nb);
        let mut lbi: Vec<Vec<(usize, T)>> = vec![Vec::new(); nb];
        for (r, &jn) in constrained.iter().enumerate() {
            let s = rk_shape(&nodes.coords[jn], &nodes)?;
            for (&i, &v) in s.node_ids.iter().zip(&s.values) {
                match slot[i] {
                    Some(c) => lbb[(r, c)] = v,
                    None => lbi[r].push((i, v)),
                }
            }
        }
        let inv = Lu::new(&lbb)?.inverse();
        for (r, &jn) in constrained.iter().enumerate() {
            let mut row: std::collections::BTreeMap<usize, T> = std::collections::BTreeMap::new();
            for (c, &kn) in constrained.iter().enumerate() {
                if inv[(r, c)] != T::zero() {
                    *row.entry(kn).or_insert(T::zero()) += inv[(r, c)];
                }
                for &(i, v) in &lbi[c] {
                    *row.entry(i).or_insert(T::zero()) -= inv[(r, c)] * v;
                }
            }
            coef_map[jn] = row.into_iter().filter(|&(_, w)| w != T::zero()).collect();
        }
    }

    // Smoothed gradients in coefficient space, then mapped to generalized dofs.
    let cells = build_cells(lat);
    let mut points = Vec::with_capacity(cells.len());
    for cell in &cells {
        let sb = smoothed_gradient(cell, &nodes)?;
        let mut grads: std::collections::BTreeMap<usize, [T; 2]> = std::collections::BTreeMap::new();
        for (&n, g) in sb.node_ids.iter().zip(&sb.grads) {
            for &(m, w) in &coef_map[n] {
                let e = grads.entry(m).or_insert([T::zero(); 2]);
                e[0] += w * g[0];
                e[1] += w * g[1];
            }
        }
        let ids: Vec<usize> = grads.keys().copied().collect();
        let mapped = crate::meshfree::SmoothedB { node_ids: ids.clone(), grads: grads.values().copied().collect() };
        let dofs = ids.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
        points.push(IntegrationPoint { weight: cell.volume, dofs, b: mapped.matrix(), metric: 0 });
    }

    // Consistent nodal forces from boundary integration of Ψ_I t.
    let mut f_coef = vec![T::zero(); 2 * nn];
    for &(edge, t) in &spec.tractions {
        let en = edge_nodes(lat, edge);
        for w in en.windows(2) {
            let (a, b) = (nodes.coords[w[0]], nodes.coords[w[1]]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            for x in [a, b] {
                let s = rk_shape(&x, &nodes)?;
                for (&i, &v) in s.node_ids.iter().zip(&s.values) {
                    f_coef[2 * i] += len * T::half() * v * t[0];
                    f_coef[2 * i + 1] += len * T::half() * v * t[1];
                }
            }
        }
    }
    // f_g = Tᵀ f_d
    let mut load = vec![T::zero(); 2 * nn];
    for (n, row) in coef_map.iter().enumerate() {
        for &(m, w) in row {
            load[2 * m] += w * f_coef[2 * n];
            load[2 * m + 1] += w * f_coef[2 * n + 1];
        }
    }

    let bcs: Vec<(usize, T)> = spec.essential.iter().flat_map(|&(n, u)| [(2 * n, u[0]), (2 * n + 1, u[1])]).collect();
    let disc = Discretization {
        geometry: Geometry::Continuum(ContinuumGeometry { lattice: *lat, nodes, coef_map }),
        ndof: 2 * nn,
        points,
        metrics: vec![spec.metric.clone()],
        essential: apply_essential_bcs(2 * nn, &bcs)?,
        load,
    };
    disc.validate()?;
    Ok(disc)
}

// ------------------------------------------------------------ global step

/// Output of one global step.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalState<T> {
    /// Full dof vector including prescribed values.
    pub d: Vec<T>,
    /// Multipliers; zero on prescribed dofs.
    pub lambda: Vec<T>,
    pub states: Vec<LocalState<T>>,
}

/// Factored free-dof stiffness of a discretization.
#[derive(Clone, Debug)]
pub struct GlobalSolver<'a, T> {
    disc: &'a Discretization<T>,
    /// Free-dof index of each dof, `None` if prescribed.
    free_of: Vec<Option<usize>>,
    free: Vec<usize>,
    k: SkylineMatrix<T>,
    chol: SkylineCholesky<T>,
}

impl<'a, T: Real> GlobalSolver<'a, T> {
    pub fn new(disc: &'a Discretization<T>) -> Result<Self> {
        disc.validate()?;
        let mut free_of = vec![Some(0); disc.ndof];
        for &(d, _) in &disc.essential {
            free_of[d] = None;
        }
        let mut free = Vec::new();
        for (d, slot) in free_of.iter_mut().enumerate() {
            if slot.is_some() {
                *slot = Some(free.len());
                free.push(d);
            }
        }
        if free.is_empty() {
            return Err(Error::Contract("every dof is prescribed".into()));
        }
        let nf = free.len();
        let mut first: Vec<usize> = (0..nf).collect();
        for p in &disc.points {
            let fs: Vec<usize> = p.dofs.iter().filter_map(|&d| free_of[d]).collect();
            if let Some(&lo) = fs.iter().min() {
                for &f in &fs {
                    first[f] = first[f].min(lo);
                }
            }
        }
        let mut k = SkylineMatrix::with_profile(first);
        for p in &disc.points {
            let m = disc.metrics[p.metric].m_eps();
            // V Bᵀ M B on the point's dofs
            let mb = m.matmul(&p.b);
            let local = p.b.transpose().matmul(&mb);
            for (a, &da) in p.dofs.iter().enumerate() {
                let Some(fa) = free_of[da] else { continue };
                for (b, &db) in p.dofs.iter().enumerate() {
                    let Some(fb) = free_of[db] else { continue };
                    if fb <= fa {
                        k.add(fa, fb, p.weight * local[(a, b)]);
                    }
                }
            }
        }
        let chol = k.clone().factor().map_err(|e| match e {
            Error::SingularSystem { dof, detail } => Error::SingularSystem {
                dof: free[dof],
                detail: format!("{} (structure not sufficiently supported?)", detail),
            },
            other => other,
        })?;
        Ok(Self { disc, free_of, free, k, chol })
    }

    pub fn discretization(&self) -> &'a Discretization<T> {
        self.disc
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    /// Stiffness entry on free dofs `(i, j)` (free numbering).
    pub fn stiffness(&self, i: usize, j: usize) -> T {
        self.k.get(i, j)
    }

    /// Solve with one step of iterative refinement.
    fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut x = self.chol.solve(rhs);
        let kx = self.k.mul_vec(&x);
        let r: Vec<T> = rhs.iter().zip(&kx).map(|(&b, &a)| b - a).collect();
        let dx = self.chol.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        x
    }

    fn check_assigned(&self, assigned: &[LocalState<T>]) -> Result<()> {
        let q = self.disc.q();
        if assigned.len() != self.disc.points.len() {
            return Err(Error::Dimension(format!(
                "{} assigned states for {} integration points",
                assigned.len(),
                self.disc.points.len()
            )));
        }
        if assigned.iter().any(|s| s.q() != q) {
            return Err(Error::Dimension(format!("assigned states must have dimension {}", q)));
        }
        Ok(())
    }

    fn prescribed(&self, scale: T) -> Vec<T> {
        let mut d = vec![T::zero(); self.disc.ndof];
        for &(i, v) in &self.disc.essential {
            d[i] = v * scale;
        }
        d
    }

    /// Admissible state closest to `assigned`, under the full load.
    pub fn global_step(&self, assigned: &[LocalState<T>]) -> Result<GlobalState<T>> {
        self.global_step_scaled(assigned, T::one())
    }

    /// As [`Self::global_step`] with loads and prescribed displacements
    /// multiplied by `scale`.
    pub fn global_step_scaled(&self, assigned: &[LocalState<T>], scale: T) -> Result<GlobalState<T>> {
        self.check_assigned(assigned)?;
        let disc = self.disc;
        let nf = self.free.len();
        let mut d = self.prescribed(scale);
        let mut rhs_d = vec![T::zero(); nf];
        let mut rhs_l: Vec<T> = self.free.iter().map(|&i| disc.load[i] * scale).collect();
        for (p, s) in disc.points.iter().zip(assigned) {
            let m = disc.metrics[p.metric].m_eps();
            // ε̂ − B_P ū_P, so the prescribed part moves to the right-hand side.
            let eps_p = p.strain(&d);
            let diff: Vec<T> = s.strain.iter().zip(&eps_p).map(|(&a, &b)| a - b).collect();
            let md = m.mul_vec(&diff);
            let btm = p.b.tr_mul_vec(&md);
            let bts = p.b.tr_mul_vec(&s.stress);
            for (a, &da) in p.dofs.iter().enumerate() {
                if let Some(f) = self.free_of[da] {
                    rhs_d[f] += p.weight * btm[a];
                    rhs_l[f] -= p.weight * bts[a];
                }
            }
        }
        let df = self.solve(&rhs_d);
        let lf = self.solve(&rhs_l);
        let mut lambda = vec![T::zero(); disc.ndof];
        for (k, &i) in self.free.iter().enumerate() {
            d[i] = df[k];
            lambda[i] = lf[k];
        }
        let states = disc
            .points
            .iter()
            .zip(assigned)
            .map(|(p, s)| {
                let m = disc.metrics[p.metric].m_eps();
                let bl = p.strain(&lambda);
                let corr = m.mul_vec(&bl);
                LocalState { strain: p.strain(&d), stress: s.stress.iter().zip(&corr).map(|(&a, &b)| a + b).collect() }
            })
            .collect();
        Ok(GlobalState { d, lambda, states })
    }

    /// Classical displacement solution with `σ = M_ε ε` at every point.
    pub fn reference_solution(&self, scale: T) -> Result<GlobalState<T>> {
        let disc = self.disc;
        let mut d = self.prescribed(scale);
        let mut rhs: Vec<T> = self.free.iter().map(|&i| disc.load[i] * scale).collect();
        for p in &disc.points {
            let m = disc.metrics[p.metric].m_eps();
            let sp = m.mul_vec(&p.strain(&d));
            let bts = p.b.tr_mul_vec(&sp);
            for (a, &da) in p.dofs.iter().enumerate() {
                if let Some(f) = self.free_of[da] {
                    rhs[f] -= p.weight * bts[a];
                }
            }
        }
        let df = self.solve(&rhs);
        for (k, &i) in self.free.iter().enumerate() {
            d[i] = df[k];
        }
        let states = disc
            .points
            .iter()
            .map(|p| {
                let e = p.strain(&d);
                let s = disc.metrics[p.metric].m_eps().mul_vec(&e);
                LocalState { strain: e, stress: s }
            })
            .collect();
        Ok(GlobalState { lambda: vec![T::zero(); disc.ndof], d, states })
    }

    /// Internal force `Σ V Bᵀ σ` on every dof.
    pub fn internal_force(&self, states: &[LocalState<T>]) -> Vec<T> {
        let mut f = vec![T::zero(); self.disc.ndof];
        for (p, s) in self.disc.points.iter().zip(states) {
            let bts = p.b.tr_mul_vec(&s.stress);
            for (a, &da) in p.dofs.iter().enumerate() {
                f[da] += p.weight * bts[a];
            }
        }
        f
    }

    /// `‖Σ V Bᵀ σ − f‖` over free dofs.
    pub fn equilibrium_residual(&self, states: &[LocalState<T>], scale: T) -> T {
        let fi = self.internal_force(states);
        let r: Vec<T> = self.free.iter().map(|&i| fi[i] - self.disc.load[i] * scale).collect();
        dot(&r, &r).sqrt()
    }

    /// Norm of the free part of the load vector.
    pub fn load_norm(&self, scale: T) -> T {
        let f: Vec<T> = self.free.iter().map(|&i| self.disc.load[i] * scale).collect();
        dot(&f, &f).sqrt()
    }

    /// Largest `|ε_α − B_α d|`, relative to the largest strain component.
    pub fn compatibility_residual(&self, d: &[T], states: &[LocalState<T>]) -> T {
        let mut worst = T::zero();
        let mut scale = T::zero();
        for (p, s) in self.disc.points.iter().zip(states) {
            for (a, b) in p.strain(d).iter().zip(&s.strain) {
                worst = worst.max((*a - *b).abs());
                scale = scale.max(a.abs());
            }
        }
        if scale > T::zero() {
            worst / scale
        } else {
            worst
        }
    }
}
