//! Exact nearest-neighbour search in the metric of the phase space.

use crate::datagen::MaterialDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::phase_space::{distance, rescale, DatasetPoint, LocalState, Metric};
use crate::scalar::Real;

/// The `k` dataset points closest to a query, in increasing distance.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighborhood<T> {
    pub indices: Vec<usize>,
    /// `2q × k`; column `j` is the stacked state of `indices[j]`.
    pub matrix: Matrix<T>,
}

impl<T: Real> Neighborhood<T> {
    #[inline]
    pub fn k(&self) -> usize {
        self.indices.len()
    }

    /// Builds the neighbourhood from explicit dataset indices.
    pub fn from_indices(dataset: &MaterialDataset<T>, indices: Vec<usize>) -> Result<Self> {
        let p = dataset.len();
        let n = 2 * dataset.q();
        let mut matrix = Matrix::zeros(n, indices.len());
        for (j, &i) in indices.iter().enumerate() {
            if i >= p {
                return Err(Error::Contract(format!("index {} outside dataset of {} points", i, p)));
            }
            for (r, v) in dataset.state(i).to_vector().into_iter().enumerate() {
                matrix[(r, j)] = v;
            }
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Contract("duplicate neighbour index".into()));
        }
        Ok(Self { indices, matrix })
    }

    /// `Ŝ w`.
    pub fn combine(&self, w: &[T]) -> LocalState<T> {
        LocalState::from_vector(&self.matrix.mul_vec(w))
    }
}

/// Datasets at or below this size are scanned linearly.
const SCAN_LIMIT: usize = 256;
const LEAF_SIZE: usize = 16;
const NO_CHILD: usize = usize::MAX;

#[derive(Clone, Debug)]
struct KdNode<T> {
    /// Range of `KdTree::perm` covered by this node.
    lo: usize,
    hi: usize,
    dim: usize,
    split: T,
    left: usize,
    right: usize,
}

/// Median-split k-d tree over the rescaled rows.
#[derive(Clone, Debug)]
struct KdTree<T> {
    nodes: Vec<KdNode<T>>,
    perm: Vec<usize>,
}

impl<T: Real> KdTree<T> {
    fn build(scaled: &[T], width: usize) -> Self {
        let p = scaled.len() / width;
        let mut tree = Self { nodes: Vec::new(), perm: (0..p).collect() };
        tree.split(scaled, width, 0, p);
        tree
    }

    fn split(&mut self, scaled: &[T], width: usize, lo: usize, hi: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(KdNode { lo, hi, dim: 0, split: T::zero(), left: NO_CHILD, right: NO_CHILD });
        if hi - lo <= LEAF_SIZE {
            return id;
        }
        let mut dim = 0;
        let mut spread = T::zero();
        for d in 0..width {
            let (mut mn, mut mx) = (T::infinity(), T::neg_infinity());
            for &i in &self.perm[lo..hi] {
                let v = scaled[i * width + d];
                mn = mn.min(v);
                mx = mx.max(v);
            }
            if mx - mn > spread {
                spread = mx - mn;
                dim = d;
            }
        }
        if spread == T::zero() {
            return id;
        }
        let mid = lo + (hi - lo) / 2;
        let key = |i: &usize| scaled[*i * width + dim];
        self.perm[lo..hi].select_nth_unstable_by(mid - lo, |a, b| key(a).partial_cmp(&key(b)).expect("finite"));
        let split = key(&self.perm[mid]);
        let left = self.split(scaled, width, lo, mid);
        let right = self.split(scaled, width, mid, hi);
        let n = &mut self.nodes[id];
        n.dim = dim;
        n.split = split;
        n.left = left;
        n.right = right;
        id
    }
}

/// Running list of the `k` best `(distance², index)` pairs in lexicographic
/// order, which makes the result independent of visiting order.
struct Best<T> {
    k: usize,
    items: Vec<(T, usize)>,
}

impl<T: Real> Best<T> {
    fn offer(&mut self, d: T, i: usize) {
        let worse = |a: &(T, usize)| a.0 > d || (a.0 == d && a.1 > i);
        if self.items.len() == self.k && !worse(&self.items[self.k - 1]) {
            return;
        }
        let pos = self.items.partition_point(|a| !worse(a));
        self.items.insert(pos, (d, i));
        self.items.truncate(self.k);
    }

    /// Whether a region whose points are all at least `bound` away may
    /// still contribute.
    fn admits(&self, bound: T) -> bool {
        self.items.len() < self.k || bound <= self.items[self.k - 1].0
    }
}

/// A dataset pre-mapped into the Euclidean frame of one metric. Small sets
/// are scanned; larger ones go through an exact k-d tree.
#[derive(Clone, Debug)]
pub struct DataSearch<'a, T> {
    dataset: &'a MaterialDataset<T>,
    metric: Metric<T>,
    scaled: Vec<T>,
    width: usize,
    tree: Option<KdTree<T>>,
}

impl<'a, T: Real> DataSearch<'a, T> {
    pub fn new(dataset: &'a MaterialDataset<T>, metric: &Metric<T>) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if dataset.q() != metric.q() {
            return Err(Error::Dimension(format!(
                "dataset of dimension {} searched with a metric of dimension {}",
                dataset.q(),
                metric.q()
            )));
        }
        let width = 2 * dataset.q();
        let mut scaled = Vec::with_capacity(width * dataset.len());
        for p in dataset.points() {
            scaled.extend(metric.rescale_vector(&p.state.to_vector()));
        }
        let tree = (dataset.len() > SCAN_LIMIT).then(|| KdTree::build(&scaled, width));
        Ok(Self { dataset, metric: metric.clone(), scaled, width, tree })
    }

    pub fn dataset(&self) -> &'a MaterialDataset<T> {
        self.dataset
    }

    pub fn metric(&self) -> &Metric<T> {
        &self.metric
    }

    /// Indices of the `k` closest points, ties resolved toward lower index.
    pub fn nearest_indices(&self, s: &LocalState<T>, k: usize) -> Result<Vec<usize>> {
        let p = self.dataset.len();
        if k == 0 {
            return Err(Error::Contract("k must be at least 1".into()));
        }
        if k > p {
            return Err(Error::TooManyNeighbors { k, p });
        }
        let z = rescale(s, &self.metric)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite query state".into()));
        }
        let mut best = Best { k, items: Vec::with_capacity(k + 1) };
        match &self.tree {
            None => {
                for i in 0..p {
                    best.offer(self.dist2(i, &z), i);
                }
            }
            Some(tree) => self.descend(tree, 0, &z, &mut best),
        }
        Ok(best.items.into_iter().map(|(_, i)| i).collect())
    }

    fn dist2(&self, i: usize, z: &[T]) -> T {
        let row = &self.scaled[i * self.width..(i + 1) * self.width];
        row.iter().zip(z).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
    }

    fn descend(&self, tree: &KdTree<T>, id: usize, z: &[T], best: &mut Best<T>) {
        let node = &tree.nodes[id];
        if node.left == NO_CHILD {
            for &i in &tree.perm[node.lo..node.hi] {
                best.offer(self.dist2(i, z), i);
            }
            return;
        }
        let diff = z[node.dim] - node.split;
        let (near, far) = if diff < T::zero() { (node.left, node.right) } else { (node.right, node.left) };
        self.descend(tree, near, z, best);
        // Every point beyond the split differs from z by at least |diff| in
        // this coordinate, and rounding is monotone, so diff² bounds dist2.
        if best.admits(diff * diff) {
            self.descend(tree, far, z, best);
        }
    }

    pub fn knn(&self, s: &LocalState<T>, k: usize) -> Result<Neighborhood<T>> {
        let indices = self.nearest_indices(s, k)?;
        Neighborhood::from_indices(self.dataset, indices)
    }

    /// Closest dataset point and its metric distance.
    pub fn nearest(&self, s: &LocalState<T>) -> Result<(&'a DatasetPoint<T>, T)> {
        let i = self.nearest_indices(s, 1)?[0];
        let point = &self.dataset.points()[i];
        Ok((point, distance(s, &point.state, &self.metric)?))
    }
}

/// The `k` nearest dataset points to `s` by exact scan.
pub fn knn<T: Real>(
    dataset: &MaterialDataset<T>,
    s: &LocalState<T>,
    m: &Metric<T>,
    k: usize,
) -> Result<Neighborhood<T>> {
    DataSearch::new(dataset, m)?.knn(s, k)
}

/// The dataset point closest to `s`, with its distance.
pub fn nearest_point<'a, T: Real>(
    dataset: &'a MaterialDataset<T>,
    s: &LocalState<T>,
    m: &Metric<T>,
) -> Result<(&'a DatasetPoint<T>, T)> {
    DataSearch::new(dataset, m)?.nearest(s)
}
