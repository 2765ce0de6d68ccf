//! Nearest-neighbour GP: exact kd-tree m-NN over the correction dataset and GP training on
//! the neighbour subset only.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::gp::{self, FitOptions, GpHyperparams, GpModel, KernelFamily};
use crate::state::{squared_distance, CorrectionDataset};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Static kd-tree over a point set; rebuilt rather than updated when the data grow.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    points: Vec<f64>,
    /// Point ids in leaf order.
    order: Vec<usize>,
    root: Node,
}

#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // larger distance, then larger index, is "worse"
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl NeighborIndex {
    pub fn build(dataset: &CorrectionDataset) -> Result<Self> {
        let dim = dataset.dim().ok_or(Error::EmptyDataset)?;
        let points: Vec<f64> = dataset.inputs.iter().flat_map(|x| x.iter().copied()).collect();
        Ok(Self::from_flat(dim, points))
    }

    pub fn from_flat(dim: usize, points: Vec<f64>) -> Self {
        assert!(dim > 0 && !points.is_empty() && points.len().is_multiple_of(dim));
        let n = points.len() / dim;
        let mut order: Vec<usize> = (0..n).collect();
        let root = split(&points, dim, &mut order, 0);
        NeighborIndex {
            dim,
            points,
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Indices of the `min(m, D)` nearest points, nearest first; equal distances are
    /// ordered by lower index.
    pub fn nearest(&self, u: &[f64], m: usize) -> Vec<usize> {
        let m = m.min(self.len());
        if m == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(m + 1);
        self.search(&self.root, u, m, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| c.1).collect()
    }

    fn search(&self, node: &Node, u: &[f64], m: usize, heap: &mut BinaryHeap<Candidate>) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let c = Candidate(squared_distance(self.point(i), u), i);
                    if heap.len() < m {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = u[*axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, u, m, heap);
                // a tie on the plane may still win on index, so prune only strictly farther
                if heap.len() < m || diff * diff <= heap.peek().expect("heap is full").0 {
                    self.search(far, u, m, heap);
                }
            }
        }
    }
}

fn split(points: &[f64], dim: usize, ids: &mut [usize], offset: usize) -> Node {
    let n = ids.len();
    if n <= LEAF_SIZE {
        return Node::Leaf {
            start: offset,
            end: offset + n,
        };
    }
    // widest axis
    let mut axis = 0;
    let mut widest = -1.0;
    for a in 0..dim {
        let (lo, hi) = ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let x = points[i * dim + a];
            (lo.min(x), hi.max(x))
        });
        if hi - lo > widest {
            widest = hi - lo;
            axis = a;
        }
    }
    if widest <= 0.0 {
        return Node::Leaf {
            start: offset,
            end: offset + n,
        };
    }
    let mid = n / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| {
        points[a * dim + axis]
            .total_cmp(&points[b * dim + axis])
            .then(a.cmp(&b))
    });
    let value = points[ids[mid] * dim + axis];
    let (l, r) = ids.split_at_mut(mid);
    Node::Split {
        axis,
        value,
        left: Box::new(split(points, dim, l, offset)),
        right: Box::new(split(points, dim, r, offset + mid)),
    }
}

/// Train a GP on the `m` dataset points nearest to `anchor`.
///
/// The neighbour rows keep their dataset order, so `m >= D` reproduces [`gp::fit`] exactly.
pub fn fit_local(
    dataset: &CorrectionDataset,
    index: &NeighborIndex,
    anchor: &[f64],
    m: usize,
    family: KernelFamily,
    options: &FitOptions,
    warm_start: Option<&[GpHyperparams]>,
) -> Result<GpModel> {
    let mut rows = index.nearest(anchor, m);
    rows.sort_unstable();
    gp::fit(&dataset.subset(&rows), family, options, warm_start)
}
