//! Neighbor queries over sample positions (R*-tree backed).
//!
//! All queries break distance ties by lowest sample index.

use rstar::primitives::GeomWithData;
use rstar::RTree;

use crate::model::SampleSet;

type Entry = GeomWithData<[f64; 2], usize>;

#[derive(Debug, Clone)]
pub struct SampleIndex {
    tree: RTree<Entry>,
    len: usize,
}

/// A neighbor: sample index and Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist: f64,
}

impl SampleIndex {
    pub fn new(samples: &SampleSet) -> Self {
        let entries = samples
            .iter()
            .enumerate()
            .map(|(k, s)| Entry::new([s.x, s.y], k))
            .collect();
        Self {
            tree: RTree::bulk_load(entries),
            len: samples.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nearest(&self, x: f64, y: f64) -> Option<Neighbor> {
        let mut it = self.tree.nearest_neighbor_iter_with_distance_2(&[x, y]);
        let (first, d2) = it.next()?;
        let mut best = first.data;
        for (e, e2) in it {
            if e2 > d2 {
                break;
            }
            best = best.min(e.data);
        }
        Some(Neighbor {
            index: best,
            dist: d2.sqrt(),
        })
    }

    /// The `k` nearest samples sorted by `(distance, index)`.
    pub fn k_nearest(&self, x: f64, y: f64, k: usize) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let mut out: Vec<(f64, usize)> = Vec::with_capacity(k + 4);
        for (e, d2) in self.tree.nearest_neighbor_iter_with_distance_2(&[x, y]) {
            if out.len() >= k && d2 > out[out.len() - 1].0 {
                break;
            }
            out.push((d2, e.data));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.truncate(k);
        out.into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                dist: d2.sqrt(),
            })
            .collect()
    }

    /// All samples with distance `<= radius`, sorted by `(distance, index)`.
    pub fn within(&self, x: f64, y: f64, radius: f64) -> Vec<Neighbor> {
        let r2 = radius * radius;
        let mut out: Vec<(f64, usize)> = self
            .tree
            .locate_within_distance([x, y], r2)
            .map(|e| {
                let (dx, dy) = (e.geom()[0] - x, e.geom()[1] - y);
                (dx * dx + dy * dy, e.data)
            })
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                dist: d2.sqrt(),
            })
            .collect()
    }

    /// Every sample sorted by `(distance, index)`.
    pub fn all(&self, x: f64, y: f64) -> Vec<Neighbor> {
        self.k_nearest(x, y, self.len)
    }
}
