//! Undirected graph view with connected components, plus the uniform spatial
//! grid shared by the geometric graph builders.

use std::collections::HashMap;
use std::io::Write;

use crate::error::Result;
use crate::process::PointConfiguration;

/// Disjoint-set forest with union by size and path halving.
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Adjacency lists plus the component partition of an undirected graph.
#[derive(Clone, Debug)]
pub struct GraphView {
    adjacency: Vec<Vec<usize>>,
    component_of: Vec<usize>,
    component_sizes: Vec<usize>,
}

impl GraphView {
    /// Builds the view from undirected edges; duplicates are merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        let mut uf = UnionFind::new(n);
        for &(u, v) in edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
            uf.union(u, v);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        // Re-derive components from the deduplicated adjacency.
        let mut root_to_id = HashMap::new();
        let mut component_of = vec![0usize; n];
        let mut component_sizes = Vec::new();
        for v in 0..n {
            let root = uf.find(v);
            let id = *root_to_id.entry(root).or_insert_with(|| {
                component_sizes.push(0);
                component_sizes.len() - 1
            });
            component_of[v] = id;
            component_sizes[id] += 1;
        }
        Self { adjacency, component_of, component_sizes }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    /// Unique undirected edges, with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            list.iter().filter(move |&&v| v > u).map(move |&v| (u, v))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Number of vertices with degree exactly `j`.
    pub fn degree_count(&self, j: usize) -> usize {
        self.adjacency.iter().filter(|list| list.len() == j).count()
    }

    pub fn component_size_of(&self, v: usize) -> usize {
        self.component_sizes[self.component_of[v]]
    }

    pub fn component_count_total(&self) -> usize {
        self.component_sizes.len()
    }

    /// Number of connected components with exactly `j` vertices.
    pub fn component_count(&self, j: usize) -> usize {
        self.component_sizes.iter().filter(|&&s| s == j).count()
    }

    /// Debug dump: CSV edge list `u,v` by vertex index.
    pub fn write_edges_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "u,v")?;
        for (u, v) in self.edges() {
            writeln!(out, "{u},{v}")?;
        }
        Ok(())
    }
}

/// Uniform grid over the points of a configuration with a fixed cell width.
/// Cell keys are floors of coordinate/cell, so any coordinate range works.
pub struct UniformGrid<'a> {
    config: &'a PointConfiguration,
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
    key_lo: Vec<i64>,
    key_hi: Vec<i64>,
}

impl<'a> UniformGrid<'a> {
    pub fn build(config: &'a PointConfiguration, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell width must be positive");
        let dim = config.dim();
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        let mut key_lo = vec![i64::MAX; dim];
        let mut key_hi = vec![i64::MIN; dim];
        for (i, p) in config.iter().enumerate() {
            let key = Self::key_of(p, cell);
            for (a, &k) in key.iter().enumerate() {
                key_lo[a] = key_lo[a].min(k);
                key_hi[a] = key_hi[a].max(k);
            }
            buckets.entry(key).or_default().push(i);
        }
        if config.is_empty() {
            key_lo = vec![0; dim];
            key_hi = vec![0; dim];
        }
        Self { config, cell, buckets, key_lo, key_hi }
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    fn key_of(p: &[f64], cell: f64) -> Vec<i64> {
        p.iter().map(|&c| (c / cell).floor() as i64).collect()
    }

    /// Largest Chebyshev cell distance that can still contain points.
    pub fn max_ring(&self) -> i64 {
        self.key_lo
            .iter()
            .zip(&self.key_hi)
            .map(|(lo, hi)| hi - lo)
            .max()
            .unwrap_or(0)
            + 1
    }

    /// Visits every point whose cell is within Chebyshev distance 1 of the
    /// cell of point `i`. With cell width >= the search radius this covers
    /// all candidates.
    pub fn for_each_adjacent(&self, i: usize, mut visit: impl FnMut(usize)) {
        let key = Self::key_of(self.config.point(i), self.cell);
        self.for_each_in_box(&key, 1, |j| visit(j));
    }

    /// Visits every point in cells with Chebyshev distance exactly `ring`
    /// from `center` (all cells within the box for `ring = 0`).
    pub fn for_each_on_ring(&self, center: &[i64], ring: i64, mut visit: impl FnMut(usize)) {
        if ring == 0 {
            if let Some(bucket) = self.buckets.get(center) {
                for &j in bucket {
                    visit(j);
                }
            }
            return;
        }
        let dim = center.len();
        let mut offset = vec![-ring; dim];
        loop {
            if offset.iter().any(|o| o.abs() == ring) {
                let key: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
                if let Some(bucket) = self.buckets.get(&key) {
                    for &j in bucket {
                        visit(j);
                    }
                }
            }
            // Advance the mixed-radix counter over offsets.
            let mut axis = 0;
            loop {
                if axis == dim {
                    return;
                }
                offset[axis] += 1;
                if offset[axis] <= ring {
                    break;
                }
                offset[axis] = -ring;
                axis += 1;
            }
        }
    }

    fn for_each_in_box(&self, center: &[i64], half_width: i64, mut visit: impl FnMut(usize)) {
        let dim = center.len();
        let mut offset = vec![-half_width; dim];
        loop {
            let key: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
            if let Some(bucket) = self.buckets.get(&key) {
                for &j in bucket {
                    visit(j);
                }
            }
            let mut axis = 0;
            loop {
                if axis == dim {
                    return;
                }
                offset[axis] += 1;
                if offset[axis] <= half_width {
                    break;
                }
                offset[axis] = -half_width;
                axis += 1;
            }
        }
    }

    pub fn key(&self, i: usize) -> Vec<i64> {
        Self::key_of(self.config.point(i), self.cell)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_find_components() {
        let mut uf = UnionFind::new(6);
        uf.union(0, 1);
        uf.union(1, 2);
        uf.union(4, 5);
        assert_eq!(uf.find(0), uf.find(2));
        assert_ne!(uf.find(0), uf.find(3));
        assert_eq!(uf.find(4), uf.find(5));
    }

    #[test]
    fn graph_view_components_and_degrees() {
        // 0-1-2 path, 3 isolated, 4-5 edge.
        let g = GraphView::from_edges(6, &[(0, 1), (1, 2), (4, 5), (5, 4)]);
        assert_eq!(g.degree(1), 2);
        assert_eq!(g.degree(3), 0);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.component_count(3), 1);
        assert_eq!(g.component_count(2), 1);
        assert_eq!(g.component_count(1), 1);
        assert_eq!(g.degree_count(1), 4);
        assert_eq!(g.degree_count(0), 1);
        let total: usize = (0..=3).map(|j| j * g.component_count(j)).sum();
        assert_eq!(total, 6);
    }

    #[test]
    fn grid_ring_covers_everything_once() {
        use crate::process::{sample_poisson, SeedSpec, Window};
        let config = sample_poisson(&Window::unit_cube(2), 60.0, SeedSpec::new(10, 0)).unwrap();
        let grid = UniformGrid::build(&config, 0.13);
        let center = grid.key(0);
        let mut seen = vec![0usize; config.len()];
        for ring in 0..=grid.max_ring() {
            grid.for_each_on_ring(&center, ring, |j| seen[j] += 1);
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
