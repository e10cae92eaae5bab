//! Undirected k-nearest-neighbour graphs, edge-length functionals and degree
//! counts.
//!
//! An edge `{u, v}` is present when `v` is among the `k` nearest neighbours
//! of `u` or vice versa. Distance ties are broken by the smaller point index,
//! which is a measure-zero event under the sampling model but keeps tests
//! reproducible on rational inputs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::graph::{distance, squared_distance, GraphView, UniformGrid};
use crate::malliavin::Functional;
use crate::process::PointConfiguration;

/// Candidate neighbour ordered by (distance, index); the heap keeps the k
/// best, with the worst on top.
#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact k-nearest neighbours of every point via grid ring search.
///
/// Rings of grid cells are scanned outward; the search stops once the k-th
/// best distance is at most the inradius of the scanned region, which
/// guarantees exactness. Queries whose ring enumeration would visit more
/// cells than a linear scan costs fall back to the scan, so degenerate
/// layouts (collinear points, far outliers) stay exact and fast.
fn knn_indices(config: &PointConfiguration, k: usize) -> Vec<Vec<usize>> {
    let n = config.len();
    if n == 0 {
        return Vec::new();
    }
    if k >= n - 1 {
        // Everyone is everyone's neighbour.
        return (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
    }
    // Grid of about n^{1/d} cells along the widest axis.
    let dim = config.dim();
    let (mut lo, mut hi) = (vec![f64::INFINITY; dim], vec![f64::NEG_INFINITY; dim]);
    for p in config.iter() {
        for (a, &c) in p.iter().enumerate() {
            lo[a] = lo[a].min(c);
            hi[a] = hi[a].max(c);
        }
    }
    let max_extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0f64, f64::max);
    let cells_per_axis = (n as f64).powf(1.0 / dim as f64).ceil();
    let cell = if max_extent > 0.0 { max_extent / cells_per_axis } else { 1.0 };
    let grid = UniformGrid::build(config, cell);
    let cell_budget = 4 * n + 64;

    (0..n)
        .map(|i| {
            let center = grid.key(i);
            let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
            let p = config.point(i);
            let mut offer = |heap: &mut BinaryHeap<Candidate>, j: usize| {
                if j == i {
                    return;
                }
                let candidate = Candidate { dist2: squared_distance(p, config.point(j)), index: j };
                if heap.len() < k {
                    heap.push(candidate);
                } else if candidate.cmp(heap.peek().unwrap()) == Ordering::Less {
                    heap.pop();
                    heap.push(candidate);
                }
            };
            let max_ring = grid.max_ring();
            let mut cells_visited = 0usize;
            for ring in 0..=max_ring {
                let ring_cells = if ring == 0 {
                    1
                } else {
                    (2 * ring as usize + 1).pow(dim as u32)
                        - (2 * ring as usize - 1).pow(dim as u32)
                };
                cells_visited += ring_cells;
                if cells_visited > cell_budget {
                    // Enumerating empty cells now costs more than scanning
                    // every point once.
                    heap.clear();
                    for j in 0..n {
                        offer(&mut heap, j);
                    }
                    break;
                }
                grid.for_each_on_ring(&center, ring, |j| offer(&mut heap, j));
                // Any unscanned point is at distance >= ring * cell.
                if heap.len() == k {
                    let kth = heap.peek().unwrap().dist2.sqrt();
                    if kth <= ring as f64 * cell {
                        break;
                    }
                }
            }
            let mut ids: Vec<usize> = heap.into_iter().map(|c| c.index).collect();
            ids.sort_unstable();
            ids
        })
        .collect()
}

/// Builds the undirected k-nearest-neighbour graph.
pub fn build_knn(config: &PointConfiguration, k: usize) -> GraphView {
    assert!(k >= 1, "k must be positive");
    let neighbour_sets = knn_indices(config, k);
    let mut edges = Vec::new();
    for (i, ids) in neighbour_sets.iter().enumerate() {
        for &j in ids {
            edges.push((i, j));
        }
    }
    GraphView::from_edges(config.len(), &edges)
}

/// Edge length functional `L_q`: the sum of `|edge|^q` over undirected edges.
pub fn edge_length_functional(config: &PointConfiguration, k: usize, q: f64) -> f64 {
    assert!(q >= 0.0, "q must be non-negative");
    let graph = build_knn(config, k);
    graph
        .edges()
        .map(|(u, v)| distance(config.point(u), config.point(v)).powf(q))
        .sum()
}

/// Scaled edge length `F_q = s^{q/d} L_q`.
pub fn scaled_edge_length(config: &PointConfiguration, k: usize, q: f64, intensity: f64) -> f64 {
    intensity.powf(q / config.dim() as f64) * edge_length_functional(config, k, q)
}

/// Number of vertices of degree `j` in the k-nearest-neighbour graph.
pub fn knn_degree_count(config: &PointConfiguration, k: usize, j: usize) -> usize {
    build_knn(config, k).degree_count(j)
}

/// `L_q` (or its scaled version `F_q`) as a Poisson functional.
pub struct KnnEdgeLengthFunctional {
    pub k: usize,
    pub q: f64,
    /// When set to the intensity, evaluates `F_q = s^{q/d} L_q`.
    pub scale_intensity: Option<f64>,
}

impl Functional for KnnEdgeLengthFunctional {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        match self.scale_intensity {
            Some(s) => scaled_edge_length(config, self.k, self.q, s),
            None => edge_length_functional(config, self.k, self.q),
        }
    }

    fn label(&self) -> String {
        match self.scale_intensity {
            Some(s) => format!("F_{}[knn k={} s={}]", self.q, self.k, s),
            None => format!("L_{}[knn k={}]", self.q, self.k),
        }
    }
}

/// `V_j^k`, the degree count of the k-nearest-neighbour graph.
pub struct KnnDegreeCountFunctional {
    pub k: usize,
    pub j: usize,
}

impl Functional for KnnDegreeCountFunctional {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        knn_degree_count(config, self.k, self.j) as f64
    }

    fn label(&self) -> String {
        format!("V_{}^{}[knn]", self.j, self.k)
    }
}

/// Clamp helper for reported degree histograms: degrees above the configured
/// maximum are merged into the top bin.
pub fn clamped_degree_histogram(graph: &GraphView, k_max: usize) -> Vec<usize> {
    let mut histogram = vec![0usize; k_max + 1];
    for v in 0..graph.vertex_count() {
        histogram[graph.degree(v).min(k_max)] += 1;
    }
    histogram
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_poisson, SeedSpec, Window};
    use rand::Rng;

    /// O(n^2) oracle with the same (distance, index) tie-break.
    fn brute_force_knn(config: &PointConfiguration, k: usize) -> GraphView {
        let n = config.len();
        let mut edges = Vec::new();
        for i in 0..n {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (distance(config.point(i), config.point(j)), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, j) in others.iter().take(k) {
                edges.push((i, j));
            }
        }
        GraphView::from_edges(n, &edges)
    }

    fn adjacency_of(g: &GraphView) -> Vec<Vec<usize>> {
        (0..g.vertex_count()).map(|v| g.neighbors(v).to_vec()).collect()
    }

    #[test]
    fn collinear_three_point_example() {
        // Points at 0, 1, 3 on the x-axis, k = 1: nearest neighbours are
        // 0 -> 1, 1 -> 0, 3 -> 1, giving edges {0,1} and {1,3}.
        let config =
            PointConfiguration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]).unwrap();
        let g = build_knn(&config, 1);
        assert_eq!(adjacency_of(&g), vec![vec![1], vec![0, 2], vec![1]]);
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(1), 2);
        assert_eq!(g.degree(2), 1);

        assert_eq!(edge_length_functional(&config, 1, 1.0), 3.0);
        assert_eq!(edge_length_functional(&config, 1, 0.0), 2.0);
        assert_eq!(edge_length_functional(&config, 1, 2.0), 5.0);

        assert_eq!(knn_degree_count(&config, 1, 1), 2);
        assert_eq!(knn_degree_count(&config, 1, 2), 1);
    }

    #[test]
    fn two_points_are_mutual_neighbours() {
        let config = PointConfiguration::from_points(2, &[[0.0, 0.0], [0.3, 0.0]]).unwrap();
        let g = build_knn(&config, 1);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn complete_graph_when_k_exceeds_point_count() {
        let config =
            PointConfiguration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let g = build_knn(&config, 2);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(knn_degree_count(&config, 2, 2), 3);
        // Same when k is even larger.
        let g = build_knn(&config, 10);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn scaled_edge_length_examples() {
        let config =
            PointConfiguration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]).unwrap();
        // q = 0: scaling exponent vanishes.
        assert_eq!(scaled_edge_length(&config, 1, 0.0, 37.0), 2.0);
        // d = 2, q = 1, L_1 = 3, s = 16: 16^{1/2} * 3 = 12.
        assert_eq!(scaled_edge_length(&config, 1, 1.0, 16.0), 12.0);
        // d = 2, q = 2, L_2 = 5, s = 9: 9 * 5 = 45.
        assert_eq!(scaled_edge_length(&config, 1, 2.0, 9.0), 45.0);
    }

    #[test]
    fn ring_search_matches_brute_force() {
        for instance in 0..200u64 {
            let seed = SeedSpec::new(110, instance);
            let config = sample_poisson(&Window::unit_cube(2), 70.0, seed).unwrap();
            if config.len() < 2 {
                continue;
            }
            let k = 1 + (instance % 4) as usize;
            let fast = build_knn(&config, k);
            let slow = brute_force_knn(&config, k);
            assert_eq!(adjacency_of(&fast), adjacency_of(&slow), "instance {instance} k={k}");
        }
    }

    #[test]
    fn ring_search_matches_brute_force_in_3d() {
        for instance in 0..50u64 {
            let seed = SeedSpec::new(111, instance);
            let config =
                sample_poisson(&Window::centered_ball(3, 1.0).unwrap(), 30.0, seed).unwrap();
            if config.len() < 2 {
                continue;
            }
            let fast = build_knn(&config, 3);
            let slow = brute_force_knn(&config, 3);
            assert_eq!(adjacency_of(&fast), adjacency_of(&slow));
        }
    }

    #[test]
    fn edge_count_bounds_and_monotonicity() {
        for instance in 0..50u64 {
            let seed = SeedSpec::new(112, instance);
            let config = sample_poisson(&Window::unit_cube(2), 60.0, seed).unwrap();
            let n = config.len();
            if n < 6 {
                continue;
            }
            let mut previous: Option<std::collections::HashSet<(usize, usize)>> = None;
            for k in 1..=4 {
                let g = build_knn(&config, k);
                let edges: std::collections::HashSet<(usize, usize)> = g.edges().collect();
                assert!(edges.len() * 2 >= n * k, "n={n} k={k} edges={}", edges.len());
                assert!(edges.len() <= n * k);
                if let Some(prev) = &previous {
                    assert!(prev.is_subset(&edges), "edge set not monotone in k");
                }
                previous = Some(edges);
            }
        }
    }

    #[test]
    fn rescaling_multiplies_lq_exactly() {
        let mut rng = SeedSpec::new(113, 0).rng();
        for _ in 0..50 {
            let config =
                crate::process::sample_poisson_with(&Window::unit_cube(2), 40.0, &mut rng)
                    .unwrap();
            if config.len() < 3 {
                continue;
            }
            let t: f64 = rng.random_range(0.5..2.0);
            let scaled_points: Vec<Vec<f64>> =
                config.iter().map(|p| p.iter().map(|c| c * t).collect()).collect();
            let scaled = PointConfiguration::from_points(2, &scaled_points).unwrap();
            for q in [0.0, 1.0, 2.0] {
                let a = edge_length_functional(&config, 2, q);
                let b = edge_length_functional(&scaled, 2, q);
                assert!(
                    (b - t.powf(q) * a).abs() <= 1e-12 * b.abs().max(1.0),
                    "q={q} t={t}"
                );
            }
        }
    }

    #[test]
    fn degree_histogram_clamp() {
        let config = sample_poisson(&Window::unit_cube(2), 60.0, SeedSpec::new(114, 0)).unwrap();
        let g = build_knn(&config, 2);
        let k_max = 8;
        let histogram = clamped_degree_histogram(&g, k_max);
        assert_eq!(histogram.iter().sum::<usize>(), config.len());
        // Degrees below k never occur when n > k.
        assert_eq!(histogram[0], 0);
        assert_eq!(histogram[1], 0);
        assert_eq!(knn_degree_count(&config, 2, 1), 0);
    }
}
