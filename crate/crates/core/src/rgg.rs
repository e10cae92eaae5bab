//! Random geometric graphs and their degree / component count statistics.
//!
//! Two vertices are joined when their distance is at most the radius
//! `r_s = rho * s^{-1/d}`; ties at exactly the radius count as edges.

use crate::error::{Error, Result};
use crate::graph::{squared_distance, GraphView, UniformGrid};
use crate::malliavin::Functional;
use crate::process::PointConfiguration;

/// Radius parameters of the geometric graph in the thermodynamic scaling.
#[derive(Clone, Copy, Debug)]
pub struct RggParams {
    pub rho: f64,
    pub dim: usize,
    pub intensity: f64,
}

impl RggParams {
    pub fn new(rho: f64, dim: usize, intensity: f64) -> Result<Self> {
        if !(rho > 0.0) || !(intensity > 0.0) || dim == 0 {
            return Err(Error::InvalidParameter(
                "RggParams needs rho > 0, intensity > 0, dim >= 1".into(),
            ));
        }
        Ok(Self { rho, dim, intensity })
    }

    /// Connection radius; always derived, never cached.
    pub fn radius(&self) -> f64 {
        self.rho * self.intensity.powf(-1.0 / self.dim as f64)
    }
}

/// Builds the geometric graph with a uniform grid of cell width equal to the
/// radius, so only the 3^d neighbouring cells are examined per vertex.
pub fn build_rgg(config: &PointConfiguration, params: &RggParams) -> GraphView {
    build_rgg_with_radius(config, params.radius())
}

pub fn build_rgg_with_radius(config: &PointConfiguration, radius: f64) -> GraphView {
    let n = config.len();
    if n == 0 {
        return GraphView::from_edges(0, &[]);
    }
    let grid = UniformGrid::build(config, radius);
    let r2 = radius * radius;
    let mut edges = Vec::new();
    for i in 0..n {
        grid.for_each_adjacent(i, |j| {
            if j > i && squared_distance(config.point(i), config.point(j)) <= r2 {
                edges.push((i, j));
            }
        });
    }
    GraphView::from_edges(n, &edges)
}

/// Number of vertices of degree `j`.
pub fn degree_count(graph: &GraphView, j: usize) -> usize {
    graph.degree_count(j)
}

/// Number of connected components with exactly `j >= 1` vertices.
pub fn component_count(graph: &GraphView, j: usize) -> usize {
    graph.component_count(j)
}

/// Which count statistic a graph functional reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RggStatistic {
    /// Vertices of degree `j`.
    DegreeCount(usize),
    /// Components of size `j`.
    ComponentCount(usize),
}

/// Geometric-graph count statistic as a Poisson functional.
pub struct RggFunctional {
    pub stat: RggStatistic,
    pub params: RggParams,
}

pub fn rgg_functional(stat: RggStatistic, params: RggParams) -> RggFunctional {
    RggFunctional { stat, params }
}

impl Functional for RggFunctional {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        let graph = build_rgg(config, &self.params);
        match self.stat {
            RggStatistic::DegreeCount(j) => graph.degree_count(j) as f64,
            RggStatistic::ComponentCount(j) => graph.component_count(j) as f64,
        }
    }

    fn label(&self) -> String {
        let p = &self.params;
        match self.stat {
            RggStatistic::DegreeCount(j) => {
                format!("V_{j}[rgg rho={} d={} s={}]", p.rho, p.dim, p.intensity)
            }
            RggStatistic::ComponentCount(j) => {
                format!("C_{j}[rgg rho={} d={} s={}]", p.rho, p.dim, p.intensity)
            }
        }
    }
}
