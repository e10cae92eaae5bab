//! Planar convex hull by Andrew's monotone chain.

use crate::error::{Error, Result};
use crate::process::PointConfiguration;

/// Returns hull vertex indices in counterclockwise order; collinear interior
/// points are dropped. Errors when all points are affinely dependent.
pub fn hull_vertices(config: &PointConfiguration) -> Result<Vec<usize>> {
    let n = config.len();
    if n < 3 {
        return Err(Error::DegenerateHull(format!("need at least 3 points, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (config.point(a), config.point(b));
        pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
    });
    order.dedup_by(|a, b| config.point(*a) == config.point(*b));

    let cross = |o: usize, a: usize, b: usize| -> f64 {
        let (po, pa, pb) = (config.point(o), config.point(a), config.point(b));
        (pa[0] - po[0]) * (pb[1] - po[1]) - (pa[1] - po[1]) * (pb[0] - po[0])
    };

    let build = |iter: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        let mut chain: Vec<usize> = Vec::new();
        for idx in iter {
            while chain.len() >= 2
                && cross(chain[chain.len() - 2], chain[chain.len() - 1], idx) <= 0.0
            {
                chain.pop();
            }
            chain.push(idx);
        }
        chain
    };

    let lower = build(&mut order.iter().copied());
    let upper = build(&mut order.iter().rev().copied());
    let mut hull = lower;
    hull.pop();
    hull.extend_from_slice(&upper[..upper.len().saturating_sub(1)]);

    if hull.len() < 3 {
        return Err(Error::DegenerateHull("all points are collinear".into()));
    }
    Ok(hull)
}
