//! Incremental convex hull in 3-space with triangulated facets.
//!
//! Beneath-beyond construction: seed a tetrahedron from four affinely
//! independent points, then insert the remaining points one at a time,
//! deleting the faces visible from the new point and re-attaching the point
//! along the horizon. New faces are oriented against a fixed interior point,
//! never by edge bookkeeping, which keeps orientation robust near coplanar
//! configurations.

use std::collections::HashMap;

use super::geom::{cross3, dot, sub};
use crate::error::{Error, Result};
use crate::process::PointConfiguration;

#[derive(Clone, Copy, Debug)]
struct Face {
    v: [usize; 3],
    alive: bool,
}

/// Returns the hull as triangles of input indices, outward-oriented.
pub fn hull_faces(config: &PointConfiguration) -> Result<Vec<[usize; 3]>> {
    let n = config.len();
    if n < 4 {
        return Err(Error::DegenerateHull(format!("need at least 4 points, got {n}")));
    }
    let pt = |i: usize| config.point(i);

    // Scale-aware tolerance from the bounding box diagonal.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in config.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let scale = (0..3).map(|a| (hi[a] - lo[a]).powi(2)).sum::<f64>().sqrt().max(1e-300);
    let eps = 1e-10 * scale;

    let seed = initial_tetrahedron(config, eps)?;
    let interior: Vec<f64> = (0..3)
        .map(|a| seed.iter().map(|&i| pt(i)[a]).sum::<f64>() / 4.0)
        .collect();

    let oriented = |a: usize, b: usize, c: usize| -> Face {
        let normal = cross3(&sub(pt(b), pt(a)), &sub(pt(c), pt(a)));
        let side = dot(&normal, &sub(&interior, pt(a)));
        if side > 0.0 {
            Face { v: [a, c, b], alive: true }
        } else {
            Face { v: [a, b, c], alive: true }
        }
    };

    let mut faces = vec![
        oriented(seed[0], seed[1], seed[2]),
        oriented(seed[0], seed[1], seed[3]),
        oriented(seed[0], seed[2], seed[3]),
        oriented(seed[1], seed[2], seed[3]),
    ];

    let signed_dist = |face: &Face, p: &[f64]| -> f64 {
        let [a, b, c] = face.v;
        let normal = cross3(&sub(pt(b), pt(a)), &sub(pt(c), pt(a)));
        let len = dot(&normal, &normal).sqrt();
        if len == 0.0 {
            return 0.0;
        }
        dot(&normal, &sub(p, pt(a))) / len
    };

    for i in 0..n {
        if seed.contains(&i) {
            continue;
        }
        let p = pt(i);
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && signed_dist(f, p) > eps)
            .map(|(idx, _)| idx)
            .collect();
        if visible.is_empty() {
            continue;
        }
        // Horizon: undirected edges bordering exactly one visible face.
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for &fi in &visible {
            let [a, b, c] = faces[fi].v;
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *edge_count.entry((u.min(v), u.max(v))).or_insert(0) += 1;
            }
        }
        for &fi in &visible {
            faces[fi].alive = false;
        }
        for ((u, v), count) in edge_count {
            if count == 1 {
                faces.push(oriented(u, v, i));
            }
        }
    }

    let result: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    if result.len() < 4 {
        return Err(Error::DegenerateHull("hull collapsed".into()));
    }
    Ok(result)
}

fn initial_tetrahedron(config: &PointConfiguration, eps: f64) -> Result<[usize; 4]> {
    let n = config.len();
    let pt = |i: usize| config.point(i);
    let p0 = 0usize;
    let p1 = (1..n)
        .find(|&i| sub(pt(i), pt(p0)).iter().map(|c| c * c).sum::<f64>().sqrt() > eps)
        .ok_or_else(|| Error::DegenerateHull("all points coincide".into()))?;
    let base = sub(pt(p1), pt(p0));
    let base_len = dot(&base, &base).sqrt();
    let p2 = (1..n)
        .find(|&i| {
            i != p1 && {
                let c = cross3(&base, &sub(pt(i), pt(p0)));
                // Distance from point i to the line p0-p1.
                dot(&c, &c).sqrt() / base_len > eps
            }
        })
        .ok_or_else(|| Error::DegenerateHull("all points collinear".into()))?;
    let normal = cross3(&sub(pt(p1), pt(p0)), &sub(pt(p2), pt(p0)));
    let norm = dot(&normal, &normal).sqrt();
    let p3 = (1..n)
        .find(|&i| {
            i != p1 && i != p2 && (dot(&normal, &sub(pt(i), pt(p0))) / norm).abs() > eps
        })
        .ok_or_else(|| Error::DegenerateHull("all points coplanar".into()))?;
    Ok([p0, p1, p2, p3])
}
