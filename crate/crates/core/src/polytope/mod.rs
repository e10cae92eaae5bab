//! Convex hulls in dimensions 2 and 3, weighted surface-area functionals,
//! and the single-simplex update identities behind them.
//!
//! The weighted surface area of a polytope is
//! `A_p = sum over facets of dist(0, F)^{1-p} * lambda_{d-1}(F)` for
//! `p in [0, 1]`; `A_0` equals `d` times the volume when the origin lies
//! inside, and `A_1` is the ordinary surface area. `dist(0, F)` is the
//! distance from the origin to the facet's supporting hyperplane, the
//! pyramid height in the volume decomposition; hulls that do not contain
//! the origin reuse the same formula.

mod geom;
mod hull2;
mod hull3;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::malliavin::Functional;
use crate::process::PointConfiguration;

pub use geom::{dist_point_segment, dist_point_triangle, triangle_area};

/// Counts facets hit by the `0^0 := 1` convention in [`lp_surface_area`]
/// (a facet through the origin evaluated at `p = 1`).
pub static ZERO_DIST_FACET_HITS: AtomicU64 = AtomicU64::new(0);

/// One hull facet: `d` vertex indices into the input configuration, its
/// `(d-1)`-measure and its distance to the origin.
#[derive(Clone, Debug, Serialize)]
pub struct Facet {
    pub ids: Vec<usize>,
    pub measure: f64,
    pub dist0: f64,
}

/// Convex hull with outward-oriented facets; in `d = 3` facets are
/// triangles, so coplanar faces appear triangulated.
#[derive(Clone, Debug, Serialize)]
pub struct HullPolytope {
    pub dim: usize,
    /// Hull vertices as indices into the input configuration. In `d = 2`
    /// they are in counterclockwise order.
    pub vertices: Vec<usize>,
    pub facets: Vec<Facet>,
}

impl HullPolytope {
    /// Debug dump as JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("hull serializes")
    }
}

/// Convex hull of the configuration. The origin is not added implicitly;
/// callers wanting the hull pinned at the origin add it themselves.
pub fn convex_hull(config: &PointConfiguration) -> Result<HullPolytope> {
    match config.dim() {
        2 => {
            let hull = hull2::hull_vertices(config)?;
            let facets = (0..hull.len())
                .map(|i| {
                    let a = hull[i];
                    let b = hull[(i + 1) % hull.len()];
                    Facet {
                        ids: vec![a, b],
                        measure: geom::segment_length(config.point(a), config.point(b)),
                        dist0: geom::dist_origin_to_facet(&[config.point(a), config.point(b)]),
                    }
                })
                .collect();
            Ok(HullPolytope { dim: 2, vertices: hull, facets })
        }
        3 => {
            let faces = hull3::hull_faces(config)?;
            let mut vertices: Vec<usize> = faces.iter().flatten().copied().collect();
            vertices.sort_unstable();
            vertices.dedup();
            let facets = faces
                .iter()
                .map(|f| Facet {
                    ids: f.to_vec(),
                    measure: geom::triangle_area(
                        config.point(f[0]),
                        config.point(f[1]),
                        config.point(f[2]),
                    ),
                    dist0: geom::dist_origin_to_facet(&[
                        config.point(f[0]),
                        config.point(f[1]),
                        config.point(f[2]),
                    ]),
                })
                .collect();
            Ok(HullPolytope { dim: 3, vertices, facets })
        }
        d => Err(Error::InvalidParameter(format!("convex hulls support d in {{2,3}}, got {d}"))),
    }
}

/// Weighted surface area `A_p = sum dist0^{1-p} * measure` for `p in [0,1]`.
pub fn lp_surface_area(hull: &HullPolytope, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "p must lie in [0,1]");
    hull.facets
        .iter()
        .map(|f| {
            if p == 1.0 && f.dist0 == 0.0 {
                ZERO_DIST_FACET_HITS.fetch_add(1, Ordering::Relaxed);
            }
            f.dist0.powf(1.0 - p) * f.measure
        })
        .sum()
}

/// A `d`-simplex glued onto a polytope facet: `base` holds the facet
/// vertices `z^(1)..z^(d)` and `apex` the added point `z^(d+1)`.
///
/// Facet `i <= d` drops vertex `i` (and contains the apex); facet `d+1` is
/// the base. The derived quantities follow that indexing: `rho[i]` is the
/// facet-to-origin distance, `facet_measures[i]` its `(d-1)`-measure,
/// `face_measures[i]` the `(d-2)`-measure of the base face `T_i` opposite
/// base vertex `i`, `heights[i]` the in-base distance from the projected
/// apex to the affine hull of `T_i`, and `apex_height` the distance from the
/// apex to the base's affine hull.
#[derive(Clone, Debug)]
pub struct SimplexUpdate {
    pub dim: usize,
    pub base: Vec<Vec<f64>>,
    pub apex: Vec<f64>,
    pub rho: Vec<f64>,
    pub facet_measures: Vec<f64>,
    pub face_measures: Vec<f64>,
    pub heights: Vec<f64>,
    pub apex_height: f64,
    pub projected_apex: Vec<f64>,
}

impl SimplexUpdate {
    pub fn new(base: &[Vec<f64>], apex: &[f64]) -> Result<Self> {
        let dim = apex.len();
        if !(dim == 2 || dim == 3) || base.len() != dim || base.iter().any(|z| z.len() != dim) {
            return Err(Error::DegenerateSimplex(format!(
                "need {dim} base vertices of dimension {dim}"
            )));
        }
        let scale = base
            .iter()
            .chain(std::iter::once(&apex.to_vec()))
            .flat_map(|z| z.iter().map(|c| c.abs()))
            .fold(0.0f64, f64::max)
            .max(1e-300);

        // Base measure and unit normal of its affine hull.
        let (base_measure, normal) = match dim {
            2 => {
                let dir = geom::sub(&base[1], &base[0]);
                let len = geom::norm(&dir);
                (len, vec![-dir[1] / len, dir[0] / len])
            }
            _ => {
                let u = geom::sub(&base[1], &base[0]);
                let v = geom::sub(&base[2], &base[0]);
                let n = geom::cross3(&u, &v);
                let len = geom::norm(&n);
                (0.5 * len, n.iter().map(|c| c / len).collect())
            }
        };
        if !(base_measure > 1e-12 * scale) || !base_measure.is_finite() {
            return Err(Error::DegenerateSimplex("base facet has vanishing measure".into()));
        }
        let offset = geom::sub(apex, &base[0]);
        let apex_height = geom::dot(&offset, &normal).abs();
        if !(apex_height > 1e-12 * scale) {
            return Err(Error::DegenerateSimplex("apex lies on the base hyperplane".into()));
        }
        let signed = geom::dot(&offset, &normal);
        let projected_apex: Vec<f64> =
            apex.iter().zip(&normal).map(|(a, n)| a - signed * n).collect();

        let facet = |drop: usize| -> Vec<&[f64]> {
            let mut verts: Vec<&[f64]> = Vec::with_capacity(dim);
            for (i, z) in base.iter().enumerate() {
                if i != drop {
                    verts.push(z.as_slice());
                }
            }
            verts.push(apex);
            verts
        };

        let mut rho = Vec::with_capacity(dim + 1);
        let mut facet_measures = Vec::with_capacity(dim + 1);
        let mut face_measures = Vec::with_capacity(dim);
        let mut heights = Vec::with_capacity(dim);
        for i in 0..dim {
            let verts = facet(i);
            rho.push(geom::dist_origin_to_facet(&verts));
            facet_measures.push(match dim {
                2 => geom::segment_length(verts[0], verts[1]),
                _ => geom::triangle_area(verts[0], verts[1], verts[2]),
            });
            match dim {
                2 => {
                    // T_i is the remaining base vertex.
                    let other = &base[1 - i];
                    face_measures.push(1.0);
                    heights.push(geom::segment_length(&projected_apex, other));
                }
                _ => {
                    let others: Vec<&Vec<f64>> =
                        base.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, z)| z).collect();
                    face_measures.push(geom::segment_length(others[0], others[1]));
                    heights.push(dist_point_line(&projected_apex, others[0], others[1]));
                }
            }
        }
        // Base facet.
        let base_refs: Vec<&[f64]> = base.iter().map(|z| z.as_slice()).collect();
        rho.push(geom::dist_origin_to_facet(&base_refs));
        facet_measures.push(base_measure);

        Ok(Self {
            dim,
            base: base.to_vec(),
            apex: apex.to_vec(),
            rho,
            facet_measures,
            face_measures,
            heights,
            apex_height,
            projected_apex,
        })
    }

    fn base_index(&self) -> usize {
        self.dim
    }
}

fn dist_point_line(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = geom::sub(b, a);
    let ap = geom::sub(p, a);
    let t = geom::dot(&ap, &ab) / geom::dot(&ab, &ab);
    let closest: Vec<f64> = a.iter().zip(&ab).map(|(ai, d)| ai + t * d).collect();
    geom::segment_length(p, &closest)
}

/// Signed change of `A_p` when the simplex is glued onto its base facet:
/// the new side facets enter the sum, the covered base facet leaves it.
pub fn delta_p(update: &SimplexUpdate, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "p must lie in [0,1]");
    let b = update.base_index();
    let sides: f64 = (0..update.dim)
        .map(|i| update.rho[i].powf(1.0 - p) * update.facet_measures[i])
        .sum();
    sides - update.rho[b].powf(1.0 - p) * update.facet_measures[b]
}

/// Outcome of the two-inequality check for a simplex update.
#[derive(Clone, Debug)]
pub enum SimplexCheck {
    Evaluated {
        /// `RHS - |LHS|` of the magnitude inequality at exponent `p`.
        slack_magnitude: f64,
        /// `RHS - |LHS|` of the difference inequality at `(p1, p2)`.
        slack_difference: f64,
    },
    Skipped { reason: String },
}

/// Evaluates both inequalities bounding the simplex update:
///
/// 1. `|Delta_p - 1/(d-1) sum T_i (sqrt(h_i^2 + hbar^2) - h_i)|
///     <= rho_base^{-p} (1 - rho_base) sum_{i=1}^{d+1} |F_i|`,
/// 2. `|Delta_{p1} - Delta_{p2} - sum (p2-p1)(rho_i - rho_base)|F_i||
///     <= 2 rho_base^{-p2-1}(1-rho_base)^2 sum |F_i|
///      + rho_base^{-p2}(1-rho_base) sum T_i (sqrt(h_i^2+hbar^2) - h_i)`.
///
/// Requires the base facet to be the closest to the origin and `p1 < p2`;
/// otherwise the check is skipped with the reason. Positive slacks mean the
/// inequalities hold; exact evaluation may produce slacks as low as the
/// rounding floor (about `-1e-9` at unit scale).
pub fn check_lemma43(update: &SimplexUpdate, p: f64, p1: f64, p2: f64) -> SimplexCheck {
    let b = update.base_index();
    let rho_base = update.rho[b];
    // Rounding ties (symmetric simplices) count as satisfying the argmin
    // precondition.
    let tie = 1e-12 * rho_base.max(1.0);
    if update.rho[..b].iter().any(|&r| r < rho_base - tie) {
        return SimplexCheck::Skipped {
            reason: "base facet is not the closest facet to the origin".into(),
        };
    }
    if !(p1 < p2) {
        return SimplexCheck::Skipped { reason: format!("need p1 < p2, got {p1} >= {p2}") };
    }
    for (name, value) in [("p", p), ("p1", p1), ("p2", p2)] {
        if !(0.0..=1.0).contains(&value) {
            return SimplexCheck::Skipped { reason: format!("{name}={value} outside [0,1]") };
        }
    }

    let d = update.dim as f64;
    let hbar = update.apex_height;
    let slant_excess: f64 = (0..update.dim)
        .map(|i| {
            let h = update.heights[i];
            update.face_measures[i] * ((h * h + hbar * hbar).sqrt() - h)
        })
        .sum();
    let side_sum: f64 = update.facet_measures[..update.dim].iter().sum();
    let all_sum: f64 = update.facet_measures.iter().sum();

    let lhs1 = (delta_p(update, p) - slant_excess / (d - 1.0)).abs();
    let rhs1 = rho_base.powf(-p) * (1.0 - rho_base) * all_sum;
    let slack_magnitude = rhs1 - lhs1;

    let first_order: f64 = (0..update.dim)
        .map(|i| (p2 - p1) * (update.rho[i] - rho_base) * update.facet_measures[i])
        .sum();
    let lhs2 = (delta_p(update, p1) - delta_p(update, p2) - first_order).abs();
    let rhs2 = 2.0 * rho_base.powf(-p2 - 1.0) * (1.0 - rho_base).powi(2) * side_sum
        + rho_base.powf(-p2) * (1.0 - rho_base) * slant_excess;
    let slack_difference = rhs2 - lhs2;

    SimplexCheck::Evaluated { slack_magnitude, slack_difference }
}

/// Signed distance from `x` to the facet's supporting hyperplane, positive
/// on the outward side. Facets are outward-oriented by construction, so a
/// point sees a facet exactly when this is positive.
pub fn facet_signed_distance(config: &PointConfiguration, facet: &Facet, x: &[f64]) -> f64 {
    let a = config.point(facet.ids[0]);
    match facet.ids.len() {
        2 => {
            let b = config.point(facet.ids[1]);
            // Counterclockwise boundary: outward normal of edge (a, b) is
            // (dy, -dx).
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = (dx * dx + dy * dy).sqrt();
            ((x[0] - a[0]) * dy - (x[1] - a[1]) * dx) / len
        }
        _ => {
            let b = config.point(facet.ids[1]);
            let c = config.point(facet.ids[2]);
            let normal = geom::cross3(&geom::sub(b, a), &geom::sub(c, a));
            let len = geom::norm(&normal);
            geom::dot(&normal, &geom::sub(x, a)) / len
        }
    }
}

/// Indices of hull facets visible from `x` (strictly outside their planes).
pub fn visible_facets(config: &PointConfiguration, hull: &HullPolytope, x: &[f64]) -> Vec<usize> {
    hull.facets
        .iter()
        .enumerate()
        .filter(|(_, f)| facet_signed_distance(config, f, x) > 1e-12)
        .map(|(i, _)| i)
        .collect()
}

/// Generates a random simplex admissible for [`check_lemma43`]: every vertex
/// in the unit ball, the base facet closest to the origin, and the apex
/// projecting inside the base. Returns `None` when the draw misses the
/// constraints; retry.
pub fn random_admissible_simplex<R: rand::Rng>(dim: usize, rng: &mut R) -> Option<SimplexUpdate> {
    assert!(dim == 2 || dim == 3, "d must be 2 or 3");
    let rho0: f64 = rng.random_range(0.55..0.9);
    let theta: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
    let (normal, tangent_a, tangent_b): (Vec<f64>, Vec<f64>, Vec<f64>) = if dim == 2 {
        (vec![theta.cos(), theta.sin()], vec![-theta.sin(), theta.cos()], vec![])
    } else {
        let z: f64 = rng.random_range(-1.0f64..1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        let r = (1.0 - z * z).sqrt();
        let n = vec![r * phi.cos(), r * phi.sin(), z];
        let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let ta = geom::cross3(&n, &helper);
        let ta_len = geom::norm(&ta);
        let ta: Vec<f64> = ta.iter().map(|c| c / ta_len).collect();
        let tb = geom::cross3(&n, &ta).to_vec();
        (n, ta, tb)
    };
    let half_width: f64 = rng.random_range(0.05..0.2);
    let base: Vec<Vec<f64>> = if dim == 2 {
        [-half_width, half_width]
            .iter()
            .map(|&t| (0..2).map(|a| rho0 * normal[a] + t * tangent_a[a]).collect())
            .collect()
    } else {
        (0..3)
            .map(|i| {
                let ang =
                    2.0 * std::f64::consts::PI * i as f64 / 3.0 + rng.random_range(-0.3..0.3);
                (0..3)
                    .map(|a| {
                        rho0 * normal[a]
                            + half_width * (ang.cos() * tangent_a[a] + ang.sin() * tangent_b[a])
                    })
                    .collect()
            })
            .collect()
    };
    let mut weights: Vec<f64> = (0..dim).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let height: f64 = rng.random_range(0.02..0.1);
    let apex: Vec<f64> = (0..dim)
        .map(|a| {
            let inside: f64 = base.iter().zip(&weights).map(|(z, w)| w * z[a]).sum();
            inside + height * normal[a]
        })
        .collect();
    if apex.iter().map(|c| c * c).sum::<f64>() > 1.0 {
        return None;
    }
    let update = SimplexUpdate::new(&base, &apex).ok()?;
    let rho_base = update.rho[dim];
    if update.rho[..dim].iter().any(|&r| r < rho_base) {
        return None;
    }
    Some(update)
}

/// `A_p` of the hull of the sampled configuration as a Poisson functional.
/// Configurations whose hull is degenerate evaluate to zero; that happens
/// with exponentially small probability and is counted.
pub struct PolytopeFunctional {
    pub p: f64,
    /// When set, evaluates `s * A_p` instead of `A_p`.
    pub scale_intensity: Option<f64>,
    degenerate_samples: AtomicU64,
}

impl PolytopeFunctional {
    pub fn new(p: f64, scale_intensity: Option<f64>) -> Self {
        assert!((0.0..=1.0).contains(&p), "p must lie in [0,1]");
        Self { p, scale_intensity, degenerate_samples: AtomicU64::new(0) }
    }

    pub fn degenerate_samples(&self) -> u64 {
        self.degenerate_samples.load(Ordering::Relaxed)
    }
}

pub fn polytope_functional(p: f64, scale_intensity: Option<f64>) -> PolytopeFunctional {
    PolytopeFunctional::new(p, scale_intensity)
}

impl Functional for PolytopeFunctional {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        let area = match convex_hull(config) {
            Ok(hull) => lp_surface_area(&hull, self.p),
            Err(_) => {
                self.degenerate_samples.fetch_add(1, Ordering::Relaxed);
                0.0
            }
        };
        match self.scale_intensity {
            Some(s) => s * area,
            None => area,
        }
    }

    fn label(&self) -> String {
        match self.scale_intensity {
            Some(s) => format!("s*A_{}[polytope s={s}]", self.p),
            None => format!("A_{}[polytope]", self.p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_poisson, SeedSpec, Window};

    fn shoelace_area(config: &PointConfiguration, hull: &HullPolytope) -> f64 {
        let v = &hull.vertices;
        let mut twice = 0.0;
        for i in 0..v.len() {
            let a = config.point(v[i]);
            let b = config.point(v[(i + 1) % v.len()]);
            twice += a[0] * b[1] - a[1] * b[0];
        }
        twice.abs() / 2.0
    }

    fn signed_tet_volume(config: &PointConfiguration, hull: &HullPolytope) -> f64 {
        // Divergence theorem over the outward-oriented triangles.
        let mut six_vol = 0.0;
        for f in &hull.facets {
            let (a, b, c) =
                (config.point(f.ids[0]), config.point(f.ids[1]), config.point(f.ids[2]));
            six_vol += geom::dot(a, &geom::cross3(b, c));
        }
        six_vol.abs() / 6.0
    }

    #[test]
    fn square_hull_weighted_areas() {
        let config = PointConfiguration::from_points(
            2,
            &[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
        )
        .unwrap();
        let hull = convex_hull(&config).unwrap();
        assert_eq!(hull.facets.len(), 4);
        for f in &hull.facets {
            assert!((f.measure - 2f64.sqrt()).abs() < 1e-14);
            assert!((f.dist0 - 1.0 / 2f64.sqrt()).abs() < 1e-14);
        }
        for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let expected = 4.0 * 2f64.powf(p / 2.0);
            assert!((lp_surface_area(&hull, p) - expected).abs() < 1e-12);
        }
        // A_0 = d * volume (shoelace area is 2), A_1 = perimeter.
        assert!((lp_surface_area(&hull, 0.0) - 4.0).abs() < 1e-12);
        assert!((lp_surface_area(&hull, 1.0) - 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn interior_point_is_not_a_vertex() {
        let config = PointConfiguration::from_points(
            2,
            &[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [0.0, 0.0]],
        )
        .unwrap();
        let hull = convex_hull(&config).unwrap();
        assert_eq!(hull.vertices.len(), 4);
        assert!(!hull.vertices.contains(&4));
    }

    #[test]
    fn regular_tetrahedron_facets() {
        let t = 1.0 / 3f64.sqrt();
        let config = PointConfiguration::from_points(
            3,
            &[[t, t, t], [t, -t, -t], [-t, t, -t], [-t, -t, t]],
        )
        .unwrap();
        let hull = convex_hull(&config).unwrap();
        assert_eq!(hull.facets.len(), 4);
        let first = hull.facets[0].measure;
        for f in &hull.facets {
            assert!((f.measure - first).abs() < 1e-12);
            assert!(f.dist0 <= t + 1e-12);
        }
        // Edge length sqrt(8/3); area = sqrt(3)/4 * edge^2.
        let edge: f64 = (8.0 / 3.0f64).sqrt();
        assert!((first - 3f64.sqrt() / 4.0 * edge * edge).abs() < 1e-12);
    }

    #[test]
    fn inscribed_polygon_with_unit_apothem_has_constant_ap() {
        // Regular polygon with inradius 1: every facet has dist0 = 1, so A_p
        // does not depend on p.
        let n = 12;
        let circumradius = 1.0 / (std::f64::consts::PI / n as f64).cos();
        let points: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [circumradius * a.cos(), circumradius * a.sin()]
            })
            .collect();
        let config = PointConfiguration::from_points(2, &points).unwrap();
        let hull = convex_hull(&config).unwrap();
        let a0 = lp_surface_area(&hull, 0.0);
        for p in [0.25, 0.5, 1.0] {
            assert!((lp_surface_area(&hull, p) - a0).abs() < 1e-10);
        }
    }

    #[test]
    fn hull_idempotence_and_containment() {
        for instance in 0..20u64 {
            let config = sample_poisson(
                &Window::centered_ball(2, 1.0).unwrap(),
                80.0,
                SeedSpec::new(310, instance),
            )
            .unwrap();
            if config.len() < 3 {
                continue;
            }
            let hull = convex_hull(&config).unwrap();
            // Re-hull the hull vertices: same facet set up to relabeling.
            let vertex_points: Vec<Vec<f64>> =
                hull.vertices.iter().map(|&i| config.point(i).to_vec()).collect();
            let again =
                convex_hull(&PointConfiguration::from_points(2, &vertex_points).unwrap()).unwrap();
            assert_eq!(again.vertices.len(), hull.vertices.len());
            let mut a: Vec<(u64, u64)> = hull
                .facets
                .iter()
                .map(|f| (f.measure.to_bits(), f.dist0.to_bits()))
                .collect();
            let mut b: Vec<(u64, u64)> = again
                .facets
                .iter()
                .map(|f| (f.measure.to_bits(), f.dist0.to_bits()))
                .collect();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);

            // Containment: every input point is inside or on the hull.
            let area = shoelace_area(&config, &hull);
            for p in config.iter() {
                for i in 0..hull.vertices.len() {
                    let u = config.point(hull.vertices[i]);
                    let v = config.point(hull.vertices[(i + 1) % hull.vertices.len()]);
                    let cross =
                        (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0]);
                    assert!(cross >= -1e-9 * area.max(1.0), "point outside hull edge");
                }
            }
        }
    }

    #[test]
    fn a0_matches_volume_oracles() {
        // d = 2: shoelace; d = 3: divergence theorem. Origin added so it
        // lies inside the hull.
        for instance in 0..50u64 {
            let config = sample_poisson(
                &Window::centered_ball(2, 1.0).unwrap(),
                100.0,
                SeedSpec::new(311, instance),
            )
            .unwrap()
            .with_points(&[[0.0, 0.0]])
            .unwrap();
            let hull = convex_hull(&config).unwrap();
            let a0 = lp_surface_area(&hull, 0.0);
            assert!((a0 - 2.0 * shoelace_area(&config, &hull)).abs() < 1e-12);
        }
        for instance in 0..50u64 {
            let config = sample_poisson(
                &Window::centered_ball(3, 1.0).unwrap(),
                100.0,
                SeedSpec::new(312, instance),
            )
            .unwrap()
            .with_points(&[[0.0, 0.0, 0.0]])
            .unwrap();
            let hull = convex_hull(&config).unwrap();
            let a0 = lp_surface_area(&hull, 0.0);
            assert!((a0 - 3.0 * signed_tet_volume(&config, &hull)).abs() < 1e-12);
        }
    }

    #[test]
    fn ap_monotone_in_p_inside_unit_ball() {
        for instance in 0..20u64 {
            let config = sample_poisson(
                &Window::centered_ball(2, 1.0).unwrap(),
                60.0,
                SeedSpec::new(313, instance),
            )
            .unwrap()
            .with_points(&[[0.0, 0.0]])
            .unwrap();
            let hull = convex_hull(&config).unwrap();
            let mut last = lp_surface_area(&hull, 0.0);
            for p in [0.2, 0.4, 0.6, 0.8, 1.0] {
                let next = lp_surface_area(&hull, p);
                assert!(next >= last - 1e-12);
                last = next;
            }
        }
    }

    #[test]
    fn retriangulation_leaves_ap_invariant() {
        // Cube corners under shuffled insertion orders: face squares get
        // triangulated differently but measures and dist0 agree.
        use rand::seq::SliceRandom;
        let corners: Vec<[f64; 3]> = (0..8)
            .map(|i| {
                [
                    (i & 1) as f64 - 0.5,
                    ((i >> 1) & 1) as f64 - 0.5,
                    ((i >> 2) & 1) as f64 - 0.5,
                ]
            })
            .collect();
        let mut rng = SeedSpec::new(314, 0).rng();
        let reference = {
            let config = PointConfiguration::from_points(3, &corners).unwrap();
            let hull = convex_hull(&config).unwrap();
            [0.0, 0.5, 1.0].map(|p| lp_surface_area(&hull, p))
        };
        // A_1 of the unit cube is 6, A_0 = 3 * volume = 3.
        assert!((reference[2] - 6.0).abs() < 1e-12);
        assert!((reference[0] - 3.0).abs() < 1e-12);
        for _ in 0..20 {
            let mut order = corners.clone();
            order.shuffle(&mut rng);
            let config = PointConfiguration::from_points(3, &order).unwrap();
            let hull = convex_hull(&config).unwrap();
            for (i, p) in [0.0, 0.5, 1.0].iter().enumerate() {
                assert!((lp_surface_area(&hull, *p) - reference[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn simplex_update_rejects_degenerate_apex() {
        let base = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(SimplexUpdate::new(&base, &[0.5, 0.5]).is_err());
        assert!(SimplexUpdate::new(&base, &[0.6, 0.6]).is_ok());
    }

    #[test]
    fn delta_p_matches_full_hull_recomputation_2d() {
        let config = PointConfiguration::from_points(
            2,
            &[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
        )
        .unwrap();
        let hull = convex_hull(&config).unwrap();
        let apex = [0.9, 0.9];
        let base = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let update = SimplexUpdate::new(&base, &apex).unwrap();
        let bigger = config.with_points(&[apex]).unwrap();
        let new_hull = convex_hull(&bigger).unwrap();
        for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let direct = lp_surface_area(&new_hull, p) - lp_surface_area(&hull, p);
            assert!(
                (delta_p(&update, p) - direct).abs() <= 1e-10,
                "p={p}: {} vs {direct}",
                delta_p(&update, p)
            );
        }
    }

    #[test]
    fn delta_p_vanishes_as_apex_approaches_base() {
        let base = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let outward = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
        let mid = [0.5, 0.5];
        let mut last = f64::INFINITY;
        for height in [1e-2, 1e-4, 1e-6, 1e-8] {
            let apex = [mid[0] + height * outward[0], mid[1] + height * outward[1]];
            let update = SimplexUpdate::new(&base, &apex).unwrap();
            let d = delta_p(&update, 0.5).abs();
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn symmetric_simplex_first_order_term_is_zero() {
        // Equilateral triangle centred at the origin: every facet has the
        // same distance to the origin, so the first-order term of the
        // difference inequality vanishes and both slacks are non-negative.
        let r = 0.8;
        let verts: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 3.0 + 0.5;
                vec![r * a.cos(), r * a.sin()]
            })
            .collect();
        let update = SimplexUpdate::new(&[verts[0].clone(), verts[1].clone()], &verts[2]).unwrap();
        assert!((update.rho[0] - update.rho[2]).abs() < 1e-12);
        assert!((update.rho[1] - update.rho[2]).abs() < 1e-12);
        let first_order: f64 = (0..2)
            .map(|i| (0.75 - 0.25) * (update.rho[i] - update.rho[2]) * update.facet_measures[i])
            .sum();
        assert!(first_order.abs() < 1e-12);
        match check_lemma43(&update, 0.5, 0.25, 0.75) {
            SimplexCheck::Evaluated { slack_magnitude, slack_difference } => {
                assert!(slack_magnitude >= -1e-9);
                assert!(slack_difference >= -1e-9);
            }
            SimplexCheck::Skipped { reason } => panic!("unexpected skip: {reason}"),
        }
    }

    #[test]
    fn unit_distance_facets_force_exact_identity() {
        // With every rho equal to 1 both right-hand sides vanish, forcing
        // Delta_p to equal the slant-excess term exactly.
        let base = vec![vec![-0.5, 1.0], vec![0.5, 1.0]];
        let apex = [0.1, 1.4];
        let mut update = SimplexUpdate::new(&base, &apex).unwrap();
        update.rho = vec![1.0, 1.0, 1.0];
        match check_lemma43(&update, 0.5, 0.0, 1.0) {
            SimplexCheck::Evaluated { slack_magnitude, slack_difference } => {
                assert!(slack_magnitude.abs() < 1e-12, "slack={slack_magnitude}");
                assert!(slack_difference.abs() < 1e-12, "slack={slack_difference}");
            }
            SimplexCheck::Skipped { reason } => panic!("unexpected skip: {reason}"),
        }
    }

    #[test]
    fn precondition_violations_are_skips() {
        let base = vec![vec![-0.5, 1.0], vec![0.5, 1.0]];
        let update = SimplexUpdate::new(&base, &[0.0, 1.5]).unwrap();
        assert!(matches!(
            check_lemma43(&update, 0.5, 0.75, 0.25),
            SimplexCheck::Skipped { .. }
        ));
        // Base farther than side facets: the apex reaches down to norm 0.2,
        // so the side-facet planes pass closer to the origin than the base
        // at 0.9. Skip, not error.
        let base = vec![vec![-0.5, 0.9], vec![0.5, 0.9]];
        let update = SimplexUpdate::new(&base, &[0.0, 0.2]).unwrap();
        assert!(matches!(check_lemma43(&update, 0.5, 0.0, 1.0), SimplexCheck::Skipped { .. }));
    }

    #[test]
    fn random_admissible_simplices_satisfy_both_inequalities() {
        let mut rng = SeedSpec::new(315, 0).rng();
        let mut evaluated = 0;
        while evaluated < 1000 {
            let Some(update) = random_admissible_simplex(2, &mut rng) else { continue };
            for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
                match check_lemma43(&update, p, 0.25, 0.75) {
                    SimplexCheck::Evaluated { slack_magnitude, slack_difference } => {
                        assert!(slack_magnitude >= -1e-9, "slack1={slack_magnitude}");
                        assert!(slack_difference >= -1e-9, "slack2={slack_difference}");
                    }
                    SimplexCheck::Skipped { .. } => unreachable!("generator is admissible"),
                }
            }
            evaluated += 1;
        }
    }

    #[test]
    fn polytope_functional_handles_degenerate_samples() {
        let f = polytope_functional(1.0, None);
        assert_eq!(f.evaluate(&PointConfiguration::new(2)), 0.0);
        assert_eq!(f.degenerate_samples(), 1);
        let two = PointConfiguration::from_points(2, &[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(f.evaluate(&two), 0.0);
        assert_eq!(f.degenerate_samples(), 2);
    }

    #[test]
    fn polytope_functional_perimeter_trend() {
        // A_1 of the hull of a dense sample in the unit disk approaches the
        // circle circumference from below.
        let f = polytope_functional(1.0, None);
        let window = Window::centered_ball(2, 1.0).unwrap();
        let mean_at = |s: f64, tag: u64| -> f64 {
            let mut total = 0.0;
            let reps = 200;
            for r in 0..reps {
                let config =
                    sample_poisson(&window, s, SeedSpec::new(316, tag).with_replication(r))
                        .unwrap();
                total += f.evaluate(&config);
            }
            total / reps as f64
        };
        let m100 = mean_at(100.0, 0);
        let m400 = mean_at(400.0, 1);
        let circumference = 2.0 * std::f64::consts::PI;
        assert!(m100 < m400 && m400 < circumference);
        assert!(circumference - m400 < 0.35, "m400={m400}");
    }

    #[test]
    fn random_admissible_simplices_3d_satisfy_both_inequalities() {
        let mut rng = SeedSpec::new(317, 0).rng();
        let mut evaluated = 0;
        while evaluated < 1000 {
            let Some(update) = random_admissible_simplex(3, &mut rng) else { continue };
            for p in [0.0, 0.5, 1.0] {
                match check_lemma43(&update, p, 0.0, 1.0) {
                    SimplexCheck::Evaluated { slack_magnitude, slack_difference } => {
                        assert!(slack_magnitude >= -1e-9, "slack1={slack_magnitude}");
                        assert!(slack_difference >= -1e-9, "slack2={slack_difference}");
                    }
                    SimplexCheck::Skipped { .. } => unreachable!("generator is admissible"),
                }
            }
            evaluated += 1;
        }
    }
}
