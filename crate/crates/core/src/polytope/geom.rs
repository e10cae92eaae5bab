//! Small vector helpers and point-to-simplex distances for d in {2, 3}.

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn segment_length(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(b, a))
}

pub fn triangle_area(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    if a.len() == 2 {
        0.5 * (u[0] * v[1] - u[1] * v[0]).abs()
    } else {
        0.5 * norm(&cross3(&u, &v))
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn dist_point_segment(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return norm(&ap);
    }
    let t = (dot(&ap, &ab) / len2).clamp(0.0, 1.0);
    let closest: Vec<f64> = a.iter().zip(&ab).map(|(ai, d)| ai + t * d).collect();
    segment_length(p, &closest)
}

/// Distance from `p` to the closed triangle `(a, b, c)` in 3-space.
///
/// Region classification over the barycentric Voronoi regions of the
/// triangle: vertex, edge, or interior.
pub fn dist_point_triangle(p: &[f64], a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return norm(&ap);
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return norm(&bp);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        let closest: Vec<f64> = a.iter().zip(&ab).map(|(ai, d)| ai + t * d).collect();
        return segment_length(p, &closest);
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return norm(&cp);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        let closest: Vec<f64> = a.iter().zip(&ac).map(|(ai, d)| ai + t * d).collect();
        return segment_length(p, &closest);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        let bc = sub(c, b);
        let closest: Vec<f64> = b.iter().zip(&bc).map(|(bi, d)| bi + t * d).collect();
        return segment_length(p, &closest);
    }
    // Interior: distance to the plane.
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    let closest: Vec<f64> = (0..3).map(|i| a[i] + ab[i] * v + ac[i] * w).collect();
    segment_length(p, &closest)
}

/// Distance from the origin to the supporting hyperplane of a facet.
///
/// This is the pyramid height that makes `sum dist * measure` equal `d`
/// times the volume for polytopes containing the origin. (The distance to
/// the facet as a point set can exceed it when the origin's perpendicular
/// foot lands outside the facet, which does occur for interior origins.)
pub fn dist_origin_to_facet(vertices: &[&[f64]]) -> f64 {
    match vertices.len() {
        2 => {
            let dir = sub(vertices[1], vertices[0]);
            let len = norm(&dir);
            (vertices[0][0] * dir[1] - vertices[0][1] * dir[0]).abs() / len
        }
        3 => {
            let n = cross3(
                &sub(vertices[1], vertices[0]),
                &sub(vertices[2], vertices[0]),
            );
            dot(&n, vertices[0]).abs() / norm(&n)
        }
        n => panic!("facet with {n} vertices unsupported"),
    }
}
