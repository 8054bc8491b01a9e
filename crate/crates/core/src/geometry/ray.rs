use super::Vec3;

/// Barycentric slack accepted at triangle edges.
pub const BARY_EPS: f64 = 1e-9;

/// Möller–Trumbore ray/triangle intersection.
///
/// Returns the ray parameter `t > 0` and barycentrics `(w0, w1, w2)` such that
/// the hit point is `w0·a + w1·b + w2·c`. Rays parallel to the triangle plane
/// and hits outside the triangle (beyond `BARY_EPS`) return `None`.
pub fn ray_triangle_intersect(
    origin: &Vec3,
    direction: &Vec3,
    tri: &[Vec3; 3],
) -> Option<(f64, [f64; 3])> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = direction.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() <= 1e-12 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = direction.dot(&q) * inv;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if t <= 0.0 {
        return None;
    }
    Some((t, [1.0 - u - v, u, v]))
}
