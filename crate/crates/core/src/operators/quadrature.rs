//! Integrals over flat triangles.

use crate::geometry::Vec3;

/// Signed contributions of the edge `a -> b` seen from an in-plane point `p`:
/// perpendicular distance and the tangential coordinates of both endpoints.
fn edge_frame(p: &Vec3, a: &Vec3, b: &Vec3) -> (f64, f64, f64) {
    let e = (b - a).normalize();
    let foot = a + e * (p - a).dot(&e);
    let d = (p - foot).norm();
    (d, (a - foot).dot(&e), (b - foot).dot(&e))
}

/// `int_T 1/|x - p| dA(x)` for `p` inside the plane triangle `T = abc`.
///
/// Split `T` into the fans `(p, a, b)`; each is `d [asinh(t_b/d) - asinh(t_a/d)]` with `d`
/// the distance from `p` to the edge line and `t` the tangential endpoint coordinates.
pub fn inverse_distance_integral(p: &Vec3, tri: &[Vec3; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let (d, ta, tb) = edge_frame(p, &tri[k], &tri[(k + 1) % 3]);
            d * ((tb / d).asinh() - (ta / d).asinh())
        })
        .sum()
}

/// `int_T |x - p| dA(x)` for `p` inside `T`; per fan `d^3/6 [g(t_b/d) - g(t_a/d)]` with
/// `g(u) = u sqrt(1 + u^2) + asinh(u)`.
pub fn distance_integral(p: &Vec3, tri: &[Vec3; 3]) -> f64 {
    let g = |u: f64| u * (1.0 + u * u).sqrt() + u.asinh();
    (0..3)
        .map(|k| {
            let (d, ta, tb) = edge_frame(p, &tri[k], &tri[(k + 1) % 3]);
            d * d * d / 6.0 * (g(tb / d) - g(ta / d))
        })
        .sum()
}

/// Leaf rule: degree-2, three interior points with equal weights.
const LEAF: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Subdivide while the target is within this many sub-panel diameters.
const NEAR_RATIO: f64 = 3.0;
const MAX_LEVEL: u32 = 14;

/// Integrates `f` over the triangle, refining towards `target` until every leaf is at
/// least `NEAR_RATIO` diameters away (or `MAX_LEVEL` is reached).
pub fn adaptive_integral<F>(tri: &[Vec3; 3], target: &Vec3, f: &mut F) -> (f64, Vec3)
where
    F: FnMut(&Vec3) -> (f64, Vec3),
{
    let mut value = 0.0;
    let mut grad = Vec3::zeros();
    let mut stack: Vec<([Vec3; 3], u32)> = vec![(*tri, 0)];
    while let Some((t, level)) = stack.pop() {
        let [a, b, c] = t;
        let diam = (b - a).norm().max((c - b).norm()).max((a - c).norm());
        let centroid = (a + b + c) / 3.0;
        if level < MAX_LEVEL && (target - centroid).norm() < NEAR_RATIO * diam {
            let ab = (a + b) / 2.0;
            let bc = (b + c) / 2.0;
            let ca = (c + a) / 2.0;
            stack.push(([a, ab, ca], level + 1));
            stack.push(([b, bc, ab], level + 1));
            stack.push(([c, ca, bc], level + 1));
            stack.push(([ab, bc, ca], level + 1));
            continue;
        }
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        for w in LEAF {
            let x = a * w[0] + b * w[1] + c * w[2];
            let (v, g) = f(&x);
            value += v * area / 3.0;
            grad += g * (area / 3.0);
        }
    }
    (value, grad)
}
