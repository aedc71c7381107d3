//! Triangle primitives shared by the sheet, the measure splatting and the
//! clipping estimators: area and its vertex gradient, exact point-triangle
//! distance, and uniform 4-fold subdivision into congruent fragments.

use crate::vec3::{self, Vec3};

/// Triangles below this area contribute zero area and zero gradient; the
/// degenerate homotopy is a legal competitor.
pub const DEGENERATE_AREA: f64 = 1e-14;

#[inline]
pub fn area(p: [Vec3; 3]) -> f64 {
    let a = 0.5 * vec3::norm(vec3::cross(vec3::sub(p[1], p[0]), vec3::sub(p[2], p[0])));
    if a < DEGENERATE_AREA {
        0.0
    } else {
        a
    }
}

/// Longest edge; an upper bound for the diameter of the triangle.
#[inline]
pub fn diameter(p: [Vec3; 3]) -> f64 {
    vec3::dist(p[0], p[1])
        .max(vec3::dist(p[1], p[2]))
        .max(vec3::dist(p[2], p[0]))
}

/// Area and its gradient with respect to each vertex. Degenerate triangles
/// return zero for both.
pub fn area_gradient(p: [Vec3; 3]) -> (f64, [Vec3; 3]) {
    let e1 = vec3::sub(p[1], p[0]);
    let e2 = vec3::sub(p[2], p[0]);
    let n = vec3::cross(e1, e2);
    let nn = vec3::norm(n);
    let a = 0.5 * nn;
    if a < DEGENERATE_AREA {
        return (0.0, [[0.0; 3]; 3]);
    }
    let nh = vec3::scale(n, 1.0 / nn);
    let g1 = vec3::scale(vec3::cross(e2, nh), 0.5);
    let g2 = vec3::scale(vec3::cross(nh, e1), 0.5);
    let g0 = vec3::scale(vec3::add(g1, g2), -1.0);
    (a, [g0, g1, g2])
}

/// Exact distance from a point to a (closed) triangle.
pub fn point_triangle_distance(p: Vec3, t: [Vec3; 3]) -> f64 {
    // Ericson, "Real-Time Collision Detection", closest-point regions.
    let ab = vec3::sub(t[1], t[0]);
    let ac = vec3::sub(t[2], t[0]);
    let ap = vec3::sub(p, t[0]);
    let d1 = vec3::dot(ab, ap);
    let d2 = vec3::dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return vec3::dist(p, t[0]);
    }
    let bp = vec3::sub(p, t[1]);
    let d3 = vec3::dot(ab, bp);
    let d4 = vec3::dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return vec3::dist(p, t[1]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = if d1 - d3 != 0.0 { d1 / (d1 - d3) } else { 0.0 };
        return vec3::dist(p, vec3::add(t[0], vec3::scale(ab, v)));
    }
    let cp = vec3::sub(p, t[2]);
    let d5 = vec3::dot(ab, cp);
    let d6 = vec3::dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return vec3::dist(p, t[2]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = if d2 - d6 != 0.0 { d2 / (d2 - d6) } else { 0.0 };
        return vec3::dist(p, vec3::add(t[0], vec3::scale(ac, w)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let denom = (d4 - d3) + (d5 - d6);
        let w = if denom != 0.0 { (d4 - d3) / denom } else { 0.0 };
        let q = vec3::add(t[1], vec3::scale(vec3::sub(t[2], t[1]), w));
        return vec3::dist(p, q);
    }
    let denom = va + vb + vc;
    if denom.abs() < f64::MIN_POSITIVE {
        // Degenerate triangle: fall back to the nearest edge.
        let e = |a: Vec3, b: Vec3| {
            let d = vec3::sub(b, a);
            let t = (vec3::dot(vec3::sub(p, a), d) / vec3::norm2(d).max(f64::MIN_POSITIVE))
                .clamp(0.0, 1.0);
            vec3::dist(p, vec3::add(a, vec3::scale(d, t)))
        };
        return e(t[0], t[1]).min(e(t[1], t[2])).min(e(t[2], t[0]));
    }
    let v = vb / denom;
    let w = vc / denom;
    let q = vec3::add(t[0], vec3::add(vec3::scale(ab, v), vec3::scale(ac, w)));
    vec3::dist(p, q)
}

/// Subdivision depth so that fragments of a triangle of diameter `diam`
/// have diameter below `target`.
#[inline]
pub fn subdivision_depth(diam: f64, target: f64) -> u32 {
    if diam <= target || target <= 0.0 {
        return 0;
    }
    let d = (diam / target).log2().ceil() as i64;
    d.clamp(0, 14) as u32
}

/// Visits the centroids of the 4^depth congruent fragments of the triangle.
/// `f` receives the centroid, its barycentric coordinates with respect to
/// the parent vertices, and the fragment area (parent area / 4^depth).
pub fn for_each_fragment(p: [Vec3; 3], depth: u32, mut f: impl FnMut(Vec3, [f64; 3], f64)) {
    let a = area(p);
    if a == 0.0 {
        return;
    }
    let n = 1usize << depth;
    let frag_area = a / (n * n) as f64;
    let inv3n = 1.0 / (3.0 * n as f64);
    let mut emit = |l1: f64, l2: f64, g: &mut dyn FnMut(Vec3, [f64; 3], f64)| {
        let l0 = 1.0 - l1 - l2;
        let c = [
            l0 * p[0][0] + l1 * p[1][0] + l2 * p[2][0],
            l0 * p[0][1] + l1 * p[1][1] + l2 * p[2][1],
            l0 * p[0][2] + l1 * p[1][2] + l2 * p[2][2],
        ];
        g(c, [l0, l1, l2], frag_area);
    };
    for s in 0..n {
        for t in 0..(n - s) {
            // Upright fragment at lattice cell (s, t).
            emit((3 * s + 1) as f64 * inv3n, (3 * t + 1) as f64 * inv3n, &mut f);
            if s + t + 2 <= n {
                // Inverted fragment.
                emit((3 * s + 2) as f64 * inv3n, (3 * t + 2) as f64 * inv3n, &mut f);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_unit_right_triangle() {
        let t = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!((area(t) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fragments_partition_area() {
        let t = [[0.1, -0.2, 0.3], [1.3, 0.4, -0.2], [-0.5, 1.1, 0.8]];
        for depth in 0..5 {
            let mut total = 0.0;
            let mut count = 0;
            for_each_fragment(t, depth, |_, lam, a| {
                total += a;
                count += 1;
                assert!((lam[0] + lam[1] + lam[2] - 1.0).abs() < 1e-12);
            });
            assert_eq!(count, 1usize << (2 * depth));
            assert!((total - area(t)).abs() < 1e-12 * area(t).max(1.0));
        }
    }

    #[test]
    fn fragment_centroid_mean_is_parent_centroid() {
        let t = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 3.0, 1.0]];
        let mut sum = [0.0; 3];
        let mut n = 0.0;
        for_each_fragment(t, 3, |c, _, _| {
            sum = vec3::add(sum, c);
            n += 1.0;
        });
        let mean = vec3::scale(sum, 1.0 / n);
        let centroid = vec3::scale(vec3::add(t[0], vec3::add(t[1], t[2])), 1.0 / 3.0);
        assert!(vec3::dist(mean, centroid) < 1e-12);
    }

    #[test]
    fn point_triangle_distance_regions() {
        let t = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        // Above the interior.
        assert!((point_triangle_distance([0.25, 0.25, 2.0], t) - 2.0).abs() < 1e-14);
        // Nearest vertex.
        assert!((point_triangle_distance([-1.0, -1.0, 0.0], t) - 2f64.sqrt()).abs() < 1e-14);
        // Nearest edge.
        assert!((point_triangle_distance([0.5, -1.0, 0.0], t) - 1.0).abs() < 1e-14);
        // Hypotenuse side.
        let d = point_triangle_distance([1.0, 1.0, 0.0], t);
        assert!((d - (2f64.sqrt() / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn area_gradient_matches_finite_differences() {
        let t = [[0.1, 0.0, 0.2], [1.0, 0.2, -0.1], [0.3, 1.2, 0.4]];
        let (_, g) = area_gradient(t);
        let s = 1e-6;
        for v in 0..3 {
            for c in 0..3 {
                let mut tp = t;
                let mut tm = t;
                tp[v][c] += s;
                tm[v][c] -= s;
                let fd = (area(tp) - area(tm)) / (2.0 * s);
                assert!((fd - g[v][c]).abs() < 1e-8, "v={v} c={c}: {fd} vs {}", g[v][c]);
            }
        }
    }
}
