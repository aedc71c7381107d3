//! Discrete homotopy sheets: an (M+1) x K vertex grid discretizing a map
//! from [0,1] x S^1 into R^3, periodic in the angular index, with the first
//! and last rows pinned to the two boundary rings.
//!
//! The sheet carries the surface as the union of the 2MK triangles obtained
//! by splitting every parameter cell along its shorter diagonal. Area is the
//! parametrized (with multiplicity) triangulated area, an upper bound for
//! the measure of the image set; for embedded sheets the two agree.

use thiserror::Error;

use crate::geometry::ConvexRegion;
use crate::tri;
use crate::vec3::{self, Vec3};

/// Vertices must lie in the closure of the inner region within this.
pub const IN_REGION_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SheetError {
    #[error("boundary rings have mismatched sample counts ({0} vs {1})")]
    RingMismatch(usize, usize),
    #[error("sheet vertex lies outside the inner region by {dist}")]
    OutsideC0 { dist: f64 },
    #[error("bad sheet shape: {0}")]
    BadShape(String),
}

#[derive(Debug, Clone)]
pub struct HomotopySheet {
    vertices: Vec<Vec3>,
    m: usize,
    k: usize,
    pub lambda_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Linear,
}

impl HomotopySheet {
    /// Raw constructor: validates only the grid shape. Containment in an
    /// inner region is enforced by `init_sheet` when a region is given;
    /// analysis sequences are free maps into R^3.
    pub fn from_vertices(
        vertices: Vec<Vec3>,
        m: usize,
        k: usize,
        lambda_cap: f64,
    ) -> Result<Self, SheetError> {
        if k < 8 {
            return Err(SheetError::BadShape(format!("K must be at least 8, got {k}")));
        }
        if m < 2 {
            return Err(SheetError::BadShape(format!("M must be at least 2, got {m}")));
        }
        if vertices.len() != (m + 1) * k {
            return Err(SheetError::BadShape(format!(
                "expected {} vertices, got {}",
                (m + 1) * k,
                vertices.len()
            )));
        }
        if !(lambda_cap > 0.0) {
            return Err(SheetError::BadShape("lambda cap must be positive".into()));
        }
        Ok(HomotopySheet { vertices, m, k, lambda_cap })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.k + j
    }

    #[inline]
    pub fn vertex(&self, i: usize, j: usize) -> Vec3 {
        self.vertices[i * self.k + j]
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn row(&self, i: usize) -> &[Vec3] {
        &self.vertices[i * self.k..(i + 1) * self.k]
    }

    /// Replaces all vertices; shape must be unchanged.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self, SheetError> {
        Self::from_vertices(vertices, self.m, self.k, self.lambda_cap)
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for c in 0..3 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        vec3::dist(lo, hi)
    }

    pub fn max_distance_to(&self, other: &HomotopySheet) -> f64 {
        assert_eq!(self.vertices.len(), other.vertices.len());
        self.vertices
            .iter()
            .zip(&other.vertices)
            .map(|(a, b)| vec3::dist(*a, *b))
            .fold(0.0, f64::max)
    }
}

/// Row i interpolates the rings at parameter t_i = i/M. Valid because the
/// inner region is convex, so segments between the rings stay inside.
pub fn init_sheet(
    ring0: &[Vec3],
    ring1: &[Vec3],
    m: usize,
    mode: InitMode,
    lambda_cap: f64,
    region: Option<&ConvexRegion>,
) -> Result<HomotopySheet, SheetError> {
    if ring0.len() != ring1.len() {
        return Err(SheetError::RingMismatch(ring0.len(), ring1.len()));
    }
    let k = ring0.len();
    if let Some(r) = region {
        for p in ring0.iter().chain(ring1.iter()) {
            let d = vec3::dist(*p, r.project(*p));
            if d > IN_REGION_TOL {
                return Err(SheetError::OutsideC0 { dist: d });
            }
        }
    }
    let mut vertices = Vec::with_capacity((m + 1) * k);
    match mode {
        InitMode::Linear => {
            for i in 0..=m {
                let t = i as f64 / m as f64;
                for j in 0..k {
                    vertices.push(vec3::lerp(ring0[j], ring1[j], t));
                }
            }
        }
    }
    HomotopySheet::from_vertices(vertices, m, k, lambda_cap)
}

#[derive(Debug, Clone)]
pub struct TriangleList {
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleList {
    pub fn vertex_positions(&self, sheet: &HomotopySheet, t: usize) -> [Vec3; 3] {
        let tri = self.triangles[t];
        [
            sheet.vertices()[tri[0] as usize],
            sheet.vertices()[tri[1] as usize],
            sheet.vertices()[tri[2] as usize],
        ]
    }
}

/// Splits every parameter cell along its shorter diagonal (ties take the
/// (i,j)-(i+1,j+1) diagonal), which avoids sliver bias on twisted sheets
/// and is deterministic. Orientation is consistent across the sheet.
pub fn triangulate(sheet: &HomotopySheet) -> TriangleList {
    let (m, k) = (sheet.m(), sheet.k());
    let mut triangles = Vec::with_capacity(2 * m * k);
    let idx = |i: usize, j: usize| (i * k + (j % k)) as u32;
    for i in 0..m {
        for j in 0..k {
            let a = idx(i, j);
            let b = idx(i, j + 1);
            let c = idx(i + 1, j);
            let d = idx(i + 1, j + 1);
            let va = sheet.vertices()[a as usize];
            let vb = sheet.vertices()[b as usize];
            let vc = sheet.vertices()[c as usize];
            let vd = sheet.vertices()[d as usize];
            if vec3::dist2(va, vd) <= vec3::dist2(vb, vc) {
                triangles.push([a, b, d]);
                triangles.push([a, d, c]);
            } else {
                triangles.push([a, b, c]);
                triangles.push([b, d, c]);
            }
        }
    }
    TriangleList { triangles }
}

/// Positions of all triangles, in triangulation order.
pub fn triangle_soup(sheet: &HomotopySheet) -> Vec<[Vec3; 3]> {
    let tris = triangulate(sheet);
    (0..tris.triangles.len())
        .map(|t| tris.vertex_positions(sheet, t))
        .collect()
}

fn pairwise_sum(v: &mut [f64]) -> f64 {
    // Pairwise tree sum: deterministic and accurate.
    let mut n = v.len();
    if n == 0 {
        return 0.0;
    }
    while n > 1 {
        let half = n / 2;
        for i in 0..half {
            v[i] = v[2 * i] + v[2 * i + 1];
        }
        if n % 2 == 1 {
            v[half] = v[n - 1];
            n = half + 1;
        } else {
            n = half;
        }
    }
    v[0]
}

/// Sum of triangle areas: the parametrized area of the sheet.
pub fn sheet_area(sheet: &HomotopySheet) -> f64 {
    let tris = triangulate(sheet);
    let mut areas: Vec<f64> = (0..tris.triangles.len())
        .map(|t| tri::area(tris.vertex_positions(sheet, t)))
        .collect();
    pairwise_sum(&mut areas)
}

pub fn soup_area(tris: &[[Vec3; 3]]) -> f64 {
    let mut areas: Vec<f64> = tris.iter().map(|t| tri::area(*t)).collect();
    pairwise_sum(&mut areas)
}

/// Discrete Lipschitz constant: the maximum over parameter cells of the
/// operator norm of the 3x2 matrix [d_t, d_theta], with d_t = M * (row
/// difference) and d_theta = (K / 2 pi) * (column difference). The parameter
/// metric is the product metric on [0,1] x S^1 with S^1 of circumference
/// 2 pi.
pub fn lipschitz_estimate(sheet: &HomotopySheet) -> f64 {
    let (m, k) = (sheet.m(), sheet.k());
    let ct = m as f64;
    let cth = k as f64 / (2.0 * std::f64::consts::PI);
    let mut max_sv2: f64 = 0.0;
    for i in 0..m {
        for j in 0..k {
            let v = sheet.vertex(i, j);
            let dt = vec3::scale(vec3::sub(sheet.vertex(i + 1, j), v), ct);
            let dth = vec3::scale(vec3::sub(sheet.vertex(i, (j + 1) % k), v), cth);
            // Largest eigenvalue of the 2x2 Gram matrix.
            let g11 = vec3::dot(dt, dt);
            let g22 = vec3::dot(dth, dth);
            let g12 = vec3::dot(dt, dth);
            let tr = g11 + g22;
            let det = g11 * g22 - g12 * g12;
            let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
            max_sv2 = max_sv2.max(0.5 * (tr + disc));
        }
    }
    max_sv2.sqrt()
}

/// Ready-made sheets used by benchmarks and the lemma harnesses.
pub mod shapes {
    use super::*;

    /// A sheet approximating the sphere of given radius: rows are latitude
    /// circles from polar angle `phi0` to `pi - phi0`, so the boundary rings
    /// are two small circles near the poles.
    pub fn sphere_sheet(
        center: Vec3,
        radius: f64,
        phi0: f64,
        m: usize,
        k: usize,
        lambda_cap: f64,
    ) -> HomotopySheet {
        let mut vertices = Vec::with_capacity((m + 1) * k);
        for i in 0..=m {
            let phi = phi0 + (std::f64::consts::PI - 2.0 * phi0) * i as f64 / m as f64;
            for j in 0..k {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                vertices.push(vec3::add(
                    center,
                    [
                        radius * phi.sin() * theta.cos(),
                        radius * phi.sin() * theta.sin(),
                        radius * phi.cos(),
                    ],
                ));
            }
        }
        HomotopySheet::from_vertices(vertices, m, k, lambda_cap).expect("valid sphere sheet")
    }

    /// Flat annulus between concentric coplanar circles in the plane
    /// orthogonal to z through `center`.
    pub fn flat_annulus(
        center: Vec3,
        r_inner: f64,
        r_outer: f64,
        m: usize,
        k: usize,
        lambda_cap: f64,
    ) -> HomotopySheet {
        let ring = |r: f64| -> Vec<Vec3> {
            (0..k)
                .map(|j| {
                    let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                    vec3::add(center, [r * theta.cos(), r * theta.sin(), 0.0])
                })
                .collect()
        };
        init_sheet(&ring(r_inner), &ring(r_outer), m, InitMode::Linear, lambda_cap, None)
            .expect("valid annulus sheet")
    }

    /// A disk of radius `r` spanned from a tiny inner ring, lying in the
    /// plane through `center` with the given (unit) normal.
    pub fn disk_sheet(
        center: Vec3,
        r: f64,
        normal: Vec3,
        m: usize,
        k: usize,
        lambda_cap: f64,
    ) -> HomotopySheet {
        let n = vec3::normalize(normal);
        let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let e1 = vec3::normalize(vec3::sub(helper, vec3::scale(n, vec3::dot(helper, n))));
        let e2 = vec3::cross(n, e1);
        let mut vertices = Vec::with_capacity((m + 1) * k);
        for i in 0..=m {
            // Tiny but nonzero inner radius keeps row 0 a genuine ring.
            let rho = r * (1e-6 + (1.0 - 1e-6) * i as f64 / m as f64);
            for j in 0..k {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                vertices.push(vec3::add(
                    center,
                    vec3::add(
                        vec3::scale(e1, rho * theta.cos()),
                        vec3::scale(e2, rho * theta.sin()),
                    ),
                ));
            }
        }
        HomotopySheet::from_vertices(vertices, m, k, lambda_cap).expect("valid disk sheet")
    }

    /// Cylinder between two coaxial circles (axis z).
    pub fn cylinder(
        radius: f64,
        z0: f64,
        z1: f64,
        m: usize,
        k: usize,
        lambda_cap: f64,
    ) -> HomotopySheet {
        let ring = |z: f64| -> Vec<Vec3> {
            (0..k)
                .map(|j| {
                    let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                    [radius * theta.cos(), radius * theta.sin(), z]
                })
                .collect()
        };
        init_sheet(&ring(z0), &ring(z1), m, InitMode::Linear, lambda_cap, None)
            .expect("valid cylinder sheet")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PI: f64 = std::f64::consts::PI;

    fn unit_circle(k: usize, z: f64) -> Vec<Vec3> {
        (0..k)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / k as f64;
                [t.cos(), t.sin(), z]
            })
            .collect()
    }

    #[test]
    fn init_degenerate_identity() {
        let ring = unit_circle(32, 0.0);
        let s = init_sheet(&ring, &ring, 4, InitMode::Linear, 2.0, None).unwrap();
        for i in 0..=4 {
            assert_eq!(s.row(i), &ring[..]);
        }
        assert_eq!(sheet_area(&s), 0.0);
    }

    #[test]
    fn init_ring_mismatch() {
        let r0 = unit_circle(32, 0.0);
        let r1 = unit_circle(16, 1.0);
        assert!(matches!(
            init_sheet(&r0, &r1, 4, InitMode::Linear, 2.0, None),
            Err(SheetError::RingMismatch(32, 16))
        ));
    }

    #[test]
    fn init_outside_region() {
        let r0 = unit_circle(32, 0.0);
        let r1 = unit_circle(32, 1.0);
        let region = ConvexRegion::Ball { center: [0.0; 3], radius: 1.0 };
        assert!(matches!(
            init_sheet(&r0, &r1, 4, InitMode::Linear, 2.0, Some(&region)),
            Err(SheetError::OutsideC0 { .. })
        ));
    }

    #[test]
    fn annulus_area() {
        let s = shapes::flat_annulus([0.0; 3], 0.5, 1.0, 64, 256, 2.0);
        let exact = PI * (1.0 - 0.25);
        let a = sheet_area(&s);
        assert!((a - exact).abs() / exact < 0.005, "area {a} vs {exact}");
    }

    #[test]
    fn cylinder_area() {
        let s = shapes::cylinder(1.0, -0.5, 0.5, 64, 256, 2.0);
        let exact = 2.0 * PI;
        let a = sheet_area(&s);
        assert!((a - exact).abs() / exact < 0.005, "area {a} vs {exact}");
    }

    #[test]
    fn triangle_count_and_coverage() {
        let s = shapes::cylinder(1.0, 0.0, 1.0, 4, 8, 2.0);
        let t = triangulate(&s);
        assert_eq!(t.triangles.len(), 2 * 4 * 8);
        let mut seen = vec![false; s.vertices().len()];
        for tri in &t.triangles {
            for &v in tri {
                seen[v as usize] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn lipschitz_cylinder() {
        let s = shapes::cylinder(1.0, 0.0, 1.0, 64, 256, 2.0);
        let l = lipschitz_estimate(&s);
        assert!((l - 1.0).abs() < 0.01, "lip {l}");
    }

    #[test]
    fn lipschitz_degenerate_rows() {
        // Constant rows: only the angular derivative survives, whose exact
        // discrete value is the chordal factor sinc(pi/K).
        let ring = unit_circle(256, 0.0);
        let s = init_sheet(&ring, &ring, 4, InitMode::Linear, 2.0, None).unwrap();
        let expect = (PI / 256.0).sin() / (PI / 256.0);
        let l = lipschitz_estimate(&s);
        assert!((l - expect).abs() < 1e-12, "lip {l} vs {expect}");
        assert!((l - 1.0).abs() < 0.01);
    }

    #[test]
    fn lipschitz_flat_annulus() {
        // Analytic partials: d_t has norm 0.5 (radial), d_theta has norm at
        // most 1 and they are orthogonal, so the true constant is 1.
        let s = shapes::flat_annulus([0.0; 3], 0.5, 1.0, 64, 256, 2.0);
        let l = lipschitz_estimate(&s);
        assert!((l - 1.0).abs() < 0.01, "lip {l}");
    }

    #[test]
    fn area_rigid_motion_invariant() {
        let s = shapes::flat_annulus([0.0; 3], 0.5, 1.0, 16, 64, 2.0);
        let base = sheet_area(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            // Random rotation from a normalized quaternion plus translation.
            let q: [f64; 4] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
            let rot = [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ];
            let t: Vec3 = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let verts: Vec<Vec3> = s
                .vertices()
                .iter()
                .map(|v| {
                    vec3::add(
                        [
                            vec3::dot(rot[0], *v),
                            vec3::dot(rot[1], *v),
                            vec3::dot(rot[2], *v),
                        ],
                        t,
                    )
                })
                .collect();
            let moved = s.with_vertices(verts).unwrap();
            let a = sheet_area(&moved);
            assert!((a - base).abs() / base < 1e-12, "area {a} vs {base}");
        }
    }

    #[test]
    fn area_quadratic_convergence_in_k() {
        let exact = PI * (1.0 - 0.25);
        let err = |k: usize| (sheet_area(&shapes::flat_annulus([0.0; 3], 0.5, 1.0, 8, k, 2.0)) - exact).abs();
        let e1 = err(256);
        let e2 = err(128);
        let ratio = e2 / e1;
        assert!((2.0..=8.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn lipschitz_monotone_under_vertex_displacement() {
        // Displacing a single interior vertex of a locally affine sheet off
        // its affine position cannot decrease the estimate: the maximum
        // singular value is convex, so one of the two cells sharing the
        // perturbed difference goes up.
        let s = shapes::flat_annulus([0.0; 3], 0.5, 1.0, 8, 32, 2.0);
        let base = lipschitz_estimate(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let i = rng.gen_range(1..8);
            let j = rng.gen_range(0..32);
            let delta: Vec3 = [
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
            ];
            let mut verts = s.vertices().to_vec();
            let idx = s.index(i, j);
            verts[idx] = vec3::add(verts[idx], delta);
            let moved = s.with_vertices(verts).unwrap();
            assert!(lipschitz_estimate(&moved) >= base - 1e-12);
        }
    }
}
