//! Upper Ahlfors regularity estimator: the supremum over sheet vertices x
//! and dyadic radii r of area(S ∩ B(x,r)) / (pi r^2).
//!
//! The continuum supremum ranges over all centers on the surface and all
//! radii; vertex centers and dyadic radii under-estimate it by a bounded
//! factor, which every report states.

use rayon::prelude::*;

use crate::clip::ClippedAreaIndex;
use crate::sheet::{self, HomotopySheet, SheetError};
use crate::vec3::Vec3;

/// Geometric radius sequence r_max * 2^-k, k = 0 .. levels-1.
#[derive(Debug, Clone, Copy)]
pub struct RadiiSpec {
    pub r_max: f64,
    pub levels: usize,
}

impl RadiiSpec {
    pub fn radii(&self) -> Vec<f64> {
        (0..self.levels).map(|k| self.r_max * 0.5f64.powi(k as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AhlforsReport {
    pub sup_ratio: f64,
    pub argmax_center: Vec3,
    pub argmax_radius: f64,
    /// (radius, sup ratio at that radius), largest radius first.
    pub per_level: Vec<(f64, f64)>,
}

pub fn ahlfors_ratio(sheet: &HomotopySheet, radii: &RadiiSpec) -> Result<AhlforsReport, SheetError> {
    ahlfors_ratio_strided(sheet, radii, 1)
}

/// As `ahlfors_ratio` but sampling every `stride`-th vertex as center;
/// used for the cheap per-iteration monitor.
pub fn ahlfors_ratio_strided(
    sheet: &HomotopySheet,
    radii: &RadiiSpec,
    stride: usize,
) -> Result<AhlforsReport, SheetError> {
    if !(radii.r_max > 0.0) {
        return Err(SheetError::BadShape("radii must be positive".into()));
    }
    if radii.levels < 4 {
        return Err(SheetError::BadShape(format!(
            "need at least 4 dyadic levels, got {}",
            radii.levels
        )));
    }
    let rs = radii.radii();
    let soup = sheet::triangle_soup(sheet);
    let cell = (sheet.diameter() / 24.0).max(rs[rs.len() - 1] / 4.0);
    let index = ClippedAreaIndex::new(soup, cell);
    let centers: Vec<Vec3> = sheet.vertices().iter().copied().step_by(stride.max(1)).collect();

    let mut report = AhlforsReport {
        sup_ratio: 0.0,
        argmax_center: [0.0; 3],
        argmax_radius: 0.0,
        per_level: Vec::with_capacity(rs.len()),
    };
    for &r in &rs {
        let denom = std::f64::consts::PI * r * r;
        let ratios: Vec<f64> = centers
            .par_iter()
            .map(|c| index.query(*c, r) / denom)
            .collect();
        let mut level_sup = 0.0;
        let mut level_arg = 0usize;
        for (i, &q) in ratios.iter().enumerate() {
            if q > level_sup {
                level_sup = q;
                level_arg = i;
            }
        }
        report.per_level.push((r, level_sup));
        if level_sup > report.sup_ratio {
            report.sup_ratio = level_sup;
            report.argmax_center = centers[level_arg];
            report.argmax_radius = r;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheet::shapes;

    #[test]
    fn flat_annulus_ratio_bounded() {
        let s = shapes::flat_annulus([0.0; 3], 0.5, 1.0, 16, 128, 2.0);
        let rep = ahlfors_ratio(&s, &RadiiSpec { r_max: 1.0, levels: 4 }).unwrap();
        assert!(rep.sup_ratio.is_finite());
        for (r, q) in &rep.per_level {
            assert!(*q <= 1.05, "radius {r}: ratio {q}");
        }
    }

    #[test]
    fn flat_interior_density_one() {
        // Small radii at interior centers see planar density 1.
        let s = shapes::flat_annulus([0.0; 3], 0.2, 1.2, 24, 192, 2.0);
        let rep = ahlfors_ratio(&s, &RadiiSpec { r_max: 0.2, levels: 4 }).unwrap();
        for (r, q) in &rep.per_level {
            assert!(*q <= 1.02, "radius {r}: ratio {q}");
            assert!(*q >= 0.9, "radius {r}: ratio {q}");
        }
    }

    #[test]
    fn rejects_too_few_levels() {
        let s = shapes::flat_annulus([0.0; 3], 0.5, 1.0, 8, 32, 2.0);
        assert!(ahlfors_ratio(&s, &RadiiSpec { r_max: 0.5, levels: 3 }).is_err());
    }

    #[test]
    fn two_parallel_disks_double_density() {
        // One sheet tracing disk -> short rim wall -> disk: two unit disks
        // 0.05 apart. A ball of radius 0.5 centered between the disk centers
        // sees both, so the density is close to 2 (the oracle sums the two
        // planar caps; the rim wall is outside the ball).
        let gap = 0.05;
        let k = 96;
        let nd = 16; // rows per disk sweep
        let mut rows: Vec<(f64, f64)> = Vec::new(); // (rho, z)
        for i in 0..=nd {
            rows.push((1e-6 + (1.0 - 1e-6) * i as f64 / nd as f64, 0.0));
        }
        rows.push((1.0, 0.5 * gap));
        for i in 0..=nd {
            rows.push((1.0 - (1.0 - 1e-6) * i as f64 / nd as f64, gap));
        }
        let mut verts = Vec::new();
        for (rho, z) in &rows {
            for j in 0..k {
                let th = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                verts.push([rho * th.cos(), rho * th.sin(), *z]);
            }
        }
        let sheet = HomotopySheet::from_vertices(verts, rows.len() - 1, k, 4.0).unwrap();
        let rep = ahlfors_ratio(&sheet, &RadiiSpec { r_max: 0.5, levels: 4 }).unwrap();
        let q = rep.per_level[0].1;
        assert!((q - 2.0).abs() / 2.0 < 0.05, "ratio {q}");
    }
}
