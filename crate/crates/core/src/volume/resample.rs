use rayon::prelude::*;

use super::{Grid, Mask3D, Volume};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn target_grid(src: &Grid, target: f64) -> Result<Grid> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target spacing must be positive, got {target}"
        )));
    }
    let dims = src.dims();
    let sp = src.spacing();
    let mut out = [0usize; 3];
    for a in 0..3 {
        // Guard against 2.0000000000000004-style overshoot before ceil.
        let extent = dims[a] as f64 * sp[a] / target;
        let rounded = extent.round();
        let n = if (extent - rounded).abs() <= 1e-9 * extent.max(1.0) {
            rounded
        } else {
            extent.ceil()
        };
        out[a] = (n as usize).max(1);
    }
    Grid::new(out, [target; 3])
}

/// Continuous source index of output voxel `j` along one axis, clamped.
#[inline]
fn source_coord(j: usize, target: f64, src_spacing: f64, n: usize) -> f64 {
    (j as f64 * target / src_spacing).clamp(0.0, (n - 1) as f64)
}

struct Lerp {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn lerp_table(n_out: usize, n_src: usize, target: f64, src_spacing: f64) -> Vec<Lerp> {
    (0..n_out)
        .map(|j| {
            let u = source_coord(j, target, src_spacing, n_src);
            let lo = (u.floor() as usize).min(n_src - 1);
            let hi = (lo + 1).min(n_src - 1);
            Lerp {
                lo,
                hi,
                frac: u - lo as f64,
            }
        })
        .collect()
}

#[inline]
fn lerp<T: Scalar>(a: T, b: T, f: T) -> T {
    // a + f (b - a) keeps constants exact
    a + f * (b - a)
}

/// Trilinear resampling onto an isotropic grid of `target` mm.
///
/// Output voxel `j` samples the source at physical position `j * target`;
/// positions past the last source voxel clamp to the edge sample.
pub fn reslice_isotropic<T: Scalar>(vol: &Volume<T>, target: f64) -> Result<Volume<T>> {
    let grid = target_grid(vol.grid(), target)?;
    let [sx, sy, sz] = vol.spacing();
    let [nx, ny, nz] = vol.dims();
    let [ox, oy, oz] = grid.dims();
    let tx = lerp_table(ox, nx, target, sx);
    let ty = lerp_table(oy, ny, target, sy);
    let tz = lerp_table(oz, nz, target, sz);
    let src = vol.grid();
    let d = vol.data();

    let mut out = vec![T::zero(); grid.len()];
    out.par_chunks_mut(ox * oy)
        .zip(tz.par_iter())
        .for_each(|(plane, lz)| {
            let fz = T::of(lz.frac);
            for (jy, ly) in ty.iter().enumerate() {
                let fy = T::of(ly.frac);
                for (jx, lx) in tx.iter().enumerate() {
                    let fx = T::of(lx.frac);
                    let s = |x, y, z| d[src.index(x, y, z)];
                    let c00 = lerp(s(lx.lo, ly.lo, lz.lo), s(lx.hi, ly.lo, lz.lo), fx);
                    let c10 = lerp(s(lx.lo, ly.hi, lz.lo), s(lx.hi, ly.hi, lz.lo), fx);
                    let c01 = lerp(s(lx.lo, ly.lo, lz.hi), s(lx.hi, ly.lo, lz.hi), fx);
                    let c11 = lerp(s(lx.lo, ly.hi, lz.hi), s(lx.hi, ly.hi, lz.hi), fx);
                    let c0 = lerp(c00, c10, fy);
                    let c1 = lerp(c01, c11, fy);
                    plane[jx + ox * jy] = lerp(c0, c1, fz);
                }
            }
        });
    Ok(Volume::from_parts(grid, out))
}

/// Nearest-neighbour counterpart of [`reslice_isotropic`]; ties go to the
/// lower source index.
pub fn reslice_mask(mask: &Mask3D, target: f64) -> Result<Mask3D> {
    let grid = target_grid(mask.grid(), target)?;
    let sp = mask.spacing();
    let nd = mask.dims();
    let od = grid.dims();
    let table = |a: usize| -> Vec<usize> {
        (0..od[a])
            .map(|j| {
                let u = source_coord(j, target, sp[a], nd[a]);
                ((u - 0.5).ceil().max(0.0) as usize).min(nd[a] - 1)
            })
            .collect()
    };
    let (tx, ty, tz) = (table(0), table(1), table(2));
    let src = mask.grid();
    let d = mask.data();
    let mut out = vec![0u8; grid.len()];
    out.par_chunks_mut(od[0] * od[1])
        .zip(tz.par_iter())
        .for_each(|(plane, &z)| {
            for (jy, &y) in ty.iter().enumerate() {
                for (jx, &x) in tx.iter().enumerate() {
                    plane[jx + od[0] * jy] = d[src.index(x, y, z)];
                }
            }
        });
    Ok(Mask3D::from_parts(grid, out))
}
