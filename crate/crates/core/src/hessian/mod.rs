//! Scale-space Hessian and its per-voxel eigen-decomposition.

mod eigen;
mod kernel;

pub use eigen::{eigen_symmetric_3x3, EigenTriple, SymMat3};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volume::{Grid, Volume};

use kernel::{correlate_axis, DerivativeKernels};

/// Six unique second derivatives per voxel at one scale.
#[derive(Clone, Debug)]
pub struct HessianField<T> {
    grid: Grid,
    scale: f64,
    pub xx: Vec<T>,
    pub yy: Vec<T>,
    pub zz: Vec<T>,
    pub xy: Vec<T>,
    pub xz: Vec<T>,
    pub yz: Vec<T>,
}

impl<T: Scalar> HessianField<T> {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Scale in mm.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn at(&self, idx: usize) -> SymMat3<T> {
        SymMat3::new(
            self.xx[idx],
            self.yy[idx],
            self.zz[idx],
            self.xy[idx],
            self.xz[idx],
            self.yz[idx],
        )
    }

    pub fn len(&self) -> usize {
        self.xx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xx.is_empty()
    }
}

/// γ-normalised (γ = 2) Gaussian second derivatives at `scale` mm.
///
/// Each entry is the separable convolution of the volume with the matching
/// second-derivative-of-Gaussian kernel, expressed per mm², times `scale²`.
/// The volume must be isotropic; boundaries are mirror-reflected.
pub fn gaussian_second_derivatives<T: Scalar>(
    vol: &Volume<T>,
    scale: f64,
) -> Result<HessianField<T>> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let grid = *vol.grid();
    if !grid.is_isotropic() {
        return Err(Error::NonIsotropic(grid.spacing()));
    }
    let sigma = scale / grid.spacing()[0];
    let k = DerivativeKernels::<T>::new(sigma);
    let dims = grid.dims();
    let norm = T::of(sigma * sigma);
    let pass = |src: &[T], axis: usize, which: &kernel::Kernel<T>| correlate_axis(src, dims, axis, which);

    let src = vol.data();
    let (xx, xy, yy) = {
        let z0 = pass(src, 2, &k.smooth);
        let y0 = pass(&z0, 1, &k.smooth);
        let y1 = pass(&z0, 1, &k.first);
        let y2 = pass(&z0, 1, &k.second);
        drop(z0);
        (
            pass(&y0, 0, &k.second),
            pass(&y1, 0, &k.first),
            pass(&y2, 0, &k.smooth),
        )
    };
    let (xz, yz) = {
        let z1 = pass(src, 2, &k.first);
        let y0 = pass(&z1, 1, &k.smooth);
        let y1 = pass(&z1, 1, &k.first);
        drop(z1);
        (pass(&y0, 0, &k.first), pass(&y1, 0, &k.smooth))
    };
    let zz = {
        let z2 = pass(src, 2, &k.second);
        let y0 = pass(&z2, 1, &k.smooth);
        pass(&y0, 0, &k.smooth)
    };

    let scaled = |mut v: Vec<T>| {
        v.iter_mut().for_each(|e| *e = *e * norm);
        v
    };
    Ok(HessianField {
        grid,
        scale,
        xx: scaled(xx),
        yy: scaled(yy),
        zz: scaled(zz),
        xy: scaled(xy),
        xz: scaled(xz),
        yz: scaled(yz),
    })
}

/// Gaussian smoothing at `scale` mm with the same kernel and boundary rule as
/// the Hessian.
pub fn gaussian_smooth<T: Scalar>(vol: &Volume<T>, scale: f64) -> Result<Volume<T>> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let grid = *vol.grid();
    if !grid.is_isotropic() {
        return Err(Error::NonIsotropic(grid.spacing()));
    }
    let k = DerivativeKernels::<T>::new(scale / grid.spacing()[0]);
    let dims = grid.dims();
    let z = correlate_axis(vol.data(), dims, 2, &k.smooth);
    let y = correlate_axis(&z, dims, 1, &k.smooth);
    Ok(Volume::from_parts(grid, correlate_axis(&y, dims, 0, &k.smooth)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_volume_has_zero_hessian() {
        let v = Volume::filled(Grid::unit([9, 7, 8]).unwrap(), 123.25f64);
        for s in [0.4, 1.0, 2.5] {
            let h = gaussian_second_derivatives(&v, s).unwrap();
            for f in [&h.xx, &h.yy, &h.zz, &h.xy, &h.xz, &h.yz] {
                assert!(f.iter().all(|e| e.abs() < 1e-10));
            }
        }
    }

    #[test]
    fn quadratic_in_x() {
        // x in mm with 0.5 mm voxels; Ixx = 2 before normalisation.
        let g = Grid::new([24, 10, 10], [0.5; 3]).unwrap();
        let v = Volume::from_fn(g, |x, _, _| {
            let xm = x as f64 * 0.5;
            xm * xm
        })
        .unwrap();
        let scale = 1.0;
        let h = gaussian_second_derivatives(&v, scale).unwrap();
        let r = 8; // kernel radius in voxels
        for z in 0..10 {
            for y in 0..10 {
                for x in r..24 - r {
                    let i = g.index(x, y, z);
                    assert!((h.xx[i] - 2.0 * scale * scale).abs() < 1e-9, "{}", h.xx[i]);
                    for f in [&h.yy, &h.zz, &h.xy, &h.xz, &h.yz] {
                        assert!(f[i].abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_anisotropic_and_bad_scale() {
        let v = Volume::filled(Grid::new([2, 2, 2], [1.0, 1.0, 2.0]).unwrap(), 0.0f64);
        assert!(matches!(
            gaussian_second_derivatives(&v, 1.0),
            Err(Error::NonIsotropic(_))
        ));
        let v = Volume::filled(Grid::unit([2, 2, 2]).unwrap(), 0.0f64);
        assert!(gaussian_second_derivatives(&v, 0.0).is_err());
    }

    #[test]
    fn axis_permutation_permutes_entries() {
        let g = Grid::unit([11, 9, 7]).unwrap();
        let f = |x: usize, y: usize, z: usize| {
            let (x, y, z) = (x as f64, y as f64, z as f64);
            (0.3 * x).sin() * (0.2 * y + 0.1 * z).cos() + 0.01 * x * y * z
        };
        let v = Volume::from_fn(g, f).unwrap();
        // swap x and z
        let gp = Grid::unit([7, 9, 11]).unwrap();
        let vp = Volume::from_fn(gp, |x, y, z| f(z, y, x)).unwrap();
        let h = gaussian_second_derivatives(&v, 1.3).unwrap();
        let hp = gaussian_second_derivatives(&vp, 1.3).unwrap();
        for z in 0..7 {
            for y in 0..9 {
                for x in 0..11 {
                    let i = g.index(x, y, z);
                    let j = gp.index(z, y, x);
                    let pairs = [
                        (h.xx[i], hp.zz[j]),
                        (h.yy[i], hp.yy[j]),
                        (h.zz[i], hp.xx[j]),
                        (h.xy[i], hp.yz[j]),
                        (h.xz[i], hp.xz[j]),
                        (h.yz[i], hp.xy[j]),
                    ];
                    for (a, b) in pairs {
                        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
                    }
                }
            }
        }
    }
}
