//! Volumes, masks and their sampling grid.
//!
//! Samples are stored x-fastest: `index = x + nx * (y + ny * z)`. Voxel `i`
//! along an axis has its centre at physical coordinate `i * spacing` (mm).

mod io;
mod resample;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use io::{load_mask, load_volume, save_mask, save_volume, VolumeFormat};
pub use resample::{reslice_isotropic, reslice_mask};

/// Dimensions and physical voxel size shared by volumes and masks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dims: [usize; 3],
    spacing: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGeometry(format!(
                "dims must be positive, got {dims:?}"
            )));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be positive and finite, got {spacing:?}"
            )));
        }
        dims[0]
            .checked_mul(dims[1])
            .and_then(|n| n.checked_mul(dims[2]))
            .ok_or_else(|| Error::InvalidGeometry(format!("dims {dims:?} overflow")))?;
        Ok(Grid { dims, spacing })
    }

    /// Unit-spaced grid, handy for tests and synthetic data.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3])
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims[0] && y < self.dims[1] && z < self.dims[2]);
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Physical voxel volume in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    pub fn is_isotropic(&self) -> bool {
        let [a, b, c] = self.spacing;
        let tol = 1e-9 * a.max(b).max(c);
        (a - b).abs() <= tol && (a - c).abs() <= tol
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::GridMismatch(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let tol = 1e-6;
        if self
            .spacing
            .iter()
            .zip(other.spacing.iter())
            .any(|(a, b)| (a - b).abs() > tol * a.max(*b))
        {
            return Err(Error::GridMismatch(format!(
                "spacing {:?} vs {:?}",
                self.spacing, other.spacing
            )));
        }
        Ok(())
    }

    /// Sub-grid covering `lo..hi` (exclusive) in index space.
    pub fn crop(&self, lo: [usize; 3], hi: [usize; 3]) -> Result<Grid> {
        for a in 0..3 {
            if lo[a] >= hi[a] || hi[a] > self.dims[a] {
                return Err(Error::InvalidGeometry(format!(
                    "crop range {lo:?}..{hi:?} outside {:?}",
                    self.dims
                )));
            }
        }
        Grid::new(
            [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]],
            self.spacing,
        )
    }

    fn crop_indices(&self, lo: [usize; 3], hi: [usize; 3]) -> impl Iterator<Item = usize> + '_ {
        (lo[2]..hi[2]).flat_map(move |z| {
            (lo[1]..hi[1]).flat_map(move |y| (lo[0]..hi[0]).map(move |x| self.index(x, y, z)))
        })
    }
}

/// Axis of the sampling grid; `Z` is the slowest-varying (axial) axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" | "axial" => Ok(Axis::Z),
            _ => Err(Error::UnknownAxis(s.to_string())),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Scalar field on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    grid: Grid,
    data: Vec<T>,
}

impl<T: Scalar> Volume<T> {
    /// Builds a volume, rejecting wrong lengths and non-finite samples.
    pub fn new(grid: Grid, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::LengthMismatch(data.len(), grid.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Volume { grid, data })
    }

    /// Caller guarantees length and finiteness.
    pub(crate) fn from_parts(grid: Grid, data: Vec<T>) -> Self {
        debug_assert_eq!(grid.len(), data.len());
        Volume { grid, data }
    }

    pub fn filled(grid: Grid, value: T) -> Self {
        Volume {
            grid,
            data: vec![value; grid.len()],
        }
    }

    /// Samples `f(x, y, z)` at every voxel index.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize, usize) -> T) -> Result<Self> {
        let [nx, ny, nz] = grid.dims();
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(grid, data)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    #[inline]
    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn cast<U: Scalar>(&self) -> Volume<U> {
        Volume {
            grid: self.grid,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.grid, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn crop(&self, lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        let grid = self.grid.crop(lo, hi)?;
        let data = self.grid.crop_indices(lo, hi).map(|i| self.data[i]).collect();
        Ok(Volume { grid, data })
    }

    /// Largest absolute sample, 0 for an all-zero volume.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Binary region on a [`Grid`]; samples are exactly 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask3D {
    grid: Grid,
    data: Vec<u8>,
}

impl Mask3D {
    pub fn new(grid: Grid, data: Vec<u8>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::LengthMismatch(data.len(), grid.len()));
        }
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::InvalidGeometry(format!(
                "mask sample {} at index {i} is not 0/1",
                data[i]
            )));
        }
        Ok(Mask3D { grid, data })
    }

    pub(crate) fn from_parts(grid: Grid, data: Vec<u8>) -> Self {
        debug_assert!(data.len() == grid.len() && data.iter().all(|&v| v <= 1));
        Mask3D { grid, data }
    }

    pub fn empty(grid: Grid) -> Self {
        Mask3D {
            grid,
            data: vec![0; grid.len()],
        }
    }

    pub fn full(grid: Grid) -> Self {
        Mask3D {
            grid,
            data: vec![1; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let [nx, ny, nz] = grid.dims();
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    data.push(u8::from(f(x, y, z)));
                }
            }
        }
        Mask3D { grid, data }
    }

    /// Voxels with a nonzero sample become set.
    pub fn from_nonzero<T: Scalar>(vol: &Volume<T>) -> Self {
        Mask3D {
            grid: vol.grid,
            data: vol.data.iter().map(|v| u8::from(!v.is_zero())).collect(),
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    #[inline]
    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.grid.index(x, y, z)] != 0
    }

    #[inline]
    pub fn is_set(&self, idx: usize) -> bool {
        self.data[idx] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn intersect(&self, other: &Mask3D) -> Result<Mask3D> {
        self.grid.ensure_same(&other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a & b).collect();
        Ok(Mask3D::from_parts(self.grid, data))
    }

    pub fn union(&self, other: &Mask3D) -> Result<Mask3D> {
        self.grid.ensure_same(&other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a | b).collect();
        Ok(Mask3D::from_parts(self.grid, data))
    }

    pub fn crop(&self, lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        let grid = self.grid.crop(lo, hi)?;
        let data = self.grid.crop_indices(lo, hi).map(|i| self.data[i]).collect();
        Ok(Mask3D { grid, data })
    }

    /// Inclusive index bounding box of set voxels, `None` when empty.
    pub fn bounding_box(&self) -> Option<[[usize; 2]; 3]> {
        let mut bb: Option<[[usize; 2]; 3]> = None;
        for (i, _) in self.data.iter().enumerate().filter(|(_, &v)| v != 0) {
            let c = self.grid.coords(i);
            let b = bb.get_or_insert([[c[0], c[0]], [c[1], c[1]], [c[2], c[2]]]);
            for a in 0..3 {
                b[a][0] = b[a][0].min(c[a]);
                b[a][1] = b[a][1].max(c[a]);
            }
        }
        bb
    }

    pub fn to_volume<T: Scalar>(&self) -> Volume<T> {
        Volume::from_parts(
            self.grid,
            self.data
                .iter()
                .map(|&v| if v != 0 { T::one() } else { T::zero() })
                .collect(),
        )
    }
}
