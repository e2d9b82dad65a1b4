//! Raw float32 volumes with a text sidecar, and read-only NIfTI-1.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{Grid, Mask3D, Volume};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const NIFTI_HEADER_LEN: usize = 348;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VolumeFormat {
    /// `<name>.f32raw` plus `<name>.f32raw.meta`.
    RawF32,
    /// Single-file uncompressed NIfTI-1 (`n+1`).
    Nifti1,
}

impl VolumeFormat {
    /// `.nii` selects NIfTI-1, anything else the raw container.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("nii") => VolumeFormat::Nifti1,
            _ => VolumeFormat::RawF32,
        }
    }
}

impl FromStr for VolumeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw-f32" | "raw" => Ok(VolumeFormat::RawF32),
            "nifti1" | "nifti" => Ok(VolumeFormat::Nifti1),
            other => Err(Error::InvalidParameter(format!(
                "unknown volume format `{other}`"
            ))),
        }
    }
}

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_volume(path: impl AsRef<Path>, format: VolumeFormat) -> Result<Volume<f64>> {
    let path = path.as_ref();
    match format {
        VolumeFormat::RawF32 => load_raw(path),
        VolumeFormat::Nifti1 => load_nifti(path),
    }
}

/// Loads a mask; every nonzero sample is treated as set.
pub fn load_mask(path: impl AsRef<Path>, format: VolumeFormat) -> Result<Mask3D> {
    Ok(Mask3D::from_nonzero(&load_volume(path, format)?))
}

pub fn save_volume<T: Scalar>(vol: &Volume<T>, path: impl AsRef<Path>) -> Result<()> {
    let samples = vol.data().iter().map(|v| v.to_f32().unwrap_or(f32::NAN));
    write_raw(path.as_ref(), vol.grid(), samples, "volume")
}

pub fn save_mask(mask: &Mask3D, path: impl AsRef<Path>) -> Result<()> {
    let samples = mask.data().iter().map(|&v| f32::from(v));
    write_raw(path.as_ref(), mask.grid(), samples, "mask")
}

fn write_raw(
    path: &Path,
    grid: &Grid,
    samples: impl Iterator<Item = f32>,
    kind: &str,
) -> Result<()> {
    let mut bytes = Vec::with_capacity(grid.len() * 4);
    for s in samples {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;

    let [nx, ny, nz] = grid.dims();
    let [sx, sy, sz] = grid.spacing();
    let mut meta = String::new();
    let _ = writeln!(meta, "dims {nx} {ny} {nz}");
    let _ = writeln!(meta, "spacing {sx} {sy} {sz}");
    let _ = writeln!(meta, "kind {kind}");
    let mpath = meta_path(path);
    fs::write(&mpath, meta).map_err(|e| Error::io(mpath, e))
}

fn parse_triple<V: FromStr>(path: &Path, key: &str, rest: &[&str]) -> Result<[V; 3]> {
    let bad = || Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: format!("`{key}` needs three numeric values"),
    };
    if rest.len() != 3 {
        return Err(bad());
    }
    let mut out = Vec::with_capacity(3);
    for tok in rest {
        out.push(tok.parse::<V>().map_err(|_| bad())?);
    }
    out.try_into().map_err(|_| bad())
}

fn load_raw(path: &Path) -> Result<Volume<f64>> {
    let mpath = meta_path(path);
    let meta = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let mut dims: Option<[usize; 3]> = None;
    let mut spacing: Option<[f64; 3]> = None;
    for line in meta.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.split_first() {
            None => continue,
            Some((&"dims", rest)) => dims = Some(parse_triple(&mpath, "dims", rest)?),
            Some((&"spacing", rest)) => spacing = Some(parse_triple(&mpath, "spacing", rest)?),
            Some((&"kind", [k])) if *k == "volume" || *k == "mask" => {}
            Some((key, _)) => {
                return Err(Error::MalformedHeader {
                    path: mpath,
                    reason: format!("unexpected line starting with `{key}`"),
                })
            }
        }
    }
    let missing = |what: &str| Error::MalformedHeader {
        path: mpath.clone(),
        reason: format!("missing `{what}`"),
    };
    let dims = dims.ok_or_else(|| missing("dims"))?;
    let spacing = spacing.ok_or_else(|| missing("spacing"))?;
    let grid = Grid::new(dims, spacing)?;

    let bytes = read(path)?;
    let expected = grid.len() * 4;
    if bytes.len() < expected {
        return Err(Error::ShortData {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    let data = bytes[..expected]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Volume::new(grid, data)
}

struct Endian(bool);

impl Endian {
    fn i16(&self, b: &[u8], at: usize) -> i16 {
        let a = [b[at], b[at + 1]];
        if self.0 {
            i16::from_le_bytes(a)
        } else {
            i16::from_be_bytes(a)
        }
    }

    fn i32(&self, b: &[u8], at: usize) -> i32 {
        let a = [b[at], b[at + 1], b[at + 2], b[at + 3]];
        if self.0 {
            i32::from_le_bytes(a)
        } else {
            i32::from_be_bytes(a)
        }
    }

    fn f32(&self, b: &[u8], at: usize) -> f32 {
        f32::from_bits(self.i32(b, at) as u32)
    }

    fn f64(&self, b: &[u8], at: usize) -> f64 {
        let mut a = [0u8; 8];
        a.copy_from_slice(&b[at..at + 8]);
        if self.0 {
            f64::from_le_bytes(a)
        } else {
            f64::from_be_bytes(a)
        }
    }
}

fn load_nifti(path: &Path) -> Result<Volume<f64>> {
    let bytes = read(path)?;
    let malformed = |reason: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < NIFTI_HEADER_LEN {
        return Err(malformed("file shorter than the 348-byte header"));
    }
    let le = Endian(true);
    let endian = if le.i32(&bytes, 0) == NIFTI_HEADER_LEN as i32 {
        le
    } else if Endian(false).i32(&bytes, 0) == NIFTI_HEADER_LEN as i32 {
        Endian(false)
    } else {
        return Err(malformed("sizeof_hdr is not 348"));
    };
    if &bytes[344..348] != b"n+1\0" {
        return Err(malformed("magic is not `n+1`"));
    }
    let ndim = endian.i16(&bytes, 40);
    if ndim != 3 {
        return Err(malformed(&format!("dim[0] = {ndim}, only 3-D volumes are accepted")));
    }
    let mut dims = [0usize; 3];
    let mut spacing = [0f64; 3];
    for a in 0..3 {
        let n = endian.i16(&bytes, 42 + 2 * a);
        if n <= 0 {
            return Err(malformed(&format!("dim[{}] = {n} is not positive", a + 1)));
        }
        dims[a] = n as usize;
        spacing[a] = f64::from(endian.f32(&bytes, 80 + 4 * a));
    }
    let grid = Grid::new(dims, spacing)?;

    let datatype = endian.i16(&bytes, 70);
    let width = match datatype {
        2 => 1,
        4 => 2,
        8 | 16 => 4,
        64 => 8,
        code => {
            return Err(Error::UnsupportedDatatype {
                path: path.to_path_buf(),
                code,
            })
        }
    };
    let vox_offset = endian.f32(&bytes, 108);
    if !(vox_offset.is_finite() && vox_offset >= NIFTI_HEADER_LEN as f32) {
        return Err(malformed("vox_offset precedes the end of the header"));
    }
    let offset = vox_offset as usize;
    let expected = grid.len() * width;
    let found = bytes.len().saturating_sub(offset);
    if found < expected {
        return Err(Error::ShortData {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }

    let slope = endian.f32(&bytes, 112);
    let inter = endian.f32(&bytes, 116);
    // scl_slope == 0 means "no scaling" per the NIfTI-1 convention.
    let (slope, inter) = if slope != 0.0 && slope.is_finite() {
        (f64::from(slope), if inter.is_finite() { f64::from(inter) } else { 0.0 })
    } else {
        (1.0, 0.0)
    };

    let body = &bytes[offset..offset + expected];
    let data = (0..grid.len())
        .map(|i| {
            let at = i * width;
            let raw = match datatype {
                2 => f64::from(body[at]),
                4 => f64::from(endian.i16(body, at)),
                8 => f64::from(endian.i32(body, at)),
                16 => f64::from(endian.f32(body, at)),
                _ => endian.f64(body, at),
            };
            raw * slope + inter
        })
        .collect();
    Volume::new(grid, data)
}
