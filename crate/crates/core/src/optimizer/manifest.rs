//! Cohort manifests: `id,t1_path,t2_path,roi_path,rating`.

use std::path::{Path, PathBuf};

use super::Case;
use crate::error::{Error, Result};
use crate::volume::{load_mask, load_volume, reslice_isotropic, reslice_mask, VolumeFormat};

fn resolve(base: &Path, p: &str) -> Option<PathBuf> {
    let p = p.trim();
    if p.is_empty() {
        return None;
    }
    let p = Path::new(p);
    Some(if p.is_absolute() { p.to_path_buf() } else { base.join(p) })
}

/// Reads every case, reslicing volumes and ROI to `spacing` mm. Relative
/// paths are taken from the manifest's directory; an empty path means the
/// modality is absent.
pub fn load_manifest(path: impl AsRef<Path>, spacing: f64) -> Result<Vec<Case>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    let err = |e: csv::Error| Error::parse(path, e.to_string());
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(err)?;
    let header = rdr.headers().map_err(err)?.clone();
    let want = ["id", "t1_path", "t2_path", "roi_path", "rating"];
    if header.iter().collect::<Vec<_>>() != want {
        return Err(Error::parse(path, format!("expected header `{}`", want.join(","))));
    }
    let mut cases = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(err)?;
        let id = rec[0].to_string();
        let load = || -> Result<Case> {
            let rating: usize = rec[4]
                .parse()
                .map_err(|_| Error::parse(path, format!("bad rating `{}`", &rec[4])))?;
            let vol = |p: Option<PathBuf>| -> Result<_> {
                p.map(|p| {
                    let v = load_volume(&p, VolumeFormat::from_path(&p))?;
                    reslice_isotropic(&v, spacing)
                })
                .transpose()
            };
            let t1 = vol(resolve(base, &rec[1]))?;
            let t2 = vol(resolve(base, &rec[2]))?;
            let roi_path = resolve(base, &rec[3]).ok_or_else(|| Error::parse(path, "missing roi_path"))?;
            let roi = reslice_mask(&load_mask(&roi_path, VolumeFormat::from_path(&roi_path))?, spacing)?;
            Case::new(id.clone(), t1, t2, roi, rating)
        };
        cases.push(load().map_err(|e| match e {
            e @ Error::Case { .. } => e,
            e => e.in_case(&id),
        })?);
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{save_mask, save_volume, Grid, Mask3D, Volume};

    #[test]
    fn loads_cases_and_names_failures() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new([6, 6, 6], [1.0; 3]).unwrap();
        save_volume(&Volume::filled(g, 3.0f64), dir.path().join("a_t2.raw")).unwrap();
        save_mask(&Mask3D::full(g), dir.path().join("a_roi.raw")).unwrap();
        let m = dir.path().join("m.csv");
        std::fs::write(&m, "id,t1_path,t2_path,roi_path,rating\na,,a_t2.raw,a_roi.raw,2\n").unwrap();
        let cases = load_manifest(&m, 1.0).unwrap();
        assert_eq!(cases.len(), 1);
        assert!(cases[0].t1.is_none() && cases[0].t2.is_some());
        assert_eq!(cases[0].rating, 2);

        std::fs::write(&m, "id,t1_path,t2_path,roi_path,rating\na,,a_t2.raw,a_roi.raw,2\nbob,,missing.raw,a_roi.raw,1\n").unwrap();
        let e = load_manifest(&m, 1.0).unwrap_err();
        assert!(matches!(&e, Error::Case { id, .. } if id == "bob"), "{e}");

        std::fs::write(&m, "id,t2,roi,rating\n").unwrap();
        assert!(load_manifest(&m, 1.0).is_err());
    }
}
