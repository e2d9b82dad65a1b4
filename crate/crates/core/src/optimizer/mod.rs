//! Segmentation pipeline per case and the rating likelihood it induces.

mod grid;
mod manifest;

use std::fmt;
use std::str::FromStr;

use crate::components::{count_pvs, filter_by_length, label_components_3d, PvsCounts};
use crate::error::{Error, Result};
use crate::ologit::{CountKind, OrderedLogit};
use crate::vesselness::{max_into, scale_lattice, threshold_response, vesselness_at_scale, FilterParams, Polarity};
use crate::volume::{Axis, Grid, Mask3D, Volume};

pub use grid::{export_surface, grid_search, grid_search_with, AxisRange, GridPoint, OptimizationResult, ParamAxis, ParamGrid};
pub use manifest::load_manifest;

/// One rated subject: co-registered volumes on a shared isotropic grid.
#[derive(Clone, Debug)]
pub struct Case {
    pub id: String,
    /// T1-weighted volume; tubes appear dark.
    pub t1: Option<Volume<f64>>,
    /// T2-weighted volume; tubes appear bright.
    pub t2: Option<Volume<f64>>,
    pub roi: Mask3D,
    pub rating: usize,
}

impl Case {
    pub fn new(
        id: impl Into<String>,
        t1: Option<Volume<f64>>,
        t2: Option<Volume<f64>>,
        roi: Mask3D,
        rating: usize,
    ) -> Result<Self> {
        let id = id.into();
        let check = || {
            if t1.is_none() && t2.is_none() {
                return Err(Error::NoModality);
            }
            for v in t1.iter().chain(&t2) {
                v.grid().ensure_same(roi.grid())?;
            }
            Ok(())
        };
        check().map_err(|e| e.in_case(&id))?;
        Ok(Case { id, t1, t2, roi, rating })
    }

    pub fn grid(&self) -> &Grid {
        self.roi.grid()
    }
}

/// How per-modality masks are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// Voxels accepted by every available modality.
    #[default]
    Intersection,
    /// Voxels accepted by any available modality.
    Union,
    T1Only,
    T2Only,
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "intersection" => Ok(FusionMode::Intersection),
            "union" => Ok(FusionMode::Union),
            "t1" | "t1_only" => Ok(FusionMode::T1Only),
            "t2" | "t2_only" => Ok(FusionMode::T2Only),
            other => Err(Error::InvalidParameter(format!("unknown fusion mode `{other}`"))),
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Intersection => "intersection",
            FusionMode::Union => "union",
            FusionMode::T1Only => "t1_only",
            FusionMode::T2Only => "t2_only",
        })
    }
}

/// The parameters the grid search tunes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentParams {
    pub s_min: f64,
    pub s_max: f64,
    pub t1: f64,
    pub t2: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            s_min: 1.4,
            s_max: 3.2,
            t1: 0.96,
            t2: 0.35,
        }
    }
}

/// Everything else about the pipeline, held fixed during a search.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub s_step: f64,
    pub alpha: f64,
    pub beta_f: f64,
    pub c: f64,
    pub fusion: FusionMode,
    pub min_length_mm: f64,
    pub max_length_mm: f64,
    pub axis: Axis,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            s_step: 0.2,
            alpha: 0.5,
            beta_f: 0.5,
            c: 500.0,
            fusion: FusionMode::Intersection,
            min_length_mm: 3.0,
            max_length_mm: 50.0,
            axis: Axis::Z,
        }
    }
}

impl PipelineConfig {
    pub(crate) fn filter_params(&self, s_min: f64, s_max: f64, polarity: Polarity, threshold: f64) -> FilterParams {
        FilterParams {
            s_min,
            s_max,
            s_step: self.s_step,
            alpha: self.alpha,
            beta_f: self.beta_f,
            c: self.c,
            polarity,
            threshold,
        }
    }

    fn validate(&self, p: &SegmentParams) -> Result<()> {
        for t in [p.t1, p.t2] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidParameter(format!("thresholds must lie in (0, 1), got {t}")));
            }
        }
        if !(self.min_length_mm >= 0.0 && self.min_length_mm <= self.max_length_mm) {
            return Err(Error::InvalidParameter(format!(
                "length gate {}..{} mm is empty",
                self.min_length_mm, self.max_length_mm
            )));
        }
        self.filter_params(p.s_min, p.s_max, Polarity::Bright, 0.5).validate()
    }
}

/// Output of [`segment_case`].
#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    /// Length-gated components on the case grid.
    pub mask: Mask3D,
    pub counts: PvsCounts,
}

impl Segmentation {
    pub fn count(&self, kind: CountKind) -> usize {
        match kind {
            CountKind::Slice => self.counts.slice_count,
            CountKind::Total => self.counts.total_count,
        }
    }
}

pub(crate) fn pick_count(counts: &PvsCounts, kind: CountKind) -> usize {
    match kind {
        CountKind::Slice => counts.slice_count,
        CountKind::Total => counts.total_count,
    }
}

/// Which modalities a fusion mode reads for this case.
pub(crate) fn modalities(case: &Case, fusion: FusionMode) -> Result<(bool, bool)> {
    let (h1, h2) = (case.t1.is_some(), case.t2.is_some());
    let used = match fusion {
        FusionMode::T1Only => (h1, false),
        FusionMode::T2Only => (false, h2),
        FusionMode::Intersection | FusionMode::Union => (h1, h2),
    };
    if !used.0 && !used.1 {
        return Err(Error::NoModality);
    }
    Ok(used)
}

/// Case restricted to its ROI bounding box plus a filter margin. Voxels in
/// the ROI see exactly the samples they would see on the full grid.
pub(crate) struct Cropped {
    pub full: Grid,
    pub lo: [usize; 3],
    pub t1: Option<Volume<f64>>,
    pub t2: Option<Volume<f64>>,
    pub roi: Mask3D,
}

pub(crate) fn crop_case(case: &Case, use_t1: bool, use_t2: bool, s_max: f64, s_step: f64) -> Result<Cropped> {
    let bb = case.roi.bounding_box().ok_or(Error::EmptyRoi)?;
    let full = *case.grid();
    let sp = full.spacing()[0];
    // kernels reach ceil(4 sigma) voxels; the largest lattice scale may sit
    // a rounding step above s_max
    let margin = (4.0 * (s_max + s_step * 1e-6) / sp).ceil() as usize + 1;
    let dims = full.dims();
    let lo = [0, 1, 2].map(|a| bb[a][0].saturating_sub(margin));
    let hi = [0, 1, 2].map(|a| (bb[a][1] + 1 + margin).min(dims[a]));
    let pick = |v: &Option<Volume<f64>>, used: bool| -> Result<Option<Volume<f64>>> {
        match v {
            Some(v) if used => Ok(Some(v.crop(lo, hi)?)),
            _ => Ok(None),
        }
    };
    Ok(Cropped {
        full,
        lo,
        t1: pick(&case.t1, use_t1)?,
        t2: pick(&case.t2, use_t2)?,
        roi: case.roi.crop(lo, hi)?,
    })
}

pub(crate) fn fuse(m1: Option<Mask3D>, m2: Option<Mask3D>, fusion: FusionMode) -> Result<Mask3D> {
    match (m1, m2) {
        (Some(a), Some(b)) => match fusion {
            FusionMode::Union => a.union(&b),
            _ => a.intersect(&b),
        },
        (Some(a), None) | (None, Some(a)) => Ok(a),
        (None, None) => Err(Error::NoModality),
    }
}

/// Labels, gates and counts a fused mask on the cropped grid.
pub(crate) fn gate_and_count(fused: &Mask3D, c: &Cropped, cfg: &PipelineConfig) -> Result<(crate::components::ComponentSet, PvsCounts)> {
    let cs = filter_by_length(&label_components_3d(fused), cfg.min_length_mm, cfg.max_length_mm);
    let mut counts = count_pvs(&cs, &c.roi, cfg.axis)?;
    counts.selected_slice = if cs.is_empty() { 0 } else { counts.selected_slice + c.lo[cfg.axis.index()] };
    Ok((cs, counts))
}

/// Multiscale vesselness of one cropped modality over `scales`.
pub(crate) fn response(vol: &Volume<f64>, scales: &[f64], fp: &FilterParams) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; vol.grid().len()];
    for &s in scales {
        max_into(&mut acc, vesselness_at_scale(vol, s, fp)?.data());
    }
    Ok(acc)
}

fn uncrop(mask: &Mask3D, c: &Cropped) -> Mask3D {
    let mut data = vec![0u8; c.full.len()];
    let [nx, ny, nz] = mask.dims();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.get(x, y, z) {
                    data[c.full.index(x + c.lo[0], y + c.lo[1], z + c.lo[2])] = 1;
                }
            }
        }
    }
    Mask3D::from_parts(c.full, data)
}

/// Filters each modality the fusion mode reads, thresholds, fuses, gates
/// components by length and counts them.
pub fn segment_case(case: &Case, params: &SegmentParams, cfg: &PipelineConfig) -> Result<Segmentation> {
    let run = || -> Result<Segmentation> {
        cfg.validate(params)?;
        let (u1, u2) = modalities(case, cfg.fusion)?;
        let c = crop_case(case, u1, u2, params.s_max, cfg.s_step)?;
        let scales = scale_lattice(params.s_min, params.s_max, cfg.s_step);
        let mask_of = |v: &Option<Volume<f64>>, pol: Polarity, t: f64| -> Result<Option<Mask3D>> {
            let Some(v) = v else { return Ok(None) };
            let fp = cfg.filter_params(params.s_min, params.s_max, pol, t);
            let r = Volume::from_parts(*v.grid(), response(v, &scales, &fp)?);
            Ok(Some(threshold_response(&r, &c.roi, t)?))
        };
        let m1 = mask_of(&c.t1, Polarity::Dark, params.t1)?;
        let m2 = mask_of(&c.t2, Polarity::Bright, params.t2)?;
        let fused = fuse(m1, m2, cfg.fusion)?;
        let (cs, counts) = gate_and_count(&fused, &c, cfg)?;
        Ok(Segmentation {
            mask: uncrop(&cs.to_mask(), &c),
            counts,
        })
    };
    run().map_err(|e| e.in_case(&case.id))
}

/// Σ log P(rating | count) over the cohort, counting as `kind` prescribes.
pub fn objective(
    cases: &[Case],
    model: &OrderedLogit<f64>,
    params: &SegmentParams,
    cfg: &PipelineConfig,
    kind: CountKind,
) -> Result<f64> {
    let mut total = 0.0;
    for case in cases {
        let seg = segment_case(case, params, cfg)?;
        let obs = [(seg.count(kind) as f64, case.rating)];
        total += model.log_likelihood(&obs).map_err(|e| e.in_case(&case.id))?;
    }
    Ok(total)
}
