//! Exhaustive search over (s_min, s_max, t1, t2).

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use super::{crop_case, fuse, gate_and_count, modalities, pick_count, response, Case, Cropped, PipelineConfig, SegmentParams};
use crate::components::PvsCounts;
use crate::error::{Error, Result};
use crate::ologit::{CountKind, OrderedLogit};
use crate::vesselness::{max_into, scale_lattice, threshold_response, tidy, vesselness_at_scale, Polarity};
use crate::volume::{Mask3D, Volume};

/// Inclusive lattice `lo, lo + step, …, <= hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!("bad range {lo}..{hi} step {step}")));
        }
        Ok(AxisRange { lo, hi, step })
    }

    pub fn single(v: f64) -> Self {
        AxisRange { lo: v, hi: v, step: 1.0 }
    }

    pub fn values(&self) -> Vec<f64> {
        scale_lattice(self.lo, self.hi, self.step)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamGrid {
    pub s_min: AxisRange,
    pub s_max: AxisRange,
    pub t1: AxisRange,
    pub t2: AxisRange,
}

impl Default for ParamGrid {
    fn default() -> Self {
        ParamGrid {
            s_min: AxisRange { lo: 0.2, hi: 2.0, step: 0.2 },
            s_max: AxisRange { lo: 2.0, hi: 4.0, step: 0.2 },
            t1: AxisRange { lo: 0.90, hi: 0.99, step: 0.01 },
            t2: AxisRange { lo: 0.05, hi: 0.50, step: 0.05 },
        }
    }
}

impl ParamGrid {
    pub fn singleton(p: &SegmentParams) -> Self {
        ParamGrid {
            s_min: AxisRange::single(p.s_min),
            s_max: AxisRange::single(p.s_max),
            t1: AxisRange::single(p.t1),
            t2: AxisRange::single(p.t2),
        }
    }

    pub fn axis(&self, a: ParamAxis) -> &AxisRange {
        match a {
            ParamAxis::SMin => &self.s_min,
            ParamAxis::SMax => &self.s_max,
            ParamAxis::T1 => &self.t1,
            ParamAxis::T2 => &self.t2,
        }
    }

    /// Scale pairs with `s_min <= s_max`, lexicographic.
    pub fn scale_pairs(&self) -> Vec<(f64, f64)> {
        let maxes = self.s_max.values();
        self.s_min
            .values()
            .into_iter()
            .flat_map(|a| maxes.iter().filter(move |&&b| a <= b).map(move |&b| (a, b)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.scale_pairs().len() * self.t1.values().len() * self.t2.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parameter names as used in surface files and configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamAxis {
    SMin,
    SMax,
    T1,
    T2,
}

impl ParamAxis {
    fn get(self, p: &SegmentParams) -> f64 {
        match self {
            ParamAxis::SMin => p.s_min,
            ParamAxis::SMax => p.s_max,
            ParamAxis::T1 => p.t1,
            ParamAxis::T2 => p.t2,
        }
    }

    fn set(self, p: &mut SegmentParams, v: f64) {
        match self {
            ParamAxis::SMin => p.s_min = v,
            ParamAxis::SMax => p.s_max = v,
            ParamAxis::T1 => p.t1 = v,
            ParamAxis::T2 => p.t2 = v,
        }
    }
}

impl FromStr for ParamAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s_min" => Ok(ParamAxis::SMin),
            "s_max" => Ok(ParamAxis::SMax),
            "t1" => Ok(ParamAxis::T1),
            "t2" => Ok(ParamAxis::T2),
            other => Err(Error::UnknownAxis(other.to_string())),
        }
    }
}

impl fmt::Display for ParamAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamAxis::SMin => "s_min",
            ParamAxis::SMax => "s_max",
            ParamAxis::T1 => "t1",
            ParamAxis::T2 => "t2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub params: SegmentParams,
    pub logl: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub best: SegmentParams,
    pub best_logl: f64,
    /// Every evaluated point in lexicographic order.
    pub points: Vec<GridPoint>,
    /// `(id, rating, counts)` at the optimum, in cohort order.
    pub case_counts: Vec<(String, usize, PvsCounts)>,
    pub grid: ParamGrid,
    pub count_kind: CountKind,
}

/// Per-case state for the search: cropped volumes and, when caching,
/// per-scale responses keyed by scale.
struct Prepared {
    crop: Cropped,
    use_t1: bool,
    use_t2: bool,
    cache: Vec<(f64, Option<Vec<f64>>, Option<Vec<f64>>)>,
}

impl Prepared {
    fn range_max(&self, which: Polarity, scales: &[f64], cfg: &PipelineConfig, cached: bool) -> Result<Option<Volume<f64>>> {
        let (vol, used) = match which {
            Polarity::Dark => (&self.crop.t1, self.use_t1),
            Polarity::Bright => (&self.crop.t2, self.use_t2),
        };
        let Some(vol) = vol.as_ref().filter(|_| used) else { return Ok(None) };
        let data = if cached {
            let mut acc = vec![0.0; vol.grid().len()];
            for &s in scales {
                let entry = self.cache.iter().find(|e| e.0 == s).expect("scale cached");
                let r = match which {
                    Polarity::Dark => entry.1.as_ref(),
                    Polarity::Bright => entry.2.as_ref(),
                }
                .expect("modality cached");
                max_into(&mut acc, r);
            }
            acc
        } else {
            let fp = cfg.filter_params(scales[0], *scales.last().unwrap(), which, 0.5);
            response(vol, scales, &fp)?
        };
        Ok(Some(Volume::from_parts(*vol.grid(), data)))
    }
}

fn prepare(case: &Case, grid: &ParamGrid, cfg: &PipelineConfig, all_scales: &[f64], cached: bool) -> Result<Prepared> {
    let (u1, u2) = modalities(case, cfg.fusion)?;
    let s_top = all_scales.last().copied().unwrap_or(grid.s_max.hi);
    let crop = crop_case(case, u1, u2, s_top, cfg.s_step)?;
    let mut cache = Vec::new();
    if cached {
        for &s in all_scales {
            let one = |v: &Option<Volume<f64>>, pol: Polarity| -> Result<Option<Vec<f64>>> {
                match v {
                    Some(v) => {
                        let fp = cfg.filter_params(s, s, pol, 0.5);
                        Ok(Some(vesselness_at_scale(v, s, &fp)?.into_data()))
                    }
                    None => Ok(None),
                }
            };
            cache.push((s, one(&crop.t1, Polarity::Dark)?, one(&crop.t2, Polarity::Bright)?));
        }
    }
    Ok(Prepared {
        crop,
        use_t1: u1,
        use_t2: u2,
        cache,
    })
}

/// Grid search with the per-scale response cache enabled.
pub fn grid_search(
    cases: &[Case],
    model: &OrderedLogit<f64>,
    grid: &ParamGrid,
    kind: CountKind,
    cfg: &PipelineConfig,
) -> Result<OptimizationResult> {
    grid_search_with(cases, model, grid, kind, cfg, true)
}

/// Evaluates the cohort log-likelihood at every grid point. With `cached`,
/// single-scale responses are computed once per case and reused for every
/// scale pair; results are identical either way.
pub fn grid_search_with(
    cases: &[Case],
    model: &OrderedLogit<f64>,
    grid: &ParamGrid,
    kind: CountKind,
    cfg: &PipelineConfig,
    cached: bool,
) -> Result<OptimizationResult> {
    let pairs = grid.scale_pairs();
    let (t1s, t2s) = (grid.t1.values(), grid.t2.values());
    if pairs.is_empty() || t1s.is_empty() || t2s.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &(a, b) in &pairs {
        cfg.validate(&SegmentParams { s_min: a, s_max: b, t1: t1s[0], t2: t2s[0] })?;
    }
    for &t1 in &t1s {
        for &t2 in &t2s {
            cfg.validate(&SegmentParams { s_min: pairs[0].0, s_max: pairs[0].1, t1, t2 })?;
        }
    }
    for c in cases {
        if c.rating >= model.classes() {
            return Err(Error::RatingOutOfRange { rating: c.rating, classes: model.classes() }.in_case(&c.id));
        }
    }

    let mut all_scales: Vec<f64> = pairs
        .iter()
        .flat_map(|&(a, b)| scale_lattice(a, b, cfg.s_step))
        .collect();
    all_scales.sort_by(f64::total_cmp);
    all_scales.dedup();

    let prepared: Vec<Prepared> = cases
        .iter()
        .map(|c| prepare(c, grid, cfg, &all_scales, cached).map_err(|e| e.in_case(&c.id)))
        .collect::<Result<_>>()?;

    let per_pair = t1s.len() * t2s.len();
    let mut points = Vec::with_capacity(pairs.len() * per_pair);
    let mut best: Option<(usize, Vec<PvsCounts>)> = None;

    for &(s_min, s_max) in &pairs {
        let scales = scale_lattice(s_min, s_max, cfg.s_step);
        let mut logl = vec![0.0f64; per_pair];
        let mut counts: Vec<Vec<PvsCounts>> = vec![Vec::with_capacity(cases.len()); per_pair];
        for (case, prep) in cases.iter().zip(&prepared) {
            let eval = || -> Result<Vec<PvsCounts>> {
                let r1 = prep.range_max(Polarity::Dark, &scales, cfg, cached)?;
                let r2 = prep.range_max(Polarity::Bright, &scales, cfg, cached)?;
                let masks = |r: &Option<Volume<f64>>, ts: &[f64]| -> Result<Vec<Option<Mask3D>>> {
                    match r {
                        Some(r) => ts.par_iter().map(|&t| threshold_response(r, &prep.crop.roi, t).map(Some)).collect(),
                        None => Ok(vec![None]),
                    }
                };
                let m1 = masks(&r1, &t1s)?;
                let m2 = masks(&r2, &t2s)?;
                // distinct (t1, t2) mask pairs; an unused modality collapses
                // its axis to one entry
                let combos: Vec<(usize, usize)> = (0..m1.len()).flat_map(|i| (0..m2.len()).map(move |j| (i, j))).collect();
                let distinct: Vec<PvsCounts> = combos
                    .par_iter()
                    .map(|&(i, j)| {
                        let fused = fuse(m1[i].clone(), m2[j].clone(), cfg.fusion)?;
                        Ok(gate_and_count(&fused, &prep.crop, cfg)?.1)
                    })
                    .collect::<Result<_>>()?;
                Ok((0..t1s.len())
                    .flat_map(|i| (0..t2s.len()).map(move |j| (i, j)))
                    .map(|(i, j)| {
                        let (i, j) = (i.min(m1.len() - 1), j.min(m2.len() - 1));
                        distinct[i * m2.len() + j]
                    })
                    .collect())
            };
            let case_counts = eval().map_err(|e| e.in_case(&case.id))?;
            for (k, c) in case_counts.into_iter().enumerate() {
                let obs = [(pick_count(&c, kind) as f64, case.rating)];
                logl[k] += model.log_likelihood(&obs).map_err(|e| e.in_case(&case.id))?;
                counts[k].push(c);
            }
        }
        for (k, (&l, c)) in logl.iter().zip(counts).enumerate() {
            let params = SegmentParams { s_min, s_max, t1: t1s[k / t2s.len()], t2: t2s[k % t2s.len()] };
            let idx = points.len();
            points.push(GridPoint { params, logl: l });
            if best.as_ref().is_none_or(|(b, _)| l > points[*b].logl) {
                best = Some((idx, c));
            }
        }
    }

    let (bi, bc) = best.ok_or(Error::EmptyGrid)?;
    Ok(OptimizationResult {
        best: points[bi].params,
        best_logl: points[bi].logl,
        case_counts: cases.iter().zip(bc).map(|(c, k)| (c.id.clone(), c.rating, k)).collect(),
        points,
        grid: *grid,
        count_kind: kind,
    })
}

fn key(p: &SegmentParams) -> [u64; 4] {
    [p.s_min, p.s_max, p.t1, p.t2].map(|v| tidy(v).to_bits())
}

/// Writes the LogL slice through the optimum spanned by axes `a` and `b`;
/// other parameters stay at their best values. Pairs outside the evaluated
/// grid (`s_min > s_max`) get an empty `logl` cell.
pub fn export_surface(result: &OptimizationResult, a: &str, b: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (ax, bx): (ParamAxis, ParamAxis) = (a.parse()?, b.parse()?);
    if ax == bx {
        return Err(Error::InvalidParameter(format!("surface axes must differ, got `{a}` twice")));
    }
    let lookup: HashMap<[u64; 4], f64> = result.points.iter().map(|p| (key(&p.params), p.logl)).collect();
    let err = |e: csv::Error| Error::parse(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record([a, b, "logl"]).map_err(err)?;
    let bv = result.grid.axis(bx).values();
    for va in result.grid.axis(ax).values() {
        for &vb in &bv {
            let mut p = result.best;
            ax.set(&mut p, va);
            bx.set(&mut p, vb);
            let cell = lookup.get(&key(&p)).map(|l| l.to_string()).unwrap_or_default();
            w.write_record([ax.get(&p).to_string(), bx.get(&p).to_string(), cell]).map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
