//! Synthetic volumes of straight Gaussian-profile tubes with known geometry.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::components::{label_components_3d, ComponentSet};
use crate::error::{Error, Result};
use crate::ologit::RatingScale;
use crate::vesselness::Polarity;
use crate::volume::{Grid, Mask3D, Volume};

/// Placement gives up after this many rejected draws.
pub const MAX_PLACEMENT_FAILURES: usize = 10_000;

/// A straight tube with flat ends. Coordinates are in mm with voxel `i` at
/// `i * spacing`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tube {
    pub centre: [f64; 3],
    /// Unit axis direction.
    pub direction: [f64; 3],
    /// Radius at half maximum.
    pub radius: f64,
    pub length: f64,
}

impl Tube {
    pub fn new(centre: [f64; 3], direction: [f64; 3], radius: f64, length: f64) -> Result<Self> {
        let n = norm(direction);
        if !(n > 1e-12 && radius > 0.0 && length > 0.0) || centre.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tube needs a nonzero direction and positive radius and length, got {direction:?}, {radius}, {length}"
            )));
        }
        Ok(Tube {
            centre,
            direction: direction.map(|d| d / n),
            radius,
            length,
        })
    }

    /// Tube along z whose truth covers exactly `voxels` slices starting at
    /// index `z0`, for unit spacing.
    pub fn axial(x: f64, y: f64, z0: usize, voxels: usize, radius: f64) -> Self {
        let l = voxels as f64;
        Tube {
            centre: [x, y, z0 as f64 - 0.5 + l / 2.0],
            direction: [0.0, 0.0, 1.0],
            radius,
            length: l,
        }
    }

    pub fn start(&self) -> [f64; 3] {
        add(self.centre, scale(self.direction, -self.length / 2.0))
    }

    pub fn end(&self) -> [f64; 3] {
        add(self.centre, scale(self.direction, self.length / 2.0))
    }

    /// Standard deviation of the cross-section so that `radius` sits at half
    /// maximum.
    pub fn sigma(&self) -> f64 {
        self.radius / (2.0 * std::f64::consts::LN_2).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TubeLayout {
    Explicit(Vec<Tube>),
    Random {
        n: usize,
        radius_mm: (f64, f64),
        length_mm: (f64, f64),
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    /// Isotropic voxel size in mm.
    pub spacing: f64,
    pub layout: TubeLayout,
    pub background: f64,
    /// Peak tube intensity above (bright) or below (dark) the background.
    pub contrast: f64,
    pub polarity: Polarity,
    /// Standard deviation of additive Gaussian noise.
    pub noise_sigma: f64,
    /// Minimum distance between tube centrelines.
    pub min_separation_mm: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [64, 64, 64],
            spacing: 1.0,
            layout: TubeLayout::Random {
                n: 6,
                radius_mm: (0.8, 1.5),
                length_mm: (5.0, 20.0),
            },
            background: 500.0,
            contrast: 2000.0,
            polarity: Polarity::Bright,
            noise_sigma: 0.0,
            min_separation_mm: 4.0,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Phantom {
    pub volume: Volume<f64>,
    pub roi: Mask3D,
    /// Half-maximum voxelisation of the tubes, labelled.
    pub truth: ComponentSet,
    pub true_count: usize,
    pub tubes: Vec<Tube>,
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    a.map(|v| v * s)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Shortest distance between segments `p0..p1` and `q0..q1`.
pub fn segment_distance(p0: [f64; 3], p1: [f64; 3], q0: [f64; 3], q1: [f64; 3]) -> f64 {
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let (a, e, f) = (dot(d1, d1), dot(d2, d2), dot(d2, r));
    let eps = 1e-12;
    let (s, t);
    if a <= eps && e <= eps {
        return norm(r);
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d1, r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    norm(sub(add(p0, scale(d1, s)), add(q0, scale(d2, t))))
}

struct Placement {
    extent: [f64; 3],
    spacing: f64,
    min_sep: f64,
}

impl Placement {
    fn margin(&self, t: &Tube) -> f64 {
        2.0 * t.radius + 2.0 * self.spacing
    }

    fn inside(&self, t: &Tube) -> bool {
        let m = self.margin(t);
        [t.start(), t.end()]
            .iter()
            .all(|p| (0..3).all(|a| p[a] >= m && p[a] <= self.extent[a] - m))
    }

    /// Centreline gap needed so the half-maximum voxelisations cannot touch
    /// under 26-connectivity.
    fn required_gap(&self, a: &Tube, b: &Tube) -> f64 {
        self.min_sep.max(a.radius + b.radius + 3f64.sqrt() * self.spacing)
    }

    fn clear_of(&self, t: &Tube, others: &[Tube]) -> bool {
        others
            .iter()
            .all(|o| segment_distance(t.start(), t.end(), o.start(), o.end()) >= self.required_gap(t, o))
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

fn place_random(
    rng: &mut ChaCha8Rng,
    pl: &Placement,
    n: usize,
    radius: (f64, f64),
    length: (f64, f64),
) -> Result<Vec<Tube>> {
    let ok_range = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi;
    if !(ok_range(radius) && ok_range(length)) {
        return Err(Error::InvalidParameter(format!(
            "radius and length ranges must be positive and ordered, got {radius:?} and {length:?}"
        )));
    }
    let mut tubes = Vec::with_capacity(n);
    let mut failures = 0;
    while tubes.len() < n {
        let dir: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let r = uniform(rng, radius);
        let l = uniform(rng, length);
        let centre = [0, 1, 2].map(|a| rng.gen_range(0.0..=pl.extent[a]));
        let accepted = match Tube::new(centre, dir, r, l) {
            Ok(t) if pl.inside(&t) && pl.clear_of(&t, &tubes) => {
                tubes.push(t);
                true
            }
            _ => false,
        };
        if !accepted {
            failures += 1;
            if failures >= MAX_PLACEMENT_FAILURES {
                return Err(Error::PlacementFailed(failures));
            }
        }
    }
    Ok(tubes)
}

fn rasterise(grid: &Grid, tubes: &[Tube], spec: &PhantomSpec) -> (Vec<f64>, Vec<u8>) {
    let [nx, ny, nz] = grid.dims();
    let sp = spec.spacing;
    let sign = match spec.polarity {
        Polarity::Bright => 1.0,
        Polarity::Dark => -1.0,
    };
    let mut data = vec![spec.background; grid.len()];
    let mut truth = vec![0u8; grid.len()];
    for t in tubes {
        let sigma = t.sigma();
        let reach = 5.0 * sigma + sp;
        let (s, e) = (t.start(), t.end());
        let lo = |a: usize| ((s[a].min(e[a]) - reach) / sp).floor().max(0.0) as usize;
        let hi = |a: usize, n: usize| (((s[a].max(e[a]) + reach) / sp).ceil().max(0.0) as usize).min(n - 1);
        let two_s2 = 2.0 * sigma * sigma;
        let r2 = t.radius * t.radius;
        for z in lo(2)..=hi(2, nz) {
            for y in lo(1)..=hi(1, ny) {
                for x in lo(0)..=hi(0, nx) {
                    let p = [x as f64 * sp, y as f64 * sp, z as f64 * sp];
                    let v = sub(p, s);
                    let along = dot(v, t.direction);
                    if along < 0.0 || along > t.length {
                        continue;
                    }
                    let perp2 = (dot(v, v) - along * along).max(0.0);
                    let i = grid.index(x, y, z);
                    data[i] += sign * spec.contrast * (-perp2 / two_s2).exp();
                    if perp2 < r2 {
                        truth[i] = 1;
                    }
                }
            }
        }
    }
    (data, truth)
}

/// Draws (or takes) the tubes, renders them and labels the truth mask.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let grid = Grid::new(spec.dims, [spec.spacing; 3])?;
    if !(spec.contrast.is_finite() && spec.background.is_finite()) {
        return Err(Error::InvalidParameter("contrast and background must be finite".into()));
    }
    if !(spec.noise_sigma.is_finite() && spec.noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    let pl = Placement {
        extent: [0, 1, 2].map(|a| (spec.dims[a] - 1) as f64 * spec.spacing),
        spacing: spec.spacing,
        min_sep: spec.min_separation_mm,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tubes = match &spec.layout {
        TubeLayout::Explicit(tubes) => {
            for (k, t) in tubes.iter().enumerate() {
                if !pl.inside(t) || !pl.clear_of(t, &tubes[..k]) {
                    return Err(Error::InvalidParameter(format!(
                        "tube {k} is too close to the border or to another tube"
                    )));
                }
            }
            tubes.clone()
        }
        TubeLayout::Random { n, radius_mm, length_mm } => place_random(&mut rng, &pl, *n, *radius_mm, *length_mm)?,
    };

    let (mut data, truth) = rasterise(&grid, &tubes, spec);
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in &mut data {
            *v += noise.sample(&mut rng);
        }
    }
    let [nx, ny, nz] = spec.dims;
    let interior = |i: usize, n: usize| i >= 2 && i + 2 < n;
    let roi = Mask3D::from_fn(grid, |x, y, z| interior(x, nx) && interior(y, ny) && interior(z, nz));
    let truth = label_components_3d(&Mask3D::from_parts(grid, truth));
    Ok(Phantom {
        volume: Volume::new(grid, data)?,
        roi,
        truth,
        true_count: tubes.len(),
        tubes,
    })
}

/// Rating class a perfect rater would give `true_count`.
pub fn rate_phantom(true_count: u64, scale: &RatingScale) -> usize {
    scale.class_of(true_count)
}

/// Writes `tube_id,cx,cy,cz,dx,dy,dz,radius_mm,length_mm`.
pub fn write_truth_csv(tubes: &[Tube], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let err = |e: csv::Error| Error::parse(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["tube_id", "cx", "cy", "cz", "dx", "dy", "dz", "radius_mm", "length_mm"])
        .map_err(err)?;
    for (i, t) in tubes.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(t.centre.iter().chain(&t.direction).map(|v| v.to_string()));
        rec.push(t.radius.to_string());
        rec.push(t.length.to_string());
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
