//! Frangi vesselness: per-scale measure, multiscale maximum, thresholding.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hessian::{eigen_symmetric_3x3, gaussian_second_derivatives, EigenTriple};
use crate::scalar::Scalar;
use crate::volume::{Mask3D, Volume};

/// Whether the filter looks for bright tubes on a dark background or the
/// reverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Polarity {
    #[default]
    Bright,
    Dark,
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bright" => Ok(Polarity::Bright),
            "dark" => Ok(Polarity::Dark),
            other => Err(Error::InvalidParameter(format!("unknown polarity `{other}`"))),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Bright => "bright",
            Polarity::Dark => "dark",
        })
    }
}

/// Vesselness configuration. Scales are in mm.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterParams {
    pub s_min: f64,
    pub s_max: f64,
    pub s_step: f64,
    /// Sensitivity to the plate/line ratio R_A.
    pub alpha: f64,
    /// Sensitivity to the blob ratio R_B.
    pub beta_f: f64,
    /// Sensitivity to second-order structureness S, in intensity units.
    pub c: f64,
    pub polarity: Polarity,
    pub threshold: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            s_min: 1.4,
            s_max: 3.2,
            s_step: 0.2,
            alpha: 0.5,
            beta_f: 0.5,
            c: 500.0,
            polarity: Polarity::Bright,
            threshold: 0.35,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.s_min) && pos(self.s_max) && self.s_min <= self.s_max) {
            return bad(format!(
                "need 0 < s_min <= s_max, got s_min = {}, s_max = {}",
                self.s_min, self.s_max
            ));
        }
        if !pos(self.s_step) {
            return bad(format!("s_step must be positive, got {}", self.s_step));
        }
        if !(pos(self.alpha) && pos(self.beta_f) && pos(self.c)) {
            return bad(format!(
                "alpha, beta_f and c must be positive, got {}, {}, {}",
                self.alpha, self.beta_f, self.c
            ));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        Ok(())
    }

    /// `s_min, s_min + s_step, ...` up to and including `s_max` when it
    /// falls on the lattice.
    pub fn scales(&self) -> Vec<f64> {
        scale_lattice(self.s_min, self.s_max, self.s_step)
    }
}

/// Rounds to ten decimals so lattice points like `0.2 + 3 * 0.2` print and
/// compare cleanly.
pub(crate) fn tidy(v: f64) -> f64 {
    (v * 1e10).round() / 1e10
}

pub(crate) fn scale_lattice(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let s = tidy(lo + k as f64 * step);
        if s > hi + 1e-9 * step.max(hi.abs()) {
            break;
        }
        out.push(s);
        k += 1;
    }
    if out.is_empty() {
        out.push(lo);
    }
    out
}

/// Frangi measure for one eigenvalue triple; always in `[0, 1]`.
pub fn vesselness_from_eigenvalues<T: Scalar>(
    e: &EigenTriple<T>,
    alpha: T,
    beta_f: T,
    c: T,
    polarity: Polarity,
) -> T {
    let EigenTriple { l1, l2, l3 } = *e;
    let zero = T::zero();
    let rejected = match polarity {
        Polarity::Bright => l2 >= zero || l3 >= zero,
        Polarity::Dark => l2 <= zero || l3 <= zero,
    };
    if rejected {
        return zero;
    }
    let two = T::of(2.0);
    let (a2, a3) = (l2.abs(), l3.abs());
    let ra = a2 / a3;
    let rb = l1.abs() / (a2 * a3).sqrt();
    let s2 = l1 * l1 + l2 * l2 + l3 * l3;
    let plate = T::one() - (-(ra * ra) / (two * alpha * alpha)).exp();
    let blob = (-(rb * rb) / (two * beta_f * beta_f)).exp();
    let structure = T::one() - (-s2 / (two * c * c)).exp();
    (plate * blob * structure).max(zero).min(T::one())
}

/// Vesselness at a single scale (mm).
pub fn vesselness_at_scale<T: Scalar>(
    vol: &Volume<T>,
    scale: f64,
    params: &FilterParams,
) -> Result<Volume<T>> {
    params.validate()?;
    let h = gaussian_second_derivatives(vol, scale)?;
    let (alpha, beta_f, c) = (T::of(params.alpha), T::of(params.beta_f), T::of(params.c));
    let polarity = params.polarity;
    let mut out = vec![T::zero(); h.len()];
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        let e = eigen_symmetric_3x3(&h.at(i));
        *o = vesselness_from_eigenvalues(&e, alpha, beta_f, c, polarity);
    });
    Ok(Volume::from_parts(*vol.grid(), out))
}

/// Pointwise maximum of `resp` into `acc`.
pub(crate) fn max_into<T: Scalar>(acc: &mut [T], resp: &[T]) {
    acc.iter_mut().zip(resp).for_each(|(a, &r)| {
        if r > *a {
            *a = r;
        }
    });
}

/// Maximum response over an explicit scale set.
pub fn vesselness_over_scales<T: Scalar>(
    vol: &Volume<T>,
    scales: &[f64],
    params: &FilterParams,
) -> Result<Volume<T>> {
    params.validate()?;
    let mut acc = vec![T::zero(); vol.grid().len()];
    for &s in scales {
        let r = vesselness_at_scale(vol, s, params)?;
        max_into(&mut acc, r.data());
    }
    Ok(Volume::from_parts(*vol.grid(), acc))
}

/// Maximum response over the scale lattice of `params`.
pub fn vesselness_multiscale<T: Scalar>(vol: &Volume<T>, params: &FilterParams) -> Result<Volume<T>> {
    params.validate()?;
    vesselness_over_scales(vol, &params.scales(), params)
}

/// Voxels with response strictly above `t` inside `roi`.
pub fn threshold_response<T: Scalar>(resp: &Volume<T>, roi: &Mask3D, t: f64) -> Result<Mask3D> {
    resp.grid().ensure_same(roi.grid())?;
    let t = T::of(t);
    let data = resp
        .data()
        .iter()
        .zip(roi.data())
        .map(|(&r, &m)| u8::from(m != 0 && r > t))
        .collect();
    Ok(Mask3D::from_parts(*resp.grid(), data))
}
