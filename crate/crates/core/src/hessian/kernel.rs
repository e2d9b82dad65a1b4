//! Sampled Gaussian derivative kernels and separable 1-D passes.
//!
//! Kernels are applied as correlations, `out[x] = Σ_i w[i] f[x + i]`, with
//! taps `i ∈ [-r, r]`, `r = ⌈4σ⌉`. Moments are normalised so that the
//! smoothing kernel preserves constants, the first-derivative kernel is exact
//! on linear ramps and the second-derivative kernel is exact on quadratics.

use rayon::prelude::*;

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub(crate) struct Kernel<T> {
    pub radius: usize,
    pub taps: Vec<T>,
}

#[derive(Clone, Debug)]
pub(crate) struct DerivativeKernels<T> {
    pub smooth: Kernel<T>,
    pub first: Kernel<T>,
    pub second: Kernel<T>,
}

impl<T: Scalar> DerivativeKernels<T> {
    /// `sigma` in voxel units.
    pub fn new(sigma: f64) -> Self {
        let radius = ((4.0 * sigma).ceil() as usize).max(1);
        let g: Vec<f64> = (-(radius as i64)..=radius as i64)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let pos = |k: usize| k as f64 - radius as f64;
        let moment = |p: i32| -> f64 { g.iter().enumerate().map(|(k, w)| pos(k).powi(p) * w).sum() };
        let (m0, m2, m4) = (moment(0), moment(2), moment(4));

        let smooth = g.iter().map(|w| w / m0).collect::<Vec<_>>();
        let first = g
            .iter()
            .enumerate()
            .map(|(k, w)| pos(k) * w / m2)
            .collect::<Vec<_>>();
        // a i² g - b g with Σ w = 0 and Σ i² w = 2
        let a = 2.0 / (m4 - m2 * m2 / m0);
        let b = a * m2 / m0;
        let second = g
            .iter()
            .enumerate()
            .map(|(k, w)| (a * pos(k) * pos(k) - b) * w)
            .collect::<Vec<_>>();

        let wrap = |taps: Vec<f64>| Kernel {
            radius,
            taps: taps.into_iter().map(T::of).collect(),
        };
        DerivativeKernels {
            smooth: wrap(smooth),
            first: wrap(first),
            second: wrap(second),
        }
    }
}

/// Whole-sample mirror reflection of `i` into `0..n`.
#[inline]
pub(crate) fn mirror(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    if m >= n as i64 {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// One separable pass along `axis` (0 = x, 1 = y, 2 = z).
pub(crate) fn correlate_axis<T: Scalar>(
    src: &[T],
    dims: [usize; 3],
    axis: usize,
    kernel: &Kernel<T>,
) -> Vec<T> {
    let [nx, ny, nz] = dims;
    let r = kernel.radius as i64;
    let mut out = vec![T::zero(); src.len()];
    match axis {
        0 => {
            out.par_chunks_mut(nx)
                .zip(src.par_chunks(nx))
                .for_each_init(
                    || Vec::with_capacity(nx + 2 * kernel.radius),
                    |buf, (o, line)| {
                        buf.clear();
                        buf.extend((-r..nx as i64 + r).map(|i| line[mirror(i, nx)]));
                        for (x, ox) in o.iter_mut().enumerate() {
                            let window = &buf[x..x + kernel.taps.len()];
                            *ox = window
                                .iter()
                                .zip(&kernel.taps)
                                .fold(T::zero(), |acc, (&f, &w)| acc + f * w);
                        }
                    },
                );
        }
        1 => {
            let plane = nx * ny;
            out.par_chunks_mut(plane)
                .zip(src.par_chunks(plane))
                .for_each(|(o, p)| {
                    for y in 0..ny {
                        let orow = &mut o[y * nx..(y + 1) * nx];
                        for (k, &w) in kernel.taps.iter().enumerate() {
                            let sy = mirror(y as i64 + k as i64 - r, ny);
                            let srow = &p[sy * nx..(sy + 1) * nx];
                            for (ov, &sv) in orow.iter_mut().zip(srow) {
                                *ov = *ov + w * sv;
                            }
                        }
                    }
                });
        }
        _ => {
            let plane = nx * ny;
            out.par_chunks_mut(plane).enumerate().for_each(|(z, o)| {
                for (k, &w) in kernel.taps.iter().enumerate() {
                    let sz = mirror(z as i64 + k as i64 - r, nz);
                    let sp = &src[sz * plane..(sz + 1) * plane];
                    for (ov, &sv) in o.iter_mut().zip(sp) {
                        *ov = *ov + w * sv;
                    }
                }
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(k: &Kernel<f64>) -> [f64; 3] {
        let r = k.radius as f64;
        let m = |p: i32| -> f64 {
            k.taps
                .iter()
                .enumerate()
                .map(|(i, w)| (i as f64 - r).powi(p) * w)
                .sum()
        };
        [m(0), m(1), m(2)]
    }

    #[test]
    fn kernel_moments() {
        for sigma in [0.2, 0.5, 1.0, 2.7, 4.0] {
            let k = DerivativeKernels::<f64>::new(sigma);
            assert_eq!(k.smooth.radius, ((4.0 * sigma).ceil() as usize).max(1));
            let [s0, s1, _] = moments(&k.smooth);
            assert!((s0 - 1.0).abs() < 1e-14 && s1.abs() < 1e-14);
            let [f0, f1, f2] = moments(&k.first);
            assert!(f0.abs() < 1e-14 && (f1 - 1.0).abs() < 1e-14 && f2.abs() < 1e-14);
            let [d0, d1, d2] = moments(&k.second);
            assert!(d0.abs() < 1e-12 && d1.abs() < 1e-12 && (d2 - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_sigma_degenerates_to_central_difference() {
        let k = DerivativeKernels::<f64>::new(0.2);
        assert_eq!(k.second.taps.len(), 3);
        assert!((k.second.taps[0] - 1.0).abs() < 1e-4);
        assert!((k.second.taps[1] + 2.0).abs() < 1e-4);
        assert!((k.first.taps[2] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn mirror_reflection() {
        let got: Vec<usize> = (-4..9).map(|i| mirror(i, 4)).collect();
        assert_eq!(got, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1, 2]);
        assert_eq!(mirror(-7, 1), 0);
    }
}
