//! Spearman rank correlation.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation<T> {
    pub rho: T,
    /// Two-sided p-value from the t approximation, in `(0, 1]`.
    pub p_value: T,
    pub n: usize,
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn fractional_ranks<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![T::zero(); x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let mean = T::of((start + 1 + end) as f64 / 2.0);
        for &i in &order[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Option<T> {
    let n = T::of_usize(a.len());
    let ma = a.iter().fold(T::zero(), |s, &v| s + v) / n;
    let mb = b.iter().fold(T::zero(), |s, &v| s + v) / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab = sab + dx * dy;
        saa = saa + dx * dx;
        sbb = sbb + dy * dy;
    }
    if saa.is_zero() || sbb.is_zero() {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).max(-T::one()).min(T::one()))
}

fn check_inputs<T>(x: &[T], y: &[T]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::TooFewSamples(x.len()));
    }
    Ok(())
}

/// Spearman's ρ with average-rank ties and a t-approximation p-value.
pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<Correlation<T>> {
    check_inputs(x, y)?;
    let rho = pearson(&fractional_ranks(x), &fractional_ranks(y)).ok_or(Error::ZeroRankVariance)?;
    let n = x.len();
    let r = rho.as_f64();
    let p = if r.abs() >= 1.0 {
        f64::MIN_POSITIVE
    } else {
        let df = (n - 2) as f64;
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(f64::MIN_POSITIVE, 1.0)
    };
    Ok(Correlation {
        rho,
        p_value: T::of(p),
        n,
    })
}

/// Exact two-sided permutation p-value of Spearman's ρ, for `n <= 10`.
///
/// Counts the share of all `n!` pairings whose |ρ| reaches the observed one.
pub fn spearman_permutation_p<T: Scalar>(x: &[T], y: &[T]) -> Result<f64> {
    check_inputs(x, y)?;
    if x.len() > 10 {
        return Err(Error::InvalidParameter(format!(
            "exact permutation test supports n <= 10, got {}",
            x.len()
        )));
    }
    let rx: Vec<f64> = fractional_ranks(x).iter().map(|v| v.as_f64()).collect();
    let mut ry: Vec<f64> = fractional_ranks(y).iter().map(|v| v.as_f64()).collect();
    let observed = pearson(&rx, &ry).ok_or(Error::ZeroRankVariance)?.abs();
    let tol = 1e-12;

    // Heap's algorithm
    let n = ry.len();
    let mut c = vec![0usize; n];
    let (mut hits, mut total) = (0u64, 0u64);
    let mut tally = |ry: &[f64]| {
        total += 1;
        if pearson(&rx, ry).unwrap_or(0.0).abs() >= observed - tol {
            hits += 1;
        }
    };
    tally(&ry);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                ry.swap(0, i);
            } else {
                ry.swap(c[i], i);
            }
            tally(&ry);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}
