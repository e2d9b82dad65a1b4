//! Maximum-likelihood fit of the ordered-logit model.
//!
//! Damped Newton (Levenberg–Marquardt) on `θ = (β, μ_0, ln Δ_1, …)`, where
//! `μ_k = μ_0 + Σ_{j≤k} Δ_j`, so any θ gives ordered thresholds. Gradient and
//! Hessian are analytic in `(β, μ)` and pulled back through the
//! reparametrisation by the chain rule.

use super::{logistic, OrderedLogit, RatingScale, SyntheticRatingDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Stop once an accepted step improves the log-likelihood by less.
    pub tol: f64,
    pub beta_max: f64,
    pub mu_abs_max: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 500,
            tol: 1e-8,
            beta_max: 100.0,
            mu_abs_max: 1e4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport<T> {
    pub model: OrderedLogit<T>,
    pub log_likelihood: T,
    pub iterations: usize,
    /// Classes with no observations; their thresholds are weakly determined.
    pub empty_classes: Vec<usize>,
    /// Some parameter ended on a box bound (e.g. perfectly separated data).
    pub at_bound: bool,
    /// Counts order the classes perfectly, so no finite maximum exists; the
    /// slope is pinned at its bound with thresholds between the classes.
    pub separated: bool,
}

const BETA_MIN: f64 = 1e-8;
const GAP_MIN: f64 = 1e-6;

struct Bounds<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    fn new(m: usize, o: &FitOptions) -> Self {
        let mut lo = vec![T::of(BETA_MIN), T::of(-o.mu_abs_max)];
        let mut hi = vec![T::of(o.beta_max), T::of(o.mu_abs_max)];
        for _ in 2..m {
            lo.push(T::of(GAP_MIN.ln()));
            hi.push(T::of(o.mu_abs_max.ln()));
        }
        Bounds { lo, hi }
    }

    fn clamp(&self, theta: &mut [T]) {
        for (i, t) in theta.iter_mut().enumerate() {
            *t = t.max(self.lo[i]).min(self.hi[i]);
        }
    }

    fn touches(&self, theta: &[T]) -> bool {
        let eps = T::of(1e-9);
        theta.iter().enumerate().any(|(i, &t)| {
            let w = (self.hi[i] - self.lo[i]).abs().max(T::one());
            (t - self.lo[i]).abs() <= eps * w || (self.hi[i] - t).abs() <= eps * w
        })
    }
}

fn natural<T: Scalar>(theta: &[T]) -> (T, Vec<T>) {
    let mut mu = Vec::with_capacity(theta.len() - 1);
    let mut acc = theta[1];
    mu.push(acc);
    for &eta in &theta[2..] {
        acc = acc + eta.exp();
        mu.push(acc);
    }
    (theta[0], mu)
}

fn log_lik<T: Scalar>(obs: &[(T, usize)], beta: T, mu: &[T]) -> T {
    // the model constructor would reject coincident thresholds that can
    // appear transiently from exp underflow, so evaluate directly
    let m = mu.len() + 1;
    let floor = T::of(1e-300).max(T::min_positive_value());
    obs.iter().fold(T::zero(), |s, &(x, y)| {
        let bx = beta * x;
        let p = if y == 0 {
            logistic(mu[0] - bx)
        } else if y == m - 1 {
            logistic(bx - mu[m - 2])
        } else {
            let (a, b) = (mu[y] - bx, mu[y - 1] - bx);
            if a + b > T::zero() {
                logistic(-b) - logistic(-a)
            } else {
                logistic(a) - logistic(b)
            }
        };
        s + p.max(floor).ln()
    })
}

/// Gradient and Hessian of the log-likelihood in `φ = (β, μ_0, …, μ_{m-2})`.
fn derivatives<T: Scalar>(obs: &[(T, usize)], beta: T, mu: &[T]) -> (Vec<T>, Vec<Vec<T>>) {
    let m = mu.len() + 1;
    let mut g = vec![T::zero(); m];
    let mut h = vec![vec![T::zero(); m]; m];
    let floor = T::of(1e-300).max(T::min_positive_value());
    let dens = |z: T| {
        let f = logistic(z);
        f * (T::one() - f)
    };
    for &(x, y) in obs {
        let bx = beta * x;
        // d log P / da, d log P / db and second derivatives; a is the upper
        // cut (index y), b the lower one (index y-1)
        let (mut ga, mut gb, mut haa, mut hbb, mut hab) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        let has_a = y < m - 1;
        let has_b = y > 0;
        if has_a && !has_b {
            let a = mu[y] - bx;
            ga = logistic(-a);
            haa = -dens(a);
        } else if has_b && !has_a {
            let b = mu[y - 1] - bx;
            gb = -logistic(b);
            hbb = -dens(b);
        } else if has_a && has_b {
            let (a, b) = (mu[y] - bx, mu[y - 1] - bx);
            let p = if a + b > T::zero() {
                logistic(-b) - logistic(-a)
            } else {
                logistic(a) - logistic(b)
            }
            .max(floor);
            let two = T::of(2.0);
            let (fa, fb) = (dens(a), dens(b));
            ga = fa / p;
            gb = -fb / p;
            haa = fa * (T::one() - two * logistic(a)) / p - ga * ga;
            hbb = -fb * (T::one() - two * logistic(b)) / p - gb * gb;
            hab = -ga * gb;
        }
        // da/dβ = db/dβ = -x; da/dμ_y = 1; db/dμ_{y-1} = 1
        let mut terms: Vec<(usize, T, T)> = vec![(0, -x, -x)];
        if has_a {
            terms.push((1 + y, T::one(), T::zero()));
        }
        if has_b {
            terms.push((y, T::zero(), T::one()));
        }
        for &(i, ai, bi) in &terms {
            g[i] = g[i] + ga * ai + gb * bi;
            for &(k, ak, bk) in &terms {
                h[i][k] = h[i][k] + haa * ai * ak + hbb * bi * bk + hab * (ai * bk + bi * ak);
            }
        }
    }
    (g, h)
}

/// Pulls gradient and Hessian back to θ.
fn to_theta<T: Scalar>(theta: &[T], g: &[T], h: &[Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
    let m = theta.len();
    // J[r][c] = dφ_r / dθ_c
    let mut j = vec![vec![T::zero(); m]; m];
    j[0][0] = T::one();
    for k in 0..m - 1 {
        j[1 + k][1] = T::one();
        for c in 1..=k {
            j[1 + k][1 + c] = theta[1 + c].exp();
        }
    }
    let mut gt = vec![T::zero(); m];
    for c in 0..m {
        for r in 0..m {
            gt[c] = gt[c] + j[r][c] * g[r];
        }
    }
    let mut ht = vec![vec![T::zero(); m]; m];
    for a in 0..m {
        for b in 0..m {
            let mut s = T::zero();
            for r in 0..m {
                if j[r][a].is_zero() {
                    continue;
                }
                for q in 0..m {
                    s = s + j[r][a] * h[r][q] * j[q][b];
                }
            }
            ht[a][b] = s;
        }
    }
    // curvature of exp(η_c): d²μ_k/dη_c² = exp(η_c) for every k >= c
    for c in 1..m - 1 {
        let tail = (c..m - 1).fold(T::zero(), |s, k| s + g[1 + k]);
        ht[1 + c][1 + c] = ht[1 + c][1 + c] + theta[1 + c].exp() * tail;
    }
    (gt, ht)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &k| a[i][col].abs().partial_cmp(&a[k][col].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if !(a[piv][col].abs() > T::zero()) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] = a[r][c] - f * a[col][c];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s = (r + 1..n).fold(b[r], |s, c| s - a[r][c] * x[c]);
        x[r] = s / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn initial_theta<T: Scalar>(obs: &[(T, usize)], m: usize, bounds: &Bounds<T>) -> Vec<T> {
    let n = obs.len() as f64;
    let xs: Vec<f64> = obs.iter().map(|o| o.0.as_f64()).collect();
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let beta = (1.8 / sd).clamp(BETA_MIN * 10.0, 10.0);
    let mut counts = vec![0usize; m];
    for o in obs {
        counts[o.1] += 1;
    }
    let mut mu = Vec::with_capacity(m - 1);
    let mut cum = 0usize;
    for (j, &c) in counts.iter().enumerate().take(m - 1) {
        cum += c;
        let p = (cum as f64 / n).clamp(1e-3, 1.0 - 1e-3);
        let mut v = (p / (1.0 - p)).ln() + beta * mean;
        if j > 0 {
            v = v.max(mu[j - 1] + 1e-2);
        }
        mu.push(v);
    }
    let mut theta = vec![T::of(beta), T::of(mu[0])];
    for w in mu.windows(2) {
        theta.push(T::of((w[1] - w[0]).ln()));
    }
    bounds.clamp(&mut theta);
    theta
}

/// Count boundaries `c_0 < … < c_{m-2}` that split the classes without error,
/// if the data admit them.
fn separating_cuts<T: Scalar>(obs: &[(T, usize)], m: usize) -> Option<Vec<f64>> {
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for &(x, y) in obs {
        let x = x.as_f64();
        lo[y] = lo[y].min(x);
        hi[y] = hi[y].max(x);
    }
    let mut cuts = Vec::with_capacity(m - 1);
    for j in 0..m - 1 {
        let below = hi[..=j].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let above = lo[j + 1..].iter().copied().fold(f64::INFINITY, f64::min);
        if below >= above {
            return None;
        }
        cuts.push(match (below.is_finite(), above.is_finite()) {
            (true, true) => (below + above) / 2.0,
            (true, false) => below + 0.5,
            (false, true) => above - 0.5,
            (false, false) => return None,
        });
    }
    Some(cuts)
}

/// Maximum-likelihood fit on `(count, class)` pairs for an `m`-class model.
pub fn fit<T: Scalar>(
    obs: &[(T, usize)],
    m: usize,
    scale_name: &str,
    opts: &FitOptions,
) -> Result<FitReport<T>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {m}")));
    }
    if obs.is_empty() {
        return Err(Error::TooFewSamples(0));
    }
    let mut counts = vec![0usize; m];
    for &(x, y) in obs {
        if y >= m {
            return Err(Error::RatingOutOfRange { rating: y, classes: m });
        }
        if !x.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite count {x}")));
        }
        counts[y] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::NonIdentifiable("all ratings fall in one class".into()));
    }
    if obs.iter().all(|o| o.0 == obs[0].0) {
        return Err(Error::NonIdentifiable("counts have zero variance".into()));
    }

    let bounds = Bounds::<T>::new(m, opts);
    let empty_classes: Vec<usize> = counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(j, _)| j).collect();
    if let Some(cuts) = separating_cuts(obs, m) {
        let beta = T::of(opts.beta_max);
        let mut mu: Vec<T> = Vec::with_capacity(m - 1);
        for c in cuts {
            let v = beta * T::of(c);
            let v = match mu.last() {
                Some(&prev) if v <= prev => prev + T::of(GAP_MIN).max(prev.abs() * T::epsilon() * T::of(4.0)),
                _ => v,
            };
            mu.push(v);
        }
        let ll = log_lik(obs, beta, &mu);
        return Ok(FitReport {
            model: OrderedLogit::new(beta, mu, scale_name)?,
            log_likelihood: ll,
            iterations: 0,
            empty_classes,
            at_bound: true,
            separated: true,
        });
    }
    let mut theta = initial_theta(obs, m, &bounds);
    let (b, mu) = natural(&theta);
    let mut ll = log_lik(obs, b, &mu);
    let mut lambda = T::of(1e-3);
    let tol = T::of(opts.tol);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let (b, mu) = natural(&theta);
        let (g, h) = derivatives(obs, b, &mu);
        let (gt, ht) = to_theta(&theta, &g, &h);
        let mut accepted = false;
        // inner damping loop; each rejected trial raises lambda
        while lambda < T::of(1e16) {
            let mut a: Vec<Vec<T>> = ht.iter().map(|r| r.iter().map(|&v| -v).collect()).collect();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] = row[i] + lambda * row[i].abs().max(T::of(1e-8));
            }
            if let Some(step) = solve(a, gt.clone()) {
                let mut trial: Vec<T> = theta.iter().zip(&step).map(|(&t, &s)| t + s).collect();
                bounds.clamp(&mut trial);
                let (tb, tmu) = natural(&trial);
                let tll = log_lik(obs, tb, &tmu);
                if tll > ll {
                    let gain = tll - ll;
                    theta = trial;
                    ll = tll;
                    lambda = (lambda / T::of(10.0)).max(T::of(1e-12));
                    accepted = true;
                    if gain < tol {
                        converged = true;
                    }
                    break;
                }
            }
            lambda = lambda * T::of(10.0);
        }
        if !accepted {
            // no ascent direction left at any damping: stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged(iterations));
    }

    let (beta, mu) = natural(&theta);
    let at_bound = bounds.touches(&theta);
    let model = OrderedLogit::new(beta, mu, scale_name)?;
    Ok(FitReport {
        model,
        log_likelihood: ll,
        iterations,
        empty_classes,
        at_bound,
        separated: false,
    })
}

/// Fits `(npc, rc)` of a synthetic cohort against `scale`.
pub fn fit_dataset(data: &SyntheticRatingDataset, scale: &RatingScale) -> Result<FitReport<f64>> {
    fit(&data.observations(), scale.classes(), scale.name(), &FitOptions::default())
}
