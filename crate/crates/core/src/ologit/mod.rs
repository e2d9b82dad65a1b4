//! Ordered-logit (proportional odds) model linking a count to an ordinal
//! rating.
//!
//! A latent score `y* = βx + ε` with standard logistic `ε` is cut by ordered
//! thresholds `μ_0 < … < μ_{m-2}`, so
//! `P(y = j | x) = L(μ_j − βx) − L(μ_{j−1} − βx)` with `μ_{−1} = −∞` and
//! `μ_{m−1} = +∞`.

mod fit;
mod synthetic;

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use fit::{fit, fit_dataset, FitOptions, FitReport};
pub use synthetic::{
    generate_synthetic, simulate_ratings, LabelSource, SyntheticConfig, SyntheticRatingDataset,
    SyntheticSample,
};

/// Which count a rating protocol is based on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CountKind {
    /// Components in the single densest slice.
    #[default]
    Slice,
    /// Components in the whole region.
    Total,
}

impl FromStr for CountKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slice" => Ok(CountKind::Slice),
            "total" => Ok(CountKind::Total),
            other => Err(Error::InvalidParameter(format!("unknown count kind `{other}`"))),
        }
    }
}

impl fmt::Display for CountKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountKind::Slice => "slice",
            CountKind::Total => "total",
        })
    }
}

/// Ordinal rating scale defined by count intervals.
///
/// Class 0 covers counts `0..=upper[0]`, class `j` covers
/// `upper[j-1]+1..=upper[j]`, and the last class everything above.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatingScale {
    name: String,
    upper: Vec<u64>,
    count_kind: CountKind,
}

impl RatingScale {
    pub fn new(name: impl Into<String>, upper: Vec<u64>, count_kind: CountKind) -> Result<Self> {
        if upper.is_empty() || upper.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "class upper bounds must be non-empty and strictly increasing, got {upper:?}"
            )));
        }
        Ok(RatingScale {
            name: name.into(),
            upper,
            count_kind,
        })
    }

    /// 0 | 1–10 | 11–20 | 21–40 | >40, rated in the worst slice.
    pub fn wardlaw() -> Self {
        RatingScale {
            name: "wardlaw".into(),
            upper: vec![0, 10, 20, 40],
            count_kind: CountKind::Slice,
        }
    }

    /// Modified Patankar: 0 | 1–5 | 6–10 | 11–15 | >15, rated on the region total.
    pub fn patankar() -> Self {
        RatingScale {
            name: "patankar".into(),
            upper: vec![0, 5, 10, 15],
            count_kind: CountKind::Total,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "wardlaw" => Ok(Self::wardlaw()),
            "patankar" => Ok(Self::patankar()),
            other => Err(Error::InvalidParameter(format!("unknown rating scale `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> usize {
        self.upper.len() + 1
    }

    pub fn upper_bounds(&self) -> &[u64] {
        &self.upper
    }

    pub fn count_kind(&self) -> CountKind {
        self.count_kind
    }

    pub fn class_of(&self, count: u64) -> usize {
        self.upper.partition_point(|&u| u < count)
    }
}

/// Standard logistic CDF, evaluated without overflow.
#[inline]
pub fn logistic<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Fitted or published ordered-logit parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedLogit<T> {
    beta: T,
    mu: Vec<T>,
    scale: String,
}

impl<T: Scalar> OrderedLogit<T> {
    pub fn new(beta: T, mu: Vec<T>, scale: impl Into<String>) -> Result<Self> {
        if !(beta.is_finite() && beta > T::zero()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        if mu.is_empty()
            || mu.iter().any(|m| !m.is_finite())
            || mu.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(format!(
                "thresholds must be finite and strictly increasing, got {mu:?}"
            )));
        }
        Ok(OrderedLogit {
            beta,
            mu,
            scale: scale.into(),
        })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn scale_name(&self) -> &str {
        &self.scale
    }

    pub fn classes(&self) -> usize {
        self.mu.len() + 1
    }

    /// Class boundaries on the count axis, `μ_j / β`.
    pub fn boundary_ratios(&self) -> Vec<T> {
        self.mu.iter().map(|&m| m / self.beta).collect()
    }

    /// `P(y = j | x)` for every class.
    pub fn class_probabilities(&self, x: T) -> Vec<T> {
        let bx = self.beta * x;
        let mut out = Vec::with_capacity(self.classes());
        let mut prev = T::zero();
        for &m in &self.mu {
            let cdf = logistic(m - bx);
            out.push(cdf - prev);
            prev = cdf;
        }
        out.push(T::one() - prev);
        out
    }

    /// `P(y = class | x)` computed in whichever tail keeps precision.
    pub fn class_probability(&self, class: usize, x: T) -> T {
        let m = self.classes();
        let bx = self.beta * x;
        if m == 1 {
            return T::one();
        }
        if class == 0 {
            return logistic(self.mu[0] - bx);
        }
        if class == m - 1 {
            return logistic(bx - self.mu[m - 2]);
        }
        let a = self.mu[class] - bx;
        let b = self.mu[class - 1] - bx;
        if a + b > T::zero() {
            logistic(-b) - logistic(-a)
        } else {
            logistic(a) - logistic(b)
        }
    }

    /// Σ log P(y = rating | count), probabilities floored at 1e-300.
    pub fn log_likelihood(&self, observations: &[(T, usize)]) -> Result<T> {
        let floor = T::of(1e-300).max(T::min_positive_value());
        let mut sum = T::zero();
        for &(x, r) in observations {
            if r >= self.classes() {
                return Err(Error::RatingOutOfRange {
                    rating: r,
                    classes: self.classes(),
                });
            }
            sum = sum + self.class_probability(r, x).max(floor).ln();
        }
        Ok(sum)
    }

    /// Σ P(y = rating | count): the indicator-weighted probability sum, kept
    /// as a diagnostic next to the log-likelihood.
    pub fn probability_sum(&self, observations: &[(T, usize)]) -> Result<T> {
        let mut sum = T::zero();
        for &(x, r) in observations {
            if r >= self.classes() {
                return Err(Error::RatingOutOfRange {
                    rating: r,
                    classes: self.classes(),
                });
            }
            sum = sum + self.class_probability(r, x);
        }
        Ok(sum)
    }

    /// Line-oriented text form with 17 significant digits per value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "m {}", self.classes());
        let _ = writeln!(s, "beta {:.16e}", self.beta.as_f64());
        let mu: Vec<String> = self.mu.iter().map(|m| format!("{:.16e}", m.as_f64())).collect();
        let _ = writeln!(s, "mu {}", mu.join(" "));
        let _ = writeln!(s, "scale {}", self.scale);
        s
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::parse(origin, reason);
        let (mut m, mut beta, mut mu, mut scale) = (None, None, None, None);
        for line in text.lines() {
            let mut toks = line.split_whitespace();
            let Some(key) = toks.next() else { continue };
            let rest: Vec<&str> = toks.collect();
            let num = |t: &str| t.parse::<f64>().map_err(|_| bad(format!("bad number `{t}`")));
            match (key, rest.as_slice()) {
                ("m", [v]) => m = Some(v.parse::<usize>().map_err(|_| bad(format!("bad class count `{v}`")))?),
                ("beta", [v]) => beta = Some(num(v)?),
                ("mu", vs) => mu = Some(vs.iter().map(|v| num(v)).collect::<Result<Vec<_>>>()?),
                ("scale", [v]) => scale = Some(v.to_string()),
                _ => return Err(bad(format!("unexpected line `{line}`"))),
            }
        }
        let m = m.ok_or_else(|| bad("missing `m`".into()))?;
        let beta = beta.ok_or_else(|| bad("missing `beta`".into()))?;
        let mu = mu.ok_or_else(|| bad("missing `mu`".into()))?;
        if mu.len() + 1 != m {
            return Err(bad(format!("m = {m} but {} thresholds", mu.len())));
        }
        let scale = scale.unwrap_or_default();
        OrderedLogit::new(T::of(beta), mu.into_iter().map(T::of).collect(), scale)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}
