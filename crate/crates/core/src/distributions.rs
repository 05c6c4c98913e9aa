//! Task service-time distributions.
//!
//! The four supported families are exponential, shifted-exponential, Pareto
//! and empirical (a stored sample list, resampled bootstrap-style). The
//! parametric families are closed under scaling by a positive constant and
//! under minimum-of-i.i.d., which is what makes closed-form job-time
//! analysis possible for balanced plans.

use rand::Rng;

use crate::error::{Error, Result};

/// A task service-time law.
///
/// Construct through [`ServiceDistribution::exp`], [`ServiceDistribution::sexp`],
/// [`ServiceDistribution::pareto`] or [`ServiceDistribution::empirical`], which
/// validate parameters. `Empirical` keeps its samples sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceDistribution {
    /// Exponential with rate `mu > 0`.
    Exp { mu: f64 },
    /// Shifted exponential with shift `delta >= 0` and rate `mu > 0`.
    SExp { delta: f64, mu: f64 },
    /// Pareto with scale `sigma > 0` and shape `alpha > 0`.
    ///
    /// `alpha <= 1` is constructible (trace fits can land there) but moment
    /// queries return an infinite-moment error.
    Pareto { sigma: f64, alpha: f64 },
    /// Empirical sample list, sorted, non-empty, all values finite and `>= 0`.
    Empirical { samples: Vec<f64> },
}

impl ServiceDistribution {
    pub fn exp(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("Exp rate mu must be positive, got {mu}")));
        }
        Ok(Self::Exp { mu })
    }

    pub fn sexp(delta: f64, mu: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "SExp shift delta must be non-negative, got {delta}"
            )));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("SExp rate mu must be positive, got {mu}")));
        }
        Ok(Self::SExp { delta, mu })
    }

    pub fn pareto(sigma: f64, alpha: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Pareto scale sigma must be positive, got {sigma}"
            )));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Pareto shape alpha must be positive, got {alpha}"
            )));
        }
        Ok(Self::Pareto { sigma, alpha })
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("empirical distribution needs samples".into()));
        }
        if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter(
                "empirical samples must be finite and non-negative".into(),
            ));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self::Empirical { samples })
    }

    /// Pr{tau > x}.
    pub fn ccdf(&self, x: f64) -> f64 {
        match self {
            Self::Exp { mu } => {
                if x < 0.0 {
                    1.0
                } else {
                    (-mu * x).exp()
                }
            }
            Self::SExp { delta, mu } => {
                if x < *delta {
                    1.0
                } else {
                    (-mu * (x - delta)).exp()
                }
            }
            Self::Pareto { sigma, alpha } => {
                if x < *sigma {
                    1.0
                } else {
                    (x / sigma).powf(-alpha)
                }
            }
            Self::Empirical { samples } => {
                let above = samples.len() - samples.partition_point(|s| *s <= x);
                above as f64 / samples.len() as f64
            }
        }
    }

    /// The value `x` with `ccdf(x) = u`, for `u` in `(0, 1]`.
    ///
    /// Only the parametric families have a closed inverse; empirical
    /// distributions sample by bootstrap instead.
    pub fn inverse_ccdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::InvalidParameter(format!("inverse_ccdf needs u in (0,1], got {u}")));
        }
        match self {
            Self::Exp { mu } => Ok(-u.ln() / mu),
            Self::SExp { delta, mu } => Ok(delta - u.ln() / mu),
            Self::Pareto { sigma, alpha } => Ok(sigma * u.powf(-1.0 / alpha)),
            Self::Empirical { .. } => Err(Error::NoClosedForm("empirical inverse CCDF".into())),
        }
    }

    /// One draw. Parametric families use inverse-transform sampling so that a
    /// fixed seed gives a fixed draw sequence; empirical draws a stored sample
    /// uniformly at random (bootstrap).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Empirical { samples } => samples[rng.random_range(0..samples.len())],
            parametric => {
                // 1 - U in (0, 1]: keeps ln(u) finite.
                let u = 1.0 - rng.random::<f64>();
                parametric.inverse_ccdf(u).expect("parametric inverse is total on (0,1]")
            }
        }
    }

    /// The law of `c * tau` for `c > 0`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("scale factor must be positive, got {c}")));
        }
        Ok(match self {
            Self::Exp { mu } => Self::Exp { mu: mu / c },
            Self::SExp { delta, mu } => Self::SExp { delta: delta * c, mu: mu / c },
            Self::Pareto { sigma, alpha } => Self::Pareto { sigma: sigma * c, alpha: *alpha },
            Self::Empirical { samples } => {
                Self::Empirical { samples: samples.iter().map(|x| x * c).collect() }
            }
        })
    }

    /// The law of the minimum of `k` i.i.d. copies.
    pub fn min_of_iid(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("min_of_iid needs k >= 1".into()));
        }
        let k = k as f64;
        Ok(match self {
            Self::Exp { mu } => Self::Exp { mu: mu * k },
            Self::SExp { delta, mu } => Self::SExp { delta: *delta, mu: mu * k },
            Self::Pareto { sigma, alpha } => Self::Pareto { sigma: *sigma, alpha: alpha * k },
            Self::Empirical { .. } => {
                return Err(Error::NoClosedForm("minimum of i.i.d. empirical draws".into()))
            }
        })
    }

    pub fn mean(&self) -> Result<f64> {
        match self {
            Self::Exp { mu } => Ok(1.0 / mu),
            Self::SExp { delta, mu } => Ok(delta + 1.0 / mu),
            Self::Pareto { sigma, alpha } => {
                if *alpha <= 1.0 {
                    Err(Error::InfiniteMoment {
                        moment: "mean",
                        reason: format!("Pareto shape alpha={alpha} <= 1"),
                    })
                } else {
                    Ok(alpha * sigma / (alpha - 1.0))
                }
            }
            Self::Empirical { samples } => {
                Ok(samples.iter().sum::<f64>() / samples.len() as f64)
            }
        }
    }

    pub fn variance(&self) -> Result<f64> {
        match self {
            Self::Exp { mu } => Ok(1.0 / (mu * mu)),
            Self::SExp { mu, .. } => Ok(1.0 / (mu * mu)),
            Self::Pareto { sigma, alpha } => {
                if *alpha <= 2.0 {
                    Err(Error::InfiniteMoment {
                        moment: "variance",
                        reason: format!("Pareto shape alpha={alpha} <= 2"),
                    })
                } else {
                    Ok(sigma * sigma * alpha / ((alpha - 1.0) * (alpha - 1.0) * (alpha - 2.0)))
                }
            }
            Self::Empirical { samples } => {
                let n = samples.len() as f64;
                let mean = samples.iter().sum::<f64>() / n;
                Ok(samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
            }
        }
    }
}

/// Moment fit of a shifted exponential: shift = sample minimum, rate =
/// 1 / (mean - shift).
pub fn fit_sexp(samples: &[f64]) -> Result<ServiceDistribution> {
    let (min, mean) = fit_prep(samples)?;
    ServiceDistribution::sexp(min, 1.0 / (mean - min))
}

/// Pareto MLE with the scale pinned at the sample minimum.
pub fn fit_pareto(samples: &[f64]) -> Result<ServiceDistribution> {
    let (min, _) = fit_prep(samples)?;
    if min <= 0.0 {
        return Err(Error::InvalidParameter("Pareto fit needs strictly positive samples".into()));
    }
    let log_sum: f64 = samples.iter().map(|x| (x / min).ln()).sum();
    ServiceDistribution::pareto(min, samples.len() as f64 / log_sum)
}

fn fit_prep(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidParameter("fit samples must be finite and non-negative".into()));
    }
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    if mean == min {
        return Err(Error::DegenerateSamples("all samples equal".into()));
    }
    Ok((min, mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum TailLabel {
    Heavy,
    Exponential,
}

/// Tail-shape verdict with the goodness-of-fit scores behind it.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TailClassification {
    pub label: TailLabel,
    /// R-squared of the line fit to (ln x, ln CCDF): high for power-law tails.
    pub r2_log_log: f64,
    /// R-squared of the line fit to (x, ln CCDF): high for exponential tails.
    pub r2_semi_log: f64,
}

/// Classifies a sample's upper tail as heavy (power-law) or exponential.
///
/// The empirical CCDF is evaluated at the unique sample values above the
/// median; a straight line decaying in log-log scale means heavy tail, in
/// semi-log scale exponential tail. The better R-squared wins and both
/// scores are reported.
pub fn classify_tail(samples: &[f64]) -> Result<TailClassification> {
    const MIN_SAMPLES: usize = 50;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: samples.len() });
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    if sorted.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("samples must be finite".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];

    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let ccdf = (sorted.len() - j) as f64 / n;
        if x >= median && x > 0.0 && ccdf > 0.0 {
            points.push((x, ccdf.ln()));
        }
        i = j;
    }
    if points.len() < 3 {
        return Err(Error::DegenerateSamples(
            "not enough distinct upper-tail points to fit".into(),
        ));
    }

    let r2_log_log = line_fit_r2(points.iter().map(|(x, y)| (x.ln(), *y)));
    let r2_semi_log = line_fit_r2(points.iter().copied());
    let label = if r2_log_log >= r2_semi_log { TailLabel::Heavy } else { TailLabel::Exponential };
    Ok(TailClassification { label, r2_log_log, r2_semi_log })
}

/// R-squared of the least-squares line through the points.
fn line_fit_r2(points: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let n = points.clone().count() as f64;
    let sx: f64 = points.clone().map(|(x, _)| x).sum();
    let sy: f64 = points.clone().map(|(_, y)| y).sum();
    let mx = sx / n;
    let my = sy / n;
    let sxx: f64 = points.clone().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = points.clone().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 =
        points.clone().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = points.map(|(_, y)| (y - my) * (y - my)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}
