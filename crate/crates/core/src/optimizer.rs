//! Search over the diversity-parallelism spectrum.
//!
//! The redundancy knob is the batch count `B`, feasible at every divisor of
//! `N`. A brute-force sweep over feasible `B` is the ground truth here; the
//! closed-form regime classifiers carry their analytic thresholds but every
//! report also includes the sweep argmin so disagreements stay visible.

use serde::Serialize;

use crate::analytics::{harmonic, pareto_cov_t, pareto_mean_t, sexp_cov_t, sexp_mean_t};
use crate::assignment::balanced_plan;
use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};
use crate::sim_engine::{simulate, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mean,
    Cov,
}

#[derive(Debug, Clone)]
pub enum Method {
    Analytic,
    Simulate(SimConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FullDiversity,
    Interior,
    FullParallelism,
}

/// One evaluated operating point; `value` is `None` when the metric has no
/// finite value there (infinite Pareto moments).
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub b: usize,
    pub redundancy: f64,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RedundancySweep {
    pub n: usize,
    pub metric: Metric,
    pub rows: Vec<SweepRow>,
    pub argmin_b: usize,
    pub regime: Regime,
}

impl RedundancySweep {
    pub fn argmin_value(&self) -> f64 {
        self.rows
            .iter()
            .find(|r| r.b == self.argmin_b)
            .and_then(|r| r.value)
            .expect("argmin row holds a finite value")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("B,redundancy,metric,is_argmin\n");
        for row in &self.rows {
            let value = row.value.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.b,
                row.redundancy,
                value,
                row.b == self.argmin_b
            ));
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// All feasible batch counts: the divisors of `N`, ascending.
pub fn feasible_b(n: usize) -> Result<Vec<usize>> {
    if n < 1 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    Ok((1..=n).filter(|b| n % b == 0).collect())
}

fn regime_of_argmin(n: usize, argmin_b: usize) -> Regime {
    if argmin_b == 1 {
        Regime::FullDiversity
    } else if argmin_b == n {
        Regime::FullParallelism
    } else {
        Regime::Interior
    }
}

fn analytic_value(n: usize, b: usize, dist: &ServiceDistribution, metric: Metric) -> Result<Option<f64>> {
    let result = match (dist, metric) {
        (ServiceDistribution::Exp { mu }, Metric::Mean) => sexp_mean_t(n, b, 0.0, *mu),
        (ServiceDistribution::Exp { mu }, Metric::Cov) => sexp_cov_t(n, b, 0.0, *mu),
        (ServiceDistribution::SExp { delta, mu }, Metric::Mean) => sexp_mean_t(n, b, *delta, *mu),
        (ServiceDistribution::SExp { delta, mu }, Metric::Cov) => sexp_cov_t(n, b, *delta, *mu),
        (ServiceDistribution::Pareto { sigma, alpha }, Metric::Mean) => {
            pareto_mean_t(n, b, *sigma, *alpha)
        }
        (ServiceDistribution::Pareto { alpha, .. }, Metric::Cov) => pareto_cov_t(n, b, *alpha),
        (ServiceDistribution::Empirical { .. }, _) => {
            return Err(Error::InvalidParameter(
                "no analytic formulas for an empirical distribution; use the simulate method"
                    .into(),
            ))
        }
    };
    match result {
        Ok(v) => Ok(Some(v)),
        Err(Error::InfiniteMoment { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Evaluates the metric at every feasible `B` and picks the argmin, ties
/// broken toward smaller `B` (more diversity).
pub fn sweep(
    n: usize,
    dist: &ServiceDistribution,
    metric: Metric,
    method: &Method,
) -> Result<RedundancySweep> {
    let divisors = feasible_b(n)?;
    let mut rows = Vec::with_capacity(divisors.len());
    for &b in &divisors {
        let value = match method {
            Method::Analytic => analytic_value(n, b, dist, metric)?,
            Method::Simulate(config) => {
                let plan = balanced_plan(n, b)?;
                let result = simulate(&plan, dist, config)?;
                match metric {
                    Metric::Mean => Some(result.mean),
                    Metric::Cov => result.cov,
                }
            }
        };
        rows.push(SweepRow { b, redundancy: n as f64 / b as f64, value });
    }
    let argmin_b = argmin_row(&rows)?;
    let regime = regime_of_argmin(n, argmin_b);
    Ok(RedundancySweep { n, metric, rows, argmin_b, regime })
}

/// Smallest `B` attaining the minimum finite value; rows are ascending in `B`
/// so a strict comparison gives the canonical tie-break regardless of how the
/// rows were produced.
fn argmin_row(rows: &[SweepRow]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for row in rows {
        if let Some(v) = row.value {
            match best {
                Some((_, bv)) if bv <= v => {}
                _ => best = Some((row.b, v)),
            }
        }
    }
    best.map(|(b, _)| b).ok_or_else(|| Error::InfiniteMoment {
        moment: "metric",
        reason: "no feasible B has a finite metric value".into(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanRegimeReport {
    pub n: usize,
    pub delta_mu: f64,
    /// Full diversity below this (1/N).
    pub t_diversity: f64,
    /// Full parallelism above this (H(N,1) - H(N/2,1)).
    pub t_parallelism: f64,
    pub label: Regime,
    /// Set for odd N, where N/2 is taken as floor(N/2).
    pub approximate: bool,
}

/// Mean-metric regime from the SExp closed-form thresholds.
pub fn sexp_regime_mean(n: usize, delta: f64, mu: f64) -> Result<MeanRegimeReport> {
    if n < 2 {
        return Err(Error::InvalidParameter("regime thresholds need N >= 2".into()));
    }
    if !(delta >= 0.0 && delta.is_finite()) || !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter("need delta >= 0 and mu > 0".into()));
    }
    let delta_mu = delta * mu;
    let t_diversity = 1.0 / n as f64;
    let t_parallelism = harmonic(n, 1).value - harmonic(n / 2, 1).value;
    let label = if delta_mu < t_diversity {
        Regime::FullDiversity
    } else if delta_mu > t_parallelism {
        Regime::FullParallelism
    } else {
        Regime::Interior
    };
    Ok(MeanRegimeReport {
        n,
        delta_mu,
        t_diversity,
        t_parallelism,
        label,
        approximate: n % 2 == 1 || n <= 4,
    })
}

/// Interior-regime shortcut: the divisor of `N` nearest the continuous
/// optimum `N*delta*mu`, ties toward smaller `B`.
pub fn sexp_fast_b(n: usize, delta: f64, mu: f64) -> Result<usize> {
    let divisors = feasible_b(n)?;
    let target = n as f64 * delta * mu;
    if !target.is_finite() {
        return Err(Error::InvalidParameter("N*delta*mu must be finite".into()));
    }
    let split = divisors.partition_point(|&d| (d as f64) < target);
    let candidates = [split.checked_sub(1), (split < divisors.len()).then_some(split)];
    let mut best: Option<(f64, usize)> = None;
    for d in candidates.into_iter().flatten().map(|i| divisors[i]) {
        let dist = (d as f64 - target).abs();
        match best {
            Some((bd, bb)) if bd < dist || (bd == dist && bb < d) => {}
            _ => best = Some((dist, d)),
        }
    }
    Ok(best.expect("divisor list is non-empty").1)
}

#[derive(Debug, Clone, Serialize)]
pub struct CovRegimeReport {
    pub n: usize,
    pub delta_mu: f64,
    /// Full parallelism below this: 3/((sqrt(5)-1)N).
    pub t_parallel: f64,
    /// Full diversity above this band edge.
    pub t_band_hi: f64,
    /// Switch point inside the band (N > 11 only):
    /// H(N,1)/(N*sqrt(H(N,2)) - 1).
    pub t_switch: Option<f64>,
    pub label_thresholds: Regime,
    pub sweep_argmin_b: usize,
    pub label_sweep: Regime,
    pub agree: bool,
}

/// CoV-metric regime: the closed-form SExp thresholds side by side with the
/// brute-force sweep argmin. The two can disagree; both are reported.
pub fn sexp_regime_cov(n: usize, delta: f64, mu: f64) -> Result<CovRegimeReport> {
    if n < 2 {
        return Err(Error::InvalidParameter("regime thresholds need N >= 2".into()));
    }
    if !(delta >= 0.0 && delta.is_finite()) || !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter("need delta >= 0 and mu > 0".into()));
    }
    let delta_mu = delta * mu;
    let nf = n as f64;
    let t_parallel = 3.0 / ((5.0f64.sqrt() - 1.0) * nf);
    let h_n1 = harmonic(n, 1).value;
    let h_n2 = harmonic(n, 2).value;
    let h_h1 = harmonic(n / 2, 1).value;
    let h_h2 = harmonic(n / 2, 2).value;
    let t_band_hi = (h_n1 * h_h2.sqrt() - h_h1 * h_n2.sqrt())
        / (2.0 * h_n2.sqrt() - h_h2.sqrt());
    let t_switch = (n > 11).then(|| h_n1 / (nf * h_n2.sqrt() - 1.0));

    let label_thresholds = if delta_mu < t_parallel {
        Regime::FullParallelism
    } else if delta_mu > t_band_hi {
        Regime::FullDiversity
    } else if let Some(c) = t_switch {
        if delta_mu < c {
            Regime::FullParallelism
        } else {
            Regime::FullDiversity
        }
    } else {
        // small N: the bound only places the optimum at one of the two
        // ends; settle it with the exact CoV at the endpoints
        if sexp_cov_t(n, 1, delta, mu)? <= sexp_cov_t(n, n, delta, mu)? {
            Regime::FullDiversity
        } else {
            Regime::FullParallelism
        }
    };

    let dist = if delta == 0.0 {
        ServiceDistribution::exp(mu)?
    } else {
        ServiceDistribution::sexp(delta, mu)?
    };
    let sw = sweep(n, &dist, Metric::Cov, &Method::Analytic)?;
    Ok(CovRegimeReport {
        n,
        delta_mu,
        t_parallel,
        t_band_hi,
        t_switch,
        label_thresholds,
        sweep_argmin_b: sw.argmin_b,
        label_sweep: sw.regime,
        agree: label_thresholds == sw.regime,
    })
}

/// Pareto shape threshold: above `alpha*`, full parallelism minimizes the
/// mean. Root of
/// (4a^2+(a-1)^2)/(2a(a-1)) - sqrt(pi) N^(-1/2a) 2^(1+1/2a) - 0.58 = 0
/// by bisection on (1+1e-6, 64] to absolute tolerance 1e-6.
pub fn pareto_alpha_star(n: usize) -> Result<f64> {
    if n <= 4 {
        return Err(Error::InvalidParameter("alpha* needs N > 4".into()));
    }
    let nf = n as f64;
    let f = |a: f64| -> f64 {
        (4.0 * a * a + (a - 1.0) * (a - 1.0)) / (2.0 * a * (a - 1.0))
            - std::f64::consts::PI.sqrt() * nf.powf(-0.5 / a) * 2.0f64.powf(1.0 + 0.5 / a)
            - 0.58
    };
    let mut lo = 1.0 + 1e-6;
    let mut hi = 64.0;
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return Err(Error::NoRoot { lo, hi });
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Serialize)]
pub struct ParetoCovReport {
    pub n: usize,
    pub alpha: f64,
    pub label: Regime,
    pub sweep_argmin_b: usize,
    /// Feasible B values whose CoV is infinite (N*alpha <= 2B), excluded
    /// from the argmin.
    pub infinite_variance_b: Vec<usize>,
    pub agree: bool,
}

/// Pareto CoV regime: the closed-form analysis says full diversity
/// outright; the sweep
/// (restricted to finite-variance rows) verifies it.
pub fn pareto_regime_cov(n: usize, sigma: f64, alpha: f64) -> Result<ParetoCovReport> {
    // guard at B=1: the whole spectrum is infinite-variance otherwise
    if n as f64 * alpha <= 2.0 {
        return Err(Error::InfiniteMoment {
            moment: "variance",
            reason: format!("need N*alpha > 2, got {}", n as f64 * alpha),
        });
    }
    let dist = ServiceDistribution::pareto(sigma, alpha)?;
    let sw = sweep(n, &dist, Metric::Cov, &Method::Analytic)?;
    let infinite_variance_b =
        sw.rows.iter().filter(|r| r.value.is_none()).map(|r| r.b).collect();
    Ok(ParetoCovReport {
        n,
        alpha,
        label: Regime::FullDiversity,
        sweep_argmin_b: sw.argmin_b,
        infinite_variance_b,
        agree: sw.argmin_b == 1,
    })
}
