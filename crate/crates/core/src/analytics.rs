//! Closed-form job compute time statistics for balanced non-overlapping
//! plans under the server-dependent scaling model.
//!
//! With batch size `N/B` and worker slowdown `tau`, the batch time at a
//! worker is `(N/B) * tau`; the batch completes at the fastest of its `N/B`
//! replicas and the job at the slowest batch. For shifted-exponential and
//! Pareto slowdowns both order statistics have closed forms; everything here
//! evaluates those. All Gamma ratios go through log space so large `B` does
//! not overflow.

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Generalized harmonic number `H_(n,r) = sum_{k=1}^{n} k^-r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicValue {
    pub n: usize,
    pub order: u32,
    pub value: f64,
}

/// Exact compensated summation; `r` must be 1 or 2.
pub fn harmonic(n: usize, r: u32) -> HarmonicValue {
    assert!(n >= 1, "harmonic needs n >= 1");
    assert!(r == 1 || r == 2, "harmonic order must be 1 or 2");
    // Neumaier-compensated sum, small terms first
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in (1..=n).rev() {
        let term = match r {
            1 => 1.0 / k as f64,
            _ => 1.0 / (k as f64 * k as f64),
        };
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    HarmonicValue { n, order: r, value: sum + comp }
}

fn h(n: usize, r: u32) -> f64 {
    harmonic(n, r).value
}

/// ln Gamma(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("log_gamma needs x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

fn check_feasible(n: usize, b: usize) -> Result<()> {
    if b == 0 || b > n || n % b != 0 {
        return Err(Error::InfeasibleBatchCount { n: n as usize, b: b as usize });
    }
    Ok(())
}

fn check_sexp(delta: f64, mu: f64) -> Result<()> {
    if !(delta >= 0.0) || !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shifted exponential needs delta >= 0 and mu > 0, got delta={delta}, mu={mu}"
        )));
    }
    Ok(())
}

/// `E[T] = N*delta/B + H_(B,1)/mu` for SExp(delta, mu) slowdowns.
pub fn sexp_mean_t(n: usize, b: usize, delta: f64, mu: f64) -> Result<f64> {
    check_feasible(n, b)?;
    check_sexp(delta, mu)?;
    Ok(n as f64 * delta / b as f64 + h(b, 1) / mu)
}

/// `CoV[T] = sqrt(H_(B,2)) / (N*delta*mu/B + H_(B,1))`.
pub fn sexp_cov_t(n: usize, b: usize, delta: f64, mu: f64) -> Result<f64> {
    check_feasible(n, b)?;
    check_sexp(delta, mu)?;
    Ok(h(b, 2).sqrt() / (n as f64 * delta * mu / b as f64 + h(b, 1)))
}

/// Continuous-B approximation `N*delta/B + (ln B + gamma)/mu`, whose
/// unconstrained minimizer sits at `B = N*delta*mu`.
pub fn sexp_mean_approx(n: usize, b: usize, delta: f64, mu: f64) -> Result<f64> {
    if b == 0 {
        return Err(Error::InvalidParameter("B must be positive".into()));
    }
    check_sexp(delta, mu)?;
    Ok(n as f64 * delta / b as f64 + ((b as f64).ln() + EULER_GAMMA) / mu)
}

fn check_pareto(sigma: f64, alpha: f64) -> Result<()> {
    if !(sigma > 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Pareto needs sigma > 0 and alpha > 0, got sigma={sigma}, alpha={alpha}"
        )));
    }
    Ok(())
}

/// `E[T] = (N*sigma/B) * Gamma(B+1)*Gamma(1 - B/(N*alpha)) / Gamma(B+1 - B/(N*alpha))`
/// for Pareto(sigma, alpha) slowdowns; requires `N*alpha > B` for a finite mean.
pub fn pareto_mean_t(n: usize, b: usize, sigma: f64, alpha: f64) -> Result<f64> {
    check_feasible(n, b)?;
    check_pareto(sigma, alpha)?;
    let r = b as f64 / (n as f64 * alpha);
    if r >= 1.0 {
        return Err(Error::InfiniteMoment {
            moment: "mean",
            reason: format!("N*alpha = {} <= B = {b}", n as f64 * alpha),
        });
    }
    let bf = b as f64;
    let log = log_gamma(bf + 1.0)? + log_gamma(1.0 - r)? - log_gamma(bf + 1.0 - r)?;
    Ok(n as f64 * sigma / bf * log.exp())
}

/// `Var[T] = (N*sigma/B)^2 * Gamma(B+1)*Gamma(1 - 2B/(N*alpha)) / Gamma(B+1 - 2B/(N*alpha)) - E[T]^2`;
/// requires `N*alpha > 2B`.
pub fn pareto_var_t(n: usize, b: usize, sigma: f64, alpha: f64) -> Result<f64> {
    check_feasible(n, b)?;
    check_pareto(sigma, alpha)?;
    let r = b as f64 / (n as f64 * alpha);
    if 2.0 * r >= 1.0 {
        return Err(Error::InfiniteMoment {
            moment: "variance",
            reason: format!("N*alpha = {} <= 2B = {}", n as f64 * alpha, 2 * b),
        });
    }
    let bf = b as f64;
    let scale = n as f64 * sigma / bf;
    let log = log_gamma(bf + 1.0)? + log_gamma(1.0 - 2.0 * r)? - log_gamma(bf + 1.0 - 2.0 * r)?;
    let mean = pareto_mean_t(n, b, sigma, alpha)?;
    Ok(scale * scale * log.exp() - mean * mean)
}

/// `CoV[T] = sqrt( Gamma(B+1-r)^2*Gamma(1-2r) / (Gamma(B+1)*Gamma(1-r)^2*Gamma(B+1-2r)) - 1 )`
/// with `r = B/(N*alpha)`; independent of sigma.
pub fn pareto_cov_t(n: usize, b: usize, alpha: f64) -> Result<f64> {
    check_feasible(n, b)?;
    check_pareto(1.0, alpha)?;
    let r = b as f64 / (n as f64 * alpha);
    if 2.0 * r >= 1.0 {
        return Err(Error::InfiniteMoment {
            moment: "variance",
            reason: format!("N*alpha = {} <= 2B = {}", n as f64 * alpha, 2 * b),
        });
    }
    let bf = b as f64;
    let log = 2.0 * log_gamma(bf + 1.0 - r)? + log_gamma(1.0 - 2.0 * r)?
        - log_gamma(bf + 1.0)?
        - 2.0 * log_gamma(1.0 - r)?
        - log_gamma(bf + 1.0 - 2.0 * r)?;
    Ok((log.exp() - 1.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_small_values() {
        assert_eq!(harmonic(1, 1).value, 1.0);
        assert_eq!(harmonic(1, 2).value, 1.0);
        assert_eq!(harmonic(2, 1).value, 1.5);
        assert_eq!(harmonic(2, 2).value, 1.25);
        // direct summation, consistent with ln(100) + gamma + 1/200
        let h100 = harmonic(100, 1).value;
        assert!((h100 - 5.187377517639621).abs() < 1e-12);
        assert!((h100 - (100f64.ln() + EULER_GAMMA + 1.0 / 200.0)).abs() < 1e-4);
    }

    #[test]
    fn harmonic_is_increasing() {
        for r in [1, 2] {
            let mut prev = 0.0;
            for n in 1..200 {
                let v = harmonic(n, r).value;
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn log_gamma_known_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-13);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-13);
        assert!((log_gamma(0.5).unwrap() - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
        // ln(100!) by exact log summation
        let ln_fact_100: f64 = (2..=100u64).map(|k| (k as f64).ln()).sum();
        let lg = log_gamma(101.0).unwrap();
        assert!((lg - ln_fact_100).abs() / ln_fact_100 < 1e-13, "{lg} vs {ln_fact_100}");
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.0).is_err());
    }

    #[test]
    fn log_gamma_recurrence_holds() {
        // Gamma(x+1) = x * Gamma(x)
        let mut x = 1e-3;
        while x < 1e6 {
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = x.ln() + log_gamma(x).unwrap();
            let denom = lhs.abs().max(1.0);
            assert!((lhs - rhs).abs() / denom < 1e-11, "x={x}: {lhs} vs {rhs}");
            x *= 1.7;
        }
    }

    #[test]
    fn sexp_mean_examples() {
        // N=4, B=2, delta=1, mu=1: 2 + H_2 = 3.5
        assert_eq!(sexp_mean_t(4, 2, 1.0, 1.0).unwrap(), 3.5);
        // B=1 endpoint: N*delta + 1/mu
        assert_eq!(sexp_mean_t(4, 1, 1.0, 2.0).unwrap(), 4.5);
        // delta=0, B=N reduces to H_N/mu
        let v = sexp_mean_t(4, 4, 0.0, 2.0).unwrap();
        assert!((v - harmonic(4, 1).value / 2.0).abs() < 1e-15);
        // the Fig. 4 interior point: 1 + H_5
        let v = sexp_mean_t(100, 5, 0.05, 1.0).unwrap();
        assert!((v - 3.283333333333333).abs() < 1e-12);

        assert!(sexp_mean_t(6, 4, 1.0, 1.0).is_err());
        assert!(sexp_mean_t(4, 2, -1.0, 1.0).is_err());
    }

    #[test]
    fn sexp_mean_at_zero_shift_is_minimized_at_b1() {
        // delta=0: E[T] = H_B/mu, monotone increasing in B
        let mut prev = 0.0;
        for b in [1usize, 2, 4, 5, 10, 20, 25, 50, 100] {
            let v = sexp_mean_t(100, b, 0.0, 1.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn sexp_cov_examples() {
        // B=1: 1/(N*delta*mu + 1)
        let v = sexp_cov_t(10, 1, 0.5, 2.0).unwrap();
        assert!((v - 1.0 / 11.0).abs() < 1e-15);
        // B=2: sqrt(5)/(N*delta*mu + 3)
        let v = sexp_cov_t(10, 2, 0.5, 2.0).unwrap();
        assert!((v - 5f64.sqrt() / 13.0).abs() < 1e-14);
        // pure exponential endpoint
        let v = sexp_cov_t(100, 100, 0.0, 1.0).unwrap();
        assert!((v - 0.2464954373).abs() < 1e-9);
    }

    #[test]
    fn sexp_mean_approx_examples() {
        // B=1: N*delta + gamma/mu
        let v = sexp_mean_approx(100, 1, 0.05, 1.0).unwrap();
        assert!((v - (5.0 + EULER_GAMMA)).abs() < 1e-12);
        // approximation gap at the interior optimum
        let approx = sexp_mean_approx(100, 5, 0.05, 1.0).unwrap();
        let exact = sexp_mean_t(100, 5, 0.05, 1.0).unwrap();
        assert!((approx - (1.0 + 5f64.ln() + EULER_GAMMA)).abs() < 1e-12);
        assert!((exact - approx - 0.096).abs() < 5e-3, "gap {}", exact - approx);
    }

    #[test]
    fn pareto_mean_examples() {
        // B=1: mean of Pareto(N*sigma, N*alpha) = N*sigma/(1 - 1/(N*alpha))
        let v = pareto_mean_t(4, 1, 1.0, 2.0).unwrap();
        assert!((v - 32.0 / 7.0).abs() < 1e-12);
        // full parallelism, N=100, alpha=5: Gamma(101)Gamma(0.8)/Gamma(100.8)
        let v = pareto_mean_t(100, 100, 1.0, 5.0).unwrap();
        assert!((v - 2.9267509397748075).abs() < 1e-9);
        // pole at N*alpha = B
        assert!(matches!(
            pareto_mean_t(2, 2, 1.0, 1.0),
            Err(Error::InfiniteMoment { .. })
        ));
    }

    #[test]
    fn pareto_mean_agrees_with_distribution_route() {
        // E[T] at B=1 equals the mean of the minimum of N scaled draws
        use crate::distributions::ServiceDistribution;
        let d = ServiceDistribution::pareto(1.0, 2.0).unwrap();
        let batch = d.scale(4.0).unwrap().min_of_iid(4).unwrap();
        let direct = batch.mean().unwrap();
        let formula = pareto_mean_t(4, 1, 1.0, 2.0).unwrap();
        assert!((direct - formula).abs() < 1e-12, "{direct} vs {formula}");
    }

    #[test]
    fn pareto_cov_is_sigma_free_and_guards_variance() {
        let v = pareto_cov_t(100, 10, 3.0).unwrap();
        assert!(v > 0.0);
        // variance of full parallelism needs N*alpha > 2N
        assert!(pareto_cov_t(100, 100, 1.5).is_err());
        assert!(pareto_var_t(100, 100, 1.0, 2.0).is_err());
        // var/cov consistency where both exist
        let mean = pareto_mean_t(100, 4, 1.0, 3.0).unwrap();
        let var = pareto_var_t(100, 4, 1.0, 3.0).unwrap();
        let cov = pareto_cov_t(100, 4, 3.0).unwrap();
        assert!((var.sqrt() / mean - cov).abs() < 1e-10);
        // sigma scales the mean linearly, leaves CoV untouched
        let m10 = pareto_mean_t(100, 4, 10.0, 3.0).unwrap();
        assert!((m10 - 10.0 * pareto_mean_t(100, 4, 1.0, 3.0).unwrap()).abs() < 1e-9);
    }
}
