//! Distance/loss conversion and zero crossings of the key rate.

use crate::rate::{rate_with_excess_noise, Modulation, RateError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;
/// Bisection stops once `|R| <` this many bits.
pub const RATE_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 200;
/// Search cap for Bob's distance.
pub const DISTANCE_CAP_KM: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("{name} = {value} is outside its domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("root is not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NotBracketed {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error(transparent)]
    Rate(#[from] RateError),
}

pub type Result<T> = std::result::Result<T, ThresholdError>;

fn check_loss_rate(loss_rate: f64) -> Result<()> {
    if loss_rate > 0.0 && loss_rate.is_finite() {
        Ok(())
    } else {
        Err(ThresholdError::Domain {
            name: "loss_rate",
            value: loss_rate,
            constraint: "loss_rate > 0 dB/km",
        })
    }
}

/// `τ = 10^(−loss_db/10)`.
pub fn tau_from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn db_from_tau(tau: f64) -> f64 {
    -10.0 * tau.log10()
}

pub fn tau_from_distance(distance_km: f64, loss_rate: f64) -> Result<f64> {
    check_loss_rate(loss_rate)?;
    if !(distance_km >= 0.0) || !distance_km.is_finite() {
        return Err(ThresholdError::Domain {
            name: "distance_km",
            value: distance_km,
            constraint: "distance >= 0",
        });
    }
    Ok(tau_from_db(loss_rate * distance_km))
}

pub fn distance_from_tau(tau: f64, loss_rate: f64) -> Result<f64> {
    check_loss_rate(loss_rate)?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(ThresholdError::Domain {
            name: "tau",
            value: tau,
            constraint: "0 < tau <= 1",
        });
    }
    Ok(db_from_tau(tau) / loss_rate)
}

/// A fibre link of given length and attenuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub loss_rate_db_per_km: f64,
    pub distance_km: f64,
}

impl LinkBudget {
    pub fn new(distance_km: f64, loss_rate_db_per_km: f64) -> Result<Self> {
        tau_from_distance(distance_km, loss_rate_db_per_km)?;
        Ok(Self {
            loss_rate_db_per_km,
            distance_km,
        })
    }

    pub fn tau(&self) -> f64 {
        tau_from_db(self.loss_rate_db_per_km * self.distance_km)
    }
}

/// Result of a bracketed bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection for a sign change of `f` on `[lo, hi]`, stopping at `|f| < f_tol`
/// or when the bracket can no longer shrink.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, f_tol: f64, max_iter: usize) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(Root {
            x: lo,
            residual: 0.0,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Ok(Root {
            x: hi,
            residual: 0.0,
            iterations: 0,
        });
    }
    if !(f_lo.signum() != f_hi.signum()) || f_lo.is_nan() || f_hi.is_nan() {
        return Err(ThresholdError::NotBracketed { lo, hi, f_lo, f_hi });
    }
    let mut best = if f_lo.abs() < f_hi.abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    for iterations in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(Root {
                x: best.0,
                residual: best.1,
                iterations,
            });
        }
        let f_mid = f(mid);
        if f_mid.abs() < best.1.abs() {
            best = (mid, f_mid);
        }
        if f_mid.abs() < f_tol {
            return Ok(Root {
                x: mid,
                residual: f_mid,
                iterations,
            });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(Root {
        x: best.0,
        residual: best.1,
        iterations: max_iter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceStatus {
    /// The rate crosses zero at `d_max_km`.
    Bounded,
    /// The rate is still positive at the search cap.
    UnboundedWithinCap,
    /// No positive rate even with Bob at the relay.
    NoPositiveRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub r_km: f64,
    pub d_max_km: f64,
    pub status: DistanceStatus,
    pub residual: f64,
}

/// Asymptotic minimum rate with Alice `r_km` and Bob `d_km` from the relay.
pub fn rate_at_distances(r_km: f64, d_km: f64, epsilon: f64, loss_rate: f64) -> Result<f64> {
    let tau_a = tau_from_distance(r_km, loss_rate)?;
    let tau_b = tau_from_distance(d_km, loss_rate)?;
    match rate_with_excess_noise(tau_a, tau_b, epsilon, Modulation::Asymptotic, 1.0) {
        Ok(r) => Ok(r.rate),
        // both links lossless: the rate is unbounded
        Err(RateError::Degenerate(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}

/// Longest distance of Bob from the relay at which the rate stays positive.
pub fn max_bob_distance(r_km: f64, epsilon: f64, loss_rate: f64) -> Result<DistanceResult> {
    let rate = |d: f64| rate_at_distances(r_km, d, epsilon, loss_rate);
    let at_zero = rate(0.0)?;
    if at_zero <= 0.0 {
        return Ok(DistanceResult {
            r_km,
            d_max_km: 0.0,
            status: DistanceStatus::NoPositiveRate,
            residual: at_zero,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    loop {
        let r_hi = rate(hi)?;
        if r_hi <= 0.0 {
            break;
        }
        if hi >= DISTANCE_CAP_KM {
            return Ok(DistanceResult {
                r_km,
                d_max_km: DISTANCE_CAP_KM,
                status: DistanceStatus::UnboundedWithinCap,
                residual: r_hi,
            });
        }
        lo = hi;
        hi = (2.0 * hi).min(DISTANCE_CAP_KM);
    }
    let mut failure = None;
    let root = bisect(
        |d| match rate(d) {
            Ok(r) => r,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        RATE_TOL,
        MAX_ITERATIONS,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(DistanceResult {
        r_km,
        d_max_km: root.x,
        status: DistanceStatus::Bounded,
        residual: root.residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub epsilon: f64,
    pub loss_rate_db_per_km: f64,
    pub points: Vec<DistanceResult>,
}

pub fn threshold_curve(r_values: &[f64], epsilon: f64, loss_rate: f64) -> Result<ThresholdCurve> {
    let points = r_values
        .par_iter()
        .map(|&r| max_bob_distance(r, epsilon, loss_rate))
        .collect::<Result<Vec<_>>>()?;
    Ok(ThresholdCurve {
        epsilon,
        loss_rate_db_per_km: loss_rate,
        points,
    })
}

/// Asymptotic minimum rate over a grid of transmissivities.
///
/// `rates[i][j]` belongs to `(tau_a[i], tau_b[j])`; cells where the rate is
/// undefined (both links lossless) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSurface {
    pub epsilon: f64,
    pub tau_a: Vec<f64>,
    pub tau_b: Vec<f64>,
    pub rates: Vec<Vec<Option<f64>>>,
}

impl RateSurface {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rates[i][j]
    }
}

pub fn rate_surface(tau_a: &[f64], tau_b: &[f64], epsilon: f64) -> Result<RateSurface> {
    let rates = tau_a
        .par_iter()
        .map(|&ta| {
            tau_b
                .iter()
                .map(|&tb| {
                    match rate_with_excess_noise(ta, tb, epsilon, Modulation::Asymptotic, 1.0) {
                        Ok(r) => Ok(Some(r.rate)),
                        Err(RateError::Degenerate(_)) => Ok(None),
                        Err(e) => Err(ThresholdError::from(e)),
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateSurface {
        epsilon,
        tau_a: tau_a.to_vec(),
        tau_b: tau_b.to_vec(),
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn loss_conversions() {
        assert_relative_eq!(
            tau_from_distance(50.0, 0.2).unwrap(),
            0.1,
            epsilon = 1e-15
        );
        assert_relative_eq!(tau_from_db(34.0), 3.98e-4, max_relative = 1e-3);
        assert_relative_eq!(
            distance_from_tau(tau_from_db(34.0), 0.2).unwrap(),
            170.0,
            max_relative = 1e-12
        );
        assert_eq!(tau_from_distance(0.0, 0.2).unwrap(), 1.0);
        for d in [0.0, 0.3, 12.5, 170.0, 499.0] {
            let back = distance_from_tau(tau_from_distance(d, 0.2).unwrap(), 0.2).unwrap();
            assert!((back - d).abs() < 1e-12 * d.max(1.0));
        }
        assert!(tau_from_distance(-1.0, 0.2).is_err());
        assert!(tau_from_distance(1.0, 0.0).is_err());
        assert_relative_eq!(LinkBudget::new(50.0, 0.2).unwrap().tau(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn bisection_finds_simple_roots() {
        let root = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12, 200).unwrap();
        assert!((root.x - 2f64.sqrt()).abs() < 1e-11);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 200).is_err());
    }

    #[test]
    fn symmetric_relay_threshold_near_four_km() {
        let tau = bisect(
            |t| crate::rate::rate_pure_loss(t, t).unwrap().rate,
            0.5,
            0.99,
            1e-12,
            200,
        )
        .unwrap()
        .x;
        let d = distance_from_tau(tau, 0.2).unwrap();
        assert!((d - 3.8).abs() < 0.05, "{d}");
    }

    #[test]
    fn distance_bracketing_and_residual() {
        let res = max_bob_distance(2.0, 0.0, 0.2).unwrap();
        assert_eq!(res.status, DistanceStatus::Bounded);
        assert!(res.residual.abs() < RATE_TOL);
        let before = rate_at_distances(2.0, res.d_max_km - 1e-3, 0.0, 0.2).unwrap();
        let after = rate_at_distances(2.0, res.d_max_km + 1e-3, 0.0, 0.2).unwrap();
        assert!(before > 0.0 && after < 0.0);
    }

    #[test]
    fn no_rate_far_from_relay() {
        let res = max_bob_distance(20.0, 0.0, 0.2).unwrap();
        assert_eq!(res.status, DistanceStatus::NoPositiveRate);
        assert_eq!(res.d_max_km, 0.0);
    }

    #[test]
    fn cap_reached_next_to_relay() {
        let res = max_bob_distance(0.0, 0.0, 0.2).unwrap();
        assert_eq!(res.status, DistanceStatus::UnboundedWithinCap);
        assert_eq!(res.d_max_km, DISTANCE_CAP_KM);
    }

    #[test]
    fn surface_has_undefined_lossless_corner() {
        let s = rate_surface(&[0.8, 1.0], &[0.8, 1.0], 0.0).unwrap();
        assert!(s.get(1, 1).is_none());
        assert!(s.get(0, 0).unwrap() < 0.0);
        assert!(s.get(1, 0).unwrap() > 0.0);
    }

    #[test]
    fn curves_are_deterministic() {
        let rs = [0.1, 0.5, 1.0, 2.0];
        let a = threshold_curve(&rs, 0.1, 0.2).unwrap();
        let b = threshold_curve(&rs, 0.1, 0.2).unwrap();
        assert_eq!(a, b);
        for w in a.points.windows(2) {
            assert!(w[1].d_max_km <= w[0].d_max_km);
        }
    }
}
