//! Closed-form rates at the attack that minimises the key rate.

use super::{
    check_chi, check_tau, check_xi, chi_loss, domain, finite_rate_terms,
    post_relay_cm_closed_effective, EffectiveAttack, Modulation, NoiseBudget, RateError,
    RateResult, Result, SYMMETRIC_TOL,
};
use crate::attack::phi_bound;
use crate::gaussian::{h_entropy, PHYSICAL_TOL};
use std::f64::consts::E;

fn check_omega(name: &'static str, omega: f64) -> Result<()> {
    if omega.is_finite() && omega >= 1.0 {
        Ok(())
    } else {
        Err(domain(name, omega, "omega >= 1"))
    }
}

fn not_lossless(tau_a: f64, tau_b: f64) -> Result<()> {
    if tau_a == 1.0 && tau_b == 1.0 {
        Err(RateError::Degenerate(
            "lossless links: the asymptotic rate diverges",
        ))
    } else {
        Ok(())
    }
}

/// Minimum over all attacks with the given thermal variances, reached by the
/// negative EPR attack, where `λ = λ' = κ + uφ`.
pub fn rate_min_fixed_thermal(
    tau_a: f64,
    tau_b: f64,
    omega_a: f64,
    omega_b: f64,
) -> Result<RateResult> {
    check_tau("tau_a", tau_a)?;
    check_tau("tau_b", tau_b)?;
    check_omega("omega_a", omega_a)?;
    check_omega("omega_b", omega_b)?;
    not_lossless(tau_a, tau_b)?;
    let kappa = (1.0 - tau_a) * omega_a + (1.0 - tau_b) * omega_b;
    let u = 2.0 * ((1.0 - tau_a) * (1.0 - tau_b)).sqrt();
    let lambda = kappa + u * phi_bound(omega_a, omega_b);
    let s = tau_a + tau_b;
    let nu = (tau_a + lambda) / tau_b;
    let d = (tau_a - tau_b).abs();
    let rate = if d < SYMMETRIC_TOL {
        h_entropy(nu)? + (4.0 * tau_a * tau_b / (E * E * lambda * (s + lambda))).log2()
    } else {
        h_entropy(nu)? - h_entropy(lambda / d)?
            + (2.0 * tau_a * tau_b / (E * d * (s + lambda))).log2()
    };
    let chi = s * (s + lambda) / (tau_a * tau_b);
    Ok(RateResult::asymptotic(
        rate,
        NoiseBudget::new(chi, tau_a, tau_b),
    ))
}

/// Minimum over all attacks with equivalent noise `χ`.
pub fn rate_min_fixed_chi(tau_a: f64, tau_b: f64, chi: f64) -> Result<RateResult> {
    check_tau("tau_a", tau_a)?;
    check_tau("tau_b", tau_b)?;
    not_lossless(tau_a, tau_b)?;
    check_chi(chi, chi_loss(tau_a, tau_b))?;
    let s = tau_a + tau_b;
    let x = tau_a * chi / s - 1.0;
    let y = ((tau_a * tau_b * chi - s * s) / s).max(0.0);
    let d = (tau_a - tau_b).abs();
    let rate = if d < SYMMETRIC_TOL {
        h_entropy(x)? + (4.0 * s / (E * E * chi * y)).log2()
    } else {
        h_entropy(x)? - h_entropy(y / d)? + (2.0 * s / (E * d * chi)).log2()
    };
    Ok(RateResult::asymptotic(
        rate,
        NoiseBudget::new(chi, tau_a, tau_b),
    ))
}

/// Rate with vacuum reservoirs (`χ = χ_loss`).
pub fn rate_pure_loss(tau_a: f64, tau_b: f64) -> Result<RateResult> {
    check_tau("tau_a", tau_a)?;
    check_tau("tau_b", tau_b)?;
    not_lossless(tau_a, tau_b)?;
    let d = (tau_a - tau_b).abs();
    let nu = (2.0 - tau_b) / tau_b;
    let rate = if d < SYMMETRIC_TOL {
        h_entropy(nu)? + (2.0 * tau_a * tau_b / (E * E * (2.0 - tau_a - tau_b))).log2()
    } else {
        h_entropy(nu)? - h_entropy((2.0 - tau_a - tau_b) / d)?
            + (tau_a * tau_b / (E * d)).log2()
    };
    Ok(RateResult::asymptotic(
        rate,
        NoiseBudget::from_excess(0.0, tau_a, tau_b),
    ))
}

/// Relay at Alice's station (`τ_A → 1`): a point-to-point link in reverse reconciliation.
pub fn rate_limit_tau_a_to_1(tau_b: f64, omega_b: f64) -> Result<RateResult> {
    check_tau("tau_b", tau_b)?;
    check_omega("omega_b", omega_b)?;
    not_lossless(1.0, tau_b)?;
    let noise = 1.0 + (1.0 - tau_b) * omega_b;
    let rate = h_entropy(noise / tau_b)? - h_entropy(omega_b)?
        + (2.0 * tau_b / (E * (1.0 - tau_b) * (tau_b + noise))).log2();
    let chi = (1.0 + tau_b) * (tau_b + noise) / tau_b;
    Ok(RateResult::asymptotic(rate, NoiseBudget::new(chi, 1.0, tau_b)))
}

/// Relay at Bob's station (`τ_B → 1`): a point-to-point link in direct reconciliation.
pub fn rate_limit_tau_b_to_1(tau_a: f64, omega_a: f64) -> Result<RateResult> {
    check_tau("tau_a", tau_a)?;
    check_omega("omega_a", omega_a)?;
    not_lossless(tau_a, 1.0)?;
    let noise = tau_a + (1.0 - tau_a) * omega_a;
    let rate = h_entropy(noise)? - h_entropy(omega_a)?
        + (2.0 * tau_a / (E * (1.0 - tau_a) * (1.0 + noise))).log2();
    let chi = (1.0 + tau_a) * (1.0 + noise) / tau_a;
    Ok(RateResult::asymptotic(rate, NoiseBudget::new(chi, tau_a, 1.0)))
}

/// Minimum rate for excess noise `ε` on top of the loss (`χ = χ_loss + ε`).
///
/// With finite modulation the rate is evaluated numerically at the bisector
/// attack that reaches the same `χ`.
pub fn rate_with_excess_noise(
    tau_a: f64,
    tau_b: f64,
    epsilon: f64,
    modulation: Modulation,
    xi: f64,
) -> Result<RateResult> {
    check_xi(xi)?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(domain("epsilon", epsilon, "epsilon >= 0"));
    }
    check_tau("tau_a", tau_a)?;
    check_tau("tau_b", tau_b)?;
    let chi = chi_loss(tau_a, tau_b) + epsilon;
    match modulation {
        Modulation::Asymptotic => {
            if xi != 1.0 {
                return Err(RateError::NeedsFiniteModulation { xi });
            }
            let mut r = rate_min_fixed_chi(tau_a, tau_b, chi)?;
            r.noise = NoiseBudget::from_excess(epsilon, tau_a, tau_b);
            Ok(r)
        }
        Modulation::Finite { mu } => {
            let eff = EffectiveAttack::bisector_for_chi(tau_a, tau_b, chi)?;
            let cm = post_relay_cm_closed_effective(&eff, mu)?;
            let mut r = finite_rate_terms(&cm, mu, PHYSICAL_TOL)?.into_result(xi, tau_a, tau_b);
            r.noise = NoiseBudget::from_excess(epsilon, tau_a, tau_b);
            Ok(r)
        }
    }
}
