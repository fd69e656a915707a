use super::{Bits, EffectiveAttack, RateError, Result};
use crate::attack::AttackParams;
use crate::gaussian::{h_entropy, SymplecticSpectrum};
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

/// A symplectic eigenvalue that behaves as `coefficient · μ^mu_power` for large `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledEigenvalue {
    pub coefficient: f64,
    pub mu_power: f64,
}

impl ScaledEigenvalue {
    pub fn at(&self, mu: f64) -> f64 {
        self.coefficient * mu.powf(self.mu_power)
    }

    /// `h(cμ^p) = p·log₂μ + log₂(ec/2) + O(μ^{-2p})` for growing eigenvalues.
    pub fn entropy(&self) -> Result<Bits> {
        if self.mu_power > 0.0 {
            if !(self.coefficient > 0.0) {
                return Err(RateError::Degenerate("vanishing asymptotic eigenvalue"));
            }
            Ok(Bits {
                log2_mu: self.mu_power,
                constant: (E * self.coefficient / 2.0).log2(),
            })
        } else {
            Ok(Bits::finite(h_entropy(self.coefficient)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSpectrum {
    pub eigenvalues: [ScaledEigenvalue; 2],
    pub symmetric_branch: bool,
}

impl AsymptoticSpectrum {
    pub fn at(&self, mu: f64) -> SymplecticSpectrum {
        let mut eigenvalues: Vec<f64> = self.eigenvalues.iter().map(|e| e.at(mu)).collect();
        eigenvalues.sort_by(|a, b| a.total_cmp(b));
        SymplecticSpectrum { eigenvalues }
    }

    pub fn entropy(&self) -> Result<Bits> {
        Ok(self.eigenvalues[0].entropy()? + self.eigenvalues[1].entropy()?)
    }
}

pub fn asymptotic_spectrum(params: &AttackParams) -> Result<AsymptoticSpectrum> {
    asymptotic_spectrum_effective(&EffectiveAttack::from_params(params)?)
}

/// Large-`μ` spectrum of `V_ab|γ`.
///
/// For `τ_A ≠ τ_B`: `{|τ_A−τ_B|μ/(τ_A+τ_B), √(λλ')/|τ_A−τ_B|}`. On the
/// diagonal both eigenvalues grow as `√μ`: `{√(λμ/(τ_A+τ_B)), √(λ'μ/(τ_A+τ_B))}`.
pub fn asymptotic_spectrum_effective(eff: &EffectiveAttack) -> Result<AsymptoticSpectrum> {
    let s = eff.tau_sum();
    if eff.is_symmetric() {
        if !(eff.lambda > 0.0 && eff.lambda_prime > 0.0) {
            return Err(RateError::Degenerate(
                "lossless symmetric links have no asymptotic expansion",
            ));
        }
        let e = |l: f64| ScaledEigenvalue {
            coefficient: (l / s).sqrt(),
            mu_power: 0.5,
        };
        Ok(AsymptoticSpectrum {
            eigenvalues: [e(eff.lambda), e(eff.lambda_prime)],
            symmetric_branch: true,
        })
    } else {
        let d = eff.tau_diff().abs();
        Ok(AsymptoticSpectrum {
            eigenvalues: [
                ScaledEigenvalue {
                    coefficient: d / s,
                    mu_power: 1.0,
                },
                ScaledEigenvalue {
                    coefficient: (eff.lambda * eff.lambda_prime).sqrt() / d,
                    mu_power: 0.0,
                },
            ],
            symmetric_branch: false,
        })
    }
}

pub fn conditional_eigenvalue(params: &AttackParams) -> Result<f64> {
    Ok(conditional_eigenvalue_effective(
        &EffectiveAttack::from_params(params)?,
    ))
}

/// `ν = √((τ_A+λ)(τ_A+λ'))/τ_B`, Bob's eigenvalue after Alice's heterodyne as `μ → ∞`.
pub fn conditional_eigenvalue_effective(eff: &EffectiveAttack) -> f64 {
    ((eff.tau_a + eff.lambda) * (eff.tau_a + eff.lambda_prime)).sqrt() / eff.tau_b
}

/// `I_AB = log₂μ − log₂χ`.
pub(crate) fn mutual_information(eff: &EffectiveAttack) -> (Bits, f64) {
    let chi = eff.chi();
    (
        Bits {
            log2_mu: 1.0,
            constant: -chi.log2(),
        },
        chi,
    )
}

pub(crate) fn holevo_bound(eff: &EffectiveAttack) -> Result<Bits> {
    let s_ab = asymptotic_spectrum_effective(eff)?.entropy()?;
    let s_cond = h_entropy(conditional_eigenvalue_effective(eff))?;
    Ok(s_ab - Bits::finite(s_cond))
}
