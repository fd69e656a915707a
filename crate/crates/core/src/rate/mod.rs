//! Secret-key rates under the two-mode coherent attack.
//!
//! Rates are computed either at finite modulation (total variance `μ`,
//! numerically from the post-relay covariance matrix) or in the limit
//! `μ → ∞`, where the information terms are tracked as `a·log₂μ + b` so the
//! divergent parts cancel exactly.

mod asymptotic;
mod finite;
mod minimum;
mod post_relay;

pub use asymptotic::{
    asymptotic_spectrum, asymptotic_spectrum_effective, conditional_eigenvalue,
    conditional_eigenvalue_effective, AsymptoticSpectrum, ScaledEigenvalue,
};
pub use finite::{finite_rate_terms, FiniteRateTerms};
pub use minimum::{
    rate_limit_tau_a_to_1, rate_limit_tau_b_to_1, rate_min_fixed_chi, rate_min_fixed_thermal,
    rate_pure_loss, rate_with_excess_noise,
};
pub use post_relay::{
    post_relay_cm_closed, post_relay_cm_closed_effective, post_relay_cm_pipeline,
};

use crate::attack::{AttackError, AttackParams};
use crate::gaussian::{GaussianError, PHYSICAL_TOL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `|τ_A − τ_B|` below which the symmetric branch of the asymptotic formulas is used.
pub const SYMMETRIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error("{name} = {value} is outside its domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("non-positive attack noise: lambda = {lambda}, lambda' = {lambda_prime}")]
    NonPositiveLambda { lambda: f64, lambda_prime: f64 },
    #[error("equivalent noise chi = {chi} is below the loss-only value chi_loss = {chi_loss}")]
    InfeasibleNoise { chi: f64, chi_loss: f64 },
    #[error("xi = {xi} < 1 leaves a divergent log(mu) term; use a finite modulation")]
    NeedsFiniteModulation { xi: f64 },
    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),
    #[error("reconstructed state is unphysical: least symplectic eigenvalue {nu_min} < 1 - {tol}")]
    UnphysicalState { nu_min: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, RateError>;

pub(crate) fn domain(name: &'static str, value: f64, constraint: &'static str) -> RateError {
    RateError::Domain {
        name,
        value,
        constraint,
    }
}

pub(crate) fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi <= 1.0 {
        Ok(())
    } else {
        Err(domain("xi", xi, "0 < xi <= 1"))
    }
}

pub(crate) fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu >= 1.0 {
        Ok(())
    } else {
        Err(domain("mu", mu, "1 <= mu < inf"))
    }
}

pub(crate) fn check_tau(name: &'static str, tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(domain(name, tau, "0 < tau <= 1"))
    }
}

/// Modulation regime of a rate computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Modulation {
    /// Total variance `μ = φ + 1` of the EPR representation.
    Finite { mu: f64 },
    Asymptotic,
}

impl Modulation {
    pub fn finite_from_phi(phi: f64) -> Self {
        Modulation::Finite { mu: phi + 1.0 }
    }
}

/// Gaussian modulation of variance `φ` and its EPR parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub mu: f64,
    pub phi: f64,
    /// `(μ + 1)/√(μ² − 1)`, relating classical and quantum covariances.
    pub eta: f64,
}

impl ProtocolParams {
    pub fn from_phi(phi: f64) -> Result<Self> {
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(domain("phi", phi, "0 < phi < inf"));
        }
        Self::from_mu(phi + 1.0)
    }

    pub fn from_mu(mu: f64) -> Result<Self> {
        if !(mu > 1.0) || !mu.is_finite() {
            return Err(domain("mu", mu, "1 < mu < inf"));
        }
        Ok(Self {
            mu,
            phi: mu - 1.0,
            eta: (mu + 1.0) / (mu * mu - 1.0).sqrt(),
        })
    }

    /// `η² = (μ + 1)/(μ − 1)`.
    pub fn eta_sq(&self) -> f64 {
        (self.mu + 1.0) / (self.mu - 1.0)
    }
}

/// Attack noise as seen by the relay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedAttackQuantities {
    pub kappa: f64,
    pub u: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
}

impl DerivedAttackQuantities {
    pub fn new(params: &AttackParams) -> Self {
        let kappa = (1.0 - params.tau_a) * params.omega_a + (1.0 - params.tau_b) * params.omega_b;
        let u = 2.0 * ((1.0 - params.tau_a) * (1.0 - params.tau_b)).sqrt();
        Self {
            kappa,
            u,
            lambda: kappa - u * params.g,
            lambda_prime: kappa + u * params.g_prime,
        }
    }

    pub fn theta(&self, params: &AttackParams, mu: f64) -> f64 {
        (params.tau_a + params.tau_b) * mu + self.lambda
    }

    pub fn theta_prime(&self, params: &AttackParams, mu: f64) -> f64 {
        (params.tau_a + params.tau_b) * mu + self.lambda_prime
    }
}

/// The four numbers the rate depends on: `(τ_A, τ_B, λ, λ')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveAttack {
    pub tau_a: f64,
    pub tau_b: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
}

impl EffectiveAttack {
    pub fn new(tau_a: f64, tau_b: f64, lambda: f64, lambda_prime: f64) -> Result<Self> {
        check_tau("tau_a", tau_a)?;
        check_tau("tau_b", tau_b)?;
        if !(lambda >= 0.0 && lambda_prime >= 0.0) || !lambda.is_finite() || !lambda_prime.is_finite()
        {
            return Err(RateError::NonPositiveLambda {
                lambda,
                lambda_prime,
            });
        }
        Ok(Self {
            tau_a,
            tau_b,
            lambda,
            lambda_prime,
        })
    }

    /// Requires a physical attack and reports `λ, λ' ≤ 0` as an error.
    pub fn from_params(params: &AttackParams) -> Result<Self> {
        params.ensure_physical()?;
        let d = DerivedAttackQuantities::new(params);
        let lossless = params.tau_a == 1.0 && params.tau_b == 1.0;
        if !lossless && !(d.lambda > 0.0 && d.lambda_prime > 0.0) {
            return Err(RateError::NonPositiveLambda {
                lambda: d.lambda,
                lambda_prime: d.lambda_prime,
            });
        }
        Self::new(params.tau_a, params.tau_b, d.lambda.max(0.0), d.lambda_prime.max(0.0))
    }

    /// Attack on the bisector `λ = λ'` with equivalent noise `χ`.
    pub fn bisector_for_chi(tau_a: f64, tau_b: f64, chi: f64) -> Result<Self> {
        check_tau("tau_a", tau_a)?;
        check_tau("tau_b", tau_b)?;
        let chi_loss = chi_loss(tau_a, tau_b);
        check_chi(chi, chi_loss)?;
        let s = tau_a + tau_b;
        let lambda = (chi * tau_a * tau_b / s - s).max(0.0);
        Self::new(tau_a, tau_b, lambda, lambda)
    }

    pub fn tau_sum(&self) -> f64 {
        self.tau_a + self.tau_b
    }

    pub fn tau_diff(&self) -> f64 {
        self.tau_a - self.tau_b
    }

    pub fn is_symmetric(&self) -> bool {
        self.tau_diff().abs() < SYMMETRIC_TOL
    }

    /// `χ = (τ_A+τ_B)/(τ_Aτ_B) · √((τ_A+τ_B+λ)(τ_A+τ_B+λ'))`.
    pub fn chi(&self) -> f64 {
        let s = self.tau_sum();
        s / (self.tau_a * self.tau_b) * ((s + self.lambda) * (s + self.lambda_prime)).sqrt()
    }

    pub fn mirrored(&self) -> Self {
        Self {
            lambda: self.lambda_prime,
            lambda_prime: self.lambda,
            ..*self
        }
    }
}

pub(crate) fn check_chi(chi: f64, chi_loss: f64) -> Result<()> {
    if chi.is_finite() && chi >= chi_loss * (1.0 - 1e-12) {
        Ok(())
    } else {
        Err(RateError::InfeasibleNoise { chi, chi_loss })
    }
}

/// `χ_loss = 2(τ_A + τ_B)/(τ_A τ_B)`.
pub fn chi_loss(tau_a: f64, tau_b: f64) -> f64 {
    2.0 * (tau_a + tau_b) / (tau_a * tau_b)
}

/// Equivalent noise split into its loss and excess parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub chi: f64,
    pub chi_loss: f64,
    pub epsilon: f64,
}

impl NoiseBudget {
    pub fn new(chi: f64, tau_a: f64, tau_b: f64) -> Self {
        let chi_loss = chi_loss(tau_a, tau_b);
        Self {
            chi,
            chi_loss,
            epsilon: chi - chi_loss,
        }
    }

    pub fn from_excess(epsilon: f64, tau_a: f64, tau_b: f64) -> Self {
        let chi_loss = chi_loss(tau_a, tau_b);
        Self {
            chi: chi_loss + epsilon,
            chi_loss,
            epsilon,
        }
    }
}

/// An information quantity `log2_mu · log₂μ + constant`, in bits.
///
/// Finite-modulation values have `log2_mu = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bits {
    pub log2_mu: f64,
    pub constant: f64,
}

impl Bits {
    pub fn finite(value: f64) -> Self {
        Self {
            log2_mu: 0.0,
            constant: value,
        }
    }

    pub fn is_finite_valued(&self) -> bool {
        self.log2_mu == 0.0
    }

    /// Numerical value at total variance `mu`.
    pub fn at(&self, mu: f64) -> f64 {
        if self.log2_mu == 0.0 {
            self.constant
        } else {
            self.log2_mu * mu.log2() + self.constant
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self {
            log2_mu: k * self.log2_mu,
            constant: k * self.constant,
        }
    }
}

impl std::ops::Add for Bits {
    type Output = Bits;
    fn add(self, rhs: Bits) -> Bits {
        Bits {
            log2_mu: self.log2_mu + rhs.log2_mu,
            constant: self.constant + rhs.constant,
        }
    }
}

impl std::ops::Sub for Bits {
    type Output = Bits;
    fn sub(self, rhs: Bits) -> Bits {
        Bits {
            log2_mu: self.log2_mu - rhs.log2_mu,
            constant: self.constant - rhs.constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub i_ab: Bits,
    pub i_e: Bits,
    /// `ξ·I_AB − I_E` in bits per relay use; negative when insecure.
    pub rate: f64,
    pub xi: f64,
    pub noise: NoiseBudget,
    pub modulation: Modulation,
}

impl RateResult {
    /// Asymptotic result with `ξ = 1`, given `R` and `χ`.
    pub(crate) fn asymptotic(rate: f64, noise: NoiseBudget) -> Self {
        let i_ab = Bits {
            log2_mu: 1.0,
            constant: -noise.chi.log2(),
        };
        Self {
            i_ab,
            i_e: i_ab - Bits::finite(rate),
            rate,
            xi: 1.0,
            noise,
            modulation: Modulation::Asymptotic,
        }
    }
}

/// Rate under an arbitrary physical attack.
///
/// The asymptotic regime needs `ξ = 1`, since otherwise `(ξ − 1)·log₂μ` diverges.
pub fn rate_general(params: &AttackParams, modulation: Modulation, xi: f64) -> Result<RateResult> {
    let eff = EffectiveAttack::from_params(params)?;
    rate_effective(&eff, modulation, xi)
}

/// Rate as a function of `(τ_A, τ_B, λ, λ')` alone.
pub fn rate_effective(eff: &EffectiveAttack, modulation: Modulation, xi: f64) -> Result<RateResult> {
    check_xi(xi)?;
    match modulation {
        Modulation::Finite { mu } => {
            let cm = post_relay_cm_closed_effective(eff, mu)?;
            let terms = finite_rate_terms(&cm, mu, PHYSICAL_TOL)?;
            // the attack fixes the noise; the finite-μ estimate μ·2^{−I_AB} only approaches it
            let mut result = terms.into_result(xi, eff.tau_a, eff.tau_b);
            result.noise = NoiseBudget::new(eff.chi(), eff.tau_a, eff.tau_b);
            Ok(result)
        }
        Modulation::Asymptotic => {
            if xi != 1.0 {
                return Err(RateError::NeedsFiniteModulation { xi });
            }
            let (i_ab, chi) = asymptotic::mutual_information(eff);
            let i_e = asymptotic::holevo_bound(eff)?;
            let diff = i_ab - i_e;
            debug_assert!(diff.log2_mu.abs() < 1e-12);
            Ok(RateResult {
                i_ab,
                i_e,
                rate: diff.constant,
                xi,
                noise: NoiseBudget::new(chi, eff.tau_a, eff.tau_b),
                modulation,
            })
        }
    }
}

/// Mutual information `I_AB` and equivalent noise `χ`.
pub fn mutual_information(params: &AttackParams, modulation: Modulation) -> Result<(Bits, f64)> {
    let eff = EffectiveAttack::from_params(params)?;
    match modulation {
        Modulation::Finite { mu } => {
            let cm = post_relay_cm_closed_effective(&eff, mu)?;
            let terms = finite_rate_terms(&cm, mu, PHYSICAL_TOL)?;
            Ok((Bits::finite(terms.i_ab), terms.chi))
        }
        Modulation::Asymptotic => Ok(asymptotic::mutual_information(&eff)),
    }
}

/// Holevo bound `I_E = S(ρ_ab|γ) − S(ρ_b|γα)`.
pub fn holevo_bound(params: &AttackParams, modulation: Modulation) -> Result<Bits> {
    let eff = EffectiveAttack::from_params(params)?;
    match modulation {
        Modulation::Finite { mu } => {
            let cm = post_relay_cm_closed_effective(&eff, mu)?;
            Ok(Bits::finite(finite_rate_terms(&cm, mu, PHYSICAL_TOL)?.i_e))
        }
        Modulation::Asymptotic => asymptotic::holevo_bound(&eff),
    }
}
