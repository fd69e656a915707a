//! Two-mode coherent Gaussian attack on the two links to the relay.
//!
//! Eve's reservoir is a correlated thermal state `[[ω_A I, G], [G, ω_B I]]`,
//! `G = diag(g, g')`, injected through beam splitters of transmissivity
//! `τ_A` and `τ_B`.

use crate::gaussian::{self, two_mode_roots, CovarianceMatrix, GaussianError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack on the boundary of the accessible region.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Correlations below this magnitude count as zero.
pub const PRODUCT_TOL: f64 = 1e-12;
/// Relative inset of scan endpoints from the positivity bound.
pub const SCAN_INSET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("{name} = {value} is outside its domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("attack is unphysical: {0}")]
    Unphysical(String),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    pub tau_a: f64,
    pub tau_b: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub g: f64,
    pub g_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackClass {
    Unphysical,
    SeparableProduct,
    SeparableCorrelated,
    Entangled,
}

impl AttackClass {
    pub fn is_physical(self) -> bool {
        self != AttackClass::Unphysical
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttackClass::Unphysical => "unphysical",
            AttackClass::SeparableProduct => "separable_product",
            AttackClass::SeparableCorrelated => "separable_correlated",
            AttackClass::Entangled => "entangled",
        }
    }
}

impl std::fmt::Display for AttackClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_omega(name: &'static str, omega: f64) -> Result<(), AttackError> {
    if omega.is_finite() && omega >= 1.0 {
        Ok(())
    } else {
        Err(AttackError::Domain {
            name,
            value: omega,
            constraint: "omega >= 1",
        })
    }
}

fn check_tau(name: &'static str, tau: f64) -> Result<(), AttackError> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(AttackError::Domain {
            name,
            value: tau,
            constraint: "0 < tau <= 1",
        })
    }
}

impl AttackParams {
    /// Checks parameter domains; physicality is reported by [`AttackParams::classify`].
    pub fn new(
        tau_a: f64,
        tau_b: f64,
        omega_a: f64,
        omega_b: f64,
        g: f64,
        g_prime: f64,
    ) -> Result<Self, AttackError> {
        check_tau("tau_a", tau_a)?;
        check_tau("tau_b", tau_b)?;
        check_omega("omega_a", omega_a)?;
        check_omega("omega_b", omega_b)?;
        for (name, value) in [("g", g), ("g_prime", g_prime)] {
            if !value.is_finite() {
                return Err(AttackError::Domain {
                    name,
                    value,
                    constraint: "finite",
                });
            }
        }
        Ok(Self {
            tau_a,
            tau_b,
            omega_a,
            omega_b,
            g,
            g_prime,
        })
    }

    /// Pure-loss channels with vacuum reservoirs.
    pub fn pure_loss(tau_a: f64, tau_b: f64) -> Result<Self, AttackError> {
        Self::new(tau_a, tau_b, 1.0, 1.0, 0.0, 0.0)
    }

    pub fn classify(&self) -> AttackClass {
        classify(self.omega_a, self.omega_b, self.g, self.g_prime)
    }

    pub fn reservoir_cm(&self) -> Result<CovarianceMatrix, AttackError> {
        attack_reservoir_cm(self)
    }

    pub fn region(&self) -> AttackRegion {
        AttackRegion::new(self.omega_a, self.omega_b)
    }

    /// The same attack with `(g, g')` replaced by `(-g', -g)`, which swaps `λ` and `λ'`.
    pub fn mirrored(&self) -> Self {
        Self {
            g: -self.g_prime,
            g_prime: -self.g,
            ..*self
        }
    }

    /// Errors unless the attack is physical.
    pub fn ensure_physical(&self) -> Result<AttackClass, AttackError> {
        let class = self.classify();
        if class.is_physical() {
            return Ok(class);
        }
        let bound = (self.omega_a * self.omega_b).sqrt();
        let reason = if self.g.abs() >= bound || self.g_prime.abs() >= bound {
            format!(
                "|g| and |g'| must stay below sqrt(omega_a * omega_b) = {bound} (g = {}, g' = {})",
                self.g, self.g_prime
            )
        } else {
            let nu = reservoir_eigenvalues(self.omega_a, self.omega_b, self.g, self.g_prime);
            format!(
                "uncertainty principle violated: nu_minus^2 = {} < 1",
                nu.nu_minus_sq
            )
        };
        Err(AttackError::Unphysical(reason))
    }
}

/// The reservoir state `[[ω_A I, G], [G, ω_B I]]`, without any physicality check.
pub fn attack_reservoir_cm(params: &AttackParams) -> Result<CovarianceMatrix, AttackError> {
    Ok(gaussian::correlated_thermal_cm(
        params.omega_a,
        params.omega_b,
        params.g,
        params.g_prime,
    )?)
}

/// Squared least symplectic eigenvalues of the reservoir and of its partial transpose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirEigenvalues {
    pub nu_minus_sq: f64,
    pub nu_tilde_minus_sq: f64,
}

pub fn reservoir_eigenvalues(
    omega_a: f64,
    omega_b: f64,
    g: f64,
    g_prime: f64,
) -> ReservoirEigenvalues {
    let det = (omega_a * omega_b - g * g) * (omega_a * omega_b - g_prime * g_prime);
    let sum_sq = omega_a * omega_a + omega_b * omega_b;
    let (nu_minus_sq, _) = two_mode_roots(sum_sq + 2.0 * g * g_prime, det);
    let (nu_tilde_minus_sq, _) = two_mode_roots(sum_sq - 2.0 * g * g_prime, det);
    ReservoirEigenvalues {
        nu_minus_sq,
        nu_tilde_minus_sq,
    }
}

/// Bona fide check followed by the separability classification.
pub fn classify(omega_a: f64, omega_b: f64, g: f64, g_prime: f64) -> AttackClass {
    if !(omega_a >= 1.0 && omega_b >= 1.0) || !g.is_finite() || !g_prime.is_finite() {
        return AttackClass::Unphysical;
    }
    let bound = (omega_a * omega_b).sqrt() * (1.0 + BOUNDARY_TOL);
    if g.abs() >= bound || g_prime.abs() >= bound {
        return AttackClass::Unphysical;
    }
    let nu = reservoir_eigenvalues(omega_a, omega_b, g, g_prime);
    if nu.nu_minus_sq < 1.0 - BOUNDARY_TOL {
        return AttackClass::Unphysical;
    }
    if g.abs() <= PRODUCT_TOL && g_prime.abs() <= PRODUCT_TOL {
        AttackClass::SeparableProduct
    } else if nu.nu_tilde_minus_sq < 1.0 - BOUNDARY_TOL {
        AttackClass::Entangled
    } else {
        AttackClass::SeparableCorrelated
    }
}

pub fn validate(params: &AttackParams) -> AttackClass {
    params.classify()
}

/// Largest `|g|` reachable on the bisector `g' = -g`.
pub fn phi_bound(omega_a: f64, omega_b: f64) -> f64 {
    let first = ((omega_a - 1.0) * (omega_b + 1.0)).max(0.0).sqrt();
    let second = ((omega_a + 1.0) * (omega_b - 1.0)).max(0.0).sqrt();
    first.min(second)
}

/// Accessible correlation plane for fixed thermal variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackRegion {
    pub omega_a: f64,
    pub omega_b: f64,
    pub phi_max: f64,
}

impl AttackRegion {
    pub fn new(omega_a: f64, omega_b: f64) -> Self {
        Self {
            omega_a,
            omega_b,
            phi_max: phi_bound(omega_a, omega_b),
        }
    }

    /// Open bound `√(ω_A ω_B)` on each correlation parameter.
    pub fn positivity_bound(&self) -> f64 {
        (self.omega_a * self.omega_b).sqrt()
    }

    pub fn classify(&self, g: f64, g_prime: f64) -> AttackClass {
        classify(self.omega_a, self.omega_b, g, g_prime)
    }

    pub fn contains(&self, g: f64, g_prime: f64) -> bool {
        self.classify(g, g_prime).is_physical()
    }
}

fn epr_attack(
    tau_a: f64,
    tau_b: f64,
    omega_a: f64,
    omega_b: f64,
    sign: f64,
) -> Result<AttackParams, AttackError> {
    check_omega("omega_a", omega_a)?;
    check_omega("omega_b", omega_b)?;
    let phi = phi_bound(omega_a, omega_b);
    AttackParams::new(tau_a, tau_b, omega_a, omega_b, sign * phi, -sign * phi)
}

/// `(g, g') = (-φ, φ)`: the extremal attack that minimises the rate at fixed thermal noise.
pub fn negative_epr_attack(
    tau_a: f64,
    tau_b: f64,
    omega_a: f64,
    omega_b: f64,
) -> Result<AttackParams, AttackError> {
    epr_attack(tau_a, tau_b, omega_a, omega_b, -1.0)
}

/// `(g, g') = (φ, -φ)`.
pub fn positive_epr_attack(
    tau_a: f64,
    tau_b: f64,
    omega_a: f64,
    omega_b: f64,
) -> Result<AttackParams, AttackError> {
    epr_attack(tau_a, tau_b, omega_a, omega_b, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub g: f64,
    pub g_prime: f64,
    pub class: AttackClass,
}

/// Evenly spaced values over `[-half_width, half_width]`, endpoints included.
pub(crate) fn symmetric_grid(half_width: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|k| -half_width + 2.0 * half_width * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Classifies an `n x n` grid over `|g|, |g'| <= √(ω_A ω_B)(1 - 1e-6)`.
///
/// Points are ordered with `g` outermost.
pub fn scan_correlation_plane(
    omega_a: f64,
    omega_b: f64,
    grid_n: usize,
) -> Result<Vec<RegionPoint>, AttackError> {
    check_omega("omega_a", omega_a)?;
    check_omega("omega_b", omega_b)?;
    let region = AttackRegion::new(omega_a, omega_b);
    let axis = symmetric_grid(region.positivity_bound() * (1.0 - SCAN_INSET), grid_n);
    Ok((0..grid_n * grid_n)
        .into_par_iter()
        .map(|k| {
            let (g, g_prime) = (axis[k / grid_n], axis[k % grid_n]);
            RegionPoint {
                g,
                g_prime,
                class: region.classify(g, g_prime),
            }
        })
        .collect())
}
