use super::{check_mu, check_xi, Bits, Modulation, NoiseBudget, RateError, RateResult, Result};
use crate::gaussian::{
    condition_on_heterodyne, h_entropy, symplectic_eigenvalues, CovarianceMatrix, GaussianError,
};
use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

/// Information terms read off a post-relay covariance matrix `V_ab|γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteRateTerms {
    pub mu: f64,
    pub i_ab: f64,
    pub i_e: f64,
    /// Noise read off the data, `μ·2^{−I_AB}`; it reaches the attack's `χ` only as `μ → ∞`.
    pub chi: f64,
    /// Symplectic spectrum of `V_ab|γ`, after clamping.
    pub nu: Vec<f64>,
    /// Symplectic eigenvalue of Bob's mode conditioned on Alice's heterodyne.
    pub nu_conditional: f64,
}

impl FiniteRateTerms {
    pub fn into_result(self, xi: f64, tau_a: f64, tau_b: f64) -> RateResult {
        RateResult {
            i_ab: Bits::finite(self.i_ab),
            i_e: Bits::finite(self.i_e),
            rate: xi * self.i_ab - self.i_e,
            xi,
            noise: NoiseBudget::new(self.chi, tau_a, tau_b),
            modulation: Modulation::Finite { mu: self.mu },
        }
    }

    pub fn rate(&self, xi: f64) -> Result<f64> {
        check_xi(xi)?;
        Ok(xi * self.i_ab - self.i_e)
    }
}

fn clamp_eigenvalue(nu: f64, tol: f64) -> Result<f64> {
    if nu.is_nan() || nu < 1.0 - tol {
        Err(RateError::UnphysicalState { nu_min: nu, tol })
    } else {
        Ok(nu.max(1.0))
    }
}

/// `I_AB = ½ log₂[det(V_b + I) / det(V_b|α + I)]`, `χ = μ·2^{−I_AB}` and
/// `I_E = Σ h(ν_k) − h(ν_b|α)`, with Alice heterodyning mode `a`.
///
/// Symplectic eigenvalues in `[1 − tol, 1)` are treated as 1; smaller ones
/// make the state unphysical.
pub fn finite_rate_terms(cm: &CovarianceMatrix, mu: f64, tol: f64) -> Result<FiniteRateTerms> {
    check_mu(mu)?;
    if cm.modes() != 2 {
        return Err(GaussianError::DimensionMismatch {
            expected: 2,
            got: cm.modes(),
        }
        .into());
    }
    let v_b = cm.block(1, 1);
    let v_b_alpha = condition_on_heterodyne(cm, 0)?;
    let v_b_alpha_2 = v_b_alpha.block(0, 0);
    let one = Matrix2::identity();
    let ratio = (v_b + one).determinant() / (v_b_alpha_2 + one).determinant();
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(RateError::Degenerate("non-positive mutual-information ratio"));
    }
    let i_ab = 0.5 * ratio.log2();
    let chi = mu / ratio.sqrt();

    let nu = symplectic_eigenvalues(cm)
        .eigenvalues
        .into_iter()
        .map(|x| clamp_eigenvalue(x, tol))
        .collect::<Result<Vec<_>>>()?;
    let nu_conditional = clamp_eigenvalue(v_b_alpha_2.determinant().max(0.0).sqrt(), tol)?;
    let mut s_ab = 0.0;
    for &x in &nu {
        s_ab += h_entropy(x)?;
    }
    let i_e = s_ab - h_entropy(nu_conditional)?;
    Ok(FiniteRateTerms {
        mu,
        i_ab,
        i_e,
        chi,
        nu,
        nu_conditional,
    })
}
