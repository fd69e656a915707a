use super::{check_mu, EffectiveAttack, Result};
use crate::attack::AttackParams;
use crate::gaussian::{
    apply_symplectic, beam_splitter_symplectic, condition_on_bell, direct_sum, epr_cm,
    partial_trace, permute_modes, CovarianceMatrix,
};
use nalgebra::DMatrix;

/// Alice and Bob's state after the relay announces its Bell outcome, in closed form.
pub fn post_relay_cm_closed(params: &AttackParams, mu: f64) -> Result<CovarianceMatrix> {
    let eff = EffectiveAttack::from_params(params)?;
    post_relay_cm_closed_effective(&eff, mu)
}

/// `V_ab|γ = μI − (μ² − 1)M` with `M` built from `θ = (τ_A+τ_B)μ + λ` and `θ' = (τ_A+τ_B)μ + λ'`.
pub fn post_relay_cm_closed_effective(eff: &EffectiveAttack, mu: f64) -> Result<CovarianceMatrix> {
    check_mu(mu)?;
    let (ta, tb) = (eff.tau_a, eff.tau_b);
    let theta = eff.tau_sum() * mu + eff.lambda;
    let theta_p = eff.tau_sum() * mu + eff.lambda_prime;
    let cross = (ta * tb).sqrt();
    let m2 = mu * mu - 1.0;
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        ta / theta,      0.0,               -cross / theta, 0.0,
        0.0,             ta / theta_p,      0.0,            cross / theta_p,
        -cross / theta,  0.0,               tb / theta,     0.0,
        0.0,             cross / theta_p,   0.0,            tb / theta_p,
    ]);
    let v = DMatrix::from_diagonal_element(4, 4, mu) - m * m2;
    Ok(CovarianceMatrix::from_symmetric(v))
}

/// The same state obtained by propagating the full twelve-quadrature system.
///
/// Two EPR states `(a, A)` and `(b, B)` and Eve's reservoir `(E1, E2)` are
/// ordered as `a b A E1 E2 B`; `A` mixes with `E1` and `B` with `E2` on beam
/// splitters, the outputs `E1', E2'` are discarded and `A', B'` are Bell-detected.
pub fn post_relay_cm_pipeline(params: &AttackParams, mu: f64) -> Result<CovarianceMatrix> {
    check_mu(mu)?;
    let epr = epr_cm(mu)?;
    let reservoir = params.reservoir_cm()?;
    // a A b B E1 E2 -> a b A E1 E2 B
    let total = direct_sum(&[&epr, &epr, &reservoir]);
    let ordered = permute_modes(&total, &[0, 2, 1, 4, 5, 3])?;
    let s_a = beam_splitter_symplectic(params.tau_a, 2, 3, 6, false)?;
    let s_b = beam_splitter_symplectic(params.tau_b, 4, 5, 6, true)?;
    let mixed = apply_symplectic(&ordered, &(s_b * s_a))?;
    let kept = partial_trace(&mixed, &[0, 1, 2, 5])?;
    Ok(condition_on_bell(&kept)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::sampling::random_physical_cm;
    use crate::gaussian::{gaussian_elimination, pauli_z};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lossless_closed_form() {
        let mu = 7.0;
        let v = post_relay_cm_closed(&AttackParams::pure_loss(1.0, 1.0).unwrap(), mu).unwrap();
        let diag = mu - (mu * mu - 1.0) / (2.0 * mu);
        for k in 0..4 {
            assert_relative_eq!(v.matrix()[(k, k)], diag, epsilon = 1e-12);
        }
        let p = post_relay_cm_pipeline(&AttackParams::pure_loss(1.0, 1.0).unwrap(), mu).unwrap();
        assert!((p.matrix() - v.matrix()).amax() < 1e-10);
    }

    #[test]
    fn correlated_attack_matches_pipeline() {
        let p = AttackParams::new(0.6, 0.85, 3.0, 2.0, -1.2, 0.9).unwrap();
        for mu in [1.5, 66.0, 1e3] {
            let a = post_relay_cm_closed(&p, mu).unwrap();
            let b = post_relay_cm_pipeline(&p, mu).unwrap();
            assert!((a.matrix() - b.matrix()).amax() < 1e-8 * mu);
        }
    }

    /// Bell detection as a balanced beam splitter followed by homodyne of
    /// `q` on one output and `p` on the other.
    fn bell_by_elimination(v: &CovarianceMatrix) -> DMatrix<f64> {
        let n = v.modes();
        let bs = beam_splitter_symplectic(0.5, n - 2, n - 1, n, false).unwrap();
        let mixed = apply_symplectic(v, &bs).unwrap();
        // q₋ is (minus) q of the second output, p₊ is p of the first
        let q = 2 * (n - 1);
        let p = 2 * (n - 2) + 1;
        let reduced = gaussian_elimination(mixed.matrix(), &[q, p]).unwrap();
        // drop the unmeasured conjugate quadratures of the detected modes
        let keep: Vec<usize> = (0..2 * (n - 2)).collect();
        DMatrix::from_fn(keep.len(), keep.len(), |i, j| reduced[(keep[i], keep[j])])
    }

    #[test]
    fn bell_formula_equals_beam_splitter_and_homodyne() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let v = random_physical_cm(4, 5.0, 0.8, &mut rng);
            let formula = condition_on_bell(&v).unwrap();
            let oracle = bell_by_elimination(&v);
            let scale = v.matrix().amax();
            assert!((formula.matrix() - &oracle).amax() < 1e-9 * scale);
        }
    }

    #[test]
    fn theta_diagonal_on_attack_scenario() {
        let p = AttackParams::new(0.7, 0.5, 2.5, 1.5, 0.4, -0.2).unwrap();
        let mu = 12.0;
        let d = super::super::DerivedAttackQuantities::new(&p);
        let epr = epr_cm(mu).unwrap();
        let total = direct_sum(&[&epr, &epr, &p.reservoir_cm().unwrap()]);
        let ordered = permute_modes(&total, &[0, 2, 1, 4, 5, 3]).unwrap();
        let s = beam_splitter_symplectic(p.tau_b, 4, 5, 6, true).unwrap()
            * beam_splitter_symplectic(p.tau_a, 2, 3, 6, false).unwrap();
        let kept = partial_trace(&apply_symplectic(&ordered, &s).unwrap(), &[0, 1, 2, 5]).unwrap();
        let z = pauli_z();
        let (a, b, dd) = (kept.block(2, 2), kept.block(3, 3), kept.block(2, 3));
        let theta = (z * a * z + b - z * dd - dd.transpose() * z) * 0.5;
        assert_relative_eq!(theta[(0, 0)], d.theta(&p, mu) / 2.0, max_relative = 1e-12);
        assert_relative_eq!(theta[(1, 1)], d.theta_prime(&p, mu) / 2.0, max_relative = 1e-12);
        assert!(theta[(0, 1)].abs() < 1e-9);
    }
}
