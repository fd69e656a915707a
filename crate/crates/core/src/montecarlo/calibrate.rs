use super::{simulate, MonteCarloError, RelaySettings, Result, SimConfig};
use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

/// Smallest normal-matrix determinant, relative to its squared trace, that still identifies the gains.
const IDENTIFIABILITY_TOL: f64 = 1e-12;

/// Applied electronic displacements and the relay outcomes they produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectronicRecord {
    pub a_q: f64,
    pub a_p: f64,
    pub b_q: f64,
    pub b_p: f64,
    pub x_minus: f64,
    pub x_plus: f64,
}

/// Electro-optical gains: `q_A = t₁A_q`, `q_B = t₂B_q`, `p_A = t₃A_p`, `p_B = t₄B_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCalibration {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    /// Least-squares standard errors of `t₁…t₄`.
    pub standard_errors: [f64; 4],
    /// Mean squared residuals of the `x_−r` and `x_+r` fits.
    pub residual_variance: [f64; 2],
}

/// Simulated electronic records: the optical displacements reaching the relay
/// divided by `gains`. Bob's gains therefore include his link's `√τ_B`, and
/// the optical displacements are the records before the `κ₂` rescaling.
pub fn simulate_electronic(
    config: &SimConfig,
    relay: &RelaySettings,
    gains: [f64; 4],
) -> Result<Vec<ElectronicRecord>> {
    if gains.iter().any(|g| !(g.abs() > 0.0) || !g.is_finite()) {
        return Err(MonteCarloError::Domain {
            name: "gain",
            value: gains.iter().copied().find(|g| !(g.abs() > 0.0)).unwrap_or(f64::NAN),
            constraint: "non-zero and finite",
        });
    }
    let alice = 1.0 / relay.kappa_2;
    let bob = config.tau_b.sqrt() / relay.kappa_2;
    Ok(simulate(config, relay)?
        .into_par_iter()
        .map(|s| ElectronicRecord {
            a_q: alice * s.q_a / gains[0],
            b_q: bob * s.q_b / gains[1],
            a_p: alice * s.p_a / gains[2],
            b_p: bob * s.p_b / gains[3],
            x_minus: s.x_minus,
            x_plus: s.x_plus,
        })
        .collect())
}

struct Fit {
    coef: Vector2<f64>,
    se: Vector2<f64>,
    residual_variance: f64,
}

/// Least squares of `y` on two regressors (all centred), with standard errors.
fn fit_pair(rows: &[(f64, f64, f64)]) -> Result<Fit> {
    let n = rows.len() as f64;
    if rows.len() < 3 {
        return Err(MonteCarloError::TooFewRounds(rows.len()));
    }
    let mean = rows.iter().fold((0.0, 0.0, 0.0), |m, r| (m.0 + r.0, m.1 + r.1, m.2 + r.2));
    let mean = (mean.0 / n, mean.1 / n, mean.2 / n);
    let mut xtx = Matrix2::zeros();
    let mut xty = Vector2::zeros();
    for &(u, v, y) in rows {
        let x = Vector2::new(u - mean.0, v - mean.1);
        xtx += x * x.transpose();
        xty += x * (y - mean.2);
    }
    let trace = xtx.trace();
    if !(xtx.determinant() > IDENTIFIABILITY_TOL * trace * trace) {
        return Err(MonteCarloError::Unidentifiable(
            "electronic displacements carry no independent signal",
        ));
    }
    let inv = xtx.try_inverse().ok_or(MonteCarloError::Unidentifiable(
        "singular normal equations",
    ))?;
    let coef = inv * xty;
    let rss: f64 = rows
        .iter()
        .map(|&(u, v, y)| {
            let r = (y - mean.2) - coef[0] * (u - mean.0) - coef[1] * (v - mean.1);
            r * r
        })
        .sum();
    let residual_variance = rss / (n - 3.0);
    Ok(Fit {
        coef,
        se: Vector2::new(
            (residual_variance * inv[(0, 0)]).sqrt(),
            (residual_variance * inv[(1, 1)]).sqrt(),
        ),
        residual_variance,
    })
}

/// Fits the gains minimising `⟨[x_−r − (t₁A_q − t₂B_q)/√2]²⟩` and
/// `⟨[x_+r − (t₃A_p + t₄B_p)/√2]²⟩`.
///
/// The relay outcomes weigh the optical quadratures by `κ₂`, which is divided
/// out so the gains refer to the optical displacements themselves.
pub fn calibrate_gains(records: &[ElectronicRecord], relay: &RelaySettings) -> Result<GainCalibration> {
    let minus: Vec<_> = records.iter().map(|r| (r.a_q, r.b_q, r.x_minus)).collect();
    let plus: Vec<_> = records.iter().map(|r| (r.a_p, r.b_p, r.x_plus)).collect();
    let fm = fit_pair(&minus)?;
    let fp = fit_pair(&plus)?;
    let scale = SQRT_2 / relay.kappa_2;
    Ok(GainCalibration {
        t1: scale * fm.coef[0],
        t2: -scale * fm.coef[1],
        t3: scale * fp.coef[0],
        t4: scale * fp.coef[1],
        standard_errors: [
            scale * fm.se[0],
            scale * fm.se[1],
            scale * fp.se[0],
            scale * fp.se[1],
        ],
        residual_variance: [fm.residual_variance, fp.residual_variance],
    })
}
