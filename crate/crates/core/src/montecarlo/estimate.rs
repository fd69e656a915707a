use super::simulate::{latent_map, simulate_latent, LatentMoments, LATENT_DIM};
use super::{
    model_moments, MomentAccumulator, MonteCarloError, RelaySettings, Result, SampleRecord,
    SimConfig, DEFAULT_CHECKPOINTS, JACKKNIFE_GROUPS, RNG_ALGORITHM,
};
use crate::gaussian::{gaussian_elimination, CovarianceMatrix, PHYSICAL_TOL};
use crate::rate::{
    finite_rate_terms, rate_effective, EffectiveAttack, Modulation, ProtocolParams, RateResult,
};
use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

/// Relative mismatch allowed between the symplectic invariants before and after symmetrization.
const INVARIANT_TOL: f64 = 1e-8;

/// Sample means and unbiased covariance of `(q_A, p_A, q_B, p_B, x_−r, x_+r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMoments {
    pub n: usize,
    pub means: DVector<f64>,
    pub cm: DMatrix<f64>,
}

pub fn estimate_moments(samples: &[SampleRecord]) -> SampleMoments {
    let rows: Vec<f64> = samples.iter().flat_map(|s| s.as_array()).collect();
    let acc = MomentAccumulator::from_rows(6, &rows);
    SampleMoments {
        n: acc.count(),
        means: acc.mean(),
        cm: acc.covariance(),
    }
}

fn project(acc: &MomentAccumulator, l: &DMatrix<f64>) -> SampleMoments {
    SampleMoments {
        n: acc.count(),
        means: l * acc.mean(),
        cm: l * acc.covariance() * l.transpose(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissivityEstimate {
    pub tau_a: f64,
    pub tau_b: f64,
}

/// Transmissivities from the regression of the relay outcomes on the records.
///
/// With `x_−r = (q_A − √τ_B q_B)/√2 + …` and `x_+r = (p_A + √τ_B p_B)/√2 + …`,
/// each `√τ` is the average of its two regression coefficients times `√2`.
pub fn transmissivity_estimates(cm: &DMatrix<f64>) -> Result<TransmissivityEstimate> {
    check_global(cm)?;
    let records = cm.view((0, 0), (4, 4)).into_owned();
    let cross = cm.view((4, 0), (2, 4)).into_owned();
    let inv = records
        .cholesky()
        .ok_or(MonteCarloError::DataQuality("record covariance is not positive definite"))?
        .inverse();
    let coef = cross * inv;
    let sqrt_a = (coef[(0, 0)] + coef[(1, 1)]) * FRAC_1_SQRT_2;
    let sqrt_b = (-coef[(0, 2)] + coef[(1, 3)]) * FRAC_1_SQRT_2;
    Ok(TransmissivityEstimate {
        tau_a: sqrt_a * sqrt_a,
        tau_b: sqrt_b * sqrt_b,
    })
}

fn check_global(cm: &DMatrix<f64>) -> Result<()> {
    if cm.shape() != (6, 6) {
        return Err(MonteCarloError::DataQuality("global covariance must be 6x6"));
    }
    Ok(())
}

/// Gaussian elimination of the relay outcomes: `V_AB − C R⁻¹ Cᵀ`.
pub fn condition_classical(global_cm: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_global(global_cm)?;
    Ok(gaussian_elimination(global_cm, &[4, 5])?)
}

/// Two-mode normal form `[[aI, diag(c₁, c₂)], [diag(c₁, c₂), bI]]` and the
/// local symplectic maps that produce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalForm {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    /// `T_A` with `T_A A T_Aᵀ = aI`, likewise for Bob.
    pub alice_transform: [[f64; 2]; 2],
    pub bob_transform: [[f64; 2]; 2],
}

impl NormalForm {
    pub fn matrix(&self) -> DMatrix<f64> {
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            self.a,  0.0,     self.c1, 0.0,
            0.0,     self.a,  0.0,     self.c2,
            self.c1, 0.0,     self.b,  0.0,
            0.0,     self.c2, 0.0,     self.b,
        ]);
        m
    }

    /// Correlation `c` of the symmetric form `cZ`, exact when `c₂ = −c₁`.
    pub fn c(&self) -> f64 {
        (self.c1 - self.c2) / 2.0
    }
}

fn to_array(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn inverse_sqrt(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(MonteCarloError::DataQuality("local block is not positive definite"));
    }
    let d = Matrix2::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Local rotations and squeezings bringing a conditional covariance matrix to normal form.
///
/// `a = √det A` and `b = √det B`; the correlations come from the singular
/// values of the rescaled cross block, signed so that both local maps are
/// proper symplectic. The invariants `det V` and `det A + det B + 2 det C`
/// are checked before returning.
pub fn symmetrize_to_normal_form(conditional_cm: &DMatrix<f64>) -> Result<NormalForm> {
    if conditional_cm.shape() != (4, 4) {
        return Err(MonteCarloError::DataQuality("conditional covariance must be 4x4"));
    }
    let block = |i: usize, j: usize| -> Matrix2<f64> {
        conditional_cm.fixed_view::<2, 2>(2 * i, 2 * j).into_owned()
    };
    let (a_blk, b_blk, c_blk) = (block(0, 0), block(1, 1), block(0, 1));
    let (det_a, det_b) = (a_blk.determinant(), b_blk.determinant());
    if !(det_a > 0.0 && det_b > 0.0) {
        return Err(MonteCarloError::DataQuality("local block has non-positive determinant"));
    }
    let (a, b) = (det_a.sqrt(), det_b.sqrt());
    let s_a = inverse_sqrt(&a_blk)? * a.sqrt();
    let s_b = inverse_sqrt(&b_blk)? * b.sqrt();
    let svd = (s_a * c_blk * s_b.transpose()).svd(true, true);
    let u = svd.u.ok_or(MonteCarloError::DataQuality("singular value decomposition failed"))?;
    let w = svd
        .v_t
        .ok_or(MonteCarloError::DataQuality("singular value decomposition failed"))?
        .transpose();
    let (det_u, det_w) = (u.determinant().signum(), w.determinant().signum());
    let u_rot = u * Matrix2::new(1.0, 0.0, 0.0, det_u);
    let w_rot = w * Matrix2::new(1.0, 0.0, 0.0, det_w);
    let nf = NormalForm {
        a,
        b,
        c1: svd.singular_values[0],
        c2: svd.singular_values[1] * det_u * det_w,
        alice_transform: to_array(&(u_rot.transpose() * s_a)),
        bob_transform: to_array(&(w_rot.transpose() * s_b)),
    };

    let det_v = conditional_cm.determinant();
    let delta = det_a + det_b + 2.0 * c_blk.determinant();
    let det_nf = (a * b - nf.c1 * nf.c1) * (a * b - nf.c2 * nf.c2);
    let delta_nf = a * a + b * b + 2.0 * nf.c1 * nf.c2;
    let scale = det_a * det_b;
    if (det_v - det_nf).abs() > INVARIANT_TOL * scale
        || (delta - delta_nf).abs() > INVARIANT_TOL * (det_a + det_b)
    {
        return Err(MonteCarloError::DataQuality(
            "normal form does not reproduce the symplectic invariants",
        ));
    }
    Ok(nf)
}

/// `V_ab|γ = η²·V_cond − I`, mapping classical conditional moments to the
/// covariance matrix of the equivalent entanglement-based state.
pub fn classical_to_quantum_cm(normal_form: &NormalForm, eta_sq: f64) -> Result<CovarianceMatrix> {
    let v = normal_form.matrix() * eta_sq - DMatrix::identity(4, 4);
    Ok(CovarianceMatrix::new(v)?)
}

/// Largest deficit `1 − ν` tolerated from sampling noise: `min(0.5, 4μ√(2/n))`.
pub fn physicality_tolerance(mu: f64, n: usize) -> f64 {
    (4.0 * mu * (2.0 / n.max(1) as f64).sqrt()).min(0.5)
}

/// `R = ξ·I_AB − I_E` from a reconstructed state.
///
/// Symplectic eigenvalues within `tol` below 1 are read as 1; anything lower
/// is rejected as unphysical.
pub fn empirical_rate(
    quantum_cm: &CovarianceMatrix,
    mu: f64,
    xi: f64,
    tol: f64,
    tau: TransmissivityEstimate,
) -> Result<RateResult> {
    let terms = finite_rate_terms(quantum_cm, mu, tol)?;
    terms.rate(xi)?;
    Ok(terms.into_result(xi, tau.tau_a.clamp(1e-12, 1.0), tau.tau_b.clamp(1e-12, 1.0)))
}

/// Finite-modulation rate of the attack equivalent to the simulated channel at `r = 1`:
/// pure loss on Bob's link plus the injected excess and electronic noise.
pub fn reference_rate(config: &SimConfig, relay: &RelaySettings) -> Result<RateResult> {
    config.validate()?;
    let extra = config.excess_noise_variance() + relay.detection_noise_variance - 1.0;
    let lambda = (1.0 - config.tau_b) + 2.0 * extra;
    let eff = EffectiveAttack::new(1.0, config.tau_b, lambda, lambda)?;
    Ok(rate_effective(
        &eff,
        Modulation::Finite { mu: config.mu() },
        config.xi,
    )?)
}

/// Every intermediate of the estimation pipeline for one set of moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub moments: SampleMoments,
    pub transmissivity: TransmissivityEstimate,
    pub conditional_cm: DMatrix<f64>,
    pub normal_form: NormalForm,
    pub quantum_cm: CovarianceMatrix,
    pub tolerance: f64,
    pub rate: RateResult,
    pub det_ratio: f64,
}

struct Pipeline {
    l: DMatrix<f64>,
    mu: f64,
    eta_sq: f64,
    xi: f64,
    model_conditional_det: f64,
}

impl Pipeline {
    fn new(config: &SimConfig, relay: &RelaySettings) -> Result<Self> {
        let protocol = ProtocolParams::from_phi(config.phi)?;
        let model = condition_classical(&model_moments(config, relay)?)?;
        Ok(Self {
            l: latent_map(config, relay),
            mu: protocol.mu,
            eta_sq: protocol.eta_sq(),
            xi: config.xi,
            model_conditional_det: model.determinant(),
        })
    }

    fn run(&self, acc: &MomentAccumulator) -> Result<PipelineOutput> {
        let moments = project(acc, &self.l);
        let tolerance = physicality_tolerance(self.mu, moments.n);
        self.run_moments(moments, tolerance)
    }

    fn run_moments(&self, moments: SampleMoments, tolerance: f64) -> Result<PipelineOutput> {
        let transmissivity = transmissivity_estimates(&moments.cm)?;
        let conditional_cm = condition_classical(&moments.cm)?;
        let normal_form = symmetrize_to_normal_form(&conditional_cm)?;
        let quantum_cm = classical_to_quantum_cm(&normal_form, self.eta_sq)?;
        let rate = empirical_rate(&quantum_cm, self.mu, self.xi, tolerance, transmissivity)?;
        let det_ratio = conditional_cm.determinant() / self.model_conditional_det;
        Ok(PipelineOutput {
            moments,
            transmissivity,
            conditional_cm,
            normal_form,
            quantum_cm,
            tolerance,
            rate,
            det_ratio,
        })
    }
}

/// Pipeline rate for one relay setting, from simulated moments or, without
/// them, from the exact model moments (read with the default physicality tolerance).
pub(crate) fn pipeline_rate(
    config: &SimConfig,
    relay: &RelaySettings,
    latent: Option<&LatentMoments>,
) -> Result<f64> {
    let pipeline = Pipeline::new(config, relay)?;
    let out = match latent {
        Some(l) => pipeline.run(&l.total())?,
        None => {
            let cm = model_moments(config, relay)?;
            let moments = SampleMoments {
                n: usize::MAX,
                means: DVector::zeros(6),
                cm,
            };
            pipeline.run_moments(moments, PHYSICAL_TOL)?
        }
    };
    Ok(out.rate.rate)
}

/// Estimates at one sample size of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub tau_b_hat: Option<f64>,
    pub det_ratio: Option<f64>,
    pub rate: Option<f64>,
    /// Why the pipeline failed at this size, if it did.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub config: SimConfig,
    pub relay: RelaySettings,
    pub rng: String,
    pub n_rounds: usize,
    pub means: Vec<f64>,
    pub global_cm_hat: Vec<Vec<f64>>,
    pub tau_a_hat: f64,
    pub tau_b_hat: f64,
    pub tau_b_se: Option<f64>,
    pub conditional_cm: Vec<Vec<f64>>,
    pub normal_form: NormalForm,
    pub quantum_cm: CovarianceMatrix,
    pub symplectic_spectrum: Vec<f64>,
    pub physicality_tol: f64,
    pub rate: RateResult,
    /// Jackknife standard error of the rate over contiguous groups of rounds.
    pub rate_se: Option<f64>,
    pub det_ratio: f64,
    /// Analytic finite-modulation rate of the equivalent attack.
    pub reference_rate: Option<f64>,
    pub convergence: Vec<ConvergencePoint>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Delete-a-group jackknife: `√((K−1)/K · Σ (θ₋ₖ − θ̄)²)`.
fn jackknife_se(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    ((k - 1.0) / k * values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
}

fn convergence_points(
    pipeline: &Pipeline,
    latent: &LatentMoments,
    checkpoints: &[usize],
) -> Vec<ConvergencePoint> {
    let total = latent.rounds();
    let mut sizes: Vec<usize> = checkpoints
        .iter()
        .map(|&n| latent.prefix(n).count())
        .filter(|&n| n <= total)
        .collect();
    sizes.push(total);
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| match pipeline.run(&latent.prefix(n)) {
            Ok(out) => ConvergencePoint {
                n,
                tau_b_hat: Some(out.transmissivity.tau_b),
                det_ratio: Some(out.det_ratio),
                rate: Some(out.rate.rate),
                error: None,
            },
            Err(e) => ConvergencePoint {
                n,
                tau_b_hat: None,
                det_ratio: None,
                rate: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// Runs the estimation pipeline on simulated moments.
pub fn estimate_from_moments(
    config: &SimConfig,
    relay: &RelaySettings,
    latent: &LatentMoments,
    checkpoints: &[usize],
) -> Result<EstimationReport> {
    config.validate()?;
    let pipeline = Pipeline::new(config, relay)?;
    let total = latent.total();
    let full = pipeline.run(&total)?;

    let groups = latent.groups(JACKKNIFE_GROUPS);
    let replicates: Option<Vec<(f64, f64)>> = if groups.len() < 2 {
        None
    } else {
        (0..groups.len())
            .map(|k| {
                let rest = MomentAccumulator::merged(
                    LATENT_DIM,
                    groups.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, g)| g),
                );
                pipeline
                    .run(&rest)
                    .ok()
                    .map(|o| (o.rate.rate, o.transmissivity.tau_b))
            })
            .collect()
    };
    let (rate_se, tau_b_se) = match replicates {
        Some(r) => {
            let rates: Vec<f64> = r.iter().map(|x| x.0).collect();
            let taus: Vec<f64> = r.iter().map(|x| x.1).collect();
            (Some(jackknife_se(&rates)), Some(jackknife_se(&taus)))
        }
        None => (None, None),
    };

    Ok(EstimationReport {
        config: config.clone(),
        relay: *relay,
        rng: RNG_ALGORITHM.to_string(),
        n_rounds: full.moments.n,
        means: full.moments.means.iter().copied().collect(),
        global_cm_hat: rows(&full.moments.cm),
        tau_a_hat: full.transmissivity.tau_a,
        tau_b_hat: full.transmissivity.tau_b,
        tau_b_se,
        conditional_cm: rows(&full.conditional_cm),
        normal_form: full.normal_form,
        symplectic_spectrum: full.quantum_cm.symplectic_eigenvalues().eigenvalues,
        quantum_cm: full.quantum_cm,
        physicality_tol: full.tolerance,
        rate: full.rate,
        rate_se,
        det_ratio: full.det_ratio,
        reference_rate: reference_rate(config, relay).ok().map(|r| r.rate),
        convergence: convergence_points(&pipeline, latent, checkpoints),
    })
}

/// Simulates `config` and runs the full estimation pipeline with the default checkpoints.
pub fn estimate(config: &SimConfig, relay: &RelaySettings) -> Result<EstimationReport> {
    let latent = simulate_latent(config, relay)?;
    estimate_from_moments(config, relay, &latent, &DEFAULT_CHECKPOINTS)
}

/// `τ̂_B`, determinant ratio and rate at each checkpoint size, plus the full run.
pub fn convergence_study(
    config: &SimConfig,
    relay: &RelaySettings,
    checkpoints: &[usize],
) -> Result<Vec<ConvergencePoint>> {
    let pipeline = Pipeline::new(config, relay)?;
    let latent = simulate_latent(config, relay)?;
    Ok(convergence_points(&pipeline, &latent, checkpoints))
}
