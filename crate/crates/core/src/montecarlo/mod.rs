//! Sample-level simulation of the relay protocol and the moment-based
//! estimation pipeline that turns recorded data into a key rate.
//!
//! Records are Alice's and Bob's classical displacements `(q_A, p_A, q_B, p_B)`
//! together with the relay outcomes `(x_−r, x_+r)`, all in vacuum units. Bob's
//! displacements are his nominal (unattenuated) modulation; the link loss
//! appears only through the `√τ_B` factor in the relay outcomes.

mod calibrate;
mod estimate;
mod moments;
mod optimize;
mod simulate;

pub use calibrate::{calibrate_gains, simulate_electronic, ElectronicRecord, GainCalibration};
pub use estimate::{
    classical_to_quantum_cm, condition_classical, convergence_study, empirical_rate, estimate,
    estimate_from_moments, estimate_moments, physicality_tolerance, reference_rate,
    symmetrize_to_normal_form, transmissivity_estimates, ConvergencePoint, EstimationReport,
    NormalForm, PipelineOutput, SampleMoments, TransmissivityEstimate,
};
pub use moments::MomentAccumulator;
pub use optimize::{optimize_r, RelayOptimum, R_RANGE};
pub use simulate::{
    latent_map, latent_variances, model_moments, simulate, simulate_latent, LatentMoments,
    LATENT_DIM,
};

use crate::gaussian::GaussianError;
use crate::rate::RateError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rounds drawn from one RNG stream; chunk `k` uses stream `k` of the seed.
pub const CHUNK_SIZE: usize = 1000;
/// Leave-one-group-out replicates used for standard errors.
pub const JACKKNIFE_GROUPS: usize = 20;
/// Generator recorded in every report.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), one stream per 1000-round chunk";
pub const DEFAULT_PHI: f64 = 65.0;
pub const DEFAULT_CHECKPOINTS: [usize; 7] = [
    1_000, 3_000, 10_000, 30_000, 100_000, 300_000, 1_000_000,
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("{name} = {value} is outside its domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("not enough rounds: {0}")]
    TooFewRounds(usize),
    #[error("reconstructed state is unphysical: smallest symplectic eigenvalue {nu_min} below 1 - {tol}")]
    Unphysical { nu_min: f64, tol: f64 },
    #[error("data quality: {0}")]
    DataQuality(&'static str),
    #[error("gains are not identifiable from the data: {0}")]
    Unidentifiable(&'static str),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Rate(RateError),
}

impl From<RateError> for MonteCarloError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::UnphysicalState { nu_min, tol } => MonteCarloError::Unphysical { nu_min, tol },
            other => MonteCarloError::Rate(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, MonteCarloError>;

fn domain(name: &'static str, value: f64, constraint: &'static str) -> MonteCarloError {
    MonteCarloError::Domain {
        name,
        value,
        constraint,
    }
}

/// How Bob's link loss is realised at sample level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// Bob's modulation is attenuated to `τ_B·φ` and the relay sees unit vacuum noise.
    #[default]
    ModulationAttenuation,
    /// Each coherent state carries its own vacuum noise and Bob's passes a
    /// beam splitter with a vacuum environment.
    BeamSplitter,
}

/// Per-party mixing of the recorded quadratures before they reach the relay:
/// the optical displacement is `M · (q, p)ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossTalk {
    pub alice: [[f64; 2]; 2],
    pub bob: [[f64; 2]; 2],
}

impl Default for CrossTalk {
    fn default() -> Self {
        Self {
            alice: [[1.0, 0.0], [0.0, 1.0]],
            bob: [[1.0, 0.0], [0.0, 1.0]],
        }
    }
}

impl CrossTalk {
    /// Amplitude/phase mixing `[[1, ε_qp],[ε_pq, 1]]` with a `q`/`p` gain imbalance.
    pub fn imbalance(q_gain: f64, p_gain: f64, mixing: f64) -> Self {
        let m = [[q_gain, mixing], [mixing, p_gain]];
        Self { alice: m, bob: m }
    }
}

/// Relay current rescaling `r` and the resulting quadrature weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaySettings {
    pub r: f64,
    pub kappa_1: f64,
    pub kappa_2: f64,
    /// Total noise variance of each relay quadrature, vacuum included.
    pub detection_noise_variance: f64,
}

impl RelaySettings {
    pub fn new(r: f64, detection_noise_variance: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(domain("r", r, "r > 0"));
        }
        if !(detection_noise_variance >= 1.0) || !detection_noise_variance.is_finite() {
            return Err(domain(
                "detection_noise_variance",
                detection_noise_variance,
                ">= 1",
            ));
        }
        let norm = (2.0 * (1.0 + r * r)).sqrt();
        Ok(Self {
            r,
            kappa_1: (1.0 - r) / norm,
            kappa_2: (1.0 + r) / norm,
            detection_noise_variance,
        })
    }

    pub fn ideal() -> Self {
        Self::new(1.0, 1.0).expect("r = 1 is valid")
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        Self::new(r, self.detection_noise_variance)
    }

    /// `(1 − r)/(1 + r)`, the weight of the conjugate relay variable.
    pub fn mixing(&self) -> f64 {
        self.kappa_1 / self.kappa_2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Modulation variance of the recorded displacements.
    pub phi: f64,
    /// Equivalent transmissivity of Bob's link.
    pub tau_b: f64,
    pub n_rounds: usize,
    pub seed: u64,
    pub xi: f64,
    /// Excess noise `ε` injected at the relay input, referred to Alice.
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub cross_talk: Option<CrossTalk>,
    #[serde(default)]
    pub channel: ChannelModel,
}

impl SimConfig {
    pub fn clean(tau_b: f64, n_rounds: usize, seed: u64) -> Self {
        Self {
            phi: DEFAULT_PHI,
            tau_b,
            n_rounds,
            seed,
            xi: 1.0,
            epsilon: 0.0,
            cross_talk: None,
            channel: ChannelModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0) || !self.phi.is_finite() {
            return Err(domain("phi", self.phi, "phi > 0"));
        }
        if !(self.tau_b > 0.0 && self.tau_b <= 1.0) {
            return Err(domain("tau_b", self.tau_b, "0 < tau_b <= 1"));
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(domain("xi", self.xi, "0 < xi <= 1"));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(domain("epsilon", self.epsilon, "epsilon >= 0"));
        }
        if self.n_rounds < 2 {
            return Err(MonteCarloError::TooFewRounds(self.n_rounds));
        }
        Ok(())
    }

    /// `μ = φ + 1`.
    pub fn mu(&self) -> f64 {
        self.phi + 1.0
    }

    /// Variance added to each relay-input quadrature so that `χ` grows by `ε`
    /// with `τ_A = 1`: `ε·τ_Aτ_B/(2(τ_A + τ_B))`.
    pub fn excess_noise_variance(&self) -> f64 {
        self.epsilon * self.tau_b / (2.0 * (1.0 + self.tau_b))
    }
}

/// One protocol round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub q_a: f64,
    pub p_a: f64,
    pub q_b: f64,
    pub p_b: f64,
    pub x_minus: f64,
    pub x_plus: f64,
}

impl SampleRecord {
    pub fn as_array(&self) -> [f64; 6] {
        [self.q_a, self.p_a, self.q_b, self.p_b, self.x_minus, self.x_plus]
    }

    /// Alice's amplitude `α = (q_A + i p_A)/2`.
    pub fn alpha(&self) -> (f64, f64) {
        (self.q_a / 2.0, self.p_a / 2.0)
    }

    pub fn beta(&self) -> (f64, f64) {
        (self.q_b / 2.0, self.p_b / 2.0)
    }

    /// Relay outcome `γ_r = (x_−r + i x_+r)/√2`.
    pub fn gamma(&self) -> (f64, f64) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (self.x_minus * s, self.x_plus * s)
    }
}
