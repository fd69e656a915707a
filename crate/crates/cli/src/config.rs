//! Subcommand parameters. Each struct is filled from the command line and
//! from the matching table of the TOML config file; flags win.

use crate::output::Format;
use crate::units::TauSpec;
use crate::Invalid;
use clap::{Args, ValueEnum};
use cvmdi_core::montecarlo::{ChannelModel, CrossTalk};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_XI: f64 = 0.97;
pub const DEFAULT_PHI: f64 = 65.0;

macro_rules! overlay {
    ($flags:expr, $file:expr; $($field:ident),+ $(,)?) => {
        Self { $($field: $flags.$field.or($file.$field)),+ }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulationMode {
    Finite,
    Asymptotic,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateArgs {
    /// Alice's link: transmissivity, "NNkm" or "NNdB".
    #[arg(long)]
    pub tau_a: Option<TauSpec>,
    /// Bob's link: transmissivity, "NNkm" or "NNdB".
    #[arg(long)]
    pub tau_b: Option<TauSpec>,
    /// Thermal variance of Eve's first reservoir mode (explicit attack).
    #[arg(long)]
    pub omega_a: Option<f64>,
    #[arg(long)]
    pub omega_b: Option<f64>,
    /// Reservoir q-correlation (explicit attack).
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    /// Reservoir p-correlation (explicit attack).
    #[arg(long, allow_hyphen_values = true)]
    pub g_prime: Option<f64>,
    /// Equivalent noise; the rate is minimised over attacks with this value.
    #[arg(long)]
    pub chi: Option<f64>,
    /// Excess noise on top of the loss, `chi = chi_loss + epsilon`.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Reconciliation efficiency.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Modulation variance; `mu = phi + 1`.
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, value_enum)]
    pub modulation: Option<ModulationMode>,
    /// Fibre loss in dB/km, used for "NNkm" transmissivities.
    #[arg(long)]
    pub loss_rate: Option<f64>,
}

impl RateArgs {
    pub fn overlay(self, file: Self) -> Self {
        overlay!(self, file; tau_a, tau_b, omega_a, omega_b, g, g_prime, chi, epsilon, xi, phi, mu,
            modulation, loss_rate)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdArgs {
    /// Alice-relay distances in km, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
    /// Alice-relay distances as "start:stop:count" (km).
    #[arg(long)]
    pub r_range: Option<String>,
    /// Excess noise values; one curve per value.
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long)]
    pub loss_rate: Option<f64>,
}

impl ThresholdArgs {
    pub fn overlay(self, file: Self) -> Self {
        overlay!(self, file; r, r_range, epsilon, loss_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    /// The (g, g') plane at fixed thermal variances.
    Correlation,
    /// The (tau_A, tau_B) plane at fixed excess noise.
    Transmissivity,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanArgs {
    #[arg(value_enum)]
    pub plane: Option<Plane>,
    #[arg(long)]
    pub omega_a: Option<f64>,
    #[arg(long)]
    pub omega_b: Option<f64>,
    /// Points per axis.
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Link transmissivities for rate and noise columns of a correlation scan.
    #[arg(long)]
    pub tau_a: Option<TauSpec>,
    #[arg(long)]
    pub tau_b: Option<TauSpec>,
    /// Smallest transmissivity of a transmissivity scan.
    #[arg(long)]
    pub tau_min: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub loss_rate: Option<f64>,
}

impl ScanArgs {
    pub fn overlay(self, file: Self) -> Self {
        overlay!(self, file; plane, omega_a, omega_b, grid_n, tau_a, tau_b, tau_min, tau_max,
            epsilon, loss_rate)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionArgs {
    #[arg(long)]
    pub omega_a: Option<f64>,
    #[arg(long)]
    pub omega_b: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
}

impl RegionArgs {
    pub fn overlay(self, file: Self) -> Self {
        overlay!(self, file; omega_a, omega_b, grid_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    ModulationAttenuation,
    BeamSplitter,
}

impl From<Channel> for ChannelModel {
    fn from(c: Channel) -> Self {
        match c {
            Channel::ModulationAttenuation => ChannelModel::ModulationAttenuation,
            Channel::BeamSplitter => ChannelModel::BeamSplitter,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateArgs {
    #[arg(long)]
    pub tau_b: Option<TauSpec>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub n_rounds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Relay rescaling parameter.
    #[arg(long)]
    pub r: Option<f64>,
    /// Variance of the relay's detection noise (1 = ideal).
    #[arg(long)]
    pub detection_noise: Option<f64>,
    #[arg(long, value_enum)]
    pub channel: Option<Channel>,
    /// Round counts at which the convergence series is evaluated.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    /// Also maximise the rate over the relay parameter r.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub optimize_r: Option<bool>,
    /// Write the raw samples to this CSV file.
    #[arg(long)]
    pub dump_samples: Option<PathBuf>,
    #[arg(long)]
    pub loss_rate: Option<f64>,
    /// Quadrature cross-talk; only settable from the config file.
    #[arg(skip)]
    pub cross_talk: Option<CrossTalk>,
}

impl SimulateArgs {
    pub fn overlay(self, file: Self) -> Self {
        overlay!(self, file; tau_b, phi, n_rounds, seed, xi, epsilon, r, detection_noise, channel,
            checkpoints, optimize_r, dump_samples, loss_rate, cross_talk)
    }
}

/// Layout of the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub rate: RateArgs,
    pub threshold: ThresholdArgs,
    pub scan: ScanArgs,
    pub simulate: SimulateArgs,
    #[serde(rename = "attack-region", alias = "attack_region")]
    pub attack_region: RegionArgs,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Invalid> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Invalid(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Invalid(format!("config {}: {e}", path.display())))
    }
}
