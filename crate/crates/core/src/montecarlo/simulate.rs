use super::{
    ChannelModel, MomentAccumulator, RelaySettings, Result, SampleRecord, SimConfig, CHUNK_SIZE,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::FRAC_1_SQRT_2;

/// Independent Gaussian sources behind one round:
/// `[q_A, p_A, q_B, p_B]` recorded displacements, `[4, 5]` relay vacuum (or
/// Alice's coherent-state vacuum), `[6, 7]` Bob's coherent-state vacuum,
/// `[8, 9]` beam-splitter environment, `[10, 11]` excess plus electronic noise.
pub const LATENT_DIM: usize = 12;

pub fn latent_variances(config: &SimConfig, relay: &RelaySettings) -> [f64; LATENT_DIM] {
    let phi = config.phi;
    let bs = match config.channel {
        ChannelModel::ModulationAttenuation => 0.0,
        ChannelModel::BeamSplitter => 1.0,
    };
    let extra = config.excess_noise_variance() + relay.detection_noise_variance - 1.0;
    [
        phi, phi, phi, phi, 1.0, 1.0, bs, bs, bs, bs, extra, extra,
    ]
}

/// Linear map from latent sources to `(q_A, p_A, q_B, p_B, x_−r, x_+r)`.
///
/// Recorded displacements are the optical ones rescaled by `κ₂`, so the relay
/// outcomes read `x_−r = q₋ + (1−r)/(1+r)·p₊ + δ₋` and symmetrically for `x_+r`.
pub fn latent_map(config: &SimConfig, relay: &RelaySettings) -> DMatrix<f64> {
    let ct = config.cross_talk.unwrap_or_default();
    let k2 = relay.kappa_2;
    let sqrt_tau = config.tau_b.sqrt();
    // optical displacement at the relay of each party, per latent source
    let mut optical = DMatrix::<f64>::zeros(4, LATENT_DIM);
    for i in 0..2 {
        for j in 0..2 {
            optical[(i, j)] = ct.alice[i][j] / k2;
            optical[(2 + i, 2 + j)] = sqrt_tau * ct.bob[i][j] / k2;
        }
    }
    let mut q_minus = (optical.row(0) - optical.row(2)) * FRAC_1_SQRT_2;
    let mut p_plus = (optical.row(1) + optical.row(3)) * FRAC_1_SQRT_2;
    match config.channel {
        ChannelModel::ModulationAttenuation => {
            q_minus[4] = 1.0;
            p_plus[5] = 1.0;
        }
        ChannelModel::BeamSplitter => {
            let leak = (1.0 - config.tau_b).sqrt();
            q_minus[4] = FRAC_1_SQRT_2;
            q_minus[6] = -sqrt_tau * FRAC_1_SQRT_2;
            q_minus[8] = -leak * FRAC_1_SQRT_2;
            p_plus[5] = FRAC_1_SQRT_2;
            p_plus[7] = sqrt_tau * FRAC_1_SQRT_2;
            p_plus[9] = leak * FRAC_1_SQRT_2;
        }
    }
    q_minus[10] = 1.0;
    p_plus[11] = 1.0;

    let mut l = DMatrix::<f64>::zeros(6, LATENT_DIM);
    for k in 0..4 {
        l[(k, k)] = 1.0;
    }
    let (k1, k2) = (relay.kappa_1, relay.kappa_2);
    l.set_row(4, &(&q_minus * k2 + &p_plus * k1));
    l.set_row(5, &(&q_minus * k1 + &p_plus * k2));
    l
}

/// Exact covariance matrix of `(q_A, p_A, q_B, p_B, x_−r, x_+r)` under the model.
pub fn model_moments(config: &SimConfig, relay: &RelaySettings) -> Result<DMatrix<f64>> {
    config.validate()?;
    let l = latent_map(config, relay);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&latent_variances(
        config, relay,
    )));
    Ok(&l * d * l.transpose())
}

fn chunk_count(n_rounds: usize) -> usize {
    n_rounds.div_ceil(CHUNK_SIZE)
}

fn chunk_len(n_rounds: usize, k: usize) -> usize {
    CHUNK_SIZE.min(n_rounds - k * CHUNK_SIZE)
}

/// Latent draws for chunk `k`, row-major `len × LATENT_DIM`.
fn draw_chunk(config: &SimConfig, sd: &[f64; LATENT_DIM], k: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(k as u64);
    let len = chunk_len(config.n_rounds, k);
    let mut out = Vec::with_capacity(len * LATENT_DIM);
    for _ in 0..len {
        for s in sd {
            let z: f64 = rng.sample(StandardNormal);
            out.push(s * z);
        }
    }
    out
}

fn standard_deviations(config: &SimConfig, relay: &RelaySettings) -> [f64; LATENT_DIM] {
    latent_variances(config, relay).map(f64::sqrt)
}

/// Draws `config.n_rounds` protocol rounds.
pub fn simulate(config: &SimConfig, relay: &RelaySettings) -> Result<Vec<SampleRecord>> {
    config.validate()?;
    let l = latent_map(config, relay);
    let sd = standard_deviations(config, relay);
    let chunks: Vec<Vec<SampleRecord>> = (0..chunk_count(config.n_rounds))
        .into_par_iter()
        .map(|k| {
            draw_chunk(config, &sd, k)
                .chunks_exact(LATENT_DIM)
                .map(|z| {
                    let mut v = [0.0; 6];
                    for (i, out) in v.iter_mut().enumerate() {
                        *out = (0..LATENT_DIM).map(|j| l[(i, j)] * z[j]).sum();
                    }
                    SampleRecord {
                        q_a: v[0],
                        p_a: v[1],
                        q_b: v[2],
                        p_b: v[3],
                        x_minus: v[4],
                        x_plus: v[5],
                    }
                })
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Per-chunk moments of the latent sources, in round order.
///
/// Every record is a fixed linear image of its latent vector, so the record
/// moments for any relay setting follow exactly from these.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMoments {
    pub chunks: Vec<MomentAccumulator>,
}

impl LatentMoments {
    pub fn rounds(&self) -> usize {
        self.chunks.iter().map(|c| c.count()).sum()
    }

    pub fn total(&self) -> MomentAccumulator {
        MomentAccumulator::merged(LATENT_DIM, &self.chunks)
    }

    /// Moments of the first `n` rounds, rounded down to whole chunks (at least one).
    pub fn prefix(&self, n: usize) -> MomentAccumulator {
        let mut acc = MomentAccumulator::new(LATENT_DIM);
        for c in &self.chunks {
            if acc.count() > 0 && acc.count() + c.count() > n {
                break;
            }
            acc.merge(c);
        }
        acc
    }

    /// `groups` contiguous blocks of whole chunks, as equal as possible.
    pub fn groups(&self, groups: usize) -> Vec<MomentAccumulator> {
        let n = self.chunks.len();
        let groups = groups.min(n).max(1);
        (0..groups)
            .map(|g| {
                let (lo, hi) = (g * n / groups, (g + 1) * n / groups);
                MomentAccumulator::merged(LATENT_DIM, &self.chunks[lo..hi])
            })
            .collect()
    }
}

/// Draws the same rounds as [`simulate`] but keeps only their moments.
pub fn simulate_latent(config: &SimConfig, relay: &RelaySettings) -> Result<LatentMoments> {
    config.validate()?;
    let sd = standard_deviations(config, relay);
    let chunks = (0..chunk_count(config.n_rounds))
        .into_par_iter()
        .map(|k| MomentAccumulator::from_rows(LATENT_DIM, &draw_chunk(config, &sd, k)))
        .collect();
    Ok(LatentMoments { chunks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::estimate_moments;

    #[test]
    fn ideal_relay_variances() {
        let c = SimConfig::clean(1.0, 10, 0);
        let v = model_moments(&c, &RelaySettings::ideal()).unwrap();
        assert!((v[(4, 4)] - 66.0).abs() < 1e-12);
        assert!((v[(5, 5)] - 66.0).abs() < 1e-12);
        assert!((v[(0, 4)] - 65.0 * FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((v[(2, 4)] + 65.0 * FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(v[(4, 5)].abs() < 1e-12);
    }

    #[test]
    fn mixed_relay_cross_covariance() {
        let c = SimConfig::clean(0.4, 10, 0);
        let relay = RelaySettings::new(0.6, 1.0).unwrap();
        let v = model_moments(&c, &relay).unwrap();
        let s = (1.0 - 0.6) / (1.0 + 0.6);
        assert!((v[(1, 4)] - s * 65.0 * FRAC_1_SQRT_2).abs() < 1e-10);
        assert!((v[(3, 4)] - s * 0.4f64.sqrt() * 65.0 * FRAC_1_SQRT_2).abs() < 1e-10);
        assert!((v[(0, 5)] - s * 65.0 * FRAC_1_SQRT_2).abs() < 1e-10);
    }

    #[test]
    fn channel_models_share_moments() {
        let mut c = SimConfig::clean(0.3, 10, 0);
        let relay = RelaySettings::new(0.8, 1.2).unwrap();
        let a = model_moments(&c, &relay).unwrap();
        c.channel = ChannelModel::BeamSplitter;
        let b = model_moments(&c, &relay).unwrap();
        assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn records_and_latent_moments_agree() {
        let c = SimConfig::clean(0.5, 5_500, 9);
        let relay = RelaySettings::new(0.7, 1.0).unwrap();
        let records = simulate(&c, &relay).unwrap();
        assert_eq!(records.len(), 5_500);
        let direct = estimate_moments(&records);
        let latent = simulate_latent(&c, &relay).unwrap();
        assert_eq!(latent.rounds(), 5_500);
        let l = latent_map(&c, &relay);
        let projected = &l * latent.total().covariance() * l.transpose();
        assert!((direct.cm - projected).amax() < 1e-9);
    }

    #[test]
    fn sample_moments_match_model() {
        let c = SimConfig::clean(0.5, 200_000, 4);
        let relay = RelaySettings::new(0.6, 1.0).unwrap();
        let est = estimate_moments(&simulate(&c, &relay).unwrap());
        let model = model_moments(&c, &relay).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                // standard error of a sample covariance of Gaussian data
                let se = ((model[(i, i)] * model[(j, j)] + model[(i, j)].powi(2)) / 200_000.0).sqrt();
                assert!((est.cm[(i, j)] - model[(i, j)]).abs() < 5.0 * se, "({i},{j})");
            }
            assert!(est.means[i].abs() < 5.0 * (model[(i, i)] / 200_000.0).sqrt());
        }
    }

    #[test]
    fn seeded_determinism() {
        let c = SimConfig::clean(0.2, 3_000, 77);
        let relay = RelaySettings::ideal();
        assert_eq!(simulate(&c, &relay).unwrap(), simulate(&c, &relay).unwrap());
        let mut other = c.clone();
        other.seed = 78;
        assert_ne!(simulate(&c, &relay).unwrap(), simulate(&other, &relay).unwrap());
    }

    #[test]
    fn prefixes_and_groups_partition_rounds() {
        let c = SimConfig::clean(0.2, 10_500, 1);
        let m = simulate_latent(&c, &RelaySettings::ideal()).unwrap();
        assert_eq!(m.prefix(3_000).count(), 3_000);
        assert_eq!(m.prefix(10).count(), 1_000);
        assert_eq!(m.prefix(usize::MAX).count(), 10_500);
        let g = m.groups(4);
        assert_eq!(g.iter().map(|a| a.count()).sum::<usize>(), 10_500);
    }
}
