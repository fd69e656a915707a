use crate::config::{
    ModulationMode, Plane, RateArgs, RegionArgs, ScanArgs, SimulateArgs, ThresholdArgs, DEFAULT_PHI,
    DEFAULT_XI,
};
use crate::output::{num, opt, Output, Table};
use crate::units::{linspace, parse_range, TauSpec};
use crate::Invalid;
use anyhow::{Context, Result};
use cvmdi_core::attack::{scan_correlation_plane, AttackParams, AttackRegion};
use cvmdi_core::montecarlo::{
    estimate_from_moments, optimize_r, simulate, simulate_latent, ChannelModel, RelaySettings,
    SimConfig, DEFAULT_CHECKPOINTS,
};
use cvmdi_core::rate::{
    chi_loss, rate_general, rate_with_excess_noise, EffectiveAttack, Modulation, RateResult,
};
use cvmdi_core::threshold::{rate_surface, threshold_curve, DEFAULT_LOSS_DB_PER_KM};
use serde::Serialize;
use serde_json::json;

fn required<T>(value: Option<T>, flag: &str) -> Result<T, Invalid> {
    value.ok_or_else(|| Invalid(format!("missing --{flag}")))
}

#[derive(Debug, Serialize)]
struct RateConfig {
    tau_a: f64,
    tau_b: f64,
    attack: AttackSpec,
    xi: f64,
    modulation: ModulationMode,
    mu: Option<f64>,
    loss_rate_db_per_km: f64,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum AttackSpec {
    Explicit { omega_a: f64, omega_b: f64, g: f64, g_prime: f64 },
    ExcessNoise { epsilon: f64 },
}

/// Flattened [`RateResult`]; asymptotic information terms are `log2_mu·log₂μ + constant`.
#[derive(Debug, Serialize)]
struct RateRow {
    rate: f64,
    i_ab_log2_mu: f64,
    i_ab_constant: f64,
    i_e_log2_mu: f64,
    i_e_constant: f64,
    chi: f64,
    chi_loss: f64,
    epsilon: f64,
}

impl From<&RateResult> for RateRow {
    fn from(r: &RateResult) -> Self {
        Self {
            rate: r.rate,
            i_ab_log2_mu: r.i_ab.log2_mu,
            i_ab_constant: r.i_ab.constant,
            i_e_log2_mu: r.i_e.log2_mu,
            i_e_constant: r.i_e.constant,
            chi: r.noise.chi,
            chi_loss: r.noise.chi_loss,
            epsilon: r.noise.epsilon,
        }
    }
}

pub fn rate(args: RateArgs) -> Result<Output> {
    let loss_rate = args.loss_rate.unwrap_or(DEFAULT_LOSS_DB_PER_KM);
    let tau_a = required(args.tau_a, "tau-a")?.resolve(loss_rate)?;
    let tau_b = required(args.tau_b, "tau-b")?.resolve(loss_rate)?;
    let xi = args.xi.unwrap_or(DEFAULT_XI);
    let mode = args.modulation.unwrap_or(ModulationMode::Finite);
    let (modulation, mu) = match (mode, args.phi, args.mu) {
        (_, Some(_), Some(_)) => return Err(Invalid("give --phi or --mu, not both".into()).into()),
        (ModulationMode::Asymptotic, None, None) => (Modulation::Asymptotic, None),
        (ModulationMode::Asymptotic, ..) => {
            return Err(Invalid("--phi/--mu do not apply to asymptotic modulation".into()).into())
        }
        (ModulationMode::Finite, phi, mu) => {
            let mu = mu.unwrap_or(phi.unwrap_or(DEFAULT_PHI) + 1.0);
            (Modulation::Finite { mu }, Some(mu))
        }
    };

    let explicit = args.omega_a.is_some()
        || args.omega_b.is_some()
        || args.g.is_some()
        || args.g_prime.is_some();
    let chosen = [explicit, args.chi.is_some(), args.epsilon.is_some()];
    if chosen.iter().filter(|&&c| c).count() > 1 {
        return Err(Invalid(
            "choose one attack description: thermal parameters, --chi or --epsilon".into(),
        )
        .into());
    }
    let (attack, result) = if explicit {
        let (omega_a, omega_b) = (required(args.omega_a, "omega-a")?, required(args.omega_b, "omega-b")?);
        let (g, g_prime) = (args.g.unwrap_or(0.0), args.g_prime.unwrap_or(0.0));
        let params = AttackParams::new(tau_a, tau_b, omega_a, omega_b, g, g_prime)?;
        (
            AttackSpec::Explicit { omega_a, omega_b, g, g_prime },
            rate_general(&params, modulation, xi)?,
        )
    } else {
        let epsilon = match args.chi {
            Some(chi) => {
                // rejects chi < chi_loss with the violated bound in the message
                EffectiveAttack::bisector_for_chi(tau_a, tau_b, chi)?;
                (chi - chi_loss(tau_a, tau_b)).max(0.0)
            }
            None => args.epsilon.unwrap_or(0.0),
        };
        (
            AttackSpec::ExcessNoise { epsilon },
            rate_with_excess_noise(tau_a, tau_b, epsilon, modulation, xi)?,
        )
    };

    let config = RateConfig {
        tau_a,
        tau_b,
        attack,
        xi,
        modulation: mode,
        mu,
        loss_rate_db_per_km: loss_rate,
    };
    let row = RateRow::from(&result);
    let mut table = Table::new(&[
        "tau_a", "tau_b", "xi", "mu", "rate", "i_ab_log2_mu", "i_ab_constant", "i_e_log2_mu",
        "i_e_constant", "chi", "chi_loss", "epsilon",
    ]);
    table.push(vec![
        num(tau_a),
        num(tau_b),
        num(xi),
        opt(mu),
        num(row.rate),
        num(row.i_ab_log2_mu),
        num(row.i_ab_constant),
        num(row.i_e_log2_mu),
        num(row.i_e_constant),
        num(row.chi),
        num(row.chi_loss),
        num(row.epsilon),
    ]);
    Ok(Output {
        command: "rate",
        config: serde_json::to_value(&config)?,
        result: serde_json::to_value(&row)?,
        table,
    })
}

pub fn threshold(args: ThresholdArgs) -> Result<Output> {
    let loss_rate = args.loss_rate.unwrap_or(DEFAULT_LOSS_DB_PER_KM);
    let r_values = match (args.r, args.r_range) {
        (Some(_), Some(_)) => return Err(Invalid("give --r or --r-range, not both".into()).into()),
        (Some(r), None) => r,
        (None, Some(range)) => parse_range(&range)?,
        (None, None) => linspace(0.0, 4.0, 41),
    };
    if r_values.is_empty() {
        return Err(Invalid("no distances to evaluate".into()).into());
    }
    let epsilons = args.epsilon.unwrap_or_else(|| vec![0.0]);
    let curves = epsilons
        .iter()
        .map(|&eps| threshold_curve(&r_values, eps, loss_rate))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&["epsilon", "r_km", "d_max_km", "status", "residual"]);
    for curve in &curves {
        for p in &curve.points {
            table.push(vec![
                num(curve.epsilon),
                num(p.r_km),
                num(p.d_max_km),
                serde_json::to_value(p.status)?.as_str().unwrap_or_default().to_string(),
                num(p.residual),
            ]);
        }
    }
    Ok(Output {
        command: "threshold",
        config: json!({
            "r_km": r_values,
            "epsilon": epsilons,
            "loss_rate_db_per_km": loss_rate,
        }),
        result: serde_json::to_value(&curves)?,
        table,
    })
}

pub fn scan(args: ScanArgs) -> Result<Output> {
    match required(args.plane, "plane (correlation or transmissivity)")? {
        Plane::Correlation => scan_correlation(args),
        Plane::Transmissivity => scan_transmissivity(args),
    }
}

/// Classification of the `(g, g')` plane, with the asymptotic rate and `χ`
/// of every accessible point when both links are given.
fn scan_correlation(args: ScanArgs) -> Result<Output> {
    let omega_a = required(args.omega_a, "omega-a")?;
    let omega_b = required(args.omega_b, "omega-b")?;
    let grid_n = args.grid_n.unwrap_or(101);
    let loss_rate = args.loss_rate.unwrap_or(DEFAULT_LOSS_DB_PER_KM);
    let links = match (args.tau_a, args.tau_b) {
        (Some(a), Some(b)) => Some((a.resolve(loss_rate)?, b.resolve(loss_rate)?)),
        (None, None) => None,
        _ => return Err(Invalid("give both --tau-a and --tau-b, or neither".into()).into()),
    };
    let points = scan_correlation_plane(omega_a, omega_b, grid_n)?;

    let mut table = Table::new(&["g", "g_prime", "class", "rate", "chi"]);
    let mut rows = Vec::with_capacity(points.len());
    for p in &points {
        let (rate, chi) = match links {
            Some((ta, tb)) if p.class.is_physical() => {
                let params = AttackParams::new(ta, tb, omega_a, omega_b, p.g, p.g_prime)?;
                match rate_general(&params, Modulation::Asymptotic, 1.0) {
                    Ok(r) => (Some(r.rate), Some(r.noise.chi)),
                    Err(_) => (None, EffectiveAttack::from_params(&params).ok().map(|e| e.chi())),
                }
            }
            _ => (None, None),
        };
        table.push(vec![num(p.g), num(p.g_prime), p.class.as_str().into(), opt(rate), opt(chi)]);
        rows.push(json!({
            "g": p.g,
            "g_prime": p.g_prime,
            "class": p.class,
            "rate": rate,
            "chi": chi,
        }));
    }
    let region = AttackRegion::new(omega_a, omega_b);
    Ok(Output {
        command: "scan",
        config: json!({
            "plane": Plane::Correlation,
            "omega_a": omega_a,
            "omega_b": omega_b,
            "grid_n": grid_n,
            "tau_a": links.map(|l| l.0),
            "tau_b": links.map(|l| l.1),
        }),
        result: json!({
            "phi_max": region.phi_max,
            "positivity_bound": region.positivity_bound(),
            "points": rows,
        }),
        table,
    })
}

fn scan_transmissivity(args: ScanArgs) -> Result<Output> {
    let grid_n = args.grid_n.unwrap_or(50);
    let tau_min = args.tau_min.unwrap_or(0.01);
    let tau_max = args.tau_max.unwrap_or(1.0);
    let epsilon = args.epsilon.unwrap_or(0.0);
    if !(tau_min > 0.0 && tau_min <= tau_max && tau_max <= 1.0) {
        return Err(Invalid(format!(
            "need 0 < tau-min <= tau-max <= 1, got {tau_min}, {tau_max}"
        ))
        .into());
    }
    let axis = linspace(tau_min, tau_max, grid_n);
    let surface = rate_surface(&axis, &axis, epsilon)?;
    let mut table = Table::new(&["tau_a", "tau_b", "rate"]);
    for (i, ta) in surface.tau_a.iter().enumerate() {
        for (j, tb) in surface.tau_b.iter().enumerate() {
            table.push(vec![num(*ta), num(*tb), opt(surface.get(i, j))]);
        }
    }
    Ok(Output {
        command: "scan",
        config: json!({
            "plane": Plane::Transmissivity,
            "grid_n": grid_n,
            "tau_min": tau_min,
            "tau_max": tau_max,
            "epsilon": epsilon,
        }),
        result: serde_json::to_value(&surface)?,
        table,
    })
}

pub fn attack_region(args: RegionArgs) -> Result<Output> {
    let omega_a = required(args.omega_a, "omega-a")?;
    let omega_b = required(args.omega_b, "omega-b")?;
    let grid_n = args.grid_n.unwrap_or(201);
    let points = scan_correlation_plane(omega_a, omega_b, grid_n)?;
    let region = AttackRegion::new(omega_a, omega_b);
    let mut table = Table::new(&["g", "g_prime", "class"]);
    for p in &points {
        table.push(vec![num(p.g), num(p.g_prime), p.class.as_str().into()]);
    }
    Ok(Output {
        command: "attack-region",
        config: json!({ "omega_a": omega_a, "omega_b": omega_b, "grid_n": grid_n }),
        result: json!({
            "phi_max": region.phi_max,
            "positivity_bound": region.positivity_bound(),
            "points": points,
        }),
        table,
    })
}

#[derive(Debug, Serialize)]
struct SimulateConfig<'a> {
    simulation: &'a SimConfig,
    relay: &'a RelaySettings,
    checkpoints: &'a [usize],
    optimize_r: bool,
    loss_rate_db_per_km: f64,
}

pub fn simulate_cmd(args: SimulateArgs) -> Result<Output> {
    let loss_rate = args.loss_rate.unwrap_or(DEFAULT_LOSS_DB_PER_KM);
    let tau_b = args.tau_b.unwrap_or(TauSpec::Plain(1.0)).resolve(loss_rate)?;
    let config = SimConfig {
        phi: args.phi.unwrap_or(DEFAULT_PHI),
        tau_b,
        n_rounds: args.n_rounds.unwrap_or(1_000_000),
        seed: args.seed.unwrap_or(1),
        xi: args.xi.unwrap_or(DEFAULT_XI),
        epsilon: args.epsilon.unwrap_or(0.0),
        cross_talk: args.cross_talk,
        channel: args.channel.map(ChannelModel::from).unwrap_or_default(),
    };
    config.validate()?;
    let relay = RelaySettings::new(args.r.unwrap_or(1.0), args.detection_noise.unwrap_or(1.0))?;
    let checkpoints = args.checkpoints.unwrap_or_else(|| DEFAULT_CHECKPOINTS.to_vec());
    let want_optimum = args.optimize_r.unwrap_or(false);

    let latent = simulate_latent(&config, &relay)?;
    let report = estimate_from_moments(&config, &relay, &latent, &checkpoints)?;
    let optimum = if want_optimum {
        Some(optimize_r(&config, &relay, Some(&latent))?)
    } else {
        None
    };
    if let Some(path) = &args.dump_samples {
        let mut w = csv::Writer::from_path(path)
            .with_context(|| format!("creating sample dump {}", path.display()))?;
        for s in simulate(&config, &relay)? {
            w.serialize(s)?;
        }
        w.flush()?;
    }

    let mut table = Table::new(&["n", "tau_b_hat", "det_ratio", "rate", "error"]);
    for p in &report.convergence {
        table.push(vec![
            p.n.to_string(),
            opt(p.tau_b_hat),
            opt(p.det_ratio),
            opt(p.rate),
            p.error.clone().unwrap_or_default(),
        ]);
    }
    let resolved = SimulateConfig {
        simulation: &config,
        relay: &relay,
        checkpoints: &checkpoints,
        optimize_r: want_optimum,
        loss_rate_db_per_km: loss_rate,
    };
    Ok(Output {
        command: "simulate",
        config: serde_json::to_value(&resolved)?,
        result: json!({ "report": report, "relay_optimum": optimum }),
        table,
    })
}
