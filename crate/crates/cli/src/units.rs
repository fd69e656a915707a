use crate::Invalid;
use cvmdi_core::threshold::{tau_from_db, tau_from_distance};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// A transmissivity given directly, as a fibre length (`"50km"`) or as a loss (`"10dB"`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TauInput", into = "String")]
pub enum TauSpec {
    Plain(f64),
    Km(f64),
    Db(f64),
}

impl TauSpec {
    pub fn resolve(self, loss_rate_db_per_km: f64) -> Result<f64, Invalid> {
        let tau = match self {
            TauSpec::Plain(t) => t,
            TauSpec::Db(db) => tau_from_db(db),
            TauSpec::Km(km) => tau_from_distance(km, loss_rate_db_per_km)
                .map_err(|e| Invalid(format!("distance {km} km: {e}")))?,
        };
        if tau > 0.0 && tau <= 1.0 {
            Ok(tau)
        } else {
            Err(Invalid(format!("transmissivity {self} resolves to {tau}, outside (0, 1]")))
        }
    }
}

impl FromStr for TauSpec {
    type Err = Invalid;

    fn from_str(s: &str) -> Result<Self, Invalid> {
        let t = s.trim();
        let lower = t.to_ascii_lowercase();
        let number = |body: &str| {
            body.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Invalid(format!("cannot read {s:?} as a transmissivity, \"NNkm\" or \"NNdB\"")))
        };
        if let Some(body) = lower.strip_suffix("km") {
            let km = number(body)?;
            if km < 0.0 {
                return Err(Invalid(format!("negative distance {s:?}")));
            }
            Ok(TauSpec::Km(km))
        } else if let Some(body) = lower.strip_suffix("db") {
            let db = number(body)?;
            if db < 0.0 {
                return Err(Invalid(format!("negative loss {s:?}")));
            }
            Ok(TauSpec::Db(db))
        } else {
            Ok(TauSpec::Plain(number(&lower)?))
        }
    }
}

impl fmt::Display for TauSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauSpec::Plain(t) => write!(f, "{t}"),
            TauSpec::Km(km) => write!(f, "{km}km"),
            TauSpec::Db(db) => write!(f, "{db}dB"),
        }
    }
}

impl From<TauSpec> for String {
    fn from(t: TauSpec) -> String {
        t.to_string()
    }
}

/// Config files may give a transmissivity as a bare number or a string.
#[derive(Deserialize)]
#[serde(untagged)]
enum TauInput {
    Number(f64),
    Text(String),
}

impl TryFrom<TauInput> for TauSpec {
    type Error = Invalid;

    fn try_from(v: TauInput) -> Result<Self, Invalid> {
        match v {
            TauInput::Number(x) => Ok(TauSpec::Plain(x)),
            TauInput::Text(s) => s.parse(),
        }
    }
}

/// `"start:stop:count"`, endpoints included.
pub fn parse_range(s: &str) -> Result<Vec<f64>, Invalid> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Invalid(format!("range {s:?} must look like start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(linspace(start, stop, count))
}

pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_three_forms() {
        assert_eq!("0.25".parse::<TauSpec>().unwrap(), TauSpec::Plain(0.25));
        assert_eq!("50km".parse::<TauSpec>().unwrap(), TauSpec::Km(50.0));
        assert_eq!("10 dB".parse::<TauSpec>().unwrap(), TauSpec::Db(10.0));
        assert_eq!("34DB".parse::<TauSpec>().unwrap(), TauSpec::Db(34.0));
        assert!("fast".parse::<TauSpec>().is_err());
        assert!("-3km".parse::<TauSpec>().is_err());
    }

    #[test]
    fn units_resolve_to_the_same_link() {
        let km = TauSpec::Km(50.0).resolve(0.2).unwrap();
        let db = TauSpec::Db(10.0).resolve(0.2).unwrap();
        assert!((km - 0.1).abs() < 1e-12 && (db - 0.1).abs() < 1e-12);
        assert!((TauSpec::Db(34.0).resolve(0.2).unwrap() - 3.98e-4).abs() < 1e-6);
        assert_eq!(TauSpec::Km(0.0).resolve(0.2).unwrap(), 1.0);
        assert!(TauSpec::Plain(1.5).resolve(0.2).is_err());
        assert!(TauSpec::Plain(0.0).resolve(0.2).is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["0.5", "12.5km", "3dB"] {
            let t: TauSpec = s.parse().unwrap();
            assert_eq!(t.to_string().parse::<TauSpec>().unwrap(), t);
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("2:2:1").unwrap(), vec![2.0]);
        assert!(parse_range("0:1").is_err());
    }
}
