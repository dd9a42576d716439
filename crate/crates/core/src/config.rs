//! Flat `key = value` scenario files.
//!
//! ```text
//! # worked example
//! principal = 500000
//! rate_percent = 15
//! guarantee_percent = 10
//! collateral_coefficient = 1
//! collateral_basis = principal_net_plus_interest
//! ```
//!
//! Amounts are decimal rubles, percentages take at most four decimals
//! (rates must land on a whole basis point). Unknown and repeated keys are
//! errors. Every value is validated before any computation runs.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::deal::{required_collateral, CollateralBasis, CollateralCoefficient, DealScenario, LoanTerms};
use crate::money::{Exact, Fraction, Money, Rate};
use crate::sim::{RecoveryModel, SimConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{key}: {message}")]
    Value { key: String, message: String },
    #[error("missing required key {0}")]
    Missing(&'static str),
}

const KEYS: &[&str] = &[
    "principal",
    "rate_percent",
    "guarantee_percent",
    "collateral_coefficient",
    "collateral_basis",
    "sector",
    "default_share_percent",
    "default_prob_percent",
    "default_prob",
    "recovery_model",
    "collateral_value",
    "recovery_percent",
    "trials",
    "n_loans",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryKind {
    Zero,
    Collateral,
}

/// Simulation settings, usable without loan terms (loan-book runs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimSettings {
    pub default_prob: Exact,
    pub recovery_kind: RecoveryKind,
    /// Overrides the collateral pledged by each borrower.
    pub collateral_value: Option<Money>,
    pub recovery_fraction: Fraction,
    pub trials: u64,
    pub n_loans: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub terms: LoanTerms,
    /// Portfolio non-repayment share for yield reports.
    pub default_share: Fraction,
    pub sim: SimSettings,
}

fn value_err(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.to_string(),
    }
}

pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| ConfigError::Syntax { line: i + 1, message };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| syntax("expected `key = value`".into()))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(syntax(format!("unknown key {k:?}")));
        }
        if v.is_empty() {
            return Err(syntax(format!("empty value for {k}")));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(syntax(format!("duplicate key {k}")));
        }
    }
    Ok(map)
}

impl SimSettings {
    pub fn parse(text: &str) -> Result<SimSettings, ConfigError> {
        SimSettings::from_pairs(&parse_pairs(text)?)
    }

    pub fn from_pairs(map: &BTreeMap<String, String>) -> Result<SimSettings, ConfigError> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let default_prob = match (get("default_prob_percent"), get("default_prob")) {
            (Some(_), Some(_)) => {
                return Err(value_err("default_prob", "set either default_prob or default_prob_percent"));
            }
            (Some(v), None) => Fraction::parse_percent(v)
                .map_err(|e| value_err("default_prob_percent", e))?
                .to_exact(),
            (None, Some(v)) => {
                if !v.contains('/') {
                    return Err(value_err("default_prob", "expected a ratio such as 5/23"));
                }
                let p = Exact::parse_percent_or_ratio(v, 4).map_err(|e| value_err("default_prob", e))?;
                if p.is_negative() || p > Exact::one() {
                    return Err(value_err("default_prob", "must lie in [0, 1]"));
                }
                p
            }
            (None, None) => Exact::zero(),
        };
        let recovery_kind = match get("recovery_model").unwrap_or("zero") {
            "zero" => RecoveryKind::Zero,
            "collateral" => RecoveryKind::Collateral,
            other => return Err(value_err("recovery_model", format!("expected zero or collateral, got {other:?}"))),
        };
        let collateral_value = match get("collateral_value") {
            Some(v) => {
                let m = Money::parse_rubles(v).map_err(|e| value_err("collateral_value", e))?;
                if m.is_negative() {
                    return Err(value_err("collateral_value", "must be non-negative"));
                }
                Some(m)
            }
            None => None,
        };
        let recovery_fraction = match get("recovery_percent") {
            Some(v) => Fraction::parse_percent(v).map_err(|e| value_err("recovery_percent", e))?,
            None => Fraction::ONE,
        };
        let count = |k: &str, default: u64| -> Result<u64, ConfigError> {
            match get(k) {
                Some(v) => v.parse().map_err(|_| value_err(k, "expected a non-negative integer")),
                None => Ok(default),
            }
        };
        let trials = count("trials", 1000)?;
        let n_loans = count("n_loans", 1000)?;
        let seed = count("seed", 42)?;
        if trials == 0 {
            return Err(value_err("trials", "must be at least 1"));
        }
        if n_loans == 0 {
            return Err(value_err("n_loans", "must be at least 1"));
        }
        Ok(SimSettings {
            default_prob,
            recovery_kind,
            collateral_value,
            recovery_fraction,
            trials,
            n_loans,
            seed,
        })
    }

    /// Recovery model for a loan whose borrower pledged `collateral_value`.
    /// A configured `collateral_value` takes precedence.
    pub fn recovery_model_for(&self, collateral_value: Money) -> RecoveryModel {
        match self.recovery_kind {
            RecoveryKind::Zero => RecoveryModel::ZeroRecovery,
            RecoveryKind::Collateral => RecoveryModel::CollateralRecovery {
                collateral_value: self.collateral_value.unwrap_or(collateral_value),
                recovery_fraction: self.recovery_fraction,
            },
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let map = parse_pairs(text)?;
        let get = |k: &str| map.get(k).map(String::as_str);
        let principal = Money::parse_rubles(get("principal").ok_or(ConfigError::Missing("principal"))?)
            .map_err(|e| value_err("principal", e))?;
        let rate = Rate::parse_percent(get("rate_percent").ok_or(ConfigError::Missing("rate_percent"))?)
            .map_err(|e| value_err("rate_percent", e))?;
        let guarantee = match get("guarantee_percent") {
            Some(v) => Fraction::parse_percent(v).map_err(|e| value_err("guarantee_percent", e))?,
            None => Fraction::ZERO,
        };
        let coefficient = match get("collateral_coefficient") {
            Some(v) => CollateralCoefficient::parse(v).map_err(|e| value_err("collateral_coefficient", e))?,
            None => CollateralCoefficient::ONE,
        };
        let basis = match get("collateral_basis") {
            Some(v) => CollateralBasis::parse(v)
                .ok_or_else(|| value_err("collateral_basis", "expected principal_net or principal_net_plus_interest"))?,
            None => CollateralBasis::PrincipalNetPlusInterest,
        };
        let terms = LoanTerms {
            principal,
            annual_rate: rate,
            guarantee_fraction: guarantee,
            collateral_coefficient: coefficient,
            collateral_basis: basis,
            sector: get("sector").unwrap_or("general").to_string(),
        };
        terms.validate().map_err(|e| value_err("loan terms", e))?;
        let default_share = match get("default_share_percent") {
            Some(v) => Fraction::parse_percent(v).map_err(|e| value_err("default_share_percent", e))?,
            None => Fraction::ZERO,
        };
        Ok(ScenarioConfig {
            terms,
            default_share,
            sim: SimSettings::from_pairs(&map)?,
        })
    }

    /// Collateral the borrower pledges: configured, else the required amount.
    pub fn collateral_value(&self) -> Money {
        self.sim
            .collateral_value
            .unwrap_or_else(|| required_collateral(&self.terms).expect("terms validated on parse"))
    }

    pub fn recovery_model(&self) -> RecoveryModel {
        self.sim.recovery_model_for(self.collateral_value())
    }

    /// Default branch used by the single-deal report.
    pub fn default_scenario(&self) -> DealScenario {
        DealScenario::Default {
            collateral_value: self.collateral_value(),
            recovery_fraction: self.sim.recovery_fraction,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_loans: self.sim.n_loans,
            terms: self.terms.clone(),
            default_prob: self.sim.default_prob.clone(),
            recovery_model: self.recovery_model(),
            trials: self.sim.trials,
            seed: self.sim.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPER: &str = "\
# worked example
principal = 500000
rate_percent = 15
guarantee_percent = 10   # municipal notes
collateral_coefficient = 1
collateral_basis = principal_net_plus_interest
sector = manufacturing
";

    #[test]
    fn parses_paper_config() {
        let c = ScenarioConfig::parse(PAPER).unwrap();
        assert_eq!(c.terms.principal, Money::from_rubles(500_000).unwrap());
        assert_eq!(c.terms.annual_rate, Rate::from_bp(1500));
        assert_eq!(c.terms.guarantee_fraction.ppm(), 100_000);
        assert_eq!(c.terms.sector, "manufacturing");
        assert_eq!(c.collateral_value(), Money::from_rubles(525_000).unwrap());
        assert_eq!(c.sim.recovery_fraction, Fraction::ONE);
    }

    #[test]
    fn ratio_probability() {
        let c = ScenarioConfig::parse(&format!("{PAPER}default_prob = 5/23\n")).unwrap();
        assert_eq!(c.sim.default_prob, Exact::from_ints(5, 23));
        assert!(ScenarioConfig::parse(&format!("{PAPER}default_prob = 0.2\n")).is_err());
        assert!(ScenarioConfig::parse(&format!("{PAPER}default_prob = 5/23\ndefault_prob_percent = 10\n")).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ScenarioConfig::parse("rate_percent = 15\n"), Err(ConfigError::Missing("principal"))));
        assert!(matches!(
            ScenarioConfig::parse("principal = 1\nrate_percent = 15\nbogus = 1\n"),
            Err(ConfigError::Syntax { line: 3, .. })
        ));
        assert!(ScenarioConfig::parse("principal = 1\nprincipal = 2\nrate_percent = 1\n").is_err());
        assert!(ScenarioConfig::parse("principal = 1\nrate_percent = 15.005\n").is_err());
        assert!(ScenarioConfig::parse("principal = 0\nrate_percent = 15\n").is_err());
        assert!(ScenarioConfig::parse("principal = 1\nrate_percent = 15\nguarantee_percent = 100\n").is_err());
        assert!(ScenarioConfig::parse("principal = 1\nrate_percent = 15\ntrials = 0\n").is_err());
        assert!(ScenarioConfig::parse("principal = 1\nrate_percent = 15\nnot a pair\n").is_err());
    }

    #[test]
    fn sim_settings_without_terms() {
        let s = SimSettings::parse("default_prob_percent = 10\ntrials = 5\nrecovery_model = collateral\n").unwrap();
        assert_eq!(s.trials, 5);
        assert_eq!(s.n_loans, 1000);
        let m = Money::from_rubles(7).unwrap();
        assert_eq!(
            s.recovery_model_for(m),
            RecoveryModel::CollateralRecovery { collateral_value: m, recovery_fraction: Fraction::ONE }
        );
    }
}
