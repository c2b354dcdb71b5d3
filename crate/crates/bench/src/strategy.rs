use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use spins_core::estimator::{Families, PriorPolicy, EXHAUSTIVE_MAX_BUDGET};

use crate::error::BenchError;

/// Budget used when a budgeted strategy is named without one.
pub const DEFAULT_BUDGET: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    PIns,
    PlIns,
    PlpIns,
    SpinsRand(usize),
    SpinsApprox(usize),
    SpinsOpt(usize),
    SpinsAll,
}

impl Strategy {
    pub fn families(&self) -> Families {
        match self {
            Strategy::PIns => Families {
                points: true,
                lines: false,
                planes: false,
            },
            Strategy::PlIns => Families {
                points: true,
                lines: true,
                planes: false,
            },
            _ => Families::ALL,
        }
    }

    /// Prior policy for a run; random draws are seeded from the run seed.
    pub fn policy(&self, seed: u64) -> PriorPolicy {
        match *self {
            Strategy::PIns | Strategy::PlIns | Strategy::PlpIns => PriorPolicy::None,
            Strategy::SpinsRand(budget) => PriorPolicy::Random { budget, seed },
            Strategy::SpinsApprox(budget) => PriorPolicy::Greedy { budget },
            Strategy::SpinsOpt(budget) => PriorPolicy::Exhaustive { budget },
            Strategy::SpinsAll => PriorPolicy::All,
        }
    }

    pub fn budget(&self) -> Option<usize> {
        match *self {
            Strategy::SpinsRand(k) | Strategy::SpinsApprox(k) | Strategy::SpinsOpt(k) => Some(k),
            _ => None,
        }
    }

    pub fn uses_priors(&self) -> bool {
        !matches!(self, Strategy::PIns | Strategy::PlIns | Strategy::PlpIns)
    }

    /// Configuration-time refusal of unsupported settings.
    pub fn check(&self) -> Result<(), BenchError> {
        if let Strategy::SpinsOpt(k) = self {
            if *k > EXHAUSTIVE_MAX_BUDGET {
                return Err(BenchError::Refused(format!(
                    "SPINS_OPT({k}): exhaustive selection supports budgets up to {EXHAUSTIVE_MAX_BUDGET}"
                )));
            }
        }
        Ok(())
    }

    /// Parse a comma-separated list; bare budgeted names take `default_budget`.
    pub fn parse_list(s: &str, default_budget: usize) -> Result<Vec<Strategy>, BenchError> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| parse_one(t, default_budget))
            .collect()
    }
}

fn parse_one(s: &str, default_budget: usize) -> Result<Strategy, BenchError> {
    let upper = s.to_ascii_uppercase();
    let (name, budget) = match upper.split_once('(') {
        Some((n, rest)) => {
            let k = rest
                .strip_suffix(')')
                .and_then(|k| k.trim().parse::<usize>().ok())
                .ok_or_else(|| BenchError::Parse(format!("bad budget in '{s}'")))?;
            (n.to_string(), Some(k))
        }
        None => (upper.clone(), None),
    };
    let k = budget.unwrap_or(default_budget);
    let fixed = |st: Strategy| {
        if budget.is_some() {
            Err(BenchError::Parse(format!("{name} takes no budget")))
        } else {
            Ok(st)
        }
    };
    match name.as_str() {
        "P_INS" => fixed(Strategy::PIns),
        "PL_INS" => fixed(Strategy::PlIns),
        "PLP_INS" => fixed(Strategy::PlpIns),
        "SPINS_ALL" => fixed(Strategy::SpinsAll),
        "SPINS_RAND" => Ok(Strategy::SpinsRand(k)),
        "SPINS_APPROX" => Ok(Strategy::SpinsApprox(k)),
        "SPINS_OPT" => Ok(Strategy::SpinsOpt(k)),
        _ => Err(BenchError::Parse(format!("unknown strategy '{s}'"))),
    }
}

impl FromStr for Strategy {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_one(s, DEFAULT_BUDGET)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::PIns => write!(f, "P_INS"),
            Strategy::PlIns => write!(f, "PL_INS"),
            Strategy::PlpIns => write!(f, "PLP_INS"),
            Strategy::SpinsRand(k) => write!(f, "SPINS_RAND({k})"),
            Strategy::SpinsApprox(k) => write!(f, "SPINS_APPROX({k})"),
            Strategy::SpinsOpt(k) => write!(f, "SPINS_OPT({k})"),
            Strategy::SpinsAll => write!(f, "SPINS_ALL"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_display() {
        for s in [
            Strategy::PIns,
            Strategy::PlIns,
            Strategy::PlpIns,
            Strategy::SpinsRand(20),
            Strategy::SpinsApprox(5),
            Strategy::SpinsOpt(3),
            Strategy::SpinsAll,
        ] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
    }

    #[test]
    fn bare_names_take_default_budget() {
        let v = Strategy::parse_list("p_ins, SPINS_RAND,SPINS_APPROX(7)", 12).unwrap();
        assert_eq!(v, vec![Strategy::PIns, Strategy::SpinsRand(12), Strategy::SpinsApprox(7)]);
    }

    #[test]
    fn opt_over_budget_is_refused() {
        assert!(Strategy::SpinsOpt(5).check().is_err());
        assert!(Strategy::SpinsOpt(4).check().is_ok());
        assert!("PLP_INS(3)".parse::<Strategy>().is_err());
        assert!("FOO".parse::<Strategy>().is_err());
    }
}
