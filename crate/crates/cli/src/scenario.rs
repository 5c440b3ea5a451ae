//! Simulation scenario files.

use std::collections::BTreeMap;

use serde::Deserialize;

use enlargement_core::rational::parse_rational;
use enlargement_core::simulators::{
    simulate_brownian_last_zero, simulate_cox_accessible, simulate_cpp_last_passage,
    simulate_levy_supremum, BrownianParams, CoxScenario, CppParams, LevyParams, SimReport,
};
use enlargement_core::space::SpaceDescription;
use enlargement_core::{FilteredSpace, Rational, StoppingTime, TimePoint};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Scenario {
    Cpp {
        params: CppParams,
        #[serde(default)]
        n: Option<u64>,
    },
    Brownian {
        params: BrownianParams,
        #[serde(default)]
        n: Option<u64>,
    },
    Levy {
        params: LevyParams,
        #[serde(default)]
        n: Option<u64>,
    },
    Cox {
        params: CoxFile,
        #[serde(default)]
        n: Option<u64>,
    },
}

/// `vartheta` is one value for every atom or a map from atom id to value;
/// values are `"p/q"` or `"inf"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum VarthetaFile {
    Constant(String),
    PerAtom(BTreeMap<String, String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoxFile {
    pub space: SpaceDescription,
    pub intensity: Vec<Vec<String>>,
    pub vartheta: VarthetaFile,
    pub theta_law: Vec<(String, String, String)>,
    pub report_times: Vec<String>,
}

fn q(s: &str) -> Result<Rational, CliError> {
    parse_rational(s).map_err(|e| CliError::Schema {
        message: e.to_string(),
        key: None,
    })
}

fn time_point(s: &str) -> Result<TimePoint, CliError> {
    if s == "inf" {
        Ok(TimePoint::Infinity)
    } else {
        Ok(TimePoint::Finite(q(s)?))
    }
}

impl CoxFile {
    fn build(&self) -> Result<CoxScenario, CliError> {
        let space = FilteredSpace::from_description(&self.space)?;
        let intensity = self
            .intensity
            .iter()
            .map(|row| row.iter().map(|s| q(s)).collect())
            .collect::<Result<_, _>>()?;
        let vartheta = match &self.vartheta {
            VarthetaFile::Constant(s) => StoppingTime::constant(&space, time_point(s)?),
            VarthetaFile::PerAtom(map) => StoppingTime {
                values: space
                    .atoms()
                    .iter()
                    .map(|a| {
                        map.get(&a.id)
                            .ok_or_else(|| CliError::Schema {
                                message: format!("vartheta has no value for atom `{}`", a.id),
                                key: Some("vartheta".into()),
                            })
                            .and_then(|s| time_point(s))
                    })
                    .collect::<Result<_, _>>()?,
            },
        };
        let theta_law = self
            .theta_law
            .iter()
            .map(|(s, e, d)| Ok((q(s)?, q(e)?, q(d)?)))
            .collect::<Result<_, CliError>>()?;
        let report_times = self.report_times.iter().map(|s| q(s)).collect::<Result<_, _>>()?;
        Ok(CoxScenario {
            space,
            intensity,
            vartheta,
            theta_law,
            report_times,
        })
    }
}

pub const DEFAULT_N: u64 = 10_000;

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Cpp { .. } => "cpp",
            Scenario::Brownian { .. } => "brownian",
            Scenario::Levy { .. } => "levy",
            Scenario::Cox { .. } => "cox",
        }
    }

    fn default_n(&self) -> Option<u64> {
        match self {
            Scenario::Cpp { n, .. }
            | Scenario::Brownian { n, .. }
            | Scenario::Levy { n, .. }
            | Scenario::Cox { n, .. } => *n,
        }
    }

    pub fn run(&self, n: Option<u64>, seed: u64) -> Result<SimReport, CliError> {
        let n = n.or(self.default_n()).unwrap_or(DEFAULT_N);
        if n == 0 {
            return Err(CliError::Usage("--n must be at least 1".into()));
        }
        let report = match self {
            Scenario::Cpp { params, .. } => simulate_cpp_last_passage(params, n, seed)?,
            Scenario::Brownian { params, .. } => simulate_brownian_last_zero(params, n, seed)?,
            Scenario::Levy { params, .. } => simulate_levy_supremum(params, n, seed)?,
            Scenario::Cox { params, .. } => simulate_cox_accessible(&params.build()?, n, seed)?,
        };
        Ok(report)
    }
}
