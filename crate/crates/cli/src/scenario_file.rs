//! JSON scenario documents.
//!
//! Numeric cells may be JSON numbers or strings such as `"3/7"`. Everything
//! is parsed into exact rationals first; the floating-point scenario used by
//! the simulator is derived from those.

use std::fs;
use std::path::Path;

use persuasion_core::oracle::{self, parse_rational, Rational, RationalScenario, RationalStructure};
use persuasion_core::solver::{self, full_disclosure, no_disclosure};
use persuasion_core::{InformationStructure, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A number written either as a JSON number or as a string literal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(serde_json::Number),
    Text(String),
}

impl Literal {
    pub fn to_rational(&self) -> Result<Rational, CliError> {
        let text = match self {
            Literal::Number(n) => n.to_string(),
            Literal::Text(s) => s.clone(),
        };
        Ok(parse_rational(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSection {
    pub signals: Vec<String>,
    /// One row per state.
    pub matrix: Vec<Vec<Literal>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    /// Prior probability of each state, in state order.
    pub prior: Vec<Literal>,
    /// `[state][action]`
    pub receiver_utility: Vec<Vec<Literal>>,
    /// `[state][action]`
    pub sender_utility: Vec<Vec<Literal>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure_kind: Option<String>,
}

/// How the announced structure is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum StructureKind {
    BpOptimal,
    Full,
    None,
    Epsilon(Rational),
    Explicit,
}

impl StructureKind {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        match text {
            "bp_optimal" => Ok(StructureKind::BpOptimal),
            "full" => Ok(StructureKind::Full),
            "none" => Ok(StructureKind::None),
            "explicit" => Ok(StructureKind::Explicit),
            other => match other.strip_prefix("epsilon:") {
                Some(v) => Ok(StructureKind::Epsilon(parse_rational(v)?)),
                None => Err(CliError::new(
                    "scenario",
                    format!("unknown structure_kind `{other}`; expected bp_optimal, full, none, epsilon:<value> or explicit"),
                )),
            },
        }
    }
}

/// A validated scenario file with exact and floating-point views.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub file: ScenarioFile,
    pub exact: RationalScenario,
    pub float: Scenario,
    pub kind: StructureKind,
    explicit: Option<RationalStructure>,
}

fn table(rows: &[Vec<Literal>]) -> Result<Vec<Vec<Rational>>, CliError> {
    rows.iter()
        .map(|row| row.iter().map(Literal::to_rational).collect())
        .collect()
}

impl LoadedScenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::new("io", format!("cannot read {}: {e}", path.display())))?;
        let file: ScenarioFile =
            serde_json::from_str(&text).map_err(|e| CliError::new("parse", format!("{}: {e}", path.display())))?;
        LoadedScenario::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, CliError> {
        if file.prior.len() != file.states.len() {
            return Err(CliError::new(
                "scenario",
                format!(
                    "prior has {} entries for {} states",
                    file.prior.len(),
                    file.states.len()
                ),
            ));
        }
        let prior: Vec<Rational> = file.prior.iter().map(Literal::to_rational).collect::<Result<_, _>>()?;
        let total: Rational = prior.iter().sum();
        if total != Rational::from_integer(1.into()) {
            return Err(CliError::new("scenario", format!("prior sums to {total}, not 1")));
        }
        let exact = RationalScenario::new(
            file.states.clone(),
            file.actions.clone(),
            prior[0].clone(),
            table(&file.receiver_utility)?,
            table(&file.sender_utility)?,
        )?;
        let float = exact.to_float()?;

        let kind = match (&file.structure_kind, &file.structure) {
            (Some(k), _) => StructureKind::parse(k)?,
            (None, Some(_)) => StructureKind::Explicit,
            (None, None) => StructureKind::BpOptimal,
        };
        let explicit = match &file.structure {
            Some(section) => Some(RationalStructure::new(
                section.signals.clone(),
                table(&section.matrix)?,
            )?),
            None => None,
        };
        if kind == StructureKind::Explicit && explicit.is_none() {
            return Err(CliError::new(
                "scenario",
                "structure_kind is explicit but no structure is given",
            ));
        }
        Ok(LoadedScenario {
            file,
            exact,
            float,
            kind,
            explicit,
        })
    }

    /// The announced structure in exact arithmetic.
    pub fn exact_structure(&self) -> Result<RationalStructure, CliError> {
        Ok(match &self.kind {
            StructureKind::BpOptimal => oracle::bp_optimal(&self.exact)?.structure,
            StructureKind::Full => oracle::full_disclosure(),
            StructureKind::None => oracle::no_disclosure(),
            StructureKind::Epsilon(eps) => {
                solver::revealing_preferred_shape(&self.float)?;
                oracle::epsilon_structure(&self.exact, eps)?
            }
            StructureKind::Explicit => self.explicit.clone().expect("checked at load"),
        })
    }

    /// The announced structure in floating point.
    pub fn float_structure(&self) -> Result<InformationStructure, CliError> {
        Ok(match &self.kind {
            StructureKind::BpOptimal => solver::bp_optimal(&self.float)?.structure,
            StructureKind::Full => full_disclosure(&self.float),
            StructureKind::None => no_disclosure(&self.float),
            StructureKind::Epsilon(eps) => solver::epsilon_structure(&self.float, oracle::to_f64(eps))?,
            StructureKind::Explicit => self.explicit.as_ref().expect("checked at load").to_float()?,
        })
    }
}
