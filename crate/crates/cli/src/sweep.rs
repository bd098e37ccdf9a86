//! Declarative temporal sweeps.
//!
//! ```toml
//! snapshot = "data/snapshot"     # relative to this file; --snapshot overrides
//! region = "US/Franklin"
//! from = "2020-06-01"
//! to = "2022-04-30"
//! out = "results.csv"            # --out overrides
//!
//! [config]                       # optional, partial
//! k_outdoor = 0.05
//!
//! [[scenario]]
//! name = "A"
//! profile = { age_years = 30, sex = "male", chronic_illness = false, vaccine = "No Vaccine", mask = "No Mask" }
//! activity = { n_indoor = 5, n_outdoor = 10 }
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use covarc_core::riskmodel::SkippedDay;
use covarc_core::{simulate, ActivityProfile, DataSnapshot, PersonProfile, RiskConfig, RiskError};
use serde::Deserialize;

use crate::output::{self, RESULT_COLUMNS};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("cannot read sweep spec {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid sweep spec: {0}")]
    Parse(String),
    #[error("invalid sweep spec: {0}")]
    Invalid(String),
    #[error("scenario '{scenario}': {source}")]
    Scenario { scenario: String, source: RiskError },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub profile: PersonProfile,
    pub activity: ActivityProfile,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
    pub region: String,
    pub from: NaiveDate,
    pub to: NaiveDate,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub config: RiskConfig,
    #[serde(rename = "scenario", default)]
    pub scenarios: Vec<Scenario>,
}

impl SweepSpec {
    pub fn from_toml(raw: &str) -> Result<Self, SweepError> {
        let spec: SweepSpec = toml::from_str(raw).map_err(|e| SweepError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Read a spec file; relative `snapshot` and `out` paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, SweepError> {
        let raw = std::fs::read_to_string(path).map_err(|source| SweepError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut spec = Self::from_toml(&raw)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [spec.snapshot.as_mut(), spec.out.as_mut()].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.scenarios.is_empty() {
            return Err(SweepError::Invalid("at least one [[scenario]] is required".into()));
        }
        let mut names = BTreeSet::new();
        for s in &self.scenarios {
            if s.name.trim().is_empty() {
                return Err(SweepError::Invalid("scenario names must not be empty".into()));
            }
            if !names.insert(s.name.as_str()) {
                return Err(SweepError::Invalid(format!("duplicate scenario name '{}'", s.name)));
            }
        }
        if self.from > self.to {
            return Err(SweepError::Invalid(format!("from ({}) is after to ({})", self.from, self.to)));
        }
        self.config.validate().map_err(|e| SweepError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub csv: String,
    pub rows: usize,
    /// Unassessable days per scenario, in scenario order.
    pub skipped: Vec<(String, Vec<SkippedDay>)>,
}

/// Run every scenario and render the result table. Rows are ordered by
/// scenario (as listed) and then by date.
pub fn run(spec: &SweepSpec, snapshot: &DataSnapshot) -> Result<SweepOutput, SweepError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(RESULT_COLUMNS).expect("in-memory write");
    let mut rows = 0;
    let mut skipped = Vec::new();
    for s in &spec.scenarios {
        let sim = simulate(snapshot, &spec.region, spec.from, spec.to, &s.profile, &s.activity, &spec.config).map_err(|source| {
            SweepError::Scenario {
                scenario: s.name.clone(),
                source,
            }
        })?;
        for r in &sim.reports {
            w.write_record(output::result_row(&s.name, r)).expect("in-memory write");
            rows += 1;
        }
        skipped.push((s.name.clone(), sim.skipped));
    }
    let csv = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8");
    Ok(SweepOutput { csv, rows, skipped })
}
