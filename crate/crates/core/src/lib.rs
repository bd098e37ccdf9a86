//! Interval-valued COVID-19 activity risk engine.
//!
//! The pipeline reads an immutable [`DataSnapshot`] of regional case,
//! variant and survey series plus the static efficacy/severity tables, and
//! turns a person/activity description into ranges of infection,
//! hospitalization and death risk:
//!
//! 1. [`epidemiology`] turns cumulative counts into an active-case density range.
//! 2. [`variants`] smooths and lags variant prevalence into a [`VariantMix`].
//! 3. [`riskmodel`] applies vaccine and mask factors, contact counts and the
//!    severity folds.

pub mod epidemiology;
pub mod error;
pub mod fmt;
pub mod ingest;
pub mod interval;
pub mod riskmodel;
pub mod synth;
pub mod variants;

pub use error::{IngestError, RiskError};
pub use ingest::{
    CaseSeries, DataSnapshot, PopulationTable, RatioSeries, RegionKey, StaticTables,
    VariantShareSeries,
};
pub use interval::Interval;
pub use riskmodel::{
    assess, simulate, ActivityProfile, Flag, PersonProfile, RiskConfig, RiskReport, Sex,
    Simulation,
};
pub use variants::{Variant, VariantMix};
