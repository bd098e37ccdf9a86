//! Interval risks of infection, hospitalization and death.
//!
//! ```text
//! r_ac  = case density range                      (epidemiology)
//! mix   = lagged, smoothed variant shares         (variants)
//! r_v   = 1 - Σ_v mix_v · efficacy(vaccine, v)
//! r_m   = 1 - FFE(mask)
//! r_i   = n_indoor  · k_indoor  · r_ac · r_v · r_m
//! r_o   = n_outdoor · k_outdoor · r_ac · r_v · r_m
//! r     = min(1, r_i + r_o)
//! r_h   = r · min(1, base_h(age) · f_c · f_v)
//! r_d   = r · min(p_h, base_d(age) · f_g1 · f_c1 · f_v1)
//! ```
//!
//! The conditional hospitalization rate `p_h` (the bracket in `r_h`) caps the
//! conditional death rate, which keeps `death ≤ hospitalization ≤ infection`
//! endpoint-wise even where the fold products in the tables exceed one.

pub mod tables;

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::epidemiology::{case_density_range, CaseDensity};
use crate::error::RiskError;
use crate::ingest::{normalize_region_id, DataSnapshot};
use crate::interval::Interval;
use crate::variants::{self, VariantMix, DEFAULT_LAG_DAYS, DEFAULT_SIGMA_DAYS};
use tables::{AgeBand, MaskTable, SeverityTable, VaccineTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn from_name(s: &str) -> Option<Sex> {
        match s.trim().to_lowercase().as_str() {
            "male" | "m" => Some(Sex::Male),
            "female" | "f" => Some(Sex::Female),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonProfile {
    pub age_years: u32,
    pub sex: Sex,
    pub chronic_illness: bool,
    pub vaccine: String,
    pub mask: String,
}

impl PersonProfile {
    pub fn age_band(&self) -> AgeBand {
        AgeBand::for_age(self.age_years)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityProfile {
    pub n_indoor: u32,
    pub n_outdoor: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    pub k_indoor: f64,
    pub k_outdoor: f64,
    pub variant_smoothing_sigma_days: f64,
    pub variant_lag_days: u32,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            k_indoor: 1.0,
            k_outdoor: 0.05,
            variant_smoothing_sigma_days: DEFAULT_SIGMA_DAYS,
            variant_lag_days: DEFAULT_LAG_DAYS,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<(), RiskError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.k_indoor) {
            return Err(RiskError::InvalidConfig(format!("k_indoor must be positive, got {}", self.k_indoor)));
        }
        if !positive(self.k_outdoor) {
            return Err(RiskError::InvalidConfig(format!("k_outdoor must be positive, got {}", self.k_outdoor)));
        }
        if self.k_outdoor > self.k_indoor {
            return Err(RiskError::InvalidConfig(format!(
                "k_outdoor ({}) must not exceed k_indoor ({})",
                self.k_outdoor, self.k_indoor
            )));
        }
        if !positive(self.variant_smoothing_sigma_days) {
            return Err(RiskError::InvalidConfig(format!(
                "variant_smoothing_sigma_days must be positive, got {}",
                self.variant_smoothing_sigma_days
            )));
        }
        Ok(())
    }
}

/// Caveats attached to a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// No survey ratio within the staleness window; upper bound equals lower.
    NoSurveyData,
    /// No variant data at the lagged date; the original variant was assumed.
    LagFallback,
    /// A variant in the mix has no efficacy figure for the vaccine; counted as 0.
    UnknownEfficacy,
    /// A variant in the mix has only a qualitative severity note; folded as 1.
    UnquantifiedSeverityFold,
    /// A conditional severity rate was capped (at 1, or death at hospitalization).
    SeverityCapped,
}

impl Flag {
    pub fn name(self) -> &'static str {
        match self {
            Flag::NoSurveyData => "no-survey-data",
            Flag::LagFallback => "lag-fallback",
            Flag::UnknownEfficacy => "unknown-efficacy",
            Flag::UnquantifiedSeverityFold => "unquantified-severity-fold",
            Flag::SeverityCapped => "severity-capped",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mask risk multiplier `r_m = 1 - FFE`.
pub fn mask_factor(table: &MaskTable, mask: &str) -> Result<f64, RiskError> {
    table
        .get(mask)
        .map(|e| 1.0 - e.ffe)
        .ok_or_else(|| RiskError::UnknownMask {
            name: mask.to_string(),
            valid: table.names(),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficacy {
    pub efficacy: Interval,
    /// A variant with positive share has a `-` cell for this vaccine.
    pub unknown_touched: bool,
}

/// Mixture-weighted efficacy `Σ_v share_v · eff(vaccine, v)`.
pub fn vaccine_efficacy(table: &VaccineTable, vaccine: &str, mix: &VariantMix) -> Result<Efficacy, RiskError> {
    let row = table.get(vaccine).ok_or_else(|| RiskError::UnknownVaccine {
        name: vaccine.to_string(),
        valid: table.names(),
    })?;
    let efficacy = mix.weighted(|v| row.cell(v).efficacy).clamp_unit();
    let unknown_touched = mix.present().any(|v| row.cell(v).unknown);
    Ok(Efficacy { efficacy, unknown_touched })
}

/// Vaccine risk multiplier `r_v = 1 - efficacy`, endpoints swapped.
pub fn vaccine_factor(efficacy: Interval) -> Interval {
    efficacy.complement().clamp_unit()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfectionRisk {
    pub indoor: Interval,
    pub outdoor: Interval,
    pub cumulative: Interval,
}

pub fn infection_risk(
    activity: &ActivityProfile,
    case_density: Interval,
    vaccine_factor: Interval,
    mask_factor: f64,
    config: &RiskConfig,
) -> InfectionRisk {
    let per_contact = (case_density * vaccine_factor).scale(mask_factor);
    let indoor = per_contact.scale(activity.n_indoor as f64 * config.k_indoor);
    let outdoor = per_contact.scale(activity.n_outdoor as f64 * config.k_outdoor);
    InfectionRisk {
        indoor,
        outdoor,
        cumulative: (indoor + outdoor).clamp_unit(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityFolds {
    /// `f_c · f_v` (the sex fold on hospitalization is 1).
    pub hospitalization: Interval,
    /// `f_g1 · f_c1 · f_v1`.
    pub death: Interval,
    pub unquantified: bool,
}

pub fn severity_folds(table: &SeverityTable, profile: &PersonProfile, mix: &VariantMix) -> SeverityFolds {
    let variant_h = mix.weighted(|v| table.variant_fold(v).hospitalization.fold);
    let variant_d = mix.weighted(|v| table.variant_fold(v).death.fold);
    let unquantified = mix.present().any(|v| {
        let f = table.variant_fold(v);
        f.hospitalization.unquantified || f.death.unquantified
    });
    let sex = match profile.sex {
        Sex::Male => &table.male,
        Sex::Female => &table.female,
    };
    let (chronic_h, chronic_d) = if profile.chronic_illness {
        (table.chronic.hospitalization.fold, table.chronic.death.fold)
    } else {
        (Interval::ONE, Interval::ONE)
    };
    SeverityFolds {
        hospitalization: sex.hospitalization.fold * chronic_h * variant_h,
        death: sex.death.fold * chronic_d * variant_d,
        unquantified,
    }
}

/// Severity probabilities given infection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSeverity {
    pub hospitalization: Interval,
    pub death: Interval,
    pub capped: bool,
}

pub fn conditional_severity(table: &SeverityTable, profile: &PersonProfile, mix: &VariantMix) -> (ConditionalSeverity, SeverityFolds) {
    let folds = severity_folds(table, profile, mix);
    let base = table.base(profile.age_band());
    let raw_h = folds.hospitalization.scale(base.hospitalization.rate);
    let hospitalization = raw_h.clamp_max(1.0);
    let raw_d = folds.death.scale(base.death.rate);
    let death = raw_d.min(hospitalization);
    let capped = hospitalization != raw_h || death != raw_d;
    (
        ConditionalSeverity {
            hospitalization,
            death,
            capped,
        },
        folds,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityRisk {
    pub risk: Interval,
    pub capped: bool,
}

pub fn hospitalization_risk(table: &SeverityTable, profile: &PersonProfile, mix: &VariantMix, cumulative: Interval) -> SeverityRisk {
    let (cond, folds) = conditional_severity(table, profile, mix);
    SeverityRisk {
        risk: (cumulative * cond.hospitalization).clamp_unit(),
        capped: cond.hospitalization != folds.hospitalization.scale(table.base(profile.age_band()).hospitalization.rate),
    }
}

pub fn death_risk(table: &SeverityTable, profile: &PersonProfile, mix: &VariantMix, cumulative: Interval) -> SeverityRisk {
    let (cond, folds) = conditional_severity(table, profile, mix);
    SeverityRisk {
        risk: (cumulative * cond.death).clamp_unit(),
        capped: cond.death != folds.death.scale(table.base(profile.age_band()).death.rate),
    }
}

/// Intermediate values behind a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskComponents {
    pub case_density: CaseDensity,
    pub variant_mix: VariantMix,
    pub vaccine_efficacy: Interval,
    pub vaccine_factor: Interval,
    pub mask_factor: f64,
    pub indoor: Interval,
    pub outdoor: Interval,
    pub age_band: AgeBand,
    pub hospitalization_fold: Interval,
    pub death_fold: Interval,
    pub conditional_hospitalization: Interval,
    pub conditional_death: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub region: String,
    pub date: NaiveDate,
    pub infection: Interval,
    pub hospitalization: Interval,
    pub death: Interval,
    pub flags: BTreeSet<Flag>,
    pub profile: PersonProfile,
    pub activity: ActivityProfile,
    pub config: RiskConfig,
    pub components: RiskComponents,
    pub snapshot_time: DateTime<Utc>,
}

/// Check that a profile's table names resolve.
pub fn validate_profile(snapshot: &DataSnapshot, profile: &PersonProfile) -> Result<(), RiskError> {
    let tables = snapshot.tables();
    mask_factor(&tables.mask, &profile.mask)?;
    if tables.vaccine.get(&profile.vaccine).is_none() {
        return Err(RiskError::UnknownVaccine {
            name: profile.vaccine.clone(),
            valid: tables.vaccine.names(),
        });
    }
    Ok(())
}

/// Full pipeline for one region, date, person and activity.
pub fn assess(
    snapshot: &DataSnapshot,
    region: &str,
    date: NaiveDate,
    profile: &PersonProfile,
    activity: &ActivityProfile,
    config: &RiskConfig,
) -> Result<RiskReport, RiskError> {
    config.validate()?;
    let id = normalize_region_id(region);
    if snapshot.region(&id).is_none() {
        return Err(RiskError::UnknownRegion(region.to_string()));
    }
    let tables = snapshot.tables();
    let r_m = mask_factor(&tables.mask, &profile.mask)?;

    let case_density = case_density_range(snapshot, &id, date)?;
    let sample = variants::variant_mix(snapshot, &id, date, config.variant_smoothing_sigma_days, config.variant_lag_days)?;
    let mix = sample.mix;

    let efficacy = vaccine_efficacy(&tables.vaccine, &profile.vaccine, &mix)?;
    let r_v = vaccine_factor(efficacy.efficacy);
    let infection = infection_risk(activity, case_density.density, r_v, r_m, config);
    let (cond, folds) = conditional_severity(&tables.severity, profile, &mix);
    let hospitalization = (infection.cumulative * cond.hospitalization).clamp_unit();
    let death = (infection.cumulative * cond.death).clamp_unit();

    let mut flags = BTreeSet::new();
    if case_density.ratio.no_survey_data {
        flags.insert(Flag::NoSurveyData);
    }
    if sample.lag_fallback {
        flags.insert(Flag::LagFallback);
    }
    if efficacy.unknown_touched {
        flags.insert(Flag::UnknownEfficacy);
    }
    if folds.unquantified {
        flags.insert(Flag::UnquantifiedSeverityFold);
    }
    if cond.capped {
        flags.insert(Flag::SeverityCapped);
    }

    Ok(RiskReport {
        region: id,
        date,
        infection: infection.cumulative,
        hospitalization,
        death,
        flags,
        profile: profile.clone(),
        activity: *activity,
        config: *config,
        components: RiskComponents {
            case_density,
            variant_mix: mix,
            vaccine_efficacy: efficacy.efficacy,
            vaccine_factor: r_v,
            mask_factor: r_m,
            indoor: infection.indoor,
            outdoor: infection.outdoor,
            age_band: profile.age_band(),
            hospitalization_fold: folds.hospitalization,
            death_fold: folds.death,
            conditional_hospitalization: cond.hospitalization,
            conditional_death: cond.death,
        },
        snapshot_time: snapshot.snapshot_time(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedDay {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    /// One report per assessable day, in date order.
    pub reports: Vec<RiskReport>,
    /// Days that could not be assessed, in date order.
    pub skipped: Vec<SkippedDay>,
}

/// [`assess`] for every day in `from..=to`.
///
/// Region, profile and config problems fail the whole call; per-day
/// failures (insufficient history) are recorded in `skipped`.
pub fn simulate(
    snapshot: &DataSnapshot,
    region: &str,
    from: NaiveDate,
    to: NaiveDate,
    profile: &PersonProfile,
    activity: &ActivityProfile,
    config: &RiskConfig,
) -> Result<Simulation, RiskError> {
    if from > to {
        return Err(RiskError::InvalidRange { from, to });
    }
    config.validate()?;
    if snapshot.region(&normalize_region_id(region)).is_none() {
        return Err(RiskError::UnknownRegion(region.to_string()));
    }
    validate_profile(snapshot, profile)?;

    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for date in from.iter_days().take_while(|d| *d <= to) {
        match assess(snapshot, region, date, profile, activity, config) {
            Ok(report) => reports.push(report),
            Err(e) => skipped.push(SkippedDay {
                date,
                reason: e.to_string(),
            }),
        }
    }
    if reports.is_empty() {
        return Err(RiskError::EmptyUsableRange { from, to });
    }
    Ok(Simulation { reports, skipped })
}
