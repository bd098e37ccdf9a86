//! Active-case density from cumulative confirmed counts.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::RiskError;
use crate::ingest::{normalize_region_id, CaseSeries, DataSnapshot};
use crate::interval::Interval;

/// Days a case is counted as active.
pub const ACTIVE_WINDOW_DAYS: u64 = 14;
/// Oldest survey ratio still used for a date.
pub const RATIO_STALENESS_DAYS: u64 = 14;

/// Day-over-day differences, negative corrections clamped to zero.
pub fn daily_new_cases(series: &CaseSeries) -> Result<Vec<u64>, RiskError> {
    if series.values.len() < 2 {
        return Err(RiskError::SeriesTooShort {
            needed: 2,
            got: series.values.len(),
        });
    }
    Ok(series
        .values
        .windows(2)
        .map(|w| w[1].saturating_sub(w[0]))
        .collect())
}

/// Cumulative-count dates needed to assess `date`.
pub fn required_range(date: NaiveDate) -> (NaiveDate, NaiveDate) {
    (date - chrono::Days::new(ACTIVE_WINDOW_DAYS), date)
}

/// Sum of the 14 daily new-case values ending at `date` (`n_ac`).
pub fn active_window_sum(series: &CaseSeries, date: NaiveDate) -> Result<u64, RiskError> {
    let (from, to) = required_range(date);
    let insufficient = || RiskError::InsufficientData {
        region: series.region.canonical_id.clone(),
        required_from: from,
        required_to: to,
        available_from: series.start_date,
        available_to: series.end_date(),
    };
    let (Some(start), Some(end)) = (series.index_of(from), series.index_of(to)) else {
        return Err(insufficient());
    };
    Ok(series.values[start..=end]
        .windows(2)
        .map(|w| w[1].saturating_sub(w[0]))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioLookup {
    pub ratio: f64,
    /// Date of the survey sample used, if any.
    pub sample_date: Option<NaiveDate>,
    pub no_survey_data: bool,
}

/// Under-reporting multiplier at `date`: the latest survey ratio at most 14
/// days old, clamped to at least 1. Without one the multiplier is 1.
pub fn underreport_ratio(snapshot: &DataSnapshot, region: &str, date: NaiveDate) -> RatioLookup {
    let oldest = date - chrono::Days::new(RATIO_STALENESS_DAYS);
    let sample = snapshot
        .ratios(region)
        .and_then(|s| s.ratios.range(oldest..=date).next_back().map(|(d, r)| (*d, *r)));
    match sample {
        Some((d, r)) => RatioLookup {
            ratio: r.max(1.0),
            sample_date: Some(d),
            no_survey_data: false,
        },
        None => RatioLookup {
            ratio: 1.0,
            sample_date: None,
            no_survey_data: true,
        },
    }
}

/// `[n_ac / population, n_ac · ratio / population]`, each clamped to at most 1.
pub fn density_from_parts(n_ac: u64, ratio: f64, population: u64) -> Interval {
    let pop = population as f64;
    let n = n_ac as f64;
    Interval::new(n / pop, (n * ratio) / pop)
        .expect("ratio >= 1 keeps the density ordered")
        .clamp_max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDensity {
    pub n_ac: u64,
    pub population: u64,
    pub ratio: RatioLookup,
    pub density: Interval,
}

/// The active-case density range `r_ac` for a region and date.
pub fn case_density_range(snapshot: &DataSnapshot, region: &str, date: NaiveDate) -> Result<CaseDensity, RiskError> {
    let id = normalize_region_id(region);
    let series = snapshot.cases(&id).ok_or_else(|| RiskError::UnknownRegion(region.to_string()))?;
    let population = snapshot.population(&id).ok_or_else(|| RiskError::UnknownRegion(region.to_string()))?;
    let n_ac = active_window_sum(series, date)?;
    let ratio = underreport_ratio(snapshot, &id, date);
    Ok(CaseDensity {
        n_ac,
        population,
        ratio,
        density: density_from_parts(n_ac, ratio.ratio, population),
    })
}
