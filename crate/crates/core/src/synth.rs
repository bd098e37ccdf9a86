//! Deterministic synthetic snapshots for demos, benchmarks and tests.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};

use crate::error::IngestError;
use crate::ingest::{build_snapshot, CaseSeries, DataSnapshot, PopulationTable, RatioSeries, RegionKey, StaticTables, VariantShareSeries};
use crate::variants::Variant;

/// A bump in daily new cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    /// Day index of the peak in daily new cases.
    pub center: f64,
    pub width_days: f64,
    pub peak_daily_cases: f64,
}

/// Cumulative counts whose daily increments are a sum of Gaussian waves
/// over a constant baseline, rounded to whole cases.
pub fn wave_cumulative(days: usize, baseline_daily: f64, waves: &[Wave]) -> Vec<u64> {
    let mut total = 0u64;
    (0..days)
        .map(|t| {
            if t > 0 {
                let x = t as f64;
                let daily: f64 = baseline_daily
                    + waves
                        .iter()
                        .map(|w| w.peak_daily_cases * (-(x - w.center).powi(2) / (2.0 * w.width_days.powi(2))).exp())
                        .sum::<f64>();
                total += daily.round().max(0.0) as u64;
            }
            total
        })
        .collect()
}

/// Weekly variant counts moving original → alpha → delta → omicron.
fn variant_counts(day: usize, days: usize, phase: f64) -> [f64; Variant::COUNT] {
    let t = day as f64 / days.max(1) as f64 + phase;
    let logistic = |c: f64| 1.0 / (1.0 + (-(t - c) * 25.0).exp());
    let alpha = logistic(0.3) - logistic(0.55);
    let delta = logistic(0.55) - logistic(0.8);
    let omicron = logistic(0.8);
    let original = (1.0 - alpha - delta - omicron).max(0.0);
    let mut out = [0.0; Variant::COUNT];
    out[Variant::Original.index()] = (original * 200.0).round();
    out[Variant::Alpha.index()] = (alpha * 200.0).round();
    out[Variant::Delta.index()] = (delta * 200.0).round();
    out[Variant::Omicron.index()] = (omicron * 200.0).round();
    out
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub regions: usize,
    pub days: usize,
    pub start: NaiveDate,
    pub variants: bool,
    pub ratios: bool,
    pub snapshot_time: DateTime<Utc>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            regions: 3,
            days: 120,
            start: NaiveDate::from_ymd_opt(2020, 6, 1).expect("valid date"),
            variants: true,
            ratios: true,
            snapshot_time: DateTime::<Utc>::from_timestamp(1_651_276_800, 0).expect("valid timestamp"),
        }
    }
}

/// Build a snapshot of `spec.regions` regions named `Synthland/R###`.
pub fn synthetic_snapshot(spec: &SynthSpec) -> Result<DataSnapshot, IngestError> {
    let mut cases = Vec::with_capacity(spec.regions);
    let mut variants = Vec::new();
    let mut ratios = Vec::new();
    let mut populations = PopulationTable::default();
    for r in 0..spec.regions {
        let key = RegionKey::new("Synthland", Some(&format!("R{r:03}"))).expect("non-empty country");
        let population = 50_000 + 7_919 * (r as u64 % 97) * 100;
        let scale = population as f64 / 100_000.0;
        let phase = (r % 11) as f64 / 40.0;
        let d = spec.days as f64;
        let waves = [
            Wave { center: d * (0.2 + phase), width_days: d * 0.04, peak_daily_cases: 40.0 * scale },
            Wave { center: d * (0.5 + phase / 2.0), width_days: d * 0.05, peak_daily_cases: 70.0 * scale },
            Wave { center: d * (0.85 - phase / 3.0), width_days: d * 0.03, peak_daily_cases: 150.0 * scale },
        ];
        let values = wave_cumulative(spec.days, 2.0 * scale, &waves);
        cases.push(CaseSeries {
            region: key.clone(),
            start_date: spec.start,
            values,
        });
        populations.insert(key.clone(), population)?;
        if spec.variants {
            let days = (0..spec.days)
                .map(|day| (day % 7 == 0).then(|| variant_counts(day, spec.days, phase - 0.1)))
                .collect::<Vec<_>>();
            let last_full = days.iter().rposition(Option::is_some).expect("day 0 present");
            variants.push(VariantShareSeries {
                region: key.clone(),
                start_date: spec.start,
                days: days[..=last_full].to_vec(),
            });
        }
        if spec.ratios && r % 5 != 4 {
            let ratios_by_day: BTreeMap<NaiveDate, f64> = (0..spec.days)
                .step_by(7)
                .map(|day| {
                    let rr = 1.5 + ((day as f64 / 30.0 + r as f64).sin() + 1.0) * 0.75;
                    (spec.start + chrono::Days::new(day as u64), (rr * 1000.0).round() / 1000.0)
                })
                .collect();
            ratios.push(RatioSeries {
                region: key,
                ratios: ratios_by_day,
            });
        }
    }
    build_snapshot(cases, variants, ratios, populations, StaticTables::builtin(), spec.snapshot_time)
}
