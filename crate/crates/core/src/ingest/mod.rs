//! Snapshot file parsing and validation.
//!
//! A snapshot directory holds:
//!
//! | file                       | layout                                         |
//! |----------------------------|------------------------------------------------|
//! | `cases.csv`                | `country,region,<date>,<date>,...` cumulative  |
//! | `variants.csv`             | `country,region,date,variant,share`            |
//! | `ratios.csv`               | `country,region,date,ratio`                    |
//! | `populations.csv`          | `country,region,population`                    |
//! | `tables/mask_ffe.csv`      | `mask,ffe`                                     |
//! | `tables/vaccine_efficacy.csv` | `vaccine,normal,alpha,beta,gamma,delta,omicron` |
//! | `tables/severity.csv`      | `group,category,hospitalization,death`         |
//! | `manifest.toml` (optional) | `snapshot_time = "<RFC 3339>"`                 |
//!
//! Dates are normalized at ingest: ISO `YYYY-MM-DD` and the upstream
//! `M/D/YY` / `M/D/YYYY` forms are both accepted everywhere a date appears.

mod snapshot;

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::variants::Variant;

pub use snapshot::{build_snapshot, DataSnapshot, LoadOptions, StaticTables};

pub const CASES_FILE: &str = "cases.csv";
pub const VARIANTS_FILE: &str = "variants.csv";
pub const RATIOS_FILE: &str = "ratios.csv";
pub const POPULATIONS_FILE: &str = "populations.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TABLES_DIR: &str = "tables";
pub const MASK_FILE: &str = "mask_ffe.csv";
pub const VACCINE_FILE: &str = "vaccine_efficacy.csv";
pub const SEVERITY_FILE: &str = "severity.csv";

/// Country plus optional sub-national region.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionKey {
    pub country: String,
    pub region: Option<String>,
    pub canonical_id: String,
}

impl RegionKey {
    pub fn new(country: &str, region: Option<&str>) -> Option<Self> {
        let country = country.trim();
        if country.is_empty() {
            return None;
        }
        let region = region.map(str::trim).filter(|r| !r.is_empty());
        let canonical_id = canonical_id(country, region);
        Some(RegionKey {
            country: country.to_string(),
            region: region.map(str::to_string),
            canonical_id,
        })
    }
}

/// Lowercased `country/region` join; a missing region leaves a trailing slash.
pub fn canonical_id(country: &str, region: Option<&str>) -> String {
    format!(
        "{}/{}",
        country.trim().to_lowercase(),
        region.unwrap_or("").trim().to_lowercase()
    )
}

/// Normalize a user-supplied region id (`"US/Massachusetts"`, `"za"`) to canonical form.
pub fn normalize_region_id(id: &str) -> String {
    match id.split_once('/') {
        Some((country, region)) => canonical_id(country, Some(region)),
        None => canonical_id(id, None),
    }
}

impl fmt::Display for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.region {
            Some(r) => write!(f, "{}/{}", self.country, r),
            None => write!(f, "{}", self.country),
        }
    }
}

/// Cumulative confirmed counts on consecutive days.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseSeries {
    pub region: RegionKey,
    pub start_date: NaiveDate,
    pub values: Vec<u64>,
}

impl CaseSeries {
    pub fn end_date(&self) -> NaiveDate {
        self.start_date + chrono::Days::new(self.values.len() as u64 - 1)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date).num_days();
        (offset >= 0 && (offset as usize) < self.values.len()).then_some(offset as usize)
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start_date + chrono::Days::new(index as u64)
    }
}

/// Per-day variant values; `None` marks a day with no rows in the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantShareSeries {
    pub region: RegionKey,
    pub start_date: NaiveDate,
    pub days: Vec<Option<[f64; Variant::COUNT]>>,
}

impl VariantShareSeries {
    pub fn end_date(&self) -> NaiveDate {
        self.start_date + chrono::Days::new(self.days.len() as u64 - 1)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date).num_days();
        (offset >= 0 && (offset as usize) < self.days.len()).then_some(offset as usize)
    }

    /// The values for one variant across the series; missing days stay `None`.
    pub fn variant_values(&self, variant: Variant) -> Vec<Option<f64>> {
        self.days
            .iter()
            .map(|d| d.map(|shares| shares[variant.index()]))
            .collect()
    }
}

/// Sparse survey-to-official case ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSeries {
    pub region: RegionKey,
    pub ratios: BTreeMap<NaiveDate, f64>,
}

impl RatioSeries {
    pub fn start_date(&self) -> Option<NaiveDate> {
        self.ratios.keys().next().copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PopulationTable {
    entries: BTreeMap<String, (RegionKey, u64)>,
}

impl PopulationTable {
    pub fn get(&self, canonical_id: &str) -> Option<u64> {
        self.entries.get(canonical_id).map(|(_, p)| *p)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RegionKey, u64)> {
        self.entries.values().map(|(k, p)| (k, *p))
    }

    /// Insert or replace; `population` must be at least 1.
    pub fn insert(&mut self, key: RegionKey, population: u64) -> Result<(), IngestError> {
        if population == 0 {
            return Err(IngestError::table(
                POPULATIONS_FILE,
                format!("population for {key} must be at least 1"),
            ));
        }
        self.entries.insert(key.canonical_id.clone(), (key, population));
        Ok(())
    }
}

/// Parse a calendar date in ISO or upstream `M/D/YY[YY]` form.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    let mut parts = s.split('/');
    let (m, d, y) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() {
        return None;
    }
    let m: u32 = m.parse().ok()?;
    let d: u32 = d.parse().ok()?;
    let mut y: i32 = y.parse().ok()?;
    if y < 100 {
        y += 2000;
    }
    NaiveDate::from_ymd_opt(y, m, d)
}

fn reader(raw: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes())
}

fn csv_error(file: &str, err: csv::Error) -> IngestError {
    let row = err
        .position()
        .map(|p| p.line().saturating_sub(1) as usize)
        .unwrap_or(0);
    IngestError::row(file, row, None, err.to_string())
}

fn expect_header(file: &str, headers: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    let got: Vec<String> = headers.iter().map(|h| h.trim_start_matches('\u{feff}').to_lowercase()).collect();
    if got.len() != expected.len() || got.iter().zip(expected).any(|(g, e)| g != e) {
        return Err(IngestError::header(
            file,
            format!("expected columns '{}', found '{}'", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Row records with their 1-based data row number.
fn records(file: &str, rdr: &mut csv::Reader<&[u8]>) -> Vec<Result<(usize, csv::StringRecord), IngestError>> {
    rdr.records()
        .enumerate()
        .map(|(i, r)| r.map(|rec| (i + 1, rec)).map_err(|e| csv_error(file, e)))
        .collect()
}

fn region_of(file: &str, row: usize, rec: &csv::StringRecord) -> Result<RegionKey, IngestError> {
    let country = rec.get(0).unwrap_or("");
    let region = rec.get(1).filter(|r| !r.is_empty());
    RegionKey::new(country, region).ok_or_else(|| IngestError::row(file, row, Some("country"), "country is empty"))
}

fn date_cell(file: &str, row: usize, cell: &str) -> Result<NaiveDate, IngestError> {
    parse_date(cell).ok_or_else(|| IngestError::row(file, row, Some("date"), format!("invalid date '{cell}'")))
}

/// Parse the wide case table: one row per region, one column per consecutive date.
///
/// Leading and trailing empty cells are allowed so regions with different
/// coverage can share one header; an empty cell between values is a gap.
pub fn parse_case_table(raw: &str) -> Result<Vec<CaseSeries>, IngestError> {
    let file = CASES_FILE;
    let mut rdr = reader(raw);
    let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    if headers.len() < 3 {
        return Err(IngestError::header(file, "expected 'country,region' followed by at least one date column"));
    }
    expect_header(file, &headers.iter().take(2).collect(), &["country", "region"])?;
    let mut dates = Vec::with_capacity(headers.len() - 2);
    for (i, h) in headers.iter().enumerate().skip(2) {
        let d = parse_date(h).ok_or_else(|| IngestError::header(file, format!("column {}: '{h}' is not a date", i + 1)))?;
        if let Some(prev) = dates.last() {
            if d != *prev + chrono::Days::new(1) {
                return Err(IngestError::header(
                    file,
                    format!("date columns not consecutive: {prev} followed by {d}"),
                ));
            }
        }
        dates.push(d);
    }

    let mut out: BTreeMap<String, CaseSeries> = BTreeMap::new();
    for item in records(file, &mut rdr) {
        let (row, rec) = item?;
        let key = region_of(file, row, &rec)?;
        let mut first = None;
        let mut values = Vec::new();
        let mut pending_gap: Option<NaiveDate> = None;
        for (cell, date) in rec.iter().skip(2).zip(&dates) {
            if cell.is_empty() {
                if first.is_some() && pending_gap.is_none() {
                    pending_gap = Some(*date);
                }
                continue;
            }
            if let Some(gap) = pending_gap {
                return Err(IngestError::row(
                    file,
                    row,
                    Some(&gap.to_string()),
                    format!("missing count at ({key}, {gap})"),
                ));
            }
            let value = match cell.parse::<u64>() {
                Ok(v) => v,
                Err(_) if cell.parse::<i64>().is_ok() => {
                    return Err(IngestError::row(file, row, Some(&date.to_string()), format!("negative count at ({key}, {date})")))
                }
                Err(_) => {
                    return Err(IngestError::row(file, row, Some(&date.to_string()), format!("non-numeric count at ({key}, {date})")))
                }
            };
            first.get_or_insert(*date);
            values.push(value);
        }
        let Some(start_date) = first else {
            return Err(IngestError::row(file, row, None, format!("no counts for {key}")));
        };
        match out.entry(key.canonical_id.clone()) {
            Entry::Occupied(_) => {
                return Err(IngestError::row(file, row, Some("region"), format!("duplicate region '{}'", key.canonical_id)))
            }
            Entry::Vacant(v) => {
                v.insert(CaseSeries {
                    region: key,
                    start_date,
                    values,
                });
            }
        }
    }
    Ok(out.into_values().collect())
}

// Raw shares for one day, indexed by `Variant::index`.
type DayShares = [Option<f64>; Variant::COUNT];

/// Parse the long variant table into dense per-region daily maps.
pub fn parse_variant_table(raw: &str) -> Result<Vec<VariantShareSeries>, IngestError> {
    let file = VARIANTS_FILE;
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut rdr = reader(raw);
    let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    expect_header(file, &headers, &["country", "region", "date", "variant", "share"])?;

    let mut grouped: BTreeMap<String, (RegionKey, BTreeMap<NaiveDate, DayShares>)> = BTreeMap::new();
    for item in records(file, &mut rdr) {
        let (row, rec) = item?;
        let key = region_of(file, row, &rec)?;
        let date = date_cell(file, row, &rec[2])?;
        let name = &rec[3];
        let variant = Variant::from_name(name).ok_or_else(|| {
            IngestError::row(
                file,
                row,
                Some("variant"),
                format!("unknown variant '{name}' (allowed: {})", Variant::names().join(", ")),
            )
        })?;
        let share: f64 = rec[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| IngestError::row(file, row, Some("share"), format!("invalid share '{}'", &rec[4])))?;
        if share < 0.0 {
            return Err(IngestError::row(file, row, Some("share"), format!("negative share {share}")));
        }
        let (_, days) = grouped
            .entry(key.canonical_id.clone())
            .or_insert_with(|| (key.clone(), BTreeMap::new()));
        let slot = &mut days.entry(date).or_insert([None; Variant::COUNT])[variant.index()];
        if slot.is_some() {
            return Err(IngestError::row(
                file,
                row,
                Some("variant"),
                format!("duplicate entry for ({key}, {date}, {})", variant.name()),
            ));
        }
        *slot = Some(share);
    }

    Ok(grouped
        .into_values()
        .map(|(region, days)| {
            let start_date = *days.keys().next().expect("group has at least one row");
            let end = *days.keys().next_back().expect("group has at least one row");
            let len = (end - start_date).num_days() as usize + 1;
            let mut dense = vec![None; len];
            for (date, values) in days {
                dense[(date - start_date).num_days() as usize] = Some(values.map(|v| v.unwrap_or(0.0)));
            }
            VariantShareSeries {
                region,
                start_date,
                days: dense,
            }
        })
        .collect())
}

/// Parse the sparse survey ratio table.
pub fn parse_survey_ratio(raw: &str) -> Result<Vec<RatioSeries>, IngestError> {
    let file = RATIOS_FILE;
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut rdr = reader(raw);
    let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    expect_header(file, &headers, &["country", "region", "date", "ratio"])?;

    let mut grouped: BTreeMap<String, RatioSeries> = BTreeMap::new();
    for item in records(file, &mut rdr) {
        let (row, rec) = item?;
        let key = region_of(file, row, &rec)?;
        let date = date_cell(file, row, &rec[2])?;
        let ratio: f64 = rec[3]
            .parse()
            .ok()
            .filter(|r: &f64| r.is_finite())
            .ok_or_else(|| IngestError::row(file, row, Some("ratio"), format!("invalid ratio '{}'", &rec[3])))?;
        if ratio <= 0.0 {
            return Err(IngestError::row(file, row, Some("ratio"), format!("ratio must be > 0, got {ratio}")));
        }
        let series = grouped.entry(key.canonical_id.clone()).or_insert_with(|| RatioSeries {
            region: key.clone(),
            ratios: BTreeMap::new(),
        });
        if series.ratios.insert(date, ratio).is_some() {
            return Err(IngestError::row(file, row, Some("date"), format!("duplicate ratio for ({key}, {date})")));
        }
    }
    Ok(grouped.into_values().collect())
}

pub fn parse_population_table(raw: &str) -> Result<PopulationTable, IngestError> {
    let file = POPULATIONS_FILE;
    let mut rdr = reader(raw);
    let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    expect_header(file, &headers, &["country", "region", "population"])?;
    let mut table = PopulationTable::default();
    for item in records(file, &mut rdr) {
        let (row, rec) = item?;
        let key = region_of(file, row, &rec)?;
        let population: u64 = rec[2]
            .parse()
            .ok()
            .filter(|p| *p >= 1)
            .ok_or_else(|| IngestError::row(file, row, Some("population"), format!("population must be an integer >= 1, got '{}'", &rec[2])))?;
        if table.get(&key.canonical_id).is_some() {
            return Err(IngestError::row(file, row, Some("region"), format!("duplicate region '{}'", key.canonical_id)));
        }
        table.insert(key, population)?;
    }
    Ok(table)
}

fn write_region(w: &mut csv::Writer<Vec<u8>>, key: &RegionKey) -> csv::Result<()> {
    w.write_field(&key.country)?;
    w.write_field(key.region.as_deref().unwrap_or(""))
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().flexible(true).from_writer(Vec::new())
}

/// Inverse of [`parse_case_table`].
pub fn write_case_table(series: &[CaseSeries]) -> String {
    let mut w = writer();
    let start = series.iter().map(|s| s.start_date).min();
    let end = series.iter().map(|s| s.end_date()).max();
    w.write_field("country").and_then(|_| w.write_field("region")).expect("in-memory write");
    let (Some(start), Some(end)) = (start, end) else {
        w.write_record(None::<&[u8]>).expect("in-memory write");
        return finish(w);
    };
    let len = (end - start).num_days() as usize + 1;
    for i in 0..len {
        w.write_field((start + chrono::Days::new(i as u64)).to_string()).expect("in-memory write");
    }
    w.write_record(None::<&[u8]>).expect("in-memory write");
    for s in series {
        write_region(&mut w, &s.region).expect("in-memory write");
        let lead = (s.start_date - start).num_days() as usize;
        for i in 0..len {
            let cell = i.checked_sub(lead).and_then(|j| s.values.get(j));
            w.write_field(cell.map(u64::to_string).unwrap_or_default()).expect("in-memory write");
        }
        w.write_record(None::<&[u8]>).expect("in-memory write");
    }
    finish(w)
}

/// Inverse of [`parse_variant_table`]; present days emit all six variants.
pub fn write_variant_table(series: &[VariantShareSeries]) -> String {
    let mut w = writer();
    w.write_record(["country", "region", "date", "variant", "share"]).expect("in-memory write");
    for s in series {
        for (i, day) in s.days.iter().enumerate() {
            let Some(values) = day else { continue };
            let date = (s.start_date + chrono::Days::new(i as u64)).to_string();
            for v in Variant::ALL {
                write_region(&mut w, &s.region).expect("in-memory write");
                w.write_field(&date).expect("in-memory write");
                w.write_field(v.name()).expect("in-memory write");
                w.write_field(crate::fmt::decimal(values[v.index()])).expect("in-memory write");
                w.write_record(None::<&[u8]>).expect("in-memory write");
            }
        }
    }
    finish(w)
}

pub fn write_ratio_table(series: &[RatioSeries]) -> String {
    let mut w = writer();
    w.write_record(["country", "region", "date", "ratio"]).expect("in-memory write");
    for s in series {
        for (date, ratio) in &s.ratios {
            write_region(&mut w, &s.region).expect("in-memory write");
            w.write_field(date.to_string()).expect("in-memory write");
            w.write_field(crate::fmt::decimal(*ratio)).expect("in-memory write");
            w.write_record(None::<&[u8]>).expect("in-memory write");
        }
    }
    finish(w)
}

pub fn write_population_table(table: &PopulationTable) -> String {
    let mut w = writer();
    w.write_record(["country", "region", "population"]).expect("in-memory write");
    for (key, population) in table.iter() {
        write_region(&mut w, key).expect("in-memory write");
        w.write_field(population.to_string()).expect("in-memory write");
        w.write_record(None::<&[u8]>).expect("in-memory write");
    }
    finish(w)
}
