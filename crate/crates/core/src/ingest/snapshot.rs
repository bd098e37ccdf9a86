use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::SystemTime;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::*;
use crate::riskmodel::tables::{MaskTable, SeverityTable, VaccineTable};
use crate::variants::SmoothingCache;

/// The three static lookup tables.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticTables {
    pub mask: MaskTable,
    pub vaccine: VaccineTable,
    pub severity: SeverityTable,
}

impl StaticTables {
    pub fn builtin() -> Self {
        StaticTables {
            mask: MaskTable::builtin(),
            vaccine: VaccineTable::builtin(),
            severity: SeverityTable::builtin(),
        }
    }

    pub fn from_csv(mask: &str, vaccine: &str, severity: &str) -> Result<Self, IngestError> {
        Ok(StaticTables {
            mask: MaskTable::from_csv(mask)?,
            vaccine: VaccineTable::from_csv(vaccine)?,
            severity: SeverityTable::from_csv(severity)?,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Fall back to the bundled tables when `tables/` is absent.
    pub builtin_tables_fallback: bool,
}

impl LoadOptions {
    pub fn lenient() -> Self {
        LoadOptions {
            builtin_tables_fallback: true,
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct Manifest {
    snapshot_time: String,
}

/// Immutable, validated bundle of every input dataset.
///
/// Equality compares the data content; build warnings and the smoothing
/// memo are not part of it.
#[derive(Debug)]
pub struct DataSnapshot {
    cases: BTreeMap<String, CaseSeries>,
    variants: BTreeMap<String, VariantShareSeries>,
    ratios: BTreeMap<String, RatioSeries>,
    populations: PopulationTable,
    tables: StaticTables,
    snapshot_time: DateTime<Utc>,
    excluded_regions: Vec<String>,
    warnings: Vec<String>,
    smoothing: SmoothingCache,
}

impl PartialEq for DataSnapshot {
    fn eq(&self, other: &Self) -> bool {
        self.cases == other.cases
            && self.variants == other.variants
            && self.ratios == other.ratios
            && self.populations == other.populations
            && self.tables == other.tables
            && self.snapshot_time == other.snapshot_time
    }
}

/// Cross-validate parsed inputs into a snapshot.
///
/// Case regions without a population entry are dropped with a warning;
/// variant and ratio series for regions that are not kept are ignored the
/// same way.
pub fn build_snapshot(
    cases: Vec<CaseSeries>,
    variants: Vec<VariantShareSeries>,
    ratios: Vec<RatioSeries>,
    populations: PopulationTable,
    tables: StaticTables,
    snapshot_time: DateTime<Utc>,
) -> Result<DataSnapshot, IngestError> {
    let mut warnings = Vec::new();
    let mut excluded_regions = Vec::new();
    let mut kept = BTreeMap::new();
    for series in cases {
        let id = series.region.canonical_id.clone();
        if populations.get(&id).is_none() {
            let msg = format!("region '{id}' excluded: no population entry");
            tracing::warn!("{msg}");
            warnings.push(msg);
            excluded_regions.push(id);
            continue;
        }
        if kept.insert(id.clone(), series).is_some() {
            return Err(IngestError::table(CASES_FILE, format!("duplicate region '{id}'")));
        }
    }
    if kept.is_empty() {
        return Err(IngestError::NoUsableRegions { excluded: excluded_regions });
    }

    let mut keep_known = |file: &str, id: String| {
        if kept.contains_key(&id) {
            true
        } else {
            let msg = format!("{file}: series for '{id}' ignored: region has no case data");
            tracing::warn!("{msg}");
            warnings.push(msg);
            false
        }
    };
    let variants: BTreeMap<_, _> = variants
        .into_iter()
        .filter(|s| keep_known(VARIANTS_FILE, s.region.canonical_id.clone()))
        .map(|s| (s.region.canonical_id.clone(), s))
        .collect();
    let ratios: BTreeMap<_, _> = ratios
        .into_iter()
        .filter(|s| keep_known(RATIOS_FILE, s.region.canonical_id.clone()))
        .map(|s| (s.region.canonical_id.clone(), s))
        .collect();

    Ok(DataSnapshot {
        cases: kept,
        variants,
        ratios,
        populations,
        tables,
        snapshot_time,
        excluded_regions,
        warnings,
        smoothing: SmoothingCache::default(),
    })
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_optional(path: &Path) -> Result<Option<String>, IngestError> {
    if path.exists() {
        read(path).map(Some)
    } else {
        Ok(None)
    }
}

fn mtime(path: &Path) -> Option<SystemTime> {
    fs::metadata(path).and_then(|m| m.modified()).ok()
}

/// Prefix row/header errors with the file's path inside the snapshot.
fn in_file(err: IngestError, name: &str) -> IngestError {
    match err {
        IngestError::Row { row, column, message, .. } => IngestError::Row {
            file: name.to_string(),
            row,
            column,
            message,
        },
        IngestError::Header { message, .. } => IngestError::Header {
            file: name.to_string(),
            message,
        },
        IngestError::Table { message, .. } => IngestError::Table {
            file: name.to_string(),
            message,
        },
        other => other,
    }
}

impl DataSnapshot {
    /// Load a snapshot directory. `cases.csv` and `populations.csv` are
    /// required; a missing `variants.csv` or `ratios.csv` counts as empty.
    pub fn load_dir(dir: &Path, options: &LoadOptions) -> Result<DataSnapshot, IngestError> {
        let mut warnings = Vec::new();
        let mut newest: Option<SystemTime> = None;
        let mut touch = |p: &Path| {
            if let Some(t) = mtime(p) {
                newest = Some(newest.map_or(t, |n| n.max(t)));
            }
        };

        let cases_path = dir.join(CASES_FILE);
        let cases = parse_case_table(&read(&cases_path)?)?;
        touch(&cases_path);

        let pop_path = dir.join(POPULATIONS_FILE);
        let populations = parse_population_table(&read(&pop_path)?)?;
        touch(&pop_path);

        let var_path = dir.join(VARIANTS_FILE);
        let variants = match read_optional(&var_path)? {
            Some(raw) => {
                touch(&var_path);
                parse_variant_table(&raw)?
            }
            None => {
                warnings.push(format!("{VARIANTS_FILE} not found; all regions fall back to the original variant"));
                Vec::new()
            }
        };

        let ratio_path = dir.join(RATIOS_FILE);
        let ratios = match read_optional(&ratio_path)? {
            Some(raw) => {
                touch(&ratio_path);
                parse_survey_ratio(&raw)?
            }
            None => {
                warnings.push(format!("{RATIOS_FILE} not found; no survey ratios available"));
                Vec::new()
            }
        };

        let tables_dir = dir.join(TABLES_DIR);
        let tables = if tables_dir.is_dir() {
            let load = |name: &str| -> Result<String, IngestError> {
                let p = tables_dir.join(name);
                read(&p)
            };
            let mask = MaskTable::from_csv(&load(MASK_FILE)?).map_err(|e| in_file(e, &format!("{TABLES_DIR}/{MASK_FILE}")))?;
            let vaccine = VaccineTable::from_csv(&load(VACCINE_FILE)?).map_err(|e| in_file(e, &format!("{TABLES_DIR}/{VACCINE_FILE}")))?;
            let severity = SeverityTable::from_csv(&load(SEVERITY_FILE)?).map_err(|e| in_file(e, &format!("{TABLES_DIR}/{SEVERITY_FILE}")))?;
            for name in [MASK_FILE, VACCINE_FILE, SEVERITY_FILE] {
                touch(&tables_dir.join(name));
            }
            StaticTables { mask, vaccine, severity }
        } else if options.builtin_tables_fallback {
            warnings.push(format!("{TABLES_DIR}/ not found; using bundled tables"));
            StaticTables::builtin()
        } else {
            return Err(IngestError::Io {
                path: tables_dir.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "tables directory not found"),
            });
        };

        let manifest_path = dir.join(MANIFEST_FILE);
        let snapshot_time = match read_optional(&manifest_path)? {
            Some(raw) => {
                let m: Manifest = toml::from_str(&raw).map_err(|e| IngestError::Manifest(e.to_string()))?;
                DateTime::parse_from_rfc3339(&m.snapshot_time)
                    .map_err(|e| IngestError::Manifest(format!("snapshot_time '{}': {e}", m.snapshot_time)))?
                    .with_timezone(&Utc)
            }
            None => newest.map(DateTime::<Utc>::from).unwrap_or_else(Utc::now),
        };

        let mut snapshot = build_snapshot(cases, variants, ratios, populations, tables, snapshot_time)?;
        warnings.append(&mut snapshot.warnings);
        snapshot.warnings = warnings;
        Ok(snapshot)
    }

    /// The snapshot directory contents as `(relative path, text)` pairs.
    pub fn canonical_files(&self) -> Vec<(String, String)> {
        let cases: Vec<_> = self.cases.values().cloned().collect();
        let variants: Vec<_> = self.variants.values().cloned().collect();
        let ratios: Vec<_> = self.ratios.values().cloned().collect();
        let manifest = toml::to_string(&Manifest {
            snapshot_time: self.snapshot_time.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        })
        .expect("manifest serializes");
        vec![
            (CASES_FILE.to_string(), write_case_table(&cases)),
            (VARIANTS_FILE.to_string(), write_variant_table(&variants)),
            (RATIOS_FILE.to_string(), write_ratio_table(&ratios)),
            (POPULATIONS_FILE.to_string(), write_population_table(&self.populations)),
            (format!("{TABLES_DIR}/{MASK_FILE}"), self.tables.mask.to_csv()),
            (format!("{TABLES_DIR}/{VACCINE_FILE}"), self.tables.vaccine.to_csv()),
            (format!("{TABLES_DIR}/{SEVERITY_FILE}"), self.tables.severity.to_csv()),
            (MANIFEST_FILE.to_string(), manifest),
        ]
    }

    /// Write the snapshot in directory form; [`DataSnapshot::load_dir`] reads it back unchanged.
    pub fn write_dir(&self, dir: &Path) -> Result<(), IngestError> {
        let io = |path: &Path, source| IngestError::Io {
            path: path.display().to_string(),
            source,
        };
        let tables = dir.join(TABLES_DIR);
        fs::create_dir_all(&tables).map_err(|e| io(&tables, e))?;
        for (name, content) in self.canonical_files() {
            let path = dir.join(name);
            fs::write(&path, content).map_err(|e| io(&path, e))?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical file contents, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, content) in self.canonical_files() {
            hasher.update(name.as_bytes());
            hasher.update([0]);
            hasher.update(content.as_bytes());
            hasher.update([0]);
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn region_ids(&self) -> impl Iterator<Item = &str> {
        self.cases.keys().map(String::as_str)
    }

    pub fn region_count(&self) -> usize {
        self.cases.len()
    }

    pub fn region(&self, id: &str) -> Option<&RegionKey> {
        self.cases.get(&normalize_region_id(id)).map(|s| &s.region)
    }

    pub fn cases(&self, id: &str) -> Option<&CaseSeries> {
        self.cases.get(&normalize_region_id(id))
    }

    pub fn variants(&self, id: &str) -> Option<&VariantShareSeries> {
        self.variants.get(&normalize_region_id(id))
    }

    pub fn ratios(&self, id: &str) -> Option<&RatioSeries> {
        self.ratios.get(&normalize_region_id(id))
    }

    pub fn population(&self, id: &str) -> Option<u64> {
        self.populations.get(&normalize_region_id(id))
    }

    pub fn populations(&self) -> &PopulationTable {
        &self.populations
    }

    pub fn variant_series_count(&self) -> usize {
        self.variants.len()
    }

    pub fn ratio_series_count(&self) -> usize {
        self.ratios.len()
    }

    pub fn tables(&self) -> &StaticTables {
        &self.tables
    }

    pub fn snapshot_time(&self) -> DateTime<Utc> {
        self.snapshot_time
    }

    pub fn excluded_regions(&self) -> &[String] {
        &self.excluded_regions
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn smoothing_cache(&self) -> &SmoothingCache {
        &self.smoothing
    }
}
