//! Mask filtration, vaccine efficacy and severity tables.
//!
//! Each table keeps the source cell text next to the parsed value so that
//! writing a table back out reproduces it cell-for-cell.

use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::ingest::{MASK_FILE, SEVERITY_FILE, VACCINE_FILE};
use crate::interval::Interval;
use crate::variants::Variant;

pub const BUILTIN_MASK_CSV: &str = include_str!("../../tables/mask_ffe.csv");
pub const BUILTIN_VACCINE_CSV: &str = include_str!("../../tables/vaccine_efficacy.csv");
pub const BUILTIN_SEVERITY_CSV: &str = include_str!("../../tables/severity.csv");

/// Mask names the table must carry, in table order.
pub const MASK_NAMES: [&str; 19] = [
    "2-layer woven nylon mask without nose bridge",
    "2-layer woven nylon mask with nose bridge",
    "2-layer woven nylon with nose bridge and filter insert",
    "2-layer woven nylon with nose bridge washed",
    "Cotton Bandana folded surgeon general style",
    "Cotton Bandana folded bandit style",
    "Single-layer woven polyester gaiter",
    "Single-layer woven polyester mask with ties",
    "Non-woven polypropylene mask with fixed ear loops",
    "3-layer knitted cotton mask with ear loops",
    "N95 respirator",
    "Surgical mask with ties",
    "Procedure mask with ear loops",
    "Procedure mask with loops tied, corners tucked",
    "Procedure mask with loops tied, corners tucked and ear guard",
    "Procedure mask with Clawed hair clip",
    "Procedure mask with fix-the-mask technique (rubber bands)",
    "Procedure mask with Nylon hosiery sleeve",
    "No Mask",
];

pub const NO_MASK: &str = "No Mask";

/// Vaccine rows the table must carry, in table order.
pub const VACCINE_NAMES: [&str; 13] = [
    "Pfizer (Dose 1)",
    "Pfizer (Dose 2)",
    "Pfizer (Dose 2) + Pfizer Booster",
    "Pfizer (Dose 2) + Moderna (Booster)",
    "Moderna (Dose 1)",
    "Moderna (Dose 2)",
    "J&J (Dose 1)",
    "J&J (Dose 1) + J&J Booster",
    "Astrazeneca (Dose 1)",
    "Astrazeneca (Dose 2)",
    "Astrazeneca (Dose 2) + Pfizer/Moderna (Booster)",
    "Novavax (Dose 1)",
    "No Vaccine",
];

pub const NO_VACCINE: &str = "No Vaccine";

/// Case-, whitespace-insensitive name key.
fn name_key(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Table name with internal whitespace collapsed.
fn clean_name(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

/// `"a"`, `"a-b"` or `"a - b"`.
fn parse_range(s: &str) -> Option<Interval> {
    match s.split_once('-') {
        Some((a, b)) => Interval::new(parse_number(a)?, parse_number(b)?),
        None => parse_number(s).map(Interval::point),
    }
}

/// `"0.07%"` → 0.0007, shifting the decimal in text so the result is the
/// nearest double to the written value.
fn parse_percent(s: &str) -> Option<f64> {
    let digits = s.trim().strip_suffix('%')?.trim();
    parse_number(digits)?;
    parse_number(&format!("{digits}e-2"))
}

fn reader(raw: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw.as_bytes())
}

fn check_header(file: &str, rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), IngestError> {
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::header(file, e.to_string()))?;
    let got: Vec<String> = headers.iter().map(|h| h.to_lowercase()).collect();
    if got != expected {
        return Err(IngestError::header(
            file,
            format!("expected columns '{}', found '{}'", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn rows(file: &str, rdr: &mut csv::Reader<&[u8]>) -> Result<Vec<(usize, csv::StringRecord)>, IngestError> {
    rdr.records()
        .enumerate()
        .map(|(i, r)| r.map(|rec| (i + 1, rec)).map_err(|e| IngestError::row(file, i + 1, None, e.to_string())))
        .collect()
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskEntry {
    pub name: String,
    pub ffe: f64,
}

/// Fitted filtration efficacy per mask type.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskTable {
    entries: Vec<MaskEntry>,
}

impl MaskTable {
    pub fn builtin() -> Self {
        Self::from_csv(BUILTIN_MASK_CSV).expect("builtin mask table is valid")
    }

    pub fn from_csv(raw: &str) -> Result<Self, IngestError> {
        let file = MASK_FILE;
        let mut rdr = reader(raw);
        check_header(file, &mut rdr, &["mask", "ffe"])?;
        let mut entries: Vec<MaskEntry> = Vec::new();
        for (row, rec) in rows(file, &mut rdr)? {
            let name = clean_name(&rec[0]);
            let ffe = parse_number(&rec[1])
                .filter(|f| (0.0..=1.0).contains(f))
                .ok_or_else(|| IngestError::row(file, row, Some("ffe"), format!("FFE must be a number in [0, 1], got '{}'", &rec[1])))?;
            if entries.iter().any(|e| name_key(&e.name) == name_key(&name)) {
                return Err(IngestError::row(file, row, Some("mask"), format!("duplicate mask '{name}'")));
            }
            entries.push(MaskEntry { name, ffe });
        }
        let table = MaskTable { entries };
        for required in MASK_NAMES {
            if table.get(required).is_none() {
                return Err(IngestError::table(file, format!("missing mask '{required}'")));
            }
        }
        if table.entries.len() != MASK_NAMES.len() {
            let extra: Vec<&str> = table
                .entries
                .iter()
                .filter(|e| !MASK_NAMES.iter().any(|n| name_key(n) == name_key(&e.name)))
                .map(|e| e.name.as_str())
                .collect();
            return Err(IngestError::table(file, format!("unexpected masks: {}", extra.join("; "))));
        }
        if table.get(NO_MASK).map(|e| e.ffe) != Some(0.0) {
            return Err(IngestError::table(file, "'No Mask' must have FFE 0"));
        }
        Ok(table)
    }

    pub fn get(&self, name: &str) -> Option<&MaskEntry> {
        let key = name_key(name);
        self.entries.iter().find(|e| name_key(&e.name) == key)
    }

    pub fn entries(&self) -> &[MaskEntry] {
        &self.entries
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = writer();
        w.write_record(["mask", "ffe"]).expect("in-memory write");
        for e in &self.entries {
            w.write_record([e.name.clone(), crate::fmt::decimal(e.ffe)]).expect("in-memory write");
        }
        finish(w)
    }
}

/// One efficacy cell; `"-"` is stored as `[0, 0]` with `unknown` set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficacyCell {
    pub efficacy: Interval,
    pub unknown: bool,
    pub source: String,
}

impl EfficacyCell {
    fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s == "-" {
            return Some(EfficacyCell {
                efficacy: Interval::ZERO,
                unknown: true,
                source: s.to_string(),
            });
        }
        let efficacy = parse_range(s).filter(|i| i.within(0.0, 1.0))?;
        Some(EfficacyCell {
            efficacy,
            unknown: false,
            source: s.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VaccineRow {
    pub name: String,
    pub cells: [EfficacyCell; Variant::COUNT],
}

impl VaccineRow {
    /// Manufacturer part of the name, e.g. `"Pfizer"`.
    pub fn family(&self) -> &str {
        self.name.split(" (").next().unwrap_or(&self.name).trim()
    }

    /// Dose count plus one per booster; `None` for rows without a dose.
    pub fn dose_rank(&self) -> Option<u32> {
        let lower = self.name.to_lowercase();
        let dose = lower
            .split("dose ")
            .nth(1)
            .and_then(|rest| rest.chars().next())
            .and_then(|c| c.to_digit(10))?;
        Some(dose + lower.matches("booster").count() as u32)
    }

    pub fn cell(&self, variant: Variant) -> &EfficacyCell {
        &self.cells[variant.index()]
    }
}

/// Efficacy of each vaccine/dose against each variant class.
#[derive(Debug, Clone, PartialEq)]
pub struct VaccineTable {
    rows: Vec<VaccineRow>,
}

const VACCINE_COLUMNS: [&str; 7] = ["vaccine", "normal", "alpha", "beta", "gamma", "delta", "omicron"];

impl VaccineTable {
    pub fn builtin() -> Self {
        Self::from_csv(BUILTIN_VACCINE_CSV).expect("builtin vaccine table is valid")
    }

    pub fn from_csv(raw: &str) -> Result<Self, IngestError> {
        let file = VACCINE_FILE;
        let mut rdr = reader(raw);
        check_header(file, &mut rdr, &VACCINE_COLUMNS)?;
        let mut table = VaccineTable { rows: Vec::new() };
        for (row, rec) in rows(file, &mut rdr)? {
            let name = clean_name(&rec[0]);
            if table.get(&name).is_some() {
                return Err(IngestError::row(file, row, Some("vaccine"), format!("duplicate vaccine '{name}'")));
            }
            let mut cells = Vec::with_capacity(Variant::COUNT);
            for (i, column) in VACCINE_COLUMNS.iter().enumerate().skip(1) {
                let cell = EfficacyCell::parse(&rec[i]).ok_or_else(|| {
                    IngestError::row(file, row, Some(column), format!("efficacy must be '-', a number or a range within [0, 1], got '{}'", &rec[i]))
                })?;
                cells.push(cell);
            }
            let cells: [EfficacyCell; Variant::COUNT] = cells.try_into().expect("six variant columns");
            table.rows.push(VaccineRow { name, cells });
        }
        for required in VACCINE_NAMES {
            if table.get(required).is_none() {
                return Err(IngestError::table(file, format!("missing vaccine '{required}'")));
            }
        }
        if table.rows.len() != VACCINE_NAMES.len() {
            return Err(IngestError::table(
                file,
                format!("expected {} vaccine rows, found {}", VACCINE_NAMES.len(), table.rows.len()),
            ));
        }
        let none = table.get(NO_VACCINE).expect("checked above");
        if none.cells.iter().any(|c| c.unknown || c.efficacy != Interval::ZERO) {
            return Err(IngestError::table(file, "'No Vaccine' row must be all 0"));
        }
        Ok(table)
    }

    pub fn get(&self, name: &str) -> Option<&VaccineRow> {
        let key = name_key(name);
        self.rows.iter().find(|r| name_key(&r.name) == key)
    }

    pub fn rows(&self) -> &[VaccineRow] {
        &self.rows
    }

    pub fn names(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.name.clone()).collect()
    }

    /// Pairs `(weaker, stronger)` within a family where the stronger row has
    /// a higher dose rank. "No Vaccine" counts as rank 0 of every family.
    pub fn dose_pairs(&self) -> Vec<(&VaccineRow, &VaccineRow)> {
        let none = self.get(NO_VACCINE);
        let mut pairs = Vec::new();
        for a in &self.rows {
            for b in &self.rows {
                let (Some(ra), Some(rb)) = (a.dose_rank(), b.dose_rank()) else { continue };
                if a.family() == b.family() && ra < rb {
                    pairs.push((a, b));
                }
            }
            if let (Some(none), Some(_)) = (none, a.dose_rank()) {
                pairs.push((none, a));
            }
        }
        pairs
    }

    pub fn to_csv(&self) -> String {
        let mut w = writer();
        w.write_record(VACCINE_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.name.clone()];
            rec.extend(r.cells.iter().map(|c| c.source.clone()));
            w.write_record(rec).expect("in-memory write");
        }
        finish(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    #[serde(rename = "0-17")]
    Child,
    #[serde(rename = "18-49")]
    Adult,
    #[serde(rename = "50-64")]
    MiddleAged,
    #[serde(rename = "65+")]
    Senior,
}

impl AgeBand {
    pub const ALL: [AgeBand; 4] = [AgeBand::Child, AgeBand::Adult, AgeBand::MiddleAged, AgeBand::Senior];

    /// Bands are inclusive at their lower edge.
    pub fn for_age(age_years: u32) -> AgeBand {
        match age_years {
            0..=17 => AgeBand::Child,
            18..=49 => AgeBand::Adult,
            50..=64 => AgeBand::MiddleAged,
            _ => AgeBand::Senior,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeBand::Child => "0-17",
            AgeBand::Adult => "18-49",
            AgeBand::MiddleAged => "50-64",
            AgeBand::Senior => "65+",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// A representative age inside the band.
    pub fn sample_age(self) -> u32 {
        match self {
            AgeBand::Child => 5,
            AgeBand::Adult => 30,
            AgeBand::MiddleAged => 55,
            AgeBand::Senior => 70,
        }
    }
}

/// A multiplicative fold factor.
///
/// `unquantified` marks qualitative cells ("Under Investigation",
/// "Possibly Increased") and variants the table does not list; those fold
/// as `[1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldCell {
    pub fold: Interval,
    /// Leading point estimate of an `a (b-c)` cell.
    pub central: Option<f64>,
    pub unquantified: bool,
    pub source: String,
}

impl FoldCell {
    pub fn neutral(source: &str, unquantified: bool) -> Self {
        FoldCell {
            fold: Interval::ONE,
            central: None,
            unquantified,
            source: source.to_string(),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        let lower = s.to_lowercase();
        if s == "-" {
            return Some(Self::neutral(s, false));
        }
        if lower == "under investigation" || lower == "possibly increased" {
            return Some(Self::neutral(s, true));
        }
        if let Some((central, rest)) = s.split_once('(') {
            let range = rest.trim().strip_suffix(')')?;
            let fold = parse_range(range)?;
            return Some(FoldCell {
                fold,
                central: Some(parse_number(central)?),
                unquantified: false,
                source: s.to_string(),
            })
            .filter(|c| c.fold.lo() >= 0.0);
        }
        let fold = parse_range(s).filter(|i| i.lo() >= 0.0)?;
        Some(FoldCell {
            fold,
            central: None,
            unquantified: false,
            source: s.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCell {
    pub rate: f64,
    pub source: String,
}

impl RateCell {
    fn parse(s: &str) -> Option<Self> {
        let rate = parse_percent(s).filter(|r| (0.0..=1.0).contains(r))?;
        Some(RateCell {
            rate,
            source: s.trim().to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomePair<T> {
    pub hospitalization: T,
    pub death: T,
}

/// Base rates by age band and fold factors for variant, sex and chronic illness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeverityTable {
    pub age: [OutcomePair<RateCell>; 4],
    pub all_ages: Option<OutcomePair<RateCell>>,
    /// Indexed by [`Variant::index`]; `original` is always `[1, 1]`.
    pub variant: [OutcomePair<FoldCell>; Variant::COUNT],
    pub male: OutcomePair<FoldCell>,
    pub female: OutcomePair<FoldCell>,
    pub chronic: OutcomePair<FoldCell>,
    /// Variants that appeared as rows in the source table.
    pub listed_variants: Vec<Variant>,
}

const SEVERITY_COLUMNS: [&str; 4] = ["group", "category", "hospitalization", "death"];

impl SeverityTable {
    pub fn builtin() -> Self {
        Self::from_csv(BUILTIN_SEVERITY_CSV).expect("builtin severity table is valid")
    }

    pub fn from_csv(raw: &str) -> Result<Self, IngestError> {
        let file = SEVERITY_FILE;
        let mut rdr = reader(raw);
        check_header(file, &mut rdr, &SEVERITY_COLUMNS)?;

        let mut age: [Option<OutcomePair<RateCell>>; 4] = Default::default();
        let mut all_ages = None;
        let mut variant: [Option<OutcomePair<FoldCell>>; Variant::COUNT] = Default::default();
        let (mut male, mut female, mut chronic) = (None, None, None);

        for (row, rec) in rows(file, &mut rdr)? {
            let group = rec[0].to_lowercase();
            let category = rec[1].to_lowercase();
            let rate = |col: usize| {
                RateCell::parse(&rec[col]).ok_or_else(|| {
                    IngestError::row(file, row, Some(SEVERITY_COLUMNS[col]), format!("expected a percentage in [0%, 100%], got '{}'", &rec[col]))
                })
            };
            let fold = |col: usize| {
                FoldCell::parse(&rec[col]).ok_or_else(|| {
                    IngestError::row(file, row, Some(SEVERITY_COLUMNS[col]), format!("expected a non-negative fold, range, '-' or qualitative note, got '{}'", &rec[col]))
                })
            };
            let duplicate = || IngestError::row(file, row, Some("category"), format!("duplicate row '{group},{category}'"));
            match group.as_str() {
                "age" if category == "all" => {
                    if all_ages.is_some() {
                        return Err(duplicate());
                    }
                    all_ages = Some(OutcomePair { hospitalization: rate(2)?, death: rate(3)? });
                }
                "age" => {
                    let band = AgeBand::ALL
                        .into_iter()
                        .find(|b| b.label() == category)
                        .ok_or_else(|| IngestError::row(file, row, Some("category"), format!("unknown age band '{category}'")))?;
                    let slot = &mut age[band.index()];
                    if slot.is_some() {
                        return Err(duplicate());
                    }
                    *slot = Some(OutcomePair { hospitalization: rate(2)?, death: rate(3)? });
                }
                "variant" => {
                    let v = Variant::from_name(&category)
                        .filter(|v| *v != Variant::Original)
                        .ok_or_else(|| IngestError::row(file, row, Some("category"), format!("unknown variant '{category}'")))?;
                    let slot = &mut variant[v.index()];
                    if slot.is_some() {
                        return Err(duplicate());
                    }
                    *slot = Some(OutcomePair { hospitalization: fold(2)?, death: fold(3)? });
                }
                "sex" => {
                    let slot = match category.as_str() {
                        "male" => &mut male,
                        "female" => &mut female,
                        _ => return Err(IngestError::row(file, row, Some("category"), format!("unknown sex '{category}'"))),
                    };
                    if slot.is_some() {
                        return Err(duplicate());
                    }
                    *slot = Some(OutcomePair { hospitalization: fold(2)?, death: fold(3)? });
                }
                "chronic" => {
                    if chronic.is_some() {
                        return Err(duplicate());
                    }
                    chronic = Some(OutcomePair { hospitalization: fold(2)?, death: fold(3)? });
                }
                _ => return Err(IngestError::row(file, row, Some("group"), format!("unknown group '{group}'"))),
            }
        }

        let mut missing_age = Vec::new();
        for b in AgeBand::ALL {
            if age[b.index()].is_none() {
                missing_age.push(b.label());
            }
        }
        if !missing_age.is_empty() {
            return Err(IngestError::table(file, format!("missing age bands: {}", missing_age.join(", "))));
        }
        let age = age.map(|a| a.expect("checked above"));
        for pair in &age {
            if pair.death.rate > pair.hospitalization.rate {
                return Err(IngestError::table(file, "base death rate exceeds base hospitalization rate"));
            }
        }
        let listed_variants: Vec<Variant> = Variant::ALL.into_iter().filter(|v| variant[v.index()].is_some()).collect();
        let variant = Variant::ALL.map(|v| {
            variant[v.index()].take().unwrap_or_else(|| OutcomePair {
                hospitalization: FoldCell::neutral("", v != Variant::Original),
                death: FoldCell::neutral("", v != Variant::Original),
            })
        });
        let need = |cell: Option<OutcomePair<FoldCell>>, what: &str| {
            cell.ok_or_else(|| IngestError::table(file, format!("missing {what} row")))
        };
        Ok(SeverityTable {
            age,
            all_ages,
            variant,
            male: need(male, "sex,male")?,
            female: need(female, "sex,female")?,
            chronic: need(chronic, "chronic,any")?,
            listed_variants,
        })
    }

    pub fn base(&self, band: AgeBand) -> &OutcomePair<RateCell> {
        &self.age[band.index()]
    }

    pub fn variant_fold(&self, v: Variant) -> &OutcomePair<FoldCell> {
        &self.variant[v.index()]
    }

    pub fn to_csv(&self) -> String {
        let mut w = writer();
        w.write_record(SEVERITY_COLUMNS).expect("in-memory write");
        for b in AgeBand::ALL {
            let p = self.base(b);
            w.write_record(["age", b.label(), &p.hospitalization.source, &p.death.source]).expect("in-memory write");
        }
        if let Some(p) = &self.all_ages {
            w.write_record(["age", "all", &p.hospitalization.source, &p.death.source]).expect("in-memory write");
        }
        for v in &self.listed_variants {
            let p = self.variant_fold(*v);
            w.write_record(["variant", v.name(), &p.hospitalization.source, &p.death.source]).expect("in-memory write");
        }
        for (name, p) in [("male", &self.male), ("female", &self.female)] {
            w.write_record(["sex", name, &p.hospitalization.source, &p.death.source]).expect("in-memory write");
        }
        w.write_record(["chronic", "any", &self.chronic.hospitalization.source, &self.chronic.death.source])
            .expect("in-memory write");
        finish(w)
    }
}
