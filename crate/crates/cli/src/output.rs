//! Report rendering for the terminal and CSV.

use std::fmt::Write as _;

use covarc_core::fmt::decimal;
use covarc_core::{DataSnapshot, RiskReport};

pub const RESULT_COLUMNS: [&str; 9] = [
    "scenario",
    "date",
    "infection_lo",
    "infection_hi",
    "hosp_lo",
    "hosp_hi",
    "death_lo",
    "death_hi",
    "flags",
];

pub fn flags_joined(report: &RiskReport) -> String {
    report.flags.iter().map(|f| f.name()).collect::<Vec<_>>().join(";")
}

pub fn result_row(scenario: &str, r: &RiskReport) -> [String; 9] {
    [
        scenario.to_string(),
        r.date.to_string(),
        decimal(r.infection.lo()),
        decimal(r.infection.hi()),
        decimal(r.hospitalization.lo()),
        decimal(r.hospitalization.hi()),
        decimal(r.death.lo()),
        decimal(r.death.hi()),
        flags_joined(r),
    ]
}

/// Header plus one row, `scenario` left empty.
pub fn report_csv(r: &RiskReport) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(RESULT_COLUMNS).expect("in-memory write");
    w.write_record(result_row("", r)).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}

pub fn report_text(r: &RiskReport) -> String {
    let c = &r.components;
    let p = &r.profile;
    let rows: Vec<(&str, String)> = vec![
        ("region", r.region.clone()),
        ("date", r.date.to_string()),
        (
            "person",
            format!(
                "{} {}, {}chronic illness, {}, {}",
                p.age_years,
                p.sex.name(),
                if p.chronic_illness { "" } else { "no " },
                p.vaccine,
                p.mask
            ),
        ),
        ("contacts", format!("{} indoor, {} outdoor", r.activity.n_indoor, r.activity.n_outdoor)),
        ("infection", r.infection.to_string()),
        ("hospitalization", r.hospitalization.to_string()),
        ("death", r.death.to_string()),
        ("case density", c.case_density.density.to_string()),
        ("active cases", c.case_density.n_ac.to_string()),
        ("vaccine factor", c.vaccine_factor.to_string()),
        ("mask factor", decimal(c.mask_factor)),
        ("age band", c.age_band.label().to_string()),
        (
            "flags",
            if r.flags.is_empty() {
                "none".to_string()
            } else {
                flags_joined(r).replace(';', ", ")
            },
        ),
        ("snapshot", r.snapshot_time.to_rfc3339()),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        writeln!(out, "{k:<width$}  {v}").unwrap();
    }
    out
}

pub fn snapshot_summary(s: &DataSnapshot) -> String {
    let mut out = String::new();
    writeln!(out, "snapshot time   {}", s.snapshot_time().to_rfc3339()).unwrap();
    writeln!(out, "regions         {}", s.region_count()).unwrap();
    writeln!(out, "variant series  {}", s.variant_series_count()).unwrap();
    writeln!(out, "ratio series    {}", s.ratio_series_count()).unwrap();
    writeln!(out, "content hash    {}", s.content_hash()).unwrap();
    if !s.excluded_regions().is_empty() {
        writeln!(out, "excluded        {}", s.excluded_regions().join(", ")).unwrap();
    }
    for w in s.warnings() {
        writeln!(out, "warning         {w}").unwrap();
    }
    out
}
