//! Variant prevalence: Gaussian smoothing, lagged sampling and normalization
//! into a [`VariantMix`].

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::RiskError;
use crate::ingest::{normalize_region_id, DataSnapshot};
use crate::interval::Interval;

pub const DEFAULT_SIGMA_DAYS: f64 = 7.0;
pub const DEFAULT_LAG_DAYS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Alpha,
    Beta,
    Gamma,
    Delta,
    Omicron,
}

impl Variant {
    pub const COUNT: usize = 6;
    pub const ALL: [Variant; Variant::COUNT] = [
        Variant::Original,
        Variant::Alpha,
        Variant::Beta,
        Variant::Gamma,
        Variant::Delta,
        Variant::Omicron,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Alpha => "alpha",
            Variant::Beta => "beta",
            Variant::Gamma => "gamma",
            Variant::Delta => "delta",
            Variant::Omicron => "omicron",
        }
    }

    pub fn from_name(name: &str) -> Option<Variant> {
        let name = name.trim();
        Variant::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(name))
    }

    pub fn names() -> Vec<&'static str> {
        Variant::ALL.iter().map(|v| v.name()).collect()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Normalized prevalence shares at the (lagged) date actually sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantMix {
    shares: [f64; Variant::COUNT],
    pub reference_date: NaiveDate,
}

impl VariantMix {
    /// Tolerance on the share sum.
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn original_only(reference_date: NaiveDate) -> Self {
        let mut shares = [0.0; Variant::COUNT];
        shares[Variant::Original.index()] = 1.0;
        VariantMix { shares, reference_date }
    }

    /// Shares must each lie in `[0, 1]` and sum to 1 within [`Self::SUM_TOLERANCE`].
    pub fn new(shares: [f64; Variant::COUNT], reference_date: NaiveDate) -> Option<Self> {
        let sum: f64 = shares.iter().sum();
        let valid = shares.iter().all(|s| (0.0..=1.0).contains(s)) && (sum - 1.0).abs() <= Self::SUM_TOLERANCE;
        valid.then_some(VariantMix { shares, reference_date })
    }

    /// Build from `(variant, share)` pairs, normalizing like [`normalize_shares`].
    pub fn from_pairs(pairs: &[(Variant, f64)], reference_date: NaiveDate) -> Self {
        let mut raw = [0.0; Variant::COUNT];
        for (v, s) in pairs {
            raw[v.index()] += s;
        }
        VariantMix {
            shares: normalize_shares(raw),
            reference_date,
        }
    }

    pub fn share(&self, variant: Variant) -> f64 {
        self.shares[variant.index()]
    }

    pub fn shares(&self) -> &[f64; Variant::COUNT] {
        &self.shares
    }

    pub fn iter(&self) -> impl Iterator<Item = (Variant, f64)> + '_ {
        Variant::ALL.into_iter().map(|v| (v, self.shares[v.index()]))
    }

    /// Variants with a strictly positive share.
    pub fn present(&self) -> impl Iterator<Item = Variant> + '_ {
        self.iter().filter(|(_, s)| *s > 0.0).map(|(v, _)| v)
    }

    /// `Σ share_v · f(v)`, endpoint-wise.
    pub fn weighted(&self, f: impl Fn(Variant) -> Interval) -> Interval {
        let (lo, hi) = self.iter().fold((0.0, 0.0), |(lo, hi), (v, s)| {
            if s == 0.0 {
                return (lo, hi);
            }
            let x = f(v);
            (lo + s * x.lo(), hi + s * x.hi())
        });
        Interval::new(lo, hi).expect("weighted sum of ordered intervals is ordered")
    }
}

fn validate_sigma(sigma_days: f64) -> Result<(), RiskError> {
    if sigma_days.is_finite() && sigma_days > 0.0 {
        Ok(())
    } else {
        Err(RiskError::InvalidConfig(format!(
            "variant_smoothing_sigma_days must be a positive number, got {sigma_days}"
        )))
    }
}

/// Truncation radius `⌈3σ⌉` in days.
pub fn kernel_radius(sigma_days: f64) -> usize {
    (3.0 * sigma_days).ceil() as usize
}

/// Unnormalized weights `exp(-k²/2σ²)` for offsets `-r..=r`.
fn kernel_weights(sigma_days: f64) -> Vec<f64> {
    let r = kernel_radius(sigma_days) as i64;
    let two_var = 2.0 * sigma_days * sigma_days;
    (-r..=r).map(|k| (-((k * k) as f64) / two_var).exp()).collect()
}

// Weighted mean over the in-range, present neighbours of each day. The sum
// is anchored at one window value so a constant run is reproduced exactly.
fn smooth_with(len: usize, sigma_days: f64, get: impl Fn(usize) -> Option<f64>) -> Vec<Option<f64>> {
    let weights = kernel_weights(sigma_days);
    let r = kernel_radius(sigma_days);
    (0..len)
        .map(|t| {
            let from = t.saturating_sub(r);
            let to = (t + r).min(len - 1);
            let anchor = (from..=to).find_map(&get)?;
            let (mut num, mut den) = (0.0, 0.0);
            for j in from..=to {
                if let Some(x) = get(j) {
                    let w = weights[j + r - t];
                    num += w * (x - anchor);
                    den += w;
                }
            }
            Some(anchor + num / den)
        })
        .collect()
}

/// Discrete Gaussian convolution truncated at `±⌈3σ⌉` days, with the kernel
/// renormalized over the part that falls inside the series.
pub fn gaussian_smooth(values: &[f64], sigma_days: f64) -> Result<Vec<f64>, RiskError> {
    if values.is_empty() {
        return Err(RiskError::EmptyInput);
    }
    validate_sigma(sigma_days)?;
    Ok(smooth_with(values.len(), sigma_days, |i| Some(values[i]))
        .into_iter()
        .map(|v| v.expect("dense input has a value in every window"))
        .collect())
}

/// Like [`gaussian_smooth`], but missing days are left out of the
/// convolution. A day whose whole window is missing stays `None`.
pub fn gaussian_smooth_sparse(values: &[Option<f64>], sigma_days: f64) -> Result<Vec<Option<f64>>, RiskError> {
    if values.is_empty() {
        return Err(RiskError::EmptyInput);
    }
    validate_sigma(sigma_days)?;
    Ok(smooth_with(values.len(), sigma_days, |i| values[i]))
}

/// Smoothed per-variant series for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedVariants {
    pub start_date: NaiveDate,
    pub series: [Vec<Option<f64>>; Variant::COUNT],
}

impl SmoothedVariants {
    pub fn at(&self, date: NaiveDate) -> Option<[f64; Variant::COUNT]> {
        let offset = (date - self.start_date).num_days();
        if offset < 0 {
            return None;
        }
        let i = offset as usize;
        let mut out = [0.0; Variant::COUNT];
        for v in Variant::ALL {
            out[v.index()] = (*self.series[v.index()].get(i)?)?;
        }
        Some(out)
    }
}

/// Memo of smoothed variant series keyed by `(region, σ bits)`.
///
/// Filling is idempotent: two racing writers compute the same value, and the
/// first stored one wins.
#[derive(Debug, Default)]
pub struct SmoothingCache {
    entries: RwLock<HashMap<(String, u64), Arc<SmoothedVariants>>>,
}

impl SmoothingCache {
    fn get_or_compute(
        &self,
        key: (String, u64),
        compute: impl FnOnce() -> Result<SmoothedVariants, RiskError>,
    ) -> Result<Arc<SmoothedVariants>, RiskError> {
        if let Some(hit) = self.entries.read().expect("cache lock poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let value = Arc::new(compute()?);
        let mut entries = self.entries.write().expect("cache lock poisoned");
        Ok(entries.entry(key).or_insert(value).clone())
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Smoothed series for a region, or `None` when it has no variant data.
pub fn smoothed_variants(
    snapshot: &DataSnapshot,
    region: &str,
    sigma_days: f64,
) -> Result<Option<Arc<SmoothedVariants>>, RiskError> {
    validate_sigma(sigma_days)?;
    let id = normalize_region_id(region);
    let Some(series) = snapshot.variants(&id) else {
        return Ok(None);
    };
    snapshot
        .smoothing_cache()
        .get_or_compute((id, sigma_days.to_bits()), || {
            let mut out: [Vec<Option<f64>>; Variant::COUNT] = Default::default();
            for v in Variant::ALL {
                out[v.index()] = gaussian_smooth_sparse(&series.variant_values(v), sigma_days)?;
            }
            Ok(SmoothedVariants {
                start_date: series.start_date,
                series: out,
            })
        })
        .map(Some)
}

/// Smoothed raw values sampled at `date - lag_days`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedShares {
    pub raw: [f64; Variant::COUNT],
    pub reference_date: NaiveDate,
    /// No variant data at the lagged date; `raw` is all zero.
    pub fallback: bool,
}

pub fn lagged_raw_shares(
    snapshot: &DataSnapshot,
    region: &str,
    date: NaiveDate,
    sigma_days: f64,
    lag_days: u32,
) -> Result<LaggedShares, RiskError> {
    let reference_date = date - chrono::Days::new(lag_days as u64);
    let sampled = smoothed_variants(snapshot, region, sigma_days)?.and_then(|s| s.at(reference_date));
    Ok(match sampled {
        Some(raw) => LaggedShares {
            raw,
            reference_date,
            fallback: false,
        },
        None => LaggedShares {
            raw: [0.0; Variant::COUNT],
            reference_date,
            fallback: true,
        },
    })
}

/// Turn raw smoothed values (proportions or counts) into shares summing to 1.
///
/// A total above 1 is scaled down proportionally; a total below 1 leaves the
/// remainder to `original`; an all-zero input is `original`-only.
pub fn normalize_shares(raw: [f64; Variant::COUNT]) -> [f64; Variant::COUNT] {
    let mut shares = raw.map(|x| if x.is_finite() && x > 0.0 { x } else { 0.0 });
    let total: f64 = shares.iter().sum();
    if total == 0.0 {
        let mut only = [0.0; Variant::COUNT];
        only[Variant::Original.index()] = 1.0;
        return only;
    }
    if total > 1.0 {
        for s in &mut shares {
            *s /= total;
        }
    } else {
        shares[Variant::Original.index()] += (1.0 - total).max(0.0);
    }
    let total: f64 = shares.iter().sum();
    shares.map(|s| (s / total).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixSample {
    pub mix: VariantMix,
    pub lag_fallback: bool,
}

pub fn variant_mix(
    snapshot: &DataSnapshot,
    region: &str,
    date: NaiveDate,
    sigma_days: f64,
    lag_days: u32,
) -> Result<MixSample, RiskError> {
    let lagged = lagged_raw_shares(snapshot, region, date, sigma_days, lag_days)?;
    Ok(MixSample {
        mix: VariantMix {
            shares: normalize_shares(lagged.raw),
            reference_date: lagged.reference_date,
        },
        lag_fallback: lagged.fallback,
    })
}
