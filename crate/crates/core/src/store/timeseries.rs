//! Bucketed time series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Hour,
    Day,
    Week,
}

// 1970-01-05 is the first Monday after the epoch.
const WEEK_ANCHOR: i64 = 4 * 86_400;

impl Granularity {
    pub fn seconds(self) -> i64 {
        match self {
            Granularity::Hour => 3_600,
            Granularity::Day => 86_400,
            Granularity::Week => 604_800,
        }
    }

    /// Start of the bucket containing `t`. Weeks start Monday 00:00 UTC.
    pub fn bucket(self, t: i64) -> i64 {
        let w = self.seconds();
        match self {
            Granularity::Week => (t - WEEK_ANCHOR).div_euclid(w) * w + WEEK_ANCHOR,
            _ => t.div_euclid(w) * w,
        }
    }

    pub fn is_aligned(self, t: i64) -> bool {
        self.bucket(t) == t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    pub granularity: Granularity,
    pub points: Vec<(i64, f64)>,
}

impl TimeSeries {
    /// Validates ordering, alignment and non-negativity.
    pub fn new(name: impl Into<String>, granularity: Granularity, points: Vec<(i64, f64)>) -> Result<Self, StoreError> {
        let name = name.into();
        for w in points.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(StoreError::SchemaViolation(format!(
                    "series {name}: bucket timestamps must strictly increase"
                )));
            }
        }
        for &(t, v) in &points {
            if !granularity.is_aligned(t) {
                return Err(StoreError::SchemaViolation(format!(
                    "series {name}: bucket {t} not aligned to {granularity:?}"
                )));
            }
            if !(v >= 0.0) {
                return Err(StoreError::SchemaViolation(format!("series {name}: negative or NaN value at {t}")));
            }
        }
        Ok(Self { name, granularity, points })
    }

    /// Counts timestamps per bucket; only non-empty buckets appear.
    pub fn from_timestamps(
        name: impl Into<String>,
        granularity: Granularity,
        timestamps: impl IntoIterator<Item = i64>,
    ) -> Self {
        let mut counts: BTreeMap<i64, f64> = BTreeMap::new();
        for t in timestamps {
            *counts.entry(granularity.bucket(t)).or_default() += 1.0;
        }
        Self { name: name.into(), granularity, points: counts.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Fills the gaps between the first and last bucket with zeros, or the
    /// whole `[from, to]` range when given.
    pub fn densify(&self, range: Option<(i64, i64)>) -> TimeSeries {
        let step = self.granularity.seconds();
        let (lo, hi) = match (range, self.points.first(), self.points.last()) {
            (Some((a, b)), _, _) => (self.granularity.bucket(a), self.granularity.bucket(b)),
            (None, Some(f), Some(l)) => (f.0, l.0),
            _ => return self.clone(),
        };
        let existing: BTreeMap<i64, f64> = self.points.iter().copied().collect();
        let mut points = Vec::new();
        let mut t = lo;
        while t <= hi {
            points.push((t, existing.get(&t).copied().unwrap_or(0.0)));
            t = if self.granularity == Granularity::Week { t + step } else { self.granularity.bucket(t + step) };
        }
        TimeSeries { name: self.name.clone(), granularity: self.granularity, points }
    }

    /// Points with `start <= bucket < end`.
    pub fn slice(&self, start: i64, end: i64) -> TimeSeries {
        TimeSeries {
            name: self.name.clone(),
            granularity: self.granularity,
            points: self.points.iter().copied().filter(|&(t, _)| t >= start && t < end).collect(),
        }
    }
}
