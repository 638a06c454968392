//! Force-based effort scores from longitudinal trajectories.
//!
//! A subject's non-cumulative series (annual income, yearly arrests) is first
//! accumulated into a running total; velocity and acceleration are the first
//! and second differences of that cumulative series. Effort is the product of
//! the subject's inertia (a group-level disadvantage weight in (0,1]) and a
//! sigmoid of the mean acceleration, oriented by whether higher feature values
//! are desirable.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Polarity;

/// Logistic function, numerically stable for any finite input and clamped to
/// the open interval (0,1) so effort never touches 0 or its inertia bound
/// even when the argument saturates in f64.
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// Cumulative/derivative view of one subject's trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    /// Running prefix sums of the non-cumulative values (length T).
    pub cumulative: Vec<f64>,
    /// First differences of `cumulative` (length T-1).
    pub velocities: Vec<f64>,
    /// Second differences of `cumulative` (length T-2).
    pub accelerations: Vec<f64>,
    /// Mean of `accelerations`; at T=4 this is the half-sum of the two
    /// acceleration terms.
    pub accel_mean: f64,
}

/// Running prefix sums of a non-cumulative series.
pub fn to_cumulative(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for v in values {
        acc += v;
        out.push(acc);
    }
    Ok(out)
}

/// Full kinematics of a non-cumulative series. Needs at least 3 time steps so
/// at least one acceleration exists.
pub fn kinematics(values: &[f64]) -> Result<Kinematics> {
    if values.len() < 3 {
        return Err(Error::SeriesTooShort { len: values.len() });
    }
    let cumulative = to_cumulative(values)?;
    let velocities: Vec<f64> = cumulative.windows(2).map(|w| w[1] - w[0]).collect();
    let accelerations: Vec<f64> = velocities.windows(2).map(|w| w[1] - w[0]).collect();
    let accel_mean = accelerations.iter().sum::<f64>() / accelerations.len() as f64;
    Ok(Kinematics {
        cumulative,
        velocities,
        accelerations,
        accel_mean,
    })
}

/// Group label -> inertia weight in (0,1].
///
/// Inertia proxies systemic disadvantage beyond a subject's control. The
/// shipped default scales 2012 NCES childhood-poverty rates by their maximum
/// (39%), so the most disadvantaged group carries weight 1. The table is
/// data: load a substitute from CSV (`group,m`) to audit with a different
/// proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InertiaTable {
    pub entries: BTreeMap<String, f64>,
    pub provenance: String,
}

impl InertiaTable {
    /// Default table: childhood-poverty rates by race, scaled by the maximum
    /// rate so the entries span (0,1].
    pub fn childhood_poverty_default() -> Self {
        let entries = [
            ("White", 13.0 / 39.0),
            ("Asian", 14.0 / 39.0),
            ("Pacific Islander", 25.0 / 39.0),
            ("American Indian", 36.0 / 39.0),
            ("Black", 1.0), // 39/39, the maximal rate
        ]
        .into_iter()
        .map(|(g, m)| (g.to_string(), m))
        .collect();
        InertiaTable {
            entries,
            provenance: "2012 NCES childhood poverty rates scaled by max rate 39%".to_string(),
        }
    }

    /// Parse `group,m` CSV. Enforces m in (0,1] and a maximum of exactly 1
    /// (within 1e-9): tables are expected to arrive pre-scaled by their
    /// largest rate.
    pub fn from_reader<R: Read>(reader: R, provenance: &str) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = BTreeMap::new();
        for record in csv.deserialize::<(String, f64)>() {
            let (group, m) = record.map_err(|source| Error::Csv {
                path: provenance.to_string(),
                source,
            })?;
            if !(m > 0.0 && m <= 1.0) || !m.is_finite() {
                return Err(Error::InertiaOutOfRange { group, value: m });
            }
            entries.insert(group, m);
        }
        let table = InertiaTable {
            entries,
            provenance: provenance.to_string(),
        };
        table.validate()?;
        Ok(table)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyInertiaTable);
        }
        let max = self.entries.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        if (max - 1.0).abs() > 1e-9 {
            return Err(Error::UnscaledInertiaTable { max });
        }
        Ok(())
    }

    /// Hash of the table contents, used for provenance echoes.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::new();
        for (group, m) in &self.entries {
            bytes.extend_from_slice(group.as_bytes());
            bytes.push(0);
            bytes.extend_from_slice(&m.to_bits().to_le_bytes());
        }
        crate::hash::fnv1a64(&bytes)
    }
}

/// Inertia weight for a demographic group, falling back to `fallback_m` for
/// groups the table does not cover.
pub fn inertia_for(group: &str, table: &InertiaTable, fallback_m: Option<f64>) -> Result<f64> {
    table.validate()?;
    match table.entries.get(group) {
        Some(&m) => Ok(m),
        None => match fallback_m {
            Some(m) if m > 0.0 && m <= 1.0 => Ok(m),
            Some(m) => Err(Error::InertiaOutOfRange {
                group: format!("fallback for {group}"),
                value: m,
            }),
            None => Err(Error::UnknownInertiaGroup {
                group: group.to_string(),
            }),
        },
    }
}

/// Effort score: inertia times the sigmoid of mean acceleration, flipped for
/// undesirable features so reducing a bad feature counts as positive effort.
pub fn effort(m: f64, accel_mean: f64, polarity: Polarity) -> f64 {
    debug_assert!(m > 0.0 && m <= 1.0, "inertia out of range: {m}");
    match polarity {
        Polarity::Desirable => m * sigmoid(accel_mean),
        // 1 - sigmoid(z) = sigmoid(-z); the latter keeps the clamp
        Polarity::Undesirable => m * sigmoid(-accel_mean),
    }
}

/// Per-subject effort bundle as reported in audit output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortScore {
    pub subject_id: String,
    /// Inertia weight in (0,1].
    pub inertia: f64,
    /// Mean trajectory acceleration, in feature units per step squared.
    pub accel_mean: f64,
    /// Effort in (0,1).
    pub effort: f64,
}
