//! Panel ingestion: parse, validate, and join the input tables into the
//! canonical in-memory model.
//!
//! Three character-separated inputs feed an audit:
//!   - `panel.csv` — `subject_id,t,value` (long form, canonical) or
//!     `subject_id,value_0..value_{T-1}` (wide form, converted at the edge);
//!   - `demo.csv` — `subject_id,<attr1>,<attr2>,...`;
//!   - `risks.csv` — `subject_id,model,score`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether higher feature values are good (income) or bad (arrests).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Desirable,
    Undesirable,
}

/// One subject's trajectory plus demographic labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    /// Non-cumulative values, one per time step 0..T-1.
    pub values: Vec<f64>,
    /// Attribute name -> group label; absent labels are the literal group
    /// "unknown" so they still participate in parity counts.
    pub demographics: BTreeMap<String, String>,
}

/// Canonical panel: per-subject equidistant time series of one effort-related
/// feature. Immutable after ingestion and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    /// Subjects in ascending id order.
    pub subjects: Vec<SubjectRecord>,
    pub time_steps: usize,
    pub polarity: Polarity,
    pub feature_unit: String,
    /// Negative values are rejected for count-like features unless set.
    pub allow_signed: bool,
}

impl Panel {
    pub fn subject_ids(&self) -> impl Iterator<Item = &str> {
        self.subjects.iter().map(|s| s.id.as_str())
    }

    /// Attribute names present on any subject.
    pub fn attributes(&self) -> BTreeSet<String> {
        self.subjects
            .iter()
            .flat_map(|s| s.demographics.keys().cloned())
            .collect()
    }

    /// subject_id -> group label for one attribute; subjects without the
    /// attribute map to "unknown".
    pub fn attribute_groups(&self, attribute: &str) -> Result<BTreeMap<String, String>> {
        if !self.attributes().contains(attribute) {
            return Err(Error::UnknownAttribute(attribute.to_string()));
        }
        Ok(self
            .subjects
            .iter()
            .map(|s| {
                let label = s
                    .demographics
                    .get(attribute)
                    .cloned()
                    .unwrap_or_else(|| "unknown".to_string());
                (s.id.clone(), label)
            })
            .collect())
    }
}

/// Per-model, per-subject predicted risk in [0,1].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RiskScoreTable {
    pub models: BTreeMap<String, BTreeMap<String, f64>>,
}

impl RiskScoreTable {
    pub fn model_names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(|k| k.as_str())
    }

    pub fn insert(&mut self, model: &str, subject: &str, score: f64) {
        self.models
            .entry(model.to_string())
            .or_default()
            .insert(subject.to_string(), score);
    }
}

/// Knobs for panel parsing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Accept wide format (`subject_id,value_0..value_{T-1}`) instead of long.
    pub wide: bool,
    /// Multiplier applied to every value at the boundary, e.g. 1e-4 to carry
    /// dollars as units of $10k.
    pub unit_scale: f64,
    pub polarity: Polarity,
    pub feature_unit: String,
    pub allow_signed: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            wide: false,
            unit_scale: 1.0,
            polarity: Polarity::Desirable,
            feature_unit: String::new(),
            allow_signed: false,
        }
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn csv_err(path: &str) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_string(),
        source,
    }
}

/// Parse a panel table into the canonical model. Values are scaled by
/// `config.unit_scale`; subjects come out in ascending id order.
pub fn parse_panel<R: Read>(reader: R, config: &IngestConfig, path: &str) -> Result<Panel> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_string(),
                column: name.to_string(),
            })
    };

    // subject -> t -> value, collected before shape checks
    let mut series: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();

    if config.wide {
        let id_col = col("subject_id")?;
        let mut value_cols = Vec::new();
        for (idx, name) in headers.iter().enumerate() {
            if let Some(t) = name.strip_prefix("value_") {
                let t: usize = t.parse().map_err(|_| Error::MissingColumn {
                    path: path.to_string(),
                    column: format!("well-formed {name}"),
                })?;
                value_cols.push((t, idx));
            }
        }
        if value_cols.is_empty() {
            return Err(Error::MissingColumn {
                path: path.to_string(),
                column: "value_0..".to_string(),
            });
        }
        for record in rdr.records() {
            let record = record.map_err(csv_err(path))?;
            let id = record[id_col].to_string();
            for &(t, idx) in &value_cols {
                insert_observation(&mut series, &id, t, &record[idx], config.unit_scale)?;
            }
        }
    } else {
        let id_col = col("subject_id")?;
        let t_col = col("t")?;
        let v_col = col("value")?;
        for record in rdr.records() {
            let record = record.map_err(csv_err(path))?;
            let id = record[id_col].to_string();
            let t: usize = record[t_col].parse().map_err(|_| Error::NonNumericValue {
                subject: id.clone(),
                t: record[t_col].to_string(),
                value: record[t_col].to_string(),
            })?;
            insert_observation(&mut series, &id, t, &record[v_col], config.unit_scale)?;
        }
    }

    if series.is_empty() {
        return Err(Error::NoSubjects);
    }

    let time_steps = 1 + series
        .values()
        .flat_map(|m| m.keys().copied())
        .max()
        .unwrap_or(0);

    let mut subjects = Vec::with_capacity(series.len());
    for (id, observed) in series {
        let mut values = Vec::with_capacity(time_steps);
        for t in 0..time_steps {
            match observed.get(&t) {
                Some(&v) => values.push(v),
                None => return Err(Error::RaggedSeries { subject: id, t }),
            }
        }
        subjects.push(SubjectRecord {
            id,
            values,
            demographics: BTreeMap::new(),
        });
    }

    Ok(Panel {
        subjects,
        time_steps,
        polarity: config.polarity,
        feature_unit: config.feature_unit.clone(),
        allow_signed: config.allow_signed,
    })
}

fn insert_observation(
    series: &mut BTreeMap<String, BTreeMap<usize, f64>>,
    id: &str,
    t: usize,
    raw: &str,
    scale: f64,
) -> Result<()> {
    let value: f64 = raw.parse().map_err(|_| Error::NonNumericValue {
        subject: id.to_string(),
        t: t.to_string(),
        value: raw.to_string(),
    })?;
    let prev = series
        .entry(id.to_string())
        .or_default()
        .insert(t, value * scale);
    if prev.is_some() {
        return Err(Error::DuplicateObservation {
            subject: id.to_string(),
            t,
        });
    }
    Ok(())
}

pub fn parse_panel_path(path: &Path, config: &IngestConfig) -> Result<Panel> {
    parse_panel(open(path)?, config, &path.display().to_string())
}

/// Non-fatal observations raised while joining tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarning(pub String);

/// Join demographic labels onto the panel. Every demo row must match a panel
/// subject; panel subjects without a demo row get "unknown" everywhere and a
/// warning.
pub fn attach_demographics<R: Read>(
    panel: &Panel,
    reader: R,
    path: &str,
) -> Result<(Panel, Vec<IngestWarning>)> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "subject_id")
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_string(),
            column: "subject_id".to_string(),
        })?;
    let attributes: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(idx, _)| *idx != id_col)
        .map(|(idx, name)| (idx, name.to_string()))
        .collect();

    let known: BTreeSet<&str> = panel.subject_ids().collect();
    let mut labels: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err(path))?;
        let id = record[id_col].to_string();
        if !known.contains(id.as_str()) {
            return Err(Error::UnmatchedSubject {
                subject: id,
                path: path.to_string(),
            });
        }
        let entry = labels.entry(id).or_default();
        for (idx, name) in &attributes {
            let raw = record[*idx].trim();
            let label = if raw.is_empty() { "unknown" } else { raw };
            entry.insert(name.clone(), label.to_string());
        }
    }

    let mut warnings = Vec::new();
    let mut joined = panel.clone();
    for subject in &mut joined.subjects {
        match labels.remove(&subject.id) {
            Some(demo) => subject.demographics = demo,
            None => {
                warnings.push(IngestWarning(format!(
                    "subject {} has no demographics row; all attributes set to \"unknown\"",
                    subject.id
                )));
                subject.demographics = attributes
                    .iter()
                    .map(|(_, name)| (name.clone(), "unknown".to_string()))
                    .collect();
            }
        }
    }
    Ok((joined, warnings))
}

pub fn attach_demographics_path(panel: &Panel, path: &Path) -> Result<(Panel, Vec<IngestWarning>)> {
    attach_demographics(panel, open(path)?, &path.display().to_string())
}

/// Violations found by [`validate_panel`]. The panel is accepted iff empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

/// Check every panel invariant and report violations instead of failing fast.
/// An empty report guarantees the effort engine is total on this panel.
pub fn validate_panel(panel: &Panel) -> ValidationReport {
    let mut violations = Vec::new();
    if panel.subjects.is_empty() {
        violations.push("no subjects".to_string());
    }
    if panel.time_steps < 3 {
        violations.push(format!(
            "need >=3 time steps to compute acceleration, panel has {}",
            panel.time_steps
        ));
    }
    let mut seen = BTreeSet::new();
    for subject in &panel.subjects {
        if !seen.insert(subject.id.as_str()) {
            violations.push(format!("duplicate subject id {}", subject.id));
        }
        if subject.values.len() != panel.time_steps {
            violations.push(format!(
                "subject {} has {} values, panel has {} time steps",
                subject.id,
                subject.values.len(),
                panel.time_steps
            ));
        }
        for (t, &v) in subject.values.iter().enumerate() {
            if !v.is_finite() {
                violations.push(format!("subject {} has non-finite value at t={t}", subject.id));
            } else if v < 0.0 && !panel.allow_signed {
                violations.push(format!(
                    "subject {} has negative value {v} at t={t} for a count-like feature",
                    subject.id
                ));
            }
        }
    }
    ValidationReport { violations }
}

/// Parse `subject_id,model,score` risk rows. Scores must lie in [0,1] and
/// refer to panel subjects; anything else is rejected rather than normalized.
pub fn parse_risks<R: Read>(reader: R, panel: &Panel, path: &str) -> Result<RiskScoreTable> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_string(),
                column: name.to_string(),
            })
    };
    let id_col = col("subject_id")?;
    let model_col = col("model")?;
    let score_col = col("score")?;

    let known: BTreeSet<&str> = panel.subject_ids().collect();
    let mut table = RiskScoreTable::default();
    for record in rdr.records() {
        let record = record.map_err(csv_err(path))?;
        let subject = record[id_col].to_string();
        let model = record[model_col].to_string();
        let score: f64 = record[score_col].parse().map_err(|_| Error::NonNumericValue {
            subject: subject.clone(),
            t: model.clone(),
            value: record[score_col].to_string(),
        })?;
        if !known.contains(subject.as_str()) {
            return Err(Error::UnmatchedSubject {
                subject,
                path: path.to_string(),
            });
        }
        if !(0.0..=1.0).contains(&score) || !score.is_finite() {
            return Err(Error::RiskScoreOutOfRange {
                model,
                subject,
                score,
            });
        }
        table.insert(&model, &subject, score);
    }
    Ok(table)
}

pub fn parse_risks_path(path: &Path, panel: &Panel) -> Result<RiskScoreTable> {
    parse_risks(open(path)?, panel, &path.display().to_string())
}

/// Parse `subject_id,label` rows with labels in {0,1}.
pub fn parse_labels<R: Read>(reader: R, path: &str) -> Result<BTreeMap<String, u8>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "subject_id")
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_string(),
            column: "subject_id".to_string(),
        })?;
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_string(),
            column: "label".to_string(),
        })?;
    let mut labels = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err(path))?;
        let id = record[id_col].to_string();
        let label = match record[label_col].trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::BadLabel {
                    subject: id,
                    value: other.to_string(),
                })
            }
        };
        labels.insert(id, label);
    }
    Ok(labels)
}

pub fn parse_labels_path(path: &Path) -> Result<BTreeMap<String, u8>> {
    parse_labels(open(path)?, &path.display().to_string())
}

fn io_err(path: &str) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_string(),
        source,
    }
}

/// Serialize a panel in canonical long form. Floats use shortest round-trip
/// formatting, so parse -> write -> parse is the identity at unit scale 1.
pub fn write_panel_csv<W: Write>(panel: &Panel, mut writer: W, path: &str) -> Result<()> {
    writeln!(writer, "subject_id,t,value").map_err(io_err(path))?;
    for subject in &panel.subjects {
        for (t, v) in subject.values.iter().enumerate() {
            writeln!(writer, "{},{},{}", subject.id, t, v).map_err(io_err(path))?;
        }
    }
    Ok(())
}

/// Serialize demographics with one column per attribute (sorted by name).
pub fn write_demo_csv<W: Write>(panel: &Panel, mut writer: W, path: &str) -> Result<()> {
    let attributes: Vec<String> = panel.attributes().into_iter().collect();
    writeln!(writer, "subject_id,{}", attributes.join(",")).map_err(io_err(path))?;
    for subject in &panel.subjects {
        let row: Vec<&str> = attributes
            .iter()
            .map(|a| subject.demographics.get(a).map(|s| s.as_str()).unwrap_or("unknown"))
            .collect();
        writeln!(writer, "{},{}", subject.id, row.join(",")).map_err(io_err(path))?;
    }
    Ok(())
}

pub fn write_risks_csv<W: Write>(table: &RiskScoreTable, mut writer: W, path: &str) -> Result<()> {
    writeln!(writer, "subject_id,model,score").map_err(io_err(path))?;
    for (model, scores) in &table.models {
        for (subject, score) in scores {
            writeln!(writer, "{subject},{model},{score}").map_err(io_err(path))?;
        }
    }
    Ok(())
}

pub fn write_labels_csv<W: Write>(
    labels: &BTreeMap<String, u8>,
    mut writer: W,
    path: &str,
) -> Result<()> {
    writeln!(writer, "subject_id,label").map_err(io_err(path))?;
    for (subject, label) in labels {
        writeln!(writer, "{subject},{label}").map_err(io_err(path))?;
    }
    Ok(())
}
