//! End-to-end audit orchestration: effort scores, individual-fairness scores
//! per model and weight set, parity curves per attribute, the traditional
//! parity baseline, and machine-readable output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eaif::{aggregate_feature, eaif_score, DistanceWeights, SubjectFeatures};
use crate::eagf::{eagf_curve, overall_parity, BinSpec, GroupStat, ParityCurve};
use crate::effort::{effort, inertia_for, kinematics, EffortScore, InertiaTable};
use crate::error::{Error, Result};
use crate::hash::fnv1a64;
use crate::ingest::{
    attach_demographics, parse_panel, parse_risks, validate_panel, IngestConfig, IngestWarning,
    Panel, Polarity, RiskScoreTable,
};

/// Named one-flag configurations reproducing the two shipped study setups.
#[derive(Debug, Clone, Copy)]
pub struct ContextPreset {
    pub name: &'static str,
    pub polarity: Polarity,
    pub feature_unit: &'static str,
    /// Aggregate-feature scale, in panel units.
    pub lambda: f64,
    /// Raw regression coefficients (effort, aggregate) behind the
    /// human-study weight preset; normalized at construction time.
    pub human_study_coefficients: (f64, f64),
}

impl ContextPreset {
    /// Personal-finance context: income in $10k units, desirable, lambda of
    /// 20 units ($200k).
    pub fn shed() -> Self {
        ContextPreset {
            name: "shed",
            polarity: Polarity::Desirable,
            feature_unit: "10k USD",
            lambda: 20.0,
            human_study_coefficients: (0.6114, 0.3182),
        }
    }

    /// Criminal-justice context: arrest counts, undesirable, lambda of one
    /// arrest.
    pub fn clue() -> Self {
        ContextPreset {
            name: "clue",
            polarity: Polarity::Undesirable,
            feature_unit: "arrests",
            lambda: 1.0,
            human_study_coefficients: (0.5454, 0.3580),
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "shed" => Some(Self::shed()),
            "clue" => Some(Self::clue()),
            _ => None,
        }
    }

    /// The two weight sets reported side by side: equal and the normalized
    /// human-study coefficients.
    pub fn weight_sets(&self) -> Result<BTreeMap<String, DistanceWeights>> {
        let (ce, cs) = self.human_study_coefficients;
        Ok([
            ("equal".to_string(), DistanceWeights::equal()),
            ("human_study".to_string(), DistanceWeights::normalized(ce, cs)?),
        ]
        .into())
    }
}

/// Everything an audit run needs beyond the input files.
#[derive(Debug, Clone)]
pub struct AuditConfig {
    /// Context label echoed into the report ("shed", "clue", "custom").
    pub context: String,
    pub ingest: IngestConfig,
    pub lambda: f64,
    pub weight_sets: BTreeMap<String, DistanceWeights>,
    pub bin_spec: BinSpec,
    pub inertia: InertiaTable,
    /// Demographic attribute the inertia table is keyed by.
    pub inertia_attribute: String,
    pub fallback_m: Option<f64>,
    /// Attributes to audit for group fairness; None means every attribute in
    /// the demographics file.
    pub attributes: Option<Vec<String>>,
    /// When set, scores are thresholded to {0,1} before parity, turning mean
    /// risk into a positive rate.
    pub positive_rate_threshold: Option<f64>,
    pub seed: u64,
}

impl AuditConfig {
    pub fn from_preset(preset: ContextPreset, inertia: InertiaTable) -> Result<Self> {
        Ok(AuditConfig {
            context: preset.name.to_string(),
            ingest: IngestConfig {
                wide: false,
                unit_scale: 1.0,
                polarity: preset.polarity,
                feature_unit: preset.feature_unit.to_string(),
                allow_signed: false,
            },
            lambda: preset.lambda,
            weight_sets: preset.weight_sets()?,
            bin_spec: BinSpec::default(),
            inertia,
            inertia_attribute: "race".to_string(),
            fallback_m: None,
            attributes: None,
            positive_rate_threshold: None,
            seed: 0,
        })
    }
}

/// Input file locations; the report echoes a content hash of each.
#[derive(Debug, Clone)]
pub struct AuditInputs {
    pub panel: PathBuf,
    pub demo: PathBuf,
    pub risks: PathBuf,
}

/// Configuration echo: everything needed to reproduce the numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub context: String,
    pub polarity: Polarity,
    pub feature_unit: String,
    pub unit_scale: f64,
    pub lambda: f64,
    /// Weight set name -> (effort weight, aggregate weight).
    pub weight_sets: BTreeMap<String, [f64; 2]>,
    pub bin_width: f64,
    pub min_group_size: usize,
    pub inertia_attribute: String,
    pub fallback_m: Option<f64>,
    pub positive_rate_threshold: Option<f64>,
    pub seed: u64,
    pub inertia_table_hash: String,
    /// Input name -> FNV-1a hash of the file bytes.
    pub input_hashes: BTreeMap<String, String>,
}

/// Traditional parity for one (attribute, model) pair; `parity` is absent
/// when too few groups qualify, with the reason recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallParityOutcome {
    pub parity: Option<f64>,
    pub reason: Option<String>,
    pub groups: BTreeMap<String, GroupStat>,
}

/// Distribution summary of the per-subject efforts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortSummary {
    pub min: f64,
    pub max: f64,
    /// Nearest-rank quantiles keyed "p05".."p95".
    pub quantiles: BTreeMap<String, f64>,
}

/// Full audit result. Per-model individual fairness mirrors a model-by-weight
/// table; per-attribute curves mirror parity-vs-effort plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config: ConfigEcho,
    /// model -> weight set -> score.
    pub eaif: BTreeMap<String, BTreeMap<String, f64>>,
    /// attribute -> model -> parity curve.
    pub eagf: BTreeMap<String, BTreeMap<String, ParityCurve>>,
    /// attribute -> model -> traditional (effort-unaware) parity.
    pub overall_parity: BTreeMap<String, BTreeMap<String, OverallParityOutcome>>,
    pub effort_summary: EffortSummary,
    pub efforts: Vec<EffortScore>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Per-subject effort scores for a joined panel.
pub fn compute_efforts(panel: &Panel, config: &AuditConfig) -> Result<Vec<EffortScore>> {
    let groups = panel
        .attribute_groups(&config.inertia_attribute)
        .map_err(|e| e.at_stage("effort"))?;
    panel
        .subjects
        .iter()
        .map(|subject| {
            let group = &groups[&subject.id];
            let m = inertia_for(group, &config.inertia, config.fallback_m)
                .map_err(|e| e.at_stage("effort"))?;
            let k = kinematics(&subject.values).map_err(|e| e.at_stage("effort"))?;
            Ok(EffortScore {
                subject_id: subject.id.clone(),
                inertia: m,
                accel_mean: k.accel_mean,
                effort: effort(m, k.accel_mean, panel.polarity),
            })
        })
        .collect()
}

fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.max(1) - 1]
}

fn summarize_efforts(efforts: &[EffortScore]) -> EffortSummary {
    let mut values: Vec<f64> = efforts.iter().map(|e| e.effort).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantiles = [5.0, 25.0, 50.0, 75.0, 95.0]
        .into_iter()
        .map(|pct| (format!("p{pct:02.0}"), nearest_rank(&values, pct)))
        .collect();
    EffortSummary {
        min: values[0],
        max: values[values.len() - 1],
        quantiles,
    }
}

fn apply_threshold(scores: &BTreeMap<String, f64>, threshold: Option<f64>) -> BTreeMap<String, f64> {
    match threshold {
        None => scores.clone(),
        Some(t) => scores
            .iter()
            .map(|(id, &s)| (id.clone(), f64::from(u8::from(s >= t))))
            .collect(),
    }
}

/// Run the audit over already-joined in-memory inputs.
pub fn audit_panel(
    panel: &Panel,
    risks: &RiskScoreTable,
    config: &AuditConfig,
    input_hashes: BTreeMap<String, String>,
) -> Result<AuditReport> {
    let report = validate_panel(panel);
    if !report.is_ok() {
        return Err(Error::PanelInvalid {
            report: report.to_string(),
        }
        .at_stage("validate"));
    }

    let efforts = compute_efforts(panel, config)?;
    let effort_by_id: BTreeMap<String, f64> = efforts
        .iter()
        .map(|e| (e.subject_id.clone(), e.effort))
        .collect();

    let features: Vec<SubjectFeatures> = panel
        .subjects
        .iter()
        .zip(&efforts)
        .map(|(subject, score)| {
            Ok(SubjectFeatures {
                subject_id: subject.id.clone(),
                effort: score.effort,
                aggregate: aggregate_feature(&subject.values, config.lambda)
                    .map_err(|e| e.at_stage("eaif"))?,
            })
        })
        .collect::<Result<_>>()?;

    let mut eaif = BTreeMap::new();
    for (model, scores) in &risks.models {
        let mut per_weights = BTreeMap::new();
        for (weight_name, weights) in &config.weight_sets {
            let score = eaif_score(&features, scores, weights)
                .map_err(|e| match e {
                    Error::MissingScore { subject, .. } => Error::MissingScore {
                        model: model.clone(),
                        subject,
                    },
                    other => other,
                })
                .map_err(|e| e.at_stage("eaif"))?;
            per_weights.insert(weight_name.clone(), score);
        }
        eaif.insert(model.clone(), per_weights);
    }

    let attributes: Vec<String> = match &config.attributes {
        Some(list) => list.clone(),
        None => panel.attributes().into_iter().collect(),
    };

    let mut eagf = BTreeMap::new();
    let mut overall = BTreeMap::new();
    for attribute in &attributes {
        let groups = panel
            .attribute_groups(attribute)
            .map_err(|e| e.at_stage("eagf"))?;
        let mut curves = BTreeMap::new();
        let mut baselines = BTreeMap::new();
        for (model, raw_scores) in &risks.models {
            let scores = apply_threshold(raw_scores, config.positive_rate_threshold);
            let curve = eagf_curve(&effort_by_id, &scores, &groups, attribute, &config.bin_spec)
                .map_err(|e| e.at_stage("eagf"))?;
            curves.insert(model.clone(), curve);
            let outcome = match overall_parity(&scores, &groups, config.bin_spec.min_group_size) {
                Ok((parity, group_stats)) => OverallParityOutcome {
                    parity: Some(parity),
                    reason: None,
                    groups: group_stats,
                },
                Err(e @ (Error::InsufficientGroups { .. } | Error::ZeroMeanParity)) => {
                    OverallParityOutcome {
                        parity: None,
                        reason: Some(e.to_string()),
                        groups: BTreeMap::new(),
                    }
                }
                Err(other) => return Err(other.at_stage("parity")),
            };
            baselines.insert(model.clone(), outcome);
        }
        eagf.insert(attribute.clone(), curves);
        overall.insert(attribute.clone(), baselines);
    }

    Ok(AuditReport {
        config: ConfigEcho {
            context: config.context.clone(),
            polarity: panel.polarity,
            feature_unit: panel.feature_unit.clone(),
            unit_scale: config.ingest.unit_scale,
            lambda: config.lambda,
            weight_sets: config
                .weight_sets
                .iter()
                .map(|(name, w)| (name.clone(), [w.effort, w.aggregate]))
                .collect(),
            bin_width: config.bin_spec.bin_width,
            min_group_size: config.bin_spec.min_group_size,
            inertia_attribute: config.inertia_attribute.clone(),
            fallback_m: config.fallback_m,
            positive_rate_threshold: config.positive_rate_threshold,
            seed: config.seed,
            inertia_table_hash: config.inertia.content_hash(),
            input_hashes,
        },
        eaif,
        eagf,
        overall_parity: overall,
        effort_summary: summarize_efforts(&efforts),
        efforts,
    })
}

/// Run the full audit from input files. A pure function of the file bytes
/// and the config: identical inputs produce identical reports.
pub fn run_audit(
    inputs: &AuditInputs,
    config: &AuditConfig,
) -> Result<(AuditReport, Vec<IngestWarning>)> {
    let panel_bytes = read_bytes(&inputs.panel).map_err(|e| e.at_stage("ingest"))?;
    let demo_bytes = read_bytes(&inputs.demo).map_err(|e| e.at_stage("ingest"))?;
    let risk_bytes = read_bytes(&inputs.risks).map_err(|e| e.at_stage("ingest"))?;

    let panel = parse_panel(panel_bytes.as_slice(), &config.ingest, &inputs.panel.display().to_string())
        .map_err(|e| e.at_stage("ingest"))?;
    let (panel, warnings) =
        attach_demographics(&panel, demo_bytes.as_slice(), &inputs.demo.display().to_string())
            .map_err(|e| e.at_stage("ingest"))?;
    let risks = parse_risks(risk_bytes.as_slice(), &panel, &inputs.risks.display().to_string())
        .map_err(|e| e.at_stage("ingest"))?;

    let input_hashes: BTreeMap<String, String> = [
        ("panel".to_string(), fnv1a64(&panel_bytes)),
        ("demo".to_string(), fnv1a64(&demo_bytes)),
        ("risks".to_string(), fnv1a64(&risk_bytes)),
    ]
    .into();

    let report = audit_panel(&panel, &risks, config, input_hashes)?;
    Ok((report, warnings))
}

/// Pretty JSON with stable key order (maps are sorted, structs keep field
/// order). Floats use shortest round-trip formatting, so emitted values parse
/// back bit-identically.
pub fn emit_json<W: Write>(report: &AuditReport, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, report).map_err(|source| Error::Io {
        path: "<json>".to_string(),
        source: std::io::Error::other(source),
    })?;
    writeln!(writer).map_err(|source| Error::Io {
        path: "<json>".to_string(),
        source,
    })
}

fn file_component(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write the plot-ready CSV bundle: `eaif.csv`, `effort.csv`, and one
/// `parity_<attribute>_<model>.csv` per curve. Returns the paths written.
pub fn emit_csv_bundle(report: &AuditReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();

    let eaif_path = dir.join("eaif.csv");
    {
        let mut f = create(&eaif_path)?;
        let io = |source| Error::Io {
            path: eaif_path.display().to_string(),
            source,
        };
        writeln!(f, "model,weight_set,alpha_effort,alpha_aggregate,score").map_err(io)?;
        for (model, per_weights) in &report.eaif {
            for (weight_name, score) in per_weights {
                let [ae, as_] = report.config.weight_sets[weight_name];
                writeln!(f, "{model},{weight_name},{ae},{as_},{score}").map_err(io)?;
            }
        }
    }
    written.push(eaif_path);

    let effort_path = dir.join("effort.csv");
    {
        let mut f = create(&effort_path)?;
        let io = |source| Error::Io {
            path: effort_path.display().to_string(),
            source,
        };
        writeln!(f, "subject_id,inertia,accel_mean,effort").map_err(io)?;
        for e in &report.efforts {
            writeln!(f, "{},{},{},{}", e.subject_id, e.inertia, e.accel_mean, e.effort)
                .map_err(io)?;
        }
    }
    written.push(effort_path);

    for (attribute, curves) in &report.eagf {
        for (model, curve) in curves {
            let path = dir.join(format!(
                "parity_{}_{}.csv",
                file_component(attribute),
                file_component(model)
            ));
            let mut f = create(&path)?;
            let io = |source| Error::Io {
                path: path.display().to_string(),
                source,
            };
            let labels = curve.group_labels();
            let mut header = "bin_lo,bin_hi,parity".to_string();
            for label in &labels {
                let label = file_component(label);
                header.push_str(&format!(",{label}_mean,{label}_count"));
            }
            writeln!(f, "{header}").map_err(io)?;
            for bin in &curve.bins {
                let mut row = format!("{},{},{}", bin.lo, bin.hi, bin.parity);
                for label in &labels {
                    match bin.groups.get(label) {
                        Some(stat) => row.push_str(&format!(",{},{}", stat.mean_risk, stat.count)),
                        None => row.push_str(",,"),
                    }
                }
                writeln!(f, "{row}").map_err(io)?;
            }
            written.push(path);
        }
    }
    Ok(written)
}
