//! Effort-aware fairness auditing engine.
//!
//! Scores how hard each subject in a longitudinal panel has pushed their
//! trajectory (effort = inertia x sigmoid of mean acceleration), then audits
//! predictive models two ways: individual fairness (similar effort and
//! similar aggregate feature should mean similar risk scores) and group
//! fairness conditioned on effort (within equal-effort bins, demographic
//! groups should see similar mean risk). A statistics module carries the
//! analysis toolkit used around such audits: rank correlations,
//! dependent-correlation tests, bootstrap intervals, OLS with Wald tests, and
//! truth-serum response scoring.
//!
//! Pipelines are deterministic: every sampling stage is seeded, reductions
//! are compensated and order-fixed, and reports serialize with stable
//! ordering.

pub mod eaif;
pub mod eagf;
pub mod effort;
pub mod error;
pub mod hash;
pub mod ingest;
pub mod predictors;
pub mod report;
pub mod rng;
pub mod stats;
pub mod sum;
pub mod synth;

pub use eaif::{aggregate_feature, eaif_score, DistanceWeights, SubjectFeatures};
pub use eagf::{bin_parity, bin_subjects, eagf_curve, overall_parity, BinSpec, ParityCurve};
pub use effort::{effort, inertia_for, kinematics, to_cumulative, EffortScore, InertiaTable, Kinematics};
pub use error::{Error, Result};
pub use ingest::{
    attach_demographics, parse_panel, validate_panel, IngestConfig, Panel, Polarity,
    RiskScoreTable, SubjectRecord, ValidationReport,
};
pub use predictors::{
    eval_classifier, fit_logistic, kfold_oos, percentile_threshold, predict, ClassifierEval,
    FitConfig, ModelFit, SupervisedDataset,
};
pub use report::{
    audit_panel, emit_csv_bundle, emit_json, run_audit, AuditConfig, AuditInputs, AuditReport,
    ContextPreset,
};
pub use synth::{generate_panel, generate_risks, RiskScenario, SynthConfig, SynthOutput};
