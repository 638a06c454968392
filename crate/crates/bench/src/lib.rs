//! Shared fixtures for the engine benchmarks.

use std::collections::BTreeMap;

use eaf_core::eaif::SubjectFeatures;
use eaf_core::effort::InertiaTable;
use eaf_core::ingest::{Panel, RiskScoreTable};
use eaf_core::report::{AuditConfig, ContextPreset};
use eaf_core::rng::SeededRng;
use eaf_core::synth::{generate_panel, generate_risks, RiskScenario, SynthConfig};

/// A synthetic panel with group-blind scores, sized like a survey wave.
pub fn survey_fixture(n: usize) -> (Panel, RiskScoreTable) {
    let out = generate_panel(&SynthConfig::defaults(n, 97)).expect("generate panel");
    let risks =
        generate_risks(&out.panel, &RiskScenario::GroupBlind, None, 97).expect("generate risks");
    (out.panel, risks)
}

pub fn shed_audit_config() -> AuditConfig {
    AuditConfig::from_preset(
        ContextPreset::shed(),
        InertiaTable::childhood_poverty_default(),
    )
    .expect("preset config")
}

/// Random (effort, aggregate) coordinates with risk scores, for isolating the
/// pairwise kernel from ingestion.
pub fn pairwise_fixture(n: usize, seed: u64) -> (Vec<SubjectFeatures>, BTreeMap<String, f64>) {
    let mut rng = SeededRng::new(seed);
    let features: Vec<SubjectFeatures> = (0..n)
        .map(|i| SubjectFeatures {
            subject_id: format!("s{i:05}"),
            effort: 0.998 * rng.next_f64() + 0.001,
            aggregate: 0.998 * rng.next_f64(),
        })
        .collect();
    let scores = features
        .iter()
        .map(|f| (f.subject_id.clone(), rng.next_f64()))
        .collect();
    (features, scores)
}
