//! `eaf eaif` — individual-fairness scores only, as a JSON fragment.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use eaf_core::eaif::{aggregate_feature, eaif_score, SubjectFeatures};
use eaf_core::ingest::{attach_demographics_path, parse_panel_path, parse_risks_path};
use eaf_core::report::compute_efforts;

use crate::common::{resolve_context, ContextOpts, InertiaOpts, PanelOpts};

#[derive(Args, Debug)]
pub struct EaifArgs {
    #[command(flatten)]
    pub panel: PanelOpts,
    /// Risk scores CSV: `subject_id,model,score`
    #[arg(long)]
    pub risks: PathBuf,
    #[command(flatten)]
    pub context: ContextOpts,
    #[command(flatten)]
    pub inertia: InertiaOpts,
    /// Write the JSON fragment here (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: EaifArgs) -> Result<()> {
    let resolved = resolve_context(&args.panel, &args.context)?;
    let panel = parse_panel_path(&args.panel.panel, &resolved.ingest)?;
    let (panel, warnings) = attach_demographics_path(&panel, &args.panel.demo)?;
    for warning in &warnings {
        eprintln!("warning: {}", warning.0);
    }
    let risks = parse_risks_path(&args.risks, &panel)?;

    // reuse the audit plumbing for effort computation
    let config = eaf_core::report::AuditConfig {
        context: resolved.name,
        ingest: resolved.ingest,
        lambda: resolved.lambda,
        weight_sets: resolved.weight_sets.clone(),
        bin_spec: Default::default(),
        inertia: args.inertia.load()?,
        inertia_attribute: args.inertia.inertia_attribute.clone(),
        fallback_m: args.inertia.fallback_m,
        attributes: None,
        positive_rate_threshold: None,
        seed: 0,
    };
    let efforts = compute_efforts(&panel, &config)?;
    let features: Vec<SubjectFeatures> = panel
        .subjects
        .iter()
        .zip(&efforts)
        .map(|(subject, score)| {
            Ok(SubjectFeatures {
                subject_id: subject.id.clone(),
                effort: score.effort,
                aggregate: aggregate_feature(&subject.values, config.lambda)?,
            })
        })
        .collect::<eaf_core::Result<_>>()?;

    let mut eaif: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (model, scores) in &risks.models {
        let mut per_weights = BTreeMap::new();
        for (name, weights) in &config.weight_sets {
            let score = eaif_score(&features, scores, weights)
                .with_context(|| format!("model {model}, weights {name}"))?;
            per_weights.insert(name.clone(), score);
        }
        eaif.insert(model.clone(), per_weights);
    }

    let fragment = serde_json::json!({ "eaif": eaif });
    let rendered = serde_json::to_string_pretty(&fragment)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, rendered + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{rendered}"),
    }
    Ok(())
}
