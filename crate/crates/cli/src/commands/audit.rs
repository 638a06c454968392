//! `eaf audit` — the full pipeline behind one command.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use eaf_core::eagf::BinSpec;
use eaf_core::report::{emit_csv_bundle, emit_json, run_audit, AuditConfig, AuditInputs};

use crate::common::{resolve_context, ContextOpts, InertiaOpts, PanelOpts};

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[command(flatten)]
    pub panel: PanelOpts,
    /// Risk scores CSV: `subject_id,model,score`
    #[arg(long)]
    pub risks: PathBuf,
    #[command(flatten)]
    pub context: ContextOpts,
    #[command(flatten)]
    pub inertia: InertiaOpts,
    /// Effort bin width for group parity
    #[arg(long, default_value_t = 0.1)]
    pub bin_width: f64,
    /// Minimum group size inside a bin
    #[arg(long, default_value_t = 10)]
    pub min_group: usize,
    /// Audit only these attributes (repeatable; default: all in the demo file)
    #[arg(long = "attribute")]
    pub attributes: Vec<String>,
    /// Threshold scores to {0,1} first, so parity compares positive rates
    #[arg(long)]
    pub positive_rate_threshold: Option<f64>,
    /// Seed echoed into the report (audits themselves never sample)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the plot-ready CSV bundle into this directory
    #[arg(long)]
    pub plots: Option<PathBuf>,
}

pub fn build_config(args: &AuditArgs) -> Result<AuditConfig> {
    let resolved = resolve_context(&args.panel, &args.context)?;
    Ok(AuditConfig {
        context: resolved.name,
        ingest: resolved.ingest,
        lambda: resolved.lambda,
        weight_sets: resolved.weight_sets,
        bin_spec: BinSpec {
            bin_width: args.bin_width,
            min_group_size: args.min_group,
        },
        inertia: args.inertia.load()?,
        inertia_attribute: args.inertia.inertia_attribute.clone(),
        fallback_m: args.inertia.fallback_m,
        attributes: if args.attributes.is_empty() {
            None
        } else {
            Some(args.attributes.clone())
        },
        positive_rate_threshold: args.positive_rate_threshold,
        seed: args.seed,
    })
}

pub fn run(args: AuditArgs) -> Result<()> {
    let config = build_config(&args)?;
    let inputs = AuditInputs {
        panel: args.panel.panel.clone(),
        demo: args.panel.demo.clone(),
        risks: args.risks.clone(),
    };
    let (report, warnings) = run_audit(&inputs, &config).context("audit failed")?;
    for warning in &warnings {
        eprintln!("warning: {}", warning.0);
    }

    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            emit_json(&report, file)?;
            eprintln!("wrote {}", path.display());
        }
        None => emit_json(&report, std::io::stdout().lock())?,
    }

    if let Some(dir) = &args.plots {
        let written = emit_csv_bundle(&report, dir)?;
        eprintln!("wrote {} plot files under {}", written.len(), dir.display());
    }
    Ok(())
}
