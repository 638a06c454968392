//! `eaf eagf` — group-parity curves for one attribute, as plot-ready CSV.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use eaf_core::eagf::{eagf_curve, overall_parity, BinSpec};
use eaf_core::ingest::{attach_demographics_path, parse_panel_path, parse_risks_path};
use eaf_core::report::compute_efforts;

use crate::common::{resolve_context, ContextOpts, InertiaOpts, PanelOpts};

#[derive(Args, Debug)]
pub struct EagfArgs {
    #[command(flatten)]
    pub panel: PanelOpts,
    /// Risk scores CSV: `subject_id,model,score`
    #[arg(long)]
    pub risks: PathBuf,
    /// Demographic attribute to audit
    #[arg(long)]
    pub attribute: String,
    #[command(flatten)]
    pub context: ContextOpts,
    #[command(flatten)]
    pub inertia: InertiaOpts,
    /// Effort bin width
    #[arg(long, default_value_t = 0.1)]
    pub bin_width: f64,
    /// Minimum group size inside a bin
    #[arg(long, default_value_t = 10)]
    pub min_group: usize,
    /// Threshold scores to {0,1} first, so parity compares positive rates
    #[arg(long)]
    pub positive_rate_threshold: Option<f64>,
    /// Directory for `parity_<attribute>_<model>.csv` files
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn run(args: EagfArgs) -> Result<()> {
    let resolved = resolve_context(&args.panel, &args.context)?;
    let panel = parse_panel_path(&args.panel.panel, &resolved.ingest)?;
    let (panel, warnings) = attach_demographics_path(&panel, &args.panel.demo)?;
    for warning in &warnings {
        eprintln!("warning: {}", warning.0);
    }
    let risks = parse_risks_path(&args.risks, &panel)?;
    let groups = panel.attribute_groups(&args.attribute)?;

    let config = eaf_core::report::AuditConfig {
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
        attributes: Some(vec![args.attribute.clone()]),
        positive_rate_threshold: args.positive_rate_threshold,
        seed: 0,
    };
    let efforts = compute_efforts(&panel, &config)?;
    let effort_by_id: BTreeMap<String, f64> = efforts
        .iter()
        .map(|e| (e.subject_id.clone(), e.effort))
        .collect();

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    for (model, raw_scores) in &risks.models {
        let scores: BTreeMap<String, f64> = match args.positive_rate_threshold {
            None => raw_scores.clone(),
            Some(t) => raw_scores
                .iter()
                .map(|(id, &s)| (id.clone(), f64::from(u8::from(s >= t))))
                .collect(),
        };
        let curve = eagf_curve(&effort_by_id, &scores, &groups, &args.attribute, &config.bin_spec)?;

        let path = args.out_dir.join(format!(
            "parity_{}_{}.csv",
            sanitize(&args.attribute),
            sanitize(model)
        ));
        let mut out = String::new();
        let labels = curve.group_labels();
        out.push_str("bin_lo,bin_hi,parity");
        for label in &labels {
            let label = sanitize(label);
            out.push_str(&format!(",{label}_mean,{label}_count"));
        }
        out.push('\n');
        for bin in &curve.bins {
            out.push_str(&format!("{},{},{}", bin.lo, bin.hi, bin.parity));
            for label in &labels {
                match bin.groups.get(label) {
                    Some(stat) => out.push_str(&format!(",{},{}", stat.mean_risk, stat.count)),
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;

        let baseline = overall_parity(&scores, &groups, args.min_group);
        match baseline {
            Ok((parity, _)) => eprintln!(
                "{model}: {} reported bins, {} omitted, overall parity {parity:.4} -> {}",
                curve.bins.len(),
                curve.omitted_bins.len(),
                path.display()
            ),
            Err(e) => eprintln!(
                "{model}: {} reported bins, {} omitted, overall parity undefined ({e}) -> {}",
                curve.bins.len(),
                curve.omitted_bins.len(),
                path.display()
            ),
        }
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
