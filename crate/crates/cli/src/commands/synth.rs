//! `eaf synth` — seeded synthetic datasets in the ingest schemas.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use eaf_core::effort::InertiaTable;
use eaf_core::ingest::{write_demo_csv, write_labels_csv, write_panel_csv, write_risks_csv};
use eaf_core::report::{compute_efforts, AuditConfig, ContextPreset};
use eaf_core::synth::{generate_panel, generate_risks, RiskScenario, SynthConfig};

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of subjects
    #[arg(long, default_value_t = 704)]
    pub n: usize,
    /// Time steps per subject
    #[arg(long, default_value_t = 4)]
    pub t: usize,
    /// Risk scenario: group_blind, group_biased, effort_rewarding
    #[arg(long, default_value = "group_blind")]
    pub scenario: String,
    /// Attribute for the biased scenario
    #[arg(long, default_value = "race")]
    pub bias_attribute: String,
    /// Group whose risks are shifted in the biased scenario
    #[arg(long, default_value = "Black")]
    pub bias_group: String,
    /// Mean-risk gap in the biased scenario
    #[arg(long, default_value_t = 0.3)]
    pub gap: f64,
    /// Risk decrease per unit effort in the effort-rewarding scenario
    #[arg(long, default_value_t = 0.5)]
    pub slope: f64,
    /// Generator seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory for panel.csv, demo.csv, labels.csv, risks.csv
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(args: SynthArgs) -> Result<()> {
    if args.n == 0 {
        bail!("--n must be at least 1");
    }
    let mut config = SynthConfig::defaults(args.n, args.seed);
    config.time_steps = args.t;
    let output = generate_panel(&config)?;
    if output.clipped_values > 0 {
        eprintln!(
            "note: {} non-cumulative values clipped at 0",
            output.clipped_values
        );
    }

    // hyphen and underscore spellings are both accepted
    let scenario = match args.scenario.replace('-', "_").as_str() {
        "group_blind" => RiskScenario::GroupBlind,
        "group_biased" => RiskScenario::GroupBiased {
            attribute: args.bias_attribute.clone(),
            group: args.bias_group.clone(),
            gap: args.gap,
        },
        "effort_rewarding" => RiskScenario::EffortRewarding { slope: args.slope },
        other => bail!(
            "unknown scenario {other:?} (group_blind, group_biased, effort_rewarding)"
        ),
    };
    let efforts = match scenario {
        RiskScenario::EffortRewarding { .. } => {
            let audit = AuditConfig::from_preset(
                ContextPreset::shed(),
                InertiaTable::childhood_poverty_default(),
            )?;
            Some(
                compute_efforts(&output.panel, &audit)?
                    .into_iter()
                    .map(|e| (e.subject_id, e.effort))
                    .collect::<BTreeMap<String, f64>>(),
            )
        }
        _ => None,
    };
    let risks = generate_risks(&output.panel, &scenario, efforts.as_ref(), args.seed)?;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let write = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = args.out_dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    };

    let mut buf = Vec::new();
    write_panel_csv(&output.panel, &mut buf, "panel.csv")?;
    write("panel.csv", std::mem::take(&mut buf))?;
    write_demo_csv(&output.panel, &mut buf, "demo.csv")?;
    write("demo.csv", std::mem::take(&mut buf))?;
    write_labels_csv(&output.labels, &mut buf, "labels.csv")?;
    write("labels.csv", std::mem::take(&mut buf))?;
    write_risks_csv(&risks, &mut buf, "risks.csv")?;
    write("risks.csv", std::mem::take(&mut buf))?;
    Ok(())
}
