//! Shared argument groups and loaders for the subcommands.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use eaf_core::eaif::DistanceWeights;
use eaf_core::effort::InertiaTable;
use eaf_core::ingest::{IngestConfig, Polarity};
use eaf_core::report::ContextPreset;

/// Input tables shared by the audit-style commands.
#[derive(Args, Debug)]
pub struct PanelOpts {
    /// Panel CSV: long form `subject_id,t,value` (or wide with --wide)
    #[arg(long)]
    pub panel: PathBuf,
    /// Demographics CSV: `subject_id,<attr1>,<attr2>,...`
    #[arg(long)]
    pub demo: PathBuf,
    /// Accept wide panel format `subject_id,value_0..value_{T-1}`
    #[arg(long)]
    pub wide: bool,
    /// Multiplier applied to every panel value at ingestion
    #[arg(long, default_value_t = 1.0)]
    pub unit_scale: f64,
    /// Permit negative feature values (off for count-like features)
    #[arg(long)]
    pub allow_signed: bool,
}

/// Context selection: a named preset or fully explicit parameters.
#[derive(Args, Debug)]
pub struct ContextOpts {
    /// Named context preset, or `custom` with explicit parameters
    #[arg(long, default_value = "shed", value_parser = ["shed", "clue", "custom"])]
    pub context: String,
    /// Aggregate-feature scale in panel units (required for custom)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Feature polarity (required for custom)
    #[arg(long, value_parser = parse_polarity)]
    pub polarity: Option<Polarity>,
    /// Free-text feature unit label
    #[arg(long)]
    pub feature_unit: Option<String>,
    /// Weight sets: `equal`, `human-study`, or `custom:<aE>,<aS>`
    /// (default: both equal and the context's human-study preset)
    #[arg(long)]
    pub weights: Option<String>,
}

fn parse_polarity(raw: &str) -> Result<Polarity, String> {
    match raw {
        "desirable" => Ok(Polarity::Desirable),
        "undesirable" => Ok(Polarity::Undesirable),
        other => Err(format!("unknown polarity {other:?} (desirable|undesirable)")),
    }
}

/// Inertia table source: --inertia flag, EAF_INERTIA_TABLE env, or the
/// shipped childhood-poverty default.
#[derive(Args, Debug)]
pub struct InertiaOpts {
    /// Inertia table CSV (`group,m`)
    #[arg(long, env = "EAF_INERTIA_TABLE")]
    pub inertia: Option<PathBuf>,
    /// Demographic attribute the inertia table is keyed by
    #[arg(long, default_value = "race")]
    pub inertia_attribute: String,
    /// Inertia for groups missing from the table
    #[arg(long)]
    pub fallback_m: Option<f64>,
}

impl InertiaOpts {
    pub fn load(&self) -> Result<InertiaTable> {
        match &self.inertia {
            Some(path) => InertiaTable::from_path(path)
                .with_context(|| format!("loading inertia table {}", path.display())),
            None => Ok(InertiaTable::childhood_poverty_default()),
        }
    }
}

/// Resolved context: ingest settings, lambda, and named weight sets.
pub struct ResolvedContext {
    pub name: String,
    pub ingest: IngestConfig,
    pub lambda: f64,
    pub weight_sets: BTreeMap<String, DistanceWeights>,
}

pub fn resolve_context(panel: &PanelOpts, context: &ContextOpts) -> Result<ResolvedContext> {
    let preset = ContextPreset::by_name(&context.context);
    let (polarity, lambda, feature_unit, preset_weights) = match preset {
        Some(preset) => (
            context.polarity.unwrap_or(preset.polarity),
            context.lambda.unwrap_or(preset.lambda),
            context
                .feature_unit
                .clone()
                .unwrap_or_else(|| preset.feature_unit.to_string()),
            Some(preset.weight_sets().context("deriving preset weights")?),
        ),
        None => {
            // custom context: nothing is implied
            let polarity = context
                .polarity
                .context("--context custom requires --polarity")?;
            let lambda = context
                .lambda
                .context("--context custom requires --lambda")?;
            if context.weights.is_none() {
                bail!("--context custom requires --weights");
            }
            (
                polarity,
                lambda,
                context.feature_unit.clone().unwrap_or_default(),
                None,
            )
        }
    };
    if lambda <= 0.0 {
        bail!("--lambda must be positive, got {lambda}");
    }

    let weight_sets = match &context.weights {
        None => preset_weights.expect("presets always carry weights"),
        Some(spec) => {
            let mut sets = BTreeMap::new();
            let (name, weights) = parse_weight_spec(spec, preset)?;
            sets.insert(name, weights);
            sets
        }
    };

    Ok(ResolvedContext {
        name: context.context.clone(),
        ingest: IngestConfig {
            wide: panel.wide,
            unit_scale: panel.unit_scale,
            polarity,
            feature_unit,
            allow_signed: panel.allow_signed,
        },
        lambda,
        weight_sets,
    })
}

fn parse_weight_spec(
    spec: &str,
    preset: Option<ContextPreset>,
) -> Result<(String, DistanceWeights)> {
    match spec {
        "equal" => Ok(("equal".to_string(), DistanceWeights::equal())),
        "human-study" => {
            let preset =
                preset.context("--weights human-study needs a named context (shed or clue)")?;
            let (ce, cs) = preset.human_study_coefficients;
            Ok((
                "human_study".to_string(),
                DistanceWeights::normalized(ce, cs).context("normalizing preset coefficients")?,
            ))
        }
        custom => {
            let body = custom
                .strip_prefix("custom:")
                .with_context(|| format!("unrecognized --weights {custom:?}"))?;
            let (ae, as_) = body
                .split_once(',')
                .with_context(|| format!("--weights custom wants `custom:<aE>,<aS>`, got {custom:?}"))?;
            let ae: f64 = ae.trim().parse().context("parsing effort weight")?;
            let as_: f64 = as_.trim().parse().context("parsing aggregate weight")?;
            Ok((
                "custom".to_string(),
                DistanceWeights::normalized(ae, as_).context("normalizing custom weights")?,
            ))
        }
    }
}
