//! `eaf train` — built-in logistic regression with k-fold out-of-sample
//! scoring, emitting risks in the schema the audit commands consume.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use eaf_core::ingest::{parse_labels_path, parse_panel_path, write_risks_csv, IngestConfig, Polarity};
use eaf_core::predictors::{eval_classifier, kfold_oos, percentile_threshold, FitConfig, SupervisedDataset};
use eaf_core::RiskScoreTable;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Panel CSV: long form `subject_id,t,value` (or wide with --wide)
    #[arg(long)]
    pub panel: PathBuf,
    /// Labels CSV: `subject_id,label` with labels in {0,1}
    #[arg(long)]
    pub labels: PathBuf,
    /// Accept wide panel format
    #[arg(long)]
    pub wide: bool,
    /// Multiplier applied to every panel value at ingestion
    #[arg(long, default_value_t = 1.0)]
    pub unit_scale: f64,
    /// Number of folds
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Shuffle seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Model name recorded in the risks file
    #[arg(long, default_value = "logistic_regression")]
    pub model_name: String,
    /// Write out-of-sample scores here in `subject_id,model,score` form
    #[arg(long)]
    pub emit_risks: PathBuf,
    /// Percentile of the score distribution used as the high-risk threshold
    /// for the printed evaluation
    #[arg(long, default_value_t = 62.0)]
    pub threshold_percentile: f64,
    /// Gradient-descent starting step
    #[arg(long, default_value_t = 1.0)]
    pub learning_rate: f64,
    /// Iteration budget
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    /// L2 penalty on the standardized weights
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let ingest = IngestConfig {
        wide: args.wide,
        unit_scale: args.unit_scale,
        polarity: Polarity::Desirable, // irrelevant for training
        feature_unit: String::new(),
        allow_signed: false,
    };
    let panel = parse_panel_path(&args.panel, &ingest)?;
    let labels = parse_labels_path(&args.labels)?;
    let data = SupervisedDataset::from_panel(&panel, &labels)?;
    if data.len() < panel.subjects.len() {
        eprintln!(
            "warning: {} panel subjects have no label and were dropped",
            panel.subjects.len() - data.len()
        );
    }

    let config = FitConfig {
        learning_rate: args.learning_rate,
        max_iter: args.max_iter,
        l2: args.l2,
        seed: args.seed,
    };
    let scores = kfold_oos(&data, args.k, args.seed, &config)?;

    let mut table = RiskScoreTable::default();
    for (id, score) in &scores {
        table.insert(&args.model_name, id, *score);
    }
    let mut buf = Vec::new();
    write_risks_csv(&table, &mut buf, &args.emit_risks.display().to_string())?;
    std::fs::write(&args.emit_risks, &buf)
        .with_context(|| format!("writing {}", args.emit_risks.display()))?;
    eprintln!(
        "wrote {} out-of-sample scores to {}",
        scores.len(),
        args.emit_risks.display()
    );

    // out-of-sample evaluation at the percentile threshold
    let ordered: Vec<(&String, f64)> = scores.iter().map(|(id, &s)| (id, s)).collect();
    let score_vec: Vec<f64> = ordered.iter().map(|(_, s)| *s).collect();
    let label_vec: Vec<u8> = ordered.iter().map(|(id, _)| labels[*id]).collect();
    let threshold = percentile_threshold(&score_vec, args.threshold_percentile)?;
    let eval = eval_classifier(&score_vec, &label_vec, threshold)?;
    println!(
        "model={} k={} seed={} threshold_pct={} threshold={:.6}",
        args.model_name, args.k, args.seed, args.threshold_percentile, threshold
    );
    println!(
        "accuracy={:.4} weighted_f1={:.4} f1_class0={:.4} f1_class1={:.4}",
        eval.accuracy, eval.weighted_f1, eval.per_class_f1[0], eval.per_class_f1[1]
    );
    Ok(())
}
