//! `eaf stats` — the analysis toolkit behind the fairness studies: a
//! correlation report (correlations, dependent-correlation tests, bootstrap
//! intervals, regressions with Wald tests) and truth-serum scoring.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use eaf_core::stats::bts::{bts_scores, BtsResponse, BtsResponseSet};
use eaf_core::stats::correlation::{
    bootstrap_corr_diff, correlation_t_test, hotelling_t, spearman, steiger_z, CorrelationTriple,
};
use eaf_core::stats::distributions::t_two_sided_p;
use eaf_core::stats::regression::{bonferroni, ols_fit, wald_test, RegressionFit};
use serde::Serialize;

#[derive(Subcommand, Debug)]
pub enum StatsCommand {
    /// Correlation report over four response columns
    Corr(CorrArgs),
    /// Truth-serum scores for multiple-choice responses
    Bts(BtsArgs),
}

pub fn run(command: StatsCommand) -> Result<()> {
    match command {
        StatsCommand::Corr(args) => run_corr(args),
        StatsCommand::Bts(args) => run_bts(args),
    }
}

// --- corr -----------------------------------------------------------------

#[derive(Args, Debug)]
pub struct CorrArgs {
    /// Responses CSV with one row per rated pair
    #[arg(long)]
    pub csv: PathBuf,
    /// Four column names: aggregate, trajectory, overall-input, output
    #[arg(long, value_delimiter = ',')]
    pub cols: Vec<String>,
    /// Optional binary condition column for moderation regressions
    #[arg(long)]
    pub condition: Option<String>,
    /// Bootstrap resamples
    #[arg(long, default_value_t = 2000)]
    pub bootstrap: usize,
    /// Bootstrap seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Write the JSON report here (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CorrelationEntry {
    r: f64,
    t: f64,
    p: f64,
    p_bonferroni: f64,
}

#[derive(Serialize)]
struct DependentTestEntry {
    hotelling_t: f64,
    hotelling_df: usize,
    hotelling_p: f64,
    hotelling_p_bonferroni: f64,
    steiger_z: f64,
    steiger_p: f64,
    steiger_p_bonferroni: f64,
}

#[derive(Serialize)]
struct BootstrapEntry {
    lo: f64,
    hi: f64,
    resamples: usize,
    excludes_zero: bool,
}

#[derive(Serialize)]
struct RegressionEntry {
    terms: Vec<String>,
    coefficients: Vec<f64>,
    standard_errors: Vec<f64>,
    p_values: Vec<f64>,
    r_squared: f64,
    adj_r_squared: f64,
    f_statistic: f64,
    residual_df: usize,
    wald_chi2: f64,
    wald_df: usize,
    wald_p: f64,
    wald_hypothesis: String,
}

#[derive(Serialize)]
struct CorrReport {
    n: usize,
    correlations: BTreeMap<String, CorrelationEntry>,
    dependent_tests: BTreeMap<String, DependentTestEntry>,
    bootstrap: BTreeMap<String, BootstrapEntry>,
    regressions: BTreeMap<String, RegressionEntry>,
}

fn read_columns(path: &Path, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let indices: Vec<usize> = names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == name)
                .with_context(|| format!("column {name:?} not found in {}", path.display()))
        })
        .collect::<Result<_>>()?;
    let mut columns = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (slot, &idx) in columns.iter_mut().zip(&indices) {
            let raw = &record[idx];
            let value: f64 = raw
                .parse()
                .with_context(|| format!("row {}: non-numeric {raw:?}", row + 2))?;
            slot.push(value);
        }
    }
    if columns[0].is_empty() {
        bail!("{} has no data rows", path.display());
    }
    Ok(columns)
}

fn regression_entry(
    fit: &RegressionFit,
    terms: Vec<String>,
    restricted: &[usize],
    hypothesis: &str,
) -> Result<RegressionEntry> {
    let df = fit.residual_df as f64;
    let p_values = fit
        .coefficients
        .iter()
        .zip(&fit.standard_errors)
        .map(|(c, se)| t_two_sided_p(c / se, df))
        .collect();
    let wald = wald_test(fit, &fit.covariance, restricted)?;
    Ok(RegressionEntry {
        terms,
        coefficients: fit.coefficients.clone(),
        standard_errors: fit.standard_errors.clone(),
        p_values,
        r_squared: fit.r_squared,
        adj_r_squared: fit.adj_r_squared,
        f_statistic: fit.f_statistic,
        residual_df: fit.residual_df,
        wald_chi2: wald.chi2,
        wald_df: wald.df,
        wald_p: wald.p,
        wald_hypothesis: hypothesis.to_string(),
    })
}

fn run_corr(args: CorrArgs) -> Result<()> {
    if args.cols.len() != 4 {
        bail!(
            "--cols wants exactly 4 names (aggregate,trajectory,input,output), got {}",
            args.cols.len()
        );
    }
    let columns = read_columns(&args.csv, &args.cols)?;
    let (aggregate, trajectory, input, output) =
        (&columns[0], &columns[1], &columns[2], &columns[3]);
    let n = aggregate.len();

    // spearman correlations with one-sample significance
    let pairs: [(&str, &Vec<f64>, &Vec<f64>); 5] = [
        ("aggregate_vs_input", aggregate, input),
        ("trajectory_vs_input", trajectory, input),
        ("aggregate_vs_trajectory", aggregate, trajectory),
        ("aggregate_vs_output", aggregate, output),
        ("trajectory_vs_output", trajectory, output),
    ];
    let mut raw_r = BTreeMap::new();
    let mut raw_p = Vec::new();
    let mut keys = Vec::new();
    for (key, x, y) in pairs {
        let r = spearman(x, y).with_context(|| format!("correlation {key}"))?;
        let (t, p) = correlation_t_test(r, n)?;
        raw_r.insert(key.to_string(), (r, t, p));
        raw_p.push(p);
        keys.push(key.to_string());
    }
    let adjusted = bonferroni(&raw_p, raw_p.len())?;
    let correlations: BTreeMap<String, CorrelationEntry> = keys
        .iter()
        .zip(&adjusted)
        .map(|(key, &p_bonferroni)| {
            let (r, t, p) = raw_r[key];
            (
                key.clone(),
                CorrelationEntry {
                    r,
                    t,
                    p,
                    p_bonferroni,
                },
            )
        })
        .collect();

    // dependent-correlation tests: trajectory vs aggregate against each
    // shared outcome column
    let r_te = raw_r["aggregate_vs_trajectory"].0;
    let mut dependent_tests = BTreeMap::new();
    let mut test_ps = Vec::new();
    let mut test_rows = Vec::new();
    for (key, traj_key, aggr_key) in [
        (
            "input_trajectory_vs_aggregate",
            "trajectory_vs_input",
            "aggregate_vs_input",
        ),
        (
            "output_trajectory_vs_aggregate",
            "trajectory_vs_output",
            "aggregate_vs_output",
        ),
    ] {
        let triple = CorrelationTriple::new(raw_r[traj_key].0, raw_r[aggr_key].0, r_te, n)?;
        let hotelling = hotelling_t(&triple)?;
        let steiger = steiger_z(&triple)?;
        test_ps.push(hotelling.p_two_sided);
        test_ps.push(steiger.p_two_sided);
        test_rows.push((key.to_string(), hotelling, steiger));
    }
    let adjusted = bonferroni(&test_ps, test_ps.len())?;
    for (i, (key, hotelling, steiger)) in test_rows.into_iter().enumerate() {
        dependent_tests.insert(
            key,
            DependentTestEntry {
                hotelling_t: hotelling.t,
                hotelling_df: hotelling.df,
                hotelling_p: hotelling.p_two_sided,
                hotelling_p_bonferroni: adjusted[2 * i],
                steiger_z: steiger.z,
                steiger_p: steiger.p_two_sided,
                steiger_p_bonferroni: adjusted[2 * i + 1],
            },
        );
    }

    // bootstrap CIs of the correlation differences (aggregate minus
    // trajectory, negative when trajectory correlates more strongly)
    let mut bootstrap = BTreeMap::new();
    for (key, shared) in [
        ("input_aggregate_minus_trajectory", input),
        ("output_aggregate_minus_trajectory", output),
    ] {
        let ci = bootstrap_corr_diff(shared, aggregate, trajectory, args.bootstrap, args.seed)?;
        bootstrap.insert(
            key.to_string(),
            BootstrapEntry {
                lo: ci.lo,
                hi: ci.hi,
                resamples: ci.resamples,
                excludes_zero: ci.lo > 0.0 || ci.hi < 0.0,
            },
        );
    }

    // pooled regressions of each outcome on both distances
    let mut regressions = BTreeMap::new();
    let base_terms = vec![
        "intercept".to_string(),
        "aggregate".to_string(),
        "trajectory".to_string(),
    ];
    let base_design: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![1.0, aggregate[i], trajectory[i]])
        .collect();
    for (key, response) in [("input", input), ("output", output)] {
        let fit = ols_fit(&base_design, response)?;
        regressions.insert(
            key.to_string(),
            regression_entry(
                &fit,
                base_terms.clone(),
                &[1, 2],
                "aggregate = trajectory = 0",
            )?,
        );
    }

    // optional moderation models with a binary condition column
    if let Some(condition_col) = &args.condition {
        let condition = &read_columns(&args.csv, std::slice::from_ref(condition_col))?[0];
        let terms = vec![
            "intercept".to_string(),
            "aggregate".to_string(),
            "trajectory".to_string(),
            "condition".to_string(),
            "aggregate_x_condition".to_string(),
            "trajectory_x_condition".to_string(),
        ];
        let design: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                vec![
                    1.0,
                    aggregate[i],
                    trajectory[i],
                    condition[i],
                    aggregate[i] * condition[i],
                    trajectory[i] * condition[i],
                ]
            })
            .collect();
        for (key, response) in [("input_moderation", input), ("output_moderation", output)] {
            let fit = ols_fit(&design, response)?;
            regressions.insert(
                key.to_string(),
                regression_entry(
                    &fit,
                    terms.clone(),
                    &[4, 5],
                    "both interaction terms = 0",
                )?,
            );
        }
    }

    let report = CorrReport {
        n,
        correlations,
        dependent_tests,
        bootstrap,
        regressions,
    };
    let rendered = serde_json::to_string_pretty(&report)?;
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

// --- bts ------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct BtsArgs {
    /// Responses CSV: `participant_id,answer,pred_<choice>...` with 1-based
    /// answers and prediction columns summing to 1 per row
    #[arg(long)]
    pub csv: PathBuf,
    /// Share of participants flagged for the honesty bonus
    #[arg(long, default_value_t = 10.0)]
    pub top_percent: f64,
    /// Score the raw choice space even for 6-point responses
    /// (default: 6-point answers are binarized into low/high halves)
    #[arg(long)]
    pub raw: bool,
    /// Weight on the prediction term
    #[arg(long, default_value_t = 1.0)]
    pub prediction_weight: f64,
    /// Write the ranked CSV here (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_bts(path: &Path) -> Result<BtsResponseSet> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "participant_id")
        .context("missing participant_id column")?;
    let answer_col = headers
        .iter()
        .position(|h| h == "answer")
        .context("missing answer column")?;
    let pred_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("pred_"))
        .map(|(i, _)| i)
        .collect();
    if pred_cols.len() < 2 {
        bail!("need at least two pred_<choice> columns");
    }

    let mut responses = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let answer: usize = record[answer_col]
            .parse()
            .with_context(|| format!("row {}: bad answer", row + 2))?;
        if answer == 0 {
            bail!("row {}: answers are 1-based", row + 2);
        }
        let mut prediction: Vec<f64> = pred_cols
            .iter()
            .map(|&i| {
                record[i]
                    .parse()
                    .with_context(|| format!("row {}: bad prediction", row + 2))
            })
            .collect::<Result<_>>()?;
        // absorb CSV rounding drift; anything larger is a real data problem
        let sum: f64 = prediction.iter().sum();
        if (sum - 1.0).abs() <= 1e-4 && sum > 0.0 {
            for p in &mut prediction {
                *p /= sum;
            }
        }
        responses.push(BtsResponse {
            participant: record[id_col].to_string(),
            answer: answer - 1,
            prediction,
        });
    }
    Ok(BtsResponseSet {
        choice_count: pred_cols.len(),
        responses,
    })
}

/// Collapse a 6-point response set into two halves: choices 1-3 vs 4-6.
fn binarize(set: &BtsResponseSet) -> BtsResponseSet {
    let responses = set
        .responses
        .iter()
        .map(|r| BtsResponse {
            participant: r.participant.clone(),
            answer: usize::from(r.answer >= 3),
            prediction: vec![
                r.prediction[..3].iter().sum(),
                r.prediction[3..].iter().sum(),
            ],
        })
        .collect();
    BtsResponseSet {
        choice_count: 2,
        responses,
    }
}

fn run_bts(args: BtsArgs) -> Result<()> {
    let set = read_bts(&args.csv)?;
    let set = if set.choice_count == 6 && !args.raw {
        eprintln!("binarizing 6-point answers into low/high halves (use --raw to keep all 6)");
        binarize(&set)
    } else {
        set
    };
    let outcome = bts_scores(&set, args.prediction_weight)?;
    let flags = outcome.top_flags(args.top_percent);

    let mut out = String::from("rank,participant_id,answer,info,prediction,total,top_flag\n");
    for (rank, &idx) in outcome.ranking.iter().enumerate() {
        let score = &outcome.scores[idx];
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            rank + 1,
            score.participant,
            set.responses[idx].answer + 1,
            score.info,
            score.prediction,
            score.total,
            u8::from(flags[idx]),
        ));
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{out}"),
    }
    Ok(())
}
