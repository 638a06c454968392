//! Seeded synthetic panels, demographics, labels, and scripted risk-score
//! scenarios, so every pipeline runs end to end without restricted data.
//!
//! Trajectories are quadratic in the cumulative view (X_t = base + v t +
//! a t^2 / 2 plus optional noise), so with zero noise every subject's mean
//! acceleration equals the drawn `a` exactly and tests can assert effort in
//! closed form. The emitted panel holds the differenced, non-cumulative
//! values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::effort::sigmoid;
use crate::error::{Error, Result};
use crate::ingest::{Panel, Polarity, RiskScoreTable, SubjectRecord};
use crate::rng::SeededRng;

/// Parameters of the quadratic cumulative trajectory family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectoryModel {
    pub base_mean: f64,
    pub base_sd: f64,
    pub velocity_mean: f64,
    pub velocity_sd: f64,
    pub accel_mean: f64,
    pub accel_sd: f64,
    /// Per-step noise on the cumulative level.
    pub noise_sd: f64,
}

/// Bernoulli outcome model: p = sigmoid(intercept + a_coef * accel_mean +
/// t_coef * total).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LabelModel {
    pub intercept: f64,
    pub accel_coef: f64,
    pub total_coef: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub time_steps: usize,
    pub polarity: Polarity,
    pub feature_unit: String,
    /// Attribute name -> (label, probability) mix; probabilities sum to 1.
    pub attributes: Vec<(String, Vec<(String, f64)>)>,
    pub trajectory: TrajectoryModel,
    pub labels: LabelModel,
    pub seed: u64,
}

impl SynthConfig {
    /// Ready-to-run configuration: desirable feature, race/sex/age_group
    /// demographics with the race labels matching the shipped inertia table.
    pub fn defaults(n_subjects: usize, seed: u64) -> Self {
        SynthConfig {
            n_subjects,
            time_steps: 4,
            polarity: Polarity::Desirable,
            feature_unit: "10k USD".to_string(),
            attributes: vec![
                (
                    "race".to_string(),
                    vec![
                        ("White".to_string(), 0.45),
                        ("Black".to_string(), 0.30),
                        ("Asian".to_string(), 0.10),
                        ("American Indian".to_string(), 0.08),
                        ("Pacific Islander".to_string(), 0.07),
                    ],
                ),
                (
                    "sex".to_string(),
                    vec![("Female".to_string(), 0.51), ("Male".to_string(), 0.49)],
                ),
                (
                    "age_group".to_string(),
                    vec![
                        ("18-35".to_string(), 0.35),
                        ("36-55".to_string(), 0.40),
                        ("56+".to_string(), 0.25),
                    ],
                ),
            ],
            trajectory: TrajectoryModel {
                base_mean: 5.0,
                base_sd: 1.0,
                velocity_mean: 4.0,
                velocity_sd: 0.8,
                accel_mean: 0.0,
                accel_sd: 1.2,
                noise_sd: 0.2,
            },
            labels: LabelModel {
                intercept: 0.2,
                accel_coef: -0.8,
                total_coef: -0.02,
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::BadSynthConfig("n_subjects must be >= 1".to_string()));
        }
        if self.time_steps < 3 {
            return Err(Error::BadSynthConfig(
                "time_steps must be >= 3".to_string(),
            ));
        }
        for sd in [
            self.trajectory.base_sd,
            self.trajectory.velocity_sd,
            self.trajectory.accel_sd,
            self.trajectory.noise_sd,
        ] {
            if sd < 0.0 {
                return Err(Error::BadSynthConfig(format!("negative sd {sd}")));
            }
        }
        for (attribute, mix) in &self.attributes {
            let total: f64 = mix.iter().map(|(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 || mix.iter().any(|(_, p)| *p < 0.0) {
                return Err(Error::BadSynthConfig(format!(
                    "probabilities for {attribute} sum to {total}"
                )));
            }
        }
        Ok(())
    }
}

/// Generated panel plus outcome labels.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub panel: Panel,
    pub labels: BTreeMap<String, u8>,
    /// Non-cumulative values clamped up to zero. Clamping perturbs the
    /// closed-form acceleration, so exactness tests pin parameter regimes
    /// where this stays zero.
    pub clipped_values: usize,
}

/// Generate a panel with demographics and labels. Byte-identical output for
/// identical configs.
pub fn generate_panel(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = SeededRng::derive(config.seed, 0);
    let width = config.n_subjects.to_string().len().max(4);
    let mut subjects = Vec::with_capacity(config.n_subjects);
    let mut labels = BTreeMap::new();
    let mut clipped = 0usize;

    for index in 0..config.n_subjects {
        let id = format!("s{index:0width$}");
        let demographics: BTreeMap<String, String> = config
            .attributes
            .iter()
            .map(|(name, mix)| (name.clone(), rng.pick_weighted(mix).clone()))
            .collect();

        let base = rng.normal_with(config.trajectory.base_mean, config.trajectory.base_sd);
        let velocity = rng.normal_with(config.trajectory.velocity_mean, config.trajectory.velocity_sd);
        let accel = rng.normal_with(config.trajectory.accel_mean, config.trajectory.accel_sd);

        let cumulative: Vec<f64> = (0..config.time_steps)
            .map(|t| {
                let t = t as f64;
                let noise = if config.trajectory.noise_sd > 0.0 {
                    rng.normal_with(0.0, config.trajectory.noise_sd)
                } else {
                    0.0
                };
                base + velocity * t + 0.5 * accel * t * t + noise
            })
            .collect();
        let values: Vec<f64> = cumulative
            .iter()
            .enumerate()
            .map(|(t, &x)| {
                let raw = if t == 0 { x } else { x - cumulative[t - 1] };
                if raw < 0.0 {
                    clipped += 1;
                    0.0
                } else {
                    raw
                }
            })
            .collect();

        let total: f64 = values.iter().sum();
        let p = sigmoid(
            config.labels.intercept
                + config.labels.accel_coef * accel
                + config.labels.total_coef * total,
        );
        labels.insert(id.clone(), u8::from(rng.bernoulli(p)));

        subjects.push(SubjectRecord {
            id,
            values,
            demographics,
        });
    }

    Ok(SynthOutput {
        panel: Panel {
            subjects,
            time_steps: config.time_steps,
            polarity: config.polarity,
            feature_unit: config.feature_unit.clone(),
            allow_signed: false,
        },
        labels,
        clipped_values: clipped,
    })
}

/// Scripted risk-score behaviors for exercising the fairness metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RiskScenario {
    /// Risk independent of demographics: 0.5 plus small noise.
    GroupBlind,
    /// One named group's mean risk sits `gap` above everyone else's 0.3.
    GroupBiased {
        attribute: String,
        group: String,
        gap: f64,
    },
    /// Risk decreasing in effort: 0.8 - slope * E plus small noise.
    EffortRewarding { slope: f64 },
}

impl RiskScenario {
    pub fn model_name(&self) -> &'static str {
        match self {
            RiskScenario::GroupBlind => "group_blind",
            RiskScenario::GroupBiased { .. } => "group_biased",
            RiskScenario::EffortRewarding { .. } => "effort_rewarding",
        }
    }
}

const SCENARIO_NOISE_SD: f64 = 0.02;

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Generate one model's scores for every panel subject.
/// `efforts` is only consulted by the effort-rewarding scenario.
pub fn generate_risks(
    panel: &Panel,
    scenario: &RiskScenario,
    efforts: Option<&BTreeMap<String, f64>>,
    seed: u64,
) -> Result<RiskScoreTable> {
    let mut rng = SeededRng::derive(seed, 1);
    let mut table = RiskScoreTable::default();

    match scenario {
        RiskScenario::GroupBlind => {
            for subject in &panel.subjects {
                let score = clamp01(0.5 + rng.normal_with(0.0, SCENARIO_NOISE_SD));
                table.insert(scenario.model_name(), &subject.id, score);
            }
        }
        RiskScenario::GroupBiased {
            attribute,
            group,
            gap,
        } => {
            if !(0.0..1.0).contains(gap) {
                return Err(Error::BadSynthConfig(format!("gap {gap} outside [0,1)")));
            }
            let groups = panel.attribute_groups(attribute)?;
            if !groups.values().any(|label| label == group) {
                return Err(Error::UnknownGroup {
                    attribute: attribute.clone(),
                    group: group.clone(),
                });
            }
            for subject in &panel.subjects {
                let bump = if groups[&subject.id] == *group { *gap } else { 0.0 };
                let score = clamp01(0.3 + bump + rng.normal_with(0.0, SCENARIO_NOISE_SD));
                table.insert(scenario.model_name(), &subject.id, score);
            }
        }
        RiskScenario::EffortRewarding { slope } => {
            let efforts = efforts.ok_or_else(|| {
                Error::BadSynthConfig(
                    "effort_rewarding scenario needs per-subject efforts".to_string(),
                )
            })?;
            for subject in &panel.subjects {
                let effort = efforts.get(&subject.id).copied().unwrap_or(0.5);
                let score = clamp01(0.8 - slope * effort + rng.normal_with(0.0, SCENARIO_NOISE_SD));
                table.insert(scenario.model_name(), &subject.id, score);
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effort::kinematics;
    use crate::ingest::{validate_panel, write_panel_csv};

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig::defaults(50, 7);
        let a = generate_panel(&config).unwrap();
        let b = generate_panel(&config).unwrap();
        assert_eq!(a.panel, b.panel);
        assert_eq!(a.labels, b.labels);
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_panel_csv(&a.panel, &mut csv_a, "mem").unwrap();
        write_panel_csv(&b.panel, &mut csv_b, "mem").unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn generated_panels_validate() {
        for seed in [0, 1, 2, 3] {
            let out = generate_panel(&SynthConfig::defaults(120, seed)).unwrap();
            assert!(validate_panel(&out.panel).is_ok());
        }
    }

    #[test]
    fn zero_noise_quadratic_recovers_acceleration_exactly() {
        let mut config = SynthConfig::defaults(30, 3);
        config.trajectory = TrajectoryModel {
            base_mean: 10.0,
            base_sd: 0.5,
            velocity_mean: 5.0,
            velocity_sd: 0.2,
            accel_mean: 0.7,
            accel_sd: 0.0,
            noise_sd: 0.0,
        };
        let out = generate_panel(&config).unwrap();
        assert_eq!(out.clipped_values, 0);
        for subject in &out.panel.subjects {
            let k = kinematics(&subject.values).unwrap();
            assert!(
                (k.accel_mean - 0.7).abs() < 1e-9,
                "subject {} accel {}",
                subject.id,
                k.accel_mean
            );
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut config = SynthConfig::defaults(0, 1);
        assert!(matches!(generate_panel(&config), Err(Error::BadSynthConfig(_))));
        config = SynthConfig::defaults(10, 1);
        config.attributes[0].1[0].1 = 0.9; // probabilities no longer sum to 1
        assert!(matches!(generate_panel(&config), Err(Error::BadSynthConfig(_))));
    }

    #[test]
    fn group_biased_risks_have_the_configured_gap() {
        let out = generate_panel(&SynthConfig::defaults(2_000, 11)).unwrap();
        let scenario = RiskScenario::GroupBiased {
            attribute: "race".to_string(),
            group: "Black".to_string(),
            gap: 0.3,
        };
        let table = generate_risks(&out.panel, &scenario, None, 11).unwrap();
        let scores = &table.models["group_biased"];
        let groups = out.panel.attribute_groups("race").unwrap();
        let mut biased = (0.0, 0usize);
        let mut rest = (0.0, 0usize);
        for (id, score) in scores {
            if groups[id] == "Black" {
                biased.0 += score;
                biased.1 += 1;
            } else {
                rest.0 += score;
                rest.1 += 1;
            }
        }
        let mean_biased = biased.0 / biased.1 as f64;
        let mean_rest = rest.0 / rest.1 as f64;
        assert!((mean_biased - 0.6).abs() < 0.01, "mean {mean_biased}");
        assert!((mean_rest - 0.3).abs() < 0.01, "mean {mean_rest}");
    }

    #[test]
    fn scenario_errors() {
        let out = generate_panel(&SynthConfig::defaults(20, 1)).unwrap();
        let unknown_group = RiskScenario::GroupBiased {
            attribute: "race".to_string(),
            group: "Martian".to_string(),
            gap: 0.2,
        };
        assert!(matches!(
            generate_risks(&out.panel, &unknown_group, None, 1),
            Err(Error::UnknownGroup { .. })
        ));
        let unknown_attr = RiskScenario::GroupBiased {
            attribute: "planet".to_string(),
            group: "Earth".to_string(),
            gap: 0.2,
        };
        assert!(matches!(
            generate_risks(&out.panel, &unknown_attr, None, 1),
            Err(Error::UnknownAttribute(_))
        ));
        let needs_efforts = RiskScenario::EffortRewarding { slope: 0.4 };
        assert!(matches!(
            generate_risks(&out.panel, &needs_efforts, None, 1),
            Err(Error::BadSynthConfig(_))
        ));
    }

    #[test]
    fn same_seed_same_risk_table() {
        let out = generate_panel(&SynthConfig::defaults(100, 5)).unwrap();
        let a = generate_risks(&out.panel, &RiskScenario::GroupBlind, None, 9).unwrap();
        let b = generate_risks(&out.panel, &RiskScenario::GroupBlind, None, 9).unwrap();
        assert_eq!(a, b);
    }
}
