//! Effort-aware group fairness.
//!
//! Subjects are partitioned into effort bins; inside each bin the parity of a
//! model is the lowest group mean risk divided by the highest, over the
//! demographic groups with enough members in that bin. The same ratio over
//! the whole population (no effort conditioning) is the traditional parity
//! baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binning parameters. Defaults: width 0.1, at least 10 members per group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub bin_width: f64,
    pub min_group_size: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec {
            bin_width: 0.1,
            min_group_size: 10,
        }
    }
}

impl BinSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.bin_width <= 1.0) {
            return Err(Error::BadBinWidth(self.bin_width));
        }
        if self.min_group_size < 1 {
            return Err(Error::BadMinGroupSize);
        }
        Ok(())
    }

    pub fn bin_count(&self) -> usize {
        (1.0 / self.bin_width).ceil() as usize
    }

    /// Half-open bins [k*w, (k+1)*w), boundary values going to the upper bin;
    /// the last bin is closed at 1 so the partition covers (0,1].
    pub fn bin_index(&self, effort: f64) -> usize {
        let idx = (effort / self.bin_width).floor() as usize;
        idx.min(self.bin_count() - 1)
    }

    pub fn bounds(&self, index: usize) -> (f64, f64) {
        let lo = index as f64 * self.bin_width;
        let hi = ((index + 1) as f64 * self.bin_width).min(1.0);
        (lo, hi)
    }
}

/// Mean risk and member count of one group within one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub mean_risk: f64,
    pub count: usize,
}

/// A bin with a defined parity value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityBin {
    pub lo: f64,
    pub hi: f64,
    /// min group mean / max group mean over qualifying groups, in (0,1].
    pub parity: f64,
    pub groups: BTreeMap<String, GroupStat>,
}

/// A bin without a defined parity value, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedBin {
    pub lo: f64,
    pub hi: f64,
    pub reason: String,
}

/// Parity as a function of effort for one demographic attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityCurve {
    pub attribute: String,
    /// Reported bins in ascending effort order.
    pub bins: Vec<ParityBin>,
    pub omitted_bins: Vec<OmittedBin>,
}

impl ParityCurve {
    /// Group labels appearing in any reported bin, sorted.
    pub fn group_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .bins
            .iter()
            .flat_map(|b| b.groups.keys().cloned())
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }
}

/// Assign every subject to its effort bin. Returns `bin_count` buckets of
/// subject ids; all efforts must lie in (0,1].
pub fn bin_subjects(efforts: &BTreeMap<String, f64>, spec: &BinSpec) -> Result<Vec<Vec<String>>> {
    spec.validate()?;
    let mut bins = vec![Vec::new(); spec.bin_count()];
    for (subject, &effort) in efforts {
        if !(effort > 0.0 && effort <= 1.0) || !effort.is_finite() {
            return Err(Error::EffortOutOfRange(effort));
        }
        bins[spec.bin_index(effort)].push(subject.clone());
    }
    Ok(bins)
}

/// Outcome of a parity computation on one set of members.
#[derive(Debug, Clone, PartialEq)]
pub enum BinOutcome {
    Parity {
        parity: f64,
        groups: BTreeMap<String, GroupStat>,
    },
    Omitted {
        reason: String,
    },
}

/// Within-bin parity: group means over members with a score, restricted to
/// groups meeting `min_group_size`. Omission (too few groups, or an all-zero
/// maximum mean) is a value, not an error.
pub fn bin_parity(
    members: &[String],
    scores: &BTreeMap<String, f64>,
    groups: &BTreeMap<String, String>,
    spec: &BinSpec,
) -> BinOutcome {
    let mut per_group: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for subject in members {
        let (Some(score), Some(label)) = (scores.get(subject), groups.get(subject)) else {
            continue;
        };
        let entry = per_group.entry(label.as_str()).or_insert((0.0, 0));
        entry.0 += *score;
        entry.1 += 1;
    }
    let qualifying: BTreeMap<String, GroupStat> = per_group
        .into_iter()
        .filter(|(_, (_, count))| *count >= spec.min_group_size)
        .map(|(label, (sum, count))| {
            (
                label.to_string(),
                GroupStat {
                    mean_risk: sum / count as f64,
                    count,
                },
            )
        })
        .collect();
    if qualifying.len() < 2 {
        return BinOutcome::Omitted {
            reason: format!("insufficient groups: {} qualifying", qualifying.len()),
        };
    }
    let min = qualifying.values().map(|g| g.mean_risk).fold(f64::INFINITY, f64::min);
    let max = qualifying
        .values()
        .map(|g| g.mean_risk)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == 0.0 {
        return BinOutcome::Omitted {
            reason: "all qualifying group means are zero".to_string(),
        };
    }
    BinOutcome::Parity {
        parity: min / max,
        groups: qualifying,
    }
}

/// Full parity-vs-effort curve for one attribute and one model's scores.
pub fn eagf_curve(
    efforts: &BTreeMap<String, f64>,
    scores: &BTreeMap<String, f64>,
    groups: &BTreeMap<String, String>,
    attribute: &str,
    spec: &BinSpec,
) -> Result<ParityCurve> {
    let buckets = bin_subjects(efforts, spec)?;
    let mut bins = Vec::new();
    let mut omitted_bins = Vec::new();
    for (index, members) in buckets.iter().enumerate() {
        let (lo, hi) = spec.bounds(index);
        if members.is_empty() {
            omitted_bins.push(OmittedBin {
                lo,
                hi,
                reason: "no subjects".to_string(),
            });
            continue;
        }
        match bin_parity(members, scores, groups, spec) {
            BinOutcome::Parity { parity, groups } => bins.push(ParityBin {
                lo,
                hi,
                parity,
                groups,
            }),
            BinOutcome::Omitted { reason } => omitted_bins.push(OmittedBin { lo, hi, reason }),
        }
    }
    Ok(ParityCurve {
        attribute: attribute.to_string(),
        bins,
        omitted_bins,
    })
}

/// Traditional effort-unaware parity: the min/max group-mean ratio over the
/// whole scored population.
pub fn overall_parity(
    scores: &BTreeMap<String, f64>,
    groups: &BTreeMap<String, String>,
    min_group_size: usize,
) -> Result<(f64, BTreeMap<String, GroupStat>)> {
    let members: Vec<String> = groups
        .keys()
        .filter(|id| scores.contains_key(*id))
        .cloned()
        .collect();
    let spec = BinSpec {
        bin_width: 1.0,
        min_group_size,
    };
    match bin_parity(&members, scores, groups, &spec) {
        BinOutcome::Parity { parity, groups } => Ok((parity, groups)),
        BinOutcome::Omitted { reason } if reason.starts_with("insufficient") => {
            let found = reason
                .split_whitespace()
                .nth(2)
                .and_then(|s| s.parse().ok())
                .unwrap_or(0);
            Err(Error::InsufficientGroups { found })
        }
        BinOutcome::Omitted { .. } => Err(Error::ZeroMeanParity),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map<V: Clone>(pairs: &[(&str, V)]) -> BTreeMap<String, V> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn bin_index_boundaries() {
        let spec = BinSpec::default();
        assert_eq!(spec.bin_index(0.05), 0);
        // boundary value goes to the upper bin
        assert_eq!(spec.bin_index(0.1), 1);
        // the closed top lands in the last bin
        assert_eq!(spec.bin_index(1.0), 9);
        assert_eq!(spec.bounds(9), (0.9, 1.0));
    }

    #[test]
    fn bin_subjects_partitions() {
        let efforts = map(&[("a", 0.05), ("b", 0.10), ("c", 1.0), ("d", 0.95)]);
        let bins = bin_subjects(&efforts, &BinSpec::default()).unwrap();
        assert_eq!(bins[0], vec!["a"]);
        assert_eq!(bins[1], vec!["b"]);
        assert_eq!(bins[9], vec!["c", "d"]);
        assert_eq!(bins.iter().map(Vec::len).sum::<usize>(), 4);
    }

    #[test]
    fn bin_subjects_rejects_out_of_range() {
        let efforts = map(&[("a", 0.0)]);
        assert!(matches!(
            bin_subjects(&efforts, &BinSpec::default()),
            Err(Error::EffortOutOfRange(_))
        ));
    }

    fn two_group_bin(mean_a: f64, mean_b: f64, size: usize) -> (Vec<String>, BTreeMap<String, f64>, BTreeMap<String, String>) {
        let mut members = Vec::new();
        let mut scores = BTreeMap::new();
        let mut groups = BTreeMap::new();
        for i in 0..size {
            for (g, mean) in [("A", mean_a), ("B", mean_b)] {
                let id = format!("{g}{i}");
                members.push(id.clone());
                scores.insert(id.clone(), mean);
                groups.insert(id, g.to_string());
            }
        }
        (members, scores, groups)
    }

    #[test]
    fn bin_parity_ratio() {
        let (members, scores, groups) = two_group_bin(0.2, 0.4, 10);
        match bin_parity(&members, &scores, &groups, &BinSpec::default()) {
            BinOutcome::Parity { parity, groups } => {
                assert!((parity - 0.5).abs() < 1e-12);
                assert_eq!(groups["A"].count, 10);
            }
            other => panic!("expected parity, got {other:?}"),
        }
    }

    #[test]
    fn bin_parity_equal_means_is_one() {
        let (members, scores, groups) = two_group_bin(0.3, 0.3, 12);
        match bin_parity(&members, &scores, &groups, &BinSpec::default()) {
            BinOutcome::Parity { parity, .. } => assert_eq!(parity, 1.0),
            other => panic!("expected parity, got {other:?}"),
        }
    }

    #[test]
    fn bin_parity_omissions() {
        // one qualifying group only
        let (members, scores, groups) = two_group_bin(0.2, 0.4, 5);
        let spec = BinSpec {
            min_group_size: 6,
            ..BinSpec::default()
        };
        let (mut m2, mut s2, mut g2) = (members.clone(), scores.clone(), groups.clone());
        for i in 5..8 {
            let id = format!("A{i}");
            m2.push(id.clone());
            s2.insert(id.clone(), 0.2);
            g2.insert(id, "A".to_string());
        }
        match bin_parity(&m2, &s2, &g2, &spec) {
            BinOutcome::Omitted { reason } => assert!(reason.contains("insufficient")),
            other => panic!("expected omission, got {other:?}"),
        }
        // all means zero
        let (members, scores, groups) = two_group_bin(0.0, 0.0, 10);
        match bin_parity(&members, &scores, &groups, &BinSpec::default()) {
            BinOutcome::Omitted { reason } => assert!(reason.contains("zero")),
            other => panic!("expected omission, got {other:?}"),
        }
    }

    #[test]
    fn curve_single_bin_two_groups() {
        let (members, scores, groups) = two_group_bin(0.3, 0.6, 10);
        let efforts: BTreeMap<String, f64> = members.iter().map(|m| (m.clone(), 0.55)).collect();
        let curve = eagf_curve(&efforts, &scores, &groups, "race", &BinSpec::default()).unwrap();
        assert_eq!(curve.bins.len(), 1);
        assert!((curve.bins[0].parity - 0.5).abs() < 1e-12);
        assert_eq!(curve.bins[0].lo, 0.5);
        assert_eq!(curve.omitted_bins.len(), 9);
    }

    #[test]
    fn curve_all_groups_too_small() {
        let (members, scores, groups) = two_group_bin(0.3, 0.6, 4);
        let efforts: BTreeMap<String, f64> = members.iter().map(|m| (m.clone(), 0.55)).collect();
        let curve = eagf_curve(&efforts, &scores, &groups, "race", &BinSpec::default()).unwrap();
        assert!(curve.bins.is_empty());
        assert_eq!(curve.omitted_bins.len(), 10);
    }

    #[test]
    fn overall_parity_three_groups() {
        let mut scores = BTreeMap::new();
        let mut groups = BTreeMap::new();
        for (g, mean) in [("A", 0.25), ("B", 0.5), ("C", 1.0)] {
            for i in 0..10 {
                let id = format!("{g}{i}");
                scores.insert(id.clone(), mean);
                groups.insert(id, g.to_string());
            }
        }
        let (parity, stats) = overall_parity(&scores, &groups, 10).unwrap();
        assert!((parity - 0.25).abs() < 1e-12);
        assert_eq!(stats.len(), 3);
    }

    #[test]
    fn overall_parity_insufficient_groups() {
        let (_, scores, groups) = two_group_bin(0.2, 0.4, 5);
        assert!(matches!(
            overall_parity(&scores, &groups, 10),
            Err(Error::InsufficientGroups { .. })
        ));
    }

    proptest! {
        #[test]
        fn parity_scale_invariant_and_label_invariant(
            seed in 0u64..200,
            scale in 0.01f64..1.0,
        ) {
            let mut rng = crate::rng::SeededRng::new(seed);
            let mut scores = BTreeMap::new();
            let mut groups = BTreeMap::new();
            for i in 0..40 {
                let id = format!("s{i:02}");
                scores.insert(id.clone(), 0.2 + 0.7 * rng.next_f64());
                groups.insert(id, if i % 2 == 0 { "A".to_string() } else { "B".to_string() });
            }
            let (base, _) = overall_parity(&scores, &groups, 10).unwrap();
            prop_assert!(base > 0.0 && base <= 1.0);

            let scaled: BTreeMap<String, f64> =
                scores.iter().map(|(k, v)| (k.clone(), v * scale)).collect();
            let (scaled_parity, _) = overall_parity(&scaled, &groups, 10).unwrap();
            prop_assert!((base - scaled_parity).abs() < 1e-12);

            let relabeled: BTreeMap<String, String> = groups
                .iter()
                .map(|(k, v)| (k.clone(), if v == "A" { "Z".to_string() } else { "Y".to_string() }))
                .collect();
            let (relabeled_parity, _) = overall_parity(&scores, &relabeled, 10).unwrap();
            prop_assert!((base - relabeled_parity).abs() < 1e-15);
        }

        #[test]
        fn single_bin_curve_matches_overall(seed in 0u64..100) {
            // refinement consistency: bin width 1 reduces the curve to the
            // traditional baseline
            let mut rng = crate::rng::SeededRng::new(seed);
            let mut efforts = BTreeMap::new();
            let mut scores = BTreeMap::new();
            let mut groups = BTreeMap::new();
            for i in 0..50 {
                let id = format!("s{i:02}");
                efforts.insert(id.clone(), (rng.next_f64() * 0.98 + 0.01).min(1.0));
                scores.insert(id.clone(), 0.1 + 0.8 * rng.next_f64());
                groups.insert(id, ["A", "B", "C"][i % 3].to_string());
            }
            let spec = BinSpec { bin_width: 1.0, min_group_size: 10 };
            let curve = eagf_curve(&efforts, &scores, &groups, "g", &spec).unwrap();
            let (overall, _) = overall_parity(&scores, &groups, 10).unwrap();
            prop_assert_eq!(curve.bins.len(), 1);
            prop_assert!((curve.bins[0].parity - overall).abs() < 1e-15);
        }

        #[test]
        fn raising_min_size_only_omits(seed in 0u64..100) {
            let mut rng = crate::rng::SeededRng::new(seed);
            let mut efforts = BTreeMap::new();
            let mut scores = BTreeMap::new();
            let mut groups = BTreeMap::new();
            for i in 0..120 {
                let id = format!("s{i:03}");
                efforts.insert(id.clone(), (rng.next_f64() * 0.98 + 0.01).min(1.0));
                scores.insert(id.clone(), 0.1 + 0.8 * rng.next_f64());
                groups.insert(id, ["A", "B"][i % 2].to_string());
            }
            let small = BinSpec { bin_width: 0.25, min_group_size: 5 };
            let large = BinSpec { bin_width: 0.25, min_group_size: 15 };
            let loose = eagf_curve(&efforts, &scores, &groups, "g", &small).unwrap();
            let strict = eagf_curve(&efforts, &scores, &groups, "g", &large).unwrap();
            prop_assert!(strict.bins.len() <= loose.bins.len());
            for bin in &strict.bins {
                // every strict group set is a subset of the loose one
                let loose_bin = loose.bins.iter().find(|b| b.lo == bin.lo).unwrap();
                for label in bin.groups.keys() {
                    prop_assert!(loose_bin.groups.contains_key(label));
                }
            }
        }
    }
}
