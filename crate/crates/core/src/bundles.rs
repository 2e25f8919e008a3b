//! Bundle catalogs, equivalence merge rules and 60-channel atlas assembly.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use ndarray::{Array4, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::volume::check_unique;
use crate::{BundleMaskSet, Error, Result};

const DEFAULT_JSON: &str = include_str!("../data/bundles.json");

pub const EXPERT_COUNT: usize = 16;
pub const TRACTSEG_COUNT: usize = 44;

/// Build one output channel as the voxelwise union of existing channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRule {
    pub target: String,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleCatalog {
    pub expert_16: Vec<String>,
    pub tractseg_44: Vec<String>,
    pub merge_rules: Vec<MergeRule>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RulesDoc {
    List(Vec<MergeRule>),
    Wrapped { merge_rules: Vec<MergeRule> },
}

/// Sources non-empty, no source reused, targets unique.
pub fn validate_rules(rules: &[MergeRule]) -> Result<()> {
    let mut used = HashSet::new();
    let mut targets = HashSet::new();
    for r in rules {
        if r.target.is_empty() {
            return Err(Error::Invalid("merge rule with empty target name".into()));
        }
        if r.sources.is_empty() {
            return Err(Error::Invalid(format!(
                "merge rule for `{}` has no sources",
                r.target
            )));
        }
        if !targets.insert(r.target.as_str()) {
            return Err(Error::Invalid(format!(
                "merge target `{}` defined twice",
                r.target
            )));
        }
        for s in &r.sources {
            if !used.insert(s.as_str()) {
                return Err(Error::Invalid(format!(
                    "merge source `{s}` used by more than one rule"
                )));
            }
        }
    }
    Ok(())
}

/// Parse merge rules from either a bare JSON array of rules or an object with a
/// `merge_rules` array (such as a full catalog document).
pub fn parse_merge_rules(text: &str) -> Result<Vec<MergeRule>> {
    let doc: RulesDoc = serde_json::from_str(text).map_err(|e| Error::format("merge rules", e))?;
    let rules = match doc {
        RulesDoc::List(r) => r,
        RulesDoc::Wrapped { merge_rules } => merge_rules,
    };
    validate_rules(&rules)?;
    Ok(rules)
}

impl BundleCatalog {
    /// The built-in catalog shipped with the crate.
    pub fn builtin() -> BundleCatalog {
        Self::from_json(DEFAULT_JSON).expect("embedded catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<BundleCatalog> {
        let cat: BundleCatalog =
            serde_json::from_str(text).map_err(|e| Error::format("bundle catalog", e))?;
        cat.validate()?;
        Ok(cat)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.expert_16.len() != EXPERT_COUNT || self.tractseg_44.len() != TRACTSEG_COUNT {
            return Err(Error::Invalid(format!(
                "catalog needs {EXPERT_COUNT} expert and {TRACTSEG_COUNT} TractSeg bundles, got {} and {}",
                self.expert_16.len(),
                self.tractseg_44.len()
            )));
        }
        check_unique(&self.merged_catalog_60())?;
        validate_rules(&self.merge_rules)
    }

    /// Expert names followed by the appended TractSeg names.
    pub fn merged_catalog_60(&self) -> Vec<String> {
        self.expert_16
            .iter()
            .chain(&self.tractseg_44)
            .cloned()
            .collect()
    }

    /// Expert bundles that the comparison method can produce through the merge rules.
    pub fn comparable_bundles(&self) -> Vec<String> {
        let targets: HashSet<&str> = self.merge_rules.iter().map(|r| r.target.as_str()).collect();
        self.expert_16
            .iter()
            .filter(|b| targets.contains(b.as_str()))
            .cloned()
            .collect()
    }
}

/// Apply merge rules. Output holds each rule target in rule order, followed by every
/// channel not consumed by a rule in its original order. A target is the voxelwise
/// maximum (logical OR for binary masks) of its valid sources and is valid when any
/// source is.
pub fn merge_tractseg_masks(masks: &BundleMaskSet, rules: &[MergeRule]) -> Result<BundleMaskSet> {
    validate_rules(rules)?;
    let mut consumed = HashSet::new();
    let mut plan: Vec<(String, Vec<usize>)> = Vec::new();
    for r in rules {
        let idx = r
            .sources
            .iter()
            .map(|s| {
                masks.channel_index(s).ok_or_else(|| {
                    Error::MissingChannel(format!("merge source `{s}` for `{}`", r.target))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        consumed.extend(idx.iter().copied());
        plan.push((r.target.clone(), idx));
    }
    for i in (0..masks.n_channels()).filter(|i| !consumed.contains(i)) {
        plan.push((masks.channels()[i].clone(), vec![i]));
    }

    let [nx, ny, nz] = masks.grid().shape();
    let mut data = Array4::<f32>::zeros((nx, ny, nz, plan.len()));
    let mut valid = Vec::with_capacity(plan.len());
    let names: Vec<String> = plan.iter().map(|(n, _)| n.clone()).collect();
    for (out_c, (_, sources)) in plan.iter().enumerate() {
        let mut out = data.index_axis_mut(Axis(3), out_c);
        if let [single] = sources.as_slice() {
            // Pass-through and renames keep values and flags untouched.
            out.assign(&masks.channel(*single));
            valid.push(masks.is_valid(*single));
            continue;
        }
        let live: Vec<usize> = sources
            .iter()
            .copied()
            .filter(|&s| masks.is_valid(s))
            .collect();
        for &s in &live {
            Zip::from(&mut out)
                .and(&masks.channel(s))
                .for_each(|o, &v| *o = o.max(v));
        }
        valid.push(!live.is_empty());
    }
    BundleMaskSet::new(*masks.grid(), names, data, valid)
}

/// Stack the expert channels and the appended TractSeg channels in catalog order.
/// Expert flags are kept; a TractSeg channel is invalid when it is flagged invalid
/// or entirely empty.
pub fn assemble_60(
    expert: &BundleMaskSet,
    tractseg: &BundleMaskSet,
    catalog: &BundleCatalog,
) -> Result<BundleMaskSet> {
    expert
        .grid()
        .check_same(tractseg.grid(), "expert/TractSeg masks")?;
    if expert.n_channels() != EXPERT_COUNT {
        return Err(Error::Invalid(format!(
            "expert mask set has {} channels, expected {EXPERT_COUNT}",
            expert.n_channels()
        )));
    }
    if tractseg.n_channels() < TRACTSEG_COUNT {
        return Err(Error::Invalid(format!(
            "TractSeg mask set has {} channels, needs the {TRACTSEG_COUNT} appended bundles",
            tractseg.n_channels()
        )));
    }
    let [nx, ny, nz] = expert.grid().shape();
    let names = catalog.merged_catalog_60();
    let mut data = Array4::<f32>::zeros((nx, ny, nz, names.len()));
    let mut valid = Vec::with_capacity(names.len());
    for (c, name) in catalog.expert_16.iter().enumerate() {
        let i = expert
            .channel_index(name)
            .ok_or_else(|| Error::MissingChannel(format!("expert bundle `{name}`")))?;
        data.index_axis_mut(Axis(3), c).assign(&expert.channel(i));
        valid.push(expert.is_valid(i));
    }
    for (k, name) in catalog.tractseg_44.iter().enumerate() {
        let i = tractseg
            .channel_index(name)
            .ok_or_else(|| Error::MissingChannel(format!("TractSeg bundle `{name}`")))?;
        data.index_axis_mut(Axis(3), EXPERT_COUNT + k)
            .assign(&tractseg.channel(i));
        valid.push(tractseg.is_valid(i) && tractseg.positive_count(i) > 0);
    }
    BundleMaskSet::new(*expert.grid(), names, data, valid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExclusionOptions {
    /// A bundle missing in more than this fraction of subjects is excluded cohort-wide.
    pub cohort_fraction: f64,
}

impl Default for ExclusionOptions {
    fn default() -> Self {
        ExclusionOptions {
            cohort_fraction: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ExclusionReport {
    /// `(subject, bundle)` pairs whose reference is absent, invalid or empty.
    pub missing: Vec<(String, String)>,
    pub missing_counts: BTreeMap<String, usize>,
    pub n_subjects: usize,
    pub cohort_excluded: Vec<String>,
    /// Bundles the comparison method cannot produce.
    pub comparison_excluded: Vec<String>,
}

impl ExclusionReport {
    pub fn is_reportable(&self, bundle: &str) -> bool {
        !self.cohort_excluded.iter().any(|b| b == bundle)
    }

    pub fn is_comparable(&self, bundle: &str) -> bool {
        self.is_reportable(bundle) && !self.comparison_excluded.iter().any(|b| b == bundle)
    }

    /// Flag every missing `(subject, bundle)` invalid in the reference masks.
    pub fn mark_missing_invalid(&self, refs: &mut BTreeMap<String, BundleMaskSet>) {
        for (subject, bundle) in &self.missing {
            if let Some(m) = refs.get_mut(subject) {
                if let Some(c) = m.channel_index(bundle) {
                    m.set_valid(c, false);
                }
            }
        }
    }
}

/// Find per-subject missing references, cohort-wide exclusions and bundles outside
/// the comparison method's catalog.
pub fn exclusion_filter(
    refs: &BTreeMap<String, BundleMaskSet>,
    bundles: &[String],
    comparison_catalog: &[String],
    opts: ExclusionOptions,
) -> ExclusionReport {
    let mut report = ExclusionReport {
        n_subjects: refs.len(),
        ..Default::default()
    };
    for bundle in bundles {
        let mut count = 0;
        for (subject, m) in refs {
            let present = m
                .channel_index(bundle)
                .is_some_and(|c| m.is_valid(c) && m.positive_count(c) > 0);
            if !present {
                report.missing.push((subject.clone(), bundle.clone()));
                count += 1;
            }
        }
        report.missing_counts.insert(bundle.clone(), count);
        if !refs.is_empty() && count as f64 / refs.len() as f64 > opts.cohort_fraction {
            report.cohort_excluded.push(bundle.clone());
        }
    }
    let comparable: BTreeSet<&String> = comparison_catalog.iter().collect();
    report.comparison_excluded = bundles
        .iter()
        .filter(|b| !comparable.contains(b))
        .cloned()
        .collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::VoxelGrid;
    use ndarray::Array4;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn set(ch: &[&str], data: Array4<f32>) -> BundleMaskSet {
        let (nx, ny, nz, _) = data.dim();
        let g = VoxelGrid::isotropic([nx, ny, nz], 1.0).unwrap();
        BundleMaskSet::new(g, names(ch), data, vec![true; ch.len()]).unwrap()
    }

    #[test]
    fn builtin_catalog_sizes() {
        let c = BundleCatalog::builtin();
        assert_eq!(c.expert_16.len(), 16);
        assert_eq!(c.tractseg_44.len(), 44);
        assert_eq!(c.merged_catalog_60().len(), 60);
        assert_eq!(c.expert_16[0], "CC_Body");
        assert!(c.tractseg_44.contains(&"CA".to_string()));
        assert!(c.tractseg_44.contains(&"ST_POSTC_right".to_string()));
        let comparable = c.comparable_bundles();
        assert_eq!(comparable.len(), 14);
        assert!(!comparable.contains(&"L_Pyramidal".to_string()));
    }

    #[test]
    fn catalog_json_round_trip() {
        let c = BundleCatalog::builtin();
        assert_eq!(BundleCatalog::from_json(&c.to_json()).unwrap(), c);
        let mut bad = c.clone();
        bad.tractseg_44[0] = "CC_Body".into();
        assert!(BundleCatalog::from_json(&bad.to_json()).is_err());
    }

    #[test]
    fn rule_validation() {
        assert!(parse_merge_rules(r#"[{"target":"A","sources":[]}]"#).is_err());
        assert!(parse_merge_rules(
            r#"[{"target":"A","sources":["x"]},{"target":"B","sources":["x"]}]"#
        )
        .is_err());
        assert!(
            parse_merge_rules(r#"{"merge_rules":[{"target":"A","sources":["x","y"]}]}"#).is_ok()
        );
        assert!(parse_merge_rules("not json").is_err());
    }

    #[test]
    fn cc_body_is_union_of_cc3_to_cc5() {
        let mut d = Array4::<f32>::zeros((4, 1, 1, 4));
        d[(0, 0, 0, 0)] = 1.0; // CC_3
        d[(1, 0, 0, 1)] = 1.0; // CC_4
        d[(1, 0, 0, 2)] = 1.0; // CC_5, overlaps CC_4
        d[(3, 0, 0, 3)] = 1.0; // pass-through
        let m = set(&["CC_3", "CC_4", "CC_5", "AF_left"], d);
        let rules = vec![MergeRule {
            target: "CC_Body".into(),
            sources: names(&["CC_3", "CC_4", "CC_5"]),
        }];
        let out = merge_tractseg_masks(&m, &rules).unwrap();
        assert_eq!(out.channels(), names(&["CC_Body", "AF_left"]));
        assert_eq!(out.positive_count(0), 2);
        assert_eq!(out.channel(1), m.channel(3));

        let missing = vec![MergeRule {
            target: "X".into(),
            sources: names(&["nope"]),
        }];
        let err = merge_tractseg_masks(&m, &missing).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn rename_keeps_values_and_merge_is_idempotent() {
        let d = Array4::from_shape_fn((3, 2, 1, 2), |(i, j, _, c)| ((i + j + c) % 2) as f32);
        let m = set(&["UF_left", "CST_left"], d);
        let rules = vec![MergeRule {
            target: "L_Uncinate".into(),
            sources: names(&["UF_left"]),
        }];
        let out = merge_tractseg_masks(&m, &rules).unwrap();
        assert_eq!(out.channel(0), m.channel(0));
        assert_eq!(merge_tractseg_masks(&out, &[]).unwrap(), out);
        let identity: Vec<MergeRule> = out
            .channels()
            .iter()
            .map(|c| MergeRule {
                target: c.clone(),
                sources: vec![c.clone()],
            })
            .collect();
        assert_eq!(merge_tractseg_masks(&out, &identity).unwrap(), out);
    }

    #[test]
    fn builtin_rules_apply_to_tractseg_style_input() {
        let c = BundleCatalog::builtin();
        let mut ch: Vec<String> = c
            .merge_rules
            .iter()
            .flat_map(|r| r.sources.clone())
            .collect();
        ch.extend(c.tractseg_44.iter().cloned());
        let g = VoxelGrid::isotropic([2, 2, 2], 1.0).unwrap();
        let m = BundleMaskSet::zeros(g, ch).unwrap();
        let out = merge_tractseg_masks(&m, &c.merge_rules).unwrap();
        assert_eq!(out.channel_index("CC_Body"), Some(0));
        assert_eq!(out.n_channels(), 14 + 44);
    }

    #[test]
    fn assemble_orders_expert_first_and_flags_empty_tractseg() {
        let c = BundleCatalog::builtin();
        let g = VoxelGrid::isotropic([3, 3, 2], 1.0).unwrap();
        let mut expert = BundleMaskSet::zeros(g, c.expert_16.clone()).unwrap();
        expert.set_valid(11, false);
        let mut ts = BundleMaskSet::zeros(g, c.tractseg_44.clone()).unwrap();
        for k in 0..44 {
            if c.tractseg_44[k] != "CA" {
                ts.channel_mut(k)[(1, 1, 1)] = 1.0;
            }
        }
        let out = assemble_60(&expert, &ts, &c).unwrap();
        assert_eq!(out.n_channels(), 60);
        assert_eq!(&out.channels()[..16], c.expert_16.as_slice());
        assert!(!out.is_valid(11));
        let ca = out.channel_index("CA").unwrap();
        assert!(!out.is_valid(ca));
        assert_eq!(out.valid().iter().filter(|v| !**v).count(), 2);
        let names: BTreeSet<&String> = out.channels().iter().collect();
        assert_eq!(names.len(), 60);

        let short = BundleMaskSet::zeros(g, c.expert_16[..15].to_vec()).unwrap();
        assert!(assemble_60(&short, &ts, &c).is_err());
    }

    #[test]
    fn exclusion_rules() {
        let g = VoxelGrid::isotropic([2, 1, 1], 1.0).unwrap();
        let bundles = names(&["R_ILF", "L_Pyramidal", "CC_Body"]);
        let mut refs = BTreeMap::new();
        for s in 0..56 {
            let mut m = BundleMaskSet::zeros(g, bundles.clone()).unwrap();
            for c in 0..3 {
                m.channel_mut(c)[(0, 0, 0)] = 1.0;
            }
            if s < 22 {
                m.set_valid(0, false);
            }
            refs.insert(format!("s{s:02}"), m);
        }
        let r = exclusion_filter(
            &refs,
            &bundles,
            &names(&["R_ILF", "CC_Body"]),
            ExclusionOptions::default(),
        );
        assert_eq!(r.cohort_excluded, names(&["R_ILF"]));
        assert_eq!(r.comparison_excluded, names(&["L_Pyramidal"]));
        assert_eq!(r.missing_counts["CC_Body"], 0);
        assert_eq!(r.missing.len(), 22);
        assert!(r.is_reportable("CC_Body") && r.is_comparable("CC_Body"));
        assert!(!r.is_comparable("L_Pyramidal"));
    }

    proptest! {
        #[test]
        fn merged_positives_equal_set_union(bits in proptest::collection::vec(0u8..8, 27)) {
            // each voxel's bits choose which of three sources are on
            let d = Array4::from_shape_fn((3, 3, 3, 3), |(i, j, k, c)| ((bits[i * 9 + j * 3 + k] >> c) & 1) as f32);
            let m = set(&["a", "b", "c"], d);
            let rules = vec![MergeRule { target: "u".into(), sources: names(&["a", "b", "c"]) }];
            let out = merge_tractseg_masks(&m, &rules).unwrap();
            let union = bits.iter().filter(|&&b| b != 0).count();
            prop_assert_eq!(out.positive_count(0), union);
        }
    }
}
