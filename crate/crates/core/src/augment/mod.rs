//! Data augmentation of accepted pairs.
//!
//! Two routes produce new formal statements from an accepted one: the goal
//! left before a prover's final tactic, and the contrapositive with respect
//! to each hypothesis. Only statements that compile are kept; the kept ones
//! get a natural-language side from the FL→NL role.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::lean::goal::{state_to_statement, GoalState};
use crate::lean::{CompileReport, LeanBridge};
use crate::llm::{self, Gateway, Role};
use crate::statement::{
    single_line, FlStatement, Generator, Lineage, NlStatement, NlStatus, Origin, ParallelStatement, TERMINATOR,
    THEOREM_NAME,
};
use crate::sync::map_bounded;
use crate::synthesis::parsed_of;

pub mod metrics;

pub use metrics::{bleu, levenshtein};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMethod {
    Proof,
    Contraposition,
}

impl AugmentMethod {
    pub fn origin(self) -> Origin {
        match self {
            AugmentMethod::Proof => Origin::ProofAug,
            AugmentMethod::Contraposition => Origin::ContraAug,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub source_fl_id: String,
    pub source_nl_id: String,
    pub method: AugmentMethod,
    /// Hypothesis the contrapositive was taken against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<String>,
    pub new_code: String,
    /// Levenshtein distance between the single-line forms of the new and
    /// the source statement.
    pub distance: usize,
    pub compiled: bool,
    pub selected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile: Option<CompileReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub proof: bool,
    pub contraposition: bool,
    /// Harvest the last state of a proof that did not close.
    pub use_incomplete_proofs: bool,
    pub workers: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            proof: true,
            contraposition: true,
            use_incomplete_proofs: true,
            workers: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentOutcome {
    /// Every candidate considered, ordered by source id then method.
    pub records: Vec<AugmentationRecord>,
    /// Dataset-bound pairs, ordered like `records`.
    pub pairs: Vec<ParallelStatement>,
    /// Selected records whose NL backfill failed.
    pub backfill_dropped: u64,
    /// Selected records whose code duplicated an earlier augmented statement.
    pub duplicates_dropped: u64,
}

impl AugmentOutcome {
    pub fn count(&self, origin: Origin) -> usize {
        self.pairs.iter().filter(|p| p.origin == origin).count()
    }
}

/// Index of the candidate to keep: the compiling one farthest from the
/// source, the earliest on ties. Candidates at distance 0 duplicate the
/// source and are never kept.
pub fn select_farthest(candidates: &[(bool, usize)]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, &(compiled, distance)) in candidates.iter().enumerate() {
        if !compiled || distance == 0 {
            continue;
        }
        if best.is_none_or(|(_, d)| distance > d) {
            best = Some((i, distance));
        }
    }
    best.map(|(i, _)| i)
}

fn aug_subject(nl_id: &str) -> String {
    format!("aug:{nl_id}")
}

pub struct Augmenter<'a> {
    gateway: &'a Gateway,
    lean: &'a LeanBridge,
    config: AugmentConfig,
}

impl<'a> Augmenter<'a> {
    pub fn new(gateway: &'a Gateway, lean: &'a LeanBridge, config: AugmentConfig) -> Self {
        Self { gateway, lean, config }
    }

    fn candidate(
        &self,
        ps: &ParallelStatement,
        method: AugmentMethod,
        hypothesis: Option<String>,
        state: &GoalState,
    ) -> Option<AugmentationRecord> {
        let code = state_to_statement(state, THEOREM_NAME).ok()?;
        let report = self.lean.compile_for(Some(&aug_subject(&ps.nl.id)), &code).ok()?;
        let distance = levenshtein(&single_line(&code), &single_line(&ps.fl.code));
        Some(AugmentationRecord {
            source_fl_id: ps.fl.id.clone(),
            source_nl_id: ps.nl.id.clone(),
            method,
            hypothesis,
            new_code: code,
            distance,
            compiled: report.success,
            selected: false,
            compile: Some(report),
        })
    }

    /// Asks the prover for a whole proof, replays it, and turns the goal
    /// left before the final step into a statement.
    pub fn augment_via_proof(&self, ps: &ParallelStatement) -> Vec<AugmentationRecord> {
        let Some(open) = open_statement(&ps.fl.code) else {
            return Vec::new();
        };
        let open = format!("{open} := by");
        let prompt = match self.gateway.render(Role::Prover, &[("formal_statement", &open)]) {
            Ok(p) => p,
            Err(_) => return Vec::new(),
        };
        let Ok(completion) = self
            .gateway
            .complete(Some(&aug_subject(&ps.nl.id)), Role::Prover, &prompt, None)
        else {
            return Vec::new();
        };
        let tactics = llm::extract_proof_tactics(&completion);
        if tactics.is_empty() {
            return Vec::new();
        }
        let Ok(trace) = self.lean.run_tactics(&ps.fl.code, &tactics) else {
            return Vec::new();
        };
        if !trace.completed && !self.config.use_incomplete_proofs {
            return Vec::new();
        }
        let Some(state) = trace.last_state() else {
            return Vec::new();
        };
        let mut rec = match self.candidate(ps, AugmentMethod::Proof, None, state) {
            Some(r) => r,
            None => return Vec::new(),
        };
        rec.selected = select_farthest(&[(rec.compiled, rec.distance)]).is_some();
        vec![rec]
    }

    /// One contrapositive per hypothesis; at most one is selected.
    pub fn augment_via_contraposition(&self, ps: &ParallelStatement) -> Vec<AugmentationRecord> {
        let Some(parsed) = parsed_of(&ps.fl) else {
            return Vec::new();
        };
        let mut records: Vec<AugmentationRecord> = parsed
            .hypothesis_names()
            .into_iter()
            .filter_map(|h| {
                let state = self.lean.contrapose(&ps.fl.code, h).ok()?;
                self.candidate(ps, AugmentMethod::Contraposition, Some(h.to_string()), &state)
            })
            .collect();
        let scores: Vec<_> = records.iter().map(|r| (r.compiled, r.distance)).collect();
        if let Some(i) = select_farthest(&scores) {
            records[i].selected = true;
        }
        records
    }

    /// Natural-language side for a selected record.
    pub fn backfill_nl(
        &self,
        record: &AugmentationRecord,
        source: &ParallelStatement,
        round: u32,
    ) -> Result<ParallelStatement, AugmentError> {
        if !record.selected {
            return Err(AugmentError::NotSelected);
        }
        let prompt = self
            .gateway
            .render(Role::FlToNl, &[("formal_statement", &record.new_code)])?;
        let completion = self
            .gateway
            .complete(Some(&aug_subject(&source.nl.id)), Role::FlToNl, &prompt, None)
            .map_err(|e| AugmentError::Backfill(e.to_string()))?;
        let text = llm::extract_delimited(&completion)?;
        let nl = NlStatement::new(&text, source.nl.concepts.clone(), round)
            .map_err(|e| AugmentError::Backfill(e.to_string()))?
            .with_status(NlStatus::Accepted);
        let mut fl = FlStatement::new(&nl.id, &record.new_code, Generator::Augmentation, round);
        fl.compile = record.compile.clone();
        fl.parsed = crate::lean::parse::parse_statement(&record.new_code).ok();
        let lineage = Lineage {
            source_fl_id: record.source_fl_id.clone(),
            source_nl_id: record.source_nl_id.clone(),
        };
        ParallelStatement::new(nl, fl, record.method.origin(), None, round, Some(lineage))
            .map_err(|e| AugmentError::Backfill(e.to_string()))
    }

    /// Augments every accepted pair with the enabled methods and backfills
    /// the selected records. Output order follows the source NL id.
    pub fn run(&self, accepted: &[ParallelStatement], round: u32) -> AugmentOutcome {
        let mut sources: Vec<&ParallelStatement> = accepted.iter().filter(|p| p.origin == Origin::Synthetic).collect();
        sources.sort_by(|a, b| a.nl.id.cmp(&b.nl.id));
        let per_source = map_bounded(&sources, self.config.workers, |_, ps| {
            let mut recs = Vec::new();
            if self.config.proof {
                recs.extend(self.augment_via_proof(ps));
            }
            if self.config.contraposition {
                recs.extend(self.augment_via_contraposition(ps));
            }
            let pairs: Vec<Result<ParallelStatement, AugmentError>> = recs
                .iter()
                .filter(|r| r.selected)
                .map(|r| self.backfill_nl(r, ps, round))
                .collect();
            (recs, pairs)
        });
        let mut out = AugmentOutcome::default();
        let mut seen_codes: BTreeSet<String> = accepted.iter().map(|p| single_line(&p.fl.code)).collect();
        let mut seen_nl = BTreeSet::new();
        for (recs, pairs) in per_source {
            out.records.extend(recs);
            for pair in pairs {
                match pair {
                    Ok(p) => {
                        if !seen_codes.insert(single_line(&p.fl.code)) || !seen_nl.insert(p.nl.id.clone()) {
                            out.duplicates_dropped += 1;
                            continue;
                        }
                        out.pairs.push(p);
                    }
                    Err(e) => {
                        tracing::warn!(error = %e, "augmented statement dropped during NL backfill");
                        out.backfill_dropped += 1;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("record was not selected")]
    NotSelected,
    #[error(transparent)]
    Render(#[from] llm::RenderError),
    #[error(transparent)]
    Extract(#[from] llm::ExtractError),
    #[error("backfill failed: {0}")]
    Backfill(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityEntry {
    pub records: usize,
    pub mean_bleu: f64,
}

/// Mean BLEU between each selected record and its source, per method.
/// Methods without selected records are absent.
pub fn diversity_report(
    records: &[AugmentationRecord],
    sources: &HashMap<String, FlStatement>,
) -> BTreeMap<AugmentMethod, DiversityEntry> {
    let mut sums: BTreeMap<AugmentMethod, (usize, f64)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.selected) {
        let Some(src) = sources.get(&r.source_fl_id) else {
            continue;
        };
        let score = bleu(&single_line(&r.new_code), &single_line(&src.code));
        let e = sums.entry(r.method).or_default();
        e.0 += 1;
        e.1 += score;
    }
    sums.into_iter()
        .map(|(m, (n, s))| {
            (
                m,
                DiversityEntry {
                    records: n,
                    mean_bleu: s / n as f64,
                },
            )
        })
        .collect()
}

/// The statement handed to the prover: the code with its `sorry` removed.
pub fn open_statement(code: &str) -> Option<&str> {
    code.trim_end().strip_suffix(TERMINATOR).map(|head| head.trim_end())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lean::parse::format_multiline;
    use crate::llm::{ScriptedBackend, ScriptedConfig};
    use std::sync::Arc;

    fn pair(code: &str) -> ParallelStatement {
        let lean = LeanBridge::mock();
        let nl = NlStatement::new("some statement", ["c-1".into(), "c-2".into()], 1)
            .unwrap()
            .with_status(NlStatus::Accepted);
        let parsed = lean.parse(code).unwrap();
        let layout = format_multiline(&parsed);
        let mut fl = FlStatement::new(&nl.id, &layout, Generator::Student, 1);
        fl.compile = Some(lean.compile(&layout).unwrap());
        fl.parsed = Some(parsed);
        ParallelStatement::new(nl, fl, Origin::Synthetic, Some(crate::AlignmentRating::Good), 1, None).unwrap()
    }

    fn reliable() -> Gateway {
        Gateway::single(Arc::new(ScriptedBackend::new(ScriptedConfig {
            prover_fail_rate: 0.0,
            ..Default::default()
        })))
    }

    #[test]
    fn farthest_selection_with_ties() {
        assert_eq!(select_farthest(&[(true, 12), (true, 40), (true, 40)]), Some(1));
        assert_eq!(select_farthest(&[(true, 12), (false, 99), (true, 13)]), Some(2));
        assert_eq!(select_farthest(&[(true, 0)]), None);
        assert_eq!(select_farthest(&[]), None);
    }

    #[test]
    fn contraposition_without_hypotheses_is_empty() {
        let gw = reliable();
        let lean = LeanBridge::mock();
        let aug = Augmenter::new(&gw, &lean, AugmentConfig::default());
        let ps = pair("theorem tm_name : ∀ m : ℕ, m + 3 ≥ 3 := by sorry");
        assert!(aug.augment_via_contraposition(&ps).is_empty());
    }

    #[test]
    fn contraposition_selects_one_compiling_candidate() {
        let gw = reliable();
        let lean = LeanBridge::mock();
        let aug = Augmenter::new(&gw, &lean, AugmentConfig::default());
        let ps = pair("theorem tm_name (x y : ℝ) (hx : x > 3) (hxy : y > x) : y > 3 := by sorry");
        let recs = aug.augment_via_contraposition(&ps);
        assert_eq!(recs.len(), 2);
        assert_eq!(recs.iter().filter(|r| r.selected).count(), 1);
        let best = recs.iter().filter(|r| r.compiled).map(|r| r.distance).max().unwrap();
        let chosen = recs.iter().find(|r| r.selected).unwrap();
        assert_eq!(chosen.distance, best);
        assert!(chosen.new_code.contains("y ≤ 3"), "{}", chosen.new_code);
    }

    #[test]
    fn proof_route_harvests_the_last_state() {
        let gw = reliable();
        let lean = LeanBridge::mock();
        let aug = Augmenter::new(&gw, &lean, AugmentConfig::default());
        let ps = pair("theorem tm_name (n : ℕ) (h : n > 7) : n ≥ 7 := by sorry");
        let recs = aug.augment_via_proof(&ps);
        assert_eq!(recs.len(), 1);
        assert!(recs[0].selected);
        assert_eq!(
            recs[0].new_code,
            "theorem tm_name (n : ℕ) (h : n > 7) (h1 : n ≥ 7 + 1) : n ≥ 7 := by sorry"
        );
        // A proof closed by its first tactic leaves nothing to harvest.
        let ps = pair("theorem tm_name {G : Type*} [Group G] (a b : G) (h : a ^ 2 * b = b * a ^ 2) : b * a ^ 2 = a ^ 2 * b := by sorry");
        assert!(aug.augment_via_proof(&ps).is_empty());
    }

    #[test]
    fn backfill_carries_lineage() {
        let gw = reliable();
        let lean = LeanBridge::mock();
        let aug = Augmenter::new(&gw, &lean, AugmentConfig::default());
        let ps = pair("theorem tm_name (A B : Set ℕ) (h : A ⊆ B) (hk : 4 ∈ A) : 4 ∈ B := by sorry");
        let out = aug.run(std::slice::from_ref(&ps), 1);
        assert!(!out.pairs.is_empty());
        for p in &out.pairs {
            assert!(p.fl.compiled());
            assert_eq!(p.fl.generator, Generator::Augmentation);
            assert_eq!(p.lineage.as_ref().unwrap().source_fl_id, ps.fl.id);
            assert_eq!(p.round, 1);
        }
        assert_eq!(
            out.count(Origin::ProofAug) + out.count(Origin::ContraAug),
            out.pairs.len()
        );
    }

    #[test]
    fn diversity_of_identity_is_one() {
        let ps = pair("theorem tm_name (n : ℕ) (h : n > 7) : n ≥ 7 := by sorry");
        let rec = AugmentationRecord {
            source_fl_id: ps.fl.id.clone(),
            source_nl_id: ps.nl.id.clone(),
            method: AugmentMethod::Proof,
            hypothesis: None,
            new_code: ps.fl.code.clone(),
            distance: 0,
            compiled: true,
            selected: true,
            compile: None,
        };
        let sources = HashMap::from([(ps.fl.id.clone(), ps.fl.clone())]);
        assert!(diversity_report(&[], &sources).is_empty());
        let report = diversity_report(&[rec], &sources);
        assert_eq!(report[&AugmentMethod::Proof].mean_bleu, 1.0);
        assert!(!report.contains_key(&AugmentMethod::Contraposition));
    }
}
