//! Expert-iteration rounds: generation, synthesis and augmentation per
//! round, with every round persisted under `runs/<run-id>/round-<R>/`.
//!
//! A round directory holds:
//!
//! | file | content |
//! |---|---|
//! | `inputs.jsonl` | carryover from the previous round, then the new statements |
//! | `accepted.jsonl` | synthetic pairs |
//! | `augmented.jsonl` | proof- and contraposition-augmented pairs |
//! | `augment_records.jsonl` | every augmentation candidate considered |
//! | `carryover.jsonl` | statements handed to the next round |
//! | `notes.jsonl` | why each carried-over or rejected statement left the funnel |
//! | `audit.jsonl` | model and toolchain calls made during the round |
//! | `manifest.json` | counts, input hash and output file hashes; written last |
//!
//! Persisted compile reports carry no timings, so a round re-run with the
//! same inputs reproduces every data file and the manifest byte for byte.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{AugmentConfig, AugmentOutcome, Augmenter};
use crate::concepts::ConceptRepository;
use crate::hash::{digest_parts, sha256_hex, stable_u64};
use crate::jsonl::{self, JsonlError};
use crate::lean::LeanBridge;
use crate::llm::{Gateway, Role};
use crate::statement::{FlStatement, Generator, NlStatement, Origin, ParallelStatement};
use crate::synthesis::{GenerationReport, StageCounts, SynthesisConfig, Synthesizer, DEFAULT_ROUND_QUOTA};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INPUTS_FILE: &str = "inputs.jsonl";
pub const ACCEPTED_FILE: &str = "accepted.jsonl";
pub const AUGMENTED_FILE: &str = "augmented.jsonl";
pub const AUGMENT_RECORDS_FILE: &str = "augment_records.jsonl";
pub const CARRYOVER_FILE: &str = "carryover.jsonl";
pub const NOTES_FILE: &str = "notes.jsonl";
pub const AUDIT_FILE: &str = "audit.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum IterationError {
    #[error(transparent)]
    Store(#[from] JsonlError),
    #[error("cannot read {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest {path}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("round {round} already exists with different inputs (have {existing}, got {requested})")]
    InputsChanged {
        round: u32,
        existing: String,
        requested: String,
    },
    #[error("round {0} is not the next round (expected {1})")]
    OutOfOrder(u32, u32),
    #[error("duplicate manifest for round {0}")]
    DuplicateRound(u32),
    #[error("no data for round {0}")]
    MissingRound(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    pub round: u32,
    pub new_nl_quota: usize,
    pub seed: u64,
    /// Expected backend per role. Empty means "whatever the gateway has";
    /// otherwise every listed role must be bound to the named backend.
    #[serde(default)]
    pub bindings: BTreeMap<Role, String>,
}

impl RoundConfig {
    pub fn new(round: u32, seed: u64) -> Self {
        Self {
            round,
            new_nl_quota: DEFAULT_ROUND_QUOTA,
            seed,
            bindings: BTreeMap::new(),
        }
    }

    pub fn with_quota(mut self, quota: usize) -> Self {
        self.new_nl_quota = quota;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundInputs {
    pub new: u64,
    pub carryover: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub lines: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundManifest {
    pub round: u32,
    pub seed: u64,
    pub quota: u64,
    pub input_hash: String,
    pub toolchain_version: String,
    pub bindings: BTreeMap<Role, String>,
    pub inputs: RoundInputs,
    pub generation: GenerationReport,
    pub stage_counts: StageCounts,
    pub accepted_synthetic: u64,
    pub student_accepted: u64,
    pub teacher_accepted: u64,
    pub proof_aug: u64,
    pub contra_aug: u64,
    pub carryover_out: u64,
    pub rejected: u64,
    pub student_ratio: f64,
    pub files: BTreeMap<String, FileDigest>,
}

impl RoundManifest {
    /// new + carryover_in = accepted + carryover_out + rejected.
    pub fn conserves(&self) -> bool {
        self.inputs.new + self.inputs.carryover == self.accepted_synthetic + self.carryover_out + self.rejected
    }

    pub fn count(&self, origin: Origin) -> u64 {
        match origin {
            Origin::Synthetic => self.accepted_synthetic,
            Origin::ProofAug => self.proof_aug,
            Origin::ContraAug => self.contra_aug,
        }
    }

    pub fn total(&self) -> u64 {
        self.accepted_synthetic + self.proof_aug + self.contra_aug
    }
}

pub fn student_ratio(student: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        student as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub rounds: u64,
    pub synthetic: u64,
    pub proof_aug: u64,
    pub contra_aug: u64,
    pub total: u64,
}

/// Per-origin totals over manifests of distinct rounds.
pub fn aggregate_stats(manifests: &[RoundManifest]) -> Result<RoundStats, IterationError> {
    let mut seen = std::collections::BTreeSet::new();
    let mut stats = RoundStats::default();
    for m in manifests {
        if !seen.insert(m.round) {
            return Err(IterationError::DuplicateRound(m.round));
        }
        stats.rounds += 1;
        stats.synthetic += m.accepted_synthetic;
        stats.proof_aug += m.proof_aug;
        stats.contra_aug += m.contra_aug;
    }
    stats.total = stats.synthetic + stats.proof_aug + stats.contra_aug;
    Ok(stats)
}

/// Plot-ready series: one entry per round, in round order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsSeries {
    pub round: Vec<u32>,
    pub synthetic: Vec<u64>,
    pub proof_aug: Vec<u64>,
    pub contra_aug: Vec<u64>,
    pub student_ratio: Vec<f64>,
}

pub fn stats_series(manifests: &[RoundManifest]) -> StatsSeries {
    let mut sorted: Vec<&RoundManifest> = manifests.iter().collect();
    sorted.sort_by_key(|m| m.round);
    let mut s = StatsSeries::default();
    for m in sorted {
        s.round.push(m.round);
        s.synthetic.push(m.accepted_synthetic);
        s.proof_aug.push(m.proof_aug);
        s.contra_aug.push(m.contra_aug);
        s.student_ratio.push(m.student_ratio);
    }
    s
}

pub fn stats_csv(manifests: &[RoundManifest]) -> String {
    let s = stats_series(manifests);
    let mut out = String::from("round,synthetic,proof_aug,contra_aug,total,student_ratio\n");
    for i in 0..s.round.len() {
        let total = s.synthetic[i] + s.proof_aug[i] + s.contra_aug[i];
        out.push_str(&format!(
            "{},{},{},{},{},{:.4}\n",
            s.round[i], s.synthetic[i], s.proof_aug[i], s.contra_aug[i], total, s.student_ratio[i]
        ));
    }
    out
}

pub fn round_dir(run_dir: &Path, round: u32) -> PathBuf {
    run_dir.join(format!("round-{round}"))
}

pub fn read_manifest(path: &Path) -> Result<RoundManifest, IterationError> {
    let text = std::fs::read_to_string(path).map_err(|source| IterationError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| IterationError::Manifest {
        path: path.to_path_buf(),
        source,
    })
}

/// Every completed round of a run, in round order.
pub fn load_manifests(run_dir: &Path) -> Result<Vec<RoundManifest>, IterationError> {
    let entries = std::fs::read_dir(run_dir).map_err(|source| IterationError::Io {
        path: run_dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in entries.flatten() {
        let is_round = entry.file_name().to_str().is_some_and(|n| n.starts_with("round-"));
        let manifest = entry.path().join(MANIFEST_FILE);
        if is_round && manifest.exists() {
            out.push(read_manifest(&manifest)?);
        }
    }
    out.sort_by_key(|m| m.round);
    Ok(out)
}

/// Carryover written by a completed round.
pub fn load_carryover(run_dir: &Path, round: u32) -> Result<Vec<NlStatement>, IterationError> {
    let dir = round_dir(run_dir, round);
    if !dir.join(MANIFEST_FILE).exists() {
        return Err(IterationError::MissingRound(round));
    }
    Ok(jsonl::read(&dir.join(CARRYOVER_FILE))?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub round: u32,
    pub nl_id: String,
    pub fl_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateGroup {
    pub text: String,
    pub occurrences: Vec<Occurrence>,
}

/// Accepted synthetic pairs whose NL text repeats across (or within) rounds.
/// Nothing is removed from the stores; this only reports.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DuplicateReport {
    pub pairs: u64,
    pub distinct_texts: u64,
    pub groups: Vec<DuplicateGroup>,
}

impl DuplicateReport {
    /// Pairs that would disappear if every group kept only its first entry.
    pub fn redundant(&self) -> u64 {
        self.groups.iter().map(|g| g.occurrences.len() as u64 - 1).sum()
    }
}

/// Texts compare equal after trimming and collapsing internal whitespace.
pub fn duplicate_report(run_dir: &Path, manifests: &[RoundManifest]) -> Result<DuplicateReport, IterationError> {
    let mut by_text: BTreeMap<String, Vec<Occurrence>> = BTreeMap::new();
    let mut pairs = 0;
    for m in manifests {
        let accepted: Vec<ParallelStatement> = jsonl::read(&round_dir(run_dir, m.round).join(ACCEPTED_FILE))?;
        for p in accepted {
            pairs += 1;
            let key = p.nl.text.split_whitespace().collect::<Vec<_>>().join(" ");
            by_text.entry(key).or_default().push(Occurrence {
                round: m.round,
                nl_id: p.nl.id,
                fl_id: p.fl.id,
            });
        }
    }
    let distinct_texts = by_text.len() as u64;
    let groups = by_text
        .into_iter()
        .filter(|(_, occ)| occ.len() > 1)
        .map(|(text, occurrences)| DuplicateGroup { text, occurrences })
        .collect();
    Ok(DuplicateReport {
        pairs,
        distinct_texts,
        groups,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    #[default]
    SftPairs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub instruction: String,
    pub output: String,
}

/// Writes every dataset pair (synthetic and augmented) of the given rounds
/// as translation training examples; returns the record count.
pub fn export_training_data(
    run_dir: &Path,
    rounds: RangeInclusive<u32>,
    out: &Path,
    format: ExportFormat,
) -> Result<usize, IterationError> {
    let ExportFormat::SftPairs = format;
    let mut records = Vec::new();
    for round in rounds {
        let dir = round_dir(run_dir, round);
        if !dir.join(MANIFEST_FILE).exists() {
            return Err(IterationError::MissingRound(round));
        }
        for file in [ACCEPTED_FILE, AUGMENTED_FILE] {
            let pairs: Vec<ParallelStatement> = jsonl::read(&dir.join(file))?;
            for p in pairs {
                let instruction = crate::llm::render(Role::Translator, &[("informal_statement", &p.nl.text)])
                    .map_err(|e| IterationError::Config(e.to_string()))?;
                records.push(SftRecord {
                    instruction,
                    output: p.fl.code,
                });
            }
        }
    }
    jsonl::write(out, &records)?;
    Ok(records.len())
}

fn scrub_fl(fl: &mut FlStatement) {
    for report in [&mut fl.compile, &mut fl.prior_compile].into_iter().flatten() {
        report.elapsed_ms = 0;
    }
}

fn scrub_pairs(pairs: &mut [ParallelStatement]) {
    for p in pairs {
        scrub_fl(&mut p.fl);
    }
}

fn scrub_augment(outcome: &mut AugmentOutcome) {
    scrub_pairs(&mut outcome.pairs);
    for r in &mut outcome.records {
        if let Some(c) = &mut r.compile {
            c.elapsed_ms = 0;
        }
    }
}

/// Runs rounds of one run against one gateway and toolchain.
pub struct IterationRunner<'a> {
    gateway: &'a Gateway,
    lean: &'a LeanBridge,
    repo: &'a ConceptRepository,
    run_dir: PathBuf,
    toolchain_version: String,
    pub synthesis: SynthesisConfig,
    pub augment: AugmentConfig,
}

impl<'a> IterationRunner<'a> {
    pub fn new(
        gateway: &'a Gateway,
        lean: &'a LeanBridge,
        repo: &'a ConceptRepository,
        run_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            gateway,
            lean,
            repo,
            run_dir: run_dir.into(),
            toolchain_version: lean.toolchain_name().to_string(),
            synthesis: SynthesisConfig::default(),
            augment: AugmentConfig::default(),
        }
    }

    pub fn with_toolchain_version(mut self, version: &str) -> Self {
        self.toolchain_version = version.to_string();
        self
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    fn bindings(&self, cfg: &RoundConfig) -> Result<BTreeMap<Role, String>, IterationError> {
        let mut out = BTreeMap::new();
        for role in Role::ALL {
            if let Some(name) = self.gateway.backend_name(role) {
                out.insert(role, name.to_string());
            }
        }
        for (role, want) in &cfg.bindings {
            match out.get(role) {
                Some(have) if have == want => {}
                have => {
                    return Err(IterationError::Config(format!(
                        "role {role} expected backend `{want}`, gateway has {have:?}"
                    )))
                }
            }
        }
        Ok(out)
    }

    fn input_hash(&self, cfg: &RoundConfig, carryover: &[NlStatement], bindings: &BTreeMap<Role, String>) -> String {
        let carry = jsonl::to_string(carryover).unwrap_or_default();
        let bind = serde_json::to_string(bindings).unwrap_or_default();
        digest_parts(&[
            &cfg.round.to_le_bytes(),
            &(cfg.new_nl_quota as u64).to_le_bytes(),
            &cfg.seed.to_le_bytes(),
            self.repo.content_hash().as_bytes(),
            self.toolchain_version.as_bytes(),
            bind.as_bytes(),
            carry.as_bytes(),
        ])
    }

    /// Runs one round, or returns the stored manifest when the round was
    /// already completed with identical inputs.
    pub fn run_iteration(
        &self,
        cfg: &RoundConfig,
        prev_carryover: &[NlStatement],
    ) -> Result<RoundManifest, IterationError> {
        let bindings = self.bindings(cfg)?;
        let input_hash = self.input_hash(cfg, prev_carryover, &bindings);
        let dir = round_dir(&self.run_dir, cfg.round);
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            let existing = read_manifest(&manifest_path)?;
            if existing.input_hash != input_hash {
                return Err(IterationError::InputsChanged {
                    round: cfg.round,
                    existing: existing.input_hash,
                    requested: input_hash,
                });
            }
            tracing::info!(round = cfg.round, "round already complete; reusing manifest");
            return Ok(existing);
        }
        let audit_mark = self.gateway.audit().len();

        let synth = Synthesizer::new(self.gateway, self.lean, self.synthesis.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(stable_u64(&[
            b"round-rng",
            &cfg.seed.to_le_bytes(),
            &cfg.round.to_le_bytes(),
        ]));
        let (new, generation) = synth.generate_nl_batch(self.repo, cfg.new_nl_quota, cfg.round, &mut rng);
        tracing::info!(
            round = cfg.round,
            stage = "generate",
            produced = generation.produced,
            dropped = generation.dropped
        );
        let mut inputs: Vec<NlStatement> = prev_carryover.to_vec();
        inputs.extend(new.iter().cloned());

        let mut outcome = synth.run_round(&inputs, cfg.round);
        tracing::info!(
            round = cfg.round,
            stage = "synthesize",
            accepted = outcome.accepted.len(),
            carryover = outcome.carryover.len(),
            rejected = outcome.rejected_count
        );
        let mut augmented = if outcome.accepted.is_empty() {
            AugmentOutcome::default()
        } else {
            Augmenter::new(self.gateway, self.lean, self.augment.clone()).run(&outcome.accepted, cfg.round)
        };
        tracing::info!(
            round = cfg.round,
            stage = "augment",
            proof_aug = augmented.count(Origin::ProofAug),
            contra_aug = augmented.count(Origin::ContraAug)
        );
        scrub_pairs(&mut outcome.accepted);
        scrub_augment(&mut augmented);

        let student = outcome
            .accepted
            .iter()
            .filter(|p| p.fl.generator == Generator::Student)
            .count() as u64;
        let accepted = outcome.accepted.len() as u64;

        let mut files = BTreeMap::new();
        let mut put = |name: &str, body: String| -> Result<(), IterationError> {
            jsonl::write_atomic(&dir.join(name), body.as_bytes())?;
            files.insert(
                name.to_string(),
                FileDigest {
                    lines: body.lines().count(),
                    sha256: sha256_hex(body.as_bytes()),
                },
            );
            Ok(())
        };
        put(INPUTS_FILE, jsonl::to_string(&inputs)?)?;
        put(ACCEPTED_FILE, jsonl::to_string(&outcome.accepted)?)?;
        put(AUGMENTED_FILE, jsonl::to_string(&augmented.pairs)?)?;
        put(AUGMENT_RECORDS_FILE, jsonl::to_string(&augmented.records)?)?;
        put(CARRYOVER_FILE, jsonl::to_string(&outcome.carryover)?)?;
        put(NOTES_FILE, jsonl::to_string(&outcome.notes)?)?;
        // Audit entries carry latencies, so they stay out of the manifest.
        let audit: Vec<_> = self.gateway.audit().entries().into_iter().skip(audit_mark).collect();
        jsonl::write(&dir.join(AUDIT_FILE), &audit)?;

        let manifest = RoundManifest {
            round: cfg.round,
            seed: cfg.seed,
            quota: cfg.new_nl_quota as u64,
            input_hash,
            toolchain_version: self.toolchain_version.clone(),
            bindings,
            inputs: RoundInputs {
                new: new.len() as u64,
                carryover: prev_carryover.len() as u64,
            },
            generation,
            stage_counts: outcome.stage_counts,
            accepted_synthetic: accepted,
            student_accepted: student,
            teacher_accepted: accepted - student,
            proof_aug: augmented.count(Origin::ProofAug) as u64,
            contra_aug: augmented.count(Origin::ContraAug) as u64,
            carryover_out: outcome.carryover.len() as u64,
            rejected: outcome.rejected_count,
            student_ratio: student_ratio(student, accepted),
            files,
        };
        debug_assert!(manifest.conserves());
        let mut body = serde_json::to_string_pretty(&manifest).map_err(JsonlError::from)?;
        body.push('\n');
        jsonl::write_atomic(&manifest_path, body.as_bytes())?;
        Ok(manifest)
    }

    /// The next round number and the carryover it should start from.
    pub fn resume_point(&self) -> Result<(u32, Vec<NlStatement>), IterationError> {
        let manifests = load_manifests(&self.run_dir).or_else(|e| match e {
            IterationError::Io { .. } if !self.run_dir.exists() => Ok(Vec::new()),
            e => Err(e),
        })?;
        match manifests.last() {
            None => Ok((1, Vec::new())),
            Some(last) => Ok((last.round + 1, load_carryover(&self.run_dir, last.round)?)),
        }
    }

    /// Runs `rounds` consecutive rounds starting at `first`, feeding each
    /// round's carryover into the next. `between` is called after every
    /// round but the last and may stop the loop by returning `false`.
    pub fn run_rounds(
        &self,
        first: u32,
        rounds: u32,
        quota: usize,
        seed: u64,
        carryover: Vec<NlStatement>,
        mut between: impl FnMut(&RoundManifest) -> bool,
    ) -> Result<Vec<RoundManifest>, IterationError> {
        if first > 1 && !round_dir(&self.run_dir, first - 1).join(MANIFEST_FILE).exists() {
            return Err(IterationError::OutOfOrder(first, 1));
        }
        let mut carry = carryover;
        let mut out = Vec::new();
        for round in first..first + rounds {
            let cfg = RoundConfig::new(round, seed).with_quota(quota);
            let manifest = self.run_iteration(&cfg, &carry)?;
            carry = load_carryover(&self.run_dir, round)?;
            let last = round + 1 == first + rounds;
            out.push(manifest);
            if !last && !between(out.last().expect("just pushed")) {
                break;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ScriptedBackend, ScriptedConfig};
    use std::sync::Arc;

    fn manifest(round: u32, s: u64, p: u64, c: u64) -> RoundManifest {
        RoundManifest {
            round,
            seed: 0,
            quota: 0,
            input_hash: String::new(),
            toolchain_version: String::new(),
            bindings: BTreeMap::new(),
            inputs: RoundInputs::default(),
            generation: GenerationReport::default(),
            stage_counts: StageCounts::default(),
            accepted_synthetic: s,
            student_accepted: 0,
            teacher_accepted: s,
            proof_aug: p,
            contra_aug: c,
            carryover_out: 0,
            rejected: 0,
            student_ratio: 0.0,
            files: BTreeMap::new(),
        }
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_stats(&[]).unwrap(), RoundStats::default());
        let s = aggregate_stats(&[manifest(1, 5, 2, 3), manifest(2, 1, 0, 1)]).unwrap();
        assert_eq!((s.synthetic, s.proof_aug, s.contra_aug, s.total), (6, 2, 4, 12));
        assert!(matches!(
            aggregate_stats(&[manifest(1, 1, 1, 1), manifest(1, 1, 1, 1)]),
            Err(IterationError::DuplicateRound(1))
        ));
    }

    #[test]
    fn ratio_is_zero_without_accepted() {
        assert_eq!(student_ratio(0, 0), 0.0);
        assert_eq!(student_ratio(1, 4), 0.25);
    }

    #[test]
    fn two_rounds_reconcile_with_files() {
        let tmp = tempfile::tempdir().unwrap();
        let gw = Gateway::single(Arc::new(ScriptedBackend::new(ScriptedConfig::default())));
        let lean = LeanBridge::mock();
        let repo = ConceptRepository::bundled();
        let runner = IterationRunner::new(&gw, &lean, &repo, tmp.path().join("r"));
        let ms = runner.run_rounds(1, 2, 12, 42, Vec::new(), |_| true).unwrap();
        assert_eq!(ms.len(), 2);
        for m in &ms {
            assert!(m.conserves());
            let dir = round_dir(runner.run_dir(), m.round);
            assert_eq!(
                jsonl::count_lines(&dir.join(ACCEPTED_FILE)).unwrap() as u64,
                m.accepted_synthetic
            );
            assert_eq!(
                jsonl::count_lines(&dir.join(CARRYOVER_FILE)).unwrap() as u64,
                m.carryover_out
            );
            assert_eq!(m.student_accepted + m.teacher_accepted, m.accepted_synthetic);
        }
        assert_eq!(ms[1].inputs.carryover, ms[0].carryover_out);

        // Same inputs: the stored manifest is reused; changed inputs are refused.
        let again = runner
            .run_iteration(&RoundConfig::new(1, 42).with_quota(12), &[])
            .unwrap();
        assert_eq!(again, ms[0]);
        assert!(matches!(
            runner.run_iteration(&RoundConfig::new(1, 43).with_quota(12), &[]),
            Err(IterationError::InputsChanged { .. })
        ));

        let out = tmp.path().join("sft.jsonl");
        let n = export_training_data(runner.run_dir(), 1..=2, &out, ExportFormat::SftPairs).unwrap();
        assert_eq!(n as u64, aggregate_stats(&ms).unwrap().total);
        assert!(matches!(
            export_training_data(runner.run_dir(), 1..=3, &out, ExportFormat::SftPairs),
            Err(IterationError::MissingRound(3))
        ));
        assert_eq!(runner.resume_point().unwrap().0, 3);

        let single = duplicate_report(runner.run_dir(), &ms[..1]).unwrap();
        assert_eq!(single.pairs, ms[0].accepted_synthetic);
        // Listing a round twice makes every one of its texts a duplicate.
        let doubled = duplicate_report(runner.run_dir(), &[ms[0].clone(), ms[0].clone()]).unwrap();
        assert_eq!(doubled.distinct_texts, single.distinct_texts);
        assert_eq!(doubled.redundant(), single.pairs + single.redundant());
    }

    #[test]
    fn zero_quota_round_is_degenerate() {
        let tmp = tempfile::tempdir().unwrap();
        let gw = Gateway::single(Arc::new(ScriptedBackend::default()));
        let lean = LeanBridge::mock();
        let repo = ConceptRepository::bundled();
        let runner = IterationRunner::new(&gw, &lean, &repo, tmp.path());
        let m = runner
            .run_iteration(&RoundConfig::new(1, 42).with_quota(0), &[])
            .unwrap();
        assert_eq!((m.accepted_synthetic, m.proof_aug, m.contra_aug), (0, 0, 0));
        assert_eq!(m.student_ratio, 0.0);
        let out = tmp.path().join("x.jsonl");
        assert_eq!(
            export_training_data(tmp.path(), 1..=1, &out, ExportFormat::SftPairs).unwrap(),
            0
        );
        assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
    }

    #[test]
    fn binding_mismatch_is_a_config_error() {
        let gw = Gateway::single(Arc::new(ScriptedBackend::default()));
        let lean = LeanBridge::mock();
        let repo = ConceptRepository::bundled();
        let tmp = tempfile::tempdir().unwrap();
        let runner = IterationRunner::new(&gw, &lean, &repo, tmp.path());
        let mut cfg = RoundConfig::new(1, 1).with_quota(1);
        cfg.bindings.insert(Role::Translator, "elsewhere".into());
        assert!(matches!(
            runner.run_iteration(&cfg, &[]),
            Err(IterationError::Config(_))
        ));
    }
}
