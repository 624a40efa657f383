//! One round of statement synthesis: generate NL statements from concept
//! pairs, translate them with the student, compile, let the teacher revise
//! once on failure, rate alignment, and split the results into accepted
//! pairs and carryover statements.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::concepts::ConceptRepository;
use crate::hash::stable_u64;
use crate::lean::parse::format_multiline;
use crate::lean::{CompileReport, LeanBridge, ParsedTheorem};
use crate::llm::{self, Gateway, GatewayError, Role};
use crate::statement::{
    accept_rating, force_theorem_name, nl_id, single_line, AlignmentRating, FlStatement, Generator, NlStatement,
    NlStatus, Origin, ParallelStatement, THEOREM_NAME,
};
use crate::sync::{map_bounded, Semaphore};

pub const DEFAULT_ROUND_QUOTA: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Statements processed concurrently.
    pub workers: usize,
    /// Concurrent compile jobs.
    pub compile_workers: usize,
    /// Generation attempts per requested NL statement before it is dropped.
    pub generation_attempts: u32,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            workers: 8,
            compile_workers: 4,
            generation_attempts: 3,
        }
    }
}

/// Funnel counts for one round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub generated: u64,
    pub translated: u64,
    pub parsed: u64,
    pub compiled_first: u64,
    pub revised: u64,
    pub compiled_second: u64,
    pub aligned_good: u64,
    pub aligned_average: u64,
    pub aligned_poor: u64,
}

impl StageCounts {
    pub fn aligned(&self) -> u64 {
        self.aligned_good + self.aligned_average + self.aligned_poor
    }

    /// Checks that every stage sees no more items than the one feeding it.
    pub fn is_monotone(&self) -> bool {
        self.generated >= self.translated
            && self.translated >= self.parsed
            && self.translated >= self.compiled_first + self.revised
            && self.revised >= self.compiled_second
            && self.aligned() == self.compiled_first + self.compiled_second
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemNote {
    pub nl_id: String,
    pub stage: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOutcome {
    /// Accepted pairs, ordered by NL id.
    pub accepted: Vec<ParallelStatement>,
    /// NL statements kept for the next round, ordered by id.
    pub carryover: Vec<NlStatement>,
    pub rejected_count: u64,
    pub stage_counts: StageCounts,
    /// Why each non-accepted statement left the funnel, ordered by NL id.
    pub notes: Vec<ItemNote>,
}

impl SynthesisOutcome {
    /// Accepted pairs whose code came from the student's first compile.
    pub fn student_accepted(&self) -> usize {
        self.accepted
            .iter()
            .filter(|p| p.fl.generator == Generator::Student)
            .count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub requested: u64,
    pub produced: u64,
    pub dropped: u64,
    pub attempts: u64,
}

enum Fate {
    Accepted(Box<ParallelStatement>),
    Carryover(NlStatement, ItemNote),
    Rejected(ItemNote),
}

#[derive(Default)]
struct Trail {
    translated: bool,
    parsed: bool,
    compiled_first: bool,
    revised: bool,
    compiled_second: bool,
    rating: Option<AlignmentRating>,
}

pub struct Synthesizer<'a> {
    gateway: &'a Gateway,
    lean: &'a LeanBridge,
    config: SynthesisConfig,
    compile_gate: Semaphore,
}

fn note(nl_id: &str, stage: &str, reason: impl ToString) -> ItemNote {
    ItemNote {
        nl_id: nl_id.to_string(),
        stage: stage.to_string(),
        reason: reason.to_string(),
    }
}

/// Code answers from the reviser come inside `||...||`; fall back to the
/// whole completion when the delimiters are missing.
fn extract_revised_code(completion: &str) -> Result<String, llm::ExtractError> {
    let span = llm::extract_delimited_outer(completion).ok();
    let from_span = span.as_deref().map(llm::extract_theorem_block);
    match from_span {
        Some(Ok(code)) => Ok(code),
        _ => llm::extract_theorem_block(completion),
    }
}

impl<'a> Synthesizer<'a> {
    pub fn new(gateway: &'a Gateway, lean: &'a LeanBridge, config: SynthesisConfig) -> Self {
        let compile_gate = Semaphore::new(config.compile_workers);
        Self {
            gateway,
            lean,
            config,
            compile_gate,
        }
    }

    /// Generates up to `n` NL statements, each from a freshly sampled
    /// concept pair. Concept pairs and per-item seeds are drawn from `rng`
    /// up front so the result does not depend on scheduling.
    pub fn generate_nl_batch<R: Rng>(
        &self,
        repo: &ConceptRepository,
        n: usize,
        round: u32,
        rng: &mut R,
    ) -> (Vec<NlStatement>, GenerationReport) {
        // A repository with fewer than two concepts yields no jobs; every
        // requested statement is then reported as dropped.
        let jobs: Vec<_> = (0..n)
            .map_while(|i| {
                let (a, b) = repo.sample_pair(rng).ok()?;
                Some((i, a.clone(), b.clone(), rng.random::<u64>()))
            })
            .collect();
        let attempts_cap = self.config.generation_attempts.max(1);
        let results = map_bounded(&jobs, self.config.workers, |_, (i, a, b, seed)| {
            let prompt = self.gateway.render(
                Role::NlGen,
                &[
                    ("concept1", &a.name),
                    ("domain1", &a.domain),
                    ("concept2", &b.name),
                    ("domain2", &b.domain),
                ],
            );
            let Ok(prompt) = prompt else {
                return (None, 0u64);
            };
            let subject = format!("gen-r{round}-{i}");
            let mut params = self.gateway.params(Role::NlGen);
            for attempt in 0..attempts_cap {
                params.seed = Some(seed.wrapping_add(attempt as u64));
                let text = self
                    .gateway
                    .complete(Some(&subject), Role::NlGen, &prompt, Some(&params))
                    .ok()
                    .and_then(|c| llm::extract_delimited(&c).ok());
                if let Some(stmt) = text.and_then(|t| NlStatement::new(&t, [a.id.clone(), b.id.clone()], round).ok()) {
                    return (Some(stmt), attempt as u64 + 1);
                }
            }
            tracing::warn!(subject, "NL generation dropped after {attempts_cap} attempts");
            (None, attempts_cap as u64)
        });

        let mut report = GenerationReport {
            requested: n as u64,
            ..Default::default()
        };
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (stmt, attempts) in results {
            report.attempts += attempts;
            let Some(mut stmt) = stmt else {
                report.dropped += 1;
                continue;
            };
            let mut salt = 0;
            while !seen.insert(stmt.id.clone()) {
                salt += 1;
                stmt.id = nl_id(&stmt.text, &stmt.concepts, round, salt);
            }
            out.push(stmt);
        }
        report.dropped += (n - jobs.len()) as u64;
        report.produced = out.len() as u64;
        (out, report)
    }

    fn params_for(&self, role: Role, round: u32, nl: &NlStatement) -> llm::SamplingParams {
        let seed = stable_u64(&[role.as_str().as_bytes(), &round.to_le_bytes(), nl.id.as_bytes()]);
        self.gateway.params(role).with_seed(seed)
    }

    /// Student translation of one statement, normalized and renamed.
    pub fn translate(&self, nl: &NlStatement, round: u32) -> Result<FlStatement, SynthesisError> {
        let prompt = self
            .gateway
            .render(Role::Translator, &[("informal_statement", &nl.text)])?;
        let params = self.params_for(Role::Translator, round, nl);
        let completion = self
            .gateway
            .complete(Some(&nl.id), Role::Translator, &prompt, Some(&params))?;
        let code = llm::extract_theorem_block(&completion)?;
        let code = force_theorem_name(&code, THEOREM_NAME).map_err(|e| SynthesisError::Statement(e.to_string()))?;
        Ok(FlStatement::new(&nl.id, &code, Generator::Student, round))
    }

    /// One teacher revision using the compiler diagnostics.
    pub fn revise(
        &self,
        fl: &FlStatement,
        nl: &NlStatement,
        report: &CompileReport,
        round: u32,
    ) -> Result<FlStatement, SynthesisError> {
        debug_assert!(!report.success, "revision requires a failed compile");
        let errors = report.render_errors();
        let prompt = self.gateway.render(
            Role::FlRev,
            &[
                ("formal_statement", &fl.code),
                ("compiler_error_messages", &errors),
                ("informal_statement", &nl.text),
            ],
        )?;
        let params = self.params_for(Role::FlRev, round, nl);
        let completion = self
            .gateway
            .complete(Some(&nl.id), Role::FlRev, &prompt, Some(&params))?;
        let code = extract_revised_code(&completion)?;
        let code = force_theorem_name(&code, THEOREM_NAME).map_err(|e| SynthesisError::Statement(e.to_string()))?;
        let mut revised = FlStatement::new(&nl.id, &code, Generator::TeacherRevised, round);
        revised.prior_compile = Some(report.clone());
        Ok(revised)
    }

    /// Parses and lays the statement out one binder per line; unparseable
    /// code is compiled in its single-line form.
    fn layout(&self, fl: &mut FlStatement) -> bool {
        match self.lean.parse(&fl.code) {
            Ok(parsed) => {
                fl.code = format_multiline(&parsed);
                fl.parsed = Some(parsed);
                true
            }
            Err(_) => {
                fl.code = single_line(&fl.code);
                false
            }
        }
    }

    fn compile(&self, subject: &str, fl: &mut FlStatement) -> Result<bool, SynthesisError> {
        let _permit = self.compile_gate.acquire();
        let report = self.lean.compile_for(Some(subject), &fl.code)?;
        let ok = report.success;
        fl.compile = Some(report);
        Ok(ok)
    }

    fn rate(&self, fl: &FlStatement, nl: &NlStatement) -> AlignmentRating {
        let prompt = self.gateway.render(
            Role::FlAlign,
            &[("formal_statement", &fl.code), ("informal_statement", &nl.text)],
        );
        let rating = prompt
            .map_err(GatewayError::from)
            .and_then(|p| self.gateway.complete(Some(&nl.id), Role::FlAlign, &p, None));
        match rating {
            Ok(text) => llm::extract_delimited(&text)
                .ok()
                .and_then(|r| AlignmentRating::parse(&r))
                .unwrap_or_else(|| {
                    tracing::warn!(nl = %nl.id, "unreadable alignment verdict, counted as poor");
                    AlignmentRating::Poor
                }),
            Err(e) => {
                tracing::warn!(nl = %nl.id, error = %e, "alignment call failed, counted as poor");
                AlignmentRating::Poor
            }
        }
    }

    fn process(&self, nl: &NlStatement, round: u32, trail: &mut Trail) -> Fate {
        let carry = |stage: &str, reason: &dyn std::fmt::Display| {
            Fate::Carryover(nl.clone().with_status(NlStatus::Carryover), note(&nl.id, stage, reason))
        };
        let mut fl = match self.translate(nl, round) {
            Ok(fl) => fl,
            Err(SynthesisError::Gateway(e)) => return Fate::Rejected(note(&nl.id, "translate", e)),
            Err(e) => return carry("translate", &e),
        };
        trail.translated = true;
        trail.parsed = self.layout(&mut fl);
        let first = match self.compile(&nl.id, &mut fl) {
            Ok(ok) => ok,
            Err(e) => return carry("compile", &e),
        };
        let accepted_fl = if first {
            trail.compiled_first = true;
            fl
        } else {
            trail.revised = true;
            let report = fl.compile.clone().expect("compile report recorded");
            let mut revised = match self.revise(&fl, nl, &report, round) {
                Ok(r) => r,
                Err(e) => return carry("revise", &e),
            };
            self.layout(&mut revised);
            match self.compile(&nl.id, &mut revised) {
                Ok(true) => {
                    trail.compiled_second = true;
                    revised
                }
                Ok(false) => return carry("compile_second", &"revision does not compile"),
                Err(e) => return carry("compile_second", &e),
            }
        };
        let rating = self.rate(&accepted_fl, nl);
        trail.rating = Some(rating);
        if !accept_rating(rating) {
            return carry("align", &"rated poor");
        }
        let nl_acc = nl.clone().with_status(NlStatus::Accepted);
        match ParallelStatement::new(nl_acc, accepted_fl, Origin::Synthetic, Some(rating), round, None) {
            Ok(ps) => Fate::Accepted(Box::new(ps)),
            Err(e) => carry("record", &e),
        }
    }

    /// Runs every input through the funnel and folds the results.
    pub fn run_round(&self, inputs: &[NlStatement], round: u32) -> SynthesisOutcome {
        let results = map_bounded(inputs, self.config.workers, |_, nl| {
            let mut trail = Trail::default();
            let fate = self.process(nl, round, &mut trail);
            (fate, trail)
        });
        let mut out = SynthesisOutcome::default();
        let c = &mut out.stage_counts;
        c.generated = inputs.len() as u64;
        for (fate, trail) in results {
            c.translated += trail.translated as u64;
            c.parsed += trail.parsed as u64;
            c.compiled_first += trail.compiled_first as u64;
            c.revised += trail.revised as u64;
            c.compiled_second += trail.compiled_second as u64;
            match trail.rating {
                Some(AlignmentRating::Good) => c.aligned_good += 1,
                Some(AlignmentRating::Average) => c.aligned_average += 1,
                Some(AlignmentRating::Poor) => c.aligned_poor += 1,
                None => {}
            }
            match fate {
                Fate::Accepted(ps) => out.accepted.push(*ps),
                Fate::Carryover(nl, n) => {
                    out.carryover.push(nl);
                    out.notes.push(n);
                }
                Fate::Rejected(n) => {
                    out.rejected_count += 1;
                    out.notes.push(n);
                }
            }
        }
        out.accepted.sort_by(|a, b| a.nl.id.cmp(&b.nl.id));
        out.carryover.sort_by(|a, b| a.id.cmp(&b.id));
        out.notes.sort_by(|a, b| a.nl_id.cmp(&b.nl_id));
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Render(#[from] llm::RenderError),
    #[error(transparent)]
    Extract(#[from] llm::ExtractError),
    #[error("statement: {0}")]
    Statement(String),
    #[error(transparent)]
    Lean(#[from] crate::lean::LeanError),
}

/// Parsed view of an accepted statement, parsing again if it was not kept.
pub fn parsed_of(fl: &FlStatement) -> Option<ParsedTheorem> {
    fl.parsed
        .clone()
        .or_else(|| crate::lean::parse::parse_statement(&fl.code).ok())
}
