//! Deterministic, rule-based stand-in for every model role.
//!
//! Generated statements come from a small set of parameterized families
//! whose natural-language phrasing, Lean statement, and a short proof are
//! known. Each role recognizes its inputs by parsing the rendered prompt, so
//! the backend exercises the same templates a live model would see.
//! Failures (non-compiling translations, poor alignment, prover errors) are
//! injected at configurable rates from a hash of the role, prompt and
//! sampling seed, which makes every run reproducible.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest, Role};
use crate::hash::stable_u64;
use crate::lean::parse::parse_statement;
use crate::statement::{normalize_nl, single_line, TERMINATOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedConfig {
    pub seed: u64,
    /// Probability that the student translation does not compile.
    pub student_fail_rate: f64,
    pub teacher_fail_rate: f64,
    /// Probability that a translation contains no theorem at all.
    pub no_theorem_rate: f64,
    pub revise_fail_rate: f64,
    pub poor_rate: f64,
    pub average_rate: f64,
    pub nli_same_rate: f64,
    pub prover_fail_rate: f64,
}

impl Default for ScriptedConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            student_fail_rate: 0.3,
            teacher_fail_rate: 0.15,
            no_theorem_rate: 0.02,
            revise_fail_rate: 0.3,
            poor_rate: 0.1,
            average_rate: 0.2,
            nli_same_rate: 0.8,
            prover_fail_rate: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    NatLower,
    NatShift,
    RealChain,
    SetMember,
    GroupComm,
}

const FAMILIES: [Family; 5] = [
    Family::NatLower,
    Family::NatShift,
    Family::RealChain,
    Family::SetMember,
    Family::GroupComm,
];

impl Family {
    fn sentence(self, k: u32) -> String {
        match self {
            Family::NatLower => format!("For every natural number n with n > {k}, we have n ≥ {k}."),
            Family::NatShift => format!("For every natural number m, m + {k} ≥ {k}."),
            Family::RealChain => format!("For real numbers x and y with x > {k} and y > x, we have y > {k}."),
            Family::SetMember => {
                format!("Let A and B be sets of natural numbers with A ⊆ B. If {k} ∈ A, then {k} ∈ B.")
            }
            Family::GroupComm => format!("In a group G, if a ^ {k} commutes with b, then b commutes with a ^ {k}."),
        }
    }

    fn sentence_pattern(self) -> &'static Regex {
        static PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
            [
                r"natural number n with n > (\d+), we have n ≥ (\d+)",
                r"natural number m, m \+ (\d+) ≥ (\d+)",
                r"x > (\d+) and y > x, we have y > (\d+)",
                r"A ⊆ B\. If (\d+) ∈ A, then (\d+) ∈ B",
                r"if a \^ (\d+) commutes with b, then b commutes with a \^ (\d+)",
            ]
            .iter()
            .map(|p| Regex::new(p).unwrap())
            .collect()
        });
        &PATTERNS[self as usize]
    }

    /// Binders and conclusion, without `theorem <name>` and terminator.
    fn signature(self, k: u32) -> String {
        match self {
            Family::NatLower => format!("(n : ℕ) (h : n > {k}) : n ≥ {k}"),
            Family::NatShift => format!(": ∀ m : ℕ, m + {k} ≥ {k}"),
            Family::RealChain => format!("(x y : ℝ) (hx : x > {k}) (hxy : y > x) : y > {k}"),
            Family::SetMember => format!("(A B : Set ℕ) (h : A ⊆ B) (hk : {k} ∈ A) : {k} ∈ B"),
            Family::GroupComm => {
                format!("{{G : Type*}} [Group G] (a b : G) (h : a ^ {k} * b = b * a ^ {k}) : b * a ^ {k} = a ^ {k} * b")
            }
        }
    }

    fn signature_pattern(self) -> Regex {
        let escaped = regex::escape(&self.signature(7777)).replace("7777", r"(\d+)");
        Regex::new(&format!("^{escaped}$")).unwrap()
    }

    /// Plausible but wrong variants, each rejected by the toolchain.
    fn broken(self, k: u32, variant: u64) -> String {
        let sig = self.signature(k);
        match variant % 3 {
            0 => sig.replacen(" : ", " : (", 1),
            1 => match self {
                Family::NatLower | Family::NatShift => format!("(n : ℕ) (h : Nat.coPrime n {k}) : n ≥ {k}"),
                Family::RealChain => format!("(x : ℝ) (hx : x > {k}) : sinh x > {k}"),
                Family::SetMember => format!("(A B : FinSet ℕ) (h : A ⊆ B) (hk : {k} ∈ A) : {k} ∈ B"),
                Family::GroupComm => format!("{{G : Type*}} [Group G] (a : G) : orderOfOf a ∣ {k}"),
            },
            _ => match sig.rfind(' ') {
                Some(i) => sig[..i].to_string(),
                None => sig,
            },
        }
    }

    fn tactics(self, k: u32) -> Vec<String> {
        match self {
            Family::NatLower => vec![format!("have h1 : n ≥ {k} + 1 := by omega"), "omega".into()],
            Family::NatShift => vec!["intro m".into(), "omega".into()],
            Family::RealChain => vec![format!("have hy : y > {k} := by linarith"), "exact hy".into()],
            Family::SetMember => vec![format!("have hb : {k} ∈ B := h hk"), "exact hb".into()],
            Family::GroupComm => vec!["exact h.symm".into()],
        }
    }
}

fn theorem(sig: &str) -> String {
    format!("theorem tm_name {sig} {TERMINATOR}")
}

/// Finds the family and parameter in a natural-language statement.
fn recognize_nl(text: &str) -> Option<(Family, u32)> {
    FAMILIES.into_iter().find_map(|f| {
        let caps = f.sentence_pattern().captures(text)?;
        let a: u32 = caps[1].parse().ok()?;
        let b: u32 = caps[2].parse().ok()?;
        (a == b).then_some((f, a))
    })
}

/// Finds the family and parameter in Lean code, whatever the theorem name.
fn recognize_fl(code: &str) -> Option<(Family, u32)> {
    let flat = single_line(code);
    let rest = flat.strip_prefix("theorem ")?;
    let rest = rest.split_once(' ')?.1;
    let rest = rest.trim_end();
    let rest = rest.strip_suffix(TERMINATOR).unwrap_or(rest).trim_end();
    let rest = rest.strip_suffix(":= by").unwrap_or(rest).trim_end();
    FAMILIES.into_iter().find_map(|f| {
        let caps = f.signature_pattern().captures(rest)?;
        caps[1].parse().ok().map(|k| (f, k))
    })
}

/// Free-form description of arbitrary Lean code, used when it is not one
/// of the known families (augmented statements, benchmark items).
fn describe_code(code: &str) -> String {
    if let Some((f, k)) = recognize_fl(code) {
        return f.sentence(k);
    }
    match parse_statement(code) {
        Ok(p) => {
            let vars: Vec<String> = p
                .variables
                .iter()
                .map(|b| format!("{} : {}", b.name, b.type_text))
                .collect();
            let hyps: Vec<String> = p.hypotheses.iter().map(|b| b.type_text.clone()).collect();
            let mut s = String::new();
            if !vars.is_empty() {
                s.push_str(&format!("Let {}. ", vars.join(", ")));
            }
            if !hyps.is_empty() {
                s.push_str(&format!("Assume {}. ", hyps.join(" and ")));
            }
            s.push_str(&format!("Then {}.", p.conclusion));
            s
        }
        Err(_) => format!("The statement {}.", single_line(code)),
    }
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let i = text.find(start)? + start.len();
    let j = text[i..].find(end)? + i;
    Some(&text[i..j])
}

#[derive(Debug, Default)]
pub struct ScriptedBackend {
    config: ScriptedConfig,
}

impl ScriptedBackend {
    pub fn new(config: ScriptedConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &ScriptedConfig {
        &self.config
    }

    /// Uniform draw in [0, 1) tied to the request and a purpose tag.
    fn draw(&self, req: &CompletionRequest<'_>, tag: &str) -> f64 {
        let seed = req.params.seed.unwrap_or(0);
        let h = stable_u64(&[
            &self.config.seed.to_le_bytes(),
            req.role.as_str().as_bytes(),
            req.prompt.as_bytes(),
            &seed.to_le_bytes(),
            tag.as_bytes(),
        ]);
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    fn pick(&self, req: &CompletionRequest<'_>, tag: &str, n: u64) -> u64 {
        (self.draw(req, tag) * n as f64) as u64 % n
    }

    fn nl_gen(&self, req: &CompletionRequest<'_>) -> String {
        static CONCEPTS: LazyLock<Regex> =
            LazyLock::new(|| Regex::new(r"integrates (.+?) from (.+?) and (.+?) from (.+?)\.\n").unwrap());
        let (c1, c2) = CONCEPTS
            .captures(req.prompt)
            .map(|c| (c[1].to_string(), c[3].to_string()))
            .unwrap_or_else(|| ("the first concept".into(), "the second concept".into()));
        let family = FAMILIES[self.pick(req, "family", FAMILIES.len() as u64) as usize];
        let k = 1 + self.pick(req, "k", 999) as u32;
        format!(
            "# Answer\n||Theorem: {} This combines {c1} with {c2}.||",
            family.sentence(k)
        )
    }

    fn translate(&self, req: &CompletionRequest<'_>, fail_rate: f64, teacher: bool) -> String {
        let nl = req
            .prompt
            .rsplit_once(if teacher { "explanation.\n\n" } else { "into Lean4.\n" })
            .map(|(_, t)| t)
            .unwrap_or(req.prompt);
        if self.draw(req, "no_theorem") < self.config.no_theorem_rate {
            return "I am unable to formalize this statement faithfully.".into();
        }
        let code = match recognize_nl(nl) {
            Some((f, k)) if self.draw(req, "fail") < fail_rate => theorem(&f.broken(k, self.pick(req, "variant", 3))),
            Some((f, k)) => theorem(&f.signature(k)),
            None => {
                let k = 1 + self.pick(req, "k", 999) as u32;
                if self.draw(req, "fail") < fail_rate {
                    theorem(&format!(": ({k} : ℕ) + 0 = "))
                } else {
                    theorem(&format!(": ({k} : ℕ) + 0 = {k}"))
                }
            }
        };
        if teacher {
            format!("```lean4\nimport Mathlib\n\n{code}\n```")
        } else {
            code
        }
    }

    fn revise(&self, req: &CompletionRequest<'_>) -> String {
        let nl = between(req.prompt, "**natural language statement**\n", "\n\nFormat exactly:").unwrap_or("");
        let old = between(req.prompt, "**Lean4 code**\n", "\n**Compiler error messages**").unwrap_or("");
        let code = match recognize_nl(nl) {
            Some((f, k)) if self.draw(req, "fail") >= self.config.revise_fail_rate => theorem(&f.signature(k)),
            _ => old.to_string(),
        };
        format!(
            "# Analysis\nThe compiler reports errors in the declarations; the binders are adjusted to match the statement.\n# Answer\n||{code}||"
        )
    }

    fn align(&self, req: &CompletionRequest<'_>) -> String {
        let code = between(req.prompt, "**Lean4 code**\n", "\n**natural language statement**").unwrap_or("");
        let nl = between(req.prompt, "**natural language statement**\n", "\n\nFormat exactly:").unwrap_or("");
        let faithful = match (recognize_nl(nl), recognize_fl(code)) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        };
        let u = self.draw(req, "rating");
        let rating = if !faithful || u < self.config.poor_rate {
            "poor"
        } else if u < self.config.poor_rate + self.config.average_rate {
            "average"
        } else {
            "good"
        };
        format!("# Analysis:\nThe declarations and the conclusion were compared with the description.\n# Answer\n||{rating}||")
    }

    fn fl_to_nl(&self, req: &CompletionRequest<'_>) -> String {
        let code = between(req.prompt, "in Lean4 code ", " and provide your translation").unwrap_or("");
        format!("# Answer\n||Theorem: {}||", describe_code(code))
    }

    fn back_translate(&self, req: &CompletionRequest<'_>) -> String {
        let code = between(req.prompt, "```lean\n", "\n```").unwrap_or("");
        describe_code(code)
    }

    fn nli(&self, req: &CompletionRequest<'_>) -> String {
        let a = between(req.prompt, "Math Problem 1: ", "\nMath Problem 2: ").unwrap_or("");
        let b = req
            .prompt
            .rsplit_once("\nMath Problem 2: ")
            .map(|(_, t)| t)
            .unwrap_or("");
        let same = match (recognize_nl(a), recognize_nl(b)) {
            (Some(x), Some(y)) => x == y,
            _ => normalize_nl(a) == normalize_nl(b) || self.draw(req, "same") < self.config.nli_same_rate,
        };
        let verdict = if same { "same" } else { "different" };
        format!("# Analysis\nBoth problems were reduced to their core objective.\n# Conclusion\n||{verdict}||")
    }

    fn prove(&self, req: &CompletionRequest<'_>) -> String {
        let stmt = between(req.prompt, "```lean4\nimport Mathlib\n\n", "\n```").unwrap_or("");
        let head = stmt.trim_end();
        let head = head
            .strip_suffix(TERMINATOR)
            .or_else(|| head.strip_suffix(":= by"))
            .unwrap_or(head)
            .trim_end();
        let tactics = match recognize_fl(stmt) {
            _ if self.draw(req, "fail") < self.config.prover_fail_rate => vec!["simp_arith_everything".to_string()],
            Some((f, k)) => f.tactics(k),
            None => vec!["norm_num".to_string()],
        };
        let body: String = tactics.iter().map(|t| format!("  {t}\n")).collect();
        format!("```lean4\n{head} := by\n{body}```")
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        Ok(match req.role {
            Role::NlGen => self.nl_gen(req),
            Role::Translator => self.translate(req, self.config.student_fail_rate, false),
            Role::TeacherTranslate => self.translate(req, self.config.teacher_fail_rate, true),
            Role::FlRev => self.revise(req),
            Role::FlAlign => self.align(req),
            Role::FlToNl => self.fl_to_nl(req),
            Role::BackTranslate => self.back_translate(req),
            Role::NliCheck => self.nli(req),
            Role::Prover => self.prove(req),
        })
    }
}
