//! Prompt templates, one per role, and placeholder rendering.
//!
//! Placeholders are `{name}`; `{{` and `}}` stand for literal braces.

use std::collections::BTreeSet;

use super::Role;

pub const NL_GEN: &str = r#"You are an expert mathematics professor tasked with creating proof problems for undergraduate mathematics majors. Your assignment is to construct a proof problem that integrates {concept1} from {domain1} and {concept2} from {domain2}.

Requirements:
1. Create a concise theorem appropriate for undergraduate mathematics majors.
2. The theorem should be brief, not exceeding 50 words.
3. Incorporate both specified concepts into the theorem naturally.
4. State the theorem clearly and concisely.
5. Ensure the theorem is simple enough to be easily translated into Lean4.

Format exactly:
# Answer
Insert your problem with "||" format, i.e. ||Theorem: Insert the theorem in natural language here.||"#;

pub const TRANSLATOR: &str = r#"You are an expert in the Lean4 theorem prover. Your task is to translate theorems from natural language into formal Lean4 statements. Please follow these guidelines:

1. Carefully analyze the given theorem in natural language.
2. Translate it into a correct and precise Lean4 formal statement.
3. Use the following format for your response:
theorem tm_name : {{The theorem's Lean4 formal statement}} := by sorry
4. Focus solely on the translation. Do not attempt to prove the theorem or provide additional explanations.
5. Ensure that your translation accurately captures all the mathematical concepts and relationships expressed in the natural language version.
6. Use appropriate Lean4 syntax, including correct use of quantifiers, implications, and mathematical symbols.
7. If the theorem involves specific mathematical structures (e.g., groups, rings, topological spaces), use the corresponding Lean4 definitions and notations.

Remember, the goal is to create a syntactically correct and semantically accurate formalization in Lean4. Your translation should be faithful to the meaning of the original theorem while adhering to Lean4 conventions and best practices.

Now please begin by carefully reading the natural language statement provided, and then proceed with your translation into Lean4.
{informal_statement}"#;

/// Instruction used for the general-purpose teacher translator.
pub const TEACHER_TRANSLATE: &str = "Please autoformalize the following problem in Lean 4 with a header. Use the following theorem names: tm_name. Respond strictly with the translation, without any additional explanation.\n\n{informal_statement}";

pub const FL_REV: &str = r#"You are a math expert and an expert in Lean4. Your task is to modify the Lean4 code based on the given natural language description of a theorem, the corresponding Lean4 code, and the error message from the Lean compiler.

Requirements:
1. Correct the Lean4 code to make it compile successfully.
2. Lean4 code may lack or have additional declarations of certain content. You can add or remove them as much as possible to keep it consistent with the natural language description.
3. No need to import any packages, because Mathlib will be imported by default as import Mathlib.
4. Carefully read the content and provide your modified answer: **Lean4 code**
{formal_statement}
**Compiler error messages**
{compiler_error_messages}
**natural language statement**
{informal_statement}

Format exactly:
# Analysis
Insert your analysis here
# Answer
Insert your revised Lean4 code with "||" format, i.e. ||theorem tm_name your revised Lean4 code here := by sorry||"#;

pub const FL_ALIGN: &str = r#"You are a math expert and an expert in Lean4. Your task is to check the alignment between the given natural language description of a theorem and the corresponding Lean4 code.

Requirements:
1. Determine whether the Lean4 code is missing declarations of certain entities.
2. Assess whether the Lean4 code accurately represents the theorem described in the natural language.
3. Carefully read the content and provide your answer: **Lean4 code**
{formal_statement}
**natural language statement**
{informal_statement}

Format exactly:
# Analysis:
Insert your analysis here
# Answer
reply ||good||, ||average|| or ||poor||"#;

pub const FL_TO_NL: &str = r#"You are a math expert and an expert in Lean4. Your task is to translate theorems from Lean4 code into natural language.

Requirements:
1. Focus solely on the translation. Do not attempt to prove the theorem or provide additional explanations.
2. The theorem's natural language statement should be brief, not exceeding 50 words.
3. Carefully analyze the given theorem in Lean4 code {formal_statement} and provide your translation in natural language.

Format exactly:
# Answer
Insert your translation with "||" format, i.e. ||Theorem: Insert the theorem in natural language here.||"#;

pub const BACK_TRANSLATE: &str = "[UNUSED_TOKEN_146]user\nConvert the formal statement into natural language:\n```lean\n{formal_statement}\n```[UNUSED_TOKEN_145]\n[UNUSED_TOKEN_146]assistant\n";

pub const NLI_CHECK: &str = r#"You are an experienced mathematics expert and educator with extensive experience in mathematical problem analysis. I need you to analyze the fundamental nature of the following two mathematical problems.

# Focus on:
1. Core mathematical concepts and principles
2. Problem-solving approaches and methodologies
3. Ultimate objectives of the problems

# Ignore:
1. Variations in wording
2. Changes in contextual scenarios

# Present your answer using exactly this format:
# Analysis
Insert your analysis here
# Conclusion
reply ||same|| or ||different|| with "||" format

# Please approach this analysis with professional rigor.
Math Problem 1: {informal_statement}
Math Problem 2: {back_translation}"#;

/// Whole-proof completion prompt for the prover role. `{formal_statement}`
/// is the statement with its `sorry` removed, ending in `:= by`.
pub const PROVER: &str = "Complete the following Lean 4 code:\n\n```lean4\nimport Mathlib\n\n{formal_statement}\n```";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("missing binding for placeholder {{{0}}}")]
    Missing(String),
    #[error("binding '{0}' is not a placeholder of this template")]
    Unexpected(String),
}

pub fn template(role: Role) -> &'static str {
    match role {
        Role::NlGen => NL_GEN,
        Role::Translator => TRANSLATOR,
        Role::TeacherTranslate => TEACHER_TRANSLATE,
        Role::FlRev => FL_REV,
        Role::FlAlign => FL_ALIGN,
        Role::FlToNl => FL_TO_NL,
        Role::BackTranslate => BACK_TRANSLATE,
        Role::NliCheck => NLI_CHECK,
        Role::Prover => PROVER,
    }
}

enum Segment<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn segments(text: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut lit_start = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                out.push(Segment::Text(&text[lit_start..=i]));
                i += 2;
                lit_start = i;
            }
            b'{' => {
                let close = text[i + 1..].find('}').map(|j| i + 1 + j);
                let name = close.map(|c| &text[i + 1..c]);
                match (close, name) {
                    (Some(c), Some(n))
                        if !n.is_empty()
                            && n.bytes()
                                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_') =>
                    {
                        out.push(Segment::Text(&text[lit_start..i]));
                        out.push(Segment::Slot(n));
                        i = c + 1;
                        lit_start = i;
                    }
                    _ => i += 1,
                }
            }
            _ => i += 1,
        }
    }
    out.push(Segment::Text(&text[lit_start..]));
    out
}

/// Placeholder names in order of first appearance.
pub fn placeholders(text: &str) -> Vec<&str> {
    let mut seen = BTreeSet::new();
    segments(text)
        .into_iter()
        .filter_map(|s| match s {
            Segment::Slot(n) if seen.insert(n) => Some(n),
            _ => None,
        })
        .collect()
}

/// Substitutes every placeholder in one pass; bound values are never
/// re-scanned for placeholders.
pub fn render_text(text: &str, bindings: &[(&str, &str)]) -> Result<String, RenderError> {
    let names = placeholders(text);
    if let Some((extra, _)) = bindings.iter().find(|(k, _)| !names.contains(k)) {
        return Err(RenderError::Unexpected(extra.to_string()));
    }
    let mut out = String::with_capacity(text.len());
    for seg in segments(text) {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Slot(name) => {
                let value = bindings
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| RenderError::Missing(name.to_string()))?;
                out.push_str(value);
            }
        }
    }
    Ok(out)
}

pub fn render(role: Role, bindings: &[(&str, &str)]) -> Result<String, RenderError> {
    render_text(template(role), bindings)
}
