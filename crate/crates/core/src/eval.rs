//! Translator evaluation: candidates are compiled, back-translated, and
//! checked for equivalence with the original statement; pass@k is reported
//! per seed and averaged, and two reports can be compared with a Welch
//! t-test.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::hash::stable_u64;
use crate::jsonl;
use crate::lean::LeanBridge;
use crate::llm::{self, Gateway, Role};
use crate::statement::{force_theorem_name, THEOREM_NAME};
use crate::sync::map_bounded;

pub const DEFAULT_SEEDS: [u64; 5] = [42, 43, 44, 45, 46];
pub const DEFAULT_K: [u32; 3] = [1, 8, 32];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("k={k} exceeds the number of attempts n={n}")]
    KTooLarge { n: u32, k: u32 },
    #[error("k must be at least 1")]
    KZero,
    #[error("c={c} successes exceed n={n} attempts")]
    TooManySuccesses { n: u32, c: u32 },
    #[error("each sample needs at least two values (got {0} and {1})")]
    SampleTooSmall(usize, usize),
    #[error("invalid benchmark: {0}")]
    Benchmark(String),
    #[error("no common k between the reports")]
    NothingToCompare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkSource {
    Proofnet,
    Putnambench,
    Mathqual,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub id: String,
    pub nl_text: String,
    pub source: BenchmarkSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msc_class: Option<String>,
}

/// Reads a JSON-lines benchmark and checks ids are unique and texts
/// nonempty.
pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkItem>, EvalError> {
    let items: Vec<BenchmarkItem> = jsonl::read(path).map_err(|e| EvalError::Benchmark(e.to_string()))?;
    check_benchmark(&items)?;
    Ok(items)
}

pub fn check_benchmark(items: &[BenchmarkItem]) -> Result<(), EvalError> {
    let mut seen = std::collections::HashSet::new();
    for item in items {
        if item.nl_text.trim().is_empty() {
            return Err(EvalError::Benchmark(format!("item {} has empty text", item.id)));
        }
        if !seen.insert(item.id.as_str()) {
            return Err(EvalError::Benchmark(format!("duplicate item id {}", item.id)));
        }
    }
    Ok(())
}

/// Converts a ProofNet-style record (`name`, `informal_prefix`) into a
/// benchmark item. The informal text is a Lean doc comment, `/-- ... -/`.
pub fn from_proofnet_record(value: &serde_json::Value) -> Option<BenchmarkItem> {
    let id = value.get("name")?.as_str()?.to_string();
    let raw = value.get("informal_prefix")?.as_str()?;
    let text = raw
        .trim()
        .trim_start_matches("/--")
        .trim_end_matches("-/")
        .trim()
        .to_string();
    (!text.is_empty()).then_some(BenchmarkItem {
        id,
        nl_text: text,
        source: BenchmarkSource::Proofnet,
        msc_class: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub item_id: String,
    pub seed: u64,
    pub candidate_index: u32,
    pub fl_code: String,
    pub compiled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nli_passed: Option<bool>,
    pub success: bool,
}

/// Outcome of the compile → back-translate → NLI chain for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validation {
    pub compiled: bool,
    pub nli_passed: Option<bool>,
}

impl Validation {
    pub fn success(&self) -> bool {
        self.compiled && self.nli_passed == Some(true)
    }
}

/// `1 - C(n-c, k) / C(n, k)`, evaluated as a running product so no
/// binomial coefficient is ever formed.
pub fn pass_at_k(n: u32, c: u32, k: u32) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::KZero);
    }
    if k > n {
        return Err(EvalError::KTooLarge { n, k });
    }
    if c > n {
        return Err(EvalError::TooManySuccesses { n, c });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let mut miss = 1.0;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - k as f64 / i as f64;
    }
    Ok(1.0 - miss)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassMode {
    /// Unbiased estimator from all n = max(k) candidates.
    #[default]
    Unbiased,
    /// Success iff any of the first k candidates succeeded.
    FirstK,
}

/// Welch two-sample test; returns the two-sided p-value. Two constant
/// samples give 1 when their values agree and 0 otherwise.
pub fn t_test_two_sided(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::SampleTooSmall(a.len(), b.len()));
    }
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (n, mean, var)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    /// pass@k averaged over items, keyed by k.
    pub pass: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub translator: String,
    pub mode: PassMode,
    pub items: usize,
    pub k_values: Vec<u32>,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedRow>,
    pub mean: BTreeMap<u32, f64>,
    pub attempts: Vec<AttemptRecord>,
}

impl EvalResult {
    /// Per-seed values of pass@k, in seed order.
    pub fn samples(&self, k: u32) -> Vec<f64> {
        self.per_seed.iter().filter_map(|r| r.pass.get(&k).copied()).collect()
    }

    /// The per-seed table followed by the mean row, as CSV.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("seed");
        for k in &self.k_values {
            out.push_str(&format!(",pass@{k}"));
        }
        out.push('\n');
        for row in &self.per_seed {
            out.push_str(&row.seed.to_string());
            for k in &self.k_values {
                out.push_str(&format!(",{:.6}", row.pass[k]));
            }
            out.push('\n');
        }
        out.push_str("mean");
        for k in &self.k_values {
            out.push_str(&format!(",{:.6}", self.mean[k]));
        }
        out.push('\n');
        out
    }
}

/// Aggregates attempts (sorted or not) into per-seed and mean pass rates.
pub fn aggregate(
    attempts: &[AttemptRecord],
    items: &[BenchmarkItem],
    k_values: &[u32],
    seeds: &[u64],
    n: u32,
    mode: PassMode,
) -> Result<(Vec<SeedRow>, BTreeMap<u32, f64>), EvalError> {
    let mut per_seed = Vec::new();
    for &seed in seeds {
        let mut pass = BTreeMap::new();
        for &k in k_values {
            let mut total = 0.0;
            for item in items {
                let mine = attempts.iter().filter(|a| a.seed == seed && a.item_id == item.id);
                let value = match mode {
                    PassMode::Unbiased => {
                        let c = mine.filter(|a| a.success).count() as u32;
                        pass_at_k(n, c, k)?
                    }
                    PassMode::FirstK => {
                        if k > n {
                            return Err(EvalError::KTooLarge { n, k });
                        }
                        let hit = mine.filter(|a| a.candidate_index < k).any(|a| a.success);
                        f64::from(u8::from(hit))
                    }
                };
                total += value;
            }
            let rate = if items.is_empty() {
                0.0
            } else {
                total / items.len() as f64
            };
            pass.insert(k, rate);
        }
        per_seed.push(SeedRow { seed, pass });
    }
    let mut mean = BTreeMap::new();
    for &k in k_values {
        let m = if per_seed.is_empty() {
            0.0
        } else {
            per_seed.iter().map(|r| r.pass[&k]).sum::<f64>() / per_seed.len() as f64
        };
        mean.insert(k, m);
    }
    Ok((per_seed, mean))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub translator: Role,
    pub k_values: Vec<u32>,
    pub seeds: Vec<u64>,
    pub mode: PassMode,
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            translator: Role::Translator,
            k_values: DEFAULT_K.to_vec(),
            seeds: DEFAULT_SEEDS.to_vec(),
            mode: PassMode::Unbiased,
            workers: 8,
        }
    }
}

pub struct Evaluator<'a> {
    gateway: &'a Gateway,
    lean: &'a LeanBridge,
}

impl<'a> Evaluator<'a> {
    pub fn new(gateway: &'a Gateway, lean: &'a LeanBridge) -> Self {
        Self { gateway, lean }
    }

    /// Compile, then (only on success) back-translate and ask the NLI judge.
    pub fn validate_candidate(&self, item: &BenchmarkItem, fl_code: &str, subject: &str) -> Validation {
        let compiled = !fl_code.is_empty()
            && self
                .lean
                .compile_for(Some(subject), fl_code)
                .map(|r| r.success)
                .unwrap_or(false);
        if !compiled {
            return Validation {
                compiled: false,
                nli_passed: None,
            };
        }
        let verdict = (|| {
            let back = self
                .gateway
                .ask(Some(subject), Role::BackTranslate, &[("formal_statement", fl_code)])
                .ok()?;
            let judged = self
                .gateway
                .ask(
                    Some(subject),
                    Role::NliCheck,
                    &[("informal_statement", &item.nl_text), ("back_translation", back.trim())],
                )
                .ok()?;
            match llm::extract_delimited(&judged).ok()?.to_ascii_lowercase().as_str() {
                "same" => Some(true),
                _ => Some(false),
            }
        })();
        Validation {
            compiled: true,
            nli_passed: Some(verdict.unwrap_or(false)),
        }
    }

    fn candidate(&self, role: Role, item: &BenchmarkItem, seed: u64, index: u32) -> AttemptRecord {
        let subject = format!("eval:{}:{seed}:{index}", item.id);
        let params = self.gateway.params(role).with_seed(stable_u64(&[
            item.id.as_bytes(),
            &seed.to_le_bytes(),
            &index.to_le_bytes(),
        ]));
        let code = self
            .gateway
            .render(role, &[("informal_statement", &item.nl_text)])
            .ok()
            .and_then(|p| self.gateway.complete(Some(&subject), role, &p, Some(&params)).ok())
            .and_then(|c| llm::extract_theorem_block(&c).ok())
            .and_then(|c| force_theorem_name(&c, THEOREM_NAME).ok())
            .unwrap_or_default();
        if code.is_empty() {
            tracing::debug!(subject, "candidate generation failed");
        }
        let v = self.validate_candidate(item, &code, &subject);
        AttemptRecord {
            item_id: item.id.clone(),
            seed,
            candidate_index: index,
            fl_code: code,
            compiled: v.compiled,
            nli_passed: v.nli_passed,
            success: v.success(),
        }
    }

    pub fn evaluate(&self, benchmark: &[BenchmarkItem], config: &EvalConfig) -> Result<EvalResult, EvalError> {
        check_benchmark(benchmark)?;
        let n = config.k_values.iter().copied().max().ok_or(EvalError::KZero)?;
        if config.k_values.contains(&0) {
            return Err(EvalError::KZero);
        }
        let jobs: Vec<(usize, u64, u32)> = benchmark
            .iter()
            .enumerate()
            .flat_map(|(i, _)| config.seeds.iter().flat_map(move |&s| (0..n).map(move |c| (i, s, c))))
            .collect();
        let mut attempts = map_bounded(&jobs, config.workers, |_, &(i, seed, idx)| {
            self.candidate(config.translator, &benchmark[i], seed, idx)
        });
        attempts.sort_by(|a, b| (&a.item_id, a.seed, a.candidate_index).cmp(&(&b.item_id, b.seed, b.candidate_index)));
        let (per_seed, mean) = aggregate(&attempts, benchmark, &config.k_values, &config.seeds, n, config.mode)?;
        Ok(EvalResult {
            translator: self
                .gateway
                .backend_name(config.translator)
                .map(|b| format!("{}:{b}", config.translator))
                .unwrap_or_else(|| config.translator.to_string()),
            mode: config.mode,
            items: benchmark.len(),
            k_values: config.k_values.clone(),
            seeds: config.seeds.clone(),
            per_seed,
            mean,
            attempts,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub k: u32,
    pub mean_a: f64,
    pub mean_b: f64,
    pub p_value: f64,
    pub significant: bool,
}

pub const SIGNIFICANCE: f64 = 0.05;

/// Per-k Welch tests over the per-seed pass rates of two reports.
pub fn compare(a: &EvalResult, b: &EvalResult) -> Result<Vec<Comparison>, EvalError> {
    let ks: Vec<u32> = a.k_values.iter().copied().filter(|k| b.k_values.contains(k)).collect();
    if ks.is_empty() {
        return Err(EvalError::NothingToCompare);
    }
    ks.into_iter()
        .map(|k| {
            let p = t_test_two_sided(&a.samples(k), &b.samples(k))?;
            Ok(Comparison {
                k,
                mean_a: a.mean[&k],
                mean_b: b.mean[&k],
                p_value: p,
                significant: p < SIGNIFICANCE,
            })
        })
        .collect()
}
