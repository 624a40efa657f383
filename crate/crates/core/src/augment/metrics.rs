//! String metrics used to pick and report on augmented statements.

use std::collections::HashMap;

/// Edit distance with unit costs over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Whitespace tokenization with every punctuation or symbol character split
/// off as its own token. Letters, digits, `_` and `'` form words.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for ch in chunk.chars() {
            if ch.is_alphanumeric() || ch == '_' || ch == '\'' {
                word.push(ch);
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(ch.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

pub const BLEU_MAX_ORDER: usize = 4;

/// Sentence BLEU over orders 1..=4 with clipped counts, uniform weights,
/// the brevity penalty, and add-one smoothing on orders 2 and above.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    bleu_tokens(&tokenize(candidate), &tokenize(reference))
}

pub fn bleu_tokens(cand: &[String], refr: &[String]) -> f64 {
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=BLEU_MAX_ORDER {
        let c = ngram_counts(cand, n);
        let r = ngram_counts(refr, n);
        let total: usize = c.values().sum();
        let matched: usize = c.iter().map(|(g, k)| (*k).min(r.get(g).copied().unwrap_or(0))).sum();
        let (num, den) = if n == 1 {
            (matched as f64, total as f64)
        } else {
            (matched as f64 + 1.0, total as f64 + 1.0)
        };
        if num == 0.0 {
            return 0.0;
        }
        log_sum += (num / den).ln() / BLEU_MAX_ORDER as f64;
    }
    let (c, r) = (cand.len() as f64, refr.len() as f64);
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    (bp * log_sum.exp()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("ℕ → ℝ", "ℕ → ℤ"), 1);
    }

    #[test]
    fn tokenizer_splits_symbols() {
        assert_eq!(
            tokenize("(n : ℕ) h.symm"),
            vec!["(", "n", ":", "ℕ", ")", "h", ".", "symm"]
        );
        assert_eq!(tokenize("x≥0"), vec!["x", "≥", "0"]);
    }

    #[test]
    fn bleu_fixed_points() {
        assert_eq!(bleu("a b c", "a b c"), 1.0);
        assert_eq!(bleu("a b", "c d"), 0.0);
        assert_eq!(bleu("", "a"), 0.0);
        assert!((bleu("a b c d e", "a b c d f") - 0.7521206186172787).abs() < 1e-12);
    }

    #[test]
    fn brevity_penalty_applies() {
        let short = bleu("a b", "a b c d");
        assert!((short - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }
}
