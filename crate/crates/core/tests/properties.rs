mod common;

use forge_core::augment::{bleu, levenshtein, select_farthest};
use forge_core::eval::{pass_at_k, t_test_two_sided};
use forge_core::lean::{format_multiline, parse_statement};
use forge_core::llm::render;
use forge_core::llm::Role;
use forge_core::statement::normalize_code;
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    "[a-f]{0,12}"
}

proptest! {
    #[test]
    fn levenshtein_matches_table(a in word(), b in word()) {
        prop_assert_eq!(levenshtein(&a, &b), common::levenshtein_table(&a, &b));
    }

    #[test]
    fn levenshtein_is_a_metric(x in word(), y in word(), z in word()) {
        prop_assert_eq!(levenshtein(&x, &y), levenshtein(&y, &x));
        prop_assert_eq!(levenshtein(&x, &y) == 0, x == y);
        prop_assert!(levenshtein(&x, &z) <= levenshtein(&x, &y) + levenshtein(&y, &z));
    }

    #[test]
    fn levenshtein_is_bounded_by_lengths(a in "[a-cα-γ]{0,10}", b in "[a-cα-γ]{0,10}") {
        let (la, lb) = (a.chars().count(), b.chars().count());
        let d = levenshtein(&a, &b);
        prop_assert!(d >= la.abs_diff(lb) && d <= la.max(lb));
    }

    #[test]
    fn bleu_is_a_unit_score(a in "[a-d ]{0,20}", b in "[a-d ]{0,20}") {
        let s = bleu(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        if !a.trim().is_empty() {
            prop_assert!((bleu(&a, &a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pass_at_k_is_monotone(n in 1u32..40, c_frac in 0.0f64..=1.0, k_frac in 0.0f64..=1.0) {
        let c = (c_frac * n as f64) as u32;
        let k = 1 + ((k_frac * (n - 1) as f64) as u32);
        let p = pass_at_k(n, c, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        if k < n {
            prop_assert!(pass_at_k(n, c, k + 1).unwrap() >= p - 1e-15);
        }
        if c < n {
            prop_assert!(pass_at_k(n, c + 1, k).unwrap() >= p - 1e-15);
        }
        prop_assert_eq!(pass_at_k(n, 0, k).unwrap(), 0.0);
        prop_assert_eq!(pass_at_k(n, n, k).unwrap(), 1.0);
    }

    #[test]
    fn pass_at_k_matches_enumeration_small(n in 1u32..=10, c in 0u32..=10, k in 1u32..=10) {
        prop_assume!(c <= n && k <= n);
        let got = pass_at_k(n, c, k).unwrap();
        prop_assert!((got - common::pass_at_k_enumerated(n, c, k)).abs() <= 1e-12);
    }

    #[test]
    fn welch_is_symmetric_and_a_probability(
        a in prop::collection::vec(0.0f64..1.0, 2..8),
        b in prop::collection::vec(0.0f64..1.0, 2..8),
    ) {
        let p = t_test_two_sided(&a, &b).unwrap();
        let q = t_test_two_sided(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - q).abs() < 1e-12);
    }

    #[test]
    fn farthest_candidate_is_maximal(cands in prop::collection::vec((any::<bool>(), 0usize..50), 0..8)) {
        match select_farthest(&cands) {
            None => prop_assert!(cands.iter().all(|&(ok, d)| !ok || d == 0)),
            Some(i) => {
                let (ok, d) = cands[i];
                prop_assert!(ok && d > 0);
                for (j, &(ok2, d2)) in cands.iter().enumerate() {
                    if ok2 && d2 > 0 {
                        prop_assert!(d2 <= d);
                        prop_assert!(j >= i || d2 < d, "earlier tie at {}", j);
                    }
                }
            }
        }
    }

    /// Generated signatures survive the multiline layout unchanged.
    #[test]
    fn multiline_round_trip(
        vars in prop::collection::btree_set("[a-g]", 0..4),
        hyps in prop::collection::vec((0u8..3, 0u32..100), 0..3),
        goal in 0u32..100,
    ) {
        let mut code = String::from("theorem tm_name");
        for v in &vars {
            code.push_str(&format!(" ({v} : ℕ)"));
        }
        let x = vars.iter().next().cloned().unwrap_or_else(|| "0".into());
        for (i, (op, k)) in hyps.iter().enumerate() {
            let op = ["<", "≤", "≠"][*op as usize];
            code.push_str(&format!(" (h{i} : {x} {op} {k})"));
        }
        code.push_str(&format!(" : {x} + {goal} ≥ {goal} := by sorry"));
        let p = parse_statement(&code).unwrap();
        prop_assert_eq!(p.variables.len(), vars.len());
        prop_assert_eq!(p.hypotheses.len(), hyps.len());
        prop_assert_eq!(parse_statement(&format_multiline(&p)).unwrap(), p);
    }

    #[test]
    fn normalization_is_idempotent(body in "[a-z0-9 =+]{1,20}", trailing in "[ \t]{0,3}", crlf in any::<bool>()) {
        let nl = if crlf { "\r\n" } else { "\n" };
        let code = format!("theorem tm_name :{nl}  {body}{trailing}");
        let once = normalize_code(&code).unwrap();
        prop_assert_eq!(normalize_code(&once).unwrap(), once.clone());
        prop_assert!(once.ends_with(":= by sorry"));
        prop_assert!(!once.contains('\r'));
    }

    #[test]
    fn translator_prompt_embeds_text_verbatim(text in "[^{}]{1,60}") {
        let prompt = render(Role::Translator, &[("informal_statement", &text)]).unwrap();
        prop_assert!(prompt.ends_with(&text));
    }
}

#[test]
fn corpus_round_trips() {
    for code in common::reference_statements() {
        let p = parse_statement(&code).unwrap();
        assert_eq!(parse_statement(&format_multiline(&p)).unwrap(), p, "{code}");
    }
}
