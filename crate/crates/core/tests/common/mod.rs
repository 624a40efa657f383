#![allow(dead_code)]

use forge_core::lean::{format_multiline, LeanBridge};
use forge_core::statement::{
    AlignmentRating, FlStatement, Generator, NlStatement, NlStatus, Origin, ParallelStatement,
};

/// Independent edit-distance oracle: the full (m+1)×(n+1) table.
pub fn levenshtein_table(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// pass@k by brute force: the share of k-subsets of n candidates (the
/// first c successful) that contain a success.
pub fn pass_at_k_enumerated(n: u32, c: u32, k: u32) -> f64 {
    let success_mask: u32 = (1u32 << c) - 1;
    let (mut hit, mut all) = (0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() == k {
            all += 1;
            hit += u64::from(mask & success_mask != 0);
        }
    }
    hit as f64 / all as f64
}

/// An accepted synthetic pair for `code`, laid out and compiled on the mock.
pub fn accepted_pair(code: &str) -> ParallelStatement {
    let lean = LeanBridge::mock();
    let nl = NlStatement::new("a statement under test", ["c-1".into(), "c-2".into()], 1)
        .unwrap()
        .with_status(NlStatus::Accepted);
    let parsed = lean.parse(code).unwrap();
    let layout = format_multiline(&parsed);
    let mut fl = FlStatement::new(&nl.id, &layout, Generator::Student, 1);
    fl.compile = Some(lean.compile(&layout).unwrap());
    fl.parsed = Some(parsed);
    ParallelStatement::new(nl, fl, Origin::Synthetic, Some(AlignmentRating::Good), 1, None).unwrap()
}

pub fn reference_statements() -> Vec<String> {
    #[derive(serde::Deserialize)]
    struct Corpus {
        statements: Vec<String>,
    }
    let text = include_str!("../fixtures/reference_statements.json");
    serde_json::from_str::<Corpus>(text).unwrap().statements
}
