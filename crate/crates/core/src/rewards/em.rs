//! Exact-match accuracy for free-form answers.

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercase, collapse whitespace, strip terminal punctuation and a leading
/// article.
pub fn normalize_em(s: &str) -> String {
    let lower = s.to_lowercase();
    let stripped = lower.trim().trim_end_matches(|c: char| ".,!?;:".contains(c) || c.is_whitespace());
    let mut tokens: Vec<&str> = stripped.split_whitespace().collect();
    if tokens.len() > 1 && ARTICLES.contains(&tokens[0]) {
        tokens.remove(0);
    }
    tokens.join(" ")
}

pub fn em1(pred: &str, gt_list: &[impl AsRef<str>]) -> f64 {
    let p = normalize_em(pred);
    if gt_list.iter().any(|g| normalize_em(g.as_ref()) == p) {
        1.0
    } else {
        0.0
    }
}

fn contains_tokens(haystack: &[&str], needle: &[&str]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Exact match, or either side contains the other as a contiguous run of
/// whole tokens.
pub fn em_refined(pred: &str, gt_list: &[impl AsRef<str>]) -> f64 {
    if em1(pred, gt_list) == 1.0 {
        return 1.0;
    }
    let p = normalize_em(pred);
    let pt: Vec<&str> = p.split_whitespace().collect();
    let hit = gt_list.iter().any(|g| {
        let g = normalize_em(g.as_ref());
        let gtoks: Vec<&str> = g.split_whitespace().collect();
        contains_tokens(&pt, &gtoks) || contains_tokens(&gtoks, &pt)
    });
    if hit {
        1.0
    } else {
        0.0
    }
}
