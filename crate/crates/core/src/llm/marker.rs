//! Relevance markers hidden in item descriptions.
//!
//! The rule-based mock's `sort-by-embedded-marker` rule reads these back,
//! which turns it into an oracle model for end-to-end tests.

const OPEN: &str = "⟨m=";
const CLOSE: char = '⟩';

/// Appends ` ⟨m=<score>⟩` to `description`. Scores use the shortest
/// round-tripping decimal form, so `extract_marker` returns them exactly.
pub fn embed_marker(description: &str, score: f64) -> String {
    if description.is_empty() {
        format!("{OPEN}{score}{CLOSE}")
    } else {
        format!("{description} {OPEN}{score}{CLOSE}")
    }
}

/// The last marker in `text`, if any.
pub fn extract_marker(text: &str) -> Option<f64> {
    let start = text.rfind(OPEN)? + OPEN.len();
    let len = text[start..].find(CLOSE)?;
    text[start..start + len].parse().ok()
}
