//! Decompose raw model responses into a reasoning process and a final
//! answer, and compute the format reward.
//!
//! A compliant response is exactly one `<think>...</think>` block followed
//! by exactly one `<answer>L</answer>` block, where `L` trims to a single
//! uppercase letter and nothing but whitespace appears outside the two
//! blocks. Anything else scores a format reward of 0, but the reasoning
//! process and final answer are still extracted best-effort when their
//! blocks are individually well-formed, so downstream auditing can look at
//! near-miss responses.

use serde::{Deserialize, Serialize};

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const ANSWER_OPEN: &str = "<answer>";
pub const ANSWER_CLOSE: &str = "</answer>";

/// A raw response decomposed into reasoning process (`rp`), final answer
/// (`fa`), and format compliance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub rp: Option<String>,
    pub fa: Option<char>,
    pub format_ok: bool,
}

struct Block<'a> {
    content: &'a str,
    start: usize,
    end: usize,
}

/// Returns the block delimited by `open`/`close` when the text contains
/// exactly one of each, properly ordered.
fn extract_block<'a>(raw: &'a str, open: &str, close: &str) -> Option<Block<'a>> {
    if raw.matches(open).count() != 1 || raw.matches(close).count() != 1 {
        return None;
    }
    let start = raw.find(open)?;
    let close_at = raw.find(close)?;
    if close_at < start + open.len() {
        return None;
    }
    Some(Block {
        content: &raw[start + open.len()..close_at],
        start,
        end: close_at + close.len(),
    })
}

fn single_uppercase(s: &str) -> Option<char> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_uppercase() => Some(c),
        _ => None,
    }
}

/// Parses a raw response. Never fails; non-compliance is encoded as
/// `format_ok = false`.
pub fn parse_response(raw: &str) -> ParsedResponse {
    let think = extract_block(raw, THINK_OPEN, THINK_CLOSE);
    let answer = extract_block(raw, ANSWER_OPEN, ANSWER_CLOSE);

    let rp = think.as_ref().map(|b| b.content.to_string());
    let fa = answer.as_ref().and_then(|b| single_uppercase(b.content.trim()));

    let format_ok = match (&think, &answer) {
        (Some(t), Some(a)) => {
            fa.is_some()
                && t.end <= a.start
                && raw[..t.start].trim().is_empty()
                && raw[t.end..a.start].trim().is_empty()
                && raw[a.end..].trim().is_empty()
        }
        _ => false,
    };

    ParsedResponse { rp, fa, format_ok }
}

/// Format reward: 1 for a compliant response, 0 otherwise.
pub fn format_reward(p: &ParsedResponse) -> f64 {
    if p.format_ok {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compliant_response() {
        let p = parse_response("<think>wind is southerly</think><answer>B</answer>");
        assert_eq!(p.rp.as_deref(), Some("wind is southerly"));
        assert_eq!(p.fa, Some('B'));
        assert!(p.format_ok);
        assert_eq!(format_reward(&p), 1.0);
    }

    #[test]
    fn missing_answer_block_extracts_rp() {
        let p = parse_response("<think>x</think>");
        assert_eq!(p.rp.as_deref(), Some("x"));
        assert_eq!(p.fa, None);
        assert!(!p.format_ok);
        assert_eq!(format_reward(&p), 0.0);
    }

    #[test]
    fn answer_whitespace_is_trimmed() {
        let p = parse_response("<think>x</think><answer> C </answer>");
        assert_eq!(p.fa, Some('C'));
        assert!(p.format_ok);
    }

    #[test]
    fn whitespace_between_blocks_is_compliant() {
        let p = parse_response("  <think>x</think>\n\n<answer>A</answer>\n");
        assert!(p.format_ok);
    }

    #[test]
    fn empty_input() {
        let p = parse_response("");
        assert_eq!(p, ParsedResponse { rp: None, fa: None, format_ok: false });
        assert_eq!(format_reward(&p), 0.0);
    }

    #[test]
    fn multi_character_answer_fails_format_and_fa() {
        let p = parse_response("<think>x</think><answer>A.</answer>");
        assert_eq!(p.fa, None);
        assert!(!p.format_ok);
    }

    #[test]
    fn lowercase_answer_rejected() {
        let p = parse_response("<think>x</think><answer>b</answer>");
        assert_eq!(p.fa, None);
        assert!(!p.format_ok);
    }

    #[test]
    fn text_outside_blocks_fails_format_but_extracts() {
        let p = parse_response("<think>x</think><answer>A</answer> trailing words");
        assert_eq!(p.rp.as_deref(), Some("x"));
        assert_eq!(p.fa, Some('A'));
        assert!(!p.format_ok);
    }

    #[test]
    fn duplicated_answer_blocks_reject_fa() {
        let p = parse_response("<think>x</think><answer>A</answer><answer>B</answer>");
        assert_eq!(p.fa, None);
        assert!(!p.format_ok);
        assert_eq!(p.rp.as_deref(), Some("x"));
    }

    #[test]
    fn answer_before_think_fails_format() {
        let p = parse_response("<answer>A</answer><think>x</think>");
        assert_eq!(p.rp.as_deref(), Some("x"));
        assert_eq!(p.fa, Some('A'));
        assert!(!p.format_ok);
    }

    #[test]
    fn answer_nested_in_think_fails_format() {
        let p = parse_response("<think>x<answer>A</answer></think>");
        assert_eq!(p.fa, Some('A'));
        assert!(!p.format_ok);
    }

    #[test]
    fn unclosed_think_block() {
        let p = parse_response("<think>x<answer>A</answer>");
        assert_eq!(p.rp, None);
        assert_eq!(p.fa, Some('A'));
        assert!(!p.format_ok);
    }

    proptest! {
        #[test]
        fn tagless_bodies_round_trip(
            body in "[a-zA-Z0-9 ,.]{0,60}",
            letter_idx in 0u8..26,
        ) {
            let letter = (b'A' + letter_idx) as char;
            let raw = format!("<think>{body}</think><answer>{letter}</answer>");
            let p = parse_response(&raw);
            prop_assert!(p.format_ok);
            prop_assert_eq!(p.rp.as_deref(), Some(body.as_str()));
            prop_assert_eq!(p.fa, Some(letter));
        }

        #[test]
        fn format_reward_is_binary(raw in ".{0,80}") {
            let r = format_reward(&parse_response(&raw));
            prop_assert!(r == 0.0 || r == 1.0);
        }
    }
}
