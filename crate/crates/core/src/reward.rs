//! Reward components and weighted totals for parsed responses.
//!
//! Three binary components: format compliance, answer accuracy, and logical
//! consistency (the judge's pick matching the response's own final answer).
//! The consistency component is gated on format compliance, and the judge is
//! never consulted for malformed responses or when its weight is zero.

use crate::corpus::McqItem;
use crate::judge::{Judge, JudgeVerdict};
use crate::parse::{format_reward, parse_response, ParsedResponse};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Weights for the three reward components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub w_format: f64,
    pub w_loco: f64,
    pub w_acc: f64,
}

impl WeightConfig {
    /// Consistency-rewarding preset: 0.1 format, 0.3 consistency, 0.6 accuracy.
    pub fn loco_rft() -> Self {
        Self {
            w_format: 0.1,
            w_loco: 0.3,
            w_acc: 0.6,
        }
    }

    /// Plain RFT preset: 0.1 format, no consistency reward, 0.9 accuracy.
    pub fn rft_baseline() -> Self {
        Self {
            w_format: 0.1,
            w_loco: 0.0,
            w_acc: 0.9,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, w) in [
            ("w_format", self.w_format),
            ("w_loco", self.w_loco),
            ("w_acc", self.w_acc),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(format!("{name} must be a non-negative number, got {w}"));
            }
        }
        Ok(())
    }

    /// Largest achievable total under these weights.
    pub fn max_total(&self) -> f64 {
        self.w_format + self.w_loco + self.w_acc
    }
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self::loco_rft()
    }
}

impl FromStr for WeightConfig {
    type Err = String;

    /// Accepts a preset name ("loco-rft" | "rft") or a
    /// "w_format,w_loco,w_acc" triple.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "loco-rft" | "loco_rft" => return Ok(Self::loco_rft()),
            "rft" | "rft-baseline" | "rft_baseline" => return Ok(Self::rft_baseline()),
            _ => {}
        }
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(format!(
                "expected a preset name (loco-rft | rft) or three comma-separated weights, got {s:?}"
            ));
        }
        let mut values = [0.0f64; 3];
        for (slot, part) in values.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse()
                .map_err(|e| format!("bad weight {part:?}: {e}"))?;
        }
        let config = Self {
            w_format: values[0],
            w_loco: values[1],
            w_acc: values[2],
        };
        config.validate()?;
        Ok(config)
    }
}

/// Per-response reward components and their weighted total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_format: f64,
    pub r_acc: f64,
    pub r_loco: f64,
    pub total: f64,
    pub weights: WeightConfig,
}

impl RewardBreakdown {
    fn from_components(r_format: f64, r_loco: f64, r_acc: f64, weights: WeightConfig) -> Self {
        let total =
            weights.w_format * r_format + weights.w_loco * r_loco + weights.w_acc * r_acc;
        Self {
            r_format,
            r_acc,
            r_loco,
            total,
            weights,
        }
    }
}

/// Accuracy reward: 1 iff the extracted final answer equals the gold letter.
pub fn accuracy_reward(p: &ParsedResponse, gold: char) -> f64 {
    if p.fa == Some(gold) {
        1.0
    } else {
        0.0
    }
}

/// Logical-consistency reward: 1 iff the response is format-compliant and
/// the judge selected exactly the response's own final answer. Indeterminate
/// and failed verdicts score 0, and any verdict is ignored for malformed
/// responses.
pub fn loco_reward(verdict: &JudgeVerdict, p: &ParsedResponse) -> f64 {
    if !p.format_ok {
        return 0.0;
    }
    match (verdict, p.fa) {
        (JudgeVerdict::Selected(x), Some(fa)) if *x == fa => 1.0,
        _ => 0.0,
    }
}

/// Combines the three components into a weighted breakdown.
pub fn total_reward(
    p: &ParsedResponse,
    verdict: &JudgeVerdict,
    gold: char,
    weights: &WeightConfig,
) -> RewardBreakdown {
    RewardBreakdown::from_components(
        format_reward(p),
        loco_reward(verdict, p),
        accuracy_reward(p, gold),
        weights.clone(),
    )
}

/// One scored response: the parse, the judge verdict (when the judge was
/// consulted), and the reward breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredResponse {
    pub parsed: ParsedResponse,
    pub verdict: Option<JudgeVerdict>,
    pub breakdown: RewardBreakdown,
}

/// Scores a group of raw responses against one item. The judge is consulted
/// only for format-compliant responses and only when the consistency weight
/// is positive; results are positionally aligned with the input.
pub async fn reward_group_detailed(
    responses: &[String],
    item: &McqItem,
    weights: &WeightConfig,
    judge: &Judge,
) -> Vec<ScoredResponse> {
    let parsed: Vec<ParsedResponse> = responses.iter().map(|r| parse_response(r)).collect();
    let mut verdicts: Vec<Option<JudgeVerdict>> = vec![None; responses.len()];
    if weights.w_loco > 0.0 {
        let mut requests = Vec::new();
        let mut positions = Vec::new();
        for (i, p) in parsed.iter().enumerate() {
            if p.format_ok {
                requests.push((item, p.rp.as_deref().unwrap_or("")));
                positions.push(i);
            }
        }
        if !requests.is_empty() {
            for (pos, verdict) in positions
                .into_iter()
                .zip(judge.judge_batch(&requests).await)
            {
                verdicts[pos] = Some(verdict);
            }
        }
    }
    parsed
        .into_iter()
        .zip(verdicts)
        .map(|(p, verdict)| {
            let r_format = format_reward(&p);
            let r_acc = accuracy_reward(&p, item.answer);
            let r_loco = verdict
                .as_ref()
                .map(|v| loco_reward(v, &p))
                .unwrap_or(0.0);
            ScoredResponse {
                breakdown: RewardBreakdown::from_components(
                    r_format,
                    r_loco,
                    r_acc,
                    weights.clone(),
                ),
                parsed: p,
                verdict,
            }
        })
        .collect()
}

/// Like [`reward_group_detailed`], keeping only the breakdowns.
pub async fn reward_group(
    responses: &[String],
    item: &McqItem,
    weights: &WeightConfig,
    judge: &Judge,
) -> Vec<RewardBreakdown> {
    reward_group_detailed(responses, item, weights, judge)
        .await
        .into_iter()
        .map(|s| s.breakdown)
        .collect()
}

/// One row of the reward report JSONL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardRow {
    pub item_id: String,
    pub response_index: usize,
    pub r_format: f64,
    pub r_acc: f64,
    pub r_loco: f64,
    pub total: f64,
    pub fa: Option<char>,
    /// Verdict letter, "indeterminate", "failed", or null when the judge was
    /// not consulted for this response.
    pub fa_rp: Option<String>,
}

impl RewardRow {
    pub fn from_scored(item_id: &str, response_index: usize, scored: &ScoredResponse) -> Self {
        Self {
            item_id: item_id.to_string(),
            response_index,
            r_format: scored.breakdown.r_format,
            r_acc: scored.breakdown.r_acc,
            r_loco: scored.breakdown.r_loco,
            total: scored.breakdown.total,
            fa: scored.parsed.fa,
            fa_rp: scored.verdict.as_ref().map(verdict_label),
        }
    }
}

/// Stable wire label for a verdict.
pub fn verdict_label(verdict: &JudgeVerdict) -> String {
    match verdict {
        JudgeVerdict::Selected(c) => c.to_string(),
        JudgeVerdict::Indeterminate => "indeterminate".to_string(),
        JudgeVerdict::Failed(_) => "failed".to_string(),
    }
}
