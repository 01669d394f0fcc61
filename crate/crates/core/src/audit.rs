//! Detection and classification of self-contradictory reasoning, summary
//! statistics, and judge validation via Cohen's kappa.
//!
//! A response is self-contradictory when the judge's pick for its reasoning
//! process differs from its own final answer. Three types are
//! distinguished: reasoning supports the gold answer but the final answer
//! is wrong (type 1), reasoning supports a wrong option but the final
//! answer is right (type 2), and everything else — wrong-vs-wrong
//! mismatches and inconclusive reasoning (type 3). Responses without an
//! extractable final answer, or whose judge call failed, are unauditable.

use crate::corpus::McqItem;
use crate::judge::{Judge, JudgeVerdict};
use crate::parse::{parse_response, ParsedResponse};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::hash::Hash;
use thiserror::Error;

/// Self-contradiction type, serialized as the integer 1, 2, or 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ContraType {
    Type1 = 1,
    Type2 = 2,
    Type3 = 3,
}

impl From<ContraType> for u8 {
    fn from(t: ContraType) -> u8 {
        t as u8
    }
}

impl TryFrom<u8> for ContraType {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(ContraType::Type1),
            2 => Ok(ContraType::Type2),
            3 => Ok(ContraType::Type3),
            other => Err(format!("contra type must be 1, 2, or 3, got {other}")),
        }
    }
}

/// Wire form of the judge's pick in audit records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum FaRp {
    Letter(char),
    Indeterminate,
    Failed,
}

impl From<FaRp> for String {
    fn from(v: FaRp) -> String {
        match v {
            FaRp::Letter(c) => c.to_string(),
            FaRp::Indeterminate => "indeterminate".to_string(),
            FaRp::Failed => "failed".to_string(),
        }
    }
}

impl TryFrom<String> for FaRp {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.as_str() {
            "indeterminate" => Ok(FaRp::Indeterminate),
            "failed" => Ok(FaRp::Failed),
            other => {
                let mut chars = other.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii_uppercase() => Ok(FaRp::Letter(c)),
                    _ => Err(format!("bad fa_rp value {other:?}")),
                }
            }
        }
    }
}

impl From<&JudgeVerdict> for FaRp {
    fn from(v: &JudgeVerdict) -> Self {
        match v {
            JudgeVerdict::Selected(c) => FaRp::Letter(*c),
            JudgeVerdict::Indeterminate => FaRp::Indeterminate,
            JudgeVerdict::Failed(_) => FaRp::Failed,
        }
    }
}

/// Per-response faithfulness verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub item_id: String,
    pub gold: char,
    pub fa: Option<char>,
    pub fa_rp: FaRp,
    pub self_contra: bool,
    #[serde(rename = "type")]
    pub contra_type: Option<ContraType>,
}

impl AuditRecord {
    /// Auditable means a final answer was extracted and the judge produced
    /// a usable verdict.
    pub fn is_auditable(&self) -> bool {
        self.fa.is_some() && self.fa_rp != FaRp::Failed
    }
}

/// Classifies one judged response against the gold answer.
pub fn classify(
    item_id: &str,
    p: &ParsedResponse,
    verdict: &JudgeVerdict,
    gold: char,
) -> AuditRecord {
    let base = AuditRecord {
        item_id: item_id.to_string(),
        gold,
        fa: p.fa,
        fa_rp: FaRp::from(verdict),
        self_contra: false,
        contra_type: None,
    };
    let Some(fa) = p.fa else {
        return base;
    };
    if matches!(verdict, JudgeVerdict::Failed(_)) {
        return base;
    }
    let (self_contra, contra_type) = match verdict {
        JudgeVerdict::Selected(x) if *x == fa => (false, None),
        JudgeVerdict::Selected(x) if *x == gold => (true, Some(ContraType::Type1)),
        JudgeVerdict::Indeterminate => (true, Some(ContraType::Type3)),
        JudgeVerdict::Selected(_) if fa == gold => (true, Some(ContraType::Type2)),
        JudgeVerdict::Selected(_) => (true, Some(ContraType::Type3)),
        JudgeVerdict::Failed(_) => unreachable!("failed verdicts handled above"),
    };
    AuditRecord {
        self_contra,
        contra_type,
        ..base
    }
}

/// Category proportions, in percent. `defined` is false when the base count
/// was zero (all proportions then read 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPercentages {
    pub defined: bool,
    pub consistent: f64,
    pub self_contra: f64,
    pub type1: f64,
    pub type2: f64,
    pub type3: f64,
    pub unauditable: f64,
}

/// Aggregated audit counts plus proportions over both plausible bases:
/// audited responses only, and all responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub total: usize,
    pub audited: usize,
    pub unauditable: usize,
    pub consistent: usize,
    pub self_contra_total: usize,
    pub type1: usize,
    pub type2: usize,
    pub type3: usize,
    pub percent_of_audited: AuditPercentages,
    pub percent_of_total: AuditPercentages,
}

fn percentages(
    consistent: usize,
    type1: usize,
    type2: usize,
    type3: usize,
    unauditable: usize,
    base: usize,
) -> AuditPercentages {
    let pct = |n: usize| {
        if base == 0 {
            0.0
        } else {
            100.0 * n as f64 / base as f64
        }
    };
    AuditPercentages {
        defined: base > 0,
        consistent: pct(consistent),
        self_contra: pct(type1 + type2 + type3),
        type1: pct(type1),
        type2: pct(type2),
        type3: pct(type3),
        unauditable: pct(unauditable),
    }
}

/// Counts categories and computes proportions. Percentages are exact here;
/// rounding belongs to presentation.
pub fn aggregate(records: &[AuditRecord]) -> AuditSummary {
    let mut consistent = 0;
    let mut unauditable = 0;
    let mut type1 = 0;
    let mut type2 = 0;
    let mut type3 = 0;
    for record in records {
        if !record.is_auditable() {
            unauditable += 1;
        } else if record.self_contra {
            match record.contra_type {
                Some(ContraType::Type1) => type1 += 1,
                Some(ContraType::Type2) => type2 += 1,
                Some(ContraType::Type3) => type3 += 1,
                None => unreachable!("self_contra records carry a type"),
            }
        } else {
            consistent += 1;
        }
    }
    let total = records.len();
    let audited = total - unauditable;
    AuditSummary {
        total,
        audited,
        unauditable,
        consistent,
        self_contra_total: type1 + type2 + type3,
        type1,
        type2,
        type3,
        percent_of_audited: percentages(consistent, type1, type2, type3, 0, audited),
        percent_of_total: percentages(consistent, type1, type2, type3, unauditable, total),
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("label lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("label lists are empty")]
    Empty,
}

/// Cohen's kappa between two aligned label lists, with chance agreement
/// from the marginal label frequencies. Returns 1 for the degenerate case
/// of total agreement with chance agreement 1.
pub fn cohen_kappa<T: Eq + Hash>(labels_a: &[T], labels_b: &[T]) -> Result<f64, AuditError> {
    if labels_a.len() != labels_b.len() {
        return Err(AuditError::LengthMismatch(labels_a.len(), labels_b.len()));
    }
    if labels_a.is_empty() {
        return Err(AuditError::Empty);
    }
    let n = labels_a.len() as f64;
    let observed = labels_a
        .iter()
        .zip(labels_b)
        .filter(|(a, b)| a == b)
        .count() as f64
        / n;
    let mut counts_a: HashMap<&T, usize> = HashMap::new();
    let mut counts_b: HashMap<&T, usize> = HashMap::new();
    for a in labels_a {
        *counts_a.entry(a).or_default() += 1;
    }
    for b in labels_b {
        *counts_b.entry(b).or_default() += 1;
    }
    let mut expected = 0.0;
    for (label, count_a) in &counts_a {
        if let Some(count_b) = counts_b.get(*label) {
            expected += (*count_a as f64 / n) * (*count_b as f64 / n);
        }
    }
    if (1.0 - expected).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Parses, judges, classifies, and aggregates a batch of responses.
/// Responses without a final answer or a usable reasoning process are
/// recorded as unauditable without consulting the judge.
pub async fn audit_run(
    responses: &[(McqItem, String)],
    judge: &Judge,
) -> (Vec<AuditRecord>, AuditSummary) {
    let parsed: Vec<ParsedResponse> = responses
        .iter()
        .map(|(_, raw)| parse_response(raw))
        .collect();
    let mut requests = Vec::new();
    let mut positions = Vec::new();
    for (i, p) in parsed.iter().enumerate() {
        let has_rp = p.rp.as_deref().is_some_and(|rp| !rp.trim().is_empty());
        if p.fa.is_some() && has_rp {
            requests.push((&responses[i].0, p.rp.as_deref().unwrap_or("")));
            positions.push(i);
        }
    }
    let mut verdicts: Vec<JudgeVerdict> = parsed
        .iter()
        .map(|p| {
            if p.fa.is_none() {
                JudgeVerdict::Failed("no final answer extracted".to_string())
            } else {
                JudgeVerdict::Failed("no reasoning process extracted".to_string())
            }
        })
        .collect();
    if !requests.is_empty() {
        for (pos, verdict) in positions
            .into_iter()
            .zip(judge.judge_batch(&requests).await)
        {
            verdicts[pos] = verdict;
        }
    }
    let records: Vec<AuditRecord> = responses
        .iter()
        .zip(parsed.iter())
        .zip(verdicts.iter())
        .map(|(((item, _), p), verdict)| classify(&item.id, p, verdict, item.answer))
        .collect();
    let summary = aggregate(&records);
    (records, summary)
}
