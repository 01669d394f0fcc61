//! Group-relative advantage normalization and a desk-scale policy-gradient
//! trainer over response archetypes.
//!
//! The trainer is a softmax bandit: each step samples a group of response
//! archetypes from a shared categorical policy, renders them into raw
//! response texts, scores them with the reward engine, normalizes rewards
//! within the group, and nudges the archetype logits with a score-function
//! update. Its trace shows how the consistency proportion of sampled
//! responses evolves under different reward weightings.

use crate::corpus::McqItem;
use crate::judge::{Judge, JudgeVerdict};
use crate::parse::ParsedResponse;
use crate::reward::{reward_group_detailed, WeightConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GrpoError {
    #[error("group must contain at least 2 rewards, got {0}")]
    GroupTooSmall(usize),
    #[error("responses and verdicts differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no items to train on")]
    NoItems,
    #[error("invalid policy parameter: {0}")]
    InvalidPolicy(String),
}

/// Normalizes rewards within a group: subtract the group mean, divide by
/// the population standard deviation. A zero-variance group yields all-zero
/// advantages.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    if rewards.windows(2).all(|w| w[0] == w[1]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = variance.sqrt();
    if std == 0.0 {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Synthetic response templates, one per (format, consistency, accuracy)
/// signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Archetype {
    /// Reasoning supports the gold letter; final answer is the gold letter.
    ConsistentCorrect,
    /// Reasoning supports a wrong letter; final answer is that same letter.
    ConsistentWrong,
    /// Reasoning supports a wrong letter; final answer is the gold letter
    /// (the lucky guess).
    GuessCorrect,
    /// Reasoning supports the gold letter; final answer is a wrong letter.
    FlippedAnswer,
    /// No valid answer block; fails the format check.
    Malformed,
}

/// All archetypes, in trace-column order.
pub const ARCHETYPES: [Archetype; 5] = [
    Archetype::ConsistentCorrect,
    Archetype::ConsistentWrong,
    Archetype::GuessCorrect,
    Archetype::FlippedAnswer,
    Archetype::Malformed,
];

impl Archetype {
    /// Short column label.
    pub fn label(self) -> &'static str {
        match self {
            Archetype::ConsistentCorrect => "cc",
            Archetype::ConsistentWrong => "cw",
            Archetype::GuessCorrect => "gc",
            Archetype::FlippedAnswer => "cw_fa",
            Archetype::Malformed => "mf",
        }
    }

    pub fn index(self) -> usize {
        ARCHETYPES
            .iter()
            .position(|a| *a == self)
            .expect("archetype is listed")
    }
}

fn wrong_letter<R: Rng + ?Sized>(item: &McqItem, rng: &mut R) -> char {
    let others: Vec<char> = item
        .choices
        .keys()
        .copied()
        .filter(|c| *c != item.answer)
        .collect();
    others[rng.random_range(0..others.len())]
}

/// Renders an archetype into a raw response text for an item. The reasoning
/// text carries a `[[SUPPORTS:X]]` marker so the mock judge recovers the
/// intended verdict; wrong letters are drawn uniformly from the non-gold
/// choices.
pub fn render_response<R: Rng + ?Sized>(
    archetype: Archetype,
    item: &McqItem,
    rng: &mut R,
) -> String {
    let reasoning = |letter: char| {
        format!(
            "Comparing the options against the chart, option {letter} matches the observed pattern. [[SUPPORTS:{letter}]]"
        )
    };
    match archetype {
        Archetype::ConsistentCorrect => {
            let gold = item.answer;
            format!(
                "<think>{}</think><answer>{gold}</answer>",
                reasoning(gold)
            )
        }
        Archetype::ConsistentWrong => {
            let x = wrong_letter(item, rng);
            format!("<think>{}</think><answer>{x}</answer>", reasoning(x))
        }
        Archetype::GuessCorrect => {
            let x = wrong_letter(item, rng);
            let gold = item.answer;
            format!(
                "<think>{}</think><answer>{gold}</answer>",
                reasoning(x)
            )
        }
        Archetype::FlippedAnswer => {
            let x = wrong_letter(item, rng);
            format!(
                "<think>{}</think><answer>{x}</answer>",
                reasoning(item.answer)
            )
        }
        Archetype::Malformed => {
            "<think>The chart is ambiguous and the analysis trails off without a conclusion.</think>"
                .to_string()
        }
    }
}

/// Fraction of responses that are format-compliant and whose judge pick
/// equals their own final answer. Malformed responses are never counted as
/// consistent.
pub fn consistency_metric(
    responses: &[ParsedResponse],
    verdicts: &[JudgeVerdict],
) -> Result<f64, GrpoError> {
    if responses.len() != verdicts.len() {
        return Err(GrpoError::LengthMismatch(responses.len(), verdicts.len()));
    }
    if responses.is_empty() {
        return Ok(0.0);
    }
    let consistent = responses
        .iter()
        .zip(verdicts)
        .filter(|(p, v)| {
            p.format_ok && matches!(p.fa, Some(fa) if v.is_selected(fa))
        })
        .count();
    Ok(consistent as f64 / responses.len() as f64)
}

/// A categorical policy over archetypes: probabilities are
/// softmax(logits / temperature).
#[derive(Debug, Clone, PartialEq)]
pub struct ArchetypePolicy {
    logits: [f64; 5],
    pub temperature: f64,
    pub learning_rate: f64,
}

impl ArchetypePolicy {
    pub fn new(logits: [f64; 5], temperature: f64, learning_rate: f64) -> Result<Self, GrpoError> {
        if !temperature.is_finite() || temperature <= 0.0 {
            return Err(GrpoError::InvalidPolicy(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        if !learning_rate.is_finite() || learning_rate <= 0.0 {
            return Err(GrpoError::InvalidPolicy(format!(
                "learning_rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            logits,
            temperature,
            learning_rate,
        })
    }

    /// Builds a policy whose initial distribution equals `probabilities`.
    pub fn from_probabilities(
        probabilities: [f64; 5],
        temperature: f64,
        learning_rate: f64,
    ) -> Result<Self, GrpoError> {
        let sum: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| *p <= 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(GrpoError::InvalidPolicy(format!(
                "initial probabilities must be positive and sum to 1, got {probabilities:?}"
            )));
        }
        let mut logits = [0.0; 5];
        for (logit, p) in logits.iter_mut().zip(probabilities) {
            *logit = temperature * p.ln();
        }
        Self::new(logits, temperature, learning_rate)
    }

    /// Initial distribution where guessing is more probable than consistent
    /// correctness: cc 0.10, cw 0.30, gc 0.25, cw_fa 0.20, mf 0.15.
    pub fn default_init(temperature: f64, learning_rate: f64) -> Result<Self, GrpoError> {
        Self::from_probabilities([0.10, 0.30, 0.25, 0.20, 0.15], temperature, learning_rate)
    }

    pub fn logits(&self) -> [f64; 5] {
        self.logits
    }

    pub fn probabilities(&self) -> [f64; 5] {
        let scaled: Vec<f64> = self.logits.iter().map(|l| l / self.temperature).collect();
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs = [0.0; 5];
        let mut sum = 0.0;
        for (slot, s) in probs.iter_mut().zip(&scaled) {
            *slot = (s - max).exp();
            sum += *slot;
        }
        for p in &mut probs {
            *p /= sum;
        }
        probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Archetype {
        let probs = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return ARCHETYPES[i];
            }
        }
        ARCHETYPES[4]
    }

    /// Score-function update: each logit moves by
    /// `learning_rate * sum_i advantage_i * (1[sampled_i == a] - prob_a)`,
    /// with probabilities taken from before the update.
    fn reinforce(&mut self, sampled: &[Archetype], advantages: &[f64], probs: &[f64; 5]) {
        for (a, logit) in self.logits.iter_mut().enumerate() {
            let mut gradient = 0.0;
            for (archetype, advantage) in sampled.iter().zip(advantages) {
                let indicator = if archetype.index() == a { 1.0 } else { 0.0 };
                gradient += advantage * (indicator - probs[a]);
            }
            *logit += self.learning_rate * gradient;
        }
    }
}

/// One recorded training step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub mean_reward: f64,
    pub consistency: f64,
    /// Post-update probabilities, in [`ARCHETYPES`] order.
    pub probabilities: [f64; 5],
}

/// Full training trace, exportable as a plot-ready CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub steps: Vec<TraceStep>,
}

impl TrainingTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mean_reward,consistency_proportion");
        for archetype in ARCHETYPES {
            out.push_str(",p_");
            out.push_str(archetype.label());
        }
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!("{},{:.6},{:.6}", s.step, s.mean_reward, s.consistency));
            for p in s.probabilities {
                out.push_str(&format!(",{p:.6}"));
            }
            out.push('\n');
        }
        out
    }

    /// Mean consistency over the first `n` recorded steps.
    pub fn head_consistency(&self, n: usize) -> f64 {
        Self::mean_consistency(&self.steps[..n.min(self.steps.len())])
    }

    /// Mean consistency over the last `n` recorded steps.
    pub fn tail_consistency(&self, n: usize) -> f64 {
        let start = self.steps.len().saturating_sub(n);
        Self::mean_consistency(&self.steps[start..])
    }

    fn mean_consistency(steps: &[TraceStep]) -> f64 {
        if steps.is_empty() {
            return 0.0;
        }
        steps.iter().map(|s| s.consistency).sum::<f64>() / steps.len() as f64
    }
}

/// Runs the toy trainer: round-robin over items, sample a group of
/// archetypes per step, render, score, normalize, update. Fully
/// deterministic for a given seed. The consistency proportion is recorded
/// every step regardless of the consistency weight, so judge verdicts are
/// obtained for format-compliant responses even when rewards ignore them.
pub async fn train_toy(
    policy: &mut ArchetypePolicy,
    items: &[McqItem],
    steps: usize,
    group_size: usize,
    weights: &WeightConfig,
    judge: &Judge,
    seed: u64,
) -> Result<TrainingTrace, GrpoError> {
    if items.is_empty() {
        return Err(GrpoError::NoItems);
    }
    if group_size < 2 {
        return Err(GrpoError::GroupTooSmall(group_size));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = TrainingTrace::default();
    for step in 0..steps {
        let item = &items[step % items.len()];
        let probs = policy.probabilities();
        let sampled: Vec<Archetype> = (0..group_size).map(|_| policy.sample(&mut rng)).collect();
        let responses: Vec<String> = sampled
            .iter()
            .map(|a| render_response(*a, item, &mut rng))
            .collect();
        let scored = reward_group_detailed(&responses, item, weights, judge).await;

        // Verdicts for the consistency metric: reuse the reward pass's where
        // present, judge the remaining format-compliant responses.
        let mut metric: Vec<Option<JudgeVerdict>> =
            scored.iter().map(|s| s.verdict.clone()).collect();
        let mut extra_requests = Vec::new();
        let mut extra_positions = Vec::new();
        for (i, s) in scored.iter().enumerate() {
            if metric[i].is_none() && s.parsed.format_ok {
                extra_requests.push((item, s.parsed.rp.as_deref().unwrap_or("")));
                extra_positions.push(i);
            }
        }
        if !extra_requests.is_empty() {
            for (pos, verdict) in extra_positions
                .into_iter()
                .zip(judge.judge_batch(&extra_requests).await)
            {
                metric[pos] = Some(verdict);
            }
        }
        let metric_verdicts: Vec<JudgeVerdict> = metric
            .into_iter()
            .map(|v| v.unwrap_or_else(|| JudgeVerdict::Failed("not judged".to_string())))
            .collect();

        let rewards: Vec<f64> = scored.iter().map(|s| s.breakdown.total).collect();
        let advantages = group_advantages(&rewards)?;
        policy.reinforce(&sampled, &advantages, &probs);

        let parsed: Vec<ParsedResponse> = scored.iter().map(|s| s.parsed.clone()).collect();
        let consistency = consistency_metric(&parsed, &metric_verdicts)?;
        let mean_reward = rewards.iter().sum::<f64>() / group_size as f64;
        trace.steps.push(TraceStep {
            step: step + 1,
            mean_reward,
            consistency,
            probabilities: policy.probabilities(),
        });
    }
    Ok(trace)
}
