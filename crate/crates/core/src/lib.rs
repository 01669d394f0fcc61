//! Reward computation, LLM-judged consistency scoring, reasoning-
//! faithfulness auditing, group-relative training dynamics, and cross-task
//! evaluation for multiple-choice reasoning benchmarks.
//!
//! ## Modules
//!
//! - [`corpus`]: benchmark items, JSONL I/O, chronological splits
//! - [`parse`]: think/answer block extraction and the format reward
//! - [`judge`]: prompt construction, verdict parsing, pluggable backends
//!   with bounded concurrency and caching
//! - [`reward`]: accuracy and consistency rewards, weighted totals
//! - [`grpo`]: group-relative advantages and the toy archetype trainer
//! - [`audit`]: self-contradiction detection, statistics, Cohen's kappa
//! - [`harness`]: accuracy scoring and cross-task matrix reports

pub mod audit;
pub mod corpus;
pub mod grpo;
pub mod harness;
pub mod judge;
pub mod parse;
pub mod reward;

pub use audit::{aggregate, audit_run, classify, cohen_kappa, AuditRecord, AuditSummary};
pub use corpus::{chronological_split, load_corpus, McqItem, SplitSpec, TaskId, Theme};
pub use grpo::{
    consistency_metric, group_advantages, render_response, train_toy, Archetype,
    ArchetypePolicy, TrainingTrace, ARCHETYPES,
};
pub use harness::{
    cross_task_accuracy, delta_report, score_outputs, CrossTaskAccuracy, DeltaReport,
    EvalReport, TaskMatrix,
};
pub use judge::{
    build_judge_prompt, mock_judge, parse_verdict, Judge, JudgeBackend, JudgeConfig,
    JudgeVerdict, MockBackend,
};
pub use parse::{format_reward, parse_response, ParsedResponse};
pub use reward::{
    accuracy_reward, loco_reward, reward_group, reward_group_detailed, total_reward,
    RewardBreakdown, RewardRow, ScoredResponse, WeightConfig,
};
