//! Subcommand implementations.

use crate::config::{Cli, CliError, Command, KappaArgs, RunConfig};
use crate::outputs::{group_by_item, join_rows, load_outputs};
use chrono::NaiveDate;
use loco_core::audit::{audit_run, cohen_kappa};
use loco_core::corpus::{load_corpus, CorpusError, McqItem, TaskId};
use loco_core::grpo::{train_toy, ArchetypePolicy};
use loco_core::harness::{
    cross_task_accuracy, delta_report, render_text_report, score_outputs, EvalReport, TaskMatrix,
};
use loco_core::judge::Judge;
use loco_core::reward::{reward_group_detailed, RewardRow, WeightConfig};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

pub async fn run(cli: Cli) -> Result<(), CliError> {
    let file = crate::config::load_file_config(cli.config.as_deref())?;
    match cli.command {
        Command::Score(args) => {
            score(crate::config::resolve(&args.common, args.outputs, &file)?).await
        }
        Command::Audit(args) => {
            audit(crate::config::resolve(&args.common, args.outputs, &file)?).await
        }
        Command::TrainToy(args) => {
            train_toy_cmd(crate::config::resolve(&args.common, None, &file)?).await
        }
        Command::Eval(args) => {
            eval(crate::config::resolve(&args.common, args.outputs, &file)?).await
        }
        Command::Kappa(args) => kappa(&args),
    }
}

fn load_corpus_checked(path: &Path) -> Result<Vec<McqItem>, CliError> {
    load_corpus(path).map_err(|e| match e {
        CorpusError::Io { .. } => CliError::Config(e.to_string()),
        other => CliError::Data(format!("{}: {other}", path.display())),
    })
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn index_items(items: &[McqItem]) -> HashMap<&str, &McqItem> {
    items.iter().map(|item| (item.id.as_str(), item)).collect()
}

fn build_judge(config: &RunConfig) -> Result<Judge, CliError> {
    Judge::from_config(config.judge.clone()).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Serialize)]
struct ScoreSummary {
    items: usize,
    responses: usize,
    weights: WeightConfig,
    mean_r_format: f64,
    mean_r_acc: f64,
    mean_r_loco: f64,
    mean_total: f64,
    judge_backend_calls: usize,
}

async fn score(config: RunConfig) -> Result<(), CliError> {
    let items = load_corpus_checked(config.corpus_path()?)?;
    let rows = load_outputs(config.outputs_path()?)?;
    let index = index_items(&items);
    let judge = build_judge(&config)?;
    let weights = config.weights.clone().unwrap_or_default();
    ensure_out_dir(&config.out_dir)?;

    let mut report_rows: Vec<RewardRow> = Vec::new();
    let mut groups = 0usize;
    if config.positional {
        if rows.len() != items.len() {
            return Err(CliError::Data(format!(
                "positional alignment needs {} rows, got {}",
                items.len(),
                rows.len()
            )));
        }
        for (item, row) in items.iter().zip(&rows) {
            let scored =
                reward_group_detailed(std::slice::from_ref(&row.output), item, &weights, &judge)
                    .await;
            report_rows.push(RewardRow::from_scored(&item.id, 0, &scored[0]));
            groups += 1;
        }
    } else {
        for (item_id, responses) in group_by_item(rows) {
            let item = index.get(item_id.as_str()).ok_or_else(|| {
                CliError::Data(format!("output references unknown item id {item_id:?}"))
            })?;
            let scored = reward_group_detailed(&responses, item, &weights, &judge).await;
            for (i, s) in scored.iter().enumerate() {
                report_rows.push(RewardRow::from_scored(&item_id, i, s));
            }
            groups += 1;
        }
    }

    let n = report_rows.len();
    let mean = |f: fn(&RewardRow) -> f64| {
        if n == 0 {
            0.0
        } else {
            report_rows.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let summary = ScoreSummary {
        items: groups,
        responses: n,
        weights: weights.clone(),
        mean_r_format: mean(|r| r.r_format),
        mean_r_acc: mean(|r| r.r_acc),
        mean_r_loco: mean(|r| r.r_loco),
        mean_total: mean(|r| r.total),
        judge_backend_calls: judge.backend_calls(),
    };

    let mut jsonl = String::new();
    for row in &report_rows {
        jsonl.push_str(&serde_json::to_string(row).expect("serializable row"));
        jsonl.push('\n');
    }
    write_file(&config.out_dir.join("reward_report.jsonl"), &jsonl)?;
    write_file(
        &config.out_dir.join("reward_summary.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&summary).expect("serializable summary")
        ),
    )?;
    println!(
        "scored {} response(s) over {} item(s): mean total {:.4}, mean accuracy {:.4}, judge calls {}",
        summary.responses, summary.items, summary.mean_total, summary.mean_r_acc,
        summary.judge_backend_calls
    );
    Ok(())
}

async fn audit(config: RunConfig) -> Result<(), CliError> {
    let items = load_corpus_checked(config.corpus_path()?)?;
    let rows = load_outputs(config.outputs_path()?)?;
    let index = index_items(&items);
    let judge = build_judge(&config)?;
    ensure_out_dir(&config.out_dir)?;

    let joined = join_rows(&rows, &index, &items, config.positional, "audit")?;
    let responses: Vec<(McqItem, String)> = joined
        .into_iter()
        .map(|(item, output)| (item.clone(), output.to_string()))
        .collect();
    let (records, summary) = audit_run(&responses, &judge).await;

    let mut jsonl = String::new();
    for record in &records {
        jsonl.push_str(&serde_json::to_string(record).expect("serializable record"));
        jsonl.push('\n');
    }
    write_file(&config.out_dir.join("audit.jsonl"), &jsonl)?;
    write_file(
        &config.out_dir.join("audit_summary.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&summary).expect("serializable summary")
        ),
    )?;
    println!(
        "audited {} response(s): consistent {}, self-contra {} (type1 {}, type2 {}, type3 {}), unauditable {}",
        summary.total,
        summary.consistent,
        summary.self_contra_total,
        summary.type1,
        summary.type2,
        summary.type3,
        summary.unauditable
    );
    Ok(())
}

/// Built-in corpus for judge-offline trainer demos: one item per task.
fn demo_items() -> Vec<McqItem> {
    TaskId::ALL
        .into_iter()
        .enumerate()
        .map(|(i, task)| {
            let mut choices = BTreeMap::new();
            for (j, letter) in ('A'..='D').enumerate() {
                choices.insert(letter, format!("{task} candidate pattern {j}"));
            }
            McqItem {
                id: format!("demo-{task}"),
                task,
                date: NaiveDate::from_ymd_opt(2023, 1, (i + 1) as u32).expect("valid date"),
                question: format!("What does the {task} chart indicate?"),
                choices,
                answer: ['A', 'B', 'C', 'D'][i % 4],
                image_path: None,
            }
        })
        .collect()
}

fn weight_label(weights: &WeightConfig) -> &'static str {
    if *weights == WeightConfig::loco_rft() {
        "loco_rft"
    } else if *weights == WeightConfig::rft_baseline() {
        "rft"
    } else {
        "custom"
    }
}

async fn train_toy_cmd(config: RunConfig) -> Result<(), CliError> {
    let items = match &config.corpus {
        Some(path) => load_corpus_checked(path)?,
        None => demo_items(),
    };
    let presets: Vec<WeightConfig> = match &config.weights {
        Some(w) => vec![w.clone()],
        None => vec![WeightConfig::loco_rft(), WeightConfig::rft_baseline()],
    };
    ensure_out_dir(&config.out_dir)?;
    for weights in presets {
        let judge = build_judge(&config)?;
        let mut policy = ArchetypePolicy::default_init(config.temperature, config.learning_rate)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let trace = train_toy(
            &mut policy,
            &items,
            config.steps,
            config.group_size,
            &weights,
            &judge,
            config.seed,
        )
        .await
        .map_err(|e| CliError::Config(e.to_string()))?;
        let label = weight_label(&weights);
        write_file(
            &config.out_dir.join(format!("trace_{label}.csv")),
            &trace.to_csv(),
        )?;
        if let Some(last) = trace.steps.last() {
            println!(
                "{label}: {} step(s), final consistency {:.3}, final mean reward {:.3}",
                trace.steps.len(),
                last.consistency,
                last.mean_reward
            );
        } else {
            println!("{label}: 0 step(s)");
        }
    }
    Ok(())
}

fn pair_file(dir: &Path, train: TaskId, test: TaskId) -> PathBuf {
    dir.join(format!("{train}__{test}.jsonl"))
}

fn load_baseline(path: &Path) -> Result<BTreeMap<TaskId, f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read baseline {}: {e}", path.display())))?;
    let raw: BTreeMap<String, f64> = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("bad baseline {}: {e}", path.display())))?;
    let mut baseline = BTreeMap::new();
    for (name, value) in raw {
        let task: TaskId = name
            .parse()
            .map_err(|e| CliError::Data(format!("bad baseline {}: {e}", path.display())))?;
        baseline.insert(task, value);
    }
    Ok(baseline)
}

async fn eval(config: RunConfig) -> Result<(), CliError> {
    let items = load_corpus_checked(config.corpus_path()?)?;
    let outputs_dir = config.outputs_path()?;
    if !outputs_dir.is_dir() {
        return Err(CliError::Config(format!(
            "outputs directory {} does not exist",
            outputs_dir.display()
        )));
    }
    let index = index_items(&items);
    let mut by_task: BTreeMap<TaskId, Vec<McqItem>> = BTreeMap::new();
    for item in &items {
        by_task.entry(item.task).or_default().push(item.clone());
    }

    let missing: Vec<String> = TaskId::ALL
        .into_iter()
        .flat_map(|train| TaskId::ALL.into_iter().map(move |test| (train, test)))
        .filter(|(train, test)| !pair_file(outputs_dir, *train, *test).exists())
        .map(|(train, test)| format!("({train}, {test})"))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "missing outputs for {} task pair(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }

    let empty = Vec::new();
    let mut cells = vec![vec![0.0; 7]; 7];
    for (row, train) in TaskId::ALL.into_iter().enumerate() {
        for (col, test) in TaskId::ALL.into_iter().enumerate() {
            let path = pair_file(outputs_dir, train, test);
            let rows = load_outputs(&path)?;
            let context = format!("{}", path.display());
            let ordered = by_task.get(&test).unwrap_or(&empty);
            let joined = join_rows(&rows, &index, ordered, config.positional, &context)?;
            let (pair_items, pair_outputs): (Vec<McqItem>, Vec<String>) = joined
                .into_iter()
                .map(|(item, output)| (item.clone(), output.to_string()))
                .unzip();
            cells[row][col] = score_outputs(&pair_items, &pair_outputs)
                .map_err(|e| CliError::Data(format!("{context}: {e}")))?;
        }
    }

    let matrix = TaskMatrix::full(cells).map_err(|e| CliError::Data(e.to_string()))?;
    let baseline = config
        .baseline
        .as_deref()
        .map(load_baseline)
        .transpose()?;
    let report = EvalReport::build(&matrix, baseline.as_ref())
        .map_err(|e| CliError::Data(e.to_string()))?;
    ensure_out_dir(&config.out_dir)?;
    write_file(
        &config.out_dir.join("report.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&report).expect("serializable report")
        ),
    )?;
    write_file(&config.out_dir.join("matrix.csv"), &matrix.to_csv())?;

    let accuracy = cross_task_accuracy(&matrix);
    let deltas = baseline
        .as_ref()
        .map(|b| delta_report(&matrix, b))
        .transpose()
        .map_err(|e| CliError::Data(e.to_string()))?;
    print!("{}", render_text_report(&matrix, &accuracy, deltas.as_ref()));
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read labels {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn kappa(args: &KappaArgs) -> Result<(), CliError> {
    let a = read_labels(&args.labels_a)?;
    let b = read_labels(&args.labels_b)?;
    let kappa = cohen_kappa(&a, &b).map_err(|e| CliError::Data(e.to_string()))?;
    println!("{:.4}", kappa + 0.0);
    Ok(())
}
