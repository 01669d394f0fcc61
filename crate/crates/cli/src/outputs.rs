//! Model-output files: JSONL rows joined to corpus items by id, or aligned
//! positionally when requested.

use crate::config::CliError;
use loco_core::corpus::McqItem;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRow {
    pub item_id: String,
    pub output: String,
}

pub fn load_outputs(path: &Path) -> Result<Vec<OutputRow>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read outputs {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: OutputRow = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!(
                "{} line {}: malformed output row: {e}",
                path.display(),
                idx + 1
            ))
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Groups rows by item id, preserving first-seen order of ids and the row
/// order within each id.
pub fn group_by_item(rows: Vec<OutputRow>) -> Vec<(String, Vec<String>)> {
    let mut order: Vec<String> = Vec::new();
    let mut slots: HashMap<String, usize> = HashMap::new();
    let mut grouped: Vec<Vec<String>> = Vec::new();
    for row in rows {
        match slots.get(&row.item_id) {
            Some(&slot) => grouped[slot].push(row.output),
            None => {
                slots.insert(row.item_id.clone(), grouped.len());
                order.push(row.item_id);
                grouped.push(vec![row.output]);
            }
        }
    }
    order.into_iter().zip(grouped).collect()
}

/// Joins output rows to corpus items: by id against `index`, or positionally
/// against `ordered` when `positional` is set.
pub fn join_rows<'a>(
    rows: &'a [OutputRow],
    index: &HashMap<&str, &'a McqItem>,
    ordered: &'a [McqItem],
    positional: bool,
    context: &str,
) -> Result<Vec<(&'a McqItem, &'a str)>, CliError> {
    if positional {
        if rows.len() != ordered.len() {
            return Err(CliError::Data(format!(
                "{context}: positional alignment needs {} rows, got {}",
                ordered.len(),
                rows.len()
            )));
        }
        return Ok(ordered
            .iter()
            .zip(rows)
            .map(|(item, row)| (item, row.output.as_str()))
            .collect());
    }
    rows.iter()
        .map(|row| {
            index
                .get(row.item_id.as_str())
                .map(|item| (*item, row.output.as_str()))
                .ok_or_else(|| {
                    CliError::Data(format!(
                        "{context}: output references unknown item id {:?}",
                        row.item_id
                    ))
                })
        })
        .collect()
}
