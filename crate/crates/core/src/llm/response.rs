// SPDX-License-Identifier: Apache-2.0

//! Decoding model replies into patches and command lists.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::genkit::{generator_args, normalize, parse_block, CommandError, PatchBlock};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResponseError {
    #[error("no JSON object found in response")]
    NoJson,
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}` must be {expected}")]
    WrongType {
        field: &'static str,
        expected: &'static str,
    },
    #[error("block {index}: {error}")]
    Block { index: usize, error: String },
    #[error("command {index} (`{command}`): {error}")]
    Command {
        index: usize,
        command: String,
        error: CommandError,
    },
}

/// Reply to an initial-generation prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub input_constraints_summary: String,
    pub blocks: Vec<PatchBlock>,
    pub commands: Vec<String>,
}

/// Reply to a refinement prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementResponse {
    pub blocks: Vec<PatchBlock>,
    pub replace: Vec<String>,
    pub add: Vec<String>,
}

/// Finds the JSON object in a reply that may wrap it in prose or a code
/// fence. Returns the first balanced `{...}` that parses as an object.
pub fn extract_json(text: &str) -> Result<Value, ResponseError> {
    let trimmed = text.trim();
    if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let mut first_err = None;
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v @ Value::Object(_))) => return Ok(v),
            Some(Err(e)) if first_err.is_none() => first_err = Some(e.to_string()),
            _ => {}
        }
    }
    Err(first_err.map_or(ResponseError::NoJson, ResponseError::Json))
}

fn string_list(obj: &Value, field: &'static str, required: bool) -> Result<Vec<String>, ResponseError> {
    match obj.get(field) {
        None | Some(Value::Null) if !required => Ok(Vec::new()),
        None => Err(ResponseError::MissingField(field)),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                _ => Err(ResponseError::WrongType {
                    field,
                    expected: "a list of strings",
                }),
            })
            .collect(),
        Some(_) => Err(ResponseError::WrongType {
            field,
            expected: "a list of strings",
        }),
    }
}

const BLOCK_FIELDS: [&str; 2] = ["search_replace_generator_blocks", "search_replace_checker_blocks"];

fn blocks(obj: &Value) -> Result<Vec<PatchBlock>, ResponseError> {
    let field = BLOCK_FIELDS
        .into_iter()
        .find(|f| obj.get(*f).is_some())
        .unwrap_or(BLOCK_FIELDS[0]);
    string_list(obj, field, false)?
        .iter()
        .enumerate()
        .map(|(index, raw)| {
            parse_block(raw).map_err(|e| ResponseError::Block {
                index,
                error: e.to_string(),
            })
        })
        .collect()
}

fn check_commands(commands: &[String]) -> Result<(), ResponseError> {
    for (index, cmd) in commands.iter().enumerate() {
        generator_args(cmd).map_err(|error| ResponseError::Command {
            index,
            command: cmd.clone(),
            error,
        })?;
    }
    Ok(())
}

pub fn parse_generation(text: &str) -> Result<GenerationResponse, ResponseError> {
    let obj = extract_json(text)?;
    let summary = match obj.get("input_constraints_summary") {
        Some(Value::String(s)) => s.clone(),
        None | Some(Value::Null) => String::new(),
        Some(_) => {
            return Err(ResponseError::WrongType {
                field: "input_constraints_summary",
                expected: "a string",
            })
        }
    };
    let blocks = blocks(&obj)?;
    let commands = string_list(&obj, "command_list", true)?;
    check_commands(&commands)?;
    Ok(GenerationResponse {
        input_constraints_summary: summary,
        blocks,
        commands,
    })
}

pub fn parse_refinement(text: &str) -> Result<RefinementResponse, ResponseError> {
    let obj = extract_json(text)?;
    let blocks = blocks(&obj)?;
    let replace = string_list(&obj, "replace_command_list", false)?;
    let add = string_list(&obj, "add_command_list", false)?;
    check_commands(&add)?;
    Ok(RefinementResponse {
        blocks,
        replace,
        add,
    })
}

/// Result of applying a refinement's command edits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandUpdate {
    pub commands: Vec<String>,
    /// Entries of the replace list that matched no current command.
    pub unknown_replacements: Vec<String>,
}

/// Removes every command named in `replace` (compared after whitespace
/// normalization) and appends the `add` commands that are not already present.
pub fn apply_commands(current: &[String], replace: &[String], add: &[String]) -> CommandUpdate {
    let removed: Vec<String> = replace.iter().map(|c| normalize(c)).collect();
    let known: Vec<String> = current.iter().map(|c| normalize(c)).collect();
    let unknown_replacements = replace
        .iter()
        .zip(&removed)
        .filter(|(_, n)| !known.contains(n))
        .map(|(raw, _)| raw.clone())
        .collect();

    let mut commands: Vec<String> = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    for (cmd, norm) in current.iter().zip(known) {
        if !removed.contains(&norm) && !seen.contains(&norm) {
            commands.push(cmd.clone());
            seen.push(norm);
        }
    }
    for cmd in add {
        let norm = normalize(cmd);
        if !seen.contains(&norm) {
            commands.push(cmd.clone());
            seen.push(norm);
        }
    }
    CommandUpdate {
        commands,
        unknown_replacements,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn fenced_json_with_prose() {
        let text = "Here you go:\n```json\n{\"input_constraints_summary\": \"n <= 10\", \
            \"search_replace_generator_blocks\": [], \"command_list\": [\"./gen --n 1\"]}\n```\nThanks";
        let r = parse_generation(text).unwrap();
        assert_eq!(r.input_constraints_summary, "n <= 10");
        assert_eq!(r.commands, ["./gen --n 1"]);
        assert!(r.blocks.is_empty());
    }

    #[test]
    fn prose_braces_before_object_are_skipped() {
        let text = "Use {n} carefully. {\"add_command_list\": [\"./gen 2\"]}";
        let r = parse_refinement(text).unwrap();
        assert_eq!(r.add, ["./gen 2"]);
        assert!(r.replace.is_empty());
    }

    #[test]
    fn blocks_are_parsed() {
        let text = r#"{"search_replace_generator_blocks": ["<<<<<<< SEARCH\nint n = 1;\n=======\nint n = 2;\n>>>>>>> REPLACE"], "command_list": []}"#;
        let r = parse_generation(text).unwrap();
        assert_eq!(r.blocks, vec![PatchBlock::new("int n = 1;", "int n = 2;")]);
    }

    #[test]
    fn checker_alias_field() {
        let text = r#"{"search_replace_checker_blocks": ["<<<<<<< SEARCH\na\n=======\nb\n>>>>>>> REPLACE"], "command_list": []}"#;
        assert_eq!(parse_generation(text).unwrap().blocks.len(), 1);
    }

    #[test]
    fn malformed_replies_are_rejected() {
        assert_eq!(parse_generation("no json here"), Err(ResponseError::NoJson));
        assert_eq!(
            parse_generation("{\"input_constraints_summary\": \"x\"}"),
            Err(ResponseError::MissingField("command_list"))
        );
        assert!(matches!(
            parse_generation("{\"command_list\": [\"python gen.py\"]}"),
            Err(ResponseError::Command { index: 0, .. })
        ));
        assert!(matches!(
            parse_refinement("{\"add_command_list\": \"./gen\"}"),
            Err(ResponseError::WrongType { .. })
        ));
    }

    #[test]
    fn block_missing_replace_marker_is_a_schema_violation() {
        let text = r#"{"command_list": [], "search_replace_generator_blocks": ["<<<<<<< SEARCH\na\n=======\nb\n>>>>>>> REPLACE", "<<<<<<< SEARCH\na\n=======\nb"]}"#;
        assert!(matches!(
            parse_generation(text),
            Err(ResponseError::Block { index: 1, .. })
        ));
    }

    #[test]
    fn command_edits() {
        let cur = s(&["./gen 1", "./gen  2", "./gen 3"]);
        let up = apply_commands(&cur, &s(&["./gen 2", "./gen 9"]), &s(&["./gen 4", "./gen 1"]));
        assert_eq!(up.commands, s(&["./gen 1", "./gen 3", "./gen 4"]));
        assert_eq!(up.unknown_replacements, s(&["./gen 9"]));
    }

    #[test]
    fn replace_then_readd_keeps_command() {
        let cur = s(&["./gen 1"]);
        let up = apply_commands(&cur, &s(&["./gen 1"]), &s(&["./gen 1"]));
        assert_eq!(up.commands, s(&["./gen 1"]));
    }
}
