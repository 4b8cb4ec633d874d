// SPDX-License-Identifier: Apache-2.0

//! Conversation compression between refinement rounds.

use serde_json::json;

use super::prompt::{build_initial_prompt_for, ArtifactRole};
use super::provider::Message;
use crate::model::Problem;

/// Rough token estimate: one token per four bytes, rounded up.
pub fn approx_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

pub fn conversation_tokens(messages: &[Message]) -> u64 {
    messages.iter().map(|m| approx_tokens(&m.content)).sum()
}

/// Collapses a conversation into a single exchange: the initial prompt built
/// against the latest program, answered by a synthesized reply that carries
/// the latest command list and no edits.
pub fn compress_context(
    role: ArtifactRole,
    p: &Problem,
    latest_source: &str,
    latest_commands: &[String],
    constraints_summary: &str,
) -> Vec<Message> {
    let blocks_field = match role {
        ArtifactRole::Generator => "search_replace_generator_blocks",
        ArtifactRole::Checker => "search_replace_checker_blocks",
    };
    let reply = json!({
        "input_constraints_summary": constraints_summary,
        blocks_field: [],
        "command_list": latest_commands,
    });
    vec![
        Message::user(build_initial_prompt_for(role, p, latest_source)),
        Message::assistant(serde_json::to_string_pretty(&reply).expect("json serializes")),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::response::parse_generation;
    use crate::model::fixtures::ab_problem;

    #[test]
    fn compressed_history_is_two_turns_with_latest_state() {
        let cmds = vec!["./gen --n 1".to_string(), "./gen --n 2".to_string()];
        let h = compress_context(ArtifactRole::Generator, &ab_problem(), "GEN v3", &cmds, "a, b small");
        assert_eq!(h.len(), 2);
        assert!(h[0].content.contains("GEN v3"));
        let reply = parse_generation(&h[1].content).unwrap();
        assert_eq!(reply.commands, cmds);
        assert!(reply.blocks.is_empty());
        assert_eq!(reply.input_constraints_summary, "a, b small");
    }

    #[test]
    fn token_estimate() {
        assert_eq!(approx_tokens(""), 0);
        assert_eq!(approx_tokens("abcde"), 2);
    }
}
