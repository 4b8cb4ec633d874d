// SPDX-License-Identifier: Apache-2.0

//! Fixture problems, generators and scripted model replies shared by the
//! integration tests. Everything runs as Python so no C++ compile is needed.

#![allow(dead_code)]

use std::path::Path;

use serde_json::json;
use tcforge::genkit::PatchBlock;
use tcforge::llm::{Gateway, GatewayConfig, Provider, RecordingProvider, ReplayProvider, ScriptedProvider};
use tcforge::model::{Label, Language, PassThrough, Problem, Solution, TestCase};
use tcforge::refine::{LoopConfig, LoopTrace, Refiner};
use tcforge::sandbox::{Limits, Sandbox};

pub fn py(src: &str, label: Label) -> Solution {
    Solution::new(src, Language::Python, label)
}

fn problem(id: &str, statement: &str, reference: &str, correct: &[&str], incorrect: &[&str], public: &[(&str, &str)]) -> Problem {
    Problem {
        id: id.into(),
        statement: statement.into(),
        reference_solution: Some(py(reference, Label::Reference)),
        correct_pool: correct.iter().map(|s| py(s, Label::Correct)).collect(),
        incorrect_pool: incorrect.iter().map(|s| py(s, Label::Incorrect)).collect(),
        public_tests: public.iter().map(|(i, o)| TestCase::public(*i, *o)).collect(),
        time_limit: 2000,
        memory_limit: 256,
        tags: vec![],
        difficulty: None,
        extra: PassThrough::default(),
    }
}

/// a+b. One wrong solution subtracts.
pub fn sum_problem() -> Problem {
    problem(
        "sum",
        "Given two integers a and b, print their sum.\n\nInput\nTwo integers a and b.\n\nOutput\nOne integer.",
        "a, b = map(int, input().split())\nprint(a + b)\n",
        &["print(sum(map(int, input().split())))\n"],
        &["a, b = map(int, input().split())\nprint(a - b)\n"],
        &[("2 3\n", "5\n")],
    )
}

/// Maximum of a list. Each wrong solution is exposed by a different kind
/// of input: a non-maximal first element, all-negative values, long lists.
pub fn max_problem() -> Problem {
    problem(
        "max",
        "Given n integers, print the largest of them.\n\nInput\nn, then n integers.\n\nOutput\nThe maximum.",
        "input()\nprint(max(map(int, input().split())))\n",
        &[
            "input()\nxs = sorted(map(int, input().split()))\nprint(xs[-1])\n",
            "n = int(input())\nxs = list(map(int, input().split()))\nm = xs[0]\nfor x in xs:\n    m = max(m, x)\nprint(m)\n",
        ],
        &[
            "input()\nprint(input().split()[0])\n",
            "input()\nm = 0\nfor x in map(int, input().split()):\n    m = max(m, x)\nprint(m)\n",
            "n = int(input())\nxs = list(map(int, input().split()))\nprint(max(xs) if n <= 5 else xs[0])\n",
        ],
        &[("3\n1 3 2\n", "3\n")],
    )
}

/// Any proper divisor of n, or -1. Several outputs are valid.
pub fn divisor_problem() -> Problem {
    problem(
        "divisor",
        "Given n, print any divisor d of n with 1 < d < n, or -1 if none exists.\n\nInput\nOne integer n.\n\nOutput\nOne integer.",
        "n = int(input())\nprint(next((d for d in range(2, n) if n % d == 0), -1))\n",
        &[
            "n = int(input())\nprint(next((d for d in range(2, n) if n % d == 0), -1))\n",
            "n = int(input())\nprint(next((n // d for d in range(2, n) if n % d == 0), -1))\n",
        ],
        &[
            "n = int(input())\nprint(n)\n",
            "n = int(input())\nprint(-1)\n",
        ],
        &[("6\n", "2\n")],
    )
}

pub fn fixture_problems() -> Vec<Problem> {
    vec![sum_problem(), max_problem(), divisor_problem()]
}

pub const SUM_GENERATOR: &str = "import sys\na, b = int(sys.argv[1]), int(sys.argv[2])\nprint(a, b)\n";

pub const MAX_GENERATOR: &str = "import sys\nn = int(sys.argv[1])\nprint(n)\nprint(\" \".join(str(i + 1) for i in range(n)))\n";

pub const DIVISOR_GENERATOR: &str = "import sys\nprint(sys.argv[1])\n";

pub const DIVISOR_CHECKER: &str = "import sys\n\
n = int(open(sys.argv[1]).read())\n\
out = open(sys.argv[2]).read().split()\n\
ans = int(open(sys.argv[3]).read())\n\
if len(out) != 1:\n    sys.exit(1)\n\
d = int(out[0])\n\
if ans == -1:\n    sys.exit(0 if d == -1 else 1)\n\
sys.exit(0 if 1 < d < n and n % d == 0 else 1)\n";

/// Token-wise comparison; a checker for problems with a unique answer.
pub const EXACT_CHECKER: &str = "import sys\n\
out = open(sys.argv[2]).read().split()\n\
ans = open(sys.argv[3]).read().split()\n\
sys.exit(0 if out == ans else 1)\n";

pub fn bootstrap(source: &str) -> String {
    PatchBlock::new("", source.trim_end_matches('\n')).render()
}

pub fn block(search: &str, replace: &str) -> String {
    PatchBlock::new(search, replace).render()
}

pub fn generation_reply(summary: &str, blocks: &[String], commands: &[&str]) -> String {
    json!({
        "input_constraints_summary": summary,
        "search_replace_generator_blocks": blocks,
        "command_list": commands,
    })
    .to_string()
}

pub fn checker_reply(blocks: &[String]) -> String {
    json!({
        "input_constraints_summary": "",
        "search_replace_checker_blocks": blocks,
        "command_list": ["./gen"],
    })
    .to_string()
}

pub fn refinement_reply(blocks: &[String], replace: &[&str], add: &[&str]) -> String {
    json!({
        "search_replace_generator_blocks": blocks,
        "replace_command_list": replace,
        "add_command_list": add,
    })
    .to_string()
}

/// Replies that take the max fixture through three iterations, each adding
/// an input kind that exposes one more wrong solution.
pub fn max_script() -> Vec<String> {
    vec![
        generation_reply("1 <= n <= 10, |a_i| <= 10", &[bootstrap(MAX_GENERATOR)], &["./gen 3"]),
        refinement_reply(
            &[
                block(
                    "n = int(sys.argv[1])",
                    "n = int(sys.argv[1])\nsign = -1 if len(sys.argv) > 2 and sys.argv[2] == \"neg\" else 1",
                ),
                block("str(i + 1)", "str(sign * (i + 1))"),
            ],
            &[],
            &["./gen 3 neg"],
        ),
        refinement_reply(&[], &[], &["./gen 8"]),
    ]
}

/// Thresholds are met on the first evaluation.
pub fn sum_script() -> Vec<String> {
    vec![generation_reply("|a|, |b| <= 100", &[bootstrap(SUM_GENERATOR)], &["./gen 2 3", "./gen 7 -4"])]
}

/// One prime and one composite; never reaches the TPR threshold under
/// string comparison because a valid alternative answer is rejected.
pub fn divisor_script(n_max: u32) -> Vec<String> {
    let mut v = vec![generation_reply("2 <= n <= 100", &[bootstrap(DIVISOR_GENERATOR)], &["./gen 7", "./gen 12"])];
    for _ in 0..n_max {
        v.push(refinement_reply(&[], &[], &[]));
    }
    v
}

pub fn scripts(n_max: u32) -> Vec<(Problem, Vec<String>)> {
    vec![
        (sum_problem(), sum_script()),
        (max_problem(), max_script()),
        (divisor_problem(), divisor_script(n_max)),
    ]
}

pub fn python_loop_config() -> LoopConfig {
    LoopConfig {
        generator_language: Language::Python,
        generator_limits: Limits::new(5000, 512),
        checker_limits: Limits::new(5000, 512),
        ..LoopConfig::default()
    }
}

pub fn sandbox() -> Sandbox {
    Sandbox::local(4).expect("local sandbox")
}

pub fn gateway(provider: impl Provider + 'static) -> Gateway {
    Gateway::new(Box::new(provider), GatewayConfig::default())
}

/// Runs the loop with scripted replies.
pub fn run_scripted(sb: &Sandbox, cfg: &LoopConfig, p: &Problem, script: Vec<String>) -> LoopTrace {
    let gw = gateway(ScriptedProvider::new(script));
    Refiner {
        sandbox: sb,
        gateway: &gw,
        cfg,
    }
    .run_loop(p, None)
}

/// Runs the loop with scripted replies while recording them to `dir`.
pub fn record(sb: &Sandbox, cfg: &LoopConfig, p: &Problem, script: Vec<String>, dir: &Path) -> LoopTrace {
    let rec = RecordingProvider::new(ScriptedProvider::new(script), dir).expect("recording dir");
    let gw = gateway(rec);
    Refiner {
        sandbox: sb,
        gateway: &gw,
        cfg,
    }
    .run_loop(p, None)
}

pub fn replay(sb: &Sandbox, cfg: &LoopConfig, p: &Problem, dir: &Path) -> LoopTrace {
    let gw = gateway(ReplayProvider::new(dir));
    Refiner {
        sandbox: sb,
        gateway: &gw,
        cfg,
    }
    .run_loop(p, None)
}

pub fn compile(sb: &Sandbox, src: &str) -> tcforge::sandbox::Artifact {
    sb.compile(src, &Language::Python)
        .expect("toolchain")
        .artifact()
        .cloned()
        .expect("fixture compiles")
}
