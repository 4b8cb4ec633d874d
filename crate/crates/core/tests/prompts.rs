// SPDX-License-Identifier: Apache-2.0

mod common;

use tcforge::llm::{build_initial_prompt, build_initial_prompt_for, ArtifactRole};

#[test]
fn initial_prompt_matches_golden() {
    let golden = include_str!("golden/initial_sum.txt");
    let got = build_initial_prompt(&common::sum_problem(), common::SUM_GENERATOR);
    assert_eq!(got, golden);
}

#[test]
fn checker_prompt_swaps_roles() {
    let p = common::sum_problem();
    let got = build_initial_prompt_for(ArtifactRole::Checker, &p, "");
    assert!(got.contains("checker program"));
    assert!(!got.contains("generation program"));
    assert!(got.contains(&p.statement));
}
