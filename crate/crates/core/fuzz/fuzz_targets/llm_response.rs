// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tcforge::llm::{parse_generation, parse_refinement};

fuzz_target!(|data: &str| {
    let _ = parse_generation(data);
    let _ = parse_refinement(data);
});
