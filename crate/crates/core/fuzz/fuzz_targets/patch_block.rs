// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tcforge::genkit::{apply_patches, parse_block};

fuzz_target!(|data: &str| {
    if let Ok(block) = parse_block(data) {
        let out = apply_patches(data, std::slice::from_ref(&block));
        assert_eq!(out.applied.len() + out.skipped.len(), 1);
    }
});
