// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tcforge::genkit::{generator_args, normalize, tokenize};

fuzz_target!(|data: &str| {
    let _ = tokenize(data);
    let once = normalize(data);
    assert_eq!(normalize(&once), once);
    let _ = generator_args(data);
});
