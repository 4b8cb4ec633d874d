// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tcforge::io::dataset::{parse_line, FieldMap, Format};

fuzz_target!(|data: &str| {
    let map = FieldMap::default();
    for format in [Format::Auto, Format::Codecontests, Format::Native] {
        let _ = parse_line(data, format, &map);
    }
});
