// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tcforge::io::Config;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = Config::parse(data) {
        assert_eq!(Config::parse(&cfg.to_toml()).ok(), Some(cfg));
    }
});
