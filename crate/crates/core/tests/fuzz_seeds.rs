// SPDX-License-Identifier: Apache-2.0

//! Replays the checked-in fuzz corpora through the same entry points and
//! invariants as the fuzz targets.

use std::path::PathBuf;

use tcforge::genkit::{apply_patches, generator_args, normalize, parse_block, tokenize};
use tcforge::io::dataset::{parse_line, FieldMap, Format};
use tcforge::io::Config;
use tcforge::llm::{parse_generation, parse_refinement};
use tcforge::model::Bytes;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    assert!(!paths.is_empty(), "no seeds for {target}");
    paths.into_iter().map(|p| std::fs::read(p).unwrap()).collect()
}

fn text_seeds(target: &str) -> Vec<String> {
    seeds(target).into_iter().map(|b| String::from_utf8(b).unwrap()).collect()
}

#[test]
fn patch_block_seeds() {
    let mut parsed = 0;
    for s in text_seeds("patch_block") {
        if let Ok(block) = parse_block(&s) {
            let out = apply_patches(&s, std::slice::from_ref(&block));
            assert_eq!(out.applied.len() + out.skipped.len(), 1);
            parsed += 1;
        }
    }
    assert!(parsed >= 2);
}

#[test]
fn command_seeds() {
    let mut valid = 0;
    for s in text_seeds("command") {
        let _ = tokenize(&s);
        let once = normalize(&s);
        assert_eq!(normalize(&once), once);
        valid += usize::from(generator_args(&s).is_ok());
    }
    assert!(valid >= 2);
}

#[test]
fn llm_response_seeds() {
    let s = text_seeds("llm_response");
    assert!(parse_generation(&s[0]).is_ok());
    assert!(parse_refinement(&s[1]).is_ok());
    assert!(parse_generation(&s[2]).is_err());
    assert!(parse_refinement(&s[3]).is_err());
}

#[test]
fn dataset_line_seeds() {
    let map = FieldMap::default();
    let s = text_seeds("dataset_line");
    for line in &s {
        for format in [Format::Auto, Format::Codecontests, Format::Native] {
            let _ = parse_line(line, format, &map);
        }
    }
    assert!(parse_line(&s[0], Format::Auto, &map).is_ok());
    assert!(parse_line(&s[3], Format::Auto, &map).is_err());
}

#[test]
fn config_seeds() {
    let s = text_seeds("config");
    for text in &s {
        if let Ok(cfg) = Config::parse(text) {
            assert_eq!(Config::parse(&cfg.to_toml()).ok(), Some(cfg));
        }
    }
    assert!(Config::parse(&s[0]).is_ok());
    assert!(Config::parse(&s[2]).is_err());
}

#[test]
fn bytes_json_seeds() {
    let mut decoded = 0;
    for data in seeds("bytes_json") {
        if let Ok(b) = serde_json::from_slice::<Bytes>(&data) {
            let text = serde_json::to_string(&b).unwrap();
            assert_eq!(serde_json::from_str::<Bytes>(&text).unwrap(), b);
            decoded += 1;
        }
        let b = Bytes(data);
        let text = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<Bytes>(&text).unwrap(), b);
    }
    assert!(decoded >= 2);
}
