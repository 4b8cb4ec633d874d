// SPDX-License-Identifier: Apache-2.0

//! Search/replace edit blocks of the form
//!
//! ```text
//! <<<<<<< SEARCH
//! <original fragment>
//! =======
//! <replacement fragment>
//! >>>>>>> REPLACE
//! ```
//!
//! A block applies only when its search fragment occurs exactly once in the
//! current source. Blocks with no match or several matches are skipped and
//! reported; they never partially apply.

use serde::{Deserialize, Serialize};

pub const SEARCH_MARKER: &str = "<<<<<<< SEARCH";
pub const DIVIDER_MARKER: &str = "=======";
pub const REPLACE_MARKER: &str = ">>>>>>> REPLACE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchBlock {
    pub search: String,
    pub replace: String,
}

impl PatchBlock {
    pub fn new(search: impl Into<String>, replace: impl Into<String>) -> Self {
        PatchBlock {
            search: search.into(),
            replace: replace.into(),
        }
    }

    /// Renders the block in the three-marker grammar.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(SEARCH_MARKER);
        out.push('\n');
        if !self.search.is_empty() {
            out.push_str(&self.search);
            out.push('\n');
        }
        out.push_str(DIVIDER_MARKER);
        out.push('\n');
        if !self.replace.is_empty() {
            out.push_str(&self.replace);
            out.push('\n');
        }
        out.push_str(REPLACE_MARKER);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum BlockError {
    #[error("missing `{0}` marker")]
    MissingMarker(String),
    #[error("`{0}` marker appears more than once")]
    DuplicateMarker(String),
    #[error("markers out of order")]
    Misordered,
}

fn marker_lines(lines: &[&str], marker: &str) -> Vec<usize> {
    lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.trim() == marker)
        .map(|(i, _)| i)
        .collect()
}

fn single(lines: &[&str], marker: &str) -> Result<usize, BlockError> {
    match marker_lines(lines, marker).as_slice() {
        [] => Err(BlockError::MissingMarker(marker.to_string())),
        [i] => Ok(*i),
        _ => Err(BlockError::DuplicateMarker(marker.to_string())),
    }
}

/// Parses one raw block. Text before the search marker or after the replace
/// marker is ignored.
pub fn parse_block(raw: &str) -> Result<PatchBlock, BlockError> {
    let text = raw.replace("\r\n", "\n");
    let lines: Vec<&str> = text.split('\n').collect();
    let start = single(&lines, SEARCH_MARKER)?;
    let mid = single(&lines, DIVIDER_MARKER)?;
    let end = single(&lines, REPLACE_MARKER)?;
    if !(start < mid && mid < end) {
        return Err(BlockError::Misordered);
    }
    Ok(PatchBlock {
        search: lines[start + 1..mid].join("\n"),
        replace: lines[mid + 1..end].join("\n"),
    })
}

/// Parses every raw block independently; results are positionally aligned
/// with the input.
pub fn parse_blocks<S: AsRef<str>>(raw: &[S]) -> Vec<Result<PatchBlock, BlockError>> {
    raw.iter().map(|r| parse_block(r.as_ref())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NoMatch,
    AmbiguousMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchOutcome {
    pub patched_source: String,
    pub applied: Vec<usize>,
    pub skipped: Vec<(usize, SkipReason)>,
}

/// Byte offsets of every (possibly overlapping) occurrence of `needle`.
/// An empty needle occurs at every position, so it is unique only in an
/// empty haystack.
pub fn occurrences(haystack: &str, needle: &str) -> Vec<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() {
        return (0..=h.len()).collect();
    }
    if n.len() > h.len() {
        return Vec::new();
    }
    (0..=h.len() - n.len())
        .filter(|&i| &h[i..i + n.len()] == n)
        .collect()
}

/// Applies blocks in order, each against the source as left by the blocks
/// before it.
pub fn apply_patches(source: &str, blocks: &[PatchBlock]) -> PatchOutcome {
    let mut current = source.to_string();
    let mut applied = Vec::new();
    let mut skipped = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        let hits = occurrences(&current, &block.search);
        match hits.as_slice() {
            [] => skipped.push((i, SkipReason::NoMatch)),
            [at] => {
                let at = *at;
                current.replace_range(at..at + block.search.len(), &block.replace);
                applied.push(i);
            }
            _ => skipped.push((i, SkipReason::AmbiguousMatch)),
        }
    }
    PatchOutcome {
        patched_source: current,
        applied,
        skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(search: &str, replace: &str) -> String {
        format!("<<<<<<< SEARCH\n{search}\n=======\n{replace}\n>>>>>>> REPLACE")
    }

    #[test]
    fn canonical_block_parses() {
        let b = parse_block(&raw("rnd.next(1, 100)", "rnd.next(1, 1000000)")).unwrap();
        assert_eq!(b, PatchBlock::new("rnd.next(1, 100)", "rnd.next(1, 1000000)"));
    }

    #[test]
    fn multi_line_fragments_keep_indentation() {
        let b = parse_block(&raw("    int n;\n    cin >> n;", "    long long n;\n    cin >> n;"))
            .unwrap();
        assert_eq!(b.search, "    int n;\n    cin >> n;");
        assert_eq!(b.replace, "    long long n;\n    cin >> n;");
    }

    #[test]
    fn empty_replacement_deletes() {
        let b = parse_block("<<<<<<< SEARCH\nfoo();\n=======\n>>>>>>> REPLACE").unwrap();
        assert_eq!(b, PatchBlock::new("foo();", ""));
        let out = apply_patches("a\nfoo();\nb", &[b]);
        assert_eq!(out.patched_source, "a\n\nb");
    }

    #[test]
    fn duplicated_divider_fails_only_that_entry() {
        let bad = "<<<<<<< SEARCH\na\n=======\nb\n=======\nc\n>>>>>>> REPLACE".to_string();
        let good = raw("x", "y");
        let parsed = parse_blocks(&[bad, good]);
        assert_eq!(
            parsed[0],
            Err(BlockError::DuplicateMarker(DIVIDER_MARKER.into()))
        );
        assert_eq!(parsed[1], Ok(PatchBlock::new("x", "y")));
    }

    #[test]
    fn missing_and_misordered_markers() {
        assert_eq!(
            parse_block("<<<<<<< SEARCH\na\n=======\nb"),
            Err(BlockError::MissingMarker(REPLACE_MARKER.into()))
        );
        assert_eq!(
            parse_block(">>>>>>> REPLACE\na\n=======\nb\n<<<<<<< SEARCH"),
            Err(BlockError::Misordered)
        );
        assert!(parse_blocks::<String>(&[]).is_empty());
    }

    #[test]
    fn crlf_blocks_are_normalized() {
        let b = parse_block("<<<<<<< SEARCH\r\na\r\n=======\r\nb\r\n>>>>>>> REPLACE\r\n").unwrap();
        assert_eq!(b, PatchBlock::new("a", "b"));
    }

    #[test]
    fn unique_match_is_replaced() {
        let src = "int x = rnd.next(1, 100);\n";
        let out = apply_patches(src, &[PatchBlock::new("rnd.next(1, 100)", "rnd.next(1, 1000000)")]);
        assert_eq!(out.patched_source, "int x = rnd.next(1, 1000000);\n");
        assert_eq!(out.applied, vec![0]);
        assert!(out.skipped.is_empty());
    }

    #[test]
    fn absent_search_is_skipped() {
        let src = "int main() {}\n";
        let out = apply_patches(src, &[PatchBlock::new("return 0;", "return 1;")]);
        assert_eq!(out.patched_source, src);
        assert_eq!(out.skipped, vec![(0, SkipReason::NoMatch)]);
    }

    #[test]
    fn duplicated_line_is_ambiguous() {
        let src = "x++;\ny++;\nx++;\n";
        let out = apply_patches(src, &[PatchBlock::new("x++;", "x--;")]);
        assert_eq!(out.patched_source, src);
        assert_eq!(out.skipped, vec![(0, SkipReason::AmbiguousMatch)]);
    }

    #[test]
    fn overlapping_occurrences_count_as_ambiguous() {
        assert_eq!(occurrences("aaa", "aa"), vec![0, 1]);
        let out = apply_patches("aaa", &[PatchBlock::new("aa", "b")]);
        assert_eq!(out.skipped, vec![(0, SkipReason::AmbiguousMatch)]);
    }

    #[test]
    fn later_blocks_see_earlier_edits() {
        let blocks = [PatchBlock::new("a", "bc"), PatchBlock::new("bc", "d")];
        let out = apply_patches("a-", &blocks);
        assert_eq!(out.patched_source, "d-");
        assert_eq!(out.applied, vec![0, 1]);
    }

    #[test]
    fn empty_search_fills_only_an_empty_file() {
        let block = parse_block("<<<<<<< SEARCH\n=======\nint main() {}\n>>>>>>> REPLACE").unwrap();
        assert_eq!(block.search, "");
        let out = apply_patches("", std::slice::from_ref(&block));
        assert_eq!(out.patched_source, "int main() {}");
        let out = apply_patches("x", &[block]);
        assert_eq!(out.skipped, vec![(0, SkipReason::AmbiguousMatch)]);
    }

    #[test]
    fn render_then_parse_is_identity() {
        for b in [
            PatchBlock::new("a\nb", "c"),
            PatchBlock::new("", "x"),
            PatchBlock::new("y", ""),
        ] {
            assert_eq!(parse_block(&b.render()).unwrap(), b);
        }
    }
}
