// SPDX-License-Identifier: Apache-2.0

//! JSONL datasets.
//!
//! Two line formats are read:
//!
//! * CodeContests records, mapped through a configurable [`FieldMap`].
//!   Defaults: `name` (id), `description` (statement), `public_tests`
//!   (`{"input": [...], "output": [...]}`), `solutions` and
//!   `incorrect_solutions` (`{"language": [...], "solution": [...]}`),
//!   `time_limit` (`{"seconds", "nanos"}` or seconds), `memory_limit_bytes`,
//!   `cf_tags` and `difficulty`. Every other field is kept verbatim in
//!   [`Problem::extra`].
//! * Native [`DatasetRecord`] lines written by this crate, carrying
//!   `schema_version`.
//!
//! Malformed lines are skipped and counted.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::Value;

use crate::model::{Label, Language, PassThrough, Problem, Solution, TestCase};
use crate::refine::{LoopTrace, TerminationReason};

pub const SCHEMA_VERSION: u32 = 1;

const DEFAULT_TIME_LIMIT_MS: u64 = 2000;
const DEFAULT_MEMORY_LIMIT_MIB: u64 = 256;

/// Source field names for CodeContests-style records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMap {
    pub id: String,
    pub statement: String,
    pub public_tests: String,
    pub correct_solutions: String,
    pub incorrect_solutions: String,
    pub time_limit: String,
    pub memory_limit: String,
    pub tags: String,
    pub difficulty: String,
    /// Language codes (as they appear in the data) to toolchain tags.
    /// Solutions in unmapped languages are dropped.
    pub languages: BTreeMap<String, String>,
    /// Languages tried in order when picking the reference solution.
    pub reference_preference: Vec<String>,
}

impl Default for FieldMap {
    fn default() -> Self {
        let languages = [("2", "cpp"), ("3", "python"), ("4", "java")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        FieldMap {
            id: "name".into(),
            statement: "description".into(),
            public_tests: "public_tests".into(),
            correct_solutions: "solutions".into(),
            incorrect_solutions: "incorrect_solutions".into(),
            time_limit: "time_limit".into(),
            memory_limit: "memory_limit_bytes".into(),
            tags: "cf_tags".into(),
            difficulty: "difficulty".into(),
            languages,
            reference_preference: vec!["cpp".into(), "python".into(), "java".into()],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: no parseable records ({malformed} malformed lines)")]
    Empty { path: PathBuf, malformed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// Native records when a line has `schema_version`, CodeContests
    /// otherwise.
    #[default]
    Auto,
    Codecontests,
    Native,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Failed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub termination: TerminationReason,
    pub tpr: f64,
    pub tnr: f64,
    pub llm_calls: u64,
}

/// One line of a native dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub schema_version: u32,
    pub status: RecordStatus,
    pub problem: Problem,
    #[serde(default)]
    pub suite: Vec<TestCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<TraceSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl DatasetRecord {
    pub fn ok(problem: Problem) -> Self {
        DatasetRecord {
            schema_version: SCHEMA_VERSION,
            status: RecordStatus::Ok,
            problem,
            suite: Vec::new(),
            summary: None,
            error: None,
        }
    }

    pub fn rejected(problem: Problem, reason: impl Into<String>) -> Self {
        DatasetRecord {
            status: RecordStatus::Rejected,
            error: Some(reason.into()),
            ..DatasetRecord::ok(problem)
        }
    }

    pub fn failed(problem: Problem, error: impl Into<String>) -> Self {
        DatasetRecord {
            status: RecordStatus::Failed,
            error: Some(error.into()),
            ..DatasetRecord::ok(problem)
        }
    }

    /// Record for a finished loop. A trace that ends with a non-empty
    /// evaluated suite is `ok` even if a later step failed; the error is
    /// kept alongside.
    pub fn from_trace(problem: Problem, trace: &LoopTrace) -> Self {
        let summary = trace.last().map(|s| TraceSummary {
            iterations: trace.snapshots.len(),
            termination: trace.termination,
            tpr: s.state.metrics.tpr,
            tnr: s.state.metrics.tnr,
            llm_calls: trace.llm_calls,
        });
        let suite = trace.last().map(|s| s.state.suite.clone()).unwrap_or_default();
        let status = if suite.is_empty() {
            RecordStatus::Failed
        } else {
            RecordStatus::Ok
        };
        DatasetRecord {
            schema_version: SCHEMA_VERSION,
            status,
            problem,
            suite,
            summary,
            error: trace.error.clone(),
        }
    }
}

/// A problem read from a dataset together with per-record warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub record: DatasetRecord,
    pub warnings: Vec<String>,
}

fn as_str(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn string_array(v: &Value) -> Vec<String> {
    v.as_array()
        .map(|a| a.iter().filter_map(as_str).collect())
        .unwrap_or_default()
}

fn parse_tests(v: &Value) -> Vec<TestCase> {
    let inputs = string_array(&v["input"]);
    let outputs = string_array(&v["output"]);
    inputs
        .into_iter()
        .zip(outputs)
        .map(|(i, o)| TestCase::public(i, o))
        .collect()
}

/// Columnar `{"language": [...], "solution": [...]}` or a list of
/// `{"language", "solution"}` objects.
fn raw_solutions(v: &Value) -> Vec<(String, String)> {
    if let Some(items) = v.as_array() {
        return items
            .iter()
            .filter_map(|it| Some((as_str(&it["language"])?, as_str(&it["solution"])?)))
            .collect();
    }
    let langs: Vec<String> = v["language"]
        .as_array()
        .map(|a| a.iter().map(|x| as_str(x).unwrap_or_default()).collect())
        .unwrap_or_default();
    let sources = string_array(&v["solution"]);
    langs.into_iter().zip(sources).collect()
}

fn time_limit_ms(v: &Value) -> Option<u64> {
    match v {
        Value::Object(o) => {
            let secs = o.get("seconds").and_then(Value::as_u64).unwrap_or(0);
            let nanos = o.get("nanos").and_then(Value::as_u64).unwrap_or(0);
            let ms = secs * 1000 + nanos / 1_000_000;
            (ms > 0).then_some(ms)
        }
        Value::Number(n) => n.as_f64().map(|s| (s * 1000.0).round() as u64).filter(|&ms| ms > 0),
        _ => None,
    }
}

/// Converts one parsed CodeContests object. Unmapped fields go to `extra`.
pub fn from_codecontests(
    fields: IndexMap<String, Box<RawValue>>,
    map: &FieldMap,
) -> Result<Ingested, String> {
    let mut warnings = Vec::new();
    let mut extra = IndexMap::new();
    let mut known: BTreeMap<&str, Value> = BTreeMap::new();
    let mapped = [
        map.id.as_str(),
        &map.statement,
        &map.public_tests,
        &map.correct_solutions,
        &map.incorrect_solutions,
        &map.time_limit,
        &map.memory_limit,
        &map.tags,
        &map.difficulty,
    ];
    for (key, raw) in fields {
        if let Some(name) = mapped.iter().find(|m| **m == key) {
            let v: Value = serde_json::from_str(raw.get()).map_err(|e| e.to_string())?;
            known.insert(name, v);
        } else {
            extra.insert(key, raw);
        }
    }
    let get = |k: &str| known.get(k).cloned().unwrap_or(Value::Null);

    let id = as_str(&get(&map.id)).ok_or_else(|| format!("missing `{}`", map.id))?;
    let statement = as_str(&get(&map.statement)).unwrap_or_default();

    let mut dropped = BTreeMap::<String, usize>::new();
    let mut pool = |field: &str, label: Label, warnings: &mut Vec<String>| -> Vec<Solution> {
        let v = get(field);
        if v.is_null() {
            warnings.push(format!("no `{field}` field; {label:?} pool left empty"));
            return Vec::new();
        }
        raw_solutions(&v)
            .into_iter()
            .filter_map(|(code, src)| match map.languages.get(&code) {
                Some(tag) => Some(Solution::new(src, Language::from_tag(tag), label)),
                None => {
                    *dropped.entry(code).or_default() += 1;
                    None
                }
            })
            .collect()
    };
    let mut correct = pool(&map.correct_solutions, Label::Correct, &mut warnings);
    let incorrect = pool(&map.incorrect_solutions, Label::Incorrect, &mut warnings);
    for (code, n) in &dropped {
        warnings.push(format!("dropped {n} solutions in unmapped language `{code}`"));
    }

    let reference = map
        .reference_preference
        .iter()
        .find_map(|tag| {
            let lang = Language::from_tag(tag);
            correct.iter().position(|s| s.language == lang)
        })
        .or(if correct.is_empty() { None } else { Some(0) })
        .map(|i| correct.remove(i).as_reference());

    let time_limit = time_limit_ms(&get(&map.time_limit)).unwrap_or_else(|| {
        warnings.push(format!("no time limit; using {DEFAULT_TIME_LIMIT_MS} ms"));
        DEFAULT_TIME_LIMIT_MS
    });
    let memory_limit = get(&map.memory_limit)
        .as_u64()
        .filter(|&b| b > 0)
        .map(|b| b.div_ceil(1 << 20))
        .unwrap_or_else(|| {
            warnings.push(format!("no memory limit; using {DEFAULT_MEMORY_LIMIT_MIB} MiB"));
            DEFAULT_MEMORY_LIMIT_MIB
        });

    let problem = Problem {
        id,
        statement,
        reference_solution: reference,
        correct_pool: correct,
        incorrect_pool: incorrect,
        public_tests: parse_tests(&get(&map.public_tests)),
        time_limit,
        memory_limit,
        tags: string_array(&get(&map.tags)),
        difficulty: get(&map.difficulty).as_i64(),
        extra: PassThrough(extra),
    };
    Ok(Ingested {
        record: DatasetRecord::ok(problem),
        warnings,
    })
}

/// Parses one line in the given format.
pub fn parse_line(line: &str, format: Format, map: &FieldMap) -> Result<Ingested, String> {
    let fields: IndexMap<String, Box<RawValue>> = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let native = match format {
        Format::Native => true,
        Format::Codecontests => false,
        Format::Auto => fields.contains_key("schema_version"),
    };
    if native {
        let record: DatasetRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if record.schema_version > SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", record.schema_version));
        }
        Ok(Ingested {
            record,
            warnings: Vec::new(),
        })
    } else {
        from_codecontests(fields, map)
    }
}

/// Streaming reader: one [`Ingested`] per good line, malformed lines
/// skipped and counted.
pub struct Reader<R> {
    lines: std::io::Lines<R>,
    format: Format,
    map: FieldMap,
    line_no: usize,
    pub malformed: usize,
    pub records: usize,
}

impl<R: BufRead> Reader<R> {
    pub fn new(input: R, format: Format, map: FieldMap) -> Self {
        Reader {
            lines: input.lines(),
            format,
            map,
            line_no: 0,
            malformed: 0,
            records: 0,
        }
    }
}

impl<R: BufRead> Iterator for Reader<R> {
    type Item = std::io::Result<Ingested>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e)),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_line(&line, self.format, &self.map) {
                Ok(rec) => {
                    self.records += 1;
                    for w in &rec.warnings {
                        tracing::warn!(line = self.line_no, problem = %rec.record.problem.id, "{w}");
                    }
                    return Some(Ok(rec));
                }
                Err(e) => {
                    self.malformed += 1;
                    tracing::warn!(line = self.line_no, error = %e, "skipping malformed line");
                }
            }
        }
    }
}

pub fn open(path: &Path, format: Format, map: &FieldMap) -> Result<Reader<BufReader<std::fs::File>>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Reader::new(BufReader::new(file), format, map.clone()))
}

/// Result of reading a whole file.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingest {
    pub records: Vec<Ingested>,
    pub malformed: usize,
}

pub fn read_all(path: &Path, format: Format, map: &FieldMap) -> Result<Ingest, IngestError> {
    let mut reader = open(path, format, map)?;
    let mut records = Vec::new();
    for item in &mut reader {
        records.push(item.map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?);
    }
    if records.is_empty() {
        return Err(IngestError::Empty {
            path: path.to_path_buf(),
            malformed: reader.malformed,
        });
    }
    Ok(Ingest {
        records,
        malformed: reader.malformed,
    })
}

/// Dataset-level counts over `ok` records.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExportSummary {
    pub problems: usize,
    pub mean_cases: f64,
    pub mean_correct: f64,
    pub mean_incorrect: f64,
}

impl fmt::Display for ExportSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} / {:.2} / {:.2} / {:.2}",
            self.problems, self.mean_cases, self.mean_correct, self.mean_incorrect
        )
    }
}

pub fn summarize<'a>(records: impl IntoIterator<Item = &'a DatasetRecord>) -> ExportSummary {
    let mut n = 0usize;
    let (mut cases, mut correct, mut incorrect) = (0usize, 0usize, 0usize);
    for r in records.into_iter().filter(|r| r.status == RecordStatus::Ok) {
        n += 1;
        cases += r.suite.len();
        correct += r.problem.alive_correct().count();
        incorrect += r.problem.alive_incorrect().count();
    }
    if n == 0 {
        return ExportSummary::default();
    }
    let mean = |x: usize| x as f64 / n as f64;
    ExportSummary {
        problems: n,
        mean_cases: mean(cases),
        mean_correct: mean(correct),
        mean_incorrect: mean(incorrect),
    }
}

pub fn write_line<W: Write>(out: &mut W, record: &DatasetRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}

/// Writes every record as one JSONL line and returns the summary.
pub fn export(path: &Path, records: &[DatasetRecord]) -> std::io::Result<ExportSummary> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        write_line(&mut out, r)?;
    }
    out.flush()?;
    Ok(summarize(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CC: &str = r#"{"name":"1A","description":"Read a and b.\n\nInput\nTwo ints.\n\nOutput\nTheir sum.","public_tests":{"input":["1 2\n"],"output":["3\n"]},"private_tests":{"input":[],"output":[]},"solutions":{"language":[3,2,1],"solution":["print(sum(map(int,input().split())))","int main(){}","print 1"]},"incorrect_solutions":{"language":[3],"solution":["print(0)"]},"time_limit":{"seconds":1,"nanos":500000000},"memory_limit_bytes":268435456,"cf_tags":["math"],"difficulty":7,"cf_rating":800,"source":2}"#;

    #[test]
    fn codecontests_mapping() {
        let got = parse_line(CC, Format::Auto, &FieldMap::default()).unwrap();
        let p = &got.record.problem;
        assert_eq!(p.id, "1A");
        assert_eq!(p.time_limit, 1500);
        assert_eq!(p.memory_limit, 256);
        assert_eq!(p.reference_solution.as_ref().unwrap().language, Language::Cpp);
        assert_eq!(p.correct_pool.len(), 1);
        assert_eq!(p.incorrect_pool.len(), 1);
        assert_eq!(p.public_tests.len(), 1);
        assert_eq!(p.tags, ["math"]);
        assert_eq!(p.difficulty, Some(7));
        let extra: Vec<_> = p.extra.0.keys().cloned().collect();
        assert_eq!(extra, ["private_tests", "cf_rating", "source"]);
        assert!(got.warnings.iter().any(|w| w.contains("unmapped language `1`")));
    }

    #[test]
    fn missing_labels_leave_pools_empty() {
        let line = r#"{"name":"x","description":"d","public_tests":{"input":[],"output":[]}}"#;
        let got = parse_line(line, Format::Codecontests, &FieldMap::default()).unwrap();
        assert!(got.record.problem.correct_pool.is_empty());
        assert!(got.record.problem.incorrect_pool.is_empty());
        assert!(got.record.problem.reference_solution.is_none());
        assert!(got.warnings.iter().any(|w| w.contains("`solutions`")));
    }

    #[test]
    fn native_round_trip_keeps_extra_bytes() {
        let got = parse_line(CC, Format::Auto, &FieldMap::default()).unwrap();
        let mut buf = Vec::new();
        write_line(&mut buf, &got.record).unwrap();
        let line = String::from_utf8(buf).unwrap();
        let back = parse_line(line.trim_end(), Format::Auto, &FieldMap::default()).unwrap();
        assert_eq!(back.record, got.record);
        assert_eq!(back.record.problem.extra.0["private_tests"].get(), r#"{"input":[],"output":[]}"#);
    }

    #[test]
    fn malformed_lines_are_counted() {
        let text = format!("{CC}\n{{\"name\": \"trunc\n\n{CC}\n");
        let mut r = Reader::new(text.as_bytes(), Format::Auto, FieldMap::default());
        let items: Vec<_> = (&mut r).collect();
        assert_eq!(items.len(), 2);
        assert_eq!(r.malformed, 1);
    }

    #[test]
    fn summary_means_and_format() {
        let base = parse_line(CC, Format::Auto, &FieldMap::default()).unwrap().record;
        let with = |n: usize| DatasetRecord {
            suite: vec![TestCase::public("1", "1"); n],
            ..base.clone()
        };
        let s = summarize(&[with(3), with(5)]);
        assert_eq!(s.mean_cases, 4.0);
        assert_eq!(s.to_string(), "2 / 4.00 / 1.00 / 1.00");
        assert_eq!(summarize(&[]), ExportSummary::default());
    }
}
