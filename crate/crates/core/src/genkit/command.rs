// SPDX-License-Identifier: Apache-2.0

//! Generator command lines.
//!
//! Commands look like shell invocations (`./gen --n 10 --mode "a b"`) but are
//! never handed to a shell. The tokenizer understands whitespace, single and
//! double quotes and backslash escapes, and rejects anything that a shell
//! would treat as redirection, piping, chaining or expansion.

use serde::{Deserialize, Serialize};

/// Program name every command must start with.
pub const GENERATOR_PROGRAM: &str = "./gen";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum CommandError {
    #[error("empty command")]
    Empty,
    #[error("command must start with `./gen`, found `{0}`")]
    WrongProgram(String),
    #[error("shell metacharacter `{0}` is not allowed")]
    Forbidden(char),
    #[error("unterminated quote")]
    UnterminatedQuote,
    #[error("dangling escape at end of command")]
    DanglingEscape,
}

const FORBIDDEN: &[char] = &['|', '&', ';', '<', '>', '(', ')', '$', '`', '\n', '\r'];

/// Splits a command line into argv tokens.
pub fn tokenize(cmd: &str) -> Result<Vec<String>, CommandError> {
    #[derive(PartialEq)]
    enum Mode {
        Bare,
        Single,
        Double,
    }

    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut in_token = false;
    let mut mode = Mode::Bare;
    let mut chars = cmd.chars();

    while let Some(c) = chars.next() {
        match mode {
            Mode::Bare => match c {
                ' ' | '\t' => {
                    if in_token {
                        tokens.push(std::mem::take(&mut current));
                        in_token = false;
                    }
                }
                '\'' => {
                    mode = Mode::Single;
                    in_token = true;
                }
                '"' => {
                    mode = Mode::Double;
                    in_token = true;
                }
                '\\' => {
                    let next = chars.next().ok_or(CommandError::DanglingEscape)?;
                    current.push(next);
                    in_token = true;
                }
                c if FORBIDDEN.contains(&c) => return Err(CommandError::Forbidden(c)),
                c => {
                    current.push(c);
                    in_token = true;
                }
            },
            Mode::Single => match c {
                '\'' => mode = Mode::Bare,
                c => current.push(c),
            },
            Mode::Double => match c {
                '"' => mode = Mode::Bare,
                '\\' => {
                    let next = chars.next().ok_or(CommandError::UnterminatedQuote)?;
                    if !matches!(next, '"' | '\\' | '$' | '`') {
                        current.push('\\');
                    }
                    current.push(next);
                }
                '$' | '`' => return Err(CommandError::Forbidden(c)),
                c => current.push(c),
            },
        }
    }
    if mode != Mode::Bare {
        return Err(CommandError::UnterminatedQuote);
    }
    if in_token {
        tokens.push(current);
    }
    Ok(tokens)
}

/// Checks that `cmd` invokes the generator and returns the arguments that
/// follow the program name.
pub fn generator_args(cmd: &str) -> Result<Vec<String>, CommandError> {
    let mut tokens = tokenize(cmd)?;
    if tokens.is_empty() {
        return Err(CommandError::Empty);
    }
    if tokens[0] != GENERATOR_PROGRAM {
        return Err(CommandError::WrongProgram(tokens.swap_remove(0)));
    }
    tokens.remove(0);
    Ok(tokens)
}

/// Collapses whitespace runs and trims; two commands are the same command
/// iff their normalized forms are equal.
pub fn normalize(cmd: &str) -> String {
    cmd.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_flags() {
        assert_eq!(
            generator_args("./gen --n 10 -max=5").unwrap(),
            ["--n", "10", "-max=5"]
        );
    }

    #[test]
    fn quotes_and_escapes() {
        assert_eq!(
            tokenize(r#"./gen --s "a b" --t 'c d' e\ f """#).unwrap(),
            ["./gen", "--s", "a b", "--t", "c d", "e f", ""]
        );
        assert_eq!(tokenize(r#"./gen "x\"y""#).unwrap(), ["./gen", "x\"y"]);
    }

    #[test]
    fn shell_operators_are_rejected() {
        assert_eq!(tokenize("./gen > out"), Err(CommandError::Forbidden('>')));
        assert_eq!(tokenize("./gen | cat"), Err(CommandError::Forbidden('|')));
        assert_eq!(tokenize("./gen; rm -rf /"), Err(CommandError::Forbidden(';')));
        assert_eq!(tokenize("./gen $(id)"), Err(CommandError::Forbidden('$')));
        assert_eq!(tokenize("./gen \"$HOME\""), Err(CommandError::Forbidden('$')));
        assert_eq!(tokenize("./gen 'a > b'").unwrap(), ["./gen", "a > b"]);
    }

    #[test]
    fn program_must_be_gen() {
        assert_eq!(
            generator_args("python gen.py"),
            Err(CommandError::WrongProgram("python".into()))
        );
        assert_eq!(generator_args("   "), Err(CommandError::Empty));
        assert_eq!(tokenize("./gen 'oops"), Err(CommandError::UnterminatedQuote));
        assert_eq!(tokenize("./gen \\"), Err(CommandError::DanglingEscape));
    }

    #[test]
    fn normalization_collapses_whitespace() {
        assert_eq!(normalize("  ./gen\t--n   5 "), "./gen --n 5");
    }

    proptest! {
        #[test]
        fn simple_words_round_trip(words in prop::collection::vec("[A-Za-z0-9_=.:-]{1,8}", 0..6)) {
            let cmd = format!("./gen {}", words.join(" "));
            prop_assert_eq!(generator_args(&cmd).unwrap(), words);
        }

        #[test]
        fn tokenizer_never_panics(s in "\\PC{0,40}") {
            let _ = tokenize(&s);
        }
    }
}
