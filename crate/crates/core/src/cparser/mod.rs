//! Partial parser for un-preprocessed C: conditional directives fully,
//! language structure down to statements, nothing below.

pub mod lexer;
mod parser;
pub mod pptree;

use regex::Regex;

use crate::rast::SourceFile;
use lexer::TokenKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnError {
    #[default]
    SkipFile,
    BestEffort,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: #{directive} without an open conditional")]
    Unmatched { directive: String, line: u32 },
    #[error("line {line}: #{directive} after #else")]
    AfterElse { directive: String, line: u32 },
    #[error("line {line}: conditional not closed before end of file")]
    Unclosed { line: u32 },
}

#[derive(Debug, Clone)]
pub struct ParserConfig {
    /// Macro names counted as features; others still appear in formulas.
    pub feature_regex: Regex,
    pub on_error: OnError,
    /// File suffixes to parse, without the dot.
    pub extensions: Vec<String>,
}

pub const DEFAULT_FEATURE_REGEX: &str = "^CONFIG_";

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            feature_regex: Regex::new(DEFAULT_FEATURE_REGEX).unwrap(),
            on_error: OnError::SkipFile,
            extensions: vec!["c".into(), "h".into()],
        }
    }
}

impl ParserConfig {
    pub fn accepts(&self, path: &std::path::Path) -> bool {
        path.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| self.extensions.iter().any(|x| x.trim_start_matches('.') == e))
    }
}

/// Parses one file. Never fails: fatal directive problems under
/// `OnError::SkipFile` yield a skipped file carrying the reason.
pub fn parse_file(path: &str, bytes: &[u8], config: &ParserConfig) -> SourceFile {
    let text = String::from_utf8_lossy(bytes);
    let toks = lexer::lex(&text);
    let line_count = lexer::physical_line_count(&text);
    let lines = lexer::line_kinds(&toks, line_count);
    let significant: Vec<usize> = toks
        .iter()
        .enumerate()
        .filter(|(_, t)| !matches!(t.kind, TokenKind::Comment | TokenKind::Newline))
        .map(|(i, _)| i)
        .collect();
    let last_line = line_count.max(1);
    let grouped = match pptree::group(&toks, &significant, config.on_error, last_line) {
        Ok(g) => g,
        Err(e) => return SourceFile::skipped(path, format!("{path}: {e}"), lines),
    };
    let mut p = parser::Parser::new(&toks, last_line);
    let top = p.parse_top_level(&grouped.items);
    p.builder.finish(path.to_owned(), top, lines)
}

/// Convenience for tests and tools: parse source text with defaults.
pub fn parse_str(path: &str, text: &str, config: &ParserConfig) -> SourceFile {
    parse_file(path, text.as_bytes(), config)
}

#[cfg(test)]
mod tests;
