//! Total lexer for un-preprocessed C-like text.

use crate::rast::LineKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    /// Identifiers, keywords and numeric literals.
    Identifier,
    Punctuation,
    /// String or character literal.
    Literal,
    /// A whole preprocessor directive, continuation lines spliced.
    Directive,
    Comment,
    Newline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Verbatim text; for directives, whitespace-normalized and comment-free.
    pub text: String,
    pub line: u32,
    /// Last physical line covered (differs from `line` for spliced
    /// directives and block comments).
    pub end_line: u32,
    /// Whitespace, a comment or a line break precedes the token.
    pub space_before: bool,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text && self.kind != TokenKind::Literal
    }

    /// Directive name (`if`, `include`, ...) for directive tokens.
    pub fn directive_name(&self) -> Option<&str> {
        if self.kind != TokenKind::Directive {
            return None;
        }
        let rest = self.text.trim_start_matches('#').trim_start();
        let end = rest.find(|c: char| !(c == '_' || c.is_ascii_alphanumeric())).unwrap_or(rest.len());
        Some(&rest[..end])
    }

    /// Text following the directive name.
    pub fn directive_body(&self) -> &str {
        let rest = self.text.trim_start_matches('#').trim_start();
        let end = rest.find(|c: char| !(c == '_' || c.is_ascii_alphanumeric())).unwrap_or(rest.len());
        rest[end..].trim()
    }
}

pub fn is_conditional_directive(name: &str) -> bool {
    matches!(name, "if" | "ifdef" | "ifndef" | "elif" | "elifdef" | "elifndef" | "else" | "endif")
}

/// Lexes raw bytes; invalid UTF-8 is replaced.
pub fn lex_bytes(bytes: &[u8]) -> Vec<Token> {
    lex(&String::from_utf8_lossy(bytes))
}

pub fn lex(text: &str) -> Vec<Token> {
    Lexer { chars: text.chars().collect(), pos: 0, line: 1, toks: Vec::new(), space: true, line_start: true }.run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    toks: Vec<Token>,
    space: bool,
    /// Only whitespace seen so far on the current line.
    line_start: bool,
}

impl Lexer {
    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn push(&mut self, kind: TokenKind, text: String, line: u32) {
        let space_before = self.space;
        self.toks.push(Token { kind, text, line, end_line: self.line, space_before });
        self.space = false;
        self.line_start = false;
    }

    fn run(mut self) -> Vec<Token> {
        while let Some(c) = self.peek(0) {
            match c {
                '\n' => {
                    let line = self.line;
                    self.pos += 1;
                    self.push(TokenKind::Newline, "\n".into(), line);
                    self.line += 1;
                    self.space = true;
                    self.line_start = true;
                }
                '\\' if self.peek(1) == Some('\n') || (self.peek(1) == Some('\r') && self.peek(2) == Some('\n')) => {
                    // Stray line splice in code: consume silently.
                    self.pos += if self.peek(1) == Some('\r') { 3 } else { 2 };
                    self.line += 1;
                    self.space = true;
                }
                c if c.is_whitespace() => {
                    self.pos += 1;
                    self.space = true;
                }
                '/' if self.peek(1) == Some('/') => self.line_comment(),
                '/' if self.peek(1) == Some('*') => self.block_comment(),
                '#' if self.line_start => self.directive(),
                '"' | '\'' => self.literal(c),
                c if c == '_' || c.is_alphanumeric() => {
                    let start = self.pos;
                    while self.peek(0).is_some_and(|c| c == '_' || c.is_alphanumeric()) {
                        self.pos += 1;
                    }
                    let text: String = self.chars[start..self.pos].iter().collect();
                    let line = self.line;
                    self.push(TokenKind::Identifier, text, line);
                }
                _ => {
                    self.pos += 1;
                    let line = self.line;
                    self.push(TokenKind::Punctuation, c.to_string(), line);
                }
            }
        }
        self.toks
    }

    fn line_comment(&mut self) {
        let start = self.pos;
        let line = self.line;
        while let Some(c) = self.peek(0) {
            if c == '\n' {
                break;
            }
            if c == '\\' && self.peek(1) == Some('\n') {
                self.pos += 2;
                self.line += 1;
                continue;
            }
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let ls = self.line_start;
        self.push(TokenKind::Comment, text, line);
        self.line_start = ls;
        self.space = true;
    }

    fn block_comment(&mut self) {
        let start = self.pos;
        let line = self.line;
        self.pos += 2;
        while let Some(c) = self.peek(0) {
            if c == '*' && self.peek(1) == Some('/') {
                self.pos += 2;
                break;
            }
            if c == '\n' {
                self.line += 1;
            }
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let ls = self.line_start;
        self.push(TokenKind::Comment, text, line);
        self.line_start = ls;
        self.space = true;
    }

    fn literal(&mut self, quote: char) {
        let start = self.pos;
        let line = self.line;
        self.pos += 1;
        while let Some(c) = self.peek(0) {
            match c {
                '\\' if self.peek(1).is_some_and(|n| n != '\n') => self.pos += 2,
                '\n' => break,
                c if c == quote => {
                    self.pos += 1;
                    break;
                }
                _ => self.pos += 1,
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        self.push(TokenKind::Literal, text, line);
    }

    /// Reads a directive to its logical end, splicing continuations and
    /// dropping comments.
    fn directive(&mut self) {
        let line = self.line;
        let mut out = String::new();
        let mut pending_space = false;
        while let Some(c) = self.peek(0) {
            match c {
                '\n' => break,
                '\\' if self.peek(1) == Some('\n') => {
                    self.pos += 2;
                    self.line += 1;
                    pending_space = true;
                }
                '\\' if self.peek(1) == Some('\r') && self.peek(2) == Some('\n') => {
                    self.pos += 3;
                    self.line += 1;
                    pending_space = true;
                }
                '/' if self.peek(1) == Some('/') => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.pos += 1;
                    }
                }
                '/' if self.peek(1) == Some('*') => {
                    self.pos += 2;
                    while let Some(c) = self.peek(0) {
                        if c == '*' && self.peek(1) == Some('/') {
                            self.pos += 2;
                            break;
                        }
                        if c == '\n' {
                            self.line += 1;
                        }
                        self.pos += 1;
                    }
                    pending_space = true;
                }
                '"' | '\'' => {
                    if pending_space && !out.is_empty() {
                        out.push(' ');
                    }
                    pending_space = false;
                    let quote = c;
                    out.push(c);
                    self.pos += 1;
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        out.push(c);
                        self.pos += 1;
                        if c == '\\' {
                            if let Some(n) = self.peek(0).filter(|&n| n != '\n') {
                                out.push(n);
                                self.pos += 1;
                            }
                        } else if c == quote {
                            break;
                        }
                    }
                }
                c if c.is_whitespace() => {
                    self.pos += 1;
                    pending_space = true;
                }
                c => {
                    if pending_space && !out.is_empty() && out != "#" {
                        out.push(' ');
                    }
                    pending_space = false;
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
        self.push(TokenKind::Directive, out, line);
    }
}

/// Classifies every physical line of a token stream.
pub fn line_kinds(toks: &[Token], line_count: u32) -> Vec<LineKind> {
    let mut kinds = vec![LineKind::Blank; line_count as usize];
    let rank = |k: LineKind| match k {
        LineKind::Blank => 0,
        LineKind::Comment => 1,
        LineKind::Code => 2,
        LineKind::Directive => 3,
        LineKind::Conditional => 4,
    };
    for t in toks {
        let kind = match t.kind {
            TokenKind::Newline => continue,
            TokenKind::Comment => LineKind::Comment,
            TokenKind::Directive => {
                if t.directive_name().is_some_and(is_conditional_directive) {
                    LineKind::Conditional
                } else {
                    LineKind::Directive
                }
            }
            _ => LineKind::Code,
        };
        for line in t.line..=t.end_line {
            if let Some(slot) = kinds.get_mut(line as usize - 1) {
                if rank(kind) > rank(*slot) {
                    *slot = kind;
                }
            }
        }
    }
    kinds
}

/// Number of physical lines in `text` (a trailing newline does not start a
/// new line).
pub fn physical_line_count(text: &str) -> u32 {
    if text.is_empty() {
        return 0;
    }
    let n = text.matches('\n').count() as u32;
    if text.ends_with('\n') {
        n
    } else {
        n + 1
    }
}
