//! Grouping of a token stream into conditional-directive chains.

use crate::formula::{parse_cpp_expression, Formula};
use crate::rast::VpType;

use super::lexer::{is_conditional_directive, Token, TokenKind};
use super::{OnError, ParseError};

/// Either a significant token (index into the token vector) or a whole
/// `#if ... #endif` chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Tok(usize),
    Chain(Box<Chain>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub branches: Vec<Branch>,
    /// Line of the closing `#endif` (last line of the file when missing).
    pub endif_line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub vp_type: VpType,
    pub expr: Option<Formula>,
    pub line: u32,
    pub items: Vec<Item>,
}

/// Net brace/paren effect of an item sequence, reading only the first
/// branch of nested chains.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Balance {
    pub braces: i64,
    pub parens: i64,
    pub min_braces: i64,
    pub min_parens: i64,
}

impl Balance {
    pub fn is_balanced(&self) -> bool {
        self.braces == 0 && self.parens == 0 && self.min_braces >= 0 && self.min_parens >= 0
    }
}

pub fn balance(items: &[Item], toks: &[Token]) -> Balance {
    let mut b = Balance::default();
    for item in items {
        match item {
            Item::Tok(t) => {
                let tok = &toks[*t];
                if tok.kind == TokenKind::Punctuation {
                    match tok.text.as_str() {
                        "{" => b.braces += 1,
                        "}" => b.braces -= 1,
                        "(" => b.parens += 1,
                        ")" => b.parens -= 1,
                        _ => {}
                    }
                }
            }
            Item::Chain(ch) => {
                let inner = ch.first_balance(toks);
                b.min_braces = b.min_braces.min(b.braces + inner.min_braces);
                b.min_parens = b.min_parens.min(b.parens + inner.min_parens);
                b.braces += inner.braces;
                b.parens += inner.parens;
            }
        }
        b.min_braces = b.min_braces.min(b.braces);
        b.min_parens = b.min_parens.min(b.parens);
    }
    b
}

impl Chain {
    pub fn first_balance(&self, toks: &[Token]) -> Balance {
        self.branches.first().map(|br| balance(&br.items, toks)).unwrap_or_default()
    }

    /// Every branch is bracket-balanced on its own.
    pub fn is_balanced(&self, toks: &[Token]) -> bool {
        self.branches.iter().all(|br| balance(&br.items, toks).is_balanced())
    }

    /// Every branch ends at a statement boundary.
    pub fn is_complete(&self, toks: &[Token]) -> bool {
        self.branches.iter().all(|br| items_complete(&br.items, toks))
    }

    pub fn first_line(&self) -> u32 {
        self.branches[0].line
    }

    /// The raw `#if`/`#elif` expressions preceding branch `k`.
    pub fn priors(&self, k: usize) -> Vec<Formula> {
        self.branches[..k].iter().filter_map(|b| b.expr.clone()).collect()
    }

    /// Last line covered by branch `k` (the line before the next directive,
    /// or the `#endif` line for the last branch).
    pub fn branch_end(&self, k: usize) -> u32 {
        match self.branches.get(k + 1) {
            Some(next) => next.line.saturating_sub(1).max(self.branches[k].line),
            None => self.endif_line,
        }
    }
}

/// Empty, or ending in `;`, `}`, a directive, or a complete chain.
pub fn items_complete(items: &[Item], toks: &[Token]) -> bool {
    match items.last() {
        None => true,
        Some(Item::Tok(t)) => {
            let tok = &toks[*t];
            tok.kind == TokenKind::Directive || tok.is(";") || tok.is("}")
        }
        Some(Item::Chain(ch)) => ch.is_complete(toks),
    }
}

/// Result of grouping: items plus the problems tolerated under best-effort.
#[derive(Debug)]
pub struct Grouped {
    pub items: Vec<Item>,
    pub recovered: Vec<ParseError>,
}

struct Frame {
    chain: Chain,
    has_else: bool,
}

/// Groups significant tokens (no comments/newlines) into chains.
pub fn group(toks: &[Token], significant: &[usize], on_error: OnError, last_line: u32) -> Result<Grouped, ParseError> {
    let mut root: Vec<Item> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();
    let mut recovered = Vec::new();

    fn current<'a>(root: &'a mut Vec<Item>, stack: &'a mut [Frame]) -> &'a mut Vec<Item> {
        match stack.last_mut() {
            Some(f) => &mut f.chain.branches.last_mut().unwrap().items,
            None => root,
        }
    }

    for &t in significant {
        let tok = &toks[t];
        let name = match tok.directive_name() {
            Some(n) if is_conditional_directive(n) => n,
            _ => {
                current(&mut root, &mut stack).push(Item::Tok(t));
                continue;
            }
        };
        let body = tok.directive_body();
        match name {
            "if" | "ifdef" | "ifndef" => {
                let (vp_type, expr) = directive_expr(name, body);
                stack.push(Frame {
                    chain: Chain {
                        branches: vec![Branch { vp_type, expr: Some(expr), line: tok.line, items: Vec::new() }],
                        endif_line: tok.line,
                    },
                    has_else: false,
                });
            }
            "elif" | "elifdef" | "elifndef" | "else" => {
                let err = match stack.last() {
                    None => Some(ParseError::Unmatched { directive: name.to_owned(), line: tok.line }),
                    Some(f) if f.has_else => Some(ParseError::AfterElse { directive: name.to_owned(), line: tok.line }),
                    _ => None,
                };
                if let Some(err) = err {
                    if on_error == OnError::SkipFile {
                        return Err(err);
                    }
                    recovered.push(err);
                    current(&mut root, &mut stack).push(Item::Tok(t));
                    continue;
                }
                let frame = stack.last_mut().unwrap();
                let (vp_type, expr) = if name == "else" {
                    frame.has_else = true;
                    (VpType::Else, None)
                } else {
                    let (_, e) = directive_expr(name, body);
                    (VpType::Elif, Some(e))
                };
                frame.chain.branches.push(Branch { vp_type, expr, line: tok.line, items: Vec::new() });
            }
            _ => {
                // endif
                match stack.pop() {
                    Some(mut frame) => {
                        frame.chain.endif_line = tok.end_line;
                        current(&mut root, &mut stack).push(Item::Chain(Box::new(frame.chain)));
                    }
                    None => {
                        let err = ParseError::Unmatched { directive: "endif".into(), line: tok.line };
                        if on_error == OnError::SkipFile {
                            return Err(err);
                        }
                        recovered.push(err);
                        root.push(Item::Tok(t));
                    }
                }
            }
        }
    }
    if let Some(open) = stack.last() {
        let err = ParseError::Unclosed { line: open.chain.first_line() };
        if on_error == OnError::SkipFile {
            return Err(err);
        }
        recovered.push(err);
        while let Some(mut frame) = stack.pop() {
            frame.chain.endif_line = last_line;
            current(&mut root, &mut stack).push(Item::Chain(Box::new(frame.chain)));
        }
    }
    Ok(Grouped { items: root, recovered })
}

/// Expression of an opening or `#elif`-family directive. Unparseable
/// expressions degrade to an opaque atom over their text.
fn directive_expr(name: &str, body: &str) -> (VpType, Formula) {
    let macro_name = || {
        let end = body.find(|c: char| !(c == '_' || c.is_ascii_alphanumeric())).unwrap_or(body.len());
        let m = &body[..end];
        if m.is_empty() {
            opaque(body)
        } else {
            Formula::var(m)
        }
    };
    match name {
        "ifdef" => (VpType::Ifdef, macro_name()),
        "ifndef" => (VpType::Ifndef, Formula::not(macro_name())),
        "elifdef" => (VpType::Elif, macro_name()),
        "elifndef" => (VpType::Elif, Formula::not(macro_name())),
        _ => (VpType::If, parse_cpp_expression(body).unwrap_or_else(|_| opaque(body))),
    }
}

fn opaque(text: &str) -> Formula {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        Formula::False
    } else {
        Formula::Var(compact)
    }
}
