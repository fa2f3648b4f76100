//! Boolean formulas over feature names.
//!
//! Formulas are purely syntactic: no simplification beyond And-flattening,
//! absorption of `TRUE` and idempotent conjunct dedup is ever applied, so
//! feature-reference counts stay faithful to what is written in the code.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A propositional formula over feature identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Var(String),
    Not(Box<Formula>),
    /// At least two children.
    And(Vec<Formula>),
    /// At least two children.
    Or(Vec<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("empty expression")]
    Empty,
    #[error("unbalanced parentheses in `{0}`")]
    UnbalancedParens(String),
    #[error("unexpected token `{token}` in `{expr}`")]
    Unexpected { token: String, expr: String },
    #[error("unexpected end of expression `{0}`")]
    UnexpectedEnd(String),
}

impl Formula {
    pub fn var(name: impl Into<String>) -> Self {
        Formula::Var(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    /// Builds an `And`, collapsing the 0- and 1-ary cases.
    pub fn and(mut children: Vec<Formula>) -> Self {
        match children.len() {
            0 => Formula::True,
            1 => children.pop().unwrap(),
            _ => Formula::And(children),
        }
    }

    /// Builds an `Or`, collapsing the 0- and 1-ary cases.
    pub fn or(mut children: Vec<Formula>) -> Self {
        match children.len() {
            0 => Formula::False,
            1 => children.pop().unwrap(),
            _ => Formula::Or(children),
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::True)
    }

    /// Distinct variable names, sorted.
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Var(name) => {
                out.insert(name.as_str());
            }
            Formula::Not(child) => child.collect_vars(out),
            Formula::And(children) | Formula::Or(children) => {
                for c in children {
                    c.collect_vars(out);
                }
            }
        }
    }

    /// True if `name` occurs anywhere in the formula.
    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Formula::True | Formula::False => false,
            Formula::Var(v) => v == name,
            Formula::Not(c) => c.mentions(name),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().any(|c| c.mentions(name)),
        }
    }

    /// Top-level conjuncts (`self` alone unless it is an `And`).
    pub fn conjuncts(&self) -> &[Formula] {
        match self {
            Formula::And(cs) => cs,
            other => std::slice::from_ref(other),
        }
    }

    /// Variables whose name is not a plain identifier come from opaque
    /// subexpressions such as `X>2`.
    fn is_opaque(&self) -> bool {
        match self {
            Formula::Var(name) => !name.chars().all(|c| c == '_' || c.is_ascii_alphanumeric()),
            _ => false,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(_) => 1,
            Formula::And(_) => 2,
            _ => 3,
        }
    }

    fn fmt_child(&self, child: &Formula, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Same-operator children need no parentheses; they only arise
        // from non-flattening constructors such as `sibling_condition`.
        let needs_parens = child.precedence() < self.precedence()
            || (matches!(self, Formula::Not(_)) && (child.precedence() < 3 || child.is_opaque()));
        if needs_parens {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("1"),
            Formula::False => f.write_str("0"),
            Formula::Var(name) => f.write_str(name),
            Formula::Not(child) => {
                f.write_str("!")?;
                self.fmt_child(child, f)
            }
            Formula::And(children) | Formula::Or(children) => {
                let sep = if matches!(self, Formula::And(_)) { " && " } else { " || " };
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    self.fmt_child(c, f)?;
                }
                Ok(())
            }
        }
    }
}

/// Condition of one member of an `#if`/`#elif`/`#else` chain: every earlier
/// sibling's expression negated, followed by the member's own expression
/// (`None` for `#else`).
pub fn sibling_condition(prior_exprs: &[Formula], own_expr: Option<&Formula>) -> Formula {
    let mut parts: Vec<Formula> = prior_exprs.iter().cloned().map(Formula::not).collect();
    if let Some(own) = own_expr {
        parts.push(own.clone());
    }
    Formula::and(parts)
}

/// Conjunction with And-flattening, `TRUE` absorption and removal of
/// structurally repeated conjuncts. Any `FALSE` conjunct yields `FALSE`.
pub fn conjoin(parent_pc: &Formula, condition: &Formula) -> Formula {
    let mut flat = Vec::new();
    flatten_and(parent_pc, &mut flat);
    flatten_and(condition, &mut flat);
    let mut parts: Vec<Formula> = Vec::new();
    for c in flat {
        match c {
            Formula::True => {}
            Formula::False => return Formula::False,
            other => {
                if !parts.contains(other) {
                    parts.push(other.clone());
                }
            }
        }
    }
    Formula::and(parts)
}

fn flatten_and<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::And(cs) => cs.iter().for_each(|c| flatten_and(c, out)),
        other => out.push(other),
    }
}

/// Distinct variable names of `f`.
pub fn variables_of(f: &Formula) -> BTreeSet<String> {
    f.variables().into_iter().map(str::to_owned).collect()
}

// ---------------------------------------------------------------------------
// Parsing of preprocessor conditional expressions.

#[derive(Debug, Clone, PartialEq, Eq)]
enum ExprTok {
    Ident(String),
    Number(String),
    Op(&'static str),
    Other(String),
}

impl ExprTok {
    fn text(&self) -> &str {
        match self {
            ExprTok::Ident(s) | ExprTok::Number(s) | ExprTok::Other(s) => s,
            ExprTok::Op(s) => s,
        }
    }
}

const OPS: [&str; 28] = [
    "&&", "||", "==", "!=", "<=", ">=", "<<", ">>", "(", ")", "!", "<", ">", "+", "-", "*", "/", "%", "&", "|", "^",
    "~", "?", ":", ",", "#", "[", "]",
];

fn tokenize_expr(text: &str) -> Vec<ExprTok> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'_' || c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                i += 1;
            }
            toks.push(ExprTok::Ident(text[start..i].to_owned()));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] == b'_' || bytes[i] == b'.' || bytes[i].is_ascii_alphanumeric()) {
                i += 1;
            }
            toks.push(ExprTok::Number(text[start..i].to_owned()));
        } else if c == b'\'' || c == b'"' {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i] != c {
                if bytes[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(bytes.len());
            toks.push(ExprTok::Other(text[start..i].to_owned()));
        } else if let Some(op) = OPS.iter().find(|op| text[i..].starts_with(**op)) {
            toks.push(ExprTok::Op(op));
            i += op.len();
        } else {
            let ch = text[i..].chars().next().unwrap();
            toks.push(ExprTok::Other(ch.to_string()));
            i += ch.len_utf8();
        }
    }
    toks
}

fn literal_is_zero(lit: &str) -> Option<bool> {
    let body = lit.trim_end_matches(['u', 'U', 'l', 'L']);
    let value = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        u128::from_str_radix(hex, 16).ok()?
    } else if body.len() > 1 && body.starts_with('0') {
        u128::from_str_radix(&body[1..], 8).ok()?
    } else {
        body.parse::<u128>().ok()?
    };
    Some(value == 0)
}

struct ExprParser<'a> {
    toks: Vec<ExprTok>,
    pos: usize,
    source: &'a str,
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&ExprTok> {
        self.toks.get(self.pos)
    }

    fn peek_op(&self) -> Option<&'static str> {
        match self.peek() {
            Some(ExprTok::Op(op)) => Some(op),
            _ => None,
        }
    }

    fn unexpected(&self) -> FormulaError {
        match self.peek() {
            Some(t) => FormulaError::Unexpected { token: t.text().to_owned(), expr: self.source.to_owned() },
            None => FormulaError::UnexpectedEnd(self.source.to_owned()),
        }
    }

    fn parse_or(&mut self) -> Result<Formula, FormulaError> {
        let mut parts = Vec::new();
        push_flat(&mut parts, self.parse_and()?, true);
        while self.peek_op() == Some("||") {
            self.pos += 1;
            push_flat(&mut parts, self.parse_and()?, true);
        }
        Ok(Formula::or(parts))
    }

    fn parse_and(&mut self) -> Result<Formula, FormulaError> {
        let mut parts = Vec::new();
        push_flat(&mut parts, self.parse_unary()?, false);
        while self.peek_op() == Some("&&") {
            self.pos += 1;
            push_flat(&mut parts, self.parse_unary()?, false);
        }
        Ok(Formula::and(parts))
    }

    /// `!`-prefixed primary; if a non-boolean operator follows, the whole
    /// operand is re-read as an opaque atom.
    fn parse_unary(&mut self) -> Result<Formula, FormulaError> {
        let start = self.pos;
        let mut negations = 0;
        while self.peek_op() == Some("!") {
            self.pos += 1;
            negations += 1;
        }
        let primary = self.parse_primary()?;
        match self.peek() {
            None => {}
            Some(ExprTok::Op("&&" | "||" | ")")) => {}
            Some(_) => return self.opaque_from(start),
        }
        let mut f = primary;
        for _ in 0..negations {
            f = Formula::not(f);
        }
        Ok(f)
    }

    fn parse_primary(&mut self) -> Result<Formula, FormulaError> {
        let tok = self.peek().cloned().ok_or_else(|| self.unexpected())?;
        match tok {
            ExprTok::Op("(") => {
                self.pos += 1;
                let inner = self.parse_or()?;
                if self.peek_op() != Some(")") {
                    return Err(FormulaError::UnbalancedParens(self.source.to_owned()));
                }
                self.pos += 1;
                Ok(inner)
            }
            ExprTok::Ident(name) if name == "defined" => {
                self.pos += 1;
                if self.peek_op() == Some("(") {
                    self.pos += 1;
                    let name = match self.peek() {
                        Some(ExprTok::Ident(n)) => n.clone(),
                        _ => return Err(self.unexpected()),
                    };
                    self.pos += 1;
                    if self.peek_op() != Some(")") {
                        return Err(FormulaError::UnbalancedParens(self.source.to_owned()));
                    }
                    self.pos += 1;
                    Ok(Formula::Var(name))
                } else if let Some(ExprTok::Ident(n)) = self.peek() {
                    let name = n.clone();
                    self.pos += 1;
                    Ok(Formula::Var(name))
                } else {
                    Err(self.unexpected())
                }
            }
            ExprTok::Ident(name) => {
                self.pos += 1;
                if self.peek_op() == Some("(") {
                    // Function-like macro invocation: opaque.
                    let start = self.pos - 1;
                    self.skip_group()?;
                    Ok(Formula::Var(self.text_between(start, self.pos)))
                } else {
                    Ok(Formula::Var(name))
                }
            }
            ExprTok::Number(lit) => {
                self.pos += 1;
                match literal_is_zero(&lit) {
                    Some(true) => Ok(Formula::False),
                    Some(false) => Ok(Formula::True),
                    None => Ok(Formula::Var(lit)),
                }
            }
            ExprTok::Other(text) => {
                self.pos += 1;
                Ok(Formula::Var(text))
            }
            ExprTok::Op("-" | "+" | "~") => {
                let start = self.pos;
                self.pos += 1;
                self.parse_primary()?;
                Ok(Formula::Var(self.text_between(start, self.pos)))
            }
            ExprTok::Op(")") => Err(FormulaError::UnbalancedParens(self.source.to_owned())),
            ExprTok::Op(_) => Err(self.unexpected()),
        }
    }

    /// Skips a parenthesized group starting at the current `(`.
    fn skip_group(&mut self) -> Result<(), FormulaError> {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            match t {
                ExprTok::Op("(") => depth += 1,
                ExprTok::Op(")") => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += 1;
                        return Ok(());
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        Err(FormulaError::UnbalancedParens(self.source.to_owned()))
    }

    /// Consumes from `start` up to the next depth-0 `&&`, `||` or unmatched `)`.
    fn opaque_from(&mut self, start: usize) -> Result<Formula, FormulaError> {
        self.pos = start;
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            match t {
                ExprTok::Op("&&" | "||") if depth == 0 => break,
                ExprTok::Op(")") if depth == 0 => break,
                ExprTok::Op("(") => depth += 1,
                ExprTok::Op(")") => depth -= 1,
                _ => {}
            }
            self.pos += 1;
        }
        if depth != 0 {
            return Err(FormulaError::UnbalancedParens(self.source.to_owned()));
        }
        if self.pos == start {
            return Err(self.unexpected());
        }
        // A trailing binary operator with nothing after it is malformed.
        if let ExprTok::Op(op) = &self.toks[self.pos - 1] {
            if *op != ")" {
                return Err(FormulaError::UnexpectedEnd(self.source.to_owned()));
            }
        }
        Ok(Formula::Var(self.text_between(start, self.pos)))
    }

    fn text_between(&self, start: usize, end: usize) -> String {
        self.toks[start..end].iter().map(ExprTok::text).collect()
    }
}

fn push_flat(parts: &mut Vec<Formula>, f: Formula, is_or: bool) {
    match (f, is_or) {
        (Formula::Or(cs), true) | (Formula::And(cs), false) => parts.extend(cs),
        (other, _) => parts.push(other),
    }
}

/// Parses the expression part of an `#if`/`#elif` directive, or the bare
/// macro name of `#ifdef`/`#ifndef`.
///
/// Arithmetic and comparison subexpressions become opaque atoms whose name
/// is the subexpression text with all whitespace removed.
pub fn parse_cpp_expression(text: &str) -> Result<Formula, FormulaError> {
    let toks = tokenize_expr(text);
    if toks.is_empty() {
        return Err(FormulaError::Empty);
    }
    let mut parser = ExprParser { toks, pos: 0, source: text.trim() };
    let f = parser.parse_or()?;
    match parser.peek() {
        None => Ok(f),
        Some(ExprTok::Op(")")) => Err(FormulaError::UnbalancedParens(text.trim().to_owned())),
        Some(_) => Err(parser.unexpected()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(n: &str) -> Formula {
        Formula::var(n)
    }

    #[test]
    fn parses_defined_forms() {
        assert_eq!(
            parse_cpp_expression("defined(A) && !defined(B)").unwrap(),
            Formula::And(vec![v("A"), Formula::not(v("B"))])
        );
        assert_eq!(parse_cpp_expression("A").unwrap(), v("A"));
        assert_eq!(parse_cpp_expression("defined A").unwrap(), v("A"));
        assert_eq!(
            parse_cpp_expression("defined(A) || (defined(B) && defined(C))").unwrap(),
            Formula::Or(vec![v("A"), Formula::And(vec![v("B"), v("C")])])
        );
    }

    #[test]
    fn literals() {
        assert_eq!(parse_cpp_expression("0").unwrap(), Formula::False);
        assert_eq!(parse_cpp_expression("1").unwrap(), Formula::True);
        assert_eq!(parse_cpp_expression("0x0UL").unwrap(), Formula::False);
        assert_eq!(parse_cpp_expression("42").unwrap(), Formula::True);
        assert_eq!(parse_cpp_expression("!0").unwrap(), Formula::not(Formula::False));
    }

    #[test]
    fn opaque_atoms() {
        assert_eq!(parse_cpp_expression("X > 2").unwrap(), v("X>2"));
        assert_eq!(parse_cpp_expression("defined(A) && X  >=  10").unwrap(), Formula::And(vec![v("A"), v("X>=10")]));
        assert_eq!(parse_cpp_expression("(A + B) > 2").unwrap(), v("(A+B)>2"));
        assert_eq!(parse_cpp_expression("IS_ENABLED(CONFIG_X)").unwrap(), v("IS_ENABLED(CONFIG_X)"));
        assert_eq!(parse_cpp_expression("!A == 1").unwrap(), v("!A==1"));
        assert_eq!(parse_cpp_expression("(X > 2)").unwrap(), v("X>2"));
    }

    #[test]
    fn precedence_and_flattening() {
        assert_eq!(
            parse_cpp_expression("A || B && C").unwrap(),
            Formula::Or(vec![v("A"), Formula::And(vec![v("B"), v("C")])])
        );
        assert_eq!(parse_cpp_expression("A && (B && C)").unwrap(), Formula::And(vec![v("A"), v("B"), v("C")]));
        assert_eq!(parse_cpp_expression("!(A || B)").unwrap(), Formula::not(Formula::Or(vec![v("A"), v("B")])));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_cpp_expression("   "), Err(FormulaError::Empty));
        assert!(matches!(parse_cpp_expression("(A && B"), Err(FormulaError::UnbalancedParens(_))));
        assert!(matches!(parse_cpp_expression("A && B)"), Err(FormulaError::UnbalancedParens(_))));
        assert!(parse_cpp_expression("A &&").is_err());
        assert!(parse_cpp_expression("defined").is_err());
        assert!(parse_cpp_expression("X >").is_err());
    }

    #[test]
    fn render() {
        let f = Formula::And(vec![Formula::not(v("A")), Formula::Or(vec![v("B"), v("C")])]);
        assert_eq!(f.to_string(), "!A && (B || C)");
        assert_eq!(Formula::not(Formula::And(vec![v("A"), v("B")])).to_string(), "!(A && B)");
        assert_eq!(Formula::Or(vec![Formula::And(vec![v("A"), v("B")]), v("C")]).to_string(), "A && B || C");
    }

    #[test]
    fn sibling_condition_examples() {
        assert_eq!(sibling_condition(&[v("A")], Some(&v("B"))), Formula::And(vec![Formula::not(v("A")), v("B")]));
        assert_eq!(sibling_condition(&[v("A")], None), Formula::not(v("A")));
        assert_eq!(
            sibling_condition(&[v("A"), v("B")], None),
            Formula::And(vec![Formula::not(v("A")), Formula::not(v("B"))])
        );
        assert_eq!(sibling_condition(&[], Some(&v("A"))), v("A"));
    }

    #[test]
    fn conjoin_examples() {
        assert_eq!(conjoin(&Formula::True, &v("A")), v("A"));
        assert_eq!(conjoin(&v("B"), &v("A")), Formula::And(vec![v("B"), v("A")]));
        assert_eq!(
            conjoin(&Formula::And(vec![v("X"), v("Y")]), &Formula::not(v("Z"))),
            Formula::And(vec![v("X"), v("Y"), Formula::not(v("Z"))])
        );
        assert_eq!(conjoin(&v("A"), &Formula::False), Formula::False);
        assert_eq!(conjoin(&v("A"), &v("A")), v("A"));
    }

    #[test]
    fn variables_examples() {
        let f = Formula::And(vec![v("A"), Formula::not(v("B"))]);
        assert_eq!(variables_of(&f), ["A", "B"].iter().map(|s| s.to_string()).collect());
        assert!(variables_of(&Formula::True).is_empty());
        assert_eq!(variables_of(&Formula::Or(vec![v("A"), v("A")])).len(), 1);
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            "[A-E]".prop_map(|s| s),
            "[A-E]".prop_map(|s| format!("defined({s})")),
            "[A-E]".prop_map(|s| format!("defined {s}")),
            Just("0".to_owned()),
            Just("1".to_owned()),
            "[A-E]".prop_map(|s| format!("{s} > 2")),
            "[A-E]".prop_map(|s| format!("IS_ENABLED(CONFIG_{s})")),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| format!("!{e}")),
                inner.clone().prop_map(|e| format!("!({e})")),
                inner.clone().prop_map(|e| format!("({e})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} && {b}")),
                (inner.clone(), inner).prop_map(|(a, b)| format!("{a} || {b}")),
            ]
        })
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![Just(Formula::True), "[A-D]".prop_map(Formula::Var)];
        leaf.prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                proptest::collection::vec(inner.clone(), 2..4).prop_map(Formula::And),
                proptest::collection::vec(inner, 2..4).prop_map(Formula::Or),
            ]
        })
    }

    proptest! {
        #[test]
        fn render_reparse_round_trip(text in arb_expr()) {
            if let Ok(f) = parse_cpp_expression(&text) {
                let again = parse_cpp_expression(&f.to_string()).unwrap();
                prop_assert_eq!(again, f);
            }
        }

        #[test]
        fn conjoin_associative_with_identity(a in arb_formula(), b in arb_formula(), c in arb_formula()) {
            prop_assert_eq!(conjoin(&conjoin(&a, &b), &c), conjoin(&a, &conjoin(&b, &c)));
            prop_assert_eq!(conjoin(&Formula::True, &a), conjoin(&a, &Formula::True));
            let mut union = variables_of(&a);
            union.extend(variables_of(&b));
            prop_assert_eq!(variables_of(&conjoin(&a, &b)), union);
        }

        #[test]
        fn sibling_chain_is_syntactically_exclusive(names in proptest::collection::vec("[A-H]", 2..6), has_else in any::<bool>()) {
            let exprs: Vec<Formula> = names.iter().cloned().map(Formula::Var).collect();
            let mut conds = Vec::new();
            for k in 0..exprs.len() {
                conds.push(sibling_condition(&exprs[..k], Some(&exprs[k])));
            }
            if has_else {
                conds.push(sibling_condition(&exprs, None));
            }
            for i in 0..conds.len() {
                for j in (i + 1)..conds.len() {
                    let joint = conjoin(&conds[i], &conds[j]);
                    let atoms = joint.conjuncts();
                    let e = &exprs[i];
                    prop_assert!(atoms.contains(e));
                    prop_assert!(atoms.contains(&Formula::not(e.clone())));
                }
            }
        }
    }
}
