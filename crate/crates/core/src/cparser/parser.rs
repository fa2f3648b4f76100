//! Statement-granularity parser over grouped items.
//!
//! Conditional chains whose branches bracket whole statements become
//! `CppBlock` containers. Chains inside a statement are kept as embedded
//! fragments of that statement. A control structure whose header and closing
//! brace are each wrapped in equal conditions is normalized into a
//! `CppBlock` holding the structure with `Reference`s to its body, the body
//! itself staying outside. Anything else that breaks bracket structure is
//! kept as unparsed statements.

use crate::formula::{sibling_condition, Formula};
use crate::rast::{BranchType, CaseType, EmbeddedBlock, Fragment, LoopType, NodeId, NodeKind, RastBuilder, Unparsed};

use super::lexer::{Token, TokenKind};
use super::pptree::{balance, items_complete, Chain, Item};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ctx {
    TopLevel,
    Body,
    Switch,
}

const KEYWORDS: [&str; 16] = [
    "if", "else", "while", "for", "do", "switch", "case", "default", "return", "sizeof", "goto", "break", "continue",
    "typedef", "struct", "union",
];

/// Identifiers that take a parenthesized argument but never name the
/// function being defined.
const ATTRIBUTE_LIKE: [&str; 12] = [
    "__attribute__",
    "__attribute",
    "__declspec",
    "__asm__",
    "__asm",
    "asm",
    "__acquires",
    "__releases",
    "__must_hold",
    "__printf",
    "__scanf",
    "__section",
];

pub(super) struct Parser<'a> {
    toks: &'a [Token],
    pub(super) builder: RastBuilder,
    last_line: u32,
}

impl<'a> Parser<'a> {
    pub(super) fn new(toks: &'a [Token], last_line: u32) -> Self {
        Parser { toks, builder: RastBuilder::new(), last_line }
    }

    pub(super) fn parse_top_level(&mut self, items: &[Item]) -> Vec<NodeId> {
        self.parse_region(items, Ctx::TopLevel)
    }

    fn tok(&self, item: &Item) -> Option<&'a Token> {
        match item {
            Item::Tok(t) => Some(&self.toks[*t]),
            Item::Chain(_) => None,
        }
    }

    fn tok_is(&self, items: &[Item], i: usize, text: &str) -> bool {
        items.get(i).and_then(|it| self.tok(it)).is_some_and(|t| t.is(text))
    }

    fn parse_region(&mut self, items: &[Item], ctx: Ctx) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < items.len() {
            let next = self.parse_one(items, i, ctx, &mut out);
            debug_assert!(next > i);
            i = next.max(i + 1);
        }
        out
    }

    fn parse_one(&mut self, items: &[Item], i: usize, ctx: Ctx, out: &mut Vec<NodeId>) -> usize {
        match &items[i] {
            Item::Chain(ch) => self.parse_chain(items, i, ch, ctx, out),
            Item::Tok(t) => {
                let tok = &self.toks[*t];
                if tok.kind == TokenKind::Directive {
                    out.push(self.directive_stmt(tok));
                    return i + 1;
                }
                match ctx {
                    Ctx::TopLevel => self.parse_top(items, i, out),
                    Ctx::Body | Ctx::Switch => self.parse_stmt(items, i, ctx, out),
                }
            }
        }
    }

    fn directive_stmt(&mut self, tok: &Token) -> NodeId {
        self.builder.add(
            NodeKind::SingleStatement { code: Unparsed::plain(tok.text.clone()), directive: true },
            tok.line,
            tok.end_line,
        )
    }

    fn statement(&mut self, c: Collector) -> Option<NodeId> {
        let (start, end) = (c.start_line?, c.end_line);
        let code = c.finish();
        if code.text.trim().is_empty() {
            return None;
        }
        Some(self.builder.add(NodeKind::SingleStatement { code, directive: false }, start, end))
    }

    // -- chains at statement boundaries ------------------------------------

    fn parse_chain(&mut self, items: &[Item], i: usize, ch: &Chain, ctx: Ctx, out: &mut Vec<NodeId>) -> usize {
        if ch.is_balanced(self.toks) {
            if !ch.is_complete(self.toks) {
                // The chain starts a statement or declaration.
                return match ctx {
                    Ctx::TopLevel => self.parse_top(items, i, out),
                    _ => self.parse_generic(items, i, out),
                };
            }
            out.extend(self.disciplined_chain(ch, ctx));
            return i + 1;
        }
        match ctx {
            Ctx::TopLevel => {
                if self.opens_body(ch) {
                    let before = out.len();
                    let next = self.parse_top(items, i, out);
                    if out[before..].iter().any(|&n| matches!(self.builder.node(n).kind, NodeKind::Function { .. })) {
                        return next;
                    }
                    // Not a function after all; drop and fall back.
                    out.truncate(before);
                }
            }
            Ctx::Body | Ctx::Switch => {
                if let Some(next) = self.split_control(items, i, ch, ctx, out) {
                    return next;
                }
            }
        }
        self.fallback(items, i, out)
    }

    fn disciplined_chain(&mut self, ch: &Chain, ctx: Ctx) -> Vec<NodeId> {
        let mut ids = Vec::with_capacity(ch.branches.len());
        for (k, br) in ch.branches.iter().enumerate() {
            let node = self.builder.add(
                NodeKind::CppBlock { vp_type: br.vp_type, raw_expr: br.expr.clone(), siblings: Vec::new() },
                br.line,
                ch.branch_end(k),
            );
            let children = self.parse_region(&br.items, ctx);
            self.builder.set_children(node, children);
            ids.push(node);
        }
        self.builder.link_chain(&ids);
        ids
    }

    /// Every branch ends with an opening `{` that it leaves unclosed.
    fn opens_body(&self, ch: &Chain) -> bool {
        ch.branches.iter().all(|br| {
            let b = balance(&br.items, self.toks);
            b.braces == 1 && b.parens == 0 && br.items.last().and_then(|it| self.tok(it)).is_some_and(|t| t.is("{"))
        })
    }

    /// Header and closing brace of one control structure each wrapped in a
    /// single-branch conditional with equal expressions.
    fn split_control(
        &mut self,
        items: &[Item],
        i: usize,
        ch: &Chain,
        ctx: Ctx,
        out: &mut Vec<NodeId>,
    ) -> Option<usize> {
        if ch.branches.len() != 1 || !ch.branches[0].vp_type.opens_chain() {
            return None;
        }
        let open = &ch.branches[0];
        let b = balance(&open.items, self.toks);
        let n = open.items.len();
        if b.braces != 1 || b.parens != 0 || !self.tok_is(&open.items, n.checked_sub(1)?, "{") {
            return None;
        }
        let h = self.header_start(&open.items[..n - 1])?;
        let prefix = &open.items[..h];
        if !balance(prefix, self.toks).is_balanced() || !items_complete(prefix, self.toks) {
            return None;
        }
        let header_items = &open.items[h..n - 1];
        let kw = self.tok(&header_items[0])?.text.as_str();

        let mut depth = 0i64;
        let mut j = i + 1;
        let close = loop {
            let item = items.get(j)?;
            match item {
                Item::Tok(t) => {
                    let tok = &self.toks[*t];
                    if tok.is("{") {
                        depth += 1;
                    } else if tok.is("}") {
                        depth -= 1;
                        if depth < 0 {
                            return None;
                        }
                    }
                }
                Item::Chain(c2) => {
                    if depth == 0 && self.is_closer(c2, open.expr.as_ref(), kw == "do") {
                        break j;
                    }
                    if !c2.is_balanced(self.toks) {
                        return None;
                    }
                }
            }
            j += 1;
        };
        let Item::Chain(closer) = &items[close] else { return None };
        let closer_items = &closer.branches[0].items;
        let closing_line = closer_items.last().and_then(|it| self.tok(it)).map_or(closer.endif_line, |t| t.end_line);

        let block = self.builder.add(
            NodeKind::CppBlock { vp_type: open.vp_type, raw_expr: open.expr.clone(), siblings: Vec::new() },
            open.line,
            closer.endif_line,
        );
        let mut block_children = self.parse_region(prefix, ctx);

        let mut hc = Collector::default();
        for it in header_items {
            hc.push_item(self.toks, it);
        }
        let start = hc.start_line.unwrap_or(open.line);
        let ctrl = match kw {
            "while" => self.builder.add(
                NodeKind::Loop { loop_type: LoopType::While, header: hc.finish() },
                start,
                closing_line,
            ),
            "for" => {
                self.builder.add(NodeKind::Loop { loop_type: LoopType::For, header: hc.finish() }, start, closing_line)
            }
            "do" => {
                let mut wc = Collector::default();
                for it in &closer_items[1..] {
                    wc.push_item(self.toks, it);
                }
                let header = wc.finish();
                self.builder.add(NodeKind::Loop { loop_type: LoopType::DoWhile, header }, start, closing_line)
            }
            _ => {
                let branch_type = match (kw, header_items.len()) {
                    ("if", _) => BranchType::If,
                    ("else", 1) => BranchType::Else,
                    _ => BranchType::ElseIf,
                };
                let node = self.builder.add(
                    NodeKind::Branch { branch_type, header: hc.finish(), siblings: Vec::new() },
                    start,
                    closing_line,
                );
                self.builder.link_chain(&[node]);
                node
            }
        };
        let body = self.parse_region(&items[i + 1..close], ctx);
        let refs: Vec<NodeId> = body
            .iter()
            .map(|&t| {
                let (s, e) = (self.builder.node(t).start_line, self.builder.node(t).end_line);
                self.builder.add(NodeKind::Reference { target: t }, s, e)
            })
            .collect();
        self.builder.set_children(ctrl, refs);
        block_children.push(ctrl);
        self.builder.set_children(block, block_children);
        self.builder.link_chain(&[block]);
        out.push(block);
        out.extend(body);
        Some(close + 1)
    }

    /// Index where a trailing `while (..)`, `for (..)`, `if (..)`,
    /// `else if (..)`, `else` or `do` header starts.
    fn header_start(&self, items: &[Item]) -> Option<usize> {
        let n = items.len();
        let last = self.tok(items.get(n.checked_sub(1)?)?)?;
        if last.is("do") || last.is("else") {
            return Some(n - 1);
        }
        if !last.is(")") {
            return None;
        }
        let mut depth = 0i64;
        let mut k = n;
        let open = loop {
            k = k.checked_sub(1)?;
            let t = self.tok(&items[k])?;
            if t.is(")") {
                depth += 1;
            } else if t.is("(") {
                depth -= 1;
                if depth == 0 {
                    break k;
                }
            }
        };
        let kw_idx = open.checked_sub(1)?;
        let kw = self.tok(&items[kw_idx])?;
        match kw.text.as_str() {
            "while" | "for" => Some(kw_idx),
            "if" => {
                if kw_idx > 0 && self.tok_is(items, kw_idx - 1, "else") {
                    Some(kw_idx - 1)
                } else {
                    Some(kw_idx)
                }
            }
            _ => None,
        }
    }

    fn is_closer(&self, ch: &Chain, expr: Option<&Formula>, is_do: bool) -> bool {
        if ch.branches.len() != 1 || !ch.branches[0].vp_type.opens_chain() || ch.branches[0].expr.as_ref() != expr {
            return false;
        }
        let items = &ch.branches[0].items;
        if !self.tok_is(items, 0, "}") {
            return false;
        }
        if is_do {
            items.len() > 2
                && self.tok_is(items, 1, "while")
                && self.tok_is(items, items.len() - 1, ";")
                && balance(&items[1..], self.toks).is_balanced()
        } else {
            items.len() == 1
        }
    }

    /// Keeps an undisciplined region as unparsed statements: the chain, and
    /// when it opens brackets, everything up to where they close again.
    fn fallback(&mut self, items: &[Item], i: usize, out: &mut Vec<NodeId>) -> usize {
        let Item::Chain(ch) = &items[i] else { unreachable!() };
        let b = ch.first_balance(self.toks);
        let (mut braces, mut parens) = (b.braces, b.parens);
        let mut end = i + 1;
        while end < items.len() && (braces > 0 || parens > 0) {
            let d = balance(std::slice::from_ref(&items[end]), self.toks);
            braces += d.braces;
            parens += d.parens;
            end += 1;
        }
        out.extend(self.unparsed_split(&items[i..end]));
        end
    }

    fn unparsed_split(&mut self, items: &[Item]) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut c = Collector::default();
        for item in items {
            match item {
                Item::Tok(t) => {
                    let tok = &self.toks[*t];
                    if tok.kind == TokenKind::Directive {
                        out.extend(self.statement(std::mem::take(&mut c)));
                        out.push(self.directive_stmt(tok));
                        continue;
                    }
                    c.push_tok(self.toks, *t);
                    if tok.is(";") || tok.is("{") || tok.is("}") {
                        out.extend(self.statement(std::mem::take(&mut c)));
                    }
                }
                Item::Chain(ch) => {
                    out.extend(self.statement(std::mem::take(&mut c)));
                    let mut ids = Vec::new();
                    for (k, br) in ch.branches.iter().enumerate() {
                        let node = self.builder.add(
                            NodeKind::CppBlock { vp_type: br.vp_type, raw_expr: br.expr.clone(), siblings: Vec::new() },
                            br.line,
                            ch.branch_end(k),
                        );
                        let kids = self.unparsed_split(&br.items);
                        self.builder.set_children(node, kids);
                        ids.push(node);
                    }
                    self.builder.link_chain(&ids);
                    out.extend(ids);
                }
            }
        }
        out.extend(self.statement(c));
        out
    }

    // -- brace matching ------------------------------------------------------

    /// Index of the `}` matching the `{` at `open`, reading only first
    /// branches of chains in between.
    fn find_match(&self, items: &[Item], open: usize) -> Option<usize> {
        self.find_close(items, open + 1, 1)
    }

    fn find_close(&self, items: &[Item], from: usize, mut depth: i64) -> Option<usize> {
        for (k, item) in items.iter().enumerate().skip(from) {
            match item {
                Item::Tok(t) => {
                    let tok = &self.toks[*t];
                    if tok.is("{") {
                        depth += 1;
                    } else if tok.is("}") {
                        depth -= 1;
                        if depth == 0 {
                            return Some(k);
                        }
                    }
                }
                Item::Chain(ch) => {
                    depth += ch.first_balance(self.toks).braces;
                    if depth <= 0 {
                        return None;
                    }
                }
            }
        }
        None
    }

    fn close_line(&self, items: &[Item], close: Option<usize>) -> u32 {
        match close.and_then(|k| self.tok(&items[k])) {
            Some(t) => t.end_line,
            None => self.last_line,
        }
    }

    // -- top level -----------------------------------------------------------

    fn parse_top(&mut self, items: &[Item], i: usize, out: &mut Vec<NodeId>) -> usize {
        // extern "C" { ... } is a transparent container.
        if self.tok_is(items, i, "extern")
            && items.get(i + 1).and_then(|it| self.tok(it)).is_some_and(|t| t.kind == TokenKind::Literal)
            && self.tok_is(items, i + 2, "{")
        {
            let close = self.find_match(items, i + 2);
            let end = close.unwrap_or(items.len());
            out.extend(self.parse_region(&items[i + 3..end], Ctx::TopLevel));
            return end + 1;
        }

        let mut c = Collector::default();
        let mut parens = 0i64;
        let mut braces = 0i64;
        let mut j = i;
        while j < items.len() {
            match &items[j] {
                Item::Tok(t) => {
                    let tok = &self.toks[*t];
                    if braces > 0 {
                        // Inside brackets opened by a conditional fragment.
                        c.push_tok(self.toks, *t);
                        j += 1;
                        if tok.is("{") {
                            braces += 1;
                        } else if tok.is("}") {
                            braces -= 1;
                            if braces == 0 {
                                break;
                            }
                        }
                        continue;
                    }
                    if tok.is("{") && parens == 0 {
                        if let Some(name) = function_name(&c.flat, self.toks) {
                            let close = self.find_match(items, j);
                            return self.function(items, c, name, j + 1, close, out);
                        }
                        let close = self.find_match(items, j);
                        let end = close.unwrap_or(items.len() - 1);
                        for it in &items[j..=end] {
                            c.push_item(self.toks, it);
                        }
                        j = end + 1;
                        let continues = c.flat.iter().any(|&t| self.toks[t].is("="))
                            || c.flat.first().is_some_and(|&t| {
                                matches!(self.toks[t].text.as_str(), "struct" | "union" | "enum" | "typedef")
                            });
                        if !continues || close.is_none() {
                            break;
                        }
                        continue;
                    }
                    if tok.is("}") && parens == 0 {
                        if c.is_empty() {
                            c.push_tok(self.toks, *t);
                            j += 1;
                        }
                        break;
                    }
                    c.push_tok(self.toks, *t);
                    j += 1;
                    if tok.is("(") {
                        parens += 1;
                    } else if tok.is(")") {
                        parens -= 1;
                    } else if tok.is(";") && parens <= 0 {
                        break;
                    }
                }
                Item::Chain(ch) => {
                    if parens == 0 && braces == 0 && self.opens_body(ch) {
                        let mut candidate = c.flat.clone();
                        candidate.extend(first_branch_flat(ch, self.toks));
                        candidate.pop();
                        if let Some(name) = function_name(&candidate, self.toks) {
                            c.push_chain(self.toks, ch);
                            let close = self.find_close(items, j + 1, 1);
                            return self.function(items, c, name, j + 1, close, out);
                        }
                    }
                    let b = ch.first_balance(self.toks);
                    c.push_chain(self.toks, ch);
                    j += 1;
                    parens += b.parens;
                    braces += b.braces;
                    if braces <= 0 && parens <= 0 && self.first_ends_with_semicolon(ch) {
                        break;
                    }
                    if braces < 0 {
                        break;
                    }
                }
            }
        }
        out.extend(self.statement(c));
        j.max(i + 1)
    }

    fn function(
        &mut self,
        items: &[Item],
        sig: Collector,
        name: String,
        body_start: usize,
        close: Option<usize>,
        out: &mut Vec<NodeId>,
    ) -> usize {
        let start = sig.start_line.unwrap_or(1);
        let body_end = close.unwrap_or(items.len());
        let end = self.close_line(items, close).max(start);
        let node = self.builder.add(NodeKind::Function { name, signature: sig.finish() }, start, end);
        let body = self.parse_region(&items[body_start.min(body_end)..body_end], Ctx::Body);
        self.builder.set_children(node, body);
        out.push(node);
        body_end + 1
    }

    fn first_ends_with_semicolon(&self, ch: &Chain) -> bool {
        let mut items = &ch.branches[0].items;
        loop {
            match items.last() {
                Some(Item::Tok(t)) => return self.toks[*t].is(";"),
                Some(Item::Chain(inner)) => items = &inner.branches[0].items,
                None => return false,
            }
        }
    }

    // -- function bodies -----------------------------------------------------

    fn parse_stmt(&mut self, items: &[Item], i: usize, ctx: Ctx, out: &mut Vec<NodeId>) -> usize {
        let tok = self.tok(&items[i]).unwrap();
        if tok.kind != TokenKind::Identifier && !tok.is("{") {
            return self.parse_generic(items, i, out);
        }
        match tok.text.as_str() {
            "{" => {
                let close = self.find_match(items, i);
                let end = close.unwrap_or(items.len());
                out.extend(self.parse_region(&items[i + 1..end], ctx));
                end + 1
            }
            "if" => self.parse_if(items, i, out),
            "while" | "for" => self.parse_loop(items, i, out),
            "do" => self.parse_do(items, i, out),
            "switch" => self.parse_switch(items, i, out),
            "else" => {
                let (next, node) = self.parse_else(items, i);
                self.builder.link_chain(&[node]);
                out.push(node);
                next
            }
            "case" | "default" if ctx == Ctx::Switch => self.parse_case(items, i, out),
            _ => self.parse_generic(items, i, out),
        }
    }

    /// `keyword ( ... )`; `None` if no parenthesized group follows.
    fn header(&self, items: &[Item], i: usize, prefix: Option<Collector>) -> Option<(Collector, usize)> {
        let mut c = prefix.unwrap_or_default();
        c.push_item(self.toks, &items[i]);
        let mut j = i + 1;
        if !self.tok_is(items, j, "(") {
            return None;
        }
        let mut depth = 0i64;
        while j < items.len() {
            let d = balance(std::slice::from_ref(&items[j]), self.toks).parens;
            c.push_item(self.toks, &items[j]);
            depth += d;
            j += 1;
            if depth <= 0 {
                return Some((c, j));
            }
        }
        Some((c, j))
    }

    /// Block or single statement following a control header.
    fn body_unit(&mut self, items: &[Item], j: usize) -> (usize, Vec<NodeId>, Option<u32>) {
        if j >= items.len() {
            return (j, Vec::new(), None);
        }
        if self.tok_is(items, j, ";") {
            let line = self.tok(&items[j]).unwrap().end_line;
            return (j + 1, Vec::new(), Some(line));
        }
        if self.tok_is(items, j, "{") {
            let close = self.find_match(items, j);
            let end = close.unwrap_or(items.len());
            let kids = self.parse_region(&items[j + 1..end], Ctx::Body);
            return (end + 1, kids, Some(self.close_line(items, close)));
        }
        let mut kids = Vec::new();
        let next = self.parse_one(items, j, Ctx::Body, &mut kids);
        let end = kids.iter().map(|&k| self.builder.node(k).end_line).max();
        (next, kids, end)
    }

    fn parse_if(&mut self, items: &[Item], i: usize, out: &mut Vec<NodeId>) -> usize {
        let Some((hc, j)) = self.header(items, i, None) else {
            return self.parse_generic(items, i, out);
        };
        let start = hc.start_line.unwrap();
        let hdr_end = hc.end_line;
        let (mut next, kids, end) = self.body_unit(items, j);
        let node = self.builder.add(
            NodeKind::Branch { branch_type: BranchType::If, header: hc.finish(), siblings: Vec::new() },
            start,
            end.unwrap_or(hdr_end).max(start),
        );
        self.builder.set_children(node, kids);
        let mut members = vec![node];
        while self.tok_is(items, next, "else") {
            let (n2, member) = self.parse_else(items, next);
            let is_final =
                matches!(self.builder.node(member).kind, NodeKind::Branch { branch_type: BranchType::Else, .. });
            members.push(member);
            next = n2;
            if is_final {
                break;
            }
        }
        self.builder.link_chain(&members);
        out.extend(members);
        next
    }

    /// One `else` or `else if` member (without following members).
    fn parse_else(&mut self, items: &[Item], i: usize) -> (usize, NodeId) {
        let else_tok = self.tok(&items[i]).unwrap();
        let mut prefix = Collector::default();
        prefix.push_tok(
            self.toks,
            match &items[i] {
                Item::Tok(t) => *t,
                Item::Chain(_) => unreachable!(),
            },
        );
        if self.tok_is(items, i + 1, "if") {
            if let Some((hc, j)) = self.header(items, i + 1, Some(prefix.clone())) {
                let hdr_end = hc.end_line;
                let (next, kids, end) = self.body_unit(items, j);
                let node = self.builder.add(
                    NodeKind::Branch { branch_type: BranchType::ElseIf, header: hc.finish(), siblings: Vec::new() },
                    else_tok.line,
                    end.unwrap_or(hdr_end).max(else_tok.line),
                );
                self.builder.set_children(node, kids);
                return (next, node);
            }
        }
        let (next, kids, end) = self.body_unit(items, i + 1);
        let node = self.builder.add(
            NodeKind::Branch { branch_type: BranchType::Else, header: prefix.finish(), siblings: Vec::new() },
            else_tok.line,
            end.unwrap_or(else_tok.line).max(else_tok.line),
        );
        self.builder.set_children(node, kids);
        (next, node)
    }

    fn parse_loop(&mut self, items: &[Item], i: usize, out: &mut Vec<NodeId>) -> usize {
        let Some((hc, j)) = self.header(items, i, None) else {
            return self.parse_generic(items, i, out);
        };
        let loop_type = if self.tok_is(items, i, "for") { LoopType::For } else { LoopType::While };
        let start = hc.start_line.unwrap();
        let hdr_end = hc.end_line;
        let (next, kids, end) = self.body_unit(items, j);
        let node = self.builder.add(
            NodeKind::Loop { loop_type, header: hc.finish() },
            start,
            end.unwrap_or(hdr_end).max(hdr_end),
        );
        self.builder.set_children(node, kids);
        out.push(node);
        next
    }

    fn parse_do(&mut self, items: &[Item], i: usize, out: &mut Vec<NodeId>) -> usize {
        let start = self.tok(&items[i]).unwrap().line;
        let (mut next, kids, end) = self.body_unit(items, i + 1);
        let mut end_line = end.unwrap_or(start);
        let mut header = Unparsed::plain("while");
        if self.tok_is(items, next, "while") {
            if let Some((hc, j)) = self.header(items, next, None) {
                end_line = hc.end_line;
                header = hc.finish();
                next = j;
                if self.tok_is(items, next, ";") {
                    end_line = self.tok(&items[next]).unwrap().end_line;
                    next += 1;
                }
            }
        }
        let node =
            self.builder.add(NodeKind::Loop { loop_type: LoopType::DoWhile, header }, start, end_line.max(start));
        self.builder.set_children(node, kids);
        out.push(node);
        next
    }

    fn parse_switch(&mut self, items: &[Item], i: usize, out: &mut Vec<NodeId>) -> usize {
        let Some((hc, j)) = self.header(items, i, None) else {
            return self.parse_generic(items, i, out);
        };
        let start = hc.start_line.unwrap();
        let hdr_end = hc.end_line;
        let (next, kids, end) = if self.tok_is(items, j, "{") {
            let close = self.find_match(items, j);
            let stop = close.unwrap_or(items.len());
            let kids = self.parse_region(&items[j + 1..stop], Ctx::Switch);
            (stop + 1, kids, Some(self.close_line(items, close)))
        } else {
            self.body_unit(items, j)
        };
        let node =
            self.builder.add(NodeKind::Switch { header: hc.finish() }, start, end.unwrap_or(hdr_end).max(hdr_end));
        self.builder.set_children(node, kids);
        out.push(node);
        next
    }

    fn parse_case(&mut self, items: &[Item], i: usize, out: &mut Vec<NodeId>) -> usize {
        let case_type = if self.tok_is(items, i, "default") { CaseType::Default } else { CaseType::Case };
        let mut c = Collector::default();
        let mut j = i;
        let mut parens = 0i64;
        let mut found = false;
        while j < items.len() {
            let item = &items[j];
            if let Some(t) = self.tok(item) {
                if t.is(";") || t.is("{") || t.is("}") {
                    break;
                }
                c.push_item(self.toks, item);
                j += 1;
                if t.is("(") {
                    parens += 1;
                } else if t.is(")") {
                    parens -= 1;
                } else if t.is(":") && parens == 0 && !self.tok_is(items, j, ":") {
                    found = true;
                    break;
                }
            } else {
                c.push_item(self.toks, item);
                j += 1;
            }
        }
        if !found {
            return self.parse_generic(items, i, out);
        }
        let start = c.start_line.unwrap();
        let mut end = c.end_line;
        let mut kids = Vec::new();
        while j < items.len() {
            if self.tok_is(items, j, "case") || self.tok_is(items, j, "default") {
                break;
            }
            if let Item::Chain(ch) = &items[j] {
                if self.chain_has_case_label(ch) {
                    break;
                }
            }
            j = self.parse_one(items, j, Ctx::Body, &mut kids);
        }
        if let Some(e) = kids.iter().map(|&k| self.builder.node(k).end_line).max() {
            end = end.max(e);
        }
        let node = self.builder.add(NodeKind::Case { case_type, header: c.finish() }, start, end);
        self.builder.set_children(node, kids);
        out.push(node);
        j
    }

    fn chain_has_case_label(&self, ch: &Chain) -> bool {
        ch.branches.iter().any(|br| {
            let mut depth = 0i64;
            br.items.iter().any(|it| match it {
                Item::Tok(t) => {
                    let tok = &self.toks[*t];
                    if tok.is("{") {
                        depth += 1;
                    } else if tok.is("}") {
                        depth -= 1;
                    }
                    depth == 0 && (tok.is("case") || tok.is("default"))
                }
                Item::Chain(inner) => depth == 0 && self.chain_has_case_label(inner),
            })
        })
    }

    /// Any `;`-terminated statement, with conditional fragments absorbed.
    fn parse_generic(&mut self, items: &[Item], i: usize, out: &mut Vec<NodeId>) -> usize {
        let mut c = Collector::default();
        let (mut braces, mut parens) = (0i64, 0i64);
        let mut j = i;
        while j < items.len() {
            match &items[j] {
                Item::Tok(t) => {
                    let tok = &self.toks[*t];
                    if tok.is("}") && braces == 0 {
                        if j == i {
                            c.push_tok(self.toks, *t);
                            j += 1;
                        }
                        break;
                    }
                    c.push_tok(self.toks, *t);
                    j += 1;
                    if tok.kind != TokenKind::Punctuation {
                        continue;
                    }
                    match tok.text.as_str() {
                        "{" => {
                            braces += 1;
                            if braces == 1 && parens == 0 && is_macro_block_header(&c.flat, self.toks) {
                                return self.macro_block(items, c, j - 1, out);
                            }
                        }
                        "}" => braces -= 1,
                        "(" => parens += 1,
                        ")" => parens -= 1,
                        ";" if braces == 0 && parens <= 0 => break,
                        ":" if braces == 0 && parens == 0 && self.is_label(&c, items, j) => break,
                        _ => {}
                    }
                }
                Item::Chain(ch) => {
                    let b = ch.first_balance(self.toks);
                    c.push_chain(self.toks, ch);
                    j += 1;
                    braces += b.braces;
                    parens += b.parens;
                    if braces <= 0 && parens <= 0 && self.first_ends_with_semicolon(ch) {
                        break;
                    }
                    if braces < 0 {
                        break;
                    }
                }
            }
        }
        out.extend(self.statement(c));
        j.max(i + 1)
    }

    /// `label:` directly followed by something that cannot continue the
    /// statement (a conditional, a closing brace or the end of the region).
    fn is_label(&self, c: &Collector, items: &[Item], next: usize) -> bool {
        c.flat.len() == 2
            && self.toks[c.flat[0]].kind == TokenKind::Identifier
            && !KEYWORDS.contains(&self.toks[c.flat[0]].text.as_str())
            && match items.get(next) {
                None => true,
                Some(Item::Chain(_)) => true,
                Some(Item::Tok(t)) => self.toks[*t].is("}"),
            }
    }

    /// `MACRO(args) { ... }`: the invocation becomes a statement and the
    /// block's contents are hoisted next to it.
    fn macro_block(&mut self, items: &[Item], mut c: Collector, open: usize, out: &mut Vec<NodeId>) -> usize {
        c.pop_last_token(self.toks);
        out.extend(self.statement(c));
        let close = self.find_match(items, open);
        let end = close.unwrap_or(items.len());
        out.extend(self.parse_region(&items[open + 1..end], Ctx::Body));
        end + 1
    }
}

fn is_keyword(text: &str) -> bool {
    KEYWORDS.contains(&text) || matches!(text, "typeof" | "__typeof__" | "alignof" | "_Alignof" | "enum" | "defined")
}

fn is_identifier(tok: &Token) -> bool {
    tok.kind == TokenKind::Identifier && !tok.text.starts_with(|c: char| c.is_ascii_digit())
}

/// `IDENT ( ... ) {` with `IDENT` not a keyword.
fn is_macro_block_header(flat: &[usize], toks: &[Token]) -> bool {
    if flat.len() < 4 {
        return false;
    }
    let first = &toks[flat[0]];
    if !is_identifier(first) || is_keyword(&first.text) || !toks[flat[1]].is("(") {
        return false;
    }
    let body = &flat[1..flat.len() - 1];
    if !toks[*body.last().unwrap()].is(")") {
        return false;
    }
    let mut depth = 0i64;
    for (k, &t) in body.iter().enumerate() {
        if toks[t].is("(") {
            depth += 1;
        } else if toks[t].is(")") {
            depth -= 1;
            if depth == 0 && k != body.len() - 1 {
                return false;
            }
        } else if depth == 0 {
            return false;
        }
    }
    true
}

/// Name of the function a declaration header defines, if it looks like one.
pub(super) fn function_name(flat: &[usize], toks: &[Token]) -> Option<String> {
    let f: Vec<&Token> = flat.iter().map(|&t| &toks[t]).filter(|t| t.kind != TokenKind::Directive).collect();
    if f.is_empty() || f[0].is("typedef") {
        return None;
    }
    let mut groups = Vec::new();
    let mut depth = 0i64;
    let mut start = 0;
    for (k, t) in f.iter().enumerate() {
        if t.is("(") {
            if depth == 0 {
                start = k;
            }
            depth += 1;
        } else if t.is(")") {
            depth -= 1;
            if depth == 0 {
                groups.push((start, k));
            }
        } else if depth == 0 && (t.is("=") || t.is(";") || t.is(",")) {
            return None;
        }
    }
    if depth != 0 {
        return None;
    }
    for &(open, close) in groups.iter().rev() {
        let prev = f.get(open.checked_sub(1)?)?;
        if !is_identifier(prev) {
            return None;
        }
        if ATTRIBUTE_LIKE.contains(&prev.text.as_str()) {
            continue;
        }
        if is_keyword(&prev.text) {
            return None;
        }
        // Only identifiers and attribute groups may trail the parameters.
        let tail_ok = f[close + 1..]
            .iter()
            .all(|t| is_identifier(t) || t.is("(") || t.is(")") || t.kind == TokenKind::Literal || t.is(","));
        return tail_ok.then(|| prev.text.clone());
    }
    None
}

fn first_branch_flat(ch: &Chain, toks: &[Token]) -> Vec<usize> {
    let mut c = Collector::default();
    if let Some(br) = ch.branches.first() {
        for it in &br.items {
            c.push_item(toks, it);
        }
    }
    c.flat
}

/// Accumulates statement text and conditional fragments.
#[derive(Debug, Default, Clone)]
struct Collector {
    text: String,
    pending: String,
    embedded: Vec<Fragment>,
    has_chain: bool,
    start_line: Option<u32>,
    end_line: u32,
    after_chain: bool,
    /// Significant tokens outside chains plus those of first branches.
    flat: Vec<usize>,
}

impl Collector {
    fn is_empty(&self) -> bool {
        self.start_line.is_none()
    }

    fn mark_lines(&mut self, start: u32, end: u32) {
        self.start_line = Some(self.start_line.map_or(start, |s| s.min(start)));
        self.end_line = self.end_line.max(end);
    }

    fn push_tok(&mut self, toks: &[Token], t: usize) {
        let tok = &toks[t];
        let space = (tok.space_before || self.after_chain) && !self.text.is_empty();
        if space {
            self.text.push(' ');
        }
        if (tok.space_before || self.after_chain) && !self.pending.is_empty() {
            self.pending.push(' ');
        }
        self.text.push_str(&tok.text);
        self.pending.push_str(&tok.text);
        self.after_chain = false;
        if tok.kind != TokenKind::Directive {
            self.flat.push(t);
        }
        self.mark_lines(tok.line, tok.end_line);
    }

    fn push_item(&mut self, toks: &[Token], item: &Item) {
        match item {
            Item::Tok(t) => self.push_tok(toks, *t),
            Item::Chain(ch) => self.push_chain(toks, ch),
        }
    }

    fn push_chain(&mut self, toks: &[Token], ch: &Chain) {
        let pending = std::mem::take(&mut self.pending);
        if !pending.trim().is_empty() {
            self.embedded.push(Fragment::Code(pending.trim().to_owned()));
        }
        for (k, br) in ch.branches.iter().enumerate() {
            let mut sub = Collector::default();
            for it in &br.items {
                sub.push_item(toks, it);
            }
            if k == 0 {
                self.flat.extend(&sub.flat);
            }
            if !sub.text.is_empty() {
                if !self.text.is_empty() {
                    self.text.push(' ');
                }
                self.text.push_str(&sub.text);
            }
            let fragments = sub.into_fragments();
            self.embedded.push(Fragment::Block(EmbeddedBlock {
                vp_type: br.vp_type,
                raw_expr: br.expr.clone(),
                condition: sibling_condition(&ch.priors(k), br.expr.as_ref()),
                presence_condition: Formula::True,
                start_line: br.line,
                end_line: ch.branch_end(k),
                fragments,
            }));
        }
        self.has_chain = true;
        self.after_chain = true;
        self.mark_lines(ch.first_line(), ch.endif_line);
    }

    fn into_fragments(self) -> Vec<Fragment> {
        if self.has_chain {
            let mut frags = self.embedded;
            if !self.pending.trim().is_empty() {
                frags.push(Fragment::Code(self.pending.trim().to_owned()));
            }
            frags
        } else if self.text.is_empty() {
            Vec::new()
        } else {
            vec![Fragment::Code(self.text)]
        }
    }

    /// Removes the final plain token (used to strip a trailing `{`).
    fn pop_last_token(&mut self, toks: &[Token]) {
        if let Some(t) = self.flat.pop() {
            let len = toks[t].text.len();
            let new_len = self.text.len().saturating_sub(len);
            self.text.truncate(new_len);
            let trimmed = self.text.trim_end().len();
            self.text.truncate(trimmed);
            let plen = self.pending.len().saturating_sub(len);
            self.pending.truncate(plen);
            let ptrim = self.pending.trim_end().len();
            self.pending.truncate(ptrim);
        }
    }

    fn finish(self) -> Unparsed {
        let has_chain = self.has_chain;
        let text = self.text.clone();
        let embedded = if has_chain { self.into_fragments() } else { Vec::new() };
        Unparsed { text, embedded }
    }
}
