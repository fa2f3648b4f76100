//! Reduced abstract syntax tree (RAST).
//!
//! One [`SourceFile`] holds a single 150% representation of a file: the
//! structure of the programming language down to statement granularity and
//! the conditional-compilation structure, interleaved in one tree. Nodes live
//! in a per-file arena and are addressed by [`NodeId`], assigned in document
//! (pre-)order starting at 0.

use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::formula::{conjoin, sibling_condition, Formula};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VpType {
    If,
    Ifdef,
    Ifndef,
    Elif,
    Else,
}

impl VpType {
    pub fn as_str(self) -> &'static str {
        match self {
            VpType::If => "IF",
            VpType::Ifdef => "IFDEF",
            VpType::Ifndef => "IFNDEF",
            VpType::Elif => "ELIF",
            VpType::Else => "ELSE",
        }
    }

    /// Chain openers: `#if`, `#ifdef`, `#ifndef`.
    pub fn opens_chain(self) -> bool {
        matches!(self, VpType::If | VpType::Ifdef | VpType::Ifndef)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BranchType {
    If,
    ElseIf,
    Else,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LoopType {
    While,
    DoWhile,
    For,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseType {
    Case,
    Default,
}

/// Statement text kept as a string, whitespace-normalized and comment-free.
///
/// `embedded` is empty unless conditional directives occur inside the
/// statement; then it lists the plain pieces and the conditional fragments
/// in source order, and `text` holds the concatenation of all of them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Unparsed {
    pub text: String,
    pub embedded: Vec<Fragment>,
}

impl Unparsed {
    pub fn plain(text: impl Into<String>) -> Self {
        Unparsed { text: text.into(), embedded: Vec::new() }
    }

    /// All conditional blocks nested anywhere inside, pre-order.
    pub fn blocks(&self) -> Vec<&EmbeddedBlock> {
        let mut out = Vec::new();
        collect_blocks(&self.embedded, &mut out);
        out
    }
}

fn collect_blocks<'a>(frags: &'a [Fragment], out: &mut Vec<&'a EmbeddedBlock>) {
    for f in frags {
        if let Fragment::Block(b) = f {
            out.push(b);
            collect_blocks(&b.fragments, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fragment {
    Code(String),
    Block(EmbeddedBlock),
}

/// A conditional block inside a single statement.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedBlock {
    pub vp_type: VpType,
    pub raw_expr: Option<Formula>,
    pub condition: Formula,
    pub presence_condition: Formula,
    pub start_line: u32,
    pub end_line: u32,
    pub fragments: Vec<Fragment>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Function { name: String, signature: Unparsed },
    SingleStatement { code: Unparsed, directive: bool },
    CppBlock { vp_type: VpType, raw_expr: Option<Formula>, siblings: Vec<NodeId> },
    Branch { branch_type: BranchType, header: Unparsed, siblings: Vec<NodeId> },
    Loop { loop_type: LoopType, header: Unparsed },
    Switch { header: Unparsed },
    Case { case_type: CaseType, header: Unparsed },
    Reference { target: NodeId },
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Function { .. } => "Function",
            NodeKind::SingleStatement { .. } => "SingleStatement",
            NodeKind::CppBlock { .. } => "CppBlock",
            NodeKind::Branch { .. } => "BranchStatement",
            NodeKind::Loop { .. } => "LoopStatement",
            NodeKind::Switch { .. } => "SwitchStatement",
            NodeKind::Case { .. } => "CaseStatement",
            NodeKind::Reference { .. } => "Reference",
        }
    }

    /// Unparsed text carried by the node, if any.
    pub fn unparsed(&self) -> Option<&Unparsed> {
        match self {
            NodeKind::Function { signature, .. } => Some(signature),
            NodeKind::SingleStatement { code, .. } => Some(code),
            NodeKind::Branch { header, .. }
            | NodeKind::Loop { header, .. }
            | NodeKind::Switch { header }
            | NodeKind::Case { header, .. } => Some(header),
            NodeKind::CppBlock { .. } | NodeKind::Reference { .. } => None,
        }
    }

    /// Control structures of the programming language.
    pub fn is_code_structure(&self) -> bool {
        matches!(
            self,
            NodeKind::Branch { .. } | NodeKind::Loop { .. } | NodeKind::Switch { .. } | NodeKind::Case { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub start_line: u32,
    pub end_line: u32,
    pub condition: Formula,
    pub presence_condition: Formula,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_statement(&self) -> bool {
        matches!(self.kind, NodeKind::SingleStatement { directive: false, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ParseStatus {
    Ok,
    Skipped(String),
}

/// Classification of one physical line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineKind {
    Blank,
    Comment,
    /// Non-conditional directive (`#include`, `#define`, ...).
    Directive,
    /// `#if`, `#ifdef`, `#ifndef`, `#elif`, `#else`, `#endif`.
    Conditional,
    Code,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceFile {
    pub path: String,
    pub nodes: Vec<Node>,
    pub top_level: Vec<NodeId>,
    pub status: ParseStatus,
    /// Index 0 is line 1.
    pub lines: Vec<LineKind>,
}

impl SourceFile {
    pub fn skipped(path: impl Into<String>, reason: impl Into<String>, lines: Vec<LineKind>) -> Self {
        SourceFile {
            path: path.into(),
            nodes: Vec::new(),
            top_level: Vec::new(),
            status: ParseStatus::Skipped(reason.into()),
            lines,
        }
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self.status, ParseStatus::Skipped(_))
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn line_count(&self) -> u32 {
        self.lines.len() as u32
    }

    pub fn line_kind(&self, line: u32) -> LineKind {
        self.lines.get(line as usize - 1).copied().unwrap_or(LineKind::Blank)
    }

    /// Ids of structural ancestors, innermost first.
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.nodes[id].parent, move |&p| self.nodes[p].parent)
    }

    pub fn is_ancestor(&self, ancestor: NodeId, id: NodeId) -> bool {
        self.ancestors(id).any(|a| a == ancestor)
    }

    /// Debug dump: one line per node, two spaces of indentation per depth.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if let ParseStatus::Skipped(reason) = &self.status {
            let _ = writeln!(out, "# skipped: {reason}");
            return out;
        }
        let mut stack: Vec<(NodeId, usize)> = self.top_level.iter().rev().map(|&id| (id, 0)).collect();
        while let Some((id, depth)) = stack.pop() {
            let n = &self.nodes[id];
            let _ = writeln!(
                out,
                "{}{} {} [{}-{}] cond={} pc={}",
                "  ".repeat(depth),
                n.id,
                DumpKind(&n.kind),
                n.start_line,
                n.end_line,
                n.condition,
                n.presence_condition
            );
            stack.extend(n.children.iter().rev().map(|&c| (c, depth + 1)));
        }
        out
    }
}

struct DumpKind<'a>(&'a NodeKind);

impl fmt::Display for DumpKind<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            NodeKind::Function { name, .. } => write!(f, "Function:{name}"),
            NodeKind::SingleStatement { directive: true, .. } => f.write_str("SingleStatement:directive"),
            NodeKind::SingleStatement { code, .. } if !code.embedded.is_empty() => {
                write!(f, "SingleStatement:embedded{}", code.blocks().len())
            }
            NodeKind::CppBlock { vp_type, .. } => write!(f, "CppBlock:{}", vp_type.as_str()),
            NodeKind::Branch { branch_type, .. } => write!(f, "BranchStatement:{branch_type:?}"),
            NodeKind::Loop { loop_type, .. } => write!(f, "LoopStatement:{loop_type:?}"),
            NodeKind::Case { case_type, .. } => write!(f, "CaseStatement:{case_type:?}"),
            NodeKind::Reference { target } => write!(f, "Reference:{target}"),
            other => f.write_str(other.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// Visitor

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VisitCtx {
    /// Nesting depth of the entry in the traversal (0 for the root).
    pub depth: usize,
    /// The node was reached through a `Reference`.
    pub via_reference: bool,
}

pub trait Visitor {
    fn enter(&mut self, file: &SourceFile, node: &Node, ctx: VisitCtx);

    fn leave(&mut self, _file: &SourceFile, _node: &Node, _ctx: VisitCtx) {}
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RastError {
    #[error("reference {reference} points to missing node {target}")]
    DanglingReference { reference: NodeId, target: NodeId },
    #[error("reference {reference} points to its own ancestor {target}")]
    ReferenceCycle { reference: NodeId, target: NodeId },
    #[error("node {0} does not exist")]
    NoSuchNode(NodeId),
}

/// Depth-first pre-order traversal from `root`.
///
/// With `follow_references`, entering a `Reference` continues into its target
/// subtree, reported with `via_reference` set.
pub fn visit<V: Visitor + ?Sized>(
    file: &SourceFile,
    root: NodeId,
    visitor: &mut V,
    follow_references: bool,
) -> Result<(), RastError> {
    if root >= file.nodes.len() {
        return Err(RastError::NoSuchNode(root));
    }
    let mut path = Vec::new();
    visit_rec(file, root, visitor, follow_references, VisitCtx { depth: 0, via_reference: false }, &mut path)
}

fn visit_rec<V: Visitor + ?Sized>(
    file: &SourceFile,
    id: NodeId,
    visitor: &mut V,
    follow: bool,
    ctx: VisitCtx,
    path: &mut Vec<NodeId>,
) -> Result<(), RastError> {
    let node = &file.nodes[id];
    visitor.enter(file, node, ctx);
    path.push(id);
    let child_ctx = VisitCtx { depth: ctx.depth + 1, ..ctx };
    for &c in &node.children {
        visit_rec(file, c, visitor, follow, child_ctx, path)?;
    }
    if let NodeKind::Reference { target } = node.kind {
        if follow {
            if target >= file.nodes.len() {
                return Err(RastError::DanglingReference { reference: id, target });
            }
            if path.contains(&target) || file.is_ancestor(target, id) {
                return Err(RastError::ReferenceCycle { reference: id, target });
            }
            visit_rec(file, target, visitor, follow, VisitCtx { depth: ctx.depth + 1, via_reference: true }, path)?;
        }
    }
    path.pop();
    visitor.leave(file, node, ctx);
    Ok(())
}

/// Runs `visit` over every top-level node of the file.
pub fn visit_file<V: Visitor + ?Sized>(
    file: &SourceFile,
    visitor: &mut V,
    follow_references: bool,
) -> Result<(), RastError> {
    for &id in &file.top_level {
        visit(file, id, visitor, follow_references)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    IdMismatch { index: usize, id: NodeId },
    InvertedSpan(NodeId),
    SpanOutsideFile(NodeId),
    ParentLink(NodeId),
    Unreachable(NodeId),
    SiblingOverlap(NodeId, NodeId),
    ConditionMismatch(NodeId),
    PcMismatch(NodeId),
    ChainMismatch(NodeId),
    ChainOrder(NodeId),
    DanglingReference(NodeId),
    ReferenceCycle(NodeId),
    CaseOutsideSwitch(NodeId),
    EmptyStatement(NodeId),
}

/// Independent recomputation of a node's condition and presence condition
/// by walking its ancestors.
pub fn recompute_conditions(file: &SourceFile, id: NodeId) -> (Formula, Formula) {
    let mut enclosing: Vec<&Node> =
        file.ancestors(id).map(|a| &file.nodes[a]).filter(|a| matches!(a.kind, NodeKind::CppBlock { .. })).collect();
    enclosing.reverse();
    let node = &file.nodes[id];
    let condition = match &node.kind {
        NodeKind::CppBlock { .. } => chain_condition(file, id),
        _ => enclosing.last().map(|b| chain_condition(file, b.id)).unwrap_or(Formula::True),
    };
    let mut pc = Formula::True;
    for block in &enclosing {
        pc = conjoin(&pc, &chain_condition(file, block.id));
    }
    pc = conjoin(&pc, &condition);
    (condition, pc)
}

fn chain_condition(file: &SourceFile, block: NodeId) -> Formula {
    let NodeKind::CppBlock { siblings, raw_expr, .. } = &file.nodes[block].kind else {
        return Formula::True;
    };
    let mut priors = Vec::new();
    for &s in siblings {
        if s == block {
            break;
        }
        if let NodeKind::CppBlock { raw_expr: Some(e), .. } = &file.nodes[s].kind {
            priors.push(e.clone());
        }
    }
    sibling_condition(&priors, raw_expr.as_ref())
}

/// Checks every structural invariant; an empty result means well-formed.
pub fn validate(file: &SourceFile) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = file.nodes.len();
    let max_line = file.line_count().max(1);

    let mut seen = vec![0usize; n];
    let mut stack: Vec<NodeId> = file.top_level.clone();
    for &t in &file.top_level {
        if t < n && file.nodes[t].parent.is_some() {
            out.push(Violation::ParentLink(t));
        }
    }
    while let Some(id) = stack.pop() {
        if id >= n {
            continue;
        }
        seen[id] += 1;
        if seen[id] > 1 {
            out.push(Violation::ParentLink(id));
            continue;
        }
        for &c in &file.nodes[id].children {
            if c >= n || file.nodes[c].parent != Some(id) {
                out.push(Violation::ParentLink(c));
            }
            stack.push(c);
        }
    }

    for (index, node) in file.nodes.iter().enumerate() {
        let id = node.id;
        if id != index {
            out.push(Violation::IdMismatch { index, id });
            continue;
        }
        if seen[id] == 0 {
            out.push(Violation::Unreachable(id));
        }
        if node.start_line > node.end_line {
            out.push(Violation::InvertedSpan(id));
        }
        if node.start_line < 1 || node.end_line > max_line {
            out.push(Violation::SpanOutsideFile(id));
        }
        let (cond, pc) = recompute_conditions(file, id);
        if cond != node.condition {
            out.push(Violation::ConditionMismatch(id));
        }
        if pc != node.presence_condition {
            out.push(Violation::PcMismatch(id));
        }
        match &node.kind {
            NodeKind::CppBlock { siblings, vp_type, .. } => {
                check_chain(file, id, siblings, &mut out);
                let pos = siblings.iter().position(|&s| s == id).unwrap_or(0);
                let types: Vec<Option<VpType>> = siblings
                    .iter()
                    .map(|&s| match file.nodes.get(s).map(|x| &x.kind) {
                        Some(NodeKind::CppBlock { vp_type, .. }) => Some(*vp_type),
                        _ => None,
                    })
                    .collect();
                let first_ok = types.first().copied().flatten().is_some_and(VpType::opens_chain);
                let rest_ok = types.iter().skip(1).all(|t| matches!(t, Some(VpType::Elif | VpType::Else)));
                let else_ok = types.iter().take(types.len().saturating_sub(1)).all(|t| *t != Some(VpType::Else));
                if !first_ok || !rest_ok || !else_ok || (pos == 0) != vp_type.opens_chain() {
                    out.push(Violation::ChainOrder(id));
                }
            }
            NodeKind::Branch { siblings, .. } => {
                check_chain(file, id, siblings, &mut out);
                let types: Vec<Option<BranchType>> = siblings
                    .iter()
                    .map(|&s| match file.nodes.get(s).map(|x| &x.kind) {
                        Some(NodeKind::Branch { branch_type, .. }) => Some(*branch_type),
                        _ => None,
                    })
                    .collect();
                let else_ok = types.iter().take(types.len().saturating_sub(1)).all(|t| *t != Some(BranchType::Else));
                if types.iter().any(Option::is_none) || !else_ok {
                    out.push(Violation::ChainOrder(id));
                }
            }
            NodeKind::Reference { target } => {
                if *target >= n {
                    out.push(Violation::DanglingReference(id));
                } else if file.is_ancestor(*target, id) || *target == id {
                    out.push(Violation::ReferenceCycle(id));
                }
            }
            NodeKind::Case { .. } => {
                let owner = file.ancestors(id).find(|&a| !matches!(file.nodes[a].kind, NodeKind::CppBlock { .. }));
                if !owner.is_some_and(|a| matches!(file.nodes[a].kind, NodeKind::Switch { .. })) {
                    out.push(Violation::CaseOutsideSwitch(id));
                }
            }
            NodeKind::SingleStatement { code, .. } if code.text.trim().is_empty() => {
                out.push(Violation::EmptyStatement(id));
            }
            _ => {}
        }
        check_sibling_spans(file, &node.children, &mut out);
    }
    check_sibling_spans(file, &file.top_level, &mut out);
    out
}

fn check_chain(file: &SourceFile, id: NodeId, siblings: &[NodeId], out: &mut Vec<Violation>) {
    let consistent = siblings.contains(&id)
        && siblings.iter().all(|&s| {
            s < file.nodes.len()
                && file.nodes[s].parent == file.nodes[id].parent
                && match &file.nodes[s].kind {
                    NodeKind::CppBlock { siblings: other, .. } | NodeKind::Branch { siblings: other, .. } => {
                        other == siblings
                    }
                    _ => false,
                }
        });
    if !consistent {
        out.push(Violation::ChainMismatch(id));
    }
}

/// Structural siblings must not overlap, except where a span overlaps the
/// target of a `Reference` inside the other sibling.
fn check_sibling_spans(file: &SourceFile, ids: &[NodeId], out: &mut Vec<Violation>) {
    let n = file.nodes.len();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            if a >= n || b >= n {
                continue;
            }
            let (na, nb) = (&file.nodes[a], &file.nodes[b]);
            let overlap = na.start_line <= nb.end_line && nb.start_line <= na.end_line;
            if overlap && !references_into(file, a, b) && !references_into(file, b, a) && !same_line_only(na, nb) {
                out.push(Violation::SiblingOverlap(a, b));
            }
        }
    }
}

/// Two siblings sharing a single boundary line (`} else {`, `x; y;`).
fn same_line_only(a: &Node, b: &Node) -> bool {
    a.end_line == b.start_line || b.end_line == a.start_line
}

fn references_into(file: &SourceFile, holder: NodeId, target_root: NodeId) -> bool {
    let mut stack = vec![holder];
    while let Some(id) = stack.pop() {
        let node = &file.nodes[id];
        if let NodeKind::Reference { target } = node.kind {
            if target == target_root || (target < file.nodes.len() && file.is_ancestor(target_root, target)) {
                return true;
            }
        }
        stack.extend(&node.children);
    }
    false
}

// ---------------------------------------------------------------------------
// Construction

/// Accumulates nodes with provisional ids, then renumbers them in document
/// order and derives conditions and presence conditions.
#[derive(Debug, Default)]
pub struct RastBuilder {
    nodes: Vec<Node>,
}

impl RastBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, kind: NodeKind, start_line: u32, end_line: u32) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            start_line,
            end_line,
            condition: Formula::True,
            presence_condition: Formula::True,
            parent: None,
            children: Vec::new(),
            kind,
        });
        id
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id]
    }

    pub fn set_children(&mut self, parent: NodeId, children: Vec<NodeId>) {
        for &c in &children {
            self.nodes[c].parent = Some(parent);
        }
        self.nodes[parent].children = children;
    }

    /// Span covered by a list of nodes.
    pub fn span_of(&self, ids: &[NodeId]) -> Option<(u32, u32)> {
        let start = ids.iter().map(|&i| self.nodes[i].start_line).min()?;
        let end = ids.iter().map(|&i| self.nodes[i].end_line).max()?;
        Some((start, end))
    }

    /// Ties a list of CppBlocks (or BranchStatements) into one sibling chain.
    pub fn link_chain(&mut self, members: &[NodeId]) {
        for &m in members {
            match &mut self.nodes[m].kind {
                NodeKind::CppBlock { siblings, .. } | NodeKind::Branch { siblings, .. } => {
                    *siblings = members.to_vec();
                }
                _ => {}
            }
        }
    }

    pub fn finish(mut self, path: String, top_level: Vec<NodeId>, lines: Vec<LineKind>) -> SourceFile {
        // Pre-order renumbering.
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<NodeId> = top_level.iter().rev().copied().collect();
        while let Some(id) = stack.pop() {
            order.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        let mut remap = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let map = |id: NodeId| remap[id];
        let mut old_nodes: Vec<Option<Node>> = std::mem::take(&mut self.nodes).into_iter().map(Some).collect();
        let mut nodes = Vec::with_capacity(order.len());
        for &old in &order {
            let mut node = old_nodes[old].take().unwrap();
            node.id = map(old);
            node.parent = node.parent.map(map);
            for c in &mut node.children {
                *c = map(*c);
            }
            match &mut node.kind {
                NodeKind::CppBlock { siblings, .. } | NodeKind::Branch { siblings, .. } => {
                    for s in siblings.iter_mut() {
                        *s = map(*s);
                    }
                }
                NodeKind::Reference { target } => *target = map(*target),
                _ => {}
            }
            nodes.push(node);
        }
        let top_level: Vec<NodeId> = top_level.into_iter().map(map).collect();

        // Conditions top-down; pre-order guarantees parents come first.
        for id in 0..nodes.len() {
            let (parent_cond, parent_pc) = match nodes[id].parent {
                Some(p) => (nodes[p].condition.clone(), nodes[p].presence_condition.clone()),
                None => (Formula::True, Formula::True),
            };
            let condition = match &nodes[id].kind {
                NodeKind::CppBlock { siblings, raw_expr, .. } => {
                    let priors: Vec<Formula> = siblings
                        .iter()
                        .take_while(|&&s| s != id)
                        .filter_map(|&s| match &nodes[s].kind {
                            NodeKind::CppBlock { raw_expr, .. } => raw_expr.clone(),
                            _ => None,
                        })
                        .collect();
                    sibling_condition(&priors, raw_expr.as_ref())
                }
                _ => parent_cond,
            };
            let pc = conjoin(&parent_pc, &condition);
            if let Some(unparsed) = unparsed_mut(&mut nodes[id].kind) {
                assign_fragment_pcs(&mut unparsed.embedded, &pc);
            }
            nodes[id].condition = condition;
            nodes[id].presence_condition = pc;
        }

        SourceFile { path, nodes, top_level, status: ParseStatus::Ok, lines }
    }
}

fn unparsed_mut(kind: &mut NodeKind) -> Option<&mut Unparsed> {
    match kind {
        NodeKind::Function { signature, .. } => Some(signature),
        NodeKind::SingleStatement { code, .. } => Some(code),
        NodeKind::Branch { header, .. }
        | NodeKind::Loop { header, .. }
        | NodeKind::Switch { header }
        | NodeKind::Case { header, .. } => Some(header),
        _ => None,
    }
}

fn assign_fragment_pcs(frags: &mut [Fragment], pc: &Formula) {
    for f in frags {
        if let Fragment::Block(b) = f {
            b.presence_condition = conjoin(pc, &b.condition);
            let inner = b.presence_condition.clone();
            assign_fragment_pcs(&mut b.fragments, &inner);
        }
    }
}
