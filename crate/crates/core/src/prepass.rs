//! Whole-model passes that per-function metrics depend on: splitting into
//! functions, the call map, and per-feature statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use regex::Regex;
use serde::Serialize;

use crate::cparser::lexer::{lex, TokenKind};
use crate::formula::Formula;
use crate::rast::{Fragment, NodeId, NodeKind, SourceFile, Unparsed};

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionRecord {
    /// Index of the owning file in the analysed slice.
    pub file: usize,
    pub path: String,
    pub name: String,
    pub start_line: u32,
    pub end_line: u32,
    pub node: NodeId,
    pub pc: Formula,
}

impl FunctionRecord {
    pub fn key(&self) -> (&str, u32) {
        (&self.path, self.start_line)
    }
}

/// All functions of all non-skipped files, sorted by (path, start line).
pub fn filter_functions(files: &[SourceFile]) -> Vec<FunctionRecord> {
    let mut out: Vec<FunctionRecord> = files
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.is_skipped())
        .flat_map(|(fi, f)| {
            f.nodes.iter().filter_map(move |n| match &n.kind {
                NodeKind::Function { name, .. } => Some(FunctionRecord {
                    file: fi,
                    path: f.path.clone(),
                    name: name.clone(),
                    start_line: n.start_line,
                    end_line: n.end_line,
                    node: n.id,
                    pc: n.presence_condition.clone(),
                }),
                _ => None,
            })
        })
        .collect();
    out.sort_by(|a, b| (a.path.as_str(), a.start_line, a.node).cmp(&(b.path.as_str(), b.start_line, b.node)));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallEdge {
    /// Index of the calling function in the record list.
    pub caller: usize,
    pub callee: String,
    pub call_pc: Formula,
    pub line: u32,
}

#[derive(Debug, Default, Clone)]
pub struct CallMap {
    pub by_callee: BTreeMap<String, Vec<CallEdge>>,
    /// Outgoing edges, indexed like the record list.
    pub by_caller: Vec<Vec<CallEdge>>,
    /// Record indices per defined name (several for duplicate names).
    pub definitions: BTreeMap<String, Vec<usize>>,
}

impl CallMap {
    pub fn incoming(&self, name: &str) -> &[CallEdge] {
        self.by_callee.get(name).map_or(&[], |v| v.as_slice())
    }
}

const NEVER_CALLEES: [&str; 9] = ["if", "while", "for", "switch", "return", "sizeof", "do", "else", "case"];

pub fn build_call_map(records: &[FunctionRecord], files: &[SourceFile]) -> CallMap {
    let mut definitions: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        definitions.entry(r.name.clone()).or_default().push(i);
    }
    let known: HashSet<&str> = definitions.keys().map(String::as_str).filter(|n| !NEVER_CALLEES.contains(n)).collect();
    let by_caller: Vec<Vec<CallEdge>> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let file = &files[r.file];
            let mut edges = Vec::new();
            let mut stack: Vec<NodeId> = file.node(r.node).children.iter().rev().copied().collect();
            while let Some(id) = stack.pop() {
                let n = file.node(id);
                let text = match &n.kind {
                    NodeKind::SingleStatement { code, directive: false } => Some(code),
                    NodeKind::Branch { header, .. }
                    | NodeKind::Loop { header, .. }
                    | NodeKind::Switch { header }
                    | NodeKind::Case { header, .. } => Some(header),
                    _ => None,
                };
                if let Some(code) = text {
                    scan_unparsed(code, &n.presence_condition, n.start_line, &known, i, &mut edges);
                }
                if !matches!(n.kind, NodeKind::Reference { .. }) {
                    stack.extend(n.children.iter().rev());
                }
            }
            edges
        })
        .collect();
    let mut by_callee: BTreeMap<String, Vec<CallEdge>> = BTreeMap::new();
    for e in by_caller.iter().flatten() {
        by_callee.entry(e.callee.clone()).or_default().push(e.clone());
    }
    CallMap { by_callee, by_caller, definitions }
}

fn scan_unparsed(
    code: &Unparsed,
    pc: &Formula,
    line: u32,
    known: &HashSet<&str>,
    caller: usize,
    out: &mut Vec<CallEdge>,
) {
    if code.embedded.is_empty() {
        scan_text(&code.text, pc, line, known, caller, out);
    } else {
        scan_fragments(&code.embedded, pc, line, known, caller, out);
    }
}

fn scan_fragments(
    frags: &[Fragment],
    pc: &Formula,
    line: u32,
    known: &HashSet<&str>,
    caller: usize,
    out: &mut Vec<CallEdge>,
) {
    for f in frags {
        match f {
            Fragment::Code(text) => scan_text(text, pc, line, known, caller, out),
            Fragment::Block(b) => scan_fragments(&b.fragments, &b.presence_condition, b.start_line, known, caller, out),
        }
    }
}

/// Calls are a known name immediately followed by `(`.
pub fn called_names<'a>(text: &str, known: &HashSet<&'a str>) -> Vec<&'a str> {
    let toks: Vec<_> =
        lex(text).into_iter().filter(|t| !matches!(t.kind, TokenKind::Comment | TokenKind::Newline)).collect();
    toks.windows(2)
        .filter(|w| w[0].kind == TokenKind::Identifier && w[1].is("("))
        .filter_map(|w| known.get(w[0].text.as_str()).copied())
        .collect()
}

fn scan_text(text: &str, pc: &Formula, line: u32, known: &HashSet<&str>, caller: usize, out: &mut Vec<CallEdge>) {
    for name in called_names(text, known) {
        out.push(CallEdge { caller, callee: name.to_owned(), call_pc: pc.clone(), line });
    }
}

/// Decides which macro names count as features.
#[derive(Debug, Clone)]
pub struct FeatureFilter {
    pub regex: Regex,
    pub list: Option<BTreeSet<String>>,
}

impl FeatureFilter {
    pub fn new(regex: Regex, list: Option<BTreeSet<String>>) -> Self {
        FeatureFilter { regex, list }
    }

    pub fn is_feature(&self, name: &str) -> bool {
        self.regex.is_match(name) && self.list.as_ref().is_none_or(|l| l.contains(name))
    }

    /// Features mentioned by a formula, sorted.
    pub fn features_of<'a>(&self, f: &'a Formula) -> Vec<&'a str> {
        f.variables().into_iter().filter(|v| self.is_feature(v)).collect()
    }
}

/// One feature name per line; blank lines and `#` comments ignored.
pub fn read_feature_list(path: &Path) -> std::io::Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_owned).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FeatureStat {
    pub sd_vp: u64,
    pub sd_file: u64,
    pub feature_size: u64,
    /// Number of other features sharing at least one VP condition.
    pub tangling: u64,
}

pub type FeatureStats = BTreeMap<String, FeatureStat>;

/// Conditions of every variation point of a file: CppBlocks and blocks
/// embedded in statements.
pub fn vp_conditions(file: &SourceFile) -> Vec<&Formula> {
    let mut out = Vec::new();
    for n in &file.nodes {
        match &n.kind {
            NodeKind::CppBlock { .. } => out.push(&n.condition),
            _ => {
                if let Some(u) = n.kind.unparsed() {
                    out.extend(u.blocks().into_iter().map(|b| &b.condition));
                }
            }
        }
    }
    out
}

/// SD_VP, SD_File and tangling for every feature mentioned by a VP.
pub fn scattering_degrees(files: &[SourceFile], filter: &FeatureFilter) -> FeatureStats {
    type FileCounts = (BTreeMap<String, u64>, BTreeSet<(String, String)>);
    let per_file: Vec<FileCounts> = files
        .par_iter()
        .filter(|f| !f.is_skipped())
        .map(|f| {
            let mut counts: BTreeMap<String, u64> = BTreeMap::new();
            let mut pairs = BTreeSet::new();
            for cond in vp_conditions(f) {
                let feats = filter.features_of(cond);
                for a in &feats {
                    *counts.entry((*a).to_owned()).or_default() += 1;
                    for b in &feats {
                        if a != b {
                            pairs.insert(((*a).to_owned(), (*b).to_owned()));
                        }
                    }
                }
            }
            (counts, pairs)
        })
        .collect();
    let mut stats = FeatureStats::new();
    let mut pairs = BTreeSet::new();
    for (counts, p) in per_file {
        for (name, c) in counts {
            let s = stats.entry(name).or_default();
            s.sd_vp += c;
            s.sd_file += 1;
        }
        pairs.extend(p);
    }
    for (a, _) in pairs {
        stats.entry(a).or_default().tangling += 1;
    }
    stats
}

/// Adds FeatureSize: statements whose presence condition mentions the
/// feature. Features only seen here get zero scattering.
pub fn feature_sizes(files: &[SourceFile], filter: &FeatureFilter, stats: &mut FeatureStats) {
    let per_file: Vec<HashMap<String, u64>> = files
        .par_iter()
        .filter(|f| !f.is_skipped())
        .map(|f| {
            let mut counts = HashMap::new();
            for n in f.nodes.iter().filter(|n| n.is_statement()) {
                for feat in filter.features_of(&n.presence_condition) {
                    *counts.entry(feat.to_owned()).or_default() += 1;
                }
            }
            counts
        })
        .collect();
    for counts in per_file {
        for (name, c) in counts {
            stats.entry(name).or_default().feature_size += c;
        }
    }
}

pub fn feature_stats(files: &[SourceFile], filter: &FeatureFilter) -> FeatureStats {
    let mut stats = scattering_degrees(files, filter);
    feature_sizes(files, filter, &mut stats);
    stats
}
