//! Direct, one-metric-at-a-time implementations built on the visitor.

use std::collections::{BTreeMap, BTreeSet};

use crate::formula::Formula;
use crate::prepass::{CallMap, FeatureFilter, FeatureStat, FeatureStats, FunctionRecord};
use crate::rast::{
    visit, BranchType, CaseType, LineKind, Node, NodeId, NodeKind, SourceFile, VisitCtx, Visitor, VpType,
};

use super::catalog::{Direction, Mode, Weight};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocMetrics {
    pub loc: u64,
    pub scoc: u64,
    pub lof: u64,
    pub plof: f64,
    pub cloc: u64,
    pub comment_ratio: f64,
}

/// Line metrics of the function rooted at `func`.
pub fn loc_metrics(file: &SourceFile, func: NodeId) -> LocMetrics {
    let f = file.node(func);
    let (s, e) = (f.start_line, f.end_line);
    let len = (e - s + 1) as usize;
    let mut owner: Vec<&Formula> = vec![&f.presence_condition; len];
    let mut scoc = 0;
    let mut stack = vec![func];
    while let Some(id) = stack.pop() {
        let n = file.node(id);
        if matches!(n.kind, NodeKind::Reference { .. }) {
            continue;
        }
        if n.is_statement() {
            scoc += 1;
        }
        let clamp = |l: u32| (l.clamp(s, e) - s) as usize;
        for slot in &mut owner[clamp(n.start_line)..=clamp(n.end_line)] {
            *slot = &n.presence_condition;
        }
        if let Some(code) = n.kind.unparsed() {
            for b in code.blocks() {
                for slot in &mut owner[clamp(b.start_line)..=clamp(b.end_line)] {
                    *slot = &b.presence_condition;
                }
            }
        }
        stack.extend(n.children.iter().rev());
    }
    let (mut lof, mut cloc) = (0, 0);
    for (k, pc) in owner.iter().enumerate() {
        match file.line_kind(s + k as u32) {
            LineKind::Conditional => lof += 1,
            LineKind::Code | LineKind::Directive if !pc.is_true() => lof += 1,
            LineKind::Comment => cloc += 1,
            _ => {}
        }
    }
    let loc = len as u64;
    LocMetrics { loc, scoc, lof, plof: lof as f64 / loc as f64, cloc, comment_ratio: cloc as f64 / loc as f64 }
}

fn is_decision(kind: &NodeKind) -> bool {
    matches!(
        kind,
        NodeKind::Loop { .. }
            | NodeKind::Branch { branch_type: BranchType::If | BranchType::ElseIf, .. }
            | NodeKind::Case { case_type: CaseType::Case, .. }
    )
}

fn is_vp_decision(vp: VpType) -> bool {
    vp != VpType::Else
}

/// Variation points carried by a node: the block itself, or the blocks
/// embedded in its text. Yields (vp type, condition).
fn vps_of(n: &Node) -> Vec<(VpType, &Formula)> {
    match &n.kind {
        NodeKind::CppBlock { vp_type, .. } => vec![(*vp_type, &n.condition)],
        NodeKind::Function { .. } | NodeKind::Reference { .. } => Vec::new(),
        k => {
            k.unparsed().map_or_else(Vec::new, |u| u.blocks().into_iter().map(|b| (b.vp_type, &b.condition)).collect())
        }
    }
}

struct McCabe {
    code: u64,
    vp: u64,
}

impl Visitor for McCabe {
    fn enter(&mut self, _: &SourceFile, node: &Node, _: VisitCtx) {
        if is_decision(&node.kind) {
            self.code += 1;
        }
        self.vp += vps_of(node).iter().filter(|(t, _)| is_vp_decision(*t)).count() as u64;
    }
}

pub fn mccabe(file: &SourceFile, func: NodeId, mode: Mode) -> u64 {
    let mut v = McCabe { code: 0, vp: 0 };
    visit(file, func, &mut v, false).expect("validated RAST");
    match mode {
        Mode::Code => 1 + v.code,
        Mode::Vp => 1 + v.vp,
        Mode::Combined => 1 + v.code + v.vp,
    }
}

struct Nesting {
    mode: Mode,
    depth: u64,
    depths: Vec<u64>,
}

impl Nesting {
    fn counts(&self, n: &Node) -> bool {
        let code = matches!(n.kind, NodeKind::Loop { .. } | NodeKind::Branch { .. } | NodeKind::Switch { .. });
        let vp = matches!(n.kind, NodeKind::CppBlock { .. });
        match self.mode {
            Mode::Code => code,
            Mode::Vp => vp,
            Mode::Combined => code || vp,
        }
    }
}

impl Visitor for Nesting {
    fn enter(&mut self, _: &SourceFile, node: &Node, _: VisitCtx) {
        if node.is_statement() {
            self.depths.push(self.depth);
        }
        if self.counts(node) {
            self.depth += 1;
        }
    }

    fn leave(&mut self, _: &SourceFile, node: &Node, _: VisitCtx) {
        if self.counts(node) {
            self.depth -= 1;
        }
    }
}

/// (max, average) statement nesting depth; zeros without statements.
pub fn nesting_depth(file: &SourceFile, func: NodeId, mode: Mode, follow_refs: bool) -> (u64, f64) {
    let mut v = Nesting { mode, depth: 0, depths: Vec::new() };
    visit(file, func, &mut v, follow_refs).expect("validated RAST");
    if v.depths.is_empty() {
        return (0, 0.0);
    }
    let max = *v.depths.iter().max().unwrap();
    (max, v.depths.iter().sum::<u64>() as f64 / v.depths.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VpCounts {
    pub novp: u64,
    pub features: u64,
    pub td_sum: u64,
    pub td_max: u64,
}

pub fn vp_counts(file: &SourceFile, func: NodeId) -> VpCounts {
    let mut conds: Vec<Formula> = Vec::new();
    struct Collect<'b>(&'b mut Vec<Formula>);
    impl Visitor for Collect<'_> {
        fn enter(&mut self, _: &SourceFile, node: &Node, _: VisitCtx) {
            self.0.extend(vps_of(node).into_iter().map(|(_, c)| c.clone()));
        }
    }
    visit(file, func, &mut Collect(&mut conds), false).expect("validated RAST");
    let tds: Vec<u64> = conds.iter().map(|c| c.variables().len() as u64).collect();
    let all: BTreeSet<&str> = conds.iter().flat_map(|c| c.variables()).collect();
    VpCounts {
        novp: tds.len() as u64,
        features: all.len() as u64,
        td_sum: tds.iter().sum(),
        td_max: tds.iter().copied().max().unwrap_or(0),
    }
}

/// Distinct caller records (IN) or callee names (OUT); conditional variants count
/// distinct (name, rendered presence condition) pairs.
pub fn fan(records: &[FunctionRecord], calls: &CallMap, rec: usize, dir: Direction, conditional: bool) -> u64 {
    fan_units(records, calls, rec, dir, conditional).len() as u64
}

pub(super) fn fan_units(
    records: &[FunctionRecord],
    calls: &CallMap,
    rec: usize,
    dir: Direction,
    conditional: bool,
) -> BTreeMap<(String, String), Formula> {
    let edges: Vec<(String, &Formula)> = match dir {
        Direction::Out => calls.by_caller[rec].iter().map(|e| (e.callee.clone(), &e.call_pc)).collect(),
        Direction::In => {
            calls.incoming(&records[rec].name).iter().map(|e| (e.caller.to_string(), &e.call_pc)).collect()
        }
    };
    let mut units = BTreeMap::new();
    for (name, pc) in edges {
        let key = if conditional { pc.to_string() } else { String::new() };
        units.entry((name, key)).or_insert_with(|| pc.clone());
    }
    units
}

/// Weight of one unit with the given condition; featureless units weigh 1.
pub fn unit_weight(cond: &Formula, weight: Option<Weight>, stats: &FeatureStats, filter: &FeatureFilter) -> f64 {
    let Some(w) = weight else { return 1.0 };
    let feats = filter.features_of(cond);
    if feats.is_empty() {
        return 1.0;
    }
    let zero = FeatureStat::default();
    w.agg.apply(feats.iter().map(|f| stat_product(stats.get(*f).unwrap_or(&zero), w)))
}

pub fn stat_product(s: &FeatureStat, w: Weight) -> f64 {
    use super::catalog::Stat;
    w.stats()
        .map(|st| match st {
            Stat::SdVp => s.sd_vp,
            Stat::SdFile => s.sd_file,
            Stat::FeatureSize => s.feature_size,
            Stat::Tangling => s.tangling,
        } as f64)
        .product()
}

/// Sum of edge weights over distinct conditional in- and out-edges.
pub fn degree_centrality(
    records: &[FunctionRecord],
    calls: &CallMap,
    stats: &FeatureStats,
    filter: &FeatureFilter,
    rec: usize,
    weight: Option<Weight>,
) -> f64 {
    [Direction::In, Direction::Out]
        .into_iter()
        .flat_map(|d| fan_units(records, calls, rec, d, true).into_values())
        .map(|pc| unit_weight(&pc, weight, stats, filter))
        .sum()
}
