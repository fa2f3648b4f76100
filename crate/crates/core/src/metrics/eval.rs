//! Batch evaluation: one walk per function gathers everything the catalog
//! needs, then each variation is a cheap fold over those facts.

use std::collections::{BTreeSet, HashMap};

use crate::prepass::{CallMap, FeatureFilter, FeatureStat, FeatureStats, FunctionRecord};
use crate::rast::{BranchType, CaseType, NodeId, NodeKind, SourceFile, VpType};

use super::base::{fan_units, loc_metrics, stat_product, LocMetrics};
use super::catalog::{DepthAgg, Direction, LocKind, Metric, Mode, Variation, VpKind, Weight};

/// Everything metrics read: the parsed model and the prepass results.
#[derive(Clone, Copy)]
pub struct Model<'a> {
    pub files: &'a [SourceFile],
    pub records: &'a [FunctionRecord],
    pub calls: &'a CallMap,
    pub stats: &'a FeatureStats,
    pub filter: &'a FeatureFilter,
    /// Eigenvector scores indexed like `records`, when computed.
    pub eigen: Option<&'a [f64]>,
}

/// Feature statistics of one weighted unit (a VP or a conditional edge).
type Unit = Vec<FeatureStat>;

struct Vp {
    decision: bool,
    td: u64,
    feats: Unit,
}

struct Stmt {
    code: u64,
    vps: Vec<usize>,
}

pub struct Facts {
    loc: LocMetrics,
    decisions: u64,
    vps: Vec<Vp>,
    stmts: Vec<Stmt>,
    stmts_ref: Vec<Stmt>,
    /// One entry per distinct variable in VP conditions; `None` for
    /// variables that are not features.
    vars: Vec<Option<FeatureStat>>,
    fan_in: u64,
    fan_out: u64,
    cond_in: Vec<Unit>,
    cond_out: Vec<Unit>,
    eigen: f64,
}

struct Walker<'a> {
    file: &'a SourceFile,
    model: Model<'a>,
    vp_of_node: HashMap<NodeId, usize>,
    vps: Vec<Vp>,
    vars: BTreeSet<String>,
    decisions: u64,
}

impl Walker<'_> {
    fn unit(&self, cond: &crate::formula::Formula) -> Unit {
        self.model
            .filter
            .features_of(cond)
            .into_iter()
            .map(|f| self.model.stats.get(f).copied().unwrap_or_default())
            .collect()
    }

    fn add_vp(&mut self, vp_type: VpType, cond: &crate::formula::Formula) -> usize {
        self.vars.extend(cond.variables().into_iter().map(str::to_owned));
        let vp = Vp { decision: vp_type != VpType::Else, td: cond.variables().len() as u64, feats: self.unit(cond) };
        self.vps.push(vp);
        self.vps.len() - 1
    }

    /// Structural walk: registers VPs and decisions, records statements.
    fn walk(&mut self, id: NodeId, code: u64, chain: &mut Vec<usize>, out: &mut Vec<Stmt>) {
        let n = self.file.node(id);
        let mut code_inner = code;
        let mut pushed = false;
        match &n.kind {
            NodeKind::Reference { .. } => return,
            NodeKind::CppBlock { vp_type, .. } => {
                let k = self.add_vp(*vp_type, &n.condition);
                self.vp_of_node.insert(id, k);
                chain.push(k);
                pushed = true;
            }
            NodeKind::SingleStatement { directive: false, .. } => out.push(Stmt { code, vps: chain.clone() }),
            _ => {}
        }
        if matches!(
            n.kind,
            NodeKind::Loop { .. }
                | NodeKind::Branch { branch_type: BranchType::If | BranchType::ElseIf, .. }
                | NodeKind::Case { case_type: CaseType::Case, .. }
        ) {
            self.decisions += 1;
        }
        if matches!(n.kind, NodeKind::Loop { .. } | NodeKind::Branch { .. } | NodeKind::Switch { .. }) {
            code_inner += 1;
        }
        if !matches!(n.kind, NodeKind::Function { .. }) {
            if let Some(u) = n.kind.unparsed() {
                for b in u.blocks() {
                    self.add_vp(b.vp_type, &b.condition);
                }
            }
        }
        for &c in &n.children {
            self.walk(c, code_inner, chain, out);
        }
        if pushed {
            chain.pop();
        }
    }

    /// Walk that also descends into reference targets.
    fn walk_refs(&self, id: NodeId, code: u64, chain: &mut Vec<usize>, out: &mut Vec<Stmt>, guard: usize) {
        let n = self.file.node(id);
        let mut code_inner = code;
        let mut pushed = false;
        match &n.kind {
            NodeKind::Reference { target } => {
                if guard < self.file.nodes.len() {
                    self.walk_refs(*target, code, chain, out, guard + 1);
                }
                return;
            }
            NodeKind::CppBlock { .. } => {
                chain.push(self.vp_of_node[&id]);
                pushed = true;
            }
            NodeKind::SingleStatement { directive: false, .. } => out.push(Stmt { code, vps: chain.clone() }),
            _ => {}
        }
        if matches!(n.kind, NodeKind::Loop { .. } | NodeKind::Branch { .. } | NodeKind::Switch { .. }) {
            code_inner += 1;
        }
        for &c in &n.children {
            self.walk_refs(c, code_inner, chain, out, guard);
        }
        if pushed {
            chain.pop();
        }
    }
}

impl Facts {
    pub fn gather(model: Model<'_>, rec: usize) -> Facts {
        let r = &model.records[rec];
        let file = &model.files[r.file];
        let mut w =
            Walker { file, model, vp_of_node: HashMap::new(), vps: Vec::new(), vars: BTreeSet::new(), decisions: 0 };
        let mut stmts = Vec::new();
        w.walk(r.node, 0, &mut Vec::new(), &mut stmts);
        let mut stmts_ref = Vec::new();
        w.walk_refs(r.node, 0, &mut Vec::new(), &mut stmts_ref, 0);
        let vars = w
            .vars
            .iter()
            .map(|v| model.filter.is_feature(v).then(|| model.stats.get(v).copied().unwrap_or_default()))
            .collect();
        let units = |dir, conditional| fan_units(model.records, model.calls, rec, dir, conditional);
        let cond = |dir| units(dir, true).values().map(|pc| w.unit(pc)).collect::<Vec<_>>();
        Facts {
            loc: loc_metrics(file, r.node),
            decisions: w.decisions,
            fan_in: units(Direction::In, false).len() as u64,
            fan_out: units(Direction::Out, false).len() as u64,
            cond_in: cond(Direction::In),
            cond_out: cond(Direction::Out),
            vps: w.vps,
            stmts,
            stmts_ref,
            vars,
            eigen: model.eigen.map_or(0.0, |e| e[rec]),
        }
    }

    pub fn value(&self, v: &Variation) -> f64 {
        let w = v.weight;
        match v.metric {
            Metric::Loc(k) => match k {
                LocKind::Loc => self.loc.loc as f64,
                LocKind::Scoc => self.loc.scoc as f64,
                LocKind::Lof => self.loc.lof as f64,
                LocKind::Plof => self.loc.plof,
                LocKind::Cloc => self.loc.cloc as f64,
                LocKind::CommentRatio => self.loc.comment_ratio,
            },
            Metric::Mccabe(mode) => {
                let vp: f64 = self.vps.iter().filter(|p| p.decision).map(|p| weigh(&p.feats, w)).sum();
                match mode {
                    Mode::Code => 1.0 + self.decisions as f64,
                    Mode::Vp => 1.0 + vp,
                    Mode::Combined => 1.0 + self.decisions as f64 + vp,
                }
            }
            Metric::Nesting { mode, agg, follow_refs } => {
                let stmts = if follow_refs { &self.stmts_ref } else { &self.stmts };
                let vp_w: Vec<f64> = self.vps.iter().map(|p| weigh(&p.feats, w)).collect();
                let depth = |s: &Stmt| {
                    let code = if mode == Mode::Vp { 0.0 } else { s.code as f64 };
                    let vp: f64 = if mode == Mode::Code { 0.0 } else { s.vps.iter().map(|&k| vp_w[k]).sum() };
                    code + vp
                };
                if stmts.is_empty() {
                    return 0.0;
                }
                match agg {
                    DepthAgg::Max => stmts.iter().map(depth).fold(0.0, f64::max),
                    DepthAgg::Avg => stmts.iter().map(depth).sum::<f64>() / stmts.len() as f64,
                }
            }
            Metric::Vp(k) => match k {
                VpKind::Novp => self.vps.iter().map(|p| weigh(&p.feats, w)).sum(),
                VpKind::Features => {
                    self.vars.iter().map(|s| s.as_ref().map_or(1.0, |s| weigh(std::slice::from_ref(s), w))).sum()
                }
                VpKind::TdSum => self.vps.iter().map(|p| p.td as f64 * weigh(&p.feats, w)).sum(),
                VpKind::TdMax => self.vps.iter().map(|p| p.td as f64 * weigh(&p.feats, w)).fold(0.0, f64::max),
            },
            Metric::Fan { dir, conditional: false } => match dir {
                Direction::In => self.fan_in as f64,
                Direction::Out => self.fan_out as f64,
            },
            Metric::Fan { dir, conditional: true } => {
                let units = if dir == Direction::In { &self.cond_in } else { &self.cond_out };
                units.iter().map(|u| weigh(u, w)).sum()
            }
            Metric::Degree => self.cond_in.iter().chain(&self.cond_out).map(|u| weigh(u, w)).sum(),
            Metric::Eigen => self.eigen,
        }
    }
}

fn weigh(feats: &[FeatureStat], w: Option<Weight>) -> f64 {
    match w {
        Some(w) if !feats.is_empty() => w.agg.apply(feats.iter().map(|s| stat_product(s, w))),
        _ => 1.0,
    }
}

/// Values of the selected variations for one function, in order.
pub fn compute_row(model: Model<'_>, rec: usize, variations: &[Variation]) -> Vec<f64> {
    let facts = Facts::gather(model, rec);
    variations.iter().map(|v| facts.value(v)).collect()
}
