//! Seeded generator of annotated C files that records, for every block and
//! statement it emits, the conditions it was generated under.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

/// Condition as the generator wrote it.
#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    Var(String),
    Defined(String),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    pub fn eval(&self, env: &dyn Fn(&str) -> bool) -> bool {
        match self {
            Cond::Var(v) | Cond::Defined(v) => env(v),
            Cond::Not(c) => !c.eval(env),
            Cond::And(a, b) => a.eval(env) && b.eval(env),
            Cond::Or(a, b) => a.eval(env) || b.eval(env),
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Cond::Var(v) | Cond::Defined(v) => {
                out.insert(v.clone());
            }
            Cond::Not(c) => c.vars(out),
            Cond::And(a, b) | Cond::Or(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    pub fn render(&self) -> String {
        let wrap = |c: &Cond| match c {
            Cond::And(..) | Cond::Or(..) => format!("({})", c.render()),
            _ => c.render(),
        };
        match self {
            Cond::Var(v) => v.clone(),
            Cond::Defined(v) => format!("defined({v})"),
            Cond::Not(c) => format!("!{}", wrap(c)),
            Cond::And(a, b) => format!("{} && {}", wrap(a), wrap(b)),
            Cond::Or(a, b) => format!("{} || {}", wrap(a), wrap(b)),
        }
    }
}

/// One member of a conditional chain.
#[derive(Debug, Clone)]
pub struct BlockInfo {
    pub line: u32,
    /// `None` for `#else`.
    pub own: Option<Cond>,
    /// Own expression text as written after the directive keyword.
    pub own_text: Option<String>,
    pub priors: Vec<Cond>,
    pub prior_texts: Vec<String>,
    /// Conjuncts of the enclosing blocks' conditions.
    pub outer: Vec<Cond>,
    /// Chain nesting depth, 1 for an outermost chain.
    pub depth: usize,
    /// Embedded inside a statement rather than a CppBlock.
    pub embedded: bool,
}

impl BlockInfo {
    /// Condition of the block alone: negated priors plus the own expression.
    pub fn condition(&self) -> Vec<Cond> {
        let mut c: Vec<Cond> = self.priors.iter().map(|p| Cond::Not(Box::new(p.clone()))).collect();
        c.extend(self.own.clone());
        c
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut v = BTreeSet::new();
        for c in self.condition() {
            c.vars(&mut v);
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct StmtInfo {
    pub line: u32,
    /// Conjuncts of the presence condition.
    pub pc: Vec<Cond>,
}

#[derive(Debug, Clone)]
pub struct GenFile {
    pub path: String,
    pub text: String,
    pub functions: Vec<String>,
    pub blocks: Vec<BlockInfo>,
    pub stmts: Vec<StmtInfo>,
    /// Contains an unclosed conditional.
    pub broken: bool,
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Feature macros (matching `^CONFIG_`) to draw from.
    pub features: usize,
    /// Maximum nesting of conditional chains.
    pub max_vp_depth: usize,
    pub max_code_depth: usize,
    pub functions: (usize, usize),
    pub stmts: (usize, usize),
    /// Also emit annotations that split control structures or statements.
    pub undisciplined: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            features: 6,
            max_vp_depth: 3,
            max_code_depth: 3,
            functions: (1, 5),
            stmts: (1, 5),
            undisciplined: false,
        }
    }
}

pub fn feature_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("CONFIG_{}", (b'A' + i as u8) as char)).collect()
}

struct Gen<'a> {
    rng: StdRng,
    cfg: &'a GenConfig,
    feats: Vec<String>,
    callees: Vec<String>,
    lines: Vec<String>,
    blocks: Vec<BlockInfo>,
    stmts: Vec<StmtInfo>,
    counter: usize,
    /// Lines the current function may still grow by before only plain
    /// statements are emitted.
    budget: usize,
}

impl Gen<'_> {
    fn line(&mut self, indent: usize, s: impl AsRef<str>) -> u32 {
        self.budget = self.budget.saturating_sub(1);
        self.lines.push(format!("{}{}", "  ".repeat(indent), s.as_ref()));
        self.lines.len() as u32
    }

    fn var(&mut self) -> String {
        // Occasionally a macro that is not a feature.
        if self.rng.gen_ratio(1, 12) {
            "DEBUG_LEVEL".into()
        } else {
            self.feats.choose(&mut self.rng).unwrap().clone()
        }
    }

    fn cond(&mut self, depth: usize) -> Cond {
        match if depth == 0 { 0 } else { self.rng.gen_range(0..6) } {
            0 | 1 => Cond::Var(self.var()),
            2 => Cond::Defined(self.var()),
            3 => Cond::Not(Box::new(self.cond(depth - 1))),
            4 => Cond::And(Box::new(self.cond(depth - 1)), Box::new(self.cond(depth - 1))),
            _ => Cond::Or(Box::new(self.cond(depth - 1)), Box::new(self.cond(depth - 1))),
        }
    }

    fn stmt(&mut self, indent: usize, pc: &[Cond]) {
        self.counter += 1;
        let k = self.counter;
        let text = match self.rng.gen_range(0..4) {
            0 if !self.callees.is_empty() => {
                let callee = self.callees.choose(&mut self.rng).unwrap().clone();
                format!("{callee}(v{k});")
            }
            1 => format!("v = v + {k};"),
            2 => format!("log_value(v, {k});"),
            _ => format!("s{k} = v;"),
        };
        let line = self.line(indent, text);
        self.stmts.push(StmtInfo { line, pc: pc.to_vec() });
    }

    fn body(&mut self, indent: usize, pc: &[Cond], code_depth: usize, vp_depth: usize) {
        let n = self.rng.gen_range(self.cfg.stmts.0..=self.cfg.stmts.1);
        for _ in 0..n {
            self.unit(indent, pc, code_depth, vp_depth);
        }
    }

    fn unit(&mut self, indent: usize, pc: &[Cond], code_depth: usize, vp_depth: usize) {
        let can_code = code_depth < self.cfg.max_code_depth && self.budget > 0;
        let can_vp = vp_depth < self.cfg.max_vp_depth && self.budget > 0;
        let undis = self.cfg.undisciplined;
        match self.rng.gen_range(0..12) {
            0 | 1 if can_code => {
                self.line(indent, "if (v > 1) {");
                self.body(indent + 1, pc, code_depth + 1, vp_depth);
                if self.rng.gen_bool(0.4) {
                    self.line(indent, "} else if (v < 0) {");
                    self.body(indent + 1, pc, code_depth + 1, vp_depth);
                }
                if self.rng.gen_bool(0.5) {
                    self.line(indent, "} else {");
                    self.body(indent + 1, pc, code_depth + 1, vp_depth);
                }
                self.line(indent, "}");
            }
            2 if can_code => {
                let header = if self.rng.gen_bool(0.5) { "while (v < 10) {" } else { "for (i = 0; i < v; i++) {" };
                self.line(indent, header);
                self.body(indent + 1, pc, code_depth + 1, vp_depth);
                self.line(indent, "}");
            }
            3 if can_code => {
                self.line(indent, "switch (v) {");
                self.line(indent, "case 1:");
                self.body(indent + 1, pc, code_depth + 1, vp_depth);
                self.line(indent + 1, "break;");
                self.stmts.push(StmtInfo { line: self.lines.len() as u32, pc: pc.to_vec() });
                self.line(indent, "default:");
                self.body(indent + 1, pc, code_depth + 1, vp_depth);
                self.line(indent, "}");
            }
            4 if can_code => {
                self.line(indent, "do {");
                self.body(indent + 1, pc, code_depth + 1, vp_depth);
                self.line(indent, "} while (v > 0);");
            }
            5..=7 if can_vp => self.chain(pc, vp_depth, |g, pc, vd| g.body(indent + 1, pc, code_depth, vd)),
            8 if undis && can_vp => self.split_loop(indent, pc, vp_depth),
            9 if undis && can_vp => self.embedded_arg(indent, pc, vp_depth),
            _ => self.stmt(indent, pc),
        }
    }

    /// An `#if`/`#elif`/`#else` chain whose members hold `inner`.
    fn chain(&mut self, pc: &[Cond], vp_depth: usize, mut inner: impl FnMut(&mut Self, &[Cond], usize)) {
        let elifs = self.rng.gen_range(0..=2);
        let has_else = self.rng.gen_bool(0.4);
        let mut priors: Vec<Cond> = Vec::new();
        let mut prior_texts = Vec::new();
        for member in 0..=elifs + has_else as usize {
            let is_else = has_else && member == elifs + 1;
            let (own, text, line) = if is_else {
                (None, None, self.line(0, "#else"))
            } else if member == 0 {
                match self.rng.gen_range(0..4) {
                    0 => {
                        let v = self.var();
                        let l = self.line(0, format!("#ifdef {v}"));
                        (Some(Cond::Var(v.clone())), Some(v), l)
                    }
                    1 => {
                        let v = self.var();
                        let l = self.line(0, format!("#ifndef {v}"));
                        (Some(Cond::Not(Box::new(Cond::Var(v.clone())))), Some(format!("!{v}")), l)
                    }
                    _ => {
                        let c = self.cond(2);
                        let t = c.render();
                        let l = self.line(0, format!("#if {t}"));
                        (Some(c), Some(t), l)
                    }
                }
            } else {
                let c = self.cond(2);
                let t = c.render();
                let l = self.line(0, format!("#elif {t}"));
                (Some(c), Some(t), l)
            };
            let info = BlockInfo {
                line,
                own: own.clone(),
                own_text: text.clone(),
                priors: priors.clone(),
                prior_texts: prior_texts.clone(),
                outer: pc.to_vec(),
                depth: vp_depth + 1,
                embedded: false,
            };
            let mut inner_pc = pc.to_vec();
            inner_pc.extend(info.condition());
            self.blocks.push(info);
            inner(self, &inner_pc, vp_depth + 1);
            priors.extend(own);
            prior_texts.extend(text);
        }
        self.line(0, "#endif");
    }

    /// A loop whose header and closing brace are guarded separately, so the
    /// body lies outside the block.
    fn split_loop(&mut self, indent: usize, pc: &[Cond], vp_depth: usize) {
        let v = self.var();
        let line = self.line(0, format!("#ifdef {v}"));
        self.blocks.push(BlockInfo {
            line,
            own: Some(Cond::Var(v.clone())),
            own_text: Some(v.clone()),
            priors: vec![],
            prior_texts: vec![],
            outer: pc.to_vec(),
            depth: vp_depth + 1,
            embedded: false,
        });
        self.line(indent, "while (v) {");
        self.line(0, "#endif");
        self.stmt(indent + 1, pc);
        let line = self.line(0, format!("#ifdef {v}"));
        self.blocks.push(BlockInfo {
            line,
            own: Some(Cond::Var(v.clone())),
            own_text: Some(v),
            priors: vec![],
            prior_texts: vec![],
            outer: pc.to_vec(),
            depth: vp_depth + 1,
            embedded: false,
        });
        self.line(indent, "}");
        self.line(0, "#endif");
    }

    /// A call whose argument list is partly guarded.
    fn embedded_arg(&mut self, indent: usize, pc: &[Cond], vp_depth: usize) {
        self.counter += 1;
        let k = self.counter;
        let first = self.line(indent, format!("log_value(v{k}"));
        let v = self.var();
        let line = self.line(0, format!("#ifdef {v}"));
        self.blocks.push(BlockInfo {
            line,
            own: Some(Cond::Var(v.clone())),
            own_text: Some(v),
            priors: vec![],
            prior_texts: vec![],
            outer: pc.to_vec(),
            depth: vp_depth + 1,
            embedded: true,
        });
        self.line(indent + 1, ", extra");
        self.line(0, "#endif");
        self.line(indent, ");");
        self.stmts.push(StmtInfo { line: first, pc: pc.to_vec() });
    }

    fn function(&mut self, name: &str, pc: &[Cond]) {
        self.line(0, format!("static int {name}(int v)"));
        self.line(0, "{");
        self.budget = self.rng.gen_range(5..60);
        self.body(1, pc, 0, pc.len().min(1));
        self.line(1, "return v;");
        self.stmts.push(StmtInfo { line: self.lines.len() as u32, pc: pc.to_vec() });
        self.line(0, "}");
    }
}

/// Generates one file. `callees` are function names calls may target.
pub fn generate(seed: u64, path: &str, cfg: &GenConfig, callees: &[String], names: &[String]) -> GenFile {
    let mut g = Gen {
        rng: StdRng::seed_from_u64(seed),
        cfg,
        feats: feature_names(cfg.features),
        callees: callees.to_vec(),
        lines: Vec::new(),
        blocks: Vec::new(),
        stmts: Vec::new(),
        counter: 0,
        budget: 0,
    };
    g.line(0, "/* generated */");
    g.line(0, "#include <stdio.h>");
    g.line(0, "#define LIMIT 10");
    for k in 0..g.rng.gen_range(0..3) {
        let l = g.line(0, format!("int g{k};"));
        g.stmts.push(StmtInfo { line: l, pc: vec![] });
    }
    for name in names {
        if g.rng.gen_ratio(1, 4) && cfg.max_vp_depth > 0 {
            // Guarded function definition.
            let v = g.var();
            let line = g.line(0, format!("#ifdef {v}"));
            let info = BlockInfo {
                line,
                own: Some(Cond::Var(v.clone())),
                own_text: Some(v),
                priors: vec![],
                prior_texts: vec![],
                outer: vec![],
                depth: 1,
                embedded: false,
            };
            let pc = info.condition();
            g.blocks.push(info);
            g.function(name, &pc);
            g.line(0, "#endif");
        } else {
            g.function(name, &[]);
        }
        g.line(0, "");
    }
    let mut text = String::new();
    for l in &g.lines {
        let _ = writeln!(text, "{l}");
    }
    GenFile { path: path.into(), text, functions: names.to_vec(), blocks: g.blocks, stmts: g.stmts, broken: false }
}

/// A corpus of `files` files whose functions call each other.
pub fn corpus(seed: u64, files: usize, cfg: &GenConfig) -> Vec<GenFile> {
    let mut rng = StdRng::seed_from_u64(seed);
    let names: Vec<Vec<String>> = (0..files)
        .map(|i| (0..rng.gen_range(cfg.functions.0..=cfg.functions.1)).map(|k| format!("fn_{i}_{k}")).collect())
        .collect();
    let all: Vec<String> = names.iter().flatten().cloned().collect();
    names
        .iter()
        .enumerate()
        .map(|(i, ns)| {
            let callees: Vec<String> = all.choose_multiple(&mut rng, 12.min(all.len())).cloned().collect();
            let dir = ["drivers", "kernel", "mm"][i % 3];
            generate(
                seed ^ (i as u64 + 1).wrapping_mul(0x9e37_79b9),
                &format!("{dir}/file_{i:04}.c"),
                cfg,
                &callees,
                ns,
            )
        })
        .collect()
}

/// Appends an unclosed `#ifdef` to the file.
pub fn break_file(f: &mut GenFile) {
    f.text.push_str("#ifdef CONFIG_BROKEN\nint never_closed;\n");
    f.broken = true;
}

pub fn write_corpus(root: &Path, files: &[GenFile]) {
    for f in files {
        let p = root.join(&f.path);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, &f.text).unwrap();
    }
}

/// Calls `f` with every assignment of `vars` until it returns false.
pub fn all_assignments(vars: &BTreeSet<String>, mut f: impl FnMut(&dyn Fn(&str) -> bool) -> bool) -> bool {
    let names: Vec<&str> = vars.iter().map(String::as_str).collect();
    (0u64..1 << names.len()).all(|bits| {
        let env = |v: &str| names.iter().position(|n| *n == v).is_some_and(|i| bits >> i & 1 == 1);
        f(&env)
    })
}
