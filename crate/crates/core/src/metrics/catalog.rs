//! Metric variations: every base metric crossed with the feature weights it
//! admits, named by stable dot-separated ids.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Code,
    Vp,
    Combined,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Code, Mode::Vp, Mode::Combined];

    fn as_str(self) -> &'static str {
        match self {
            Mode::Code => "code",
            Mode::Vp => "vp",
            Mode::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocKind {
    Loc,
    Scoc,
    Lof,
    Plof,
    Cloc,
    CommentRatio,
}

impl LocKind {
    pub const ALL: [LocKind; 6] =
        [LocKind::Loc, LocKind::Scoc, LocKind::Lof, LocKind::Plof, LocKind::Cloc, LocKind::CommentRatio];

    fn as_str(self) -> &'static str {
        match self {
            LocKind::Loc => "loc",
            LocKind::Scoc => "scoc",
            LocKind::Lof => "lof",
            LocKind::Plof => "plof",
            LocKind::Cloc => "cloc",
            LocKind::CommentRatio => "comment_ratio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DepthAgg {
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VpKind {
    Novp,
    Features,
    TdSum,
    TdMax,
}

impl VpKind {
    pub const ALL: [VpKind; 4] = [VpKind::Novp, VpKind::Features, VpKind::TdSum, VpKind::TdMax];

    fn as_str(self) -> &'static str {
        match self {
            VpKind::Novp => "novp",
            VpKind::Features => "features",
            VpKind::TdSum => "td_sum",
            VpKind::TdMax => "td_max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Loc(LocKind),
    Mccabe(Mode),
    /// `follow_refs` descends into `Reference` targets.
    Nesting {
        mode: Mode,
        agg: DepthAgg,
        follow_refs: bool,
    },
    Vp(VpKind),
    Fan {
        dir: Direction,
        conditional: bool,
    },
    Degree,
    Eigen,
}

impl Metric {
    pub fn weightable(self) -> bool {
        match self {
            Metric::Mccabe(m) | Metric::Nesting { mode: m, .. } => m != Mode::Code,
            Metric::Vp(_) | Metric::Degree => true,
            Metric::Fan { conditional, .. } => conditional,
            Metric::Loc(_) | Metric::Eigen => false,
        }
    }

    fn id(self) -> String {
        match self {
            Metric::Loc(k) => format!("loc.{}", k.as_str()),
            Metric::Mccabe(m) => format!("mccabe.{}", m.as_str()),
            Metric::Nesting { mode, agg, follow_refs } => format!(
                "{}.{}.{}",
                if follow_refs { "nesting_ref" } else { "nesting" },
                mode.as_str(),
                if agg == DepthAgg::Max { "max" } else { "avg" }
            ),
            Metric::Vp(k) => format!("vp.{}", k.as_str()),
            Metric::Fan { dir, conditional } => {
                let d = if dir == Direction::In { "in" } else { "out" };
                if conditional {
                    format!("fan.cond_{d}")
                } else {
                    format!("fan.{d}")
                }
            }
            Metric::Degree => "dc.degree".into(),
            Metric::Eigen => "eigen.centrality".into(),
        }
    }

    fn all() -> Vec<Metric> {
        let mut out: Vec<Metric> = LocKind::ALL.iter().map(|&k| Metric::Loc(k)).collect();
        out.extend(Mode::ALL.iter().map(|&m| Metric::Mccabe(m)));
        for follow_refs in [false, true] {
            for mode in Mode::ALL {
                for agg in [DepthAgg::Max, DepthAgg::Avg] {
                    out.push(Metric::Nesting { mode, agg, follow_refs });
                }
            }
        }
        out.extend(VpKind::ALL.iter().map(|&k| Metric::Vp(k)));
        for conditional in [false, true] {
            for dir in [Direction::In, Direction::Out] {
                out.push(Metric::Fan { dir, conditional });
            }
        }
        out.push(Metric::Degree);
        out.push(Metric::Eigen);
        out
    }
}

/// Per-feature statistic usable as a weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stat {
    SdVp,
    SdFile,
    FeatureSize,
    Tangling,
}

impl Stat {
    pub const ALL: [Stat; 4] = [Stat::SdVp, Stat::SdFile, Stat::FeatureSize, Stat::Tangling];

    fn as_str(self) -> &'static str {
        match self {
            Stat::SdVp => "sd_vp",
            Stat::SdFile => "sd_file",
            Stat::FeatureSize => "feature_size",
            Stat::Tangling => "tangling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Agg {
    Sum,
    Max,
    Avg,
}

impl Agg {
    pub const ALL: [Agg; 3] = [Agg::Sum, Agg::Max, Agg::Avg];

    fn as_str(self) -> &'static str {
        match self {
            Agg::Sum => "sum",
            Agg::Max => "max",
            Agg::Avg => "avg",
        }
    }

    pub fn apply(self, values: impl Iterator<Item = f64>) -> f64 {
        let (mut sum, mut max, mut n) = (0.0, f64::NEG_INFINITY, 0usize);
        for v in values {
            sum += v;
            max = max.max(v);
            n += 1;
        }
        if n == 0 {
            return 0.0;
        }
        match self {
            Agg::Sum => sum,
            Agg::Max => max,
            Agg::Avg => sum / n as f64,
        }
    }
}

/// A feature weight: the product of one or more statistics per feature,
/// aggregated over the features of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Weight {
    stats: u8,
    pub agg: Agg,
}

impl Weight {
    pub fn new(stats: &[Stat], agg: Agg) -> Self {
        assert!(!stats.is_empty());
        let mask = stats.iter().fold(0u8, |m, s| m | 1 << *s as u8);
        Weight { stats: mask, agg }
    }

    pub fn single(stat: Stat, agg: Agg) -> Self {
        Weight::new(&[stat], agg)
    }

    pub fn stats(self) -> impl Iterator<Item = Stat> {
        Stat::ALL.into_iter().filter(move |s| self.stats & (1 << *s as u8) != 0)
    }

    fn all() -> Vec<Weight> {
        let mut out = Vec::new();
        for mask in 1u8..(1 << Stat::ALL.len()) {
            for agg in Agg::ALL {
                out.push(Weight { stats: mask, agg });
            }
        }
        out
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.stats().map(Stat::as_str).collect();
        write!(f, "{}.{}", names.join("+"), self.agg.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Variation {
    pub metric: Metric,
    pub weight: Option<Weight>,
    pub id: String,
}

impl Variation {
    pub fn new(metric: Metric, weight: Option<Weight>) -> Self {
        assert!(weight.is_none() || metric.weightable(), "{metric:?} takes no weight");
        let id = match weight {
            None => metric.id(),
            Some(w) => format!("{}.{w}", metric.id()),
        };
        Variation { metric, weight, id }
    }

    /// Whether values are whole numbers (printed without a decimal point).
    pub fn is_integral(&self) -> bool {
        let base = match self.metric {
            Metric::Loc(k) => !matches!(k, LocKind::Plof | LocKind::CommentRatio),
            Metric::Nesting { agg, .. } => agg == DepthAgg::Max,
            Metric::Eigen => false,
            _ => true,
        };
        base && self.weight.is_none_or(|w| w.agg != Agg::Avg)
    }
}

/// Every known variation, sorted by id.
pub fn catalog() -> Vec<Variation> {
    let weights = Weight::all();
    let mut out = Vec::new();
    for m in Metric::all() {
        out.push(Variation::new(m, None));
        if m.weightable() {
            out.extend(weights.iter().map(|&w| Variation::new(m, Some(w))));
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("empty metric selection")]
    Empty,
    #[error("no metric matches `{0}`")]
    Unknown(String),
    #[error("`{0}` takes no feature weight")]
    NotWeightable(String),
    #[error("`{0}` is listed twice")]
    Duplicate(String),
}

/// Segment-wise glob: `*` matches any run of characters inside a segment;
/// a final segment of just `*` matches one or more segments.
pub fn matches(pattern: &str, id: &str) -> bool {
    let pat: Vec<&str> = pattern.split('.').collect();
    let ids: Vec<&str> = id.split('.').collect();
    for (k, p) in pat.iter().enumerate() {
        if *p == "*" && k == pat.len() - 1 {
            return ids.len() > k;
        }
        match ids.get(k) {
            Some(s) if segment_matches(p, s) => {}
            _ => return false,
        }
    }
    pat.len() == ids.len()
}

fn segment_matches(p: &str, s: &str) -> bool {
    let parts: Vec<&str> = p.split('*').collect();
    if parts.len() == 1 {
        return p == s;
    }
    let mut rest = s;
    for (k, part) in parts.iter().enumerate() {
        if k == 0 {
            match rest.strip_prefix(part) {
                Some(r) => rest = r,
                None => return false,
            }
        } else if k == parts.len() - 1 {
            return rest.len() >= part.len() && rest.ends_with(part);
        } else {
            match rest.find(part) {
                Some(i) => rest = &rest[i + part.len()..],
                None => return false,
            }
        }
    }
    true
}

/// Resolves a comma-separated selection into variations sorted by id.
pub fn expand_variations(spec: &str) -> Result<Vec<Variation>, SelectionError> {
    let patterns: Vec<&str> = spec.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    if patterns.is_empty() {
        return Err(SelectionError::Empty);
    }
    let all = catalog();
    let mut seen = BTreeSet::new();
    let mut chosen = vec![false; all.len()];
    for p in patterns {
        let p = p.to_ascii_lowercase();
        if !seen.insert(p.clone()) {
            return Err(SelectionError::Duplicate(p));
        }
        let mut hit = false;
        for (k, v) in all.iter().enumerate() {
            if matches(&p, &v.id) {
                chosen[k] = true;
                hit = true;
            }
        }
        if !hit {
            let base = all.iter().find(|v| !v.metric.weightable() && p.starts_with(&format!("{}.", v.id)));
            return Err(match base {
                Some(v) => SelectionError::NotWeightable(v.id.clone()),
                None => SelectionError::Unknown(p),
            });
        }
    }
    Ok(all.into_iter().zip(chosen).filter_map(|(v, c)| c.then_some(v)).collect())
}
