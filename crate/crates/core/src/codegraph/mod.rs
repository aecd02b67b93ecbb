//! Statement-level program graphs: sequential, control-dependence and
//! data-dependence edges over statement nodes, plus hashed token features.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::minic::*;

pub const DEFAULT_FEATURE_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EdgeType {
    Next,
    Ctrl,
    Data,
}

impl EdgeType {
    pub const ALL: [EdgeType; 3] = [EdgeType::Next, EdgeType::Ctrl, EdgeType::Data];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeType::Next => "NEXT",
            EdgeType::Ctrl => "CTRL",
            EdgeType::Data => "DATA",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Decl,
    Assign,
    If,
    While,
    ForInit,
    ForCond,
    ForUpdate,
    Switch,
    Break,
    Return,
    Expr,
    /// Placeholder node of a function with an empty body.
    Empty,
}

impl NodeKind {
    /// Nodes that decide which statements run next.
    pub fn is_condition(self) -> bool {
        matches!(self, NodeKind::If | NodeKind::While | NodeKind::ForCond | NodeKind::Switch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Vulnerable,
}

impl Label {
    pub fn as_class(self) -> usize {
        match self {
            Label::Benign => 0,
            Label::Vulnerable => 1,
        }
    }

    pub fn from_class(c: usize) -> Self {
        if c == 1 {
            Label::Vulnerable
        } else {
            Label::Benign
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub stmt_id: usize,
    pub span: SourceSpan,
    pub tokens: Vec<String>,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub etype: EdgeType,
}

/// Graph of one function. `features` is row-major `V × feature_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeGraph {
    pub nodes: Vec<NodeInfo>,
    pub edges: Vec<Edge>,
    pub label: Option<Label>,
    pub feature_dim: usize,
    pub features: Vec<f64>,
}

impl CodeGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Dense binary adjacency `A_k` of one edge type, row-major `V × V`.
    pub fn adjacency(&self, etype: EdgeType) -> Vec<f64> {
        let v = self.num_nodes();
        let mut a = vec![0.0; v * v];
        for e in self.edges.iter().filter(|e| e.etype == etype) {
            a[e.src * v + e.dst] = 1.0;
        }
        a
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    /// Source lines covered by the given nodes.
    pub fn lines_of(&self, nodes: impl IntoIterator<Item = usize>) -> BTreeSet<u32> {
        nodes.into_iter().flat_map(|n| self.nodes[n].span.lines()).collect()
    }

    /// Nodes whose span touches `line`.
    pub fn nodes_on_line(&self, line: u32) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.nodes[i].span.lines().contains(&line)).collect()
    }
}

// ---------------------------------------------------------------------------
// Node extraction

#[derive(Debug, Clone, Default)]
struct NodeFacts {
    strong_defs: BTreeSet<String>,
    weak_defs: BTreeSet<String>,
    uses: BTreeSet<String>,
}

/// Everything derived from one pass over the AST.
#[derive(Debug, Clone, Default)]
pub struct Cfg {
    pub nodes: Vec<NodeInfo>,
    /// Control-flow successors per node; the function exit is implicit.
    pub succ: Vec<Vec<usize>>,
    pub entry: Option<usize>,
    facts: Vec<NodeFacts>,
    ctrl: Vec<(usize, usize)>,
    next: Vec<(usize, usize)>,
}

impl Cfg {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Variables a node overwrites entirely (kills earlier definitions).
    pub fn strong_defs(&self, n: usize) -> &BTreeSet<String> {
        &self.facts[n].strong_defs
    }

    /// Variables a node may partially update (array element writes, arrays
    /// passed to a recursive call).
    pub fn weak_defs(&self, n: usize) -> &BTreeSet<String> {
        &self.facts[n].weak_defs
    }

    pub fn uses(&self, n: usize) -> &BTreeSet<String> {
        &self.facts[n].uses
    }
}

struct Builder<'a> {
    func: &'a Function,
    cfg: Cfg,
    /// Innermost enclosing condition node.
    ctrl_stack: Vec<usize>,
    /// Pending `break` nodes of each enclosing loop or switch.
    break_stack: Vec<Vec<usize>>,
}

fn tokens_of(text: &str) -> Vec<String> {
    tokenize(text)
        .map(|ts| ts.iter().map(|t| t.kind.to_string()).collect())
        .unwrap_or_default()
}

fn header_span(s: &Stmt, e: Option<&Expr>) -> SourceSpan {
    match e {
        Some(e) if e.span != SourceSpan::default() => SourceSpan::new(
            s.span.start_line,
            s.span.start_col,
            e.span.end_line.max(s.span.start_line),
            e.span.end_col,
        ),
        _ => SourceSpan::new(s.span.start_line, s.span.start_col, s.span.start_line, s.span.start_col),
    }
}

fn expr_facts(e: &Expr, func_name: &str, facts: &mut NodeFacts, params: &[Param]) {
    let mut reads = Vec::new();
    e.reads(&mut reads);
    facts.uses.extend(reads);
    e.walk(&mut |x| {
        if let ExprKind::Call(name, args) = &x.kind {
            if name == func_name {
                for (a, p) in args.iter().zip(params) {
                    if let (VarType::Array(_), ExprKind::Var(n)) = (&p.ty, &a.kind) {
                        facts.weak_defs.insert(n.clone());
                    }
                }
            }
        }
    });
}

impl<'a> Builder<'a> {
    fn node(&mut self, kind: NodeKind, span: SourceSpan, text: &str, facts: NodeFacts, preds: &[usize]) -> usize {
        let id = self.cfg.nodes.len();
        self.cfg.nodes.push(NodeInfo {
            stmt_id: id,
            span,
            tokens: tokens_of(text),
            kind,
        });
        self.cfg.succ.push(Vec::new());
        self.cfg.facts.push(facts);
        if let Some(&c) = self.ctrl_stack.last() {
            self.cfg.ctrl.push((c, id));
        }
        if self.cfg.entry.is_none() {
            self.cfg.entry = Some(id);
        }
        for &p in preds {
            self.flow(p, id);
        }
        id
    }

    fn flow(&mut self, from: usize, to: usize) {
        if !self.cfg.succ[from].contains(&to) {
            self.cfg.succ[from].push(to);
        }
    }

    fn facts_of(&self, exprs: &[&Expr]) -> NodeFacts {
        let mut f = NodeFacts::default();
        for e in exprs {
            expr_facts(e, &self.func.name, &mut f, &self.func.params);
        }
        f
    }

    /// Builds the statements of a block; returns the first node created (if
    /// any) and the nodes that fall through to whatever follows.
    fn block(&mut self, b: &Block, preds: Vec<usize>) -> (Option<usize>, Vec<usize>) {
        let mut preds = preds;
        let mut first = None;
        let mut prev_rep: Option<usize> = None;
        for s in &b.stmts {
            let before = self.cfg.nodes.len();
            preds = self.stmt(s, preds);
            if self.cfg.nodes.len() > before {
                if let Some(p) = prev_rep {
                    self.cfg.next.push((p, before));
                }
                prev_rep = Some(before);
                first.get_or_insert(before);
            }
        }
        (first, preds)
    }

    fn stmt(&mut self, s: &Stmt, preds: Vec<usize>) -> Vec<usize> {
        match &s.kind {
            StmtKind::Decl { name, .. } => {
                let mut f = self.facts_of(&stmt_exprs(s));
                f.strong_defs.insert(name.clone());
                let n = self.node(NodeKind::Decl, s.span, &simple_to_string(s), f, &preds);
                vec![n]
            }
            StmtKind::Assign { target, .. } => {
                let mut f = self.facts_of(&stmt_exprs(s));
                match target {
                    LValue::Var(v) => f.strong_defs.insert(v.clone()),
                    LValue::Index(v, _) => f.weak_defs.insert(v.clone()),
                };
                let n = self.node(NodeKind::Assign, s.span, &simple_to_string(s), f, &preds);
                vec![n]
            }
            StmtKind::Expr(_) | StmtKind::Return(_) | StmtKind::Break => {
                let f = self.facts_of(&stmt_exprs(s));
                let kind = match s.kind {
                    StmtKind::Expr(_) => NodeKind::Expr,
                    StmtKind::Return(_) => NodeKind::Return,
                    _ => NodeKind::Break,
                };
                let n = self.node(kind, s.span, &simple_to_string(s), f, &preds);
                match kind {
                    NodeKind::Expr => vec![n],
                    NodeKind::Break => {
                        if let Some(top) = self.break_stack.last_mut() {
                            top.push(n);
                        }
                        Vec::new()
                    }
                    _ => Vec::new(),
                }
            }
            StmtKind::Block(b) => self.block(b, preds).1,
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let f = self.facts_of(&[cond]);
                let h = self.node(NodeKind::If, header_span(s, Some(cond)), &simple_to_string(s), f, &preds);
                self.ctrl_stack.push(h);
                let (_, mut out) = self.block(then_block, vec![h]);
                match else_block {
                    Some(e) => out.extend(self.block(e, vec![h]).1),
                    None => out.push(h),
                }
                self.ctrl_stack.pop();
                out
            }
            StmtKind::While { cond, body } => {
                let f = self.facts_of(&[cond]);
                let h = self.node(NodeKind::While, header_span(s, Some(cond)), &simple_to_string(s), f, &preds);
                self.ctrl_stack.push(h);
                self.break_stack.push(Vec::new());
                let (_, falls) = self.block(body, vec![h]);
                for p in falls {
                    self.flow(p, h);
                }
                let mut out = self.break_stack.pop().unwrap();
                self.ctrl_stack.pop();
                out.insert(0, h);
                out
            }
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                let mut preds = preds;
                let mut pieces = Vec::new();
                if let Some(i) = init {
                    let mut f = self.facts_of(&stmt_exprs(i));
                    match &i.kind {
                        StmtKind::Decl { name, .. } | StmtKind::Assign { target: LValue::Var(name), .. } => {
                            f.strong_defs.insert(name.clone());
                        }
                        StmtKind::Assign { target: LValue::Index(name, _), .. } => {
                            f.weak_defs.insert(name.clone());
                        }
                        _ => {}
                    }
                    let n = self.node(NodeKind::ForInit, i.span, &simple_to_string(i), f, &preds);
                    pieces.push(n);
                    preds = vec![n];
                }
                let f = self.facts_of(&cond.iter().collect::<Vec<_>>());
                let text = match cond {
                    Some(c) => format!("for (; {};)", expr_to_string(c)),
                    None => "for (;;)".to_string(),
                };
                let span = match (cond, init) {
                    (Some(c), _) if c.span != SourceSpan::default() => c.span,
                    (_, Some(i)) => SourceSpan::new(i.span.end_line, i.span.end_col, i.span.end_line, i.span.end_col),
                    _ => header_span(s, None),
                };
                let h = self.node(NodeKind::ForCond, span, &text, f, &preds);
                pieces.push(h);
                self.ctrl_stack.push(h);
                self.break_stack.push(Vec::new());
                let mut upd = None;
                if let Some(u) = update {
                    let mut f = self.facts_of(&stmt_exprs(u));
                    match &u.kind {
                        StmtKind::Assign { target: LValue::Var(name), .. } => {
                            f.strong_defs.insert(name.clone());
                        }
                        StmtKind::Assign { target: LValue::Index(name, _), .. } => {
                            f.weak_defs.insert(name.clone());
                        }
                        _ => {}
                    }
                    let n = self.node(NodeKind::ForUpdate, u.span, &simple_to_string(u), f, &[]);
                    pieces.push(n);
                    upd = Some(n);
                }
                let (_, falls) = self.block(body, vec![h]);
                let back = upd.unwrap_or(h);
                for p in falls {
                    self.flow(p, back);
                }
                if let Some(u) = upd {
                    self.flow(u, h);
                }
                let mut out = self.break_stack.pop().unwrap();
                self.ctrl_stack.pop();
                if cond.is_some() {
                    out.insert(0, h);
                }
                for w in pieces.windows(2) {
                    self.cfg.next.push((w[0], w[1]));
                }
                out
            }
            StmtKind::Switch {
                scrutinee,
                cases,
                default,
            } => {
                let f = self.facts_of(&[scrutinee]);
                let h = self.node(NodeKind::Switch, header_span(s, Some(scrutinee)), &simple_to_string(s), f, &preds);
                self.ctrl_stack.push(h);
                self.break_stack.push(Vec::new());
                let mut falls: Vec<usize> = Vec::new();
                for body in cases.iter().map(|c| &c.body).chain(default.iter()) {
                    let mut entry = vec![h];
                    entry.append(&mut falls);
                    falls = self.block(body, entry).1;
                }
                let mut out = self.break_stack.pop().unwrap();
                self.ctrl_stack.pop();
                out.extend(falls);
                if default.is_none() {
                    out.push(h);
                }
                out
            }
        }
    }
}

/// Statement nodes in source order with their control-flow successors.
///
/// `if`, `while` and `switch` contribute one header node; `for` contributes
/// its init (if any), a condition node, and its update (if any). A function
/// with an empty body gets a single placeholder node.
pub fn build_cfg(f: &Function) -> Cfg {
    let mut b = Builder {
        func: f,
        cfg: Cfg::default(),
        ctrl_stack: Vec::new(),
        break_stack: Vec::new(),
    };
    b.block(&f.body, Vec::new());
    if b.cfg.nodes.is_empty() {
        b.node(NodeKind::Empty, f.span, "", NodeFacts::default(), &[]);
    }
    b.cfg
}

/// `(def, use)` node pairs such that a definition at `def` reaches `use`
/// along some control-flow path and `use` reads the defined variable.
pub fn reaching_definitions(cfg: &Cfg) -> BTreeSet<(usize, usize)> {
    let n = cfg.len();
    // in/out sets of (variable, def node)
    let mut out_sets: Vec<BTreeSet<(String, usize)>> = vec![BTreeSet::new(); n];
    let mut preds = vec![Vec::new(); n];
    for (u, ss) in cfg.succ.iter().enumerate() {
        for &v in ss {
            preds[v].push(u);
        }
    }
    let in_set = |out_sets: &[BTreeSet<(String, usize)>], i: usize| -> BTreeSet<(String, usize)> {
        preds[i].iter().flat_map(|&p| out_sets[p].iter().cloned()).collect()
    };
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            let mut s = in_set(&out_sets, i);
            s.retain(|(v, _)| !cfg.strong_defs(i).contains(v));
            for v in cfg.strong_defs(i).iter().chain(cfg.weak_defs(i)) {
                s.insert((v.clone(), i));
            }
            if s != out_sets[i] {
                out_sets[i] = s;
                changed = true;
            }
        }
    }
    let mut pairs = BTreeSet::new();
    for i in 0..n {
        for (v, d) in in_set(&out_sets, i) {
            if cfg.uses(i).contains(&v) {
                pairs.insert((d, i));
            }
        }
    }
    pairs
}

/// `(condition, dependent)` pairs: each node depends on the innermost
/// enclosing `if`/`while`/`for`/`switch` condition.
pub fn control_dependence(cfg: &Cfg) -> Vec<(usize, usize)> {
    cfg.ctrl.clone()
}

/// Stable 64-bit FNV-1a.
pub fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Row-major `V × d` matrix of L2-normalized token-hash histograms.
pub fn encode_features(nodes: &[NodeInfo], d: usize) -> Vec<f64> {
    assert!(d >= 8, "feature dimension must be at least 8");
    let mut x = vec![0.0; nodes.len() * d];
    for (i, n) in nodes.iter().enumerate() {
        let row = &mut x[i * d..(i + 1) * d];
        for t in &n.tokens {
            row[(fnv1a64(t) % d as u64) as usize] += 1.0;
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    x
}

/// Builds the code graph of `f`. Node spans come from the AST, so ASTs
/// produced by transformations should be re-parsed first if line numbers
/// matter.
pub fn build_graph(f: &Function, label: Option<Label>, d: usize) -> CodeGraph {
    let cfg = build_cfg(f);
    let mut edges: BTreeSet<Edge> = BTreeSet::new();
    let mut add = |src: usize, dst: usize, etype: EdgeType| {
        if src != dst {
            edges.insert(Edge { src, dst, etype });
        }
    };
    for &(a, b) in &cfg.next {
        add(a, b, EdgeType::Next);
    }
    for (a, b) in control_dependence(&cfg) {
        add(a, b, EdgeType::Ctrl);
    }
    for (a, b) in reaching_definitions(&cfg) {
        add(a, b, EdgeType::Data);
    }
    let features = encode_features(&cfg.nodes, d);
    let mut edges: Vec<Edge> = edges.into_iter().collect();
    edges.sort_by_key(|e| (e.etype, e.src, e.dst));
    CodeGraph {
        nodes: cfg.nodes,
        edges,
        label,
        feature_dim: d,
        features,
    }
}

/// Edge multiset per type, keyed by `(src, dst)`, convenient for comparisons.
pub fn edge_sets(g: &CodeGraph) -> BTreeMap<EdgeType, BTreeSet<(usize, usize)>> {
    let mut m: BTreeMap<EdgeType, BTreeSet<(usize, usize)>> = BTreeMap::new();
    for t in EdgeType::ALL {
        m.insert(t, BTreeSet::new());
    }
    for e in &g.edges {
        m.get_mut(&e.etype).unwrap().insert((e.src, e.dst));
    }
    m
}
