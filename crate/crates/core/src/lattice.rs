//! The lattice of fuzzer configurations and the smallest-first schedule
//! that feeds each node the corpora of its predecessors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fuzzer::{self, cbgf_run, Corpus, FuzzerConfig, Provenance, SavedInput, ValidityMode};
use crate::grammar::Grammar;
use crate::sampler::SizeBounds;
use crate::targets::Target;

/// A lattice node: size bounds plus, in the extended lattice, a validity
/// mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub bounds: SizeBounds,
    pub mode: Option<ValidityMode>,
}

impl NodeId {
    pub fn plain(m: u32, n: u32, d: u32) -> Self {
        NodeId { bounds: SizeBounds { m, n, d }, mode: None }
    }

    pub fn extended(m: u32, n: u32, d: u32, mode: ValidityMode) -> Self {
        NodeId { bounds: SizeBounds { m, n, d }, mode: Some(mode) }
    }

    /// Rank in the graded lattice; the bottom node has level 0.
    pub fn level(&self) -> u32 {
        let SizeBounds { m, n, d } = self.bounds;
        m + n + d - 3 + u32::from(self.mode == Some(ValidityMode::Unrestricted))
    }

    fn key(&self) -> (u32, SizeBounds, Option<ValidityMode>) {
        (self.level(), self.bounds, self.mode)
    }

    /// Mixes the node into `global` to give a schedule-independent seed.
    pub fn seed(&self, global: u64) -> u64 {
        let SizeBounds { m, n, d } = self.bounds;
        let v: u64 = match self.mode {
            None => 0,
            Some(ValidityMode::Restricted) => 1,
            Some(ValidityMode::Unrestricted) => 2,
        };
        let code = (u64::from(m) << 42) | (u64::from(n) << 22) | (u64::from(d) << 2) | v;
        splitmix64(global ^ splitmix64(code))
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A total order refining the lattice order: by level, then bounds, then
/// mode.
impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let SizeBounds { m, n, d } = self.bounds;
        write!(f, "m{m}n{n}d{d}")?;
        match self.mode {
            Some(v) => write!(f, "{v}"),
            None => Ok(()),
        }
    }
}

/// Lattice order. Bounds compare componentwise; in the extended lattice a
/// restricted node also lies below the unrestricted node of equal or
/// larger bounds.
pub fn leq(a: &NodeId, b: &NodeId) -> bool {
    let (x, y) = (a.bounds, b.bounds);
    let bounds = x.m <= y.m && x.n <= y.n && x.d <= y.d;
    let mode = match (a.mode, b.mode) {
        (None, None) => true,
        (Some(v), Some(w)) => v == w || w == ValidityMode::Unrestricted,
        _ => false,
    };
    bounds && mode
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub top: SizeBounds,
    pub extended: bool,
}

impl LatticeSpec {
    pub fn new(top: SizeBounds, extended: bool) -> Self {
        LatticeSpec { top, extended }
    }

    fn modes(&self) -> Vec<Option<ValidityMode>> {
        if self.extended {
            vec![Some(ValidityMode::Restricted), Some(ValidityMode::Unrestricted)]
        } else {
            vec![None]
        }
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        let SizeBounds { m, n, d } = node.bounds;
        let t = self.top;
        (1..=t.m).contains(&m)
            && (1..=t.n).contains(&n)
            && (1..=t.d).contains(&d)
            && node.mode.is_some() == self.extended
    }

    /// Every node, sorted by level.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        for m in 1..=self.top.m {
            for n in 1..=self.top.n {
                for d in 1..=self.top.d {
                    for &mode in &self.modes() {
                        out.push(NodeId { bounds: SizeBounds { m, n, d }, mode });
                    }
                }
            }
        }
        out.sort();
        out
    }

    pub fn bottom(&self) -> NodeId {
        NodeId { bounds: SizeBounds { m: 1, n: 1, d: 1 }, mode: self.extended.then_some(ValidityMode::Restricted) }
    }

    pub fn top_node(&self) -> NodeId {
        NodeId { bounds: self.top, mode: self.extended.then_some(ValidityMode::Unrestricted) }
    }

    /// The nodes covering `a`, sorted.
    pub fn successors(&self, a: &NodeId) -> Vec<NodeId> {
        let SizeBounds { m, n, d } = a.bounds;
        let mut out: Vec<NodeId> = [(m + 1, n, d), (m, n + 1, d), (m, n, d + 1)]
            .into_iter()
            .map(|(m, n, d)| NodeId { bounds: SizeBounds { m, n, d }, mode: a.mode })
            .collect();
        if a.mode == Some(ValidityMode::Restricted) {
            out.push(NodeId { bounds: a.bounds, mode: Some(ValidityMode::Unrestricted) });
        }
        out.retain(|x| self.contains(x));
        out.sort();
        out
    }

    /// The nodes covered by `a`, sorted.
    pub fn predecessors(&self, a: &NodeId) -> Vec<NodeId> {
        let SizeBounds { m, n, d } = a.bounds;
        let mut out: Vec<NodeId> = [(m - 1, n, d), (m, n - 1, d), (m, n, d - 1)]
            .into_iter()
            .map(|(m, n, d)| NodeId { bounds: SizeBounds { m, n, d }, mode: a.mode })
            .collect();
        if a.mode == Some(ValidityMode::Unrestricted) {
            out.push(NodeId { bounds: a.bounds, mode: Some(ValidityMode::Restricted) });
        }
        out.retain(|x| self.contains(x));
        out.sort();
        out
    }

    /// Nodes grouped by level. Every predecessor of a node lies in an
    /// earlier group, so the groups can run one after another with the
    /// members of a group running concurrently.
    pub fn levels(&self) -> Vec<Vec<NodeId>> {
        let mut levels: Vec<Vec<NodeId>> = Vec::new();
        for node in self.nodes() {
            let l = node.level() as usize;
            if levels.len() <= l {
                levels.resize(l + 1, Vec::new());
            }
            levels[l].push(node);
        }
        levels
    }

    /// The execution order.
    pub fn schedule(&self) -> Vec<NodeId> {
        self.levels().into_iter().flatten().collect()
    }
}

/// Merges predecessor corpora into one seed list: texts deduplicated
/// keeping the member from the lowest configuration, then sorted by
/// whitespace-excluded size with ties broken by text.
pub fn gather_seeds<'a>(corpora: impl IntoIterator<Item = &'a Corpus>) -> Vec<SavedInput> {
    let rank = |p: &Provenance| {
        let node = NodeId { bounds: p.bounds, mode: Some(p.mode) };
        (node.level(), p.bounds, p.mode)
    };
    let mut by_text: HashMap<&str, &SavedInput> = HashMap::new();
    for corpus in corpora {
        for input in corpus.inputs() {
            by_text
                .entry(&input.text)
                .and_modify(|kept| {
                    if rank(&input.provenance) < rank(&kept.provenance) {
                        *kept = input;
                    }
                })
                .or_insert(input);
        }
    }
    let mut seeds: Vec<SavedInput> = by_text.into_values().cloned().collect();
    seeds.sort_by(|a, b| (a.size, &a.text).cmp(&(b.size, &b.text)));
    seeds
}

/// Settings shared by all nodes of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTemplate {
    /// Executions per node.
    pub budget: u64,
    /// Mode for plain-lattice nodes; ignored in the extended lattice.
    pub mode: ValidityMode,
    pub fanout: u32,
    pub stop_on_stagnation: Option<u64>,
    pub seed: u64,
}

impl NodeTemplate {
    pub fn new(budget: u64, seed: u64) -> Self {
        NodeTemplate {
            budget,
            mode: ValidityMode::Restricted,
            fanout: fuzzer::DEFAULT_FANOUT,
            stop_on_stagnation: None,
            seed,
        }
    }

    pub fn config(&self, node: &NodeId) -> FuzzerConfig {
        FuzzerConfig {
            bounds: node.bounds,
            mode: node.mode.unwrap_or(self.mode),
            budget: self.budget,
            seed: node.seed(self.seed),
            fanout: self.fanout,
            stop_on_stagnation: self.stop_on_stagnation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeReport {
    pub node: String,
    pub level: u32,
    pub seed: u64,
    pub budget: u64,
    pub seeds_in: usize,
    pub corpus_out: usize,
    pub executions: u64,
    pub coverage: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BonsaiRun {
    pub spec: LatticeSpec,
    pub template: NodeTemplate,
    /// Nodes in execution order with their reports.
    pub reports: Vec<(NodeId, NodeReport)>,
    pub corpora: BTreeMap<NodeId, Corpus>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    spec: &'a LatticeSpec,
    template: &'a NodeTemplate,
    top: String,
    total_executions: u64,
    nodes: Vec<&'a NodeReport>,
}

impl BonsaiRun {
    pub fn final_corpus(&self) -> &Corpus {
        &self.corpora[&self.spec.top_node()]
    }

    pub fn total_executions(&self) -> u64 {
        self.reports.iter().map(|(_, r)| r.executions).sum()
    }

    pub fn failures(&self) -> Vec<(NodeId, &str)> {
        self.reports.iter().filter_map(|(n, r)| r.failure.as_deref().map(|f| (*n, f))).collect()
    }

    pub fn manifest_json(&self) -> String {
        let m = Manifest {
            spec: &self.spec,
            template: &self.template,
            top: self.spec.top_node().to_string(),
            total_executions: self.total_executions(),
            nodes: self.reports.iter().map(|(_, r)| r).collect(),
        };
        serde_json::to_string_pretty(&m).expect("manifest serializes")
    }

    /// Writes `corpus/<config-id>/` per node, `final/` and `lattice.json`.
    pub fn save(&self, out: &Path) -> io::Result<()> {
        for (node, corpus) in &self.corpora {
            corpus.save(&out.join("corpus").join(node.to_string()))?;
        }
        self.final_corpus().save(&out.join("final"))?;
        std::fs::write(out.join("lattice.json"), self.manifest_json())
    }
}

/// Runs every node of `spec` once, smallest first, with up to `jobs`
/// nodes of a level in flight.
pub fn bonsai_run(
    target: &dyn Target,
    grammar: &Grammar,
    spec: LatticeSpec,
    template: NodeTemplate,
    jobs: usize,
) -> BonsaiRun {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    let mut corpora: BTreeMap<NodeId, Corpus> = BTreeMap::new();
    let mut reports = Vec::new();
    let bottom = spec.bottom();
    for level in spec.levels() {
        let results: Vec<(NodeId, Corpus, usize)> = pool.install(|| {
            level
                .par_iter()
                .map(|node| {
                    let cfg = template.config(node);
                    let seeds = if *node == bottom {
                        match fuzzer::random_seed(target, grammar, &cfg, splitmix64(cfg.seed)) {
                            Ok(s) => vec![s],
                            Err(e) => {
                                let mut corpus = Corpus::new();
                                corpus.failure = Some(format!("random seed: {e}"));
                                return (*node, corpus, 0);
                            }
                        }
                    } else {
                        gather_seeds(spec.predecessors(node).iter().map(|p| &corpora[p]))
                    };
                    let corpus = cbgf_run(target, grammar, &cfg, &seeds);
                    (*node, corpus, seeds.len())
                })
                .collect()
        });
        for (node, corpus, seeds_in) in results {
            let cfg = template.config(&node);
            reports.push((
                node,
                NodeReport {
                    node: node.to_string(),
                    level: node.level(),
                    seed: cfg.seed,
                    budget: cfg.budget,
                    seeds_in,
                    corpus_out: corpus.len(),
                    executions: corpus.executions,
                    coverage: corpus.coverage().len(),
                    failure: corpus.failure.clone(),
                },
            ));
            corpora.insert(node, corpus);
        }
    }
    BonsaiRun { spec, template, reports, corpora }
}
