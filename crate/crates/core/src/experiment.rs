//! Bonsai against fuzz-then-reduce at an equal execution budget.

use serde::{Deserialize, Serialize};

use crate::fuzzer::{cbgf_run, random_seed, Corpus, FuzzerConfig, ValidityMode};
use crate::lattice::{bonsai_run, LatticeSpec, NodeTemplate};
use crate::metrics::{compare, stats, Comparison, CorpusStats, MeanStd};
use crate::reducer::{reduce_corpus, Criterion, ReduceMode};
use crate::sampler::SizeBounds;
use crate::targets::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub top: SizeBounds,
    /// Executions for the whole lattice, split equally across nodes.
    pub budget_total: u64,
    pub reps: u32,
    pub seed: u64,
    pub extended: bool,
    /// Node mode when the lattice is plain.
    pub plain_mode: ValidityMode,
    pub jobs: usize,
    pub fanout: u32,
    pub criterion: Criterion,
}

impl CompareConfig {
    pub fn new(top: SizeBounds, budget_total: u64, reps: u32, seed: u64) -> Self {
        CompareConfig {
            top,
            budget_total,
            reps,
            seed,
            extended: true,
            plain_mode: ValidityMode::Unrestricted,
            jobs: 1,
            fanout: crate::fuzzer::DEFAULT_FANOUT,
            criterion: Criterion::Novel,
        }
    }

    pub fn spec(&self) -> LatticeSpec {
        LatticeSpec::new(self.top, self.extended)
    }

    pub fn node_budget(&self) -> u64 {
        (self.budget_total / self.spec().nodes().len() as u64).max(1)
    }

    /// The global seed for repetition `rep`.
    pub fn rep_seed(&self, rep: u32) -> u64 {
        self.seed.wrapping_add(u64::from(rep).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub rep: u32,
    pub seed: u64,
    pub bonsai: CorpusStats,
    pub baseline: CorpusStats,
    pub baseline_unreduced: CorpusStats,
    /// Bonsai measured against the reduced baseline.
    pub comparison: Comparison,
    pub bonsai_executions: u64,
    pub baseline_executions: u64,
    pub failures: Vec<String>,
}

pub struct RepCorpora {
    pub bonsai: Corpus,
    pub baseline: Corpus,
    pub baseline_reduced: Corpus,
}

/// Runs one repetition. The baseline is a single unrestricted fuzzer at
/// the top bounds given as many executions as the lattice used, followed
/// by hierarchical reduction of its corpus.
pub fn run_rep(target: &dyn Target, cfg: &CompareConfig, rep: u32) -> (RepResult, RepCorpora) {
    let grammar = target.grammar();
    let seed = cfg.rep_seed(rep);
    let mut template = NodeTemplate::new(cfg.node_budget(), seed);
    template.fanout = cfg.fanout;
    template.mode = cfg.plain_mode;
    let run = bonsai_run(target, grammar, cfg.spec(), template, cfg.jobs);
    let bonsai_executions = run.total_executions();
    let mut failures: Vec<String> = run.failures().into_iter().map(|(n, f)| format!("bonsai {n}: {f}")).collect();
    let bonsai = run.final_corpus().clone();

    let mut base_cfg = FuzzerConfig::new(cfg.top, ValidityMode::Unrestricted, bonsai_executions, seed ^ 0xBA5E);
    base_cfg.fanout = cfg.fanout;
    let baseline = match random_seed(target, grammar, &base_cfg, seed ^ 0x5EED) {
        Ok(s) => cbgf_run(target, grammar, &base_cfg, &[s]),
        Err(e) => {
            let mut c = Corpus::new();
            c.failure = Some(e.to_string());
            c
        }
    };
    if let Some(f) = &baseline.failure {
        failures.push(format!("baseline: {f}"));
    }
    let (baseline_reduced, report) = reduce_corpus(&baseline, target, ReduceMode::Hier, cfg.criterion);
    failures.extend(
        report.members.iter().filter_map(|m| m.error.as_ref().map(|e| format!("reduce member {}: {e}", m.index))),
    );

    let bonsai_stats = stats(&bonsai, target);
    let baseline_stats = stats(&baseline_reduced, target);
    let result = RepResult {
        rep,
        seed,
        comparison: compare(&bonsai_stats, &baseline_stats),
        bonsai: bonsai_stats,
        baseline: baseline_stats,
        baseline_unreduced: stats(&baseline, target),
        bonsai_executions,
        baseline_executions: baseline.executions,
        failures,
    };
    (result, RepCorpora { bonsai, baseline, baseline_reduced })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub bonsai_files: MeanStd,
    pub baseline_files: MeanStd,
    pub bonsai_mean_size: MeanStd,
    pub baseline_mean_size: MeanStd,
    pub bonsai_validity: MeanStd,
    pub baseline_validity: MeanStd,
    pub bonsai_coverage: MeanStd,
    pub baseline_coverage: MeanStd,
    pub mean_size_reduction: MeanStd,
    pub coverage_delta: MeanStd,
    pub validity_delta: MeanStd,
    pub files_delta: MeanStd,
}

pub fn summarize(reps: &[RepResult]) -> CompareSummary {
    let ms = |f: &dyn Fn(&RepResult) -> f64| MeanStd::of(&reps.iter().map(f).collect::<Vec<_>>());
    CompareSummary {
        bonsai_files: ms(&|r| r.bonsai.files as f64),
        baseline_files: ms(&|r| r.baseline.files as f64),
        bonsai_mean_size: ms(&|r| r.bonsai.sizes.mean),
        baseline_mean_size: ms(&|r| r.baseline.sizes.mean),
        bonsai_validity: ms(&|r| r.bonsai.validity),
        baseline_validity: ms(&|r| r.baseline.validity),
        bonsai_coverage: ms(&|r| r.bonsai.coverage.primary() as f64),
        baseline_coverage: ms(&|r| r.baseline.coverage.primary() as f64),
        mean_size_reduction: ms(&|r| r.comparison.mean_size_reduction),
        coverage_delta: ms(&|r| r.comparison.coverage_delta),
        validity_delta: ms(&|r| r.comparison.validity_delta),
        files_delta: ms(&|r| r.comparison.files_delta),
    }
}

impl CompareSummary {
    pub fn table(&self) -> String {
        let rows = [
            ("files", self.bonsai_files, self.baseline_files, self.files_delta),
            ("mean size", self.bonsai_mean_size, self.baseline_mean_size, self.mean_size_reduction),
            ("validity", self.bonsai_validity, self.baseline_validity, self.validity_delta),
            ("semantic coverage", self.bonsai_coverage, self.baseline_coverage, self.coverage_delta),
        ];
        let mut out = format!("{:<18} {:>20} {:>20} {:>20}\n", "metric", "bonsai", "fuzz+reduce", "relative delta");
        for (name, a, b, d) in rows {
            out.push_str(&format!("{name:<18} {:>20} {:>20} {:>20}\n", a.to_string(), b.to_string(), d.to_string()));
        }
        out.push_str("mean size delta is the reduction (baseline - bonsai) / baseline\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::Arith;

    #[test]
    fn budgets_are_equal() {
        let t = Arith::new();
        let cfg = CompareConfig::new(SizeBounds::new(2, 2, 1).unwrap(), 4000, 1, 3);
        assert_eq!(cfg.node_budget(), 500);
        let (r, corpora) = run_rep(&t, &cfg, 0);
        assert_eq!(r.baseline_executions, r.bonsai_executions);
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert_eq!(corpora.baseline.len(), corpora.baseline_reduced.len());
        let s = summarize(&[r.clone(), r]);
        assert_eq!(s.bonsai_files.stdev, 0.0);
        assert!(s.table().contains("±"));
    }
}
