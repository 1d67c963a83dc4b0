//! Corpus quality measures: file count, whitespace-excluded sizes,
//! validity fraction and branch coverage, all recomputed by executing
//! every member.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fuzzer::{size_excluding_whitespace, Corpus};
use crate::targets::{BranchSet, Target};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub min: usize,
    pub median: f64,
    pub mean: f64,
    pub max: usize,
    /// Size to number of files of that size.
    pub histogram: BTreeMap<usize, usize>,
}

impl SizeSummary {
    pub fn of(sizes: &[usize]) -> Self {
        let mut sorted = sizes.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let median = match n {
            0 => 0.0,
            _ if n % 2 == 1 => sorted[n / 2] as f64,
            _ => (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0,
        };
        let mut histogram = BTreeMap::new();
        for &s in &sorted {
            *histogram.entry(s).or_insert(0) += 1;
        }
        SizeSummary {
            min: sorted.first().copied().unwrap_or(0),
            median,
            mean: if n == 0 { 0.0 } else { sorted.iter().sum::<usize>() as f64 / n as f64 },
            max: sorted.last().copied().unwrap_or(0),
            histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub covered: usize,
    pub total: usize,
    /// Coverage restricted to the target's semantic-analysis branches.
    pub semantic: Option<(usize, usize)>,
}

impl CoverageStats {
    /// Semantic coverage when the target reports it, overall otherwise.
    pub fn primary(&self) -> usize {
        self.semantic.map_or(self.covered, |(c, _)| c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub files: usize,
    pub sizes: SizeSummary,
    pub validity: f64,
    pub coverage: CoverageStats,
    pub executions: u64,
}

/// One CSV row per member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRow {
    pub index: usize,
    pub size: usize,
    pub valid: bool,
    pub branches: usize,
    pub provenance: String,
}

/// Statistics of `corpus` and its per-member rows, from fresh executions.
pub fn stats_with_rows(corpus: &Corpus, target: &dyn Target) -> (CorpusStats, Vec<MemberRow>) {
    let feedback: Vec<_> = corpus.inputs().par_iter().map(|s| target.execute(&s.text)).collect();
    let mut coverage = BranchSet::new();
    for fb in &feedback {
        coverage.union_with(&fb.coverage);
    }
    let sizes: Vec<usize> = corpus.inputs().iter().map(|s| size_excluding_whitespace(&s.text)).collect();
    let valid = feedback.iter().filter(|fb| fb.valid).count();
    let semantic = target.semantic_branches().map(|r| (coverage.count_in(r.clone()), r.len()));
    let stats = CorpusStats {
        files: corpus.len(),
        sizes: SizeSummary::of(&sizes),
        validity: if feedback.is_empty() { 0.0 } else { valid as f64 / feedback.len() as f64 },
        coverage: CoverageStats { covered: coverage.len(), total: target.total_branches() as usize, semantic },
        executions: corpus.executions,
    };
    let rows = corpus
        .inputs()
        .iter()
        .zip(&feedback)
        .enumerate()
        .map(|(index, (s, fb))| MemberRow {
            index,
            size: sizes[index],
            valid: fb.valid,
            branches: fb.coverage.len(),
            provenance: s.provenance.config_id(),
        })
        .collect();
    (stats, rows)
}

pub fn stats(corpus: &Corpus, target: &dyn Target) -> CorpusStats {
    stats_with_rows(corpus, target).0
}

pub fn rows_csv(rows: &[MemberRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

/// `(b - a) / b`, or 0 when `b` is 0.
fn relative(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        (b - a) / b
    }
}

/// Corpus `a` measured against corpus `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `(mean_b - mean_a) / mean_b`: positive when `a` has smaller files.
    pub mean_size_reduction: f64,
    /// `(cov_a - cov_b) / cov_b` on the primary coverage measure.
    pub coverage_delta: f64,
    /// `validity_a - validity_b`.
    pub validity_delta: f64,
    /// `(files_a - files_b) / files_b`.
    pub files_delta: f64,
    pub mean_size_diff: f64,
    pub coverage_diff: i64,
    pub files_diff: i64,
}

pub fn compare(a: &CorpusStats, b: &CorpusStats) -> Comparison {
    let (ca, cb) = (a.coverage.primary() as f64, b.coverage.primary() as f64);
    let (fa, fb) = (a.files as f64, b.files as f64);
    Comparison {
        mean_size_reduction: relative(a.sizes.mean, b.sizes.mean),
        coverage_delta: -relative(ca, cb),
        validity_delta: a.validity - b.validity,
        files_delta: -relative(fa, fb),
        mean_size_diff: a.sizes.mean - b.sizes.mean,
        coverage_diff: a.coverage.primary() as i64 - b.coverage.primary() as i64,
        files_diff: a.files as i64 - b.files as i64,
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub stdev: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanStd { mean: 0.0, stdev: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let var =
            if values.len() < 2 { 0.0 } else { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) };
        MeanStd { mean, stdev: var.sqrt() }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.stdev)
    }
}

/// A two-column text table of `a` against `b`.
pub fn comparison_table(a_name: &str, a: &CorpusStats, b_name: &str, b: &CorpusStats) -> String {
    let c = compare(a, b);
    let mut out = String::new();
    let _ = writeln!(out, "{:<22} {:>12} {:>12} {:>10}", "metric", a_name, b_name, "delta");
    let mut row = |name: &str, x: String, y: String, d: String| {
        let _ = writeln!(out, "{name:<22} {x:>12} {y:>12} {d:>10}");
    };
    row("files", a.files.to_string(), b.files.to_string(), format!("{:+.1}%", c.files_delta * 100.0));
    row(
        "mean size",
        format!("{:.2}", a.sizes.mean),
        format!("{:.2}", b.sizes.mean),
        format!("{:.1}% smaller", c.mean_size_reduction * 100.0),
    );
    row("median size", format!("{:.1}", a.sizes.median), format!("{:.1}", b.sizes.median), String::new());
    row("validity", format!("{:.3}", a.validity), format!("{:.3}", b.validity), format!("{:+.3}", c.validity_delta));
    row(
        "coverage",
        format!("{}/{}", a.coverage.covered, a.coverage.total),
        format!("{}/{}", b.coverage.covered, b.coverage.total),
        String::new(),
    );
    if let (Some((sa, ta)), Some((sb, tb))) = (a.coverage.semantic, b.coverage.semantic) {
        row(
            "semantic coverage",
            format!("{sa}/{ta}"),
            format!("{sb}/{tb}"),
            format!("{:+.1}%", c.coverage_delta * 100.0),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzer::{Clause, Provenance, SavedInput, ValidityMode};
    use crate::sampler::{ChoiceSequence, SizeBounds};
    use crate::targets::MiniLang;

    fn corpus_of(t: &MiniLang, texts: &[&str]) -> Corpus {
        Corpus::from_inputs(texts.iter().map(|s| {
            let fb = t.execute(s);
            SavedInput::new(
                (*s).into(),
                ChoiceSequence::default(),
                fb.clone(),
                Provenance { bounds: SizeBounds { m: 1, n: 1, d: 1 }, mode: ValidityMode::Unrestricted },
                fb.coverage,
                Clause::Any,
            )
        }))
    }

    #[test]
    fn empty_corpus() {
        let s = stats(&Corpus::new(), &MiniLang::new());
        assert_eq!(s.files, 0);
        assert_eq!(s.coverage.covered, 0);
        assert_eq!(s.validity, 0.0);
    }

    #[test]
    fn single_pass_has_size_four() {
        let t = MiniLang::new();
        let s = stats(&corpus_of(&t, &["pass"]), &t);
        assert_eq!(s.sizes.mean, 4.0);
        assert_eq!(s.validity, 1.0);
    }

    #[test]
    fn coverage_is_union_of_members() {
        let t = MiniLang::new();
        let texts = ["pass", "a0 = 1", "if true { pass } else { pass }"];
        let s = stats(&corpus_of(&t, &texts), &t);
        let mut u = BranchSet::new();
        for x in texts {
            u.union_with(&t.execute(x).coverage);
        }
        assert_eq!(s.coverage.covered, u.len());
        assert!((s.validity - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.sizes.median, 4.0);
    }

    #[test]
    fn compare_formulas() {
        let t = MiniLang::new();
        let x = stats(&corpus_of(&t, &["pass", "a0 = 1"]), &t);
        let c = compare(&x, &x);
        assert_eq!(c.mean_size_reduction, 0.0);
        assert_eq!(c.coverage_delta, 0.0);
        assert_eq!(c.validity_delta, 0.0);
        assert_eq!(c.files_delta, 0.0);

        let mut a = x.clone();
        let mut b = x.clone();
        a.sizes.mean = 57.78;
        b.sizes.mean = 100.0;
        assert!((compare(&a, &b).mean_size_reduction - 0.4222).abs() < 1e-9);

        b.files = 10;
        b.validity = 0.25;
        let ab = compare(&a, &b);
        let ba = compare(&b, &a);
        assert_eq!(ab.files_diff, -ba.files_diff);
        assert_eq!(ab.coverage_diff, -ba.coverage_diff);
        assert_eq!(ab.mean_size_diff, -ba.mean_size_diff);
        assert_eq!(ab.validity_delta, -ba.validity_delta);
    }

    #[test]
    fn mean_std_and_csv() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.stdev - 1.0).abs() < 1e-12);
        let t = MiniLang::new();
        let (_, rows) = stats_with_rows(&corpus_of(&t, &["pass"]), &t);
        assert_eq!(rows_csv(&rows), "index,size,valid,branches,provenance\n0,4,true,6,m1n1d1u\n");
    }
}
