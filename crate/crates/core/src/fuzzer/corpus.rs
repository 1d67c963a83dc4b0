use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{size_excluding_whitespace, ValidityMode};
use crate::sampler::{ChoiceSequence, SizeBounds};
use crate::targets::{BranchSet, ExecutionFeedback};

/// The fuzzer configuration that saved an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub bounds: SizeBounds,
    pub mode: ValidityMode,
}

impl Provenance {
    /// Directory name of the configuration, e.g. `m2n1d3u`.
    pub fn config_id(&self) -> String {
        let SizeBounds { m, n, d } = self.bounds;
        format!("m{m}n{n}d{d}{}", self.mode)
    }
}

/// Which clause of the interestingness criterion admitted an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clause {
    /// Valid, with coverage new relative to the valid members.
    Valid,
    /// Coverage new relative to all members.
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavedInput {
    pub text: String,
    pub choices: ChoiceSequence,
    pub feedback: ExecutionFeedback,
    /// Length of `text` without whitespace.
    pub size: usize,
    pub provenance: Provenance,
    /// Branches that were new when the input was admitted.
    pub novel: BranchSet,
    pub clause: Clause,
}

impl SavedInput {
    pub fn new(
        text: String,
        choices: ChoiceSequence,
        feedback: ExecutionFeedback,
        provenance: Provenance,
        novel: BranchSet,
        clause: Clause,
    ) -> Self {
        SavedInput { size: size_excluding_whitespace(&text), text, choices, feedback, provenance, novel, clause }
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    choices: ChoiceSequence,
    feedback: ExecutionFeedback,
    provenance: Provenance,
    size: usize,
    novel: BranchSet,
    clause: Clause,
}

/// An ordered, text-deduplicated set of saved inputs with their cumulative
/// coverage.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    inputs: Vec<SavedInput>,
    coverage: BranchSet,
    valid_coverage: BranchSet,
    texts: HashSet<String>,
    /// Target executions spent building this corpus.
    pub executions: u64,
    /// Set when the run producing this corpus aborted.
    pub failure: Option<String>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.inputs == other.inputs && self.executions == other.executions && self.failure == other.failure
    }
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn inputs(&self) -> &[SavedInput] {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn coverage(&self) -> &BranchSet {
        &self.coverage
    }

    pub fn valid_coverage(&self) -> &BranchSet {
        &self.valid_coverage
    }

    pub fn contains_text(&self, text: &str) -> bool {
        self.texts.contains(text)
    }

    /// Appends `input` unless its text is already present. Returns whether
    /// it was added.
    pub fn push(&mut self, input: SavedInput) -> bool {
        if !self.texts.insert(input.text.clone()) {
            return false;
        }
        self.coverage.union_with(&input.feedback.coverage);
        if input.feedback.valid {
            self.valid_coverage.union_with(&input.feedback.coverage);
        }
        self.inputs.push(input);
        true
    }

    /// Builds a corpus from members in order, dropping repeated texts.
    pub fn from_inputs(inputs: impl IntoIterator<Item = SavedInput>) -> Self {
        let mut c = Corpus::new();
        for i in inputs {
            c.push(i);
        }
        c
    }

    pub fn into_inputs(self) -> Vec<SavedInput> {
        self.inputs
    }

    /// Writes `input_<k>.txt` and `input_<k>.meta.json` for every member.
    pub fn save(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (k, input) in self.inputs.iter().enumerate() {
            fs::write(dir.join(format!("input_{k}.txt")), &input.text)?;
            let meta = Meta {
                choices: input.choices.clone(),
                feedback: input.feedback.clone(),
                provenance: input.provenance,
                size: input.size,
                novel: input.novel.clone(),
                clause: input.clause,
            };
            let json = serde_json::to_string_pretty(&meta).map_err(io::Error::other)?;
            fs::write(dir.join(format!("input_{k}.meta.json")), json)?;
        }
        Ok(())
    }

    /// Reads a directory written by [`Corpus::save`].
    pub fn load(dir: &Path) -> io::Result<Self> {
        let mut ks: Vec<usize> = fs::read_dir(dir)?
            .filter_map(|e| {
                let name = e.ok()?.file_name().into_string().ok()?;
                name.strip_prefix("input_")?.strip_suffix(".txt")?.parse().ok()
            })
            .collect();
        ks.sort_unstable();
        let mut corpus = Corpus::new();
        for k in ks {
            let text = fs::read_to_string(dir.join(format!("input_{k}.txt")))?;
            let meta: Meta = serde_json::from_str(&fs::read_to_string(dir.join(format!("input_{k}.meta.json")))?)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            corpus.push(SavedInput {
                text,
                choices: meta.choices,
                feedback: meta.feedback,
                size: meta.size,
                provenance: meta.provenance,
                novel: meta.novel,
                clause: meta.clause,
            });
        }
        Ok(corpus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(text: &str, valid: bool, cov: &[u32]) -> SavedInput {
        SavedInput::new(
            text.into(),
            ChoiceSequence::default(),
            ExecutionFeedback { valid, coverage: cov.iter().copied().collect(), note: String::new() },
            Provenance { bounds: SizeBounds { m: 1, n: 2, d: 3 }, mode: ValidityMode::Unrestricted },
            cov.iter().copied().collect(),
            Clause::Any,
        )
    }

    #[test]
    fn cumulative_sets_track_members() {
        let mut c = Corpus::new();
        assert!(c.push(input("a", false, &[1, 2])));
        assert!(c.push(input("b b", true, &[2, 3])));
        assert!(!c.push(input("a", true, &[9])));
        assert_eq!(c.len(), 2);
        assert_eq!(c.coverage(), &[1, 2, 3].into_iter().collect());
        assert_eq!(c.valid_coverage(), &[2, 3].into_iter().collect());
        assert_eq!(c.inputs()[1].size, 2);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = Corpus::from_inputs((0..12).map(|i| input(&format!("t{i}"), i % 2 == 0, &[i])));
        c.save(dir.path()).unwrap();
        assert!(dir.path().join("input_11.meta.json").exists());
        let back = Corpus::load(dir.path()).unwrap();
        assert_eq!(back.inputs(), c.inputs());
        assert_eq!(back.coverage(), c.coverage());
    }

    #[test]
    fn config_id_spelling() {
        let p = Provenance { bounds: SizeBounds { m: 2, n: 1, d: 3 }, mode: ValidityMode::Restricted };
        assert_eq!(p.config_id(), "m2n1d3r");
    }
}
