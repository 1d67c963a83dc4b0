use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::Grammar;

/// A complete derivation tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DerivationTree {
    Fixed(String),
    Ident {
        class: String,
        index: u32,
        text: String,
    },
    NonTerminal {
        name: String,
        alt: usize,
        children: Vec<DerivationTree>,
    },
    /// Each item holds one subtree per symbol of the repetition body.
    Repetition {
        items: Vec<Vec<DerivationTree>>,
    },
}

/// The three size measures of a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TreeSize {
    pub idents: u32,
    pub items: u32,
    pub depth: u32,
}

impl TreeSize {
    /// Componentwise `<=`.
    pub fn fits(&self, idents: u32, items: u32, depth: u32) -> bool {
        self.idents <= idents && self.items <= items && self.depth <= depth
    }
}

impl DerivationTree {
    /// Leaf texts, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            DerivationTree::Fixed(t) => out.push(t),
            DerivationTree::Ident { text, .. } => out.push(text),
            DerivationTree::NonTerminal { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
            DerivationTree::Repetition { items } => items.iter().flatten().for_each(|c| c.collect_leaves(out)),
        }
    }

    pub fn linearize(&self, grammar: &Grammar) -> String {
        grammar.join_leaves(self.leaves())
    }

    /// Measures `(idents, items, depth)`.
    ///
    /// `depth` is the largest number of expansions of any single
    /// nonterminal along one root-to-leaf path.
    pub fn measure(&self) -> TreeSize {
        let mut idents: HashMap<&str, BTreeSet<u32>> = HashMap::new();
        let mut items = 0u32;
        let mut counts: HashMap<&str, u32> = HashMap::new();
        let mut depth = 0u32;
        self.measure_rec(&mut idents, &mut items, &mut counts, &mut depth);
        TreeSize { idents: idents.values().map(|s| s.len() as u32).max().unwrap_or(0), items, depth }
    }

    fn measure_rec<'a>(
        &'a self,
        idents: &mut HashMap<&'a str, BTreeSet<u32>>,
        items: &mut u32,
        counts: &mut HashMap<&'a str, u32>,
        depth: &mut u32,
    ) {
        match self {
            DerivationTree::Fixed(_) => {}
            DerivationTree::Ident { class, index, .. } => {
                idents.entry(class).or_default().insert(*index);
            }
            DerivationTree::NonTerminal { name, children, .. } => {
                let c = counts.entry(name).or_insert(0);
                *c += 1;
                *depth = (*depth).max(*c);
                for child in children {
                    child.measure_rec(idents, items, counts, depth);
                }
                *counts.get_mut(name.as_str()).unwrap() -= 1;
            }
            DerivationTree::Repetition { items: reps } => {
                *items = (*items).max(reps.len() as u32);
                for child in reps.iter().flatten() {
                    child.measure_rec(idents, items, counts, depth);
                }
            }
        }
    }

    /// Number of distinct values used per identifier class.
    pub fn ident_usage(&self) -> BTreeMap<String, usize> {
        let mut sets: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
        fn walk(t: &DerivationTree, sets: &mut BTreeMap<String, BTreeSet<u32>>) {
            match t {
                DerivationTree::Ident { class, index, .. } => {
                    sets.entry(class.clone()).or_default().insert(*index);
                }
                DerivationTree::NonTerminal { children, .. } => children.iter().for_each(|c| walk(c, sets)),
                DerivationTree::Repetition { items } => items.iter().flatten().for_each(|c| walk(c, sets)),
                DerivationTree::Fixed(_) => {}
            }
        }
        walk(self, &mut sets);
        sets.into_iter().map(|(k, v)| (k, v.len())).collect()
    }

    /// Node at `path`, where each step indexes into the children (for
    /// repetitions: the flattened item list).
    pub fn at(&self, path: &[usize]) -> Option<&DerivationTree> {
        let Some((&first, rest)) = path.split_first() else {
            return Some(self);
        };
        match self {
            DerivationTree::NonTerminal { children, .. } => children.get(first)?.at(rest),
            DerivationTree::Repetition { items } => {
                let width = items.first().map_or(1, Vec::len).max(1);
                items.get(first / width)?.get(first % width)?.at(rest)
            }
            _ => None,
        }
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut DerivationTree> {
        let Some((&first, rest)) = path.split_first() else {
            return Some(self);
        };
        match self {
            DerivationTree::NonTerminal { children, .. } => children.get_mut(first)?.at_mut(rest),
            DerivationTree::Repetition { items } => {
                let width = items.first().map_or(1, Vec::len).max(1);
                items.get_mut(first / width)?.get_mut(first % width)?.at_mut(rest)
            }
            _ => None,
        }
    }

    /// Paths of every node in preorder.
    pub fn preorder_paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.paths_rec(&mut path, &mut out);
        out
    }

    fn paths_rec(&self, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(path.clone());
        let children: Vec<&DerivationTree> = match self {
            DerivationTree::NonTerminal { children, .. } => children.iter().collect(),
            DerivationTree::Repetition { items } => items.iter().flatten().collect(),
            _ => Vec::new(),
        };
        for (i, child) in children.into_iter().enumerate() {
            path.push(i);
            child.paths_rec(path, out);
            path.pop();
        }
    }
}
