//! Feature allocations, their sufficient statistics, and set partitions.
//!
//! A [`FeatureAllocation`] is always stored in left-ordered form: feature
//! columns sorted by their membership pattern read as a binary number with the
//! first customer as the most significant bit. Earlier first appearance
//! therefore means a smaller id, and two allocations that differ only by a
//! relabelling of features compare equal.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FeatureAllocation {
    customers: Vec<Vec<usize>>,
    k: usize,
}

/// A non-fatal normalization applied while reading input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub line: Option<usize>,
    pub message: String,
}

/// Left-ordered comparison of two features given the sorted customers that hold them.
fn pattern_order(a: &[usize], b: &[usize]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            // the feature owned by the earlier customer comes first
            return x.cmp(y);
        }
    }
    // a strict prefix has a zero where the other has a one
    b.len().cmp(&a.len())
}

impl FeatureAllocation {
    pub fn empty() -> Self {
        FeatureAllocation::default()
    }

    /// `n` customers holding no features.
    pub fn with_empty_customers(n: usize) -> Self {
        FeatureAllocation {
            customers: vec![Vec::new(); n],
            k: 0,
        }
    }

    /// Builds an allocation from arbitrary feature labels, relabelling them to
    /// left-ordered ids. Returns whether any relabelling took place.
    pub fn from_labels(raw: &[Vec<u64>]) -> Result<(Self, bool)> {
        let mut holders: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
        for (j, set) in raw.iter().enumerate() {
            let mut seen = set.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Parse {
                    line: Some(j + 1),
                    message: "a customer lists the same feature twice".into(),
                });
            }
            for id in seen {
                holders.entry(id).or_default().push(j);
            }
        }
        let mut columns: Vec<(u64, Vec<usize>)> = holders.into_iter().collect();
        columns.sort_by(|a, b| pattern_order(&a.1, &b.1).then(a.0.cmp(&b.0)));
        let relabelled = columns.iter().enumerate().any(|(i, (label, _))| *label != i as u64)
            || raw.iter().any(|set| set.windows(2).any(|w| w[0] > w[1]));
        Ok((Self::from_sorted_columns(raw.len(), columns.into_iter().map(|c| c.1)), relabelled))
    }

    /// Builds from per-feature lists of holders. Every column must be
    /// non-empty with holders below `n`.
    pub fn from_columns(n: usize, columns: Vec<Vec<usize>>) -> Result<Self> {
        let mut cols = Vec::with_capacity(columns.len());
        for (i, mut c) in columns.into_iter().enumerate() {
            c.sort_unstable();
            c.dedup();
            if c.is_empty() || c[c.len() - 1] >= n {
                return Err(Error::domain(format!("column {i} must hold customers in 0..{n}")));
            }
            cols.push(c);
        }
        Ok(Self::from_sorted_columns(n, cols))
    }

    /// Builds from per-feature holder lists (each sorted), canonicalizing order.
    fn from_sorted_columns<I: IntoIterator<Item = Vec<usize>>>(n: usize, columns: I) -> Self {
        let mut cols: Vec<Vec<usize>> = columns.into_iter().collect();
        cols.sort_by(|a, b| pattern_order(a, b));
        let mut customers = vec![Vec::new(); n];
        for (id, holders) in cols.iter().enumerate() {
            for &j in holders {
                customers[j].push(id);
            }
        }
        FeatureAllocation { customers, k: cols.len() }
    }

    /// Number of customers.
    pub fn n(&self) -> usize {
        self.customers.len()
    }

    /// Number of distinct features.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn customers(&self) -> &[Vec<usize>] {
        &self.customers
    }

    /// Sorted customers holding each feature.
    pub fn columns(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.k];
        for (j, set) in self.customers.iter().enumerate() {
            for &id in set {
                cols[id].push(j);
            }
        }
        cols
    }

    pub fn suff_stats(&self) -> SuffStats {
        let mut m = vec![0; self.k];
        for set in &self.customers {
            for &id in set {
                m[id] += 1;
            }
        }
        SuffStats { n: self.n(), m }
    }

    /// Appends a customer holding the listed existing features plus `new`
    /// fresh ones, then restores left-ordered form.
    pub fn push_customer(&self, known: &[usize], new: usize) -> Result<Self> {
        if let Some(&bad) = known.iter().find(|&&id| id >= self.k) {
            return Err(Error::domain(format!("feature id {bad} does not exist (k = {})", self.k)));
        }
        let j = self.n();
        let mut cols = self.columns();
        let mut sorted = known.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for id in sorted {
            cols[id].push(j);
        }
        cols.extend(std::iter::repeat_with(|| vec![j]).take(new));
        Ok(Self::from_sorted_columns(j + 1, cols))
    }

    /// Customer `perm[j]` of `self` becomes customer `j` of the result.
    pub fn permute_customers(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::domain(format!("not a permutation of 0..{n}: {perm:?}")));
        }
        let mut inverse = vec![0; n];
        for (j, &p) in perm.iter().enumerate() {
            inverse[p] = j;
        }
        let cols = self.columns().into_iter().map(|c| {
            let mut moved: Vec<usize> = c.into_iter().map(|j| inverse[j]).collect();
            moved.sort_unstable();
            moved
        });
        Ok(Self::from_sorted_columns(n, cols))
    }

    /// Binary matrix, one row per customer.
    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        self.customers
            .iter()
            .map(|set| {
                let mut row = vec![0u8; self.k];
                for &id in set {
                    row[id] = 1;
                }
                row
            })
            .collect()
    }

    /// CSV of the binary matrix with header `f0,…,f{k-1}`.
    pub fn to_csv(&self) -> String {
        let mut s = (0..self.k).map(|i| format!("f{i}")).collect::<Vec<_>>().join(",");
        s.push('\n');
        for row in self.to_matrix() {
            let cells: Vec<String> = row.iter().map(|b| b.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// One JSON array of sorted feature ids per line.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for set in &self.customers {
            let ids: Vec<String> = set.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "[{}]", ids.join(","));
        }
        s
    }

    /// Parses JSON lines. Blank lines are skipped; labels that are not already
    /// left-ordered ids are relabelled and reported as a warning.
    pub fn from_jsonl(text: &str) -> Result<(Self, Vec<Warning>)> {
        let mut raw = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let ids: Vec<u64> = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: Some(i + 1),
                message: format!("expected an array of non-negative integer ids: {e}"),
            })?;
            raw.push(ids);
        }
        let (z, relabelled) = Self::from_labels(&raw).map_err(|e| match e {
            Error::Parse { line: Some(j), message } => {
                // map customer index back to the file line
                let file_line = text
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty())
                    .nth(j - 1)
                    .map(|(i, _)| i + 1);
                Error::Parse {
                    line: file_line,
                    message,
                }
            }
            other => other,
        })?;
        let warnings = if relabelled {
            vec![Warning {
                line: None,
                message: "feature ids were not in left-ordered form and have been relabelled".into(),
            }]
        } else {
            Vec::new()
        };
        Ok((z, warnings))
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<(Self, Vec<Warning>)> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

/// Sample size and per-feature frequencies `m_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawStats")]
pub struct SuffStats {
    pub n: usize,
    pub m: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStats {
    n: usize,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    m: Vec<usize>,
}

impl TryFrom<RawStats> for SuffStats {
    type Error = Error;

    fn try_from(raw: RawStats) -> Result<Self> {
        if let Some(k) = raw.k {
            if k != raw.m.len() {
                return Err(Error::parse(format!("k = {k} but m has {} entries", raw.m.len())));
            }
        }
        SuffStats::new(raw.n, raw.m)
    }
}

impl SuffStats {
    pub fn new(n: usize, m: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = m.iter().find(|&&x| x == 0 || x > n) {
            return Err(Error::domain(format!("each frequency must lie in 1..={n}, got {bad}")));
        }
        Ok(SuffStats { n, m })
    }

    pub fn k(&self) -> usize {
        self.m.len()
    }

    /// Frequencies in decreasing order, for order-free comparison.
    pub fn sorted_m(&self) -> Vec<usize> {
        let mut m = self.m.clone();
        m.sort_unstable_by(|a, b| b.cmp(a));
        m
    }
}

/// Block sizes of a partition of `n` items.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct Partition {
    pub n: usize,
    pub blocks: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    n: usize,
    blocks: Vec<usize>,
}

impl TryFrom<RawPartition> for Partition {
    type Error = Error;

    fn try_from(raw: RawPartition) -> Result<Self> {
        Partition::new(raw.n, raw.blocks)
    }
}

impl Partition {
    pub fn new(n: usize, blocks: Vec<usize>) -> Result<Self> {
        if blocks.iter().any(|&b| b == 0) {
            return Err(Error::domain("blocks must be non-empty"));
        }
        let total: usize = blocks.iter().sum();
        if total != n {
            return Err(Error::domain(format!("block sizes sum to {total}, expected n = {n}")));
        }
        Ok(Partition { n, blocks })
    }

    pub fn empty() -> Self {
        Partition { n: 0, blocks: Vec::new() }
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    /// Block sizes of a label sequence, blocks ordered by first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let canon = canonical_labels(labels);
        let k = canon.iter().map(|&l| l + 1).max().unwrap_or(0);
        let mut blocks = vec![0; k];
        for &l in &canon {
            blocks[l] += 1;
        }
        Partition { n: labels.len(), blocks }
    }
}

/// Relabels a sequence so blocks are numbered by first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alloc(sets: &[&[u64]]) -> FeatureAllocation {
        FeatureAllocation::from_labels(&sets.iter().map(|s| s.to_vec()).collect::<Vec<_>>())
            .unwrap()
            .0
    }

    #[test]
    fn suff_stats_examples() {
        assert_eq!(FeatureAllocation::empty().suff_stats(), SuffStats { n: 0, m: vec![] });
        assert_eq!(alloc(&[&[0], &[0, 1]]).suff_stats(), SuffStats { n: 2, m: vec![2, 1] });
    }

    #[test]
    fn permutation_examples() {
        let z = alloc(&[&[0], &[0, 1]]);
        assert_eq!(z.permute_customers(&[0, 1]).unwrap(), z);
        let swapped = z.permute_customers(&[1, 0]).unwrap();
        assert_eq!(swapped.customers(), &[vec![0, 1], vec![0]]);
        assert!(z.permute_customers(&[0, 0]).is_err());
        assert!(z.permute_customers(&[0]).is_err());
    }

    #[test]
    fn left_ordered_form() {
        // feature labelled 7 first appears later than 3
        let (z, relabelled) = FeatureAllocation::from_labels(&[vec![3], vec![7, 3], vec![]]).unwrap();
        assert!(relabelled);
        assert_eq!(z.customers(), &[vec![0], vec![0, 1], vec![]]);
        // among features first held by customer 0, the one also held later ranks first
        let z = alloc(&[&[0, 1], &[1]]);
        assert_eq!(z.customers(), &[vec![0, 1], vec![0]]);
        let (_, relabelled) = FeatureAllocation::from_labels(&[vec![0, 1], vec![0]]).unwrap();
        assert!(!relabelled);
    }

    #[test]
    fn push_customer_keeps_form() {
        let z = alloc(&[&[0, 1]]);
        let z2 = z.push_customer(&[1], 2).unwrap();
        assert_eq!(z2.customers(), &[vec![0, 1], vec![0, 2, 3]]);
        assert!(z.push_customer(&[5], 0).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let z = alloc(&[&[0], &[0, 1]]);
        let text = z.to_jsonl();
        assert_eq!(text, "[0]\n[0,1]\n");
        let (back, warnings) = FeatureAllocation::from_jsonl(&text).unwrap();
        assert_eq!(back, z);
        assert!(warnings.is_empty());
        let (e, _) = FeatureAllocation::from_jsonl("").unwrap();
        assert_eq!(e.n(), 0);
        let (_, warnings) = FeatureAllocation::from_jsonl("[4]\n[4,9]\n").unwrap();
        assert_eq!(warnings.len(), 1);
        match FeatureAllocation::from_jsonl("[0]\n[0,x]\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, Some(2)),
            other => panic!("{other:?}"),
        }
        match FeatureAllocation::from_jsonl("[0]\n\n[1,1]\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, Some(3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_export() {
        let z = alloc(&[&[0], &[0, 1]]);
        assert_eq!(z.to_csv(), "f0,f1\n1,0\n1,1\n");
    }

    #[test]
    fn stats_and_partition_json() {
        let s: SuffStats = serde_json::from_str(r#"{"n":10,"m":[3]}"#).unwrap();
        assert_eq!(s, SuffStats { n: 10, m: vec![3] });
        assert!(serde_json::from_str::<SuffStats>(r#"{"n":2,"m":[3]}"#).is_err());
        assert!(serde_json::from_str::<SuffStats>(r#"{"n":2,"k":2,"m":[1]}"#).is_err());
        let p: Partition = serde_json::from_str(r#"{"n":3,"blocks":[2,1]}"#).unwrap();
        assert_eq!(p.k(), 2);
        assert!(serde_json::from_str::<Partition>(r#"{"n":4,"blocks":[2,1]}"#).is_err());
    }

    #[test]
    fn partition_from_labels() {
        let p = Partition::from_labels(&[5, 5, 2, 5, 9]);
        assert_eq!(p.blocks, vec![3, 1, 1]);
        assert_eq!(canonical_labels(&[5, 5, 2, 5, 9]), vec![0, 0, 1, 0, 2]);
    }
}
