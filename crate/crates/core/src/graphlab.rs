//! Explicit graph form of label propagation, used as a reference on small
//! instances.
//!
//! Every pixel of every frame is a node. Chained correspondences between
//! frames become edges, the labeling is an indicator matrix `x` (one row per
//! node, one column per class) and the consistency matrix `M` has
//! `M[(i,a),(j,b)] > 0` only when `a == b` and `i`, `j` are linked. The
//! clustering score is `xᵀ M x` and one propagation step is the projection
//! of `M x` back onto indicator matrices.
//!
//! Links are kept as a multigraph: two correspondence chains joining the
//! same pixel pair contribute two to the matching entry of `M`, which is
//! what makes the graph step agree with vote counting. Each link counts
//! once in each direction, so a single link between two same-label nodes
//! scores 2.

use crate::error::{Error, Result};
use crate::flow::CorrespondenceMap;

/// Node graph with optional fixed labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelGraph {
    classes: usize,
    adjacency: Vec<Vec<usize>>,
    pinned: Vec<Option<u8>>,
}

impl LabelGraph {
    pub fn new(nodes: usize, classes: usize) -> Self {
        Self {
            classes,
            adjacency: vec![Vec::new(); nodes],
            pinned: vec![None; nodes],
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Adds one undirected link. Repeated calls add parallel links.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        let n = self.node_count();
        if a >= n || b >= n {
            return Err(Error::Invalid(format!("edge ({a}, {b}) outside {n} nodes")));
        }
        if a == b {
            return Err(Error::Invalid(format!("self link on node {a}")));
        }
        self.adjacency[a].push(b);
        self.adjacency[b].push(a);
        Ok(())
    }

    /// Neighbors of `i`, listed once per link.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn pin(&mut self, node: usize, label: u8) -> Result<()> {
        if label as usize >= self.classes {
            return Err(Error::Invalid(format!(
                "label {label} outside {} classes",
                self.classes
            )));
        }
        self.pinned[node] = Some(label);
        Ok(())
    }

    pub fn pinned(&self, node: usize) -> Option<u8> {
        self.pinned[node]
    }

    /// Builds the pixel graph of a short sequence. Node ids are
    /// `frame * w * h + y * w + x`; each valid correspondence from `(a, p)`
    /// lands on the nearest pixel `q` of frame `b` and links `(a, p)` with
    /// `(b, q)`.
    pub fn from_correspondences(
        frames: usize,
        width: usize,
        height: usize,
        classes: usize,
        maps: &[CorrespondenceMap],
    ) -> Result<Self> {
        let plane = width * height;
        let mut graph = Self::new(frames * plane, classes);
        for m in maps {
            if m.dims() != (width, height) {
                return Err(Error::DimensionMismatch {
                    expected: (width, height),
                    actual: m.dims(),
                });
            }
            if m.from_frame >= frames || m.to_frame >= frames || m.from_frame == m.to_frame {
                return Err(Error::Invalid(format!(
                    "map {} -> {} does not join two distinct frames of {frames}",
                    m.from_frame, m.to_frame
                )));
            }
            for y in 0..height {
                for x in 0..width {
                    if let Some((qx, qy)) = m.landing_pixel(x, y) {
                        graph.add_edge(
                            m.from_frame * plane + y * width + x,
                            m.to_frame * plane + qy * width + qx,
                        )?;
                    }
                }
            }
        }
        Ok(graph)
    }
}

/// Row-wise one-hot labeling, stored as the column index of each row's 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndicatorAssignment {
    classes: usize,
    labels: Vec<u8>,
}

impl IndicatorAssignment {
    pub fn from_labels(labels: Vec<u8>, classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Invalid(format!("label {bad} outside {classes} classes")));
        }
        Ok(Self { classes, labels })
    }

    /// Accepts a dense 0/1 matrix with exactly one 1 per row.
    pub fn from_matrix(rows: &[Vec<u8>]) -> Result<Self> {
        let classes = rows.first().map_or(0, Vec::len);
        let mut labels = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != classes || row.iter().any(|&v| v > 1) || row.iter().filter(|&&v| v == 1).count() != 1 {
                return Err(Error::Invalid(format!("row {i} is not a one-hot vector")));
            }
            labels.push(row.iter().position(|&v| v == 1).unwrap() as u8);
        }
        Ok(Self { classes, labels })
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        self.labels
            .iter()
            .map(|&l| (0..self.classes).map(|a| u8::from(a == l as usize)).collect())
            .collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> u8 {
        self.labels[node]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }
}

/// Sparse consistency matrix: link multiplicities plus the implicit rule
/// that only equal-class blocks are nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct Consistency {
    classes: usize,
    links: Vec<Vec<(usize, u32)>>,
    pinned: Vec<Option<u8>>,
}

pub fn build_consistency(graph: &LabelGraph) -> Consistency {
    let links = graph
        .adjacency
        .iter()
        .map(|nbrs| {
            let mut sorted = nbrs.clone();
            sorted.sort_unstable();
            let mut out: Vec<(usize, u32)> = Vec::new();
            for j in sorted {
                match out.last_mut() {
                    Some((last, m)) if *last == j => *m += 1,
                    _ => out.push((j, 1)),
                }
            }
            out
        })
        .collect();
    Consistency {
        classes: graph.classes,
        links,
        pinned: graph.pinned.clone(),
    }
}

impl Consistency {
    pub fn node_count(&self) -> usize {
        self.links.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// `M[(i,a),(j,b)]`.
    pub fn entry(&self, i: usize, a: usize, j: usize, b: usize) -> u32 {
        if a != b || a >= self.classes {
            return 0;
        }
        self.links[i]
            .binary_search_by_key(&j, |&(n, _)| n)
            .map_or(0, |pos| self.links[i][pos].1)
    }

    /// Number of nonzero entries of `M`.
    pub fn nonzero_count(&self) -> usize {
        self.links.iter().map(Vec::len).sum::<usize>() * self.classes
    }

    fn check(&self, x: &IndicatorAssignment) -> Result<()> {
        if x.len() != self.node_count() || x.classes() != self.classes {
            return Err(Error::Invalid(format!(
                "assignment is {}x{}, matrix expects {}x{}",
                x.len(),
                x.classes(),
                self.node_count(),
                self.classes
            )));
        }
        Ok(())
    }

    /// Row `i` of `M x`: per class, the number of links from `i` to nodes
    /// carrying that class.
    pub fn row_product(&self, x: &IndicatorAssignment, i: usize) -> Vec<u32> {
        let mut row = vec![0u32; self.classes];
        for &(j, m) in &self.links[i] {
            row[x.label(j) as usize] += m;
        }
        row
    }

    /// `M x` as an `N x C` matrix.
    pub fn product(&self, x: &IndicatorAssignment) -> Result<Vec<Vec<u32>>> {
        self.check(x)?;
        Ok((0..self.node_count()).map(|i| self.row_product(x, i)).collect())
    }
}

/// `xᵀ M x`.
pub fn clustering_score(x: &IndicatorAssignment, m: &Consistency) -> Result<u64> {
    let mx = m.product(x)?;
    Ok(mx.iter().zip(x.labels()).map(|(row, &a)| row[a as usize] as u64).sum())
}

/// `Σ_i N_i(a_i)`: for every node, its links to nodes sharing its label.
pub fn neighbor_count_score(graph: &LabelGraph, x: &IndicatorAssignment) -> Result<u64> {
    if x.len() != graph.node_count() {
        return Err(Error::Invalid(format!(
            "assignment has {} rows for {} nodes",
            x.len(),
            graph.node_count()
        )));
    }
    Ok((0..graph.node_count())
        .map(|i| graph.neighbors(i).iter().filter(|&&j| x.label(j) == x.label(i)).count() as u64)
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IcmMode {
    /// All free rows updated from the same `x`.
    Parallel,
    /// Rows updated in index order, each seeing earlier updates.
    Sequential,
}

/// Resolution of equal maxima in a row of `M x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TieBreak {
    LowestId,
    /// Keep the node's current label when it is among the maxima.
    PreferCurrent,
    /// Per-node preferred label, used when among the maxima.
    Prefer(Vec<Option<u8>>),
}

fn project_row(row: &[u32], current: u8, preferred: Option<u8>) -> u8 {
    let max = row.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return current;
    }
    if let Some(p) = preferred {
        if row.get(p as usize) == Some(&max) {
            return p;
        }
    }
    row.iter().position(|&v| v == max).unwrap() as u8
}

/// One projected step `x ← P(M x)`. Pinned rows keep their fixed label and
/// rows with no links keep their current label.
pub fn icm_step(
    x: &IndicatorAssignment,
    m: &Consistency,
    mode: IcmMode,
    tie_break: &TieBreak,
) -> Result<IndicatorAssignment> {
    m.check(x)?;
    if let TieBreak::Prefer(p) = tie_break {
        if p.len() != x.len() {
            return Err(Error::Invalid(
                "preference vector length differs from node count".into(),
            ));
        }
    }
    let preferred = |i: usize, current: u8| match tie_break {
        TieBreak::LowestId => None,
        TieBreak::PreferCurrent => Some(current),
        TieBreak::Prefer(p) => p[i],
    };
    let mut next = x.clone();
    for i in 0..x.len() {
        if let Some(fixed) = m.pinned[i] {
            next.labels[i] = fixed;
            continue;
        }
        let source = match mode {
            IcmMode::Parallel => x,
            IcmMode::Sequential => &next,
        };
        let current = source.label(i);
        let row = m.row_product(source, i);
        next.labels[i] = project_row(&row, current, preferred(i, current));
    }
    Ok(next)
}
