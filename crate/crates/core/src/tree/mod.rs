//! Rooted ultrametric trees and the geometry the OU model is built from.
//!
//! Node indexing is fixed once at construction and used by every matrix in the
//! crate: internal nodes come first in reverse postorder (the root is node 0
//! and every parent precedes its children), followed by the leaves in
//! left-to-right depth-first order. Shift vectors, incidence columns and the
//! shrinkage diagonal are all indexed this way.

mod newick;
mod random;

pub use newick::parse_newick;
pub use random::random_coalescent;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on root-to-leaf depths, as a fraction of the height.
pub const DEFAULT_ULTRAMETRIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct UltrametricTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    branch_length: Vec<f64>,
    time: Vec<f64>,
    labels: Vec<Option<String>>,
    n_internal: usize,
    height: f64,
}

/// Mutable scratch representation shared by the parser and the generators.
/// Children keep their left-to-right order.
#[derive(Debug, Default, Clone)]
pub(crate) struct ArenaNode {
    pub children: Vec<usize>,
    pub length: Option<f64>,
    pub label: Option<String>,
    /// Byte offset in the source text, for error messages.
    pub pos: usize,
}

impl UltrametricTree {
    /// Builds a tree from an arena rooted at `root`, assigning the canonical
    /// node order and validating every invariant.
    pub(crate) fn from_arena(arena: &[ArenaNode], root: usize, rel_tol: f64) -> Result<Self> {
        // Leaves: left-to-right DFS. Internal: reverse postorder.
        let mut leaves = Vec::new();
        let mut postorder_internal = Vec::new();
        let mut stack = vec![(root, false)];
        while let Some((v, expanded)) = stack.pop() {
            let node = &arena[v];
            if node.children.is_empty() {
                leaves.push(v);
            } else if expanded {
                postorder_internal.push(v);
            } else {
                stack.push((v, true));
                for &c in node.children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        postorder_internal.reverse();
        let n_internal = postorder_internal.len();
        let order: Vec<usize> = postorder_internal.into_iter().chain(leaves).collect();
        let n = order.len();
        let mut new_index = vec![usize::MAX; arena.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }

        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut branch_length = vec![0.0; n];
        let mut labels = vec![None; n];
        for (new, &old) in order.iter().enumerate() {
            let node = &arena[old];
            children[new] = node.children.iter().map(|&c| new_index[c]).collect();
            for &c in &children[new] {
                parent[c] = Some(new);
            }
            labels[new] = node.label.clone();
            if old != root {
                match node.length {
                    Some(l) if l.is_finite() && l >= 0.0 => branch_length[new] = l,
                    Some(l) => {
                        return Err(Error::InvalidArgument(format!(
                            "branch length {l} must be finite and non-negative"
                        )))
                    }
                    None => {
                        return Err(Error::MissingBranchLength {
                            node: node.label.clone().unwrap_or_default(),
                            pos: node.pos,
                        })
                    }
                }
            }
        }

        // Parents precede children, so a single forward pass fills the times.
        let mut time = vec![0.0; n];
        for v in 1..n {
            let p = parent[v].expect("non-root node without parent");
            time[v] = time[p] + branch_length[v];
        }

        let mut seen = std::collections::HashSet::new();
        for v in n_internal..n {
            match &labels[v] {
                Some(l) if !l.is_empty() => {
                    if !seen.insert(l.clone()) {
                        return Err(Error::DuplicateLabel(l.clone()));
                    }
                }
                _ => return Err(Error::EmptyLabel(arena[order[v]].pos)),
            }
        }

        let height = time[n_internal..].iter().cloned().fold(0.0, f64::max);
        if height <= 0.0 {
            return Err(Error::InvalidArgument("tree height must be positive".into()));
        }
        let tol = rel_tol * height;
        for v in n_internal..n {
            if (time[v] - height).abs() > tol {
                return Err(Error::NotUltrametric {
                    label: labels[v].clone().unwrap_or_default(),
                    depth: time[v],
                    height,
                    tol,
                });
            }
        }

        Ok(Self {
            parent,
            children,
            branch_length,
            time,
            labels,
            n_internal,
            height,
        })
    }

    /// Total number of nodes, root included (columns of the incidence matrix).
    pub fn n_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.n_nodes() - self.n_internal
    }

    pub fn n_internal(&self) -> usize {
        self.n_internal
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn branch_length(&self, node: usize) -> f64 {
        self.branch_length[node]
    }

    /// Time elapsed from the root to `node`.
    pub fn time(&self, node: usize) -> f64 {
        self.time[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node >= self.n_internal
    }

    /// Node index of the `i`-th leaf.
    pub fn leaf_node(&self, leaf: usize) -> usize {
        self.n_internal + leaf
    }

    pub fn label(&self, node: usize) -> Option<&str> {
        self.labels[node].as_deref()
    }

    pub fn leaf_labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.labels[self.n_internal..]
            .iter()
            .map(|l| l.as_deref().unwrap_or(""))
    }

    /// Display name for any node: its label, or `N{k}` / `T{k}` (1-based).
    pub fn node_name(&self, node: usize) -> String {
        match self.label(node) {
            Some(l) if !l.is_empty() => l.to_string(),
            _ if self.is_leaf(node) => format!("T{}", node - self.n_internal + 1),
            _ => format!("N{}", node + 1),
        }
    }

    /// Leaf indices (0-based, leaf order) below each node.
    pub fn clades(&self) -> Vec<Vec<usize>> {
        let n = self.n_nodes();
        let mut clades = vec![Vec::new(); n];
        for v in (0..n).rev() {
            if self.is_leaf(v) {
                clades[v].push(v - self.n_internal);
            } else {
                let mut acc = Vec::new();
                for &c in &self.children[v] {
                    acc.extend_from_slice(&clades[c]);
                }
                clades[v] = acc;
            }
        }
        clades
    }

    pub fn geometry(&self) -> TreeGeometry {
        let m = self.n_leaves();
        let h = self.height;
        let mut mrca = DMatrix::from_element(m, m, 0.0);
        let clades = self.clades();
        for v in 0..self.n_internal {
            let t = self.time[v];
            let kids = &self.children[v];
            for (a, &ca) in kids.iter().enumerate() {
                for &cb in &kids[a + 1..] {
                    for &i in &clades[ca] {
                        for &j in &clades[cb] {
                            mrca[(i, j)] = t;
                            mrca[(j, i)] = t;
                        }
                    }
                }
            }
        }
        for i in 0..m {
            mrca[(i, i)] = h;
        }
        let distance = mrca.map(|t| 2.0 * (h - t));
        TreeGeometry {
            mrca,
            distance,
            height: h,
        }
    }

    /// Leaf-by-node subtree membership matrix, columns in canonical node order.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.n_leaves(), self.n_nodes());
        for (j, clade) in self.clades().iter().enumerate() {
            for &i in clade {
                u[(i, j)] = 1.0;
            }
        }
        u
    }

    /// Per-node attenuation `1 - exp(-alpha (h - t_parent))` of a shift on the
    /// branch above the node. The root is treated as carrying a zero-length
    /// stem, so its parent time is 0.
    pub fn shrinkage(&self, alpha: f64) -> DVector<f64> {
        let h = self.height;
        DVector::from_iterator(
            self.n_nodes(),
            (0..self.n_nodes()).map(|v| {
                let tp = self.parent[v].map_or(0.0, |p| self.time[p]);
                -(-alpha * (h - tp)).exp_m1()
            }),
        )
    }

    /// Serialises back to Newick, branch lengths with 10 significant digits.
    pub fn to_newick(&self) -> String {
        newick::write(self)
    }

    /// Reorders `values` given per label into leaf order.
    pub fn align_to_leaves<T: Clone>(&self, labels: &[String], values: &[T]) -> Result<Vec<T>> {
        if labels.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} values",
                labels.len(),
                values.len()
            )));
        }
        let index: std::collections::HashMap<&str, usize> =
            self.leaf_labels().enumerate().map(|(i, l)| (l, i)).collect();
        let mut out: Vec<Option<T>> = vec![None; self.n_leaves()];
        for (label, value) in labels.iter().zip(values) {
            let &i = index
                .get(label.as_str())
                .ok_or_else(|| Error::UnknownLabel(label.clone()))?;
            if out[i].is_some() {
                return Err(Error::DuplicateLabel(label.clone()));
            }
            out[i] = Some(value.clone());
        }
        out.into_iter()
            .zip(self.leaf_labels())
            .map(|(v, l)| v.ok_or_else(|| Error::MissingLabel(l.to_string())))
            .collect()
    }
}

/// Pairwise leaf quantities. `mrca[(i, j)]` is the time from the root to the
/// most recent common ancestor; `distance` is the patristic distance
/// `t_i + t_j - 2 t_ij`, which on leaves is also the cophenetic distance.
#[derive(Debug, Clone)]
pub struct TreeGeometry {
    pub mrca: DMatrix<f64>,
    pub distance: DMatrix<f64>,
    pub height: f64,
}

impl TreeGeometry {
    pub fn n_leaves(&self) -> usize {
        self.mrca.nrows()
    }

    pub fn cophenetic(&self) -> &DMatrix<f64> {
        &self.distance
    }
}
