//! Symmetric tree layouts written as `N0→[p]N1→[m1]N2→…→[mK]1`.
//!
//! `N0` is the number of spins and `p = 2` their local dimension. Every later
//! `Nk` is the number of nodes in a layer and the bracket that follows it is
//! the number of SPFs carried by each of those nodes. The final layer is the
//! single root. Leaves therefore group `N0/N1` consecutive spins, and each
//! layer above splits evenly into `N_{k}/N_{k+1}` children per node.
//!
//! Examples: `32→[2]16→[4]4→[12]1` has 16 two-spin leaves with 4 SPFs, four
//! nodes with 12 SPFs and the root; `16→[2]4→[12]1` has four four-spin leaves
//! with 12 SPFs directly under the root.

use crate::error::{Error, Result};

/// Largest spin count a single leaf may group (primitive dimension `2^g`).
pub const MAX_LEAF_SPINS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    /// Child node ids, in tensor axis order. Empty for leaves.
    pub children: Vec<usize>,
    /// Lattice sites below this node, in tree order.
    pub sites: Vec<usize>,
    /// Number of SPFs `m` (1 for the root).
    pub spf: usize,
    /// Depth below the root.
    pub layer: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeTopology {
    spec: String,
    nodes: Vec<TreeNode>,
    layers: Vec<Vec<usize>>,
    site_order: Vec<usize>,
}

fn spec_error(spec: &str, why: impl std::fmt::Display) -> Error {
    Error::TreeSpec(format!("{spec:?}: {why}"))
}

fn parse_count(spec: &str, s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| spec_error(spec, format!("expected a positive integer, found {:?}", s.trim())))
}

/// Parses a tree string. Both `→` and `->` are accepted as arrows.
pub fn parse_tree(spec: &str) -> Result<TreeTopology> {
    let normalized = spec.replace('→', "->");
    let parts: Vec<&str> = normalized.split("->").collect();
    if parts.len() < 3 {
        return Err(spec_error(
            spec,
            "need the spin count, at least one layer, and the root",
        ));
    }
    let mut sizes = vec![parse_count(spec, parts[0])?];
    let mut brackets = Vec::new();
    for part in &parts[1..] {
        let part = part.trim();
        let rest = part
            .strip_prefix('[')
            .ok_or_else(|| spec_error(spec, format!("expected '[m]N', found {part:?}")))?;
        let close = rest
            .find(']')
            .ok_or_else(|| spec_error(spec, format!("unclosed bracket in {part:?}")))?;
        brackets.push(parse_count(spec, &rest[..close])?);
        sizes.push(parse_count(spec, &rest[close + 1..])?);
    }
    if brackets[0] != 2 {
        return Err(spec_error(
            spec,
            format!("local dimension must be 2, got {}", brackets[0]),
        ));
    }
    if *sizes.last().unwrap() != 1 {
        return Err(spec_error(spec, "the last layer must be the single root"));
    }
    if sizes.contains(&0) || brackets.contains(&0) {
        return Err(spec_error(spec, "sizes and SPF counts must be positive"));
    }
    for w in sizes.windows(2) {
        if w[0] % w[1] != 0 || w[0] == w[1] {
            return Err(spec_error(
                spec,
                format!("layer of {} cannot split evenly into {} groups", w[0], w[1]),
            ));
        }
    }
    let spins = sizes[0];
    let group = spins / sizes[1];
    if group > MAX_LEAF_SPINS {
        return Err(spec_error(
            spec,
            format!("leaves of {group} spins exceed the limit of {MAX_LEAF_SPINS}"),
        ));
    }

    // Layer k from the top has sizes[K - k] nodes; the root is layer 0.
    let depth = sizes.len() - 1;
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut layers: Vec<Vec<usize>> = Vec::new();
    for k in 0..depth {
        let count = sizes[depth - k];
        let spf = if k == 0 { 1 } else { brackets[depth - k] };
        let first = nodes.len();
        let layer: Vec<usize> = (first..first + count).collect();
        for q in 0..count {
            let parent = if k == 0 {
                None
            } else {
                let up = sizes[depth - k + 1];
                Some(layers[k - 1][q / (count / up)])
            };
            nodes.push(TreeNode {
                parent,
                children: Vec::new(),
                sites: Vec::new(),
                spf,
                layer: k,
            });
        }
        for &id in &layer {
            if let Some(p) = nodes[id].parent {
                nodes[p].children.push(id);
            }
        }
        layers.push(layer);
    }
    let leaves = layers.last().unwrap().clone();
    for (q, &leaf) in leaves.iter().enumerate() {
        nodes[leaf].sites = (q * group..(q + 1) * group).collect();
    }
    for id in (0..nodes.len()).rev() {
        if !nodes[id].children.is_empty() {
            let sites = nodes[id]
                .children
                .iter()
                .flat_map(|&c| nodes[c].sites.clone())
                .collect();
            nodes[id].sites = sites;
        }
    }

    let topo = TreeTopology {
        spec: spec.to_string(),
        nodes,
        layers,
        site_order: (0..spins).collect(),
    };
    for id in 1..topo.nodes.len() {
        let bound = topo.subspace_bound(id);
        if topo.nodes[id].spf > bound {
            return Err(spec_error(
                spec,
                format!(
                    "{} SPFs on a node of layer {} exceed its subspace dimension {bound}",
                    topo.nodes[id].spf, topo.nodes[id].layer
                ),
            ));
        }
    }
    Ok(topo)
}

/// Site order placing each `2x2` plaquette of an `lx x ly` square lattice on
/// consecutive positions, plaquettes in row-major order.
pub fn plaquette_order(lx: usize, ly: usize) -> Result<Vec<usize>> {
    if !lx.is_multiple_of(2) || !ly.is_multiple_of(2) || lx == 0 || ly == 0 {
        return Err(Error::Lattice(format!(
            "plaquette grouping needs even extents, got {lx}x{ly}"
        )));
    }
    let mut order = Vec::with_capacity(lx * ly);
    for py in 0..ly / 2 {
        for px in 0..lx / 2 {
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                order.push((2 * px + dx) + lx * (2 * py + dy));
            }
        }
    }
    Ok(order)
}

impl TreeTopology {
    /// Reassigns lattice sites: tree position `k` holds site `order[k]`.
    pub fn with_site_order(mut self, order: Vec<usize>) -> Result<Self> {
        let n = self.site_count();
        let mut seen = vec![false; n];
        if order.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: order.len(),
            });
        }
        for &s in &order {
            if s >= n || seen[s] {
                return Err(Error::TreeSpec(format!("site order is not a permutation of 0..{n}")));
            }
            seen[s] = true;
        }
        for node in &mut self.nodes {
            for s in &mut node.sites {
                *s = order[self.site_order.iter().position(|&x| x == *s).unwrap()];
            }
        }
        self.site_order = order;
        Ok(self)
    }

    pub fn spec(&self) -> &str {
        &self.spec
    }

    pub fn site_count(&self) -> usize {
        self.site_order.len()
    }

    /// Lattice site held at each tree position.
    pub fn site_order(&self) -> &[usize] {
        &self.site_order
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub const fn root(&self) -> usize {
        0
    }

    /// Node ids per layer, root first.
    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    pub fn leaves(&self) -> &[usize] {
        self.layers.last().unwrap()
    }

    /// Dimensions of the axes below a node: children's SPF counts, or `2^g`
    /// for a leaf grouping `g` spins.
    pub fn child_dims(&self, id: usize) -> Vec<usize> {
        let node = &self.nodes[id];
        if node.children.is_empty() {
            vec![1usize << node.sites.len()]
        } else {
            node.children.iter().map(|&c| self.nodes[c].spf).collect()
        }
    }

    /// Tensor shape `(m, d_1, …, d_C)`.
    pub fn tensor_dims(&self, id: usize) -> Vec<usize> {
        let mut d = vec![self.nodes[id].spf];
        d.extend(self.child_dims(id));
        d
    }

    pub fn tensor_len(&self, id: usize) -> usize {
        self.tensor_dims(id).iter().product()
    }

    /// Largest number of orthonormal SPFs a node can hold.
    pub fn subspace_bound(&self, id: usize) -> usize {
        self.child_dims(id)
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX)
    }

    /// Non-root node whose SPFs span its whole subspace; such nodes do not evolve.
    pub fn is_full_rank(&self, id: usize) -> bool {
        id != self.root() && self.nodes[id].spf == self.subspace_bound(id)
    }

    /// Number of root coefficients: the product of the top layer's SPF counts.
    pub fn configuration_dim(&self) -> usize {
        self.subspace_bound(self.root())
    }

    /// Node whose sites are exactly `block` (in any order).
    pub fn find_block(&self, block: &[usize]) -> Result<usize> {
        let mut want = block.to_vec();
        want.sort_unstable();
        want.dedup();
        let found = (1..self.nodes.len()).find(|&id| {
            let mut s = self.nodes[id].sites.clone();
            s.sort_unstable();
            s == want
        });
        found.ok_or_else(|| {
            let span = |s: &[usize]| {
                (
                    s.iter().copied().min().unwrap_or(0),
                    s.iter().copied().max().map_or(0, |m| m + 1),
                )
            };
            let requested = span(&want);
            let mut cands: Vec<(usize, (usize, usize))> = (1..self.nodes.len())
                .map(|id| {
                    let s = &self.nodes[id].sites;
                    let miss =
                        s.iter().filter(|x| !want.contains(x)).count() + want.iter().filter(|x| !s.contains(x)).count();
                    (miss, span(s))
                })
                .collect();
            cands.sort();
            cands.dedup_by_key(|c| c.1);
            Error::UnalignedCut {
                requested,
                nearest: cands.into_iter().take(3).map(|c| c.1).collect(),
            }
        })
    }
}
