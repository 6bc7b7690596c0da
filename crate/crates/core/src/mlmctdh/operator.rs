//! Sum-of-products operators and their layout on a tree.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hamiltonian::TermList;
use crate::mlmctdh::topology::TreeTopology;
use crate::C64;

/// `c + Σ_g b_g σ_g + Σ_{g<g'} C_{gg'} σ_g σ_g'` with `g = 3·site + axis`
/// (axes x, y, z). Products on the same site are not allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct SumOfProducts {
    sites: usize,
    constant: f64,
    one: Vec<f64>,
    two: Vec<f64>,
}

impl SumOfProducts {
    pub fn zero(sites: usize) -> Self {
        let n = 3 * sites;
        SumOfProducts {
            sites,
            constant: 0.0,
            one: vec![0.0; n],
            two: vec![0.0; n * n],
        }
    }

    pub fn from_terms(terms: &TermList) -> Self {
        let mut sop = SumOfProducts::zero(terms.site_count());
        for t in terms.terms() {
            let [a, b] = t.factors;
            sop.add_pair(a.site, a.axis.index(), b.site, b.axis.index(), t.coefficient)
                .expect("term lists hold distinct in-range sites");
        }
        sop
    }

    /// `S_x = Σ_i σ^x_i`.
    pub fn collective_x(sites: usize) -> Self {
        let mut sop = SumOfProducts::zero(sites);
        for i in 0..sites {
            sop.one[3 * i] = 1.0;
        }
        sop
    }

    /// `S_x² = L + Σ_{i≠j} σ^x_i σ^x_j`.
    pub fn collective_x_squared(sites: usize) -> Self {
        let mut sop = SumOfProducts::zero(sites);
        sop.constant = sites as f64;
        for i in 0..sites {
            for j in (i + 1)..sites {
                sop.add_pair(i, 0, j, 0, 2.0).unwrap();
            }
        }
        sop
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn add_single(&mut self, site: usize, axis: usize, c: f64) -> Result<()> {
        if site >= self.sites || axis > 2 {
            return Err(Error::Invalid(format!(
                "single-site operator ({site}, {axis}) out of range"
            )));
        }
        self.one[3 * site + axis] += c;
        Ok(())
    }

    pub fn add_pair(&mut self, i: usize, ai: usize, j: usize, aj: usize, c: f64) -> Result<()> {
        if i >= self.sites || j >= self.sites || ai > 2 || aj > 2 {
            return Err(Error::Invalid(format!("pair ({i}, {j}) out of range")));
        }
        if i == j {
            return Err(Error::Invalid(format!(
                "pair operator needs distinct sites, got {i} twice"
            )));
        }
        let n = 3 * self.sites;
        let (g, h) = (3 * i + ai, 3 * j + aj);
        self.two[g * n + h] += c;
        self.two[h * n + g] += c;
        Ok(())
    }

    #[inline]
    pub(crate) fn one(&self, g: usize) -> f64 {
        self.one[g]
    }

    #[inline]
    pub(crate) fn two(&self, g: usize, h: usize) -> f64 {
        self.two[g * 3 * self.sites + h]
    }
}

/// Dense Pauli matrix for `axis` on bit `bit` of a `2^width` leaf space
/// (bit value 0 is spin up).
pub(crate) fn leaf_pauli(width: usize, bit: usize, axis: usize) -> DMatrix<C64> {
    let dim = 1usize << width;
    let mut m = DMatrix::zeros(dim, dim);
    for p in 0..dim {
        let b = (p >> bit) & 1;
        let sign = if b == 0 { 1.0 } else { -1.0 };
        match axis {
            0 => m[(p ^ (1 << bit), p)] = C64::new(1.0, 0.0),
            1 => m[(p ^ (1 << bit), p)] = C64::new(0.0, sign),
            _ => m[(p, p)] = C64::new(sign, 0.0),
        }
    }
    m
}

/// Cross-coupling between two children of a node in low-rank form
/// `Σ_r (Σ_g x_r(g) σ_g) ⊗ (Σ_g' y_r(g') σ_g')`.
#[derive(Clone, Debug)]
pub(crate) struct PairBlock {
    pub a: usize,
    pub b: usize,
    /// Per rank term, weights over `needed[child a]` and `needed[child b]`.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

/// An operator laid out on a particular tree.
#[derive(Clone, Debug)]
pub(crate) struct SopPlan {
    pub constant: f64,
    /// Per node: operator indices `g` inside the node that couple outside it.
    pub needed: Vec<Vec<usize>>,
    /// Per leaf: Pauli matrices for `needed[leaf]`.
    pub leaf_sigma: Vec<Vec<DMatrix<C64>>>,
    /// Per leaf: operator restricted to the leaf.
    pub leaf_local: Vec<Option<DMatrix<C64>>>,
    /// Per internal node: couplings between pairs of its children.
    pub pairs: Vec<Vec<PairBlock>>,
    pub strategy: PairStrategy,
}

/// How a pair block is contracted: one child axis at a time per rank term,
/// or jointly on both axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) enum PairStrategy {
    Cheapest,
    Sequential,
    Joint,
}

impl PairStrategy {
    /// `sequential` and `joint` are operation counts of the two routes.
    pub fn joint(self, sequential: usize, joint: usize) -> bool {
        match self {
            PairStrategy::Cheapest => sequential > joint,
            PairStrategy::Sequential => false,
            PairStrategy::Joint => true,
        }
    }
}

const RANK_CUTOFF: f64 = 1e-14;
const RECONSTRUCTION_TOLERANCE: f64 = 1e-13;

impl SopPlan {
    pub fn new(topo: &TreeTopology, sop: &SumOfProducts) -> Result<Self> {
        let l = topo.site_count();
        if sop.site_count() != l {
            return Err(Error::Dimension {
                expected: l,
                got: sop.site_count(),
            });
        }
        let n_nodes = topo.len();
        let mut inside = vec![vec![false; l]; n_nodes];
        for (id, node) in topo.nodes().iter().enumerate() {
            for &s in &node.sites {
                inside[id][s] = true;
            }
        }
        let mut needed = vec![Vec::new(); n_nodes];
        for id in 0..n_nodes {
            let mut gs: Vec<usize> = topo.node(id).sites.iter().flat_map(|&s| 3 * s..3 * s + 3).collect();
            gs.sort_unstable();
            for g in gs {
                if (0..3 * l).any(|h| !inside[id][h / 3] && sop.two(g, h) != 0.0) {
                    needed[id].push(g);
                }
            }
        }

        let mut leaf_sigma = vec![Vec::new(); n_nodes];
        let mut leaf_local = vec![None; n_nodes];
        let mut pairs = vec![Vec::new(); n_nodes];
        for id in 0..n_nodes {
            let node = topo.node(id);
            if topo.is_leaf(id) {
                let width = node.sites.len();
                let bit_of = |g: usize| node.sites.iter().position(|&s| s == g / 3).unwrap();
                leaf_sigma[id] = needed[id]
                    .iter()
                    .map(|&g| leaf_pauli(width, bit_of(g), g % 3))
                    .collect();
                let dim = 1usize << width;
                let mut local = DMatrix::zeros(dim, dim);
                for (bi, &si) in node.sites.iter().enumerate() {
                    for a in 0..3 {
                        let c = sop.one(3 * si + a);
                        if c != 0.0 {
                            local += leaf_pauli(width, bi, a) * C64::new(c, 0.0);
                        }
                    }
                    for (bj, &sj) in node.sites.iter().enumerate().skip(bi + 1) {
                        for a in 0..3 {
                            for b in 0..3 {
                                let c = sop.two(3 * si + a, 3 * sj + b);
                                if c != 0.0 {
                                    local += leaf_pauli(width, bi, a) * leaf_pauli(width, bj, b) * C64::new(c, 0.0);
                                }
                            }
                        }
                    }
                }
                leaf_local[id] = Some(local);
                continue;
            }
            for (ka, &ca) in node.children.iter().enumerate() {
                for (kb, &cb) in node.children.iter().enumerate().skip(ka + 1) {
                    let rows = &needed[ca];
                    let cols = &needed[cb];
                    let block = DMatrix::from_fn(rows.len(), cols.len(), |r, c| sop.two(rows[r], cols[c]));
                    if block.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let (x, y) = low_rank(&block);
                    pairs[id].push(PairBlock { a: ka, b: kb, x, y });
                }
            }
        }
        Ok(SopPlan {
            constant: sop.constant(),
            needed,
            leaf_sigma,
            leaf_local,
            pairs,
            strategy: PairStrategy::Cheapest,
        })
    }

    /// Position of `g` in `needed[node]`.
    pub fn slot(&self, node: usize, g: usize) -> Option<usize> {
        self.needed[node].binary_search(&g).ok()
    }
}

/// `block ≈ Σ_r x_r y_rᵀ`. Falls back to the exact row (or column)
/// expansion when the SVD does not reproduce the block to rounding.
fn low_rank(block: &DMatrix<f64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let scale = block.amax();
    let svd = block.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.max();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut approx = DMatrix::zeros(block.nrows(), block.ncols());
    for (r, &s) in svd.singular_values.iter().enumerate() {
        if s <= RANK_CUTOFF * smax {
            continue;
        }
        let xr = u.column(r) * s;
        approx += &xr * vt.row(r);
        x.push(xr.iter().copied().collect());
        y.push(vt.row(r).iter().copied().collect());
    }
    if (approx - block).amax() <= RECONSTRUCTION_TOLERANCE * scale {
        return (x, y);
    }
    let unit = |n: usize, i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };
    let (x, y) = if block.nrows() <= block.ncols() {
        (0..block.nrows())
            .filter(|&i| block.row(i).amax() != 0.0)
            .map(|i| (unit(block.nrows(), i), block.row(i).iter().copied().collect()))
            .unzip()
    } else {
        (0..block.ncols())
            .filter(|&j| block.column(j).amax() != 0.0)
            .map(|j| (block.column(j).iter().copied().collect(), unit(block.ncols(), j)))
            .unzip()
    };
    (x, y)
}
