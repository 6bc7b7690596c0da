//! Operator contractions through the tree.
//!
//! The upward pass builds, for every node, its subtree operator `Hin` in the
//! node's SPF basis and the matrices `⟨φ_a|σ_g|φ_b⟩` of every Pauli factor
//! that couples the subtree to the rest of the system. The downward pass
//! builds hole quantities: the density matrix `ρ_n[j,l] = ⟨Ψ_j|Ψ_l⟩` of the
//! single-hole functions and the mean fields
//! `N_n(g)[j,l] = ⟨Ψ_j|Σ_{g' outside n} C_{gg'} σ_g'|Ψ_l⟩`.

use nalgebra::DMatrix;

use crate::mlmctdh::operator::SopPlan;
use crate::mlmctdh::tensor::{apply_axis, apply_axis_add, apply_pair_add, hole, pair_hole};
use crate::mlmctdh::topology::TreeTopology;
use crate::C64;

#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub topo: &'a TreeTopology,
    pub offsets: &'a [usize],
    pub data: &'a [C64],
}

impl<'a> View<'a> {
    pub fn tensor(&self, n: usize) -> &'a [C64] {
        &self.data[self.offsets[n]..self.offsets[n + 1]]
    }
}

pub(crate) type RankTerm = (DMatrix<C64>, DMatrix<C64>);

pub(crate) struct Upward {
    pub h: Vec<Vec<DMatrix<C64>>>,
    pub hin: Vec<DMatrix<C64>>,
    /// Local operator applied to each node tensor (kept on request).
    pub ha: Vec<Vec<C64>>,
    /// Per node, per pair block, per rank term: `(X_r, Y_r)` on the two children.
    pub pair_ops: Vec<Vec<Vec<RankTerm>>>,
}

/// Tensor axis (1-based child slot) holding site `g / 3` below `node`.
pub(crate) fn axis_of(topo: &TreeTopology, node: usize, g: usize) -> usize {
    let n = topo.node(node);
    if n.children.is_empty() {
        return 1;
    }
    let site = g / 3;
    1 + n
        .children
        .iter()
        .position(|&c| topo.node(c).sites.contains(&site))
        .expect("site below node")
}

/// `(axis, ⟨σ_g⟩ on that axis)` for `g` in `needed[node]` or in a pair block of `node`.
pub(crate) fn axis_operator<'a>(
    topo: &TreeTopology,
    plan: &'a SopPlan,
    up: &'a Upward,
    node: usize,
    g: usize,
) -> (usize, &'a DMatrix<C64>) {
    if topo.is_leaf(node) {
        let slot = plan.slot(node, g).expect("leaf factor is tracked");
        return (1, &plan.leaf_sigma[node][slot]);
    }
    let axis = axis_of(topo, node, g);
    let child = topo.node(node).children[axis - 1];
    let slot = plan.slot(child, g).expect("child factor is tracked");
    (axis, &up.h[child][slot])
}

fn combine(weights: &[f64], mats: &[DMatrix<C64>]) -> DMatrix<C64> {
    let d = mats[0].nrows();
    let mut out = DMatrix::zeros(d, d);
    for (w, m) in weights.iter().zip(mats) {
        if *w != 0.0 {
            out += m * C64::new(*w, 0.0);
        }
    }
    out
}

pub(crate) fn upward(view: View<'_>, plan: &SopPlan, keep_ha: bool) -> Upward {
    let topo = view.topo;
    let n = topo.len();
    let mut up = Upward {
        h: vec![Vec::new(); n],
        hin: vec![DMatrix::zeros(0, 0); n],
        ha: vec![Vec::new(); n],
        pair_ops: vec![Vec::new(); n],
    };
    for id in (0..n).rev() {
        let dims = topo.tensor_dims(id);
        let a = view.tensor(id);
        let mut ha = vec![C64::new(0.0, 0.0); a.len()];
        if topo.is_leaf(id) {
            if let Some(local) = &plan.leaf_local[id] {
                apply_axis_add(a, &dims, 1, local, &mut ha);
            }
        } else {
            let children = &topo.node(id).children;
            for (k, &c) in children.iter().enumerate() {
                apply_axis_add(a, &dims, 1 + k, &up.hin[c], &mut ha);
            }
            let mut ops = Vec::with_capacity(plan.pairs[id].len());
            for block in &plan.pairs[id] {
                let (ca, cb) = (children[block.a], children[block.b]);
                let terms: Vec<(DMatrix<C64>, DMatrix<C64>)> = block
                    .x
                    .iter()
                    .zip(&block.y)
                    .map(|(x, y)| (combine(x, &up.h[ca]), combine(y, &up.h[cb])))
                    .collect();
                let (da, db) = (dims[1 + block.a], dims[1 + block.b]);
                let rank = terms.len();
                if plan
                    .strategy
                    .joint(rank * a.len() * (da + db), a.len() * da * db + rank * (da * db).pow(2))
                {
                    let joint = DMatrix::from_fn(da * db, da * db, |r, c| {
                        terms
                            .iter()
                            .map(|(x, y)| x[(r / db, c / db)] * y[(r % db, c % db)])
                            .sum()
                    });
                    apply_pair_add(a, &dims, 1 + block.a, 1 + block.b, &joint, &mut ha);
                } else {
                    for (x, y) in &terms {
                        let t = apply_axis(a, &dims, 1 + block.b, y);
                        apply_axis_add(&t, &dims, 1 + block.a, x, &mut ha);
                    }
                }
                ops.push(terms);
            }
            up.pair_ops[id] = ops;
        }
        up.hin[id] = hole(a, &ha, &dims, 0);
        up.h[id] = plan.needed[id]
            .iter()
            .map(|&g| {
                let (axis, m) = axis_operator(topo, plan, &up, id, g);
                let b = apply_axis(a, &dims, axis, m);
                hole(a, &b, &dims, 0)
            })
            .collect();
        if keep_ha {
            up.ha[id] = ha;
        }
    }
    up
}

pub(crate) struct Downward {
    pub rho: Vec<Option<DMatrix<C64>>>,
    pub field: Vec<Vec<DMatrix<C64>>>,
}

/// Hole densities and mean fields for every node with `wanted[node]` set
/// (a node's ancestors must be wanted too).
pub(crate) fn downward(view: View<'_>, plan: &SopPlan, up: &Upward, wanted: &[bool]) -> Downward {
    let topo = view.topo;
    let n = topo.len();
    let mut down = Downward {
        rho: vec![None; n],
        field: vec![Vec::new(); n],
    };
    down.rho[0] = Some(DMatrix::identity(1, 1));
    for p in 0..n {
        if topo.is_leaf(p) || down.rho[p].is_none() {
            continue;
        }
        let children = &topo.node(p).children;
        if !children.iter().any(|&c| wanted[c]) {
            continue;
        }
        let dims = topo.tensor_dims(p);
        let a = view.tensor(p);
        let arho = apply_axis(a, &dims, 0, down.rho[p].as_ref().unwrap());
        let mut fields: Vec<Vec<DMatrix<C64>>> = children
            .iter()
            .map(|&c| {
                let m = topo.node(c).spf;
                vec![DMatrix::zeros(m, m); if wanted[c] { plan.needed[c].len() } else { 0 }]
            })
            .collect();
        let parent_fields: Vec<Vec<C64>> = down.field[p].iter().map(|f| apply_axis(a, &dims, 0, f)).collect();
        for (k, &c) in children.iter().enumerate() {
            if !wanted[c] {
                continue;
            }
            down.rho[c] = Some(hole(a, &arho, &dims, 1 + k));
            for (i, &g) in plan.needed[c].iter().enumerate() {
                if let Some(j) = plan.slot(p, g) {
                    fields[k][i] += hole(a, &parent_fields[j], &dims, 1 + k);
                }
            }
        }
        for (bi, block) in plan.pairs[p].iter().enumerate() {
            let (ka, kb) = (block.a, block.b);
            let (want_a, want_b) = (wanted[children[ka]], wanted[children[kb]]);
            if !want_a && !want_b {
                continue;
            }
            let ops = &up.pair_ops[p][bi];
            let (da, db) = (dims[1 + ka], dims[1 + kb]);
            let sides = want_a as usize + want_b as usize;
            let rank = ops.len();
            if plan.strategy.joint(
                sides * rank * a.len() * (da + db),
                a.len() * da * db + sides * rank * (da * db).pow(2),
            ) {
                let d = pair_hole(a, &arho, &dims, 1 + ka, 1 + kb);
                for (r, (x, y)) in ops.iter().enumerate() {
                    if want_a {
                        let t = DMatrix::from_fn(da, da, |j, l| {
                            let mut acc = C64::new(0.0, 0.0);
                            for jp in 0..db {
                                for lp in 0..db {
                                    acc += d[(j * db + jp, l * db + lp)] * y[(jp, lp)];
                                }
                            }
                            acc
                        });
                        add_weighted(&mut fields[ka], &block.x[r], &t);
                    }
                    if want_b {
                        let t = DMatrix::from_fn(db, db, |jp, lp| {
                            let mut acc = C64::new(0.0, 0.0);
                            for j in 0..da {
                                for l in 0..da {
                                    acc += d[(j * db + jp, l * db + lp)] * x[(j, l)];
                                }
                            }
                            acc
                        });
                        add_weighted(&mut fields[kb], &block.y[r], &t);
                    }
                }
            } else {
                for (r, (x, y)) in ops.iter().enumerate() {
                    if want_a {
                        let t = hole(a, &apply_axis(&arho, &dims, 1 + kb, y), &dims, 1 + ka);
                        add_weighted(&mut fields[ka], &block.x[r], &t);
                    }
                    if want_b {
                        let t = hole(a, &apply_axis(&arho, &dims, 1 + ka, x), &dims, 1 + kb);
                        add_weighted(&mut fields[kb], &block.y[r], &t);
                    }
                }
            }
        }
        for (k, f) in fields.into_iter().enumerate() {
            if wanted[children[k]] {
                down.field[children[k]] = f;
            }
        }
    }
    down
}

fn add_weighted(fields: &mut [DMatrix<C64>], weights: &[f64], t: &DMatrix<C64>) {
    for (f, &w) in fields.iter_mut().zip(weights) {
        if w != 0.0 {
            *f += t * C64::new(w, 0.0);
        }
    }
}

/// Hole densities of every node (root `[[1]]`).
pub(crate) fn densities(view: View<'_>) -> Vec<DMatrix<C64>> {
    let topo = view.topo;
    let mut rho = vec![DMatrix::zeros(0, 0); topo.len()];
    rho[0] = DMatrix::identity(1, 1);
    for p in 0..topo.len() {
        if topo.is_leaf(p) {
            continue;
        }
        let dims = topo.tensor_dims(p);
        let a = view.tensor(p);
        let arho = apply_axis(a, &dims, 0, &rho[p]);
        for (k, &c) in topo.node(p).children.iter().enumerate() {
            rho[c] = hole(a, &arho, &dims, 1 + k);
        }
    }
    rho
}
