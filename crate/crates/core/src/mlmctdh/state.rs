use std::io::{Read, Write};
use std::sync::Arc;

use crate::ed::StateVector;
use crate::error::{Error, Result};
use crate::mlmctdh::tensor::orthonormality_residual;
use crate::mlmctdh::topology::{parse_tree, TreeTopology};
use crate::C64;

/// Tree wavefunction: one coefficient tensor per node, all stored in a
/// single flat buffer. Node `n` occupies `data[offsets[n]..offsets[n + 1]]`
/// with shape `topology.tensor_dims(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeState {
    topology: Arc<TreeTopology>,
    offsets: Vec<usize>,
    pub(crate) data: Vec<C64>,
    pub time: f64,
}

const MAGIC: &[u8; 8] = b"SPDTREE1";
const VERSION: u32 = 1;

fn offsets_for(topo: &TreeTopology) -> Vec<usize> {
    let mut offsets = vec![0];
    for id in 0..topo.len() {
        offsets.push(offsets[id] + topo.tensor_len(id));
    }
    offsets
}

/// The x-polarized product state. Leaves put `|→…→⟩` in their first SPF
/// and complete it by Gram-Schmidt against the canonical basis; internal
/// nodes use canonical unit vectors, so SPF 0 is always the product state.
pub fn build_initial_state(topology: Arc<TreeTopology>) -> TreeState {
    let offsets = offsets_for(&topology);
    let mut data = vec![C64::new(0.0, 0.0); *offsets.last().unwrap()];
    for id in 0..topology.len() {
        let m = topology.node(id).spf;
        let cols = topology.subspace_bound(id);
        let t = &mut data[offsets[id]..offsets[id + 1]];
        if topology.is_leaf(id) {
            let amp = C64::new(1.0 / (cols as f64).sqrt(), 0.0);
            t[..cols].iter_mut().for_each(|x| *x = amp);
            let mut filled = 1;
            let mut canon = 0;
            while filled < m {
                let mut v = vec![C64::new(0.0, 0.0); cols];
                v[canon] = C64::new(1.0, 0.0);
                canon += 1;
                for k in 0..filled {
                    let q = &t[k * cols..(k + 1) * cols];
                    let c: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
                let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-8 {
                    continue;
                }
                t[filled * cols..(filled + 1) * cols]
                    .iter_mut()
                    .zip(&v)
                    .for_each(|(x, y)| *x = y / norm);
                filled += 1;
            }
        } else {
            for a in 0..m {
                t[a * cols + a] = C64::new(1.0, 0.0);
            }
        }
    }
    TreeState {
        topology,
        offsets,
        data,
        time: 0.0,
    }
}

impl TreeState {
    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    pub fn topology_arc(&self) -> Arc<TreeTopology> {
        Arc::clone(&self.topology)
    }

    pub fn tensor(&self, node: usize) -> &[C64] {
        &self.data[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn tensor_mut(&mut self, node: usize) -> &mut [C64] {
        &mut self.data[self.offsets[node]..self.offsets[node + 1]]
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Total number of complex coefficients across all nodes.
    pub fn coefficient_count(&self) -> usize {
        self.data.len()
    }

    /// `⟨Ψ|Ψ⟩^{1/2}`, valid while the non-root SPFs are orthonormal.
    pub fn norm(&self) -> f64 {
        self.tensor(0).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Orthonormality residual of every node (0 for the root).
    pub fn orthonormality_residuals(&self) -> Vec<f64> {
        (0..self.topology.len())
            .map(|id| {
                if id == self.topology.root() {
                    0.0
                } else {
                    orthonormality_residual(self.tensor(id), self.topology.node(id).spf)
                }
            })
            .collect()
    }

    pub fn max_orthonormality_residual(&self) -> f64 {
        self.orthonormality_residuals().into_iter().fold(0.0, f64::max)
    }

    /// Replaces node tensors wholesale; the layout must match.
    pub fn set_coefficients(&mut self, data: Vec<C64>) -> Result<()> {
        if data.len() != self.data.len() {
            return Err(Error::Dimension {
                expected: self.data.len(),
                got: data.len(),
            });
        }
        self.data = data;
        Ok(())
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.data
    }

    // SPFs of `node` as dense vectors over its sites, bit k = node.sites[k].
    fn dense_spfs(&self, node: usize) -> Vec<Vec<C64>> {
        let topo = &self.topology;
        let m = topo.node(node).spf;
        let t = self.tensor(node);
        if topo.is_leaf(node) {
            let d = topo.subspace_bound(node);
            return (0..m).map(|a| t[a * d..(a + 1) * d].to_vec()).collect();
        }
        let kids: Vec<Vec<Vec<C64>>> = topo.node(node).children.iter().map(|&c| self.dense_spfs(c)).collect();
        let dims = topo.child_dims(node);
        let cols: usize = dims.iter().product();
        let width: usize = kids.iter().map(|k| k[0].len()).product();
        let mut out = vec![vec![C64::new(0.0, 0.0); width]; m];
        // Expand one configuration of child SPFs at a time.
        let mut idx = vec![0usize; dims.len()];
        for flat in 0..cols {
            let mut rem = flat;
            for k in (0..dims.len()).rev() {
                idx[k] = rem % dims[k];
                rem /= dims[k];
            }
            let coeffs: Vec<C64> = (0..m).map(|a| t[a * cols + flat]).collect();
            if coeffs.iter().all(|c| c.norm_sqr() == 0.0) {
                continue;
            }
            let mut prod = vec![C64::new(1.0, 0.0)];
            for (k, kid) in kids.iter().enumerate() {
                let v = &kid[idx[k]];
                // Earlier children occupy the low bits.
                let mut next = vec![C64::new(0.0, 0.0); prod.len() * v.len()];
                for (hi, b) in v.iter().enumerate() {
                    for (lo, a) in prod.iter().enumerate() {
                        next[hi * prod.len() + lo] = a * b;
                    }
                }
                prod = next;
            }
            for (a, c) in coeffs.iter().enumerate() {
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                for (o, p) in out[a].iter_mut().zip(&prod) {
                    *o += c * p;
                }
            }
        }
        out
    }

    /// Contracts the tree into a dense state (`L ≤ limit`).
    pub fn to_statevector_with_limit(&self, limit: usize) -> Result<StateVector> {
        let l = self.topology.site_count();
        if l > limit {
            return Err(Error::TooLarge { sites: l, limit });
        }
        let local = self.dense_spfs(self.topology.root()).swap_remove(0);
        let sites = &self.topology.node(0).sites;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << l];
        for (p, v) in local.into_iter().enumerate() {
            let mut g = 0usize;
            for (k, &s) in sites.iter().enumerate() {
                g |= ((p >> k) & 1) << s;
            }
            amps[g] = v;
        }
        StateVector::new(l, amps)
    }

    pub fn to_statevector(&self) -> Result<StateVector> {
        self.to_statevector_with_limit(crate::ed::DEFAULT_MAX_SITES)
    }

    /// Versioned binary checkpoint: topology spec, site order, time and all
    /// node coefficients (little endian).
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        let spec = self.topology.spec().as_bytes();
        out.write_all(&(spec.len() as u64).to_le_bytes())?;
        out.write_all(spec)?;
        out.write_all(&(self.topology.site_count() as u64).to_le_bytes())?;
        for &s in self.topology.site_order() {
            out.write_all(&(s as u64).to_le_bytes())?;
        }
        out.write_all(&self.time.to_le_bytes())?;
        out.write_all(&(self.data.len() as u64).to_le_bytes())?;
        for c in &self.data {
            out.write_all(&c.re.to_le_bytes())?;
            out.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<TreeState> {
        fn u64_of<R: Read>(r: &mut R) -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        fn f64_of<R: Read>(r: &mut R) -> Result<f64> {
            Ok(f64::from_bits(u64_of(r)?))
        }
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a tree checkpoint".into()));
        }
        let mut v = [0u8; 4];
        input.read_exact(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let len = u64_of(&mut input)? as usize;
        if len > 1 << 16 {
            return Err(Error::Format("tree spec too long".into()));
        }
        let mut spec = vec![0u8; len];
        input.read_exact(&mut spec)?;
        let spec = String::from_utf8(spec).map_err(|_| Error::Format("tree spec is not UTF-8".into()))?;
        let sites = u64_of(&mut input)? as usize;
        if sites > 1 << 20 {
            return Err(Error::Format("site count too large".into()));
        }
        let order = (0..sites)
            .map(|_| u64_of(&mut input).map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        let topo = parse_tree(&spec)?.with_site_order(order)?;
        let time = f64_of(&mut input)?;
        let count = u64_of(&mut input)? as usize;
        let mut state = build_initial_state(Arc::new(topo));
        if count != state.data.len() {
            return Err(Error::Dimension {
                expected: state.data.len(),
                got: count,
            });
        }
        for c in state.data.iter_mut() {
            let re = f64_of(&mut input)?;
            let im = f64_of(&mut input)?;
            *c = C64::new(re, im);
        }
        state.time = time;
        Ok(state)
    }
}
