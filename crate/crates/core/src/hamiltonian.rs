//! Sum-of-products form of the Heisenberg Hamiltonian
//! `H = -Σ_{i<j} Σ_β J^β_ij σ^β_i σ^β_j`, and its matrix-free action on dense
//! state vectors.
//!
//! Basis convention shared by every backend: site `k` is bit `k` of the basis
//! index (site 0 least significant), `|↑⟩` is bit 0, `|↓⟩` is bit 1, and
//! `σ^z|↑⟩ = +|↑⟩`.

use std::fmt;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::CouplingMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> PauliAxis {
        Self::ALL[i]
    }

    /// Matrix elements `m[out][in]` in the `(|↑⟩, |↓⟩)` basis.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let o = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            PauliAxis::X => [[o, one], [one, o]],
            PauliAxis::Y => [[o, -i], [i, o]],
            PauliAxis::Z => [[one, o], [o, -one]],
        }
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PauliAxis::X => "X",
            PauliAxis::Y => "Y",
            PauliAxis::Z => "Z",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauliFactor {
    pub site: usize,
    pub axis: PauliAxis,
}

/// `coefficient * σ^a_i σ^b_j` with `i != j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub coefficient: f64,
    pub factors: [PauliFactor; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TermList {
    sites: usize,
    terms: Vec<Term>,
}

impl TermList {
    pub fn new(sites: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            let [a, b] = t.factors;
            if a.site == b.site || a.site >= sites || b.site >= sites {
                return Err(Error::Invalid(format!(
                    "term on sites ({}, {}) invalid for {sites} sites",
                    a.site, b.site
                )));
            }
        }
        Ok(TermList { sites, terms })
    }

    pub fn empty(sites: usize) -> Self {
        TermList {
            sites,
            terms: Vec::new(),
        }
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl fmt::Display for TermList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "TermList: {} sites, {} terms", self.sites, self.terms.len())?;
        for t in &self.terms {
            let [a, b] = t.factors;
            writeln!(f, "  {:+.6e} {}{} {}{}", t.coefficient, a.axis, a.site, b.axis, b.site)?;
        }
        Ok(())
    }
}

/// One term per nonzero `J^β_ij` with `i < j`, coefficient `-J^β_ij`.
pub fn heisenberg_terms(couplings: &CouplingMatrix) -> TermList {
    let n = couplings.site_count();
    let mut terms = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for axis in PauliAxis::ALL {
                let jv = couplings.get(axis.index(), i, j);
                if jv != 0.0 {
                    terms.push(Term {
                        coefficient: -jv,
                        factors: [PauliFactor { site: i, axis }, PauliFactor { site: j, axis }],
                    });
                }
            }
        }
    }
    TermList { sites: n, terms }
}

/// A Pauli-string operator compiled for repeated application to `2^L`
/// vectors: a precomputed diagonal plus off-diagonal groups keyed by the
/// bit-flip mask.
#[derive(Clone, Debug)]
pub struct CompiledOperator {
    sites: usize,
    diagonal: Vec<f64>,
    flips: Vec<FlipGroup>,
}

#[derive(Clone, Debug)]
struct FlipGroup {
    mask: usize,
    // (coefficient including i^{#Y}, sign mask)
    parts: Vec<(C64, usize)>,
}

#[inline]
fn parity(x: usize) -> f64 {
    if x.count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl CompiledOperator {
    pub fn new(terms: &TermList) -> Self {
        let n = terms.sites;
        let dim = 1usize << n;
        let mut diagonal = vec![0.0; dim];
        let mut flips: Vec<FlipGroup> = Vec::new();
        for t in &terms.terms {
            let mut flip = 0usize;
            let mut sign = 0usize;
            let mut phase = C64::new(t.coefficient, 0.0);
            for f in t.factors {
                let bit = 1usize << f.site;
                match f.axis {
                    PauliAxis::X => flip |= bit,
                    PauliAxis::Y => {
                        flip |= bit;
                        sign |= bit;
                        phase *= C64::new(0.0, 1.0);
                    }
                    PauliAxis::Z => sign |= bit,
                }
            }
            if flip == 0 {
                let c = phase.re;
                diagonal
                    .par_iter_mut()
                    .enumerate()
                    .for_each(|(x, d)| *d += c * parity(x & sign));
            } else if let Some(g) = flips.iter_mut().find(|g| g.mask == flip) {
                g.parts.push((phase, sign));
            } else {
                flips.push(FlipGroup {
                    mask: flip,
                    parts: vec![(phase, sign)],
                });
            }
        }
        CompiledOperator {
            sites: n,
            diagonal,
            flips,
        }
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// `out = H psi`.
    pub fn apply_into(&self, psi: &[C64], out: &mut [C64]) {
        debug_assert_eq!(psi.len(), self.dim());
        out.par_iter_mut().enumerate().for_each(|(y, o)| {
            let mut acc = psi[y] * self.diagonal[y];
            for g in &self.flips {
                let x = y ^ g.mask;
                let mut c = C64::new(0.0, 0.0);
                for &(coef, sign) in &g.parts {
                    c += coef * parity(x & sign);
                }
                acc += c * psi[x];
            }
            *o = acc;
        });
    }

    pub fn apply(&self, psi: &[C64]) -> Result<Vec<C64>> {
        if psi.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: psi.len(),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply_into(psi, &mut out);
        Ok(out)
    }

    /// `⟨psi|H|psi⟩` (real part; the imaginary part vanishes for Hermitian H).
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        let mut tmp = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply_into(psi, &mut tmp);
        psi.iter().zip(&tmp).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Matrix-free `H|psi⟩` by bit-indexed Pauli action.
pub fn apply_terms(terms: &TermList, state: &[C64]) -> Result<Vec<C64>> {
    let dim = 1usize.checked_shl(terms.sites as u32).ok_or(Error::TooLarge {
        sites: terms.sites,
        limit: usize::BITS as usize - 1,
    })?;
    if state.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: state.len(),
        });
    }
    CompiledOperator::new(terms).apply(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_couplings, build_lattice, CouplingMode, Geometry};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn couplings(n: usize, alpha: f64, j: [f64; 3]) -> CouplingMatrix {
        let lat = build_lattice(Geometry::Chain { len: n }).unwrap();
        build_couplings(&lat, alpha, j, CouplingMode::PowerLaw).unwrap()
    }

    fn random_state(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..(1usize << n))
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    // Dense reference: explicit Kronecker products, site 0 = least significant.
    fn dense_hamiltonian(terms: &TermList) -> Vec<Vec<C64>> {
        let n = terms.site_count();
        let dim = 1 << n;
        let mut h = vec![vec![c(0.0, 0.0); dim]; dim];
        for t in terms.terms() {
            let mut op = vec![vec![c(1.0, 0.0)]];
            for site in (0..n).rev() {
                let single = t
                    .factors
                    .iter()
                    .find(|f| f.site == site)
                    .map(|f| f.axis.matrix())
                    .unwrap_or([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
                let d = op.len();
                let mut next = vec![vec![c(0.0, 0.0); 2 * d]; 2 * d];
                for (a, row) in op.iter().enumerate() {
                    for (b, v) in row.iter().enumerate() {
                        for (p, srow) in single.iter().enumerate() {
                            for (q, s) in srow.iter().enumerate() {
                                next[a * 2 + p][b * 2 + q] = v * s;
                            }
                        }
                    }
                }
                op = next;
            }
            for (r, row) in op.iter().enumerate() {
                for (col, v) in row.iter().enumerate() {
                    h[r][col] += v * t.coefficient;
                }
            }
        }
        h
    }

    #[test]
    fn pauli_algebra() {
        let mul = |a: [[C64; 2]; 2], b: [[C64; 2]; 2]| {
            let mut m = [[c(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        m[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            m
        };
        let id = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        for axis in PauliAxis::ALL {
            assert_eq!(mul(axis.matrix(), axis.matrix()), id);
        }
        let xy = mul(PauliAxis::X.matrix(), PauliAxis::Y.matrix());
        let iz = PauliAxis::Z.matrix().map(|r| r.map(|v| v * c(0.0, 1.0)));
        assert_eq!(xy, iz);
    }

    #[test]
    fn ising_two_sites_single_term() {
        let t = heisenberg_terms(&couplings(2, 3.0, [0.0, 0.0, 1.0]));
        assert_eq!(t.len(), 1);
        assert_eq!(t.terms()[0].coefficient, -1.0);
        assert_eq!(
            t.terms()[0].factors,
            [
                PauliFactor {
                    site: 0,
                    axis: PauliAxis::Z
                },
                PauliFactor {
                    site: 1,
                    axis: PauliAxis::Z
                }
            ]
        );
    }

    #[test]
    fn xyz_coefficients_and_counts() {
        let t = heisenberg_terms(&couplings(2, 0.0, [0.5, 1.0, 0.25]));
        let coefs: Vec<f64> = t.terms().iter().map(|t| t.coefficient).collect();
        assert_eq!(coefs, vec![-0.5, -1.0, -0.25]);
        let t = heisenberg_terms(&couplings(7, 3.0, [0.5, 1.0, 0.25]));
        assert_eq!(t.len(), 3 * 7 * 6 / 2);
    }

    #[test]
    fn zero_couplings_are_omitted() {
        let t = heisenberg_terms(&couplings(4, 0.0, [0.0, 0.0, 1.0]));
        assert_eq!(t.len(), 6);
        assert!(t.terms().iter().all(|t| t.factors[0].site < t.factors[1].site));
    }

    #[test]
    fn empty_and_eigenstate_actions() {
        let psi = random_state(3, 1);
        let out = apply_terms(&TermList::empty(3), &psi).unwrap();
        assert!(out.iter().all(|v| *v == c(0.0, 0.0)));

        let t = heisenberg_terms(&couplings(2, 0.0, [0.0, 0.0, 1.0]));
        let up_up = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let out = apply_terms(&t, &up_up).unwrap();
        assert_eq!(out, vec![c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn dimension_mismatch() {
        let t = heisenberg_terms(&couplings(3, 0.0, [0.0, 0.0, 1.0]));
        assert!(matches!(
            apply_terms(&t, &[c(1.0, 0.0); 4]),
            Err(Error::Dimension { expected: 8, got: 4 })
        ));
    }

    #[test]
    fn expectation_is_real_on_ten_sites() {
        let t = heisenberg_terms(&couplings(10, 3.0, [0.5, 1.0, 0.25]));
        let psi = random_state(10, 5);
        let hpsi = apply_terms(&t, &psi).unwrap();
        let e: C64 = psi.iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum();
        // Explicitly conjugated evaluation: ⟨Hψ|ψ⟩ = conj(⟨ψ|Hψ⟩).
        let e_conj: C64 = hpsi.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum();
        assert!((e - e_conj.conj()).norm() < 1e-12 * e.norm().max(1.0));
        assert!(e.im.abs() < 1e-12 * e.norm().max(1.0));
    }

    #[test]
    fn matches_kronecker_construction() {
        for (n, j, alpha) in [
            (2, [0.5, 1.0, 0.25], 0.0),
            (4, [0.5, 1.0, 0.25], 3.0),
            (5, [0.0, 0.0, 1.0], 6.0),
            (6, [1.0, -0.7, 0.3], 3.0),
        ] {
            let t = heisenberg_terms(&couplings(n, alpha, j));
            let h = dense_hamiltonian(&t);
            let psi = random_state(n, n as u64);
            let fast = apply_terms(&t, &psi).unwrap();
            for (row, f) in h.iter().zip(&fast) {
                let slow: C64 = row.iter().zip(&psi).map(|(a, b)| a * b).sum();
                assert!((slow - f).norm() <= 1e-13, "n={n}: {slow} vs {f}");
            }
        }
    }

    #[test]
    fn mixed_axis_terms_match_dense() {
        let terms = TermList::new(
            3,
            vec![
                Term {
                    coefficient: 0.7,
                    factors: [
                        PauliFactor {
                            site: 0,
                            axis: PauliAxis::Y,
                        },
                        PauliFactor {
                            site: 2,
                            axis: PauliAxis::X,
                        },
                    ],
                },
                Term {
                    coefficient: -0.3,
                    factors: [
                        PauliFactor {
                            site: 1,
                            axis: PauliAxis::Z,
                        },
                        PauliFactor {
                            site: 0,
                            axis: PauliAxis::Y,
                        },
                    ],
                },
            ],
        )
        .unwrap();
        let h = dense_hamiltonian(&terms);
        let psi = random_state(3, 9);
        let fast = apply_terms(&terms, &psi).unwrap();
        for (row, f) in h.iter().zip(&fast) {
            let slow: C64 = row.iter().zip(&psi).map(|(a, b)| a * b).sum();
            assert!((slow - f).norm() <= 1e-13);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn hermitian(seed in any::<u64>(), alpha in 0.0f64..6.0) {
            let t = heisenberg_terms(&couplings(6, alpha, [0.5, 1.0, 0.25]));
            let phi = random_state(6, seed);
            let psi = random_state(6, seed.wrapping_add(1));
            let hphi = apply_terms(&t, &phi).unwrap();
            let hpsi = apply_terms(&t, &psi).unwrap();
            let a: C64 = phi.iter().zip(&hpsi).map(|(x, y)| x.conj() * y).sum();
            let b: C64 = psi.iter().zip(&hphi).map(|(x, y)| x.conj() * y).sum();
            prop_assert!((a - b.conj()).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }
}
