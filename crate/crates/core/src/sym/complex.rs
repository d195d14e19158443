//! The truncated observable complex and its block decomposition.
//!
//! The differential `Q + hbar Delta` preserves the quantum grading
//! `block = sym_degree + 2 * hbar_degree` (classically: the Sym-degree), so
//! the truncated complex splits as a direct sum of finite blocks. A block is
//! *complete* when the caps cannot remove any of its basis vectors, in which
//! case its cohomology agrees exactly with the untruncated complex. Blocks
//! touched by a cap are computed but flagged, and are withheld from the
//! exact dimension report.

use std::collections::BTreeMap;

use crate::graded::{Cohomology, CochainComplex, Degree, GradedVectorSpace};
use crate::linalg::{SparseMat, SparseVec};
use crate::scalar::Scalar;
use crate::sym::{HbarPoly, Monomial, SymElement, SymSpace};
use crate::{Error, Result};

/// One cohomological degree of the truncated basis, grouped by block.
#[derive(Clone, Debug)]
struct DegreeBasis {
    /// sorted by (block, monomial, hbar power)
    items: Vec<(Monomial, usize)>,
    pos: BTreeMap<(Monomial, usize), usize>,
    /// block id -> contiguous index range within `items`
    block_ranges: BTreeMap<u32, std::ops::Range<usize>>,
}

/// The truncated symmetric-algebra complex of a [`SymSpace`].
#[derive(Clone, Debug)]
pub struct SymComplex<S> {
    space: SymSpace<S>,
    bases: BTreeMap<Degree, DegreeBasis>,
}

impl<S: Scalar> SymComplex<S> {
    pub fn build(space: SymSpace<S>) -> Result<Self> {
        let mut per_degree: BTreeMap<Degree, Vec<(u32, Monomial, usize)>> = BTreeMap::new();
        let hbar_range = if space.is_quantum() { space.hbar_cut() } else { 0 };
        enumerate_monomials(&space, &mut |m| {
            let d = m.degree(space.gens());
            for j in 0..=hbar_range {
                let block = space.block_of(m, j);
                per_degree.entry(d).or_default().push((block, m.clone(), j));
            }
        });
        let mut bases = BTreeMap::new();
        for (d, mut items) in per_degree {
            items.sort();
            let mut degree_basis = DegreeBasis {
                items: Vec::with_capacity(items.len()),
                pos: BTreeMap::new(),
                block_ranges: BTreeMap::new(),
            };
            for (block, m, j) in items {
                let idx = degree_basis.items.len();
                degree_basis
                    .block_ranges
                    .entry(block)
                    .or_insert(idx..idx)
                    .end = idx + 1;
                degree_basis.pos.insert((m.clone(), j), idx);
                degree_basis.items.push((m, j));
            }
            bases.insert(d, degree_basis);
        }
        Ok(SymComplex { space, bases })
    }

    pub fn space(&self) -> &SymSpace<S> {
        &self.space
    }

    pub fn degrees(&self) -> impl Iterator<Item = Degree> + '_ {
        self.bases.keys().copied()
    }

    pub fn dim(&self, degree: Degree) -> usize {
        self.bases.get(&degree).map_or(0, |b| b.items.len())
    }

    pub fn total_dim(&self) -> usize {
        self.bases.values().map(|b| b.items.len()).sum()
    }

    pub fn basis(&self, degree: Degree) -> &[(Monomial, usize)] {
        self.bases.get(&degree).map_or(&[], |b| b.items.as_slice())
    }

    pub fn block_ids(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .bases
            .values()
            .flat_map(|b| b.block_ranges.keys().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn block_complete(&self, block: u32) -> bool {
        self.space.block_complete(block)
    }

    /// The truncated differential of a single basis vector: `Q` keeps the
    /// hbar power, `Delta` raises it and is projected away past the cap
    /// (the projection still squares to zero; completeness tracks exactness).
    fn differential_of_basis(&self, m: &Monomial, j: usize) -> Vec<((Monomial, usize), S)> {
        let mut out = Vec::new();
        for (m2, c) in self.space.q_monomial(m) {
            out.push(((m2, j), c));
        }
        if self.space.is_quantum() && j + 1 <= self.space.hbar_cut() {
            for (m2, c) in self.space.delta_monomial(m) {
                out.push(((m2, j + 1), c));
            }
        }
        out
    }

    /// Full differential matrix in one degree.
    pub fn differential_matrix(&self, degree: Degree) -> SparseMat<S> {
        let ncols = self.dim(degree);
        let nrows = self.dim(degree + 1);
        let mut triplets = Vec::new();
        if let Some(basis) = self.bases.get(&degree) {
            let target = self.bases.get(&(degree + 1));
            for (col, (m, j)) in basis.items.iter().enumerate() {
                for ((m2, j2), c) in self.differential_of_basis(m, *j) {
                    let row = target
                        .and_then(|t| t.pos.get(&(m2, j2)))
                        .copied()
                        .expect("differential lands in the enumerated basis");
                    triplets.push((row, col, c));
                }
            }
        }
        SparseMat::from_triplets(nrows, ncols, &triplets)
    }

    /// The whole truncated complex as one `CochainComplex` (small models
    /// only; prefer per-block computation for anything sizable).
    pub fn as_cochain_complex(&self) -> CochainComplex<S> {
        let dims: BTreeMap<Degree, usize> =
            self.bases.iter().map(|(&d, b)| (d, b.items.len())).collect();
        let mut gspace = GradedVectorSpace::new(dims);
        for (&d, b) in &self.bases {
            let labels = b
                .items
                .iter()
                .map(|(m, j)| format!("{}", label_of(&self.space, m, *j)))
                .collect();
            gspace.set_labels(d, labels);
        }
        let mut blocks = BTreeMap::new();
        for &d in self.bases.keys() {
            let m = self.differential_matrix(d);
            if !m.is_zero() {
                blocks.insert(d, m);
            }
        }
        CochainComplex::new(gspace, blocks).expect("truncated differential squares to zero")
    }

    /// One block as its own complex, with the index maps into the full basis.
    pub fn block_complex(&self, block: u32) -> (CochainComplex<S>, BTreeMap<Degree, Vec<usize>>) {
        let mut dims = BTreeMap::new();
        let mut index_maps: BTreeMap<Degree, Vec<usize>> = BTreeMap::new();
        for (&d, b) in &self.bases {
            if let Some(range) = b.block_ranges.get(&block) {
                if !range.is_empty() {
                    dims.insert(d, range.len());
                    index_maps.insert(d, range.clone().collect());
                }
            }
        }
        let mut gspace = GradedVectorSpace::new(dims);
        for (&d, idxs) in &index_maps {
            let b = &self.bases[&d];
            gspace.set_labels(
                d,
                idxs.iter()
                    .map(|&i| {
                        let (m, j) = &b.items[i];
                        label_of(&self.space, m, *j)
                    })
            .collect(),
            );
        }
        let mut blocks = BTreeMap::new();
        for (&d, idxs) in &index_maps {
            let target = index_maps.get(&(d + 1));
            let basis = &self.bases[&d];
            let mut triplets = Vec::new();
            for (col, &i) in idxs.iter().enumerate() {
                let (m, j) = &basis.items[i];
                for ((m2, j2), c) in self.differential_of_basis(m, *j) {
                    let full_row = self.bases[&(d + 1)].pos[&(m2, j2)];
                    let row = target
                        .and_then(|t| t.binary_search(&full_row).ok())
                        .expect("block-preserving differential");
                    triplets.push((row, col, c));
                }
            }
            if !triplets.is_empty() {
                blocks.insert(
                    d,
                    SparseMat::from_triplets(
                        gspace.dim(d + 1),
                        gspace.dim(d),
                        &triplets,
                    ),
                );
            }
        }
        (
            CochainComplex::new(gspace, blocks).expect("block differential squares to zero"),
            index_maps,
        )
    }

    /// Convert a homogeneous element to coordinates in one degree.
    pub fn to_vector(&self, degree: Degree, elem: &SymElement<S>) -> Result<SparseVec<S>> {
        let basis = self
            .bases
            .get(&degree)
            .ok_or_else(|| Error::Dimension(format!("no basis in degree {}", degree)))?;
        let mut entries = Vec::new();
        for (m, poly) in elem.terms() {
            if m.degree(self.space.gens()) != degree {
                return Err(Error::Dimension(format!(
                    "element is not homogeneous of degree {}",
                    degree
                )));
            }
            for (j, c) in poly.coeffs().iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let idx = basis.pos.get(&(m.clone(), j)).ok_or_else(|| {
                    Error::CapExceeded("element lies outside the truncated basis".into())
                })?;
                entries.push((*idx, c.clone()));
            }
        }
        Ok(SparseVec::from_entries(entries))
    }

    pub fn from_vector(&self, degree: Degree, v: &SparseVec<S>) -> SymElement<S> {
        let basis = &self.bases[&degree];
        let mut out = SymElement::zero();
        for (i, c) in v.entries() {
            let (m, j) = &basis.items[*i];
            out.add_term(m.clone(), HbarPoly::monomial(c.clone(), *j));
        }
        out
    }

    /// Cohomology of every block (or those selected), with completeness.
    pub fn cohomology(&self) -> SymCohomology<S> {
        self.cohomology_filtered(|_| true)
    }

    pub fn cohomology_filtered(&self, select: impl Fn(u32) -> bool) -> SymCohomology<S> {
        let mut blocks = BTreeMap::new();
        for c in self.block_ids() {
            if !select(c) {
                continue;
            }
            let (complex, index_maps) = self.block_complex(c);
            let cohomology = complex.cohomology();
            blocks.insert(
                c,
                BlockCohomology {
                    complete: self.block_complete(c),
                    cohomology,
                    index_maps,
                },
            );
        }
        SymCohomology { blocks }
    }

    /// Structural operator identities on the full truncated basis:
    /// `d^2 = 0` (with the hbar-cap projection), `Delta^2 = 0`, and
    /// `Q Delta + Delta Q = 0` as exact operator identities.
    pub fn check_structure(&self) -> Result<()> {
        // d^2 = 0 including the projection at the hbar cap.
        let _ = self.as_cochain_complex();
        if !self.space.is_quantum() {
            return Ok(());
        }
        for basis in self.bases.values() {
            for (m, j) in &basis.items {
                if *j > 0 {
                    continue; // operators do not see the hbar power
                }
                let e = SymElement::from_monomial(m.clone(), HbarPoly::one());
                let dd = e.apply_delta(&self.space).apply_delta(&self.space);
                if !dd.is_zero() {
                    return Err(Error::Pairing(format!(
                        "Delta^2 != 0 on {:?}",
                        m
                    )));
                }
                let qd = e.apply_delta(&self.space).apply_q(&self.space);
                let dq = e.apply_q(&self.space).apply_delta(&self.space);
                if !qd.add(&dq).is_zero() {
                    return Err(Error::Pairing(format!(
                        "Q Delta + Delta Q != 0 on {:?}",
                        m
                    )));
                }
            }
        }
        Ok(())
    }
}

fn label_of<S: Scalar>(space: &SymSpace<S>, m: &Monomial, j: usize) -> String {
    let mono = if m.is_one() {
        "1".to_string()
    } else {
        m.factors()
            .iter()
            .map(|(g, mult)| {
                let l = space.gens().label(*g);
                if *mult == 1 {
                    l.to_string()
                } else {
                    format!("{}^{}", l, mult)
                }
            })
            .collect::<Vec<_>>()
            .join("·")
    };
    if j == 0 {
        mono
    } else {
        format!("ħ^{}·{}", j, mono)
    }
}

fn enumerate_monomials<S: Scalar>(space: &SymSpace<S>, f: &mut impl FnMut(&Monomial)) {
    fn rec<S: Scalar>(
        space: &SymSpace<S>,
        from: u32,
        current: &mut Vec<(u32, u32)>,
        sym_left: u32,
        f: &mut impl FnMut(&Monomial),
    ) {
        f(&Monomial { factors: current.clone() });
        if sym_left == 0 {
            return;
        }
        let n = space.gens().count() as u32;
        for g in from..n {
            let odd = space.gens().parity(g);
            let max_mult = if odd { 1 } else { sym_left };
            for mult in 1..=max_mult {
                current.push((g, mult));
                rec(space, g + 1, current, sym_left - mult, f);
                current.pop();
            }
        }
    }
    let mut current = Vec::new();
    rec(space, 0, &mut current, space.sym_cut(), f);
}

/// Per-block cohomology of a truncated Sym complex.
pub struct BlockCohomology<S> {
    pub complete: bool,
    pub cohomology: Cohomology<S>,
    pub index_maps: BTreeMap<Degree, Vec<usize>>,
}

pub struct SymCohomology<S> {
    blocks: BTreeMap<u32, BlockCohomology<S>>,
}

impl<S: Scalar> SymCohomology<S> {
    pub fn block(&self, c: u32) -> Option<&BlockCohomology<S>> {
        self.blocks.get(&c)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (u32, &BlockCohomology<S>)> {
        self.blocks.iter().map(|(&c, b)| (c, b))
    }

    /// Graded dimensions summed over complete blocks only: exact data.
    pub fn dims_exact(&self) -> BTreeMap<Degree, usize> {
        let mut out: BTreeMap<Degree, usize> = BTreeMap::new();
        for b in self.blocks.values().filter(|b| b.complete) {
            for (d, n) in b.cohomology.dims() {
                *out.entry(d).or_insert(0) += n;
            }
        }
        out.retain(|_, n| *n > 0);
        out
    }

    /// Dimensions of one block's cohomology.
    pub fn dims_in_block(&self, c: u32) -> BTreeMap<Degree, usize> {
        self.blocks.get(&c).map_or_else(BTreeMap::new, |b| b.cohomology.dims())
    }

    pub fn all_selected_complete(&self) -> bool {
        self.blocks.values().all(|b| b.complete)
    }
}

/// Exactness and class reduction for elements of a [`SymComplex`], split by
/// block.
pub struct SymClassCalculator<'a, S: Scalar> {
    complex: &'a SymComplex<S>,
    cohomology: BTreeMap<u32, BlockCohomology<S>>,
}

impl<'a, S: Scalar> SymClassCalculator<'a, S> {
    /// Compute only the blocks listed.
    pub fn new(complex: &'a SymComplex<S>, blocks: &[u32]) -> Self {
        let mut cohomology = BTreeMap::new();
        for &c in blocks {
            let (bc, index_maps) = complex.block_complex(c);
            cohomology.insert(
                c,
                BlockCohomology {
                    complete: complex.block_complete(c),
                    cohomology: bc.cohomology(),
                    index_maps,
                },
            );
        }
        SymClassCalculator { complex, cohomology }
    }

    fn split_by_block(
        &self,
        degree: Degree,
        v: &SparseVec<S>,
    ) -> BTreeMap<u32, SparseVec<S>> {
        let basis = self.complex.basis(degree);
        let mut split: BTreeMap<u32, Vec<(usize, S)>> = BTreeMap::new();
        for (i, c) in v.entries() {
            let (m, j) = &basis[*i];
            let block = self.complex.space().block_of(m, *j);
            split.entry(block).or_default().push((*i, c.clone()));
        }
        split
            .into_iter()
            .map(|(b, entries)| (b, SparseVec::from_entries(entries)))
            .collect()
    }

    /// Whether a homogeneous element is a coboundary.
    pub fn is_exact(&self, degree: Degree, elem: &SymElement<S>) -> Result<bool> {
        let v = self.complex.to_vector(degree, elem)?;
        for (block, part) in self.split_by_block(degree, &v) {
            let bc = self
                .cohomology
                .get(&block)
                .ok_or_else(|| Error::Model(format!("block {} not computed", block)))?;
            let local = to_block_coords(&bc.index_maps, degree, &part);
            if !bc.cohomology.is_exact(degree, &local) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Canonical representative of a cocycle's class.
    pub fn reduce_class(&self, degree: Degree, elem: &SymElement<S>) -> Result<SymElement<S>> {
        let v = self.complex.to_vector(degree, elem)?;
        let mut out = SymElement::zero();
        for (block, part) in self.split_by_block(degree, &v) {
            let bc = self
                .cohomology
                .get(&block)
                .ok_or_else(|| Error::Model(format!("block {} not computed", block)))?;
            let local = to_block_coords(&bc.index_maps, degree, &part);
            let reduced = bc.cohomology.reduce_class(degree, &local);
            let full = from_block_coords(&bc.index_maps, degree, &reduced);
            out = out.add(&self.complex.from_vector(degree, &full));
        }
        Ok(out)
    }
}

fn to_block_coords<S: Scalar>(
    index_maps: &BTreeMap<Degree, Vec<usize>>,
    degree: Degree,
    v: &SparseVec<S>,
) -> SparseVec<S> {
    let map = &index_maps[&degree];
    v.reindex(|i| map.binary_search(&i).ok())
}

fn from_block_coords<S: Scalar>(
    index_maps: &BTreeMap<Degree, Vec<usize>>,
    degree: Degree,
    v: &SparseVec<S>,
) -> SparseVec<S> {
    let map = &index_maps[&degree];
    v.reindex(|i| Some(map[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded::{ShiftedPairing, Symmetry};
    use crate::scalar::Rat;

    fn r(n: i64) -> Rat {
        Rat::from_int(n)
    }

    /// The shifted model of a symplectic vector space of dimension `2n`:
    /// n odd generators in degree -1 paired with n even in degree 0.
    fn pairs(n: usize, sym_cut: u32, hbar_cut: usize) -> SymComplex<Rat> {
        let space = GradedVectorSpace::from_dims(&[(-1, n), (0, n)]);
        let base = CochainComplex::<Rat>::with_zero_differential(space);
        let mut blocks = BTreeMap::new();
        blocks.insert(-1, SparseMat::identity(n));
        let pairing =
            ShiftedPairing::new(base.space(), 1, Some(Symmetry::Symmetric), blocks).unwrap();
        let s = SymSpace::quantum(&base, &pairing, sym_cut, hbar_cut).unwrap();
        SymComplex::build(s).unwrap()
    }

    #[test]
    fn zero_pairing_zero_differential_gives_zero_differential() {
        let space = GradedVectorSpace::from_dims(&[(0, 2)]);
        let base = CochainComplex::<Rat>::with_zero_differential(space);
        let s = SymSpace::classical(&base, 3);
        let sc = SymComplex::build(s).unwrap();
        for d in sc.degrees().collect::<Vec<_>>() {
            assert!(sc.differential_matrix(d).is_zero());
        }
        // dims of Sym^{<=3}(Q^2): 1 + 2 + 3 + 4 = 10 in degree 0.
        assert_eq!(sc.dim(0), 10);
    }

    #[test]
    fn structure_checks_pass_on_symplectic_pairs() {
        let sc = pairs(2, 3, 2);
        sc.check_structure().unwrap();
    }

    #[test]
    fn block_cohomology_of_one_pair_matches_weyl_dims() {
        // H(Sym(xi, x), Q = 0, hbar Delta) in complete blocks equals the
        // Weyl-algebra dimensions Sym^k paired with hbar powers: block c has
        // dim = sum_{k + 2j = c} dim Sym^k(V), V of dim 1, all in degree 0...
        // For one pair: dim Sym^k(Q) = 1, so block c contributes
        // floor(c/2) + 1 classes in degree 0? No: the quantum cohomology of
        // the pair is Q[hbar] in degree 0; block c should have H = Q in
        // degree 0 for every even-and-odd complete c.
        let sc = pairs(1, 5, 3);
        let h = sc.cohomology();
        for (c, b) in h.blocks() {
            if !b.complete {
                continue;
            }
            let dims = b.cohomology.dims();
            // The pair complex per block: x^c, x^{c-2} hbar, ..., xi x^{b}...
            // Cohomology: rank 1 in degree 0 (the class of x^c + ...)
            assert_eq!(dims.get(&0).copied().unwrap_or(0), 1, "block {}", c);
            assert_eq!(dims.get(&-1).copied().unwrap_or(0), 0, "block {}", c);
        }
    }

    #[test]
    fn incomplete_blocks_are_flagged() {
        let sc = pairs(1, 4, 1);
        // block 4 needs hbar^2 (x^4 -> hbar x^2 -> hbar^2 1): incomplete at
        // hbar cut 1 since 4 > 2*1 + 1.
        assert!(!sc.block_complete(4));
        assert!(sc.block_complete(3));
    }

    #[test]
    fn vector_round_trip() {
        let sc = pairs(2, 3, 2);
        let gens = sc.space().gens();
        let x0 = gens.id(0, 0);
        let xi1 = gens.id(-1, 1);
        let e = SymElement::generator(x0)
            .mul(sc.space(), &SymElement::generator(xi1))
            .unwrap()
            .scale_poly(&HbarPoly::monomial(r(5), 1));
        let v = sc.to_vector(-1, &e).unwrap();
        assert_eq!(sc.from_vector(-1, &v), e);
    }
}
