//! Truncated symmetric-algebra observables and the BV Laplacian.
//!
//! Observables of a free theory are the symmetric algebra on a (shifted)
//! cochain complex `F`, truncated at a Sym-degree cap, with coefficients in
//! `Q[hbar]` truncated at an hbar cap. The differential is the derivation
//! extension of `d_F`, plus `hbar * Delta_B` when a pairing `B` is present.
//!
//! `Delta_B` is the second-order operator fixed by `Delta = 0` on `Sym^{<=1}`
//! and `Delta(ab) = Delta(a) b + (-1)^{|a|} a Delta(b) + {a,b}`. Because a
//! degree `+1` pairing only couples odd generators to even generators, the
//! closed form used here is `Delta = sum_{o odd, e even} B(o, e) d/do d/de`
//! with graded left derivatives; the test suite pins this against a
//! brute-force expansion of the defining recursion.
//!
//! Truncation semantics: the caps are hard. Element-level operations whose
//! exact result would overflow a cap return [`Error::CapExceeded`] instead of
//! silently dropping terms. Cohomology is reported per quantum-grading block
//! (see [`complex`]), where a block is marked complete exactly when the caps
//! cannot affect it.

pub mod bv;
pub mod complex;
pub mod transfer;

use std::collections::BTreeMap;

use crate::graded::{CochainComplex, Degree, GradedVectorSpace, ShiftedPairing, Symmetry};
use crate::linalg::SparseVec;
use crate::scalar::Scalar;
use crate::{Error, Result};

pub use complex::SymComplex;

/// Identifier of a generator of the Sym base complex, ordered by
/// (degree, index-within-degree).
pub type GenId = u32;

/// Generator bookkeeping for the symmetric algebra on a complex.
#[derive(Clone, Debug)]
pub struct SymGenerators {
    space: GradedVectorSpace,
    /// gen id -> (degree, index within degree)
    gens: Vec<(Degree, usize)>,
    /// (degree, index) -> gen id lookup via per-degree offsets
    offsets: BTreeMap<Degree, u32>,
}

impl SymGenerators {
    pub fn new(space: &GradedVectorSpace) -> Self {
        let mut gens = Vec::with_capacity(space.total_dim());
        let mut offsets = BTreeMap::new();
        for d in space.degrees() {
            offsets.insert(d, gens.len() as u32);
            for i in 0..space.dim(d) {
                gens.push((d, i));
            }
        }
        SymGenerators { space: space.clone(), gens, offsets }
    }

    pub fn space(&self) -> &GradedVectorSpace {
        &self.space
    }

    pub fn count(&self) -> usize {
        self.gens.len()
    }

    pub fn degree(&self, g: GenId) -> Degree {
        self.gens[g as usize].0
    }

    pub fn parity(&self, g: GenId) -> bool {
        self.degree(g).rem_euclid(2) == 1
    }

    pub fn locate(&self, g: GenId) -> (Degree, usize) {
        self.gens[g as usize]
    }

    pub fn id(&self, degree: Degree, index: usize) -> GenId {
        debug_assert!(index < self.space.dim(degree));
        self.offsets[&degree] + index as u32
    }

    pub fn label(&self, g: GenId) -> &str {
        let (d, i) = self.locate(g);
        &self.space.labels(d)[i]
    }

    /// Interpret a homogeneous vector of the base complex as generators.
    pub fn from_linear<S: Scalar>(&self, degree: Degree, v: &SparseVec<S>) -> Vec<(GenId, S)> {
        v.entries().iter().map(|(i, c)| (self.id(degree, *i), c.clone())).collect()
    }
}

/// A sorted multiset of generators; odd generators have multiplicity at most
/// one (their squares vanish in the symmetric algebra).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial {
    factors: Vec<(GenId, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial { factors: Vec::new() }
    }

    pub fn generator(g: GenId) -> Self {
        Monomial { factors: vec![(g, 1)] }
    }

    pub fn factors(&self) -> &[(GenId, u32)] {
        &self.factors
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn sym_degree(&self) -> u32 {
        self.factors.iter().map(|(_, m)| m).sum()
    }

    pub fn degree(&self, gens: &SymGenerators) -> Degree {
        self.factors
            .iter()
            .map(|(g, m)| gens.degree(*g) * (*m as Degree))
            .sum()
    }

    fn parity_sum(&self, gens: &SymGenerators, range: std::ops::Range<usize>) -> u32 {
        self.factors[range]
            .iter()
            .filter(|(g, _)| gens.parity(*g))
            .map(|(_, m)| m)
            .sum()
    }

    /// Multiply by a generator on the right: `self * g`. Returns the sorted
    /// monomial and the Koszul sign, or `None` when an odd generator squares.
    pub fn mul_gen(&self, gens: &SymGenerators, g: GenId) -> Option<(Monomial, i8)> {
        let pos = self.factors.partition_point(|(h, _)| *h < g);
        let odd = gens.parity(g);
        let mut factors = self.factors.clone();
        if pos < factors.len() && factors[pos].0 == g {
            if odd {
                return None;
            }
            factors[pos].1 += 1;
        } else {
            factors.insert(pos, (g, 1));
        }
        // g crosses everything to its right in the original monomial.
        let crossings = if odd { self.parity_sum(gens, pos..self.factors.len()) } else { 0 };
        let sign = if crossings % 2 == 0 { 1 } else { -1 };
        Some((Monomial { factors }, sign))
    }

    /// Multiply by a generator on the left: `g * self`.
    pub fn mul_gen_left(&self, gens: &SymGenerators, g: GenId) -> Option<(Monomial, i8)> {
        let pos = self.factors.partition_point(|(h, _)| *h < g);
        let odd = gens.parity(g);
        let mut factors = self.factors.clone();
        if pos < factors.len() && factors[pos].0 == g {
            if odd {
                return None;
            }
            factors[pos].1 += 1;
        } else {
            factors.insert(pos, (g, 1));
        }
        // g crosses everything to its left of the insertion point.
        let crossings = if odd { self.parity_sum(gens, 0..pos) } else { 0 };
        let sign = if crossings % 2 == 0 { 1 } else { -1 };
        Some((Monomial { factors }, sign))
    }

    /// Full product `self * other` with the Koszul sign.
    pub fn mul(&self, gens: &SymGenerators, other: &Monomial) -> Option<(Monomial, i8)> {
        let mut acc = self.clone();
        let mut sign = 1i8;
        for (g, m) in &other.factors {
            for _ in 0..*m {
                let (next, s) = acc.mul_gen(gens, *g)?;
                acc = next;
                sign *= s;
            }
        }
        Some((acc, sign))
    }

    /// Graded left derivative by the generator `g`: returns the reduced
    /// monomial with the sign-and-multiplicity coefficient, or `None` when
    /// `g` does not divide the monomial.
    pub fn derivative<S: Scalar>(&self, gens: &SymGenerators, g: GenId) -> Option<(Monomial, S)> {
        let pos = self.factors.binary_search_by_key(&g, |(h, _)| *h).ok()?;
        let mult = self.factors[pos].1;
        let mut factors = self.factors.clone();
        if mult == 1 {
            factors.remove(pos);
        } else {
            factors[pos].1 -= 1;
        }
        let mut coeff = S::from_int(mult as i64);
        if gens.parity(g) {
            // d/dg crosses the factors before g.
            if self.parity_sum(gens, 0..pos) % 2 == 1 {
                coeff = -coeff;
            }
        }
        Some((Monomial { factors }, coeff))
    }

    /// Distinct generators occurring with odd/even parity.
    pub fn gens_by_parity(&self, gens: &SymGenerators) -> (Vec<GenId>, Vec<GenId>) {
        let mut odd = Vec::new();
        let mut even = Vec::new();
        for (g, _) in &self.factors {
            if gens.parity(*g) {
                odd.push(*g);
            } else {
                even.push(*g);
            }
        }
        (odd, even)
    }
}

/// A polynomial in the formal central degree-0 variable `hbar`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct HbarPoly<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> HbarPoly<S> {
    pub fn zero() -> Self {
        HbarPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: S) -> Self {
        let mut p = HbarPoly { coeffs: vec![c] };
        p.trim();
        p
    }

    pub fn one() -> Self {
        Self::constant(S::one())
    }

    /// `c * hbar^k`.
    pub fn monomial(c: S, k: usize) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![S::zero(); k + 1];
        coeffs[k] = c;
        HbarPoly { coeffs }
    }

    fn trim(&mut self) {
        while self.coeffs.last().map_or(false, |c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn hbar_degree(&self) -> Option<usize> {
        if self.is_zero() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).cloned().unwrap_or_else(S::zero)
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        for k in 0..n {
            coeffs.push(self.coeff(k) + other.coeff(k));
        }
        let mut p = HbarPoly { coeffs };
        p.trim();
        p
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        HbarPoly { coeffs: self.coeffs.iter().map(|v| v.clone() * c.clone()).collect() }
    }

    pub fn neg(&self) -> Self {
        self.scale(&(-S::one()))
    }

    /// Exact product (no cap).
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![S::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = coeffs[i + j].clone() + a.clone() * b.clone();
            }
        }
        let mut p = HbarPoly { coeffs };
        p.trim();
        p
    }

    /// Multiply by `hbar`, failing loudly past the cap.
    pub fn raise_hbar(&self, cap: usize) -> Result<Self> {
        if self.is_zero() {
            return Ok(Self::zero());
        }
        if self.coeffs.len() > cap {
            return Err(Error::CapExceeded(format!(
                "hbar degree {} would exceed cap {}",
                self.coeffs.len(),
                cap
            )));
        }
        let mut coeffs = vec![S::zero()];
        coeffs.extend(self.coeffs.iter().cloned());
        Ok(HbarPoly { coeffs })
    }

    /// Cap check for a freshly computed polynomial.
    pub fn check_cap(&self, cap: usize) -> Result<()> {
        match self.hbar_degree() {
            Some(d) if d > cap => Err(Error::CapExceeded(format!(
                "hbar degree {} exceeds cap {}",
                d, cap
            ))),
            _ => Ok(()),
        }
    }

    /// Specialize `hbar = 1`.
    pub fn eval_at_one(&self) -> S {
        self.coeffs.iter().fold(S::zero(), |acc, c| acc + c.clone())
    }

    /// Specialize `hbar = 0`.
    pub fn eval_at_zero(&self) -> S {
        self.coeff(0)
    }
}

/// The ambient data for truncated Sym computations: generators of the base
/// complex, the optional degree `+1` pairing driving the BV Laplacian, and
/// the hard caps.
#[derive(Clone, Debug)]
pub struct SymSpace<S> {
    base: CochainComplex<S>,
    gens: SymGenerators,
    /// nonzero pairing values B(g, h) on ordered generator pairs.
    pairing: BTreeMap<(GenId, GenId), S>,
    sym_cut: u32,
    hbar_cut: usize,
    quantum: bool,
}

impl<S: Scalar> SymSpace<S> {
    /// Observables of `base` without a Laplacian (classical envelope).
    pub fn classical(base: &CochainComplex<S>, sym_cut: u32) -> Self {
        let gens = SymGenerators::new(base.space());
        SymSpace {
            base: base.clone(),
            gens,
            pairing: BTreeMap::new(),
            sym_cut,
            hbar_cut: 0,
            quantum: false,
        }
    }

    /// Observables with the BV Laplacian of a degree `+1` graded-symmetric
    /// pairing. The pairing must be invariant for the differential of `base`
    /// (vanishing Green's defect); both conditions are validated.
    pub fn quantum(
        base: &CochainComplex<S>,
        pairing: &ShiftedPairing<S>,
        sym_cut: u32,
        hbar_cut: usize,
    ) -> Result<Self> {
        if pairing.degree() != 1 {
            return Err(Error::Pairing(format!(
                "BV pairing must have degree +1, got {}",
                pairing.degree()
            )));
        }
        if pairing.symmetry() != Some(Symmetry::Symmetric) {
            return Err(Error::Pairing(
                "BV pairing must be declared graded-symmetric on the shifted complex \
                 (the shift of a graded-antisymmetric pairing)"
                    .into(),
            ));
        }
        if pairing.space().dims() != base.space().dims() {
            return Err(Error::Pairing("pairing lives on a different space".into()));
        }
        let defect = crate::graded::pairing_invariance_defect(base, pairing);
        if !defect.is_zero() {
            return Err(Error::Pairing(
                "pairing is not invariant for the differential (nonzero Green's defect)".into(),
            ));
        }
        let gens = SymGenerators::new(base.space());
        let mut table = BTreeMap::new();
        for d in base.space().degrees() {
            let block = pairing.block(d);
            let e = -d - 1;
            for r in 0..base.space().dim(d) {
                for c in 0..base.space().dim(e) {
                    let v = block.get(r, c);
                    if !v.is_zero() {
                        table.insert((gens.id(d, r), gens.id(e, c)), v);
                    }
                }
            }
        }
        Ok(SymSpace {
            base: base.clone(),
            gens,
            pairing: table,
            sym_cut,
            hbar_cut,
            quantum: true,
        })
    }

    pub fn base(&self) -> &CochainComplex<S> {
        &self.base
    }

    pub fn gens(&self) -> &SymGenerators {
        &self.gens
    }

    pub fn sym_cut(&self) -> u32 {
        self.sym_cut
    }

    pub fn hbar_cut(&self) -> usize {
        self.hbar_cut
    }

    pub fn is_quantum(&self) -> bool {
        self.quantum
    }

    pub fn pairing_value(&self, a: GenId, b: GenId) -> S {
        self.pairing.get(&(a, b)).cloned().unwrap_or_else(S::zero)
    }

    /// The quantum-grading block of a basis vector: `sym_degree + 2 * hbar`.
    /// Both `Q` and `hbar * Delta` preserve it.
    pub fn block_of(&self, m: &Monomial, hbar: usize) -> u32 {
        m.sym_degree() + 2 * hbar as u32
    }

    /// A block is complete when the caps cannot cut off any differential in
    /// or out of it; cohomology of complete blocks is exact.
    pub fn block_complete(&self, block: u32) -> bool {
        if self.quantum {
            block <= self.sym_cut && block <= 2 * self.hbar_cut as u32 + 1
        } else {
            block <= self.sym_cut
        }
    }

    /// The BV Laplacian on a monomial:
    /// `Delta(m) = sum_{o odd, e even} B(o, e) d/do d/de (m)`.
    pub fn delta_monomial(&self, m: &Monomial) -> Vec<(Monomial, S)> {
        let (odd, even) = m.gens_by_parity(&self.gens);
        let mut out: BTreeMap<Monomial, S> = BTreeMap::new();
        for o in &odd {
            for e in &even {
                let b = self.pairing_value(*o, *e);
                if b.is_zero() {
                    continue;
                }
                let Some((m1, c1)) = m.derivative::<S>(&self.gens, *e) else { continue };
                let Some((m2, c2)) = m1.derivative::<S>(&self.gens, *o) else { continue };
                let total = b * c1 * c2;
                let slot = out.entry(m2).or_insert_with(S::zero);
                *slot = slot.clone() + total;
            }
        }
        out.into_iter().filter(|(_, c)| !c.is_zero()).collect()
    }

    /// The derivation extension of the base differential on a monomial.
    pub fn q_monomial(&self, m: &Monomial) -> Vec<(Monomial, S)> {
        let mut out: BTreeMap<Monomial, S> = BTreeMap::new();
        for (g, _mult) in m.factors() {
            let (gd, gi) = self.gens.locate(*g);
            let dcol = self.base.d(gd).col(gi).clone();
            if dcol.is_zero() {
                continue;
            }
            let Some((rest, coeff)) = m.derivative::<S>(&self.gens, *g) else { continue };
            for (w_idx, w_c) in dcol.entries() {
                let w = self.gens.id(gd + 1, *w_idx);
                let Some((m2, s2)) = rest.mul_gen_left(&self.gens, w) else { continue };
                let total = coeff.clone() * w_c.clone() * S::from_int(s2 as i64);
                let slot = out.entry(m2).or_insert_with(S::zero);
                *slot = slot.clone() + total;
            }
        }
        out.into_iter().filter(|(_, c)| !c.is_zero()).collect()
    }
}

/// A sparse element of the truncated symmetric algebra with `Q[hbar]`
/// coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SymElement<S> {
    terms: BTreeMap<Monomial, HbarPoly<S>>,
}

impl<S: Scalar> SymElement<S> {
    pub fn zero() -> Self {
        SymElement { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::from_monomial(Monomial::one(), HbarPoly::one())
    }

    pub fn from_monomial(m: Monomial, coeff: HbarPoly<S>) -> Self {
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(m, coeff);
        }
        SymElement { terms }
    }

    pub fn generator(g: GenId) -> Self {
        Self::from_monomial(Monomial::generator(g), HbarPoly::one())
    }

    /// A linear (Sym^1) element from a homogeneous vector of the base.
    pub fn linear(space: &SymSpace<S>, degree: Degree, v: &SparseVec<S>) -> Self {
        let mut out = Self::zero();
        for (g, c) in space.gens().from_linear(degree, v) {
            out.add_term(Monomial::generator(g), HbarPoly::constant(c));
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &HbarPoly<S>)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> HbarPoly<S> {
        self.terms.get(m).cloned().unwrap_or_else(HbarPoly::zero)
    }

    pub fn add_term(&mut self, m: Monomial, coeff: HbarPoly<S>) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&coeff);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale_poly(&HbarPoly::constant(-S::one())))
    }

    pub fn scale(&self, c: &S) -> Self {
        self.scale_poly(&HbarPoly::constant(c.clone()))
    }

    pub fn scale_poly(&self, p: &HbarPoly<S>) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.mul(p));
        }
        out
    }

    /// Multiply by `hbar`, respecting the cap.
    pub fn raise_hbar(&self, space: &SymSpace<S>) -> Result<Self> {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.raise_hbar(space.hbar_cut())?);
        }
        Ok(out)
    }

    /// Product in the truncated symmetric algebra; fails loudly past either
    /// cap.
    pub fn mul(&self, space: &SymSpace<S>, other: &Self) -> Result<Self> {
        let mut out = Self::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let Some((m, sign)) = m1.mul(space.gens(), m2) else { continue };
                if m.sym_degree() > space.sym_cut() {
                    return Err(Error::CapExceeded(format!(
                        "Sym degree {} exceeds cap {}",
                        m.sym_degree(),
                        space.sym_cut()
                    )));
                }
                let coeff = c1.mul(c2).scale(&S::from_int(sign as i64));
                coeff.check_cap(space.hbar_cut())?;
                out.add_term(m, coeff);
            }
        }
        Ok(out)
    }

    /// The classical differential (derivation extension of `d`).
    pub fn apply_q(&self, space: &SymSpace<S>) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            for (m2, v) in space.q_monomial(m) {
                out.add_term(m2, c.scale(&v));
            }
        }
        out
    }

    /// The BV Laplacian (no hbar factor).
    pub fn apply_delta(&self, space: &SymSpace<S>) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            for (m2, v) in space.delta_monomial(m) {
                out.add_term(m2, c.scale(&v));
            }
        }
        out
    }

    /// The full differential `Q + hbar * Delta` (or `Q` classically).
    pub fn apply_differential(&self, space: &SymSpace<S>) -> Result<Self> {
        let q = self.apply_q(space);
        if !space.is_quantum() {
            return Ok(q);
        }
        Ok(q.add(&self.apply_delta(space).raise_hbar(space)?))
    }

    /// Specialize `hbar = 1`, collapsing coefficients to scalars.
    pub fn specialize_hbar_one(&self) -> Vec<(Monomial, S)> {
        self.terms
            .iter()
            .map(|(m, c)| (m.clone(), c.eval_at_one()))
            .filter(|(_, c)| !c.is_zero())
            .collect()
    }

    /// Drop all terms of positive hbar degree (the classical limit).
    pub fn classical_part(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), HbarPoly::constant(c.eval_at_zero()));
        }
        out
    }

    /// Serialize as the documented JSON schema: a list of
    /// `{"monomial": [[degree, index, multiplicity], ...], "coeff": ["p/q", ...]}`.
    pub fn to_json(&self, space: &SymSpace<S>) -> serde_json::Value {
        let items: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mono: Vec<serde_json::Value> = m
                    .factors()
                    .iter()
                    .map(|(g, mult)| {
                        let (d, i) = space.gens().locate(*g);
                        serde_json::json!([d, i, mult])
                    })
                    .collect();
                let coeffs: Vec<String> =
                    c.coeffs().iter().map(|v| v.to_frac_string()).collect();
                serde_json::json!({ "monomial": mono, "coeff": coeffs })
            })
            .collect();
        serde_json::Value::Array(items)
    }

    pub fn from_json(space: &SymSpace<S>, value: &serde_json::Value) -> Result<Self> {
        let arr = value
            .as_array()
            .ok_or_else(|| Error::Model("SymElement JSON must be a list".into()))?;
        let mut out = Self::zero();
        for item in arr {
            let mono = item
                .get("monomial")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Model("missing monomial".into()))?;
            let mut m = Monomial::one();
            for triple in mono {
                let t = triple
                    .as_array()
                    .filter(|t| t.len() == 3)
                    .ok_or_else(|| Error::Model("monomial entries are triples".into()))?;
                let d = t[0].as_i64().ok_or_else(|| Error::Model("bad degree".into()))? as Degree;
                let i = t[1].as_u64().ok_or_else(|| Error::Model("bad index".into()))? as usize;
                let mult = t[2].as_u64().ok_or_else(|| Error::Model("bad multiplicity".into()))?;
                if i >= space.base().dim(d) {
                    return Err(Error::Model(format!("no generator ({}, {})", d, i)));
                }
                let g = space.gens().id(d, i);
                for _ in 0..mult {
                    let Some((next, sign)) = m.mul_gen(space.gens(), g) else {
                        return Err(Error::Model("odd generator squared".into()));
                    };
                    if sign != 1 {
                        return Err(Error::Model(
                            "serialized monomials must list factors in sorted order".into(),
                        ));
                    }
                    m = next;
                }
            }
            let coeffs = item
                .get("coeff")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Model("missing coeff".into()))?;
            let mut parsed = Vec::with_capacity(coeffs.len());
            for c in coeffs {
                let s = c.as_str().ok_or_else(|| Error::Model("coeff entries are strings".into()))?;
                parsed.push(S::parse_frac(s)?);
            }
            let mut poly = HbarPoly { coeffs: parsed };
            poly.trim();
            out.add_term(m, poly);
        }
        Ok(out)
    }
}

/// Build the (quantum) observable complex `Sym(F)[hbar]` with differential
/// `Q + hbar Delta_B`; with `pairing = None` this is the classical envelope.
pub fn sym_observables<S: Scalar>(
    base: &CochainComplex<S>,
    pairing: Option<&ShiftedPairing<S>>,
    sym_cut: u32,
    hbar_cut: usize,
) -> Result<SymComplex<S>> {
    let space = match pairing {
        Some(b) => SymSpace::quantum(base, b, sym_cut, hbar_cut)?,
        None => SymSpace::classical(base, sym_cut),
    };
    SymComplex::build(space)
}

/// The twisted envelope of a boundary complex: `Sym(L_perp)[hbar]` with
/// differential `Q_{L_perp} + hbar Delta_mu` for the twisting cocycle `mu`.
/// Rejects `mu` that is not a cocycle for the differential (nonzero defect).
pub fn twisted_envelope<S: Scalar>(
    lperp: &CochainComplex<S>,
    mu: &ShiftedPairing<S>,
    sym_cut: u32,
    hbar_cut: usize,
) -> Result<SymComplex<S>> {
    if mu.is_zero() {
        // Untwisted: same complex as the classical envelope, but keep the
        // hbar coefficients so the result matches Sym(..)[hbar].
        let space = SymSpace::quantum(
            lperp,
            &ShiftedPairing::new(
                lperp.space(),
                1,
                Some(Symmetry::Symmetric),
                BTreeMap::new(),
            )?,
            sym_cut,
            hbar_cut,
        )?;
        return SymComplex::build(space);
    }
    let space = SymSpace::quantum(lperp, mu, sym_cut, hbar_cut)?;
    SymComplex::build(space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMat;
    use crate::scalar::Rat;

    fn r(n: i64) -> Rat {
        Rat::from_int(n)
    }

    /// One symplectic pair: xi in degree -1, x in degree 0, B(xi, x) = 1,
    /// zero differential. This is the shifted model of a 2-dim symplectic
    /// vector space.
    fn one_pair() -> SymSpace<Rat> {
        let space = GradedVectorSpace::from_dims(&[(-1, 1), (0, 1)]);
        let base = CochainComplex::<Rat>::with_zero_differential(space);
        let mut blocks = BTreeMap::new();
        blocks.insert(-1, SparseMat::from_dense(&[vec![r(1)]]));
        let pairing = ShiftedPairing::new(
            base.space(),
            1,
            Some(Symmetry::Symmetric),
            blocks,
        )
        .unwrap();
        SymSpace::quantum(&base, &pairing, 4, 3).unwrap()
    }

    #[test]
    fn delta_on_quadratic_is_the_pairing() {
        let s = one_pair();
        let xi = s.gens().id(-1, 0);
        let x = s.gens().id(0, 0);
        let (m, sign) = Monomial::generator(xi).mul_gen(s.gens(), x).unwrap();
        assert_eq!(sign, 1);
        let out = s.delta_monomial(&m);
        assert_eq!(out, vec![(Monomial::one(), r(1))]);
    }

    #[test]
    fn delta_vanishes_on_linear_and_constants() {
        let s = one_pair();
        let xi = s.gens().id(-1, 0);
        assert!(s.delta_monomial(&Monomial::generator(xi)).is_empty());
        assert!(s.delta_monomial(&Monomial::one()).is_empty());
    }

    #[test]
    fn odd_generator_squares_to_zero() {
        let s = one_pair();
        let xi = s.gens().id(-1, 0);
        assert!(Monomial::generator(xi).mul_gen(s.gens(), xi).is_none());
    }

    #[test]
    fn koszul_sign_on_transposition() {
        // Two odd generators anticommute.
        let space = GradedVectorSpace::from_dims(&[(-1, 2)]);
        let base = CochainComplex::<Rat>::with_zero_differential(space);
        let s = SymSpace::classical(&base, 3);
        let a = s.gens().id(-1, 0);
        let b = s.gens().id(-1, 1);
        let (m_ab, s_ab) = Monomial::generator(a).mul_gen(s.gens(), b).unwrap();
        let (m_ba, s_ba) = Monomial::generator(b).mul_gen(s.gens(), a).unwrap();
        assert_eq!(m_ab, m_ba);
        assert_eq!(s_ab, 1);
        assert_eq!(s_ba, -1);
    }

    #[test]
    fn hbar_poly_cap_is_loud() {
        let p = HbarPoly::monomial(r(1), 2);
        assert!(p.raise_hbar(2).is_ok());
        assert!(p.raise_hbar(1).is_err());
        assert_eq!(p.eval_at_one(), r(1));
    }

    #[test]
    fn product_cap_is_loud() {
        let s = one_pair(); // sym cut 4
        let x = s.gens().id(0, 0);
        let x1 = SymElement::generator(x);
        let x2 = x1.mul(&s, &x1).unwrap();
        let x4 = x2.mul(&s, &x2).unwrap();
        assert_eq!(x4.num_terms(), 1);
        assert!(x4.mul(&s, &x1).is_err());
    }

    #[test]
    fn sym_element_json_round_trip() {
        let s = one_pair();
        let xi = s.gens().id(-1, 0);
        let x = s.gens().id(0, 0);
        let e = SymElement::generator(xi)
            .mul(&s, &SymElement::generator(x))
            .unwrap()
            .scale_poly(&HbarPoly::monomial(Rat::from_frac(3, 2), 1));
        let json = e.to_json(&s);
        let back = SymElement::from_json(&s, &json).unwrap();
        assert_eq!(back, e);
    }

    /// Independent brute-force expansion of the defining recursion
    /// `Delta(a b) = Delta(a) b + (-1)^{|a|} a Delta(b) + {a, b}` over every
    /// split of the monomial into a generator times the rest; all splits must
    /// agree with the closed-form engine.
    fn delta_recursive(s: &SymSpace<Rat>, m: &Monomial) -> Vec<(Monomial, Rat)> {
        fn to_map(v: Vec<(Monomial, Rat)>) -> BTreeMap<Monomial, Rat> {
            let mut out = BTreeMap::new();
            for (m, c) in v {
                let slot = out.entry(m).or_insert_with(Rat::zero);
                *slot = slot.clone() + c;
            }
            out.retain(|_, c| !c.is_zero());
            out
        }
        // flatten to a sequence of single generators
        let mut seq = Vec::new();
        for (g, mult) in m.factors() {
            for _ in 0..*mult {
                seq.push(*g);
            }
        }
        if seq.len() <= 1 {
            return Vec::new();
        }
        let mut results: Vec<BTreeMap<Monomial, Rat>> = Vec::new();
        // every split position: a = first gen, b = rest (recursion), plus
        // the bracket {a, b} pairing a with each factor of b.
        let a = seq[0];
        let rest: Vec<GenId> = seq[1..].to_vec();
        let rest_mono = {
            let mut acc = Monomial::one();
            for g in &rest {
                let (next, _sign) = acc.mul_gen(s.gens(), *g).unwrap();
                acc = next;
            }
            acc
        };
        // Delta(a) = 0 on generators; the recursion gives
        // (-1)^{|a|} a * Delta(rest) + {a, rest}.
        let mut total: BTreeMap<Monomial, Rat> = BTreeMap::new();
        let sgn_a = if s.gens().parity(a) { -Rat::one() } else { Rat::one() };
        for (m2, c) in delta_recursive(s, &rest_mono) {
            if let Some((m3, s3)) = m2.mul_gen_left(s.gens(), a) {
                let slot = total.entry(m3).or_insert_with(Rat::zero);
                *slot = slot.clone() + sgn_a.clone() * c * Rat::from_int(s3 as i64);
            }
        }
        // {a, rest} = sum_v +/- B(a, v) rest/v, bringing v to the front of
        // rest; the left-derivative sign is exactly the derivation sign here
        // because |v| = |a| + 1 mod 2 on pairing pairs.
        for (v, _) in rest_mono.factors() {
            let b = s.pairing_value(a, *v);
            if b.is_zero() {
                continue;
            }
            let (m2, c2) = rest_mono.derivative::<Rat>(s.gens(), *v).unwrap();
            let slot = total.entry(m2).or_insert_with(Rat::zero);
            *slot = slot.clone() + b * c2;
        }
        results.push(total);
        let first = results[0].clone();
        // cross-check against the engine-independent pairwise expansion:
        // Delta(m) = sum over unordered pairs of positions i < j of
        // +/- B(g_i, g_j) m / (g_i g_j).
        let mut pairwise: BTreeMap<Monomial, Rat> = BTreeMap::new();
        for i in 0..seq.len() {
            for j in (i + 1)..seq.len() {
                let b = s.pairing_value(seq[i], seq[j]);
                if b.is_zero() {
                    continue;
                }
                // sign: move g_i to front, then g_j to front of the rest.
                let mut sign = 0u32;
                let par = |g: GenId| s.gens().parity(g) as u32;
                for k in 0..i {
                    sign += par(seq[i]) * par(seq[k]);
                }
                for k in 0..j {
                    if k != i {
                        sign += par(seq[j]) * par(seq[k]);
                    }
                }
                let mut m2 = Monomial::one();
                let mut msign = 1i8;
                for (k, g) in seq.iter().enumerate() {
                    if k != i && k != j {
                        let (next, s2) = m2.mul_gen(s.gens(), *g).unwrap();
                        m2 = next;
                        msign *= s2;
                    }
                }
                let c = b
                    * Rat::from_int(if sign % 2 == 0 { 1 } else { -1 })
                    * Rat::from_int(msign as i64);
                let slot = pairwise.entry(m2).or_insert_with(Rat::zero);
                *slot = slot.clone() + c;
            }
        }
        pairwise.retain(|_, c| !c.is_zero());
        assert_eq!(
            to_map(first.clone().into_iter().collect()),
            pairwise,
            "recursive and pairwise oracles disagree"
        );
        first.into_iter().collect()
    }

    #[test]
    fn delta_matches_recursion_on_cubics() {
        // Two symplectic pairs so cross terms appear.
        let space = GradedVectorSpace::from_dims(&[(-1, 2), (0, 2)]);
        let base = CochainComplex::<Rat>::with_zero_differential(space);
        let mut blocks = BTreeMap::new();
        blocks.insert(
            -1,
            SparseMat::from_dense(&[vec![r(1), r(2)], vec![r(-1), r(3)]]),
        );
        let pairing =
            ShiftedPairing::new(base.space(), 1, Some(Symmetry::Symmetric), blocks).unwrap();
        let s = SymSpace::quantum(&base, &pairing, 5, 3).unwrap();
        // enumerate all monomials of sym degree exactly 3
        let gens: Vec<GenId> = (0..s.gens().count() as u32).collect();
        let mut cubics = Vec::new();
        for &a in &gens {
            for &b in &gens {
                for &c in &gens {
                    if a <= b && b <= c {
                        let m = Monomial::generator(a);
                        let Some((m, _)) = m.mul_gen(s.gens(), b) else { continue };
                        let Some((m, _)) = m.mul_gen(s.gens(), c) else { continue };
                        cubics.push(m);
                    }
                }
            }
        }
        assert!(!cubics.is_empty());
        for m in cubics {
            let engine: BTreeMap<Monomial, Rat> = s.delta_monomial(&m).into_iter().collect();
            let oracle: BTreeMap<Monomial, Rat> = delta_recursive(&s, &m).into_iter().collect();
            assert_eq!(engine, oracle, "mismatch on {:?}", m);
        }
    }
}
