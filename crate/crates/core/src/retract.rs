//! Deformation retractions and the homological perturbation lemma.
//!
//! Conventions: a retraction consists of chain maps `incl : small -> big`,
//! `proj : big -> small` and a degree `-1` homotopy `k` on `big` with
//!
//! * `proj ∘ incl = id`
//! * `incl ∘ proj - id = d k + k d`
//! * side conditions `k ∘ incl = 0`, `proj ∘ k = 0`, `k ∘ k = 0`.
//!
//! All five identities are validated exactly at construction. When the side
//! conditions fail, [`DeformationRetraction::normalize`] repairs them by the
//! standard `k -> (1-ip) k (1-ip)` sandwich followed by `k -> k d k` passes.


use crate::graded::{CochainComplex, GradedMap};
use std::collections::BTreeMap;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Validated deformation-retraction data.
#[derive(Clone, Debug)]
pub struct DeformationRetraction<S> {
    big: CochainComplex<S>,
    small: CochainComplex<S>,
    incl: GradedMap<S>,
    proj: GradedMap<S>,
    homotopy: GradedMap<S>,
}

impl<S: Scalar> DeformationRetraction<S> {
    /// Build and validate all five identities plus chain-map conditions.
    pub fn new(
        big: CochainComplex<S>,
        small: CochainComplex<S>,
        incl: GradedMap<S>,
        proj: GradedMap<S>,
        homotopy: GradedMap<S>,
    ) -> Result<Self> {
        let r = DeformationRetraction { big, small, incl, proj, homotopy };
        r.validate()?;
        Ok(r)
    }

    /// Build from data whose side conditions may fail, normalizing first.
    pub fn new_normalized(
        big: CochainComplex<S>,
        small: CochainComplex<S>,
        incl: GradedMap<S>,
        proj: GradedMap<S>,
        homotopy: GradedMap<S>,
    ) -> Result<Self> {
        let mut r = DeformationRetraction { big, small, incl, proj, homotopy };
        r.check_shapes_and_chain_maps()?;
        r.check_pi_identity()?;
        r.normalize()?;
        Ok(r)
    }

    pub fn big(&self) -> &CochainComplex<S> {
        &self.big
    }

    pub fn small(&self) -> &CochainComplex<S> {
        &self.small
    }

    pub fn incl(&self) -> &GradedMap<S> {
        &self.incl
    }

    pub fn proj(&self) -> &GradedMap<S> {
        &self.proj
    }

    pub fn homotopy(&self) -> &GradedMap<S> {
        &self.homotopy
    }

    /// The identity retraction on a complex (small = big, k = 0).
    pub fn identity(complex: &CochainComplex<S>) -> Self {
        let id = GradedMap::identity(complex.space());
        let k = GradedMap::zero(complex.space(), complex.space(), -1);
        DeformationRetraction {
            big: complex.clone(),
            small: complex.clone(),
            incl: id.clone(),
            proj: id,
            homotopy: k,
        }
    }

    fn check_shapes_and_chain_maps(&self) -> Result<()> {
        if self.incl.shift() != 0 || self.proj.shift() != 0 {
            return Err(Error::Retraction("incl/proj must have degree 0".into()));
        }
        if self.homotopy.shift() != -1 {
            return Err(Error::Retraction("homotopy must have degree -1".into()));
        }
        for (name, m, src, tgt) in [
            ("incl", &self.incl, self.small.space(), self.big.space()),
            ("proj", &self.proj, self.big.space(), self.small.space()),
            ("homotopy", &self.homotopy, self.big.space(), self.big.space()),
        ] {
            if m.source().dims() != src.dims() || m.target().dims() != tgt.dims() {
                return Err(Error::Retraction(format!("{} has wrong source/target", name)));
            }
        }
        for (name, m, src, tgt) in [
            ("incl", &self.incl, &self.small, &self.big),
            ("proj", &self.proj, &self.big, &self.small),
        ] {
            let defect = tgt
                .differential()
                .compose(m)
                .sub(&m.compose(src.differential()));
            if !defect.is_zero() {
                return Err(Error::Retraction(format!("{} is not a chain map", name)));
            }
        }
        Ok(())
    }

    fn check_pi_identity(&self) -> Result<()> {
        let pi = self.proj.compose(&self.incl);
        if pi != GradedMap::identity(self.small.space()) {
            return Err(Error::Retraction("proj ∘ incl != id".into()));
        }
        Ok(())
    }

    fn check_homotopy_identity(&self) -> Result<()> {
        let ip = self.incl.compose(&self.proj);
        let defect = ip
            .sub(&GradedMap::identity(self.big.space()))
            .sub(&self.big.differential().compose(&self.homotopy))
            .sub(&self.homotopy.compose(self.big.differential()));
        if !defect.is_zero() {
            return Err(Error::Retraction("incl ∘ proj - id != d k + k d".into()));
        }
        Ok(())
    }

    fn side_conditions_hold(&self) -> bool {
        self.homotopy.compose(&self.incl).is_zero()
            && self.proj.compose(&self.homotopy).is_zero()
            && self.homotopy.compose(&self.homotopy).is_zero()
    }

    /// Validate all five identities.
    pub fn validate(&self) -> Result<()> {
        self.check_shapes_and_chain_maps()?;
        self.check_pi_identity()?;
        self.check_homotopy_identity()?;
        if !self.side_conditions_hold() {
            return Err(Error::Retraction("side conditions k i = 0, p k = 0, k k = 0 fail".into()));
        }
        Ok(())
    }

    /// Enforce the side conditions: sandwich `k` between `(1 - i p)`, then
    /// apply `k -> k d k` passes until `k k = 0` stabilizes.
    fn normalize(&mut self) -> Result<()> {
        let one = GradedMap::identity(self.big.space());
        let a = one.sub(&self.incl.compose(&self.proj));
        self.homotopy = a.compose(&self.homotopy).compose(&a);
        for _ in 0..3 {
            if self.side_conditions_hold() && self.check_homotopy_identity().is_ok() {
                return self.validate();
            }
            self.homotopy = self
                .homotopy
                .compose(self.big.differential())
                .compose(&self.homotopy);
        }
        self.validate()
    }
}

/// The homological perturbation lemma.
///
/// Given a retraction and a degree `+1` perturbation `delta` of the big
/// differential with `(d + delta)^2 = 0` and `delta ∘ k` nilpotent, returns
/// the perturbed retraction between `(big, d + delta)` and the small complex
/// with differential `d_small + p A i`, where `A = delta (1 - k delta)^{-1}`
/// is computed as a finite geometric sum.
///
/// The nilpotence requirement is detected by iteration: if the sum has not
/// terminated after `filtration_bound` steps the perturbation is rejected.
pub fn hpl<S: Scalar>(
    r: &DeformationRetraction<S>,
    delta: &GradedMap<S>,
    filtration_bound: usize,
) -> Result<DeformationRetraction<S>> {
    if delta.shift() != 1 {
        return Err(Error::Retraction("perturbation must have degree +1".into()));
    }
    if delta.source().dims() != r.big().space().dims()
        || delta.target().dims() != r.big().space().dims()
    {
        return Err(Error::Retraction("perturbation must be an endomorphism of big".into()));
    }
    // (d + delta)^2 = 0 on the big complex.
    let d_new = r.big().differential().add(delta);
    let sq = d_new.compose(&d_new);
    if !sq.is_zero() {
        return Err(Error::Retraction("(d + delta)^2 != 0".into()));
    }
    if delta.is_zero() {
        return Ok(r.clone());
    }
    // A = delta + delta k delta + ... , a finite sum under nilpotence.
    let kd = r.homotopy().compose(delta);
    let mut a = delta.clone();
    let mut term = delta.clone();
    let mut terminated = false;
    for _ in 0..filtration_bound {
        term = term.compose(&kd);
        if term.is_zero() {
            terminated = true;
            break;
        }
        a = a.add(&term);
    }
    if !terminated {
        return Err(Error::NotNilpotent(filtration_bound));
    }

    let big = CochainComplex::new(r.big().space().clone(), d_new.blocks().clone())?;
    let small_d = r
        .small()
        .differential()
        .add(&r.proj().compose(&a).compose(r.incl()));
    let small = CochainComplex::new(r.small().space().clone(), small_d.blocks().clone())?;
    let incl = r.incl().add(&r.homotopy().compose(&a).compose(r.incl()));
    let proj = r.proj().add(&r.proj().compose(&a).compose(r.homotopy()));
    let homotopy = r.homotopy().add(&r.homotopy().compose(&a).compose(r.homotopy()));
    DeformationRetraction::new(big, small, incl, proj, homotopy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded::GradedVectorSpace;
    use crate::linalg::SparseMat;
    use crate::scalar::Rat;

    fn r(n: i64) -> Rat {
        Rat::from_int(n)
    }

    /// Acyclic two-term complex Q --c--> Q retracting onto 0.
    fn acyclic_retraction(c: i64) -> DeformationRetraction<Rat> {
        let space = GradedVectorSpace::from_dims(&[(0, 1), (1, 1)]);
        let mut blocks = BTreeMap::new();
        blocks.insert(0, SparseMat::from_dense(&[vec![r(c)]]));
        let big = CochainComplex::new(space.clone(), blocks).unwrap();
        let small = CochainComplex::with_zero_differential(GradedVectorSpace::default());
        let incl = GradedMap::zero(small.space(), big.space(), 0);
        let proj = GradedMap::zero(big.space(), small.space(), 0);
        // k: degree 1 -> degree 0 with d k + k d = -id  =>  k = -1/c.
        let mut kb = BTreeMap::new();
        kb.insert(1, SparseMat::from_dense(&[vec![Rat::from_frac(-1, c)]]));
        let homotopy = GradedMap::new(big.space(), big.space(), -1, kb).unwrap();
        DeformationRetraction::new(big, small, incl, proj, homotopy).unwrap()
    }

    #[test]
    fn identity_retraction_validates() {
        let space = GradedVectorSpace::from_dims(&[(0, 2), (1, 1)]);
        let mut blocks = BTreeMap::new();
        blocks.insert(0, SparseMat::from_dense(&[vec![r(1), r(0)]]));
        let c = CochainComplex::new(space, blocks).unwrap();
        let id = DeformationRetraction::identity(&c);
        id.validate().unwrap();
    }

    #[test]
    fn hpl_with_zero_perturbation_is_identity() {
        let ret = acyclic_retraction(1);
        let delta = GradedMap::zero(ret.big().space(), ret.big().space(), 1);
        let out = hpl(&ret, &delta, 8).unwrap();
        assert_eq!(out.small().space().dims(), ret.small().space().dims());
        assert_eq!(out.homotopy(), ret.homotopy());
    }

    #[test]
    fn hpl_perturbs_differential_and_keeps_identities() {
        // Big: Q^2 --id--> Q^2 retracting onto 0, k = -id in degree 1.
        let space = GradedVectorSpace::from_dims(&[(0, 2), (1, 2)]);
        let mut blocks = BTreeMap::new();
        blocks.insert(0, SparseMat::identity(2));
        let big = CochainComplex::new(space.clone(), blocks).unwrap();
        let small = CochainComplex::with_zero_differential(GradedVectorSpace::default());
        let incl = GradedMap::zero(small.space(), big.space(), 0);
        let proj = GradedMap::zero(big.space(), small.space(), 0);
        let mut kb = BTreeMap::new();
        kb.insert(1, SparseMat::identity(2).scale(&r(-1)));
        let homotopy = GradedMap::new(&space, &space, -1, kb).unwrap();
        let ret = DeformationRetraction::new(big, small, incl, proj, homotopy).unwrap();
        // Strictly triangular perturbation: basis 1 of degree 0 goes to
        // basis 0 of degree 1, so delta ∘ k is nilpotent.
        let mut db = BTreeMap::new();
        db.insert(0, SparseMat::from_dense(&[vec![r(0), r(1)], vec![r(0), r(0)]]));
        let delta = GradedMap::new(&space, &space, 1, db).unwrap();
        let out = hpl(&ret, &delta, 8).unwrap();
        out.validate().unwrap();
        assert_eq!(out.big().d(0).get(0, 1), r(1));
        // Non-nilpotent delta ∘ k must be rejected via the bound.
        let mut db = BTreeMap::new();
        db.insert(0, SparseMat::identity(2));
        let bad = GradedMap::new(&space, &space, 1, db).unwrap();
        assert!(matches!(hpl(&ret, &bad, 8), Err(Error::NotNilpotent(8))));
    }

    #[test]
    fn hpl_rejects_non_square_zero_perturbation() {
        // On a three-term complex with d = 0, a delta with delta^2 != 0.
        let space = GradedVectorSpace::from_dims(&[(0, 1), (1, 1), (2, 1)]);
        let big = CochainComplex::<Rat>::with_zero_differential(space.clone());
        let ret = DeformationRetraction::identity(&big);
        let mut db = BTreeMap::new();
        db.insert(0, SparseMat::from_dense(&[vec![r(1)]]));
        db.insert(1, SparseMat::from_dense(&[vec![r(1)]]));
        let delta = GradedMap::new(&space, &space, 1, db).unwrap();
        assert!(hpl(&ret, &delta, 8).is_err());
    }

    #[test]
    fn normalization_cleans_sandwichable_junk() {
        // Start from a valid retraction and pollute k by i s p terms, which
        // the (1 - i p) sandwich removes exactly.
        let space = GradedVectorSpace::from_dims(&[(0, 1), (1, 1)]);
        let mut blocks = BTreeMap::new();
        blocks.insert(0, SparseMat::from_dense(&[vec![r(1)]]));
        let big = CochainComplex::new(space.clone(), blocks).unwrap();
        let small = big.clone();
        let id = GradedMap::identity(big.space());
        let zero_k = GradedMap::zero(big.space(), big.space(), -1);
        // identity retraction has k = 0; pollute with an arbitrary degree -1
        // map, which is of the form i s p here since i = p = id. The sandwich
        // (1-ip) k (1-ip) = 0 restores it.
        let mut junk = BTreeMap::new();
        junk.insert(1, SparseMat::from_dense(&[vec![r(7)]]));
        let polluted = zero_k.add(&GradedMap::new(&space, &space, -1, junk).unwrap());
        let fixed =
            DeformationRetraction::new_normalized(big, small, id.clone(), id, polluted).unwrap();
        assert!(fixed.homotopy().is_zero());
    }
}
