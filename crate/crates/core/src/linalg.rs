//! Sparse exact linear algebra over a field scalar.
//!
//! Everything downstream (cohomology, kernels, solving, canonical class
//! representatives) reduces to the incremental echelon structure in this
//! module. Vectors and matrices are sparse; matrices are stored column-major.
//! Determinism matters: pivots are chosen as the lowest-index nonzero entry
//! and all iteration orders are fixed, so identical inputs produce identical
//! echelon bases.

use crate::scalar::Scalar;
use crate::Error;

/// A sparse vector: entries sorted by index, all coefficients nonzero.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SparseVec<S> {
    entries: Vec<(usize, S)>,
}

impl<S: Scalar> SparseVec<S> {
    pub fn zero() -> Self {
        SparseVec { entries: Vec::new() }
    }

    pub fn unit(index: usize) -> Self {
        SparseVec { entries: vec![(index, S::one())] }
    }

    pub fn single(index: usize, coeff: S) -> Self {
        if coeff.is_zero() {
            Self::zero()
        } else {
            SparseVec { entries: vec![(index, coeff)] }
        }
    }

    /// Build from unsorted, possibly repeated entries; repeats are summed.
    pub fn from_entries(mut raw: Vec<(usize, S)>) -> Self {
        raw.sort_by_key(|(i, _)| *i);
        let mut entries: Vec<(usize, S)> = Vec::with_capacity(raw.len());
        for (i, c) in raw {
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc = acc.clone() + c,
                _ => entries.push((i, c)),
            }
        }
        entries.retain(|(_, c)| !c.is_zero());
        SparseVec { entries }
    }

    pub fn entries(&self) -> &[(usize, S)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Lowest-index nonzero entry.
    pub fn leading(&self) -> Option<(usize, &S)> {
        self.entries.first().map(|(i, c)| (*i, c))
    }

    pub fn get(&self, index: usize) -> Option<&S> {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .ok()
            .map(|pos| &self.entries[pos].1)
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        SparseVec {
            entries: self.entries.iter().map(|(i, v)| (*i, v.clone() * c.clone())).collect(),
        }
    }

    /// `self + c * other`, merging sorted entry lists.
    pub fn add_scaled(&self, other: &Self, c: &S) -> Self {
        if c.is_zero() || other.is_zero() {
            return self.clone();
        }
        let mut entries = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut a, mut b) = (0, 0);
        while a < self.entries.len() || b < other.entries.len() {
            let take_a = match (self.entries.get(a), other.entries.get(b)) {
                (Some((ia, _)), Some((ib, _))) => ia <= ib,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_a {
                let (ia, va) = &self.entries[a];
                if b < other.entries.len() && other.entries[b].0 == *ia {
                    let sum = va.clone() + other.entries[b].1.clone() * c.clone();
                    if !sum.is_zero() {
                        entries.push((*ia, sum));
                    }
                    b += 1;
                } else {
                    entries.push((*ia, va.clone()));
                }
                a += 1;
            } else {
                let (ib, vb) = &other.entries[b];
                entries.push((*ib, vb.clone() * c.clone()));
                b += 1;
            }
        }
        SparseVec { entries }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, &S::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, &(-S::one()))
    }

    pub fn neg(&self) -> Self {
        self.scale(&(-S::one()))
    }

    pub fn to_dense(&self, len: usize) -> Vec<S> {
        let mut out = vec![S::zero(); len];
        for (i, c) in &self.entries {
            out[*i] = c.clone();
        }
        out
    }

    pub fn from_dense(dense: &[S]) -> Self {
        SparseVec {
            entries: dense
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| (i, c.clone()))
                .collect(),
        }
    }

    /// Reindex entries through `map`; entries mapped to `None` are dropped.
    pub fn reindex(&self, map: impl Fn(usize) -> Option<usize>) -> Self {
        Self::from_entries(
            self.entries
                .iter()
                .filter_map(|(i, c)| map(*i).map(|j| (j, c.clone())))
                .collect(),
        )
    }
}

/// A sparse matrix, stored as columns. Maps column space `S^ncols` to `S^nrows`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMat<S> {
    nrows: usize,
    cols: Vec<SparseVec<S>>,
}

impl<S: Scalar> SparseMat<S> {
    pub fn zero(nrows: usize, ncols: usize) -> Self {
        SparseMat { nrows, cols: vec![SparseVec::zero(); ncols] }
    }

    pub fn identity(n: usize) -> Self {
        SparseMat { nrows: n, cols: (0..n).map(SparseVec::unit).collect() }
    }

    pub fn from_cols(nrows: usize, cols: Vec<SparseVec<S>>) -> Self {
        debug_assert!(cols.iter().all(|c| c.leading().map_or(true, |(i, _)| i < nrows)));
        SparseMat { nrows, cols }
    }

    /// Build from `(row, col, coeff)` triplets.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, S)]) -> Self {
        let mut per_col: Vec<Vec<(usize, S)>> = vec![Vec::new(); ncols];
        for (r, c, v) in triplets {
            assert!(*r < nrows && *c < ncols, "triplet out of range");
            per_col[*c].push((*r, v.clone()));
        }
        SparseMat { nrows, cols: per_col.into_iter().map(SparseVec::from_entries).collect() }
    }

    pub fn from_dense(rows: &[Vec<S>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged dense matrix");
            for (c, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    triplets.push((r, c, v.clone()));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<S>> {
        let mut out = vec![vec![S::zero(); self.ncols()]; self.nrows];
        for (c, col) in self.cols.iter().enumerate() {
            for (r, v) in col.entries() {
                out[*r][c] = v.clone();
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn col(&self, j: usize) -> &SparseVec<S> {
        &self.cols[j]
    }

    pub fn cols(&self) -> &[SparseVec<S>] {
        &self.cols
    }

    pub fn set_col(&mut self, j: usize, v: SparseVec<S>) {
        self.cols[j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(SparseVec::is_zero)
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.cols[c].get(r).cloned().unwrap_or_else(S::zero)
    }

    pub fn apply(&self, v: &SparseVec<S>) -> SparseVec<S> {
        let mut acc = SparseVec::zero();
        for (j, c) in v.entries() {
            acc = acc.add_scaled(&self.cols[*j], c);
        }
        acc
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &SparseMat<S>) -> SparseMat<S> {
        assert_eq!(self.ncols(), other.nrows, "dimension mismatch in matrix product");
        SparseMat {
            nrows: self.nrows,
            cols: other.cols.iter().map(|c| self.apply(c)).collect(),
        }
    }

    pub fn add(&self, other: &SparseMat<S>) -> SparseMat<S> {
        assert_eq!((self.nrows, self.ncols()), (other.nrows, other.ncols()));
        SparseMat {
            nrows: self.nrows,
            cols: self.cols.iter().zip(&other.cols).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, other: &SparseMat<S>) -> SparseMat<S> {
        self.add(&other.scale(&(-S::one())))
    }

    pub fn scale(&self, c: &S) -> SparseMat<S> {
        SparseMat { nrows: self.nrows, cols: self.cols.iter().map(|v| v.scale(c)).collect() }
    }

    pub fn transpose(&self) -> SparseMat<S> {
        let mut triplets = Vec::new();
        for (c, col) in self.cols.iter().enumerate() {
            for (r, v) in col.entries() {
                triplets.push((c, *r, v.clone()));
            }
        }
        SparseMat::from_triplets(self.ncols(), self.nrows, &triplets)
    }

    pub fn rank(&self) -> usize {
        let mut ech = Echelon::new(false);
        for col in &self.cols {
            ech.insert(col.clone());
        }
        ech.rank()
    }

    /// Basis of `ker(self)` as vectors in the column index space, canonical
    /// with respect to the column order.
    pub fn kernel_basis(&self) -> Vec<SparseVec<S>> {
        let mut ech = Echelon::new_traced(false);
        let mut kernel = Vec::new();
        for (j, col) in self.cols.iter().enumerate() {
            match ech.insert_traced(col.clone(), SparseVec::unit(j)) {
                Inserted::Pivot(_) => {}
                Inserted::Dependent(trace) => kernel.push(trace),
            }
        }
        kernel
    }

    /// Solve `self * y = x`; `None` when `x` is not in the column span.
    pub fn solve(&self, x: &SparseVec<S>) -> Option<SparseVec<S>> {
        let mut ech = Echelon::new_traced(false);
        for (j, col) in self.cols.iter().enumerate() {
            ech.insert_traced(col.clone(), SparseVec::unit(j));
        }
        ech.solve(x)
    }
}

/// Outcome of inserting a vector into an [`Echelon`].
pub enum Inserted<S> {
    /// The vector was independent; records its pivot column.
    Pivot(usize),
    /// The vector was dependent; the trace expresses it over prior inserts.
    Dependent(SparseVec<S>),
}

/// Incremental row echelon structure over the field `S`.
///
/// Rows are stored with leading coefficient 1 at their pivot (lowest-index)
/// column. In `canonical` mode the structure is kept fully reduced (RREF), so
/// reductions against it are canonical representatives of cosets mod the row
/// space.
pub struct Echelon<S> {
    canonical: bool,
    tracing: bool,
    rows: Vec<SparseVec<S>>,
    traces: Vec<SparseVec<S>>,
    /// pivot column -> index into `rows`.
    pivots: std::collections::BTreeMap<usize, usize>,
    inserted: usize,
}

impl<S: Scalar> Echelon<S> {
    pub fn new(canonical: bool) -> Self {
        Echelon {
            canonical,
            tracing: false,
            rows: Vec::new(),
            traces: Vec::new(),
            pivots: std::collections::BTreeMap::new(),
            inserted: 0,
        }
    }

    /// An echelon that records, for every stored row, its expression over the
    /// inserted input vectors.
    pub fn new_traced(canonical: bool) -> Self {
        let mut e = Self::new(canonical);
        e.tracing = true;
        e
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseVec<S>] {
        &self.rows
    }

    pub fn pivot_cols(&self) -> impl Iterator<Item = usize> + '_ {
        self.pivots.keys().copied()
    }

    pub fn contains_pivot(&self, col: usize) -> bool {
        self.pivots.contains_key(&col)
    }

    /// Reduce `v` against the stored rows. Returns the reduction together
    /// with the trace `t` such that `reduced = v + sum_j t_j * input_j`,
    /// where `input_j` are the vectors previously inserted.
    pub fn reduce_traced(&self, v: &SparseVec<S>) -> (SparseVec<S>, SparseVec<S>) {
        let mut cur = v.clone();
        let mut trace = SparseVec::zero();
        let mut cursor = 0usize;
        loop {
            let hit = cur
                .entries()
                .iter()
                .find(|(i, _)| *i >= cursor && self.pivots.contains_key(i))
                .map(|(i, c)| (*i, c.clone()));
            let Some((col, coeff)) = hit else { break };
            let row_idx = self.pivots[&col];
            let neg = -coeff;
            cur = cur.add_scaled(&self.rows[row_idx], &neg);
            if self.tracing {
                trace = trace.add_scaled(&self.traces[row_idx], &neg);
            }
            cursor = col + 1;
        }
        (cur, trace)
    }

    pub fn reduce(&self, v: &SparseVec<S>) -> SparseVec<S> {
        self.reduce_traced(v).0
    }

    /// Insert a vector; the trace of the `n`-th insert is the unit vector at
    /// index `n` when tracing is enabled.
    pub fn insert(&mut self, v: SparseVec<S>) -> Inserted<S> {
        let n = self.next_input_index();
        self.insert_inner(v, SparseVec::unit(n))
    }

    /// Insert with a caller-supplied trace in the input index space.
    pub fn insert_traced(&mut self, v: SparseVec<S>, trace: SparseVec<S>) -> Inserted<S> {
        self.insert_inner(v, trace)
    }

    fn next_input_index(&self) -> usize {
        self.inserted
    }

    fn insert_inner(&mut self, v: SparseVec<S>, trace: SparseVec<S>) -> Inserted<S> {
        self.inserted += 1;
        let (red, red_trace) = self.reduce_traced(&v);
        let red_trace = if self.tracing { red_trace.add(&trace) } else { red_trace };
        if red.is_zero() {
            // red = v + sum_j t_j input_j = 0 with the caller's own trace
            // folded in, so the returned trace witnesses the dependency.
            return Inserted::Dependent(red_trace);
        }
        let (pivot, lead) = {
            let (i, c) = red.leading().expect("nonzero");
            (i, c.clone())
        };
        let inv = S::one() / lead;
        let row = red.scale(&inv);
        let row_trace = red_trace.scale(&inv);
        if self.canonical {
            // Back-substitute the new pivot out of the stored rows.
            for k in 0..self.rows.len() {
                if let Some(c) = self.rows[k].get(pivot).cloned() {
                    let neg = -c;
                    self.rows[k] = self.rows[k].add_scaled(&row, &neg);
                    if self.tracing {
                        self.traces[k] = self.traces[k].add_scaled(&row_trace, &neg);
                    }
                }
            }
        }
        self.rows.push(row);
        if self.tracing {
            self.traces.push(row_trace);
        }
        self.pivots.insert(pivot, self.rows.len() - 1);
        Inserted::Pivot(pivot)
    }

    /// Solve `sum_j y_j * input_j = x` over the traced inputs.
    pub fn solve(&self, x: &SparseVec<S>) -> Option<SparseVec<S>> {
        let (red, trace) = self.reduce_traced(x);
        if red.is_zero() {
            Some(trace.neg())
        } else {
            None
        }
    }

    pub fn spans(&self, x: &SparseVec<S>) -> bool {
        self.reduce(x).is_zero()
    }
}

/// Dense inverse of a small square matrix; errors on singular input.
pub fn invert_dense<S: Scalar>(m: &SparseMat<S>) -> Result<SparseMat<S>, Error> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension("inverse of a non-square matrix".into()));
    }
    let mut a = m.to_dense();
    let mut inv: Vec<Vec<S>> = SparseMat::<S>::identity(n).to_dense();
    for col in 0..n {
        let pivot_row = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Degenerate("singular matrix".into()))?;
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = a[col][j].clone() / p.clone();
            inv[col][j] = inv[col][j].clone() / p.clone();
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..n {
                    a[r][j] = a[r][j].clone() - f.clone() * a[col][j].clone();
                    inv[r][j] = inv[r][j].clone() - f.clone() * inv[col][j].clone();
                }
            }
        }
    }
    Ok(SparseMat::from_dense(&inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;

    fn r(n: i64) -> Rat {
        Rat::from_int(n)
    }

    #[test]
    fn sparse_vec_merge_arithmetic() {
        let a = SparseVec::from_entries(vec![(0, r(1)), (2, r(3))]);
        let b = SparseVec::from_entries(vec![(0, r(-1)), (1, r(2))]);
        let s = a.add(&b);
        assert_eq!(s.entries(), &[(1, r(2)), (2, r(3))]);
        let t = a.add_scaled(&a, &r(-1));
        assert!(t.is_zero());
    }

    #[test]
    fn rank_kernel_solve() {
        // 2x3 matrix [[1,2,3],[2,4,6]] has rank 1, kernel dim 2.
        let m = SparseMat::from_dense(&[
            vec![r(1), r(2), r(3)],
            vec![r(2), r(4), r(6)],
        ]);
        assert_eq!(m.rank(), 1);
        let ker = m.kernel_basis();
        assert_eq!(ker.len(), 2);
        for k in &ker {
            assert!(m.apply(k).is_zero());
        }
        let x = SparseVec::from_entries(vec![(0, r(3)), (1, r(6))]);
        let y = m.solve(&x).expect("in span");
        assert_eq!(m.apply(&y), x);
        let off = SparseVec::from_entries(vec![(0, r(1)), (1, r(0))]);
        assert!(m.solve(&off).is_none());
    }

    #[test]
    fn canonical_reduction_is_rref() {
        let mut ech = Echelon::new(true);
        ech.insert(SparseVec::from_entries(vec![(0, r(2)), (1, r(2))]));
        ech.insert(SparseVec::from_entries(vec![(1, r(3))]));
        // Rows must be [e0, e1] after back-substitution.
        assert_eq!(ech.rows()[0].entries(), &[(0, r(1))]);
        assert_eq!(ech.rows()[1].entries(), &[(1, r(1))]);
        let v = SparseVec::from_entries(vec![(0, r(5)), (1, r(7)), (2, r(1))]);
        assert_eq!(ech.reduce(&v).entries(), &[(2, r(1))]);
    }

    #[test]
    fn inverse_of_small_matrix() {
        let m = SparseMat::from_dense(&[vec![r(2), r(1)], vec![r(1), r(1)]]);
        let inv = invert_dense(&m).unwrap();
        assert_eq!(m.mul(&inv), SparseMat::identity(2));
        let sing = SparseMat::from_dense(&[vec![r(1), r(2)], vec![r(2), r(4)]]);
        assert!(invert_dense(&sing).is_err());
    }
}
