//! Occupation-number bases and sparse operators on fixed particle-number sectors.
//!
//! A [`FockBasis`] enumerates every way of placing `n` bosons in `L` modes.
//! Operators come in two flavours:
//!
//! - [`SectorOperator`] is a materialized sparse matrix from one sector to
//!   another (CSR storage, entries below [`DROP_TOLERANCE`] removed).
//! - [`Operator`] is a sector-independent polynomial in creation and
//!   annihilation operators. It can be materialized on any sector with
//!   [`Operator::on`], which threads products through the intermediate
//!   sectors automatically. Commutators of particle-non-conserving
//!   generators are therefore well defined.
//!
//! All matrix entries are real. Mode indices are zero-based throughout.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{CubenetError, Result};

/// Largest sector dimension built unless a caller raises the cap.
pub const DEFAULT_SECTOR_CAP: usize = 10_000_000;

/// Entries with smaller magnitude are dropped when an operator is assembled.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// Exact binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Dimension of the `n`-boson sector over `modes` modes, `C(n+L-1, L-1)`.
pub fn sector_dimension(modes: usize, particles: usize) -> u128 {
    if modes == 0 {
        return u128::from(particles == 0);
    }
    binomial((particles + modes - 1) as u64, (modes - 1) as u64)
}

/// Boson count per mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Occupation(Vec<u32>);

impl Occupation {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }
}

impl Borrow<[u32]> for Occupation {
    fn borrow(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ">")
    }
}

/// Indexed basis of the `n`-boson sector over `L` modes.
///
/// States are ordered lexicographically descending on the occupation vector,
/// so `(n, 0, ..., 0)` comes first and `(0, ..., 0, n)` last. A negative
/// particle number yields the empty basis; it is the codomain of lowering
/// operators applied to the vacuum.
#[derive(Clone, Debug)]
pub struct FockBasis {
    modes: usize,
    particles: i64,
    cap: usize,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

impl FockBasis {
    pub fn new(modes: usize, particles: usize) -> Result<Self> {
        Self::with_cap(modes, particles as i64, DEFAULT_SECTOR_CAP)
    }

    pub fn with_cap(modes: usize, particles: i64, cap: usize) -> Result<Self> {
        if modes == 0 {
            return Err(CubenetError::InvalidArgument(
                "a Fock basis needs at least one mode".into(),
            ));
        }
        let mut states = Vec::new();
        if particles >= 0 {
            let size = sector_dimension(modes, particles as usize);
            if size > cap as u128 {
                return Err(CubenetError::SectorCap { size, cap });
            }
            states.reserve(size as usize);
            let mut cur = vec![0u32; modes];
            enumerate_descending(0, particles as u32, &mut cur, &mut states);
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Self {
            modes,
            particles,
            cap,
            states,
            index,
        })
    }

    /// Same mode count and cap, different particle number.
    pub fn sibling(&self, particles: i64) -> Result<Self> {
        Self::with_cap(self.modes, particles, self.cap)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn particles(&self) -> i64 {
        self.particles
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &Occupation {
        &self.states[i]
    }

    pub fn index_of(&self, counts: &[u32]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    /// Two bases describe the same sector.
    pub fn same_sector(&self, other: &FockBasis) -> bool {
        self.modes == other.modes && self.particles == other.particles
    }
}

fn enumerate_descending(pos: usize, remaining: u32, cur: &mut [u32], out: &mut Vec<Occupation>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(Occupation(cur.to_vec()));
        return;
    }
    for c in (0..=remaining).rev() {
        cur[pos] = c;
        enumerate_descending(pos + 1, remaining - c, cur, out);
    }
    cur[pos] = 0;
}

/// Builds the `n`-boson basis over `modes` modes with the default cap.
pub fn build_basis(modes: usize, particles: usize) -> Result<Arc<FockBasis>> {
    FockBasis::new(modes, particles).map(Arc::new)
}

/// Amplitude vector over a sector basis.
#[derive(Clone, Debug)]
pub struct FockVector {
    basis: Arc<FockBasis>,
    amps: DVector<f64>,
}

impl FockVector {
    pub fn new(basis: Arc<FockBasis>, amps: DVector<f64>) -> Result<Self> {
        if amps.len() != basis.len() {
            return Err(CubenetError::SectorMismatch(format!(
                "vector of length {} on a basis of {} states",
                amps.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, amps })
    }

    pub fn zeros(basis: Arc<FockBasis>) -> Self {
        let amps = DVector::zeros(basis.len());
        Self { basis, amps }
    }

    /// The no-particle state over `modes` modes.
    pub fn vacuum(modes: usize) -> Result<Self> {
        let basis = build_basis(modes, 0)?;
        Ok(Self {
            basis,
            amps: DVector::from_element(1, 1.0),
        })
    }

    /// Unit vector on a single occupation state.
    pub fn basis_state(basis: Arc<FockBasis>, counts: &[u32]) -> Result<Self> {
        let idx = basis.index_of(counts).ok_or_else(|| {
            CubenetError::InvalidArgument(format!("occupation {counts:?} not in basis"))
        })?;
        let mut v = Self::zeros(basis);
        v.amps[idx] = 1.0;
        Ok(v)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amps(&self) -> &DVector<f64> {
        &self.amps
    }

    pub fn amp(&self, counts: &[u32]) -> f64 {
        self.basis.index_of(counts).map_or(0.0, |i| self.amps[i])
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.amps.amax()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            amps: &self.amps * s,
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &FockVector, s: f64) -> Result<Self> {
        if !self.basis.same_sector(&other.basis) {
            return Err(CubenetError::SectorMismatch(
                "adding vectors from different sectors".into(),
            ));
        }
        Ok(Self {
            basis: self.basis.clone(),
            amps: &self.amps + &other.amps * s,
        })
    }

    /// Product of two states supported on disjoint sets of modes.
    pub fn tensor_disjoint(&self, other: &FockVector) -> Result<Self> {
        if self.basis.modes() != other.basis.modes() {
            return Err(CubenetError::SectorMismatch("tensor of different mode counts".into()));
        }
        let target = Arc::new(self.basis.sibling(self.basis.particles() + other.basis.particles())?);
        let mut out = Self::zeros(target.clone());
        let mut occ = vec![0u32; self.basis.modes()];
        for (i, a) in self.amps.iter().enumerate().filter(|(_, a)| **a != 0.0) {
            let left = self.basis.state(i).counts();
            for (j, b) in other.amps.iter().enumerate().filter(|(_, b)| **b != 0.0) {
                let right = other.basis.state(j).counts();
                for (k, o) in occ.iter_mut().enumerate() {
                    if left[k] > 0 && right[k] > 0 {
                        return Err(CubenetError::InvalidArgument(format!(
                            "tensor factors overlap on mode {k}"
                        )));
                    }
                    *o = left[k] + right[k];
                }
                let idx = target.index_of(&occ).expect("sum of sector states");
                out.amps[idx] += a * b;
            }
        }
        Ok(out)
    }

    pub fn dot(&self, other: &FockVector) -> Result<f64> {
        if !self.basis.same_sector(&other.basis) {
            return Err(CubenetError::SectorMismatch(
                "inner product across sectors".into(),
            ));
        }
        Ok(self.amps.dot(&other.amps))
    }
}

/// Sparse real matrix from one particle-number sector to another.
#[derive(Clone, Debug)]
pub struct SectorOperator {
    domain: Arc<FockBasis>,
    codomain: Arc<FockBasis>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl SectorOperator {
    /// Assembles from `(row, col, value)` triplets. Duplicates are summed and
    /// near-zero results dropped.
    pub fn from_triplets(
        domain: Arc<FockBasis>,
        codomain: Arc<FockBasis>,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if domain.modes() != codomain.modes() {
            return Err(CubenetError::SectorMismatch(format!(
                "domain has {} modes, codomain {}",
                domain.modes(),
                codomain.modes()
            )));
        }
        let (nr, nc) = (codomain.len(), domain.len());
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= nr || c >= nc) {
            return Err(CubenetError::InvalidArgument(format!(
                "entry ({r}, {c}) outside a {nr}x{nc} operator"
            )));
        }
        triplets.sort_unstable_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; nr + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        let mut it = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = it.next() {
            while let Some(&(r2, c2, v2)) = it.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    it.next();
                } else {
                    break;
                }
            }
            if v.abs() >= DROP_TOLERANCE {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..nr {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self {
            domain,
            codomain,
            indptr,
            indices,
            data,
        })
    }

    pub fn zero(domain: Arc<FockBasis>, codomain: Arc<FockBasis>) -> Result<Self> {
        Self::from_triplets(domain, codomain, Vec::new())
    }

    pub fn identity(basis: Arc<FockBasis>) -> Self {
        let n = basis.len();
        Self {
            domain: basis.clone(),
            codomain: basis,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    /// Dense matrix lifted into a sparse operator on a single sector.
    pub fn from_dense(basis: Arc<FockBasis>, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != basis.len() || m.ncols() != basis.len() {
            return Err(CubenetError::SectorMismatch(format!(
                "{}x{} matrix on a sector of {} states",
                m.nrows(),
                m.ncols(),
                basis.len()
            )));
        }
        let mut trip = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                if m[(r, c)] != 0.0 {
                    trip.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(basis.clone(), basis, trip)
    }

    pub fn domain(&self) -> &Arc<FockBasis> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<FockBasis> {
        &self.codomain
    }

    pub fn particle_delta(&self) -> i64 {
        self.codomain.particles() - self.domain.particles()
    }

    pub fn is_number_conserving(&self) -> bool {
        self.particle_delta() == 0
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.codomain.len(), self.domain.len())
    }

    /// Nonzero entries of one row as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.data[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.codomain.len()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.data[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        if !v.basis().same_sector(&self.domain) {
            return Err(CubenetError::SectorMismatch(format!(
                "applying an operator on n={} to a vector with n={}",
                self.domain.particles(),
                v.basis().particles()
            )));
        }
        let mut out = DVector::zeros(self.codomain.len());
        for r in 0..self.codomain.len() {
            out[r] = self.row(r).map(|(c, a)| a * v.amps()[c]).sum();
        }
        FockVector::new(self.codomain.clone(), out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.codomain.len(), self.domain.len());
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    fn check_same_shape(&self, other: &SectorOperator, what: &str) -> Result<()> {
        if self.domain.same_sector(&other.domain) && self.codomain.same_sector(&other.codomain) {
            Ok(())
        } else {
            Err(CubenetError::SectorMismatch(format!(
                "{what}: ({} -> {}) vs ({} -> {})",
                self.domain.particles(),
                self.codomain.particles(),
                other.domain.particles(),
                other.codomain.particles()
            )))
        }
    }

    pub fn add(&self, other: &SectorOperator) -> Result<SectorOperator> {
        self.check_same_shape(other, "addition")?;
        let trip = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.domain.clone(), self.codomain.clone(), trip)
    }

    pub fn sub(&self, other: &SectorOperator) -> Result<SectorOperator> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> SectorOperator {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SectorOperator) -> Result<SectorOperator> {
        if !self.domain.same_sector(&other.codomain) {
            return Err(CubenetError::SectorMismatch(format!(
                "composition through n={} and n={}",
                other.codomain.particles(),
                self.domain.particles()
            )));
        }
        let ncols = other.domain.len();
        let mut acc = vec![0.0; ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut trip = Vec::new();
        for r in 0..self.codomain.len() {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if acc[c] == 0.0 {
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                trip.push((r, c, acc[c]));
                acc[c] = 0.0;
            }
            touched.clear();
        }
        Self::from_triplets(other.domain.clone(), self.codomain.clone(), trip)
    }

    /// Transpose; the adjoint for real matrices.
    pub fn adjoint(&self) -> SectorOperator {
        let trip = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.codomain.clone(), self.domain.clone(), trip)
            .expect("transpose of a valid operator is valid")
    }

    /// `A∘B − B∘A` for two operators on the same sector.
    pub fn commutator(&self, other: &SectorOperator) -> Result<SectorOperator> {
        if !(self.is_number_conserving() && other.is_number_conserving()) {
            return Err(CubenetError::SectorMismatch(
                "sector commutator needs number-conserving operands; use Operator::commutator"
                    .into(),
            ));
        }
        self.compose(other)?.sub(&other.compose(self)?)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.codomain.len())
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_number_conserving() {
            return f64::INFINITY;
        }
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `row col value` lines, one per stored entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# modes={} n_in={} n_out={} nnz={}",
            self.domain.modes(),
            self.domain.particles(),
            self.codomain.particles(),
            self.nnz()
        )?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Direction of a single-mode ladder operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Raise,
    Lower,
}

/// `a†_mode` or `a_mode` materialized on `basis`.
pub fn ladder_op(basis: &Arc<FockBasis>, mode: usize, direction: Ladder) -> Result<SectorOperator> {
    let op = match direction {
        Ladder::Raise => Operator::Raise(mode),
        Ladder::Lower => Operator::Lower(mode),
    };
    op.on(basis)
}

/// `Σ C_ij a†_i a_j + shift·I` for a symmetric coefficient matrix.
pub fn one_body_op(basis: &Arc<FockBasis>, c: &DMatrix<f64>, shift: f64) -> Result<SectorOperator> {
    check_square(c, basis.modes())?;
    let asym = (c - c.transpose()).amax();
    if asym > 1e-12 {
        return Err(CubenetError::NotSymmetric {
            max_asymmetry: asym,
        });
    }
    (Operator::bilinear_from_matrix(c) + shift * Operator::Identity).on(basis)
}

/// `Σ C_ij a†_i a_j` without a symmetry requirement.
pub fn transfer_op(basis: &Arc<FockBasis>, c: &DMatrix<f64>) -> Result<SectorOperator> {
    check_square(c, basis.modes())?;
    Operator::bilinear_from_matrix(c).on(basis)
}

/// `Σ P_ij a†_i a†_j`, mapping the `n` sector to `n + 2`. Only the symmetric
/// part of `P` contributes.
pub fn pair_create_op(basis: &Arc<FockBasis>, p: &DMatrix<f64>) -> Result<SectorOperator> {
    check_square(p, basis.modes())?;
    Operator::PairCreate(matrix_terms(p)).on(basis)
}

fn check_square(m: &DMatrix<f64>, modes: usize) -> Result<()> {
    if m.nrows() != modes || m.ncols() != modes {
        return Err(CubenetError::InvalidArgument(format!(
            "{}x{} coefficient matrix for {modes} modes",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn matrix_terms(m: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut terms = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                terms.push((i, j, m[(i, j)]));
            }
        }
    }
    terms
}

/// Eigenvalues of a symmetric number-conserving operator, ascending.
pub fn eigensolve_sym(op: &SectorOperator) -> Result<Vec<f64>> {
    Ok(eigensolve_sym_vectors(op)?.0)
}

/// Eigenvalues ascending with matching eigenvector columns.
pub fn eigensolve_sym_vectors(op: &SectorOperator) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !op.is_number_conserving() {
        return Err(CubenetError::SectorMismatch(
            "eigensolve needs a number-conserving operator".into(),
        ));
    }
    let asym = op.max_asymmetry();
    if asym > 1e-10 * op.norm_inf().max(f64::MIN_POSITIVE) {
        return Err(CubenetError::NotSymmetric {
            max_asymmetry: asym,
        });
    }
    let n = op.domain().len();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let dense = op.to_dense();
    let sym = (&dense + dense.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Sector-independent polynomial in bosonic ladder operators.
///
/// Products list factors left to right in operator order, so the last factor
/// acts first.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Identity,
    Raise(usize),
    Lower(usize),
    /// `Σ c a†_i a_j` over `(i, j, c)`.
    Bilinear(Vec<(usize, usize, f64)>),
    /// `Σ c a†_i a†_j` over `(i, j, c)`.
    PairCreate(Vec<(usize, usize, f64)>),
    /// `Σ c a_i a_j` over `(i, j, c)`.
    PairAnnihilate(Vec<(usize, usize, f64)>),
    Linear(Vec<(f64, Operator)>),
    Product(Vec<Operator>),
}

impl Operator {
    pub fn number(mode: usize) -> Self {
        Self::Bilinear(vec![(mode, mode, 1.0)])
    }

    /// `a†_to a_from`.
    pub fn hop(to: usize, from: usize) -> Self {
        Self::Bilinear(vec![(to, from, 1.0)])
    }

    pub fn total_number(modes: usize) -> Self {
        Self::Bilinear((0..modes).map(|i| (i, i, 1.0)).collect())
    }

    pub fn pair_create(i: usize, j: usize) -> Self {
        Self::PairCreate(vec![(i, j, 1.0)])
    }

    pub fn pair_annihilate(i: usize, j: usize) -> Self {
        Self::PairAnnihilate(vec![(i, j, 1.0)])
    }

    pub fn bilinear_from_matrix(c: &DMatrix<f64>) -> Self {
        Self::Bilinear(matrix_terms(c))
    }

    pub fn zero() -> Self {
        Self::Linear(Vec::new())
    }

    /// Change in particle number, or `None` when a sum mixes sectors.
    pub fn particle_delta(&self) -> Option<i64> {
        match self {
            Self::Identity | Self::Bilinear(_) => Some(0),
            Self::Raise(_) => Some(1),
            Self::Lower(_) => Some(-1),
            Self::PairCreate(_) => Some(2),
            Self::PairAnnihilate(_) => Some(-2),
            Self::Linear(terms) => {
                let mut deltas = terms.iter().map(|(_, op)| op.particle_delta());
                match deltas.next() {
                    None => Some(0),
                    Some(first) => {
                        let first = first?;
                        deltas.all(|d| d == Some(first)).then_some(first)
                    }
                }
            }
            Self::Product(factors) => factors.iter().map(|f| f.particle_delta()).sum(),
        }
    }

    pub fn adjoint(&self) -> Self {
        match self {
            Self::Identity => Self::Identity,
            Self::Raise(i) => Self::Lower(*i),
            Self::Lower(i) => Self::Raise(*i),
            Self::Bilinear(t) => Self::Bilinear(t.iter().map(|&(i, j, c)| (j, i, c)).collect()),
            Self::PairCreate(t) => Self::PairAnnihilate(t.clone()),
            Self::PairAnnihilate(t) => Self::PairCreate(t.clone()),
            Self::Linear(terms) => {
                Self::Linear(terms.iter().map(|(c, op)| (*c, op.adjoint())).collect())
            }
            Self::Product(f) => Self::Product(f.iter().rev().map(Self::adjoint).collect()),
        }
    }

    /// `[self, other]` as a new expression.
    pub fn commutator(&self, other: &Operator) -> Self {
        self.clone() * other.clone() - other.clone() * self.clone()
    }

    /// `self·other + other·self`.
    pub fn anticommutator(&self, other: &Operator) -> Self {
        self.clone() * other.clone() + other.clone() * self.clone()
    }

    pub fn squared(&self) -> Self {
        self.clone() * self.clone()
    }

    fn max_mode(&self) -> Option<usize> {
        match self {
            Self::Identity => None,
            Self::Raise(i) | Self::Lower(i) => Some(*i),
            Self::Bilinear(t) | Self::PairCreate(t) | Self::PairAnnihilate(t) => {
                t.iter().map(|&(i, j, _)| i.max(j)).max()
            }
            Self::Linear(terms) => terms.iter().filter_map(|(_, op)| op.max_mode()).max(),
            Self::Product(f) => f.iter().filter_map(Self::max_mode).max(),
        }
    }

    /// Materializes the operator with `domain` as its input sector.
    pub fn on(&self, domain: &Arc<FockBasis>) -> Result<SectorOperator> {
        if let Some(m) = self.max_mode() {
            if m >= domain.modes() {
                return Err(CubenetError::ModeOutOfRange {
                    mode: m,
                    modes: domain.modes(),
                });
            }
        }
        let delta = self.particle_delta().ok_or_else(|| {
            CubenetError::SectorMismatch("sum of terms with different particle deltas".into())
        })?;
        match self {
            Self::Linear(terms) => {
                let codomain = Arc::new(domain.sibling(domain.particles() + delta)?);
                let mut trip = Vec::new();
                for (c, op) in terms {
                    let m = op.on(domain)?;
                    trip.extend(m.triplets().map(|(r, k, v)| (r, k, c * v)));
                }
                SectorOperator::from_triplets(domain.clone(), codomain, trip)
            }
            Self::Product(factors) => {
                let mut acc = SectorOperator::identity(domain.clone());
                for f in factors.iter().rev() {
                    let m = f.on(acc.codomain())?;
                    acc = m.compose(&acc)?;
                }
                Ok(acc)
            }
            _ => {
                let codomain = Arc::new(domain.sibling(domain.particles() + delta)?);
                let trip = self.leaf_triplets(domain, &codomain);
                SectorOperator::from_triplets(domain.clone(), codomain, trip)
            }
        }
    }

    fn leaf_triplets(&self, domain: &FockBasis, codomain: &FockBasis) -> Vec<(usize, usize, f64)> {
        let mut trip = Vec::new();
        if codomain.is_empty() {
            return trip;
        }
        let mut occ: Vec<u32> = vec![0; domain.modes()];
        for (col, state) in domain.states().iter().enumerate() {
            let mut push = |occ: &[u32], v: f64| {
                if let Some(row) = codomain.index_of(occ) {
                    trip.push((row, col, v));
                }
            };
            occ.copy_from_slice(state.counts());
            match self {
                Self::Identity => push(&occ, 1.0),
                Self::Raise(i) => {
                    let ni = occ[*i] as f64;
                    occ[*i] += 1;
                    push(&occ, (ni + 1.0).sqrt());
                }
                Self::Lower(i) => {
                    if occ[*i] > 0 {
                        let ni = occ[*i] as f64;
                        occ[*i] -= 1;
                        push(&occ, ni.sqrt());
                    }
                }
                Self::Bilinear(terms) => {
                    for &(i, j, c) in terms {
                        occ.copy_from_slice(state.counts());
                        if i == j {
                            push(&occ, c * occ[i] as f64);
                        } else if occ[j] > 0 {
                            let nj = occ[j] as f64;
                            occ[j] -= 1;
                            let ni = occ[i] as f64;
                            occ[i] += 1;
                            push(&occ, c * (nj * (ni + 1.0)).sqrt());
                        }
                    }
                }
                Self::PairCreate(terms) => {
                    for &(i, j, c) in terms {
                        occ.copy_from_slice(state.counts());
                        let ni = occ[i] as f64;
                        occ[i] += 1;
                        let nj = occ[j] as f64;
                        occ[j] += 1;
                        push(&occ, c * ((ni + 1.0) * (nj + 1.0)).sqrt());
                    }
                }
                Self::PairAnnihilate(terms) => {
                    for &(i, j, c) in terms {
                        occ.copy_from_slice(state.counts());
                        if occ[j] == 0 {
                            continue;
                        }
                        let nj = occ[j] as f64;
                        occ[j] -= 1;
                        if occ[i] == 0 {
                            continue;
                        }
                        let ni = occ[i] as f64;
                        occ[i] -= 1;
                        push(&occ, c * (ni * nj).sqrt());
                    }
                }
                Self::Linear(_) | Self::Product(_) => unreachable!("composite handled in on()"),
            }
        }
        trip
    }

    /// Applies the operator to a vector, factor by factor for products.
    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        match self {
            Self::Product(factors) => {
                let mut cur = v.clone();
                for f in factors.iter().rev() {
                    cur = f.apply(&cur)?;
                }
                Ok(cur)
            }
            Self::Linear(terms) => {
                let delta = self.particle_delta().ok_or_else(|| {
                    CubenetError::SectorMismatch(
                        "sum of terms with different particle deltas".into(),
                    )
                })?;
                let codomain = Arc::new(v.basis().sibling(v.basis().particles() + delta)?);
                let mut out = FockVector::zeros(codomain);
                for (c, op) in terms {
                    out = out.add_scaled(&op.apply(v)?, *c)?;
                }
                Ok(out)
            }
            _ => self.on(v.basis())?.apply(v),
        }
    }
}

impl Add for Operator {
    type Output = Operator;

    fn add(self, rhs: Operator) -> Operator {
        let mut terms = Vec::new();
        for op in [self, rhs] {
            match op {
                Operator::Linear(t) => terms.extend(t),
                other => terms.push((1.0, other)),
            }
        }
        Operator::Linear(terms)
    }
}

impl Sub for Operator {
    type Output = Operator;

    fn sub(self, rhs: Operator) -> Operator {
        self + (-1.0) * rhs
    }
}

impl Neg for Operator {
    type Output = Operator;

    fn neg(self) -> Operator {
        (-1.0) * self
    }
}

impl Mul for Operator {
    type Output = Operator;

    fn mul(self, rhs: Operator) -> Operator {
        let mut factors = Vec::new();
        for op in [self, rhs] {
            match op {
                Operator::Product(f) => factors.extend(f),
                other => factors.push(other),
            }
        }
        Operator::Product(factors)
    }
}

impl Mul<Operator> for f64 {
    type Output = Operator;

    fn mul(self, rhs: Operator) -> Operator {
        match rhs {
            Operator::Linear(t) => Operator::Linear(t.into_iter().map(|(c, op)| (self * c, op)).collect()),
            other => Operator::Linear(vec![(self, other)]),
        }
    }
}

/// Largest absolute entry of `[a, b]` on `domain`, with the scale used to judge it.
///
/// The scale is the larger of 1 and the infinity norms of both products, so
/// the ratio `residual / scale` is a relative commutator size.
pub fn commutator_residual(a: &Operator, b: &Operator, domain: &Arc<FockBasis>) -> Result<(f64, f64)> {
    let ab = (a.clone() * b.clone()).on(domain)?;
    let ba = (b.clone() * a.clone()).on(domain)?;
    let diff = ab.sub(&ba)?;
    let scale = 1f64.max(ab.norm_inf()).max(ba.norm_inf());
    Ok((diff.max_abs(), scale))
}

/// Largest absolute entry of `lhs - rhs` on `domain` together with a matching scale.
pub fn identity_residual(lhs: &Operator, rhs: &Operator, domain: &Arc<FockBasis>) -> Result<(f64, f64)> {
    let l = lhs.on(domain)?;
    let r = rhs.on(domain)?;
    let diff = l.sub(&r)?;
    let scale = 1f64.max(l.norm_inf()).max(r.norm_inf());
    Ok((diff.max_abs(), scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_count(modes: usize, n: usize) -> usize {
        // count occupation vectors by odometer over 0..=n per mode
        let mut count = 0;
        let mut digits = vec![0usize; modes];
        loop {
            if digits.iter().sum::<usize>() == n {
                count += 1;
            }
            let mut k = 0;
            loop {
                if k == modes {
                    return count;
                }
                digits[k] += 1;
                if digits[k] > n {
                    digits[k] = 0;
                    k += 1;
                } else {
                    break;
                }
            }
        }
    }

    #[test]
    fn basis_sizes_match_enumeration() {
        assert_eq!(build_basis(8, 1).unwrap().len(), 8);
        assert_eq!(build_basis(8, 2).unwrap().len(), 36);
        assert_eq!(build_basis(4, 3).unwrap().len(), 20);
        for n in 0..=4 {
            assert_eq!(build_basis(4, n).unwrap().len(), brute_force_count(4, n));
        }
        for n in 0..=6usize {
            let b = build_basis(8, n).unwrap();
            assert_eq!(b.len() as u128, binomial(n as u64 + 7, 7));
        }
    }

    #[test]
    fn ordering_is_descending_lexicographic() {
        let b = build_basis(3, 2).unwrap();
        let got: Vec<Vec<u32>> = b.states().iter().map(|s| s.counts().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![1, 0, 1],
                vec![0, 2, 0],
                vec![0, 1, 1],
                vec![0, 0, 2]
            ]
        );
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s.counts()), Some(i));
        }
    }

    #[test]
    fn cap_is_enforced() {
        let err = FockBasis::with_cap(8, 6, 100).unwrap_err();
        assert!(matches!(err, CubenetError::SectorCap { size: 1716, cap: 100 }));
        assert!(FockBasis::new(0, 1).is_err());
    }

    #[test]
    fn raising_amplitudes() {
        let b = build_basis(8, 0).unwrap();
        let up = ladder_op(&b, 0, Ladder::Raise).unwrap();
        assert_eq!(up.get(up.codomain().index_of(&[1, 0, 0, 0, 0, 0, 0, 0]).unwrap(), 0), 1.0);

        let b2 = build_basis(8, 2).unwrap();
        let up = ladder_op(&b2, 0, Ladder::Raise).unwrap();
        let from = b2.index_of(&[2, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        let to = up.codomain().index_of(&[3, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert!((up.get(to, from) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lowering_the_vacuum_gives_the_empty_sector() {
        let b = build_basis(8, 0).unwrap();
        let down = ladder_op(&b, 3, Ladder::Lower).unwrap();
        assert!(down.codomain().is_empty());
        assert_eq!(down.particle_delta(), -1);
        assert_eq!(down.nnz(), 0);
        assert!(matches!(
            ladder_op(&b, 8, Ladder::Lower),
            Err(CubenetError::ModeOutOfRange { mode: 8, modes: 8 })
        ));
    }

    #[test]
    fn canonical_commutation_relations() {
        for n in 0..=3 {
            let b = build_basis(8, n).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    let (res, _) = identity_residual(
                        &Operator::Lower(i).commutator(&Operator::Raise(j)),
                        &if i == j { Operator::Identity } else { Operator::zero() },
                        &b,
                    )
                    .unwrap();
                    assert!(res < 1e-12, "[a{i}, a†{j}] off by {res}");
                    let (res, _) = commutator_residual(&Operator::Lower(i), &Operator::Lower(j), &b).unwrap();
                    assert!(res < 1e-12);
                }
            }
        }
    }

    #[test]
    fn one_body_examples() {
        let b = build_basis(8, 3).unwrap();
        let n_op = one_body_op(&b, &DMatrix::identity(8, 8), 0.0).unwrap();
        let expect = SectorOperator::identity(b.clone()).scale(3.0);
        assert!(n_op.sub(&expect).unwrap().max_abs() < 1e-15);

        let b2 = build_basis(2, 1).unwrap();
        let mut c = DMatrix::zeros(2, 2);
        c[(0, 1)] = 1.0;
        c[(1, 0)] = 1.0;
        let hop = one_body_op(&b2, &c, 0.0).unwrap();
        assert_eq!(hop.to_dense(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let b1 = build_basis(8, 1).unwrap();
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, -1.0]));
        let op = one_body_op(&b1, &d, 0.0).unwrap();
        assert_eq!(op.to_dense(), d);

        let mut asym = DMatrix::zeros(8, 8);
        asym[(0, 1)] = 1.0;
        assert!(matches!(one_body_op(&b1, &asym, 0.0), Err(CubenetError::NotSymmetric { .. })));
    }

    fn e_alpha_matrix() -> DMatrix<f64> {
        // b†1 b†8 − b†4 b†5 written symmetrically
        let mut p = DMatrix::zeros(8, 8);
        p[(0, 7)] = 0.5;
        p[(7, 0)] = 0.5;
        p[(3, 4)] = -0.5;
        p[(4, 3)] = -0.5;
        p
    }

    #[test]
    fn pair_creation_on_vacuum() {
        let vac = build_basis(8, 0).unwrap();
        let op = pair_create_op(&vac, &e_alpha_matrix()).unwrap();
        let cod = op.codomain();
        let a = cod.index_of(&[1, 0, 0, 0, 0, 0, 0, 1]).unwrap();
        let b = cod.index_of(&[0, 0, 0, 1, 1, 0, 0, 0]).unwrap();
        assert!((op.get(a, 0) - 1.0).abs() < 1e-15);
        assert!((op.get(b, 0) + 1.0).abs() < 1e-15);
        assert_eq!(op.nnz(), 2);

        let zero = pair_create_op(&vac, &DMatrix::zeros(8, 8)).unwrap();
        assert_eq!(zero.nnz(), 0);

        let norm = op.adjoint().compose(&op).unwrap();
        assert!((norm.get(0, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pair_annihilation_is_the_adjoint() {
        let p = e_alpha_matrix();
        let create = Operator::PairCreate(matrix_terms(&p));
        for n in 0..=3 {
            let b = build_basis(8, n).unwrap();
            let up = create.on(&b).unwrap();
            let down = create.adjoint().on(up.codomain()).unwrap();
            assert!(up.adjoint().sub(&down).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn algebra_checks() {
        let b = build_basis(8, 2).unwrap();
        let n_op = Operator::total_number(8);
        let hop = Operator::hop(0, 3) + Operator::hop(3, 0) + Operator::number(5);
        let (res, _) = commutator_residual(&n_op, &hop, &b).unwrap();
        assert!(res < 1e-14);

        let m = hop.on(&b).unwrap();
        let twice = m.adjoint().adjoint();
        assert_eq!(twice.triplets().collect::<Vec<_>>(), m.triplets().collect::<Vec<_>>());

        let other = Operator::Raise(0).on(&b).unwrap();
        assert!(matches!(m.add(&other), Err(CubenetError::SectorMismatch(_))));
        assert!(matches!(m.compose(&other), Err(CubenetError::SectorMismatch(_))));
    }

    #[test]
    fn eigensolve_examples() {
        let b = build_basis(8, 2).unwrap();
        let zero = SectorOperator::zero(b.clone(), b.clone()).unwrap();
        assert!(eigensolve_sym(&zero).unwrap().iter().all(|&x| x == 0.0));

        let b1 = build_basis(8, 1).unwrap();
        let diag = DVector::from_vec(vec![3.0, -1.0, 2.0, 0.5, 0.0, 7.0, -4.0, 1.0]);
        let op = one_body_op(&b1, &DMatrix::from_diagonal(&diag), 0.0).unwrap();
        let mut sorted: Vec<f64> = diag.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(eigensolve_sym(&op).unwrap(), sorted);

        let hop = Operator::hop(0, 1);
        let m = hop.on(&b1).unwrap();
        assert!(matches!(eigensolve_sym(&m), Err(CubenetError::NotSymmetric { .. })));
    }

    #[test]
    fn eigenvectors_reconstruct() {
        let b = build_basis(4, 3).unwrap();
        let op = (Operator::hop(0, 1) + Operator::hop(1, 0) + 0.3 * Operator::number(2).squared()
            + Operator::hop(2, 3)
            + Operator::hop(3, 2))
        .on(&b)
        .unwrap();
        let (vals, vecs) = eigensolve_sym_vectors(&op).unwrap();
        let a = op.to_dense();
        for (k, lam) in vals.iter().enumerate() {
            let v = vecs.column(k);
            let r = (&a * v - v * *lam).amax();
            assert!(r < 1e-9 * op.norm_inf());
        }
    }
}
