//! Orthogonal one-body mode transforms and their lift to many-boson sectors.
//!
//! A [`ModeTransform`] stores `T` with the new modes in rows,
//! `b_i = Σ_j T_ij a_j`. The lift `Γ(T)` has as columns the b-frame Fock
//! states written in a-frame coordinates, so `Γ = Tᵀ` on the one-boson sector.
//! The lift reverses products: `Γ(T₁T₂) = Γ(T₂)Γ(T₁)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{CubenetError, Result};
use crate::fock::{FockBasis, Operator, SectorOperator};

/// The two pairwise rotations of the cube modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    I,
    II,
}

/// Orthogonal matrix acting on mode operators.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTransform {
    matrix: DMatrix<f64>,
    name: String,
}

impl ModeTransform {
    /// Wraps `matrix` after checking `TᵀT = I` to 1e-12.
    pub fn new(matrix: DMatrix<f64>, name: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(CubenetError::InvalidArgument(format!(
                "{}x{} mode transform",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        let dev = (matrix.transpose() * &matrix - DMatrix::identity(n, n)).amax();
        if dev > 1e-12 {
            return Err(CubenetError::NotOrthogonal { max_deviation: dev });
        }
        Ok(Self {
            matrix,
            name: name.into(),
        })
    }

    pub fn identity(modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(modes, modes),
            name: "identity".into(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    /// Matrix product `self · other`.
    pub fn then(&self, other: &ModeTransform) -> Result<ModeTransform> {
        if self.modes() != other.modes() {
            return Err(CubenetError::InvalidArgument(
                "composing transforms of different size".into(),
            ));
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            name: format!("{}*{}", self.name, other.name),
        })
    }

    pub fn inverse(&self) -> ModeTransform {
        Self {
            matrix: self.matrix.transpose(),
            name: format!("{}^-1", self.name),
        }
    }
}

/// The exact ±1/√2 pair rotation for transformation I or II.
pub fn transform_matrix(kind: TransformKind) -> ModeTransform {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    // (plus row, minus row, first a mode, second a mode), zero-based
    let pairs: [(usize, usize, usize, usize); 4] = match kind {
        TransformKind::I => [(0, 1, 0, 1), (2, 3, 2, 3), (4, 5, 4, 5), (6, 7, 6, 7)],
        TransformKind::II => [(0, 5, 0, 5), (4, 1, 4, 1), (2, 7, 2, 7), (6, 3, 6, 3)],
    };
    let mut t = DMatrix::zeros(8, 8);
    for (plus, minus, x, y) in pairs {
        t[(plus, x)] = r;
        t[(plus, y)] = r;
        t[(minus, x)] = r;
        t[(minus, y)] = -r;
    }
    let name = match kind {
        TransformKind::I => "I",
        TransformKind::II => "II",
    };
    ModeTransform {
        matrix: t,
        name: name.into(),
    }
}

/// Dense `Γ(T)` on the sector of `basis`, built by applying the transformed
/// creation operators to the vacuum one boson at a time.
pub fn induced_dense(t: &ModeTransform, basis: &FockBasis) -> Result<DMatrix<f64>> {
    let modes = basis.modes();
    if t.modes() != modes {
        return Err(CubenetError::SectorMismatch(format!(
            "{}-mode transform on a {}-mode basis",
            t.modes(),
            modes
        )));
    }
    if basis.particles() < 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut prev_basis = Arc::new(basis.sibling(0)?);
    let mut prev = DMatrix::from_element(1, 1, 1.0);
    for n in 1..=basis.particles() {
        let cur_basis = Arc::new(basis.sibling(n)?);
        let raises: Vec<SectorOperator> = (0..modes)
            .map(|j| Operator::Raise(j).on(&prev_basis))
            .collect::<Result<_>>()?;
        let dim = cur_basis.len();
        let mut cur = DMatrix::zeros(dim, dim);
        let mut occ = vec![0u32; modes];
        for (col, state) in cur_basis.states().iter().enumerate() {
            occ.copy_from_slice(state.counts());
            let k = occ.iter().rposition(|&c| c > 0).expect("n >= 1");
            let mk = occ[k] as f64;
            occ[k] -= 1;
            let src = prev_basis.index_of(&occ).expect("sibling sector");
            let src_col = prev.column(src);
            for (j, raise) in raises.iter().enumerate() {
                let w = t.matrix[(k, j)];
                if w == 0.0 {
                    continue;
                }
                for (r, c, v) in raise.triplets() {
                    cur[(r, col)] += w * v * src_col[c] / mk.sqrt();
                }
            }
        }
        prev = cur;
        prev_basis = cur_basis;
    }
    Ok(prev)
}

/// `Γ(T)` as a sparse operator on the sector of `basis`.
pub fn induced_sector_unitary(t: &ModeTransform, basis: &Arc<FockBasis>) -> Result<SectorOperator> {
    let dense = induced_dense(t, basis)?;
    SectorOperator::from_dense(basis.clone(), &dense)
}

/// Which frame the conjugated operator is returned in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Input written in b coordinates, output in a coordinates: `Γ op Γᵀ`.
    ToA,
    /// Input written in a coordinates, output in b coordinates: `Γᵀ op Γ`.
    ToB,
}

/// Conjugates `op` by `Γ(T)`, using the lift on both its domain and codomain.
pub fn conjugate_operator(t: &ModeTransform, op: &SectorOperator, dir: Direction) -> Result<SectorOperator> {
    let g_in = induced_dense(t, op.domain())?;
    let g_out = induced_dense(t, op.codomain())?;
    let m = op.to_dense();
    let out = match dir {
        Direction::ToA => &g_out * m * g_in.transpose(),
        Direction::ToB => g_out.transpose() * m * &g_in,
    };
    let mut trip = Vec::new();
    for c in 0..out.ncols() {
        for r in 0..out.nrows() {
            if out[(r, c)] != 0.0 {
                trip.push((r, c, out[(r, c)]));
            }
        }
    }
    SectorOperator::from_triplets(op.domain().clone(), op.codomain().clone(), trip)
}

/// One-body coefficient matrix after changing frame: `T C Tᵀ` toward b,
/// `Tᵀ C T` toward a.
pub fn one_body_in_frame(t: &ModeTransform, c: &DMatrix<f64>, dir: Direction) -> DMatrix<f64> {
    let m = t.matrix();
    match dir {
        Direction::ToB => m * c * m.transpose(),
        Direction::ToA => m.transpose() * c * m,
    }
}
