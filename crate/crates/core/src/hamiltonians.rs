//! Hamiltonian builders for both cube models and a comparator.
//!
//! `Canonical` is the spin form `U₀N² + U₁N·X + U·X² − J(E+F)` with
//! `X = H` (model 1) or `X = H̃ − h̃₃` (model 2), written in the transformed
//! frame. The printed forms are reproduced term by term; `PrintedA` lives in
//! the original site frame and `PrintedB` in the transformed frame.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CubenetError, Result};
use crate::fock::{eigensolve_sym, FockBasis, Operator, SectorOperator};
use crate::su2gen::{build_triple, h3, Model, TripleName};

/// Cube edges in site labels, zero-based.
pub const CUBE_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (0, 2),
    (0, 4),
    (1, 3),
    (1, 5),
    (2, 3),
    (2, 6),
    (3, 7),
    (4, 5),
    (4, 6),
    (5, 7),
    (6, 7),
];

/// Interaction strengths and tunnelling amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "U0")]
    pub u0: f64,
    #[serde(rename = "U1")]
    pub u1: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "J")]
    pub tunnel: f64,
}

impl ModelParams {
    pub fn new(u0: f64, u1: f64, u: f64, tunnel: f64) -> Self {
        Self { u0, u1, u, tunnel }
    }

    /// Physically motivated sign conditions that the numerics do not need.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.tunnel <= 0.0 {
            w.push(format!("tunnelling amplitude J = {} is not positive", self.tunnel));
        }
        w
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::new(0.5, 0.25, 1.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PrintedA,
    PrintedB,
    Canonical,
    Free,
    ExtendedBh,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PrintedA => "printed_a",
            Self::PrintedB => "printed_b",
            Self::Canonical => "canonical",
            Self::Free => "free",
            Self::ExtendedBh => "extended_bh",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = CubenetError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "printed_a" => Self::PrintedA,
            "printed_b" => Self::PrintedB,
            "canonical" => Self::Canonical,
            "free" => Self::Free,
            "extended_bh" => Self::ExtendedBh,
            other => return Err(CubenetError::InvalidLabel(format!("variant {other}"))),
        })
    }
}

fn numbers(terms: &[(usize, f64)]) -> Operator {
    Operator::Bilinear(terms.iter().map(|&(i, c)| (i, i, c)).collect())
}

fn hops(edges: &[(usize, usize)]) -> Operator {
    Operator::Bilinear(edges.iter().flat_map(|&(i, j)| [(i, j, 1.0), (j, i, 1.0)]).collect())
}

/// Printed interaction pattern `X`, identical in both frames.
pub fn interaction_pattern(model: Model) -> Operator {
    match model {
        Model::One => numbers(&[(0, 1.0), (7, -1.0), (1, 1.0), (6, -1.0)]),
        Model::Two => numbers(&[(0, 1.0), (3, -1.0), (5, 1.0), (6, -1.0)]),
    }
}

/// Transformed-frame edges of the printed b-form, zero-based.
pub fn transformed_edges(model: Model) -> Vec<(usize, usize)> {
    match model {
        Model::One => vec![(0, 3), (0, 4), (4, 7), (3, 7), (1, 5), (2, 6), (1, 2), (5, 6)],
        Model::Two => vec![(0, 1), (0, 2), (2, 3), (1, 3), (4, 6), (5, 7)],
    }
}

fn printed_core(p: &ModelParams, x: Operator, hopping: Operator) -> Operator {
    let n = Operator::total_number(8);
    p.u0 * n.squared() + p.u1 * (n * x.clone()) + (4.0 * p.u) * x.squared() + hopping
}

/// Printed Hamiltonian as an expression. `PrintedA` is in site modes,
/// `PrintedB` in transformed modes.
pub fn printed_operator(model: Model, variant: Variant, p: &ModelParams) -> Result<Operator> {
    let x = interaction_pattern(model);
    match variant {
        Variant::PrintedA => Ok(printed_core(p, x, (-0.5 * p.tunnel) * hops(&CUBE_EDGES))),
        Variant::PrintedB => Ok(printed_core(p, x, (-p.tunnel) * hops(&transformed_edges(model)))),
        other => Err(CubenetError::InvalidArgument(format!("{other} is not a printed form"))),
    }
}

/// `X` in the canonical spin form: `H` for model 1, `H̃ − h̃₃` for model 2.
pub fn canonical_cartan(model: Model) -> Operator {
    let total = build_triple(model, TripleName::Total).expect("total triple");
    match model {
        Model::One => total.h,
        Model::Two => total.h - h3(),
    }
}

pub fn canonical_operator(model: Model, p: &ModelParams) -> Operator {
    let total = build_triple(model, TripleName::Total).expect("total triple");
    let n = Operator::total_number(8);
    let x = canonical_cartan(model);
    p.u0 * n.squared() + p.u1 * (n * x.clone()) + p.u * x.squared() - p.tunnel * (total.e + total.f)
}

/// `−J Σ_E (a†ᵢaⱼ + a†ⱼaᵢ)` over the cube edges.
pub fn free_operator(tunnel: f64) -> Operator {
    (-tunnel) * hops(&CUBE_EDGES)
}

pub fn build_printed(model: Model, variant: Variant, p: &ModelParams, basis: &Arc<FockBasis>) -> Result<SectorOperator> {
    check_modes(basis)?;
    printed_operator(model, variant, p)?.on(basis)
}

pub fn build_canonical(model: Model, p: &ModelParams, basis: &Arc<FockBasis>) -> Result<SectorOperator> {
    check_modes(basis)?;
    canonical_operator(model, p).on(basis)
}

pub fn build_free(tunnel: f64, basis: &Arc<FockBasis>) -> Result<SectorOperator> {
    check_modes(basis)?;
    free_operator(tunnel).on(basis)
}

/// Couplings of the extended Bose-Hubbard reference model.
#[derive(Clone, Debug)]
pub struct ExtendedBhParams {
    pub u0_hat: f64,
    /// Symmetric with zero diagonal.
    pub u_ij: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub tunnel: f64,
}

impl ExtendedBhParams {
    pub fn zero(tunnel: f64) -> Self {
        Self {
            u0_hat: 0.0,
            u_ij: DMatrix::zeros(8, 8),
            mu: DVector::zeros(8),
            tunnel,
        }
    }
}

pub fn extended_bh_operator(p: &ExtendedBhParams) -> Result<Operator> {
    if p.u_ij.shape() != (8, 8) || p.mu.len() != 8 {
        return Err(CubenetError::InvalidArgument("extended model needs 8x8 couplings and 8 potentials".into()));
    }
    let asym = (&p.u_ij - p.u_ij.transpose()).amax();
    if asym > 1e-12 {
        return Err(CubenetError::NotSymmetric { max_asymmetry: asym });
    }
    if p.u_ij.diagonal().amax() != 0.0 {
        return Err(CubenetError::InvalidArgument("long-range couplings need a zero diagonal".into()));
    }
    let mut op = Operator::zero();
    for i in 0..8 {
        let ni = Operator::number(i);
        op = op + (0.5 * p.u0_hat) * (ni.clone() * (ni.clone() - Operator::Identity));
        for j in 0..8 {
            if i != j && p.u_ij[(i, j)] != 0.0 {
                op = op + (0.5 * p.u_ij[(i, j)]) * (ni.clone() * Operator::number(j));
            }
        }
        if p.mu[i] != 0.0 {
            op = op + p.mu[i] * ni;
        }
    }
    Ok(op + (-0.5 * p.tunnel) * hops(&CUBE_EDGES))
}

pub fn build_extended_bh(p: &ExtendedBhParams, basis: &Arc<FockBasis>) -> Result<SectorOperator> {
    check_modes(basis)?;
    extended_bh_operator(p)?.on(basis)
}

/// Dispatches on the variant; `ExtendedBh` uses zero couplings with `J`.
pub fn build(model: Model, variant: Variant, p: &ModelParams, basis: &Arc<FockBasis>) -> Result<SectorOperator> {
    match variant {
        Variant::PrintedA | Variant::PrintedB => build_printed(model, variant, p, basis),
        Variant::Canonical => build_canonical(model, p, basis),
        Variant::Free => build_free(p.tunnel, basis),
        Variant::ExtendedBh => build_extended_bh(&ExtendedBhParams::zero(p.tunnel), basis),
    }
}

fn check_modes(basis: &FockBasis) -> Result<()> {
    if basis.modes() != 8 {
        return Err(CubenetError::SectorMismatch(format!("cube models need 8 modes, got {}", basis.modes())));
    }
    Ok(())
}

/// Distances between two operators on the same sector.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComparisonReport {
    pub max_entry_diff: f64,
    /// Largest gap between the sorted spectra paired index by index.
    pub spectral_distance: f64,
    /// Hausdorff distance between the eigenvalue sets.
    pub hausdorff: f64,
}

pub fn compare_operators(a: &SectorOperator, b: &SectorOperator) -> Result<ComparisonReport> {
    let diff = a.sub(b)?;
    let ea = eigensolve_sym(a)?;
    let eb = eigensolve_sym(b)?;
    let spectral_distance = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let one_way = |xs: &[f64], ys: &[f64]| {
        xs.iter()
            .map(|x| ys.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    let hausdorff = if ea.is_empty() { 0.0 } else { one_way(&ea, &eb).max(one_way(&eb, &ea)) };
    Ok(ComparisonReport {
        max_entry_diff: diff.max_abs(),
        spectral_distance,
        hausdorff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_basis, commutator_residual};

    fn sorted_close(got: &[f64], want: &[f64], tol: f64) -> bool {
        let mut w = want.to_vec();
        w.sort_by(f64::total_cmp);
        got.len() == w.len() && got.iter().zip(&w).all(|(a, b)| (a - b).abs() < tol)
    }

    #[test]
    fn printed_a_edge_entry() {
        let b = build_basis(8, 1).unwrap();
        let p = ModelParams::new(0.0, 0.0, 0.0, 1.7);
        let h = build_printed(Model::One, Variant::PrintedA, &p, &b).unwrap();
        assert!((h.get(1, 0) + 0.85).abs() < 1e-15);
    }

    #[test]
    fn printed_b_dimer_edge() {
        let b = build_basis(8, 1).unwrap();
        let p = ModelParams::new(0.0, 0.0, 0.0, 1.3);
        let h = build_printed(Model::Two, Variant::PrintedB, &p, &b).unwrap();
        assert!((h.get(6, 4) + 1.3).abs() < 1e-15);
    }

    #[test]
    fn empty_sector_is_zero() {
        let b = build_basis(8, 0).unwrap();
        let p = ModelParams::new(1.0, 2.0, 3.0, 4.0);
        for v in [Variant::PrintedA, Variant::PrintedB, Variant::Canonical, Variant::Free] {
            let h = build(Model::One, v, &p, &b).unwrap();
            assert_eq!(h.max_abs(), 0.0);
        }
    }

    #[test]
    fn hopping_only_spectra() {
        let b = build_basis(8, 1).unwrap();
        let p = ModelParams::new(0.0, 0.0, 0.0, 1.0);
        let e1 = eigensolve_sym(&build_canonical(Model::One, &p, &b).unwrap()).unwrap();
        assert!(sorted_close(&e1, &[-2.0, -2.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0], 1e-12));
        let e2 = eigensolve_sym(&build_canonical(Model::Two, &p, &b).unwrap()).unwrap();
        assert!(sorted_close(&e2, &[-2.0, -1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 2.0], 1e-12));
    }

    #[test]
    fn free_cube_spectrum() {
        let b1 = build_basis(8, 1).unwrap();
        let e = eigensolve_sym(&build_free(1.0, &b1).unwrap()).unwrap();
        assert!(sorted_close(&e, &[-3.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 3.0], 1e-12));
        assert_eq!(build_free(0.0, &b1).unwrap().nnz(), 0);

        let b2 = build_basis(8, 2).unwrap();
        let e2 = eigensolve_sym(&build_free(1.0, &b2).unwrap()).unwrap();
        let mut sums = Vec::new();
        for i in 0..8 {
            for j in i..8 {
                sums.push(e[i] + e[j]);
            }
        }
        assert!(sorted_close(&e2, &sums, 1e-11));
    }

    #[test]
    fn extended_bh_reference() {
        let b = build_basis(8, 2).unwrap();
        let zero = build_extended_bh(&ExtendedBhParams::zero(1.0), &b).unwrap();
        assert!(zero.sub(&build_free(0.5, &b).unwrap()).unwrap().max_abs() < 1e-15);

        let mut p = ExtendedBhParams::zero(0.0);
        p.u0_hat = 2.0;
        let h = build_extended_bh(&p, &b).unwrap();
        let i = b.index_of(&[2, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert!((h.get(i, i) - 2.0).abs() < 1e-15);

        let b1 = build_basis(8, 1).unwrap();
        let mut p = ExtendedBhParams::zero(0.0);
        p.mu[0] = 1.0;
        assert!((build_extended_bh(&p, &b1).unwrap().get(0, 0) - 1.0).abs() < 1e-15);

        let mut p = ExtendedBhParams::zero(0.0);
        p.u_ij[(0, 1)] = 1.0;
        assert!(build_extended_bh(&p, &b1).is_err());
    }

    #[test]
    fn printed_b_matches_canonical_with_doubled_u1() {
        let p = ModelParams::new(0.4, -0.3, 0.7, 1.2);
        let doubled = ModelParams { u1: 2.0 * p.u1, ..p };
        for model in [Model::One, Model::Two] {
            for n in 0..=3 {
                let b = build_basis(8, n).unwrap();
                let a = build_printed(model, Variant::PrintedB, &doubled, &b).unwrap();
                let c = build_canonical(model, &p, &b).unwrap();
                assert!(a.sub(&c).unwrap().max_abs() < 1e-10, "model {model} n={n}");
            }
        }
    }

    #[test]
    fn canonical_conserves_number() {
        let p = ModelParams::new(0.4, -0.3, 0.7, 1.2);
        for model in [Model::One, Model::Two] {
            let b = build_basis(8, 3).unwrap();
            let (res, scale) = commutator_residual(&canonical_operator(model, &p), &Operator::total_number(8), &b).unwrap();
            assert!(res < 1e-10 * scale);
        }
    }

    #[test]
    fn comparator() {
        let b = build_basis(8, 2).unwrap();
        let p = ModelParams::new(0.4, -0.3, 0.7, 1.2);
        let a = build_canonical(Model::One, &p, &b).unwrap();
        let same = compare_operators(&a, &a).unwrap();
        assert_eq!(same.max_entry_diff, 0.0);
        assert!(same.spectral_distance < 1e-12);
        let shifted = a.add(&SectorOperator::identity(b.clone()).scale(0.75)).unwrap();
        let r = compare_operators(&a, &shifted).unwrap();
        assert!((r.max_entry_diff - 0.75).abs() < 1e-12);
        assert!((r.spectral_distance - 0.75).abs() < 1e-9);
    }

    #[test]
    fn variant_round_trip() {
        for v in [Variant::PrintedA, Variant::PrintedB, Variant::Canonical, Variant::Free, Variant::ExtendedBh] {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("nope".parse::<Variant>().is_err());
        assert!(!ModelParams::new(0.0, 0.0, 0.0, -1.0).warnings().is_empty());
    }
}
