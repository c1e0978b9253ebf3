//! Lowest-weight states, the recursive face bases and the coupled vectors.
//!
//! Recursive vectors `|𝒩,k,ℓ,m}` (square) and `|𝒩,k,n₇,n₈}` (dimer) are not
//! normalized. Their scale is fixed by the recursions:
//!
//! - pair step: `|𝒩+2,0,…} = −4/(𝒩 + 2·seed + 4) · e_pair |𝒩,0,…}`
//! - raising step: `|𝒩,k+1,…} = e |𝒩,k,…} / (2s − k)`
//!
//! where `seed` is the boson count of the lowest-weight state (`ℓ` or
//! `n₇+n₈`). On the dimer face the printed raising denominator carries an
//! extra `𝒩`; the form above is the one closed under `[e, f] = h`.
//!
//! All states live in the full 8-mode Fock space.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{CubenetError, Result};
use crate::fock::{build_basis, sector_dimension, FockVector, Operator};
use crate::report::VerificationReport;
use crate::su2gen::{build_triple, h3, Face, FaceKind, Model, TripleName};

/// Relative tolerance of the action identities.
pub const ACTION_TOL: f64 = 1e-10;
/// Relative tolerance of the lowest-weight conditions.
pub const LOWEST_WEIGHT_TOL: f64 = 1e-11;

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Binomial coefficient as a float.
pub fn binom_f(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(−1)^k √(m!/(m−2k)!) (ℓ−k)!/(k! ℓ!)`.
pub fn coeff_c(l: usize, m: usize, k: usize) -> Result<f64> {
    if m > l || 2 * k > m {
        return Err(CubenetError::InvalidArgument(format!("coefficient index (l={l}, m={m}, k={k}) out of range")));
    }
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * (factorial(m) / factorial(m - 2 * k)).sqrt() * factorial(l - k) / (factorial(k) * factorial(l)))
}

/// Quantum numbers of one recursive face vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FaceLabel {
    Square { big_n: usize, k: usize, l: usize, m: usize },
    Dimer { big_n: usize, k: usize, n7: usize, n8: usize },
}

impl FaceLabel {
    pub fn square(big_n: usize, k: usize, l: usize, m: usize) -> Result<Self> {
        let label = Self::Square { big_n, k, l, m };
        if !big_n.is_multiple_of(2) || m > l || k > 2 * (l - m) {
            return Err(CubenetError::InvalidLabel(format!("{label:?}")));
        }
        Ok(label)
    }

    pub fn dimer(big_n: usize, k: usize, n7: usize, n8: usize) -> Result<Self> {
        let label = Self::Dimer { big_n, k, n7, n8 };
        if !big_n.is_multiple_of(2) || k > n7 + n8 {
            return Err(CubenetError::InvalidLabel(format!("{label:?}")));
        }
        Ok(label)
    }

    pub fn kind(&self) -> FaceKind {
        match self {
            Self::Square { .. } => FaceKind::Square,
            Self::Dimer { .. } => FaceKind::Dimer,
        }
    }

    pub fn big_n(&self) -> usize {
        match *self {
            Self::Square { big_n, .. } | Self::Dimer { big_n, .. } => big_n,
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            Self::Square { k, .. } | Self::Dimer { k, .. } => k,
        }
    }

    pub fn with_k(&self, k: usize) -> Self {
        match *self {
            Self::Square { big_n, l, m, .. } => Self::Square { big_n, k, l, m },
            Self::Dimer { big_n, n7, n8, .. } => Self::Dimer { big_n, k, n7, n8 },
        }
    }

    /// Boson count of the lowest-weight seed.
    pub fn seed_bosons(&self) -> usize {
        match *self {
            Self::Square { l, .. } => l,
            Self::Dimer { n7, n8, .. } => n7 + n8,
        }
    }

    pub fn bosons(&self) -> usize {
        self.big_n() + self.seed_bosons()
    }

    /// Twice the face spin.
    pub fn two_s(&self) -> usize {
        match *self {
            Self::Square { l, m, .. } => 2 * (l - m),
            Self::Dimer { n7, n8, .. } => n7 + n8,
        }
    }

    /// `n₇ − n₈` on a dimer, 0 on a square.
    pub fn delta(&self) -> i64 {
        match *self {
            Self::Square { .. } => 0,
            Self::Dimer { n7, n8, .. } => n7 as i64 - n8 as i64,
        }
    }
}

/// `|ψ^ℓ_m⟩` on a square face.
pub fn build_psi(face: &Face, l: usize, m: usize) -> Result<FockVector> {
    if face.kind != FaceKind::Square {
        return Err(CubenetError::InvalidArgument("ψ states live on square faces".into()));
    }
    if m > l {
        return Err(CubenetError::InvalidArgument(format!("m = {m} exceeds l = {l}")));
    }
    let bottom = face.modes[3];
    let mut tail = FockVector::vacuum(8)?;
    for _ in 0..l - m {
        tail = Operator::Raise(bottom).apply(&tail)?;
    }
    tail = tail.scaled(1.0 / factorial(l - m).sqrt());
    let diff = face.middle_difference();
    let pair = face.e_pair();
    let mut out = FockVector::zeros(Arc::new(tail.basis().sibling(l as i64)?));
    for k in 0..=m / 2 {
        let mut term = tail.clone();
        for _ in 0..m - 2 * k {
            term = diff.apply(&term)?;
        }
        term = term.scaled(1.0 / factorial(m - 2 * k).sqrt());
        for _ in 0..k {
            term = pair.apply(&term)?;
        }
        out = out.add_scaled(&term, coeff_c(l, m, k)?)?;
    }
    Ok(out)
}

/// `|φ_{n₇,n₈}⟩` on a dimer face.
pub fn build_phi(face: &Face, n7: usize, n8: usize) -> Result<FockVector> {
    if face.kind != FaceKind::Dimer {
        return Err(CubenetError::InvalidArgument("φ states live on dimer faces".into()));
    }
    let mut v = FockVector::vacuum(8)?;
    for _ in 0..n7 {
        v = Operator::Raise(face.modes[2]).apply(&v)?;
    }
    for _ in 0..n8 {
        v = Operator::Raise(face.modes[3]).apply(&v)?;
    }
    Ok(v.scaled(1.0 / (factorial(n7) * factorial(n8)).sqrt()))
}

/// Raising denominator for step `k → k+1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RaiseCoefficient {
    /// `2s − k` on both face kinds.
    Closed,
    /// The printed dimer form `n₇ + n₈ + 𝒩 − k`; squares are unaffected.
    Printed,
}

impl RaiseCoefficient {
    pub fn value(self, label: &FaceLabel, k: usize) -> f64 {
        let two_s = label.two_s() as f64;
        match (self, label) {
            (Self::Printed, FaceLabel::Dimer { big_n, .. }) => two_s + *big_n as f64 - k as f64,
            _ => two_s - k as f64,
        }
    }
}

/// Recursive vector for `label` on `face`.
pub fn build_recursive(face: &Face, label: &FaceLabel) -> Result<FockVector> {
    build_recursive_with(face, label, RaiseCoefficient::Closed)
}

pub fn build_recursive_with(face: &Face, label: &FaceLabel, coeff: RaiseCoefficient) -> Result<FockVector> {
    let mut v = match (*label, face.kind) {
        (FaceLabel::Square { l, m, .. }, FaceKind::Square) => build_psi(face, l, m)?,
        (FaceLabel::Dimer { n7, n8, .. }, FaceKind::Dimer) => build_phi(face, n7, n8)?,
        _ => return Err(CubenetError::InvalidLabel(format!("{label:?} on a {:?} face", face.kind))),
    };
    let seed = label.seed_bosons() as f64;
    let pair = face.e_pair();
    for step in (0..label.big_n()).step_by(2) {
        v = pair.apply(&v)?.scaled(-4.0 / (step as f64 + 2.0 * seed + 4.0));
    }
    let e = face.e();
    for k in 0..label.k() {
        v = e.apply(&v)?.scaled(1.0 / coeff.value(label, k));
    }
    Ok(v)
}

/// Lowest-weight seed labels (k = 0) with exactly `bosons` bosons on the face.
pub fn face_seeds(kind: FaceKind, bosons: usize) -> Vec<FaceLabel> {
    let mut out = Vec::new();
    for big_n in (0..=bosons).step_by(2) {
        let rest = bosons - big_n;
        match kind {
            FaceKind::Square => {
                for m in 0..=rest {
                    out.push(FaceLabel::Square { big_n, k: 0, l: rest, m });
                }
            }
            FaceKind::Dimer => {
                for n7 in 0..=rest {
                    out.push(FaceLabel::Dimer { big_n, k: 0, n7, n8: rest - n7 });
                }
            }
        }
    }
    out
}

/// All recursive labels, every `k`, with `bosons` face bosons.
pub fn face_labels(kind: FaceKind, bosons: usize) -> Vec<FaceLabel> {
    face_seeds(kind, bosons)
        .into_iter()
        .flat_map(|seed| (0..=seed.two_s()).map(move |k| seed.with_k(k)))
        .collect()
}

/// `C(n_face + 3, 3)`.
pub fn face_dim_count(bosons: usize) -> u128 {
    sector_dimension(4, bosons)
}

/// `C(n + 7, 7)`.
pub fn total_dim_count(n: usize) -> u128 {
    sector_dimension(8, n)
}

/// Coupled sector: two face seeds and a total spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SectorLabel {
    pub model: Model,
    pub alpha: FaceLabel,
    pub beta: FaceLabel,
    pub two_j: usize,
}

impl SectorLabel {
    pub fn new(model: Model, alpha: FaceLabel, beta: FaceLabel, two_j: usize) -> Result<Self> {
        let [fa, fb] = model.faces();
        let (a, b) = (alpha.two_s(), beta.two_s());
        let ok = alpha.kind() == fa.kind
            && beta.kind() == fb.kind
            && two_j >= a.abs_diff(b)
            && two_j <= a + b
            && (a + b - two_j).is_multiple_of(2);
        if !ok {
            return Err(CubenetError::InvalidLabel(format!("2j = {two_j} for faces {alpha:?}, {beta:?}")));
        }
        Ok(Self {
            model,
            alpha: alpha.with_k(0),
            beta: beta.with_k(0),
            two_j,
        })
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn n(&self) -> usize {
        self.alpha.bosons() + self.beta.bosons()
    }

    /// `Λ = s_α + s_β − j`.
    pub fn lambda(&self) -> usize {
        (self.alpha.two_s() + self.beta.two_s() - self.two_j) / 2
    }

    pub fn delta(&self) -> i64 {
        self.beta.delta()
    }
}

/// Every coupled sector of the `n`-boson space of `model`.
pub fn enumerate_sectors(model: Model, n: usize) -> Vec<SectorLabel> {
    let [fa, fb] = model.faces();
    let mut out = Vec::new();
    for n_alpha in 0..=n {
        for alpha in face_seeds(fa.kind, n_alpha) {
            for beta in face_seeds(fb.kind, n - n_alpha) {
                let (a, b) = (alpha.two_s(), beta.two_s());
                for two_j in (a.abs_diff(b)..=a + b).step_by(2) {
                    out.push(SectorLabel { model, alpha, beta, two_j });
                }
            }
        }
    }
    out
}

/// `Σ (2j+1)` over the enumerated sectors.
pub fn sector_state_count(model: Model, n: usize) -> u128 {
    enumerate_sectors(model, n).iter().map(|s| s.two_j as u128 + 1).sum()
}

/// Weights of the coupled lowest-weight vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OmegaWeights {
    /// `C(Λ, q)`, forced by `F|Ω⟩ = 0` in the recursive basis.
    Binomial,
    /// `√C(Λ, q)` as printed.
    SqrtBinomial,
}

impl OmegaWeights {
    pub fn weight(self, lambda: usize, q: usize) -> f64 {
        match self {
            Self::Binomial => binom_f(lambda, q),
            Self::SqrtBinomial => binom_f(lambda, q).sqrt(),
        }
    }
}

/// `|Ω_j⟩ = Σ_q (−1)^q w_q |𝒩_α,q,…}_α ⊗ |𝒩_β,Λ−q,…}_β`.
pub fn couple_omega(sector: &SectorLabel, weights: OmegaWeights) -> Result<FockVector> {
    let [fa, fb] = sector.model.faces();
    let lambda = sector.lambda();
    let basis = build_basis(8, sector.n())?;
    let mut out = FockVector::zeros(basis);
    for q in 0..=lambda {
        let a = build_recursive(&fa, &sector.alpha.with_k(q))?;
        let b = build_recursive(&fb, &sector.beta.with_k(lambda - q))?;
        let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
        out = out.add_scaled(&a.tensor_disjoint(&b)?, sign * weights.weight(lambda, q))?;
    }
    Ok(out)
}

/// Numerical rank of a family of vectors from the same sector.
pub fn gram_rank(vectors: &[FockVector]) -> Result<usize> {
    let Some(first) = vectors.first() else {
        return Ok(0);
    };
    let dim = first.basis().len();
    let mut m = DMatrix::zeros(dim, vectors.len());
    for (c, v) in vectors.iter().enumerate() {
        if !v.basis().same_sector(first.basis()) {
            return Err(CubenetError::SectorMismatch("rank of vectors from different sectors".into()));
        }
        m.set_column(c, v.amps());
    }
    let sv = m.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return Ok(0);
    }
    let tol = 1e-9 * top * dim.max(vectors.len()) as f64;
    Ok(sv.iter().filter(|&&s| s > tol).count())
}

/// Every recursive vector of one face with `bosons` face bosons.
pub fn face_family(face: &Face, bosons: usize) -> Result<Vec<FockVector>> {
    face_labels(face.kind, bosons).iter().map(|l| build_recursive(face, l)).collect()
}

/// `E^k |Ω_j⟩` for all sectors and `k = 0..2j`.
pub fn coupled_family(model: Model, n: usize) -> Result<Vec<FockVector>> {
    let total = build_triple(model, TripleName::Total)?;
    let mut out = Vec::new();
    for sector in enumerate_sectors(model, n) {
        let mut v = couple_omega(&sector, OmegaWeights::Binomial)?;
        out.push(v.clone());
        for _ in 0..sector.two_j {
            v = total.e.apply(&v)?;
            out.push(v.clone());
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn record_vec(
    report: &mut VerificationReport,
    suite: &str,
    name: String,
    sector: String,
    got: &FockVector,
    want: &FockVector,
    scale_from: &FockVector,
    tol: f64,
) -> Result<bool> {
    let res = got.add_scaled(want, -1.0)?.max_abs();
    let scale = scale_from.max_abs().max(want.max_abs()).max(f64::MIN_POSITIVE);
    Ok(report.record(suite, name, sector, res, scale, tol))
}

/// `f` and `f_pair` annihilate every lowest-weight seed with up to `max_bosons`.
pub fn verify_lowest_weights(max_bosons: usize) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    for model in [Model::One, Model::Two] {
        for (fi, face) in model.faces().iter().enumerate() {
            let suite = format!("lowest_weight/model{model}/face{}", ["alpha", "beta"][fi]);
            for bosons in 0..=max_bosons {
                for seed in face_seeds(face.kind, bosons).into_iter().filter(|s| s.big_n() == 0) {
                    let v = build_recursive(face, &seed)?;
                    let fv = face.f().apply(&v)?;
                    let zero = FockVector::zeros(fv.basis().clone());
                    record_vec(&mut report, &suite, format!("f {seed:?}"), format!("n={bosons}"), &fv, &zero, &v, LOWEST_WEIGHT_TOL)?;
                    let fp = face.f_pair().apply(&v)?;
                    let zero2 = FockVector::zeros(fp.basis().clone());
                    record_vec(&mut report, &suite, format!("f_pair {seed:?}"), format!("n={bosons}"), &fp, &zero2, &v, LOWEST_WEIGHT_TOL)?;
                }
            }
        }
    }
    Ok(report)
}

/// Action coefficients, Cartan eigenvalues and Casimirs on every recursive
/// vector with up to `max_bosons` face bosons, for all four faces.
pub fn verify_actions(max_bosons: usize) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    for model in [Model::One, Model::Two] {
        for (fi, face) in model.faces().iter().enumerate() {
            let suite = format!("actions/model{model}/face{}", ["alpha", "beta"][fi]);
            let casimir = face.hopping_triple("face").casimir();
            for bosons in 0..=max_bosons {
                for label in face_labels(face.kind, bosons) {
                    let v = build_recursive(face, &label)?;
                    let two_s = label.two_s();
                    let k = label.k();
                    let sector = format!("n={bosons}");
                    let name = |what: &str| format!("{what} {label:?}");

                    let ev = face.e().apply(&v)?;
                    let want = if k < two_s {
                        build_recursive(face, &label.with_k(k + 1))?.scaled((two_s - k) as f64)
                    } else {
                        FockVector::zeros(ev.basis().clone())
                    };
                    record_vec(&mut report, &suite, name("e"), sector.clone(), &ev, &want, &v, ACTION_TOL)?;

                    let fv = face.f().apply(&v)?;
                    let want = if k > 0 {
                        build_recursive(face, &label.with_k(k - 1))?.scaled(k as f64)
                    } else {
                        FockVector::zeros(fv.basis().clone())
                    };
                    record_vec(&mut report, &suite, name("f"), sector.clone(), &fv, &want, &v, ACTION_TOL)?;

                    let hv = face.h().apply(&v)?;
                    let want = v.scaled(2.0 * k as f64 - two_s as f64);
                    record_vec(&mut report, &suite, name("h"), sector.clone(), &hv, &want, &v, ACTION_TOL)?;

                    let hp = face.h_pair().apply(&v)?;
                    let want = v.scaled((label.bosons() + 2) as f64);
                    record_vec(&mut report, &suite, name("h_pair"), sector.clone(), &hp, &want, &v, ACTION_TOL)?;

                    let s = two_s as f64 / 2.0;
                    let cv = casimir.apply(&v)?;
                    record_vec(&mut report, &suite, name("casimir"), sector.clone(), &cv, &v.scaled(2.0 * s * (s + 1.0)), &v, ACTION_TOL)?;

                    if face.kind == FaceKind::Dimer {
                        let h3v = h3().apply(&v)?;
                        record_vec(&mut report, &suite, name("h3"), sector.clone(), &h3v, &v.scaled(label.delta() as f64), &v, ACTION_TOL)?;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Gram-rank completeness per face (`bosons ≤ max_face`) and of the coupled
/// family (`n ≤ max_total`).
pub fn verify_completeness(max_face: usize, max_total: usize) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    for model in [Model::One, Model::Two] {
        for (fi, face) in model.faces().iter().enumerate() {
            for bosons in 0..=max_face {
                let fam = face_family(face, bosons)?;
                let rank = gram_rank(&fam)? as f64;
                let want = face_dim_count(bosons) as f64;
                report.record(
                    &format!("completeness/model{model}"),
                    format!("face {} rank", ["alpha", "beta"][fi]),
                    format!("n_face={bosons}"),
                    (rank - want).abs(),
                    1.0,
                    0.0,
                );
            }
        }
        for n in 0..=max_total {
            let fam = coupled_family(model, n)?;
            let rank = gram_rank(&fam)? as f64;
            report.record(
                &format!("completeness/model{model}"),
                "coupled family rank",
                format!("n={n}"),
                (rank - total_dim_count(n) as f64).abs(),
                1.0,
                0.0,
            );
        }
    }
    Ok(report)
}

/// `F|Ω⟩ = 0` and `H|Ω⟩ = −2j|Ω⟩` for all sectors with `n ≤ n_max`.
pub fn verify_omega(n_max: usize, weights: OmegaWeights) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    let tag = match weights {
        OmegaWeights::Binomial => "binomial",
        OmegaWeights::SqrtBinomial => "sqrt_binomial",
    };
    for model in [Model::One, Model::Two] {
        let total = build_triple(model, TripleName::Total)?;
        let suite = format!("omega/{tag}/model{model}");
        for n in 0..=n_max {
            for sector in enumerate_sectors(model, n) {
                let omega = couple_omega(&sector, weights)?;
                let fo = total.f.apply(&omega)?;
                let zero = FockVector::zeros(fo.basis().clone());
                let label = format!("Lambda={} {:?} {:?} 2j={}", sector.lambda(), sector.alpha, sector.beta, sector.two_j);
                record_vec(&mut report, &suite, format!("F {label}"), format!("n={n}"), &fo, &zero, &omega, ACTION_TOL)?;
                let ho = total.h.apply(&omega)?;
                record_vec(&mut report, &suite, format!("H {label}"), format!("n={n}"), &ho, &omega.scaled(-(sector.two_j as f64)), &omega, ACTION_TOL)?;
            }
        }
    }
    Ok(report)
}

/// Largest `F`-residual of the printed √-binomial vectors relative to their size.
pub fn sqrt_binomial_defect(n_max: usize) -> Result<f64> {
    Ok(verify_omega(n_max, OmegaWeights::SqrtBinomial)?
        .entries
        .iter()
        .filter(|e| e.name.starts_with('F'))
        .map(|e| e.relative())
        .fold(0.0, f64::max))
}

/// Coefficient `c` in `ẽ₂|𝒩,k,n₇,n₈} = c |𝒩,k+1,n₇,n₈}`, fitted by projection.
pub fn fitted_raise_coefficient(label: &FaceLabel) -> Result<f64> {
    let face = Model::Two.faces()[1];
    let v = build_recursive(&face, label)?;
    let ev = face.e().apply(&v)?;
    let next = build_recursive(&face, &label.with_k(label.k() + 1))?;
    Ok(ev.dot(&next)? / next.dot(&next)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Occupation;

    const R2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn coefficient_values() {
        for l in 0..6 {
            for m in 0..=l {
                assert_eq!(coeff_c(l, m, 0).unwrap(), 1.0);
            }
        }
        assert!((coeff_c(2, 2, 1).unwrap() + R2 / 2.0).abs() < 1e-15);
        assert!((coeff_c(3, 2, 1).unwrap() + R2 / 3.0).abs() < 1e-15);
        assert!(coeff_c(2, 3, 0).is_err());
        assert!(coeff_c(3, 2, 2).is_err());
    }

    fn occ(v: &[u32]) -> Occupation {
        Occupation::new(v.to_vec())
    }

    #[test]
    fn psi_examples() {
        let face = Model::One.faces()[0];
        let v = build_psi(&face, 3, 0).unwrap();
        assert!((v.amp(occ(&[0, 0, 0, 0, 0, 0, 0, 3]).counts()) - 1.0).abs() < 1e-15);
        assert!((v.norm() - 1.0).abs() < 1e-15);
        let v = build_psi(&face, 1, 1).unwrap();
        assert!((v.amp(&[0, 0, 0, 1, 0, 0, 0, 0]) - 1.0).abs() < 1e-15);
        assert!((v.amp(&[0, 0, 0, 0, 1, 0, 0, 0]) + 1.0).abs() < 1e-15);
        assert!(build_psi(&face, 1, 2).is_err());
        let fv = face.f().apply(&build_psi(&face, 2, 1).unwrap()).unwrap();
        assert!(fv.max_abs() < 1e-14);
    }

    #[test]
    fn phi_examples() {
        let face = Model::Two.faces()[1];
        let vac = build_phi(&face, 0, 0).unwrap();
        assert_eq!(vac.basis().particles(), 0);
        let one = build_phi(&face, 1, 0).unwrap();
        assert_eq!(one.amp(&[0, 0, 0, 0, 0, 0, 1, 0]), 1.0);
        let v = build_phi(&face, 2, 1).unwrap();
        assert!(face.f().apply(&v).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn recursion_examples() {
        let sq = Model::One.faces()[0];
        let v = build_recursive(&sq, &FaceLabel::square(0, 1, 1, 0).unwrap()).unwrap();
        assert!((v.amp(&[0, 0, 0, 1, 0, 0, 0, 0]) - 0.5).abs() < 1e-15);
        assert!((v.amp(&[0, 0, 0, 0, 1, 0, 0, 0]) - 0.5).abs() < 1e-15);

        let dm = Model::Two.faces()[1];
        let v = build_recursive(&dm, &FaceLabel::dimer(2, 0, 0, 0).unwrap()).unwrap();
        assert!((v.amp(&[0, 0, 0, 0, 1, 0, 0, 1]) + 1.0).abs() < 1e-15);
        assert!((v.amp(&[0, 0, 0, 0, 0, 1, 1, 0]) - 1.0).abs() < 1e-15);

        let base = build_recursive(&sq, &FaceLabel::square(0, 0, 3, 1).unwrap()).unwrap();
        let psi = build_psi(&sq, 3, 1).unwrap();
        assert!(base.add_scaled(&psi, -1.0).unwrap().max_abs() == 0.0);
        assert!(FaceLabel::square(1, 0, 1, 0).is_err());
        assert!(build_recursive(&dm, &FaceLabel::square(0, 0, 1, 0).unwrap()).is_err());
    }

    #[test]
    fn dimer_raise_coefficient() {
        let label = FaceLabel::dimer(2, 0, 1, 0).unwrap();
        assert!((fitted_raise_coefficient(&label).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(RaiseCoefficient::Printed.value(&label, 0), 3.0);
        assert_eq!(RaiseCoefficient::Closed.value(&label, 0), 1.0);
    }

    #[test]
    fn enumeration_counts() {
        let s = enumerate_sectors(Model::One, 1);
        assert_eq!(s.len(), 4);
        let mut dims: Vec<usize> = s.iter().map(|x| x.two_j + 1).collect();
        dims.sort();
        assert_eq!(dims, vec![1, 1, 3, 3]);
        for model in [Model::One, Model::Two] {
            let s0 = enumerate_sectors(model, 0);
            assert_eq!(s0.len(), 1);
            assert_eq!(s0[0].two_j, 0);
            for n in 0..=5 {
                assert_eq!(sector_state_count(model, n), total_dim_count(n));
            }
        }
        assert_eq!(sector_state_count(Model::Two, 2), 36);
        for kind in [FaceKind::Square, FaceKind::Dimer] {
            for nf in 0..=5 {
                assert_eq!(face_labels(kind, nf).len() as u128, face_dim_count(nf));
            }
        }
        assert_eq!(face_dim_count(2), 10);
        assert_eq!(face_dim_count(0), 1);
        assert_eq!(total_dim_count(3), 120);
        let conv: u128 = (0..=3).map(|a| face_dim_count(a) * face_dim_count(3 - a)).sum();
        assert_eq!(conv, 120);
    }

    #[test]
    fn sector_label_validation() {
        let a = FaceLabel::square(0, 0, 1, 0).unwrap();
        let b = FaceLabel::square(0, 0, 0, 0).unwrap();
        assert!(SectorLabel::new(Model::One, a, b, 2).is_ok());
        assert!(SectorLabel::new(Model::One, a, b, 0).is_err());
        assert!(SectorLabel::new(Model::Two, a, b, 2).is_err());
    }

    #[test]
    fn omega_weights() {
        assert_eq!((0..=2).map(|q| OmegaWeights::Binomial.weight(2, q)).collect::<Vec<_>>(), vec![1.0, 2.0, 1.0]);
        let r = verify_omega(2, OmegaWeights::Binomial).unwrap();
        assert!(r.all_passed(), "{:?}", r.failures().next());
        assert!(sqrt_binomial_defect(2).unwrap() > 1e-3);
    }

    #[test]
    fn actions_and_lowest_weights() {
        let r = verify_actions(3).unwrap();
        assert!(r.all_passed(), "{:?}", r.failures().next());
        let r = verify_lowest_weights(4).unwrap();
        assert!(r.all_passed(), "{:?}", r.failures().next());
    }

    #[test]
    fn completeness_small() {
        let r = verify_completeness(3, 2).unwrap();
        assert!(r.all_passed(), "{:?}", r.failures().next());
    }

    #[test]
    fn tensor_overlap_rejected() {
        let face = Model::One.faces()[0];
        let v = build_psi(&face, 1, 0).unwrap();
        assert!(v.tensor_disjoint(&v).is_err());
    }
}
