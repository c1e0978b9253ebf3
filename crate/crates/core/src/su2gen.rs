//! Face generators, su(2) triples, Casimirs and the conserved-charge sets.
//!
//! Everything here is written in the transformed frame of the model (b modes
//! for model 1, b̃ modes for model 2) with zero-based mode indices.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CubenetError, Result};
use crate::fock::{build_basis, commutator_residual, identity_residual, FockBasis, Operator, SectorOperator};
use crate::hamiltonians::{canonical_operator, ModelParams};
use crate::modetx::TransformKind;
use crate::report::VerificationReport;

/// Relative tolerance for the operator identities.
pub const RELATION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Model {
    /// Two disjoint squares after transformation I.
    #[serde(rename = "1")]
    One,
    /// One square and two dimers after transformation II.
    #[serde(rename = "2")]
    Two,
}

impl Model {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            other => Err(CubenetError::InvalidLabel(format!("model {other}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Self::One => 1,
            Self::Two => 2,
        }
    }

    pub fn transform(self) -> TransformKind {
        match self {
            Self::One => TransformKind::I,
            Self::Two => TransformKind::II,
        }
    }

    /// Faces (α, β) in the transformed frame.
    pub fn faces(self) -> [Face; 2] {
        match self {
            Self::One => [Face::square(0, 3, 4, 7), Face::square(1, 2, 5, 6)],
            Self::Two => [Face::square(0, 1, 2, 3), Face::dimer(4, 5, 6, 7)],
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceKind {
    Square,
    Dimer,
}

/// Four modes forming one connected piece of the transformed hopping graph.
///
/// Square order is (top, middle a, middle b, bottom); dimer order is the
/// one-based (5, 6, 7, 8) with hops 5–7 and 6–8.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Face {
    pub kind: FaceKind,
    pub modes: [usize; 4],
}

impl Face {
    pub fn square(top: usize, a: usize, b: usize, bottom: usize) -> Self {
        Self {
            kind: FaceKind::Square,
            modes: [top, a, b, bottom],
        }
    }

    pub fn dimer(m5: usize, m6: usize, m7: usize, m8: usize) -> Self {
        Self {
            kind: FaceKind::Dimer,
            modes: [m5, m6, m7, m8],
        }
    }

    pub fn e(&self) -> Operator {
        let [p, q, r, s] = self.modes;
        match self.kind {
            FaceKind::Square => Operator::Bilinear(vec![(p, q, 1.0), (p, r, 1.0), (q, s, 1.0), (r, s, 1.0)]),
            FaceKind::Dimer => Operator::Bilinear(vec![(p, r, 1.0), (q, s, 1.0)]),
        }
    }

    pub fn f(&self) -> Operator {
        self.e().adjoint()
    }

    pub fn h(&self) -> Operator {
        let [p, q, r, s] = self.modes;
        match self.kind {
            FaceKind::Square => Operator::Bilinear(vec![(p, p, 2.0), (s, s, -2.0)]),
            FaceKind::Dimer => Operator::Bilinear(vec![(p, p, 1.0), (q, q, 1.0), (r, r, -1.0), (s, s, -1.0)]),
        }
    }

    pub fn e_pair(&self) -> Operator {
        // same index pattern on both face kinds: top·bottom − a·b, or 5·8 − 6·7
        let [p, q, r, s] = self.modes;
        Operator::PairCreate(vec![(p, s, 1.0), (q, r, -1.0)])
    }

    /// Sign chosen so that `[e_pair, f_pair] = h_pair`.
    pub fn f_pair(&self) -> Operator {
        let [p, q, r, s] = self.modes;
        Operator::PairAnnihilate(vec![(q, r, 1.0), (p, s, -1.0)])
    }

    pub fn h_pair(&self) -> Operator {
        self.number() + 2.0 * Operator::Identity
    }

    pub fn number(&self) -> Operator {
        Operator::Bilinear(self.modes.iter().map(|&m| (m, m, 1.0)).collect())
    }

    pub fn hopping_triple(&self, name: &str) -> Su2Triple {
        Su2Triple::new(name, self.e(), self.f(), self.h())
    }

    pub fn pair_triple(&self, name: &str) -> Su2Triple {
        Su2Triple::new(name, self.e_pair(), self.f_pair(), self.h_pair())
    }

    /// Creation operator of the lowest-weight seed direction: the
    /// antisymmetric middle combination on a square.
    pub fn middle_difference(&self) -> Operator {
        let [_, q, r, _] = self.modes;
        Operator::Raise(q) - Operator::Raise(r)
    }
}

/// An `(e, f, h)` triple of operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Su2Triple {
    pub name: String,
    pub e: Operator,
    pub f: Operator,
    pub h: Operator,
}

impl Su2Triple {
    pub fn new(name: &str, e: Operator, f: Operator, h: Operator) -> Self {
        Self {
            name: name.into(),
            e,
            f,
            h,
        }
    }

    /// `½h² + ef + fe`.
    pub fn casimir(&self) -> Operator {
        0.5 * self.h.squared() + self.e.anticommutator(&self.f)
    }

    /// The three su(2) relations as (label, lhs, rhs).
    pub fn relations(&self) -> [(String, Operator, Operator); 3] {
        [
            (format!("[{0}.e,{0}.f]=h", self.name), self.e.commutator(&self.f), self.h.clone()),
            (format!("[{0}.h,{0}.e]=2e", self.name), self.h.commutator(&self.e), 2.0 * self.e.clone()),
            (format!("[{0}.h,{0}.f]=-2f", self.name), self.h.commutator(&self.f), -2.0 * self.f.clone()),
        ]
    }

    fn parts(&self) -> [(&'static str, &Operator); 3] {
        [("e", &self.e), ("f", &self.f), ("h", &self.h)]
    }
}

/// Triples available in each model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TripleName {
    Face1,
    Face2,
    /// Model 2 only: the dimer Cartan partner built on `h̃₃`.
    Face3,
    PairAlpha,
    PairBeta,
    Total,
}

impl TripleName {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim_start_matches('~') {
            "e1" => Self::Face1,
            "e2" => Self::Face2,
            "e3" => Self::Face3,
            "e_alpha" | "ealpha" => Self::PairAlpha,
            "e_beta" | "ebeta" => Self::PairBeta,
            "E" | "total" => Self::Total,
            other => return Err(CubenetError::InvalidLabel(format!("triple {other}"))),
        })
    }

    fn label(self, model: Model) -> String {
        let base = match self {
            Self::Face1 => "e1",
            Self::Face2 => "e2",
            Self::Face3 => "e3",
            Self::PairAlpha => "e_alpha",
            Self::PairBeta => "e_beta",
            Self::Total => "E",
        };
        match model {
            Model::One => base.to_string(),
            Model::Two => format!("~{base}"),
        }
    }
}

/// `h̃₃ = Ñ₅ − Ñ₆ + Ñ₇ − Ñ₈` of model 2.
pub fn h3() -> Operator {
    Operator::Bilinear(vec![(4, 4, 1.0), (5, 5, -1.0), (6, 6, 1.0), (7, 7, -1.0)])
}

pub fn e3() -> Operator {
    Operator::Bilinear(vec![(4, 5, 1.0), (6, 7, 1.0)])
}

/// Adjoint of `ẽ₃`, the form used throughout.
pub fn f3() -> Operator {
    Operator::Bilinear(vec![(5, 4, 1.0), (7, 6, 1.0)])
}

/// `f̃₃` exactly as printed: `b̃₆†b̃₅ + b̃₆†b̃₇`.
pub fn f3_printed() -> Operator {
    Operator::Bilinear(vec![(5, 4, 1.0), (5, 6, 1.0)])
}

pub fn build_triple(model: Model, name: TripleName) -> Result<Su2Triple> {
    let [alpha, beta] = model.faces();
    let label = name.label(model);
    Ok(match name {
        TripleName::Face1 => alpha.hopping_triple(&label),
        TripleName::Face2 => beta.hopping_triple(&label),
        TripleName::Face3 => match model {
            Model::One => return Err(CubenetError::InvalidLabel("model 1 has no third face triple".into())),
            Model::Two => Su2Triple::new(&label, e3(), f3(), h3()),
        },
        TripleName::PairAlpha => alpha.pair_triple(&label),
        TripleName::PairBeta => beta.pair_triple(&label),
        TripleName::Total => Su2Triple::new(
            &label,
            alpha.e() + beta.e(),
            alpha.f() + beta.f(),
            alpha.h() + beta.h(),
        ),
    })
}

/// Casimir `½h² + ef + fe` of a triple.
pub fn casimir(triple: &Su2Triple) -> Operator {
    triple.casimir()
}

/// Named list of commuting charges.
#[derive(Clone, Debug)]
pub struct ChargeSet {
    pub model: Model,
    pub charges: Vec<(String, Operator)>,
}

/// The eight mutually commuting charges of `model`.
pub fn conserved_set(model: Model, params: &ModelParams) -> ChargeSet {
    let n = |i: usize| Operator::number(i);
    let mid_charge = |p: usize, q: usize| n(p) + n(q) - Operator::hop(p, q) - Operator::hop(q, p);
    let t1 = build_triple(model, TripleName::Face1).expect("face 1");
    let t2 = build_triple(model, TripleName::Face2).expect("face 2");
    let tt = build_triple(model, TripleName::Total).expect("total");
    let charges = match model {
        Model::One => vec![
            ("H1".to_string(), canonical_operator(model, params)),
            ("N".to_string(), Operator::total_number(8)),
            ("N2+N6+N3+N7".to_string(), n(1) + n(5) + n(2) + n(6)),
            ("N4+N5-b4b5-b5b4".to_string(), mid_charge(3, 4)),
            ("N3+N6-b3b6-b6b3".to_string(), mid_charge(2, 5)),
            ("C1".to_string(), t1.casimir()),
            ("C2".to_string(), t2.casimir()),
            ("C1+2".to_string(), tt.casimir()),
        ],
        Model::Two => vec![
            ("H2".to_string(), canonical_operator(model, params)),
            ("N".to_string(), Operator::total_number(8)),
            ("N5+N7".to_string(), n(4) + n(6)),
            ("N6+N8".to_string(), n(5) + n(7)),
            ("N2+N3-b2b3-b3b2".to_string(), mid_charge(1, 2)),
            ("~C1".to_string(), t1.casimir()),
            ("~C2".to_string(), t2.casimir()),
            ("~C1+2".to_string(), tt.casimir()),
        ],
    };
    ChargeSet { model, charges }
}

/// The operators a relation suite runs over. Fields are public so tests can
/// corrupt a generator and watch the suite flag it.
#[derive(Clone, Debug)]
pub struct RelationSuite {
    pub model: Model,
    /// Triples that must commute with each other elementwise.
    pub commuting: Vec<Su2Triple>,
    pub total: Su2Triple,
}

impl RelationSuite {
    pub fn standard(model: Model) -> Self {
        let mut names = vec![TripleName::Face1, TripleName::Face2];
        if model == Model::Two {
            names.push(TripleName::Face3);
        }
        names.extend([TripleName::PairAlpha, TripleName::PairBeta]);
        let commuting = names
            .into_iter()
            .map(|t| build_triple(model, t).expect("valid for model"))
            .collect();
        Self {
            model,
            commuting,
            total: build_triple(model, TripleName::Total).expect("total"),
        }
    }

    /// Runs every relation on sectors `0..=n_max`. Charges are built with
    /// `params` for the Hamiltonian entry.
    pub fn run(&self, n_max: usize, params: &ModelParams) -> Result<VerificationReport> {
        let mut report = VerificationReport::new();
        let suite = format!("su2/model{}", self.model);
        for n in 0..=n_max {
            let basis = build_basis(8, n)?;
            let sector = format!("n={n}");
            for t in self.commuting.iter().chain(std::iter::once(&self.total)) {
                for (label, lhs, rhs) in t.relations() {
                    let (res, scale) = identity_residual(&lhs, &rhs, &basis)?;
                    report.record(&suite, label, &sector, res, scale, RELATION_TOL);
                }
                let c = t.casimir();
                for (part, op) in t.parts() {
                    let (res, scale) = commutator_residual(&c, op, &basis)?;
                    report.record(&suite, format!("[C({}),{}]=0", t.name, part), &sector, res, scale, RELATION_TOL);
                }
            }
            for (i, a) in self.commuting.iter().enumerate() {
                for b in &self.commuting[i + 1..] {
                    let mut worst = (0.0f64, 1.0f64);
                    for (_, x) in a.parts() {
                        for (_, y) in b.parts() {
                            let (res, scale) = commutator_residual(x, y, &basis)?;
                            if res / scale > worst.0 / worst.1 {
                                worst = (res, scale);
                            }
                        }
                    }
                    report.record(&suite, format!("[{},{}]=0", a.name, b.name), &sector, worst.0, worst.1, RELATION_TOL);
                }
            }
            charge_checks(&conserved_set(self.model, params), &basis, &mut report, &suite)?;
        }
        Ok(report)
    }
}

/// Mutual commutation of all charges on one sector.
pub fn charge_checks(set: &ChargeSet, basis: &Arc<FockBasis>, report: &mut VerificationReport, suite: &str) -> Result<()> {
    let mats: Vec<SectorOperator> = set.charges.iter().map(|(_, op)| op.on(basis)).collect::<Result<_>>()?;
    let sector = format!("n={}", basis.particles());
    for i in 0..mats.len() {
        for j in i + 1..mats.len() {
            let ab = mats[i].compose(&mats[j])?;
            let ba = mats[j].compose(&mats[i])?;
            let res = ab.sub(&ba)?.max_abs();
            let scale = 1f64.max(ab.norm_inf()).max(ba.norm_inf());
            report.record(
                suite,
                format!("[{},{}]=0", set.charges[i].0, set.charges[j].0),
                &sector,
                res,
                scale,
                RELATION_TOL,
            );
        }
    }
    Ok(())
}

/// Full relation suite for one model on sectors `0..=n_max`.
pub fn verify_relations(model: Model, n_max: usize, params: &ModelParams) -> Result<VerificationReport> {
    RelationSuite::standard(model).run(n_max, params)
}

/// Largest `[ẽ₃, f̃₃] − h̃₃` entry on the sector for a candidate `f̃₃`.
pub fn f3_defect(f3_candidate: &Operator, basis: &Arc<FockBasis>) -> Result<f64> {
    Ok(identity_residual(&e3().commutator(f3_candidate), &h3(), basis)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockVector, Ladder};

    fn params() -> ModelParams {
        ModelParams::new(0.3, -0.7, 1.1, 0.9)
    }

    #[test]
    fn e1_one_boson_entries() {
        let b = build_basis(8, 1).unwrap();
        let e1 = build_triple(Model::One, TripleName::Face1).unwrap().e.on(&b).unwrap();
        let mut nz: Vec<(usize, usize)> = e1.triplets().map(|(r, c, _)| (r, c)).collect();
        nz.sort();
        // b†1 b4 maps mode 4 to mode 1 (zero-based 3 -> 0), etc.
        assert_eq!(nz, vec![(0, 3), (0, 4), (3, 7), (4, 7)]);
        assert!(e1.triplets().all(|(_, _, v)| v == 1.0));
    }

    #[test]
    fn pair_cartan_on_vacuum() {
        let b = build_basis(8, 0).unwrap();
        let t = build_triple(Model::One, TripleName::PairAlpha).unwrap();
        let vac = FockVector::vacuum(8).unwrap();
        let out = t.h.apply(&vac).unwrap();
        assert!((out.amps()[0] - 2.0).abs() < 1e-15);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn dimer_triple_commutes_with_dimer_pair() {
        for n in 0..=2 {
            let b = build_basis(8, n).unwrap();
            let t2 = build_triple(Model::Two, TripleName::Face2).unwrap();
            let tb = build_triple(Model::Two, TripleName::PairBeta).unwrap();
            let (res, _) = commutator_residual(&t2.e, &tb.e, &b).unwrap();
            assert!(res < 1e-12);
        }
    }

    #[test]
    fn full_suite_passes() {
        for model in [Model::One, Model::Two] {
            let report = verify_relations(model, 2, &params()).unwrap();
            let bad: Vec<_> = report.failures().map(|e| (&e.name, &e.sector, e.residual)).collect();
            assert!(bad.is_empty(), "model {model}: {bad:?}");
            assert!(report.len() > 50);
        }
    }

    #[test]
    fn vacuum_suite_is_trivial() {
        let report = verify_relations(Model::One, 0, &params()).unwrap();
        assert!(report.all_passed());
        assert!(report.max_relative() < 1e-15);
    }

    #[test]
    fn corrupted_generator_is_flagged() {
        let mut suite = RelationSuite::standard(Model::Two);
        suite.commuting[2].f = f3_printed();
        let report = suite.run(1, &params()).unwrap();
        assert!(!report.all_passed());
        assert!(report.failures().any(|e| e.name.contains("~e3")));

        let mut suite = RelationSuite::standard(Model::One);
        suite.commuting[0].f = suite.commuting[0].f.clone() + Operator::hop(0, 1);
        assert!(!suite.run(1, &params()).unwrap().all_passed());
    }

    #[test]
    fn printed_f3_fails_closure() {
        let b = build_basis(8, 1).unwrap();
        assert!(f3_defect(&f3(), &b).unwrap() < 1e-14);
        assert!(f3_defect(&f3_printed(), &b).unwrap() > 0.5);
    }

    #[test]
    fn casimir_on_spin_half() {
        // b†8|0> is the lowest weight of a face-1 spin-1 module, so C = 2s(s+1) = 4
        let b = build_basis(8, 1).unwrap();
        let c = build_triple(Model::One, TripleName::Face1).unwrap().casimir();
        let seed = crate::fock::ladder_op(&build_basis(8, 0).unwrap(), 7, Ladder::Raise)
            .unwrap()
            .apply(&FockVector::vacuum(8).unwrap())
            .unwrap();
        let out = c.apply(&seed).unwrap();
        assert!(out.add_scaled(&seed, -4.0).unwrap().max_abs() < 1e-12);
        let vac = FockVector::vacuum(8).unwrap();
        assert!(c.apply(&vac).unwrap().max_abs() < 1e-15);
        assert_eq!(b.len(), 8);
    }

    #[test]
    fn h3_is_a_charge_combination() {
        let set = conserved_set(Model::Two, &params());
        let combo = set.charges[2].1.clone() - set.charges[3].1.clone();
        let b = build_basis(8, 2).unwrap();
        let (res, _) = identity_residual(&combo, &h3(), &b).unwrap();
        assert!(res < 1e-14);
        let (res, _) = commutator_residual(&h3(), &set.charges[0].1, &b).unwrap();
        assert!(res < 1e-10);
    }

    #[test]
    fn parse_names() {
        assert_eq!(TripleName::parse("~e_beta").unwrap(), TripleName::PairBeta);
        assert!(TripleName::parse("x").is_err());
        assert!(build_triple(Model::One, TripleName::Face3).is_err());
        assert!(Model::from_number(3).is_err());
    }
}
