//! Spin-j reduction, root equations and full-spectrum assembly.
//!
//! Inside a coupled module `V(j)` the Hamiltonian acts as
//! `M = U₀n² + U₁n(H−Δ) + U(H−Δ)² − J(E+F)` on the spin-j representation.
//! Eigenvectors are written as the coefficient vectors of monic polynomials
//! `P(z) = Π(z − u_r)` in the realization `E = 2jz − z²∂`, `F = ∂`,
//! `H = 2z∂ − 2j`. Collecting terms gives the root equations
//!
//! ```text
//! Σ_{l≠r} 2u_r²/(u_r − u_l) = R(u_r),
//! R(u) = (J/4U)(1 − u²) − (U₁n/2U)u + (2j + Δ − 1)u,
//! ```
//!
//! and the energy `U₀n² + U₁n(2j−Δ) + U(2j−Δ)² + JΣu_r`. The printed
//! right-hand side `(J/4U)(2j − u²) − (U₁n/2U)u − (2j − Δ − 1)u` agrees at
//! `2j = 1` only; it is kept as [`RhsForm::Printed`] for the discrepancy report.
//!
//! Roots are found from the polynomial form `u²P″ − RP′ + (q₁u + q₀)P = 0`,
//! which is a tridiagonal eigenproblem in the coefficients of `P`. Roots of
//! `P` come from its companion matrix and Aberth sweeps, and are polished
//! with damped Newton steps on the root equations.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CubenetError, Result};
use crate::fock::{build_basis, eigensolve_sym, FockBasis};
use crate::hamiltonians::{build_canonical, ModelParams};
use crate::recbasis::{enumerate_sectors, total_dim_count, SectorLabel};
use crate::report::VerificationReport;
use crate::su2gen::Model;

/// Root residuals below `NEWTON_TOL * scale` count as converged.
pub const NEWTON_TOL: f64 = 1e-9;
/// Below `U_MIN_RATIO * |J|` the root parametrization is bypassed.
pub const U_MIN_RATIO: f64 = 1e-6;
/// Below `J_MIN_RATIO * max(|U|, |U₁|n, 1)` the roots collapse onto each other.
pub const J_MIN_RATIO: f64 = 1e-8;
/// Roots closer than this count as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-10;

/// `(E, F, H)` on the basis `|k⟩`, `k = 0..2j`.
#[derive(Clone, Debug)]
pub struct SpinJRep {
    pub two_j: usize,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

pub fn spin_rep(two_j: usize) -> SpinJRep {
    let d = two_j + 1;
    let mut e = DMatrix::zeros(d, d);
    let mut f = DMatrix::zeros(d, d);
    let mut h = DMatrix::zeros(d, d);
    for k in 0..d {
        h[(k, k)] = 2.0 * k as f64 - two_j as f64;
        if k < two_j {
            e[(k + 1, k)] = (two_j - k) as f64;
        }
        if k > 0 {
            f[(k - 1, k)] = k as f64;
        }
    }
    SpinJRep { two_j, e, f, h }
}

fn check_delta(model: Model, delta: i64) -> Result<()> {
    if model == Model::One && delta != 0 {
        return Err(CubenetError::InvalidArgument("model 1 sectors have Δ = 0".into()));
    }
    Ok(())
}

fn cartan_diag(p: &ModelParams, n: usize, two_j: usize, delta: i64, k: usize) -> f64 {
    let n = n as f64;
    let x = 2.0 * k as f64 - two_j as f64 - delta as f64;
    p.u0 * n * n + p.u1 * n * x + p.u * x * x
}

/// Sector matrix `M` in the (non-orthonormal) `|k⟩` basis.
pub fn effective_matrix(model: Model, p: &ModelParams, n: usize, two_j: usize, delta: i64) -> Result<DMatrix<f64>> {
    check_delta(model, delta)?;
    let rep = spin_rep(two_j);
    let mut m = (&rep.e + &rep.f) * (-p.tunnel);
    for k in 0..=two_j {
        m[(k, k)] += cartan_diag(p, n, two_j, delta, k);
    }
    Ok(m)
}

/// Eigenvalues of [`effective_matrix`], ascending. `M` is symmetrized by a
/// diagonal similarity first: its off-diagonal products
/// `J²(2j−k)(k+1)` are non-negative.
pub fn effective_spectrum(model: Model, p: &ModelParams, n: usize, two_j: usize, delta: i64) -> Result<Vec<f64>> {
    check_delta(model, delta)?;
    let d = two_j + 1;
    let mut s = DMatrix::zeros(d, d);
    for k in 0..d {
        s[(k, k)] = cartan_diag(p, n, two_j, delta, k);
        if k < two_j {
            let off = -p.tunnel * (((two_j - k) * (k + 1)) as f64).sqrt();
            s[(k + 1, k)] = off;
            s[(k, k + 1)] = off;
        }
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Which right-hand side of the root equations to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsForm {
    Corrected,
    Printed,
}

/// `R(u) = a₂u² + a₁u + a₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetheRhs {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

impl BetheRhs {
    pub fn new(form: RhsForm, p: &ModelParams, n: usize, two_j: usize, delta: i64) -> Result<Self> {
        if p.u == 0.0 {
            return Err(CubenetError::VanishingInteraction);
        }
        let ratio = p.tunnel / (4.0 * p.u);
        let drift = -p.u1 * n as f64 / (2.0 * p.u);
        let tj = two_j as f64;
        let dl = delta as f64;
        Ok(match form {
            RhsForm::Corrected => Self {
                a2: -ratio,
                a1: drift + (tj + dl - 1.0),
                a0: ratio,
            },
            RhsForm::Printed => Self {
                a2: -ratio,
                a1: drift - (tj - dl - 1.0),
                a0: ratio * tj,
            },
        })
    }

    pub fn eval(&self, u: Complex64) -> Complex64 {
        (u * self.a2 + self.a1) * u + self.a0
    }

    pub fn deriv(&self, u: Complex64) -> Complex64 {
        u * (2.0 * self.a2) + self.a1
    }

    /// Sum of term magnitudes at `u`.
    fn magnitude(&self, u: Complex64) -> f64 {
        (self.a2 * u * u).norm() + (self.a1 * u).norm() + self.a0.abs()
    }
}

fn check_distinct(roots: &[Complex64]) -> Result<()> {
    for r in 0..roots.len() {
        for l in r + 1..roots.len() {
            if (roots[r] - roots[l]).norm() <= COINCIDENCE_TOL {
                return Err(CubenetError::CoincidentRoots(r, l));
            }
        }
    }
    Ok(())
}

/// Per-root residual `Σ_{l≠r} 2u_r²/(u_r−u_l) − R(u_r)` and its scale
/// `1 + max_r (Σ_l |2u_r²/(u_r−u_l)| + Σ |terms of R(u_r)|)`.
pub fn bethe_residual(rhs: &BetheRhs, roots: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    check_distinct(roots)?;
    let mut out = Vec::with_capacity(roots.len());
    let mut scale: f64 = 0.0;
    for (r, &ur) in roots.iter().enumerate() {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for (l, &ul) in roots.iter().enumerate() {
            if l != r {
                let t = ur * ur * 2.0 / (ur - ul);
                sum += t;
                mag += t.norm();
            }
        }
        out.push(sum - rhs.eval(ur));
        scale = scale.max(mag + rhs.magnitude(ur));
    }
    Ok((out, 1.0 + scale))
}

/// Residual with the printed right-hand side, for reporting.
pub fn bethe_residual_printed(p: &ModelParams, n: usize, two_j: usize, delta: i64, roots: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    bethe_residual(&BetheRhs::new(RhsForm::Printed, p, n, two_j, delta)?, roots)
}

/// Monic `P(u) = Σ c_i uⁱ` with its Van Vleck parameters.
#[derive(Clone, Debug)]
pub struct BethePolynomial {
    /// Ascending coefficients, `c[d] = 1`.
    pub coeffs: Vec<f64>,
    pub q1: f64,
    pub q0: f64,
}

impl BethePolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficients of `u²P″ − RP′ + (q₁u + q₀)P`, which vanish for a solution.
    pub fn defect(&self, rhs: &BetheRhs) -> Vec<f64> {
        let c = &self.coeffs;
        let d = self.degree();
        let at = |i: isize| if i >= 0 && (i as usize) <= d { c[i as usize] } else { 0.0 };
        (0..=d + 1)
            .map(|i| {
                let ii = i as isize;
                let fi = i as f64;
                fi * (fi - 1.0) * at(ii) - rhs.a2 * (fi - 1.0) * at(ii - 1) - rhs.a1 * fi * at(ii) - rhs.a0 * (fi + 1.0) * at(ii + 1)
                    + self.q1 * at(ii - 1)
                    + self.q0 * at(ii)
            })
            .collect()
    }

    pub fn roots(&self) -> Vec<Complex64> {
        polynomial_roots(&self.coeffs)
    }
}

/// All `2j + 1` polynomial solutions of degree `2j`.
pub fn heine_stieltjes(rhs: &BetheRhs, two_j: usize) -> Result<Vec<BethePolynomial>> {
    let d = two_j;
    let size = d + 1;
    let q1 = rhs.a2 * d as f64;
    // L c = −q₀ c, tridiagonal
    let diag = |i: usize| (i * i.saturating_sub(1)) as f64 - rhs.a1 * i as f64;
    let lower = |i: usize| rhs.a2 * (d + 1 - i) as f64; // L[i, i-1]
    let upper = |i: usize| -rhs.a0 * i as f64; // L[i-1, i]
    let mut scale = vec![1.0; size];
    let mut s = DMatrix::zeros(size, size);
    for i in 0..size {
        s[(i, i)] = diag(i);
    }
    for i in 1..size {
        let (lo, up) = (lower(i), upper(i));
        let prod = lo * up;
        if prod.is_nan() || prod <= 0.0 {
            return Err(CubenetError::InvalidArgument(format!(
                "polynomial eigenproblem is not symmetrizable (off-diagonal product {prod:.3e})"
            )));
        }
        // scale[i]/scale[i-1] = sqrt(up/lo)
        scale[i] = scale[i - 1] * (up / lo).sqrt();
        let off = lo.signum() * prod.sqrt();
        s[(i, i - 1)] = off;
        s[(i - 1, i)] = off;
    }
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut out = Vec::with_capacity(size);
    for idx in order {
        let lambda = eig.eigenvalues[idx];
        let v = eig.eigenvectors.column(idx);
        // the rescaled eigenvector only locates the peak; its small components
        // are rebuilt by recurrences run from both ends toward the peak
        let peak = (0..size)
            .max_by(|&a, &b| (v[a] / scale[a]).abs().total_cmp(&(v[b] / scale[b]).abs()))
            .expect("nonempty");
        let mut c = vec![0.0; size];
        c[d] = 1.0;
        for i in (peak + 1..=d).rev() {
            let above = if i < d { upper(i + 1) * c[i + 1] } else { 0.0 };
            c[i - 1] = ((lambda - diag(i)) * c[i] - above) / lower(i);
        }
        if peak > 0 {
            let mut f = vec![0.0; peak + 1];
            f[0] = 1.0;
            for i in 0..peak {
                let below = if i > 0 { lower(i) * f[i - 1] } else { 0.0 };
                f[i + 1] = ((lambda - diag(i)) * f[i] - below) / upper(i + 1);
            }
            if f[peak] == 0.0 || !f[peak].is_finite() {
                return Err(CubenetError::InvalidArgument("polynomial recurrence broke down".into()));
            }
            let ratio = c[peak] / f[peak];
            for i in 0..peak {
                c[i] = f[i] * ratio;
            }
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(CubenetError::InvalidArgument("polynomial coefficients overflow".into()));
        }
        out.push(BethePolynomial {
            coeffs: c,
            q1,
            q0: -lambda,
        });
    }
    Ok(out)
}

/// Roots of a polynomial with ascending real coefficients via its companion matrix.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let d = coeffs.len().saturating_sub(1);
    if d == 0 {
        return Vec::new();
    }
    let lead = coeffs[d];
    // u = ρw with ρ the Fujiwara-type radius, so the companion entries are O(1)
    let rho = (0..d)
        .map(|i| (coeffs[i] / lead).abs().powf(1.0 / (d - i) as f64))
        .fold(0.0, f64::max);
    if rho == 0.0 {
        return vec![Complex64::new(0.0, 0.0); d];
    }
    let mut comp = DMatrix::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        comp[(i, d - 1)] = -coeffs[i] / lead / rho.powi((d - i) as i32);
    }
    let mut roots: Vec<Complex64> = comp.complex_eigenvalues().iter().map(|w| w * rho).collect();
    aberth_polish(coeffs, &mut roots, 50);
    sort_roots(&mut roots);
    roots
}

/// Aberth–Ehrlich sweeps on `P`; recovers small roots that the companion
/// eigenvalues resolve poorly when root magnitudes differ by many decades.
fn aberth_polish(coeffs: &[f64], roots: &mut [Complex64], sweeps: usize) {
    let eval = |z: Complex64| {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    for _ in 0..sweeps {
        let mut moved: f64 = 0.0;
        for k in 0..roots.len() {
            let z = roots[k];
            let (p, dp) = eval(z);
            if p == Complex64::new(0.0, 0.0) || dp == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repel: Complex64 = roots
                .iter()
                .enumerate()
                .filter(|&(j, w)| j != k && *w != z)
                .map(|(_, w)| (z - w).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repel);
            if step.is_finite() {
                roots[k] = z - step;
                moved = moved.max(step.norm() / (1.0 + z.norm()).max(z.norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
}

fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Outcome of Newton polishing.
#[derive(Clone, Debug)]
pub struct Polished {
    pub roots: Vec<Complex64>,
    pub residual: f64,
    pub scale: f64,
    pub iterations: usize,
}

/// Damped Newton on the root equations, at most `max_iter` steps.
pub fn newton_refine(rhs: &BetheRhs, start: &[Complex64], max_iter: usize) -> Result<Polished> {
    let mut u = start.to_vec();
    let (f0, mut scale) = bethe_residual(rhs, &u)?;
    let mut res = max_norm(&f0);
    let mut fcur = f0;
    let d = u.len();
    let mut iterations = 0;
    while iterations < max_iter && res > 1e-15 * scale {
        iterations += 1;
        let mut jac = DMatrix::<Complex64>::zeros(d, d);
        for r in 0..d {
            let ur = u[r];
            let mut diag = -rhs.deriv(ur);
            for l in 0..d {
                if l == r {
                    continue;
                }
                let ul = u[l];
                let den = (ur - ul) * (ur - ul);
                diag += (ur * ur - ur * ul * 2.0) * 2.0 / den;
                jac[(r, l)] = ur * ur * 2.0 / den;
            }
            jac[(r, r)] = diag;
        }
        let Some(step) = jac.lu().solve(&DVector::from_vec(fcur.clone())) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<Complex64> = u.iter().zip(step.iter()).map(|(a, s)| a - s * lambda).collect();
            if let Ok((ft, st)) = bethe_residual(rhs, &trial) {
                let rt = max_norm(&ft);
                if rt.is_finite() && rt < res {
                    u = trial;
                    fcur = ft;
                    res = rt;
                    scale = st;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(Polished {
        roots: u,
        residual: res,
        scale,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Polynomial,
    MatrixOnly,
}

/// Energy constant convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyConstant {
    /// `U(2j−Δ)²` in both models.
    Canonical,
    /// `4U(2j−Δ)²` for model 2 as printed; model 1 prints the canonical value.
    Printed,
}

/// One eigenstate of a sector.
#[derive(Clone, Debug, Serialize)]
pub struct BetheSolution {
    pub sector: SectorLabel,
    pub roots: Vec<Complex64>,
    pub energy: f64,
    /// Imaginary part of `JΣu` before it was dropped.
    pub energy_imag: f64,
    /// Max `|residual_r|`.
    pub residual: f64,
    pub scale: f64,
    pub converged: bool,
    pub method: SolveMethod,
}

/// Solver settings; `Default` is the canonical configuration.
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub rhs: RhsForm,
    pub constant: EnergyConstant,
    pub u_min_ratio: f64,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rhs: RhsForm::Corrected,
            constant: EnergyConstant::Canonical,
            u_min_ratio: U_MIN_RATIO,
            max_newton: 100,
        }
    }
}

/// `U₀n² + U₁n(2j−Δ) + c·U(2j−Δ)²`.
pub fn energy_constant(model: Model, p: &ModelParams, n: usize, two_j: usize, delta: i64, conv: EnergyConstant) -> f64 {
    let n = n as f64;
    let x = two_j as f64 - delta as f64;
    let c = match (conv, model) {
        (EnergyConstant::Printed, Model::Two) => 4.0,
        _ => 1.0,
    };
    p.u0 * n * n + p.u1 * n * x + c * p.u * x * x
}

/// Whether the root parametrization is usable for these parameters.
pub fn roots_usable(p: &ModelParams, n: usize, u_min_ratio: f64) -> bool {
    let floor = p.u.abs().max(p.u1.abs() * n as f64).max(1.0);
    p.u.abs() >= u_min_ratio * p.tunnel.abs() && p.u != 0.0 && p.tunnel.abs() >= J_MIN_RATIO * floor
}

pub fn solve_sector(model: Model, p: &ModelParams, sector: &SectorLabel) -> Result<Vec<BetheSolution>> {
    solve_sector_with(model, p, sector, &SolverOptions::default())
}

pub fn solve_sector_with(model: Model, p: &ModelParams, sector: &SectorLabel, opts: &SolverOptions) -> Result<Vec<BetheSolution>> {
    let n = sector.n();
    let two_j = sector.two_j;
    let delta = sector.delta();
    check_delta(model, delta)?;
    let base = energy_constant(model, p, n, two_j, delta, opts.constant);
    let usable = roots_usable(p, n, opts.u_min_ratio);
    if two_j == 0 {
        return Ok(vec![BetheSolution {
            sector: *sector,
            roots: Vec::new(),
            energy: base,
            energy_imag: 0.0,
            residual: 0.0,
            scale: 1.0,
            converged: true,
            method: if usable { SolveMethod::Polynomial } else { SolveMethod::MatrixOnly },
        }]);
    }
    if !usable {
        return Ok(effective_spectrum(model, p, n, two_j, delta)?
            .into_iter()
            .map(|energy| BetheSolution {
                sector: *sector,
                roots: Vec::new(),
                energy,
                energy_imag: 0.0,
                residual: 0.0,
                scale: 1.0,
                converged: true,
                method: SolveMethod::MatrixOnly,
            })
            .collect());
    }
    let rhs = BetheRhs::new(opts.rhs, p, n, two_j, delta)?;
    let mut out = Vec::with_capacity(two_j + 1);
    for poly in heine_stieltjes(&rhs, two_j)? {
        let start = poly.roots();
        let sum_poly = -poly.coeffs[two_j - 1];
        let (roots, residual, scale) = match newton_refine(&rhs, &start, opts.max_newton) {
            Ok(pol) => (pol.roots, pol.residual, pol.scale),
            Err(_) => (start, f64::INFINITY, 1.0),
        };
        let converged = residual <= NEWTON_TOL * scale;
        let sum: Complex64 = if converged {
            roots.iter().sum()
        } else {
            Complex64::new(sum_poly, 0.0)
        };
        let mut roots = roots;
        sort_roots(&mut roots);
        out.push(BetheSolution {
            sector: *sector,
            roots,
            energy: base + p.tunnel * sum.re,
            energy_imag: p.tunnel * sum.im,
            residual,
            scale,
            converged,
            method: SolveMethod::Polynomial,
        });
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(out)
}

/// Coefficients of `Π(z − u_r)` in ascending order.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &u in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= ci * u;
        }
        c = next;
    }
    c
}

fn apply_real(m: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| v[c] * m[(r, c)]).sum())
        .collect()
}

fn padded(v: Vec<Complex64>, len: usize) -> Vec<Complex64> {
    let mut v = v;
    v.resize(len, Complex64::new(0.0, 0.0));
    v
}

fn combo(len: usize, terms: &[(Complex64, &[Complex64])]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (c, v) in terms {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += c * x;
        }
    }
    out
}

fn diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Which expansion set to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdentitySet {
    /// The four expansions exactly as printed.
    Printed,
    /// The expansions that follow from the polynomial realization.
    Derived,
}

/// Checks the E, F, (H−Δ) and (H−Δ)² expansions of `Ψ = P(z)` on one root set.
/// Returns `(name, residual, scale)` per identity.
pub fn action_identity_residuals(two_j: usize, delta: i64, roots: &[Complex64], set: IdentitySet) -> Vec<(&'static str, f64, f64)> {
    let rep = spin_rep(two_j);
    let len = two_j + 1;
    let dl = delta as f64;
    let tj = two_j as f64;
    let psi = poly_from_roots(roots);
    let partial: Vec<Vec<Complex64>> = (0..roots.len())
        .map(|r| {
            let rest: Vec<Complex64> = roots.iter().enumerate().filter(|(l, _)| *l != r).map(|(_, u)| *u).collect();
            padded(poly_from_roots(&rest), len)
        })
        .collect();
    let one = Complex64::new(1.0, 0.0);
    let sum_u: Complex64 = roots.iter().sum();
    let hd = &rep.h - DMatrix::identity(len, len) * dl;
    let hd2 = &hd * &hd;

    let mut out = Vec::new();
    let mut push = |name: &'static str, lhs: Vec<Complex64>, rhs: Vec<Complex64>| {
        let scale = 1.0 + lhs.iter().chain(rhs.iter()).map(|z| z.norm()).fold(0.0, f64::max);
        out.push((name, diff_norm(&lhs, &rhs), scale));
    };

    // E
    let mut terms: Vec<(Complex64, &[Complex64])> = vec![(-sum_u, &psi)];
    let sq: Vec<Complex64> = roots.iter().map(|u| -u * u).collect();
    for (r, p) in partial.iter().enumerate() {
        terms.push((sq[r], p));
    }
    push("E", apply_real(&rep.e, &psi), combo(len, &terms));

    // F
    let f_coef = match set {
        IdentitySet::Printed => tj,
        IdentitySet::Derived => 1.0,
    };
    let terms: Vec<(Complex64, &[Complex64])> = partial.iter().map(|p| (one * f_coef, p.as_slice())).collect();
    push("F", apply_real(&rep.f, &psi), combo(len, &terms));

    // H − Δ
    let mut terms: Vec<(Complex64, &[Complex64])> = vec![(one * (tj - dl), &psi)];
    let lin: Vec<Complex64> = roots.iter().map(|u| u * 2.0).collect();
    for (r, p) in partial.iter().enumerate() {
        terms.push((lin[r], p));
    }
    push("H", apply_real(&hd, &psi), combo(len, &terms));

    // (H − Δ)²
    let mut coef = Vec::with_capacity(roots.len());
    for (r, &ur) in roots.iter().enumerate() {
        let mut pair = Complex64::new(0.0, 0.0);
        for (l, &ul) in roots.iter().enumerate() {
            if l != r {
                pair += match set {
                    IdentitySet::Printed => ur * ur / (ur - ul),
                    IdentitySet::Derived => ur * ul / (ur - ul),
                };
            }
        }
        coef.push(ur * (4.0 * (tj - dl - 1.0)) + pair * 8.0);
    }
    let mut terms: Vec<(Complex64, &[Complex64])> = vec![(one * (tj - dl).powi(2), &psi)];
    for (r, p) in partial.iter().enumerate() {
        terms.push((coef[r], p));
    }
    push("H2", apply_real(&hd2, &psi), combo(len, &terms));
    out
}

/// `Π(E − u_r)|0⟩` built literally from the representation matrices.
pub fn literal_ansatz(two_j: usize, roots: &[Complex64]) -> Vec<Complex64> {
    let rep = spin_rep(two_j);
    let mut v = vec![Complex64::new(0.0, 0.0); two_j + 1];
    v[0] = Complex64::new(1.0, 0.0);
    for &u in roots {
        let ev = apply_real(&rep.e, &v);
        v = ev.iter().zip(&v).map(|(a, b)| a - u * b).collect();
    }
    v
}

/// Residual of the printed E expansion when `Ψ` is the literal operator product.
pub fn literal_e_identity_residual(two_j: usize, roots: &[Complex64]) -> (f64, f64) {
    let rep = spin_rep(two_j);
    let psi = literal_ansatz(two_j, roots);
    let sum_u: Complex64 = roots.iter().sum();
    let mut rhs: Vec<Complex64> = psi.iter().map(|x| -sum_u * x).collect();
    for (r, &ur) in roots.iter().enumerate() {
        let rest: Vec<Complex64> = roots.iter().enumerate().filter(|(l, _)| *l != r).map(|(_, u)| *u).collect();
        let p = literal_ansatz(two_j, &rest);
        for (o, x) in rhs.iter_mut().zip(p) {
            *o -= ur * ur * x;
        }
    }
    let lhs = apply_real(&rep.e, &psi);
    let scale = 1.0 + lhs.iter().chain(rhs.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    (diff_norm(&lhs, &rhs), scale)
}

/// Runs the identity checks for `draws` random root sets per `2j ∈ 1..=max_two_j`.
pub fn verify_action_identities<R: rand::Rng>(
    max_two_j: usize,
    draws: usize,
    deltas: &[i64],
    set: IdentitySet,
    rng: &mut R,
    tol: f64,
) -> VerificationReport {
    let mut report = VerificationReport::new();
    let tag = match set {
        IdentitySet::Printed => "printed",
        IdentitySet::Derived => "derived",
    };
    for two_j in 1..=max_two_j {
        for &delta in deltas {
            let suite = format!("bethe_actions/{tag}");
            let mut worst: Vec<(&'static str, f64, f64)> = Vec::new();
            for _ in 0..draws {
                let roots = random_roots(two_j, rng);
                for (i, entry) in action_identity_residuals(two_j, delta, &roots, set).into_iter().enumerate() {
                    if worst.len() <= i {
                        worst.push(entry);
                    } else if entry.1 / entry.2 > worst[i].1 / worst[i].2 {
                        worst[i] = entry;
                    }
                }
            }
            for (name, res, scale) in worst {
                report.record(&suite, name, format!("2j={two_j} delta={delta}"), res, scale, tol);
            }
        }
    }
    report
}

/// Distinct complex roots with components in [−2, 2].
pub fn random_roots<R: rand::Rng>(count: usize, rng: &mut R) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::with_capacity(count);
    while out.len() < count {
        let z = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if out.iter().all(|w| (w - z).norm() > 1e-3) {
            out.push(z);
        }
    }
    out
}

/// One assembled level.
#[derive(Clone, Debug, Serialize)]
pub struct AssembledLevel {
    pub energy: f64,
    pub sector: SectorLabel,
    pub method: SolveMethod,
}

/// Bethe spectrum of a full `n` sector against exact diagonalization.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub model: Model,
    pub n: usize,
    pub params: ModelParams,
    pub solutions: Vec<BetheSolution>,
    pub assembled: Vec<f64>,
    pub exact: Vec<f64>,
    pub max_match_error: f64,
    pub spectral_range: f64,
    /// `max_match_error / max(range, ε)`.
    pub relative_match_error: f64,
    /// Largest `residual / scale` over polynomial solutions.
    pub max_residual_ratio: f64,
    pub all_converged: bool,
    pub count_sectors: u128,
    pub count_expected: u128,
}

/// Optimal pairing error between two multisets of reals (sorted pairing).
pub fn match_error(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

pub fn assemble_spectrum(model: Model, p: &ModelParams, n: usize) -> Result<SpectrumReport> {
    assemble_spectrum_with(model, p, n, &SolverOptions::default(), None)
}

/// Assembles with explicit options; `basis` may be passed to reuse a sector.
pub fn assemble_spectrum_with(
    model: Model,
    p: &ModelParams,
    n: usize,
    opts: &SolverOptions,
    basis: Option<Arc<FockBasis>>,
) -> Result<SpectrumReport> {
    let sectors = enumerate_sectors(model, n);
    let count_sectors: u128 = sectors.iter().map(|s| s.two_j as u128 + 1).sum();
    let count_expected = total_dim_count(n);
    if count_sectors != count_expected {
        return Err(CubenetError::CountMismatch(format!(
            "model {model}, n={n}: sectors give {count_sectors}, expected {count_expected}"
        )));
    }
    let per_sector: Vec<Result<Vec<BetheSolution>>> = sectors.par_iter().map(|s| solve_sector_with(model, p, s, opts)).collect();
    let mut solutions = Vec::with_capacity(count_expected as usize);
    for r in per_sector {
        solutions.extend(r?);
    }
    solutions.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.sector.cmp(&b.sector)));
    let assembled: Vec<f64> = solutions.iter().map(|s| s.energy).collect();
    let basis = match basis {
        Some(b) => b,
        None => build_basis(8, n)?,
    };
    let exact = eigensolve_sym(&build_canonical(model, p, &basis)?)?;
    let max_match_error = match_error(&assembled, &exact);
    let spectral_range = exact.last().copied().unwrap_or(0.0) - exact.first().copied().unwrap_or(0.0);
    let max_residual_ratio = solutions
        .iter()
        .filter(|s| s.method == SolveMethod::Polynomial)
        .map(|s| s.residual / s.scale)
        .fold(0.0, f64::max);
    Ok(SpectrumReport {
        model,
        n,
        params: *p,
        all_converged: solutions.iter().all(|s| s.converged),
        relative_match_error: max_match_error / spectral_range.max(f64::EPSILON),
        solutions,
        assembled,
        exact,
        max_match_error,
        spectral_range,
        max_residual_ratio,
        count_sectors,
        count_expected,
    })
}

/// Groups sorted levels whose gaps are below `tol` into `(energy, multiplicity)`.
pub fn cluster_levels(sorted: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for &e in sorted {
        match out.last_mut() {
            Some((sum, count, last)) if (e - *last).abs() <= tol => {
                *sum += e;
                *count += 1;
                *last = e;
            }
            _ => out.push((e, 1, e)),
        }
    }
    out.into_iter().map(|(sum, count, _)| (sum / count as f64, count)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spin_half_matrices() {
        let r = spin_rep(1);
        assert_eq!(r.e, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        assert_eq!(r.f, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert_eq!(r.h, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn spin_rep_relations() {
        for two_j in 0..=8 {
            let r = spin_rep(two_j);
            assert_eq!(&r.e * &r.f - &r.f * &r.e, r.h);
            assert_eq!(&r.h * &r.e - &r.e * &r.h, &r.e * 2.0);
            assert_eq!(&r.h * &r.f - &r.f * &r.h, &r.f * -2.0);
            let mut pow = DMatrix::identity(two_j + 1, two_j + 1);
            for _ in 0..=two_j {
                pow = &pow * &r.e;
            }
            assert_eq!(pow.amax(), 0.0);
        }
    }

    #[test]
    fn effective_matrix_examples() {
        let p = ModelParams::new(0.3, 0.7, 1.1, 0.9);
        let n = 3;
        let m = effective_matrix(Model::One, &p, n, 1, 0).unwrap();
        let base = p.u0 * 9.0 + p.u;
        assert!((m[(0, 0)] - (base - p.u1 * 3.0)).abs() < 1e-14);
        assert!((m[(1, 1)] - (base + p.u1 * 3.0)).abs() < 1e-14);
        assert!((m[(0, 1)] + p.tunnel).abs() < 1e-14);
        let ev = effective_spectrum(Model::One, &p, n, 1, 0).unwrap();
        let split = ((p.u1 * 3.0).powi(2) + p.tunnel.powi(2)).sqrt();
        assert!((ev[0] - (base - split)).abs() < 1e-12);
        assert!((ev[1] - (base + split)).abs() < 1e-12);

        let free = ModelParams::new(0.2, 0.0, 0.0, 1.3);
        for two_j in 0..=6 {
            let ev = effective_spectrum(Model::One, &free, 2, two_j, 0).unwrap();
            for (i, e) in ev.iter().enumerate() {
                let m = i as f64 - two_j as f64 / 2.0;
                assert!((e - (0.2 * 4.0 + 2.0 * 1.3 * m)).abs() < 1e-11);
            }
        }
        let ev = effective_spectrum(Model::Two, &p, 2, 0, -1).unwrap();
        assert!((ev[0] - (p.u0 * 4.0 + p.u1 * 2.0 + p.u)).abs() < 1e-14);
        assert!(effective_matrix(Model::One, &p, 2, 2, 1).is_err());
    }

    #[test]
    fn symmetrized_spectrum_matches_general_eigenvalues() {
        let p = ModelParams::new(-0.4, 1.3, -0.8, 0.6);
        for two_j in 1..=8 {
            for delta in [-2i64, 0, 3] {
                let m = effective_matrix(Model::Two, &p, 4, two_j, delta).unwrap();
                let mut general: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
                general.sort_by(f64::total_cmp);
                let sym = effective_spectrum(Model::Two, &p, 4, two_j, delta).unwrap();
                assert!(match_error(&general, &sym) < 1e-9 * (1.0 + sym.iter().map(|x| x.abs()).fold(0.0, f64::max)));
            }
        }
    }

    #[test]
    fn spin_half_roots() {
        let p = ModelParams::new(0.0, 0.0, 1.0, 4.0);
        let rhs = BetheRhs::new(RhsForm::Corrected, &p, 2, 1, 0).unwrap();
        for u in [1.0, -1.0] {
            let (res, _) = bethe_residual(&rhs, &[c(u, 0.0)]).unwrap();
            assert!(res[0].norm() < 1e-15);
        }
        let (empty, _) = bethe_residual(&rhs, &[]).unwrap();
        assert!(empty.is_empty());
        assert!(matches!(bethe_residual(&rhs, &[c(1.0, 0.0), c(1.0, 0.0)]), Err(CubenetError::CoincidentRoots(0, 1))));
        assert!(matches!(BetheRhs::new(RhsForm::Corrected, &ModelParams::new(0.0, 0.0, 0.0, 1.0), 1, 1, 0), Err(CubenetError::VanishingInteraction)));
    }

    #[test]
    fn spin_half_sector_energies() {
        // squares carry even 2s, so 2j = 1 forces an odd dimer imbalance
        assert!(enumerate_sectors(Model::One, 3).iter().all(|s| s.two_j % 2 == 0));
        let p = ModelParams::new(0.3, -0.4, 1.0, 2.0);
        let n = 2;
        let sector = enumerate_sectors(Model::Two, n).into_iter().find(|s| s.two_j == 1).unwrap();
        let d = sector.delta() as f64;
        assert_eq!(d.abs(), 1.0);
        let nf = n as f64;
        let mean = p.u0 * nf * nf - p.u1 * nf * d + p.u * (1.0 + d * d);
        let split = ((p.u1 * nf - 2.0 * p.u * d).powi(2) + p.tunnel.powi(2)).sqrt();
        let sols = solve_sector(Model::Two, &p, &sector).unwrap();
        let e: Vec<f64> = sols.iter().map(|s| s.energy).collect();
        assert!((e[0] - (mean - split)).abs() < 1e-12 && (e[1] - (mean + split)).abs() < 1e-12, "{e:?}");
        for s in &sols {
            assert_eq!(s.roots.len(), 1);
            assert!(s.roots[0].im.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_spin_sector() {
        let p = ModelParams::new(0.3, 0.7, 1.1, 0.9);
        let s = enumerate_sectors(Model::Two, 2)
            .into_iter()
            .find(|s| s.two_j == 0 && s.delta() != 0);
        if let Some(s) = s {
            let sols = solve_sector(Model::Two, &p, &s).unwrap();
            assert_eq!(sols.len(), 1);
            assert!(sols[0].roots.is_empty());
            let d = s.delta() as f64;
            assert!((sols[0].energy - (p.u0 * 4.0 - p.u1 * 2.0 * d + p.u * d * d)).abs() < 1e-14);
        }
    }

    #[test]
    fn residual_matches_polynomial_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = ModelParams::new(0.1, -0.6, 0.9, 1.4);
        for two_j in 1..=6 {
            let rhs = BetheRhs::new(RhsForm::Corrected, &p, 3, two_j, 1).unwrap();
            let roots = random_roots(two_j, &mut rng);
            let (res, _) = bethe_residual(&rhs, &roots).unwrap();
            // u²P″(u_r) − R(u_r)P′(u_r) = P′(u_r)·residual_r
            let coeffs = poly_from_roots(&roots);
            let eval = |cs: &[Complex64], z: Complex64| cs.iter().rev().fold(c(0.0, 0.0), |acc, a| acc * z + a);
            let d1: Vec<Complex64> = (1..coeffs.len()).map(|i| coeffs[i] * i as f64).collect();
            let d2: Vec<Complex64> = (1..d1.len()).map(|i| d1[i] * i as f64).collect();
            for (r, &u) in roots.iter().enumerate() {
                let lhs = u * u * eval(&d2, u) - rhs.eval(u) * eval(&d1, u);
                let want = eval(&d1, u) * res[r];
                assert!((lhs - want).norm() < 1e-9 * (1.0 + lhs.norm()));
            }
        }
    }

    #[test]
    fn polynomial_defect_vanishes() {
        let p = ModelParams::new(0.1, -0.6, 0.9, 1.4);
        for two_j in 1..=8 {
            let rhs = BetheRhs::new(RhsForm::Corrected, &p, 4, two_j, 0).unwrap();
            let polys = heine_stieltjes(&rhs, two_j).unwrap();
            assert_eq!(polys.len(), two_j + 1);
            for poly in polys {
                assert!((poly.q1 + two_j as f64 * p.tunnel / (4.0 * p.u)).abs() < 1e-14);
                let scale = 1.0 + poly.coeffs.iter().map(|x| x.abs()).fold(0.0, f64::max) * (1.0 + rhs.a1.abs() + rhs.a0.abs() + (two_j * two_j) as f64);
                assert!(poly.defect(&rhs).iter().all(|x| x.abs() < 1e-9 * scale));
            }
        }
    }

    #[test]
    fn sector_energies_match_effective_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = ModelParams::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(0.05..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                rng.random_range(0.1..2.0),
            );
            for sector in enumerate_sectors(Model::Two, 4) {
                let sols = solve_sector(Model::Two, &p, &sector).unwrap();
                let e: Vec<f64> = sols.iter().map(|s| s.energy).collect();
                let oracle = effective_spectrum(Model::Two, &p, 4, sector.two_j, sector.delta()).unwrap();
                let range = oracle.last().unwrap() - oracle.first().unwrap();
                assert!(match_error(&e, &oracle) < 1e-8 * range.max(1.0), "{p:?} {sector:?}");
                for s in &sols {
                    assert!(s.converged, "{p:?} {sector:?} residual {}", s.residual);
                    let mut conj: Vec<Complex64> = s.roots.iter().map(|z| z.conj()).collect();
                    sort_roots(&mut conj);
                    let gap = s.roots.iter().map(|z| conj.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
                    assert!(gap < 1e-8 * (1.0 + max_norm(&s.roots)));
                }
            }
        }
    }

    #[test]
    fn printed_rhs_gives_wrong_energies() {
        let p = ModelParams::new(0.2, 0.4, 0.9, 1.1);
        let opts = SolverOptions { rhs: RhsForm::Printed, ..SolverOptions::default() };
        let sector = enumerate_sectors(Model::One, 2).into_iter().find(|s| s.two_j == 4).unwrap();
        let sols = solve_sector_with(Model::One, &p, &sector, &opts).unwrap();
        let e: Vec<f64> = sols.iter().map(|s| s.energy).collect();
        let oracle = effective_spectrum(Model::One, &p, 2, 4, 0).unwrap();
        assert!(match_error(&e, &oracle) > 1e-3);
    }

    #[test]
    fn small_u_falls_back() {
        let p = ModelParams::new(0.3, 0.5, 0.0, 1.0);
        let sector = enumerate_sectors(Model::One, 2).into_iter().find(|s| s.two_j == 2).unwrap();
        let sols = solve_sector(Model::One, &p, &sector).unwrap();
        assert!(sols.iter().all(|s| s.method == SolveMethod::MatrixOnly && s.roots.is_empty()));
        let split = (0.25f64 * 4.0 + 1.0).sqrt();
        for (s, m) in sols.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((s.energy - (0.3 * 4.0 + 2.0 * m * split)).abs() < 1e-12);
        }
        let p = ModelParams::new(0.3, 0.5, 1.0, 0.0);
        let sols = solve_sector(Model::One, &p, &sector).unwrap();
        assert!(sols.iter().all(|s| s.method == SolveMethod::MatrixOnly));
    }

    #[test]
    fn hand_expansions_at_spin_half() {
        let u = c(0.3, -0.7);
        let r = action_identity_residuals(1, 0, &[u], IdentitySet::Printed);
        assert!(r.iter().all(|(_, res, scale)| *res < 1e-14 * scale), "{r:?}");
        let r = action_identity_residuals(0, 0, &[], IdentitySet::Printed);
        assert!(r.iter().all(|(_, res, _)| *res == 0.0));
    }

    #[test]
    fn derived_identities_hold_printed_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let derived = verify_action_identities(8, 20, &[0, 2, -3], IdentitySet::Derived, &mut rng, 1e-10);
        assert!(derived.all_passed(), "{:?}", derived.failures().next());
        let printed = verify_action_identities(4, 5, &[0], IdentitySet::Printed, &mut rng, 1e-10);
        let failing: Vec<&str> = printed.failures().map(|e| e.name.as_str()).collect();
        assert!(failing.contains(&"F") && failing.contains(&"H2"));
        assert!(printed.entries.iter().filter(|e| e.name == "E" || e.name == "H").all(|e| e.passed));
    }

    #[test]
    fn literal_product_breaks_e_expansion() {
        let (res, scale) = literal_e_identity_residual(2, &[c(0.5, 0.1), c(-0.4, 0.9)]);
        assert!(res > 1e-3 * scale);
    }

    #[test]
    fn clustering() {
        let levels = [-2.0, -2.0 + 1e-12, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0];
        assert_eq!(cluster_levels(&levels, 1e-8), vec![(-2.0 + 5e-13, 2), (0.0, 4), (2.0, 2)]);
    }

    #[test]
    fn assemble_small() {
        let p = ModelParams::new(0.0, 0.0, 0.0, 1.0);
        let r = assemble_spectrum(Model::One, &p, 1).unwrap();
        assert_eq!(r.assembled.len(), 8);
        assert!(r.max_match_error < 1e-12);
        let r = assemble_spectrum(Model::Two, &ModelParams::new(0.0, 0.3, 0.8, 1.0), 0).unwrap();
        assert_eq!(r.assembled, vec![0.0]);
        let p = ModelParams::new(0.4, -1.2, 0.7, 1.3);
        for model in [Model::One, Model::Two] {
            let r = assemble_spectrum(model, &p, 3).unwrap();
            assert!(r.relative_match_error < 1e-8, "{}", r.relative_match_error);
            assert!(r.max_residual_ratio < NEWTON_TOL);
        }
    }
}
