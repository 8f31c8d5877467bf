//! Generator pieces as sparse matrices on a [`BasisSet`].
//!
//! With `∂_{q}^* = -∂_q + β ∂_q V` and `∂_p^* = -∂_p + (β/m) p` the
//! Hamiltonian part is `L_ham = (1/β) Σ_i (∂_{p_i}^* ∂_{q_i} − ∂_{q_i}^* ∂_{p_i})`,
//! which is exactly antisymmetric once `∂_q` is replaced by its Galerkin
//! matrix `D_i` and `∂_q^*` by `D_iᵀ`. Hermite functions diagonalize the
//! Ornstein–Uhlenbeck part, `−(1/β) ∂_p^* ∂_p h_n = −(|n|/m) h_n`.
//!
//! For the Nosé–Hoover part (unit mass) the identity
//! `(|p|² − d/β) ∂_ξ − ξ p·∇_p = β⁻² [(∂_ξ − ∂_ξ^*) N + Δ_p^* ∂_ξ − Δ_p ∂_ξ^*]`
//! with `N = Σ_i ∂_{p_i}^* ∂_{p_i}` and `Δ_p = Σ_i ∂_{p_i}²` gives an exactly
//! antisymmetric matrix as well.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::sparse::{SparseOperator, SymmetryTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Langevin,
    BoltzmannRhmc,
    AdaptiveLangevin,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Langevin => "langevin",
            ModelKind::BoltzmannRhmc => "boltzmann_rhmc",
            ModelKind::AdaptiveLangevin => "adaptive_langevin",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "langevin" => ModelKind::Langevin,
            "boltzmann_rhmc" | "rhmc" => ModelKind::BoltzmannRhmc,
            "adaptive_langevin" | "adl" => ModelKind::AdaptiveLangevin,
            _ => return None,
        })
    }
}

/// Kinetic energy `U(p) = Σ_i Σ_j c_j p_i^{2j}` (sum over `j ≥ 1`),
/// coefficients stored as `c_1, c_2, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticEnergy {
    pub coeffs: Vec<f64>,
}

impl KineticEnergy {
    pub fn quadratic(mass: f64) -> Self {
        KineticEnergy {
            coeffs: vec![0.5 / mass],
        }
    }

    /// True when `U = |p|²/(2m)` for the given mass.
    pub fn is_quadratic(&self, mass: f64) -> bool {
        let trailing_zero = self.coeffs.iter().skip(1).all(|&c| c == 0.0);
        trailing_zero
            && self
                .coeffs
                .first()
                .is_some_and(|&c| (c - 0.5 / mass).abs() <= 1e-14 * c.abs())
    }

    /// `U'(x)` and `U''(x)` of the one-dimensional profile.
    pub fn derivatives(&self, x: f64) -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate() {
            let k = 2 * (j + 1);
            d1 += c * k as f64 * x.powi(k as i32 - 1);
            d2 += c * (k * (k - 1)) as f64 * x.powi(k as i32 - 2);
        }
        (d1, d2)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| c * x.powi(2 * (j as i32 + 1)))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub gamma: f64,
    /// Nosé–Hoover time scale, required for Adaptive Langevin only.
    pub epsilon: Option<f64>,
    /// `None` means the quadratic energy of the basis mass.
    pub kinetic: Option<KineticEnergy>,
}

impl ModelSpec {
    pub fn langevin(gamma: f64) -> Self {
        ModelSpec {
            kind: ModelKind::Langevin,
            gamma,
            epsilon: None,
            kinetic: None,
        }
    }

    pub fn rhmc(gamma: f64) -> Self {
        ModelSpec {
            kind: ModelKind::BoltzmannRhmc,
            gamma,
            epsilon: None,
            kinetic: None,
        }
    }

    pub fn adaptive_langevin(gamma: f64, epsilon: f64) -> Self {
        ModelSpec {
            kind: ModelKind::AdaptiveLangevin,
            gamma,
            epsilon: Some(epsilon),
            kinetic: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.kind == ModelKind::AdaptiveLangevin {
            match self.epsilon {
                Some(e) if e.is_finite() && e > 0.0 => {}
                _ => {
                    return Err(Error::InvalidSpec(
                        "adaptive_langevin needs a positive epsilon".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

/// The assembled pieces of `L = A + S` together with `Π0` and `R`.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    pub model: ModelSpec,
    pub basis_id: u64,
    pub a: SparseOperator,
    pub s: SparseOperator,
    pub pi0: SparseOperator,
    pub r: SparseOperator,
    /// `L_ham` on its own; `A` differs from it for RHMC and AdL.
    pub hamiltonian: SparseOperator,
}

impl ModelOperators {
    pub fn assemble(basis: &BasisSet, model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let spec = basis.spec();
        if let Some(k) = &model.kinetic {
            if !k.is_quadratic(spec.mass) {
                return Err(Error::UnsupportedKinetic(
                    "operators are assembled for U(p) = |p|^2/(2m) only".into(),
                ));
            }
        }
        match (model.kind, spec.has_xi) {
            (ModelKind::AdaptiveLangevin, false) => {
                return Err(Error::ModelBasisMismatch(
                    "adaptive_langevin needs a basis with xi".into(),
                ))
            }
            (ModelKind::Langevin | ModelKind::BoltzmannRhmc, true) => {
                return Err(Error::ModelBasisMismatch(format!(
                    "{} has no xi variable but the basis does",
                    model.kind.name()
                )))
            }
            _ => {}
        }
        let ham = assemble_hamiltonian(basis)?;
        let (a, s) = match model.kind {
            ModelKind::Langevin => (ham.clone(), assemble_fd(basis).scaled(model.gamma)),
            ModelKind::BoltzmannRhmc => {
                let mut a = ham.scaled(-1.0);
                a.name = "A".into();
                (a, assemble_boltzmann_collision(basis, model.gamma))
            }
            ModelKind::AdaptiveLangevin => {
                let nh = assemble_nosehoover(basis, model.epsilon.unwrap())?;
                let a = ham.combine(1.0, &nh, 1.0, "A", SymmetryTag::Antisymmetric);
                (a, assemble_fd(basis).scaled(model.gamma))
            }
        };
        let mut a = a;
        a.name = "A".into();
        let mut s = s;
        s.name = "S".into();
        Ok(ModelOperators {
            model: model.clone(),
            basis_id: basis.id(),
            a,
            s,
            pi0: assemble_pi0(basis),
            r: assemble_reversal(basis),
            hamiltonian: ham,
        })
    }

    pub fn dimension(&self) -> usize {
        self.a.nrows
    }

    /// Mask of columns in `H0 = Ran Π0`.
    pub fn zero_mask(&self) -> Vec<bool> {
        self.pi0.diagonal().iter().map(|&v| v > 0.5).collect()
    }

    pub fn generator(&self) -> SparseOperator {
        self.a.combine(1.0, &self.s, 1.0, "L", SymmetryTag::General)
    }

    pub fn generator_dense(&self) -> DMatrix<f64> {
        self.a.to_dense() + self.s.to_dense()
    }
}

fn pruned_derivatives(basis: &BasisSet) -> Vec<DMatrix<f64>> {
    let pos = basis.position();
    (0..basis.d())
        .map(|l| {
            let mut dl = pos.derivative(l).clone();
            let cut = 1e-15 * crate::linalg::max_abs(&dl);
            dl.iter_mut().for_each(|v| {
                if v.abs() <= cut {
                    *v = 0.0
                }
            });
            dl
        })
        .collect()
}

/// Potentials are finite Fourier series; beyond this wavenumber the series
/// is treated as an untruncated one.
pub const MAX_POTENTIAL_MODE: usize = 256;

/// Matrix of `L_ham` for `U(p) = |p|²/(2m)`.
pub fn assemble_hamiltonian(basis: &BasisSet) -> Result<SparseOperator> {
    let spec = basis.spec();
    let max_mode = basis.potential().max_mode();
    if max_mode > MAX_POTENTIAL_MODE {
        return Err(Error::PotentialNotTruncated(format!(
            "highest potential mode {max_mode} exceeds {MAX_POTENTIAL_MODE}"
        )));
    }
    let (beta, mass) = (spec.beta, spec.mass);
    let d = spec.d;
    let nq = basis.n_q_funcs();
    let dmats = pruned_derivatives(basis);
    let dim = basis.dimension();
    let mut triplets = Vec::new();
    for xi in 0..basis.xi_levels() {
        for flat in 0..basis.momentum_block() {
            let n = basis.momentum_digits(flat);
            for b in 0..nq {
                let Some(col) = basis.column(xi, &n, b) else {
                    continue;
                };
                for i in 0..d {
                    // (1/β) ∂_p^* ⊗ D: raises n_i.
                    if n[i] < spec.n_p {
                        let mut up = n.clone();
                        up[i] += 1;
                        let c = ((up[i] as f64) * beta / mass).sqrt() / beta;
                        for a in 0..nq {
                            let v = dmats[i][(a, b)];
                            if v != 0.0 {
                                if let Some(row) = basis.column(xi, &up, a) {
                                    triplets.push((row, col, c * v));
                                }
                            }
                        }
                    }
                    // −(1/β) ∂_p ⊗ Dᵀ: lowers n_i.
                    if n[i] > 0 {
                        let mut down = n.clone();
                        down[i] -= 1;
                        let c = -((n[i] as f64) * beta / mass).sqrt() / beta;
                        for a in 0..nq {
                            let v = dmats[i][(b, a)];
                            if v != 0.0 {
                                if let Some(row) = basis.column(xi, &down, a) {
                                    triplets.push((row, col, c * v));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(
        "L_ham",
        SymmetryTag::Antisymmetric,
        dim,
        dim,
        triplets,
    ))
}

/// `L_FD = −(1/β) ∇_p^* ∇_p`, diagonal with entries `−|n|/m`.
pub fn assemble_fd(basis: &BasisSet) -> SparseOperator {
    let mass = basis.spec().mass;
    let diag: Vec<f64> = (0..basis.dimension())
        .map(|c| -(basis.momentum_degree(c) as f64) / mass)
        .collect();
    let mut op = SparseOperator::diagonal_matrix("L_FD", &diag);
    op.symmetry = SymmetryTag::Symmetric;
    op
}

/// `S = γ(Π0 − 1)`: zero on momentum degree 0, `−γ` elsewhere.
pub fn assemble_boltzmann_collision(basis: &BasisSet, gamma: f64) -> SparseOperator {
    let diag: Vec<f64> = (0..basis.dimension())
        .map(|c| {
            if basis.momentum_degree(c) == 0 {
                0.0
            } else {
                -gamma
            }
        })
        .collect();
    let mut op = SparseOperator::diagonal_matrix("S", &diag);
    op.symmetry = SymmetryTag::Symmetric;
    op
}

/// `ε⁻¹ L_NH` with `L_NH = (|p|² − d/β) ∂_ξ − ξ p·∇_p` (unit mass).
pub fn assemble_nosehoover(basis: &BasisSet, epsilon: f64) -> Result<SparseOperator> {
    let spec = basis.spec();
    if !spec.has_xi {
        return Err(Error::ModelBasisMismatch(
            "Nose-Hoover term needs a basis with xi".into(),
        ));
    }
    if (spec.mass - 1.0).abs() > 1e-14 {
        return Err(Error::ModelBasisMismatch(
            "adaptive_langevin is defined for unit mass".into(),
        ));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidSpec("epsilon must be positive".into()));
    }
    let beta = spec.beta;
    let d = spec.d;
    let nq = basis.n_q_funcs();
    let dim = basis.dimension();
    let pre = 1.0 / (beta * beta * epsilon);
    let mut triplets = Vec::new();
    let mut push = |xi: usize, n: &[usize], b: usize, col: usize, v: f64| {
        if v != 0.0 {
            if let Some(row) = basis.column(xi, n, b) {
                triplets.push((row, col, pre * v));
            }
        }
    };
    for j in 0..basis.xi_levels() {
        let lower = ((j as f64) * beta).sqrt(); // ∂_ξ g_j = √(jβ) g_{j−1}
        let raise = (((j + 1) as f64) * beta).sqrt(); // ∂_ξ^* g_j = √((j+1)β) g_{j+1}
        for flat in 0..basis.momentum_block() {
            let n = basis.momentum_digits(flat);
            let number = beta * n.iter().sum::<usize>() as f64;
            for b in 0..nq {
                let Some(col) = basis.column(j, &n, b) else {
                    continue;
                };
                if j > 0 {
                    push(j - 1, &n, b, col, lower * number);
                }
                push(j + 1, &n, b, col, -raise * number);
                for i in 0..d {
                    if j > 0 {
                        let mut up = n.clone();
                        up[i] += 2;
                        let c = beta * (((n[i] + 1) * (n[i] + 2)) as f64).sqrt();
                        push(j - 1, &up, b, col, lower * c);
                    }
                    if n[i] >= 2 {
                        let mut down = n.clone();
                        down[i] -= 2;
                        let c = beta * ((n[i] * (n[i] - 1)) as f64).sqrt();
                        push(j + 1, &down, b, col, -raise * c);
                    }
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(
        "L_NH",
        SymmetryTag::Antisymmetric,
        dim,
        dim,
        triplets,
    ))
}

/// Orthogonal projector onto momentum-degree-0 functions (`∫ · κ(dp)`).
pub fn assemble_pi0(basis: &BasisSet) -> SparseOperator {
    let diag: Vec<f64> = (0..basis.dimension())
        .map(|c| {
            if basis.momentum_degree(c) == 0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    SparseOperator::diagonal_matrix("Pi0", &diag)
}

/// Momentum reversal (and `ξ ↦ −ξ` when present): `(−1)^{|n| + n_ξ}`.
pub fn assemble_reversal(basis: &BasisSet) -> SparseOperator {
    let diag: Vec<f64> = (0..basis.dimension())
        .map(|c| {
            let idx = basis.decode(c);
            let parity = idx.momentum.iter().sum::<usize>() + idx.xi;
            if parity % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    SparseOperator::diagonal_matrix("R", &diag)
}

/// Residuals of the structural identities and the dissipation constant.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralReport {
    pub residuals: Vec<(&'static str, f64)>,
    /// Smallest eigenvalue of `−S` on `H₊`.
    pub s_numeric: f64,
    /// `γ/m` (Langevin, AdL) or `γ` (RHMC).
    pub s_analytic: f64,
}

impl StructuralReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |acc, (_, r)| acc.max(*r))
    }
}

pub fn analytic_s(model: &ModelSpec, mass: f64) -> f64 {
    match model.kind {
        ModelKind::BoltzmannRhmc => model.gamma,
        ModelKind::Langevin | ModelKind::AdaptiveLangevin => model.gamma / mass,
    }
}

/// Smallest eigenvalue of `−S` restricted to the columns outside `H0`.
pub fn dissipation_gap(s: &SparseOperator, zero_mask: &[bool]) -> f64 {
    let plus: Vec<usize> = (0..zero_mask.len()).filter(|&i| !zero_mask[i]).collect();
    if plus.is_empty() {
        return f64::INFINITY;
    }
    let block = s.submatrix(&plus, &plus);
    if block.is_diagonal() {
        return block
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |acc, &v| acc.min(-v));
    }
    let (vals, _) = symmetric_eigen(&(-block.to_dense()));
    vals[0]
}

/// Checks `Π0AΠ0 = 0`, `SΠ0 = Π0S = 0`, `R² = 1`, `RSR = S`, `RAR = −A`,
/// the declared symmetries, and (without `ξ`) `RΠ0 = Π0`. Fails with the
/// name of the first identity whose residual exceeds `tol`.
pub fn verify_structural_assumptions(
    ops: &ModelOperators,
    mass: f64,
    tol: f64,
) -> Result<StructuralReport> {
    let (a, s, pi0, r) = (&ops.a, &ops.s, &ops.pi0, &ops.r);
    let dim = ops.dimension();
    let ident = SparseOperator::diagonal_matrix("I", &vec![1.0; dim]);
    let mut residuals: Vec<(&'static str, f64)> = Vec::new();

    residuals.push((
        "A antisymmetric",
        a.combine(1.0, &a.transpose(), 1.0, "", SymmetryTag::General)
            .max_abs(),
    ));
    residuals.push((
        "S symmetric",
        s.combine(1.0, &s.transpose(), -1.0, "", SymmetryTag::General)
            .max_abs(),
    ));
    residuals.push((
        "Pi0 projector",
        pi0.mul(pi0, "")
            .max_abs_diff(pi0)
            .max(pi0.symmetry_violation()),
    ));
    residuals.push(("Pi0 A Pi0 = 0", pi0.mul(&a.mul(pi0, ""), "").max_abs()));
    residuals.push(("S Pi0 = 0", s.mul(pi0, "").max_abs()));
    residuals.push(("Pi0 S = 0", pi0.mul(s, "").max_abs()));
    residuals.push(("R^2 = I", r.mul(r, "").max_abs_diff(&ident)));
    residuals.push(("R S R = S", r.mul(&s.mul(r, ""), "").max_abs_diff(s)));
    residuals.push((
        "R A R = -A",
        r.mul(&a.mul(r, ""), "")
            .combine(1.0, a, 1.0, "", SymmetryTag::General)
            .max_abs(),
    ));
    residuals.push((
        "R Pi0 = Pi0 R",
        r.mul(pi0, "").max_abs_diff(&pi0.mul(r, "")),
    ));
    if ops.model.kind != ModelKind::AdaptiveLangevin {
        residuals.push(("R Pi0 = Pi0", r.mul(pi0, "").max_abs_diff(pi0)));
    }
    // −S ≥ 0: the largest eigenvalue of S must not be positive.
    let s_top = if s.is_diagonal() {
        s.diagonal()
            .iter()
            .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
    } else {
        *symmetric_eigen(&s.to_dense()).0.last().unwrap_or(&0.0)
    };
    residuals.push(("S <= 0", s_top.max(0.0)));

    let mask = ops.zero_mask();
    let report = StructuralReport {
        residuals,
        s_numeric: dissipation_gap(s, &mask),
        s_analytic: analytic_s(&ops.model, mass),
    };
    for &(identity, residual) in &report.residuals {
        if !(residual <= tol) {
            return Err(Error::AssumptionViolated { identity, residual });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{hermite_values, BasisSpec, Potential};
    use crate::linalg::max_abs_diff;
    use approx::assert_relative_eq;

    fn cos1() -> Potential {
        Potential::separable_cosine(1, 1, 1.0)
    }

    #[test]
    fn flat_hamiltonian_couples_neighbouring_hermite_degrees() {
        let (beta, mass) = (2.0, 0.5);
        let b = BasisSet::build(
            &BasisSpec::new(1, 3, 4).with_beta(beta).with_mass(mass),
            &Potential::zero(1),
        )
        .unwrap();
        let l = assemble_hamiltonian(&b).unwrap();
        // On the flat torus φ = √2 cos kq, √2 sin kq and ∂_q(√2 cos kq) = −k √2 sin kq.
        let n = 2usize;
        let col = b.column(0, &[n], 1).unwrap(); // √2 cos q · h_2
        let sin1 = 2;
        let up = l.get(b.column(0, &[n + 1], sin1).unwrap(), col);
        let down = l.get(b.column(0, &[n - 1], sin1).unwrap(), col);
        // (p/m)∂_q with p h_n = √(m/β)(√(n+1) h_{n+1} + √n h_{n−1}).
        assert_relative_eq!(
            up,
            -((n + 1) as f64).sqrt() / (mass * beta).sqrt(),
            epsilon = 1e-13
        );
        assert_relative_eq!(
            down,
            -(n as f64).sqrt() / (mass * beta).sqrt(),
            epsilon = 1e-13
        );
        let touched: Vec<usize> = l
            .triplets()
            .filter(|t| t.1 == col)
            .map(|t| b.momentum_degree(t.0))
            .collect();
        assert!(touched.iter().all(|&deg| deg == n + 1 || deg == n - 1));
    }

    #[test]
    fn hamiltonian_maps_position_functions_to_degree_one() {
        let b = BasisSet::build(&BasisSpec::new(1, 4, 3), &cos1()).unwrap();
        let l = assemble_hamiltonian(&b).unwrap();
        for col in 0..b.n_q_funcs() - 1 {
            for (r, c, _) in l.triplets() {
                if c == col {
                    assert_eq!(b.momentum_degree(r), 1);
                }
            }
        }
        assert_eq!(l.symmetry_violation(), 0.0);
    }

    #[test]
    fn hamiltonian_matches_quadrature_oracle() {
        // Apply p/m ∂_q − V' ∂_p to a basis function pointwise and project.
        let (beta, mass) = (1.5, 2.0);
        let pot = cos1().plus(&Potential::from_modes(1, [(vec![2], 0.2, 0.1)]).unwrap());
        let b = BasisSet::build(
            &BasisSpec::new(1, 3, 3).with_beta(beta).with_mass(mass),
            &pot,
        )
        .unwrap();
        let l = assemble_hamiltonian(&b).unwrap().to_dense();
        let sp = b.momentum_scale();
        let w = b.position().wavenumber();
        for col in [0usize, 5, 9, 17, 20] {
            let idx = b.decode(col);
            let n = idx.momentum[0];
            let e = b.expand_function(|q, p, _| {
                let tab = b.position().tabulate(q, 1);
                let phi = tab.values[(0, idx.position)];
                let dphi = tab.gradients[0][(0, idx.position)];
                let h = hermite_values(p[0] / sp, n);
                let dh = if n > 0 {
                    (n as f64).sqrt() * hermite_values(p[0] / sp, n - 1)[n - 1] / sp
                } else {
                    0.0
                };
                let dv = pot.sample(q, w).gradient[0];
                p[0] / mass * dphi * h[n] - dv * phi * dh
            });
            let expect = l.column(col).clone_owned();
            assert!(
                (e.coefficients.values - expect).amax() < 1e-10,
                "column {col}"
            );
        }
    }

    #[test]
    fn fd_and_collision_spectra() {
        let b = BasisSet::build(&BasisSpec::new(1, 1, 2).with_mass(2.0), &cos1()).unwrap();
        let fd = assemble_fd(&b);
        assert_relative_eq!(
            fd.get(b.column(0, &[1], 0).unwrap(), b.column(0, &[1], 0).unwrap()),
            -0.5
        );
        let trace: f64 = fd.diagonal().iter().sum();
        // Three position functions per Hermite degree: −3(0 + 1 + 2)/m.
        assert_relative_eq!(trace, -9.0 / 2.0, epsilon = 1e-14);
        let s = assemble_boltzmann_collision(&b, 0.7);
        let sd = s.to_dense();
        assert!(max_abs_diff(&(&sd * &sd), &(&sd * -0.7)) < 1e-15);
        assert_eq!(assemble_pi0(&b).diagonal().iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn nose_hoover_acting_on_xi() {
        let beta = 2.0;
        let b =
            BasisSet::build(&BasisSpec::new(1, 1, 4).with_beta(beta).with_xi(3), &cos1()).unwrap();
        let nh = assemble_nosehoover(&b, 1.0).unwrap();
        assert_eq!(nh.symmetry_violation(), 0.0);
        // ξ = g_1/√β and L_NH ξ = p² − 1/β = √2 h_2(p)/β.
        let col = b.column(1, &[0], 0).unwrap();
        let out: Vec<(usize, f64)> = nh
            .triplets()
            .filter(|t| t.1 == col)
            .map(|t| (t.0, t.2 / beta.sqrt()))
            .collect();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, b.column(0, &[2], 0).unwrap());
        assert_relative_eq!(out[0].1, 2f64.sqrt() / beta, epsilon = 1e-14);
    }

    #[test]
    fn nose_hoover_matches_quadrature_oracle() {
        let beta = 1.3;
        let b =
            BasisSet::build(&BasisSpec::new(1, 1, 4).with_beta(beta).with_xi(3), &cos1()).unwrap();
        let nh = assemble_nosehoover(&b, 0.5).unwrap().to_dense();
        let sp = b.momentum_scale();
        let sx = b.xi_scale();
        let dh = |x: f64, n: usize, s: f64| {
            if n > 0 {
                (n as f64).sqrt() * hermite_values(x / s, n - 1)[n - 1] / s
            } else {
                0.0
            }
        };
        for col in [3usize, 10, 22, 40, 55] {
            let idx = b.decode(col);
            let (n, j) = (idx.momentum[0], idx.xi);
            let e = b.expand_function(|q, p, xi| {
                let phi = b.position().tabulate(q, 0).values[(0, idx.position)];
                let hp = hermite_values(p[0] / sp, n)[n];
                let hx = hermite_values(xi / sx, j)[j];
                let v = (p[0] * p[0] - 1.0 / beta) * hp * dh(xi, j, sx)
                    - xi * p[0] * dh(p[0], n, sp) * hx;
                phi * v / 0.5
            });
            let expect = nh.column(col).clone_owned();
            assert!(
                (e.coefficients.values - expect).amax() < 1e-10,
                "column {col}"
            );
        }
    }

    #[test]
    fn structural_assumptions_hold_for_all_models() {
        let pot = cos1();
        for model in [
            ModelSpec::langevin(0.8),
            ModelSpec::rhmc(0.8),
            ModelSpec::adaptive_langevin(0.8, 0.5),
        ] {
            let spec = if model.kind == ModelKind::AdaptiveLangevin {
                BasisSpec::new(1, 4, 4).with_xi(3)
            } else {
                BasisSpec::new(1, 4, 4).with_mass(1.0)
            };
            let b = BasisSet::build(&spec, &pot).unwrap();
            let ops = ModelOperators::assemble(&b, &model).unwrap();
            let rep = verify_structural_assumptions(&ops, 1.0, 1e-10).unwrap();
            assert!(rep.max_residual() < 1e-12);
            assert_relative_eq!(rep.s_numeric, rep.s_analytic, epsilon = 1e-12);
        }
    }

    #[test]
    fn model_basis_mismatches_are_reported() {
        let b = BasisSet::build(&BasisSpec::new(1, 2, 2), &cos1()).unwrap();
        assert!(matches!(
            ModelOperators::assemble(&b, &ModelSpec::adaptive_langevin(1.0, 1.0)),
            Err(Error::ModelBasisMismatch(_))
        ));
        assert!(matches!(
            assemble_nosehoover(&b, 1.0),
            Err(Error::ModelBasisMismatch(_))
        ));
        let mut quartic = ModelSpec::langevin(1.0);
        quartic.kinetic = Some(KineticEnergy {
            coeffs: vec![0.5, 0.1],
        });
        assert!(matches!(
            ModelOperators::assemble(&b, &quartic),
            Err(Error::UnsupportedKinetic(_))
        ));
    }

    #[test]
    fn broken_reversal_is_named() {
        let b = BasisSet::build(&BasisSpec::new(1, 2, 2), &cos1()).unwrap();
        let mut ops = ModelOperators::assemble(&b, &ModelSpec::langevin(1.0)).unwrap();
        ops.r = SparseOperator::diagonal_matrix("R", &vec![1.0; b.dimension()]);
        match verify_structural_assumptions(&ops, 1.0, 1e-10) {
            Err(Error::AssumptionViolated { identity, .. }) => assert_eq!(identity, "R A R = -A"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn refinement_keeps_resolved_entries() {
        let pot = cos1();
        let small = BasisSet::build(&BasisSpec::new(1, 3, 3), &pot).unwrap();
        let large = BasisSet::build(&BasisSpec::new(1, 5, 6), &pot).unwrap();
        let ls = assemble_hamiltonian(&small).unwrap();
        let ll = assemble_hamiltonian(&large).unwrap();
        for (r, c, v) in ls.triplets() {
            let (ir, ic) = (small.decode(r), small.decode(c));
            let rr = large.column(ir.xi, &ir.momentum, ir.position).unwrap();
            let cc = large.column(ic.xi, &ic.momentum, ic.position).unwrap();
            assert!((ll.get(rr, cc) - v).abs() < 1e-12);
        }
    }
}
