//! Model-specific closed-form bounds, the proposition on `(C, C′)`, the
//! Adaptive Langevin identities and the static Poincaré-type estimate with
//! its exponential rate.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, spectral_norm, symmetric_eigen, symmetric_function};
use crate::operators::ModelOperators;
use crate::schur::{Decomposition, DenseGenerator};
use crate::sparse::SparseOperator;

/// Which hypothesis on `V` supplies the `H²` control constants.
#[derive(Debug, Clone, PartialEq)]
pub enum PropositionCase {
    /// `∇²V ≥ 0`.
    Convex,
    /// `∇²V ≥ −K`.
    HessianLowerBound { k: f64 },
    /// Growth conditions with constants `c1, c2, c3`.
    General {
        c1: f64,
        c2: f64,
        c3: f64,
        beta: f64,
        d: usize,
    },
    /// `ν` satisfies a log-Sobolev inequality with constant `c_lsi`;
    /// `exp_moments[i] = ∫ e^{2 c3 C_LSI |∂_i V|} dν`.
    Lsi {
        c3: f64,
        c_lsi: f64,
        d: usize,
        exp_moments: Vec<f64>,
    },
}

impl PropositionCase {
    pub fn name(&self) -> &'static str {
        match self {
            PropositionCase::Convex => "convex",
            PropositionCase::HessianLowerBound { .. } => "hessian_lower_bound",
            PropositionCase::General { .. } => "general",
            PropositionCase::Lsi { .. } => "lsi",
        }
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// `(C, C′)` for the declared case.
pub fn prop_c_cprime(case: &PropositionCase) -> Result<(f64, f64)> {
    match *case {
        PropositionCase::Convex => Ok((1.0, 0.0)),
        PropositionCase::HessianLowerBound { k } => {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::CaseParametersIncomplete(
                    "hessian_lower_bound needs K >= 0",
                ));
            }
            Ok((1.0, k))
        }
        PropositionCase::General {
            c1,
            c2,
            c3,
            beta,
            d,
        } => {
            if !(positive(c1)
                && positive(c3)
                && positive(beta)
                && d > 0
                && (0.0..=1.0).contains(&c2))
            {
                return Err(Error::CaseParametersIncomplete(
                    "general case needs c1, c3, beta > 0, c2 in [0,1], d >= 1",
                ));
            }
            let d = d as f64;
            let inner = (8.0 * c3 / (beta * beta)).max((c1 * d / beta).sqrt());
            Ok((2.0, 2.0 * c3 * (d.sqrt() + 2.0 * inner)))
        }
        PropositionCase::Lsi {
            c3,
            c_lsi,
            d,
            ref exp_moments,
        } => {
            if !(positive(c3) && positive(c_lsi) && d > 0) {
                return Err(Error::CaseParametersIncomplete(
                    "lsi case needs c3, C_LSI > 0, d >= 1",
                ));
            }
            if exp_moments.len() != d || !exp_moments.iter().all(|m| m.is_finite() && *m > 0.0) {
                return Err(Error::CaseParametersIncomplete(
                    "lsi case needs one finite exponential moment per coordinate",
                ));
            }
            let max_moment = exp_moments.iter().copied().fold(0.0, f64::max);
            let log_term = (d as f64).ln() + max_moment.ln();
            Ok((2.0, 2.0 * (c3 + log_term / (2.0 * c3 * c_lsi))))
        }
    }
}

/// `2(C + C′/K_ν²)`.
pub fn proposition_bound(case: &PropositionCase, k_nu2: f64) -> Result<f64> {
    let (c, cp) = prop_c_cprime(case)?;
    Ok(2.0 * (c + cp / k_nu2))
}

/// Largest eigenvalue of `MᵀM` for a tall `M`: `‖M‖²` through the small side.
fn norm_squared_tall(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = symmetric_eigen(&m.tr_mul(m));
    vals.last().copied().unwrap_or(0.0).max(0.0)
}

/// `X² = ‖Π₊A²Π0(A₊₀ᵀA₊₀)⁻¹‖²` from the dense blocks. On `H₊` the
/// antisymmetric block is `L₊₊ − S₊₊`, and `Π0AΠ0 = 0` makes
/// `Π₊A²Π0 = A₊₊A₊₀`.
pub fn norm_x_squared(dec: &Decomposition) -> Result<f64> {
    let a_pp = &dec.l_pp - &dec.s_pp;
    let m = a_pp * &dec.a_plus0 * dec.gram_inverse()?;
    Ok(norm_squared_tall(&m))
}

/// Same quantity from the sparse `A` without forming any `N × N` dense
/// matrix; used where the dense decomposition is too expensive.
pub fn norm_x_squared_sparse(a: &SparseOperator, zero_mask: &[bool]) -> Result<f64> {
    let n = zero_mask.len();
    let zero: Vec<usize> = (0..n).filter(|&i| zero_mask[i]).collect();
    let plus: Vec<usize> = (0..n).filter(|&i| !zero_mask[i]).collect();
    let all: Vec<usize> = (0..n).collect();
    let a_col0 = a.submatrix(&all, &zero);
    let a_plus0 = a.submatrix(&plus, &zero).to_dense();
    let gram = a_plus0.tr_mul(&a_plus0);
    let ginv = gram
        .cholesky()
        .map(|c| c.solve(&DMatrix::identity(zero.len(), zero.len())))
        .ok_or(Error::MacroscopicCoercivityFailure { sigma_min: 0.0 })?;
    let a2 = a.submatrix(&plus, &all).mul(&a_col0, "A^2 Pi0");
    let m = a2.mul_dense(&ginv);
    Ok(norm_squared_tall(&m))
}

/// Proposition check: `X² ≤ 2(C + C′/K_ν²) + slack`.
pub fn check_proposition(x2: f64, case: &PropositionCase, k_nu2: f64, slack: f64) -> Result<f64> {
    let bound = proposition_bound(case, k_nu2)?;
    if x2 <= bound + slack {
        Ok(bound)
    } else {
        Err(Error::PropositionViolation { x2, bound })
    }
}

/// `‖Π1 L_FD Π1‖` and `Y = ‖Π2 L_FD Π1 L_ham Π0 (A*A)⁻¹‖` for Langevin,
/// read off `S = γ L_FD`.
pub fn langevin_fd_norms(dec: &Decomposition, gamma: f64) -> Result<(f64, f64)> {
    let pi1_fd = spectral_norm(&dec.s11()) / gamma;
    let y = if dec.p2.ncols() > 0 {
        spectral_norm(&(dec.s21() * &dec.a10 * dec.gram_inverse()?)) / gamma
    } else {
        0.0
    };
    Ok((pi1_fd, y))
}

/// Inputs of the general Langevin bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinConstants {
    pub beta: f64,
    pub gamma: f64,
    pub norm_pi1_fd_pi1: f64,
    pub lambda_min_m: f64,
    pub k_nu2: f64,
    pub k_kappa2: f64,
    pub x2: f64,
    pub y: f64,
}

/// `2βγ‖Π1L_FDΠ1‖/(λmin(M)K_ν²) + (4β/(γK_κ²))(3/4 + X² + γ²Y²)`.
pub fn langevin_bound_general(c: &LangevinConstants) -> f64 {
    2.0 * c.beta * c.gamma * c.norm_pi1_fd_pi1 / (c.lambda_min_m * c.k_nu2)
        + 4.0 * c.beta / (c.gamma * c.k_kappa2) * (0.75 + c.x2 + c.gamma * c.gamma * c.y * c.y)
}

/// Quadratic kinetic energy: `2βγ/K_ν² + (4m/γ)(3/4 + X²)`.
pub fn langevin_corollary_bound(beta: f64, gamma: f64, mass: f64, k_nu2: f64, x2: f64) -> f64 {
    2.0 * beta * gamma / k_nu2 + 4.0 * mass / gamma * (0.75 + x2)
}

/// `2βγ/(λmin(M)K_ν²) + (2/γ)(3/2 + X²)`.
pub fn rhmc_bound(beta: f64, gamma: f64, lambda_min_m: f64, k_nu2: f64, x2: f64) -> f64 {
    2.0 * beta * gamma / (lambda_min_m * k_nu2) + 2.0 / gamma * (1.5 + x2)
}

/// `a² = (1/β) min(2d/ε², K_ν²)`.
pub fn adl_a2(beta: f64, d: usize, epsilon: f64, k_nu2: f64) -> f64 {
    (2.0 * d as f64 / (epsilon * epsilon)).min(k_nu2) / beta
}

/// `max(γε², γ, 1/γ, 1/(γε²))`.
pub fn adl_envelope(gamma: f64, epsilon: f64) -> f64 {
    let e2 = epsilon * epsilon;
    (gamma * e2)
        .max(gamma)
        .max(1.0 / gamma)
        .max(1.0 / (gamma * e2))
}

/// Residual of `A₊₀ᵀA₊₀ = (2d/(β²ε²)) ∂ξ*∂ξ + (1/β) ∇q*∇q` on `H0`, the
/// left side from the assembled `A`, the right side from the position
/// derivative matrices and `∂ξ*∂ξ g_j = jβ g_j` on the ξ Hermite functions.
pub fn adl_a_star_a_residual(basis: &BasisSet, ops: &ModelOperators, epsilon: f64) -> Result<f64> {
    let spec = basis.spec();
    if !spec.has_xi {
        return Err(Error::ModelBasisMismatch(
            "A*A identity needs a xi factor".into(),
        ));
    }
    let mask = ops.zero_mask();
    let n = mask.len();
    let zero: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    let plus: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    let a_plus0 = ops.a.submatrix(&plus, &zero).to_dense();
    let assembled = a_plus0.tr_mul(&a_plus0);

    let beta = spec.beta;
    let pos = basis.position();
    let mut lap = DMatrix::zeros(pos.len(), pos.len());
    for l in 0..pos.dim() {
        let dl = pos.derivative(l);
        lap += dl.tr_mul(dl);
    }
    let xi_coeff = 2.0 * basis.d() as f64 / (beta * beta * epsilon * epsilon);
    let idx: Vec<_> = zero.iter().map(|&c| basis.decode(c)).collect();
    let direct = DMatrix::from_fn(zero.len(), zero.len(), |i, j| {
        let (a, b) = (&idx[i], &idx[j]);
        if a.xi != b.xi {
            return 0.0;
        }
        let diag = if a.position == b.position {
            xi_coeff * a.xi as f64 * beta
        } else {
            0.0
        };
        diag + lap[(a.position, b.position)] / beta
    });
    let residual = max_abs_diff(&assembled, &direct);
    if residual < 1e-10 {
        Ok(residual)
    } else {
        Err(Error::NhAssemblyError { residual })
    }
}

/// Fit of `exact ≈ C·max(γε², γ, 1/γ, 1/(γε²))` over a grid of points.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeFit {
    /// Geometric mean of `exact / envelope`.
    pub c_fit: f64,
    /// `max exact/(C_fit·envelope)`.
    pub max_ratio: f64,
    /// `min exact/(C_fit·envelope)`.
    pub min_ratio: f64,
}

impl EnvelopeFit {
    /// Every point lies below `factor · C_fit · envelope`.
    pub fn bounded_by(&self, factor: f64) -> bool {
        self.max_ratio <= factor
    }

    /// Every point lies within `[1/factor, factor]` of the fitted envelope.
    pub fn within(&self, factor: f64) -> bool {
        self.max_ratio <= factor && self.min_ratio >= 1.0 / factor
    }
}

/// `points` are `(γ, ε, exact)`.
pub fn fit_adl_envelope(points: &[(f64, f64, f64)]) -> Result<EnvelopeFit> {
    if points.is_empty()
        || points
            .iter()
            .any(|&(g, e, x)| !(positive(g) && positive(e) && positive(x)))
    {
        return Err(Error::InvalidRateInputs);
    }
    let logs: Vec<f64> = points
        .iter()
        .map(|&(g, e, x)| (x / adl_envelope(g, e)).ln())
        .collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = logs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EnvelopeFit {
        c_fit: mean.exp(),
        max_ratio: (max - mean).exp(),
        min_ratio: (min - mean).exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticConstants {
    /// `1 + ‖Π₊A²Π0(A₊₀ᵀA₊₀)⁻¹‖`.
    pub c1: f64,
    /// `‖(1−S₊₊)^{1/2} A₊₀ (A₊₀ᵀA₊₀)⁻¹‖`.
    pub c2: f64,
    /// `‖(1−S₊₊)^{1/2}Π1‖ · ‖A₊₀(A₊₀ᵀA₊₀)⁻¹‖`, an upper bound for `c2`.
    pub c2_product: f64,
}

pub fn static_poincare_constants(dec: &Decomposition) -> Result<StaticConstants> {
    let ginv = dec.gram_inverse()?;
    let x = norm_x_squared(dec)?.sqrt();
    let np = dec.s_pp.nrows();
    let one_minus_s = DMatrix::identity(np, np) - &dec.s_pp;
    let root = symmetric_function(&one_minus_s, |v| v.max(0.0).sqrt());
    let a_ginv = &dec.a_plus0 * &ginv;
    let c2 = norm_squared_tall(&(&root * &a_ginv)).sqrt();
    let pi1 = dec.pi1()?;
    let c2_product = spectral_norm(&(&root * pi1)) * norm_squared_tall(&a_ginv).sqrt();
    Ok(StaticConstants {
        c1: 1.0 + x,
        c2,
        c2_product,
    })
}

/// Evaluates `‖f‖ / (C1‖(1−Π0)f‖ + C2‖(1−S)^{−1/2}Af‖)` on full `H`.
#[derive(Debug, Clone)]
pub struct StaticInequality {
    constants: StaticConstants,
    zero_mask: Vec<bool>,
    weighted_a: DMatrix<f64>,
}

impl StaticInequality {
    pub fn new(gen: &DenseGenerator, constants: StaticConstants) -> Self {
        let n = gen.s.nrows();
        let inv_root = symmetric_function(&(DMatrix::identity(n, n) - &gen.s), |v| 1.0 / v.sqrt());
        StaticInequality {
            constants,
            zero_mask: gen.zero_mask.clone(),
            weighted_a: inv_root * &gen.a,
        }
    }

    pub fn ratio(&self, f: &DVector<f64>) -> f64 {
        let micro = f
            .iter()
            .zip(&self.zero_mask)
            .filter(|(_, &z)| !z)
            .map(|(v, _)| v * v)
            .sum::<f64>()
            .sqrt();
        let macro_part = (&self.weighted_a * f).norm();
        f.norm() / (self.constants.c1 * micro + self.constants.c2 * macro_part)
    }
}

/// `α_T = (1 + γsT/(γ²sC₂² + C₁²))⁻¹`.
pub fn alpha_t(gamma: f64, s: f64, t: f64, c1: f64, c2: f64) -> Result<f64> {
    if !(positive(gamma) && positive(s) && positive(t) && positive(c1) && positive(c2)) {
        return Err(Error::InvalidRateInputs);
    }
    Ok(1.0 / (1.0 + gamma * s * t / (gamma * gamma * s * c2 * c2 + c1 * c1)))
}

/// `−log α_T` divided by its small-γ (`γsT/C₁²`) and large-γ
/// (`T/(γC₂²)`) asymptotic forms.
pub fn alpha_t_asymptotic_ratios(
    gamma: f64,
    s: f64,
    t: f64,
    c1: f64,
    c2: f64,
) -> Result<(f64, f64)> {
    let rate = -alpha_t(gamma, s, t, c1, c2)?.ln();
    Ok((
        rate / (gamma * s * t / (c1 * c1)),
        rate / (t / (gamma * c2 * c2)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisSpec, Potential};
    use crate::operators::ModelSpec;
    use crate::random::Rng;
    use crate::schur::{build_decomposition, DEFAULT_RANK_TOL};
    use alloc::vec;
    use approx::assert_relative_eq;

    fn setup(
        model: &ModelSpec,
        v: &Potential,
        n_q: usize,
        n_p: usize,
    ) -> (BasisSet, ModelOperators, DenseGenerator, Decomposition) {
        let mut spec = BasisSpec::new(v.dim(), n_q, n_p);
        if model.kind == crate::operators::ModelKind::AdaptiveLangevin {
            spec = spec.with_xi(n_p);
        }
        let b = BasisSet::build(&spec, v).unwrap();
        let ops = ModelOperators::assemble(&b, model).unwrap();
        let gen = DenseGenerator::from_operators(&ops);
        let dec = build_decomposition(&gen, DEFAULT_RANK_TOL).unwrap();
        (b, ops, gen, dec)
    }

    #[test]
    fn proposition_constants_substitutions() {
        assert_eq!(prop_c_cprime(&PropositionCase::Convex).unwrap(), (1.0, 0.0));
        assert_eq!(
            prop_c_cprime(&PropositionCase::HessianLowerBound { k: 0.5 }).unwrap(),
            (1.0, 0.5)
        );
        let general = PropositionCase::General {
            c1: 1.0,
            c2: 0.0,
            c3: 1.0,
            beta: 1.0,
            d: 1,
        };
        assert_relative_eq!(prop_c_cprime(&general).unwrap().1, 34.0);
        let lsi = PropositionCase::Lsi {
            c3: 1.0,
            c_lsi: 1.0,
            d: 1,
            exp_moments: vec![core::f64::consts::E],
        };
        let (c, cp) = prop_c_cprime(&lsi).unwrap();
        assert_eq!(c, 2.0);
        assert_relative_eq!(cp, 3.0, epsilon = 1e-14);
        let incomplete = PropositionCase::Lsi {
            c3: 1.0,
            c_lsi: 1.0,
            d: 2,
            exp_moments: vec![1.0],
        };
        assert!(matches!(
            prop_c_cprime(&incomplete),
            Err(Error::CaseParametersIncomplete(_))
        ));
    }

    #[test]
    fn closed_form_bounds_substitutions() {
        assert_relative_eq!(langevin_corollary_bound(1.0, 1.0, 1.0, 1.0, 0.0), 5.0);
        assert_relative_eq!(rhmc_bound(1.0, 1.0, 1.0, 1.0, 0.0), 5.0);
        let c = LangevinConstants {
            beta: 1.0,
            gamma: 1.0,
            norm_pi1_fd_pi1: 1.0,
            lambda_min_m: 1.0,
            k_nu2: 1.0,
            k_kappa2: 1.0,
            x2: 0.0,
            y: 0.0,
        };
        assert_relative_eq!(langevin_bound_general(&c), 5.0);
        assert_relative_eq!(adl_a2(1.0, 1, 1.0, 1.0), 1.0);
        assert_relative_eq!(adl_envelope(0.5, 2.0), 2.0);
    }

    #[test]
    fn alpha_t_values_and_limits() {
        assert_relative_eq!(alpha_t(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 2.0 / 3.0);
        assert!(alpha_t(1.0, 1.0, 1e-12, 1.0, 1.0).unwrap() > 1.0 - 1e-11);
        assert!(
            alpha_t(1.0, 1.0, 2.0, 1.0, 1.0).unwrap() < alpha_t(1.0, 1.0, 1.0, 1.0, 1.0).unwrap()
        );
        assert!(matches!(
            alpha_t(0.0, 1.0, 1.0, 1.0, 1.0),
            Err(Error::InvalidRateInputs)
        ));
        let (small, _) = alpha_t_asymptotic_ratios(1e-3, 1.0, 1.0, 2.0, 1.5).unwrap();
        let (_, large) = alpha_t_asymptotic_ratios(1e3, 1.0, 1.0, 2.0, 1.5).unwrap();
        assert!((small - 1.0).abs() < 1e-2 && (large - 1.0).abs() < 1e-2);
    }

    #[test]
    fn flat_torus_x_norm_and_sparse_route() {
        let v = Potential::zero(1);
        let (_, ops, _, dec) = setup(&ModelSpec::langevin(1.0), &v, 6, 8);
        let x2 = norm_x_squared(&dec).unwrap();
        // V = 0, β = m = 1: Π₊A²Π0 φ = (p²−1)φ'' and A₊₀ᵀA₊₀ = −∂², so X² = E(p²−1)² = 2.
        assert_relative_eq!(x2, 2.0, epsilon = 1e-10);
        assert_relative_eq!(
            norm_x_squared_sparse(&ops.a, &ops.zero_mask()).unwrap(),
            x2,
            epsilon = 1e-10
        );
        check_proposition(x2, &PropositionCase::Convex, 1.0, 1e-6).unwrap();
    }

    #[test]
    fn langevin_fd_norms_reduce_for_quadratic_energy() {
        let v = Potential::separable_cosine(1, 1, 1.0);
        let (_, _, _, dec) = setup(&ModelSpec::langevin(0.3), &v, 5, 6);
        let (pi1_fd, y) = langevin_fd_norms(&dec, 0.3).unwrap();
        assert_relative_eq!(pi1_fd, 1.0, epsilon = 1e-10);
        assert!(y < 1e-10);
    }

    #[test]
    fn adl_a_star_a_dual_assembly() {
        let v = Potential::separable_cosine(1, 1, 1.0);
        let eps = 0.7;
        let (b, ops, _, _) = setup(&ModelSpec::adaptive_langevin(1.0, eps), &v, 4, 4);
        assert!(adl_a_star_a_residual(&b, &ops, eps).unwrap() < 1e-10);
        assert!(matches!(
            adl_a_star_a_residual(&b, &ops, 2.0 * eps),
            Err(Error::NhAssemblyError { .. })
        ));
    }

    #[test]
    fn envelope_fit_on_exact_envelope() {
        let pts: Vec<_> = [(0.5, 1.0), (2.0, 0.5), (1.0, 4.0)]
            .iter()
            .map(|&(g, e)| (g, e, 3.0 * adl_envelope(g, e)))
            .collect();
        let fit = fit_adl_envelope(&pts).unwrap();
        assert_relative_eq!(fit.c_fit, 3.0, epsilon = 1e-12);
        assert!(fit.within(1.0 + 1e-12));
    }

    #[test]
    fn static_inequality_on_random_vectors() {
        let v = Potential::separable_cosine(1, 1, 1.0);
        let (_, _, gen, dec) = setup(&ModelSpec::langevin(1.0), &v, 4, 5);
        let k = static_poincare_constants(&dec).unwrap();
        assert!(k.c2 <= k.c2_product * (1.0 + 1e-12));
        let ineq = StaticInequality::new(&gen, k);
        let mut rng = Rng::seed(5);
        for _ in 0..20 {
            let f = rng.uniform_vector(gen.s.nrows());
            assert!(ineq.ratio(&f) <= 1.0);
        }
    }
}
