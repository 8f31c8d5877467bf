//! One configuration end to end: basis, operators, structural checks,
//! splitting, constants, bounds and the exact norm, plus the refinement
//! test deciding whether the numbers have converged in the cutoffs.

use alloc::vec::Vec;

use crate::basis::{BasisSet, BasisSpec, Potential};
use crate::constants::{lambda_min_m, poincare_constant_kappa, poincare_constant_nu};
use crate::error::Result;
use crate::models::{
    adl_a2, langevin_bound_general, langevin_fd_norms, norm_x_squared, rhmc_bound,
    LangevinConstants,
};
use crate::operators::{
    verify_structural_assumptions, KineticEnergy, ModelKind, ModelOperators, ModelSpec,
    StructuralReport,
};
use crate::schur::{
    build_decomposition, exact_resolvent_norm, intermediate_norms, macroscopic_coercivity,
    theorem_bound, BoundReport, DenseGenerator, IntermediateNorms, ResolventMethod,
};
use num_traits::Float;

pub const DEFAULT_CONV_TOL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub basis: BasisSpec,
    pub potential: Potential,
    pub model: ModelSpec,
    pub rank_tol: f64,
    pub conv_tol: f64,
}

/// Everything computed at a single set of cutoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub basis: BasisSpec,
    pub structural: StructuralReport,
    /// Dissipation gap, measured on `H₊`.
    pub s: f64,
    /// `σ_min(A₁₀)`.
    pub a: f64,
    pub norms: IntermediateNorms,
    pub bound: f64,
    pub exact: f64,
    pub model_bound: Option<f64>,
    pub k_nu2: f64,
    pub k_kappa2: f64,
    pub lambda_min_m: f64,
    pub x2: f64,
}

pub fn evaluate(
    spec: &BasisSpec,
    potential: &Potential,
    model: &ModelSpec,
    rank_tol: f64,
) -> Result<Evaluation> {
    let basis = BasisSet::build(spec, potential)?;
    let ops = ModelOperators::assemble(&basis, model)?;
    let structural = verify_structural_assumptions(&ops, spec.mass, spec.tol_identity)?;
    let gen = DenseGenerator::from_operators(&ops);
    let dec = build_decomposition(&gen, rank_tol)?;
    let norms = intermediate_norms(&dec)?;
    let s = structural.s_numeric;
    let a = macroscopic_coercivity(&dec);
    let bound = theorem_bound(s, a, norms.norm_s11, norms.norm_r22, norms.norm_x21)?;
    let exact = exact_resolvent_norm(&gen.generator(), ResolventMethod::Auto)?;

    let k_nu2 = poincare_constant_nu(&basis)?.k2;
    let k_kappa2 = poincare_constant_kappa(spec.beta, spec.mass).k2;
    let kinetic = model
        .kinetic
        .clone()
        .unwrap_or_else(|| KineticEnergy::quadratic(spec.mass));
    let lambda = lambda_min_m(&kinetic, spec.beta).value();
    let x2 = norm_x_squared(&dec)?;
    let model_bound = match model.kind {
        ModelKind::Langevin => {
            let (pi1_fd, y) = langevin_fd_norms(&dec, model.gamma)?;
            Some(langevin_bound_general(&LangevinConstants {
                beta: spec.beta,
                gamma: model.gamma,
                norm_pi1_fd_pi1: pi1_fd,
                lambda_min_m: lambda,
                k_nu2,
                k_kappa2,
                x2,
                y,
            }))
        }
        ModelKind::BoltzmannRhmc => Some(rhmc_bound(spec.beta, model.gamma, lambda, k_nu2, x2)),
        ModelKind::AdaptiveLangevin => None,
    };
    Ok(Evaluation {
        basis: spec.clone(),
        structural,
        s,
        a,
        norms,
        bound,
        exact,
        model_bound,
        k_nu2,
        k_kappa2,
        lambda_min_m: lambda,
        x2,
    })
}

/// Doubling of the position cutoff, and of the momentum (and ξ) cutoffs.
pub fn refinements(spec: &BasisSpec) -> Vec<BasisSpec> {
    let mut q = spec.clone();
    q.n_q *= 2;
    let mut p = spec.clone();
    p.n_p *= 2;
    if p.has_xi {
        p.n_xi *= 2;
    }
    alloc::vec![q, p]
}

fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

impl Study {
    pub fn new(basis: BasisSpec, potential: Potential, model: ModelSpec) -> Self {
        Study {
            basis,
            potential,
            model,
            rank_tol: crate::schur::DEFAULT_RANK_TOL,
            conv_tol: DEFAULT_CONV_TOL,
        }
    }

    pub fn evaluate(&self) -> Result<Evaluation> {
        evaluate(&self.basis, &self.potential, &self.model, self.rank_tol)
    }

    /// Base evaluation plus both refinements. Converged when the bound, the
    /// exact norm and (if any) the model bound move by less than `conv_tol`
    /// relative under every refinement.
    pub fn report(&self) -> Result<(BoundReport, Evaluation)> {
        let base = self.evaluate()?;
        let mut change: f64 = 0.0;
        for spec in refinements(&self.basis) {
            let fine = evaluate(&spec, &self.potential, &self.model, self.rank_tol)?;
            change = change.max(relative_change(base.bound, fine.bound));
            change = change.max(relative_change(base.exact, fine.exact));
            if let (Some(x), Some(y)) = (base.model_bound, fine.model_bound) {
                change = change.max(relative_change(x, y));
            }
        }
        Ok((self.bound_report(&base, Some(change)), base))
    }

    pub fn bound_report(&self, e: &Evaluation, refinement_change: Option<f64>) -> BoundReport {
        let spec = &e.basis;
        let x2 = e.x2;
        let k_nu2 = e.k_nu2;
        BoundReport {
            model: self.model.kind,
            gamma: self.model.gamma,
            epsilon: self.model.epsilon,
            d: spec.d,
            n_q: spec.n_q,
            n_p: spec.n_p,
            n_xi: spec.has_xi.then_some(spec.n_xi),
            s: e.s,
            a: e.a,
            norm_s11: e.norms.norm_s11,
            norm_r22: e.norms.norm_r22,
            norm_x21: e.norms.norm_x21,
            bound: e.bound,
            exact: e.exact,
            margin: e.bound / e.exact,
            model_bound: e.model_bound,
            k_nu2,
            k_kappa2: e.k_kappa2,
            lambda_min_m: e.lambda_min_m,
            x2,
            refinement_change,
            converged: refinement_change.is_some_and(|c| c < self.conv_tol),
        }
    }
}

/// Analytic lower bound for `a` where the model provides one:
/// `K_ν √(λmin(M)/β)` for Langevin and RHMC (through `A₊₀ᵀA₊₀ = (1/β)∇*∇`
/// at quadratic `U`), the tensorized AdL value otherwise.
pub fn analytic_a(model: &ModelSpec, spec: &BasisSpec, k_nu2: f64) -> f64 {
    match model.kind {
        ModelKind::Langevin | ModelKind::BoltzmannRhmc => (k_nu2 / spec.mass / spec.beta).sqrt(),
        ModelKind::AdaptiveLangevin => {
            adl_a2(spec.beta, spec.d, model.epsilon.unwrap_or(1.0), k_nu2).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cosine_langevin_at_unit_friction() {
        let v = Potential::separable_cosine(1, 1, 1.0);
        let study = Study::new(BasisSpec::new(1, 6, 12), v, ModelSpec::langevin(1.0));
        let (report, eval) = study.report().unwrap();
        assert!(report.converged, "change {:?}", report.refinement_change);
        assert!(report.margin >= 1.0);
        assert!(report.model_bound.unwrap() >= report.exact);
        assert_relative_eq!(
            report.a,
            analytic_a(&study.model, &study.basis, eval.k_nu2),
            max_relative = 1e-8
        );
        assert_relative_eq!(report.s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn adl_uses_tensorized_coercivity() {
        let v = Potential::separable_cosine(1, 1, 1.0);
        let spec = BasisSpec::new(1, 5, 5).with_xi(5);
        for eps in [0.5, 2.0] {
            let model = ModelSpec::adaptive_langevin(1.0, eps);
            let e = evaluate(&spec, &v, &model, crate::schur::DEFAULT_RANK_TOL).unwrap();
            assert_relative_eq!(e.a, analytic_a(&model, &spec, e.k_nu2), max_relative = 1e-8);
            assert!(e.bound >= e.exact);
        }
    }
}
