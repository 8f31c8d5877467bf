//! Poincaré and growth constants of the potential, `λmin(M)` for the
//! kinetic energy, and quadrature checks of the functional inequalities
//! feeding the Langevin bounds.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::basis::{gibbs_grid, BasisSet, PositionTable, Potential};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::models::{prop_c_cprime, PropositionCase};
use crate::operators::KineticEnergy;
use crate::random::Rng;

/// Floor keeping `c1`, `c3` strictly positive.
pub const GROWTH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareResult {
    pub k2: f64,
    pub eigenvector: DVector<f64>,
    pub residual: f64,
}

/// `K_ν²`: smallest eigenvalue of `∇*∇ = Σ_l D_lᵀD_l` on mean-zero
/// position functions. Exact on the truncated span since derivatives of
/// trigonometric polynomials stay in it.
pub fn poincare_constant_nu(basis: &BasisSet) -> Result<PoincareResult> {
    let w = weighted_laplacian(basis);
    let n = w.nrows();
    if n < 2 {
        return Err(Error::SolverFailure(
            "position basis has no mean-zero functions".into(),
        ));
    }
    let h0 = w.view((1, 1), (n - 1, n - 1)).into_owned();
    let (vals, vecs) = symmetric_eigen(&h0);
    let k2 = vals[0];
    let v = vecs.column(0).into_owned();
    let residual = (&h0 * &v - &v * k2).norm() / v.norm();
    if !(k2 > 0.0) || !(residual <= 1e-8) {
        return Err(Error::SolverFailure(format!(
            "weighted Laplacian eigenpair: K^2 = {k2}, residual {residual:e}"
        )));
    }
    let mut eigenvector = DVector::zeros(n);
    eigenvector.rows_mut(1, n - 1).copy_from(&v);
    Ok(PoincareResult {
        k2,
        eigenvector,
        residual,
    })
}

/// Galerkin matrix of `∇*∇` on the whole position span, constant included.
pub fn weighted_laplacian(basis: &BasisSet) -> DMatrix<f64> {
    let pos = basis.position();
    let n = pos.len();
    let mut w = DMatrix::zeros(n, n);
    for l in 0..pos.dim() {
        let dl = pos.derivative(l);
        w += dl.transpose() * dl;
    }
    w
}

/// `K_κ² = β/m` for the Gaussian momentum marginal; the first Hermite
/// function is the eigenvector.
pub fn poincare_constant_kappa(beta: f64, mass: f64) -> PoincareResult {
    PoincareResult {
        k2: beta / mass,
        eigenvector: DVector::from_column_slice(&[0.0, 1.0]),
        residual: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `max(−λmin(∇²V))` clipped at 0, the `K` of the Hessian lower bound.
    pub k_hessian: f64,
    pub points_per_dim: usize,
    pub c1_maximizer: Vec<f64>,
    pub c3_maximizer: Vec<f64>,
}

/// Points per dimension resolving every mode of `V` with at least 16
/// points per shortest wavelength.
pub fn default_growth_grid(potential: &Potential) -> usize {
    64usize.max(16 * potential.max_mode())
}

struct GridSample {
    q: Vec<f64>,
    laplacian: f64,
    grad2: f64,
    hess_frob: f64,
    hess_min: f64,
}

fn sample_grid(potential: &Potential, torus_length: f64, m: usize) -> Vec<GridSample> {
    let d = potential.dim();
    let w = 2.0 * core::f64::consts::PI / torus_length;
    let h = torus_length / m as f64;
    let total = m.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    for mut flat in 0..total {
        let mut q = vec![0.0; d];
        for slot in q.iter_mut().rev() {
            *slot = (flat % m) as f64 * h;
            flat /= m;
        }
        let s = potential.sample(&q, w);
        let hess = DMatrix::from_row_slice(d, d, &s.hessian);
        let (eig, _) = symmetric_eigen(&hess);
        out.push(GridSample {
            laplacian: (0..d).map(|i| s.hessian[i * d + i]).sum(),
            grad2: s.gradient.iter().map(|g| g * g).sum(),
            hess_frob: s.hessian.iter().map(|x| x * x).sum::<f64>().sqrt(),
            hess_min: eig[0],
            q,
        });
    }
    out
}

/// `c1` for a fixed `c2` by grid maximization, with its maximizer.
pub fn growth_c1(
    potential: &Potential,
    beta: f64,
    torus_length: f64,
    m: usize,
    c2: f64,
) -> (f64, Vec<f64>) {
    let d = potential.dim() as f64;
    let samples = sample_grid(potential, torus_length, m);
    c1_from_samples(&samples, beta, d, c2)
}

fn c1_from_samples(samples: &[GridSample], beta: f64, d: f64, c2: f64) -> (f64, Vec<f64>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for s in samples {
        let v = (s.laplacian - 0.5 * c2 * beta * s.grad2) / d;
        if v > best.0 {
            best = (v, s.q.clone());
        }
    }
    (best.0.max(GROWTH_FLOOR), best.1)
}

/// Estimates `(c1, c2, c3)` on a uniform grid with `points_per_dim` points
/// per coordinate; `c2` is picked on `{0, 0.1, …, 1}` to minimize the
/// general-case `C′` (ties: smaller `c1`, then smaller `c2`).
pub fn estimate_growth_constants(
    potential: &Potential,
    beta: f64,
    torus_length: f64,
    points_per_dim: usize,
) -> GrowthConstants {
    let d = potential.dim();
    let samples = sample_grid(potential, torus_length, points_per_dim);
    let mut c3 = (f64::NEG_INFINITY, Vec::new());
    let mut k_hessian: f64 = 0.0;
    for s in &samples {
        let v = s.hess_frob / (d as f64 + s.grad2).sqrt();
        if v > c3.0 {
            c3 = (v, s.q.clone());
        }
        k_hessian = k_hessian.max(-s.hess_min);
    }
    let c3_value = c3.0.max(GROWTH_FLOOR);

    let mut chosen: Option<(f64, f64, f64, Vec<f64>)> = None;
    for i in 0..=10 {
        let c2 = i as f64 / 10.0;
        let (c1, arg) = c1_from_samples(&samples, beta, d as f64, c2);
        let (_, cp) = general_case_constants(c1, c2, c3_value, beta, d);
        let better = match &chosen {
            None => true,
            Some((bcp, bc1, _, _)) => cp < *bcp || (cp == *bcp && c1 < *bc1),
        };
        if better {
            chosen = Some((cp, c1, c2, arg));
        }
    }
    let (_, c1, c2, c1_arg) = chosen.unwrap();
    GrowthConstants {
        c1,
        c2,
        c3: c3_value,
        k_hessian,
        points_per_dim,
        c1_maximizer: c1_arg,
        c3_maximizer: c3.1,
    }
}

fn general_case_constants(c1: f64, c2: f64, c3: f64, beta: f64, d: usize) -> (f64, f64) {
    prop_c_cprime(&PropositionCase::General {
        c1,
        c2,
        c3,
        beta,
        d,
    })
    .unwrap()
}

/// Per-coordinate `∫ e^{2 c3 C_LSI |∂_i V|} dν` on a uniform grid.
pub fn exp_moments(
    potential: &Potential,
    beta: f64,
    torus_length: f64,
    c3: f64,
    c_lsi: f64,
    points_per_dim: usize,
) -> Vec<f64> {
    let d = potential.dim();
    let w = 2.0 * core::f64::consts::PI / torus_length;
    let grid = gibbs_grid(potential, beta, torus_length, points_per_dim);
    let mut out = vec![0.0; d];
    for (x, &wx) in grid.weights.iter().enumerate() {
        let s = potential.sample(&grid.points[x * d..(x + 1) * d], w);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot += wx * (2.0 * c3 * c_lsi * s.gradient[i].abs()).exp();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaMinM {
    /// `∫ U'' dκ₁`.
    pub hessian_route: f64,
    /// `β ∫ (U')² dκ₁`.
    pub gradient_route: f64,
}

impl LambdaMinM {
    pub fn value(&self) -> f64 {
        self.hessian_route
    }

    pub fn discrepancy(&self) -> f64 {
        (self.hessian_route - self.gradient_route).abs()
            / self.hessian_route.abs().max(f64::MIN_POSITIVE)
    }
}

/// Smallest eigenvalue of `M = ∫∇²U dκ`. For a separable even `U`, `M` is
/// a multiple of the identity, so one coordinate suffices. Both integrals
/// use the trapezoid rule on a window where `e^{-βU}` has decayed below
/// `e^{-60}`, which is spectrally accurate for such integrands.
pub fn lambda_min_m(kinetic: &KineticEnergy, beta: f64) -> LambdaMinM {
    let mut edge = 1.0;
    while beta * kinetic.value(edge) < 60.0 {
        edge *= 1.5;
    }
    let n = 4001;
    let h = 2.0 * edge / (n - 1) as f64;
    let (mut z, mut m_hess, mut m_grad) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let x = -edge + i as f64 * h;
        let wgt = (-beta * kinetic.value(x)).exp();
        let (d1, d2) = kinetic.derivatives(x);
        z += wgt;
        m_hess += wgt * d2;
        m_grad += wgt * d1 * d1;
    }
    LambdaMinM {
        hessian_route: m_hess / z,
        gradient_route: beta * m_grad / z,
    }
}

/// Position functions tabulated on a grid twice as fine as the one the
/// basis was built on, together with `∇V`, `∇²V` at the same points.
#[derive(Debug, Clone)]
pub struct LemmaContext {
    beta: f64,
    d: usize,
    weights: Vec<f64>,
    table: PositionTable,
    grad_v: Vec<Vec<f64>>,
    hess_v: Vec<Vec<f64>>,
}

impl LemmaContext {
    pub fn new(basis: &BasisSet) -> Self {
        let spec = basis.spec();
        let pos = basis.position();
        let d = pos.dim();
        let grid = gibbs_grid(
            basis.potential(),
            spec.beta,
            spec.torus_length,
            2 * pos.points_per_dim(),
        );
        let table = pos.tabulate(&grid.points, 2);
        let w = pos.wavenumber();
        let (mut grad_v, mut hess_v) = (Vec::new(), Vec::new());
        for x in 0..grid.len() {
            let s = basis
                .potential()
                .sample(&grid.points[x * d..(x + 1) * d], w);
            grad_v.push(s.gradient);
            hess_v.push(s.hessian);
        }
        LemmaContext {
            beta: spec.beta,
            d,
            weights: grid.weights,
            table,
            grad_v,
            hess_v,
        }
    }

    pub fn function_count(&self) -> usize {
        self.table.values.ncols()
    }

    fn fields(&self, u: &DVector<f64>) -> Fields {
        let d = self.d;
        Fields {
            value: &self.table.values * u,
            grad: self.table.gradients.iter().map(|g| g * u).collect(),
            hess: (0..d * d).map(|k| &self.table.hessians[k] * u).collect(),
        }
    }

    fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(x, w)| w * f(x)).sum()
    }

    fn norms(&self, u: &DVector<f64>) -> Norms {
        let d = self.d;
        let f = self.fields(u);
        let grad2 = |x: usize| (0..d).map(|l| f.grad[l][x].powi(2)).sum::<f64>();
        let hess2 = |x: usize| (0..d * d).map(|k| f.hess[k][x].powi(2)).sum::<f64>();
        let laplace_star = |x: usize| {
            let lap: f64 = (0..d).map(|l| f.hess[l * d + l][x]).sum();
            let drift: f64 = (0..d).map(|l| self.grad_v[x][l] * f.grad[l][x]).sum();
            -lap + self.beta * drift
        };
        let curvature = |x: usize| {
            let mut acc = 0.0;
            for l in 0..d {
                for m in 0..d {
                    acc += f.grad[l][x] * self.hess_v[x][l * d + m] * f.grad[m][x];
                }
            }
            acc
        };
        Norms {
            value2: self.integrate(|x| f.value[x].powi(2)),
            grad2: self.integrate(grad2),
            hess2: self.integrate(hess2),
            star2: self.integrate(|x| laplace_star(x).powi(2)),
            curvature: self.integrate(curvature),
            weighted_grad_v2: self.integrate(|x| {
                f.value[x].powi(2) * self.grad_v[x].iter().map(|g| g * g).sum::<f64>()
            }),
        }
    }
}

struct Fields {
    value: DVector<f64>,
    grad: Vec<DVector<f64>>,
    hess: Vec<DVector<f64>>,
}

struct Norms {
    value2: f64,
    grad2: f64,
    hess2: f64,
    star2: f64,
    curvature: f64,
    weighted_grad_v2: f64,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// `‖u∇V‖² / ((16/β²)‖∇u‖² + (4 d c1/β)‖u‖²)`.
pub fn check_villani_lemma(ctx: &LemmaContext, u: &DVector<f64>, c1: f64) -> f64 {
    let n = ctx.norms(u);
    let b = ctx.beta;
    ratio(
        n.weighted_grad_v2,
        16.0 / (b * b) * n.grad2 + 4.0 * ctx.d as f64 * c1 / b * n.value2,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BochnerCheck {
    /// `Σ_ij ‖∂²_ij u‖²`.
    pub lhs: f64,
    /// `‖∇*∇u‖² − ∫ ∇uᵀ ∇²V ∇u dν`.
    pub rhs: f64,
    /// `|lhs − rhs| / max(lhs, 1)`.
    pub residual: f64,
}

pub fn check_bochner(ctx: &LemmaContext, u: &DVector<f64>) -> BochnerCheck {
    let n = ctx.norms(u);
    let rhs = n.star2 - n.curvature;
    BochnerCheck {
        lhs: n.hess2,
        rhs,
        residual: (n.hess2 - rhs).abs() / n.hess2.max(1.0),
    }
}

/// `‖∇²u‖² / (C‖∇*∇u‖² + C′‖∇u‖²)`.
pub fn check_control_h2(ctx: &LemmaContext, u: &DVector<f64>, c: f64, c_prime: f64) -> f64 {
    let n = ctx.norms(u);
    ratio(n.hess2, c * n.star2 + c_prime * n.grad2)
}

/// Random coefficients on the orthonormal position basis, uniform on
/// `[-1, 1)` and damped by `1/(1+|k|)` on shell `|k|` so that draws stay
/// comfortably band-limited.
pub fn random_position_function(basis: &BasisSet, rng: &mut Rng) -> DVector<f64> {
    let pos = basis.position();
    DVector::from_fn(pos.len(), |b, _| {
        let shell = pos
            .label(b)
            .iter()
            .map(|k| k.unsigned_abs())
            .max()
            .unwrap_or(0);
        rng.uniform() / (1.0 + shell as f64)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSuiteReport {
    pub seed: u64,
    pub bochner_samples: usize,
    pub bochner_max_residual: f64,
    pub villani_samples: usize,
    pub villani_max_ratio: f64,
    pub control_h2_samples: usize,
    /// Worst ratio per admissible case, labelled by case name.
    pub control_h2_max_ratio: Vec<(&'static str, f64)>,
}

impl LemmaSuiteReport {
    /// Maps the worst observation to the matching error, if any.
    pub fn check(&self) -> Result<()> {
        if !(self.bochner_max_residual < 1e-8) {
            return Err(Error::BochnerFailure {
                residual: self.bochner_max_residual,
            });
        }
        if !(self.villani_max_ratio <= 1.0) {
            return Err(Error::LemmaViolation {
                ratio: self.villani_max_ratio,
            });
        }
        if let Some(&(_, r)) = self.control_h2_max_ratio.iter().find(|(_, r)| !(*r <= 1.0)) {
            return Err(Error::ConstantCaseMisdeclared { ratio: r });
        }
        Ok(())
    }
}

/// Cases of the `H²` control admissible for the growth constants at hand:
/// convex only when the Hessian is nonnegative, the Hessian lower bound and
/// the general case always.
pub fn admissible_cases(
    growth: &GrowthConstants,
    beta: f64,
    d: usize,
) -> Vec<(&'static str, PropositionCase)> {
    let mut cases = Vec::new();
    if growth.k_hessian == 0.0 {
        cases.push(("convex", PropositionCase::Convex));
    }
    cases.push((
        "hessian_lower_bound",
        PropositionCase::HessianLowerBound {
            k: growth.k_hessian,
        },
    ));
    cases.push((
        "general",
        PropositionCase::General {
            c1: growth.c1,
            c2: growth.c2,
            c3: growth.c3,
            beta,
            d,
        },
    ));
    cases
}

/// Runs the three randomized suites with independent streams forked from
/// `seed`: `bochner` draws for the identity, `samples` for each inequality.
pub fn run_lemma_suite(
    basis: &BasisSet,
    growth: &GrowthConstants,
    seed: u64,
    bochner: usize,
    samples: usize,
) -> Result<LemmaSuiteReport> {
    let ctx = LemmaContext::new(basis);
    let root = Rng::seed(seed);
    let beta = basis.spec().beta;

    let mut rng = root.fork(0);
    let mut bochner_max: f64 = 0.0;
    for _ in 0..bochner {
        let u = random_position_function(basis, &mut rng);
        bochner_max = bochner_max.max(check_bochner(&ctx, &u).residual);
    }

    let mut rng = root.fork(1);
    let mut villani_max: f64 = 0.0;
    for _ in 0..samples {
        let u = random_position_function(basis, &mut rng);
        villani_max = villani_max.max(check_villani_lemma(&ctx, &u, growth.c1));
    }

    let mut control = Vec::new();
    for (k, (name, case)) in admissible_cases(growth, beta, basis.d())
        .into_iter()
        .enumerate()
    {
        let (c, cp) = prop_c_cprime(&case)?;
        let mut rng = root.fork(2 + k as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let u = random_position_function(basis, &mut rng);
            worst = worst.max(check_control_h2(&ctx, &u, c, cp));
        }
        control.push((name, worst));
    }

    Ok(LemmaSuiteReport {
        seed,
        bochner_samples: bochner,
        bochner_max_residual: bochner_max,
        villani_samples: samples,
        villani_max_ratio: villani_max,
        control_h2_samples: samples,
        control_h2_max_ratio: control,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    fn basis(v: &Potential, n_q: usize) -> BasisSet {
        BasisSet::build(&BasisSpec::new(v.dim(), n_q, 1), v).unwrap()
    }

    #[test]
    fn flat_torus_poincare_constant_is_one() {
        let r = poincare_constant_nu(&basis(&Potential::zero(1), 4)).unwrap();
        assert_relative_eq!(r.k2, 1.0, epsilon = 1e-10);
        assert_eq!(poincare_constant_kappa(2.0, 4.0).k2, 0.5);
    }

    #[test]
    fn poincare_constant_is_stable_under_refinement() {
        let v = Potential::separable_cosine(1, 1, 1.0);
        let coarse = poincare_constant_nu(&basis(&v, 8)).unwrap().k2;
        let fine = poincare_constant_nu(&basis(&v, 16)).unwrap().k2;
        assert!((coarse - fine).abs() < 1e-6);
        assert!(fine <= coarse + 1e-12);
    }

    #[test]
    fn poincare_constant_matches_finite_difference_oracle() {
        // Independent oracle: ∇*∇ = -u'' + V'u' discretized by centered
        // differences in its symmetric form -e^{V}(e^{-V}u')' on a fine grid.
        let v = Potential::separable_cosine(1, 1, 1.0);
        let k2 = poincare_constant_nu(&basis(&v, 8)).unwrap().k2;
        let fd = |n: usize| {
            let h = 2.0 * PI / n as f64;
            let rho = |x: f64| (-x.cos()).exp();
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                let x = i as f64 * h;
                let (rp, rm) = (rho(x + h / 2.0), rho(x - h / 2.0));
                // Symmetrized by the half-density similarity transform.
                let r = rho(x);
                m[(i, i)] = (rp + rm) / (h * h * r);
                let j = (i + 1) % n;
                let rj = rho(j as f64 * h);
                m[(i, j)] = -rp / (h * h * (r * rj).sqrt());
                m[(j, i)] = m[(i, j)];
            }
            symmetric_eigen(&m).0[1]
        };
        // Second-order scheme, one Richardson step.
        let extrapolated = (4.0 * fd(400) - fd(200)) / 3.0;
        assert_relative_eq!(k2, extrapolated, max_relative = 1e-6);
    }

    #[test]
    fn growth_constants_of_cosine() {
        let v = Potential::separable_cosine(1, 1, 1.0);
        let (c1, _) = growth_c1(&v, 1.0, 2.0 * PI, 64, 0.0);
        assert_relative_eq!(c1, 1.0, epsilon = 1e-12);
        let g = estimate_growth_constants(&v, 1.0, 2.0 * PI, 64);
        assert_relative_eq!(g.c3, 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.k_hessian, 1.0, epsilon = 1e-12);
        // Pointwise inequalities on the grid used.
        for s in sample_grid(&v, 2.0 * PI, 64) {
            assert!(s.laplacian <= g.c1 + 0.5 * g.c2 * s.grad2 + 1e-12);
            assert!(s.hess_frob.powi(2) <= g.c3.powi(2) * (1.0 + s.grad2) + 1e-12);
        }
        let refined = estimate_growth_constants(&v, 1.0, 2.0 * PI, 128);
        assert!((refined.c1 - g.c1).abs() <= 1e-3 * g.c1);
        assert!((refined.c3 - g.c3).abs() <= 1e-3 * g.c3);
    }

    #[test]
    fn growth_constants_floor_and_dimension_free() {
        let g = estimate_growth_constants(&Potential::zero(1), 1.0, 2.0 * PI, 64);
        assert_eq!(
            (g.c1, g.c2, g.c3, g.k_hessian),
            (GROWTH_FLOOR, 0.0, GROWTH_FLOOR, 0.0)
        );
        let one =
            estimate_growth_constants(&Potential::separable_cosine(1, 1, 1.0), 1.0, 2.0 * PI, 32);
        let two =
            estimate_growth_constants(&Potential::separable_cosine(2, 1, 1.0), 1.0, 2.0 * PI, 32);
        assert_relative_eq!(one.c1, two.c1, epsilon = 1e-12);
        assert_relative_eq!(one.c3, two.c3, epsilon = 1e-12);
    }

    #[test]
    fn lambda_min_quadratic_and_quartic() {
        for (m, expect) in [(1.0, 1.0), (2.0, 0.5)] {
            let r = lambda_min_m(&KineticEnergy::quadratic(m), 1.0);
            assert_relative_eq!(r.value(), expect, epsilon = 1e-12);
            assert!(r.discrepancy() < 1e-10);
        }
        let quartic = KineticEnergy {
            coeffs: vec![0.5, 0.25],
        };
        assert!(lambda_min_m(&quartic, 2.0).discrepancy() < 1e-10);
    }

    #[test]
    fn bochner_identity_cases() {
        let flat = basis(&Potential::zero(1), 3);
        let ctx = LemmaContext::new(&flat);
        // Function 1 is cos q when V = 0.
        let mut u = DVector::zeros(flat.position().len());
        u[1] = 1.0;
        let b = check_bochner(&ctx, &u);
        assert_relative_eq!(b.lhs, b.rhs, epsilon = 1e-12);
        assert_relative_eq!(check_control_h2(&ctx, &u, 1.0, 0.0), 1.0, epsilon = 1e-12);
        u[1] = 0.0;
        u[0] = 1.0;
        assert_eq!(check_villani_lemma(&ctx, &u, GROWTH_FLOOR), 0.0);

        let v = Potential::separable_cosine(1, 1, 1.0);
        let cb = basis(&v, 6);
        let ctx = LemmaContext::new(&cb);
        let mut rng = Rng::seed(11);
        for _ in 0..10 {
            let u = random_position_function(&cb, &mut rng);
            assert!(check_bochner(&ctx, &u).residual < 1e-8);
        }
    }

    #[test]
    fn lemma_suite_passes_for_cosine() {
        let v = Potential::separable_cosine(1, 1, 1.0);
        let b = basis(&v, 6);
        let g = estimate_growth_constants(&v, 1.0, 2.0 * PI, default_growth_grid(&v));
        let report = run_lemma_suite(&b, &g, 7, 10, 20).unwrap();
        report.check().unwrap();
        assert_eq!(report.control_h2_max_ratio.len(), 2);
        assert_eq!(run_lemma_suite(&b, &g, 7, 10, 20).unwrap(), report);
    }

    #[test]
    fn exp_moment_of_zero_gradient_is_one() {
        let m = exp_moments(&Potential::zero(2), 1.0, 2.0 * PI, 1.0, 1.0, 16);
        assert_relative_eq!(m[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(m[1], 1.0, epsilon = 1e-12);
    }
}
