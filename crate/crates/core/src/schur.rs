//! `H = H0 ⊕ H1 ⊕ H2` splitting, Schur complements, the block inverse and
//! the abstract resolvent bound.
//!
//! Coordinates: `H0` is spanned by the momentum-degree-0 columns (a
//! coordinate subspace, since `Π0` is diagonal on the basis) and `H₊` by the
//! rest. Inside `H₊`, `P1` is an orthonormal basis of `Ran A₊₀` taken from a
//! column-pivoted QR and `P2` completes it. Blocks such as `L₂₁` are
//! `P2ᵀ L₊₊ P1`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{
    lanczos_largest, max_abs, max_abs_diff, power_iteration_largest, singular_values,
    spectral_norm, symmetric_eigen, symmetric_function, symmetry_residual, PivotedQr,
};
use crate::operators::{ModelKind, ModelOperators};

pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Dimension above which the exact norm switches from a dense SVD to Lanczos.
pub const DENSE_SVD_LIMIT: usize = 4000;

/// Dense copies of the operators on `H`.
#[derive(Debug, Clone)]
pub struct DenseGenerator {
    pub a: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub zero_mask: Vec<bool>,
}

impl DenseGenerator {
    pub fn from_operators(ops: &ModelOperators) -> Self {
        DenseGenerator {
            a: ops.a.to_dense(),
            s: ops.s.to_dense(),
            r: ops.r.to_dense(),
            zero_mask: ops.zero_mask(),
        }
    }

    pub fn generator(&self) -> DMatrix<f64> {
        &self.a + &self.s
    }
}

fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub zero_idx: Vec<usize>,
    pub plus_idx: Vec<usize>,
    /// `A₊₀`, rows in `H₊`, columns in `H0`.
    pub a_plus0: DMatrix<f64>,
    /// `A₊₀ᵀ A₊₀`.
    pub gram: DMatrix<f64>,
    pub p1: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    /// `A₁₀ = P1ᵀ A₊₀`, square.
    pub a10: DMatrix<f64>,
    pub l_pp: DMatrix<f64>,
    pub s_pp: DMatrix<f64>,
    pub r_pp: DMatrix<f64>,
}

/// Builds the splitting. Fails when `A₊₀` is rank deficient, i.e. when
/// `σ_min(A₁₀) < rank_tol · σ_max(A₁₀)`.
pub fn build_decomposition(gen: &DenseGenerator, rank_tol: f64) -> Result<Decomposition> {
    let n = gen.zero_mask.len();
    let zero_idx: Vec<usize> = (0..n).filter(|&i| gen.zero_mask[i]).collect();
    let plus_idx: Vec<usize> = (0..n).filter(|&i| !gen.zero_mask[i]).collect();
    let a_plus0 = select(&gen.a, &plus_idx, &zero_idx);
    let l = gen.generator();
    let l_pp = select(&l, &plus_idx, &plus_idx);
    let s_pp = select(&gen.s, &plus_idx, &plus_idx);
    let r_pp = select(&gen.r, &plus_idx, &plus_idx);

    let qr = PivotedQr::new(&a_plus0, rank_tol);
    let p1 = qr.range_basis();
    let p2 = qr.complement_basis();
    let a10 = p1.transpose() * &a_plus0;
    if a10.nrows() != a10.ncols() {
        return Err(Error::MacroscopicCoercivityFailure { sigma_min: 0.0 });
    }
    let sv = singular_values(&a10);
    let (smax, smin) = (
        sv.first().copied().unwrap_or(0.0),
        sv.last().copied().unwrap_or(0.0),
    );
    if !(smin >= rank_tol * smax) || smin == 0.0 {
        return Err(Error::MacroscopicCoercivityFailure { sigma_min: smin });
    }
    Ok(Decomposition {
        gram: a_plus0.transpose() * &a_plus0,
        zero_idx,
        plus_idx,
        a_plus0,
        p1,
        p2,
        a10,
        l_pp,
        s_pp,
        r_pp,
    })
}

/// Residuals of the invariants of a decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionChecks {
    pub pi1_idempotency: f64,
    pub pi1_symmetry: f64,
    pub pi1_fixes_range: f64,
    /// `Π1` from the Gram formula against `P1 P1ᵀ` from the QR.
    pub pi1_routes: f64,
    pub l11_symmetry: f64,
    /// `σ_max(A₁₀⁻¹) · σ_min(A₁₀) − 1`.
    pub a10_inverse_consistency: f64,
}

impl Decomposition {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.zero_idx.len(), self.p1.ncols(), self.p2.ncols())
    }

    pub fn l11(&self) -> DMatrix<f64> {
        self.p1.transpose() * &self.l_pp * &self.p1
    }

    pub fn l12(&self) -> DMatrix<f64> {
        self.p1.transpose() * &self.l_pp * &self.p2
    }

    pub fn l21(&self) -> DMatrix<f64> {
        self.p2.transpose() * &self.l_pp * &self.p1
    }

    pub fn l22(&self) -> DMatrix<f64> {
        self.p2.transpose() * &self.l_pp * &self.p2
    }

    pub fn s11(&self) -> DMatrix<f64> {
        self.p1.transpose() * &self.s_pp * &self.p1
    }

    pub fn s21(&self) -> DMatrix<f64> {
        self.p2.transpose() * &self.s_pp * &self.p1
    }

    pub fn r22(&self) -> DMatrix<f64> {
        self.p2.transpose() * &self.r_pp * &self.p2
    }

    /// `(A₊₀ᵀA₊₀)⁻¹` via Cholesky.
    pub fn gram_inverse(&self) -> Result<DMatrix<f64>> {
        let n = self.gram.nrows();
        self.gram
            .clone()
            .cholesky()
            .map(|c| c.solve(&DMatrix::identity(n, n)))
            .ok_or(Error::MacroscopicCoercivityFailure { sigma_min: 0.0 })
    }

    /// `Π1 = A₊₀ (A₊₀ᵀA₊₀)⁻¹ A₊₀ᵀ` on `H₊`.
    pub fn pi1(&self) -> Result<DMatrix<f64>> {
        Ok(&self.a_plus0 * self.gram_inverse()? * self.a_plus0.transpose())
    }

    pub fn checks(&self) -> Result<DecompositionChecks> {
        let pi1 = self.pi1()?;
        let qr_proj = &self.p1 * self.p1.transpose();
        let a10_sv = singular_values(&self.a10);
        let inv = self
            .a10
            .clone()
            .try_inverse()
            .ok_or(Error::MacroscopicCoercivityFailure { sigma_min: 0.0 })?;
        Ok(DecompositionChecks {
            pi1_idempotency: max_abs_diff(&(&pi1 * &pi1), &pi1),
            pi1_symmetry: symmetry_residual(&pi1),
            pi1_fixes_range: max_abs_diff(&(&pi1 * &self.a_plus0), &self.a_plus0),
            pi1_routes: max_abs_diff(&pi1, &qr_proj),
            l11_symmetry: symmetry_residual(&self.l11()),
            a10_inverse_consistency: (spectral_norm(&inv) * a10_sv.last().copied().unwrap_or(0.0)
                - 1.0)
                .abs(),
        })
    }
}

/// `a = σ_min(A₁₀)`.
pub fn macroscopic_coercivity(dec: &Decomposition) -> f64 {
    singular_values(&dec.a10).last().copied().unwrap_or(0.0)
}

#[derive(Debug, Clone)]
pub struct SchurComplement {
    /// `A₊₀ᵀ L₊₊⁻¹ A₊₀`.
    pub direct: DMatrix<f64>,
    /// `A₁₀ᵀ 𝔖₁⁻¹ A₁₀` with `𝔖₁ = L₁₁ − L₁₂ L₂₂⁻¹ L₂₁`.
    pub second: DMatrix<f64>,
    /// `max|direct − second| / max|direct|`.
    pub route_discrepancy: f64,
    pub symmetry_residual: f64,
    pub max_eigenvalue: f64,
}

/// Both constructions of `𝔖₀`. `L₊₊` (and `L₂₂` when `H2` is nontrivial)
/// must be invertible.
pub fn schur_complement(dec: &Decomposition) -> Result<SchurComplement> {
    let lu = dec.l_pp.clone().lu();
    let direct =
        dec.a_plus0.transpose() * lu.solve(&dec.a_plus0).ok_or(Error::DissipationFailure)?;

    let l11 = dec.l11();
    let s1 = if dec.p2.ncols() > 0 {
        let l22 = dec.l22();
        let x = l22
            .lu()
            .solve(&dec.l21())
            .ok_or(Error::DissipationFailure)?;
        l11 - dec.l12() * x
    } else {
        l11
    };
    let second = dec.a10.transpose() * s1.lu().solve(&dec.a10).ok_or(Error::SchurSingular)?;
    let scale = max_abs(&direct).max(f64::MIN_POSITIVE);
    let (vals, _) = symmetric_eigen(&direct);
    Ok(SchurComplement {
        route_discrepancy: max_abs_diff(&direct, &second) / scale,
        symmetry_residual: symmetry_residual(&direct),
        max_eigenvalue: vals.last().copied().unwrap_or(f64::NEG_INFINITY),
        direct,
        second,
    })
}

/// Block inverse of `L = [[0, A₀₊], [A₊₀, L₊₊]]` with `A₀₊ = −A₊₀ᵀ`:
///
/// ```text
/// u0 = 𝔖₀⁻¹ (φ0 − A₀₊ L₊₊⁻¹ φ₊)
/// u₊ = L₊₊⁻¹ (φ₊ − A₊₀ u0)
/// ```
///
/// which expands to the usual 2×2 formula with `𝔖₀ = A₀₊ L₊₊⁻¹ A₊₀`
/// up to the sign convention `−A₀₊ = A₊₀ᵀ`.
#[derive(Debug, Clone)]
pub struct BlockSolver {
    zero_idx: Vec<usize>,
    plus_idx: Vec<usize>,
    a_plus0: DMatrix<f64>,
    l_pp: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    schur: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl BlockSolver {
    pub fn new(dec: &Decomposition, schur: &SchurComplement) -> Result<Self> {
        let sv = singular_values(&schur.direct);
        let (smax, smin) = (
            sv.first().copied().unwrap_or(0.0),
            sv.last().copied().unwrap_or(0.0),
        );
        if !(smin > f64::EPSILON * smax * sv.len() as f64) {
            return Err(Error::SchurSingular);
        }
        Ok(BlockSolver {
            zero_idx: dec.zero_idx.clone(),
            plus_idx: dec.plus_idx.clone(),
            a_plus0: dec.a_plus0.clone(),
            l_pp: dec.l_pp.clone().lu(),
            schur: schur.direct.clone().lu(),
        })
    }

    /// Solves on the split coordinates.
    pub fn solve_split(
        &self,
        phi0: &DVector<f64>,
        phi_plus: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let w = self.l_pp.solve(phi_plus).ok_or(Error::DissipationFailure)?;
        // −A₀₊ w = A₊₀ᵀ w.
        let rhs0 = phi0 + self.a_plus0.tr_mul(&w);
        let u0 = self.schur.solve(&rhs0).ok_or(Error::SchurSingular)?;
        let u_plus = self
            .l_pp
            .solve(&(phi_plus - &self.a_plus0 * &u0))
            .ok_or(Error::DissipationFailure)?;
        Ok((u0, u_plus))
    }

    /// Solves `L u = φ` for `φ` in full `H` coordinates.
    pub fn solve(&self, phi: &DVector<f64>) -> Result<DVector<f64>> {
        let phi0 =
            DVector::from_iterator(self.zero_idx.len(), self.zero_idx.iter().map(|&i| phi[i]));
        let phip =
            DVector::from_iterator(self.plus_idx.len(), self.plus_idx.iter().map(|&i| phi[i]));
        let (u0, up) = self.solve_split(&phi0, &phip)?;
        let mut u = DVector::zeros(phi.len());
        for (k, &i) in self.zero_idx.iter().enumerate() {
            u[i] = u0[k];
        }
        for (k, &i) in self.plus_idx.iter().enumerate() {
            u[i] = up[k];
        }
        Ok(u)
    }
}

/// Convenience wrapper: builds the solver and applies it once.
pub fn block_resolvent(dec: &Decomposition, phi: &DVector<f64>) -> Result<DVector<f64>> {
    let schur = schur_complement(dec)?;
    BlockSolver::new(dec, &schur)?.solve(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolventMethod {
    /// Dense SVD up to [`DENSE_SVD_LIMIT`], Lanczos beyond.
    Auto,
    DenseSvd,
    /// Lanczos on `L⁻¹L⁻ᵀ` through LU solves.
    Lanczos,
    /// Power iteration on `L⁻¹L⁻ᵀ`, the independent cross-check.
    InversePower,
}

/// `‖L⁻¹‖ = 1/σ_min(L)`.
pub fn exact_resolvent_norm(l: &DMatrix<f64>, method: ResolventMethod) -> Result<f64> {
    let n = l.nrows();
    let method = match method {
        ResolventMethod::Auto if n > DENSE_SVD_LIMIT => ResolventMethod::Lanczos,
        ResolventMethod::Auto => ResolventMethod::DenseSvd,
        m => m,
    };
    let floor = |smin: f64, smax: f64| smin <= f64::EPSILON * smax * n as f64;
    match method {
        ResolventMethod::DenseSvd | ResolventMethod::Auto => {
            let sv = singular_values(l);
            let (smax, smin) = (sv[0], *sv.last().unwrap());
            if floor(smin, smax) {
                return Err(Error::NumericallySingular { sigma_min: smin });
            }
            Ok(1.0 / smin)
        }
        ResolventMethod::Lanczos | ResolventMethod::InversePower => {
            let lu = l.clone().lu();
            let lut = l.transpose().lu();
            let mut failed = false;
            let apply = |v: &DVector<f64>| -> DVector<f64> {
                match lut.solve(v).and_then(|x| lu.solve(&x)) {
                    Some(y) => y,
                    None => {
                        failed = true;
                        DVector::zeros(v.len())
                    }
                }
            };
            let (lam, _) = if method == ResolventMethod::Lanczos {
                lanczos_largest(n, apply, 300, 1e-12)
            } else {
                power_iteration_largest(n, apply, 20_000, 1e-12)
            };
            let smax = l.iter().map(|v| v.abs()).fold(0.0, f64::max) * n as f64;
            if failed || !(lam > 0.0) || floor(1.0 / lam.sqrt(), smax) {
                return Err(Error::NumericallySingular {
                    sigma_min: if lam > 0.0 { 1.0 / lam.sqrt() } else { 0.0 },
                });
            }
            Ok(lam.sqrt())
        }
    }
}

/// `2(‖S₁₁‖/a² + ‖R₂₂‖ ‖L₂₁A₁₀(A₊₀ᵀA₊₀)⁻¹‖²/s) + 3/s`.
pub fn theorem_bound(s: f64, a: f64, norm_s11: f64, norm_r22: f64, norm_x21: f64) -> Result<f64> {
    if !(s > 0.0 && a > 0.0) || !s.is_finite() || !a.is_finite() {
        return Err(Error::AssumptionConstantsInvalid { s, a });
    }
    Ok(2.0 * (norm_s11 / (a * a) + norm_r22 * norm_x21 * norm_x21 / s) + 3.0 / s)
}

/// Norms entering the abstract bound.
#[derive(Debug, Clone, PartialEq)]
pub struct IntermediateNorms {
    pub norm_s11: f64,
    pub norm_s21: f64,
    pub norm_r22: f64,
    /// `‖L₂₁ A₁₀ (A₊₀ᵀA₊₀)⁻¹‖`.
    pub norm_x21: f64,
}

pub fn intermediate_norms(dec: &Decomposition) -> Result<IntermediateNorms> {
    let has_h2 = dec.p2.ncols() > 0;
    let x21 = if has_h2 {
        let ginv = dec.gram_inverse()?;
        spectral_norm(&(dec.l21() * &dec.a10 * ginv))
    } else {
        0.0
    };
    Ok(IntermediateNorms {
        norm_s11: spectral_norm(&dec.s11()),
        norm_s21: if has_h2 {
            spectral_norm(&dec.s21())
        } else {
            0.0
        },
        norm_r22: if has_h2 {
            spectral_norm(&dec.r22())
        } else {
            0.0
        },
        norm_x21: x21,
    })
}

/// Factorizations used inside the proof of the abstract bound, as relative
/// residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofIdentities {
    /// `‖𝔖₀ + QᵀQ‖ / ‖𝔖₀‖` with `Q = [−L₊₊⁻¹]_s^{1/2} A₊₀`.
    pub q_factor_residual: f64,
    /// `‖T₃ᵀT₃ + S₊₊⁻¹‖ / ‖S₊₊⁻¹‖` with `T₃ = [−L₊₊⁻¹]_s^{−1/2} L₊₊⁻¹`.
    pub t3_residual: f64,
}

pub fn proof_identities(dec: &Decomposition) -> Result<ProofIdentities> {
    let linv = dec
        .l_pp
        .clone()
        .try_inverse()
        .ok_or(Error::DissipationFailure)?;
    let neg_sym = (&linv + linv.transpose()) * -0.5;
    let (vals, _) = symmetric_eigen(&neg_sym);
    if !(vals.first().copied().unwrap_or(1.0) > 0.0) {
        return Err(Error::DissipationFailure);
    }
    let root = symmetric_function(&neg_sym, f64::sqrt);
    let inv_root = symmetric_function(&neg_sym, |v| 1.0 / v.sqrt());
    let q = &root * &dec.a_plus0;
    let schur = dec.a_plus0.transpose() * &linv * &dec.a_plus0;
    let q_residual =
        max_abs(&(&schur + q.transpose() * &q)) / max_abs(&schur).max(f64::MIN_POSITIVE);
    let t3 = inv_root * &linv;
    let s_inv = dec
        .s_pp
        .clone()
        .try_inverse()
        .ok_or(Error::DissipationFailure)?;
    let t3_residual =
        max_abs(&(t3.transpose() * &t3 + &s_inv)) / max_abs(&s_inv).max(f64::MIN_POSITIVE);
    Ok(ProofIdentities {
        q_factor_residual: q_residual,
        t3_residual,
    })
}

/// Everything reported for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub model: ModelKind,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub d: usize,
    pub n_q: usize,
    pub n_p: usize,
    pub n_xi: Option<usize>,
    pub s: f64,
    pub a: f64,
    pub norm_s11: f64,
    pub norm_r22: f64,
    pub norm_x21: f64,
    /// Abstract-theorem bound.
    pub bound: f64,
    pub exact: f64,
    pub margin: f64,
    /// Model-specific closed-form bound, when the model has one.
    pub model_bound: Option<f64>,
    pub k_nu2: f64,
    pub k_kappa2: f64,
    pub lambda_min_m: f64,
    pub x2: f64,
    /// Largest relative change of `bound` and `exact` under the refinements.
    pub refinement_change: Option<f64>,
    pub converged: bool,
}
