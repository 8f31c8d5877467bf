//! Discretized function space.
//!
//! Positions live on the torus `[0, L)^d`. The position factor is spanned by
//! real trigonometric monomials `Π_i t_{j_i}(q_i)` with
//! `t_0 = 1, t_{2k-1} = cos(k w q), t_{2k} = sin(k w q)` and `w = 2π/L`,
//! orthonormalized in `L²(ν)` by a Cholesky factor of their Gram matrix.
//! With the constant ordered first, the first orthonormal function is `1`
//! and all others have `ν`-mean zero. Functions are ordered by shell
//! `max_i k_i` and then lexicographically, so a smaller cutoff spans a
//! prefix of a larger one.
//!
//! Momenta use orthonormal Hermite functions `h_n(p) = He_n(x)/√n!` with
//! `x = p √(β/m)`, and the Adaptive Langevin friction variable `ξ` uses the
//! same family for the variance `1/β`.
//!
//! Column layout: the raw index of `(ξ-degree j, momentum multi-index n,
//! position function b)` is `(j·(n_p+1)^d + flat(n))·N_q + b`, with `n_1`
//! the slowest digit of `flat(n)`. Raw index 0 (the constant) is dropped and
//! column `c` holds raw index `c + 1`. Columns of momentum degree 0 and
//! `ξ`-degree 0 therefore form a prefix of length `N_q − 1`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, symmetric_eigen};

pub const DEFAULT_MAX_DIM: usize = 20_000;
pub const DEFAULT_TOL_IDENTITY: f64 = 1e-10;

/// Largest number of position quadrature points tried before giving up.
const MAX_POSITION_POINTS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub d: usize,
    pub n_q: usize,
    pub n_p: usize,
    pub beta: f64,
    pub mass: f64,
    pub torus_length: f64,
    pub has_xi: bool,
    pub n_xi: usize,
    pub tol_identity: f64,
    pub max_dim: usize,
}

impl BasisSpec {
    pub fn new(d: usize, n_q: usize, n_p: usize) -> Self {
        BasisSpec {
            d,
            n_q,
            n_p,
            beta: 1.0,
            mass: 1.0,
            torus_length: 2.0 * core::f64::consts::PI,
            has_xi: false,
            n_xi: 0,
            tol_identity: DEFAULT_TOL_IDENTITY,
            max_dim: DEFAULT_MAX_DIM,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_xi(mut self, n_xi: usize) -> Self {
        self.has_xi = true;
        self.n_xi = n_xi;
        self
    }

    pub fn with_torus_length(mut self, length: f64) -> Self {
        self.torus_length = length;
        self
    }

    pub fn with_max_dim(mut self, max_dim: usize) -> Self {
        self.max_dim = max_dim;
        self
    }

    pub fn with_tol_identity(mut self, tol: f64) -> Self {
        self.tol_identity = tol;
        self
    }

    /// Number of position functions `(2 n_q + 1)^d`, constant included.
    pub fn position_count(&self) -> Option<usize> {
        checked_pow(2 * self.n_q + 1, self.d)
    }

    pub fn momentum_count(&self) -> Option<usize> {
        checked_pow(self.n_p + 1, self.d)
    }

    pub fn xi_levels(&self) -> usize {
        if self.has_xi {
            self.n_xi + 1
        } else {
            1
        }
    }

    /// Dimension of the mean-zero space; `None` on overflow.
    pub fn dimension(&self) -> Option<usize> {
        self.position_count()?
            .checked_mul(self.momentum_count()?)?
            .checked_mul(self.xi_levels())
            .map(|n| n - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.d == 0 {
            return Err(Error::InvalidSpec("d must be positive".into()));
        }
        if self.n_q == 0 {
            return Err(Error::InvalidSpec("n_q must be positive".into()));
        }
        if !positive(self.beta) || !positive(self.mass) || !positive(self.torus_length) {
            return Err(Error::InvalidSpec(
                "beta, mass and torus_length must be positive".into(),
            ));
        }
        if !positive(self.tol_identity) {
            return Err(Error::InvalidSpec("tol_identity must be positive".into()));
        }
        match self.dimension() {
            Some(dim) if dim <= self.max_dim => Ok(()),
            Some(dim) => Err(Error::ProblemTooLarge {
                dim,
                max_dim: self.max_dim,
            }),
            None => Err(Error::ProblemTooLarge {
                dim: usize::MAX,
                max_dim: self.max_dim,
            }),
        }
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

/// Values, gradient and Hessian (row-major `d × d`) of a potential at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSample {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

/// Finite Fourier series `V(q) = Σ_k v_k e^{i w k·q}`, stored with every
/// `-k` partner present so that `V` is real.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    d: usize,
    modes: BTreeMap<Vec<i32>, (f64, f64)>,
}

impl Potential {
    pub fn zero(d: usize) -> Self {
        Potential {
            d,
            modes: BTreeMap::new(),
        }
    }

    /// Builds from `(k, re, im)` entries. A missing `-k` partner is filled
    /// with the conjugate; a present one must match it.
    pub fn from_modes(
        d: usize,
        entries: impl IntoIterator<Item = (Vec<i32>, f64, f64)>,
    ) -> Result<Self> {
        let mut modes: BTreeMap<Vec<i32>, (f64, f64)> = BTreeMap::new();
        for (k, re, im) in entries {
            if k.len() != d {
                return Err(Error::InvalidSpec(format!(
                    "potential wavevector {k:?} has {} components, expected {d}",
                    k.len()
                )));
            }
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "non-finite potential coefficient at k={k:?}"
                )));
            }
            if modes.insert(k.clone(), (re, im)).is_some() {
                return Err(Error::InvalidSpec(format!(
                    "duplicate potential coefficient at k={k:?}"
                )));
            }
        }
        let keys: Vec<Vec<i32>> = modes.keys().cloned().collect();
        for k in keys {
            let (re, im) = modes[&k];
            let neg: Vec<i32> = k.iter().map(|x| -x).collect();
            if neg == k {
                if im.abs() > 1e-12 * (1.0 + re.abs()) {
                    return Err(Error::InvalidSpec(
                        "non-conjugate-symmetric potential: zero mode must be real".into(),
                    ));
                }
                modes.insert(k, (re, 0.0));
                continue;
            }
            match modes.get(&neg) {
                Some(&(r2, i2)) => {
                    let scale = 1e-12 * (1.0 + re.abs() + im.abs());
                    if (r2 - re).abs() > scale || (i2 + im).abs() > scale {
                        return Err(Error::InvalidSpec(format!(
                            "non-conjugate-symmetric potential at k={k:?}"
                        )));
                    }
                }
                None => {
                    modes.insert(neg, (re, -im));
                }
            }
        }
        modes.retain(|_, v| v.0 != 0.0 || v.1 != 0.0);
        Ok(Potential { d, modes })
    }

    /// `Σ_i amplitude · cos(k q_i)`; a real cosine has `v_{±k} = amplitude/2`.
    pub fn separable_cosine(d: usize, k: i32, amplitude: f64) -> Self {
        let entries = (0..d).map(|i| {
            let mut kv = vec![0; d];
            kv[i] = k;
            (kv, 0.5 * amplitude, 0.0)
        });
        Potential::from_modes(d, entries).expect("well-formed cosine potential")
    }

    /// Sum of two potentials on the same dimension.
    pub fn plus(&self, other: &Potential) -> Potential {
        assert_eq!(self.d, other.d);
        let mut modes = self.modes.clone();
        for (k, (re, im)) in &other.modes {
            let e = modes.entry(k.clone()).or_insert((0.0, 0.0));
            e.0 += re;
            e.1 += im;
        }
        modes.retain(|_, v| v.0 != 0.0 || v.1 != 0.0);
        Potential { d: self.d, modes }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    /// All stored modes including conjugate partners, ordered by `k`.
    pub fn modes(&self) -> impl Iterator<Item = (&[i32], f64, f64)> {
        self.modes
            .iter()
            .map(|(k, &(re, im))| (k.as_slice(), re, im))
    }

    /// Largest `|k_i|` over stored modes.
    pub fn max_mode(&self) -> usize {
        self.modes
            .keys()
            .flat_map(|k| k.iter().map(|x| x.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    /// Evaluates `V`, `∇V`, `∇²V` at `q` with fundamental wavenumber `w`.
    pub fn sample(&self, q: &[f64], w: f64) -> PotentialSample {
        let d = self.d;
        let mut out = PotentialSample {
            value: 0.0,
            gradient: vec![0.0; d],
            hessian: vec![0.0; d * d],
        };
        for (k, &(re, im)) in &self.modes {
            let theta: f64 = k.iter().zip(q).map(|(&ki, &qi)| ki as f64 * w * qi).sum();
            let (s, c) = theta.sin_cos();
            // Re(v e^{iθ}) and its θ-derivatives.
            let f0 = re * c - im * s;
            let f1 = -re * s - im * c;
            out.value += f0;
            for i in 0..d {
                let ki = k[i] as f64 * w;
                out.gradient[i] += f1 * ki;
                for (j, &kj) in k.iter().enumerate() {
                    out.hessian[i * d + j] -= f0 * ki * kj as f64 * w;
                }
            }
        }
        out
    }

    pub fn value(&self, q: &[f64], w: f64) -> f64 {
        self.modes
            .iter()
            .map(|(k, &(re, im))| {
                let theta: f64 = k.iter().zip(q).map(|(&ki, &qi)| ki as f64 * w * qi).sum();
                re * theta.cos() - im * theta.sin()
            })
            .sum()
    }

    /// Coefficients exactly in deterministic order, for fingerprints.
    fn hash_into(&self, h: &mut Fnv) {
        h.u64(self.d as u64);
        for (k, &(re, im)) in &self.modes {
            for &ki in k {
                h.u64(ki as i64 as u64);
            }
            h.f64(re);
            h.f64(im);
        }
    }
}

/// Gauss–Hermite rule for the standard normal (Golub–Welsch); weights sum to 1.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order.max(1);
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let (values, vectors) = symmetric_eigen(&jacobi);
    let weights: Vec<f64> = (0..n).map(|j| vectors[(0, j)] * vectors[(0, j)]).collect();
    let total: f64 = weights.iter().sum();
    (values, weights.into_iter().map(|w| w / total).collect())
}

/// Orthonormal probabilists' Hermite values `h_0(x), …, h_n(x)`.
pub fn hermite_values(x: f64, n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n + 1];
    h[0] = 1.0;
    if n >= 1 {
        h[1] = x;
    }
    for k in 1..n {
        h[k + 1] = (x * h[k] - (k as f64).sqrt() * h[k - 1]) / ((k + 1) as f64).sqrt();
    }
    h
}

/// Uniform tensor grid on the torus with normalized Gibbs weights
/// `e^{-βV(x)} / Σ_y e^{-βV(y)}`; spectrally accurate for smooth periodic
/// integrands.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionGrid {
    pub points_per_dim: usize,
    /// Flattened `P × d`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PositionGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn gibbs_grid(potential: &Potential, beta: f64, torus_length: f64, m: usize) -> PositionGrid {
    let d = potential.dim();
    let w = 2.0 * core::f64::consts::PI / torus_length;
    let total = checked_pow(m, d).unwrap();
    let h = torus_length / m as f64;
    let mut points = Vec::with_capacity(total * d);
    let mut energies = Vec::with_capacity(total);
    let mut q = vec![0.0; d];
    for mut flat in 0..total {
        for slot in q.iter_mut().rev() {
            *slot = (flat % m) as f64 * h;
            flat /= m;
        }
        points.extend_from_slice(&q);
        energies.push(potential.value(&q, w));
    }
    let vmin = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = energies
        .iter()
        .map(|v| (-beta * (v - vmin)).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    PositionGrid {
        points_per_dim: m,
        points,
        weights: raw.into_iter().map(|r| r / z).collect(),
    }
}

/// Tabulated position functions: values, gradients (one matrix per
/// coordinate) and Hessians (index `l·d + m`), rows indexed by points.
#[derive(Debug, Clone)]
pub struct PositionTable {
    pub values: DMatrix<f64>,
    pub gradients: Vec<DMatrix<f64>>,
    pub hessians: Vec<DMatrix<f64>>,
}

/// Orthonormal position factor.
#[derive(Debug, Clone)]
pub struct PositionBasis {
    d: usize,
    n_q: usize,
    wavenumber: f64,
    /// Per-coordinate trigonometric indices of each raw monomial.
    monomials: Vec<Vec<u16>>,
    /// Lower-triangular Cholesky factor of the monomial Gram matrix.
    chol: DMatrix<f64>,
    /// `φ = C t` with `C = chol⁻¹`.
    coeff: DMatrix<f64>,
    derivatives: Vec<DMatrix<f64>>,
    points_per_dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    gram_residual: f64,
}

fn trig_wavenumber(j: u16) -> i32 {
    ((j as i32) + 1) / 2
}

/// Signed label: `+k` for `cos`, `-k` for `sin`, 0 for the constant.
fn trig_label(j: u16) -> i32 {
    if j == 0 {
        0
    } else if j % 2 == 1 {
        trig_wavenumber(j)
    } else {
        -trig_wavenumber(j)
    }
}

fn trig_1d(j: u16, x: f64, w: f64, order: usize) -> [f64; 3] {
    if j == 0 {
        return [1.0, 0.0, 0.0];
    }
    let kw = trig_wavenumber(j) as f64 * w;
    let (s, c) = (kw * x).sin_cos();
    let mut out = if j % 2 == 1 {
        [c, -kw * s, -kw * kw * c]
    } else {
        [s, kw * c, -kw * kw * s]
    };
    if order < 2 {
        out[2] = 0.0;
    }
    out
}

impl PositionBasis {
    fn build(spec: &BasisSpec, potential: &Potential) -> Result<Self> {
        let d = spec.d;
        let n_q = spec.n_q;
        let w = 2.0 * core::f64::consts::PI / spec.torus_length;

        let levels = 2 * n_q + 1;
        let count = spec.position_count().unwrap();
        let mut monomials: Vec<Vec<u16>> = (0..count)
            .map(|mut flat| {
                let mut idx = vec![0u16; d];
                for slot in idx.iter_mut().rev() {
                    *slot = (flat % levels) as u16;
                    flat /= levels;
                }
                idx
            })
            .collect();
        monomials.sort_by(|a, b| {
            let shell = |m: &Vec<u16>| m.iter().map(|&j| trig_wavenumber(j)).max().unwrap_or(0);
            (shell(a), a).cmp(&(shell(b), b))
        });

        let min_points = 4 * n_q + 4 + 4 * potential.max_mode();
        let mut m = min_points.max(8);
        let mut gram_coarse;
        let mut grid_coarse;
        let (gram, grid) = loop {
            grid_coarse = gibbs_grid(potential, spec.beta, spec.torus_length, m);
            gram_coarse = Self::monomial_gram(&monomials, &grid_coarse, w);
            let total_fine = checked_pow(2 * m, d).unwrap_or(usize::MAX);
            if total_fine > MAX_POSITION_POINTS {
                return Err(Error::QuadratureFailure {
                    residual: f64::INFINITY,
                });
            }
            let grid_fine = gibbs_grid(potential, spec.beta, spec.torus_length, 2 * m);
            let gram_fine = Self::monomial_gram(&monomials, &grid_fine, w);
            if max_abs_diff(&gram_coarse, &gram_fine) <= 1e-13 {
                break (gram_fine, grid_fine);
            }
            m *= 2;
        };

        let chol = gram
            .clone()
            .cholesky()
            .ok_or(Error::QuadratureFailure {
                residual: f64::INFINITY,
            })?
            .l();
        let ident = DMatrix::<f64>::identity(count, count);
        let coeff = chol
            .solve_lower_triangular(&ident)
            .ok_or(Error::QuadratureFailure {
                residual: f64::INFINITY,
            })?;

        // Orthonormality checked against the independent coarser rule.
        let check = &coeff * &gram_coarse * coeff.transpose();
        let gram_residual = max_abs_diff(&check, &ident);
        if !(gram_residual < spec.tol_identity) {
            return Err(Error::QuadratureFailure {
                residual: gram_residual,
            });
        }

        let mut derivatives = Vec::with_capacity(d);
        let index: BTreeMap<&[u16], usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.as_slice(), i))
            .collect();
        for l in 0..d {
            // ∂_l t_a = Σ_c τ[a, c] t_c exactly.
            let mut tau = DMatrix::<f64>::zeros(count, count);
            for (a, mono) in monomials.iter().enumerate() {
                let j = mono[l];
                if j == 0 {
                    continue;
                }
                let kw = trig_wavenumber(j) as f64 * w;
                let mut target = mono.clone();
                let sign = if j % 2 == 1 {
                    target[l] = j + 1;
                    -kw
                } else {
                    target[l] = j - 1;
                    kw
                };
                tau[(a, index[target.as_slice()])] = sign;
            }
            // D_l = (C τ C⁻¹)ᵀ with C⁻¹ = chol.
            let inner =
                chol.solve_lower_triangular(&(tau * &chol))
                    .ok_or(Error::QuadratureFailure {
                        residual: f64::INFINITY,
                    })?;
            derivatives.push(inner.transpose());
        }

        Ok(PositionBasis {
            d,
            n_q,
            wavenumber: w,
            monomials,
            chol,
            coeff,
            derivatives,
            points_per_dim: grid.points_per_dim,
            points: grid.points,
            weights: grid.weights,
            gram_residual,
        })
    }

    fn monomial_table(monomials: &[Vec<u16>], points: &[f64], d: usize, w: f64) -> DMatrix<f64> {
        let npts = points.len() / d;
        DMatrix::from_fn(npts, monomials.len(), |x, a| {
            let q = &points[x * d..(x + 1) * d];
            monomials[a]
                .iter()
                .zip(q)
                .map(|(&j, &qi)| trig_1d(j, qi, w, 0)[0])
                .product()
        })
    }

    fn monomial_gram(monomials: &[Vec<u16>], grid: &PositionGrid, w: f64) -> DMatrix<f64> {
        let d = monomials.first().map_or(1, |m| m.len());
        let t = Self::monomial_table(monomials, &grid.points, d, w);
        let mut tw = t.clone();
        for (x, &wx) in grid.weights.iter().enumerate() {
            tw.row_mut(x).scale_mut(wx);
        }
        t.transpose() * tw
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    /// Number of position functions, constant included.
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    /// Signed trigonometric labels of the leading monomial of function `b`.
    pub fn label(&self, b: usize) -> Vec<i32> {
        self.monomials[b].iter().map(|&j| trig_label(j)).collect()
    }

    /// Galerkin matrix `D_l[a, b] = ⟨φ_a, ∂_{q_l} φ_b⟩_ν`; its transpose
    /// represents `∂_{q_l}^*`.
    pub fn derivative(&self, l: usize) -> &DMatrix<f64> {
        &self.derivatives[l]
    }

    /// Coefficients of the orthonormal functions on the raw monomials.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coeff
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    /// Quadrature nodes, flattened `P × d`.
    pub fn quadrature_points(&self) -> &[f64] {
        &self.points
    }

    /// Normalized `ν` weights matching [`Self::quadrature_points`].
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Tabulates the orthonormal functions (and derivatives up to `order`,
    /// at most 2) at flattened points.
    pub fn tabulate(&self, points: &[f64], order: usize) -> PositionTable {
        let d = self.d;
        let npts = points.len() / d;
        let nb = self.len();
        let w = self.wavenumber;
        let mut t = DMatrix::<f64>::zeros(npts, nb);
        let mut tg: Vec<DMatrix<f64>> = (0..if order >= 1 { d } else { 0 })
            .map(|_| DMatrix::zeros(npts, nb))
            .collect();
        let mut th: Vec<DMatrix<f64>> = (0..if order >= 2 { d * d } else { 0 })
            .map(|_| DMatrix::zeros(npts, nb))
            .collect();
        let mut f = vec![[0.0f64; 3]; d];
        for x in 0..npts {
            let q = &points[x * d..(x + 1) * d];
            for (a, mono) in self.monomials.iter().enumerate() {
                for i in 0..d {
                    f[i] = trig_1d(mono[i], q[i], w, order);
                }
                let prod_except = |skip: &[usize], f: &[[f64; 3]]| -> f64 {
                    (0..d)
                        .filter(|i| !skip.contains(i))
                        .map(|i| f[i][0])
                        .product()
                };
                t[(x, a)] = prod_except(&[], &f);
                if order >= 1 {
                    for l in 0..d {
                        tg[l][(x, a)] = f[l][1] * prod_except(&[l], &f);
                    }
                }
                if order >= 2 {
                    for l in 0..d {
                        for m in 0..d {
                            th[l * d + m][(x, a)] = if l == m {
                                f[l][2] * prod_except(&[l], &f)
                            } else {
                                f[l][1] * f[m][1] * prod_except(&[l, m], &f)
                            };
                        }
                    }
                }
            }
        }
        let ct = self.coeff.transpose();
        PositionTable {
            values: t * &ct,
            gradients: tg.into_iter().map(|g| g * &ct).collect(),
            hessians: th.into_iter().map(|h| h * &ct).collect(),
        }
    }
}

/// Decoded column of the full basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisIndex {
    pub xi: usize,
    pub momentum: Vec<usize>,
    pub position: usize,
}

/// Coefficients tagged with the fingerprint of the basis they live in.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub basis_id: u64,
    pub values: DVector<f64>,
}

/// Result of a quadrature projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub coefficients: CoefficientVector,
    /// `μ`-mean of the function, which is not representable in `H`.
    pub mean: f64,
    /// `L²(μ)` norm of the part of `f − mean` outside the span.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct BasisSet {
    spec: BasisSpec,
    potential: Potential,
    position: PositionBasis,
    /// Standard-normal Gauss–Hermite rule shared by momenta and `ξ`.
    gh_nodes: Vec<f64>,
    gh_weights: Vec<f64>,
    id: u64,
}

/// Builds the discretized space; see the module docs for the layout.
pub fn build_basis(spec: &BasisSpec, potential: &Potential) -> Result<BasisSet> {
    BasisSet::build(spec, potential)
}

impl BasisSet {
    pub fn build(spec: &BasisSpec, potential: &Potential) -> Result<Self> {
        spec.validate()?;
        if potential.dim() != spec.d {
            return Err(Error::InvalidSpec(format!(
                "potential has dimension {}, basis has {}",
                potential.dim(),
                spec.d
            )));
        }
        let position = PositionBasis::build(spec, potential)?;
        let order = 2 * spec.n_p.max(spec.n_xi) + 4;
        let (gh_nodes, gh_weights) = gauss_hermite(order);
        let mut h = Fnv::new();
        h.u64(spec.d as u64);
        h.u64(spec.n_q as u64);
        h.u64(spec.n_p as u64);
        h.u64(spec.has_xi as u64);
        h.u64(spec.n_xi as u64);
        h.f64(spec.beta);
        h.f64(spec.mass);
        h.f64(spec.torus_length);
        potential.hash_into(&mut h);
        Ok(BasisSet {
            spec: spec.clone(),
            potential: potential.clone(),
            position,
            gh_nodes,
            gh_weights,
            id: h.finish(),
        })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn position(&self) -> &PositionBasis {
        &self.position
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension().unwrap()
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn n_q_funcs(&self) -> usize {
        self.position.len()
    }

    pub fn momentum_block(&self) -> usize {
        self.spec.momentum_count().unwrap()
    }

    pub fn xi_levels(&self) -> usize {
        self.spec.xi_levels()
    }

    /// Standard deviation of `κ` per coordinate, `√(m/β)`.
    pub fn momentum_scale(&self) -> f64 {
        (self.spec.mass / self.spec.beta).sqrt()
    }

    /// Standard deviation of the `ξ` Gaussian, `√(1/β)`.
    pub fn xi_scale(&self) -> f64 {
        (1.0 / self.spec.beta).sqrt()
    }

    pub fn flat_momentum(&self, n: &[usize]) -> Option<usize> {
        let radix = self.spec.n_p + 1;
        n.iter()
            .try_fold(0usize, |acc, &ni| (ni < radix).then_some(acc * radix + ni))
    }

    pub fn momentum_digits(&self, mut flat: usize) -> Vec<usize> {
        let radix = self.spec.n_p + 1;
        let mut n = vec![0; self.spec.d];
        for slot in n.iter_mut().rev() {
            *slot = flat % radix;
            flat /= radix;
        }
        n
    }

    /// Column of `(ξ-degree, momentum multi-index, position function)`;
    /// `None` outside the truncation or for the excluded constant.
    pub fn column(&self, xi: usize, n: &[usize], b: usize) -> Option<usize> {
        if xi >= self.xi_levels() || b >= self.n_q_funcs() || n.len() != self.spec.d {
            return None;
        }
        let flat = self.flat_momentum(n)?;
        let raw = (xi * self.momentum_block() + flat) * self.n_q_funcs() + b;
        raw.checked_sub(1)
    }

    /// Column from raw pieces with the momentum multi-index already flattened.
    pub fn column_flat(&self, xi: usize, flat: usize, b: usize) -> usize {
        (xi * self.momentum_block() + flat) * self.n_q_funcs() + b - 1
    }

    pub fn decode(&self, col: usize) -> BasisIndex {
        let raw = col + 1;
        let nq = self.n_q_funcs();
        let b = raw % nq;
        let rest = raw / nq;
        let flat = rest % self.momentum_block();
        let xi = rest / self.momentum_block();
        BasisIndex {
            xi,
            momentum: self.momentum_digits(flat),
            position: b,
        }
    }

    /// Total Hermite degree in momentum of a column.
    pub fn momentum_degree(&self, col: usize) -> usize {
        self.decode(col).momentum.iter().sum()
    }

    /// Value of basis function `col` at a phase-space point.
    pub fn evaluate_column(&self, col: usize, q: &[f64], p: &[f64], xi: f64) -> f64 {
        let idx = self.decode(col);
        let phi = self.position.tabulate(q, 0).values[(0, idx.position)];
        let sp = self.momentum_scale();
        let hp: f64 = idx
            .momentum
            .iter()
            .zip(p)
            .map(|(&n, &pi)| hermite_values(pi / sp, n)[n])
            .product();
        let hx = if self.spec.has_xi {
            hermite_values(xi / self.xi_scale(), idx.xi)[idx.xi]
        } else {
            1.0
        };
        phi * hp * hx
    }

    /// Evaluates `Σ_c f_c e_c` at one point.
    pub fn evaluate(&self, f: &CoefficientVector, q: &[f64], p: &[f64], xi: f64) -> Result<f64> {
        self.check(f)?;
        let phi = self.position.tabulate(q, 0).values;
        let sp = self.momentum_scale();
        let hp: Vec<Vec<f64>> = p
            .iter()
            .map(|&pi| hermite_values(pi / sp, self.spec.n_p))
            .collect();
        let hx = hermite_values(xi / self.xi_scale(), self.spec.n_xi);
        let mut acc = 0.0;
        for col in 0..self.dimension() {
            let idx = self.decode(col);
            let mut v = phi[(0, idx.position)] * f.values[col];
            for (i, &n) in idx.momentum.iter().enumerate() {
                v *= hp[i][n];
            }
            if self.spec.has_xi {
                v *= hx[idx.xi];
            }
            acc += v;
        }
        Ok(acc)
    }

    pub fn zeros(&self) -> CoefficientVector {
        CoefficientVector {
            basis_id: self.id,
            values: DVector::zeros(self.dimension()),
        }
    }

    pub fn coefficients(&self, values: DVector<f64>) -> Result<CoefficientVector> {
        if values.len() != self.dimension() {
            return Err(Error::BasisMismatch);
        }
        Ok(CoefficientVector {
            basis_id: self.id,
            values,
        })
    }

    fn check(&self, f: &CoefficientVector) -> Result<()> {
        if f.basis_id != self.id || f.values.len() != self.dimension() {
            return Err(Error::BasisMismatch);
        }
        Ok(())
    }

    /// `⟨f, g⟩_{L²(μ)}`, which is the Euclidean product of coefficients.
    pub fn inner_product(&self, f: &CoefficientVector, g: &CoefficientVector) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        Ok(f.values.dot(&g.values))
    }

    /// Physical momentum nodes and weights of the one-dimensional rule.
    pub fn momentum_quadrature(&self) -> (Vec<f64>, Vec<f64>) {
        let s = self.momentum_scale();
        (
            self.gh_nodes.iter().map(|x| x * s).collect(),
            self.gh_weights.clone(),
        )
    }

    /// Projects `f(q, p, ξ)` onto the basis by tensor quadrature.
    pub fn expand_function(&self, f: impl Fn(&[f64], &[f64], f64) -> f64) -> Expansion {
        let d = self.spec.d;
        let n_p = self.spec.n_p;
        let nq = self.n_q_funcs();
        let qpts = self.position.quadrature_points();
        let qw = self.position.quadrature_weights();
        let phi = self.position.tabulate(qpts, 0).values;
        let npts_q = qw.len();

        let sp = self.momentum_scale();
        let sx = self.xi_scale();
        let k = self.gh_nodes.len();
        let herm: Vec<Vec<f64>> = self
            .gh_nodes
            .iter()
            .map(|&x| hermite_values(x, n_p.max(self.spec.n_xi)))
            .collect();
        let xi_nodes: Vec<usize> = if self.spec.has_xi {
            (0..k).collect()
        } else {
            vec![usize::MAX]
        };

        let mut raw = vec![0.0; self.dimension() + 1];
        let mut mean = 0.0;
        let mut second = 0.0;
        let mut p = vec![0.0; d];
        let mut pidx = vec![0usize; d];
        let p_total = checked_pow(k, d).unwrap();
        let mut fq = DVector::<f64>::zeros(npts_q);
        for &xn in &xi_nodes {
            let (xi, wxi) = if xn == usize::MAX {
                (0.0, 1.0)
            } else {
                (self.gh_nodes[xn] * sx, self.gh_weights[xn])
            };
            for mut flat in 0..p_total {
                for i in (0..d).rev() {
                    pidx[i] = flat % k;
                    flat /= k;
                    p[i] = self.gh_nodes[pidx[i]] * sp;
                }
                let wp: f64 = pidx.iter().map(|&j| self.gh_weights[j]).product::<f64>() * wxi;
                for x in 0..npts_q {
                    let v = f(&qpts[x * d..(x + 1) * d], &p, xi);
                    fq[x] = v * qw[x];
                    mean += wp * qw[x] * v;
                    second += wp * qw[x] * v * v;
                }
                let g = phi.tr_mul(&fq);
                for xl in 0..self.xi_levels() {
                    let hx = if xn == usize::MAX { 1.0 } else { herm[xn][xl] };
                    for nflat in 0..self.momentum_block() {
                        let n = self.momentum_digits(nflat);
                        let hp: f64 = n
                            .iter()
                            .enumerate()
                            .map(|(i, &ni)| herm[pidx[i]][ni])
                            .product();
                        let scale = wp * hx * hp;
                        let base = (xl * self.momentum_block() + nflat) * nq;
                        for b in 0..nq {
                            raw[base + b] += scale * g[b];
                        }
                    }
                }
            }
        }
        let values = DVector::from_iterator(self.dimension(), raw[1..].iter().copied());
        let captured = values.norm_squared();
        let residual = (second - mean * mean - captured).max(0.0).sqrt();
        Expansion {
            coefficients: CoefficientVector {
                basis_id: self.id,
                values,
            },
            mean,
            residual,
        }
    }
}

/// 64-bit FNV-1a over explicit little-endian encodings.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn bytes(&mut self, data: &[u8]) {
        for &b in data {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    fn cos_potential() -> Potential {
        Potential::separable_cosine(1, 1, 1.0)
    }

    #[test]
    fn dimensions_follow_mode_counting() {
        assert_eq!(BasisSpec::new(1, 3, 2).dimension(), Some(20));
        assert_eq!(BasisSpec::new(1, 1, 0).dimension(), Some(2));
        assert_eq!(BasisSpec::new(2, 2, 1).dimension(), Some(99));
        assert_eq!(BasisSpec::new(1, 2, 2).with_xi(3).dimension(), Some(59));
        let b = BasisSet::build(&BasisSpec::new(2, 2, 1), &Potential::zero(2)).unwrap();
        assert_eq!(b.dimension(), 99);
    }

    #[test]
    fn oversized_or_invalid_specs_are_rejected() {
        let spec = BasisSpec::new(3, 10, 10).with_max_dim(1000);
        assert!(matches!(
            spec.validate(),
            Err(Error::ProblemTooLarge { .. })
        ));
        assert!(matches!(
            BasisSpec::new(1, 2, 2).with_beta(0.0).validate(),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            BasisSpec::new(1, 0, 2).validate(),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn potential_rejects_inconsistent_conjugates() {
        let bad = Potential::from_modes(1, [(vec![1], 0.5, 0.1), (vec![-1], 0.5, 0.1)]);
        assert!(bad.is_err());
        let bad0 = Potential::from_modes(1, [(vec![0], 1.0, 0.3)]);
        assert!(bad0.is_err());
        let good = Potential::from_modes(1, [(vec![1], 0.5, 0.25)]).unwrap();
        let q = [0.7];
        // 2 Re(v e^{iq}) = cos q - 0.5 sin q.
        assert_relative_eq!(
            good.value(&q, 1.0),
            0.7f64.cos() - 0.5 * 0.7f64.sin(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn potential_derivatives_match_finite_differences() {
        let v = Potential::from_modes(
            2,
            [
                (vec![1, 0], 0.5, 0.0),
                (vec![1, 2], 0.2, -0.3),
                (vec![0, 1], 0.0, 0.4),
            ],
        )
        .unwrap();
        let q = [0.3, 1.1];
        let s = v.sample(&q, 1.0);
        let h = 1e-5;
        for i in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[i] += h;
            qm[i] -= h;
            let fd = (v.value(&qp, 1.0) - v.value(&qm, 1.0)) / (2.0 * h);
            assert_relative_eq!(s.gradient[i], fd, epsilon = 1e-8);
            let gp = v.sample(&qp, 1.0).gradient;
            let gm = v.sample(&qm, 1.0).gradient;
            for j in 0..2 {
                assert_relative_eq!(
                    s.hessian[j * 2 + i],
                    (gp[j] - gm[j]) / (2.0 * h),
                    epsilon = 1e-7
                );
            }
        }
    }

    #[test]
    fn gram_identity_holds_for_nontrivial_potentials() {
        for (d, pot) in [
            (1, cos_potential()),
            (
                1,
                cos_potential().plus(&Potential::separable_cosine(1, 2, 0.5)),
            ),
            (2, Potential::separable_cosine(2, 1, 1.0)),
        ] {
            let b = BasisSet::build(&BasisSpec::new(d, 4, 2).with_beta(2.0), &pot).unwrap();
            assert!(b.position().gram_residual() < 1e-10);
            // Independent check on a finer grid built from scratch.
            let m = 4 * b.position().points_per_dim();
            let grid = gibbs_grid(&pot, 2.0, 2.0 * PI, m);
            let tab = b.position().tabulate(&grid.points, 0).values;
            let mut tw = tab.clone();
            for (x, &w) in grid.weights.iter().enumerate() {
                tw.row_mut(x).scale_mut(w);
            }
            let gram = tab.transpose() * tw;
            assert!(max_abs_diff(&gram, &DMatrix::identity(gram.nrows(), gram.ncols())) < 1e-10);
        }
    }

    #[test]
    fn inner_products_of_named_functions() {
        let b = BasisSet::build(
            &BasisSpec::new(1, 3, 4).with_beta(2.0).with_mass(3.0),
            &Potential::zero(1),
        )
        .unwrap();
        // cos q on the flat torus: the orthonormal function is √2 cos q.
        let e = b.expand_function(|q, _, _| q[0].cos());
        let c = b.column(0, &[0], 1).unwrap();
        assert_relative_eq!(e.coefficients.values[c], 1.0 / 2f64.sqrt(), epsilon = 1e-13);
        assert_relative_eq!(
            b.inner_product(&e.coefficients, &e.coefficients).unwrap(),
            0.5,
            epsilon = 1e-13
        );
        assert!(e.residual < 1e-12);
        // p² has mean m/β under κ.
        let e = b.expand_function(|_, p, _| p[0] * p[0]);
        assert_relative_eq!(e.mean, 1.5, epsilon = 1e-13);
        // The constant lies outside H.
        let e = b.expand_function(|_, _, _| 1.0);
        assert!(e.coefficients.values.amax() < 1e-14);
        assert_relative_eq!(e.mean, 1.0, epsilon = 1e-14);
        // The first Hermite function has unit norm.
        let h1 = b.column(0, &[1], 0).unwrap();
        let e = b.expand_function(|_, p, _| p[0] / (1.5f64).sqrt());
        assert_relative_eq!(e.coefficients.values[h1], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn cubic_momentum_matches_hermite_expansion() {
        // x³ = He_3 + 3 He_1 = √6 h_3 + 3 h_1 with x = p √(β/m).
        let (beta, mass) = (2.0, 0.5);
        let b = BasisSet::build(
            &BasisSpec::new(1, 1, 5).with_beta(beta).with_mass(mass),
            &cos_potential(),
        )
        .unwrap();
        let s = (mass / beta).sqrt();
        let e = b.expand_function(|_, p, _| p[0].powi(3));
        for (n, expect) in [(1usize, 3.0 * s.powi(3)), (3, 6f64.sqrt() * s.powi(3))] {
            assert_relative_eq!(
                e.coefficients.values[b.column(0, &[n], 0).unwrap()],
                expect,
                epsilon = 1e-13
            );
        }
        let rest: f64 =
            e.coefficients.values.iter().map(|v| v * v).sum::<f64>() - (9.0 + 6.0) * s.powi(6);
        assert!(rest.abs() < 1e-12);
    }

    #[test]
    fn mismatched_bases_are_rejected() {
        let a = BasisSet::build(&BasisSpec::new(1, 2, 2), &Potential::zero(1)).unwrap();
        let b = BasisSet::build(&BasisSpec::new(1, 2, 2), &cos_potential()).unwrap();
        assert!(matches!(
            a.inner_product(&a.zeros(), &b.zeros()),
            Err(Error::BasisMismatch)
        ));
    }

    #[test]
    fn derivative_matrices_match_quadrature() {
        let pot = Potential::separable_cosine(2, 1, 1.0)
            .plus(&Potential::from_modes(2, [(vec![1, 1], 0.3, 0.1)]).unwrap());
        let b = BasisSet::build(&BasisSpec::new(2, 3, 1), &pot).unwrap();
        let pos = b.position();
        let tab = pos.tabulate(pos.quadrature_points(), 1);
        for l in 0..2 {
            let mut vw = tab.values.clone();
            for (x, &w) in pos.quadrature_weights().iter().enumerate() {
                vw.row_mut(x).scale_mut(w);
            }
            let quad = vw.transpose() * &tab.gradients[l];
            assert!(max_abs_diff(&quad, pos.derivative(l)) < 1e-10);
        }
    }

    #[test]
    fn column_layout_round_trips() {
        let b = BasisSet::build(&BasisSpec::new(2, 1, 2).with_xi(2), &Potential::zero(2)).unwrap();
        for col in 0..b.dimension() {
            let idx = b.decode(col);
            assert_eq!(b.column(idx.xi, &idx.momentum, idx.position), Some(col));
        }
        assert_eq!(b.column(0, &[0, 0], 0), None);
        assert_eq!(b.position().label(0), vec![0, 0]);
    }

    #[test]
    fn gauss_hermite_reproduces_gaussian_moments() {
        let (x, w) = gauss_hermite(8);
        let moment = |k: i32| -> f64 { x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum() };
        assert_relative_eq!(moment(0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(moment(2), 1.0, epsilon = 1e-13);
        assert_relative_eq!(moment(4), 3.0, epsilon = 1e-12);
        assert_relative_eq!(moment(14), 135135.0, max_relative = 1e-11);
    }
}
