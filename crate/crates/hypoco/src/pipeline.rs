//! Subcommand bodies. Each returns data; printing and exit codes are the
//! caller's business, except for [`exit_code`] and [`bound_status`] which
//! encode the contract: 0 pass, 1 invariant violation, 2 configuration
//! error, 3 numerical failure or unconverged result.

use std::fmt;

use rayon::prelude::*;

use hypoco_core::basis::{BasisSet, BasisSpec};
use hypoco_core::constants::{
    admissible_cases, default_growth_grid, estimate_growth_constants, exp_moments, growth_c1,
    lambda_min_m, poincare_constant_kappa, poincare_constant_nu, run_lemma_suite, GrowthConstants,
};
use hypoco_core::models::{
    adl_a_star_a_residual, norm_x_squared_sparse, proposition_bound, PropositionCase,
};
use hypoco_core::operators::{
    verify_structural_assumptions, KineticEnergy, ModelKind, ModelOperators,
};
use hypoco_core::schur::{
    build_decomposition, macroscopic_coercivity, BoundReport, DenseGenerator,
};
use hypoco_core::{Error, ErrorKind};

use crate::config::{parse_config_str, ConfigError, RunConfig};
use crate::container::{Container, ContainerError, Section};
use crate::report::{
    BoundJson, ConstantsJson, FullReport, LemmasJson, PropositionJson, RatioJson, ResidualJson,
    VerifyJson,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Slack on the proposition inequality.
pub const PROPOSITION_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Invariant => EXIT_INVARIANT,
        ErrorKind::Configuration => EXIT_CONFIG,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: exit_code(e.kind()),
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

impl From<ContainerError> for CliError {
    fn from(e: ContainerError) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: format!("io: {e}"),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn first_gamma(cfg: &RunConfig) -> f64 {
    cfg.gamma[0]
}

/// Basis and operators for the first configured friction, packed into a
/// container together with the configuration that produced them.
pub fn assemble(cfg: &RunConfig) -> Result<Container> {
    let basis = BasisSet::build(&cfg.basis_spec(), &cfg.potential)?;
    let model = cfg.model_spec(first_gamma(cfg), None);
    let ops = ModelOperators::assemble(&basis, &model)?;
    let mut c = Container::default();
    let metadata = format!(
        "model={}\ngamma={}\nepsilon={}\ndimension={}\nposition_functions={}\nbasis_id={:016x}\n",
        model.kind.name(),
        model.gamma,
        model.epsilon.map_or("none".to_string(), |e| e.to_string()),
        ops.dimension(),
        basis.n_q_funcs(),
        basis.id(),
    );
    c.push("metadata", Section::Text(metadata));
    c.push("config", Section::Text(cfg.source.clone()));
    let coeff = basis.position().coefficients();
    c.push(
        "basis.position_coefficients",
        Section::Dense(
            (0..coeff.nrows())
                .flat_map(|i| (0..coeff.ncols()).map(move |j| coeff[(i, j)]))
                .collect(),
        ),
    );
    c.push(
        "basis.quadrature_weights",
        Section::Dense(basis.position().quadrature_weights().to_vec()),
    );
    c.push("A", Section::Csr(ops.a.clone()));
    c.push("S", Section::Csr(ops.s.clone()));
    c.push("Pi0", Section::Csr(ops.pi0.clone()));
    c.push("R", Section::Csr(ops.r.clone()));
    Ok(c)
}

/// Rebuilds the run from a bundle, checking that reassembly reproduces the
/// stored operators exactly.
pub fn config_from_bundle(bundle: &Container) -> Result<RunConfig> {
    let mut cfg = parse_config_str(bundle.text("config")?)?;
    let meta = bundle.text("metadata")?;
    for line in meta.lines() {
        if let Some(g) = line.strip_prefix("gamma=") {
            let g: f64 = g.parse().map_err(|_| CliError {
                code: EXIT_CONFIG,
                message: "bundle: bad gamma".into(),
            })?;
            cfg.gamma = vec![g];
        }
    }
    let rebuilt = assemble(&cfg)?;
    for name in ["A", "S", "Pi0", "R"] {
        let stored = bundle.operator(name)?;
        let fresh = rebuilt.operator(name)?;
        if stored.shape() != fresh.shape() || stored.max_abs_diff(fresh) > 0.0 {
            return Err(Error::BasisMismatch.into());
        }
    }
    Ok(cfg)
}

pub fn verify(cfg: &RunConfig) -> Result<VerifyJson> {
    let basis = BasisSet::build(&cfg.basis_spec(), &cfg.potential)?;
    let model = cfg.model_spec(first_gamma(cfg), None);
    let ops = ModelOperators::assemble(&basis, &model)?;
    let report = verify_structural_assumptions(&ops, cfg.mass, cfg.tol_identity)?;
    let gen = DenseGenerator::from_operators(&ops);
    let dec = build_decomposition(&gen, cfg.rank_tol)?;
    let (n0, n1, n2) = dec.dims();
    let a_star_a = match model.kind {
        ModelKind::AdaptiveLangevin => {
            Some(adl_a_star_a_residual(&basis, &ops, model.epsilon.unwrap())?)
        }
        _ => None,
    };
    Ok(VerifyJson {
        model: model.kind.name(),
        dimension: ops.dimension(),
        tol_identity: cfg.tol_identity,
        residuals: report
            .residuals
            .iter()
            .map(|&(identity, residual)| ResidualJson { identity, residual })
            .collect(),
        s_numeric: report.s_numeric,
        s_analytic: report.s_analytic,
        a: macroscopic_coercivity(&dec),
        dims_h0_h1_h2: [n0, n1, n2],
        a_star_a_residual: a_star_a,
        passed: true,
    })
}

/// Growth constants, with `c1` recomputed when `c2` is fixed by the config.
pub fn growth_constants(cfg: &RunConfig) -> GrowthConstants {
    let m = default_growth_grid(&cfg.potential);
    let mut g = estimate_growth_constants(&cfg.potential, cfg.beta, cfg.torus_length, m);
    if let Some(c2) = cfg.c2 {
        let (c1, arg) = growth_c1(&cfg.potential, cfg.beta, cfg.torus_length, m, c2);
        g.c1 = c1;
        g.c2 = c2;
        g.c1_maximizer = arg;
    }
    g
}

fn position_basis(cfg: &RunConfig) -> Result<BasisSet> {
    let spec = BasisSpec::new(cfg.d, cfg.n_q, 1)
        .with_beta(cfg.beta)
        .with_mass(cfg.mass)
        .with_torus_length(cfg.torus_length)
        .with_tol_identity(cfg.tol_identity)
        .with_max_dim(cfg.max_dim);
    Ok(BasisSet::build(&spec, &cfg.potential)?)
}

pub fn constants(cfg: &RunConfig) -> Result<ConstantsJson> {
    let basis = position_basis(cfg)?;
    let k_nu2 = poincare_constant_nu(&basis)?.k2;
    let g = growth_constants(cfg);
    Ok(ConstantsJson {
        k_nu2,
        k_kappa2: poincare_constant_kappa(cfg.beta, cfg.mass).k2,
        lambda_min_m: lambda_min_m(&KineticEnergy::quadratic(cfg.mass), cfg.beta).value(),
        c1: g.c1,
        c2: g.c2,
        c3: g.c3,
        k_hessian: g.k_hessian,
    })
}

/// `X² = ‖Π₊L_ham²Π0(A*A)⁻¹‖²` on the Langevin basis of the configured
/// cutoffs, through sparse products only.
pub fn hamiltonian_x2(cfg: &RunConfig) -> Result<f64> {
    let spec = BasisSpec::new(cfg.d, cfg.n_q, cfg.n_p)
        .with_beta(cfg.beta)
        .with_mass(cfg.mass)
        .with_torus_length(cfg.torus_length)
        .with_tol_identity(cfg.tol_identity)
        .with_max_dim(cfg.max_dim);
    let basis = BasisSet::build(&spec, &cfg.potential)?;
    let ops = ModelOperators::assemble(&basis, &hypoco_core::ModelSpec::langevin(1.0))?;
    Ok(norm_x_squared_sparse(&ops.hamiltonian, &ops.zero_mask())?)
}

pub fn lemmas(cfg: &RunConfig, seed: u64, suite: usize) -> Result<LemmasJson> {
    let basis = position_basis(cfg)?;
    let g = growth_constants(cfg);
    let suite_report = run_lemma_suite(&basis, &g, seed, suite, suite)?;
    let passed_lemmas = suite_report.check().is_ok();

    let k_nu2 = poincare_constant_nu(&basis)?.k2;
    let x2 = hamiltonian_x2(cfg)?;
    let mut cases = admissible_cases(&g, cfg.beta, cfg.d);
    if let Some(c_lsi) = cfg.c_lsi {
        let moments = exp_moments(
            &cfg.potential,
            cfg.beta,
            cfg.torus_length,
            g.c3,
            c_lsi,
            default_growth_grid(&cfg.potential),
        );
        cases.push((
            "lsi",
            PropositionCase::Lsi {
                c3: g.c3,
                c_lsi,
                d: cfg.d,
                exp_moments: moments,
            },
        ));
    }
    let mut proposition = Vec::new();
    for (name, case) in &cases {
        let bound = proposition_bound(case, k_nu2)?;
        proposition.push(PropositionJson {
            case: name,
            x2,
            bound,
            holds: x2 <= bound + PROPOSITION_SLACK,
        });
    }
    let passed = passed_lemmas && proposition.iter().all(|p| p.holds);
    Ok(LemmasJson {
        seed,
        samples: suite,
        bochner_max_residual: suite_report.bochner_max_residual,
        villani_max_ratio: suite_report.villani_max_ratio,
        control_h2: suite_report
            .control_h2_max_ratio
            .iter()
            .map(|&(case, max_ratio)| RatioJson { case, max_ratio })
            .collect(),
        proposition,
        passed,
    })
}

/// Refined bound reports over the friction × ε grid, in input order; the
/// points run on the current rayon pool.
pub fn sweep(cfg: &RunConfig, gammas: &[f64], epsilons: &[f64]) -> Result<Vec<BoundReport>> {
    let eps: Vec<Option<f64>> = if cfg.model == ModelKind::AdaptiveLangevin && !epsilons.is_empty()
    {
        epsilons.iter().copied().map(Some).collect()
    } else {
        vec![cfg.epsilon]
    };
    let points: Vec<(f64, Option<f64>)> = gammas
        .iter()
        .flat_map(|&g| eps.iter().map(move |&e| (g, e)))
        .collect();
    points
        .par_iter()
        .map(|&(g, e)| {
            cfg.study(g, e)
                .report()
                .map(|(r, _)| r)
                .map_err(CliError::from)
        })
        .collect()
}

/// 1 if a converged point violates the bound, else 3 if any point is
/// unconverged, else 0.
pub fn bound_status(reports: &[BoundReport]) -> i32 {
    if reports
        .iter()
        .any(|r| r.converged && (r.margin.is_nan() || r.margin < 1.0))
    {
        EXIT_INVARIANT
    } else if reports.iter().any(|r| !r.converged) {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    }
}

pub fn full_report(cfg: &RunConfig, seed: u64, suite: usize) -> Result<FullReport> {
    let verify = verify(cfg)?;
    let constants = constants(cfg)?;
    let lemmas = lemmas(cfg, seed, suite)?;
    let bounds = sweep(cfg, &cfg.gamma, &[])?;
    Ok(FullReport {
        seed,
        verify,
        constants,
        lemmas,
        bounds: bounds.iter().map(BoundJson::from).collect(),
    })
}
