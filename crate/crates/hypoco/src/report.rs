//! Serialized report shapes. Field order is fixed by the structs, so equal
//! inputs give byte-identical JSON and CSV.

use serde::Serialize;

use hypoco_core::schur::BoundReport;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundJson {
    pub model: &'static str,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub d: usize,
    pub n_q: usize,
    pub n_p: usize,
    pub n_xi: Option<usize>,
    pub s: f64,
    pub a: f64,
    #[serde(rename = "norm_S11")]
    pub norm_s11: f64,
    #[serde(rename = "norm_R22")]
    pub norm_r22: f64,
    #[serde(rename = "norm_L21A10inv")]
    pub norm_l21_a10_inv: f64,
    pub bound: f64,
    pub exact: f64,
    pub margin: f64,
    pub converged: bool,
    pub model_bound: Option<f64>,
    #[serde(rename = "X2")]
    pub x2: f64,
    #[serde(rename = "K_nu2")]
    pub k_nu2: f64,
    pub refinement_change: Option<f64>,
}

impl From<&BoundReport> for BoundJson {
    fn from(r: &BoundReport) -> Self {
        BoundJson {
            model: r.model.name(),
            gamma: r.gamma,
            epsilon: r.epsilon,
            d: r.d,
            n_q: r.n_q,
            n_p: r.n_p,
            n_xi: r.n_xi,
            s: r.s,
            a: r.a,
            norm_s11: r.norm_s11,
            norm_r22: r.norm_r22,
            norm_l21_a10_inv: r.norm_x21,
            bound: r.bound,
            exact: r.exact,
            margin: r.margin,
            converged: r.converged,
            model_bound: r.model_bound,
            x2: r.x2,
            k_nu2: r.k_nu2,
            refinement_change: r.refinement_change,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsJson {
    #[serde(rename = "K_nu2")]
    pub k_nu2: f64,
    #[serde(rename = "K_kappa2")]
    pub k_kappa2: f64,
    #[serde(rename = "lambda_min_M")]
    pub lambda_min_m: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    #[serde(rename = "K_hessian")]
    pub k_hessian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioJson {
    pub case: &'static str,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropositionJson {
    pub case: &'static str,
    #[serde(rename = "X2")]
    pub x2: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmasJson {
    pub seed: u64,
    pub samples: usize,
    pub bochner_max_residual: f64,
    pub villani_max_ratio: f64,
    pub control_h2: Vec<RatioJson>,
    pub proposition: Vec<PropositionJson>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualJson {
    pub identity: &'static str,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyJson {
    pub model: &'static str,
    pub dimension: usize,
    pub tol_identity: f64,
    pub residuals: Vec<ResidualJson>,
    pub s_numeric: f64,
    pub s_analytic: f64,
    pub a: f64,
    pub dims_h0_h1_h2: [usize; 3],
    /// Adaptive Langevin only.
    pub a_star_a_residual: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullReport {
    pub seed: u64,
    pub verify: VerifyJson,
    pub constants: ConstantsJson,
    pub lemmas: LemmasJson,
    pub bounds: Vec<BoundJson>,
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub model: &'static str,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub d: usize,
    pub n_q: usize,
    pub n_p: usize,
    pub s: f64,
    pub a: f64,
    pub bound: f64,
    pub exact: f64,
    pub margin: f64,
    pub converged: bool,
}

impl From<&BoundReport> for SweepRow {
    fn from(r: &BoundReport) -> Self {
        SweepRow {
            model: r.model.name(),
            gamma: r.gamma,
            epsilon: r.epsilon,
            d: r.d,
            n_q: r.n_q,
            n_p: r.n_p,
            s: r.s,
            a: r.a,
            bound: r.bound,
            exact: r.exact,
            margin: r.margin,
            converged: r.converged,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("sweep rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV is UTF-8")
}
