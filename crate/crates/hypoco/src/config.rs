//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment. Every problem in a file is reported, not only the first.
//!
//! ```text
//! model = langevin
//! d = 1
//! beta = 1
//! gamma = 0.01:100:log15
//! mass = 1
//! potential = 1:0.5,0        # v_1 = v_-1 = 1/2, i.e. V = cos q
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use hypoco_core::basis::{BasisSpec, Potential, DEFAULT_MAX_DIM, DEFAULT_TOL_IDENTITY};
use hypoco_core::operators::{ModelKind, ModelSpec};
use hypoco_core::schur::DEFAULT_RANK_TOL;
use hypoco_core::study::{Study, DEFAULT_CONV_TOL};

const KEYS: &[&str] = &[
    "model",
    "d",
    "beta",
    "gamma",
    "mass",
    "epsilon",
    "potential",
    "n_q",
    "n_p",
    "n_xi",
    "torus_length",
    "tol_identity",
    "conv_tol",
    "rank_tol",
    "seed",
    "c2",
    "c_lsi",
    "max_dim",
    "outputs",
];
const REQUIRED: &[&str] = &["model", "d", "beta", "gamma", "mass", "potential"];

pub const DEFAULT_N_Q: usize = 8;
pub const DEFAULT_N_P: usize = 24;
pub const DEFAULT_N_XI: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub errors: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config: {}", self.errors.join("; "))
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub d: usize,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub mass: f64,
    pub epsilon: Option<f64>,
    pub potential: Potential,
    pub n_q: usize,
    pub n_p: usize,
    pub n_xi: usize,
    pub torus_length: f64,
    pub tol_identity: f64,
    pub conv_tol: f64,
    pub rank_tol: f64,
    pub seed: u64,
    /// Fixes `c2` instead of selecting it.
    pub c2: Option<f64>,
    pub c_lsi: Option<f64>,
    pub max_dim: usize,
    pub outputs: Option<PathBuf>,
    /// The file as read, kept so operator bundles can be traced back.
    pub source: String,
}

/// `"a:b:logN"` gives `N` log-spaced values from `a` to `b`; a plain number
/// gives one value. All values must be positive.
pub fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let positive = |s: &str| -> Result<f64, String> {
        let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(format!("`{s}` must be positive"))
        }
    };
    match parts.as_slice() {
        [single] => Ok(vec![positive(single)?]),
        [a, b, spec] => {
            let (lo, hi) = (positive(a)?, positive(b)?);
            let n: usize = spec
                .strip_prefix("log")
                .and_then(|n| n.parse().ok())
                .filter(|&n| n >= 1)
                .ok_or_else(|| format!("range step `{spec}` must look like log<N>"))?;
            if n == 1 {
                return Ok(vec![lo]);
            }
            // Base 10 so that decades such as 0.1:10:log3 land on exact powers.
            let (l0, l1) = (lo.log10(), hi.log10());
            Ok((0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else if i == 0 {
                        lo
                    } else {
                        10f64.powf(l0 + (l1 - l0) * i as f64 / (n - 1) as f64)
                    }
                })
                .collect())
        }
        _ => Err(format!("`{text}` is neither a number nor a:b:logN")),
    }
}

/// `"k:re,im; k:re,im"` where `k` has `d` integer components separated by
/// spaces or commas. Missing `-k` partners are filled with conjugates.
/// `0` or an empty string is the zero potential.
pub fn parse_potential(text: &str, d: usize) -> Result<Potential, String> {
    let text = text.trim();
    if text.is_empty() || text == "0" {
        return Ok(Potential::zero(d));
    }
    let mut entries = Vec::new();
    for entry in text.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (k, c) = entry
            .split_once(':')
            .ok_or_else(|| format!("potential entry `{entry}` lacks `:`"))?;
        let k: Vec<i32> = k
            .split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| format!("bad wavevector component `{s}`"))
            })
            .collect::<Result<_, _>>()?;
        let (re, im) = c
            .split_once(',')
            .ok_or_else(|| format!("potential coefficient `{c}` must be `re,im`"))?;
        let re: f64 = re
            .trim()
            .parse()
            .map_err(|_| format!("bad real part `{re}`"))?;
        let im: f64 = im
            .trim()
            .parse()
            .map_err(|_| format!("bad imaginary part `{im}`"))?;
        entries.push((k, re, im));
    }
    Potential::from_modes(d, entries).map_err(|e| e.to_string())
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    parse_config_with(path, &[])
}

/// Reads a file and applies command-line overrides on top of it.
pub fn parse_config_with(
    path: &Path,
    overrides: &[(&str, String)],
) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        errors: vec![format!("cannot read {}: {e}", path.display())],
    })?;
    parse_config_str(&apply_overrides(&text, overrides))
}

/// Comments out overridden keys and appends the new values, so the result
/// is itself a valid configuration describing the effective run.
pub fn apply_overrides(text: &str, overrides: &[(&str, String)]) -> String {
    let mut out = String::new();
    for line in text.lines() {
        let key = line
            .split('#')
            .next()
            .unwrap_or("")
            .split_once('=')
            .map(|(k, _)| k.trim());
        if key.is_some_and(|k| overrides.iter().any(|(o, _)| *o == k)) {
            out.push_str("# overridden: ");
        }
        out.push_str(line);
        out.push('\n');
    }
    for (k, v) in overrides {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut errors = Vec::new();
    let mut values: BTreeMap<&str, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected key = value", lineno + 1));
            continue;
        };
        let key = key.trim();
        match KEYS.iter().find(|k| **k == key) {
            None => errors.push(format!("line {}: unknown key `{key}`", lineno + 1)),
            Some(k) => {
                if values.insert(k, value.trim().to_string()).is_some() {
                    errors.push(format!("line {}: duplicate key `{key}`", lineno + 1));
                }
            }
        }
    }
    for key in REQUIRED {
        if !values.contains_key(key) {
            errors.push(format!("missing mandatory key `{key}`"));
        }
    }

    let mut number = |key: &str, default: f64, positive: bool| -> f64 {
        match values.get(key) {
            None => default,
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() && (!positive || x > 0.0) => x,
                Ok(_) => {
                    errors.push(format!(
                        "`{key}` must be {}",
                        if positive { "positive" } else { "finite" }
                    ));
                    default
                }
                Err(_) => {
                    errors.push(format!("`{key}` = `{v}` is not a number"));
                    default
                }
            },
        }
    };
    let beta = number("beta", 1.0, true);
    let mass = number("mass", 1.0, true);
    let torus_length = number("torus_length", 2.0 * std::f64::consts::PI, true);
    let tol_identity = number("tol_identity", DEFAULT_TOL_IDENTITY, true);
    let conv_tol = number("conv_tol", DEFAULT_CONV_TOL, true);
    let rank_tol = number("rank_tol", DEFAULT_RANK_TOL, true);
    let epsilon = values
        .contains_key("epsilon")
        .then(|| number("epsilon", 1.0, true));
    let c_lsi = values
        .contains_key("c_lsi")
        .then(|| number("c_lsi", 1.0, true));
    let c2 = values.contains_key("c2").then(|| number("c2", 0.0, false));

    let mut integer = |key: &str, default: u64, min: u64| -> u64 {
        match values.get(key) {
            None => default,
            Some(v) => match v.parse::<u64>() {
                Ok(x) if x >= min => x,
                _ => {
                    errors.push(format!("`{key}` = `{v}` must be an integer >= {min}"));
                    default
                }
            },
        }
    };
    let d = integer("d", 1, 1) as usize;
    let n_q = integer("n_q", DEFAULT_N_Q as u64, 1) as usize;
    let n_p = integer("n_p", DEFAULT_N_P as u64, 1) as usize;
    let n_xi = integer("n_xi", DEFAULT_N_XI as u64, 1) as usize;
    let seed = integer("seed", 0, 0);
    let max_dim = integer("max_dim", DEFAULT_MAX_DIM as u64, 1) as usize;

    if let Some(c2) = c2 {
        if !(0.0..=1.0).contains(&c2) {
            errors.push(format!("`c2` = {c2} must lie in [0, 1]"));
        }
    }
    let model = match values.get("model") {
        None => ModelKind::Langevin,
        Some(m) => ModelKind::from_name(m).unwrap_or_else(|| {
            errors.push(format!(
                "unknown model `{m}` (langevin, boltzmann_rhmc, adaptive_langevin)"
            ));
            ModelKind::Langevin
        }),
    };
    if model == ModelKind::AdaptiveLangevin {
        if epsilon.is_none() {
            errors.push("adaptive_langevin needs `epsilon`".into());
        }
        if mass != 1.0 {
            errors.push("adaptive_langevin is defined for mass = 1".into());
        }
    }
    let gamma = match values.get("gamma") {
        None => vec![1.0],
        Some(g) => parse_range(g).unwrap_or_else(|e| {
            errors.push(format!("`gamma`: {e}"));
            vec![1.0]
        }),
    };
    let potential = match values.get("potential") {
        None => Potential::zero(d),
        Some(p) => parse_potential(p, d).unwrap_or_else(|e| {
            errors.push(format!("`potential`: {e}"));
            Potential::zero(d)
        }),
    };
    let outputs = values.get("outputs").map(PathBuf::from);

    if !errors.is_empty() {
        return Err(ConfigError { errors });
    }
    Ok(RunConfig {
        model,
        d,
        beta,
        gamma,
        mass,
        epsilon,
        potential,
        n_q,
        n_p,
        n_xi,
        torus_length,
        tol_identity,
        conv_tol,
        rank_tol,
        seed,
        c2,
        c_lsi,
        max_dim,
        outputs,
        source: text.to_string(),
    })
}

impl RunConfig {
    pub fn basis_spec(&self) -> BasisSpec {
        let spec = BasisSpec::new(self.d, self.n_q, self.n_p)
            .with_beta(self.beta)
            .with_mass(self.mass)
            .with_torus_length(self.torus_length)
            .with_tol_identity(self.tol_identity)
            .with_max_dim(self.max_dim);
        if self.model == ModelKind::AdaptiveLangevin {
            spec.with_xi(self.n_xi)
        } else {
            spec
        }
    }

    pub fn model_spec(&self, gamma: f64, epsilon: Option<f64>) -> ModelSpec {
        match self.model {
            ModelKind::Langevin => ModelSpec::langevin(gamma),
            ModelKind::BoltzmannRhmc => ModelSpec::rhmc(gamma),
            ModelKind::AdaptiveLangevin => {
                ModelSpec::adaptive_langevin(gamma, epsilon.or(self.epsilon).unwrap_or(1.0))
            }
        }
    }

    pub fn study(&self, gamma: f64, epsilon: Option<f64>) -> Study {
        let mut s = Study::new(
            self.basis_spec(),
            self.potential.clone(),
            self.model_spec(gamma, epsilon),
        );
        s.rank_tol = self.rank_tol;
        s.conv_tol = self.conv_tol;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "model = langevin\nd = 1\nbeta = 1\ngamma = 1\nmass = 1\npotential = 1:0.5,0\n";

    #[test]
    fn minimal_config_is_cosine() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.potential, Potential::separable_cosine(1, 1, 1.0));
        assert_eq!(c.gamma, vec![1.0]);
        assert_eq!((c.n_q, c.n_p), (DEFAULT_N_Q, DEFAULT_N_P));
    }

    #[test]
    fn log_range_endpoints_and_count() {
        let g = parse_range("0.01:100:log15").unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!((g[0], g[14]), (0.01, 100.0));
        assert_eq!(g[7], 1.0);
        assert_eq!(parse_range("0.1:10:log3").unwrap(), vec![0.1, 1.0, 10.0]);
        assert!(parse_range("0:1:log3").is_err());
    }

    #[test]
    fn all_errors_are_collected() {
        let text =
            "model = nope\nd = 1\nbeta = -1\nc2 = 1.5\nfoo = 3\npotential = 1:0.5,0;-1:0.4,0\n";
        let e = parse_config_str(text).unwrap_err();
        let joined = e.errors.join("\n");
        for needle in [
            "unknown model",
            "`beta` must be positive",
            "[0, 1]",
            "unknown key `foo`",
            "conjugate",
            "missing mandatory key `gamma`",
            "missing mandatory key `mass`",
        ] {
            assert!(joined.contains(needle), "{needle} not in {joined}");
        }
    }

    #[test]
    fn adaptive_langevin_requirements() {
        let text =
            "model = adaptive_langevin\nd = 1\nbeta = 1\ngamma = 1\nmass = 2\npotential = 0\n";
        let e = parse_config_str(text).unwrap_err();
        assert_eq!(e.errors.len(), 2);
    }

    #[test]
    fn overrides_replace_keys() {
        let text = apply_overrides(
            MINIMAL,
            &[("gamma", "0.1:10:log3".into()), ("model", "rhmc".into())],
        );
        let c = parse_config_str(&text).unwrap();
        assert_eq!(c.model, ModelKind::BoltzmannRhmc);
        assert_eq!(c.gamma.len(), 3);
        assert_eq!(parse_config_str(&c.source).unwrap(), c);
    }

    #[test]
    fn two_dimensional_potential_entries() {
        let v = parse_potential("1 0:0.5,0; 0,1:0.5,0", 2).unwrap();
        assert_eq!(v, Potential::separable_cosine(2, 1, 1.0));
        assert!(parse_potential("1:0.5,0", 2).is_err());
    }
}
