//! JSON problem-file schema and its conversion into solver problems.

use std::collections::BTreeMap;

use serde::Deserialize;

use chebdq::bvp_linear::{BoundaryCondition, LinearProblem, Side};
use chebdq::bvp_nonlinear::{NewtonConfig, NonlinearProblem};
use chebdq::expr::parse;
use chebdq::{Error, Result};

/// On-disk problem description. Exactly one of `coefficients`+`rhs`
/// (linear) or `residual` (nonlinear) must be present. The domain is either
/// an explicit `[a, b]` pair or, for problems posed on a half line and
/// truncated, an `x_max` standing for `[0, x_max]`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub order: usize,
    #[serde(default)]
    pub coefficients: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub rhs: Option<String>,
    #[serde(default)]
    pub residual: Option<String>,
    #[serde(default)]
    pub domain: Option<[f64; 2]>,
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub conditions: Vec<ConditionFile>,
    #[serde(default)]
    pub newton: Option<NewtonFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionFile {
    pub side: String,
    pub deriv: usize,
    pub value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonFile {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

/// A problem loaded from a file, ready to solve.
pub enum LoadedProblem {
    Linear(LinearProblem),
    Nonlinear(NonlinearProblem, NewtonConfig),
}

/// Parse and validate a problem file. `eps_override` (from `--eps`) wins
/// over the file's `epsilon`; one of the two must be present.
pub fn parse_problem(text: &str, eps_override: Option<f64>) -> Result<LoadedProblem> {
    let pf: ProblemFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidProblem(format!("problem file: {e}")))?;

    let epsilon = eps_override.or(pf.epsilon).ok_or_else(|| {
        Error::InvalidProblem(
            "epsilon missing: pass --eps or add an \"epsilon\" field".to_string(),
        )
    })?;

    let domain = match (pf.domain, pf.x_max) {
        (Some([a, b]), None) => (a, b),
        (None, Some(x_max)) => (0.0, x_max),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidProblem(
                "give either \"domain\" or \"x_max\", not both".to_string(),
            ))
        }
        (None, None) => {
            return Err(Error::InvalidProblem(
                "missing \"domain\" (or \"x_max\" for a truncated half line)".to_string(),
            ))
        }
    };

    let conditions = pf
        .conditions
        .iter()
        .map(|c| {
            let side = match c.side.as_str() {
                "a" => Side::A,
                "b" => Side::B,
                other => {
                    return Err(Error::InvalidProblem(format!(
                        "condition side must be \"a\" or \"b\", got {other:?}"
                    )))
                }
            };
            Ok(BoundaryCondition {
                side,
                derivative_order: c.deriv,
                value: c.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    match (&pf.coefficients, &pf.residual) {
        (Some(coeffs), None) => {
            let rhs_text = pf.rhs.as_deref().ok_or_else(|| {
                Error::InvalidProblem("linear problems need an \"rhs\" expression".to_string())
            })?;
            let mut coefficients = BTreeMap::new();
            for (key, text) in coeffs {
                let order: usize = key.parse().map_err(|_| {
                    Error::InvalidProblem(format!(
                        "coefficient key {key:?} is not a derivative order"
                    ))
                })?;
                coefficients.insert(order, parse(text)?);
            }
            if pf.newton.is_some() {
                return Err(Error::InvalidProblem(
                    "\"newton\" settings apply only to nonlinear problems".to_string(),
                ));
            }
            let p = LinearProblem {
                order: pf.order,
                coefficients,
                rhs: parse(rhs_text)?,
                domain,
                epsilon,
                conditions,
            };
            p.validate()?;
            Ok(LoadedProblem::Linear(p))
        }
        (None, Some(residual_text)) => {
            if pf.rhs.is_some() {
                return Err(Error::InvalidProblem(
                    "nonlinear problems take no \"rhs\"; fold it into \"residual\"".to_string(),
                ));
            }
            let p = NonlinearProblem {
                order: pf.order,
                residual: parse(residual_text)?,
                domain,
                epsilon,
                conditions,
            };
            p.validate()?;
            let mut cfg = NewtonConfig::default();
            if let Some(nf) = &pf.newton {
                if let Some(tol) = nf.tol {
                    cfg.tol = tol;
                }
                if let Some(max_iter) = nf.max_iter {
                    cfg.max_iter = max_iter;
                }
            }
            Ok(LoadedProblem::Nonlinear(p, cfg))
        }
        (Some(_), Some(_)) => Err(Error::InvalidProblem(
            "give either \"coefficients\"+\"rhs\" (linear) or \"residual\" (nonlinear), not both"
                .to_string(),
        )),
        (None, None) => Err(Error::InvalidProblem(
            "missing equation: give \"coefficients\"+\"rhs\" or \"residual\"".to_string(),
        )),
    }
}
