//! The problem file format: a TOML document with sections `[meta]`, `[x]`,
//! `[y]`, `[q]`, `[g]`, `[solver]`, and `[outputs]`.
//!
//! The data model round-trips through serialization, unknown keys are
//! rejected by the parser with line/column diagnostics, and keys that do not
//! apply to the declared `kind` of a section are rejected by validation with
//! a message naming the section.

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use plqopt::catalog::{self, InstanceSpec};
use plqopt::composite::{CompositeProblem, SmoothMap};
use plqopt::plq::PlqFunction;
use plqopt::polyhedra::Polyhedron;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub meta: Meta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<QSpec>,
    pub g: GSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Outputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
}

/// A polyhedron description; which fields apply depends on `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    /// `box | interval | free | simplex | nonneg | singleton | halfspaces |
    /// nlp | cvar`
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_eq: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_eq: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_ineq: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_rhs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_eq: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_ineq: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// The quadratic term of the penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QSpec {
    /// `zero | identity | dense`
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<Vec<f64>>>,
}

/// The inner map: affine data or a catalog family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GSpec {
    /// `affine | catalog`
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    /// `goal | nlp_equality | cvar | lasso_taper | phase_retrieval |
    /// spatial_vi`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taper: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub producers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// `prox | approx | alm`; the command-line flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_backtracks: Option<usize>,
    /// Approximation schedule: `moreau | penalty`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_list: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_list: Option<Vec<f64>>,
    /// Augmented-Lagrangian parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

/// Parse a TOML problem document; syntax and unknown-key errors carry the
/// parser's line/column diagnostics.
pub fn parse(text: &str) -> Result<ProblemFile> {
    toml::from_str(text).map_err(|e| anyhow!("{e}"))
}

#[cfg_attr(not(test), allow(dead_code))]
pub fn serialize(file: &ProblemFile) -> Result<String> {
    toml::to_string(file).context("serializing the problem file")
}

fn require<T: Clone>(section: &str, field: &str, v: &Option<T>) -> Result<T> {
    v.clone().ok_or_else(|| anyhow!("in [{section}]: missing field '{field}'"))
}

fn forbid<T>(section: &str, kind: &str, field: &str, v: &Option<T>) -> Result<()> {
    if v.is_some() {
        bail!("in [{section}]: field '{field}' does not apply to kind '{kind}'");
    }
    Ok(())
}

fn matrix(section: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        bail!("in [{section}]: matrix must have at least one row");
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        bail!("in [{section}]: matrix rows have inconsistent lengths");
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl SetSpec {
    pub fn build(&self, section: &str) -> Result<Polyhedron> {
        let s = section;
        let k = self.kind.as_str();
        let only = |allowed: &[&str]| -> Result<()> {
            let check = |name: &str, present: bool| -> Result<()> {
                if present && !allowed.contains(&name) {
                    bail!("in [{s}]: field '{name}' does not apply to kind '{k}'");
                }
                Ok(())
            };
            check("dim", self.dim.is_some())?;
            check("lower", self.lower.is_some())?;
            check("upper", self.upper.is_some())?;
            check("point", self.point.is_some())?;
            check("a_eq", self.a_eq.is_some())?;
            check("b_eq", self.b_eq.is_some())?;
            check("d_ineq", self.d_ineq.is_some())?;
            check("d_rhs", self.d_rhs.is_some())?;
            check("m_eq", self.m_eq.is_some())?;
            check("q_ineq", self.q_ineq.is_some())?;
            check("probs", self.probs.is_some())?;
            check("alpha", self.alpha.is_some())?;
            Ok(())
        };
        let set = match k {
            "box" => {
                only(&["lower", "upper"])?;
                let lower = require(s, "lower", &self.lower)?;
                let upper = require(s, "upper", &self.upper)?;
                Polyhedron::box_set(&lower, &upper)
            }
            "interval" => {
                only(&["lower", "upper"])?;
                let lower = require(s, "lower", &self.lower)?;
                let upper = require(s, "upper", &self.upper)?;
                if lower.len() != 1 || upper.len() != 1 {
                    bail!("in [{s}]: interval bounds must have length 1");
                }
                Polyhedron::interval(lower[0], upper[0])
            }
            "free" => {
                only(&["dim"])?;
                return Ok(Polyhedron::free(require(s, "dim", &self.dim)?));
            }
            "simplex" => {
                only(&["dim"])?;
                Polyhedron::simplex(require(s, "dim", &self.dim)?)
            }
            "nonneg" => {
                only(&["dim"])?;
                Polyhedron::nonneg_orthant(require(s, "dim", &self.dim)?)
            }
            "singleton" => {
                only(&["point"])?;
                let p = require(s, "point", &self.point)?;
                Polyhedron::singleton(&DVector::from_vec(p))
            }
            "halfspaces" => {
                only(&["a_eq", "b_eq", "d_ineq", "d_rhs"])?;
                let a_eq = self.a_eq.clone().unwrap_or_default();
                let b_eq = self.b_eq.clone().unwrap_or_default();
                let d_ineq = self.d_ineq.clone().unwrap_or_default();
                let d_rhs = self.d_rhs.clone().unwrap_or_default();
                let dim = a_eq.first().map(|r| r.len()).or(d_ineq.first().map(|r| r.len()));
                let dim = dim.ok_or_else(|| anyhow!("in [{s}]: halfspaces need at least one row"))?;
                let am = if a_eq.is_empty() { DMatrix::zeros(0, dim) } else { matrix(s, &a_eq)? };
                let dm = if d_ineq.is_empty() { DMatrix::zeros(0, dim) } else { matrix(s, &d_ineq)? };
                Polyhedron::new(am, DVector::from_vec(b_eq), dm, DVector::from_vec(d_rhs))
            }
            "nlp" => {
                only(&["m_eq", "q_ineq"])?;
                Polyhedron::nlp_multiplier_set(
                    require(s, "m_eq", &self.m_eq)?,
                    require(s, "q_ineq", &self.q_ineq)?,
                )
            }
            "cvar" => {
                only(&["probs", "alpha"])?;
                let probs = require(s, "probs", &self.probs)?;
                let alpha = require(s, "alpha", &self.alpha)?;
                return catalog::cvar_multiplier_set(&probs, alpha)
                    .map_err(|e| anyhow!("in [{s}]: {e}"));
            }
            other => bail!("in [{s}]: unknown kind '{other}'"),
        };
        set.map_err(|e| anyhow!("in [{s}]: {e}"))
    }
}

impl QSpec {
    pub fn build(&self, m: usize) -> Result<DMatrix<f64>> {
        match self.kind.as_str() {
            "zero" => {
                forbid("q", "zero", "scale", &self.scale)?;
                forbid("q", "zero", "data", &self.data)?;
                Ok(DMatrix::zeros(m, m))
            }
            "identity" => {
                forbid("q", "identity", "data", &self.data)?;
                let scale = self.scale.unwrap_or(1.0);
                if scale < 0.0 {
                    bail!("in [q]: identity scale must be nonnegative");
                }
                Ok(DMatrix::identity(m, m) * scale)
            }
            "dense" => {
                forbid("q", "dense", "scale", &self.scale)?;
                let data = require("q", "data", &self.data)?;
                let mat = matrix("q", &data)?;
                if mat.nrows() != m || mat.ncols() != m {
                    bail!("in [q]: matrix must be {m}x{m} to match [y]");
                }
                for i in 0..m {
                    for j in (i + 1)..m {
                        if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 {
                            bail!("in [q]: matrix is not symmetric at ({i},{j})");
                        }
                    }
                }
                Ok(mat)
            }
            other => bail!("in [q]: unknown kind '{other}'"),
        }
    }
}

/// A fully assembled problem plus the catalog spec it came from, when any.
#[derive(Debug)]
pub struct BuiltProblem {
    pub name: String,
    pub problem: CompositeProblem,
    pub instance: Option<InstanceSpec>,
}

impl GSpec {
    fn catalog_spec(&self, seed: u64) -> Result<InstanceSpec> {
        let family = require("g", "family", &self.family)?;
        let spec = match family.as_str() {
            "goal" => InstanceSpec::Goal {
                n: require("g", "n", &self.n)?,
                m: require("g", "m", &self.m)?,
                alphas: require("g", "alphas", &self.alphas)?,
                targets: require("g", "targets", &self.targets)?,
                seed,
            },
            "nlp_equality" => InstanceSpec::NlpEquality { n: require("g", "n", &self.n)?, seed },
            "cvar" => InstanceSpec::Cvar {
                n: require("g", "n", &self.n)?,
                m: require("g", "m", &self.m)?,
                alpha: require("g", "alpha", &self.alpha)?,
                probs: self.probs.clone(),
                seed,
            },
            "lasso_taper" => InstanceSpec::LassoTaper {
                n: require("g", "n", &self.n)?,
                m: require("g", "m", &self.m)?,
                theta: require("g", "theta", &self.theta)?,
                taper: self.taper.unwrap_or(false),
                seed,
            },
            "phase_retrieval" => InstanceSpec::PhaseRetrieval {
                n: require("g", "n", &self.n)?,
                m: require("g", "m", &self.m)?,
                seed,
            },
            "spatial_vi" => InstanceSpec::SpatialVi {
                producers: require("g", "producers", &self.producers)?,
                regions: require("g", "regions", &self.regions)?,
                seed,
            },
            other => bail!("in [g]: unknown catalog family '{other}'"),
        };
        Ok(spec)
    }
}

/// Assemble the runtime problem from the parsed document.
pub fn build(file: &ProblemFile) -> Result<BuiltProblem> {
    match file.g.kind.as_str() {
        "catalog" => {
            for (name, present) in [
                ("x", file.x.is_some()),
                ("y", file.y.is_some()),
                ("q", file.q.is_some()),
            ] {
                if present {
                    bail!("section [{name}] must be omitted when [g] kind is 'catalog'");
                }
            }
            for (name, present) in
                [("a", file.g.a.is_some()), ("b", file.g.b.is_some())]
            {
                if present {
                    bail!("in [g]: field '{name}' does not apply to kind 'catalog'");
                }
            }
            let spec = file.g.catalog_spec(file.meta.seed)?;
            let problem = catalog::build(&spec).map_err(|e| anyhow!("in [g]: {e}"))?;
            Ok(BuiltProblem { name: file.meta.name.clone(), problem, instance: Some(spec) })
        }
        "affine" => {
            if file.g.family.is_some() {
                bail!("in [g]: field 'family' does not apply to kind 'affine'");
            }
            let a = matrix("g", &require("g", "a", &file.g.a)?)?;
            let b = DVector::from_vec(require("g", "b", &file.g.b)?);
            if a.nrows() != b.len() {
                bail!("in [g]: 'a' and 'b' row counts differ");
            }
            let xspec = file.x.as_ref().ok_or_else(|| anyhow!("section [x] is required"))?;
            let yspec = file.y.as_ref().ok_or_else(|| anyhow!("section [y] is required"))?;
            let x = xspec.build("x")?;
            let y = yspec.build("y")?;
            if a.ncols() != x.dim() {
                bail!("in [g]: 'a' must have {} columns to match [x]", x.dim());
            }
            if a.nrows() != y.dim() {
                bail!("in [g]: 'a' must have {} rows to match [y]", y.dim());
            }
            let q = match &file.q {
                Some(qs) => qs.build(y.dim())?,
                None => DMatrix::zeros(y.dim(), y.dim()),
            };
            let h = PlqFunction::new(y, q).map_err(|e| anyhow!("in [q] or [y]: {e}"))?;
            let g = SmoothMap::affine(a, b);
            let problem =
                CompositeProblem::new(x, g, h).map_err(|e| anyhow!("assembling the problem: {e}"))?;
            Ok(BuiltProblem { name: file.meta.name.clone(), problem, instance: None })
        }
        other => bail!("in [g]: unknown kind '{other}' (expected 'affine' or 'catalog')"),
    }
}
