//! JSON report emitted by `plqopt solve`. Field order is fixed by the struct
//! so identical runs serialize byte-identically; `wall_time_ms` is the only
//! nondeterministic field and sits last so consumers can strip it.

use serde::Serialize;

use plqopt::composite::StationarityTriple;

#[derive(Debug, Serialize)]
pub struct ResidualParts {
    pub r_g: f64,
    pub r_y: f64,
    pub r_x: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub name: String,
    pub method: String,
    pub termination: String,
    pub converged: bool,
    pub iterations: usize,
    pub phi: f64,
    pub residual: f64,
    pub residual_parts: ResidualParts,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub wall_time_ms: f64,
}

impl Report {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        method: &str,
        termination: String,
        tol: f64,
        iterations: usize,
        phi: f64,
        triple: &StationarityTriple,
        wall_time_ms: f64,
    ) -> Self {
        Report {
            name: name.to_string(),
            method: method.to_string(),
            termination,
            converged: triple.residual <= tol,
            iterations,
            phi,
            residual: triple.residual,
            residual_parts: ResidualParts { r_g: triple.r_g, r_y: triple.r_y, r_x: triple.r_x },
            x: triple.x.iter().cloned().collect(),
            y: triple.y.iter().cloned().collect(),
            z: triple.z.iter().cloned().collect(),
            wall_time_ms,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
