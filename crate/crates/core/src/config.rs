//! Numerical settings threaded through every computation.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::tabulated::DEFAULT_NODES;
use crate::numerics::{QuadratureSpec, Tolerance};

/// Whether closed forms may short-circuit quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentRoute {
    #[default]
    ClosedFormFirst,
    /// Always integrate numerically; used to cross-check the closed forms.
    QuadratureOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    #[serde(flatten)]
    pub tol: Tolerance,
    pub route: MomentRoute,
    pub grid_nodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tol: Tolerance::default(),
            route: MomentRoute::ClosedFormFirst,
            grid_nodes: DEFAULT_NODES,
        }
    }
}

impl EvalConfig {
    pub fn quadrature_only() -> Self {
        EvalConfig {
            route: MomentRoute::QuadratureOnly,
            ..EvalConfig::default()
        }
    }

    pub fn with_route(mut self, route: MomentRoute) -> Self {
        self.route = route;
        self
    }

    pub fn closed_forms_allowed(&self) -> bool {
        self.route == MomentRoute::ClosedFormFirst
    }

    pub fn spec(&self) -> QuadratureSpec {
        QuadratureSpec::new(self.tol)
    }

    pub fn validate(&self) -> Result<()> {
        self.tol.validate()?;
        if self.grid_nodes < 16 {
            return Err(crate::Error::domain(format!(
                "grid_nodes must be at least 16, got {}",
                self.grid_nodes
            )));
        }
        Ok(())
    }
}
