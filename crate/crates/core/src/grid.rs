//! Phase-space discretization: a truncated spatial interval and a compact
//! symmetric velocity set with quadrature weights.
//!
//! All integrals over the velocity set V and over space become weighted sums
//! on these grids. The velocity grid is built by the midpoint rule so that
//! node/weight symmetry holds exactly: for every node v there is a node -v
//! with the same weight, hence `sum(v_i * w_i) == 0` in exact arithmetic.

use crate::error::{Result, SimError};
use serde::{Deserialize, Serialize};

/// Compact symmetric velocity set `[-v_max, v_max]` with quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    v_max: f64,
}

impl VelocityGrid {
    /// Midpoint-rule discretization with `nv` cells on `[-v_max, v_max]`.
    ///
    /// `nv` must be even and at least 2 so the node set is symmetric and
    /// never contains v = 0 (a stagnant characteristic would never move in
    /// the transport solver).
    pub fn midpoint(nv: usize, v_max: f64) -> Result<Self> {
        if nv < 2 || !nv.is_multiple_of(2) {
            return Err(SimError::Config(format!(
                "velocity grid needs an even node count >= 2 to stay symmetric, got nv = {nv}"
            )));
        }
        if !(v_max > 0.0) {
            return Err(SimError::Config(format!(
                "velocity half-width must be positive, got v_max = {v_max}"
            )));
        }
        let dv = 2.0 * v_max / nv as f64;
        // build the positive half and mirror it so the node pairing
        // v <-> -v is exact in floating point
        let mut nodes = vec![0.0; nv];
        for k in 0..nv / 2 {
            let positive = (k as f64 + 0.5) * dv;
            nodes[nv / 2 + k] = positive;
            nodes[nv / 2 - 1 - k] = -positive;
        }
        let weights = vec![dv; nv];
        Ok(Self {
            nodes,
            weights,
            v_max,
        })
    }

    /// Custom symmetric grid from explicit nodes and weights; used by tests
    /// that need nodes at specific speeds (the midpoint rule never places a
    /// node on the boundary of V).
    pub fn from_parts(nodes: Vec<f64>, weights: Vec<f64>, v_max: f64) -> Result<Self> {
        let nv = nodes.len();
        if nv < 2 || !nv.is_multiple_of(2) || weights.len() != nv {
            return Err(SimError::Config(
                "custom velocity grid needs matching even-length nodes and weights".into(),
            ));
        }
        if !(v_max > 0.0) || nodes.iter().any(|v| v.abs() > v_max) {
            return Err(SimError::Config(
                "custom velocity grid nodes must lie in [-v_max, v_max]".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(SimError::Config(
                "custom velocity grid weights must be positive".into(),
            ));
        }
        for i in 0..nv {
            let j = nv - 1 - i;
            if nodes[i] != -nodes[j] || weights[i] != weights[j] {
                return Err(SimError::Config(
                    "custom velocity grid must be symmetric under v -> -v".into(),
                ));
            }
        }
        Ok(Self {
            nodes,
            weights,
            v_max,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Measure of the velocity set, `sum(w) = 2 v_max`.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted sum realizing the integral over V.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return Err(SimError::Contract(format!(
                "integrate_v expects one value per node: got {} values for {} nodes",
                values.len(),
                self.nodes.len()
            )));
        }
        Ok(values.iter().zip(&self.weights).map(|(f, w)| f * w).sum())
    }
}

/// How the truncated spatial domain closes at its ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Identifies `x_min` with `x_max`; preserves the discrete mass identity.
    Periodic,
    /// Upwind ghost values are zero; mass may leave the domain.
    ZeroInflow,
}

/// Uniform cell-centered grid on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub boundary: Boundary,
    dx: f64,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize, boundary: Boundary) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(SimError::Config(format!(
                "spatial domain is empty: [{x_min}, {x_max}]"
            )));
        }
        if n_cells == 0 {
            return Err(SimError::Config(
                "spatial grid needs at least one cell".into(),
            ));
        }
        let dx = (x_max - x_min) / n_cells as f64;
        Ok(Self {
            x_min,
            x_max,
            n_cells,
            boundary,
            dx,
        })
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Center of cell `j`.
    pub fn center(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx
    }

    /// All cell centers.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|j| self.center(j)).collect()
    }

    /// Weighted sum realizing the integral over the truncated line.
    pub fn integrate(&self, field: &[f64]) -> Result<f64> {
        if field.len() != self.n_cells {
            return Err(SimError::Contract(format!(
                "integrate_x expects one value per cell: got {} values for {} cells",
                field.len(),
                self.n_cells
            )));
        }
        Ok(field.iter().sum::<f64>() * self.dx)
    }
}

/// Space x velocity product grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub space: SpatialGrid,
    pub velocity: VelocityGrid,
}

impl PhaseGrid {
    pub fn new(space: SpatialGrid, velocity: VelocityGrid) -> Self {
        Self { space, velocity }
    }
}
