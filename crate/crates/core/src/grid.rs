//! Log-price grids: a diffusion grid plus the jump-grid superset that
//! extends it over the truncated infinite domain.
//!
//! Grids live in x = ln(S/S₀). The diffusion grid carries the parabolic
//! steps; the jump grid coincides with it on the diffusion range (no
//! interpolation between the two) and continues outward, either with the
//! same step or with steps growing in geometric progression.

use crate::{EngineError, Result};
use std::io::Write;

/// Node placement over the diffusion range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Spacing {
    Uniform,
    /// Hyperbolic-sine spacing clustered at the strike (x = 0).
    ConcentratedNearStrike,
}

/// Declarative description of a grid; all coordinates in log-price.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max_diffusion: f64,
    pub n_diffusion: usize,
    pub x_max_jump: f64,
    pub x_min_jump: f64,
    /// Geometric growth factor for the jump extension; must exceed 1.
    pub growth_factor: f64,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max_diffusion.is_finite()) {
            return Err(EngineError::InvalidGrid("non-finite bounds".into()));
        }
        if self.x_min >= self.x_max_diffusion {
            return Err(EngineError::InvalidGrid(format!(
                "x_min {} must be below x_max_diffusion {}",
                self.x_min, self.x_max_diffusion
            )));
        }
        if self.x_max_jump < self.x_max_diffusion || self.x_min_jump > self.x_min {
            return Err(EngineError::InvalidGrid(
                "jump bounds must contain the diffusion range".into(),
            ));
        }
        if self.growth_factor <= 1.0 {
            return Err(EngineError::InvalidGrid(format!(
                "growth factor {} must exceed 1",
                self.growth_factor
            )));
        }
        if self.n_diffusion < 3 {
            return Err(EngineError::InvalidGrid(format!(
                "need at least 3 diffusion nodes, got {}",
                self.n_diffusion
            )));
        }
        Ok(())
    }
}

/// A realized grid: strictly increasing nodes with the diffusion range
/// marked by inclusive node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    i_lo: usize,
    i_hi: usize,
}

impl Grid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inclusive index interval of the diffusion grid inside the jump grid.
    pub fn diffusion_range(&self) -> (usize, usize) {
        (self.i_lo, self.i_hi)
    }

    pub fn diffusion_nodes(&self) -> &[f64] {
        &self.nodes[self.i_lo..=self.i_hi]
    }

    /// Step h_i = x_i − x_{i−1}, for i = 1..len.
    pub fn steps(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Uniform step if the whole grid is uniform to ~8 ulp, else None.
    pub fn uniform_step(&self) -> Option<f64> {
        let h = self.nodes[1] - self.nodes[0];
        let tol = 8.0 * f64::EPSILON * h.abs().max(1.0);
        self.nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= tol)
            .then_some(h)
    }

    fn check_monotone(nodes: &[f64]) -> Result<()> {
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EngineError::InvalidGrid(
                "nodes must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Uniform diffusion grid with n nodes over [x_min, x_max].
    pub fn build_uniform(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(EngineError::InvalidGrid("non-finite bounds".into()));
        }
        if n < 3 {
            return Err(EngineError::InvalidGrid(format!(
                "need at least 3 nodes, got {n}"
            )));
        }
        if x_min >= x_max {
            return Err(EngineError::InvalidGrid("x_min must be below x_max".into()));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| x_min + h * i as f64).collect();
        Ok(Grid {
            i_lo: 0,
            i_hi: n - 1,
            nodes,
        })
    }

    /// Uniform grid with the step of [x_min, x_max]/(n−1) but shifted by at
    /// most h/2 so that `anchor` falls exactly on a node. Used by the
    /// convergence studies to keep the strike on-grid across refinements.
    pub fn build_uniform_aligned(x_min: f64, x_max: f64, n: usize, anchor: f64) -> Result<Self> {
        let g = Self::build_uniform(x_min, x_max, n)?;
        let h = g.nodes[1] - g.nodes[0];
        let k = ((anchor - x_min) / h).round();
        let x0 = anchor - k * h;
        let nodes: Vec<f64> = (0..n).map(|i| x0 + h * i as f64).collect();
        Ok(Grid {
            i_lo: 0,
            i_hi: n - 1,
            nodes,
        })
    }

    /// Sinh-spaced diffusion grid clustered around the strike at x = 0.
    /// `density` ~ 0.1..1; smaller clusters harder.
    pub fn build_concentrated(x_min: f64, x_max: f64, n: usize, density: f64) -> Result<Self> {
        if n < 3 {
            return Err(EngineError::InvalidGrid(format!(
                "need at least 3 nodes, got {n}"
            )));
        }
        if !(density > 0.0) {
            return Err(EngineError::InvalidGrid("density must be positive".into()));
        }
        let a = ((x_min) / density).asinh();
        let b = ((x_max) / density).asinh();
        let nodes: Vec<f64> = (0..n)
            .map(|i| {
                let u = a + (b - a) * i as f64 / (n - 1) as f64;
                density * u.sinh()
            })
            .collect();
        Self::check_monotone(&nodes)?;
        Ok(Grid {
            i_lo: 0,
            i_hi: n - 1,
            nodes,
        })
    }

    /// Extend by geometric steps h·g, h·g², ... on each side until the jump
    /// bounds are covered. Diffusion-range indices are updated so that the
    /// original nodes are preserved bit-identically.
    pub fn extend_to_jump_grid(&self, g: f64, x_max_jump: f64, x_min_jump: f64) -> Result<Self> {
        if g <= 1.0 {
            return Err(EngineError::InvalidGrid(format!(
                "growth factor {g} must exceed 1"
            )));
        }
        self.extend_impl(x_max_jump, x_min_jump, Some(g))
    }

    /// Extend by repeating the boundary step (uniform continuation). The
    /// one-step convergence tables are built this way.
    pub fn extend_uniformly(&self, x_max_jump: f64, x_min_jump: f64) -> Result<Self> {
        self.extend_impl(x_max_jump, x_min_jump, None)
    }

    fn extend_impl(&self, x_max_jump: f64, x_min_jump: f64, g: Option<f64>) -> Result<Self> {
        let n = self.nodes.len();
        let eps = 1e-12;
        let mut upper = Vec::new();
        {
            let h = self.nodes[n - 1] - self.nodes[n - 2];
            let mut x = self.nodes[n - 1];
            let mut step = h;
            while x < x_max_jump - eps {
                step = match g {
                    Some(g) => step * g,
                    None => h,
                };
                x += step;
                upper.push(x);
            }
        }
        let mut lower = Vec::new();
        {
            let h = self.nodes[1] - self.nodes[0];
            let mut x = self.nodes[0];
            let mut step = h;
            while x > x_min_jump + eps {
                step = match g {
                    Some(g) => step * g,
                    None => h,
                };
                x -= step;
                lower.push(x);
            }
            lower.reverse();
        }
        let mut nodes = lower;
        let i_lo = self.i_lo + nodes.len();
        let i_hi = self.i_hi + nodes.len();
        nodes.extend_from_slice(&self.nodes);
        nodes.extend_from_slice(&upper);
        Self::check_monotone(&nodes)?;
        Ok(Grid { nodes, i_lo, i_hi })
    }

    /// Build the full jump grid described by a spec.
    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let base = match spec.spacing {
            Spacing::Uniform => {
                Self::build_uniform(spec.x_min, spec.x_max_diffusion, spec.n_diffusion)?
            }
            Spacing::ConcentratedNearStrike => {
                Self::build_concentrated(spec.x_min, spec.x_max_diffusion, spec.n_diffusion, 0.25)?
            }
        };
        base.extend_to_jump_grid(spec.growth_factor, spec.x_max_jump, spec.x_min_jump)
    }

    /// Dump nodes as a single-column CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x")?;
        for x in &self.nodes {
            writeln!(w, "{x:.17e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_basic() {
        let g = Grid::build_uniform(0.0, 1.0, 3).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.uniform_step(), Some(0.5));
        assert_eq!(g.diffusion_range(), (0, 2));
    }

    #[test]
    fn uniform_rejects_two_nodes() {
        assert!(Grid::build_uniform(0.0, 1.0, 2).is_err());
        assert!(Grid::build_uniform(f64::NAN, 1.0, 5).is_err());
        assert!(Grid::build_uniform(1.0, 0.0, 5).is_err());
    }

    #[test]
    fn kou_domain_step() {
        // S-space bounds 1e-3 to 30*max(S,K) = 3000 with K = 100, 401 nodes
        let x_min = (1e-3f64 / 100.0).ln();
        let x_max = (3000.0f64 / 100.0).ln();
        let g = Grid::build_uniform(x_min, x_max, 401).unwrap();
        let h = g.uniform_step().unwrap();
        assert!((h - 0.0372853).abs() < 1e-7, "h = {h}");
    }

    #[test]
    fn geometric_extension_steps() {
        let g = Grid::build_uniform(0.0, 1.0, 11).unwrap(); // h = 0.1
        let e = g.extend_to_jump_grid(1.03, 1.32, 0.0).unwrap();
        let steps = e.steps();
        let tail = &steps[10..];
        assert!((tail[0] - 0.103).abs() < 1e-15);
        assert!((tail[1] - 0.10609).abs() < 1e-15);
        assert!((tail[2] - 0.1092727).abs() < 1e-15);
    }

    #[test]
    fn extension_noop_when_covered() {
        let g = Grid::build_uniform(0.0, 1.0, 5).unwrap();
        let e = g.extend_to_jump_grid(1.03, 1.0, 0.0).unwrap();
        assert_eq!(e.nodes(), g.nodes());
    }

    #[test]
    fn extension_preserves_diffusion_nodes() {
        let g = Grid::build_uniform(-2.0, 1.5, 37).unwrap();
        let e = g.extend_to_jump_grid(1.03, 4.0, -5.0).unwrap();
        assert_eq!(e.diffusion_nodes(), g.nodes());
        let (lo, hi) = e.diffusion_range();
        assert!(lo > 0 && hi < e.len() - 1);
    }

    #[test]
    fn aligned_grid_hits_anchor() {
        let g = Grid::build_uniform_aligned((1e-5f64).ln(), 30f64.ln(), 101, 0.0).unwrap();
        let h = g.uniform_step().unwrap();
        assert!((h - 0.149141).abs() < 1e-6);
        assert!(g.nodes().iter().any(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn concentrated_monotone_and_clustered() {
        let g = Grid::build_concentrated(-3.0, 3.0, 101, 0.3).unwrap();
        let steps = g.steps();
        let mid = steps[50];
        assert!(mid < steps[0] && mid < steps[99]);
    }
}
