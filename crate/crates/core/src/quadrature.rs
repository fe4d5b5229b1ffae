//! Composite Simpson quadrature on uniform grids.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Number of nodes on [0, pi]; must be odd and at least 3.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    257
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes: default_nodes(),
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 3 || self.nodes % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "quadrature node count must be odd and >= 3, got {}",
                self.nodes
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        crate::ode::uniform_grid(0.0, std::f64::consts::PI, self.nodes)
    }
}

/// Composite Simpson rule for samples `values` at uniform spacing `h`.
/// `values.len()` must be odd.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let m = values.len();
    assert!(m >= 3 && m % 2 == 1, "Simpson needs an odd node count >= 3");
    let mut acc = values[0] + values[m - 1];
    for (i, v) in values.iter().enumerate().take(m - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Simpson value together with a Richardson error estimate obtained from the
/// half-resolution rule on every other node: `(S_h - S_2h) / 15`.
pub fn simpson_with_richardson(values: &[f64], h: f64) -> (f64, f64) {
    let fine = simpson(values, h);
    let m = values.len();
    if (m - 1) % 4 != 0 {
        return (fine, f64::NAN);
    }
    let coarse_vals: Vec<f64> = values.iter().step_by(2).copied().collect();
    let coarse = simpson(&coarse_vals, 2.0 * h);
    (fine, (fine - coarse) / 15.0)
}

/// Running integral `I(t_i) = int_{t_0}^{t_i} f` at every node.
///
/// Even nodes use composite Simpson; odd nodes add the partial panel from the
/// quadratic through the next three samples, so the rule stays exact for
/// quadratics at every node.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let m = values.len();
    let mut out = vec![0.0; m];
    if m < 3 {
        if m == 2 {
            out[1] = 0.5 * h * (values[0] + values[1]);
        }
        return out;
    }
    let mut acc = 0.0;
    let mut i = 0;
    while i + 2 < m {
        let (f0, f1, f2) = (values[i], values[i + 1], values[i + 2]);
        out[i + 1] = acc + h * (5.0 * f0 + 8.0 * f1 - f2) / 12.0;
        acc += h * (f0 + 4.0 * f1 + f2) / 3.0;
        out[i + 2] = acc;
        i += 2;
    }
    if i + 1 < m {
        // even node count: last interval from the quadratic through the last three
        let (f0, f1, f2) = (values[m - 3], values[m - 2], values[m - 1]);
        out[m - 1] = out[m - 2] + h * (-f0 + 8.0 * f1 + 5.0 * f2) / 12.0;
    }
    out
}
