//! The block matrix `A(t;u)`, the curvature gap `lambda(t)` and the
//! operator-norm inequality between the two Jacobi systems.

use crate::error::{Error, Result};
use crate::linalg::{operator_norm, orthonormal_frame, spectral_radius_sym};
use crate::quadrature::{simpson_with_richardson, QuadratureSpec};
use crate::radial_models::{IsometryMatrix, RadialGeometry};
use crate::sampler::{DirectionSampler, SamplerSpec};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// `[[0, I], [a, 0]]`, the coefficient matrix of `J' = A J`.
#[derive(Debug, Clone, PartialEq)]
pub struct BigAMatrix(DMatrix<f64>);

impl BigAMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.0)
    }

    /// The bottom-left block `a`.
    pub fn curvature_block(&self) -> DMatrix<f64> {
        let m = self.order() / 2;
        self.0.view((m, 0), (m, m)).into_owned()
    }
}

#[allow(non_snake_case)]
pub fn assemble_A(a: &DMatrix<f64>) -> BigAMatrix {
    let m = a.nrows();
    let mut big = DMatrix::zeros(2 * m, 2 * m);
    big.view_mut((0, m), (m, m)).fill_with_identity();
    big.view_mut((m, 0), (m, m)).copy_from(a);
    BigAMatrix(big)
}

pub(crate) fn check_pair(
    g1: &RadialGeometry,
    g2: &RadialGeometry,
    q: &IsometryMatrix,
) -> Result<()> {
    if g1.dim() != g2.dim() || q.dim() != g1.dim() {
        return Err(Error::DimensionMismatch(format!(
            "M1 has n = {}, M2 has n = {}, isometry is {}x{}",
            g1.dim(),
            g2.dim(),
            q.dim(),
            q.dim()
        )));
    }
    Ok(())
}

/// Frame at `u` on `M1`, direction `Qu` and frame `Q E` on `M2`.
pub fn corresponding_frames(
    u: &DVector<f64>,
    q: &IsometryMatrix,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let e1 = orthonormal_frame(u);
    let e2 = q.matrix() * &e1;
    (e1, q.apply(u), e2)
}

/// `(a1(t;u), a2(t;Qu))` in corresponding frames.
pub fn curvature_pair(
    g1: &RadialGeometry,
    g2: &RadialGeometry,
    q: &IsometryMatrix,
    t: f64,
    u: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (e1, u2, e2) = corresponding_frames(u, q);
    (
        g1.curvature_in_frame(t, u, &e1),
        g2.curvature_in_frame(t, &u2, &e2),
    )
}

/// `max_x |K1 - K2|` at a single direction: the spectral radius of `a1 - a2`.
pub fn gap_at(
    g1: &RadialGeometry,
    g2: &RadialGeometry,
    q: &IsometryMatrix,
    t: f64,
    u: &DVector<f64>,
) -> f64 {
    let (a1, a2) = curvature_pair(g1, g2, q, t, u);
    spectral_radius_sym(&(a1 - a2))
}

/// Sampled lower bound of `lambda(t)`.
pub fn lambda_at(
    g1: &RadialGeometry,
    g2: &RadialGeometry,
    q: &IsometryMatrix,
    t: f64,
    sampler: &DirectionSampler,
) -> Result<f64> {
    check_pair(g1, g2, q)?;
    Ok(sampler.maximize(|u| gap_at(g1, g2, q, t, u)).value)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LambdaCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub integral: f64,
    /// `(S_h - S_2h) / 15`; absent when `nodes - 1` is not a multiple of 4.
    pub richardson_error: Option<f64>,
    pub sampler: SamplerSpec,
    /// Directions with the largest gap, one per node.
    #[serde(skip)]
    pub argmax: Vec<DVector<f64>>,
    pub evaluations: usize,
    /// `lambda` is a sampled maximum and therefore a lower bound.
    pub lower_bound: bool,
}

pub fn lambda_integral(
    g1: &RadialGeometry,
    g2: &RadialGeometry,
    q: &IsometryMatrix,
    quadrature: &QuadratureSpec,
    sampler: &DirectionSampler,
) -> Result<LambdaCurve> {
    check_pair(g1, g2, q)?;
    quadrature.validate()?;
    let grid = quadrature.grid();
    let mut values = Vec::with_capacity(grid.len());
    let mut argmax = Vec::with_capacity(grid.len());
    let mut evaluations = 0;
    for &t in &grid {
        let ext = sampler.maximize(|u| gap_at(g1, g2, q, t, u));
        values.push(ext.value.max(0.0));
        argmax.push(ext.argument);
        evaluations += ext.evaluations;
    }
    let h = grid[1] - grid[0];
    let (integral, rich) = simpson_with_richardson(&values, h);
    Ok(LambdaCurve {
        grid,
        values,
        integral,
        richardson_error: if rich.is_finite() { Some(rich) } else { None },
        sampler: *sampler.spec(),
        argmax,
        evaluations,
        lower_bound: true,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GapBoundReport {
    pub t: f64,
    pub u: Vec<f64>,
    /// `|A(t;u1) - A(t;u2)|`
    pub lhs: f64,
    /// `2(n-1) lambda(t)`
    pub rhs: f64,
    /// `|A(t;u2)|`
    pub a2_norm: f64,
    /// `|A(t;u1)| + 2(n-1) lambda(t)`, bounded above by `c1 + 2(n-1) lambda(t)`.
    pub a2_bound: f64,
    pub violated: bool,
}

pub fn verify_gap_bound(
    g1: &RadialGeometry,
    g2: &RadialGeometry,
    q: &IsometryMatrix,
    t: f64,
    u: &DVector<f64>,
    lambda_t: f64,
) -> GapBoundReport {
    let n = g1.dim();
    let (a1, a2) = curvature_pair(g1, g2, q, t, u);
    let big1 = assemble_A(&a1);
    let big2 = assemble_A(&a2);
    let lhs = operator_norm(&(big1.matrix() - big2.matrix()));
    let rhs = 2.0 * (n as f64 - 1.0) * lambda_t;
    let a2_norm = big2.norm();
    let a2_bound = big1.norm() + rhs;
    let tol = 1.0 + 1e-9;
    GapBoundReport {
        t,
        u: u.iter().copied().collect(),
        lhs,
        rhs,
        a2_norm,
        a2_bound,
        violated: lhs > rhs * tol || a2_norm > a2_bound * tol,
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GapBoundSummary {
    pub checks: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` over checks with `rhs > 0`.
    pub worst_ratio: f64,
    pub first_violation: Option<GapBoundReport>,
}

/// Check the inequality at every grid node against every raw sample
/// direction and the refined maximizer of that node.
pub fn check_gap_bound(
    g1: &RadialGeometry,
    g2: &RadialGeometry,
    q: &IsometryMatrix,
    curve: &LambdaCurve,
    sampler: &DirectionSampler,
) -> GapBoundSummary {
    let reports: Vec<Vec<GapBoundReport>> = curve
        .grid
        .par_iter()
        .zip(&curve.values)
        .zip(&curve.argmax)
        .map(|((&t, &lam), best)| {
            sampler
                .points()
                .iter()
                .chain(std::iter::once(best))
                .map(|u| verify_gap_bound(g1, g2, q, t, u, lam))
                .collect()
        })
        .collect();
    let mut summary = GapBoundSummary {
        checks: 0,
        violations: 0,
        worst_ratio: 0.0,
        first_violation: None,
    };
    for r in reports.into_iter().flatten() {
        summary.checks += 1;
        if r.rhs > 0.0 {
            summary.worst_ratio = summary.worst_ratio.max(r.lhs / r.rhs);
        }
        if r.violated {
            summary.violations += 1;
            if summary.first_violation.is_none() {
                summary.first_violation = Some(r);
            }
        }
    }
    summary
}
