//! Charted perturbed spheres in dimension 2 and 3, their exponential and
//! logarithm maps at the poles, the cut-point correspondences and the
//! comparison map between two such models.
//!
//! A charted metric lives on two polar normal charts. Around `p` the metric is
//! `dt^2 + G(t,u)^2 g_S` with
//!
//! ```text
//! G(t,u) = f(t) (1 + w(t) (phi(u) - 1)),   phi(u) = 1 / (cosh a + sinh a <u,e>)
//! ```
//!
//! where `w` is a quintic smoothstep rising on `[pi/4, 3pi/4]` and `phi` is the
//! conformal factor of the boost `M_a` of the round sphere along the axis `e`.
//! Near `q` this is `f(t)^2 M_a^* g_S`, so `y = (pi - t) M_a(u)` is a polar
//! normal chart around `q` in which the metric has the same form with the
//! reflected profile and the boost `-a`. With `a = 0` the model is the warped
//! product of the profile.

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_frame, rotate_towards, singular_value_range};
use crate::ode::dopri5;
use crate::radial_models::{IsometryMatrix, WarpedProfile};
use crate::sampler::{DirectionSampler, SamplerSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type V3 = [f64; 3];

const BLEND_START: f64 = PI / 4.0;
const BLEND_LEN: f64 = PI / 2.0;
const GEODESIC_TOL: f64 = 1e-12;
const POLE_GUARD: f64 = 1e-6;
/// Largest accepted boost rapidity.
pub const MAX_AMPLITUDE: f64 = 3.0;
/// Refocusing tolerance of the pre-flight check.
pub const REFOCUS_TOL: f64 = 1e-6;

fn dot(a: &V3, b: &V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &V3) -> f64 {
    dot(a, a).sqrt()
}

fn lin(alpha: f64, a: &V3, beta: f64, b: &V3) -> V3 {
    [
        alpha * a[0] + beta * b[0],
        alpha * a[1] + beta * b[1],
        alpha * a[2] + beta * b[2],
    ]
}

fn scaled(s: f64, a: &V3) -> V3 {
    [s * a[0], s * a[1], s * a[2]]
}

fn to_v3(v: &DVector<f64>) -> V3 {
    let mut out = [0.0; 3];
    for (o, x) in out.iter_mut().zip(v.iter()) {
        *o = *x;
    }
    out
}

fn to_dvec(v: &V3, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, v.iter().copied().take(n))
}

/// Quintic smoothstep on `[pi/4, 3pi/4]` with its first two derivatives.
pub fn blend(t: f64) -> (f64, f64, f64) {
    let x = (t - BLEND_START) / BLEND_LEN;
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let x2 = x * x;
    let w = x2 * x * (10.0 + x * (6.0 * x - 15.0));
    let wp = 30.0 * x2 * (x - 1.0) * (x - 1.0) / BLEND_LEN;
    let wpp = 60.0 * x * (2.0 * x2 - 3.0 * x + 1.0) / (BLEND_LEN * BLEND_LEN);
    (w, wp, wpp)
}

/// Boost of the unit sphere with rapidity `a` along the unit axis `e`.
pub fn mobius(a: f64, e: &V3, u: &V3) -> V3 {
    let (c, s) = (a.cosh(), a.sinh());
    let k = dot(u, e);
    let d = c + s * k;
    let num = lin(1.0, u, (c - 1.0) * k + s, e);
    scaled(1.0 / d, &num)
}

/// Differential of [`mobius`] at `u` applied to the tangent vector `w`.
pub fn mobius_diff(a: f64, e: &V3, u: &V3, w: &V3) -> V3 {
    let (c, s) = (a.cosh(), a.sinh());
    let k = dot(u, e);
    let kw = dot(w, e);
    let d = c + s * k;
    let num = lin(1.0, u, (c - 1.0) * k + s, e);
    let dnum = lin(1.0, w, (c - 1.0) * kw, e);
    lin(1.0 / d, &dnum, -s * kw / (d * d), &num)
}

/// Conformal factor `phi = |dM_a|` at `u` and its spherical gradient.
pub fn conformal_factor(a: f64, e: &V3, u: &V3) -> (f64, V3) {
    let k = dot(u, e);
    let phi = 1.0 / (a.cosh() + a.sinh() * k);
    let tangent = lin(1.0, e, -k, u);
    (phi, scaled(-a.sinh() * phi * phi, &tangent))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pole {
    P,
    Q,
}

impl Pole {
    pub fn other(self) -> Pole {
        match self {
            Pole::P => Pole::Q,
            Pole::Q => Pole::P,
        }
    }
}

/// A point given by its coordinates in one of the two polar normal charts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub chart: Pole,
    pub coords: V3,
}

/// State at the end of a geodesic: chart, position, velocity and the
/// deviation of the metric speed from 1.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicEnd {
    pub point: ChartPoint,
    pub velocity: V3,
    pub speed_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartedMetric {
    n: usize,
    profile: WarpedProfile,
    amplitude: f64,
    axis: V3,
}

impl ChartedMetric {
    pub fn new(
        n: usize,
        profile: WarpedProfile,
        amplitude: f64,
        axis: Option<DVector<f64>>,
    ) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidInput(format!(
                "charted models need n = 2 or 3, got {n}"
            )));
        }
        if !amplitude.is_finite() || amplitude.abs() > MAX_AMPLITUDE {
            return Err(Error::InvalidInput(format!(
                "perturbation amplitude must be finite with |a| <= {MAX_AMPLITUDE}, got {amplitude}"
            )));
        }
        profile.validate()?;
        let axis = match axis {
            None => [1.0, 0.0, 0.0],
            Some(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "perturbation axis has length {}, expected {n}",
                        v.len()
                    )));
                }
                let len = v.norm();
                if !(len > 0.0) {
                    return Err(Error::InvalidInput(
                        "perturbation axis must be nonzero".into(),
                    ));
                }
                scaled(1.0 / len, &to_v3(&v))
            }
        };
        Ok(ChartedMetric {
            n,
            profile,
            amplitude,
            axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn profile(&self) -> &WarpedProfile {
        &self.profile
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn axis(&self) -> DVector<f64> {
        to_dvec(&self.axis, self.n)
    }

    fn boost(&self, chart: Pole) -> f64 {
        match chart {
            Pole::P => self.amplitude,
            Pole::Q => -self.amplitude,
        }
    }

    /// `(G, dG/dt, grad_S G)` in `chart` at radius `t` and direction `u`.
    fn warp(&self, chart: Pole, t: f64, u: &V3) -> (f64, f64, V3) {
        let (f, fp) = match chart {
            Pole::P => (self.profile.f(t), self.profile.fp(t)),
            Pole::Q => (self.profile.f(PI - t), -self.profile.fp(PI - t)),
        };
        let (w, wp, _) = blend(t);
        if self.amplitude == 0.0 || (w == 0.0 && wp == 0.0) {
            return (f, fp, [0.0; 3]);
        }
        let (phi, grad) = conformal_factor(self.boost(chart), &self.axis, u);
        let mu = phi - 1.0;
        let g = f * (1.0 + w * mu);
        let gt = fp * (1.0 + w * mu) + f * wp * mu;
        (g, gt, scaled(f * w, &grad))
    }

    /// `G_tt / G` along the geodesic from `p` in direction `u`: the radial
    /// curvature matrix is this ratio times the identity.
    pub fn radial_ratio(&self, t: f64, u: &DVector<f64>) -> f64 {
        let base = self.profile.ratio(t);
        if self.amplitude == 0.0 {
            return base;
        }
        let (w, wp, wpp) = blend(t);
        if wp == 0.0 && wpp == 0.0 {
            return base;
        }
        let u = to_v3(u);
        let (phi, _) = conformal_factor(self.amplitude, &self.axis, &u);
        let mu = phi - 1.0;
        let log_f = self.profile.fp(t) / self.profile.f(t);
        base + (2.0 * log_f * wp * mu + wpp * mu) / (1.0 + w * mu)
    }

    /// `sigma^p_q` in closed form: the boost `M_a`.
    pub fn sigma_pq_closed(&self, u: &DVector<f64>) -> DVector<f64> {
        to_dvec(&mobius(self.amplitude, &self.axis, &to_v3(u)), self.n)
    }

    /// Jacobi scale `-f'(pi) phi(u)`: the speed at `q` of the Jacobi field
    /// with unit initial velocity along the geodesic in direction `u`.
    pub fn jacobi_scale_at_q(&self, u: &DVector<f64>) -> f64 {
        conformal_factor(self.amplitude, &self.axis, &to_v3(u)).0
    }

    fn accel(&self, chart: Pole, x: &V3, v: &V3) -> V3 {
        let t = norm(x);
        if t < POLE_GUARD {
            return [0.0; 3];
        }
        let u = scaled(1.0 / t, x);
        let tdot = dot(&u, v);
        let udot = scaled(1.0 / t, &lin(1.0, v, -tdot, &u));
        let (g, gt, grad) = self.warp(chart, t, &u);
        let ud2 = dot(&udot, &udot);
        let mut acc = scaled(ud2 * (g * gt - t), &u);
        let c_udot = 2.0 * tdot * (1.0 - t * gt / g) - 2.0 * t * dot(&grad, &udot) / g;
        acc = lin(1.0, &acc, c_udot, &udot);
        lin(1.0, &acc, t * ud2 / g, &grad)
    }

    fn speed(&self, chart: Pole, x: &V3, v: &V3) -> f64 {
        let t = norm(x);
        if t < POLE_GUARD {
            return norm(v);
        }
        let u = scaled(1.0 / t, x);
        let tdot = dot(&u, v);
        let udot = scaled(1.0 / t, &lin(1.0, v, -tdot, &u));
        let (g, _, _) = self.warp(chart, t, &u);
        (tdot * tdot + g * g * dot(&udot, &udot)).sqrt()
    }

    /// Re-express a state of `chart` in the other chart.
    fn transfer(&self, chart: Pole, x: &V3, v: &V3) -> (V3, V3) {
        let t = norm(x);
        let u = scaled(1.0 / t, x);
        let tdot = dot(&u, v);
        let udot = scaled(1.0 / t, &lin(1.0, v, -tdot, &u));
        let a = self.boost(chart);
        let mu = mobius(a, &self.axis, &u);
        let dmu = mobius_diff(a, &self.axis, &u, &udot);
        (scaled(PI - t, &mu), lin(-tdot, &mu, PI - t, &dmu))
    }

    /// Coordinates of `pt` in `chart`, or `None` for the pole that chart
    /// cannot represent.
    pub fn coords_in(&self, pt: &ChartPoint, chart: Pole) -> Option<V3> {
        if pt.chart == chart {
            return Some(pt.coords);
        }
        let t = norm(&pt.coords);
        if t < 1e-300 {
            return None;
        }
        let u = scaled(1.0 / t, &pt.coords);
        Some(scaled(
            PI - t,
            &mobius(self.boost(pt.chart), &self.axis, &u),
        ))
    }

    fn flow(&self, chart: Pole, x: V3, v: V3, duration: f64) -> Result<(V3, V3)> {
        if duration <= 0.0 {
            return Ok((x, v));
        }
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let x = [y[0], y[1], y[2]];
            let v = [y[3], y[4], y[5]];
            let a = self.accel(chart, &x, &v);
            dy[..3].copy_from_slice(&v);
            dy[3..].copy_from_slice(&a);
        };
        let y0 = [x[0], x[1], x[2], v[0], v[1], v[2]];
        let (ys, _) = dopri5(rhs, &y0, &[0.0, duration], GEODESIC_TOL, GEODESIC_TOL)?;
        let y = ys.last().expect("dopri5 returns the final node");
        Ok(([y[0], y[1], y[2]], [y[3], y[4], y[5]]))
    }

    /// Unit-speed geodesic from `base` in direction `dir` for time `length`,
    /// switching charts at the equator `t = pi/2`.
    pub fn shoot(&self, base: Pole, dir: &V3, length: f64) -> Result<GeodesicEnd> {
        let len = norm(dir);
        if (len - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "geodesic direction must be unit, |u| = {len}"
            )));
        }
        if !(0.0..=PI * (1.0 + 1e-12)).contains(&length) {
            return Err(Error::InvalidInput(format!(
                "geodesic length {length} outside [0, pi]"
            )));
        }
        let half = PI / 2.0;
        let (mut x, mut v) = self.flow(base, [0.0; 3], *dir, length.min(half))?;
        let mut chart = base;
        if length > half {
            let (y, w) = self.transfer(chart, &x, &v);
            chart = chart.other();
            let (y, w) = self.flow(chart, y, w, length - half)?;
            x = y;
            v = w;
        }
        let speed_defect = (self.speed(chart, &x, &v) - 1.0).abs();
        Ok(GeodesicEnd {
            point: ChartPoint { chart, coords: x },
            velocity: v,
            speed_defect,
        })
    }

    /// `exp_base(v)` for a tangent vector with `|v| <= pi`.
    pub fn exp_map(&self, base: Pole, v: &DVector<f64>) -> Result<ChartPoint> {
        self.check_len(v)?;
        let length = v.norm();
        if length == 0.0 {
            return Ok(ChartPoint {
                chart: base,
                coords: [0.0; 3],
            });
        }
        let dir = scaled(1.0 / length, &to_v3(v));
        Ok(self.shoot(base, &dir, length)?.point)
    }

    /// `exp_base^{-1}(target)` by Newton shooting with a finite-difference
    /// Jacobian and step halving; residual measured in the chart of `base`.
    pub fn log_map(&self, base: Pole, target: &ChartPoint) -> Result<DVector<f64>> {
        let z = self.coords_in(target, base).ok_or_else(|| {
            Error::ShootingFailed("target is the cut point of the base pole".into())
        })?;
        let n = self.n;
        let z = to_dvec(&z, n);
        let residual = |v: &DVector<f64>| -> Result<DVector<f64>> {
            let end = self.exp_map(base, v)?;
            let c = self
                .coords_in(&end, base)
                .ok_or_else(|| Error::ShootingFailed("geodesic reached the cut point".into()))?;
            Ok(to_dvec(&c, n) - &z)
        };
        let clamp = |v: DVector<f64>| {
            let l = v.norm();
            let cap = PI * (1.0 - 1e-9);
            if l > cap {
                v * (cap / l)
            } else {
                v
            }
        };
        let mut v = clamp(z.clone());
        let mut r = residual(&v)?;
        let fd = 1e-7;
        for _ in 0..64 {
            if r.norm() < 1e-13 {
                break;
            }
            let mut jac = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut vp = v.clone();
                vp[j] += fd;
                let col = (residual(&vp)? - &r) / fd;
                jac.set_column(j, &col);
            }
            let step = jac
                .lu()
                .solve(&(-&r))
                .ok_or_else(|| Error::ShootingFailed("singular shooting Jacobian".into()))?;
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let cand = clamp(&v + &step * lambda);
                let rc = residual(&cand)?;
                if rc.norm() < r.norm() {
                    v = cand;
                    r = rc;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if r.norm() < 1e-8 {
            Ok(v)
        } else {
            Err(Error::ShootingFailed(format!(
                "log map residual {:e} after Newton and step halving",
                r.norm()
            )))
        }
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "tangent vector has length {}, expected {}",
                v.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// `sigma^p_q(u) = -tau_u'(pi)`, in the chart at `q`.
    pub fn sigma_pq(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(u)?;
        let end = self.shoot(Pole::P, &to_v3(u), PI)?;
        Ok(to_dvec(&scaled(-1.0, &end.velocity), self.n))
    }

    /// `sigma^q_p(v)`, the inverse correspondence.
    pub fn sigma_qp(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v)?;
        let end = self.shoot(Pole::Q, &to_v3(v), PI)?;
        Ok(to_dvec(&scaled(-1.0, &end.velocity), self.n))
    }

    /// Integrate `count` geodesics from `p` and return the largest distance
    /// (in the chart at `q`) by which they miss `q` at time pi.
    pub fn refocusing_defect(&self, count: usize) -> Result<f64> {
        let sampler = DirectionSampler::new(
            self.n,
            SamplerSpec {
                directions: count,
                refine: false,
                ..Default::default()
            },
        );
        let misses: Vec<Result<f64>> = sampler
            .points()
            .par_iter()
            .map(|u| {
                let end = self.shoot(Pole::P, &to_v3(u), PI)?;
                let y = self
                    .coords_in(&end.point, Pole::Q)
                    .unwrap_or([f64::INFINITY; 3]);
                Ok(norm(&y))
            })
            .collect();
        let mut worst = 0.0_f64;
        for m in misses {
            worst = worst.max(m?);
        }
        Ok(worst)
    }

    /// Pre-flight check that the model is Blaschke-normalized: 64 geodesics
    /// from `p` must meet at `q` within [`REFOCUS_TOL`].
    pub fn preflight(&self) -> Result<f64> {
        let defect = self.refocusing_defect(64)?;
        if !(defect <= REFOCUS_TOL) {
            return Err(Error::ModelRejected(format!(
                "geodesics from p miss q by {defect:e} at distance pi"
            )));
        }
        Ok(defect)
    }
}

/// The maps `sigma`, `F` and `F~` between two charted models.
#[derive(Debug, Clone)]
pub struct ComparisonMap {
    pub m1: ChartedMetric,
    pub m2: ChartedMetric,
    pub q: IsometryMatrix,
    /// Worst refocusing defect of the two models.
    pub refocusing_defect: f64,
}

pub fn build_comparison(
    m1: ChartedMetric,
    m2: ChartedMetric,
    q: IsometryMatrix,
) -> Result<ComparisonMap> {
    let n = m1.dim();
    if m2.dim() != n || q.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "models have n = {} and {}, isometry is {}x{}",
            n,
            m2.dim(),
            q.dim(),
            q.dim()
        )));
    }
    let d1 = m1.preflight()?;
    let d2 = m2.preflight()?;
    Ok(ComparisonMap {
        m1,
        m2,
        q,
        refocusing_defect: d1.max(d2),
    })
}

impl ComparisonMap {
    pub fn dim(&self) -> usize {
        self.m1.dim()
    }

    /// `sigma = sigma^{p2}_{q2} o Q o sigma^{q1}_{p1}` on unit vectors at `q1`.
    pub fn sigma(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let u1 = self.m1.sigma_qp(v)?;
        let u2 = self.q.apply(&u1);
        self.m2.sigma_pq(&u2)
    }

    /// `F~(x) = |x| sigma(x/|x|)` on the ball of radius pi at `q1`.
    pub fn f_tilde(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let r = x.norm();
        if r == 0.0 {
            return Ok(DVector::zeros(x.len()));
        }
        Ok(self.sigma(&(x / r))? * r)
    }

    /// `F(exp_{p1}(t u)) = exp_{p2}(t Q u)`.
    pub fn f_map(&self, pt: &ChartPoint) -> Result<ChartPoint> {
        let n = self.dim();
        match self.m1.coords_in(pt, Pole::P) {
            None => Ok(ChartPoint {
                chart: Pole::Q,
                coords: [0.0; 3],
            }),
            Some(x) => {
                let img = self.q.apply(&to_dvec(&x, n));
                Ok(ChartPoint {
                    chart: Pole::P,
                    coords: to_v3(&img),
                })
            }
        }
    }

    /// `exp_{q2}(F~(log_{q1}(pt)))`, the conjugated form of `F`.
    pub fn f_via_tilde(&self, pt: &ChartPoint) -> Result<ChartPoint> {
        let x = self.m1.log_map(Pole::Q, pt)?;
        self.m2.exp_map(Pole::Q, &self.f_tilde(&x)?)
    }

    /// Central finite-difference `d sigma_v` in the Gram-Schmidt frames at
    /// `v` and `sigma(v)`, as an `(n-1) x (n-1)` matrix.
    pub fn dsigma(&self, v: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let frame = orthonormal_frame(v);
        let target = orthonormal_frame(&self.sigma(v)?);
        let mut cols = DMatrix::zeros(n, n - 1);
        for j in 0..n - 1 {
            let w = frame.column(j).into_owned();
            let plus = self.sigma(&rotate_towards(v, &w, h))?;
            let minus = self.sigma(&rotate_towards(v, &w, -h))?;
            cols.set_column(j, &((plus - minus) / (2.0 * h)));
        }
        Ok(target.transpose() * cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSpec {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Offset scale of the local half of the pairs.
    #[serde(default = "default_local_scale")]
    pub local_scale: f64,
    /// Central-difference step for `d sigma`, radians.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_pairs() -> usize {
    10_000
}
fn default_local_scale() -> f64 {
    1e-2
}
fn default_fd_step() -> f64 {
    1e-5
}

impl Default for LipschitzSpec {
    fn default() -> Self {
        LipschitzSpec {
            pairs: default_pairs(),
            local_scale: default_local_scale(),
            fd_step: default_fd_step(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LipschitzEstimate {
    pub pairs: usize,
    /// Smallest sampled `|F~(x) - F~(y)| / |x - y|`.
    pub lower: f64,
    /// Largest sampled two-point ratio.
    pub upper: f64,
    /// `min(1, inf sigma_min(d sigma))`.
    pub derivative_lower: f64,
    /// `max(1, sup sigma_max(d sigma))`.
    pub derivative_upper: f64,
    /// Largest `|s - 1|` over singular values `s` of the sampled `d sigma`.
    pub max_dsigma_deviation: f64,
    /// `max(upper, 1 / lower)`.
    pub lip_b: f64,
    /// `max(derivative_upper, 1 / derivative_lower)`.
    pub lip_b_derivative: f64,
    pub final_bound_rhs: f64,
    /// `max(lip_b, lip_b_derivative)^2 <= final_bound_rhs`.
    pub final_bound_ok: bool,
    /// Two-point ratios inside the derivative bounds widened by 1e-4.
    pub mean_value_consistent: bool,
}

/// `1 + ((8/pi)(n-1))^{-1/2}`.
pub fn final_bound_rhs(n: usize) -> f64 {
    1.0 + (8.0 / PI * (n as f64 - 1.0)).powf(-0.5)
}

fn ball_point(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> DVector<f64> {
    let g = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let dir = g.normalize();
    let r: f64 = rng.gen();
    dir * (radius * r.powf(1.0 / n as f64))
}

/// Two-point and derivative bounds on the bi-Lipschitz constant of `F~`.
pub fn lipschitz_estimate(
    cm: &ComparisonMap,
    sampler: &DirectionSampler,
    spec: &LipschitzSpec,
) -> Result<LipschitzEstimate> {
    let n = cm.dim();
    let radius = PI * (1.0 - 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pairs = Vec::with_capacity(spec.pairs);
    for k in 0..spec.pairs {
        let x = ball_point(&mut rng, n, radius);
        let y = if k % 2 == 0 {
            ball_point(&mut rng, n, radius)
        } else {
            let mut y;
            loop {
                let off = ball_point(&mut rng, n, spec.local_scale);
                y = &x + off;
                if y.norm() < radius && (&y - &x).norm() > 0.0 {
                    break;
                }
            }
            y
        };
        if (&x - &y).norm() > 0.0 {
            pairs.push((x, y));
        }
    }
    let ratios: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|(x, y)| Ok((cm.f_tilde(x)? - cm.f_tilde(y)?).norm() / (x - y).norm()))
        .collect();
    let mut lower = f64::INFINITY;
    let mut upper = 0.0_f64;
    for r in ratios {
        let r = r?;
        lower = lower.min(r);
        upper = upper.max(r);
    }

    let h = spec.fd_step;
    let svals = |v: &DVector<f64>| -> (f64, f64) {
        match cm.dsigma(v, h) {
            Ok(d) => singular_value_range(&d),
            Err(_) => (f64::NAN, f64::NAN),
        }
    };
    let smax = sampler.maximize(|v| svals(v).1);
    let smin = sampler.minimize(|v| svals(v).0);
    if !smax.value.is_finite() || !smin.value.is_finite() {
        return Err(Error::ShootingFailed(
            "sigma evaluation failed while sampling d sigma".into(),
        ));
    }
    let derivative_upper = smax.value.max(1.0);
    let derivative_lower = smin.value.min(1.0);
    let max_dsigma_deviation = (smax.value - 1.0).abs().max((1.0 - smin.value).abs());
    let lip_b = upper.max(1.0 / lower);
    let lip_b_derivative = derivative_upper.max(1.0 / derivative_lower);
    let rhs = final_bound_rhs(n);
    let worst = lip_b.max(lip_b_derivative);
    Ok(LipschitzEstimate {
        pairs: pairs.len(),
        lower,
        upper,
        derivative_lower,
        derivative_upper,
        max_dsigma_deviation,
        lip_b,
        lip_b_derivative,
        final_bound_rhs: rhs,
        final_bound_ok: worst * worst <= rhs,
        mean_value_consistent: lower >= derivative_lower - 1e-4 && upper <= derivative_upper + 1e-4,
    })
}
