//! Pointed manifold models reduced to their radial curvature matrices.
//!
//! Every model exposes `a(t; u)`: the symmetric `(n-1) x (n-1)` matrix
//! `a_ij = <R(E_i, tau') tau', E_j>` in a parallel orthonormal frame along the
//! unit-speed geodesic `tau_u` from the base point, with lengths normalized so
//! the single cut point sits at distance pi. With the curvature-tensor sign
//! used here the radial sectional curvature of `span(E_i, tau')` is `-a_ii`,
//! so the round sphere has `a = -I`.

use crate::error::{Error, Result};
use crate::exp_log_maps::ChartedMetric;
use crate::linalg::{asymmetry, orthogonality_defect, orthonormal_frame};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Tolerance on the Blaschke boundary conditions of a warping profile.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// A warping function `f` on `[0, pi]` for the metric `dt^2 + f(t)^2 g_S`.
#[derive(Debug, Clone, PartialEq)]
pub enum WarpedProfile {
    /// `f(t) = sin t`
    Round,
    /// `f(t) = sin t * exp(beta sin^2 t)`
    Bump { beta: f64 },
    /// Tabulated `(t, f, f', f'')`, cubic-interpolated.
    Table(TableProfile),
}

impl WarpedProfile {
    pub fn bump(beta: f64) -> Self {
        WarpedProfile::Bump { beta }
    }

    pub fn f(&self, t: f64) -> f64 {
        match self {
            WarpedProfile::Round => t.sin(),
            WarpedProfile::Bump { beta } => {
                let s = t.sin();
                s * (beta * s * s).exp()
            }
            WarpedProfile::Table(tab) => tab.eval(t).0,
        }
    }

    pub fn fp(&self, t: f64) -> f64 {
        match self {
            WarpedProfile::Round => t.cos(),
            WarpedProfile::Bump { beta } => {
                let (s, c) = t.sin_cos();
                (beta * s * s).exp() * c * (1.0 + 2.0 * beta * s * s)
            }
            WarpedProfile::Table(tab) => tab.eval(t).1,
        }
    }

    pub fn fpp(&self, t: f64) -> f64 {
        match self {
            WarpedProfile::Round => -t.sin(),
            WarpedProfile::Bump { beta } => {
                let (s, c) = t.sin_cos();
                let q = 1.0 + 2.0 * beta * s * s;
                (beta * s * s).exp() * s * (2.0 * beta * c * c * q - q + 4.0 * beta * c * c)
            }
            WarpedProfile::Table(tab) => tab.eval(t).2,
        }
    }

    /// `f''(t) / f(t)`, with the removable singularities at `0` and `pi`
    /// filled by their limits.
    pub fn ratio(&self, t: f64) -> f64 {
        match self {
            WarpedProfile::Round => -1.0,
            WarpedProfile::Bump { beta } => {
                let (s, c) = t.sin_cos();
                let q = 1.0 + 2.0 * beta * s * s;
                2.0 * beta * c * c * q - q + 4.0 * beta * c * c
            }
            WarpedProfile::Table(tab) => tab.ratio(t),
        }
    }

    /// Radial sectional curvature `-f''/f`.
    pub fn curvature(&self, t: f64) -> f64 {
        -self.ratio(t)
    }

    /// Check `f(0) = 0, f'(0) = 1, f(pi) = 0, f'(pi) = -1` and `f > 0` inside.
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("f(0)", self.f(0.0), 0.0),
            ("f'(0)", self.fp(0.0), 1.0),
            ("f(pi)", self.f(PI), 0.0),
            ("f'(pi)", self.fp(PI), -1.0),
        ];
        for (name, got, want) in checks {
            if !got.is_finite() || (got - want).abs() > BOUNDARY_TOL {
                return Err(Error::InvalidProfile(format!(
                    "{name} = {got:e}, expected {want} (not a single-cut-point model normalized to distance pi)"
                )));
            }
        }
        let samples = 2000;
        for k in 1..samples {
            let t = PI * k as f64 / samples as f64;
            let v = self.f(t);
            if !(v > 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "f({t:.6}) = {v:e} is not positive (conjugate point before pi)"
                )));
            }
        }
        Ok(())
    }
}

/// Sampled profile `(t, f, f', f'')` with explicit endpoint curvatures.
///
/// `f` is cubic Hermite from `(f, f')`, `f'` cubic Hermite from `(f', f'')`
/// and `f''` cubic Hermite with centered-difference slopes. On the first and
/// last interval `f''/f` is blended linearly into the supplied endpoint limit.
#[derive(Debug, Clone, PartialEq)]
pub struct TableProfile {
    t: Vec<f64>,
    f: Vec<f64>,
    fp: Vec<f64>,
    fpp: Vec<f64>,
    fpp_slope: Vec<f64>,
    /// `-f''/f` limit at `t = 0`.
    pub curvature_at_p: f64,
    /// `-f''/f` limit at `t = pi`.
    pub curvature_at_q: f64,
}

impl TableProfile {
    pub fn new(rows: Vec<[f64; 4]>, curvature_at_p: f64, curvature_at_q: f64) -> Result<Self> {
        if rows.len() < 4 {
            return Err(Error::InvalidProfile(
                "profile table needs at least 4 rows".into(),
            ));
        }
        for w in rows.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(Error::InvalidProfile(
                    "profile table t column must be strictly increasing".into(),
                ));
            }
        }
        let first = rows[0][0];
        let last = rows[rows.len() - 1][0];
        if first.abs() > BOUNDARY_TOL || (last - PI).abs() > 1e-9 {
            return Err(Error::InvalidProfile(format!(
                "profile table must span [0, pi], got [{first}, {last}]"
            )));
        }
        let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let f = rows.iter().map(|r| r[1]).collect();
        let fp = rows.iter().map(|r| r[2]).collect();
        let fpp: Vec<f64> = rows.iter().map(|r| r[3]).collect();
        let m = t.len();
        let fpp_slope = (0..m)
            .map(|i| {
                let (a, b) = if i == 0 {
                    (0, 1)
                } else if i == m - 1 {
                    (m - 2, m - 1)
                } else {
                    (i - 1, i + 1)
                };
                (fpp[b] - fpp[a]) / (t[b] - t[a])
            })
            .collect();
        Ok(TableProfile {
            t,
            f,
            fp,
            fpp,
            fpp_slope,
            curvature_at_p,
            curvature_at_q,
        })
    }

    /// Read a CSV with header exactly `t,f,fp,fpp`.
    pub fn from_csv(path: &Path, curvature_at_p: f64, curvature_at_q: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
        if names != ["t", "f", "fp", "fpp"] {
            return Err(Error::InvalidProfile(format!(
                "profile CSV columns must be exactly t,f,fp,fpp, got {}",
                names.join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut row = [0.0; 4];
            for (k, field) in rec.iter().enumerate().take(4) {
                row[k] = field.trim().parse::<f64>().map_err(|e| {
                    Error::InvalidProfile(format!("bad number {field:?} in profile CSV: {e}"))
                })?;
            }
            rows.push(row);
        }
        TableProfile::new(rows, curvature_at_p, curvature_at_q)
    }

    fn locate(&self, t: f64) -> usize {
        let m = self.t.len();
        match self.t.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(m - 2),
            Err(i) => i.saturating_sub(1).min(m - 2),
        }
    }

    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let i = self.locate(t);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let herm = |y0: f64, y1: f64, m0: f64, m1: f64| {
            let s2 = s * s;
            let s3 = s2 * s;
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0
                + (s3 - 2.0 * s2 + s) * h * m0
                + (-2.0 * s3 + 3.0 * s2) * y1
                + (s3 - s2) * h * m1
        };
        (
            herm(self.f[i], self.f[i + 1], self.fp[i], self.fp[i + 1]),
            herm(self.fp[i], self.fp[i + 1], self.fpp[i], self.fpp[i + 1]),
            herm(
                self.fpp[i],
                self.fpp[i + 1],
                self.fpp_slope[i],
                self.fpp_slope[i + 1],
            ),
        )
    }

    fn ratio(&self, t: f64) -> f64 {
        let m = self.t.len();
        let (t1, tm) = (self.t[1], self.t[m - 2]);
        let inner = |t: f64| {
            let (f, _, fpp) = self.eval(t);
            fpp / f
        };
        if t <= t1 {
            let w = (t / t1).clamp(0.0, 1.0);
            (1.0 - w) * (-self.curvature_at_p) + w * inner(t1)
        } else if t >= tm {
            let w = ((PI - t) / (PI - tm)).clamp(0.0, 1.0);
            (1.0 - w) * (-self.curvature_at_q) + w * inner(tm)
        } else {
            inner(t)
        }
    }
}

pub type CurvatureFn = dyn Fn(f64, &DVector<f64>, &DMatrix<f64>) -> DMatrix<f64> + Send + Sync;

/// Curvature field supplied directly, without a realizing metric.
#[derive(Clone)]
pub enum SyntheticField {
    /// `a = -kappa I`
    Constant { kappa: f64 },
    /// `a = -E^T S(t) E` with `S(t) = kappa I + eta sin(t) diag(d)`, `d`
    /// linearly spaced from 1 to -1; depends on the direction `u` through the
    /// frame `E` of `u^perp`.
    Anisotropic { kappa: f64, eta: f64 },
    /// Arbitrary `(t, u, frame) -> a`.
    Custom(Arc<CurvatureFn>),
}

impl fmt::Debug for SyntheticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticField::Constant { kappa } => write!(f, "Constant {{ kappa: {kappa} }}"),
            SyntheticField::Anisotropic { kappa, eta } => {
                write!(f, "Anisotropic {{ kappa: {kappa}, eta: {eta} }}")
            }
            SyntheticField::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Warped,
    Synthetic,
    Charted,
}

#[derive(Debug, Clone)]
pub enum RadialModel {
    Warped(WarpedProfile),
    Synthetic(SyntheticField),
    Charted(ChartedMetric),
}

/// A pointed model exposed through its radial curvature matrices.
#[derive(Debug, Clone)]
pub struct RadialGeometry {
    n: usize,
    model: RadialModel,
}

/// Build the geometry of the warped product `dt^2 + f(t)^2 g_{S^{n-1}}`.
pub fn warped_geometry(n: usize, profile: WarpedProfile) -> Result<RadialGeometry> {
    check_dim(n)?;
    profile.validate()?;
    Ok(RadialGeometry {
        n,
        model: RadialModel::Warped(profile),
    })
}

pub fn synthetic_geometry(n: usize, field: SyntheticField) -> Result<RadialGeometry> {
    check_dim(n)?;
    Ok(RadialGeometry {
        n,
        model: RadialModel::Synthetic(field),
    })
}

pub fn charted_geometry(metric: ChartedMetric) -> RadialGeometry {
    RadialGeometry {
        n: metric.dim(),
        model: RadialModel::Charted(metric),
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "dimension must be >= 2, got {n}"
        )));
    }
    Ok(())
}

impl RadialGeometry {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GeometryKind {
        match self.model {
            RadialModel::Warped(_) => GeometryKind::Warped,
            RadialModel::Synthetic(_) => GeometryKind::Synthetic,
            RadialModel::Charted(_) => GeometryKind::Charted,
        }
    }

    pub fn model(&self) -> &RadialModel {
        &self.model
    }

    /// Chart realization, if this model has one (warped profiles in n = 2, 3
    /// and charted metrics).
    pub fn chart(&self) -> Option<ChartedMetric> {
        match &self.model {
            RadialModel::Charted(m) => Some(m.clone()),
            RadialModel::Warped(p) if (2..=3).contains(&self.n) => {
                ChartedMetric::new(self.n, p.clone(), 0.0, None).ok()
            }
            _ => None,
        }
    }

    /// `a(t; u)` in the orthonormal frame `frame` (columns spanning `u^perp`).
    pub fn curvature_in_frame(
        &self,
        t: f64,
        u: &DVector<f64>,
        frame: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let m = self.n - 1;
        match &self.model {
            RadialModel::Warped(p) => DMatrix::identity(m, m) * p.ratio(t),
            RadialModel::Charted(c) => DMatrix::identity(m, m) * c.radial_ratio(t, u),
            RadialModel::Synthetic(SyntheticField::Constant { kappa }) => {
                DMatrix::identity(m, m) * (-kappa)
            }
            RadialModel::Synthetic(SyntheticField::Anisotropic { kappa, eta }) => {
                let n = self.n;
                let s = DMatrix::from_fn(n, n, |i, j| {
                    if i != j {
                        return 0.0;
                    }
                    let d = if n == 1 {
                        0.0
                    } else {
                        1.0 - 2.0 * i as f64 / (n - 1) as f64
                    };
                    kappa + eta * t.sin() * d
                });
                -(frame.transpose() * s * frame)
            }
            RadialModel::Synthetic(SyntheticField::Custom(func)) => func(t, u, frame),
        }
    }

    /// `a(t; u)` in the deterministic Gram-Schmidt frame of `u`.
    pub fn curvature(&self, t: f64, u: &DVector<f64>) -> DMatrix<f64> {
        self.curvature_in_frame(t, u, &orthonormal_frame(u))
    }
}

/// Linear isometry `T_p M_1 -> T_p M_2` in canonical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryMatrix(DMatrix<f64>);

impl IsometryMatrix {
    pub const TOL: f64 = 1e-12;

    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "isometry must be square, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        let defect = orthogonality_defect(&q);
        if !(defect <= Self::TOL) {
            return Err(Error::NotOrthogonal(defect));
        }
        Ok(IsometryMatrix(q))
    }

    pub fn identity(n: usize) -> Self {
        IsometryMatrix(DMatrix::identity(n, n))
    }

    /// Haar-distributed orthogonal matrix from a seeded Gaussian QR.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                let col = -q.column(j);
                q.set_column(j, &col);
            }
        }
        IsometryMatrix(q)
    }

    /// Rotation by `angle` in the plane of coordinates `i`, `j`.
    pub fn plane_rotation(n: usize, i: usize, j: usize, angle: f64) -> Self {
        let mut q = DMatrix::identity(n, n);
        let (s, c) = angle.sin_cos();
        q[(i, i)] = c;
        q[(j, j)] = c;
        q[(i, j)] = -s;
        q[(j, i)] = s;
        IsometryMatrix(q)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * v
    }
}

/// Radial sectional curvature `-x^T a x` of the plane spanned by the unit
/// frame vector with coordinates `x` and the radial direction.
pub fn sectional_curvature(a: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    if a.nrows() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "curvature matrix is {}x{}, vector has length {}",
            a.nrows(),
            a.ncols(),
            x.len()
        )));
    }
    let norm = x.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "direction must be a unit vector, |x| = {norm}"
        )));
    }
    Ok(-(x.transpose() * a * x)[(0, 0)])
}

/// Recover `a` from radial sectional curvatures alone:
/// `a_ii = -K(e_i)` and `a_ij = (K(e_i) + K(e_j))/2 - K((e_i + e_j)/sqrt 2)`.
pub fn polarization_roundtrip(a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    let unit = |i: usize| {
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        v
    };
    let k: Vec<f64> = (0..m)
        .map(|i| sectional_curvature(a, &unit(i)).unwrap())
        .collect();
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            -k[i]
        } else {
            let mixed = (unit(i) + unit(j)) / 2f64.sqrt();
            0.5 * (k[i] + k[j]) - sectional_curvature(a, &mixed).unwrap()
        }
    })
}

/// Asymmetry of `a(t;u)` (diagnostic for user-supplied fields).
pub fn curvature_asymmetry(g: &RadialGeometry, t: f64, u: &DVector<f64>) -> f64 {
    asymmetry(&g.curvature(t, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(v: Vec<f64>) -> DVector<f64> {
        DVector::from_vec(v).normalize()
    }

    #[test]
    fn warped_examples() {
        let round = warped_geometry(2, WarpedProfile::Round).unwrap();
        let a = round.curvature(PI / 2.0, &unit(vec![0.3, 0.7]));
        assert!((a[(0, 0)] + 1.0).abs() < 1e-15);

        let bump = warped_geometry(2, WarpedProfile::bump(0.01)).unwrap();
        let a = bump.curvature(PI / 2.0, &unit(vec![1.0, 0.0]));
        assert!((a[(0, 0)] + 1.02).abs() < 1e-14);

        let flat_bump = warped_geometry(3, WarpedProfile::bump(0.0)).unwrap();
        let round3 = warped_geometry(3, WarpedProfile::Round).unwrap();
        for k in 0..=20 {
            let t = PI * k as f64 / 20.0;
            let u = unit(vec![1.0, -2.0, 0.5]);
            assert!((flat_bump.curvature(t, &u) - round3.curvature(t, &u)).amax() < 1e-14);
        }
    }

    #[test]
    fn profile_boundary_conditions() {
        for p in [
            WarpedProfile::Round,
            WarpedProfile::bump(0.01),
            WarpedProfile::bump(-0.3),
        ] {
            p.validate().unwrap();
        }
    }

    #[test]
    fn bad_profile_rejected() {
        // f(t) = 2 sin t violates f'(0) = 1
        let rows: Vec<[f64; 4]> = (0..=64)
            .map(|k| {
                let t = PI * k as f64 / 64.0;
                [t, 2.0 * t.sin(), 2.0 * t.cos(), -2.0 * t.sin()]
            })
            .collect();
        let tab = TableProfile::new(rows, 1.0, 1.0).unwrap();
        let err = warped_geometry(2, WarpedProfile::Table(tab)).unwrap_err();
        assert!(matches!(err, Error::InvalidProfile(_)));
    }

    #[test]
    fn table_profile_reproduces_bump() {
        let bump = WarpedProfile::bump(0.05);
        let rows: Vec<[f64; 4]> = (0..=512)
            .map(|k| {
                let t = PI * k as f64 / 512.0;
                [t, bump.f(t), bump.fp(t), bump.fpp(t)]
            })
            .collect();
        let tab = WarpedProfile::Table(
            TableProfile::new(rows, bump.curvature(0.0), bump.curvature(PI)).unwrap(),
        );
        tab.validate().unwrap();
        for k in 0..=300 {
            let t = PI * (k as f64 + 0.37) / 301.0;
            assert!((tab.f(t) - bump.f(t)).abs() < 1e-9);
            assert!((tab.ratio(t) - bump.ratio(t)).abs() < 1e-3, "t={t}");
        }
        assert!((tab.ratio(0.0) - bump.ratio(0.0)).abs() < 1e-12);
    }

    #[test]
    fn bump_curvature_matches_finite_differences() {
        let p = WarpedProfile::bump(0.2);
        let h = 1e-4;
        for k in 1..1000 {
            let t = PI * k as f64 / 1000.0;
            let fd = (p.f(t + h) - 2.0 * p.f(t) + p.f(t - h)) / (h * h);
            let k_fd = -fd / p.f(t);
            let sec = sectional_curvature(
                &warped_geometry(2, p.clone())
                    .unwrap()
                    .curvature(t, &unit(vec![1.0, 0.0])),
                &DVector::from_vec(vec![1.0]),
            )
            .unwrap();
            // truncation h^2 f''''/12 relative to f
            let tol = 1e-8 + 1e-7 / p.f(t);
            assert!((sec - k_fd).abs() < tol, "t={t}: {sec} vs {k_fd}");
        }
    }

    #[test]
    fn sectional_curvature_examples() {
        let a = DMatrix::from_element(1, 1, -1.0);
        assert_eq!(
            sectional_curvature(&a, &DVector::from_vec(vec![1.0])).unwrap(),
            1.0
        );
        let a = DMatrix::identity(2, 2) * -1.02;
        let x = unit(vec![0.6, 0.8]);
        assert!((sectional_curvature(&a, &x).unwrap() - 1.02).abs() < 1e-15);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let x = unit(vec![1.0, 1.0]);
        assert!((sectional_curvature(&a, &x).unwrap() - 1.5).abs() < 1e-15);
        assert!(sectional_curvature(&a, &DVector::from_vec(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn polarization_examples() {
        let a = DMatrix::from_element(1, 1, -1.0);
        assert_eq!(polarization_roundtrip(&a), a);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        assert!((polarization_roundtrip(&a) - &a).amax() < 1e-15);
    }

    #[test]
    fn isometry_validation() {
        assert!(IsometryMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0])).is_err());
        let q = IsometryMatrix::random(5, 11);
        assert!(orthogonality_defect(q.matrix()) < 1e-13);
        assert!(IsometryMatrix::new(q.matrix().clone()).is_ok());
    }

    #[test]
    fn anisotropic_field_is_frame_covariant() {
        let g = synthetic_geometry(
            4,
            SyntheticField::Anisotropic {
                kappa: 1.0,
                eta: 0.3,
            },
        )
        .unwrap();
        let u = unit(vec![0.2, -0.4, 0.7, 0.1]);
        let frame = orthonormal_frame(&u);
        // re-base the frame with a rotation of u^perp
        let r = IsometryMatrix::random(3, 5);
        let rebased = &frame * r.matrix();
        for k in 0..10 {
            let t = 0.3 * k as f64;
            let a = g.curvature_in_frame(t, &u, &frame);
            let b = g.curvature_in_frame(t, &u, &rebased);
            assert!(asymmetry(&a) < 1e-14);
            let ea = a.symmetric_eigenvalues();
            let eb = b.symmetric_eigenvalues();
            let mut ea: Vec<f64> = ea.iter().copied().collect();
            let mut eb: Vec<f64> = eb.iter().copied().collect();
            ea.sort_by(f64::total_cmp);
            eb.sort_by(f64::total_cmp);
            for (x, y) in ea.iter().zip(&eb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn polarization_recovers_symmetric_matrices(vals in proptest::collection::vec(-5.0f64..5.0, 16)) {
            let m = DMatrix::from_vec(4, 4, vals);
            let a = (&m + m.transpose()) * 0.5;
            let back = polarization_roundtrip(&a);
            prop_assert!((back - a).amax() < 1e-12);
        }
    }
}
