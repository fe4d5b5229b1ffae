//! Grid-scale smoothing of `F~` near the origin of the chart at `q1` and the
//! immersion check of the blended map `(1 - g) F~ + g F~_eps` (n = 2).

use crate::error::{Error, Result};
use crate::exp_log_maps::ComparisonMap;
use crate::linalg::singular_value_range;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Angular resolution of the `sigma` table.
pub const SIGMA_TABLE_SIZE: usize = 4096;
/// Required margin of the smallest singular value.
pub const IMMERSION_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Half-width of the grid square; default pi/2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Plateau radius of the bump `g`; default a/3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Support radius of the bump `g`; default 2a/3.
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub big_r: Option<f64>,
    /// Grid nodes per axis; default chosen so that eps >= 3h.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_epsilon() -> f64 {
    1e-2
}
fn default_samples() -> usize {
    1200
}

impl Default for MollifierConfig {
    fn default() -> Self {
        MollifierConfig {
            epsilon: default_epsilon(),
            a: None,
            r: None,
            big_r: None,
            resolution: None,
            samples: default_samples(),
            seed: 0,
        }
    }
}

/// Mollifier parameters with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedMollifier {
    pub epsilon: f64,
    pub a: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub nodes: usize,
    pub h: f64,
    pub samples: usize,
    pub seed: u64,
    /// Parameters that fell back to defaults.
    pub defaults_used: Vec<String>,
}

impl MollifierConfig {
    pub fn resolve(&self) -> Result<ResolvedMollifier> {
        let mut defaults_used = Vec::new();
        let mut pick = |v: Option<f64>, name: &str, fallback: f64| {
            v.unwrap_or_else(|| {
                defaults_used.push(name.to_string());
                fallback
            })
        };
        let a = pick(self.a, "a", PI / 2.0);
        let r = pick(self.r, "r", a / 3.0);
        let big_r = pick(self.big_r, "R", 2.0 * a / 3.0);
        let eps = self.epsilon;
        if !(0.0 < r && r < big_r && big_r < a && a < PI) {
            return Err(Error::InvalidInput(format!(
                "need 0 < r < R < a < pi, got r = {r}, R = {big_r}, a = {a}"
            )));
        }
        if !(eps > 0.0 && eps < r) {
            return Err(Error::InvalidInput(format!(
                "need 0 < eps < r, got eps = {eps}, r = {r}"
            )));
        }
        let nodes = match self.resolution {
            Some(m) => {
                if m < 3 {
                    return Err(Error::InvalidInput(format!(
                        "resolution must be >= 3, got {m}"
                    )));
                }
                m
            }
            None => {
                defaults_used.push("resolution".to_string());
                let target = (2.0 * a / 128.0).min(eps / 3.0);
                let mut m = (2.0 * a / target).ceil() as usize + 1;
                if m % 2 == 0 {
                    m += 1;
                }
                m
            }
        };
        let h = 2.0 * a / (nodes - 1) as f64;
        if eps < 2.0 * h {
            return Err(Error::InvalidInput(format!(
                "eps = {eps} is below the grid resolution (need eps >= 2h = {})",
                2.0 * h
            )));
        }
        if self.samples < 3 {
            return Err(Error::InvalidInput("need at least 3 samples".into()));
        }
        Ok(ResolvedMollifier {
            epsilon: eps,
            a,
            r,
            big_r,
            nodes,
            h,
            samples: self.samples,
            seed: self.seed,
            defaults_used,
        })
    }
}

/// Discrete standard mollifier `rho_eps` on the lattice of spacing `h`,
/// normalized to unit discrete mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub offsets: Vec<(i64, i64)>,
    pub weights: Vec<f64>,
    pub radius: i64,
}

impl Kernel {
    pub fn new(eps: f64, h: f64) -> Self {
        let radius = (eps / h).floor() as i64;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for j in -radius..=radius {
            for i in -radius..=radius {
                let z2 = ((i * i + j * j) as f64) * h * h / (eps * eps);
                if z2 < 1.0 {
                    offsets.push((i, j));
                    weights.push((-1.0 / (1.0 - z2)).exp());
                }
            }
        }
        let mass: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= mass;
        }
        Kernel {
            offsets,
            weights,
            radius,
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_k w_k F(x + k h)`
    pub fn apply<F: Fn([f64; 2]) -> [f64; 2]>(&self, f: &F, x: [f64; 2], h: f64) -> [f64; 2] {
        let mut acc = [0.0; 2];
        for ((i, j), w) in self.offsets.iter().zip(&self.weights) {
            let v = f([x[0] + *i as f64 * h, x[1] + *j as f64 * h]);
            acc[0] += w * v[0];
            acc[1] += w * v[1];
        }
        acc
    }
}

/// Map sampled on the square `[-a, a]^2` with `nodes` nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    pub a: f64,
    pub nodes: usize,
    pub h: f64,
    /// Row-major, `x1` fastest.
    pub values: Vec<[f64; 2]>,
}

impl Grid2 {
    pub fn sample<F: Fn([f64; 2]) -> [f64; 2] + Sync>(a: f64, nodes: usize, f: F) -> Self {
        let h = 2.0 * a / (nodes - 1) as f64;
        let values = (0..nodes * nodes)
            .into_par_iter()
            .map(|k| f([-a + (k % nodes) as f64 * h, -a + (k / nodes) as f64 * h]))
            .collect();
        Grid2 {
            a,
            nodes,
            h,
            values,
        }
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [-self.a + i as f64 * self.h, -self.a + j as f64 * self.h]
    }

    pub fn get(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[j * self.nodes + i]
    }
}

/// Discrete convolution of a grid map with `rho_eps`. Nodes closer than the
/// kernel radius to the boundary keep their input values.
pub fn mollify(grid: &Grid2, eps: f64) -> Result<Grid2> {
    if eps < 2.0 * grid.h {
        return Err(Error::InvalidInput(format!(
            "eps = {eps} is below the grid resolution (need eps >= 2h = {})",
            2.0 * grid.h
        )));
    }
    let kernel = Kernel::new(eps, grid.h);
    let m = grid.nodes as i64;
    let rad = kernel.radius;
    let values = (0..grid.nodes * grid.nodes)
        .into_par_iter()
        .map(|k| {
            let (i, j) = ((k % grid.nodes) as i64, (k / grid.nodes) as i64);
            if i < rad || j < rad || i >= m - rad || j >= m - rad {
                return grid.values[k];
            }
            let mut acc = [0.0; 2];
            for ((di, dj), w) in kernel.offsets.iter().zip(&kernel.weights) {
                let v = grid.get((i + di) as usize, (j + dj) as usize);
                acc[0] += w * v[0];
                acc[1] += w * v[1];
            }
            acc
        })
        .collect();
    Ok(Grid2 {
        values,
        ..grid.clone()
    })
}

/// `sigma` on the circle tabulated as the periodic lift
/// `g(theta) = Theta(theta) - deg * theta`, with periodic cubic Hermite
/// interpolation and fourth-order difference slopes.
#[derive(Debug, Clone)]
pub struct SigmaTable {
    deg: f64,
    lift: Vec<f64>,
    slope: Vec<f64>,
}

impl SigmaTable {
    pub fn build(cm: &ComparisonMap, size: usize) -> Result<Self> {
        if cm.dim() != 2 {
            return Err(Error::InvalidInput("sigma table needs n = 2".into()));
        }
        let deg = cm.q.matrix().determinant().signum();
        let step = 2.0 * PI / size as f64;
        let raw: Vec<Result<f64>> = (0..size)
            .into_par_iter()
            .map(|k| {
                let th = k as f64 * step;
                let s = cm.sigma(&DVector::from_vec(vec![th.cos(), th.sin()]))?;
                Ok(s[1].atan2(s[0]) - deg * th)
            })
            .collect();
        let mut lift: Vec<f64> = Vec::with_capacity(size);
        for r in raw {
            let mut v = r?;
            if let Some(prev) = lift.last() {
                v += (2.0 * PI) * ((prev - v) / (2.0 * PI)).round();
            }
            lift.push(v);
        }
        let wrap = lift[size - 1] - lift[0];
        if wrap.abs() > 1.0 {
            return Err(Error::InvalidInput(format!(
                "sigma lift does not close up (jump {wrap}); sigma is not a degree +-1 circle map"
            )));
        }
        let at = |k: i64| lift[k.rem_euclid(size as i64) as usize];
        let slope = (0..size as i64)
            .map(|k| (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / (12.0 * step))
            .collect();
        Ok(SigmaTable { deg, lift, slope })
    }

    /// Angle of `sigma(cos theta, sin theta)`.
    pub fn angle(&self, theta: f64) -> f64 {
        let size = self.lift.len();
        let step = 2.0 * PI / size as f64;
        let th = theta.rem_euclid(2.0 * PI);
        let pos = th / step;
        let k = (pos.floor() as usize).min(size - 1);
        let s = pos - k as f64;
        let k1 = (k + 1) % size;
        let (y0, y1) = (self.lift[k], self.lift[k1]);
        let (m0, m1) = (self.slope[k] * step, self.slope[k1] * step);
        let s2 = s * s;
        let s3 = s2 * s;
        let g = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        self.deg * theta + g
    }

    /// `F~(x) = |x| sigma(x / |x|)`.
    pub fn f_tilde(&self, x: [f64; 2]) -> [f64; 2] {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let th = self.angle(x[1].atan2(x[0]));
        [r * th.cos(), r * th.sin()]
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 + x * (6.0 * x - 15.0))
}

/// The blended map `F_eps = (1 - g) F~ + g F~_eps` on the chart at `q1`.
pub struct BlendedMap<F> {
    pub f_tilde: F,
    pub kernel: Kernel,
    pub params: ResolvedMollifier,
}

impl<F: Fn([f64; 2]) -> [f64; 2] + Sync> BlendedMap<F> {
    pub fn new(f_tilde: F, params: ResolvedMollifier) -> Self {
        let kernel = Kernel::new(params.epsilon, params.h);
        BlendedMap {
            f_tilde,
            kernel,
            params,
        }
    }

    /// Bump `g`: 1 on `B_r`, 0 outside `B_R`.
    pub fn bump(&self, x: [f64; 2]) -> f64 {
        let rho = x[0].hypot(x[1]);
        1.0 - smoothstep((rho - self.params.r) / (self.params.big_r - self.params.r))
    }

    pub fn mollified(&self, x: [f64; 2]) -> [f64; 2] {
        self.kernel.apply(&self.f_tilde, x, self.params.h)
    }

    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        let g = self.bump(x);
        if g == 0.0 {
            return (self.f_tilde)(x);
        }
        let m = self.mollified(x);
        if g == 1.0 {
            return m;
        }
        let f = (self.f_tilde)(x);
        [(1.0 - g) * f[0] + g * m[0], (1.0 - g) * f[1] + g * m[1]]
    }

    fn jacobian<G: Fn([f64; 2]) -> [f64; 2]>(&self, f: G, x: [f64; 2]) -> DMatrix<f64> {
        let h = self.params.h;
        let d1p = f([x[0] + h, x[1]]);
        let d1m = f([x[0] - h, x[1]]);
        let d2p = f([x[0], x[1] + h]);
        let d2m = f([x[0], x[1] - h]);
        DMatrix::from_row_slice(
            2,
            2,
            &[
                (d1p[0] - d1m[0]) / (2.0 * h),
                (d2p[0] - d2m[0]) / (2.0 * h),
                (d1p[1] - d1m[1]) / (2.0 * h),
                (d2p[1] - d2m[1]) / (2.0 * h),
            ],
        )
    }

    /// Write `x1,x2,Fx1,Fx2` for the blended map on a `nodes x nodes` grid.
    pub fn dump_csv(&self, path: &Path, nodes: usize) -> Result<()> {
        let grid = Grid2::sample(self.params.a, nodes.max(2), |x| self.eval(x));
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x1", "x2", "Fx1", "Fx2"])?;
        for j in 0..grid.nodes {
            for i in 0..grid.nodes {
                let x = grid.node(i, j);
                let v = grid.get(i, j);
                w.write_record(&[x[0], x[1], v[0], v[1]].map(|z| format!("{z:e}")))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Plateau,
    Annulus,
    Outer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMinimum {
    pub region: Region,
    pub samples: usize,
    pub min_singular_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImmersionReport {
    pub params: ResolvedMollifier,
    pub kernel_points: usize,
    pub sigma_table_size: usize,
    pub samples: usize,
    pub min_singular_value: f64,
    pub regions: Vec<RegionMinimum>,
    /// `min_singular_value > 1e-6`
    pub pass: bool,
    /// Max `|F~_eps - F~|` over annulus samples.
    pub max_mollify_gap: f64,
    /// Max `|D F~_eps - D F~|` (finite differences) over annulus samples.
    pub max_jacobian_gap: f64,
    /// The blend equals `F~_eps` on `B_r` and `F~` outside `B_R` at every sample.
    pub blend_identity_ok: bool,
}

/// Lattice nodes split evenly between `B_r`, the annulus and `B_a - B_R`.
pub fn sample_nodes(p: &ResolvedMollifier) -> Vec<([f64; 2], Region)> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let per = p.samples.div_ceil(3);
    let outer = p.a - 2.0 * p.h;
    let snap = |v: f64| (((v + p.a) / p.h).round()) * p.h - p.a;
    let mut out = Vec::with_capacity(3 * per);
    for (region, lo, hi) in [
        (Region::Plateau, 0.0, p.r),
        (Region::Annulus, p.r, p.big_r),
        (Region::Outer, p.big_r, outer),
    ] {
        let mut count = 0;
        while count < per {
            let x = [snap(rng.gen_range(-hi..hi)), snap(rng.gen_range(-hi..hi))];
            let rho = x[0].hypot(x[1]);
            if rho >= lo && rho < hi {
                out.push((x, region));
                count += 1;
            }
        }
    }
    out
}

/// Sample the blended map's finite-difference Jacobian and report its
/// smallest singular value.
pub fn check_blended<F: Fn([f64; 2]) -> [f64; 2] + Sync>(
    map: &BlendedMap<F>,
    table_size: usize,
) -> ImmersionReport {
    let samples = sample_nodes(&map.params);
    struct Row {
        region: Region,
        smin: f64,
        gap: f64,
        jgap: f64,
        identity_ok: bool,
    }
    let rows: Vec<Row> = samples
        .par_iter()
        .map(|&(x, region)| {
            let jac = map.jacobian(|y| map.eval(y), x);
            let (smin, _) = singular_value_range(&jac);
            let blended = map.eval(x);
            let identity_ok = match region {
                Region::Plateau => blended == map.mollified(x),
                Region::Outer => blended == (map.f_tilde)(x),
                Region::Annulus => true,
            };
            let (gap, jgap) = if region == Region::Annulus {
                let m = map.mollified(x);
                let f = (map.f_tilde)(x);
                let jm = map.jacobian(|y| map.mollified(y), x);
                let jf = map.jacobian(&map.f_tilde, x);
                ((m[0] - f[0]).hypot(m[1] - f[1]), (jm - jf).norm())
            } else {
                (0.0, 0.0)
            };
            Row {
                region,
                smin,
                gap,
                jgap,
                identity_ok,
            }
        })
        .collect();
    let mut regions: Vec<RegionMinimum> = [Region::Plateau, Region::Annulus, Region::Outer]
        .iter()
        .map(|&region| RegionMinimum {
            region,
            samples: 0,
            min_singular_value: f64::INFINITY,
        })
        .collect();
    let mut min_sv = f64::INFINITY;
    let mut max_gap = 0.0_f64;
    let mut max_jgap = 0.0_f64;
    let mut identity_ok = true;
    for row in &rows {
        let slot = regions.iter_mut().find(|r| r.region == row.region).unwrap();
        slot.samples += 1;
        slot.min_singular_value = slot.min_singular_value.min(row.smin);
        min_sv = min_sv.min(row.smin);
        max_gap = max_gap.max(row.gap);
        max_jgap = max_jgap.max(row.jgap);
        identity_ok &= row.identity_ok;
    }
    ImmersionReport {
        params: map.params.clone(),
        kernel_points: map.kernel.weights.len(),
        sigma_table_size: table_size,
        samples: rows.len(),
        min_singular_value: min_sv,
        regions,
        pass: min_sv > IMMERSION_MARGIN,
        max_mollify_gap: max_gap,
        max_jacobian_gap: max_jgap,
        blend_identity_ok: identity_ok,
    }
}

/// Build `F~` from `cm` through a `sigma` table, blend and check.
pub fn blend_and_check(cm: &ComparisonMap, cfg: &MollifierConfig) -> Result<ImmersionReport> {
    let map = blended_map(cm, cfg)?;
    Ok(check_blended(&map, SIGMA_TABLE_SIZE))
}

/// The blended map of `cm` for `cfg`, for checks and grid dumps.
pub fn blended_map(
    cm: &ComparisonMap,
    cfg: &MollifierConfig,
) -> Result<BlendedMap<impl Fn([f64; 2]) -> [f64; 2] + Sync>> {
    if cm.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "mollifier check needs n = 2, got {}",
            cm.dim()
        )));
    }
    let params = cfg.resolve()?;
    let table = SigmaTable::build(cm, SIGMA_TABLE_SIZE)?;
    Ok(BlendedMap::new(move |x| table.f_tilde(x), params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp_log_maps::{build_comparison, ChartedMetric};
    use crate::radial_models::{IsometryMatrix, WarpedProfile};

    #[test]
    fn kernel_has_unit_mass_and_symmetry() {
        let k = Kernel::new(0.1, 0.01);
        assert!((k.mass() - 1.0).abs() < 1e-12);
        for ((i, j), w) in k.offsets.iter().zip(&k.weights) {
            let mirror = k.offsets.iter().position(|o| *o == (-i, -j)).unwrap();
            assert_eq!(*w, k.weights[mirror]);
        }
    }

    #[test]
    fn mollify_reproduces_affine_maps() {
        let a = PI / 2.0;
        let id = Grid2::sample(a, 129, |x| x);
        let lin = Grid2::sample(a, 129, |x| {
            [2.0 * x[0] - x[1] + 0.3, 0.5 * x[0] + 3.0 * x[1]]
        });
        let eps = 0.1;
        let rad = Kernel::new(eps, id.h).radius as usize;
        for g in [&id, &lin] {
            let m = mollify(g, eps).unwrap();
            for j in rad..129 - rad {
                for i in rad..129 - rad {
                    let (u, v) = (m.get(i, j), g.get(i, j));
                    assert!((u[0] - v[0]).abs() < 1e-10 && (u[1] - v[1]).abs() < 1e-10);
                }
            }
        }
        assert!(mollify(&id, 0.03).is_err());
    }

    #[test]
    fn resolve_defaults_and_rejections() {
        let p = MollifierConfig::default().resolve().unwrap();
        assert_eq!(p.a, PI / 2.0);
        assert!((p.r - PI / 6.0).abs() < 1e-15);
        assert!(p.epsilon >= 3.0 * p.h * (1.0 - 1e-12));
        assert!(p.defaults_used.contains(&"resolution".to_string()));
        let bad = MollifierConfig {
            resolution: Some(129),
            epsilon: 1e-2,
            ..Default::default()
        };
        assert!(bad.resolve().is_err());
        let bad = MollifierConfig {
            r: Some(1.0),
            big_r: Some(0.5),
            ..Default::default()
        };
        assert!(bad.resolve().is_err());
    }

    #[test]
    fn identity_comparison_passes() {
        let m = ChartedMetric::new(2, WarpedProfile::Round, 0.0, None).unwrap();
        let cm = build_comparison(m.clone(), m, IsometryMatrix::identity(2)).unwrap();
        let cfg = MollifierConfig {
            epsilon: 2e-2,
            samples: 300,
            ..Default::default()
        };
        let rep = blend_and_check(&cm, &cfg).unwrap();
        assert!(rep.pass && rep.blend_identity_ok);
        assert!((rep.min_singular_value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sigma_table_tracks_reflections() {
        let m = ChartedMetric::new(2, WarpedProfile::Round, 0.1, None).unwrap();
        let q = IsometryMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap();
        let cm = build_comparison(m.clone(), m, q).unwrap();
        let table = SigmaTable::build(&cm, 512).unwrap();
        for k in 0..20 {
            let th = 0.31 * k as f64;
            let v = DVector::from_vec(vec![th.cos(), th.sin()]);
            let s = cm.sigma(&v).unwrap();
            let got = table.angle(th);
            assert!((got.cos() - s[0]).abs() < 1e-8 && (got.sin() - s[1]).abs() < 1e-8);
        }
    }
}
