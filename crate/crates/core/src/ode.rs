//! Explicit Runge-Kutta integrators.
//!
//! `dopri5` is the Dormand-Prince 5(4) embedded pair with adaptive step size
//! control and Hairer's fourth-order continuous extension, so solutions can be
//! sampled on an arbitrary output grid without shortening steps.
//! `rk4` is a classical fixed-step fallback used for reproducibility runs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrator selection and tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum IntegratorSpec {
    /// Adaptive Dormand-Prince 5(4) with dense output.
    Dopri5 {
        #[serde(default = "default_tol")]
        rtol: f64,
        #[serde(default = "default_tol")]
        atol: f64,
    },
    /// Classical RK4 with a fixed number of sub-steps per output interval.
    Rk4 {
        #[serde(default = "default_substeps")]
        substeps: usize,
    },
}

fn default_tol() -> f64 {
    1e-11
}

fn default_substeps() -> usize {
    16
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec::Dopri5 {
            rtol: 1e-11,
            atol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrate `y' = f(t, y)` from `grid[0]` through the ascending `grid`,
/// returning the state at every grid node.
pub fn integrate<F>(spec: &IntegratorSpec, f: F, y0: &[f64], grid: &[f64]) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    match *spec {
        IntegratorSpec::Dopri5 { rtol, atol } => dopri5(f, y0, grid, rtol, atol).map(|(ys, _)| ys),
        IntegratorSpec::Rk4 { substeps } => Ok(rk4(f, y0, grid, substeps.max(1))),
    }
}

/// Adaptive Dormand-Prince 5(4) with dense output on `grid`.
pub fn dopri5<F>(
    mut f: F,
    y0: &[f64],
    grid: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<(Vec<Vec<f64>>, Stats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut out = Vec::with_capacity(grid.len());
    let mut stats = Stats::default();
    if grid.is_empty() {
        return Ok((out, stats));
    }
    let t0 = grid[0];
    let t_end = *grid.last().unwrap();
    out.push(y0.to_vec());
    if t_end <= t0 {
        for _ in 1..grid.len() {
            out.push(y0.to_vec());
        }
        return Ok((out, stats));
    }
    let span = t_end - t0;
    let h_min = span * 1e-14;

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut y1 = vec![0.0; dim];
    let mut y = y0.to_vec();
    let mut t = t0;

    f(t, &y, &mut k1);
    stats.evaluations += 1;

    let mut h = initial_step(&mut f, t, &y, &k1, span, rtol, atol);
    stats.evaluations += 1;
    let mut next_out = 1;
    let mut last_rejected = false;

    while next_out < grid.len() {
        if h < h_min {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        for i in 0..dim {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &tmp, &mut k4);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &tmp, &mut k5);
        for i in 0..dim {
            tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &tmp, &mut k6);
        for i in 0..dim {
            y1[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, &y1, &mut k7);
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..dim {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = atol + rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / dim.max(1) as f64).sqrt();

        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = if t_end - (t + h) < h_min {
                t_end
            } else {
                t + h
            };
            // dense output for every grid node inside (t, t_new]
            while next_out < grid.len() && grid[next_out] <= t_new {
                let theta = ((grid[next_out] - t) / h).clamp(0.0, 1.0);
                let th1 = 1.0 - theta;
                let mut ys = vec![0.0; dim];
                for i in 0..dim {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    let r4 = ydiff - h * k7[i] - bspl;
                    let r5 = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                    ys[i] = y[i] + theta * (ydiff + th1 * (bspl + theta * (r4 + th1 * r5)));
                }
                if grid[next_out] == t_new {
                    ys.copy_from_slice(&y1);
                }
                out.push(ys);
                next_out += 1;
            }
            t = t_new;
            y.copy_from_slice(&y1);
            k1.copy_from_slice(&k7);
            let mut fac = if err == 0.0 {
                10.0
            } else {
                0.9 * err.powf(-0.2)
            };
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h *= fac;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    Ok((out, stats))
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], f0: &[f64], span: f64, rtol: f64, atol: f64) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y.len().max(1) as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..y.len() {
        let sc = atol + rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let d0 = (d0 / dim).sqrt();
    let d1 = (d1 / dim).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(t + h0, &y1, &mut f1);
    let mut d2 = 0.0;
    for i in 0..y.len() {
        let sc = atol + rtol * y[i].abs();
        d2 += ((f1[i] - f0[i]) / sc).powi(2);
    }
    let d2 = (d2 / dim).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Classical RK4 with `substeps` equal steps inside each output interval.
pub fn rk4<F>(mut f: F, y0: &[f64], grid: &[f64], substeps: usize) -> Vec<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut out = Vec::with_capacity(grid.len());
    if grid.is_empty() {
        return out;
    }
    let mut y = y0.to_vec();
    out.push(y.clone());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    for w in grid.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        let mut t = w[0];
        for _ in 0..substeps {
            f(t, &y, &mut k1);
            for i in 0..dim {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            f(t + 0.5 * h, &tmp, &mut k2);
            for i in 0..dim {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            f(t + 0.5 * h, &tmp, &mut k3);
            for i in 0..dim {
                tmp[i] = y[i] + h * k3[i];
            }
            f(t + h, &tmp, &mut k4);
            for i in 0..dim {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        out.push(y.clone());
    }
    out
}

/// `count` equally spaced nodes on `[a, b]`, endpoints exact.
pub fn uniform_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let h = (b - a) / (count - 1) as f64;
    (0..count)
        .map(|i| if i == count - 1 { b } else { a + h * i as f64 })
        .collect()
}
