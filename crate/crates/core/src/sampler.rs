//! Deterministic direction sampling on the unit sphere S^{n-1} with a local
//! hill-climbing refinement around the best sample.
//!
//! Point sets: golden-angle sequence on the circle (n = 2), Fibonacci lattice
//! (n = 3), Halton points pushed through the inverse normal CDF and normalized
//! (n > 3). All are deterministic given the seed, which only applies a
//! Cranley-Patterson style shift.

use crate::linalg::{orthonormal_frame, rotate_towards};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

const HALTON_PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_true")]
    pub refine: bool,
    /// Initial hill-climb step in radians.
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    /// Hill-climb stops once the step shrinks below this.
    #[serde(default = "default_min_step")]
    pub min_step: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_directions() -> usize {
    512
}
fn default_true() -> bool {
    true
}
fn default_max_step() -> f64 {
    0.1
}
fn default_min_step() -> f64 {
    1e-3
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            directions: default_directions(),
            refine: true,
            max_step: default_max_step(),
            min_step: default_min_step(),
            seed: 0,
        }
    }
}

/// Result of a sampled optimization over directions.
#[derive(Debug, Clone)]
pub struct Extremum {
    pub value: f64,
    pub argument: DVector<f64>,
    /// Best value over the raw point set, before refinement.
    pub sampled_value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct DirectionSampler {
    n: usize,
    spec: SamplerSpec,
    points: Vec<DVector<f64>>,
}

impl DirectionSampler {
    pub fn new(n: usize, spec: SamplerSpec) -> Self {
        assert!(n >= 2, "sphere dimension must be >= 1");
        let count = spec.directions.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let points = match n {
            2 => {
                let golden = (5f64.sqrt() - 1.0) / 2.0;
                let shift: f64 = rng.gen();
                (0..count)
                    .map(|k| {
                        let theta = 2.0 * PI * (k as f64 * golden + shift).fract();
                        DVector::from_vec(vec![theta.cos(), theta.sin()])
                    })
                    .collect()
            }
            3 => {
                let golden = (1.0 + 5f64.sqrt()) / 2.0;
                let shift: f64 = rng.gen();
                (0..count)
                    .map(|k| {
                        let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                        let r = (1.0 - z * z).max(0.0).sqrt();
                        let theta = 2.0 * PI * (k as f64 / golden + shift).fract();
                        DVector::from_vec(vec![r * theta.cos(), r * theta.sin(), z])
                    })
                    .collect()
            }
            _ => {
                let normal = Normal::new(0.0, 1.0).expect("standard normal");
                let shifts: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
                (1..=count as u64)
                    .map(|k| {
                        let v = DVector::from_fn(n, |i, _| {
                            let base = HALTON_PRIMES[i % HALTON_PRIMES.len()];
                            let mut p = (radical_inverse(k, base) + shifts[i]).fract();
                            p = p.clamp(1e-12, 1.0 - 1e-12);
                            normal.inverse_cdf(p)
                        });
                        let norm = v.norm();
                        v / norm
                    })
                    .collect()
            }
        };
        DirectionSampler { n, spec, points }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn maximize<F>(&self, f: F) -> Extremum
    where
        F: Fn(&DVector<f64>) -> f64 + Sync,
    {
        self.optimize(f)
    }

    pub fn minimize<F>(&self, f: F) -> Extremum
    where
        F: Fn(&DVector<f64>) -> f64 + Sync,
    {
        let mut ext = self.optimize(|u| -f(u));
        ext.value = -ext.value;
        ext.sampled_value = -ext.sampled_value;
        ext
    }

    fn optimize<F>(&self, f: F) -> Extremum
    where
        F: Fn(&DVector<f64>) -> f64 + Sync,
    {
        let values: Vec<f64> = self.points.par_iter().map(|u| f(u)).collect();
        let mut best = 0;
        for (i, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = i;
            }
        }
        let sampled_value = values[best];
        let mut ext = Extremum {
            value: sampled_value,
            argument: self.points[best].clone(),
            sampled_value,
            evaluations: values.len(),
        };
        if self.spec.refine {
            self.hill_climb(&f, &mut ext);
        }
        ext
    }

    fn hill_climb<F>(&self, f: &F, ext: &mut Extremum)
    where
        F: Fn(&DVector<f64>) -> f64 + Sync,
    {
        let mut step = self.spec.max_step;
        let mut iterations = 0;
        while step >= self.spec.min_step && iterations < 400 {
            iterations += 1;
            let frame = orthonormal_frame(&ext.argument);
            let candidates: Vec<DVector<f64>> = (0..frame.ncols())
                .flat_map(|j| {
                    let w = frame.column(j).into_owned();
                    [
                        rotate_towards(&ext.argument, &w, step),
                        rotate_towards(&ext.argument, &w, -step),
                    ]
                })
                .collect();
            let values: Vec<f64> = candidates.par_iter().map(|u| f(u)).collect();
            ext.evaluations += values.len();
            let mut best = None;
            let mut best_val = ext.value;
            for (i, v) in values.iter().enumerate() {
                if *v > best_val {
                    best_val = *v;
                    best = Some(i);
                }
            }
            match best {
                Some(i) => {
                    ext.value = best_val;
                    ext.argument = candidates[i].clone();
                }
                None => step *= 0.5,
            }
        }
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += f * (k % base) as f64;
        k /= base;
        f *= inv;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_are_unit_and_deterministic() {
        for n in [2, 3, 4, 6] {
            let s = DirectionSampler::new(
                n,
                SamplerSpec {
                    directions: 64,
                    ..Default::default()
                },
            );
            let t = DirectionSampler::new(
                n,
                SamplerSpec {
                    directions: 64,
                    ..Default::default()
                },
            );
            assert_eq!(s.points().len(), 64);
            for (a, b) in s.points().iter().zip(t.points()) {
                assert!((a.norm() - 1.0).abs() < 1e-14);
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn circle_sequence_is_nested() {
        let small = DirectionSampler::new(
            2,
            SamplerSpec {
                directions: 64,
                ..Default::default()
            },
        );
        let big = DirectionSampler::new(
            2,
            SamplerSpec {
                directions: 256,
                ..Default::default()
            },
        );
        for (a, b) in small.points().iter().zip(big.points()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn refinement_finds_smooth_maximum() {
        let target = DVector::from_vec(vec![0.3, -0.5, 0.81]).normalize();
        let s = DirectionSampler::new(
            3,
            SamplerSpec {
                directions: 32,
                ..Default::default()
            },
        );
        let ext = s.maximize(|u| u.dot(&target));
        assert!(ext.value >= ext.sampled_value);
        assert!(ext.value > 1.0 - 1e-5, "value {}", ext.value);
    }

    #[test]
    fn minimize_reports_minimum() {
        let s = DirectionSampler::new(
            2,
            SamplerSpec {
                directions: 16,
                ..Default::default()
            },
        );
        let ext = s.minimize(|u| u[0]);
        assert!(ext.value < -1.0 + 1e-5);
        assert!(ext.value <= ext.sampled_value);
    }
}
