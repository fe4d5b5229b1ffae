//! `d sigma` by central differences of the shot map against the Jacobi route.

use nalgebra::DVector;
use radcmp::exp_log_maps::{build_comparison, ChartedMetric};
use radcmp::jacobi_gronwall::dsigma_deviation;
use radcmp::linalg::singular_value_range;
use radcmp::ode::IntegratorSpec;
use radcmp::radial_models::{charted_geometry, IsometryMatrix, WarpedProfile};
use radcmp::sampler::{DirectionSampler, SamplerSpec};

fn check(n: usize, amplitude: f64, beta: f64, q: IsometryMatrix) -> f64 {
    let axis = if n == 2 {
        vec![0.6, 0.8]
    } else {
        vec![0.0, 0.6, 0.8]
    };
    let m1 = ChartedMetric::new(n, WarpedProfile::Round, 0.0, None).unwrap();
    let m2 = ChartedMetric::new(
        n,
        WarpedProfile::bump(beta),
        amplitude,
        Some(DVector::from_vec(axis)),
    )
    .unwrap();
    let (g1, g2) = (charted_geometry(m1.clone()), charted_geometry(m2.clone()));
    let cm = build_comparison(m1.clone(), m2, q.clone()).unwrap();
    let sampler = DirectionSampler::new(
        n,
        SamplerSpec {
            directions: 24,
            refine: false,
            ..SamplerSpec::default()
        },
    );
    let mut worst = 0.0_f64;
    for v in sampler.points() {
        let (smin, smax) = singular_value_range(&cm.dsigma(v, 1e-5).unwrap());
        let fd = (smax - 1.0).abs().max((1.0 - smin).abs());
        let u1 = m1.sigma_qp(v).unwrap();
        let jac = dsigma_deviation(&g1, &g2, &q, &u1, &IntegratorSpec::default()).unwrap();
        worst = worst.max((fd - jac).abs());
    }
    worst
}

#[test]
fn finite_difference_and_jacobi_routes_agree_n2() {
    for (amp, q) in [
        (0.05, IsometryMatrix::random(2, 4)),
        (0.2, IsometryMatrix::plane_rotation(2, 0, 1, 2.0)),
    ] {
        let gap = check(2, amp, 1e-3, q);
        assert!(gap < 1e-4, "amplitude {amp}: discrepancy {gap:e}");
    }
}

#[test]
fn finite_difference_and_jacobi_routes_agree_n3() {
    let gap = check(3, 0.1, 1e-2, IsometryMatrix::random(3, 11));
    assert!(gap < 1e-4, "discrepancy {gap:e}");
}
