use nalgebra::DVector;
use radcmp::exp_log_maps::{build_comparison, ChartedMetric};
use radcmp::mollify_check::{blend_and_check, MollifierConfig};
use radcmp::radial_models::{IsometryMatrix, WarpedProfile};

fn perturbed_pair(amplitude: f64) -> radcmp::exp_log_maps::ComparisonMap {
    let m1 = ChartedMetric::new(2, WarpedProfile::Round, 0.0, None).unwrap();
    let axis = DVector::from_vec(vec![0.6, 0.8]);
    let m2 = ChartedMetric::new(2, WarpedProfile::bump(1e-3), amplitude, Some(axis)).unwrap();
    build_comparison(m1, m2, IsometryMatrix::plane_rotation(2, 0, 1, 0.4)).unwrap()
}

#[test]
fn annulus_gaps_shrink_with_epsilon() {
    let cm = perturbed_pair(0.05);
    let mut last: Option<(f64, f64)> = None;
    for eps in [4e-2, 2e-2, 1e-2, 5e-3] {
        let cfg = MollifierConfig {
            epsilon: eps,
            samples: 600,
            seed: 5,
            ..Default::default()
        };
        let rep = blend_and_check(&cm, &cfg).unwrap();
        assert!(rep.blend_identity_ok, "eps {eps}");
        assert!(
            rep.pass,
            "eps {eps}: min singular value {}",
            rep.min_singular_value
        );
        if let Some((gap, jgap)) = last {
            assert!(
                rep.max_mollify_gap < gap,
                "eps {eps}: {} !< {gap}",
                rep.max_mollify_gap
            );
            assert!(
                rep.max_jacobian_gap < jgap,
                "eps {eps}: {} !< {jgap}",
                rep.max_jacobian_gap
            );
        }
        last = Some((rep.max_mollify_gap, rep.max_jacobian_gap));
    }
}

#[test]
fn warped_pair_passes_at_small_epsilon() {
    let m1 = ChartedMetric::new(2, WarpedProfile::Round, 0.0, None).unwrap();
    let m2 = ChartedMetric::new(2, WarpedProfile::bump(1e-3), 0.0, None).unwrap();
    let cm = build_comparison(m1, m2, IsometryMatrix::random(2, 1)).unwrap();
    for eps in [1e-2, 5e-3] {
        let rep = blend_and_check(
            &cm,
            &MollifierConfig {
                epsilon: eps,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.pass && rep.samples >= 1000);
        assert_eq!(rep.regions.len(), 3);
        assert!(rep.regions.iter().all(|r| r.samples >= 333));
    }
}

#[test]
fn wide_kernel_on_thin_annulus_is_reported_not_forced() {
    let cm = perturbed_pair(0.5);
    let cfg = MollifierConfig {
        epsilon: 0.2,
        r: Some(0.5),
        big_r: Some(0.6),
        samples: 300,
        ..Default::default()
    };
    let rep = blend_and_check(&cm, &cfg).unwrap();
    assert_eq!(rep.pass, rep.min_singular_value > 1e-6);
    assert!(rep.max_mollify_gap > 0.0);
    assert_eq!(
        rep.params.defaults_used,
        vec!["a".to_string(), "resolution".to_string()]
    );
}
