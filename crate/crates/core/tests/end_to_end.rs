use proptest::prelude::*;
use selfsim_core::ifs::presets;
use selfsim_core::projection::{projected_density, ProjectedAtoms};
use selfsim_core::{
    atomic_approx, check_ssc, closed_form_dims, density, empirical_dq, ft_2d, ft_projection,
    lq_norm, project, sample_measure, validate_system, ComplexVal, Direction, DqConfig, DqInput,
    Error, SscStatus,
};

#[test]
fn projection_pipeline_agrees_with_streaming_density() {
    let s = presets::sys_b();
    let z = Direction::from_angle(0.7);
    let atoms = atomic_approx(&s, 7).unwrap();
    let grid = projected_density(&s, z, 7, 0.02).unwrap();
    let direct = density(&project(&atoms, z), grid.x0, grid.x_max(), 0.02).unwrap();
    assert!(grid.l1_distance(&direct).unwrap() < 1e-12);
    assert!((grid.mass() - 1.0).abs() < 1e-12);
    assert!(lq_norm(&grid, 2.0).unwrap().is_finite());
}

#[test]
fn fourier_of_projection_is_a_slice_of_the_planar_transform() {
    let s = presets::sys_a();
    let atoms = atomic_approx(&s, 6).unwrap();
    let z = Direction::from_angle(2.1);
    let ts = [-40.0, -3.5, 0.0, 1.25, 17.0];
    let line = ft_projection(&atoms, z, &ts);
    let xi: Vec<ComplexVal> = ts.iter().map(|t| z.z() * *t).collect();
    let plane = ft_2d(&atoms, &xi);
    for (a, b) in line.values.iter().zip(&plane.values) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn sampled_dimension_matches_closed_form() {
    let s = presets::sys_a();
    let samples = sample_measure(&s, 60_000, 30, 11).unwrap();
    let r = s.r();
    let config = DqConfig::for_system(&s, 2.0, (r.powi(8), r.powi(2)));
    let est = empirical_dq(DqInput::Samples(&samples.points), &config).unwrap();
    let closed = closed_form_dims(&s, 2.0).unwrap().dq_closed;
    assert!((est.dq - closed).abs() < 0.1, "{} vs {closed}", est.dq);
}

#[test]
fn separation_and_invalid_input() {
    assert_eq!(check_ssc(&presets::sys_a(), 8).status, SscStatus::Proven);
    let corners = [ComplexVal::new(0.0, 0.0), ComplexVal::new(1.0, 0.0)];
    let err = validate_system(ComplexVal::new(1.2, 0.0), &corners, &[0.5, 0.5]);
    assert!(matches!(err, Err(Error::ModulusOutOfRange(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projected_transform_product_matches_atoms(angle in 0.0..6.3f64, t in -60.0..60.0f64) {
        let s = presets::sys_b();
        let z = Direction::from_angle(angle);
        let atoms = atomic_approx(&s, 5).unwrap();
        let direct = ft_projection(&atoms, z, &[t]).values[0];
        let product = ProjectedAtoms::new(&s, z, 5).fourier(t);
        prop_assert!((direct - product).norm() < 1e-12);
        prop_assert!(direct.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn density_mass_is_one_in_every_direction(angle in 0.0..6.3f64, depth in 4usize..9) {
        let s = presets::sys_a();
        let grid = projected_density(&s, Direction::from_angle(angle), depth, 0.05).unwrap();
        prop_assert!((grid.mass() - 1.0).abs() < 1e-12);
        prop_assert!(grid.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn antipodal_directions_reflect_the_density(angle in 0.0..3.1f64) {
        let s = presets::sys_a();
        let z = Direction::from_angle(angle);
        let a = project(&atomic_approx(&s, 5).unwrap(), z);
        let b = project(&atomic_approx(&s, 5).unwrap(), Direction::from_angle(angle + std::f64::consts::PI));
        for (x, y) in a.positions.iter().zip(&b.positions) {
            prop_assert!((x + y).abs() < 1e-12);
        }
    }
}
