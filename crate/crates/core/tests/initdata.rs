//! Initial-data builders: exact masses, nonnegativity, the concentration
//! family's invariants and guards.

use chemotaxis_core::*;

fn params() -> ModelParams {
    ModelParams::new(1.0, 0.5, 1.0, 1.0, Variant::FullyParabolic).unwrap()
}

#[test]
fn constant_builder_unit_disk() {
    let p = params();
    let grid = Grid::radial_disk(1.0, 64).unwrap();
    let st = build_constant(std::f64::consts::PI, &p, &grid).unwrap();
    for i in 0..grid.num_cells() {
        assert!((st.u[i] - 1.0).abs() < 1e-13);
        assert!((st.w[i] - 1.0).abs() < 1e-13);
    }
    assert!((ops::integrate(&st.u) - std::f64::consts::PI).abs() <= 1e-12 * std::f64::consts::PI);
    assert!(dissipation(&st, &p) <= 1e-25);
}

#[test]
fn bump_builder_contracts() {
    let p = params();
    for grid in [Grid::radial_disk(1.0, 128).unwrap(), Grid::rect(2.0, 1.0, 40, 20).unwrap()] {
        let center = if grid.is_chain() { [0.0, 0.0] } else { [1.0, 0.5] };
        let mass = 2.7;
        let st = build_bump(mass, center, 0.4, &p, &grid).unwrap();
        assert!((ops::integrate(&st.u) - mass).abs() <= 1e-12 * mass);
        // v = u and w kills the relaxation term at t = 0.
        let rep = energy(&st, &p);
        assert!(rep.relax_term <= 1e-20, "relax = {:e}", rep.relax_term);
        assert!(st.u.min() >= 0.0 && st.w.min() >= 0.0);
        // Compact support.
        assert_eq!(st.u.min(), 0.0);
    }
}

#[test]
fn wide_bump_approaches_constant_state() {
    let p = params();
    let grid = Grid::radial_disk(1.0, 128).unwrap();
    let mass = 2.0;
    let wide = build_bump(mass, [0.0, 0.0], 100.0, &p, &grid).unwrap();
    let flat = build_constant(mass, &p, &grid).unwrap();
    for i in 0..grid.num_cells() {
        assert!((wide.u[i] - flat.u[i]).abs() <= 1e-3 * flat.u[i]);
        assert!((wide.w[i] - flat.w[i]).abs() <= 1e-3 * flat.w[i]);
    }
}

#[test]
fn bump_center_must_match_chain_geometry() {
    let p = params();
    let grid = Grid::radial_disk(1.0, 32).unwrap();
    assert!(build_bump(1.0, [0.3, 0.0], 0.4, &p, &grid).is_err());
    // Degenerate width with no support errors out.
    let rect = Grid::rect(1.0, 1.0, 8, 8).unwrap();
    assert!(build_bump(1.0, [-5.0, -5.0], 0.1, &p, &rect).is_err());
}

#[test]
fn cosine_bump_builder_contracts() {
    let p = params();
    let grid = Grid::radial_disk(1.0, 128).unwrap();
    let mass = 2.0 * std::f64::consts::PI;
    let st = build_cosine_bump(mass, 0.2, 0.3, 0.0, &p, &grid).unwrap();
    assert!((ops::integrate(&st.u) - mass).abs() <= 1e-12 * mass);
    assert!((ops::integrate(&st.v) - 0.3 * mass).abs() <= 1e-12 * mass);
    assert!(st.u.min() > 0.0);
    // w slaved to u: relaxation residual is u - v.
    let lap = ops::laplacian_neumann(&st.w);
    let res = Field::from_fn(&grid, |i| -p.diff * lap[i] + p.delta * st.w[i] - st.u[i]);
    assert!(ops::l2_norm_sq(&res).sqrt() <= 1e-10);
    assert!(build_cosine_bump(mass, 1.2, 0.3, 0.0, &p, &grid).is_err());
}

#[test]
fn theta_family_invariants() {
    let p = params();
    let grid = Grid::anchored_disk(1.0, 256).unwrap();
    let mass = 1.2 * general_threshold_mass(p.diff);
    let data = build_theta_eta(&ThetaEtaSpec { eta: 0.2, anchor: None, mass }, &p, &grid).unwrap();
    assert!(ops::mean(&data.mean_zero_profile).abs() <= 1e-10);
    assert!((ops::integrate(&data.state.u) - mass).abs() <= 1e-12 * mass);
    assert!(data.state.u.min() >= 0.0);
    assert!(data.state.v.min() >= 0.0);
    assert!(data.state.w.min() >= 0.0);
    assert!(data.clip_fraction <= 0.01);
}

#[test]
fn theta_rejects_unresolved_scales() {
    let p = params();
    let grid = Grid::radial_disk(1.0, 64).unwrap();
    let mass = 2.0 * radial_threshold_mass(p.diff);
    match build_theta_eta(&ThetaEtaSpec { eta: 0.005, anchor: None, mass }, &p, &grid) {
        Err(Error::UnresolvedProfile { anchor_fraction, min_eta }) => {
            assert!(anchor_fraction > 0.5);
            assert!(min_eta > 0.005);
        }
        other => panic!("expected resolution rejection, got {:?}", other.map(|d| d.f_value)),
    }
}

#[test]
fn theta_grid_refinement_is_cauchy() {
    // For fixed eta, the change in F under N -> 2N shrinks with refinement.
    let p = params();
    let mass = 1.2 * general_threshold_mass(p.diff);
    let f_at = |n: usize| -> f64 {
        let grid = Grid::anchored_disk(1.0, n).unwrap();
        build_theta_eta(&ThetaEtaSpec { eta: 0.2, anchor: None, mass }, &p, &grid)
            .unwrap()
            .f_value
    };
    let (f1, f2, f3) = (f_at(128), f_at(256), f_at(512));
    assert!(
        (f3 - f2).abs() <= (f2 - f1).abs(),
        "refinement not Cauchy: {} vs {}",
        (f3 - f2).abs(),
        (f2 - f1).abs()
    );
}

#[test]
fn theta_on_rectangles_is_guarded() {
    // The rectangle's lateral boundary cuts the anchor-radial profile
    // non-orthogonally, so the discrete slaved field would need clipping
    // far beyond the 1% budget; the builder must refuse rather than return
    // mangled data.
    let p = params();
    let grid = Grid::rect(2.0, 1.0, 64, 32).unwrap();
    let mass = 1.2 * general_threshold_mass(p.diff);
    match build_theta_eta(&ThetaEtaSpec { eta: 0.2, anchor: Some([1.0, 0.0]), mass }, &p, &grid) {
        Err(Error::ExcessiveClipping { fraction }) => assert!(fraction > 0.01),
        Ok(d) => assert!(d.clip_fraction <= 0.01),
        Err(e) => panic!("unexpected error: {e}"),
    }
}

#[test]
fn theta_requires_anchor_on_rect_and_origin_on_radial() {
    let p = params();
    let rect = Grid::rect(1.0, 1.0, 16, 16).unwrap();
    assert!(build_theta_eta(
        &ThetaEtaSpec { eta: 0.2, anchor: None, mass: 20.0 },
        &p,
        &rect
    )
    .is_err());
    let radial = Grid::radial_disk(1.0, 64).unwrap();
    assert!(build_theta_eta(
        &ThetaEtaSpec { eta: 0.2, anchor: Some([0.5, 0.0]), mass: 60.0 },
        &p,
        &radial
    )
    .is_err());
}

#[test]
fn probe_requires_decreasing_scales() {
    let p = params();
    let grid = Grid::anchored_disk(1.0, 128).unwrap();
    let mass = 1.2 * general_threshold_mass(p.diff);
    assert!(energy_divergence_probe(mass, &p, &grid, &[0.2, 0.4]).is_err());
    assert!(energy_divergence_probe(mass, &p, &grid, &[]).is_err());
}

#[test]
fn random_states_are_valid_and_reproducible() {
    let p = params();
    for grid in [Grid::radial_disk(1.0, 64).unwrap(), Grid::rect(1.0, 1.0, 16, 16).unwrap()] {
        let mass = 3.0;
        let a = build_random(mass, 7, 1.0, &p, &grid).unwrap();
        let b = build_random(mass, 7, 1.0, &p, &grid).unwrap();
        let c = build_random(mass, 8, 1.0, &p, &grid).unwrap();
        assert!((ops::integrate(&a.u) - mass).abs() <= 1e-12 * mass);
        assert!(a.u.min() > 0.0 && a.v.min() > 0.0 && a.w.min() >= 0.0);
        for i in 0..grid.num_cells() {
            assert_eq!(a.u[i], b.u[i]);
            assert_eq!(a.w[i], b.w[i]);
        }
        let differs = (0..grid.num_cells()).any(|i| a.u[i] != c.u[i]);
        assert!(differs, "different seeds must differ");
    }
}
