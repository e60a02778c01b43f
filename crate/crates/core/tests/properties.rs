use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rodlab::estimates::equivalence_constants;
use rodlab::fields::{change_of_variables, inverse_change_of_variables, strain, DisplacementField, JumpSet};
use rodlab::geometry::{burgers_circuit, CellLoop, CrossSection, DislocationSpec, Grid};
use rodlab::linalg::{closest_rotation, rotation_exp};
use rodlab::material::{energy_density, growth_cap, ElasticModel, Phase};
use rodlab::solver::total_energy;
use rodlab::{Mat3, Vec3};

fn mat() -> impl Strategy<Value = Mat3> {
    (prop::array::uniform9(-3.0f64..3.0), -2.0f64..1.5).prop_map(|(v, e)| Mat3::from_row_slice(&v) * 10f64.powf(e))
}

fn rot() -> impl Strategy<Value = Mat3> {
    prop::array::uniform3(-2.0f64..2.0).prop_map(|w| rotation_exp(&Vec3::from(w)))
}

fn phase() -> impl Strategy<Value = Phase> {
    prop_oneof![Just(Phase::Left), Just(Phase::Right)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn density_is_frame_indifferent_and_capped(a in mat(), r in rot(), ph in phase(), alpha in 0.0f64..0.3, p in 1.05f64..1.95) {
        let model = ElasticModel::isotropic(alpha, p).unwrap();
        let w = energy_density(ph, &a, &model);
        prop_assert!(w >= 0.0);
        prop_assert!(w <= growth_cap(&a, p) * (1.0 + 1e-15));
        let wr = energy_density(ph, &(r * a), &model);
        prop_assert!((w - wr).abs() <= 1e-12 * w.max(1.0));
    }

    #[test]
    fn density_vanishes_on_the_wells(r in rot(), alpha in 0.0f64..0.3) {
        let model = ElasticModel::isotropic(alpha, 1.5).unwrap();
        prop_assert!(energy_density(Phase::Left, &r, &model) <= 1e-28);
        prop_assert!(energy_density(Phase::Right, &(r * model.h()), &model) <= 1e-28);
    }

    #[test]
    fn closest_rotation_beats_samples(a in mat(), others in prop::collection::vec(rot(), 8)) {
        let q = closest_rotation(&a);
        prop_assert!((q.transpose() * q - Mat3::identity()).norm() <= 1e-12);
        prop_assert!((q.determinant() - 1.0).abs() <= 1e-12);
        let d = (a - q).norm();
        for r in &others {
            prop_assert!(d <= (a - r).norm() + 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn pointwise_equivalence_holds(g in mat(), a in mat(), p in 1.05f64..1.95) {
        let (c1, c2, _) = equivalence_constants(&g, p);
        let an = a.norm();
        let low = (an * an).min(an.powf(p) + 1.0);
        let mid = (an * an).min((a + g).norm().powf(p) + 1.0);
        prop_assert!(c1 * low <= mid * (1.0 + 1e-12));
        prop_assert!(mid <= c2 * low * (1.0 + 1e-12));
    }

    #[test]
    fn change_of_variables_round_trip(coef in prop::array::uniform9(-0.2f64..0.2), h in prop_oneof![Just(0.5), Just(0.25)]) {
        let reference = Arc::new(Grid::build(CrossSection::disk(1.0), 0.5, 0.25).unwrap());
        let thin = Arc::new(Grid::build_anisotropic(CrossSection::disk(h), 0.5, 0.25, 0.25 * h).unwrap());
        let c = Mat3::from_row_slice(&coef);
        let u = DisplacementField::from_fn(thin.clone(), |x| c * Vec3::new(x.x.sin(), x.y * x.z, x.y.cos()));
        let v = change_of_variables(&u, reference, h).unwrap();
        let back = inverse_change_of_variables(&v, thin, h).unwrap();
        prop_assert_eq!(&back.values, &u.values);
        prop_assert_eq!(back.stretch(), u.stretch());
        let model = ElasticModel::default();
        assert_relative_eq!(total_energy(&v, &model) * h * h * h, total_energy(&u, &model), max_relative = 1e-10);
    }

    #[test]
    fn circuits_scale_with_winding(b in prop::array::uniform3(-0.1f64..0.1), times in 1usize..4, seed in prop::array::uniform9(-0.05f64..0.05)) {
        let grid = Arc::new(Grid::build(CrossSection::square(0.5), 0.5, 0.125).unwrap());
        let n = grid.transverse_cells();
        let faces: Vec<(usize, usize)> = (0..n / 2).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let spec = DislocationSpec::from_faces(Vec3::from(b), vec![], faces);
        let jumps = JumpSet::from_spec(&grid, &spec).unwrap();
        let c = Mat3::from_row_slice(&seed);
        let u = DisplacementField::from_fn(grid.clone(), |x| c * Vec3::new(x.y * x.z, x.x * x.x, x.z)).with_jumps(jumps);
        let f = strain(&u);
        let layer = grid.interface_layer();
        let lp = CellLoop::axial_rectangle(2, (layer - 2, layer + 1), (1, n - 2), n / 2);
        let once = burgers_circuit(&f, &lp).unwrap();
        prop_assert!((once + Vec3::from(b)).norm() <= 1e-12);
        let many = burgers_circuit(&f, &lp.repeated(times)).unwrap();
        prop_assert!((many - once * times as f64).norm() <= 1e-12);
        let back = burgers_circuit(&f, &lp.reversed()).unwrap();
        prop_assert!((back + once).norm() <= 1e-12);
    }
}
