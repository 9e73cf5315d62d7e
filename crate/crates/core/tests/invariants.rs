use polyrobin::defaults::Tolerances;
use polyrobin::geometry::{load_mesh, make_sphere_mesh, nt_cone_samples, save_mesh, Vec3};
use polyrobin::kernels::KernelFamily;
use polyrobin::operators::{
    assemble_kstar, assemble_kstar_j, assemble_mj_boundary, assemble_single_layer, eval_potential_gradient,
    DensityVector,
};
use polyrobin::robin::{solve, RobinProblem};
use polyrobin::verify::{cone_depths, run_suite};
use proptest::prelude::*;

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pipeline_is_linear_in_data(
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        seed in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let mesh = make_sphere_mesh(1.0, 1).unwrap();
        let field = |s: &[f64], j: usize| {
            DensityVector::from_fn(&mesh, |c, _| s[j] + s[j + 1] * c.x + s[j] * c.y * c.z)
        };
        let f = [field(&seed, 0), field(&seed, 2)];
        let g = [field(&seed, 1), DensityVector::constant(&mesh, 1.0)];
        let mix: Vec<DensityVector> = f
            .iter()
            .zip(&g)
            .map(|(a, b)| {
                let v = a.values().iter().zip(b.values()).map(|(x, y)| alpha * x + beta * y).collect();
                DensityVector::new(&mesh, v).unwrap()
            })
            .collect();
        let run = |h: Vec<DensityVector>| {
            solve(&RobinProblem::with_uniform_coefficient(mesh.clone(), 1.5, h, 2.0).unwrap()).unwrap()
        };
        let (sf, sg, sm) = (run(f.to_vec()), run(g.to_vec()), run(mix));
        for l in 0..2 {
            let expected: Vec<f64> = sf.densities()[l]
                .values()
                .iter()
                .zip(sg.densities()[l].values())
                .map(|(x, y)| alpha * x + beta * y)
                .collect();
            prop_assert!(close(sm.densities()[l].values(), &expected, 1e-10));
        }
        let x = Vec3::new(0.1, -0.2, 0.15);
        let lhs = sm.evaluate(&x).unwrap();
        let rhs = alpha * sf.evaluate(&x).unwrap() + beta * sg.evaluate(&x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn assembled_operators_are_linear(
        which in 0usize..5,
        alpha in -5.0f64..5.0,
        beta in -5.0f64..5.0,
        f in prop::collection::vec(-1.0f64..1.0, 80),
        g in prop::collection::vec(-1.0f64..1.0, 80),
    ) {
        let mesh = make_sphere_mesh(1.0, 1).unwrap();
        let fam = KernelFamily::new(3, 3).unwrap();
        let op = match which {
            0 => assemble_single_layer(&mesh, &fam),
            1 => assemble_kstar(&mesh),
            2 => assemble_mj_boundary(&mesh, &fam, 2),
            3 => assemble_kstar_j(&mesh, &fam, 2),
            _ => assemble_kstar_j(&mesh, &fam, 3),
        }
        .unwrap();
        let mix: Vec<f64> = f.iter().zip(&g).map(|(x, y)| alpha * x + beta * y).collect();
        let apply = |v: &[f64]| op.apply(&DensityVector::new(&mesh, v.to_vec()).unwrap()).unwrap().into_values();
        let (af, ag) = (apply(&f), apply(&g));
        let expected: Vec<f64> = af.iter().zip(&ag).map(|(x, y)| alpha * x + beta * y).collect();
        prop_assert!(close(&apply(&mix), &expected, 1e-13));
    }

    #[test]
    fn sphere_meshes_round_trip(radius in 0.1f64..10.0, refinement in 0u32..4) {
        let mesh = make_sphere_mesh(radius, refinement).unwrap();
        let mut buf = Vec::new();
        save_mesh(&mesh, &mut buf).unwrap();
        let back = load_mesh(buf.as_slice()).unwrap();
        prop_assert_eq!(back.panels(), mesh.panels());
        prop_assert_eq!(back.vertices(), mesh.vertices());
    }
}

/// Sup of `|grad M_j 1|` over each panel's cone samples, summed in `L^2(∂D)`.
fn sampled_maximal_gradient(j: usize, refinement: u32) -> f64 {
    let mesh = make_sphere_mesh(1.0, refinement).unwrap();
    let fam = KernelFamily::new(3, j).unwrap();
    let one = DensityVector::constant(&mesh, 1.0);
    let depths = cone_depths(&mesh);
    let mut sum = 0.0;
    for i in 0..mesh.len() {
        let set = nt_cone_samples(&mesh, i, 2.0, &depths).unwrap();
        let sup = set
            .points
            .iter()
            .filter_map(|p| eval_potential_gradient(&mesh, &fam, j, &one, &p.point).ok())
            .map(|g| g.norm())
            .fold(0.0, f64::max);
        sum += sup * sup * mesh.areas()[i];
    }
    sum.sqrt()
}

#[test]
fn operator_norms_stable_under_refinement() {
    let fam = KernelFamily::new(3, 3).unwrap();
    let mut history: Vec<Vec<f64>> = Vec::new();
    for r in 1..=4 {
        let mesh = make_sphere_mesh(1.0, r).unwrap();
        let mut norms = Vec::new();
        let ops = [
            assemble_kstar(&mesh).unwrap(),
            assemble_kstar_j(&mesh, &fam, 2).unwrap(),
            assemble_kstar_j(&mesh, &fam, 3).unwrap(),
            assemble_mj_boundary(&mesh, &fam, 2).unwrap(),
            assemble_mj_boundary(&mesh, &fam, 3).unwrap(),
        ];
        for op in ops {
            norms.push(op.norm_inf());
            norms.push(op.spectral_norm_estimate(30));
        }
        history.push(norms);
    }
    for w in history.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            let q = b / a;
            assert!((0.5..=2.0).contains(&q), "norm ratio {q} ({a} -> {b})");
        }
    }
    for j in [2, 3] {
        let vals: Vec<f64> = (1..=4).map(|r| sampled_maximal_gradient(j, r)).collect();
        for w in vals.windows(2) {
            let q = w[1] / w[0];
            assert!((0.5..=2.0).contains(&q), "M(grad M_{j} 1): {vals:?}");
        }
    }
}

#[test]
fn suite_reports_are_reproducible() {
    let tol = Tolerances::default();
    let a = serde_json::to_string(&run_suite("estimates", &[1, 2], &tol).unwrap()).unwrap();
    let b = serde_json::to_string(&run_suite("estimates", &[1, 2], &tol).unwrap()).unwrap();
    assert_eq!(a, b);
}
