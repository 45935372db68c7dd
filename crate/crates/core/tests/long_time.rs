use hamray::charsol::{asymptotic_profile, eval_solution, origin_traces};
use hamray::model::{BumpPotential, HamiltonianModel};
use hamray::period::{period_quadrature, shock_time};
use hamray::shooting::ShootOptions;

#[test]
fn profile_error_shrinks_with_time() {
    let model = BumpPotential::<f64>::default();
    let opts = ShootOptions::default();
    for x in [0.2, 0.5, 0.8] {
        let target = asymptotic_profile(&model, x);
        let errs: Vec<f64> = [2.0, 5.0, 10.0, 20.0]
            .iter()
            .map(|&t| (eval_solution(&model, t, x, &opts).unwrap().u - target).abs())
            .collect();
        println!("x = {x}: {errs:?}");
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "x = {x}: {errs:?}");
        assert!(errs[3] < 0.05);
    }
}

#[test]
fn origin_traces_climb_to_the_separatrix() {
    let model = BumpPotential::<f64>::default();
    let sep = model.separatrix_momentum();
    let mut last = 0.0;
    for t in [2.0, 5.0, 10.0, 20.0] {
        let (left, right) = origin_traces(&model, t).unwrap();
        assert_eq!(left, -right);
        assert!(left > last && left < sep, "t = {t}: {left}");
        last = left;
    }
    assert!(sep - last < 1e-2);
}

#[test]
fn single_precision_agrees_with_double() {
    let m32 = BumpPotential::<f32>::default();
    let m64 = BumpPotential::<f64>::default();
    for p in [0.1f32, 0.5, 1.0, 1.3] {
        let a = period_quadrature(&m32, p).unwrap() as f64;
        let b = period_quadrature(&m64, p as f64).unwrap();
        assert!((a - b).abs() < 1e-4 * b, "p = {p}: {a} vs {b}");
    }
    let t32 = shock_time(&m32).unwrap() as f64;
    assert!((t32 - shock_time(&m64).unwrap()).abs() < 1e-4);

    let u32 = eval_solution(&m32, 2.0f32, 0.5, &ShootOptions::default()).unwrap().u as f64;
    let u64 = eval_solution(&m64, 2.0, 0.5, &ShootOptions::default()).unwrap().u;
    assert!((u32 - u64).abs() < 1e-3, "{u32} vs {u64}");
}
