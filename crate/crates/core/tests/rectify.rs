use fedgps_core::algorithms::{
    fedgps_loss_and_grad, perturbed_gradient, rectified_gradient, unit_direction, FedGpsHyper,
};
use fedgps_core::data::{gen_blobs, gen_surrogate, SurrogateSpec};
use fedgps_core::nn::{Architecture, MlpModel, ParamVector};
use fedgps_core::rng::{stream, Stream};
use proptest::prelude::*;

const SCALES: [f64; 4] = [0.1, 1.0, 10.0, 1e6];

proptest! {
    #[test]
    fn unit_direction_ignores_positive_scale(v in proptest::collection::vec(-10.0f64..10.0, 1..64)) {
        let d = ParamVector::from_vec(v);
        prop_assume!(d.norm() > 1e-6);
        let u = unit_direction(&d).unwrap();
        prop_assert!((u.norm() - 1.0).abs() < 1e-6);
        for s in SCALES {
            prop_assert!(unit_direction(&d.scaled(s)).unwrap().bit_eq(&u), "scale {}", s);
        }
    }

    #[test]
    fn perturbation_restores_params(
        v in proptest::collection::vec(-5.0f64..5.0, 8),
        d in proptest::collection::vec(-5.0f64..5.0, 8),
        scale in -3.0f64..3.0,
    ) {
        let mut p = ParamVector::from_vec(v);
        let before = p.clone();
        let dir = ParamVector::from_vec(d);
        let mut seen = None;
        perturbed_gradient(&mut p, &dir, scale, |q| {
            seen = Some(q.clone());
            Ok((q.norm_sq(), q.clone()))
        }).unwrap();
        prop_assert!(p.bit_eq(&before));
        let mut expected = before.clone();
        expected.axpy(scale, &dir);
        prop_assert!(seen.unwrap().bit_eq(&expected));
    }
}

#[test]
fn rectified_objective_gradient_is_scale_invariant() {
    let arch = Architecture::desk(6, 5, 3);
    let model = MlpModel::new(&arch, &mut stream(4, Stream::Init));
    let data = gen_blobs(3, 6, 10, 1.0, 1.0, 4).unwrap();
    let sur = gen_surrogate(&SurrogateSpec::random(3, 6, 3.0, 1.0, 4, 4).unwrap()).unwrap();
    let hyper = FedGpsHyper::default();
    let mut theta = model.flatten();
    let mut r = stream(8, Stream::Diagnostic);
    let delta = ParamVector::from_vec(
        (0..theta.len())
            .map(|_| rand::Rng::random_range(&mut r, -1e-3..1e-3))
            .collect(),
    );
    let mut scratch = model.clone();
    let mut eval = |theta: &mut ParamVector, d: &ParamVector| {
        rectified_gradient(theta, Some(d), 0.5, |q| {
            scratch.load_params(q)?;
            let (parts, g) = fedgps_loss_and_grad(
                &scratch,
                (&data.features, &data.labels),
                Some((&sur.features, &sur.labels)),
                None,
                &hyper,
                1e-5,
            )?;
            Ok((parts.total, g))
        })
        .unwrap()
    };
    let (l0, g0) = eval(&mut theta, &delta);
    for s in SCALES {
        let (l, g) = eval(&mut theta, &delta.scaled(s));
        assert_eq!(l.to_bits(), l0.to_bits(), "scale {s}");
        assert!(g.bit_eq(&g0), "scale {s}");
    }
    // negative scaling flips the shift
    let (_, g_neg) = eval(&mut theta, &delta.scaled(-1.0));
    assert!(!g_neg.bit_eq(&g0));
}
