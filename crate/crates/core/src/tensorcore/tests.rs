use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{check_all, primitive_suite};
use super::*;

#[test]
fn rejects_non_finite_and_bad_shapes() {
    assert!(matches!(Tensor::new(1, 2, vec![1.0, f64::NAN]), Err(TensorError::NonFinite(_))));
    assert!(matches!(Tensor::new(2, 2, vec![1.0]), Err(TensorError::Shape { .. })));
    let t = Tape::new();
    let a = t.constant(Tensor::zeros(2, 3));
    let b = t.constant(Tensor::zeros(2, 3));
    assert!(matches!(t.matmul(a, b), Err(TensorError::Shape { .. })));
    assert!(matches!(t.log(a), Err(TensorError::NonFinite("log"))));
}

#[test]
fn relu_and_sigmoid_basics() {
    let t = Tape::new();
    let x = t.param(Tensor::scalar(-1.0));
    let y = t.relu(x).unwrap();
    assert_eq!(t.item(y), 0.0);
    assert_eq!(t.backward(y).unwrap().get(x).item(), 0.0);

    let t = Tape::new();
    let x = t.param(Tensor::scalar(0.0));
    let y = t.relu(x).unwrap();
    assert_eq!(t.backward(y).unwrap().get(x).item(), 0.0);

    let t = Tape::new();
    let x = t.param(Tensor::scalar(0.0));
    let y = t.sigmoid(x).unwrap();
    assert_eq!(t.backward(y).unwrap().get(x).item(), 0.25);

    let t = Tape::new();
    let x = t.param(Tensor::row(vec![0.0, 2.0, -3.0]));
    let y = t.l1_norm(x).unwrap();
    assert_eq!(t.item(y), 5.0);
    assert_eq!(t.backward(y).unwrap().get(x).data(), &[0.0, 1.0, -1.0]);
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    use rand::Rng;
    let a = Tensor::from_fn(5, 4, |_, _| rng.gen_range(-1.0..1.0));
    let b = Tensor::from_fn(4, 3, |_, _| rng.gen_range(-1.0..1.0));
    let err = check_all(&[a, b], 1e-5, |t, v| {
        let m = t.matmul(v[0], v[1])?;
        let s = t.tanh(m)?;
        t.sum(s)
    })
    .unwrap();
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn every_primitive_passes_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (name, err) in primitive_suite(&mut rng, 20).unwrap() {
        assert!(err <= 1e-4, "{name}: {err}");
    }
}

#[test]
fn disconnected_parameter_has_zero_gradient() {
    let t = Tape::new();
    let a = t.param(Tensor::filled(2, 2, 1.5));
    let b = t.param(Tensor::filled(3, 1, 2.0));
    let y = t.sum(a).unwrap();
    let g = t.backward(y).unwrap();
    assert_eq!(g.get(b), Tensor::zeros(3, 1));
    assert_eq!(g.get(a), Tensor::filled(2, 2, 1.0));
}

#[test]
fn fan_out_accumulates() {
    let t = Tape::new();
    let x = t.param(Tensor::scalar(3.0));
    let y = t.mul(x, x).unwrap();
    let z = t.add(y, x).unwrap();
    assert_eq!(t.backward(z).unwrap().get(x).item(), 7.0);
}

#[test]
fn normalize_and_softmax_values() {
    let t = Tape::new();
    let z = t.constant(Tensor::zeros(1, 4));
    let n = t.row_l2_normalize(z).unwrap();
    assert!(t.value(n).data().iter().all(|&v| v == 0.0));

    let x = t.constant(Tensor::row(vec![3.0, 4.0]));
    let n = t.row_l2_normalize(x).unwrap();
    assert_eq!(t.value(n).data(), &[0.6, 0.8]);

    let l = t.constant(Tensor::row(vec![1.0, 0.0]));
    let p = t.softmax(l).unwrap();
    assert!((t.value(p).get(0, 0) - 0.7311).abs() < 1e-4);

    let m: Rc<[bool]> = vec![true, false, true].into();
    let x = t.constant(Tensor::row(vec![0.0, 100.0, 0.0]));
    let y = t.masked_log_softmax(x, m).unwrap();
    let v = t.value(y);
    assert!((v.get(0, 0) - 0.5f64.ln()).abs() < 1e-15 && v.get(0, 1) == 0.0);
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let mut p = Tensor::row(vec![1.0, -2.0]);
    let mut s = AdamState::new(p.shape());
    adam_step(&mut p, &Tensor::zeros(1, 2), &mut s, 0.1, 0.9, 0.999, 1e-8).unwrap();
    assert_eq!(p, Tensor::row(vec![1.0, -2.0]));
}

#[test]
fn adam_first_step_moves_by_lr_against_sign() {
    let mut p = Tensor::row(vec![0.0, 0.0, 0.0]);
    let mut s = AdamState::new(p.shape());
    adam_step(&mut p, &Tensor::row(vec![3.0, -0.01, 50.0]), &mut s, 0.01, 0.9, 0.999, 1e-8).unwrap();
    for (v, want) in p.data().iter().zip([-0.01, 0.01, -0.01]) {
        assert!((v - want).abs() < 1e-8, "{v}");
    }
    assert!(adam_step(&mut p, &Tensor::zeros(2, 1), &mut s, 0.01, 0.9, 0.999, 1e-8).is_err());
}

#[test]
fn adam_minimizes_square() {
    // independent scalar recurrence
    let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    for t in 1..=200 {
        let g = 2.0 * x;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        x -= 0.1 * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
    }
    let mut p = vec![Tensor::scalar(1.0)];
    let mut opt = Adam::new(0.1, &p);
    for _ in 0..200 {
        let tape = Tape::new();
        let xv = tape.param(p[0].clone());
        let y = tape.mul(xv, xv).unwrap();
        let g = tape.backward(y).unwrap().get(xv);
        opt.step(&mut p, &[g]).unwrap();
    }
    assert!((p[0].item() - x).abs() < 1e-12);
    assert!(p[0].item().abs() < 1e-2);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    store.insert_glorot("w", 7, 5, &mut rng);
    store.insert("b", Tensor::from_fn(1, 5, |_, _| rng.gen::<f64>() * 1e-300));
    store.insert("odd", Tensor::row(vec![-0.0, 1.0 / 3.0, f64::MAX, f64::MIN_POSITIVE]));
    let text = store.to_checkpoint().to_json();
    let ck = Checkpoint::from_json(&text).unwrap();
    let back = ParamStore::from_checkpoint(&ck, store.names()).unwrap();
    for (a, b) in store.values().iter().zip(back.values()) {
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    assert!(Checkpoint::from_json(r#"{"tensors":{"x":{"rows":2,"cols":2,"data":[1.0]}}}"#).is_err());
    assert!(matches!(
        ParamStore::from_checkpoint(&ck, &["nope".to_string()]),
        Err(TensorError::Missing(_))
    ));
}
