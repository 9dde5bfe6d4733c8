//! Central-difference checks for every tape op, at least 100 coordinates each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yieldfuse::tensor::{
    grad_check, sample_coordinates, ParamId, ParamStore, Tape, Tensor, TensorError, Var,
};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Builds `mse(op(params), target)` and grad-checks it over every coordinate (up to 150 per param).
fn check<F>(name: &str, shapes: &[&[usize]], out_len: usize, build: F)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 7919);
    let mut store = ParamStore::new();
    let ids: Vec<ParamId> = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| store.add(format!("p{i}"), random(s, &mut rng)))
        .collect();
    let target: Vec<f64> = (0..out_len).map(|_| rng.random_range(-2.0..2.0)).collect();

    fn forward<'s, F>(
        s: &'s ParamStore,
        ids: &[ParamId],
        target: &[f64],
        build: &F,
    ) -> Result<(Tape<'s>, Var), TensorError>
    where
        F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
    {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ids.iter().map(|id| tape.param(s, *id)).collect();
        let out = build(&mut tape, &vars)?;
        assert_eq!(tape.value(out).len(), target.len(), "output length");
        let shape = tape.value(out).shape().to_vec();
        let t = tape.constant(Tensor::new(shape, target.to_vec()).unwrap());
        let l = tape.mse_loss(out, t)?;
        Ok((tape, l))
    }
    let loss = |s: &ParamStore| -> Result<f64, TensorError> {
        let (tape, l) = forward(s, &ids, &target, &build)?;
        Ok(tape.value(l).data()[0])
    };

    let (tape, l) = forward(&store, &ids, &target, &build).unwrap();
    let grads = tape.backward(l, &store).unwrap();
    let coords = sample_coordinates(&store, 150, 5);
    assert!(coords.len() >= 100, "{name}: only {} coords", coords.len());
    let report = grad_check(&store, &grads, &coords, H, loss).unwrap();
    let worst = report.worst().unwrap();
    assert!(
        report.max_rel_err < TOL,
        "{name}: max rel err {} at {}[{}] (analytic {}, numeric {})",
        report.max_rel_err,
        worst.param,
        worst.index,
        worst.analytic,
        worst.numeric
    );
}

#[test]
fn matmul() {
    check("matmul", &[&[9, 7], &[7, 6]], 54, |t, v| {
        t.matmul(v[0], v[1])
    });
}

#[test]
fn matmul_nt() {
    check("matmul_nt", &[&[9, 7], &[6, 7]], 54, |t, v| {
        t.matmul_nt(v[0], v[1])
    });
}

#[test]
fn add_broadcast() {
    check("add", &[&[12, 9], &[9]], 108, |t, v| t.add(v[0], v[1]));
    check("add_same", &[&[12, 9], &[12, 9]], 108, |t, v| {
        t.add(v[0], v[1])
    });
}

#[test]
fn scale() {
    check("scale", &[&[11, 11]], 121, |t, v| t.scale(v[0], -1.7));
}

#[test]
fn relu() {
    check("relu", &[&[11, 11]], 121, |t, v| t.relu(v[0]));
}

#[test]
fn gelu() {
    check("gelu", &[&[11, 11]], 121, |t, v| {
        let s = t.scale(v[0], 3.0)?;
        t.gelu(s)
    });
}

#[test]
fn softmax() {
    check("softmax", &[&[12, 10]], 120, |t, v| {
        let s = t.scale(v[0], 2.0)?;
        t.softmax(s)
    });
}

#[test]
fn masked_softmax() {
    let mask = [1u8, 1, 0, 1, 0, 1, 1, 1, 0, 1];
    check("masked_softmax", &[&[12, 10]], 120, move |t, v| {
        t.masked_softmax(v[0], Some(&mask))
    });
}

#[test]
fn layer_norm() {
    check("layer_norm", &[&[10, 12], &[12], &[12]], 120, |t, v| {
        t.layer_norm(v[0], v[1], v[2])
    });
}

#[test]
fn embedding_lookup() {
    check("embedding", &[&[15, 8]], 13 * 8, |t, v| {
        t.embedding_lookup(v[0], &[0, 3, 3, 14, 7, 1, 2, 9, 9, 9, 11, 5, 0])
    });
}

#[test]
fn dropout_fixed_mask() {
    check("dropout", &[&[11, 11]], 121, |t, v| {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        t.dropout(v[0], 0.3, true, &mut rng)
    });
}

#[test]
fn mse_loss_both_sides() {
    check("mse", &[&[11, 10], &[11, 10]], 1, |t, v| {
        t.mse_loss(v[0], v[1])
    });
}

#[test]
fn slice_and_concat() {
    check("slice_cols", &[&[12, 10]], 48, |t, v| {
        t.slice_cols(v[0], 3, 7)
    });
    check("concat_cols", &[&[10, 4], &[10, 7]], 110, |t, v| {
        t.concat_cols(&[v[0], v[1]])
    });
    check("concat_rows", &[&[4, 10], &[7, 10]], 110, |t, v| {
        t.concat_rows(&[v[0], v[1]])
    });
}
