//! Compares the hand-written backward pass with central differences on a
//! tiny network, in double precision.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use ndarray::{s, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remixit::metrics::neg_sisdr_with_grad;
use remixit::model::{backward, forward, init_params, MaskNetParams, ModelArch};
use remixit::optim::ParamTensors;
use remixit::signal::{SignalBatch, StftConfig};

fn loss(params: &MaskNetParams<f64>, batch: &SignalBatch, targets: &Array3<f64>) -> (f64, Array3<f64>) {
    let (est, _) = forward(params, batch).unwrap();
    let mut grad = Array3::zeros(est.dim());
    let mut total = 0.0;
    for i in 0..est.dim().0 {
        for b in 0..est.dim().1 {
            let (l, g) =
                neg_sisdr_with_grad(&est.slice(s![i, b, ..]).to_vec(), &targets.slice(s![i, b, ..]).to_vec()).unwrap();
            total += l;
            grad.slice_mut(s![i, b, ..]).assign(&ndarray::Array1::from(g));
        }
    }
    (total, grad)
}

fn main() -> remixit::Result<()> {
    let arch = ModelArch {
        num_sources: 2,
        depth: 1,
        max_depth: 8,
        hidden: 4,
        context: 1,
        stft: StftConfig::new(32, 8)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = SignalBatch::new(Array2::from_shape_fn((2, 128), |_| rng.random_range(-1.0..1.0)), 8000)?;
    let targets = Array3::from_shape_fn((2, 2, 128), |_| rng.random_range(-1.0..1.0));
    let params = init_params::<f64>(&arch, 0)?;

    let (_, tape) = forward(&params, &batch)?;
    let (_, upstream) = loss(&params, &batch, &targets);
    let analytic = backward(&params, &tape, &upstream)?;

    let h = 1e-5;
    let names = params.tensor_names();
    let mut probe = params.clone();
    for (t, name) in names.iter().enumerate() {
        let mut worst = 0.0f64;
        for k in 0..probe.tensors()[t].len() {
            let orig = probe.tensors()[t][k];
            probe.tensors_mut()[t][k] = orig + h;
            let plus = loss(&probe, &batch, &targets).0;
            probe.tensors_mut()[t][k] = orig - h;
            let minus = loss(&probe, &batch, &targets).0;
            probe.tensors_mut()[t][k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.tensors()[t][k];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        println!(
            "{name:<16} {:>4} entries, max relative error {worst:.2e}",
            probe.tensors()[t].len()
        );
    }
    Ok(())
}
