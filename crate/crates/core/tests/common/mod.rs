#![allow(dead_code)]

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remixit::metrics::neg_sisdr_with_grad;
use remixit::model::{backward, forward, init_params, MaskNetParams, ModelArch};
use remixit::optim::ParamTensors;
use remixit::signal::{SignalBatch, StftConfig};

pub fn tiny_arch(num_sources: usize) -> ModelArch {
    ModelArch {
        num_sources,
        depth: 1,
        max_depth: 8,
        hidden: 4,
        context: 1,
        stft: StftConfig::new(32, 8).unwrap(),
    }
}

pub fn random_batch(b: usize, t: usize, seed: u64) -> SignalBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SignalBatch::new(Array2::from_shape_fn((b, t), |_| rng.random_range(-1.0..1.0)), 8000).unwrap()
}

/// Scalar test loss: negative SI-SDR of every output slot against fixed
/// random targets, summed.
pub struct ProbeLoss {
    targets: Array3<f64>,
}

impl ProbeLoss {
    pub fn new(shape: (usize, usize, usize), seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            targets: Array3::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0)),
        }
    }

    pub fn value_and_grad(&self, est: &Array3<f64>) -> (f64, Array3<f64>) {
        let mut grad = Array3::zeros(est.dim());
        let mut total = 0.0;
        let (m, b, _) = est.dim();
        for i in 0..m {
            for j in 0..b {
                let e = est.slice(ndarray::s![i, j, ..]).to_vec();
                let t = self.targets.slice(ndarray::s![i, j, ..]).to_vec();
                let (l, g) = neg_sisdr_with_grad(&e, &t).unwrap();
                total += l;
                grad.slice_mut(ndarray::s![i, j, ..]).assign(&ndarray::Array1::from(g));
            }
        }
        (total, grad)
    }
}

/// Largest entrywise relative error between the analytic gradient and
/// central differences of the loss, with `rel = |a - f| / max(|a|, |f|, floor)`
/// and `floor = 1e-3 * max |f|` guarding entries that are numerically zero.
pub fn max_gradient_error(params: &MaskNetParams<f64>, batch: &SignalBatch, loss: &ProbeLoss, h: f64) -> f64 {
    let (est, tape) = forward(params, batch).unwrap();
    let (_, upstream) = loss.value_and_grad(&est);
    let analytic = backward(params, &tape, &upstream).unwrap();
    let analytic: Vec<f64> = analytic.tensors().concat();

    let eval = |p: &MaskNetParams<f64>| loss.value_and_grad(&forward(p, batch).unwrap().0).0;
    let mut numeric = Vec::with_capacity(analytic.len());
    let mut probe = params.clone();
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    for (ti, len) in sizes.iter().enumerate() {
        for k in 0..*len {
            let orig = probe.tensors()[ti][k];
            probe.tensors_mut()[ti][k] = orig + h;
            let plus = eval(&probe);
            probe.tensors_mut()[ti][k] = orig - h;
            let minus = eval(&probe);
            probe.tensors_mut()[ti][k] = orig;
            numeric.push((plus - minus) / (2.0 * h));
        }
    }
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-3 * scale;
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn tiny_gradient_error(seed: u64) -> f64 {
    let arch = tiny_arch(2);
    let params = init_params::<f64>(&arch, seed).unwrap();
    let batch = random_batch(2, 128, 1000 + seed);
    let loss = ProbeLoss::new((2, 2, 128), 2000 + seed);
    max_gradient_error(&params, &batch, &loss, 1e-5)
}

use remixit::data::{generate_corpus, Corpus, NoiseDomain, SynthSpec};

/// Short clips and a small network for fast end-to-end tests.
pub fn toy_arch(num_sources: usize) -> ModelArch {
    ModelArch {
        num_sources,
        depth: 1,
        max_depth: 4,
        hidden: 32,
        context: 1,
        stft: StftConfig::new(128, 32).unwrap(),
    }
}

pub fn toy_corpus(n: usize, domain: NoiseDomain, seed: u64) -> Corpus {
    let spec = SynthSpec {
        duration_s: 0.25,
        ..SynthSpec::new(n, domain)
    };
    generate_corpus(&spec, seed).unwrap()
}
