//! SI-SDR, SNR and the student/teacher error decomposition on toy signals.
//!
//! ```text
//! cargo run --release --example metrics_tour
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remixit::metrics::{error_decomposition, neg_sisdr_with_grad, si_sdr, snr};

fn main() -> remixit::Result<()> {
    println!("si_sdr([1, 0], [1, 1]) = {:.3} dB", si_sdr(&[1.0, 0.0], &[1.0, 1.0])?);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let clean: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let noisy: Vec<f64> = clean.iter().map(|s| s + 0.3 * rng.random_range(-1.0..1.0)).collect();

    println!("\n{:>8} {:>10} {:>10}", "gain", "SI-SDR", "SNR");
    for gain in [1.0, 0.5, 2.0, -1.0] {
        let scaled: Vec<f64> = noisy.iter().map(|v| gain * v).collect();
        println!(
            "{gain:>8} {:>10.4} {:>10.4}",
            si_sdr(&scaled, &clean)?,
            snr(&scaled, &clean)?
        );
    }

    let (loss, grad) = neg_sisdr_with_grad(&noisy, &clean)?;
    let along: f64 = grad.iter().zip(&noisy).map(|(g, y)| g * y).sum();
    println!("\nloss {loss:.4}; gradient along the estimate {along:.2e} (scale invariance)");

    let teacher: Vec<f64> = clean.iter().map(|s| s + 0.5 * rng.random_range(-1.0..1.0)).collect();
    let student: Vec<f64> = clean.iter().zip(&teacher).map(|(s, t)| 0.7 * s + 0.3 * t).collect();
    for unit in [false, true] {
        let d = error_decomposition(&student, &teacher, &clean, unit)?;
        println!(
            "unit_norm={unit:<5} total {:.4} = student {:.4} + teacher {:.4} - 2 x corr {:.4} (residual {:.1e})",
            d.total,
            d.student_err_sq,
            d.teacher_err_sq,
            d.correlation,
            d.identity_residual()
        );
    }
    Ok(())
}
