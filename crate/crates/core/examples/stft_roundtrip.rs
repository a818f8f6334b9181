//! Analysis/synthesis round trip and a look at a Hann main lobe.
//!
//! ```text
//! cargo run --release --example stft_roundtrip
//! ```

use remixit::signal::{istft, stft, StftConfig};

fn main() -> remixit::Result<()> {
    let rate = 8000.0;
    let x: Vec<f64> = (0..8000)
        .map(|t| {
            let t = t as f64 / rate;
            (2.0 * std::f64::consts::PI * 437.5 * t).sin() + 0.3 * (2.0 * std::f64::consts::PI * 1200.0 * t).cos()
        })
        .collect();

    for (fft, hop) in [(512, 128), (256, 64), (128, 32)] {
        let cfg = StftConfig::new(fft, hop)?;
        let spec = stft(&x, &cfg)?;
        let y = istft(&spec, &cfg, x.len())?;
        let err = x.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        println!(
            "fft {fft:>3} hop {hop:>3}: {} bins x {} frames, max reconstruction error {err:.2e}",
            spec.num_bins(),
            spec.num_frames()
        );
    }

    // 437.5 Hz sits exactly on bin 28 of a 512-point transform at 8 kHz.
    let cfg = StftConfig::default();
    let spec = stft(&x, &cfg)?;
    let frame = spec.num_frames() / 2;
    let power: Vec<f64> = (0..spec.num_bins()).map(|k| spec.bins[[k, frame]].norm_sqr()).collect();
    let total: f64 = power[..77].iter().sum();
    let lobe: f64 = power[27..=29].iter().sum();
    println!("share of the tone's energy in bins 27..=29: {:.4}", lobe / total);
    Ok(())
}
