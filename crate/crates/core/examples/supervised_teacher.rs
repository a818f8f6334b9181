//! Trains a supervised teacher on domain A and scores it in and out of
//! domain.
//!
//! ```text
//! cargo run --release --example supervised_teacher -- [epochs] [out_dir]
//! ```

use std::path::PathBuf;

use remixit::data::{generate_corpus, NoiseDomain, RegimeSplit, SnrMode, SynthSpec};
use remixit::optim::LrSchedule;
use remixit::selftrain::{evaluate, pretrain_teacher, Regime, TrainConfig};

fn main() -> remixit::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(10, |a| a.parse().expect("epochs"));
    let out_dir = args.next().map(PathBuf::from);

    let train = generate_corpus(&SynthSpec::new(256, NoiseDomain::A), 1)?;
    let test_a = generate_corpus(&SynthSpec::new(32, NoiseDomain::A), 2)?;
    let test_b = generate_corpus(&SynthSpec::new(32, NoiseDomain::B), 3)?;

    let cfg = TrainConfig {
        batch_size: 4,
        eval_every: 1,
        lr: LrSchedule {
            initial_lr: 5e-4,
            ..LrSchedule::default()
        },
        resample_snr: Some(SnrMode::Uniform {
            lo_db: -2.0,
            hi_db: 20.0,
        }),
        ..TrainConfig::new(Regime::Supervised, epochs)
    };
    let split = RegimeSplit {
        paired: Some(train),
        ..RegimeSplit::default()
    };
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let outcome = pretrain_teacher(&cfg, &split, Some(&test_a), out_dir.as_deref())?;

    println!("epoch  batch loss  test dSI-SDR");
    for epoch in 0..epochs {
        let rows: Vec<_> = outcome.records.iter().filter(|r| r.epoch == epoch).collect();
        let loss = rows.iter().map(|r| r.loss_total).sum::<f64>() / rows.len() as f64;
        let eval = rows.last().and_then(|r| r.eval_delta_si_sdr).unwrap_or(f64::NAN);
        println!("{epoch:>5} {loss:>10.3} {eval:>13.2}");
    }
    for (name, corpus) in [("A", &test_a), ("B", &test_b)] {
        let m = evaluate(&outcome.model, corpus)?;
        println!(
            "domain {name}: SI-SDR {:.2} dB, dSI-SDR {:+.2} dB, SNR {:.2} dB over {} items",
            m.mean_si_sdr_db, m.mean_delta_si_sdr_db, m.mean_snr_db, m.n_items
        );
    }
    Ok(())
}
