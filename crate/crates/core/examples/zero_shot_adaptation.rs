//! Adapts a domain-A teacher to a handful of domain-B mixtures. The student
//! starts as a copy of the teacher, which then tracks it as a moving average.
//!
//! ```text
//! cargo run --release --example zero_shot_adaptation -- [n_mixtures] [epochs]
//! ```

use remixit::data::{generate_corpus, NoiseDomain, RegimeSplit, SnrMode, SynthSpec};
use remixit::optim::LrSchedule;
use remixit::selftrain::{evaluate, pretrain_teacher, zero_shot_adapt, Regime, TrainConfig};

fn main() -> remixit::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(64, |a| a.parse().expect("n_mixtures"));
    let epochs: usize = args.next().map_or(10, |a| a.parse().expect("epochs"));

    let teacher_cfg = TrainConfig {
        batch_size: 4,
        lr: LrSchedule {
            initial_lr: 5e-4,
            ..LrSchedule::default()
        },
        resample_snr: Some(SnrMode::Uniform {
            lo_db: -2.0,
            hi_db: 20.0,
        }),
        ..TrainConfig::new(Regime::Supervised, 10)
    };
    let split = RegimeSplit {
        paired: Some(generate_corpus(&SynthSpec::new(128, NoiseDomain::A), 31)?),
        ..RegimeSplit::default()
    };
    let teacher = pretrain_teacher(&teacher_cfg, &split, None, None)?.model;

    let mixtures = generate_corpus(&SynthSpec::new(n, NoiseDomain::B), 32)?.to_mixture_only();
    let test = generate_corpus(&SynthSpec::new(32, NoiseDomain::B), 33)?;
    let before = evaluate(&teacher, &test)?.mean_delta_si_sdr_db;

    let cfg = TrainConfig {
        epochs,
        batch_size: 4,
        eval_every: 1,
        lr: LrSchedule {
            initial_lr: 1e-4,
            ..LrSchedule::default()
        },
        ..TrainConfig::new(Regime::Adapt, epochs)
    };
    let outcome = zero_shot_adapt(&teacher, &mixtures, &cfg, Some(&test), None)?;
    println!("teacher before adaptation: dSI-SDR {before:+.2} dB");
    for r in outcome.records.iter().filter(|r| r.eval_delta_si_sdr.is_some()) {
        println!("epoch {:>2}: student {:+.2} dB", r.epoch, r.eval_delta_si_sdr.unwrap());
    }
    let ema = evaluate(outcome.teacher.as_ref().expect("adaptation keeps a teacher"), &test)?;
    println!("averaged teacher after adaptation: {:+.2} dB", ema.mean_delta_si_sdr_db);
    Ok(())
}
