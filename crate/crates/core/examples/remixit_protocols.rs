//! Self-trains students on domain-B mixtures under each teacher update
//! protocol, starting from the same domain-A teacher.
//!
//! ```text
//! cargo run --release --example remixit_protocols -- [epochs]
//! ```

use remixit::data::{generate_corpus, NoiseDomain, RegimeSplit, SnrMode, SynthSpec};
use remixit::optim::LrSchedule;
use remixit::selftrain::{evaluate, pretrain_teacher, run_remixit, Regime, TeacherProtocol, TrainConfig};

fn main() -> remixit::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(9, |a| a.parse().expect("epochs"));
    let lr = LrSchedule {
        initial_lr: 5e-4,
        ..LrSchedule::default()
    };
    let teacher_cfg = TrainConfig {
        batch_size: 4,
        lr,
        resample_snr: Some(SnrMode::Uniform {
            lo_db: -2.0,
            hi_db: 20.0,
        }),
        ..TrainConfig::new(Regime::Supervised, 10)
    };
    let split = RegimeSplit {
        paired: Some(generate_corpus(&SynthSpec::new(128, NoiseDomain::A), 21)?),
        ..RegimeSplit::default()
    };
    let teacher = pretrain_teacher(&teacher_cfg, &split, None, None)?.model;

    let mixtures = generate_corpus(&SynthSpec::new(128, NoiseDomain::B), 22)?.to_mixture_only();
    let test = generate_corpus(&SynthSpec::new(32, NoiseDomain::B), 23)?;
    let baseline = evaluate(&teacher, &test)?.mean_delta_si_sdr_db;
    println!("initial teacher on B: dSI-SDR {baseline:+.2} dB");

    for protocol in [
        TeacherProtocol::Static,
        TeacherProtocol::sequential(3),
        TeacherProtocol::ema(0.01),
    ] {
        let cfg = TrainConfig {
            batch_size: 4,
            lr,
            protocol: Some(protocol),
            eval_every: 1,
            ..TrainConfig::new(Regime::Remixit, epochs)
        };
        let outcome = run_remixit(&cfg, &teacher, &mixtures, Some(&test), None)?;
        let curve: Vec<String> = outcome
            .records
            .iter()
            .filter_map(|r| r.eval_delta_si_sdr)
            .map(|v| format!("{v:+.2}"))
            .collect();
        let generations = outcome.records.last().map_or(0, |r| r.teacher_gen);
        println!("{protocol:?}: {generations} teacher updates");
        println!("  student dSI-SDR per epoch: {}", curve.join(" "));
    }
    Ok(())
}
