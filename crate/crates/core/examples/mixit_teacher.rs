//! Unsupervised MixIT pretraining: 80% of a paired corpus become
//! mixtures, the rest isolated noise, and a three-output model learns to
//! separate mixtures of mixtures.
//!
//! ```text
//! cargo run --release --example mixit_teacher -- [epochs]
//! ```

use remixit::data::{generate_corpus, split_for_regime, NoiseDomain, SplitConfig, SplitRegime, SynthSpec};
use remixit::model::ModelArch;
use remixit::selftrain::{evaluate, pretrain_teacher, Regime, TrainConfig};

fn main() -> remixit::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(10, |a| a.parse().expect("epochs"));
    let corpus = generate_corpus(&SynthSpec::new(160, NoiseDomain::A), 11)?;
    let test = generate_corpus(&SynthSpec::new(32, NoiseDomain::A), 12)?;
    let split = split_for_regime(&corpus, &SplitConfig::new(SplitRegime::Mixit, 0))?;
    println!(
        "{} mixtures, {} noise clips",
        split.mixtures.as_ref().map_or(0, |c| c.len()),
        split.noise.as_ref().map_or(0, |c| c.len())
    );

    let cfg = TrainConfig {
        arch: ModelArch {
            num_sources: 3,
            ..ModelArch::default()
        },
        batch_size: 4,
        eval_every: 2,
        ..TrainConfig::new(Regime::Mixit, epochs)
    };
    let outcome = pretrain_teacher(&cfg, &split, Some(&test), None)?;
    for r in outcome.records.iter().filter(|r| r.eval_delta_si_sdr.is_some()) {
        println!(
            "epoch {:>3}: test dSI-SDR {:+.2} dB",
            r.epoch,
            r.eval_delta_si_sdr.unwrap()
        );
    }
    let m = evaluate(&outcome.model, &test)?;
    println!("final: speech slot dSI-SDR {:+.2} dB", m.mean_delta_si_sdr_db);
    Ok(())
}
