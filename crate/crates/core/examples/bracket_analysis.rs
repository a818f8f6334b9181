//! Trains a teacher and a self-trained student, then groups test items by
//! how well the teacher did and reports the student's gain per group.
//!
//! ```text
//! cargo run --release --example bracket_analysis -- [csv_path]
//! ```

use remixit::analysis::{bracket_analysis, write_bracket_csv, DEFAULT_BRACKET_EDGES};
use remixit::data::{generate_corpus, NoiseDomain, RegimeSplit, SnrMode, SynthSpec};
use remixit::optim::LrSchedule;
use remixit::selftrain::{pretrain_teacher, run_remixit, Regime, TrainConfig};

fn main() -> remixit::Result<()> {
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
        ..TrainConfig::new(Regime::Supervised, 8)
    };
    let split = RegimeSplit {
        paired: Some(generate_corpus(&SynthSpec::new(128, NoiseDomain::A), 51)?),
        ..RegimeSplit::default()
    };
    let teacher = pretrain_teacher(&teacher_cfg, &split, None, None)?.model;
    let mixtures = generate_corpus(&SynthSpec::new(128, NoiseDomain::B), 52)?.to_mixture_only();
    let student_cfg = TrainConfig {
        batch_size: 4,
        lr,
        ..TrainConfig::new(Regime::Remixit, 6)
    };
    let student = run_remixit(&student_cfg, &teacher, &mixtures, None, None)?.model;

    let probe = generate_corpus(&SynthSpec::new(96, NoiseDomain::B), 53)?;
    let report = bracket_analysis(&teacher, &student, &probe, &DEFAULT_BRACKET_EDGES)?;
    println!(
        "{:>16} {:>6} {:>10} {:>10}",
        "teacher SI-SDR", "items", "mean gain", "median"
    );
    for b in &report.brackets {
        let range = format!("[{}, {})", b.lo, b.hi);
        match b.delta {
            Some(d) => println!("{range:>16} {:>6} {:>+10.2} {:>+10.2}", b.count, d.mean, d.median),
            None => println!("{range:>16} {:>6}", b.count),
        }
    }
    if let Some(path) = std::env::args().nth(1) {
        write_bracket_csv(&report, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
