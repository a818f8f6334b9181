//! Averages a student's outputs over more and more bootstrapped mixtures
//! that share one teacher speech estimate, and reports how the averaged
//! estimate compares with the teacher's.
//!
//! ```text
//! cargo run --release --example mean_student_sweep -- [csv_path]
//! ```

use remixit::analysis::{mean_student_sweep, write_sweep_csv, SweepConfig};
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
        paired: Some(generate_corpus(&SynthSpec::new(128, NoiseDomain::A), 61)?),
        ..RegimeSplit::default()
    };
    let teacher = pretrain_teacher(&teacher_cfg, &split, None, None)?.model;
    let mixtures = generate_corpus(&SynthSpec::new(128, NoiseDomain::B), 62)?.to_mixture_only();
    let student_cfg = TrainConfig {
        batch_size: 4,
        lr,
        ..TrainConfig::new(Regime::Remixit, 6)
    };
    let student = run_remixit(&student_cfg, &teacher, &mixtures, None, None)?.model;

    let probe = generate_corpus(&SynthSpec::new(80, NoiseDomain::B), 63)?;
    for (label, threshold) in [("poor-teacher items", Some(5.0)), ("all items", None)] {
        let cfg = SweepConfig {
            poor_teacher_below_db: threshold,
            ..SweepConfig::default()
        };
        let sweep = mean_student_sweep(&teacher, &student, &probe, &cfg)?;
        println!("{label} ({} probes)", sweep.n_probe_items);
        println!("{:>4} {:>16} {:>12}", "B", "SNR gain (dB)", "correlation");
        for p in &sweep.points {
            println!(
                "{:>4} {:>+16.3} {:>12.5}",
                p.b, p.mean_improvement_db, p.correlation_term
            );
        }
        if let (Some(path), None) = (std::env::args().nth(1), threshold) {
            write_sweep_csv(&sweep, &path)?;
            println!("wrote {path}");
        }
    }
    Ok(())
}
