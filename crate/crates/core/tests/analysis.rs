mod common;

use common::{toy_arch, toy_corpus};
use ndarray::Array3;
use remixit::analysis::*;
use remixit::data::{Corpus, NoiseDomain};
use remixit::model::init_params;
use remixit::selftrain::{OracleSeparator, Separator};
use remixit::signal::SignalBatch;
use remixit::Error;

/// Knows every clean speech and noise clip of a corpus, and splits any sum
/// `s_i + n_j` back into its parts.
struct RemixOracle {
    speech: Vec<Vec<f64>>,
    noise: Vec<Vec<f64>>,
}

impl RemixOracle {
    fn new(corpus: &Corpus) -> Self {
        Self {
            speech: corpus
                .items()
                .iter()
                .map(|i| i.speech.as_ref().unwrap().samples().to_vec())
                .collect(),
            noise: corpus
                .items()
                .iter()
                .map(|i| i.noise.as_ref().unwrap().samples().to_vec())
                .collect(),
        }
    }
}

impl Separator for RemixOracle {
    fn num_sources(&self) -> usize {
        2
    }

    fn separate(&self, batch: &SignalBatch) -> remixit::Result<Array3<f64>> {
        let (b, t) = batch.data().dim();
        let mut out = Array3::zeros((2, b, t));
        for (row, x) in batch.data().outer_iter().enumerate() {
            let (s, n) = self
                .speech
                .iter()
                .flat_map(|s| self.noise.iter().map(move |n| (s, n)))
                .find(|(s, n)| {
                    x.iter()
                        .zip(s.iter())
                        .zip(n.iter())
                        .all(|((x, s), n)| (x - s - n).abs() < 1e-12)
                })
                .expect("mixture is a remix of corpus sources");
            for k in 0..t {
                out[[0, row, k]] = s[k];
                out[[1, row, k]] = n[k];
            }
        }
        Ok(out)
    }
}

#[test]
fn identical_models_give_zero_deltas() {
    let corpus = toy_corpus(12, NoiseDomain::B, 1);
    let model = init_params::<f32>(&toy_arch(2), 3).unwrap();
    let report = bracket_analysis(&model, &model, &corpus, &DEFAULT_BRACKET_EDGES).unwrap();
    assert_eq!(report.brackets.len(), DEFAULT_BRACKET_EDGES.len() + 1);
    assert_eq!(report.brackets.iter().map(|b| b.count).sum::<usize>(), 12);
    for b in &report.brackets {
        match b.delta {
            Some(d) => {
                assert!(b.count > 0);
                assert_eq!([d.mean, d.median, d.q25, d.q75], [0.0; 4]);
            }
            None => assert_eq!(b.count, 0),
        }
    }
}

#[test]
fn single_item_lands_in_one_bracket() {
    let corpus = toy_corpus(1, NoiseDomain::A, 2);
    let teacher = init_params::<f32>(&toy_arch(2), 0).unwrap();
    let student = init_params::<f32>(&toy_arch(2), 1).unwrap();
    let report = bracket_analysis(&teacher, &student, &corpus, &DEFAULT_BRACKET_EDGES).unwrap();
    let filled: Vec<_> = report.brackets.iter().filter(|b| b.count > 0).collect();
    assert_eq!(filled.len(), 1);
    let d = filled[0].delta.unwrap();
    assert_eq!(d.mean, d.median);
    assert_eq!(d.q25, d.q75);
}

#[test]
fn oracle_student_gains_are_bracketed_by_teacher_score() {
    let corpus = toy_corpus(8, NoiseDomain::A, 4);
    let oracle = OracleSeparator::from_corpus(&corpus).unwrap();
    let report = bracket_analysis(&oracle, &oracle, &corpus, &[0.0, 100.0]).unwrap();
    // The oracle scores far above 100 dB, so everything sits in the top bracket.
    assert_eq!(report.brackets.last().unwrap().count, 8);
}

#[test]
fn bracket_rejects_bad_input() {
    let corpus = toy_corpus(4, NoiseDomain::A, 5);
    let model = init_params::<f32>(&toy_arch(2), 0).unwrap();
    assert!(matches!(
        bracket_analysis(&model, &model, &corpus, &[5.0, 0.0]),
        Err(Error::InvalidConfig(_))
    ));
    assert!(matches!(
        bracket_analysis(&model, &model, &corpus.to_mixture_only(), &DEFAULT_BRACKET_EDGES),
        Err(Error::UnpairedCorpus)
    ));
}

#[test]
fn decomposition_identity_holds_for_random_models() {
    let corpus = toy_corpus(6, NoiseDomain::B, 6);
    let teacher = init_params::<f32>(&toy_arch(3), 10).unwrap();
    let student = init_params::<f32>(&toy_arch(2), 11).unwrap();
    for unit_norm in [false, true] {
        let rows = decomposition_trace(&teacher, &student, &corpus, unit_norm, 0).unwrap();
        assert_eq!(rows.len(), 6);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.item, i);
            let t = r.terms;
            assert!([t.total, t.student_err_sq, t.teacher_err_sq, t.correlation]
                .iter()
                .all(|v| v.is_finite()));
            assert!(t.identity_residual() < 1e-9);
        }
    }
}

#[test]
fn oracle_teacher_has_no_error() {
    let corpus = toy_corpus(6, NoiseDomain::A, 7);
    let oracle = OracleSeparator::from_corpus(&corpus).unwrap();
    let student = init_params::<f32>(&toy_arch(2), 0).unwrap();
    for r in decomposition_trace(&oracle, &student, &corpus, true, 1).unwrap() {
        assert_eq!(r.terms.teacher_err_sq, 0.0);
        assert_eq!(r.terms.correlation, 0.0);
        assert!(r.terms.identity_residual() < 1e-9);
    }
}

#[test]
fn decomposition_is_seeded() {
    let corpus = toy_corpus(6, NoiseDomain::B, 8);
    let teacher = init_params::<f32>(&toy_arch(2), 0).unwrap();
    let student = init_params::<f32>(&toy_arch(2), 1).unwrap();
    let run = |seed| decomposition_trace(&teacher, &student, &corpus, false, seed).unwrap();
    assert_eq!(run(3), run(3));
}

fn sweep_cfg(b_values: Vec<usize>) -> SweepConfig {
    SweepConfig {
        b_values,
        poor_teacher_below_db: None,
        ..SweepConfig::default()
    }
}

#[test]
fn perfect_teacher_and_remix_oracle_gain_nothing() {
    let corpus = toy_corpus(6, NoiseDomain::A, 9);
    let teacher = OracleSeparator::from_corpus(&corpus).unwrap();
    let student = RemixOracle::new(&corpus);
    let sweep = mean_student_sweep(&teacher, &student, &corpus, &sweep_cfg(vec![1, 2, 5])).unwrap();
    assert_eq!(sweep.n_probe_items, 6);
    for p in &sweep.points {
        assert!(p.mean_improvement_db.abs() < 1e-3, "{p:?}");
        assert_eq!(p.correlation_term, 0.0);
    }
}

#[test]
fn sweep_needs_enough_noise_estimates() {
    let corpus = toy_corpus(5, NoiseDomain::A, 10);
    let model = init_params::<f32>(&toy_arch(2), 0).unwrap();
    let err = mean_student_sweep(&model, &model, &corpus, &sweep_cfg(vec![1, 5])).unwrap_err();
    assert!(matches!(
        err,
        Error::NotEnoughNoiseEstimates {
            requested: 5,
            available: 4
        }
    ));
    assert!(mean_student_sweep(&model, &model, &corpus, &sweep_cfg(vec![1, 4])).is_ok());
    assert!(matches!(
        mean_student_sweep(&model, &model, &corpus, &sweep_cfg(vec![2, 1])),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn sweep_filter_can_leave_nothing() {
    let corpus = toy_corpus(5, NoiseDomain::A, 11);
    let oracle = OracleSeparator::from_corpus(&corpus).unwrap();
    let cfg = SweepConfig {
        b_values: vec![1],
        ..SweepConfig::default()
    };
    assert!(matches!(
        mean_student_sweep(&oracle, &oracle, &corpus, &cfg),
        Err(Error::NoProbeItems(_))
    ));
}

#[test]
fn sweep_is_deterministic_and_written_per_b() {
    let corpus = toy_corpus(9, NoiseDomain::B, 12);
    let teacher = init_params::<f32>(&toy_arch(2), 0).unwrap();
    let student = init_params::<f32>(&toy_arch(2), 1).unwrap();
    let cfg = sweep_cfg(vec![1, 8]);
    let a = mean_student_sweep(&teacher, &student, &corpus, &cfg).unwrap();
    let b = mean_student_sweep(&teacher, &student, &corpus, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.points.iter().map(|p| p.b).collect::<Vec<_>>(), vec![1, 8]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_sweep_csv(&a, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "B,mean_snr_improvement_db,correlation_term");
    assert_eq!(lines.len(), 3);
}

#[test]
fn csv_headers_and_rows() {
    let corpus = toy_corpus(4, NoiseDomain::A, 13);
    let model = init_params::<f32>(&toy_arch(2), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let report = bracket_analysis(&model, &model, &corpus, &DEFAULT_BRACKET_EDGES).unwrap();
    let path = dir.path().join("bracket.csv");
    write_bracket_csv(&report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "bracket_lo,bracket_hi,count,mean_delta,median_delta,q25,q75");
    assert_eq!(lines.len(), 1 + report.brackets.len());

    let rows = decomposition_trace(&model, &model, &corpus, false, 0).unwrap();
    let path = dir.path().join("decomp.csv");
    write_decomposition_csv(&rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("item,total,student_err_sq,teacher_err_sq,correlation\n"));
    assert_eq!(text.lines().count(), 5);
}
