use ndarray::{Array3, Axis};

use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::model::{infer, MaskNetParams};
use crate::scalar::Scalar;
use crate::signal::SignalBatch;

/// Anything that maps a batch of mixtures to `M x B x T` source estimates,
/// speech in slot 0.
pub trait Separator: Sync {
    fn num_sources(&self) -> usize;
    fn separate(&self, mixtures: &SignalBatch) -> Result<Array3<f64>>;
}

impl<T: Scalar> Separator for MaskNetParams<T> {
    fn num_sources(&self) -> usize {
        self.arch.num_sources
    }

    fn separate(&self, mixtures: &SignalBatch) -> Result<Array3<f64>> {
        infer(self, mixtures)
    }
}

/// Returns the ground-truth speech and noise of mixtures it was built from.
#[derive(Debug, Clone)]
pub struct OracleSeparator {
    table: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl OracleSeparator {
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        corpus.require_paired()?;
        let table = corpus
            .items()
            .iter()
            .map(|it| {
                (
                    it.mixture.samples().to_vec(),
                    it.speech.as_ref().expect("paired").samples().to_vec(),
                    it.noise.as_ref().expect("paired").samples().to_vec(),
                )
            })
            .collect();
        Ok(Self { table })
    }
}

impl Separator for OracleSeparator {
    fn num_sources(&self) -> usize {
        2
    }

    fn separate(&self, mixtures: &SignalBatch) -> Result<Array3<f64>> {
        let (b, t) = mixtures.data().dim();
        let mut out = Array3::zeros((2, b, t));
        for (row, m) in mixtures.data().axis_iter(Axis(0)).enumerate() {
            let (_, s, n) = self
                .table
                .iter()
                .find(|(mix, _, _)| m.iter().eq(mix.iter()))
                .ok_or_else(|| Error::InvalidSignal("mixture unknown to the oracle".into()))?;
            out.slice_mut(ndarray::s![0, row, ..])
                .assign(&ndarray::ArrayView1::from(s));
            out.slice_mut(ndarray::s![1, row, ..])
                .assign(&ndarray::ArrayView1::from(n));
        }
        Ok(out)
    }
}

/// Returns the mixture as speech and silence as noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassthroughSeparator;

impl Separator for PassthroughSeparator {
    fn num_sources(&self) -> usize {
        2
    }

    fn separate(&self, mixtures: &SignalBatch) -> Result<Array3<f64>> {
        let (b, t) = mixtures.data().dim();
        let mut out = Array3::zeros((2, b, t));
        out.index_axis_mut(Axis(0), 0).assign(mixtures.data());
        Ok(out)
    }
}
