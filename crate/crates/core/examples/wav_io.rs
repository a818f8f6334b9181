//! Writes a small synthetic corpus as WAV files plus a manifest, reads it
//! back, and ingests the mixtures alone as an unlabeled corpus.
//!
//! ```text
//! cargo run --release --example wav_io -- [dir]
//! ```

use remixit::data::{generate_corpus, load_manifest, load_wav_dir, write_corpus, NoiseDomain, SynthSpec, WavRole};
use remixit::signal::wav::{read_wav, write_wav, WavFormat};

fn main() -> remixit::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("remixit_wav_io"), Into::into);
    let corpus = generate_corpus(&SynthSpec::new(4, NoiseDomain::B), 41)?;
    let manifest = write_corpus(&corpus, &dir)?;
    println!("wrote {} files under {}", manifest.items.len(), dir.display());

    // Manifest WAVs are float32, so samples come back rounded to single precision.
    let back = load_manifest(&dir)?;
    let worst = corpus
        .items()
        .iter()
        .zip(back.items())
        .flat_map(|(a, b)| a.mixture.samples().iter().zip(b.mixture.samples()))
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!(
        "{} items read back, {:?}, max float32 rounding {worst:.2e}",
        back.len(),
        back.kind()
    );

    let mixtures = dir.join("mixtures_only");
    std::fs::create_dir_all(&mixtures)?;
    for (i, item) in corpus.items().iter().enumerate() {
        write_wav(mixtures.join(format!("clip_{i}.wav")), &item.mixture, WavFormat::Pcm16)?;
    }
    let unlabeled = load_wav_dir(&mixtures, WavRole::Mixture)?;
    println!("{} unlabeled mixtures, kind {:?}", unlabeled.len(), unlabeled.kind());

    let original = &corpus.items()[0].mixture;
    let pcm = read_wav(mixtures.join("clip_0.wav"))?;
    let err = original
        .samples()
        .iter()
        .zip(pcm.samples())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("16-bit quantization error: {err:.2e} (step {:.2e})", 1.0 / 32768.0);
    Ok(())
}
