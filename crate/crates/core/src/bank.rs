//! Probe data patterns and simulated signal measurements.
//!
//! Every random draw comes from a ChaCha8 stream keyed by the seed and a
//! stream id: bank cell `(k, m)` uses stream `k·M + m`, signal setting `k`
//! uses stream `SIGNAL_STREAM_BASE + k`. Cells are therefore independent of
//! generation order, and the bank and signal never share a stream even when
//! they share a seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BankError, Error, Result};
use crate::posterior::Frequency;
use crate::quantum::{coherent_overlap_prob, signal_born_probability, ComplexAmplitude, SignalState};

pub const BANK_SCHEMA_VERSION: u32 = 1;
const SIGNAL_STREAM_BASE: u64 = 1 << 63;

fn draw_count(seed: u64, stream: u64, copies: u64, prob: f64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let p = prob.clamp(0.0, 1.0);
    Binomial::new(copies, p)
        .expect("probability clamped to [0, 1]")
        .sample(&mut rng)
}

/// Measured probe frequencies `f_km = counts[k][m] / N_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternBank {
    pub schema_version: u32,
    #[serde(rename = "N_p")]
    pub copies: u64,
    pub seed: u64,
    pub probe_amplitudes: Vec<ComplexAmplitude>,
    pub setting_amplitudes: Vec<ComplexAmplitude>,
    pub counts: Vec<Vec<u64>>,
}

impl PatternBank {
    pub fn settings(&self) -> usize {
        self.setting_amplitudes.len()
    }

    pub fn probes(&self) -> usize {
        self.probe_amplitudes.len()
    }

    pub fn frequency(&self, setting: usize, probe: usize) -> f64 {
        self.counts[setting][probe] as f64 / self.copies as f64
    }

    /// Frequencies `f_k1 .. f_kM` for setting `k`.
    pub fn row(&self, setting: usize) -> Vec<f64> {
        let n = self.copies as f64;
        self.counts[setting].iter().map(|&c| c as f64 / n).collect()
    }

    pub fn validate(&self) -> Result<(), BankError> {
        if self.schema_version != BANK_SCHEMA_VERSION {
            return Err(BankError::SchemaVersion {
                expected: BANK_SCHEMA_VERSION,
                found: self.schema_version,
            });
        }
        if self.copies == 0 {
            return Err(BankError::Schema("N_p must be positive".into()));
        }
        if self.counts.len() != self.settings() {
            return Err(BankError::Dimension(format!(
                "{} count rows for {} settings",
                self.counts.len(),
                self.settings()
            )));
        }
        for (k, row) in self.counts.iter().enumerate() {
            if row.len() != self.probes() {
                return Err(BankError::Dimension(format!(
                    "row {k} has {} counts for {} probes",
                    row.len(),
                    self.probes()
                )));
            }
            if let Some((m, &count)) = row.iter().enumerate().find(|(_, &c)| c > self.copies) {
                return Err(BankError::CountOutOfRange {
                    setting: k,
                    probe: m,
                    count,
                    copies: self.copies,
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bank serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BankError> {
        let bank: PatternBank =
            serde_json::from_str(text).map_err(|e| BankError::Schema(e.to_string()))?;
        bank.validate()?;
        Ok(bank)
    }

    /// Frequencies as CSV: a header of probe indices, then one row per setting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["setting".to_string()];
        header.extend((0..self.probes()).map(|m| m.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for k in 0..self.settings() {
            let mut rec = vec![k.to_string()];
            rec.extend(self.row(k).iter().map(|f| f.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Simulates `f_km ~ Binomial(N_p, exp(-|α_m - β_k|²)) / N_p` for every cell.
pub fn simulate_probe_bank(
    probes: &[ComplexAmplitude],
    settings: &[ComplexAmplitude],
    copies: u64,
    seed: u64,
) -> Result<PatternBank> {
    if copies == 0 {
        return Err(Error::Config("probe copies N_p must be at least 1".into()));
    }
    let m_total = probes.len() as u64;
    let counts = settings
        .par_iter()
        .enumerate()
        .map(|(k, &beta)| {
            probes
                .iter()
                .enumerate()
                .map(|(m, &alpha)| {
                    let stream = k as u64 * m_total + m as u64;
                    draw_count(seed, stream, copies, coherent_overlap_prob(alpha, beta))
                })
                .collect()
        })
        .collect();
    Ok(PatternBank {
        schema_version: BANK_SCHEMA_VERSION,
        copies,
        seed,
        probe_amplitudes: probes.to_vec(),
        setting_amplitudes: settings.to_vec(),
        counts,
    })
}

pub fn save_bank(bank: &PatternBank, path: &Path) -> Result<()> {
    fs::write(path, bank.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_bank(path: &Path) -> Result<PatternBank> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(PatternBank::from_json(&text)?)
}

/// Signal source that is measured at most once per setting.
#[derive(Debug, Clone)]
pub struct SignalMeter {
    signal: SignalState,
    copies: u64,
    seed: u64,
    measured: BTreeMap<usize, u64>,
}

impl SignalMeter {
    pub fn new(signal: SignalState, copies: u64, seed: u64) -> Result<Self> {
        if copies == 0 {
            return Err(Error::Config("signal copies N_s must be at least 1".into()));
        }
        Ok(SignalMeter {
            signal,
            copies,
            seed,
            measured: BTreeMap::new(),
        })
    }

    pub fn signal(&self) -> &SignalState {
        &self.signal
    }

    pub fn copies(&self) -> u64 {
        self.copies
    }

    /// Frequency at `settings[setting]`, drawn on first use and cached after.
    pub fn measure(&mut self, setting: usize, settings: &[ComplexAmplitude]) -> Result<Frequency> {
        let beta = *settings.get(setting).ok_or(Error::Dimension {
            what: "setting index",
            expected: settings.len(),
            found: setting,
        })?;
        let (seed, copies, signal) = (self.seed, self.copies, self.signal);
        let count = *self.measured.entry(setting).or_insert_with(|| {
            draw_count(
                seed,
                SIGNAL_STREAM_BASE + setting as u64,
                copies,
                signal_born_probability(&signal, beta),
            )
        });
        Frequency::new(count, copies)
    }

    pub fn measured(&self) -> &BTreeMap<usize, u64> {
        &self.measured
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn amps() -> Vec<ComplexAmplitude> {
        vec![Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0), Complex64::new(-0.5, 0.3)]
    }

    #[test]
    fn identical_amplitudes_give_unit_frequency() {
        let a = amps();
        for seed in [0, 1, 99] {
            let bank = simulate_probe_bank(&a, &a, 1000, seed).unwrap();
            for k in 0..3 {
                assert_eq!(bank.counts[k][k], 1000);
            }
        }
    }

    #[test]
    fn bank_is_deterministic() {
        let a = amps();
        let x = simulate_probe_bank(&a, &a, 1000, 7).unwrap();
        let y = simulate_probe_bank(&a, &a, 1000, 7).unwrap();
        let z = simulate_probe_bank(&a, &a, 1000, 8).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn json_errors_are_distinct() {
        let a = amps();
        let bank = simulate_probe_bank(&a, &a, 10, 3).unwrap();
        let mut over = bank.clone();
        over.counts[1][2] = 11;
        assert!(matches!(
            PatternBank::from_json(&over.to_json()),
            Err(BankError::CountOutOfRange { setting: 1, probe: 2, .. })
        ));
        let mut version = bank.clone();
        version.schema_version = 2;
        assert!(matches!(
            PatternBank::from_json(&version.to_json()),
            Err(BankError::SchemaVersion { found: 2, .. })
        ));
        let mut short = bank.clone();
        short.counts[0].pop();
        assert!(matches!(PatternBank::from_json(&short.to_json()), Err(BankError::Dimension(_))));
        let mut value: serde_json::Value = serde_json::from_str(&bank.to_json()).unwrap();
        value.as_object_mut().unwrap().remove("seed");
        assert!(matches!(PatternBank::from_json(&value.to_string()), Err(BankError::Schema(_))));
    }

    #[test]
    fn meter_caches_first_draw() {
        let a = amps();
        let mut meter = SignalMeter::new(SignalState::SinglePhoton, 1000, 5).unwrap();
        assert_eq!(meter.measure(0, &a).unwrap().count, 0);
        let first = meter.measure(2, &a).unwrap();
        assert_eq!(meter.measure(2, &a).unwrap(), first);
        let mut coh = SignalMeter::new(SignalState::coherent(0.5, 0.0), 1000, 5).unwrap();
        assert_eq!(coh.measure(1, &a).unwrap().count, 1000);
        assert!(coh.measure(3, &a).is_err());
    }
}
