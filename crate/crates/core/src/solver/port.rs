//! Port voltage/current records, spectra and accepted power.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub frequency: f64,
    pub s11: Complex64,
    pub s11_db: f64,
    pub voltage: Complex64,
    pub current: Complex64,
    /// Source spectrum is strong enough for the ratio to be trusted.
    pub meaningful: bool,
}

/// Frequency-domain port quantities at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortPhasor {
    pub frequency: f64,
    pub voltage: Complex64,
    pub current: Complex64,
    pub source: Complex64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PortRecord {
    pub resistance: f64,
    pub dt: f64,
    /// Samples at t = (n + 1/2) dt.
    pub voltage: Vec<f64>,
    pub current: Vec<f64>,
    pub source: Vec<f64>,
    pub spectrum: Vec<SpectrumPoint>,
    pub phasors: Vec<PortPhasor>,
    pub warnings: Vec<String>,
}

impl PortRecord {
    pub fn new(resistance: f64, dt: f64) -> Self {
        Self { resistance, dt, ..Default::default() }
    }

    pub fn push(&mut self, v: f64, i: f64, vs: f64) {
        self.voltage.push(v);
        self.current.push(i);
        self.source.push(vs);
    }

    pub fn time(&self, n: usize) -> f64 {
        (n as f64 + 0.5) * self.dt
    }

    fn dft(&self, x: &[f64], f: f64, start: usize) -> Complex64 {
        let w = -2.0 * PI * f * self.dt;
        let step = Complex64::from_polar(1.0, w);
        let mut rot = Complex64::from_polar(1.0, w * (start as f64 + 0.5));
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, &v) in x[start..].iter().enumerate() {
            acc += v * rot;
            rot *= step;
            // Renormalize now and then; the recurrence drifts slowly.
            if n % 1024 == 1023 {
                rot /= rot.norm();
            }
        }
        acc
    }

    /// Reflection spectrum over `[f_lo, f_hi]` from the full time records.
    pub fn compute_spectrum(&mut self, f_lo: f64, f_hi: f64, points: usize) {
        let points = points.max(2);
        let freqs: Vec<f64> = (0..points)
            .map(|k| f_lo + (f_hi - f_lo) * k as f64 / (points - 1) as f64)
            .collect();
        let mut raw = Vec::with_capacity(points);
        for &f in &freqs {
            let u = self.dft(&self.voltage, f, 0);
            let i = self.dft(&self.current, f, 0);
            let vs = self.dft(&self.source, f, 0);
            raw.push((f, u, i, vs));
        }
        let peak = raw.iter().map(|r| r.3.norm()).fold(0.0, f64::max);
        self.spectrum = raw
            .into_iter()
            .map(|(f, u, i, vs)| {
                let s11 = if vs.norm() > 0.0 { 2.0 * u / vs - 1.0 } else { Complex64::new(f64::NAN, f64::NAN) };
                let scale = 1.0 / vs.norm().max(f64::MIN_POSITIVE);
                SpectrumPoint {
                    frequency: f,
                    s11,
                    s11_db: 20.0 * s11.norm().log10(),
                    voltage: u * scale,
                    current: i * scale,
                    meaningful: peak > 0.0 && vs.norm() >= 1e-2 * peak,
                }
            })
            .collect();
    }

    /// Steady-state phasors from the last `samples` records (integer periods).
    pub fn compute_phasor(&mut self, f: f64, samples: usize) {
        let n = self.voltage.len();
        let start = n.saturating_sub(samples);
        let norm = 2.0 / (n - start).max(1) as f64;
        let p = PortPhasor {
            frequency: f,
            voltage: self.dft(&self.voltage, f, start) * norm,
            current: self.dft(&self.current, f, start) * norm,
            source: self.dft(&self.source, f, start) * norm,
        };
        self.phasors.retain(|q| q.frequency != f);
        self.phasors.push(p);
    }

    /// Frequency of the deepest meaningful reflection.
    pub fn resonance(&self) -> Option<SpectrumPoint> {
        self.spectrum
            .iter()
            .filter(|p| p.meaningful && p.s11_db.is_finite())
            .min_by(|a, b| a.s11_db.total_cmp(&b.s11_db))
            .copied()
    }

    /// Two-column text (voltage, current) sampled every `dt`, plus a comment header.
    pub fn time_series_text(&self) -> String {
        let mut s = format!("# dt_s {:e}\n# t0_s {:e}\n# voltage_V current_A\n", self.dt, 0.5 * self.dt);
        for (v, i) in self.voltage.iter().zip(&self.current) {
            let _ = writeln!(s, "{v:e} {i:e}");
        }
        s
    }

    pub fn spectrum_text(&self) -> String {
        let mut s = String::from("# frequency_Hz s11_re s11_im s11_dB meaningful\n");
        for p in &self.spectrum {
            let _ = writeln!(
                s,
                "{:e} {:e} {:e} {:.4} {}",
                p.frequency,
                p.s11.re,
                p.s11.im,
                p.s11_db,
                u8::from(p.meaningful)
            );
        }
        s
    }
}

/// Time-averaged accepted power `Re(V I*) / 2` at a frequency that was
/// actually transformed.
pub fn accepted_power(record: &PortRecord, frequency: f64) -> Result<f64> {
    let tol = 1e-9 * frequency.abs().max(1.0);
    record
        .phasors
        .iter()
        .find(|p| (p.frequency - frequency).abs() <= tol)
        .map(|p| 0.5 * (p.voltage * p.current.conj()).re)
        .ok_or(Error::Range { frequency })
}
