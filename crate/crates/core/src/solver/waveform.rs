//! Source time signatures.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::SourceKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    /// Modulated Gaussian, -20 dB at `center +/- bandwidth/2`.
    GaussianPulse { center: f64, bandwidth: f64, tau: f64, delay: f64 },
    /// Sine with a raised-cosine turn-on of `ramp` seconds.
    ContinuousWave { frequency: f64, ramp: f64 },
    Off,
}

impl Waveform {
    pub fn gaussian(center: f64, bandwidth: f64) -> Self {
        let tau = 2.0 * 10f64.ln().sqrt() / (PI * bandwidth);
        Waveform::GaussianPulse { center, bandwidth, tau, delay: 4.0 * tau }
    }

    pub fn continuous(frequency: f64, ramp_periods: f64) -> Self {
        Waveform::ContinuousWave { frequency, ramp: ramp_periods / frequency }
    }

    pub fn from_source(kind: &SourceKind, ramp_periods: f64) -> Self {
        match *kind {
            SourceKind::GaussianPulse { center, bandwidth } => Self::gaussian(center, bandwidth),
            SourceKind::ContinuousWave { frequency } => Self::continuous(frequency, ramp_periods),
            SourceKind::Off => Waveform::Off,
        }
    }

    /// Unit-amplitude value at time `t`.
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Waveform::GaussianPulse { center, tau, delay, .. } => {
                let s = t - delay;
                (-(s / tau).powi(2)).exp() * (2.0 * PI * center * s).sin()
            }
            Waveform::ContinuousWave { frequency, ramp } => {
                let w = if t <= 0.0 {
                    0.0
                } else if t >= ramp {
                    1.0
                } else {
                    0.5 * (1.0 - (PI * t / ramp).cos())
                };
                w * (2.0 * PI * frequency * t).sin()
            }
            Waveform::Off => 0.0,
        }
    }

    /// Time after which the pulse has essentially left the source.
    pub fn settle_time(&self) -> f64 {
        match *self {
            Waveform::GaussianPulse { delay, .. } => 2.0 * delay,
            Waveform::ContinuousWave { ramp, .. } => ramp,
            Waveform::Off => 0.0,
        }
    }

    /// Phasor of the steady-state part (`e^{+jwt}` convention).
    pub fn steady_phasor(&self) -> Complex64 {
        match self {
            Waveform::ContinuousWave { .. } => Complex64::new(0.0, -1.0),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn band(&self) -> Option<(f64, f64)> {
        match *self {
            Waveform::GaussianPulse { center, bandwidth, .. } => {
                Some((center - bandwidth / 2.0, center + bandwidth / 2.0))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_spectrum_edges_are_twenty_db_down() {
        let w = Waveform::gaussian(2.45e9, 1e9);
        let dt = 1e-12;
        let spectrum = |f: f64| {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..20000 {
                let t = n as f64 * dt;
                acc += w.value(t) * Complex64::from_polar(1.0, -2.0 * PI * f * t);
            }
            acc.norm()
        };
        let peak = spectrum(2.45e9);
        let edge = spectrum(2.95e9);
        let db = 20.0 * (edge / peak).log10();
        assert!((db + 20.0).abs() < 0.3, "{db}");
    }

    #[test]
    fn cw_ramp_is_smooth() {
        let w = Waveform::continuous(1e9, 3.0);
        assert_eq!(w.value(0.0), 0.0);
        let late = w.value(3.25e-9);
        assert!((late - 1.0).abs() < 1e-9);
    }
}
