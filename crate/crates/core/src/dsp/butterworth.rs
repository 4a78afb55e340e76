use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

/// Second-order section, `a0 = 1`.
///
/// `y[n] = b0*x[n] + b1*x[n-1] + b2*x[n-2] - a1*y[n-1] - a2*y[n-2]`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub const IDENTITY: Biquad = Biquad {
        b0: 1.0,
        b1: 0.0,
        b2: 0.0,
        a1: 0.0,
        a2: 0.0,
    };

    /// Both poles strictly inside the unit circle (Jury conditions for a quadratic).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    /// Transfer function at `z`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        (self.b0 + self.b1 * zi + self.b2 * zi2) / (1.0 + self.a1 * zi + self.a2 * zi2)
    }

    /// Direct form II transposed, one sample.
    #[inline]
    fn tick(&self, state: &mut [f64; 2], x: f64) -> f64 {
        let y = self.b0 * x + state[0];
        state[0] = self.b1 * x - self.a1 * y + state[1];
        state[1] = self.b2 * x - self.a2 * y;
        y
    }
}

/// Ordered chain of biquads realizing one Butterworth design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
    pub kind: FilterKind,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
    pub order: usize,
}

/// Delay registers for a cascade, two per section.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterState {
    registers: Vec<[f64; 2]>,
}

impl FilterState {
    pub fn zeroed(sections: usize) -> Self {
        Self {
            registers: vec![[0.0; 2]; sections],
        }
    }

    pub fn reset(&mut self) {
        self.registers.iter_mut().for_each(|r| *r = [0.0; 2]);
    }

    pub fn is_zero(&self) -> bool {
        self.registers.iter().all(|r| r[0] == 0.0 && r[1] == 0.0)
    }
}

impl BiquadCascade {
    /// A single pass-through section.
    pub fn identity(sample_rate_hz: f64) -> Self {
        Self {
            sections: vec![Biquad::IDENTITY],
            kind: FilterKind::Lowpass,
            cutoff_hz: sample_rate_hz / 2.0,
            sample_rate_hz,
            order: 2,
        }
    }

    pub fn new_state(&self) -> FilterState {
        FilterState::zeroed(self.sections.len())
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Streaming entry point: filters one sample and advances `state`.
    #[inline]
    pub fn process_sample(&self, state: &mut FilterState, x: f64) -> f64 {
        debug_assert_eq!(state.registers.len(), self.sections.len());
        self.sections
            .iter()
            .zip(state.registers.iter_mut())
            .fold(x, |acc, (section, regs)| section.tick(regs, acc))
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * freq_hz / self.sample_rate_hz);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.eval(z))
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Gain at z = 1.
    pub fn dc_gain(&self) -> f64 {
        self.sections
            .iter()
            .map(|s| (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2))
            .product()
    }
}

/// Digital Butterworth design via the bilinear transform with prewarping.
///
/// The analog prototype's conjugate pole pairs map one-to-one onto
/// biquad sections, so `order / 2` sections are produced. Only even
/// orders are supported.
pub fn design_butterworth(
    order: usize,
    cutoff_hz: f64,
    sample_rate_hz: f64,
    kind: FilterKind,
) -> Result<BiquadCascade, DspError> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(DspError::InvalidSampleRate(sample_rate_hz));
    }
    if order == 0 || order % 2 != 0 {
        return Err(DspError::InvalidOrder(order));
    }
    let nyquist_hz = sample_rate_hz / 2.0;
    if !(cutoff_hz.is_finite() && cutoff_hz > 0.0 && cutoff_hz < nyquist_hz) {
        return Err(DspError::CutoffOutOfRange {
            cutoff_hz,
            nyquist_hz,
        });
    }

    // prewarped analog cutoff, normalized so the bilinear constant is 1
    let k = (PI * cutoff_hz / sample_rate_hz).tan();
    let k2 = k * k;
    let sections = (0..order / 2)
        .map(|idx| {
            // damping of the idx-th analog pole pair: 2*sin((2idx+1)pi/(2N))
            let damping = 2.0 * ((2 * idx + 1) as f64 * PI / (2 * order) as f64).sin();
            let norm = 1.0 / (1.0 + damping * k + k2);
            let a1 = 2.0 * (k2 - 1.0) * norm;
            let a2 = (1.0 - damping * k + k2) * norm;
            match kind {
                FilterKind::Lowpass => {
                    let b0 = k2 * norm;
                    Biquad {
                        b0,
                        b1: 2.0 * b0,
                        b2: b0,
                        a1,
                        a2,
                    }
                }
                FilterKind::Highpass => Biquad {
                    b0: norm,
                    b1: -2.0 * norm,
                    b2: norm,
                    a1,
                    a2,
                },
            }
        })
        .collect();

    Ok(BiquadCascade {
        sections,
        kind,
        cutoff_hz,
        sample_rate_hz,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn lowpass_dc_gain_is_one() {
        let lp = design_butterworth(2, 6.0, 1000.0, FilterKind::Lowpass).unwrap();
        assert!((lp.dc_gain() - 1.0).abs() < 1e-12);
        assert!((lp.magnitude(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn highpass_dc_gain_is_zero() {
        let hp = design_butterworth(2, 25.0, 1000.0, FilterKind::Highpass).unwrap();
        assert_eq!(hp.dc_gain(), 0.0);
        assert!(hp.magnitude(0.0) < 1e-12);
    }

    #[test]
    fn highpass_half_power_at_cutoff() {
        let hp = design_butterworth(2, 25.0, 1000.0, FilterKind::Highpass).unwrap();
        assert!((hp.magnitude(25.0) - FRAC_1_SQRT_2).abs() < 1e-3);
    }

    #[test]
    fn section_count_and_stability() {
        for order in [2, 4, 6, 8] {
            let c = design_butterworth(order, 40.0, 200.0, FilterKind::Lowpass).unwrap();
            assert_eq!(c.sections.len(), order / 2);
            assert!(c.is_stable());
        }
    }

    #[test]
    fn rejects_bad_designs() {
        assert!(matches!(
            design_butterworth(2, 500.0, 1000.0, FilterKind::Lowpass),
            Err(DspError::CutoffOutOfRange { .. })
        ));
        assert!(matches!(
            design_butterworth(2, 600.0, 1000.0, FilterKind::Highpass),
            Err(DspError::CutoffOutOfRange { .. })
        ));
        assert_eq!(
            design_butterworth(3, 10.0, 1000.0, FilterKind::Lowpass),
            Err(DspError::InvalidOrder(3))
        );
        assert_eq!(
            design_butterworth(0, 10.0, 1000.0, FilterKind::Lowpass),
            Err(DspError::InvalidOrder(0))
        );
    }

    #[test]
    fn state_resets_to_zero() {
        let lp = design_butterworth(4, 6.0, 1000.0, FilterKind::Lowpass).unwrap();
        let mut st = lp.new_state();
        assert!(st.is_zero());
        lp.process_sample(&mut st, 1.0);
        assert!(!st.is_zero());
        st.reset();
        assert!(st.is_zero());
    }
}
