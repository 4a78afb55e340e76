//! Synthetic treadmill gait corpora.
//!
//! A subject is a small parametric model: each joint angle is a three-
//! harmonic Fourier series in gait phase, gait phase advances at a rate
//! set by treadmill speed, joint moments are phase-advanced nonlinear
//! functions of the same waveforms, sEMG is white noise modulated by an
//! activation that is affine in a joint angle `preactivation_lead_s`
//! ahead, and IMU channels are rates and gravity/centripetal projections
//! of segment angles. Everything is deterministic in `(profile, seed)`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::schema::{self, EMG_RATE_HZ, IMU_RATE_HZ, PREPARED_RATE_HZ};
use super::{DataError, RawTrial, SpeedSegment};
use crate::dsp::TimeSeriesChannel;
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthProfile {
    /// Stride period at the trial's mean speed.
    pub gait_period_s: f64,
    pub speed_profile: Vec<SpeedSegment>,
    /// Added to every speed of trial `k` as `k * trial_speed_step_mps`.
    pub trial_speed_step_mps: f64,
    /// Oscillation amplitude multipliers for hip, knee, ankle.
    pub amplitude_scales: [f64; 3],
    /// Additive sensor noise, relative to each channel's nominal amplitude.
    pub noise_std: f64,
    pub preactivation_lead_s: f64,
    pub duration_s: f64,
    pub trials_per_subject: usize,
    /// Relative spread of per-subject amplitudes, phases and sensor gains.
    pub subject_variability: f64,
    pub emg_rate_hz: f64,
    pub imu_rate_hz: f64,
    pub target_rate_hz: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self {
            gait_period_s: 1.1,
            speed_profile: vec![
                SpeedSegment { start_s: 0.0, speed_mps: 0.8 },
                SpeedSegment { start_s: 5.0, speed_mps: 1.25 },
                SpeedSegment { start_s: 10.0, speed_mps: 1.55 },
                SpeedSegment { start_s: 15.0, speed_mps: 1.0 },
            ],
            trial_speed_step_mps: 0.05,
            amplitude_scales: [1.0; 3],
            noise_std: 0.05,
            preactivation_lead_s: 0.1,
            duration_s: 20.0,
            trials_per_subject: 1,
            subject_variability: 0.08,
            emg_rate_hz: EMG_RATE_HZ,
            imu_rate_hz: IMU_RATE_HZ,
            target_rate_hz: PREPARED_RATE_HZ,
        }
    }
}

impl SynthProfile {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidProfile(msg));
        if !(self.gait_period_s > 0.0) {
            return bad(format!("gait_period_s must be positive, got {}", self.gait_period_s));
        }
        if !(self.noise_std >= 0.0) {
            return bad(format!("noise_std must be non-negative, got {}", self.noise_std));
        }
        if !(self.duration_s > 0.0) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.preactivation_lead_s >= 0.0) {
            return bad("preactivation_lead_s must be non-negative".into());
        }
        if self.speed_profile.is_empty() {
            return bad("speed_profile is empty".into());
        }
        if self.speed_profile.iter().any(|s| !(s.speed_mps > 0.0)) {
            return bad("speeds must be positive".into());
        }
        if self
            .speed_profile
            .windows(2)
            .any(|w| w[1].start_s <= w[0].start_s)
        {
            return bad("speed segments must have increasing start times".into());
        }
        for rate in [self.emg_rate_hz, self.imu_rate_hz, self.target_rate_hz] {
            if !(rate > 0.0) {
                return bad(format!("sample rates must be positive, got {rate}"));
            }
        }
        Ok(())
    }
}

/// Harmonic templates (amplitude in degrees, phase in radians) and offsets
/// for hip, knee and ankle flexion.
const ANGLE_TEMPLATES: [(f64, [(f64, f64); 3]); 3] = [
    (10.0, [(20.0, 0.0), (3.0, 0.5), (1.0, 1.0)]),
    (30.0, [(22.0, -2.2), (12.0, 1.2), (3.0, 0.3)]),
    (2.0, [(6.0, 1.5), (7.0, -1.0), (2.0, 0.7)]),
];
const MOMENT_GAINS: [f64; 3] = [0.8, 0.5, 1.4];
/// Moments lead the angle waveform by this fraction of a cycle.
const MOMENT_PHASE_LEAD: [f64; 3] = [0.08, 0.05, 0.1];
/// (joint index 0..3 on the right side, sign) per muscle, canonical order.
const MUSCLE_DRIVE: [(usize, f64); 11] = [
    (0, 1.0),
    (0, -1.0),
    (1, 1.0),
    (0, -1.0),
    (1, 1.0),
    (0, -1.0),
    (1, -1.0),
    (1, -1.0),
    (2, 1.0),
    (2, -1.0),
    (2, 1.0),
];
/// Accelerometer lever arm per IMU site (m).
const LEVER_ARM: [f64; 4] = [0.4, 0.3, 0.3, 0.1];
const GRAVITY: f64 = 9.81;
const SPEED_RAMP_S: f64 = 1.0;
const SPEED_EXPONENT: f64 = 0.5;
const AMPLITUDE_EXPONENT: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
struct JointModel {
    offset: f64,
    harmonics: [(f64, f64); 3],
    scale: f64,
    moment_gain: f64,
}

impl JointModel {
    fn amplitude(&self) -> f64 {
        self.harmonics.iter().map(|h| h.0).sum()
    }

    /// Zero-mean waveform in [-1, 1] at phase `phase` (cycles).
    fn unit_wave(&self, phase: f64) -> f64 {
        self.harmonics
            .iter()
            .enumerate()
            .map(|(k, &(a, p))| a * (TAU * (k + 1) as f64 * phase + p).cos())
            .sum::<f64>()
            / self.amplitude()
    }
}

/// Per-subject draw of waveform and sensor parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectModel {
    joints: [JointModel; 3],
    muscle_gain: [f64; 11],
    imu_gain: [f64; 24],
}

/// Phase and speed on a fine time grid for one trial.
struct Kinematics {
    t0: f64,
    dt: f64,
    phase: Vec<f64>,
    speed: Vec<f64>,
    mean_speed: f64,
}

impl Kinematics {
    fn new(profile: &SynthProfile, speeds: &[SpeedSegment], phase0: f64) -> Self {
        let dt = 1e-3;
        let margin = 2.0 + profile.preactivation_lead_s;
        let t0 = -margin;
        let n = ((profile.duration_s + 2.0 * margin) / dt).ceil() as usize + 1;
        let speed_at = |t: f64| -> f64 {
            let mut v = speeds[0].speed_mps;
            for w in speeds.windows(2) {
                let (prev, next) = (w[0], w[1]);
                if t >= next.start_s + SPEED_RAMP_S {
                    v = next.speed_mps;
                } else if t > next.start_s {
                    let a = (t - next.start_s) / SPEED_RAMP_S;
                    v = prev.speed_mps + a * (next.speed_mps - prev.speed_mps);
                }
            }
            v
        };
        let speed: Vec<f64> = (0..n).map(|i| speed_at(t0 + i as f64 * dt)).collect();
        let in_trial: Vec<f64> = speed
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let t = t0 + *i as f64 * dt;
                (0.0..profile.duration_s).contains(&t)
            })
            .map(|(_, &v)| v)
            .collect();
        let mean_speed = in_trial.iter().sum::<f64>() / in_trial.len().max(1) as f64;
        let rate = |v: f64| (v / mean_speed).powf(SPEED_EXPONENT) / profile.gait_period_s;

        // trapezoidal integration of cadence, anchored so phase(0) = phase0
        let mut phase = vec![0.0; n];
        for i in 1..n {
            phase[i] = phase[i - 1] + 0.5 * dt * (rate(speed[i - 1]) + rate(speed[i]));
        }
        let zero_idx = ((0.0 - t0) / dt).round() as usize;
        let shift = phase0 - phase[zero_idx];
        phase.iter_mut().for_each(|p| *p += shift);
        Self {
            t0,
            dt,
            phase,
            speed,
            mean_speed,
        }
    }

    fn interp(&self, values: &[f64], t: f64) -> f64 {
        let x = ((t - self.t0) / self.dt).clamp(0.0, (values.len() - 1) as f64);
        let i = (x.floor() as usize).min(values.len() - 2);
        let a = x - i as f64;
        values[i] * (1.0 - a) + values[i + 1] * a
    }

    fn phase_at(&self, t: f64) -> f64 {
        self.interp(&self.phase, t)
    }

    /// Oscillation amplitude multiplier from speed.
    fn amp_at(&self, t: f64) -> f64 {
        (self.interp(&self.speed, t) / self.mean_speed).powf(AMPLITUDE_EXPONENT)
    }
}

/// Side 0 is right, side 1 is left (half a cycle later).
fn side_phase(phase: f64, side: usize) -> f64 {
    phase + 0.5 * side as f64
}

impl SubjectModel {
    pub fn sample(profile: &SynthProfile, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5u64]));
        let var = profile.subject_variability;
        let mut jitter = |scale: f64| -> f64 {
            let z: f64 = rng.sample(StandardNormal);
            var * scale * z.clamp(-3.0, 3.0)
        };
        let joints = std::array::from_fn(|j| {
            let (offset, template) = ANGLE_TEMPLATES[j];
            JointModel {
                offset: offset + jitter(2.0),
                harmonics: template.map(|(a, p)| (a * (1.0 + jitter(1.0)), p + jitter(0.5))),
                scale: profile.amplitude_scales[j],
                moment_gain: MOMENT_GAINS[j] * (1.0 + jitter(1.0)),
            }
        });
        let muscle_gain = std::array::from_fn(|_| 1.0 + jitter(1.0));
        let imu_gain = std::array::from_fn(|_| 1.0 + jitter(0.5));
        Self {
            joints,
            muscle_gain,
            imu_gain,
        }
    }

    /// Joint angle (degrees) of joint `j` (0 hip, 1 knee, 2 ankle) on `side`.
    fn angle(&self, kin: &Kinematics, j: usize, side: usize, t: f64) -> f64 {
        let jm = &self.joints[j];
        let phase = side_phase(kin.phase_at(t), side);
        jm.offset + jm.scale * jm.amplitude() * kin.amp_at(t) * jm.unit_wave(phase)
    }

    fn moment(&self, kin: &Kinematics, j: usize, side: usize, t: f64) -> f64 {
        let jm = &self.joints[j];
        let w = jm.unit_wave(side_phase(kin.phase_at(t), side) + MOMENT_PHASE_LEAD[j]);
        jm.moment_gain * kin.amp_at(t) * ((1.5 * w).tanh() + 0.3 * w * w)
    }

    /// Muscle activation, affine in the driving right-side joint angle
    /// `lead_s` later.
    fn activation(&self, kin: &Kinematics, m: usize, lead_s: f64, t: f64) -> f64 {
        let (j, sign) = MUSCLE_DRIVE[m];
        let jm = &self.joints[j];
        let rel = (self.angle(kin, j, 0, t + lead_s) - jm.offset) / (jm.scale * jm.amplitude());
        self.muscle_gain[m] * (0.6 + 0.4 * sign * rel)
    }

    /// Sagittal angle (radians) of IMU site `s` (torso, thigh, shank, foot).
    fn segment_angle(&self, kin: &Kinematics, s: usize, t: f64) -> f64 {
        let deg = match s {
            0 => 5.0 + 2.0 * (2.0 * TAU * kin.phase_at(t)).cos(),
            1 => self.angle(kin, 0, 0, t),
            2 => self.angle(kin, 0, 0, t) - self.angle(kin, 1, 0, t),
            _ => {
                self.angle(kin, 0, 0, t) - self.angle(kin, 1, 0, t) + self.angle(kin, 2, 0, t)
            }
        };
        deg.to_radians()
    }

    /// Six IMU channels of site `s`: accel xyz (m/s²), gyro xyz (rad/s).
    fn imu(&self, kin: &Kinematics, s: usize, quarter_s: f64, t: f64) -> [f64; 6] {
        const H: f64 = 2.5e-3;
        let sag = |t: f64| self.segment_angle(kin, s, t);
        let front = |t: f64| 0.15 * sag(t + quarter_s);
        let trans = |t: f64| 0.1 * sag(t - quarter_s);
        let d = |f: &dyn Fn(f64) -> f64| (f(t + H) - f(t - H)) / (2.0 * H);
        let theta = sag(t);
        let theta_f = front(t);
        let omega = d(&sag);
        let alpha = (sag(t + H) - 2.0 * theta + sag(t - H)) / (H * H);
        let r = LEVER_ARM[s];
        [
            GRAVITY * theta.sin() + r * alpha,
            -GRAVITY * theta.cos() * theta_f.cos() + r * omega * omega,
            GRAVITY * theta_f.sin(),
            d(&front),
            d(&trans),
            omega,
        ]
    }

    /// Generates trial `index` of this subject.
    pub fn trial(
        &self,
        profile: &SynthProfile,
        subject_id: &str,
        index: usize,
        seed: u64,
    ) -> RawTrial {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x7u64, index as u64]));
        let speeds: Vec<SpeedSegment> = profile
            .speed_profile
            .iter()
            .map(|s| SpeedSegment {
                start_s: s.start_s,
                speed_mps: s.speed_mps + index as f64 * profile.trial_speed_step_mps,
            })
            .collect();
        let phase0: f64 = rng.gen();
        let kin = Kinematics::new(profile, &speeds, phase0);
        let lead = profile.preactivation_lead_s;
        let noise = profile.noise_std;
        let quarter_s = profile.gait_period_s / 4.0;

        let times = |rate: f64| -> Vec<f64> {
            let n = (profile.duration_s * rate).round() as usize;
            (0..n).map(|i| i as f64 / rate).collect()
        };
        let channel = |label: String, rate: f64, samples: Vec<f64>| TimeSeriesChannel {
            label,
            sample_rate_hz: rate,
            samples,
        };

        let target_t = times(profile.target_rate_hz);
        let mut angles = Vec::with_capacity(6);
        let mut moments = Vec::with_capacity(6);
        for (k, (a_name, m_name)) in schema::angle_columns()
            .into_iter()
            .zip(schema::moment_columns())
            .enumerate()
        {
            let (j, side) = (k / 2, k % 2);
            angles.push(channel(
                a_name,
                profile.target_rate_hz,
                target_t.iter().map(|&t| self.angle(&kin, j, side, t)).collect(),
            ));
            moments.push(channel(
                m_name,
                profile.target_rate_hz,
                target_t.iter().map(|&t| self.moment(&kin, j, side, t)).collect(),
            ));
        }

        let emg_t = times(profile.emg_rate_hz);
        let emg = schema::emg_columns()
            .into_iter()
            .enumerate()
            .map(|(m, name)| {
                let samples = emg_t
                    .iter()
                    .map(|&t| {
                        let carrier: f64 = rng.sample(StandardNormal);
                        let floor: f64 = rng.sample(StandardNormal);
                        self.activation(&kin, m, lead, t) * carrier + 0.1 * noise * floor
                    })
                    .collect();
                channel(name, profile.emg_rate_hz, samples)
            })
            .collect();

        let imu_t = times(profile.imu_rate_hz);
        let mut imu_data = vec![Vec::with_capacity(imu_t.len()); 24];
        for &t in &imu_t {
            for s in 0..4 {
                for (axis, v) in self.imu(&kin, s, quarter_s, t).into_iter().enumerate() {
                    let c = s * 6 + axis;
                    let nominal = if axis < 3 { 2.0 } else { 1.0 };
                    let z: f64 = rng.sample(StandardNormal);
                    imu_data[c].push(self.imu_gain[c] * v + noise * nominal * z);
                }
            }
        }
        let imu = schema::imu_columns()
            .into_iter()
            .zip(imu_data)
            .map(|(name, samples)| channel(name, profile.imu_rate_hz, samples))
            .collect();

        RawTrial {
            subject_id: subject_id.to_string(),
            trial_id: format!("T{:02}", index + 1),
            emg,
            imu,
            angles,
            moments,
            speed_schedule: speeds,
        }
    }
}

/// All trials of one synthetic subject.
pub fn synth_subject(
    profile: &SynthProfile,
    subject_id: &str,
    seed: u64,
) -> Result<Vec<RawTrial>, DataError> {
    profile.validate()?;
    let model = SubjectModel::sample(profile, seed);
    Ok((0..profile.trials_per_subject)
        .map(|k| model.trial(profile, subject_id, k, seed))
        .collect())
}
