//! Synthetic pressure and microphone streams.
//!
//! Shapes follow the qualitative traces of real hugs: a squeeze is a smooth
//! pressure plateau, a rub is sustained moderate microphone activity with
//! no pressure change, a pat is a train of sharp, loud microphone bursts
//! with small pressure ripples. Amplitudes are simulator knobs in raw
//! sensor units, not measured values.

use hug_core::{GestureClass, SensorSample};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    pub sample_rate: f64,
    /// Pressure rise of a full-intensity squeeze.
    pub squeeze_rise: f64,
    /// Seconds to ramp a squeeze up or down.
    pub squeeze_ramp: f64,
    /// Microphone noise added while squeezing.
    pub squeeze_mic: f64,
    /// Mean microphone level of a full-intensity rub.
    pub rub_amplitude: f64,
    /// Seconds for a rub to build up or die away.
    pub rub_ramp: f64,
    /// Stroke frequency range of a rub, Hz.
    pub rub_stroke_hz: (f64, f64),
    /// Pat burst amplitude as a multiple of `rub_amplitude`.
    pub pat_ratio: f64,
    /// Pat rate range, Hz.
    pub pat_rate_hz: (f64, f64),
    /// Decay time of one pat burst, seconds.
    pub pat_decay: f64,
    /// Pressure ripple of one pat.
    pub pat_pressure: f64,
    /// Range of the pressure rise when the user leans in.
    pub contact_rise: (f64, f64),
    /// Seconds for the contact pressure to build up or fall away.
    pub contact_ramp: f64,
    pub pressure_noise: f64,
    pub mic_noise: f64,
    /// Breathing modulation of the contact pressure.
    pub breathing_amp: f64,
    pub breathing_hz: f64,
    pub rest_pressure: (f64, f64),
    pub rest_mic: (f64, f64),
    /// Per-gesture intensity range.
    pub intensity: (f64, f64),
}

impl Default for SignalModel {
    fn default() -> Self {
        Self {
            sample_rate: 45.0,
            squeeze_rise: 30.0,
            squeeze_ramp: 0.2,
            squeeze_mic: 2.0,
            rub_amplitude: 10.0,
            rub_ramp: 0.3,
            rub_stroke_hz: (1.0, 2.0),
            pat_ratio: 5.0,
            pat_rate_hz: (2.0, 4.0),
            pat_decay: 0.05,
            pat_pressure: 1.5,
            contact_rise: (8.0, 16.0),
            contact_ramp: 0.5,
            pressure_noise: 0.4,
            mic_noise: 3.0,
            breathing_amp: 1.0,
            breathing_hz: 0.25,
            rest_pressure: (950.0, 1050.0),
            rest_mic: (250.0, 350.0),
            intensity: (0.7, 1.3),
        }
    }
}

/// Per-user constants of the generated streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserProfile {
    pub rest_pressure: f64,
    pub rest_mic: f64,
    pub contact_rise: f64,
    /// Multiplies both noise levels.
    pub noise_scale: f64,
    pub breathing_phase: f64,
}

/// One gesture performed by the user; times in seconds on the stream clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stroke {
    pub label: GestureClass,
    pub t_start: f64,
    pub duration: f64,
    pub intensity: f64,
}

impl Stroke {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }
}

/// Everything the user does, on the stream clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    /// The user leans onto the chest.
    pub contact_at: f64,
    /// The user lets go.
    pub release_at: f64,
    /// Length of the stream.
    pub end: f64,
    pub strokes: Vec<Stroke>,
}

/// 0 before `a`, 1 after `a + ramp`, raised-cosine in between.
fn ease_in(t: f64, a: f64, ramp: f64) -> f64 {
    if t <= a {
        0.0
    } else if t >= a + ramp || ramp <= 0.0 {
        1.0
    } else {
        0.5 - 0.5 * (std::f64::consts::PI * (t - a) / ramp).cos()
    }
}

/// Smooth window over `[a, b]` with ramps of `ramp` seconds inside it.
fn plateau(t: f64, a: f64, b: f64, ramp: f64) -> f64 {
    let ramp = ramp.min((b - a) / 2.0);
    ease_in(t, a, ramp) * (1.0 - ease_in(t, b - ramp, ramp))
}

impl SignalModel {
    pub fn draw_user<R: Rng + ?Sized>(&self, rng: &mut R) -> UserProfile {
        UserProfile {
            rest_pressure: rng.random_range(self.rest_pressure.0..=self.rest_pressure.1),
            rest_mic: rng.random_range(self.rest_mic.0..=self.rest_mic.1),
            contact_rise: rng.random_range(self.contact_rise.0..=self.contact_rise.1),
            noise_scale: rng.random_range(0.7..=1.3),
            breathing_phase: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    pub fn draw_intensity<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(self.intensity.0..=self.intensity.1)
    }

    /// Number of samples covering `[0, end]`.
    pub fn sample_count(&self, end: f64) -> usize {
        (end * self.sample_rate).floor() as usize + 1
    }

    pub fn render<R: Rng + ?Sized>(&self, user: &UserProfile, tl: &Timeline, rng: &mut R) -> Vec<SensorSample> {
        let n = self.sample_count(tl.end);
        let times: Vec<f64> = (0..n).map(|i| i as f64 / self.sample_rate).collect();
        let mut pressure = vec![user.rest_pressure; n];
        let mut mic = vec![user.rest_mic; n];
        let p_noise = Normal::new(0.0, self.pressure_noise * user.noise_scale).expect("noise is finite");
        let m_noise = Normal::new(0.0, self.mic_noise * user.noise_scale).expect("noise is finite");

        for (i, &t) in times.iter().enumerate() {
            let contact = ease_in(t, tl.contact_at, self.contact_ramp) * (1.0 - ease_in(t, tl.release_at, self.contact_ramp));
            let breath = self.breathing_amp
                * (std::f64::consts::TAU * self.breathing_hz * t + user.breathing_phase).sin();
            pressure[i] += contact * (user.contact_rise + breath);
        }

        for s in &tl.strokes {
            match s.label {
                GestureClass::Hold => {}
                GestureClass::Squeeze => {
                    let rise = self.squeeze_rise * s.intensity;
                    for (i, &t) in times.iter().enumerate() {
                        let w = plateau(t, s.t_start, s.t_end(), self.squeeze_ramp);
                        if w > 0.0 {
                            pressure[i] += rise * w;
                            let n: f64 = StandardNormal.sample(rng);
                            mic[i] += self.squeeze_mic * s.intensity * w * n.abs();
                        }
                    }
                }
                GestureClass::Rub => {
                    let f = rng.random_range(self.rub_stroke_hz.0..=self.rub_stroke_hz.1);
                    let a = self.rub_amplitude * s.intensity;
                    for (i, &t) in times.iter().enumerate() {
                        let w = plateau(t, s.t_start, s.t_end(), self.rub_ramp);
                        if w > 0.0 {
                            // Quietest where the hand turns around.
                            let stroke = (std::f64::consts::PI * f * (t - s.t_start)).sin().abs();
                            let n: f64 = StandardNormal.sample(rng);
                            mic[i] += w * a * stroke * (1.0 + 0.3 * n);
                        }
                    }
                }
                GestureClass::Pat => {
                    let rate = rng.random_range(self.pat_rate_hz.0..=self.pat_rate_hz.1);
                    let a = self.rub_amplitude * self.pat_ratio * s.intensity;
                    let mut tk = s.t_start + rng.random_range(0.0..0.1);
                    while tk < s.t_end() {
                        let peak = a * rng.random_range(0.8..1.2);
                        for (i, &t) in times.iter().enumerate().skip((tk * self.sample_rate).floor() as usize) {
                            let age = t - tk;
                            if age < 0.0 {
                                continue;
                            }
                            if age > 8.0 * self.pat_decay.max(0.1) {
                                break;
                            }
                            mic[i] += peak * (-age / self.pat_decay).exp();
                            pressure[i] += self.pat_pressure * s.intensity * (-age / 0.1).exp();
                        }
                        tk += (1.0 / rate) * rng.random_range(0.85..1.15);
                    }
                }
            }
        }

        times
            .iter()
            .enumerate()
            .map(|(i, &t)| SensorSample::new(t, pressure[i] + p_noise.sample(rng), mic[i] + m_noise.sample(rng)))
            .collect()
    }
}
