//! Synthetic multi-user sensor corpus.
//!
//! Each `(user, modality)` stream is a sum of a per-user base offset, a
//! per-session offset, per-channel sinusoids with user-specific frequency
//! and amplitude (random phase each session) and white noise, mapped into
//! the modality's physical units. The per-session offset is mostly a shift
//! shared by all channels of the stream, which swamps raw distances but
//! carries no identity. GPS adds a slow random-walk drift.
//! Keystrokes are emitted as one to three events per active second.
//! Sessions are separated by hours; inside a session the device drops out
//! for a few seconds at random (shared by all modalities of a user).

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Corpus, Modality, SensorRecord, UserId};
use crate::derive_seed;
use crate::error::{Error, Result};

const TAG_PROFILE: u64 = 1;
const TAG_TIMELINE: u64 = 2;
const TAG_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub days: usize,
    pub modalities: Vec<Modality>,
    pub seed: u64,
    pub sessions_per_day: usize,
    pub session_seconds: usize,
    /// White-noise standard deviation in normalized units.
    pub noise_scale: f64,
    /// Standard deviation of the per-user channel offsets.
    pub offset_spread: f64,
    /// Session offset standard deviation, as a multiple of `noise_scale`.
    pub session_jitter: f64,
    /// Standard deviation of a per-session shift added equally to every
    /// channel of a stream (device placement).
    pub common_shift: f64,
    /// Per-second probability that the device drops out inside a session.
    pub gap_probability: f64,
    pub start_time: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 8,
            days: 2,
            modalities: Modality::ALL.to_vec(),
            seed: 0,
            sessions_per_day: 3,
            session_seconds: 150,
            noise_scale: 0.5,
            offset_spread: 2.0,
            session_jitter: 0.2,
            common_shift: 3.0,
            gap_probability: 0.002,
            // 2019-01-01T00:00:00Z
            start_time: 1_546_300_800,
        }
    }
}

impl SynthConfig {
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("n_users".into(), self.n_users.to_string());
        m.insert("days".into(), self.days.to_string());
        m.insert(
            "modalities".into(),
            self.modalities.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        m.insert("seed".into(), self.seed.to_string());
        m.insert("sessions_per_day".into(), self.sessions_per_day.to_string());
        m.insert("session_seconds".into(), self.session_seconds.to_string());
        m.insert("noise_scale".into(), format!("{:?}", self.noise_scale));
        m.insert("offset_spread".into(), format!("{:?}", self.offset_spread));
        m.insert("session_jitter".into(), format!("{:?}", self.session_jitter));
        m.insert("common_shift".into(), format!("{:?}", self.common_shift));
        m.insert("gap_probability".into(), format!("{:?}", self.gap_probability));
        m.insert("start_time".into(), self.start_time.to_string());
        m
    }
}

/// Generative parameters of one user for one modality, in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: UserId,
    pub modality: Modality,
    pub base: Vec<f64>,
    /// Cycles per sample, in (0, 0.5).
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub noise_scale: f64,
    pub gap_probability: f64,
}

impl UserProfile {
    fn draw(user: usize, modality: Modality, config: &SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            config.seed,
            &[TAG_PROFILE, user as u64, modality.index() as u64],
        ));
        let d = modality.channels();
        let base = (0..d).map(|_| config.offset_spread * rng.sample::<f64, _>(StandardNormal)).collect();
        let frequencies = (0..d).map(|_| rng.random_range(0.04..0.46)).collect();
        let amplitudes = (0..d).map(|_| rng.random_range(0.2..0.6)).collect();
        UserProfile {
            user_id: user_id(user),
            modality,
            base,
            frequencies,
            amplitudes,
            noise_scale: config.noise_scale,
            gap_probability: config.gap_probability,
        }
    }
}

fn user_id(i: usize) -> UserId {
    UserId::new(format!("user{i:02}"))
}

/// Physical centre and scale per channel.
fn units(modality: Modality) -> (&'static [f64], &'static [f64]) {
    match modality {
        // hold time (s), finger area, pressure
        Modality::Keystroke => (&[0.11, 0.25, 0.45], &[0.03, 0.05, 0.08]),
        // latitude, longitude (degrees)
        Modality::Gps => (&[42.7284, -84.4822], &[0.01, 0.01]),
        Modality::Accelerometer => (&[0.0, 0.0, 9.81], &[1.0, 1.0, 1.0]),
        Modality::Gyroscope => (&[0.0, 0.0, 0.0], &[0.5, 0.5, 0.5]),
        Modality::Magnetometer => (&[20.0, -5.0, -40.0], &[8.0, 8.0, 8.0]),
        Modality::LinearAccelerometer => (&[0.0, 0.0, 0.0], &[0.6, 0.6, 0.6]),
        Modality::Gravity => (&[0.0, 0.0, 9.81], &[0.8, 0.8, 0.8]),
        Modality::Rotation => (&[0.0, 0.0, 0.0], &[0.3, 0.3, 0.3]),
    }
}

/// Active seconds of one session, as offsets from its start.
struct Session {
    start: i64,
    active: Vec<usize>,
}

fn timeline(user: usize, config: &SynthConfig) -> Vec<Session> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[TAG_TIMELINE, user as u64]));
    let mut sessions = Vec::new();
    for day in 0..config.days {
        for s in 0..config.sessions_per_day {
            let start = config.start_time
                + day as i64 * 86_400
                + (8 + 4 * s as i64) * 3_600
                + rng.random_range(0..1_800);
            let mut active = Vec::with_capacity(config.session_seconds);
            let mut t = 0;
            while t < config.session_seconds {
                if rng.random_bool(config.gap_probability) {
                    t += rng.random_range(2..=10);
                    continue;
                }
                active.push(t);
                t += 1;
            }
            sessions.push(Session { start, active });
        }
    }
    sessions
}

fn generate_stream(
    profile: &UserProfile,
    sessions: &[Session],
    user: usize,
    config: &SynthConfig,
) -> Vec<SensorRecord> {
    let modality = profile.modality;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        &[TAG_STREAM, user as u64, modality.index() as u64],
    ));
    let (centre, scale) = units(modality);
    let d = modality.channels();
    let noise = Normal::new(0.0, profile.noise_scale).expect("noise scale is finite");
    let jitter = Normal::new(0.0, profile.noise_scale * config.session_jitter)
        .expect("jitter scale is finite");
    let mut records = Vec::new();
    for session in sessions {
        let shift = config.common_shift * rng.sample::<f64, _>(StandardNormal);
        let offset: Vec<f64> = (0..d).map(|_| shift + jitter.sample(&mut rng)).collect();
        let phase: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..TAU)).collect();
        let mut drift = vec![0.0; d];
        for &t in &session.active {
            let timestamp = session.start + t as i64;
            let mut z: Vec<f64> = (0..d)
                .map(|c| {
                    profile.base[c]
                        + offset[c]
                        + profile.amplitudes[c] * (TAU * profile.frequencies[c] * t as f64 + phase[c]).sin()
                })
                .collect();
            if modality == Modality::Gps {
                for (c, w) in drift.iter_mut().enumerate() {
                    *w += 0.02 * rng.sample::<f64, _>(StandardNormal);
                    z[c] += *w;
                }
            }
            let events = if modality == Modality::Keystroke {
                rng.random_range(1..=3)
            } else {
                1
            };
            for _ in 0..events {
                let channels = (0..d)
                    .map(|c| centre[c] + scale[c] * (z[c] + noise.sample(&mut rng)))
                    .collect();
                records.push(SensorRecord {
                    timestamp,
                    channels,
                });
            }
        }
    }
    records
}

/// Generates the synthetic corpus. Each stream depends only on
/// `(seed, user, modality)`, so output is independent of generation order.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Corpus> {
    if config.n_users < 2 {
        return Err(Error::Config(format!(
            "n_users = {} but at least 2 users are needed to form impostor pairs",
            config.n_users
        )));
    }
    if config.days == 0 || config.sessions_per_day == 0 || config.session_seconds == 0 {
        return Err(Error::Config("days, sessions_per_day and session_seconds must be positive".into()));
    }
    if !(config.noise_scale > 0.0 && config.noise_scale.is_finite()) {
        return Err(Error::Config("noise_scale must be positive".into()));
    }
    for (name, v) in [
        ("offset_spread", config.offset_spread),
        ("session_jitter", config.session_jitter),
        ("common_shift", config.common_shift),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    if !(0.0..1.0).contains(&config.gap_probability) {
        return Err(Error::Config("gap_probability must lie in [0, 1)".into()));
    }
    let mut corpus = Corpus::default();
    for user in 0..config.n_users {
        let sessions = timeline(user, config);
        for &modality in &config.modalities {
            let profile = UserProfile::draw(user, modality, config);
            let records = generate_stream(&profile, &sessions, user, config);
            corpus.streams.insert((user_id(user), modality), records);
        }
    }
    Ok(corpus)
}

/// Profiles used for `config`, exposed for inspection and tests.
pub fn profiles(config: &SynthConfig) -> Vec<UserProfile> {
    (0..config.n_users)
        .flat_map(|u| config.modalities.iter().map(move |&m| UserProfile::draw(u, m, config)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::write_records;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_users: 3,
            days: 1,
            seed,
            session_seconds: 60,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn one_user_is_rejected() {
        let cfg = SynthConfig { n_users: 1, ..small(0) };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = write_records(&generate_synthetic(&small(5)).unwrap());
        let b = write_records(&generate_synthetic(&small(5)).unwrap());
        let c = write_records(&generate_synthetic(&small(6)).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn stream_independent_of_modality_selection() {
        let all = generate_synthetic(&small(9)).unwrap();
        let only = generate_synthetic(&SynthConfig {
            modalities: vec![Modality::Gravity],
            ..small(9)
        })
        .unwrap();
        let key = (UserId::new("user01"), Modality::Gravity);
        assert_eq!(all.streams[&key], only.streams[&key]);
    }

    #[test]
    fn profile_invariants() {
        for p in profiles(&small(1)) {
            assert!(p.noise_scale > 0.0);
            assert!(p.frequencies.iter().all(|&f| f > 0.0 && f < 0.5));
            assert_eq!(p.base.len(), p.modality.channels());
        }
    }

    #[test]
    fn records_are_ordered_and_sized() {
        let c = generate_synthetic(&small(2)).unwrap();
        assert_eq!(c.streams.len(), 3 * 8);
        for ((_, m), recs) in &c.streams {
            assert!(recs.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
            assert!(recs.iter().all(|r| r.channels.len() == m.channels()));
        }
    }
}
