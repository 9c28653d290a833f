use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The eight studied sensor modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    Keystroke,
    Gps,
    Accelerometer,
    Gyroscope,
    Magnetometer,
    LinearAccelerometer,
    Gravity,
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalityDescriptor {
    pub name: &'static str,
    pub channel_count: usize,
    pub is_movement: bool,
    pub nominal_rate_hz: f64,
}

impl Modality {
    pub const ALL: [Modality; 8] = [
        Modality::Keystroke,
        Modality::Gps,
        Modality::Accelerometer,
        Modality::Gyroscope,
        Modality::Magnetometer,
        Modality::LinearAccelerometer,
        Modality::Gravity,
        Modality::Rotation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Keystroke => "keystroke",
            Modality::Gps => "gps",
            Modality::Accelerometer => "accelerometer",
            Modality::Gyroscope => "gyroscope",
            Modality::Magnetometer => "magnetometer",
            Modality::LinearAccelerometer => "linear_accelerometer",
            Modality::Gravity => "gravity",
            Modality::Rotation => "rotation",
        }
    }

    /// Short label used in fusion subset names.
    pub fn short(self) -> &'static str {
        match self {
            Modality::Keystroke => "Key",
            Modality::Gps => "GPS",
            Modality::Accelerometer => "Acc",
            Modality::Gyroscope => "Gyr",
            Modality::Magnetometer => "Mag",
            Modality::LinearAccelerometer => "Lin",
            Modality::Gravity => "Grv",
            Modality::Rotation => "Rot",
        }
    }

    pub fn index(self) -> usize {
        Modality::ALL.iter().position(|&m| m == self).unwrap()
    }

    /// Keystroke: hold time, finger area, pressure. GPS: latitude,
    /// longitude. Movement sensors: X, Y, Z.
    pub fn channels(self) -> usize {
        match self {
            Modality::Gps => 2,
            _ => 3,
        }
    }

    pub fn is_movement(self) -> bool {
        !matches!(self, Modality::Keystroke | Modality::Gps)
    }

    /// Feature width after time+frequency assembly.
    pub fn feature_width(self) -> usize {
        if self.is_movement() {
            2 * self.channels()
        } else {
            self.channels()
        }
    }

    pub fn descriptor(self) -> ModalityDescriptor {
        ModalityDescriptor {
            name: self.name(),
            channel_count: self.channels(),
            is_movement: self.is_movement(),
            nominal_rate_hz: 1.0,
        }
    }

    pub fn valid_names() -> String {
        Modality::ALL.map(Modality::name).join(", ")
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown modality '{s}'; valid names: {}",
                    Modality::valid_names()
                ))
            })
    }
}
