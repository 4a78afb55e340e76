//! Canonical channel order.
//!
//! Inputs: 11 sEMG envelopes, then 4 IMU sites (torso, thigh, shank, foot)
//! each with accelerometer xyz followed by gyroscope xyz. Targets: joint
//! angles (degrees) then joint moments (N·m/kg), each ordered
//! hip/knee/ankle × right/left.

pub const MUSCLES: [&str; 11] = [
    "gluteus_medius",
    "external_oblique",
    "semitendinosus",
    "gracilis",
    "biceps_femoris",
    "rectus_femoris",
    "vastus_lateralis",
    "vastus_medialis",
    "soleus",
    "tibialis_anterior",
    "gastrocnemius_medialis",
];

pub const IMU_SITES: [&str; 4] = ["torso", "thigh", "shank", "foot"];
pub const IMU_AXES: [&str; 6] = ["accel_x", "accel_y", "accel_z", "gyro_x", "gyro_y", "gyro_z"];
pub const JOINTS: [&str; 6] = ["hip_r", "hip_l", "knee_r", "knee_l", "ankle_r", "ankle_l"];

pub const NUM_EMG: usize = 11;
pub const NUM_IMU: usize = 24;
pub const NUM_INPUTS: usize = NUM_EMG + NUM_IMU;
pub const NUM_JOINTS: usize = 6;
pub const NUM_TARGETS: usize = 2 * NUM_JOINTS;

pub const TIME_COLUMN: &str = "time_s";
pub const PREPARED_RATE_HZ: f64 = 100.0;
pub const EMG_RATE_HZ: f64 = 1000.0;
pub const IMU_RATE_HZ: f64 = 200.0;

pub fn emg_columns() -> Vec<String> {
    MUSCLES.iter().map(|m| format!("emg_{m}")).collect()
}

pub fn imu_columns() -> Vec<String> {
    IMU_SITES
        .iter()
        .flat_map(|site| IMU_AXES.iter().map(move |axis| format!("imu_{site}_{axis}")))
        .collect()
}

pub fn input_columns() -> Vec<String> {
    let mut cols = emg_columns();
    cols.extend(imu_columns());
    cols
}

pub fn angle_columns() -> Vec<String> {
    JOINTS.iter().map(|j| format!("angle_{j}")).collect()
}

pub fn moment_columns() -> Vec<String> {
    JOINTS.iter().map(|j| format!("moment_{j}")).collect()
}

pub fn target_columns() -> Vec<String> {
    let mut cols = angle_columns();
    cols.extend(moment_columns());
    cols
}

/// All 47 signal columns of a prepared trial, without the time column.
pub fn trial_columns() -> Vec<String> {
    let mut cols = input_columns();
    cols.extend(target_columns());
    cols
}

/// Which network a target block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetFamily {
    Angles,
    Moments,
}

impl TargetFamily {
    pub const ALL: [TargetFamily; 2] = [TargetFamily::Angles, TargetFamily::Moments];

    /// Column range inside the 12 target channels.
    pub fn target_range(self) -> std::ops::Range<usize> {
        match self {
            TargetFamily::Angles => 0..NUM_JOINTS,
            TargetFamily::Moments => NUM_JOINTS..NUM_TARGETS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetFamily::Angles => "angles",
            TargetFamily::Moments => "moments",
        }
    }

    pub fn quantity(self) -> &'static str {
        match self {
            TargetFamily::Angles => "angle",
            TargetFamily::Moments => "moment",
        }
    }
}

impl std::fmt::Display for TargetFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TargetFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "angles" => Ok(TargetFamily::Angles),
            "moments" => Ok(TargetFamily::Moments),
            other => Err(format!("unknown target family `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match() {
        assert_eq!(input_columns().len(), NUM_INPUTS);
        assert_eq!(target_columns().len(), NUM_TARGETS);
        assert_eq!(trial_columns().len(), 47);
        assert_eq!(imu_columns()[6], "imu_thigh_accel_x");
        assert_eq!(emg_columns()[8], "emg_soleus");
    }
}
