//! Virtual participants.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, Vec3};

/// One simulated person.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipantModel {
    /// Per-landmark 3D position noise drawn once per aim, meters.
    pub sigma_kp: f64,
    /// Additional per-frame landmark noise, meters.
    pub tremor: f64,
    /// Angle between the intended pointing direction and the finger line.
    pub finger_offset_deg: f64,
    /// Angle between the intended pointing direction and the wrist line.
    /// The wrist landmark sits at the base of the palm, off the index axis,
    /// so the wrist-to-tip line does not follow the finger exactly.
    pub wrist_offset_deg: f64,
    /// Habitual direction of the wrist offset around the pointing axis.
    pub wrist_azimuth_deg: f64,
    /// Aim-to-aim spread of that direction.
    pub azimuth_sd_deg: f64,
    /// Instruction-to-aim time, seconds.
    pub reaction_mean: f64,
    pub reaction_sd: f64,
    /// Frames held still after aiming before looking or clicking.
    pub settle_frames: u32,
    /// Chance of noticing a wrong highlight when feedback is shown.
    pub check_prob: f64,
    pub max_corrections: u32,
    /// Time cost of one re-aim, seconds.
    pub correction_time: f64,
    /// Rest position of the index fingertip.
    pub hand_anchor: Point3,
}

impl ParticipantModel {
    /// Noise-free participant whose finger and wrist lines both pass exactly
    /// through the aim point.
    pub fn ideal() -> Self {
        Self {
            sigma_kp: 0.0,
            tremor: 0.0,
            finger_offset_deg: 0.0,
            wrist_offset_deg: 0.0,
            ..PopulationModel::default().typical()
        }
    }

    pub fn with_sigma(self, sigma_kp: f64) -> Self {
        Self { sigma_kp, ..self }
    }

    /// Reaction time for one trial, at least a quarter second.
    pub fn sample_reaction<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = Normal::new(self.reaction_mean, self.reaction_sd.max(0.0)).expect("finite");
        n.sample(rng).max(0.25)
    }
}

/// Distribution of participants in the simulated study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationModel {
    /// Median per-landmark noise, meters.
    pub sigma_kp: f64,
    /// Between-participant spread of `ln sigma_kp`.
    pub sigma_kp_log_sd: f64,
    pub tremor: f64,
    pub finger_offset_deg: f64,
    pub wrist_offset_deg: f64,
    /// Between-participant spread of the wrist offset, degrees.
    pub offset_sd_deg: f64,
    /// Aim-to-aim spread of the wrist offset direction, degrees. Each
    /// participant's habitual direction is uniform.
    pub azimuth_sd_deg: f64,
    pub reaction_mean: f64,
    /// Between-participant spread of the mean reaction time.
    pub reaction_between_sd: f64,
    /// Within-participant, trial-to-trial spread.
    pub reaction_sd: f64,
    pub settle_frames: u32,
    pub check_prob: f64,
    pub max_corrections: u32,
    pub correction_time: f64,
    pub hand_anchor: Point3,
    /// Between-participant spread of the anchor along x, meters.
    pub anchor_jitter: f64,
}

impl Default for PopulationModel {
    fn default() -> Self {
        Self {
            sigma_kp: 0.00725,
            sigma_kp_log_sd: 0.3,
            tremor: 0.0005,
            finger_offset_deg: 0.0,
            wrist_offset_deg: 13.5,
            offset_sd_deg: 1.5,
            azimuth_sd_deg: 20.0,
            reaction_mean: 2.9,
            reaction_between_sd: 0.4,
            reaction_sd: 0.5,
            settle_frames: 6,
            check_prob: 0.8,
            max_corrections: 1,
            correction_time: 0.9,
            hand_anchor: Vec3::new(0.0, 0.14, 0.56),
            anchor_jitter: 0.03,
        }
    }
}

impl PopulationModel {
    /// Population with no between-participant variation and no noise.
    pub fn noiseless() -> Self {
        Self {
            sigma_kp: 0.0,
            sigma_kp_log_sd: 0.0,
            tremor: 0.0,
            wrist_offset_deg: 0.0,
            offset_sd_deg: 0.0,
            anchor_jitter: 0.0,
            ..Self::default()
        }
    }

    pub fn with_sigma(self, sigma_kp: f64) -> Self {
        Self { sigma_kp, ..self }
    }

    /// The median participant.
    pub fn typical(&self) -> ParticipantModel {
        ParticipantModel {
            sigma_kp: self.sigma_kp,
            tremor: self.tremor,
            finger_offset_deg: self.finger_offset_deg,
            wrist_offset_deg: self.wrist_offset_deg,
            wrist_azimuth_deg: 0.0,
            azimuth_sd_deg: self.azimuth_sd_deg,
            reaction_mean: self.reaction_mean,
            reaction_sd: self.reaction_sd,
            settle_frames: self.settle_frames,
            check_prob: self.check_prob,
            max_corrections: self.max_corrections,
            correction_time: self.correction_time,
            hand_anchor: self.hand_anchor,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ParticipantModel {
        let std = |rng: &mut R| -> f64 { Normal::new(0.0, 1.0).expect("unit normal").sample(rng) };
        let sigma = self.sigma_kp * (self.sigma_kp_log_sd * std(rng)).exp();
        let wrist = (self.wrist_offset_deg + self.offset_sd_deg * std(rng)).abs();
        let reaction = (self.reaction_mean + self.reaction_between_sd * std(rng)).max(0.5);
        let dx = self.anchor_jitter * std(rng);
        let azimuth = rng.random_range(0.0..360.0);
        ParticipantModel {
            sigma_kp: sigma,
            wrist_offset_deg: wrist,
            wrist_azimuth_deg: azimuth,
            reaction_mean: reaction,
            hand_anchor: self.hand_anchor + Vec3::new(dx, 0.0, 0.0),
            ..self.typical()
        }
    }
}
