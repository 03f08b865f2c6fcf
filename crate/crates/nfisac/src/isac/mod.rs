//! Squint-assisted ISAC: subcarrier partition and power allocation, Kalman
//! target tracking, and angle estimation from sensing-beam echoes.

pub mod allocation;
pub mod echo;
pub mod kalman;

pub use allocation::{
    comm_only_rate, partition_and_allocate, sum_rate, uniform_indices, water_fill, AllocationPlan, Arc, SensingPlacement,
    SensingRequirement, SubcarrierRole, UserDemand,
};
pub use echo::{echo_gain, echo_sample, estimate_on_arc, parabolic_peak, sense_from_echoes, Echo};
pub use kalman::{kalman_predict_update, predict_arc, PolarNoise, TrackState};
