//! Channel load and load-equivalent experiment sizing.
//!
//! A population of `N` devices each sending a `t`-second packet every `T`
//! seconds offers the channel a load `L = N t / T`. Two populations with the
//! same load see the same collision statistics, which lets a few dozen
//! fast-transmitting devices stand in for thousands of slow ones.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalingError {
    #[error("device count must be positive")]
    NoDevices,
    #[error("period must be positive and finite, got {0}")]
    Period(f64),
    #[error("airtime must be positive and finite, got {0}")]
    Airtime(f64),
    #[error("airtime {airtime} s must be shorter than the period {period} s")]
    AirtimeExceedsPeriod { airtime: f64, period: f64 },
    #[error("periodic model needs 2t <= T (t = {airtime}, T = {period})")]
    OutsideModelDomain { airtime: f64, period: f64 },
    #[error("matching load {load} with T = {period} s, t = {airtime} s needs fewer than one device")]
    Infeasible { load: f64, period: f64, airtime: f64 },
}

/// Offered traffic of a homogeneous device population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficProfile {
    num_devices: u64,
    period: f64,
    airtime: f64,
}

impl TrafficProfile {
    pub fn new(num_devices: u64, period: f64, airtime: f64) -> Result<Self, ScalingError> {
        if num_devices == 0 {
            return Err(ScalingError::NoDevices);
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(ScalingError::Period(period));
        }
        if !(airtime > 0.0 && airtime.is_finite()) {
            return Err(ScalingError::Airtime(airtime));
        }
        if airtime >= period {
            return Err(ScalingError::AirtimeExceedsPeriod { airtime, period });
        }
        Ok(Self {
            num_devices,
            period,
            airtime,
        })
    }

    pub fn num_devices(&self) -> u64 {
        self.num_devices
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn airtime(&self) -> f64 {
        self.airtime
    }

    /// Per-device message intensity `1 / T`.
    pub fn intensity(&self) -> f64 {
        1.0 / self.period
    }
}

/// Dimensionless offered load `N * lambda * t`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ChannelLoad(f64);

impl ChannelLoad {
    pub fn new(load: f64) -> Option<Self> {
        (load >= 0.0 && load.is_finite()).then_some(Self(load))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Analytic success probabilities bracketing a device's delivery chance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessBounds {
    /// Any overlap destroys the packet: vulnerability window `2t`.
    pub lower: f64,
    /// Only a full overlay destroys the packet: window `t`.
    pub upper: f64,
}

pub fn channel_load(profile: &TrafficProfile) -> ChannelLoad {
    ChannelLoad(profile.num_devices as f64 * profile.airtime / profile.period)
}

pub fn success_bounds(load: ChannelLoad) -> SuccessBounds {
    SuccessBounds {
        lower: (-2.0 * load.0).exp(),
        upper: (-load.0).exp(),
    }
}

/// Exact probability that a given device's packet overlaps no other packet
/// when every device sends once per period at an independent uniform phase:
/// each of the `N - 1` interferers hits the `2t` window with probability `2t/T`.
pub fn success_exact_periodic(profile: &TrafficProfile) -> Result<f64, ScalingError> {
    window_success(profile, 2.0)
}

/// Same law for a vulnerability window of `factor * t`.
pub fn window_success(profile: &TrafficProfile, factor: f64) -> Result<f64, ScalingError> {
    let hit = factor * profile.airtime / profile.period;
    if hit > 1.0 {
        return Err(ScalingError::OutsideModelDomain {
            airtime: profile.airtime,
            period: profile.period,
        });
    }
    if profile.num_devices == 1 {
        return Ok(1.0);
    }
    let interferers = (profile.num_devices - 1) as f64;
    Ok((interferers * (-hit).ln_1p()).exp())
}

/// Size the experiment so its load matches `real`'s:
/// `N_e = round(L_real * T_e / t_e)`.
pub fn derive_equivalent(
    real: &TrafficProfile,
    experiment_period: f64,
    experiment_airtime: f64,
) -> Result<TrafficProfile, ScalingError> {
    if !(experiment_period > 0.0 && experiment_period.is_finite()) {
        return Err(ScalingError::Period(experiment_period));
    }
    if !(experiment_airtime > 0.0 && experiment_airtime.is_finite()) {
        return Err(ScalingError::Airtime(experiment_airtime));
    }
    if experiment_airtime >= experiment_period {
        return Err(ScalingError::AirtimeExceedsPeriod {
            airtime: experiment_airtime,
            period: experiment_period,
        });
    }
    let load = channel_load(real).0;
    let devices = (load * experiment_period / experiment_airtime).round();
    if devices < 1.0 {
        return Err(ScalingError::Infeasible {
            load,
            period: experiment_period,
            airtime: experiment_airtime,
        });
    }
    TrafficProfile::new(devices as u64, experiment_period, experiment_airtime)
}

/// Experimental devices per thousand real devices.
pub fn devices_per_thousand(experiment: &TrafficProfile, real: &TrafficProfile) -> f64 {
    1000.0 * experiment.num_devices as f64 / real.num_devices as f64
}
