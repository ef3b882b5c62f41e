//! Network delivery bounds for SF7/SF8 mixes and PDR aggregation.
//!
//! Under SF orthogonality each device competes only with devices on its own
//! spreading factor, so the network-wide bound is the device-weighted mean
//! of the per-SF single-channel bounds.

use std::fmt::Write as _;

use thiserror::Error;

use crate::controller::DeviceReport;
use crate::scaling::{success_bounds, ChannelLoad, SuccessBounds};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("mix has no devices")]
    EmptyMix,
    #[error("airtimes must be positive with SF8 longer than SF7 (t7 = {t7}, t8 = {t8})")]
    Airtimes { t7: f64, t8: f64 },
    #[error("period must be positive, got {0}")]
    Period(f64),
    #[error("step must be at least 1")]
    Step,
    #[error("ratio must be positive, got {0}")]
    Ratio(f64),
    #[error("no device sent any packet; PDR undefined")]
    UndefinedPdr,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfMixConfig {
    pub n_sf7: u64,
    pub n_sf8: u64,
    pub period: f64,
    pub airtime_sf7: f64,
    pub airtime_sf8: f64,
}

impl SfMixConfig {
    pub fn new(n_sf7: u64, n_sf8: u64, period: f64, airtime_sf7: f64, airtime_sf8: f64) -> Result<Self, AnalysisError> {
        if n_sf7 + n_sf8 == 0 {
            return Err(AnalysisError::EmptyMix);
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(AnalysisError::Period(period));
        }
        if !(airtime_sf7 > 0.0 && airtime_sf8 > airtime_sf7 && airtime_sf8.is_finite()) {
            return Err(AnalysisError::Airtimes {
                t7: airtime_sf7,
                t8: airtime_sf8,
            });
        }
        Ok(Self {
            n_sf7,
            n_sf8,
            period,
            airtime_sf7,
            airtime_sf8,
        })
    }

    pub fn load_sf7(&self) -> f64 {
        self.n_sf7 as f64 * self.airtime_sf7 / self.period
    }

    pub fn load_sf8(&self) -> f64 {
        self.n_sf8 as f64 * self.airtime_sf8 / self.period
    }
}

pub fn network_bounds(mix: &SfMixConfig) -> SuccessBounds {
    let b7 = success_bounds(ChannelLoad::new(mix.load_sf7()).expect("non-negative load"));
    let b8 = success_bounds(ChannelLoad::new(mix.load_sf8()).expect("non-negative load"));
    let (n7, n8) = (mix.n_sf7 as f64, mix.n_sf8 as f64);
    let total = n7 + n8;
    SuccessBounds {
        lower: (n7 * b7.lower + n8 * b8.lower) / total,
        upper: (n7 * b7.upper + n8 * b8.upper) / total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n_moved: u64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsCurve {
    pub points: Vec<CurvePoint>,
}

impl BoundsCurve {
    /// Point with the highest lower bound (first one on ties).
    pub fn best_lower(&self) -> Option<CurvePoint> {
        self.points
            .iter()
            .copied()
            .reduce(|best, p| if p.lower > best.lower { p } else { best })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# n_moved lower upper\n");
        for p in &self.points {
            let _ = writeln!(out, "{} {:.6} {:.6}", p.n_moved, p.lower, p.upper);
        }
        out
    }
}

/// Bounds as `n_moved` of `total_devices` switch from SF7 to SF8, sampled
/// every `step` devices. Both endpoints are always included.
pub fn bounds_curve(
    total_devices: u64,
    period: f64,
    airtime_sf7: f64,
    airtime_sf8: f64,
    step: u64,
) -> Result<BoundsCurve, AnalysisError> {
    if step == 0 {
        return Err(AnalysisError::Step);
    }
    let mut xs: Vec<u64> = (0..=total_devices).step_by(step as usize).collect();
    if xs.last() != Some(&total_devices) {
        xs.push(total_devices);
    }
    let points = xs
        .into_iter()
        .map(|n_moved| {
            let mix = SfMixConfig::new(total_devices - n_moved, n_moved, period, airtime_sf7, airtime_sf8)?;
            let b = network_bounds(&mix);
            Ok(CurvePoint {
                n_moved,
                lower: b.lower,
                upper: b.upper,
            })
        })
        .collect::<Result<_, AnalysisError>>()?;
    Ok(BoundsCurve { points })
}

/// Device counts of a mix multiplied by `ratio`, rounded to the nearest device.
pub fn scale_mix(n_sf7: u64, n_sf8: u64, ratio: f64) -> Result<(u64, u64), AnalysisError> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(AnalysisError::Ratio(ratio));
    }
    let scale = |n: u64| (n as f64 * ratio).round() as u64;
    Ok((scale(n_sf7), scale(n_sf8)))
}

/// Inverse of [`scale_mix`].
pub fn unscale_mix(n_sf7: u64, n_sf8: u64, ratio: f64) -> Result<(u64, u64), AnalysisError> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(AnalysisError::Ratio(ratio));
    }
    scale_mix(n_sf7, n_sf8, 1.0 / ratio)
}

/// Airtime an experiment device needs so that one experiment device carries
/// the load of `ratio` real devices: `ratio * t_real * T_exp / T_real`.
pub fn equivalent_airtime(real_airtime: f64, real_period: f64, experiment_period: f64, ratio: f64) -> f64 {
    ratio * real_airtime * experiment_period / real_period
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdrSummary {
    /// Total delivered over total sent.
    pub network: f64,
    /// Mean of per-device ratios over devices that sent anything.
    pub per_device_mean: f64,
    pub devices: usize,
}

pub fn pdr_aggregate(reports: &[DeviceReport]) -> Result<PdrSummary, AnalysisError> {
    let active: Vec<&DeviceReport> = reports.iter().filter(|r| r.sent > 0).collect();
    if active.is_empty() {
        return Err(AnalysisError::UndefinedPdr);
    }
    let delivered: u64 = active.iter().map(|r| r.delivered).sum();
    let sent: u64 = active.iter().map(|r| r.sent).sum();
    let mean = active
        .iter()
        .map(|r| r.delivered as f64 / r.sent as f64)
        .sum::<f64>()
        / active.len() as f64;
    Ok(PdrSummary {
        network: delivered as f64 / sent as f64,
        per_device_mean: mean,
        devices: active.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const T7: f64 = 0.04122;

    #[test]
    fn single_sf_endpoints() {
        let close = |a: SuccessBounds, b: SuccessBounds| (a.lower - b.lower).abs() < 1e-15 && (a.upper - b.upper).abs() < 1e-15;
        let only7 = SfMixConfig::new(8835, 0, 600.0, T7, 2.0 * T7).unwrap();
        assert!(close(
            network_bounds(&only7),
            success_bounds(ChannelLoad::new(8835.0 * T7 / 600.0).unwrap())
        ));
        let only8 = SfMixConfig::new(0, 100, 600.0, T7, 2.0 * T7).unwrap();
        assert!(close(
            network_bounds(&only8),
            success_bounds(ChannelLoad::new(100.0 * 2.0 * T7 / 600.0).unwrap())
        ));
    }

    #[test]
    fn moving_devices_helps() {
        let base = network_bounds(&SfMixConfig::new(8835, 0, 600.0, T7, 2.0 * T7).unwrap());
        let mixed = network_bounds(&SfMixConfig::new(5399, 3436, 600.0, T7, 2.0 * T7).unwrap());
        assert!(mixed.lower > base.lower);
    }

    #[test]
    fn curve_shape() {
        let c = bounds_curve(1, 600.0, T7, 2.0 * T7, 1).unwrap();
        assert_eq!(c.points.len(), 2);
        assert!(c.points.iter().all(|p| p.lower > 0.999 && p.upper > 0.999));
        let c = bounds_curve(10, 600.0, T7, 2.0 * T7, 4).unwrap();
        let xs: Vec<u64> = c.points.iter().map(|p| p.n_moved).collect();
        assert_eq!(xs, [0, 4, 8, 10]);
        assert_eq!(bounds_curve(10, 600.0, T7, 2.0 * T7, 0), Err(AnalysisError::Step));
    }

    #[test]
    fn mix_validation() {
        assert_eq!(SfMixConfig::new(0, 0, 1.0, 0.1, 0.2), Err(AnalysisError::EmptyMix));
        assert!(SfMixConfig::new(1, 0, 1.0, 0.2, 0.1).is_err());
        assert!(SfMixConfig::new(1, 0, 0.0, 0.1, 0.2).is_err());
    }

    #[test]
    fn table_scaling() {
        let r = 8835.0 / 36.0;
        assert_eq!(scale_mix(36, 0, r).unwrap(), (8835, 0));
        assert_eq!(scale_mix(31, 5, r).unwrap(), (7608, 1227));
        assert_eq!(unscale_mix(7608, 1227, r).unwrap(), (31, 5));
        assert_eq!(scale_mix(12, 7, 1.0).unwrap(), (12, 7));
        assert!(scale_mix(1, 1, 0.0).is_err());
    }

    #[test]
    fn aggregate() {
        let s = pdr_aggregate(&[DeviceReport::new("a", 3, 4), DeviceReport::new("b", 1, 4)]).unwrap();
        assert_eq!((s.network, s.per_device_mean), (0.5, 0.5));
        let s = pdr_aggregate(&[DeviceReport::new("a", 0, 10), DeviceReport::new("b", 10, 10)]).unwrap();
        assert_eq!((s.network, s.per_device_mean), (0.5, 0.5));
        let s = pdr_aggregate(&[DeviceReport::new("a", 2, 2), DeviceReport::new("dead", 0, 0)]).unwrap();
        assert_eq!(s.devices, 1);
        assert_eq!(
            pdr_aggregate(&[DeviceReport::new("a", 0, 0)]),
            Err(AnalysisError::UndefinedPdr)
        );
    }
}
