//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a flat `Float64Array` so the page needs no glue
//! beyond the generated module. The plain-Rust versions in [`ops`] carry
//! the logic and are what the native tests exercise.

use wasm_bindgen::prelude::*;

pub mod ops {
    use lorapdr::airtime::{symbol_time, time_on_air, AirtimeError, RadioConfig};
    use lorapdr::analysis::{bounds_curve, AnalysisError};
    use lorapdr::scaling::{channel_load, success_bounds, window_success, ScalingError, TrafficProfile};
    use lorapdr::simulator::{run, CollisionModel, DeviceSpec, SimError};
    use lorapdr::DevEui;

    #[derive(Debug, thiserror::Error)]
    pub enum DemoError {
        #[error(transparent)]
        Airtime(#[from] AirtimeError),
        #[error(transparent)]
        Analysis(#[from] AnalysisError),
        #[error(transparent)]
        Scaling(#[from] ScalingError),
        #[error(transparent)]
        Sim(#[from] SimError),
        #[error("{0}")]
        Input(&'static str),
    }

    /// Frame timing for a payload.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Airtime {
        pub symbol_time: f64,
        pub payload_symbols: u32,
        pub low_data_rate_optimize: bool,
        pub time_on_air: f64,
    }

    /// `cr` is the coding rate denominator, 5 to 8.
    pub fn airtime(
        sf: u8,
        bandwidth_hz: f64,
        payload: usize,
        cr: u8,
        preamble: u16,
        explicit_header: bool,
        crc: bool,
    ) -> Result<Airtime, DemoError> {
        if !(5..=8).contains(&cr) {
            return Err(DemoError::Input("coding rate must be 5 to 8"));
        }
        let cfg = RadioConfig::new(sf, bandwidth_hz)?
            .with_coding_rate(cr - 4)?
            .with_preamble(preamble)?
            .with_explicit_header(explicit_header)
            .with_crc(crc);
        Ok(Airtime {
            symbol_time: symbol_time(&cfg),
            payload_symbols: cfg.payload_symbols(payload)?,
            low_data_rate_optimize: cfg.low_data_rate_optimize(),
            time_on_air: time_on_air(&cfg, payload)?,
        })
    }

    /// `(n_moved, lower, upper)` rows of the SF7 to SF8 sweep.
    pub fn curve(total: u64, period: f64, t7: f64, t8: f64, step: u64) -> Result<Vec<(u64, f64, f64)>, DemoError> {
        let c = bounds_curve(total, period, t7, t8, step)?;
        Ok(c.points.iter().map(|p| (p.n_moved, p.lower, p.upper)).collect())
    }

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct MonteCarlo {
        pub pdr: f64,
        pub exact: f64,
        pub lower: f64,
        pub upper: f64,
        pub sent: u64,
        pub stderr: f64,
    }

    /// Simulates `devices` periodic senders for `periods` periods under the
    /// any-overlap model.
    pub fn monte_carlo(devices: u64, period: f64, airtime: f64, periods: u64, seed: u64) -> Result<MonteCarlo, DemoError> {
        if devices == 0 || periods == 0 {
            return Err(DemoError::Input("devices and periods must be positive"));
        }
        if devices > 5_000 || devices.saturating_mul(periods) > 20_000_000 {
            return Err(DemoError::Input("at most 5000 devices and 2e7 transmissions"));
        }
        let profile = TrafficProfile::new(devices, period, airtime)?;
        let exact = window_success(&profile, 2.0)?;
        let bounds = success_bounds(channel_load(&profile));
        let specs: Vec<DeviceSpec> = (1..=devices)
            .map(|n| DeviceSpec::new(format!("n{n}"), DevEui::new(n), 7, period, airtime))
            .collect();
        let result = run(&specs, periods as f64 * period, CollisionModel::AnyOverlap, seed)?;
        let pdr = result.pdr().ok_or(DemoError::Input("no packets were sent"))?;
        Ok(MonteCarlo {
            pdr,
            exact,
            lower: bounds.lower,
            upper: bounds.upper,
            sent: result.sent(),
            stderr: result.binomial_stderr(exact),
        })
    }
}

fn js(e: ops::DemoError) -> JsError {
    JsError::new(&e.to_string())
}

/// `[symbol_time, payload_symbols, low_data_rate_optimize, time_on_air]`.
#[wasm_bindgen]
pub fn airtime(
    sf: u8,
    bandwidth_hz: f64,
    payload: usize,
    cr: u8,
    preamble: u16,
    explicit_header: bool,
    crc: bool,
) -> Result<Vec<f64>, JsError> {
    let a = ops::airtime(sf, bandwidth_hz, payload, cr, preamble, explicit_header, crc).map_err(js)?;
    Ok(vec![
        a.symbol_time,
        a.payload_symbols as f64,
        if a.low_data_rate_optimize { 1.0 } else { 0.0 },
        a.time_on_air,
    ])
}

/// Flattened `n_moved, lower, upper` triples.
#[wasm_bindgen]
pub fn bounds_curve(total: u32, period: f64, t7: f64, t8: f64, step: u32) -> Result<Vec<f64>, JsError> {
    let rows = ops::curve(total.into(), period, t7, t8, step.into()).map_err(js)?;
    Ok(rows.into_iter().flat_map(|(n, lo, up)| [n as f64, lo, up]).collect())
}

/// `[pdr, exact, lower, upper, sent, stderr]`.
#[wasm_bindgen]
pub fn monte_carlo(devices: u32, period: f64, airtime: f64, periods: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    let m = ops::monte_carlo(devices.into(), period, airtime, periods.into(), seed.into()).map_err(js)?;
    Ok(vec![m.pdr, m.exact, m.lower, m.upper, m.sent as f64, m.stderr])
}
