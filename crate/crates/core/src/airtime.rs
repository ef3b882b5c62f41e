//! LoRa time-on-air.
//!
//! Implements the SX127x datasheet formula: a preamble of
//! `preamble_symbols + 4.25` symbols followed by
//! `8 + max(ceil((8PL - 4SF + 28 + 16CRC - 20IH) / (4(SF - 2DE))) * (CR + 4), 0)`
//! payload symbols, each symbol lasting `2^SF / BW` seconds.

use thiserror::Error;

/// Largest payload a LoRa frame can carry.
pub const MAX_PAYLOAD_BYTES: usize = 255;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AirtimeError {
    #[error("spreading factor {0} outside 7..=12")]
    SpreadingFactor(u8),
    #[error("bandwidth must be positive, got {0} Hz")]
    Bandwidth(f64),
    #[error("coding rate index {0} outside 1..=4")]
    CodingRate(u8),
    #[error("preamble must have at least one symbol")]
    Preamble,
    #[error("payload of {0} bytes exceeds {MAX_PAYLOAD_BYTES}")]
    PayloadTooLarge(usize),
}

/// Modulation settings that determine how long a frame occupies the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    spreading_factor: u8,
    bandwidth_hz: f64,
    coding_rate_index: u8,
    preamble_symbols: u16,
    explicit_header: bool,
    crc_enabled: bool,
    low_data_rate_optimize: bool,
}

impl RadioConfig {
    /// LoRaWAN uplink defaults: CR 4/5, 8-symbol preamble, explicit header,
    /// CRC on. Low data rate optimisation follows the vendor rule (symbol
    /// time above 16 ms, i.e. SF11/SF12 at 125 kHz).
    pub fn new(spreading_factor: u8, bandwidth_hz: f64) -> Result<Self, AirtimeError> {
        if !(7..=12).contains(&spreading_factor) {
            return Err(AirtimeError::SpreadingFactor(spreading_factor));
        }
        if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
            return Err(AirtimeError::Bandwidth(bandwidth_hz));
        }
        let symbol = f64::from(1u32 << spreading_factor) / bandwidth_hz;
        Ok(Self {
            spreading_factor,
            bandwidth_hz,
            coding_rate_index: 1,
            preamble_symbols: 8,
            explicit_header: true,
            crc_enabled: true,
            low_data_rate_optimize: symbol > 0.016,
        })
    }

    pub fn with_coding_rate(mut self, index: u8) -> Result<Self, AirtimeError> {
        if !(1..=4).contains(&index) {
            return Err(AirtimeError::CodingRate(index));
        }
        self.coding_rate_index = index;
        Ok(self)
    }

    pub fn with_preamble(mut self, symbols: u16) -> Result<Self, AirtimeError> {
        if symbols == 0 {
            return Err(AirtimeError::Preamble);
        }
        self.preamble_symbols = symbols;
        Ok(self)
    }

    pub fn with_explicit_header(mut self, on: bool) -> Self {
        self.explicit_header = on;
        self
    }

    pub fn with_crc(mut self, on: bool) -> Self {
        self.crc_enabled = on;
        self
    }

    pub fn with_low_data_rate_optimize(mut self, on: bool) -> Self {
        self.low_data_rate_optimize = on;
        self
    }

    pub fn spreading_factor(&self) -> u8 {
        self.spreading_factor
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn coding_rate_index(&self) -> u8 {
        self.coding_rate_index
    }

    pub fn preamble_symbols(&self) -> u16 {
        self.preamble_symbols
    }

    pub fn low_data_rate_optimize(&self) -> bool {
        self.low_data_rate_optimize
    }

    /// Number of payload symbols (including the 8 fixed header symbols).
    pub fn payload_symbols(&self, payload_bytes: usize) -> Result<u32, AirtimeError> {
        if payload_bytes > MAX_PAYLOAD_BYTES {
            return Err(AirtimeError::PayloadTooLarge(payload_bytes));
        }
        let sf = i64::from(self.spreading_factor);
        let crc = i64::from(self.crc_enabled);
        let implicit = i64::from(!self.explicit_header);
        let de = i64::from(self.low_data_rate_optimize);

        let numerator = 8 * payload_bytes as i64 - 4 * sf + 28 + 16 * crc - 20 * implicit;
        let denominator = 4 * (sf - 2 * de);
        // ceil for possibly negative numerators, clamped at zero anyway
        let blocks = if numerator <= 0 {
            0
        } else {
            (numerator + denominator - 1) / denominator
        };
        let coded = blocks * (i64::from(self.coding_rate_index) + 4);
        Ok(8 + coded as u32)
    }
}

/// Duration of one chirp: `2^SF / BW`.
pub fn symbol_time(config: &RadioConfig) -> f64 {
    f64::from(1u32 << config.spreading_factor) / config.bandwidth_hz
}

/// Time on air in seconds for a frame carrying `payload_bytes`.
pub fn time_on_air(config: &RadioConfig, payload_bytes: usize) -> Result<f64, AirtimeError> {
    let payload = config.payload_symbols(payload_bytes)?;
    let symbols = f64::from(config.preamble_symbols) + 4.25 + f64::from(payload);
    Ok(symbols * symbol_time(config))
}
