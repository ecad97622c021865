//! Signaling-overhead model: controller-decision bits, coding-coefficient
//! headers, and acknowledgment bits, per transmission slot, as a fraction of
//! the payload bits moved.

use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OverheadVariant {
    /// Uncoded cellular broadcast; only per-packet acknowledgments.
    Stage1,
    BatchLossless,
    InstantLossless,
    BatchLossy,
    InstantLossy,
}

impl OverheadVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            OverheadVariant::Stage1 => "stage1",
            OverheadVariant::BatchLossless => "batch-lossless",
            OverheadVariant::InstantLossless => "instant-lossless",
            OverheadVariant::BatchLossy => "batch-lossy",
            OverheadVariant::InstantLossy => "instant-lossy",
        }
    }
}

impl FromStr for OverheadVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stage1" => Ok(OverheadVariant::Stage1),
            "batch-lossless" => Ok(OverheadVariant::BatchLossless),
            "instant-lossless" => Ok(OverheadVariant::InstantLossless),
            "batch-lossy" => Ok(OverheadVariant::BatchLossy),
            "instant-lossy" => Ok(OverheadVariant::InstantLossy),
            other => Err(Error::Config(format!("unknown overhead variant '{other}'"))),
        }
    }
}

#[derive(Copy, Clone, Debug, Serialize)]
pub struct OverheadParams {
    /// Packet size in bits.
    pub packet_bits: u64,
    /// Field size; a power of two.
    pub field_size: u64,
    /// Number of missing packets (coefficients per coded header).
    pub missing: u64,
    /// Number of targeted receivers acknowledging.
    pub targeted: u64,
    /// Number of devices.
    pub devices: u64,
}

impl OverheadParams {
    pub fn validate(&self) -> Result<()> {
        if self.packet_bits == 0 {
            return Err(Error::Config("packet size must be positive".into()));
        }
        if self.field_size < 2 || !self.field_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "field size {} is not a power of two >= 2",
                self.field_size
            )));
        }
        if self.targeted > self.devices {
            return Err(Error::Config("targeted receivers exceed device count".into()));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, Serialize)]
pub struct Overhead {
    /// Controller-to-transmitter decision bits.
    pub decision_bits: u64,
    /// Coding-coefficient header bits across the slot's transmissions.
    pub coefficient_bits: u64,
    /// Acknowledgment bits across the slot's transmissions.
    pub ack_bits: u64,
    /// Overhead bits over payload bits for the slot.
    pub fraction: f64,
}

/// Overhead per transmission slot. Stage one moves one packet per slot; all
/// stage-two variants move one packet per interface, hence the `2P` payload.
pub fn overhead_fraction(variant: OverheadVariant, params: &OverheadParams) -> Result<Overhead> {
    params.validate()?;
    let p = params.packet_bits;
    let m = params.missing;
    let nt = params.targeted;
    let coeff_bits = params.field_size.trailing_zeros() as u64;
    let (decision_bits, coefficient_bits, ack_bits, payload) = match variant {
        OverheadVariant::Stage1 => (0, 0, 2, p),
        OverheadVariant::BatchLossless => (1, 2 * m * coeff_bits, 0, 2 * p),
        OverheadVariant::InstantLossless => (m, 2 * m, 0, 2 * p),
        OverheadVariant::BatchLossy => (1, 2 * m * coeff_bits, 4 * nt, 2 * p),
        OverheadVariant::InstantLossy => (m, 2 * m, 4 * nt, 2 * p),
    };
    let fraction = (decision_bits + coefficient_bits + ack_bits) as f64 / payload as f64;
    Ok(Overhead { decision_bits, coefficient_bits, ack_bits, fraction })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: u64, nt: u64) -> OverheadParams {
        OverheadParams { packet_bits: 8000, field_size: 256, missing: m, targeted: nt, devices: 5 }
    }

    #[test]
    fn reference_fractions() {
        let p = params(30, 5);
        let f = |v| overhead_fraction(v, &p).unwrap().fraction;
        assert!((f(OverheadVariant::Stage1) - 0.00025).abs() < 1e-15);
        assert!((f(OverheadVariant::BatchLossless) - 0.0300625).abs() < 1e-15);
        assert!((f(OverheadVariant::InstantLossless) - 0.005625).abs() < 1e-15);
        assert!((f(OverheadVariant::BatchLossy) - 0.0313125).abs() < 1e-15);
        assert!((f(OverheadVariant::InstantLossy) - 0.006875).abs() < 1e-15);
    }

    #[test]
    fn coefficient_header_scales_with_field_bits() {
        let mut p = params(30, 5);
        p.field_size = 16;
        let oh = overhead_fraction(OverheadVariant::BatchLossless, &p).unwrap();
        assert_eq!(oh.coefficient_bits, 2 * 30 * 4);
    }

    #[test]
    fn non_power_of_two_field_is_rejected() {
        let mut p = params(30, 5);
        p.field_size = 250;
        assert!(matches!(
            overhead_fraction(OverheadVariant::BatchLossless, &p),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ack_term_orders_lossy_above_lossless() {
        for m in [1u64, 7, 30, 200] {
            for nt in [0u64, 1, 3, 5] {
                let p = params(m, nt);
                let f = |v| overhead_fraction(v, &p).unwrap().fraction;
                assert!(f(OverheadVariant::BatchLossy) >= f(OverheadVariant::BatchLossless));
                assert!(f(OverheadVariant::InstantLossy) >= f(OverheadVariant::InstantLossless));
            }
        }
    }
}
