//! Battery cost of keeping a parked car's radio on.
//!
//! A radio drawing `power` watts from a `voltage`-volt starter battery of
//! `capacity_ah` amp-hours consumes `power / voltage` amps; running it for
//! `hours` uses that many amp-hours. The drain is reported as a percentage
//! of the usable capacity, where `eol_factor` derates an aged battery
//! (1.0 = new, 0.5 = end of life).

use crate::{Error, Result};

/// Percentage of usable battery capacity consumed by `hours` of radio duty.
pub fn battery_drain(
    power_w: f64,
    voltage_v: f64,
    hours: f64,
    capacity_ah: f64,
    eol_factor: f64,
) -> Result<f64> {
    for (name, v) in [
        ("power_w", power_w),
        ("voltage_v", voltage_v),
        ("capacity_ah", capacity_ah),
        ("eol_factor", eol_factor),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if !hours.is_finite() || hours < 0.0 {
        return Err(Error::InvalidInput(format!(
            "hours must be non-negative and finite, got {hours}"
        )));
    }
    Ok((power_w / voltage_v * hours) / (capacity_ah * eol_factor) * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overnight_duty_on_a_fresh_battery() {
        // 3 W at 12 V for 6.64 h on a 60 Ah battery: 2.76 % of capacity.
        let drain = battery_drain(3.0, 12.0, 6.64, 60.0, 1.0).unwrap();
        assert!((drain - 2.7666).abs() < 0.01, "got {drain}");
    }

    #[test]
    fn end_of_life_battery_doubles_the_cost() {
        let fresh = battery_drain(3.0, 12.0, 6.64, 60.0, 1.0).unwrap();
        let aged = battery_drain(3.0, 12.0, 6.64, 60.0, 0.5).unwrap();
        assert!((aged - 2.0 * fresh).abs() < 1e-9);
        assert!((aged - 5.53).abs() < 0.01, "got {aged}");
    }

    #[test]
    fn zero_hours_costs_nothing() {
        assert_eq!(battery_drain(3.0, 12.0, 0.0, 60.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn non_positive_parameters_are_rejected() {
        assert!(battery_drain(0.0, 12.0, 1.0, 60.0, 1.0).is_err());
        assert!(battery_drain(3.0, -12.0, 1.0, 60.0, 1.0).is_err());
        assert!(battery_drain(3.0, 12.0, -1.0, 60.0, 1.0).is_err());
        assert!(battery_drain(3.0, 12.0, 1.0, 0.0, 1.0).is_err());
        assert!(battery_drain(3.0, 12.0, 1.0, 60.0, 0.0).is_err());
        assert!(battery_drain(f64::NAN, 12.0, 1.0, 60.0, 1.0).is_err());
    }

    #[test]
    fn drain_scales_linearly_with_hours() {
        let one = battery_drain(5.0, 12.0, 1.0, 60.0, 1.0).unwrap();
        let ten = battery_drain(5.0, 12.0, 10.0, 60.0, 1.0).unwrap();
        assert!((ten - 10.0 * one).abs() < 1e-9);
    }
}
