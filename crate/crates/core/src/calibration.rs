//! Two-point calibration of the pointer scale.
//!
//! The detector reports raw coordinates. Measuring the pointer with the
//! photon prepared in `|V⟩` in every block (eigenvalue `−n`) and then in
//! `|H⟩` (eigenvalue `+n`) fixes the zero point and scale of the calibrated
//! pointer variable.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Affine map `calibrated = (raw − offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration<T> {
    offset: T,
    scale: T,
}

impl<T: Scalar> Calibration<T> {
    /// `scale` is raw units per eigenvalue unit and must be positive.
    pub fn new(offset: T, scale: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() || !offset.is_finite() {
            return Err(Error::DegenerateCalibration(format!(
                "scale must be positive and finite, got {}",
                scale.to_f64_lossy()
            )));
        }
        Ok(Self { offset, scale })
    }

    pub fn identity() -> Self {
        Self {
            offset: T::zero(),
            scale: T::one(),
        }
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn to_calibrated(&self, raw: T) -> T {
        (raw - self.offset) / self.scale
    }

    pub fn to_raw(&self, calibrated: T) -> T {
        calibrated * self.scale + self.offset
    }
}

/// Builds the map sending the mean `|V⟩` reading to `−n` and the mean `|H⟩`
/// reading to `+n`.
pub fn calibrate<T: Scalar>(raw_v_mean: T, raw_h_mean: T, n: u32) -> Result<Calibration<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if raw_h_mean == raw_v_mean {
        return Err(Error::DegenerateCalibration(format!(
            "both anchors read {}",
            raw_h_mean.to_f64_lossy()
        )));
    }
    if raw_h_mean < raw_v_mean {
        return Err(Error::DegenerateCalibration(
            "the |H> anchor must read above the |V> anchor".into(),
        ));
    }
    let two = T::of(2.0);
    let offset = (raw_v_mean + raw_h_mean) / two;
    let scale = (raw_h_mean - raw_v_mean) / (two * T::of_u64(u64::from(n)));
    Calibration::new(offset, scale)
}

pub fn to_calibrated<T: Scalar>(cal: &Calibration<T>, raw: T) -> T {
    cal.to_calibrated(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_anchor_examples() {
        let c = calibrate(100.0, 240.0, 7).unwrap();
        assert_eq!(c.offset(), 170.0);
        assert_eq!(c.scale(), 10.0);
        assert_eq!(to_calibrated(&c, 240.0), 7.0);
        assert_eq!(to_calibrated(&c, 100.0), -7.0);
        assert_eq!(to_calibrated(&c, 170.0), 0.0);

        let id = calibrate(-7.0, 7.0, 7).unwrap();
        assert_eq!(id, Calibration::identity());
    }

    #[test]
    fn degenerate_anchors() {
        assert!(matches!(
            calibrate(3.0, 3.0, 7),
            Err(Error::DegenerateCalibration(_))
        ));
        assert!(calibrate(5.0, 3.0, 7).is_err());
        assert!(calibrate(1.0, 3.0, 0).is_err());
        assert!(Calibration::new(0.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn anchors_map_exactly(v in -1e3f64..1e3, span in 1e-2f64..1e3, n in 1u32..=60) {
            let h = v + span;
            let c = calibrate(v, h, n).unwrap();
            let nf = f64::from(n);
            prop_assert!((c.to_calibrated(h) - nf).abs() <= 1e-12 * nf.max(1.0) * (1.0 + v.abs().max(h.abs()) / span));
            prop_assert!((c.to_calibrated(v) + nf).abs() <= 1e-12 * nf.max(1.0) * (1.0 + v.abs().max(h.abs()) / span));
        }

        #[test]
        fn round_trip_and_affinity(
            v in -1e3f64..1e3, span in 1e-1f64..1e3, x in -1e3f64..1e3, y in -1e3f64..1e3, t in 0f64..1.0
        ) {
            let c = calibrate(v, v + span, 7).unwrap();
            prop_assert!((c.to_raw(c.to_calibrated(x)) - x).abs() <= 1e-12 * (1.0 + x.abs() + v.abs()));
            let mix = c.to_calibrated(t * x + (1.0 - t) * y);
            let sep = t * c.to_calibrated(x) + (1.0 - t) * c.to_calibrated(y);
            prop_assert!((mix - sep).abs() <= 1e-12 * (1.0 + (x.abs() + y.abs() + v.abs()) / span));
        }
    }
}
