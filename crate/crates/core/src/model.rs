//! Forward model: inverse-square flux, expected count rate and Poisson counts.
//!
//! A source at `A` with strength `s` (μCi) seen by a detector at ground-frame
//! position `x` and standoff height `h` contributes
//!
//! ```text
//! flux = s / (h² + |x − A|²)
//! ```
//!
//! and a detector with efficiency `E` and background `B` records on average
//! `3.7e4 · E · Σ flux + B` counts per second. Sources may carry a dipole
//! moment `P`, which adds `P·d̂ / (h² + |d|²)^{3/2}` with `d = x − A`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::scalar::{dist2, Scalar};

/// Counts per second produced by one microcurie.
pub const MICROCURIE_TO_CPS: f64 = 3.7e4;

/// A point source hypothesis: position (cm), strength (μCi) and an optional
/// dipole moment (μCi·cm, effective units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceParams<T> {
    pub position: Vec<T>,
    pub strength: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dipole: Option<Vec<T>>,
}

impl<T: Scalar> SourceParams<T> {
    pub fn new(position: Vec<T>, strength: T) -> Result<Self> {
        let s = Self {
            position,
            strength,
            dipole: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_dipole(mut self, dipole: Vec<T>) -> Result<Self> {
        self.dipole = Some(dipole);
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= T::zero()) {
            return Err(Error::NegativeStrength(self.strength.as_f64()));
        }
        if let Some(p) = &self.dipole {
            if p.len() != self.position.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.position.len(),
                    found: p.len(),
                    context: "dipole moment",
                });
            }
        }
        Ok(())
    }
}

/// Detector pose: ground-frame position (cm), standoff height `h` (cm),
/// efficiency and background rate (CPS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPose<T> {
    pub position: Vec<T>,
    pub height: T,
    pub efficiency: T,
    pub background: T,
}

impl<T: Scalar> SensorPose<T> {
    pub fn new(position: Vec<T>, height: T, efficiency: T, background: T) -> Result<Self> {
        let p = Self {
            position,
            height,
            efficiency,
            background,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.height > T::zero()) {
            return Err(Error::NonPositiveHeight(self.height.as_f64()));
        }
        if !(self.efficiency > T::zero()) {
            return Err(Error::NonPositiveEfficiency(self.efficiency.as_f64()));
        }
        if !(self.background >= T::zero()) {
            return Err(Error::NegativeRate(self.background.as_f64()));
        }
        Ok(())
    }
}

/// One reading: a pose and the integral count registered there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement<T> {
    pub pose: SensorPose<T>,
    pub count: u64,
    pub time_step: u32,
}

#[inline]
fn check_geometry<T: Scalar>(sensor: &SensorPose<T>, source: &SourceParams<T>) -> Result<()> {
    if !(sensor.height > T::zero()) {
        return Err(Error::NonPositiveHeight(sensor.height.as_f64()));
    }
    if sensor.position.len() != source.position.len() {
        return Err(Error::DimensionMismatch {
            expected: sensor.position.len(),
            found: source.position.len(),
            context: "source position vs sensor position",
        });
    }
    Ok(())
}

/// Monopole flux `s / (h² + |x − A|²)`.
pub fn flux_contribution<T: Scalar>(sensor: &SensorPose<T>, source: &SourceParams<T>) -> Result<T> {
    check_geometry(sensor, source)?;
    let r2 = sensor.height * sensor.height + dist2(&sensor.position, &source.position);
    Ok(source.strength / r2)
}

/// Monopole plus dipole flux, clamped at zero. A source without a dipole
/// reduces to [`flux_contribution`].
pub fn dipole_flux_contribution<T: Scalar>(sensor: &SensorPose<T>, source: &SourceParams<T>) -> Result<T> {
    let monopole = flux_contribution(sensor, source)?;
    let Some(moment) = &source.dipole else {
        return Ok(monopole);
    };
    if moment.len() != source.position.len() {
        return Err(Error::DimensionMismatch {
            expected: source.position.len(),
            found: moment.len(),
            context: "dipole moment",
        });
    }
    let d2 = dist2(&sensor.position, &source.position);
    if d2 == T::zero() {
        return Ok(monopole);
    }
    let d_norm = d2.sqrt();
    let projected = sensor
        .position
        .iter()
        .zip(&source.position)
        .zip(moment)
        .fold(T::zero(), |acc, ((&x, &a), &p)| acc + p * (x - a))
        / d_norm;
    let r2 = sensor.height * sensor.height + d2;
    let total = monopole + projected / (r2 * r2.sqrt());
    Ok(total.max(T::zero()))
}

/// Expected count rate `3.7e4 · E · Σ flux + B` (CPS).
pub fn expected_intensity<'a, T, I>(sensor: &SensorPose<T>, sources: I) -> Result<T>
where
    T: Scalar,
    I: IntoIterator<Item = &'a SourceParams<T>>,
{
    let mut total = T::zero();
    for source in sources {
        total = total + dipole_flux_contribution(sensor, source)?;
    }
    Ok(T::lit(MICROCURIE_TO_CPS) * sensor.efficiency * total + sensor.background)
}

/// One Poisson draw with the given mean.
pub fn sample_count<T: Scalar, R: Rng + ?Sized>(rate: T, rng: &mut R) -> Result<u64> {
    let rate = rate.as_f64();
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::NegativeRate(rate));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(rate).map_err(|_| Error::NegativeRate(rate))?;
    Ok(dist.sample(rng) as u64)
}

/// `ln p(x|y) − ln p(⌊y⌋|y)` for a Poisson mass `p`. The `−y` terms cancel.
///
/// `y = 0` is the degenerate distribution at zero: returns `0` for `x = 0`
/// and `-inf` otherwise. Negative or non-finite `y` is rejected.
pub fn log_poisson_ratio<T: Scalar>(x: u64, y: T) -> Result<T> {
    let yf = y.as_f64();
    if !(yf >= 0.0) || !yf.is_finite() {
        return Err(Error::NonPositiveMean(yf));
    }
    if yf == 0.0 {
        return Ok(if x == 0 { T::zero() } else { T::neg_infinity() });
    }
    let ln_y = yf.ln();
    let mode = yf.floor();
    let xf = x as f64;
    let v = (xf - mode) * ln_y - ln_gamma(xf + 1.0) + ln_gamma(mode + 1.0);
    // The mode is the maximum of the mass, so the ratio never exceeds one.
    Ok(T::lit(v.min(0.0)))
}

/// `p(x|y) / p(⌊y⌋|y)`, the mode-normalized Poisson likelihood, in `(0, 1]`.
///
/// Computed through [`log_poisson_ratio`]; values below the smallest normal
/// float flush to zero here, so weight arithmetic should stay in log form.
pub fn poisson_likelihood_normalized<T: Scalar>(x: u64, y: T) -> Result<T> {
    if !(y > T::zero()) {
        return Err(Error::NonPositiveMean(y.as_f64()));
    }
    Ok(log_poisson_ratio(x, y)?.exp())
}
