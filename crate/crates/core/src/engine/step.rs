use super::EngineError;

/// Step sizes `α_k`, `k = 0, 1, 2, …`.
///
/// The diminishing forms are limited to families whose admissibility
/// (`Σ α_k = ∞`, `Σ α_k² < ∞`) is known in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// Constant `α ∈ (0, 1]`.
    Fixed(f64),
    /// `α_k = 1/(k+1)`.
    Harmonic,
    /// `α_k = c/(k+1)^p` with `c ∈ (0, 1]`, `p ∈ (1/2, 1]`.
    Power { c: f64, p: f64 },
}

impl StepSchedule {
    pub fn fixed(alpha: f64) -> Result<Self, EngineError> {
        let s = StepSchedule::Fixed(alpha);
        s.check()?;
        Ok(s)
    }

    pub fn power(c: f64, p: f64) -> Result<Self, EngineError> {
        let s = StepSchedule::Power { c, p };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), EngineError> {
        match *self {
            StepSchedule::Fixed(a) if !(a > 0.0 && a <= 1.0) => Err(EngineError::InvalidSteps(
                format!("fixed step {a} is outside (0, 1]"),
            )),
            StepSchedule::Power { c, .. } if !(c > 0.0 && c <= 1.0) => Err(
                EngineError::InvalidSteps(format!("power scale {c} is outside (0, 1]")),
            ),
            StepSchedule::Power { p, .. } if p.is_nan() || p <= 0.5 => Err(EngineError::InvalidSteps(
                format!("power exponent {p} ≤ 1/2 makes Σα_k² diverge"),
            )),
            StepSchedule::Power { p, .. } if p > 1.0 => Err(EngineError::InvalidSteps(format!(
                "power exponent {p} > 1 makes Σα_k converge"
            ))),
            _ => Ok(()),
        }
    }

    pub fn alpha(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Fixed(a) => a,
            StepSchedule::Harmonic => 1.0 / (k as f64 + 1.0),
            StepSchedule::Power { c, p } => c / (k as f64 + 1.0).powf(p),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, StepSchedule::Fixed(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissibility() {
        assert!(StepSchedule::fixed(0.5).is_ok());
        assert!(StepSchedule::fixed(1.0).is_ok());
        assert!(StepSchedule::fixed(0.0).is_err());
        assert!(StepSchedule::fixed(1.5).is_err());
        assert!(StepSchedule::fixed(f64::NAN).is_err());
        assert!(StepSchedule::power(1.0, 0.75).is_ok());
        assert!(StepSchedule::power(1.0, 1.0).is_ok());
        assert!(StepSchedule::power(1.0, 0.5).is_err());
        assert!(StepSchedule::power(1.0, 1.1).is_err());
        assert!(StepSchedule::power(0.0, 0.8).is_err());
        assert!(StepSchedule::Harmonic.check().is_ok());
    }

    #[test]
    fn values() {
        assert_eq!(StepSchedule::Harmonic.alpha(0), 1.0);
        assert_eq!(StepSchedule::Harmonic.alpha(3), 0.25);
        assert_eq!(StepSchedule::Fixed(0.3).alpha(100), 0.3);
        let p = StepSchedule::power(0.5, 1.0).unwrap();
        assert_eq!(p.alpha(1), 0.25);
        for k in 1..1000 {
            let a = StepSchedule::Harmonic.alpha(k);
            assert!(a > 0.0 && a < 1.0);
        }
    }
}
