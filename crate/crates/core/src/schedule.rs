use crate::error::{Error, Result};

/// Variance-expanding schedule `σ_0² < σ_1² < … < σ_T² = h`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    variances: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_variances(variances: Vec<f64>) -> Result<Self> {
        if variances.len() < 2 {
            return Err(Error::Schedule(
                "need at least sigma_0^2 and sigma_1^2".into(),
            ));
        }
        if variances[0] < 0.0 || variances.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schedule(
                "variances must be finite and sigma_0^2 >= 0".into(),
            ));
        }
        if let Some(t) = variances.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Schedule(format!(
                "not strictly increasing at t = {} ({} -> {})",
                t + 1,
                variances[t],
                variances[t + 1]
            )));
        }
        Ok(Self { variances })
    }

    /// Linear interpolation from `sigma_min_sq` to `h` over `steps` substeps.
    pub fn linear(sigma_min_sq: f64, h: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Schedule(
                "at least one diffusion step is required".into(),
            ));
        }
        if !(h > sigma_min_sq) {
            return Err(Error::Schedule(format!(
                "h = {h} must exceed sigma_min^2 = {sigma_min_sq}"
            )));
        }
        let mut variances: Vec<f64> = (0..=steps)
            .map(|t| sigma_min_sq + (h - sigma_min_sq) * t as f64 / steps as f64)
            .collect();
        variances[steps] = h;
        Self::from_variances(variances)
    }

    /// Scales every variance so that `σ_T²` becomes `h`.
    pub fn rescaled(&self, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Schedule(format!(
                "step size must be positive, got {h}"
            )));
        }
        let scale = h / self.h();
        let mut variances: Vec<f64> = self.variances.iter().map(|v| v * scale).collect();
        *variances.last_mut().unwrap() = h;
        Self::from_variances(variances)
    }

    /// Number of diffusion substeps `T`.
    pub fn steps(&self) -> usize {
        self.variances.len() - 1
    }

    /// `σ_T²`.
    pub fn h(&self) -> f64 {
        self.variances[self.steps()]
    }

    pub fn variance(&self, t: usize) -> f64 {
        self.variances[t]
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// `σ_t² − σ_{t−1}²` for `t ≥ 1`.
    pub fn delta(&self, t: usize) -> f64 {
        self.variances[t] - self.variances[t - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_endpoints() {
        let s = NoiseSchedule::linear(0.0, 0.1, 10).unwrap();
        assert_eq!(s.steps(), 10);
        assert_eq!(s.h(), 0.1);
        assert_eq!(s.variance(0), 0.0);
        assert!((1..=10).all(|t| s.delta(t) > 0.0));

        let s = NoiseSchedule::linear(0.01, 1.0, 10).unwrap();
        assert_eq!(s.variance(0), 0.01);
        assert!((s.delta(1) - 0.099).abs() < 1e-15);
    }

    #[test]
    fn invalid_schedules() {
        assert!(NoiseSchedule::from_variances(vec![0.0]).is_err());
        assert!(NoiseSchedule::from_variances(vec![0.0, 0.5, 0.5]).is_err());
        assert!(NoiseSchedule::from_variances(vec![-0.1, 0.5]).is_err());
        assert!(NoiseSchedule::linear(0.0, 1.0, 0).is_err());
        assert!(NoiseSchedule::linear(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn rescale_preserves_endpoint() {
        let s = NoiseSchedule::linear(0.0, 0.1, 10).unwrap();
        let r = s.rescaled(0.05).unwrap();
        assert_eq!(r.h(), 0.05);
        assert_eq!(r.steps(), 10);
        assert!((r.variance(5) - 0.025).abs() < 1e-15);
        assert!(s.rescaled(0.0).is_err());
    }
}
