use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

fn axpy(y: &[Vec3], h: f64, k: &[Vec3]) -> Vec<Vec3> {
    y.iter().zip(k).map(|(a, b)| a + b * h).collect()
}

impl Integrator {
    /// Advances `y' = f(t, y)` by one step of size `dt`.
    pub fn step<E, F>(self, t: f64, y: &[Vec3], dt: f64, mut f: F) -> Result<Vec<Vec3>, E>
    where
        F: FnMut(f64, &[Vec3]) -> Result<Vec<Vec3>, E>,
    {
        match self {
            Integrator::Euler => {
                let k1 = f(t, y)?;
                Ok(axpy(y, dt, &k1))
            }
            Integrator::Rk4 => {
                let k1 = f(t, y)?;
                let k2 = f(t + 0.5 * dt, &axpy(y, 0.5 * dt, &k1))?;
                let k3 = f(t + 0.5 * dt, &axpy(y, 0.5 * dt, &k2))?;
                let k4 = f(t + dt, &axpy(y, dt, &k3))?;
                Ok(y.iter()
                    .enumerate()
                    .map(|(i, yi)| yi + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn decay(_: f64, y: &[Vec3]) -> Result<Vec<Vec3>, Infallible> {
        Ok(y.iter().map(|v| -v).collect())
    }

    fn integrate(integrator: Integrator, dt: f64, steps: usize) -> f64 {
        let mut y = vec![Vec3::new(1.0, 0.0, 0.0)];
        for k in 0..steps {
            y = integrator.step(k as f64 * dt, &y, dt, decay).unwrap();
        }
        y[0].x
    }

    #[test]
    fn rk4_matches_exponential() {
        let y = integrate(Integrator::Rk4, 0.01, 100);
        assert!((y - (-1f64).exp()).abs() < 1e-9, "{y}");
    }

    #[test]
    fn rk4_is_fourth_order() {
        let exact = (-1f64).exp();
        let coarse = (integrate(Integrator::Rk4, 0.1, 10) - exact).abs();
        let fine = (integrate(Integrator::Rk4, 0.05, 20) - exact).abs();
        let order = (coarse / fine).log2();
        assert!((order - 4.0).abs() < 0.1, "observed order {order}");
    }

    #[test]
    fn euler_is_first_order() {
        let exact = (-1f64).exp();
        let coarse = (integrate(Integrator::Euler, 0.01, 100) - exact).abs();
        let fine = (integrate(Integrator::Euler, 0.005, 200) - exact).abs();
        assert!(((coarse / fine).log2() - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_field_leaves_state() {
        let y = vec![Vec3::new(1.0, 2.0, 3.0)];
        let out = Integrator::Rk4
            .step(0.0, &y, 0.1, |_, y: &[Vec3]| Ok::<_, Infallible>(vec![Vec3::zeros(); y.len()]))
            .unwrap();
        assert_eq!(out, y);
    }
}
