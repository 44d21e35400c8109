//! Fixed-step integration.

/// One classical fourth-order Runge-Kutta step of `dy/dt = f(t, y)`.
#[inline]
pub fn rk4_step<F>(f: F, t: f64, y: f64, dt: f64) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let half = 0.5 * dt;
    let k1 = f(t, y);
    let k2 = f(t + half, y + half * k1);
    let k3 = f(t + half, y + half * k2);
    let k4 = f(t + dt, y + dt * k3);
    y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = 1.0;
        let dt = 0.1;
        for i in 0..10 {
            y = rk4_step(|_, y| -y, i as f64 * dt, y, dt);
        }
        assert!((y - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn fourth_order_convergence() {
        let solve = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut y = 1.0;
            for i in 0..n {
                y = rk4_step(|t, y| t * y, i as f64 * dt, y, dt);
            }
            (y - 0.5f64.exp()).abs()
        };
        let ratio = solve(10) / solve(20);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }
}
