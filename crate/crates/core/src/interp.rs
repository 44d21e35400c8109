//! Piecewise-linear lookup on strictly increasing axes.

/// Position of `x` on `axis` as a cell index and the fractional weight of
/// the upper node. Values outside the axis are clamped to the end nodes.
/// Returns `(index, weight, clamped)`.
pub fn locate(axis: &[f64], x: f64) -> (usize, f64, bool) {
    debug_assert!(!axis.is_empty());
    let n = axis.len();
    if n == 1 {
        return (0, 0.0, x != axis[0]);
    }
    if x <= axis[0] {
        return (0, 0.0, x < axis[0]);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0, x > axis[n - 1]);
    }
    // first node strictly greater than x
    let hi = axis.partition_point(|&a| a <= x);
    let lo = hi - 1;
    let w = (x - axis[lo]) / (axis[hi] - axis[lo]);
    (lo, w, false)
}

pub fn linear(axis: &[f64], values: &[f64], x: f64) -> f64 {
    let (i, w, _) = locate(axis, x);
    if axis.len() == 1 {
        return values[0];
    }
    lerp(values[i], values[i + 1], w)
}

#[inline]
pub fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else if w == 1.0 {
        b
    } else {
        a + (b - a) * w
    }
}

pub fn is_strictly_increasing(axis: &[f64]) -> bool {
    axis.iter().all(|v| v.is_finite()) && axis.windows(2).all(|w| w[0] < w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_midpoints() {
        let axis = [0.0, 1.0, 3.0];
        let vals = [2.0, 4.0, 0.0];
        assert_eq!(linear(&axis, &vals, 1.0), 4.0);
        assert_eq!(linear(&axis, &vals, 3.0), 0.0);
        assert_eq!(linear(&axis, &vals, 0.5), 3.0);
        assert_eq!(linear(&axis, &vals, 2.0), 2.0);
    }

    #[test]
    fn clamps_outside() {
        let axis = [0.0, 1.0];
        let vals = [2.0, 4.0];
        assert_eq!(linear(&axis, &vals, -5.0), 2.0);
        assert_eq!(linear(&axis, &vals, 7.0), 4.0);
        assert!(locate(&axis, -5.0).2);
        assert!(!locate(&axis, 0.5).2);
    }
}
