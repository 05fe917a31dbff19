//! Composite Simpson rule.

/// Default panel count for plan integrals and covariance quadrature.
pub const DEFAULT_PANELS: usize = 10_000;

/// Composite Simpson over `[a, b]` with `panels` subintervals (rounded up to
/// an even count, minimum 2).
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let n = panels.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let x = a + i as f64 * h;
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    h / 3.0 * (f(a) + 4.0 * odd + 2.0 * even + f(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_converges() {
        let v = simpson(|x| (0.2 * (x - 1.0)).exp(), 0.0, 1.0, DEFAULT_PANELS);
        let exact = (1.0 - (-0.2f64).exp()) / 0.2;
        assert!(((v - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn odd_panel_count_rounds_up() {
        let v = simpson(|x| x * x, 0.0, 3.0, 3);
        assert!((v - 9.0).abs() < 1e-13);
    }
}
