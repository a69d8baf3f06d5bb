/// Probabilists' Hermite polynomial `He_n(x)` by the three-term recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    debug_assert!(n <= 10, "hermite order above 10 is not supported");
    let (mut prev, mut cur) = (1.0, x);
    match n {
        0 => prev,
        _ => {
            for k in 1..n {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders() {
        assert_eq!(hermite(0, 7.3), 1.0);
        assert_eq!(hermite(1, 2.5), 2.5);
        assert_eq!(hermite(2, 3.0), 8.0);
        // He_3 = x³ − 3x, He_4 = x⁴ − 6x² + 3
        assert!((hermite(3, 1.7) - (1.7f64.powi(3) - 5.1)).abs() < 1e-12);
        assert!((hermite(4, -0.4) - (0.0256 - 0.96 + 3.0)).abs() < 1e-12);
    }
}
