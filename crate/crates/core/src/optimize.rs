//! One-dimensional bracketed minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Stops once the bracket width is below `rel_tol * max(|a|, |b|)` (or the
/// bracket no longer shrinks). Returns `(x_min, f_min)`.
pub fn golden_section_minimize<F>(mut f: F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);

    for _ in 0..500 {
        let width = b - a;
        if width <= rel_tol * a.abs().max(b.abs()) || width <= f64::EPSILON * b.abs() {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }

    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section search for a maximum; returns `(x_max, f_max)`.
pub fn golden_section_maximize<F>(mut f: F, a: f64, b: f64, rel_tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (x, fx) = golden_section_minimize(|x| -f(x), a, b, rel_tol);
    (x, -fx)
}

/// `points` values from `lo` to `hi` inclusive, evenly spaced in `log` scale or linearly.
pub fn grid(lo: f64, hi: f64, points: usize, log: bool) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let last = (points - 1) as f64;
            (0..points)
                .map(|k| {
                    let u = k as f64 / last;
                    if k == points - 1 {
                        hi
                    } else if log {
                        (lo.ln() + u * (hi.ln() - lo.ln())).exp()
                    } else {
                        lo + u * (hi - lo)
                    }
                })
                .collect()
        }
    }
}
