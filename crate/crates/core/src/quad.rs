//! Adaptive Simpson quadrature for the ergodic ball averages.

use crate::scalar::Real;

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`; the interval is
/// pre-split into `panels` so oscillation is seen before refinement starts.
pub fn adaptive_simpson<R: Real>(f: &dyn Fn(R) -> R, a: R, b: R, tol: R, panels: usize) -> R {
    let panels = panels.max(1);
    let width = (b - a) / R::from_usize_exact(panels);
    let mut acc = R::zero();
    let panel_tol = tol / R::from_usize_exact(panels);
    for i in 0..panels {
        let x0 = a + width * R::from_usize_exact(i);
        let x1 = x0 + width;
        let fa = f(x0);
        let fb = f(x1);
        let m = (x0 + x1) * R::of(0.5);
        let fm = f(m);
        let whole = simpson(fa, fm, fb, x1 - x0);
        acc += adapt(f, x0, x1, fa, fm, fb, whole, panel_tol, 40);
    }
    acc
}

fn simpson<R: Real>(fa: R, fm: R, fb: R, h: R) -> R {
    (fa + R::of(4.0) * fm + fb) * h / R::of(6.0)
}

#[allow(clippy::too_many_arguments)]
fn adapt<R: Real>(
    f: &dyn Fn(R) -> R,
    a: R,
    b: R,
    fa: R,
    fm: R,
    fb: R,
    whole: R,
    tol: R,
    depth: usize,
) -> R {
    let m = (a + b) * R::of(0.5);
    let lm = (a + m) * R::of(0.5);
    let rm = (m + b) * R::of(0.5);
    let flm = f(lm);
    let frm = f(rm);
    let h = (b - a) * R::of(0.5);
    let left = simpson(fa, flm, fm, h);
    let right = simpson(fm, frm, fb, h);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= R::of(15.0) * tol {
        return left + right + err / R::of(15.0);
    }
    let half_tol = tol * R::of(0.5);
    adapt(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
        + adapt(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_oscillation() {
        let f = |x: f64| (5.0 * x).sin();
        let exact = (1.0 - 5.0_f64.cos()) / 5.0;
        let got = adaptive_simpson(&f, 0.0, 1.0, 1e-10, 8);
        assert!((got - exact).abs() < 1e-9);
    }
}
