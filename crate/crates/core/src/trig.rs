//! Finite trigonometric sums with arbitrary real frequency vectors; the
//! concrete representation shared by periodic and almost-periodic data.

use crate::scalar::Real;

/// One mode `amp_cos * cos(omega . x) + amp_sin * sin(omega . x)`.
#[derive(Debug, Clone, Copy)]
pub struct Mode<R: Real> {
    pub omega: [R; 2],
    pub amp_cos: R,
    pub amp_sin: R,
}

/// Frequencies within this tolerance of zero are treated as the constant mode.
pub const ZERO_FREQ_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TrigPoly<R: Real> {
    pub dim: usize,
    pub modes: Vec<Mode<R>>,
}

impl<R: Real> TrigPoly<R> {
    pub fn constant(dim: usize, c: R) -> Self {
        TrigPoly {
            dim,
            modes: vec![Mode {
                omega: [R::zero(); 2],
                amp_cos: c,
                amp_sin: R::zero(),
            }],
        }
    }

    pub fn new(dim: usize, modes: Vec<Mode<R>>) -> Self {
        TrigPoly { dim, modes }
    }

    /// 1-D helper: `c + sum a_i cos(w_i x) + b_i sin(w_i x)`.
    pub fn line(c: R, cos_terms: &[(R, R)], sin_terms: &[(R, R)]) -> Self {
        let mut modes = vec![Mode {
            omega: [R::zero(); 2],
            amp_cos: c,
            amp_sin: R::zero(),
        }];
        for &(w, a) in cos_terms {
            modes.push(Mode {
                omega: [w, R::zero()],
                amp_cos: a,
                amp_sin: R::zero(),
            });
        }
        for &(w, b) in sin_terms {
            modes.push(Mode {
                omega: [w, R::zero()],
                amp_cos: R::zero(),
                amp_sin: b,
            });
        }
        TrigPoly { dim: 1, modes }
    }

    pub fn eval(&self, x: [R; 2]) -> R {
        let mut acc = R::zero();
        for m in &self.modes {
            let mut phase = R::zero();
            for a in 0..self.dim {
                phase += m.omega[a] * x[a];
            }
            acc += m.amp_cos * phase.cos() + m.amp_sin * phase.sin();
        }
        acc
    }

    fn omega_norm(o: [R; 2]) -> R {
        (o[0] * o[0] + o[1] * o[1]).sqrt()
    }

    /// Mean value: the coefficient of the zero frequency (exact).
    pub fn mean(&self) -> R {
        let tol = R::of(ZERO_FREQ_TOL);
        let mut acc = R::zero();
        for m in &self.modes {
            if Self::omega_norm(m.omega) <= tol {
                acc += m.amp_cos;
            }
        }
        acc
    }

    /// Are all frequencies integer multiples of 2*pi (i.e. 1-periodic data)?
    pub fn is_periodic(&self) -> bool {
        let tau = crate::scalar::two_pi::<R>();
        let tol = R::of(1e-9);
        self.modes.iter().all(|m| {
            (0..self.dim).all(|a| {
                let k = m.omega[a] / tau;
                (k - k.round()).abs() <= tol
            })
        })
    }

    pub fn max_abs_freq(&self) -> R {
        self.modes
            .iter()
            .map(|m| Self::omega_norm(m.omega))
            .fold(R::zero(), |acc, v| acc.max(v))
    }

    /// Exact mean of the product of two trig sums: expand into complex
    /// exponentials and keep the frequency-cancelling pairs.
    pub fn product_mean(&self, other: &TrigPoly<R>) -> R {
        let tol = R::of(ZERO_FREQ_TOL)
            * (R::one() + self.max_abs_freq().max(other.max_abs_freq()));
        let half = R::of(0.5);
        let mut acc = R::zero();
        // modes as c_+ e^{i w x} + c_- e^{-i w x}; for m with (a, b):
        // c_+ = (a - i b)/2 at +w, c_- = (a + i b)/2 at -w.
        for p in &self.modes {
            for q in &other.modes {
                for sp in [R::one(), -R::one()] {
                    for sq in [R::one(), -R::one()] {
                        let mut cancel = true;
                        for a in 0..self.dim.max(other.dim) {
                            let w = sp * p.omega[a] + sq * q.omega[a];
                            if w.abs() > tol {
                                cancel = false;
                                break;
                            }
                        }
                        if !cancel {
                            continue;
                        }
                        // Re[(c_p)(c_q)] for the matching sign pair
                        let (pr, pi) = (p.amp_cos * half, -sp * p.amp_sin * half);
                        let (qr, qi) = (q.amp_cos * half, -sq * q.amp_sin * half);
                        acc += pr * qr - pi * qi;
                    }
                }
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::two_pi;

    #[test]
    fn mean_and_product_mean() {
        let tau = two_pi::<f64>();
        // sin^2(2 pi y) has mean 1/2
        let s = TrigPoly::line(0.0, &[], &[(tau, 1.0)]);
        assert!((s.product_mean(&s) - 0.5).abs() < 1e-14);
        // cos(y) + cos(sqrt2 y) + 0.3 has mean 0.3
        let ap = TrigPoly::line(0.3, &[(1.0, 1.0), (2.0_f64.sqrt(), 1.0)], &[]);
        assert!((ap.mean() - 0.3).abs() < 1e-14);
        assert!(!ap.is_periodic());
        assert!(s.is_periodic());
        // orthogonality of distinct frequencies
        let c = TrigPoly::line(0.0, &[(tau, 1.0)], &[]);
        assert!(s.product_mean(&c).abs() < 1e-14);
    }
}
