//! N-function (Young function) calculus: evaluation, complementary functions,
//! growth-class detection and the scalar inequalities the solvers rely on.
//!
//! An N-function is a convex `F: [0,inf) -> [0,inf)` with `F(t)/t -> 0` at zero
//! and `-> inf` at infinity, represented through its density `phi` via
//! `F(t) = integral_0^t phi(s) ds`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of bisection steps used whenever a monotone function is inverted
/// numerically (interval shrinks by ~1e-24).
pub const INVERT_BISECTIONS: usize = 80;

/// An N-function together with its density.
#[derive(Debug, Clone)]
pub enum NFunction<R: Real> {
    /// `F(t) = coeff * t^p`, density `coeff * p * t^(p-1)`; `p > 1`, `coeff > 0`.
    /// The plain catalog form `t^p / p` corresponds to `coeff = 1/p`.
    Power { p: R, coeff: R },
    /// `F(t) = t^p * ln(1 + t)`, `p >= 1`.
    PowerLog { p: R },
    /// `F(t) = e^t - 1`. Not doubling; kept for growth-class diagnostics.
    ExpMinusOne,
    /// Density given by a monotone (shape-preserving) cubic spline of sampled
    /// `phi` values; `F` is the exact integral of the spline.
    Tabulated(MonotoneSpline<R>),
    /// Numeric Fenchel conjugate of another N-function.
    Conjugate(Box<NFunction<R>>),
}

impl<R: Real> NFunction<R> {
    /// `F(t) = t^p / p`.
    pub fn power(p: R) -> Self {
        assert!(p > R::one(), "power N-function requires p > 1");
        NFunction::Power {
            p,
            coeff: R::one() / p,
        }
    }

    /// `F(t) = coeff * t^p`.
    pub fn power_with_coeff(p: R, coeff: R) -> Self {
        assert!(p > R::one() && coeff > R::zero());
        NFunction::Power { p, coeff }
    }

    pub fn power_log(p: R) -> Self {
        assert!(p >= R::one());
        NFunction::PowerLog { p }
    }

    pub fn exp_minus_one() -> Self {
        NFunction::ExpMinusOne
    }

    /// Tabulated density `phi` at sorted sample points starting at `t = 0`.
    pub fn tabulated(points_t: Vec<R>, points_phi: Vec<R>) -> Result<Self> {
        Ok(NFunction::Tabulated(MonotoneSpline::new(
            points_t, points_phi,
        )?))
    }

    /// `F(t)`.
    pub fn evaluate(&self, t: R) -> Result<R> {
        if t < R::zero() {
            return Err(Error::Range(format!("N-function argument {t} < 0")));
        }
        Ok(match self {
            NFunction::Power { p, coeff } => *coeff * t.powf(*p),
            NFunction::PowerLog { p } => t.powf(*p) * (R::one() + t).ln(),
            NFunction::ExpMinusOne => t.exp() - R::one(),
            NFunction::Tabulated(sp) => sp.integral(t)?,
            NFunction::Conjugate(inner) => {
                // Legendre transform: sup_s (s t - F(s)) attained at s = phi^{-1}(t).
                let s = inner.invert_density(t)?;
                s * t - inner.evaluate(s)?
            }
        })
    }

    /// Density `phi(t) = F'(t)` (right derivative; generalized inverse for the
    /// conjugate kind).
    pub fn density(&self, t: R) -> Result<R> {
        if t < R::zero() {
            return Err(Error::Range(format!("density argument {t} < 0")));
        }
        Ok(match self {
            NFunction::Power { p, coeff } => *coeff * *p * t.powf(*p - R::one()),
            NFunction::PowerLog { p } => {
                let one = R::one();
                *p * t.powf(*p - one) * (one + t).ln() + t.powf(*p) / (one + t)
            }
            NFunction::ExpMinusOne => t.exp(),
            NFunction::Tabulated(sp) => sp.eval(t)?,
            NFunction::Conjugate(inner) => inner.invert_density(t)?,
        })
    }

    /// Generalized inverse of the density: `inf { s >= 0 : phi(s) >= v }`,
    /// computed by bracketing + fixed-count bisection.
    pub fn invert_density(&self, v: R) -> Result<R> {
        if v <= R::zero() {
            return Ok(R::zero());
        }
        if self.density(R::zero())? >= v {
            return Ok(R::zero());
        }
        let mut hi = R::one();
        let mut grow = 0;
        while self.density(hi)? < v {
            hi = hi + hi;
            grow += 1;
            if grow > 600 {
                return Err(Error::Domain(format!(
                    "density never reaches {v}; not an N-function density"
                )));
            }
        }
        let mut lo = R::zero();
        for _ in 0..INVERT_BISECTIONS {
            let mid = (lo + hi) * R::of(0.5);
            if self.density(mid)? < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo + hi) * R::of(0.5))
    }

    /// Inverse `F^{-1}(v)` by monotone bisection (closed form for powers).
    pub fn invert(&self, v: R) -> Result<R> {
        if v < R::zero() {
            return Err(Error::Range(format!("inverse argument {v} < 0")));
        }
        if v == R::zero() {
            return Ok(R::zero());
        }
        if let NFunction::Power { p, coeff } = self {
            return Ok((v / *coeff).powf(R::one() / *p));
        }
        let mut hi = R::one();
        let mut grow = 0;
        while self.evaluate(hi)? < v {
            hi = hi + hi;
            grow += 1;
            if grow > 600 {
                return Err(Error::Domain("N-function never reaches target".into()));
            }
        }
        let mut lo = R::zero();
        for _ in 0..INVERT_BISECTIONS {
            let mid = (lo + hi) * R::of(0.5);
            if self.evaluate(mid)? < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo + hi) * R::of(0.5))
    }

    /// Complementary (Fenchel conjugate) N-function. Power kinds pair in
    /// closed form (`t^p/p <-> t^q/q` with `1/p + 1/q = 1`); everything else
    /// goes through the numeric Legendre transform.
    pub fn complementary(&self) -> NFunction<R> {
        match self {
            NFunction::Power { p, coeff } => {
                let one = R::one();
                let q = *p / (*p - one);
                // conjugate of c*t^p is c*(p-1)*(c*p)^(-q) * t^q
                let cp = *coeff * *p;
                let cc = *coeff * (*p - one) * cp.powf(-q);
                NFunction::Power { p: q, coeff: cc }
            }
            other => NFunction::Conjugate(Box::new(other.clone())),
        }
    }

    /// Coercivity constant `theta = Fc^{-1}(F(h_min))` where `Fc` is the
    /// complementary function; `h_min` is the infimum of the degeneracy map.
    pub fn coercivity_constant(&self, h_min: R) -> Result<R> {
        if !(h_min > R::zero() && h_min < R::one()) {
            return Err(Error::Domain(format!(
                "coercivity constant needs h_min in (0,1), got {h_min}"
            )));
        }
        let target = self.evaluate(h_min)?;
        self.complementary().invert(target)
    }

    /// Growth-class report on a sorted positive grid.
    pub fn growth_report(&self, grid: &[R]) -> Result<GrowthReport<R>> {
        if grid.is_empty() {
            return Err(Error::Domain("growth report needs a nonempty grid".into()));
        }
        for w in grid.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Domain("growth grid must be strictly sorted".into()));
            }
        }
        if grid[0] <= R::zero() {
            return Err(Error::Domain("growth grid entries must be positive".into()));
        }

        let n = grid.len();
        // Witness t0 candidates keep at least TAIL_MIN grid points above them
        // so the certificate is never vacuous.
        const TAIL_MIN: usize = 8;
        let max_t0_idx = n.saturating_sub(TAIL_MIN.min(n));

        let values: Vec<R> = grid
            .iter()
            .map(|&t| self.evaluate(t))
            .collect::<Result<_>>()?;

        // delta_2: F(2t) <= k F(t) for all grid t >= t0.
        let ratio2: Vec<R> = grid
            .iter()
            .zip(&values)
            .map(|(&t, &ft)| {
                let f2t = self.evaluate(t + t)?;
                Ok(if f2t.is_finite() && ft > R::zero() {
                    f2t / ft
                } else {
                    R::infinity()
                })
            })
            .collect::<Result<_>>()?;
        let mut suffix_max2 = vec![R::zero(); n];
        let mut run = R::neg_infinity();
        for i in (0..n).rev() {
            run = run.max(ratio2[i]);
            suffix_max2[i] = run;
        }
        let k_set = [2.1, 4.0, 8.0, 16.0, 32.0];
        let mut delta2 = None;
        'k2: for &k in &k_set {
            let k = R::of(k);
            for idx in 0..=max_t0_idx {
                if suffix_max2[idx] <= k {
                    delta2 = Some((grid[idx], k));
                    break 'k2;
                }
            }
        }

        // delta': F(ts) <= beta F(t) F(s) for all grid pairs t,s >= t0.
        let mut pair_ratio = vec![R::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let fts = self.evaluate(grid[i] * grid[j])?;
                let denom = values[i] * values[j];
                let r = if fts.is_finite() && denom > R::zero() && denom.is_finite() {
                    fts / denom
                } else {
                    R::infinity()
                };
                pair_ratio[i * n + j] = r;
                pair_ratio[j * n + i] = r;
            }
        }
        // suffix 2-D max over the lower-right square [idx..][idx..]
        let mut suffix_pair = vec![R::neg_infinity(); n + 1];
        let mut row_tail_max = vec![R::neg_infinity(); n];
        for idx in (0..n).rev() {
            let mut row_max = R::neg_infinity();
            for j in idx..n {
                row_max = row_max.max(pair_ratio[idx * n + j]);
            }
            row_tail_max[idx] = row_max;
            // column part equals row part by symmetry
            suffix_pair[idx] = suffix_pair[idx + 1].max(row_max);
        }
        let mut delta_prime = None;
        'kp: for &b in &k_set {
            let b = R::of(b);
            for idx in 0..=max_t0_idx {
                if suffix_pair[idx] <= b {
                    delta_prime = Some((grid[idx], b));
                    break 'kp;
                }
            }
        }

        // Simonenko bounds: extrema of t phi(t) / F(t) on the grid.
        let mut lo = R::infinity();
        let mut hi = R::neg_infinity();
        for (&t, &ft) in grid.iter().zip(&values) {
            let v = t * self.density(t)? / ft;
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }

        Ok(GrowthReport {
            delta2: delta2.is_some(),
            delta2_t0: delta2.map(|w| w.0),
            delta2_k: delta2.map(|w| w.1),
            delta_prime: delta_prime.is_some(),
            delta_prime_t0: delta_prime.map(|w| w.0),
            delta_prime_beta: delta_prime.map(|w| w.1),
            simonenko_lo: lo,
            simonenko_hi: hi,
        })
    }

    /// Checks the pointwise density/convexity axioms and the inequality chain
    /// `t phi(t)/F(t) >= 1`, `Fc(phi(t)) <= t phi(t) <= F(2t)` on a grid.
    pub fn check_axioms(&self, grid: &[R]) -> Result<AxiomReport> {
        let conj = self.complementary();
        let slack = R::of(1e-10);
        let mut density_monotone = true;
        let mut density_positive = true;
        let mut chain_lower = true;
        let mut young_chain = true;
        let mut prev_phi = R::neg_infinity();
        for &t in grid {
            if t <= R::zero() {
                return Err(Error::Domain("axiom grid must be positive".into()));
            }
            let phi = self.density(t)?;
            let f = self.evaluate(t)?;
            if phi <= R::zero() {
                density_positive = false;
            }
            if phi < prev_phi - slack * (R::one() + phi.abs()) {
                density_monotone = false;
            }
            prev_phi = phi;
            if t * phi / f < R::one() - slack {
                chain_lower = false;
            }
            let tphi = t * phi;
            let rel = R::one() + slack;
            if conj.evaluate(phi)? > tphi * rel + slack || tphi > self.evaluate(t + t)? * rel {
                young_chain = false;
            }
        }
        let t_lo = grid[0];
        let t_hi = grid[grid.len() - 1];
        let small_at_zero = self.evaluate(t_lo)? / t_lo < R::of(0.5);
        let large_at_infinity = self.evaluate(t_hi)? / t_hi > R::of(5.0);
        Ok(AxiomReport {
            density_positive,
            density_monotone,
            chain_lower,
            young_chain,
            small_at_zero,
            large_at_infinity,
        })
    }
}

/// Geometric grid (log-spaced) over `[lo, hi]`, the default validation grid.
pub fn dyadic_grid<R: Real>(lo: R, hi: R, count: usize) -> Vec<R> {
    assert!(count >= 2 && lo > R::zero() && hi > lo);
    let l0 = lo.ln();
    let l1 = hi.ln();
    (0..count)
        .map(|i| {
            let w = R::from_usize_exact(i) / R::from_usize_exact(count - 1);
            (l0 + (l1 - l0) * w).exp()
        })
        .collect()
}

/// Growth-class flags with their numeric witnesses.
#[derive(Debug, Clone)]
pub struct GrowthReport<R: Real> {
    pub delta2: bool,
    pub delta2_t0: Option<R>,
    pub delta2_k: Option<R>,
    pub delta_prime: bool,
    pub delta_prime_t0: Option<R>,
    pub delta_prime_beta: Option<R>,
    pub simonenko_lo: R,
    pub simonenko_hi: R,
}

impl<R: Real> GrowthReport<R> {
    pub fn text_block(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("delta2           = {}\n", self.delta2));
        if let (Some(t0), Some(k)) = (self.delta2_t0, self.delta2_k) {
            s.push_str(&format!("delta2_witness   = t0={t0:.6e} k={k}\n"));
        }
        s.push_str(&format!("delta_prime      = {}\n", self.delta_prime));
        if let (Some(t0), Some(b)) = (self.delta_prime_t0, self.delta_prime_beta) {
            s.push_str(&format!("delta_p_witness  = t0={t0:.6e} beta={b}\n"));
        }
        s.push_str(&format!("simonenko_lo     = {:.12e}\n", self.simonenko_lo));
        s.push_str(&format!("simonenko_hi     = {:.12e}\n", self.simonenko_hi));
        s
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.12e},{:.12e}",
            self.delta2, self.delta_prime, self.simonenko_lo, self.simonenko_hi
        )
    }
}

/// Pointwise axiom check outcome (grid-sampled, not a proof).
#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub density_positive: bool,
    pub density_monotone: bool,
    /// `t phi(t) / F(t) >= 1` on the grid.
    pub chain_lower: bool,
    /// `Fc(phi(t)) <= t phi(t) <= F(2t)` on the grid.
    pub young_chain: bool,
    pub small_at_zero: bool,
    pub large_at_infinity: bool,
}

impl AxiomReport {
    pub fn all_n_function(&self) -> bool {
        self.density_positive
            && self.density_monotone
            && self.chain_lower
            && self.young_chain
            && self.small_at_zero
            && self.large_at_infinity
    }
}

/// Shape-preserving (Fritsch-Carlson) cubic Hermite interpolant of a
/// nondecreasing sample set, with exact piecewise integration.
#[derive(Debug, Clone)]
pub struct MonotoneSpline<R: Real> {
    t: Vec<R>,
    v: Vec<R>,
    slope: Vec<R>,
}

impl<R: Real> MonotoneSpline<R> {
    pub fn new(t: Vec<R>, v: Vec<R>) -> Result<Self> {
        if t.len() != v.len() || t.len() < 2 {
            return Err(Error::Shape("spline needs >= 2 matched samples".into()));
        }
        for w in t.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Domain("spline abscissae must increase".into()));
            }
        }
        for w in v.windows(2) {
            if w[1] < w[0] {
                return Err(Error::Domain("tabulated density must be nondecreasing".into()));
            }
        }
        let n = t.len();
        let mut d = vec![R::zero(); n - 1];
        for i in 0..n - 1 {
            d[i] = (v[i + 1] - v[i]) / (t[i + 1] - t[i]);
        }
        let mut slope = vec![R::zero(); n];
        slope[0] = d[0];
        slope[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            slope[i] = if d[i - 1] * d[i] <= R::zero() {
                R::zero()
            } else {
                (d[i - 1] + d[i]) * R::of(0.5)
            };
        }
        // Fritsch-Carlson limiter keeps the interpolant monotone.
        let three = R::of(3.0);
        for i in 0..n - 1 {
            if d[i] == R::zero() {
                slope[i] = R::zero();
                slope[i + 1] = R::zero();
            } else {
                let a = slope[i] / d[i];
                let b = slope[i + 1] / d[i];
                let s = (a * a + b * b).sqrt();
                if s > three {
                    let tau = three / s;
                    slope[i] = tau * a * d[i];
                    slope[i + 1] = tau * b * d[i];
                }
            }
        }
        Ok(MonotoneSpline { t, v, slope })
    }

    pub fn range(&self) -> (R, R) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    fn segment(&self, x: R) -> Result<usize> {
        let (lo, hi) = self.range();
        if x < lo || x > hi {
            return Err(Error::Range(format!(
                "tabulated argument {x} outside [{lo}, {hi}]"
            )));
        }
        let mut i = match self
            .t
            .binary_search_by(|a| a.partial_cmp(&x).expect("finite"))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i >= self.t.len() - 1 {
            i = self.t.len() - 2;
        }
        Ok(i)
    }

    pub fn eval(&self, x: R) -> Result<R> {
        let i = self.segment(x)?;
        let h = self.t[i + 1] - self.t[i];
        let s = (x - self.t[i]) / h;
        let (v0, v1) = (self.v[i], self.v[i + 1]);
        let (m0, m1) = (self.slope[i] * h, self.slope[i + 1] * h);
        let one = R::one();
        let two = R::of(2.0);
        let three = R::of(3.0);
        let h00 = (one + two * s) * (one - s) * (one - s);
        let h10 = s * (one - s) * (one - s);
        let h01 = s * s * (three - two * s);
        let h11 = s * s * (s - one);
        Ok(h00 * v0 + h10 * m0 + h01 * v1 + h11 * m1)
    }

    /// Exact integral of the cubic interpolant over `[t0, x]`.
    pub fn integral(&self, x: R) -> Result<R> {
        let i_end = self.segment(x)?;
        let mut acc = R::zero();
        for i in 0..=i_end {
            let upper = if i == i_end { x } else { self.t[i + 1] };
            acc += self.segment_integral(i, upper);
        }
        Ok(acc)
    }

    fn segment_integral(&self, i: usize, upper: R) -> R {
        let h = self.t[i + 1] - self.t[i];
        let s = (upper - self.t[i]) / h;
        let (v0, v1) = (self.v[i], self.v[i + 1]);
        let (m0, m1) = (self.slope[i] * h, self.slope[i + 1] * h);
        // Integrals of the Hermite basis from 0 to s, times h.
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let half = R::of(0.5);
        let ih00 = s - s3 + half * s4;
        let ih10 = half * s2 - R::of(2.0 / 3.0) * s3 + R::of(0.25) * s4;
        let ih01 = s3 - half * s4;
        let ih11 = R::of(0.25) * s4 - R::of(1.0 / 3.0) * s3;
        h * (ih00 * v0 + ih10 * m0 + ih01 * v1 + ih11 * m1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type NF = NFunction<f64>;

    #[test]
    fn power_evaluate_closed_forms() {
        let phi2 = NF::power(2.0);
        assert_eq!(phi2.evaluate(2.0).unwrap(), 2.0); // t^2/2 at 2
        let plog = NF::power_log(1.0);
        assert_eq!(plog.evaluate(0.0).unwrap(), 0.0);
        assert!(phi2.evaluate(-1.0).is_err());
    }

    #[test]
    fn tabulated_linear_density_integrates_exactly() {
        // phi(s) = s sampled on [0, 10]; F(3) = 4.5.
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let v = t.clone();
        let nf = NF::tabulated(t, v).unwrap();
        assert!((nf.evaluate(3.0).unwrap() - 4.5).abs() < 1e-8);
        assert!(nf.evaluate(11.0).is_err());
        assert!(matches!(nf.evaluate(10.5), Err(Error::Range(_))));
    }

    #[test]
    fn complementary_power_pairing() {
        // t^3/3 <-> t^q/q with q = 3/2.
        let nf = NF::power(3.0);
        let conj = nf.complementary();
        let q: f64 = 1.5;
        for i in 1..=50 {
            let t = 0.1 * i as f64;
            let expect = t.powf(q) / q;
            assert!((conj.evaluate(t).unwrap() - expect).abs() <= 1e-8 * (1.0 + expect));
        }
        // self-conjugate square
        let nf2 = NF::power(2.0);
        let conj2 = nf2.complementary();
        assert!((conj2.evaluate(1.7).unwrap() - nf2.evaluate(1.7).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn complementary_numeric_young_equality() {
        // F(t) = t ln(1+t): check F(t) + Fc(phi(t)) = t phi(t).
        let nf = NF::power_log(1.0);
        let conj = nf.complementary();
        for &t in &[0.5, 1.0, 4.0] {
            let phi = nf.density(t).unwrap();
            let lhs = nf.evaluate(t).unwrap() + conj.evaluate(phi).unwrap();
            let rhs = t * phi;
            assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()), "t={t}");
        }
    }

    #[test]
    fn double_conjugate_recovers_convex_closed_forms() {
        let grid = dyadic_grid(0.05_f64, 20.0, 60);
        // numeric route (no closed-form shortcut): conjugate of conjugate
        let nf = NF::power_log(1.0);
        let back = nf.complementary().complementary();
        for &t in &grid {
            let a = nf.evaluate(t).unwrap();
            let b = back.evaluate(t).unwrap();
            assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "t={t} {a} {b}");
        }
        let nf = NF::power(3.0);
        let back = nf.complementary().complementary();
        for &t in &grid {
            let a = nf.evaluate(t).unwrap();
            let b = back.evaluate(t).unwrap();
            assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn growth_report_power_is_exact() {
        let grid = dyadic_grid(1e-3_f64, 1e3, 200);
        let rep = NF::power(2.0).growth_report(&grid).unwrap();
        assert!(rep.delta2);
        assert!((rep.simonenko_lo - 2.0).abs() < 1e-12);
        assert!((rep.simonenko_hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn growth_report_exp_fails_doubling() {
        let grid = dyadic_grid(1e-3_f64, 1e3, 200);
        assert!(grid.iter().any(|&t| t >= 50.0));
        let rep = NF::exp_minus_one().growth_report(&grid).unwrap();
        assert!(!rep.delta2);
    }

    #[test]
    fn growth_report_power_log_has_both_classes() {
        let grid = dyadic_grid(1e-3_f64, 1e3, 200);
        let rep = NF::power_log(2.0).growth_report(&grid).unwrap();
        assert!(rep.delta2 && rep.delta_prime);
    }

    #[test]
    fn growth_report_rejects_bad_grid() {
        let nf = NF::power(2.0);
        assert!(nf.growth_report(&[]).is_err());
        assert!(nf.growth_report(&[-1.0, 1.0]).is_err());
        assert!(nf.growth_report(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn coercivity_constant_examples() {
        // square: conjugate equals itself so theta = h_min
        let nf = NF::power(2.0);
        assert!((nf.coercivity_constant(0.5).unwrap() - 0.5).abs() < 1e-12);

        // cubic: solve Fc(theta) = F(0.5) by an independent bisection oracle
        let nf = NF::power(3.0);
        let target = 0.5_f64.powi(3) / 3.0;
        let conj = |t: f64| t.powf(1.5) / 1.5;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if conj(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let theta = nf.coercivity_constant(0.5).unwrap();
        assert!((theta - oracle).abs() < 1e-10);

        // defining identity for a few kinds
        for nf in [NF::power(2.0), NF::power(3.0), NF::power_log(1.0)] {
            let theta = nf.coercivity_constant(0.5).unwrap();
            let lhs = nf.complementary().evaluate(theta).unwrap();
            let rhs = nf.evaluate(0.5).unwrap();
            assert!((lhs - rhs).abs() < 1e-10);
        }
        assert!(nf.coercivity_constant(1.5).is_err());
        assert!(nf.coercivity_constant(0.0).is_err());
    }

    #[test]
    fn axiom_chain_on_grid() {
        let grid = dyadic_grid(1e-3_f64, 1e3, 200);
        for nf in [NF::power(2.0), NF::power(3.0), NF::power_log(1.0)] {
            let rep = nf.check_axioms(&grid).unwrap();
            assert!(rep.all_n_function(), "{nf:?} {rep:?}");
        }
        // e^t - 1 is an N-function near infinity only: F(t)/t -> 1 at 0.
        let rep = NF::exp_minus_one().check_axioms(&grid).unwrap();
        assert!(rep.chain_lower && rep.young_chain && !rep.small_at_zero);
    }

    #[test]
    fn young_inequality_random_pairs() {
        // st <= F(s) + Fc(t), equality at t = phi(s).
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for nf in [NF::power(2.0), NF::power(3.0), NF::power_log(1.0)] {
            let conj = nf.complementary();
            for _ in 0..1000 {
                let s: f64 = rng.gen_range(1e-6..10.0);
                let t: f64 = rng.gen_range(1e-6..10.0);
                let lhs = s * t;
                let rhs = nf.evaluate(s).unwrap() + conj.evaluate(t).unwrap();
                assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
            }
            for i in 1..20 {
                let s = 0.5 * i as f64;
                let t = nf.density(s).unwrap();
                let lhs = s * t;
                let rhs = nf.evaluate(s).unwrap() + conj.evaluate(t).unwrap();
                assert!((lhs - rhs).abs() <= 1e-6 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn generic_scalar_smoke() {
        let nf = NFunction::<f32>::power(2.0);
        assert!((nf.evaluate(2.0).unwrap() - 2.0).abs() < 1e-6);
        let theta = nf.coercivity_constant(0.5).unwrap();
        assert!((theta - 0.5).abs() < 1e-5);
    }
}
