//! Halton low-discrepancy sequence: the seeded quasi-random driver for the
//! hypothesis validator. Consecutive points are well separated, so pairing
//! index 2i with 2i+1 yields deterministic, non-degenerate increments.

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical inverse of `index` in the given base, in (0, 1).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    out
}

/// `dim` coordinates of the Halton point at `index` (index 0 maps to the
/// origin, so callers should offset by at least 1).
pub fn halton_point(index: u64, dim: usize, out: &mut [f64]) {
    for (d, slot) in out.iter_mut().enumerate().take(dim) {
        *slot = radical_inverse(index, PRIMES[d]);
    }
}

/// Seeded stream: the seed offsets the start index deterministically.
pub struct HaltonStream {
    next: u64,
    dim: usize,
}

impl HaltonStream {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim <= PRIMES.len());
        HaltonStream {
            next: 1 + seed.wrapping_mul(1_000_003) % 0x0fff_ffff,
            dim,
        }
    }

    pub fn next_point(&mut self, out: &mut [f64]) {
        halton_point(self.next, self.dim, out);
        self.next += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_unit_cube() {
        let mut a = HaltonStream::new(42, 5);
        let mut b = HaltonStream::new(42, 5);
        let mut pa = [0.0; 5];
        let mut pb = [0.0; 5];
        for _ in 0..100 {
            a.next_point(&mut pa);
            b.next_point(&mut pb);
            assert_eq!(pa, pb);
            assert!(pa.iter().all(|&x| (0.0..1.0).contains(&x)));
        }
    }

    #[test]
    fn consecutive_pairs_are_separated() {
        let mut s = HaltonStream::new(0, 3);
        let mut prev = [0.0; 3];
        let mut cur = [0.0; 3];
        s.next_point(&mut prev);
        let mut min_gap = f64::INFINITY;
        for _ in 0..2000 {
            s.next_point(&mut cur);
            let gap: f64 = prev
                .iter()
                .zip(&cur)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            min_gap = min_gap.min(gap);
            prev = cur;
        }
        assert!(min_gap > 1e-3, "min consecutive gap {min_gap}");
    }
}
