
use super::slices::low_mask;

/// One XOR constraint `⊕_{j ∈ mask} x_j = parity` over packed pair bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParityConstraint {
    pub mask: u64,
    pub parity: bool,
}

impl ParityConstraint {
    pub fn new(mask: u64, parity: bool) -> Self {
        ParityConstraint { mask, parity }
    }

    #[inline]
    pub fn satisfied_by(&self, x: u64) -> bool {
        ((x & self.mask).count_ones() & 1 == 1) == self.parity
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }
}

/// Draws `count` independent random parity constraints over `bits` bits.
/// Each bit joins a constraint with probability 1/2; parities are uniform.
pub fn draw_parity_constraints<R: rand::Rng + ?Sized>(
    bits: usize,
    count: usize,
    rng: &mut R,
) -> Vec<ParityConstraint> {
    let m = low_mask(bits);
    (0..count)
        .map(|_| {
            let mask = rng.random::<u64>() & m;
            let parity = rng.random::<bool>();
            ParityConstraint { mask, parity }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_constraints() {
        assert!(draw_parity_constraints(8, 0, &mut seeded(1)).is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = draw_parity_constraints(8, 3, &mut seeded(42));
        let b = draw_parity_constraints(8, 3, &mut seeded(42));
        assert_eq!(a, b);
        assert!(a.iter().all(|c| c.mask >> 8 == 0));
    }

    #[test]
    fn mean_subset_size() {
        let mut rng = seeded(7);
        let draws = draw_parity_constraints(8, 10_000, &mut rng);
        let mean = draws.iter().map(|c| c.len() as f64).sum::<f64>() / 10_000.0;
        assert!((mean - 4.0).abs() < 0.15, "mean {mean}");
        let ones = draws.iter().filter(|c| c.parity).count() as f64 / 10_000.0;
        assert!((ones - 0.5).abs() < 0.02);
    }

    #[test]
    fn satisfaction() {
        let c = ParityConstraint::new(0b011, false);
        assert!(c.satisfied_by(0b000));
        assert!(c.satisfied_by(0b111));
        assert!(!c.satisfied_by(0b001));
    }
}
