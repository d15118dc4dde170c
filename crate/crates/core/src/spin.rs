//! Bit-packed spin configurations.

use rand::Rng;

/// A register of spins, each valued +1 or -1, packed into one integer.
///
/// Bit value 0 encodes spin +1 and bit value 1 encodes spin -1. Site `i`
/// (0-based) occupies bit `len - 1 - i`, so the packed integer doubles as
/// the row index of the configuration in a dense `2^len` basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    bits: u64,
    len: u32,
}

impl SpinConfig {
    pub const MAX_SITES: usize = 63;

    /// All spins +1.
    pub fn all_up(len: usize) -> Self {
        assert!(len >= 1 && len <= Self::MAX_SITES);
        Self { bits: 0, len: len as u32 }
    }

    /// Configuration for a dense basis index.
    pub fn from_index(index: usize, len: usize) -> Self {
        assert!(len >= 1 && len <= Self::MAX_SITES);
        debug_assert!(index < (1usize << len));
        Self { bits: index as u64, len: len as u32 }
    }

    /// Uniformly random configuration.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        assert!(len >= 1 && len <= Self::MAX_SITES);
        let mask = (1u64 << len) - 1;
        Self { bits: rng.random::<u64>() & mask, len: len as u32 }
    }

    /// Dense basis index of this configuration.
    #[inline]
    pub fn index(&self) -> usize {
        self.bits as usize
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn bit(&self, site: usize) -> u64 {
        debug_assert!(site < self.len());
        1u64 << (self.len() - 1 - site)
    }

    /// Spin value at `site`: +1.0 or -1.0.
    #[inline]
    pub fn spin(&self, site: usize) -> f64 {
        if self.bits & self.bit(site) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Flip the spin at `site` in place.
    #[inline]
    pub fn flip(&mut self, site: usize) {
        self.bits ^= self.bit(site);
    }

    /// A copy with the spin at `site` flipped.
    #[inline]
    pub fn flipped(mut self, site: usize) -> Self {
        self.flip(site);
        self
    }

    /// Spin values in site order.
    pub fn spins(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.spin(i))
    }
}

impl std::fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.len() {
            write!(f, "{}", if self.spin(i) > 0.0 { '0' } else { '1' })?;
        }
        Ok(())
    }
}
