// SPDX-License-Identifier: Apache-2.0

use num_traits::{PrimInt, Unsigned};

/// Machine word used as a bundle of independent simulation lanes.
pub trait LaneWord: PrimInt + Unsigned + Send + Sync + std::fmt::Debug + 'static {
    /// Patterns carried per word.
    const LANES: usize;

    #[inline]
    fn splat(b: bool) -> Self {
        if b {
            Self::max_value()
        } else {
            Self::zero()
        }
    }

    #[inline]
    fn lane(self, i: usize) -> bool {
        (self >> i) & Self::one() == Self::one()
    }

    #[inline]
    fn with_lane(self, i: usize, b: bool) -> Self {
        let bit = Self::one() << i;
        if b {
            self | bit
        } else {
            self & !bit
        }
    }

    /// Word with the low `n` lanes set.
    #[inline]
    fn low_mask(n: usize) -> Self {
        if n >= Self::LANES {
            Self::max_value()
        } else {
            (Self::one() << n) - Self::one()
        }
    }

    /// Truncating conversion from a random 64-bit draw (two draws for u128).
    fn from_random(lo: u64, hi: u64) -> Self;
}

macro_rules! lane_word {
    ($t:ty, $bits:expr) => {
        impl LaneWord for $t {
            const LANES: usize = $bits;

            #[inline]
            fn from_random(lo: u64, hi: u64) -> Self {
                let wide = ((hi as u128) << 64) | lo as u128;
                wide as $t
            }
        }
    };
}

lane_word!(u8, 8);
lane_word!(u16, 16);
lane_word!(u32, 32);
lane_word!(u64, 64);
lane_word!(u128, 128);
