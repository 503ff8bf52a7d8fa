//! 63-bit Morton (z-order) codes, 21 bits per axis.
//!
//! Bit `i` of x lands at bit `3i`, y at `3i + 1`, z at `3i + 2`.

use crate::error::{Error, Result};

pub const BITS_PER_AXIS: u32 = 21;
pub const MAX_COORD: u32 = 1 << BITS_PER_AXIS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MortonCode(pub u64);

impl MortonCode {
    pub fn encode(x: u32, y: u32, z: u32) -> Result<Self> {
        for v in [x, y, z] {
            if v >= MAX_COORD {
                return Err(Error::CoordinateOutOfRange { value: v as i64 });
            }
        }
        Ok(Self::encode_unchecked(x, y, z))
    }

    /// Caller guarantees every coordinate is below `2^21`.
    #[inline]
    pub fn encode_unchecked(x: u32, y: u32, z: u32) -> Self {
        MortonCode(spread(x) | (spread(y) << 1) | (spread(z) << 2))
    }

    #[inline]
    pub fn decode(self) -> (u32, u32, u32) {
        (
            compact(self.0),
            compact(self.0 >> 1),
            compact(self.0 >> 2),
        )
    }

    #[inline]
    pub fn parent(self) -> MortonCode {
        MortonCode(self.0 >> 3)
    }

    #[inline]
    pub fn child(self, octant: u8) -> MortonCode {
        MortonCode((self.0 << 3) | octant as u64)
    }
}

// Magic-mask bit spreading, 21 bits into every third bit of 63.
#[inline]
fn spread(v: u32) -> u64 {
    let mut x = v as u64 & 0x1f_ffff;
    x = (x | (x << 32)) & 0x001f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x001f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

#[inline]
fn compact(v: u64) -> u32 {
    let mut x = v & 0x1249_2492_4924_9249;
    x = (x | (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x >> 8)) & 0x001f_0000_ff00_00ff;
    x = (x | (x >> 16)) & 0x001f_0000_0000_ffff;
    x = (x | (x >> 32)) & 0x1f_ffff;
    x as u32
}

pub fn morton_encode(x: u32, y: u32, z: u32) -> Result<MortonCode> {
    MortonCode::encode(x, y, z)
}

pub fn morton_decode(code: MortonCode) -> (u32, u32, u32) {
    code.decode()
}
