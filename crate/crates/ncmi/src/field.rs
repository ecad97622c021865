//! Finite-field scalars used for coded-packet coefficients.
//!
//! Two fields back the two coding modes:
//!
//! * [`Gf256`] — GF(2^8) with reduction polynomial x^8+x^4+x^3+x+1 (0x11B),
//!   multiplication via log/antilog tables. This is the concrete coding mode:
//!   a coded packet is exactly its coefficient vector, and an unlucky
//!   dependent draw is a real event.
//! * [`Fp61`] — the prime field mod 2^61-1. This carries the idealized coding
//!   mode: innovation decisions are made by span inclusion, and the field only
//!   has to be large enough that stored generic vectors never collide by
//!   accident (probability ~ rank/2^61 per event).

use rand::Rng;
use std::fmt::Debug;
use std::hash::Hash;

pub trait Field:
    Copy + Clone + PartialEq + Eq + Debug + Hash + Send + Sync + 'static
{
    const ZERO: Self;
    const ONE: Self;

    fn add(self, rhs: Self) -> Self;
    fn sub(self, rhs: Self) -> Self;
    fn mul(self, rhs: Self) -> Self;
    /// Multiplicative inverse. Panics on zero.
    fn inv(self) -> Self;
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn sample_nonzero<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn is_zero(self) -> bool {
        self == Self::ZERO
    }
}

// ---------------------------------------------------------------------------
// GF(2^8)
// ---------------------------------------------------------------------------

/// Element of GF(2^8) under the 0x11B polynomial.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Default)]
pub struct Gf256(pub u8);

const GF256_POLY: u16 = 0x11B;

// exp[i] = g^i with generator g = 3; table doubled so mul can skip the mod 255.
const fn gf256_tables() -> ([u8; 512], [u8; 256]) {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        // multiply by 3 = x * 2 + x, reduced mod 0x11B
        let x2 = if x & 0x80 != 0 { (x << 1) ^ GF256_POLY } else { x << 1 };
        x = x2 ^ x;
        i += 1;
    }
    i = 255;
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    (exp, log)
}

const GF256_TABLES: ([u8; 512], [u8; 256]) = gf256_tables();
const GF256_EXP: [u8; 512] = GF256_TABLES.0;
const GF256_LOG: [u8; 256] = GF256_TABLES.1;

impl Debug for Gf256 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

impl Field for Gf256 {
    const ZERO: Self = Gf256(0);
    const ONE: Self = Gf256(1);

    fn add(self, rhs: Self) -> Self {
        Gf256(self.0 ^ rhs.0)
    }

    fn sub(self, rhs: Self) -> Self {
        Gf256(self.0 ^ rhs.0)
    }

    fn mul(self, rhs: Self) -> Self {
        if self.0 == 0 || rhs.0 == 0 {
            return Gf256(0);
        }
        let idx = GF256_LOG[self.0 as usize] as usize + GF256_LOG[rhs.0 as usize] as usize;
        Gf256(GF256_EXP[idx])
    }

    fn inv(self) -> Self {
        assert!(self.0 != 0, "inverse of zero in GF(256)");
        Gf256(GF256_EXP[255 - GF256_LOG[self.0 as usize] as usize])
    }

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Gf256(rng.gen())
    }

    fn sample_nonzero<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Gf256(rng.gen_range(1..=255))
    }
}

// ---------------------------------------------------------------------------
// F_p with p = 2^61 - 1
// ---------------------------------------------------------------------------

pub const P61: u64 = (1 << 61) - 1;

/// Element of the prime field mod 2^61-1, stored reduced.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Default)]
pub struct Fp61(pub u64);

impl Debug for Fp61 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[inline]
fn fold61(x: u128) -> u64 {
    let mut r = (x & P61 as u128) as u64 + (x >> 61) as u64;
    r = (r & P61) + (r >> 61);
    if r >= P61 {
        r - P61
    } else {
        r
    }
}

impl Field for Fp61 {
    const ZERO: Self = Fp61(0);
    const ONE: Self = Fp61(1);

    fn add(self, rhs: Self) -> Self {
        let s = self.0 + rhs.0;
        Fp61(if s >= P61 { s - P61 } else { s })
    }

    fn sub(self, rhs: Self) -> Self {
        Fp61(if self.0 >= rhs.0 {
            self.0 - rhs.0
        } else {
            self.0 + P61 - rhs.0
        })
    }

    fn mul(self, rhs: Self) -> Self {
        Fp61(fold61(self.0 as u128 * rhs.0 as u128))
    }

    fn inv(self) -> Self {
        assert!(self.0 != 0, "inverse of zero mod 2^61-1");
        // Fermat: a^(p-2)
        let mut base = self;
        let mut acc = Fp61::ONE;
        let mut e = P61 - 2;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            e >>= 1;
        }
        acc
    }

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Fp61(rng.gen_range(0..P61))
    }

    fn sample_nonzero<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Fp61(rng.gen_range(1..P61))
    }
}
