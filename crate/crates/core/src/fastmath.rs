//! Branch-free `exp` / `expm1` that LLVM can vectorize inside kernel-sum loops.
//!
//! Cody–Waite reduction `x = k ln2 + r`, |r| ≤ ln2/2, followed by a degree-13
//! Taylor polynomial (truncation < 5e-18 relative). Inputs are clamped to
//! [-708, 709]; below that range the result is ~1e-308 rather than 0.

const LOG2_E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
// 1.5 · 2^52: adding it rounds to an integer held in the low mantissa bits.
const ROUNDER: f64 = 6_755_399_441_055_744.0;

const INV_FACT: [f64; 14] = [
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362_880.0,
    1.0 / 3_628_800.0,
    1.0 / 39_916_800.0,
    1.0 / 479_001_600.0,
    1.0 / 6_227_020_800.0,
];

/// Returns `(2^k, q)` with `e^x = 2^k (1 + q)`.
#[inline(always)]
fn exp_parts(x: f64) -> (f64, f64) {
    let x = x.clamp(-708.0, 709.0);
    let t = x * LOG2_E + ROUNDER;
    let k = t - ROUNDER;
    let r = (-k).mul_add(LN2_LO, (-k).mul_add(LN2_HI, x));
    let mut p = INV_FACT[13];
    p = p.mul_add(r, INV_FACT[12]);
    p = p.mul_add(r, INV_FACT[11]);
    p = p.mul_add(r, INV_FACT[10]);
    p = p.mul_add(r, INV_FACT[9]);
    p = p.mul_add(r, INV_FACT[8]);
    p = p.mul_add(r, INV_FACT[7]);
    p = p.mul_add(r, INV_FACT[6]);
    p = p.mul_add(r, INV_FACT[5]);
    p = p.mul_add(r, INV_FACT[4]);
    p = p.mul_add(r, INV_FACT[3]);
    p = p.mul_add(r, INV_FACT[2]);
    p = p.mul_add(r, INV_FACT[1]);
    let q = p * r;
    let scale = f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
    (scale, q)
}

#[inline(always)]
pub(crate) fn exp(x: f64) -> f64 {
    let (s, q) = exp_parts(x);
    s + s * q
}

/// `e^x − 1` without cancellation near zero.
#[inline(always)]
pub(crate) fn exp_m1(x: f64) -> f64 {
    let (s, q) = exp_parts(x);
    s * q + (s - 1.0)
}
