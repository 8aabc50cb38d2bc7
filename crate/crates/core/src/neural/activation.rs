//! Slice-wise gate activations.
//!
//! `exp` is evaluated branch-free so the loops vectorize: Cody-Waite
//! reduction `x = k ln 2 + r` with `|r| <= ln 2 / 2`, a degree-13 Taylor
//! polynomial in `r` (truncation below 2e-17 relative) and a scale by `2^k`
//! assembled from exponent bits. Results agree with the platform `exp` to a
//! few ulp.

const LOG2E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 0.693_147_180_369_123_8;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
/// 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits.
const ROUNDER: f64 = 6_755_399_441_055_744.0;
const MAX_ARG: f64 = 709.0;
const MIN_ARG: f64 = -708.0;

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

#[inline(always)]
fn exp_kernel(x: f64) -> f64 {
    let x = x.clamp(MIN_ARG, MAX_ARG);
    let t = x * LOG2E + ROUNDER;
    let k = t - ROUNDER;
    // k * LN2_HI is exact: LN2_HI carries only 32 significant bits
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = INV_FACT[13];
    for c in INV_FACT[..13].iter().rev() {
        p = p * r + c;
    }
    let ki = t.to_bits().wrapping_sub(ROUNDER.to_bits());
    let scale = f64::from_bits(ki.wrapping_add(1023) << 52);
    p * scale
}

#[inline(always)]
fn sigmoid_kernel(x: f64) -> f64 {
    1.0 / (1.0 + exp_kernel(-x))
}

#[inline(always)]
fn tanh_kernel(x: f64) -> f64 {
    // 2 sigm(2x) - 1, stable at both tails
    2.0 / (1.0 + exp_kernel(-2.0 * x)) - 1.0
}

// Each public entry point runs the same inlined loop, compiled a second time
// with AVX2 and FMA enabled when the CPU offers them.
macro_rules! elementwise {
    ($(#[$doc:meta])* $name:ident, $wide:ident, ($($arg:ident: $ty:ty),*), $body:block) => {
        $(#[$doc])*
        pub(crate) fn $name($($arg: $ty),*) {
            #[cfg(target_arch = "x86_64")]
            if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
                // SAFETY: both target features were detected at runtime.
                return unsafe { $wide($($arg),*) };
            }
            $body
        }

        #[cfg(target_arch = "x86_64")]
        #[target_feature(enable = "avx2,fma")]
        unsafe fn $wide($($arg: $ty),*) $body
    };
}

elementwise!(sigmoid_in_place, sigmoid_avx2, (xs: &mut [f64]), {
    for x in xs {
        *x = sigmoid_kernel(*x);
    }
});

elementwise!(tanh_in_place, tanh_avx2, (xs: &mut [f64]), {
    for x in xs {
        *x = tanh_kernel(*x);
    }
});

elementwise!(
    /// `out = tanh(xs)` elementwise.
    tanh_into, tanh_into_avx2, (xs: &[f64], out: &mut [f64]), {
    for (o, x) in out.iter_mut().zip(xs) {
        *o = tanh_kernel(*x);
    }
});
