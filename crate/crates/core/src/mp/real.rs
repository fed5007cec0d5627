//! Fixed-capacity binary floating point with a runtime precision.
//!
//! A [`BigReal`] stores a normalized mantissa of `limbs` 64-bit words and a
//! binary exponent. The value is `±0.m × 2^exp` with the top bit of the most
//! significant limb set. The capacity is fixed so values are `Copy` and
//! arithmetic never allocates; the working precision is `64 × limbs` bits.
//!
//! Addition, subtraction, multiplication and division round to nearest
//! (ties to even). The result of a binary operation carries the larger of the
//! two operand precisions.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// Maximum number of mantissa limbs, including the guard limbs used
/// internally by the special functions.
pub const MAX_LIMBS: usize = 20;

/// Largest precision accepted from callers, in bits.
pub const MAX_PRECISION_BITS: u32 = 1024;

/// Default working precision in bits.
pub const DEFAULT_PRECISION_BITS: u32 = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Class {
    Zero,
    Normal,
    Nan,
}

/// Arbitrary-precision real number.
#[derive(Clone, Copy)]
pub struct BigReal {
    class: Class,
    neg: bool,
    limbs: u8,
    exp: i64,
    mant: [u64; MAX_LIMBS],
}

/// Number of limbs needed to hold `bits` of precision.
pub fn limbs_for_bits(bits: u32) -> usize {
    (bits.max(1) as usize).div_ceil(64).min(MAX_LIMBS)
}

impl BigReal {
    /// Zero at the given precision (bits, rounded up to whole limbs).
    pub fn zero(bits: u32) -> Self {
        Self::zero_limbs(limbs_for_bits(bits))
    }

    pub(crate) fn zero_limbs(limbs: usize) -> Self {
        BigReal {
            class: Class::Zero,
            neg: false,
            limbs: limbs.clamp(1, MAX_LIMBS) as u8,
            exp: 0,
            mant: [0; MAX_LIMBS],
        }
    }

    pub(crate) fn nan_limbs(limbs: usize) -> Self {
        BigReal {
            class: Class::Nan,
            ..Self::zero_limbs(limbs)
        }
    }

    /// Quiet NaN at the given precision.
    pub fn nan(bits: u32) -> Self {
        Self::nan_limbs(limbs_for_bits(bits))
    }

    pub fn one(bits: u32) -> Self {
        Self::from_u64_limbs(1, limbs_for_bits(bits))
    }

    pub(crate) fn one_limbs(limbs: usize) -> Self {
        Self::from_u64_limbs(1, limbs)
    }

    /// Exact conversion from a double (NaN and infinities become NaN).
    pub fn from_f64(v: f64, bits: u32) -> Self {
        Self::from_f64_limbs(v, limbs_for_bits(bits))
    }

    pub(crate) fn from_f64_limbs(v: f64, limbs: usize) -> Self {
        if !v.is_finite() {
            return Self::nan_limbs(limbs);
        }
        if v == 0.0 {
            return Self::zero_limbs(limbs);
        }
        let bits = v.to_bits();
        let neg = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if biased == 0 {
            (frac, -1074i64)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        // v = m × 2^e with m < 2^53
        let lz = m.leading_zeros() as i64;
        let top = m << lz;
        let mut r = Self::zero_limbs(limbs);
        let n = r.limbs as usize;
        r.class = Class::Normal;
        r.neg = neg;
        r.mant[n - 1] = top;
        r.exp = e + 64 - lz;
        r
    }

    pub fn from_i64(v: i64, bits: u32) -> Self {
        Self::from_i64_limbs(v, limbs_for_bits(bits))
    }

    pub(crate) fn from_i64_limbs(v: i64, limbs: usize) -> Self {
        let mut r = Self::from_u64_limbs(v.unsigned_abs(), limbs);
        if v < 0 {
            r.neg = true;
        }
        r
    }

    pub(crate) fn from_u64_limbs(v: u64, limbs: usize) -> Self {
        let mut r = Self::zero_limbs(limbs);
        if v == 0 {
            return r;
        }
        let lz = v.leading_zeros() as i64;
        let n = r.limbs as usize;
        r.class = Class::Normal;
        r.mant[n - 1] = v << lz;
        r.exp = 64 - lz;
        r
    }

    /// Ratio of two integers rounded to the given precision.
    pub fn from_ratio(num: i64, den: i64, bits: u32) -> Self {
        let l = limbs_for_bits(bits);
        Self::from_i64_limbs(num, l) / Self::from_i64_limbs(den, l)
    }

    /// Parses a decimal literal such as `-1.25e-40`.
    pub fn parse_decimal(s: &str, bits: u32) -> Option<Self> {
        let limbs = limbs_for_bits(bits);
        let work = (limbs + 1).min(MAX_LIMBS);
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (mantissa, exp10) = match body.find(['e', 'E']) {
            Some(pos) => (&body[..pos], body[pos + 1..].parse::<i64>().ok()?),
            None => (body, 0),
        };
        let mut acc = Self::zero_limbs(work);
        let ten = Self::from_u64_limbs(10, work);
        let mut frac_digits = 0i64;
        let mut seen_dot = false;
        let mut any = false;
        for ch in mantissa.chars() {
            match ch {
                '.' if !seen_dot => seen_dot = true,
                '0'..='9' => {
                    any = true;
                    acc = acc * ten + Self::from_u64_limbs(ch as u64 - '0' as u64, work);
                    if seen_dot {
                        frac_digits += 1;
                    }
                }
                '_' => {}
                _ => return None,
            }
        }
        if !any {
            return None;
        }
        let e = exp10 - frac_digits;
        let scaled = if e >= 0 {
            acc * ten.powi(e as u64)
        } else {
            acc / ten.powi((-e) as u64)
        };
        let mut r = scaled.with_limbs(limbs);
        if neg {
            r = -r;
        }
        Some(r)
    }

    /// Zero at this value's precision.
    pub fn zero_like(&self) -> Self {
        Self::zero_limbs(self.limbs())
    }

    /// One at this value's precision.
    pub fn one_like(&self) -> Self {
        Self::one_limbs(self.limbs())
    }

    /// A double converted at this value's precision.
    pub fn from_f64_like(&self, v: f64) -> Self {
        Self::from_f64_limbs(v, self.limbs())
    }

    /// Precision in bits.
    pub fn precision(&self) -> u32 {
        self.limbs as u32 * 64
    }

    pub(crate) fn limbs(&self) -> usize {
        self.limbs as usize
    }

    pub fn is_zero(&self) -> bool {
        self.class == Class::Zero
    }

    pub fn is_nan(&self) -> bool {
        self.class == Class::Nan
    }

    pub fn is_finite(&self) -> bool {
        self.class != Class::Nan
    }

    pub fn is_negative(&self) -> bool {
        self.class == Class::Normal && self.neg
    }

    pub fn is_positive(&self) -> bool {
        self.class == Class::Normal && !self.neg
    }

    /// Binary exponent `e` with `2^(e-1) <= |x| < 2^e`; `None` for zero/NaN.
    pub fn exponent(&self) -> Option<i64> {
        (self.class == Class::Normal).then_some(self.exp)
    }

    pub fn abs(&self) -> Self {
        let mut r = *self;
        r.neg = false;
        r
    }

    /// Same value rounded or zero-extended to `limbs` limbs.
    pub(crate) fn with_limbs(&self, limbs: usize) -> Self {
        let limbs = limbs.clamp(1, MAX_LIMBS);
        let n = self.limbs as usize;
        if limbs == n {
            return *self;
        }
        let mut r = *self;
        r.limbs = limbs as u8;
        if self.class != Class::Normal {
            r.mant = [0; MAX_LIMBS];
            return r;
        }
        if limbs > n {
            let mut m = [0u64; MAX_LIMBS];
            m[limbs - n..limbs].copy_from_slice(&self.mant[..n]);
            r.mant = m;
            r
        } else {
            let (m, carry) = round_buffer(&self.mant[..n], limbs, false);
            r.mant = m;
            r.exp += carry;
            r
        }
    }

    /// Same value at the given precision in bits.
    pub fn with_precision(&self, bits: u32) -> Self {
        self.with_limbs(limbs_for_bits(bits))
    }

    /// Round to nearest double.
    pub fn to_f64(&self) -> f64 {
        match self.class {
            Class::Zero => return 0.0,
            Class::Nan => return f64::NAN,
            Class::Normal => {}
        }
        let n = self.limbs as usize;
        let mut top = self.mant[n - 1];
        if self.mant[..n - 1].iter().any(|&w| w != 0) {
            top |= 1;
        }
        // top is in [2^63, 2^64): value = top × 2^(exp-64)
        let f = top as f64; // rounds to 53 bits, ties to even; the sticky bit breaks ties
        let v = ldexp(f, self.exp - 64);
        if self.neg {
            -v
        } else {
            v
        }
    }

    /// Unit roundoff `2^(1-p)` at this precision.
    pub fn epsilon(&self) -> Self {
        let mut r = Self::one_limbs(self.limbs as usize);
        r.exp = 1 - self.precision() as i64 + 1;
        r
    }

    /// Multiply by `2^k` exactly.
    pub fn mul_pow2(&self, k: i64) -> Self {
        let mut r = *self;
        if r.class == Class::Normal {
            r.exp += k;
        }
        r
    }

    /// Integer power by repeated squaring.
    pub fn powi(&self, mut e: u64) -> Self {
        let mut base = *self;
        let mut acc = Self::one_limbs(self.limbs as usize);
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    /// Division by a small positive integer.
    pub fn div_u64(&self, d: u64) -> Self {
        assert!(d != 0, "division by zero");
        if self.class != Class::Normal {
            return *self;
        }
        let n = self.limbs as usize;
        // Dividend mantissa followed by one extra limb of quotient bits.
        let mut q = [0u64; MAX_LIMBS + 2];
        let mut rem: u128 = 0;
        for i in (0..n).rev() {
            let cur = (rem << 64) | self.mant[i] as u128;
            q[i + 2] = (cur / d as u128) as u64;
            rem = cur % d as u128;
        }
        for i in (0..2).rev() {
            let cur = rem << 64;
            q[i] = (cur / d as u128) as u64;
            rem = cur % d as u128;
        }
        let sticky = rem != 0;
        let mut r = *self;
        let (m, shift) = normalize_and_round(&mut q[..n + 2], n, sticky);
        r.mant = m;
        r.exp = self.exp + shift;
        r
    }

    /// Floor to an integer value (exact).
    pub fn floor(&self) -> Self {
        if self.class != Class::Normal {
            return *self;
        }
        let n = self.limbs as usize;
        let total = 64 * n as i64;
        if self.exp <= 0 {
            return if self.neg {
                -Self::one_limbs(n)
            } else {
                Self::zero_limbs(n)
            };
        }
        if self.exp >= total {
            return *self;
        }
        let frac_bits = (total - self.exp) as usize;
        let mut r = *self;
        let mut dropped = false;
        for (i, w) in r.mant[..n].iter_mut().enumerate() {
            let lo = i * 64;
            if lo + 64 <= frac_bits {
                dropped |= *w != 0;
                *w = 0;
            } else if lo < frac_bits {
                let k = frac_bits - lo;
                let mask = (1u64 << k) - 1;
                dropped |= *w & mask != 0;
                *w &= !mask;
            }
        }
        if self.neg && dropped {
            r = r - Self::one_limbs(n);
        }
        r
    }

    /// Nearest integer as i64 (saturating); for argument reduction.
    pub fn round_to_i64(&self) -> i64 {
        let half = Self::from_f64_limbs(0.5, self.limbs as usize);
        let f = (*self + half).floor();
        let v = f.to_f64();
        if v.is_nan() {
            0
        } else {
            v.clamp(i64::MIN as f64, i64::MAX as f64) as i64
        }
    }

    pub fn sign_f64(&self) -> f64 {
        match self.class {
            Class::Normal if self.neg => -1.0,
            Class::Normal => 1.0,
            _ => 0.0,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_sci_string(&self, digits: usize) -> String {
        match self.class {
            Class::Zero => return "0".to_string(),
            Class::Nan => return "NaN".to_string(),
            Class::Normal => {}
        }
        let digits = digits.max(1);
        let work = (self.limbs as usize + 1).min(MAX_LIMBS);
        let x = self.abs().with_limbs(work);
        let ten = Self::from_u64_limbs(10, work);
        // Estimate decimal exponent from the binary one.
        let mut e10 = ((self.exp - 1) as f64 * std::f64::consts::LOG10_2).floor() as i64;
        let scale = |e: i64| {
            if e >= 0 {
                x / ten.powi(e as u64)
            } else {
                x * ten.powi((-e) as u64)
            }
        };
        let mut y = scale(e10);
        let one = Self::one_limbs(work);
        while y >= ten {
            e10 += 1;
            y = scale(e10);
        }
        while y < one {
            e10 -= 1;
            y = scale(e10);
        }
        let mut out = Vec::with_capacity(digits + 1);
        for _ in 0..digits + 1 {
            let d = y.floor();
            let dv = d.to_f64() as u8;
            out.push(dv.min(9));
            y = (y - d) * ten;
        }
        // round the last kept digit
        if out[digits] >= 5 {
            let mut i = digits;
            loop {
                if i == 0 {
                    out.insert(0, 1);
                    e10 += 1;
                    break;
                }
                i -= 1;
                if out[i] == 9 {
                    out[i] = 0;
                } else {
                    out[i] += 1;
                    break;
                }
            }
        }
        out.truncate(digits);
        let mut s = String::new();
        if self.neg {
            s.push('-');
        }
        s.push((b'0' + out[0]) as char);
        if digits > 1 {
            s.push('.');
            for d in &out[1..] {
                s.push((b'0' + d) as char);
            }
        }
        s.push_str(&format!("e{e10}"));
        s
    }

    fn cmp_abs(&self, other: &Self) -> Ordering {
        match (self.class, other.class) {
            (Class::Zero, Class::Zero) => return Ordering::Equal,
            (Class::Zero, _) => return Ordering::Less,
            (_, Class::Zero) => return Ordering::Greater,
            _ => {}
        }
        match self.exp.cmp(&other.exp) {
            Ordering::Equal => {}
            o => return o,
        }
        let na = self.limbs as usize;
        let nb = other.limbs as usize;
        let n = na.max(nb);
        for k in 0..n {
            let a = if k < na { self.mant[na - 1 - k] } else { 0 };
            let b = if k < nb { other.mant[nb - 1 - k] } else { 0 };
            match a.cmp(&b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }

    /// Bitwise identity (same class, sign, exponent, mantissa and precision).
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.class == other.class
            && self.limbs == other.limbs
            && (self.class != Class::Normal
                || (self.neg == other.neg
                    && self.exp == other.exp
                    && self.mant[..self.limbs as usize] == other.mant[..other.limbs as usize]))
    }
}

/// Scale a double by `2^e` without intermediate overflow.
fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

/// Round a normalized little-endian buffer (top bit of the last limb set) to
/// its top `n` limbs. Returns the mantissa and the exponent increment (0 or 1).
fn round_buffer(buf: &[u64], n: usize, sticky: bool) -> ([u64; MAX_LIMBS], i64) {
    let len = buf.len();
    debug_assert!(len >= n);
    let mut out = [0u64; MAX_LIMBS];
    out[..n].copy_from_slice(&buf[len - n..]);
    if len == n {
        return (out, 0);
    }
    let low = &buf[..len - n];
    let guard = low[low.len() - 1] >> 63 == 1;
    let rest = sticky || low[low.len() - 1] & (u64::MAX >> 1) != 0 || low[..low.len() - 1].iter().any(|&w| w != 0);
    let round_up = guard && (rest || out[0] & 1 == 1);
    if round_up {
        for w in out[..n].iter_mut() {
            let (v, c) = w.overflowing_add(1);
            *w = v;
            if !c {
                return (out, 0);
            }
        }
        // overflowed to zero: value is exactly 2^(64n)
        out[n - 1] = 1u64 << 63;
        return (out, 1);
    }
    (out, 0)
}

/// Normalize a buffer (shift left so the top bit is set) and round to `n`
/// limbs. Returns the mantissa and the exponent adjustment relative to the
/// buffer's nominal exponent.
fn normalize_and_round(buf: &mut [u64], n: usize, sticky: bool) -> ([u64; MAX_LIMBS], i64) {
    let len = buf.len();
    let mut lz = 0i64;
    let mut first = len;
    for i in (0..len).rev() {
        if buf[i] != 0 {
            first = i;
            break;
        }
    }
    if first == len {
        return ([0; MAX_LIMBS], i64::MIN);
    }
    let limb_shift = len - 1 - first;
    if limb_shift > 0 {
        for i in (0..len).rev() {
            buf[i] = if i >= limb_shift { buf[i - limb_shift] } else { 0 };
        }
        lz += 64 * limb_shift as i64;
    }
    let bit_shift = buf[len - 1].leading_zeros();
    if bit_shift > 0 {
        for i in (1..len).rev() {
            buf[i] = (buf[i] << bit_shift) | (buf[i - 1] >> (64 - bit_shift));
        }
        buf[0] <<= bit_shift;
        lz += bit_shift as i64;
    }
    let (m, carry) = round_buffer(buf, n, sticky);
    (m, carry - lz)
}

/// Shift `buf` right by `shift` bits in place, returning whether any nonzero
/// bits were shifted out.
fn shift_right_sticky(buf: &mut [u64], shift: u64) -> bool {
    let len = buf.len();
    let limb_shift = (shift / 64) as usize;
    let bit_shift = (shift % 64) as u32;
    let mut sticky = false;
    if limb_shift >= len {
        sticky = buf.iter().any(|&w| w != 0);
        buf.iter_mut().for_each(|w| *w = 0);
        return sticky;
    }
    if limb_shift > 0 {
        sticky |= buf[..limb_shift].iter().any(|&w| w != 0);
        for i in 0..len {
            buf[i] = if i + limb_shift < len { buf[i + limb_shift] } else { 0 };
        }
    }
    if bit_shift > 0 {
        sticky |= buf[0] & ((1u64 << bit_shift) - 1) != 0;
        for i in 0..len {
            let hi = if i + 1 < len { buf[i + 1] << (64 - bit_shift) } else { 0 };
            buf[i] = (buf[i] >> bit_shift) | hi;
        }
    }
    sticky
}

/// |a| + |b| with the sign of `a`.
fn add_magnitudes(a: &BigReal, b: &BigReal, n: usize) -> BigReal {
    let (a, b) = if a.exp >= b.exp { (a, b) } else { (b, a) };
    let w = n + 2;
    let shift = (a.exp - b.exp) as u64;
    let na = a.limbs as usize;
    let nb = b.limbs as usize;
    if shift > 64 * w as u64 + 64 {
        let mut r = a.with_limbs(n);
        r.neg = a.neg;
        return r;
    }
    let mut x = [0u64; MAX_LIMBS + 3];
    let mut y = [0u64; MAX_LIMBS + 3];
    x[w - na..w].copy_from_slice(&a.mant[..na]);
    // b needs room for its full mantissa below the guard limbs
    y[w - nb..w].copy_from_slice(&b.mant[..nb]);
    let sticky = shift_right_sticky(&mut y[..w], shift);
    let mut carry = 0u64;
    for i in 0..w {
        let (s1, c1) = x[i].overflowing_add(y[i]);
        let (s2, c2) = s1.overflowing_add(carry);
        x[i] = s2;
        carry = (c1 as u64) + (c2 as u64);
    }
    let mut exp = a.exp;
    let mut sticky = sticky;
    if carry != 0 {
        sticky |= x[0] & 1 != 0;
        for i in 0..w {
            let hi = if i + 1 < w { x[i + 1] << 63 } else { 1u64 << 63 };
            x[i] = (x[i] >> 1) | hi;
        }
        exp += 1;
    }
    let (m, inc) = round_buffer(&x[..w], n, sticky);
    BigReal {
        class: Class::Normal,
        neg: a.neg,
        limbs: n as u8,
        exp: exp + inc,
        mant: m,
    }
}

/// |a| - |b| assuming |a| > |b|, with the sign of `a`.
fn sub_magnitudes(a: &BigReal, b: &BigReal, n: usize) -> BigReal {
    let w = n + 2;
    let shift = (a.exp - b.exp) as u64;
    let na = a.limbs as usize;
    let nb = b.limbs as usize;
    if shift > 64 * w as u64 + 64 {
        return a.with_limbs(n);
    }
    let mut x = [0u64; MAX_LIMBS + 3];
    let mut y = [0u64; MAX_LIMBS + 3];
    x[w - na..w].copy_from_slice(&a.mant[..na]);
    y[w - nb..w].copy_from_slice(&b.mant[..nb]);
    let sticky = shift_right_sticky(&mut y[..w], shift);
    let mut borrow = 0u64;
    for i in 0..w {
        let (d1, b1) = x[i].overflowing_sub(y[i]);
        let (d2, b2) = d1.overflowing_sub(borrow);
        x[i] = d2;
        borrow = (b1 as u64) + (b2 as u64);
    }
    if sticky {
        // the true subtrahend is slightly larger
        for wd in x[..w].iter_mut() {
            let (v, b) = wd.overflowing_sub(1);
            *wd = v;
            if !b {
                break;
            }
        }
    }
    let (m, adj) = normalize_and_round(&mut x[..w], n, sticky);
    if adj == i64::MIN {
        return BigReal::zero_limbs(n);
    }
    BigReal {
        class: Class::Normal,
        neg: a.neg,
        limbs: n as u8,
        exp: a.exp + adj,
        mant: m,
    }
}

fn add_impl(a: &BigReal, b: &BigReal) -> BigReal {
    let n = a.limbs.max(b.limbs) as usize;
    match (a.class, b.class) {
        (Class::Nan, _) | (_, Class::Nan) => return BigReal::nan_limbs(n),
        (Class::Zero, _) => return b.with_limbs(n),
        (_, Class::Zero) => return a.with_limbs(n),
        _ => {}
    }
    if a.neg == b.neg {
        add_magnitudes(a, b, n)
    } else {
        match a.cmp_abs(b) {
            Ordering::Equal => BigReal::zero_limbs(n),
            Ordering::Greater => sub_magnitudes(a, b, n),
            Ordering::Less => sub_magnitudes(b, a, n),
        }
    }
}

fn mul_impl(a: &BigReal, b: &BigReal) -> BigReal {
    let n = a.limbs.max(b.limbs) as usize;
    match (a.class, b.class) {
        (Class::Nan, _) | (_, Class::Nan) => return BigReal::nan_limbs(n),
        (Class::Zero, _) | (_, Class::Zero) => return BigReal::zero_limbs(n),
        _ => {}
    }
    let na = a.limbs as usize;
    let nb = b.limbs as usize;
    let mut p = [0u64; 2 * MAX_LIMBS];
    for i in 0..na {
        let ai = a.mant[i] as u128;
        if ai == 0 {
            continue;
        }
        let mut carry: u128 = 0;
        for j in 0..nb {
            let t = ai * b.mant[j] as u128 + p[i + j] as u128 + carry;
            p[i + j] = t as u64;
            carry = t >> 64;
        }
        p[i + nb] = carry as u64;
    }
    let len = na + nb;
    let mut exp = a.exp + b.exp;
    if p[len - 1] >> 63 == 0 {
        for i in (1..len).rev() {
            p[i] = (p[i] << 1) | (p[i - 1] >> 63);
        }
        p[0] <<= 1;
        exp -= 1;
    }
    let (m, inc) = round_buffer(&p[..len], n, false);
    BigReal {
        class: Class::Normal,
        neg: a.neg != b.neg,
        limbs: n as u8,
        exp: exp + inc,
        mant: m,
    }
}

/// Schoolbook long division (Knuth, algorithm D) on normalized mantissas.
fn div_impl(a: &BigReal, b: &BigReal) -> BigReal {
    let n = a.limbs.max(b.limbs) as usize;
    match (a.class, b.class) {
        (Class::Nan, _) | (_, Class::Nan) | (_, Class::Zero) => return BigReal::nan_limbs(n),
        (Class::Zero, _) => return BigReal::zero_limbs(n),
        _ => {}
    }
    let na = a.limbs as usize;
    let nb = b.limbs as usize;
    let v = &b.mant[..nb];
    // dividend: a's mantissa padded to n limbs, times B^(nb+1)
    let ulen = n + nb + 1;
    let mut u = [0u64; 3 * MAX_LIMBS + 2];
    u[ulen - na..ulen].copy_from_slice(&a.mant[..na]);
    // u[ulen] = 0 is the extra top limb
    let qlen = ulen - nb + 1;
    let mut q = [0u64; 2 * MAX_LIMBS + 2];
    let sticky;
    if nb == 1 {
        let d = v[0] as u128;
        let mut rem: u128 = 0;
        for i in (0..=ulen).rev() {
            let cur = (rem << 64) | u[i] as u128;
            if i < qlen {
                q[i] = (cur / d) as u64;
            }
            rem = cur % d;
        }
        sticky = rem != 0;
    } else {
        let vtop = v[nb - 1] as u128;
        let vnext = v[nb - 2] as u128;
        for j in (0..qlen).rev() {
            let num = ((u[j + nb] as u128) << 64) | u[j + nb - 1] as u128;
            let mut qhat = num / vtop;
            let mut rhat = num % vtop;
            while qhat >> 64 != 0 || qhat * vnext > ((rhat << 64) | u[j + nb - 2] as u128) {
                qhat -= 1;
                rhat += vtop;
                if rhat >> 64 != 0 {
                    break;
                }
            }
            // u[j..j+nb+1] -= qhat * v
            let mut borrow: u64 = 0;
            let mut carry: u128 = 0;
            for i in 0..nb {
                let p = qhat * v[i] as u128 + carry;
                carry = p >> 64;
                let (d1, b1) = u[i + j].overflowing_sub(p as u64);
                let (d2, b2) = d1.overflowing_sub(borrow);
                u[i + j] = d2;
                borrow = (b1 as u64) + (b2 as u64);
            }
            let (d1, b1) = u[j + nb].overflowing_sub(carry as u64);
            let (d2, b2) = d1.overflowing_sub(borrow);
            u[j + nb] = d2;
            if b1 || b2 {
                qhat -= 1;
                let mut c = 0u64;
                for i in 0..nb {
                    let (s1, c1) = u[i + j].overflowing_add(v[i]);
                    let (s2, c2) = s1.overflowing_add(c);
                    u[i + j] = s2;
                    c = (c1 as u64) + (c2 as u64);
                }
                u[j + nb] = u[j + nb].wrapping_add(c);
            }
            q[j] = qhat as u64;
        }
        sticky = u[..nb].iter().any(|&w| w != 0);
    }
    let (m, adj) = normalize_and_round(&mut q[..qlen], n, sticky);
    // q has qlen = n+2 limbs and represents 0.q × 2^(64 + ea - eb)
    BigReal {
        class: Class::Normal,
        neg: a.neg != b.neg,
        limbs: n as u8,
        exp: a.exp - b.exp + 64 + adj,
        mant: m,
    }
}

impl Add for BigReal {
    type Output = BigReal;
    #[inline]
    fn add(self, rhs: BigReal) -> BigReal {
        add_impl(&self, &rhs)
    }
}

impl Sub for BigReal {
    type Output = BigReal;
    #[inline]
    fn sub(self, rhs: BigReal) -> BigReal {
        add_impl(&self, &(-rhs))
    }
}

impl Mul for BigReal {
    type Output = BigReal;
    #[inline]
    fn mul(self, rhs: BigReal) -> BigReal {
        mul_impl(&self, &rhs)
    }
}

impl Div for BigReal {
    type Output = BigReal;
    #[inline]
    fn div(self, rhs: BigReal) -> BigReal {
        div_impl(&self, &rhs)
    }
}

impl Neg for BigReal {
    type Output = BigReal;
    #[inline]
    fn neg(mut self) -> BigReal {
        if self.class == Class::Normal {
            self.neg = !self.neg;
        }
        self
    }
}

impl AddAssign for BigReal {
    fn add_assign(&mut self, rhs: BigReal) {
        *self = *self + rhs;
    }
}

impl SubAssign for BigReal {
    fn sub_assign(&mut self, rhs: BigReal) {
        *self = *self - rhs;
    }
}

impl MulAssign for BigReal {
    fn mul_assign(&mut self, rhs: BigReal) {
        *self = *self * rhs;
    }
}

impl DivAssign for BigReal {
    fn div_assign(&mut self, rhs: BigReal) {
        *self = *self / rhs;
    }
}

impl PartialEq for BigReal {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for BigReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.is_nan() || other.is_nan() {
            return None;
        }
        let sa = self.sign_f64();
        let sb = other.sign_f64();
        if sa != sb {
            return sa.partial_cmp(&sb);
        }
        if sa == 0.0 {
            return Some(Ordering::Equal);
        }
        let mag = self.cmp_abs(other);
        Some(if sa > 0.0 { mag } else { mag.reverse() })
    }
}

impl fmt::Debug for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigReal({}, {} bits)", self.to_sci_string(24), self.precision())
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(20);
        f.write_str(&self.to_sci_string(digits))
    }
}

/// Bitwise hash key, for memoizing evaluations at exact nodes.
#[derive(Clone, Copy, Debug)]
pub struct BitKey(pub BigReal);

impl PartialEq for BitKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.bit_eq(&other.0)
    }
}

impl Eq for BitKey {}

impl Hash for BitKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let x = &self.0;
        x.class.hash(state);
        x.limbs.hash(state);
        if x.class == Class::Normal {
            x.neg.hash(state);
            x.exp.hash(state);
            x.mant[..x.limbs as usize].hash(state);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: f64) -> BigReal {
        BigReal::from_f64(v, 128)
    }

    #[test]
    fn f64_round_trip() {
        for &v in &[1.0, -2.5, 1e-300, 3.0e300, 0.1, 123456.789, -7.0e-10, 5e-324] {
            assert_eq!(BigReal::from_f64(v, 256).to_f64(), v);
        }
    }

    #[test]
    fn small_arithmetic_is_exact() {
        assert_eq!((r(1.5) + r(2.25)).to_f64(), 3.75);
        assert_eq!((r(1.5) - r(2.25)).to_f64(), -0.75);
        assert_eq!((r(1.5) * r(-4.0)).to_f64(), -6.0);
        assert_eq!((r(1.0) / r(4.0)).to_f64(), 0.25);
        assert!((r(3.0) - r(3.0)).is_zero());
        assert!((r(1.0) / r(0.0)).is_nan());
    }

    #[test]
    fn division_matches_double() {
        let third = r(1.0) / r(3.0);
        assert_eq!(third.to_f64(), 1.0 / 3.0);
        let x = BigReal::from_f64(7.0, 512) / BigReal::from_f64(3.0, 512);
        let back = x * BigReal::from_f64(3.0, 512);
        let err = (back - BigReal::from_f64(7.0, 512)).abs();
        assert!(err <= BigReal::from_f64(7.0, 512) * x.epsilon());
    }

    #[test]
    fn cancellation_keeps_low_bits() {
        let one = BigReal::one(256);
        let tiny = BigReal::from_f64(1e-70, 256);
        let d = (one + tiny) - one;
        let rel = ((d - tiny) / tiny).abs().to_f64();
        assert!(rel < 1e-5, "{rel}");
    }

    #[test]
    fn parse_and_print() {
        let x = BigReal::parse_decimal("3.14159265358979323846264338327950288419716939937510", 256).unwrap();
        assert_eq!(x.to_sci_string(30), "3.14159265358979323846264338328e0");
        let y = BigReal::parse_decimal("-1e-40", 256).unwrap();
        assert_eq!(y.to_sci_string(5), "-1.0000e-40");
    }

    #[test]
    fn floor_and_rounding() {
        assert_eq!(r(2.7).floor().to_f64(), 2.0);
        assert_eq!(r(-2.2).floor().to_f64(), -3.0);
        assert_eq!(r(-3.0).floor().to_f64(), -3.0);
        assert_eq!(r(0.4).floor().to_f64(), 0.0);
        assert_eq!(r(12.5000001).round_to_i64(), 13);
    }

    #[test]
    fn precision_change_rounds_to_nearest() {
        let x = BigReal::from_f64(1.0, 256) / BigReal::from_f64(3.0, 256);
        let y = x.with_precision(64);
        assert_eq!(y.precision(), 64);
        assert_eq!(y.to_f64(), 1.0 / 3.0);
    }

    #[test]
    fn div_u64_matches_general_division() {
        let x = BigReal::from_f64(10.0, 512);
        let a = x.div_u64(7);
        let b = x / BigReal::from_f64(7.0, 512);
        assert!(a.bit_eq(&b));
    }

    #[test]
    fn ordering() {
        assert!(r(-1.0) < r(0.0));
        assert!(r(0.0) < r(1e-300));
        assert!(r(-2.0) < r(-1.0));
        assert!(r(2.0) > r(1.9999));
        assert_eq!(r(0.0), -r(0.0));
    }
}
