//! Integer factorization, prime tables, and the even integrability parameter.
//!
//! Factorization is deterministic: trial division up to 10^6, then a
//! Pollard-Brent splitter with a fixed cycle-parameter sequence, plus a
//! perfect-power check. Primality of every reported factor is certified:
//! below 2^64 by a Miller-Rabin witness set proven exhaustive for that
//! range, above it by a Lucas certificate (a primitive-root witness against
//! the full factorization of n-1).

use crate::error::{Error, Result};
use num::rational::Ratio;

pub type Rational = Ratio<i64>;

const TRIAL_LIMIT: u128 = 1_000_000;

/// Witness set that decides primality for every n < 2^64.
const MR_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// A multiset of certified prime factors, sorted ascending by prime.
///
/// The integer it represents is the product of `prime^exponent`; the value
/// itself is only materialized on demand so that huge square-free products
/// (primorials) stay representable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    factors: Vec<(u128, u32)>,
}

impl Factorization {
    pub fn of(n: u128) -> Result<Self> {
        factorize(n)
    }

    /// Product of all primes up to `z`, kept in factored form.
    pub fn primorial(z: u64) -> Self {
        Factorization {
            factors: primes_up_to(z).into_iter().map(|p| (p as u128, 1)).collect(),
        }
    }

    pub fn factors(&self) -> &[(u128, u32)] {
        &self.factors
    }

    /// Recomputed product; `None` when it no longer fits in 128 bits.
    pub fn value_u128(&self) -> Option<u128> {
        let mut v: u128 = 1;
        for &(p, e) in &self.factors {
            for _ in 0..e {
                v = v.checked_mul(p)?;
            }
        }
        Some(v)
    }

    /// Natural log of the represented value.
    pub fn ln_value(&self) -> f64 {
        self.factors
            .iter()
            .map(|&(p, e)| e as f64 * (p as f64).ln())
            .sum()
    }

    /// Omega with multiplicity.
    pub fn omega(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    pub fn distinct_primes(&self) -> u32 {
        self.factors.len() as u32
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }
}

/// Complete prime factorization of `n >= 1`.
pub fn factorize(n: u128) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::domain("factorize(0): zero has no factorization"));
    }
    let mut m = n;
    let mut factors: Vec<(u128, u32)> = Vec::new();
    let push = |factors: &mut Vec<(u128, u32)>, p: u128, e: u32| {
        if let Some(last) = factors.iter_mut().find(|(q, _)| *q == p) {
            last.1 += e;
        } else {
            factors.push((p, e));
        }
    };

    let divide_out = |m: &mut u128, factors: &mut Vec<(u128, u32)>, p: u128| {
        let mut e = 0;
        while *m % p == 0 {
            *m /= p;
            e += 1;
        }
        if e > 0 {
            push(factors, p, e);
        }
    };

    divide_out(&mut m, &mut factors, 2);
    let mut p: u128 = 3;
    while p <= TRIAL_LIMIT && p * p <= m {
        divide_out(&mut m, &mut factors, p);
        p += 2;
    }
    if m > 1 {
        if m < TRIAL_LIMIT * TRIAL_LIMIT {
            // Trial division exhausted all candidate divisors <= sqrt(m).
            push(&mut factors, m, 1);
        } else {
            let mut stack = vec![m];
            while let Some(c) = stack.pop() {
                if is_prime_certified(c)? {
                    push(&mut factors, c, 1);
                    continue;
                }
                let d = split_composite(c)?;
                stack.push(d);
                stack.push(c / d);
            }
        }
    }
    factors.sort_unstable();
    Ok(Factorization { factors })
}

/// Number of prime factors of |n| with multiplicity; 0 for n = +-1.
pub fn omega(n: i128) -> Result<u32> {
    if n == 0 {
        return Err(Error::domain("omega(0): zero has no finite factor count"));
    }
    Ok(factorize(n.unsigned_abs())?.omega())
}

/// Number of distinct prime factors of |n|; comparison variant only.
pub fn omega_distinct(n: i128) -> Result<u32> {
    if n == 0 {
        return Err(Error::domain("omega_distinct(0): zero has no factor count"));
    }
    Ok(factorize(n.unsigned_abs())?.distinct_primes())
}

/// All primes <= z, ascending (sieve of Eratosthenes).
pub fn primes_up_to(z: u64) -> Vec<u64> {
    if z < 2 {
        return Vec::new();
    }
    let n = z as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// Sum of (ln p)/p over the distinct primes p dividing q.
pub fn prime_log_sum(q: u128) -> Result<f64> {
    if q == 0 {
        return Err(Error::domain("prime_log_sum(0): undefined"));
    }
    Ok(prime_log_sum_factored(&factorize(q)?))
}

pub fn prime_log_sum_factored(f: &Factorization) -> f64 {
    f.factors()
        .iter()
        .map(|&(p, _)| (p as f64).ln() / p as f64)
        .sum()
}

/// The even integrability parameter: 1 if p = 2, else the least even
/// integer >= p/2.
pub fn n_e(p: Rational) -> Result<u64> {
    let two = Rational::from_integer(2);
    if p < two {
        return Err(Error::domain(format!("n_e({p}): requires p >= 2")));
    }
    if p == two {
        return Ok(1);
    }
    let k = (p / two).ceil().to_integer();
    Ok(if k % 2 == 0 { k as u64 } else { (k + 1) as u64 })
}

/// An integrability exponent together with its even floor parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvenFloorParam {
    pub p: Rational,
    pub n_e: u64,
}

impl EvenFloorParam {
    pub fn new(p: Rational) -> Result<Self> {
        let n_e = n_e(p)?;
        Ok(EvenFloorParam { p, n_e })
    }
}

fn mulmod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r: u64 = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod_u64(r, b, m);
        }
        b = mulmod_u64(b, b, m);
        e >>= 1;
    }
    r
}

fn addmod_u128(a: u128, b: u128, m: u128) -> u128 {
    // a, b < m; avoids overflow near u128::MAX
    if a >= m - b {
        a - (m - b)
    } else {
        a + b
    }
}

fn mulmod_u128(mut a: u128, mut b: u128, m: u128) -> u128 {
    if let Some(p) = a.checked_mul(b) {
        return p % m;
    }
    a %= m;
    let mut r: u128 = 0;
    while b > 0 {
        if b & 1 == 1 {
            r = addmod_u128(r, a, m);
        }
        a = addmod_u128(a, a, m);
        b >>= 1;
    }
    r
}

fn powmod_u128(mut b: u128, mut e: u128, m: u128) -> u128 {
    let mut r: u128 = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod_u128(r, b, m);
        }
        b = mulmod_u128(b, b, m);
        e >>= 1;
    }
    r
}

fn strong_probable_prime_u64(n: u64, base: u64) -> bool {
    // n odd >= 3
    let base = base % n;
    if base == 0 {
        return true;
    }
    let d = n - 1;
    let s = d.trailing_zeros();
    let d = d >> s;
    let mut x = powmod_u64(base, d, n);
    if x == 1 || x == n - 1 {
        return true;
    }
    for _ in 1..s {
        x = mulmod_u64(x, x, n);
        if x == n - 1 {
            return true;
        }
    }
    false
}

/// Deterministic for every n < 2^64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    MR_BASES.iter().all(|&b| strong_probable_prime_u64(n, b))
}

fn strong_probable_prime_u128(n: u128, base: u128) -> bool {
    let base = base % n;
    if base == 0 {
        return true;
    }
    let d = n - 1;
    let s = d.trailing_zeros();
    let d = d >> s;
    let mut x = powmod_u128(base, d, n);
    if x == 1 || x == n - 1 {
        return true;
    }
    for _ in 1..s {
        x = mulmod_u128(x, x, n);
        if x == n - 1 {
            return true;
        }
    }
    false
}

/// Primality with certification. Below 2^64 the witness set is exhaustive;
/// above, a strong-probable-prime screen is followed by a Lucas certificate
/// (witness of order n-1 against the certified factorization of n-1).
fn is_prime_certified(n: u128) -> Result<bool> {
    if n <= u64::MAX as u128 {
        return Ok(is_prime_u64(n as u64));
    }
    if n % 2 == 0 {
        return Ok(false);
    }
    if !MR_BASES
        .iter()
        .all(|&b| strong_probable_prime_u128(n, b as u128))
    {
        return Ok(false);
    }
    let pred = factorize(n - 1)?;
    'witness: for a in 2u128..2000 {
        if powmod_u128(a, n - 1, n) != 1 {
            return Ok(false);
        }
        for &(q, _) in pred.factors() {
            if powmod_u128(a, (n - 1) / q, n) == 1 {
                continue 'witness;
            }
        }
        return Ok(true);
    }
    Err(Error::data(format!(
        "primality certificate search exhausted for {n}"
    )))
}

pub fn isqrt_u128(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = 1u128 << (64 - (n.leading_zeros() / 2).min(63));
    loop {
        let y = (x + n / x) / 2;
        if y >= x {
            break;
        }
        x = y;
    }
    x
}

/// Finds a nontrivial factor of an odd composite that trial division missed.
fn split_composite(n: u128) -> Result<u128> {
    let r = isqrt_u128(n);
    if r * r == n {
        return Ok(r);
    }
    if n <= u64::MAX as u128 {
        return Ok(brent_u64(n as u64) as u128);
    }
    brent_u128(n)
}

/// Pollard-Brent with the deterministic cycle-parameter sequence c = 1, 2, ...
fn brent_u64(n: u64) -> u64 {
    debug_assert!(n > 1 && !is_prime_u64(n) && n % 2 == 1);
    let f = |x: u64, c: u64| addmod_u64(mulmod_u64(x, x, n), c, n);
    for c in 1u64.. {
        let mut x: u64 = 2;
        let mut y: u64 = 2;
        let mut d: u64 = 1;
        let mut count = 0u32;
        while d == 1 {
            x = f(x, c);
            y = f(f(y, c), c);
            d = gcd_u64(x.abs_diff(y), n);
            count += 1;
            if count > 1 << 26 {
                break;
            }
        }
        if d != n && d != 1 {
            return d;
        }
    }
    unreachable!()
}

fn brent_u128(n: u128) -> Result<u128> {
    let f = |x: u128, c: u128| addmod_u128(mulmod_u128(x, x, n), c, n);
    for c in 1u128..64 {
        let mut x: u128 = 2;
        let mut y: u128 = 2;
        let mut d: u128 = 1;
        let mut count = 0u64;
        while d == 1 {
            x = f(x, c);
            y = f(f(y, c), c);
            d = gcd_u128(x.abs_diff(y), n);
            count += 1;
            if count > 1 << 32 {
                break;
            }
        }
        if d != n && d != 1 {
            return Ok(d);
        }
    }
    Err(Error::resource(format!(
        "failed to split {n}: beyond desk-scale factorization"
    )))
}

fn addmod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 + b as u128) % m as u128) as u64
}

pub fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn gcd_i64(a: i64, b: i64) -> u64 {
    gcd_u64(a.unsigned_abs(), b.unsigned_abs())
}

/// Extended gcd: returns (g, x, y) with a*x + b*y = g >= 0.
pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// Inverse of a mod m when gcd(a, m) = 1.
pub fn invmod_u64(a: u64, m: u64) -> Option<u64> {
    let (g, x, _) = ext_gcd((a % m) as i64, m as i64);
    if g != 1 {
        return None;
    }
    Some(x.rem_euclid(m as i64) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn factorize_small_values() {
        assert_eq!(factorize(12).unwrap().factors(), &[(2, 2), (3, 1)]);
        assert_eq!(factorize(1).unwrap().factors(), &[]);
        assert_eq!(factorize(2147483647).unwrap().factors(), &[(2147483647, 1)]);
        assert!(factorize(0).is_err());
    }

    #[test]
    fn factorize_beyond_trial_division() {
        // 64-bit semiprime with both factors above the trial limit
        let p = 1_000_000_007u128;
        let q = 1_000_000_009u128;
        assert_eq!(factorize(p * q).unwrap().factors(), &[(p, 1), (q, 1)]);
        // Mersenne prime above 2^32
        let m61 = (1u128 << 61) - 1;
        assert_eq!(factorize(m61).unwrap().factors(), &[(m61, 1)]);
        // perfect square of a large prime
        assert_eq!(factorize(m61 * m61).unwrap().factors(), &[(m61, 2)]);
    }

    #[test]
    fn factorize_above_u64_certifies() {
        // first prime above 2^64
        let n = 18446744073709551629u128;
        assert_eq!(factorize(n).unwrap().factors(), &[(n, 1)]);
        let m61 = (1u128 << 61) - 1;
        let f = factorize(m61 * 1_000_000_007).unwrap();
        assert_eq!(f.factors(), &[(1_000_000_007, 1), (m61, 1)]);
    }

    #[test]
    fn omega_counts_multiplicity() {
        assert_eq!(omega(12).unwrap(), 3);
        assert_eq!(omega(-97).unwrap(), 1);
        assert_eq!(omega(360).unwrap(), 6);
        assert_eq!(omega(1).unwrap(), 0);
        assert_eq!(omega(-1).unwrap(), 0);
        assert!(omega(0).is_err());
        assert_eq!(omega_distinct(360).unwrap(), 3);
    }

    #[test]
    fn primes_up_to_basics() {
        assert_eq!(primes_up_to(10), vec![2, 3, 5, 7]);
        assert!(primes_up_to(1).is_empty());
        assert_eq!(primes_up_to(100).len(), 25);
    }

    #[test]
    fn prime_log_sum_values() {
        assert_eq!(prime_log_sum(1).unwrap(), 0.0);
        assert!((prime_log_sum(6).unwrap() - 0.71275).abs() < 1e-4);
        assert!((prime_log_sum(210).unwrap() - 1.31266).abs() < 1e-4);
    }

    #[test]
    fn primorial_log_sum_stays_bounded() {
        // sum_{p <= z} (ln p)/p compared against ln ln of the primorial
        for z in [10u64, 32, 100, 316, 1000, 3162, 10_000] {
            let f = Factorization::primorial(z);
            let ratio = prime_log_sum_factored(&f) / f.ln_value().ln();
            assert!(
                ratio <= 2.0 && ratio > 0.0,
                "ratio {ratio} out of band at z={z}"
            );
        }
    }

    #[test]
    fn n_e_examples() {
        assert_eq!(n_e(rat(2, 1)).unwrap(), 1);
        assert_eq!(n_e(rat(4, 1)).unwrap(), 2);
        assert_eq!(n_e(rat(13, 1)).unwrap(), 8);
        assert_eq!(n_e(rat(27, 7)).unwrap(), 2);
        assert_eq!(n_e(rat(6, 1)).unwrap(), 4);
        assert!(n_e(rat(9, 7)).is_err());
    }

    #[test]
    fn even_floor_param_invariant() {
        for num in 2..=40i64 {
            for den in 1..=7i64 {
                let p = rat(num, den);
                if p < rat(2, 1) {
                    continue;
                }
                let ef = EvenFloorParam::new(p).unwrap();
                if p == rat(2, 1) {
                    assert_eq!(ef.n_e, 1);
                } else {
                    assert_eq!(ef.n_e % 2, 0);
                    let ne = rat(ef.n_e as i64, 1);
                    assert!(ne - rat(2, 1) < p / rat(2, 1));
                    assert!(p / rat(2, 1) <= ne);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn omega_is_additive(m in 1u64..1_000_000, n in 1u64..1_000_000) {
            let lhs = omega((m as i128) * (n as i128)).unwrap();
            let rhs = omega(m as i128).unwrap() + omega(n as i128).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn factorize_round_trips(n in 1u64..u64::MAX / 2) {
            let f = factorize(n as u128).unwrap();
            prop_assert_eq!(f.value_u128(), Some(n as u128));
            for &(p, _) in f.factors() {
                prop_assert!(is_prime_u64(p as u64));
            }
        }

        #[test]
        fn n_e_monotone_and_bounded(num in 4i64..200, den in 1i64..8) {
            let p = rat(num, den);
            prop_assume!(p >= rat(2, 1));
            let lo = n_e(p).unwrap();
            let hi = n_e(p + rat(1, 3)).unwrap();
            prop_assert!(lo <= hi);
            // n_e(p) >= p/2 - 2
            prop_assert!(rat(lo as i64, 1) >= p / rat(2, 1) - rat(2, 1));
        }
    }
}
