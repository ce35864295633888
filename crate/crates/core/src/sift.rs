//! The sieve side: almost-prime statistics of polynomial values over ball
//! points, empirical checks of the sieve axioms (exact local densities vs
//! exact counts), W(z) products, and Linnik-type congruence searches.

use crate::budget::Budget;
use crate::enumerate::{count_points, for_each_point, EnumerationResult};
use crate::error::{Error, Result};
use crate::exponents;
use crate::geometry::{
    default_spectral_params, GroupSpec, HeightBound, LatticePoint, NormMode, PolynomialMap,
    VarietySpec,
};
use crate::modular::local_density;
use crate::numeric;
use num::rational::BigRational;
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Distribution of Omega(f(x)) (prime factors with multiplicity) over ball
/// points. Points with f(x) = 0 have no factor count and are tallied
/// separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostPrimeCount {
    pub variety: VarietySpec,
    pub f: PolynomialMap,
    pub t: f64,
    pub histogram: BTreeMap<u32, u64>,
    pub excluded_zero: u64,
    pub total: u64,
}

impl AlmostPrimeCount {
    /// Points whose value has at most r prime factors.
    pub fn at_most(&self, r: u32) -> u64 {
        self.histogram.range(..=r).map(|(_, c)| c).sum()
    }
}

struct OmegaStats {
    histogram: BTreeMap<u32, u64>,
    excluded_zero: u64,
    total: u64,
    memo: BTreeMap<i128, u32>,
}

impl OmegaStats {
    fn new() -> Self {
        OmegaStats {
            histogram: BTreeMap::new(),
            excluded_zero: 0,
            total: 0,
            memo: BTreeMap::new(),
        }
    }

    fn push(&mut self, value: i128) -> Result<()> {
        self.total += 1;
        if value == 0 {
            self.excluded_zero += 1;
            return Ok(());
        }
        let key = value.abs();
        let omega = match self.memo.get(&key) {
            Some(&o) => o,
            None => {
                let o = numeric::omega(key)?;
                self.memo.insert(key, o);
                o
            }
        };
        *self.histogram.entry(omega).or_insert(0) += 1;
        Ok(())
    }
}

fn eval_map(f: &PolynomialMap, entries: &[i64]) -> Result<i128> {
    let g = f.g.eval(entries)?;
    let n = f.normalizer as i128;
    if g.rem_euclid(n) != 0 {
        return Err(Error::data(format!(
            "g({entries:?}) = {g} is not divisible by the declared normalizer {n}"
        )));
    }
    Ok(g / n)
}

/// Omega histogram of f over a materialized enumeration, which must be
/// complete (a partial point list would silently bias every statistic).
pub fn almost_prime_count(points: &EnumerationResult, f: &PolynomialMap) -> Result<AlmostPrimeCount> {
    if !points.complete {
        return Err(Error::domain(
            "almost-prime statistics need a complete enumeration".to_string(),
        ));
    }
    let mut stats = OmegaStats::new();
    for p in &points.points {
        stats.push(eval_map(f, p.entries())?)?;
    }
    Ok(AlmostPrimeCount {
        variety: points.variety.clone(),
        f: f.clone(),
        t: points.t,
        histogram: stats.histogram,
        excluded_zero: stats.excluded_zero,
        total: stats.total,
    })
}

/// Streaming equivalent of [`almost_prime_count`] for balls too large to
/// materialize.
pub fn almost_prime_count_streamed(
    v: &VarietySpec,
    f: &PolynomialMap,
    t: f64,
    budget: &Budget,
) -> Result<AlmostPrimeCount> {
    let bound = HeightBound::new(t, NormMode::Euclidean)?;
    let mut stats = OmegaStats::new();
    let mut failure: Option<Error> = None;
    for_each_point(v, &bound, budget, |e| {
        if failure.is_some() {
            return;
        }
        if let Err(err) = eval_map(f, e).and_then(|v| stats.push(v)) {
            failure = Some(err);
        }
    })?;
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(AlmostPrimeCount {
        variety: v.clone(),
        f: f.clone(),
        t,
        histogram: stats.histogram,
        excluded_zero: stats.excluded_zero,
        total: stats.total,
    })
}

/// One modulus row of the sieve-axiom comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomRow {
    pub d: u64,
    /// Exact count of ball points with f(x) = 0 mod d.
    pub actual: u64,
    /// Exact main term (rho(d)/d) X.
    pub main: BigRational,
    /// actual - main, the remainder the sieve must control.
    pub r_d: f64,
}

/// Exact counts against exact density main terms for every squarefree
/// modulus composed of the tested primes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveAxiomReport {
    pub f: PolynomialMap,
    pub t: f64,
    /// Ball count X.
    pub x: u64,
    pub rows: Vec<AxiomRow>,
    /// Largest rho(p)/p over the tested odd primes. p = 2 appears in rows
    /// but has its own density value and is not folded into this bound.
    pub c1_bound: f64,
    pub tau_used: f64,
    /// False when the budget ran out while computing densities; rows then
    /// cover only the primes that fit.
    pub complete: bool,
}

impl SieveAxiomReport {
    pub fn row(&self, d: u64) -> Option<&AxiomRow> {
        self.rows.iter().find(|r| r.d == d)
    }
}

pub fn sieve_axiom_check(
    spec: &GroupSpec,
    f: &PolynomialMap,
    t: f64,
    prime_cap: u64,
    budget: &Budget,
) -> Result<SieveAxiomReport> {
    let params = default_spectral_params(spec)?;
    let tau = 0.95 * exponents::tau0(&params, false).to_f64().expect("small rational");
    sieve_axiom_check_with_tau(spec, f, t, prime_cap, tau, budget)
}

pub fn sieve_axiom_check_with_tau(
    spec: &GroupSpec,
    f: &PolynomialMap,
    t: f64,
    prime_cap: u64,
    tau: f64,
    budget: &Budget,
) -> Result<SieveAxiomReport> {
    let all_primes = numeric::primes_up_to(prime_cap);
    if all_primes.len() > 20 {
        return Err(Error::domain(format!(
            "{} primes give {} moduli rows; cap the prime set lower",
            all_primes.len(),
            (1u64 << all_primes.len().min(63))
        )));
    }
    // densities first; a budget refusal partway yields a partial report
    let mut primes: Vec<u64> = Vec::new();
    let mut rho: Vec<BigRational> = Vec::new();
    let mut complete = true;
    for &p in &all_primes {
        match local_density(f, spec, p, budget) {
            Ok(d) => {
                primes.push(p);
                rho.push(d.rho);
            }
            Err(Error::Resource(_)) => {
                complete = false;
                break;
            }
            Err(err) => return Err(err),
        }
    }
    let k = primes.len();
    // one pass over the ball: per-point divisibility mask over the primes
    let v = VarietySpec::group(spec.clone());
    let bound = HeightBound::new(t, NormMode::Euclidean)?;
    let mut mask_count = vec![0u64; 1 << k];
    let mut x = 0u64;
    let mut failure: Option<Error> = None;
    for_each_point(&v, &bound, budget, |e| {
        if failure.is_some() {
            return;
        }
        match eval_map(f, e) {
            Ok(value) => {
                let mut mask = 0usize;
                for (i, &p) in primes.iter().enumerate() {
                    if value.rem_euclid(p as i128) == 0 {
                        mask |= 1 << i;
                    }
                }
                mask_count[mask] += 1;
                x += 1;
            }
            Err(err) => failure = Some(err),
        }
    })?;
    if let Some(err) = failure {
        return Err(err);
    }
    // superset sums: actual[s] = number of points divisible by every prime
    // in s
    let mut actual = mask_count;
    for i in 0..k {
        for s in 0..actual.len() {
            if s & (1 << i) == 0 {
                actual[s] += actual[s | (1 << i)];
            }
        }
    }
    // main terms by multiplicativity: main[s] = X prod_{p in s} rho(p)/p
    let big_x = BigRational::from_integer(BigInt::from(x));
    let mut main: Vec<BigRational> = vec![BigRational::zero(); 1 << k];
    main[0] = big_x;
    for s in 1..main.len() {
        let i = s.trailing_zeros() as usize;
        let ratio = &rho[i] / BigRational::from_integer(BigInt::from(primes[i]));
        main[s] = &main[s & (s - 1)] * ratio;
    }
    let mut rows: Vec<AxiomRow> = (0..1usize << k)
        .map(|s| {
            let d = primes
                .iter()
                .enumerate()
                .filter(|(i, _)| s & (1 << i) != 0)
                .map(|(_, &p)| p)
                .product::<u64>();
            let r_d = actual[s] as f64 - main[s].to_f64().unwrap_or(f64::NAN);
            AxiomRow {
                d,
                actual: actual[s],
                main: main[s].clone(),
                r_d,
            }
        })
        .collect();
    rows.sort_unstable_by_key(|r| r.d);
    let c1_bound = primes
        .iter()
        .zip(&rho)
        .filter(|(&p, _)| p != 2)
        .map(|(&p, r)| (r / BigRational::from_integer(BigInt::from(p))).to_f64().unwrap())
        .fold(0.0f64, f64::max);
    Ok(SieveAxiomReport {
        f: f.clone(),
        t,
        x,
        rows,
        c1_bound,
        tau_used: tau,
        complete,
    })
}

/// W(z) = prod (1 - rho(p)/p), exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WProduct {
    pub exact: BigRational,
    pub value: f64,
    pub primes_used: Vec<u64>,
}

/// The product over explicitly supplied per-prime densities.
pub fn w_product_over(rhos: &[(u64, BigRational)]) -> Result<WProduct> {
    let mut exact = BigRational::one();
    let mut primes_used = Vec::with_capacity(rhos.len());
    for (p, rho) in rhos {
        let factor = BigRational::one() - rho / BigRational::from_integer(BigInt::from(*p));
        if factor.is_negative() {
            return Err(Error::data(format!(
                "density at p = {p} exceeds p; the sieve factor would be negative"
            )));
        }
        exact *= factor;
        primes_used.push(*p);
    }
    let value = exact.to_f64().unwrap_or(f64::NAN);
    Ok(WProduct {
        exact,
        value,
        primes_used,
    })
}

/// W(z) over the primes p <= z not dividing `exclude`, with densities
/// computed from the group. `exclude` = 1 keeps every prime.
pub fn w_product(
    f: &PolynomialMap,
    spec: &GroupSpec,
    z: f64,
    exclude: u64,
    budget: &Budget,
) -> Result<WProduct> {
    if exclude == 0 {
        return Err(Error::domain("exclusion modulus must be positive".to_string()));
    }
    if !z.is_finite() || z < 0.0 {
        return Err(Error::domain(format!("sieve level {z} is not a valid bound")));
    }
    let mut rhos = Vec::new();
    for p in numeric::primes_up_to(z.floor() as u64) {
        if exclude % p == 0 {
            continue;
        }
        rhos.push((p, local_density(f, spec, p, budget)?.rho));
    }
    w_product_over(&rhos)
}

/// Outcome of a Linnik-type search: the least point of the ball whose
/// value lands in the residue class with few enough prime factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinnikResult {
    pub b: u64,
    pub q: u64,
    pub found: Option<LatticePoint>,
    pub height: Option<f64>,
    pub omega_value: Option<u32>,
    /// log(height)/log q; absent when q = 1 or nothing was found.
    pub sigma_emp: Option<f64>,
    pub r_emp: Option<u32>,
}

/// Values of f mod q attained on the variety's residue points, computed
/// over Z/(q N) so the normalizer divides out exactly.
pub fn attained_values(
    v: &VarietySpec,
    f: &PolynomialMap,
    q: u64,
    budget: &Budget,
) -> Result<BTreeSet<u64>> {
    let m = q
        .checked_mul(f.normalizer)
        .ok_or_else(|| Error::domain("modulus times normalizer overflows".to_string()))?;
    let n = f.normalizer;
    let mut out = BTreeSet::new();
    for entries in crate::modular::enumerate_variety_mod(v, m, budget)? {
        let g = f.g.eval_mod(&entries, m);
        if g % n != 0 {
            return Err(Error::data(format!(
                "{} is not divisible by its normalizer {n} on the residue variety mod {m}",
                f.name
            )));
        }
        out.insert(g / n % q);
    }
    Ok(out)
}

fn doubling_grid(t_cap: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut t = 2.0;
    while t < t_cap {
        grid.push(t);
        t *= 2.0;
    }
    grid.push(t_cap);
    grid
}

/// Scans balls of doubling height up to q^sigma_max (q read as 2 when
/// q = 1, so the cap stays meaningful) for the least point with
/// f(x) = b mod q and Omega(f(x)) <= r_max. Ties in height break
/// lexicographically on entries. No hit below the cap is reported as an
/// absent result, not an error.
pub fn linnik_search(
    v: &VarietySpec,
    f: &PolynomialMap,
    b: u64,
    q: u64,
    sigma_max: f64,
    r_max: u32,
    budget: &Budget,
) -> Result<LinnikResult> {
    if q == 0 {
        return Err(Error::domain("modulus must be positive".to_string()));
    }
    let b = b % q;
    if q > 1 && numeric::gcd_u64(b, q) != 1 {
        return Err(Error::domain(format!("b = {b} and q = {q} are not coprime")));
    }
    if q > 1 {
        // confirm the class is attainable when the residue scan fits the
        // budget; otherwise rely on discovery
        match attained_values(v, f, q, budget) {
            Ok(set) => {
                if !set.contains(&b) {
                    return Err(Error::domain(format!(
                        "b = {b} is not attained by {} mod {q}",
                        f.name
                    )));
                }
            }
            Err(Error::Resource(_)) => {}
            Err(err) => return Err(err),
        }
    }
    let t_cap = (q.max(2) as f64).powf(sigma_max);
    let mut memo = BTreeMap::new();
    for t in doubling_grid(t_cap) {
        let bound = HeightBound::new(t, NormMode::Euclidean)?;
        let mut best: Option<(u128, Vec<i64>, i128, u32)> = None;
        let mut failure: Option<Error> = None;
        for_each_point(v, &bound, budget, |e| {
            if failure.is_some() {
                return;
            }
            let value = match eval_map(f, e) {
                Ok(v) => v,
                Err(err) => {
                    failure = Some(err);
                    return;
                }
            };
            if value == 0 || value.rem_euclid(q as i128) != b as i128 {
                return;
            }
            let omega = match memo.get(&value.abs()) {
                Some(&o) => o,
                None => match numeric::omega(value) {
                    Ok(o) => {
                        memo.insert(value.abs(), o);
                        o
                    }
                    Err(err) => {
                        failure = Some(err);
                        return;
                    }
                },
            };
            if omega > r_max {
                return;
            }
            let hsq: u128 = e.iter().map(|&x| (x as i128 * x as i128) as u128).sum();
            let cand = (hsq, e.to_vec(), value, omega);
            if best.as_ref().is_none_or(|b| (cand.0, &cand.1) < (b.0, &b.1)) {
                best = Some(cand);
            }
        })?;
        if let Some(err) = failure {
            return Err(err);
        }
        if let Some((hsq, entries, value, omega)) = best {
            let (rows, cols) = v.point_shape();
            let point = LatticePoint::new(rows, cols, entries)?;
            debug_assert!(v.is_on_variety(&point)?);
            debug_assert_eq!(eval_map(f, point.entries())?, value);
            let height = (hsq as f64).sqrt();
            let sigma_emp = (q > 1).then(|| height.ln() / (q as f64).ln());
            return Ok(LinnikResult {
                b,
                q,
                found: Some(point),
                height: Some(height),
                omega_value: Some(omega),
                sigma_emp,
                r_emp: Some(omega),
            });
        }
    }
    Ok(LinnikResult {
        b,
        q,
        found: None,
        height: None,
        omega_value: None,
        sigma_emp: None,
        r_emp: None,
    })
}

/// Least admissible points for every attained coprime class b mod q at
/// once, via one shared doubling sweep. Per class this agrees exactly
/// with [`linnik_search`]; classes with no hit below the cap map to an
/// absent result.
pub fn linnik_profile(
    v: &VarietySpec,
    f: &PolynomialMap,
    q: u64,
    sigma_max: f64,
    r_max: u32,
    budget: &Budget,
) -> Result<BTreeMap<u64, LinnikResult>> {
    if q < 2 {
        return Err(Error::domain("class profile needs a modulus q >= 2".to_string()));
    }
    let targets: BTreeSet<u64> = attained_values(v, f, q, budget)?
        .into_iter()
        .filter(|&b| numeric::gcd_u64(b, q) == 1)
        .collect();
    let t_cap = (q as f64).powf(sigma_max);
    let mut best: BTreeMap<u64, (u128, Vec<i64>, u32)> = BTreeMap::new();
    let mut memo: BTreeMap<i128, u32> = BTreeMap::new();
    for t in doubling_grid(t_cap) {
        if targets.iter().all(|b| best.contains_key(b)) {
            break;
        }
        // each ball contains the previous one, so rescanning reproduces
        // the minima already found and can only add new classes
        best.clear();
        let bound = HeightBound::new(t, NormMode::Euclidean)?;
        let mut failure: Option<Error> = None;
        for_each_point(v, &bound, budget, |e| {
            if failure.is_some() {
                return;
            }
            let value = match eval_map(f, e) {
                Ok(v) => v,
                Err(err) => {
                    failure = Some(err);
                    return;
                }
            };
            if value == 0 {
                return;
            }
            let b = value.rem_euclid(q as i128) as u64;
            if !targets.contains(&b) {
                return;
            }
            let omega = match memo.get(&value.abs()) {
                Some(&o) => o,
                None => match numeric::omega(value) {
                    Ok(o) => {
                        memo.insert(value.abs(), o);
                        o
                    }
                    Err(err) => {
                        failure = Some(err);
                        return;
                    }
                },
            };
            if omega > r_max {
                return;
            }
            let hsq: u128 = e.iter().map(|&x| (x as i128 * x as i128) as u128).sum();
            let slot = best.entry(b);
            match slot {
                std::collections::btree_map::Entry::Occupied(mut o) => {
                    let cur = o.get_mut();
                    if (hsq, e) < (cur.0, cur.1.as_slice()) {
                        *cur = (hsq, e.to_vec(), omega);
                    }
                }
                std::collections::btree_map::Entry::Vacant(slot) => {
                    slot.insert((hsq, e.to_vec(), omega));
                }
            }
        })?;
        if let Some(err) = failure {
            return Err(err);
        }
    }
    let (rows, cols) = v.point_shape();
    targets
        .into_iter()
        .map(|b| {
            let result = match best.remove(&b) {
                Some((hsq, entries, omega)) => {
                    let point = LatticePoint::new(rows, cols, entries)?;
                    let height = (hsq as f64).sqrt();
                    LinnikResult {
                        b,
                        q,
                        found: Some(point),
                        height: Some(height),
                        omega_value: Some(omega),
                        sigma_emp: Some(height.ln() / (q as f64).ln()),
                        r_emp: Some(omega),
                    }
                }
                None => LinnikResult {
                    b,
                    q,
                    found: None,
                    height: None,
                    omega_value: None,
                    sigma_emp: None,
                    r_emp: None,
                },
            };
            Ok((b, result))
        })
        .collect()
}

/// Count and reference scale for the density form of the Linnik problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinnikDensity {
    /// |{x in the q^sigma ball: f(x) = b mod q, Omega(f(x)) <= r}|.
    pub count: u64,
    /// |ball| / (|attained residues| (log q)^t); infinite at q = 1.
    pub reference: f64,
}

pub fn linnik_density(
    v: &VarietySpec,
    f: &PolynomialMap,
    b: u64,
    q: u64,
    sigma: f64,
    r: u32,
    budget: &Budget,
) -> Result<LinnikDensity> {
    if q == 0 {
        return Err(Error::domain("modulus must be positive".to_string()));
    }
    let b = b % q;
    if q > 1 && numeric::gcd_u64(b, q) != 1 {
        return Err(Error::domain(format!("b = {b} and q = {q} are not coprime")));
    }
    let attained = attained_values(v, f, q, budget)?;
    if q > 1 && !attained.contains(&b) {
        return Err(Error::domain(format!(
            "b = {b} is not attained by {} mod {q}",
            f.name
        )));
    }
    let t = (q as f64).powf(sigma);
    let bound = HeightBound::new(t, NormMode::Euclidean)?;
    let mut memo: BTreeMap<i128, u32> = BTreeMap::new();
    let mut count = 0u64;
    let mut failure: Option<Error> = None;
    for_each_point(v, &bound, budget, |e| {
        if failure.is_some() {
            return;
        }
        let value = match eval_map(f, e) {
            Ok(v) => v,
            Err(err) => {
                failure = Some(err);
                return;
            }
        };
        if value == 0 || value.rem_euclid(q as i128) != b as i128 {
            return;
        }
        let omega = match memo.get(&value.abs()) {
            Some(&o) => o,
            None => match numeric::omega(value) {
                Ok(o) => {
                    memo.insert(value.abs(), o);
                    o
                }
                Err(err) => {
                    failure = Some(err);
                    return;
                }
            },
        };
        if omega <= r {
            count += 1;
        }
    })?;
    if let Some(err) = failure {
        return Err(err);
    }
    let total = count_points(v, t, NormMode::Euclidean, budget)?;
    let reference = if q == 1 {
        f64::INFINITY
    } else {
        total as f64 / (attained.len() as f64 * (q as f64).ln().powi(f.t as i32))
    };
    Ok(LinnikDensity { count, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::enumerate_sl2;
    use crate::geometry::SparsePoly;

    fn budget() -> Budget {
        Budget::default()
    }

    fn trace2() -> PolynomialMap {
        PolynomialMap::trace(2)
    }

    fn big_rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn trace_histogram_tiny_ball() {
        let points = enumerate_sl2(1.5, NormMode::Euclidean, &budget()).unwrap();
        let a = almost_prime_count(&points, &trace2()).unwrap();
        assert_eq!(a.total, 4);
        assert_eq!(a.excluded_zero, 2);
        assert_eq!(a.histogram, BTreeMap::from([(1, 2)]));
        assert_eq!(a.at_most(3), 2);
    }

    #[test]
    fn constant_map_histogram() {
        let one = PolynomialMap::new("one", SparsePoly::constant(1), 1, 1).unwrap();
        let points = enumerate_sl2(3.0, NormMode::Euclidean, &budget()).unwrap();
        let a = almost_prime_count(&points, &one).unwrap();
        assert_eq!(a.excluded_zero, 0);
        assert_eq!(a.histogram, BTreeMap::from([(0, a.total)]));
    }

    #[test]
    fn histogram_totals_match_ball() {
        let b = budget();
        for t in [2.0, 5.0, 10.0] {
            let a = almost_prime_count_streamed(&VarietySpec::sl(2), &trace2(), t, &b).unwrap();
            let n = count_points(&VarietySpec::sl(2), t, NormMode::Euclidean, &b).unwrap();
            let in_hist: u64 = a.histogram.values().sum();
            assert_eq!(in_hist + a.excluded_zero, a.total, "T={t}");
            assert_eq!(a.total, n, "T={t}");
        }
    }

    #[test]
    fn streamed_matches_materialized() {
        let b = budget();
        let points = enumerate_sl2(30.0, NormMode::Euclidean, &b).unwrap();
        let a = almost_prime_count(&points, &trace2()).unwrap();
        let s = almost_prime_count_streamed(&VarietySpec::sl(2), &trace2(), 30.0, &b).unwrap();
        assert_eq!(a.histogram, s.histogram);
        assert_eq!(a.excluded_zero, s.excluded_zero);
        assert_eq!(a.total, s.total);
    }

    #[test]
    fn incomplete_enumeration_rejected() {
        let mut points = enumerate_sl2(2.0, NormMode::Euclidean, &budget()).unwrap();
        points.complete = false;
        assert!(matches!(
            almost_prime_count(&points, &trace2()).unwrap_err(),
            Error::Domain(_)
        ));
    }

    #[test]
    fn axiom_check_t500() {
        let r = sieve_axiom_check(&GroupSpec::sl(2), &trace2(), 500.0, 13, &budget()).unwrap();
        assert!(r.complete);
        assert_eq!(r.rows.len(), 64);
        let x = r.x as f64;
        let d1 = r.row(1).unwrap();
        assert_eq!(d1.actual, r.x);
        assert_eq!(d1.main, BigRational::from_integer(BigInt::from(r.x)));
        assert_eq!(d1.r_d, 0.0);
        for row in &r.rows {
            assert!(
                row.r_d.abs() <= x.powf(0.9),
                "d={}: R_d={} vs {}",
                row.d,
                row.r_d,
                x.powf(0.9)
            );
        }
        // rows must cover every squarefree product of the tested primes up
        // to X^tau (they cover far more: all 2^6 products)
        assert!(r.tau_used > 0.0);
        let cover = x.powf(r.tau_used);
        for d in 1..=(cover as u64) {
            let fac = numeric::factorize(d as u128).unwrap();
            if fac.is_squarefree() && fac.factors().iter().all(|&(p, _)| p <= 13) {
                assert!(r.row(d).is_some(), "missing d={d}");
            }
        }
    }

    #[test]
    fn axiom_rho_consistency_for_small_primes() {
        let b = budget();
        for (t, band) in [(500.0, 0.15), (1000.0, 0.08)] {
            let r = sieve_axiom_check(&GroupSpec::sl(2), &trace2(), t, 5, &b).unwrap();
            for p in [3u64, 5] {
                let row = r.row(p).unwrap();
                let observed = row.actual as f64 / r.x as f64;
                let predicted = (&row.main / BigRational::from_integer(BigInt::from(r.x)))
                    .to_f64()
                    .unwrap();
                let gap = (observed - predicted).abs() / predicted;
                assert!(gap <= band, "T={t} p={p}: gap {gap}");
            }
        }
    }

    #[test]
    fn c1_bound_is_quarter_up_to_47() {
        // odd primes have rho(p)/p = 1/(p -+ 1), maximized at 1/4 by both
        // p=3 and p=5
        let r = sieve_axiom_check(&GroupSpec::sl(2), &trace2(), 100.0, 47, &budget()).unwrap();
        assert!(r.complete);
        assert_eq!(r.rows.len(), 1 << 15);
        assert_eq!(r.c1_bound, 0.25);
    }

    #[test]
    fn rho_near_one_band() {
        // |rho(p) - 1| <= 2 / sqrt(p), checked as (rho-1)^2 p <= 4 in
        // exact rationals
        let b = budget();
        for p in numeric::primes_up_to(47) {
            let rho = local_density(&trace2(), &GroupSpec::sl(2), p, &b).unwrap().rho;
            let dev = &rho - BigRational::one();
            let lhs = &dev * &dev * BigRational::from_integer(BigInt::from(p));
            assert!(lhs <= big_rat(4, 1), "p={p}: rho={rho}");
        }
    }

    #[test]
    fn w_product_synthetic_unit_density() {
        let ones: Vec<(u64, BigRational)> =
            [2u64, 3, 5, 7].iter().map(|&p| (p, BigRational::one())).collect();
        let w = w_product_over(&ones).unwrap();
        assert_eq!(w.exact, big_rat(8, 35));
    }

    #[test]
    fn w_product_empty_range() {
        let w = w_product(&trace2(), &GroupSpec::sl(2), 1.0, 1, &budget()).unwrap();
        assert_eq!(w.exact, BigRational::one());
        assert!(w.primes_used.is_empty());
    }

    #[test]
    fn w_product_exclusion_identity() {
        let b = budget();
        let excluded = w_product(&trace2(), &GroupSpec::sl(2), 30.0, 6, &b).unwrap();
        let mut rhos = Vec::new();
        for p in numeric::primes_up_to(30) {
            if p == 2 || p == 3 {
                continue;
            }
            rhos.push((p, local_density(&trace2(), &GroupSpec::sl(2), p, &b).unwrap().rho));
        }
        assert_eq!(excluded.exact, w_product_over(&rhos).unwrap().exact);
    }

    #[test]
    fn w_times_log_z_band_for_trace() {
        let b = budget();
        for z in [50.0f64, 300.0] {
            let w = w_product(&trace2(), &GroupSpec::sl(2), z, 1, &b).unwrap();
            let scaled = w.value * z.ln();
            assert!((0.3..=3.0).contains(&scaled), "z={z}: {scaled}");
        }
    }

    #[test]
    fn linnik_search_q5() {
        let r = linnik_search(&VarietySpec::sl(2), &trace2(), 1, 5, 3.0, 4, &budget()).unwrap();
        let point = r.found.expect("a hit exists");
        let value = eval_map(&trace2(), point.entries()).unwrap();
        assert_eq!(value.rem_euclid(5), 1);
        assert!(numeric::omega(value).unwrap() <= 4);
        assert_eq!(r.omega_value, r.r_emp);
        assert!(r.sigma_emp.unwrap() <= 2.0, "sigma = {:?}", r.sigma_emp);
        let h = r.height.unwrap();
        assert!((h - (point.height_sq() as f64).sqrt()).abs() < 1e-12);
        assert!(h <= 5f64.powf(r.sigma_emp.unwrap()) + 1e-9);
    }

    #[test]
    fn linnik_rejects_noncoprime() {
        for b in [0u64, 10] {
            assert!(matches!(
                linnik_search(&VarietySpec::sl(2), &trace2(), b, 5, 2.0, 4, &budget()).unwrap_err(),
                Error::Domain(_)
            ));
        }
    }

    #[test]
    fn linnik_rejects_unattained_class() {
        // squares mod 5 are {0, 1, 4}: b = 2 is coprime yet unreachable by
        // the squared trace
        let sq = PolynomialMap::new(
            "trace-squared",
            SparsePoly::trace(2).mul(SparsePoly::trace(2)),
            1,
            1,
        )
        .unwrap();
        let err =
            linnik_search(&VarietySpec::sl(2), &sq, 2, 5, 2.0, 6, &budget()).unwrap_err();
        match err {
            Error::Domain(msg) => assert!(msg.contains("attained"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn linnik_trivial_modulus() {
        // congruence vacuous; the rotation points have trace 0 and are
        // excluded, so the least hits are +-identity and the tie-break
        // picks the negative one
        let r = linnik_search(&VarietySpec::sl(2), &trace2(), 0, 1, 10.0, 3, &budget()).unwrap();
        let p = r.found.unwrap();
        assert_eq!(p.entries(), &[-1, 0, 0, -1]);
        assert_eq!(r.omega_value, Some(1));
        assert_eq!(r.sigma_emp, None);
    }

    #[test]
    fn linnik_absent_below_cap() {
        // sigma_max small enough that the ball holds only the four tiny
        // points, none with trace = 2 mod 7 and omega 0
        let r = linnik_search(&VarietySpec::sl(2), &trace2(), 2, 7, 0.26, 0, &budget()).unwrap();
        assert!(r.found.is_none());
        assert_eq!(r.height, None);
    }

    #[test]
    fn linnik_density_band_and_monotonicity() {
        let b = budget();
        let v = VarietySpec::sl(2);
        let d = linnik_density(&v, &trace2(), 1, 5, 2.0, 4, &b).unwrap();
        assert!(d.count as f64 / d.reference >= 0.05, "{} / {}", d.count, d.reference);
        let d_lower_sigma = linnik_density(&v, &trace2(), 1, 5, 1.5, 4, &b).unwrap();
        let d_lower_r = linnik_density(&v, &trace2(), 1, 5, 2.0, 3, &b).unwrap();
        assert!(d_lower_sigma.count <= d.count);
        assert!(d_lower_r.count <= d.count);
    }

    #[test]
    fn linnik_density_oracle_q2() {
        // direct recount of {trace odd, omega <= 4} in the ball of height
        // 2^2
        let b = budget();
        let d = linnik_density(&VarietySpec::sl(2), &trace2(), 1, 2, 2.0, 4, &b).unwrap();
        let points = enumerate_sl2(4.0, NormMode::Euclidean, &b).unwrap();
        let expect = points
            .points
            .iter()
            .filter(|p| {
                let tr = (p.get(0, 0) + p.get(1, 1)) as i128;
                tr.rem_euclid(2) == 1 && numeric::omega(tr).unwrap() <= 4
            })
            .count() as u64;
        assert_eq!(d.count, expect);
    }

    #[test]
    fn linnik_density_trivial_modulus_matches_histogram() {
        let b = budget();
        let d = linnik_density(&VarietySpec::sl(2), &trace2(), 0, 1, 3.0, 2, &b).unwrap();
        let a = almost_prime_count_streamed(&VarietySpec::sl(2), &trace2(), 1.0, &b).unwrap();
        assert_eq!(d.count, a.at_most(2));
        assert!(d.reference.is_infinite());
    }

    #[test]
    fn profile_matches_individual_searches() {
        let b = budget();
        let v = VarietySpec::sl(2);
        let profile = linnik_profile(&v, &trace2(), 5, 3.0, 4, &b).unwrap();
        assert_eq!(profile.keys().copied().collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        for (&cls, got) in &profile {
            let single = linnik_search(&v, &trace2(), cls, 5, 3.0, 4, &b).unwrap();
            assert_eq!(got, &single, "class {cls}");
            assert!(got.found.is_some(), "class {cls}");
        }
    }

    #[test]
    fn profile_mod_7_finds_all_classes() {
        let profile =
            linnik_profile(&VarietySpec::sl(2), &trace2(), 7, 3.0, 6, &budget()).unwrap();
        assert_eq!(profile.len(), 6);
        assert!(profile.values().all(|r| r.found.is_some()));
        assert!(profile.values().all(|r| r.sigma_emp.unwrap() <= 3.0));
    }

    #[test]
    fn attained_traces_cover_everything_mod_5() {
        let set = attained_values(&VarietySpec::sl(2), &trace2(), 5, &budget()).unwrap();
        assert_eq!(set, BTreeSet::from([0, 1, 2, 3, 4]));
    }
}
