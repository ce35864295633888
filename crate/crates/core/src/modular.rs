//! Residue-ring arithmetic: reduction maps, exhaustive finite matrix groups
//! mod q, group orders, CRT combination, and the exact local densities used
//! by the sieve.

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::geometry::{GroupSpec, LatticePoint, PolynomialMap, VarietySpec};
use crate::numeric::{self, Factorization};
use num::BigRational;
use num::{BigInt, One};
use serde::{Deserialize, Serialize};

/// The ring Z/q together with the factorization of q.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRing", into = "RawRing")]
pub struct ResidueRing {
    q: u64,
    factorization: Factorization,
}

#[derive(Serialize, Deserialize, Clone)]
struct RawRing {
    q: u64,
}

impl TryFrom<RawRing> for ResidueRing {
    type Error = Error;
    fn try_from(r: RawRing) -> Result<Self> {
        ResidueRing::new(r.q)
    }
}

impl From<ResidueRing> for RawRing {
    fn from(r: ResidueRing) -> Self {
        RawRing { q: r.q }
    }
}

impl ResidueRing {
    pub fn new(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::domain("residue ring modulus must be positive".to_string()));
        }
        Ok(ResidueRing {
            q,
            factorization: numeric::factorize(q as u128)?,
        })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }
}

/// An entrywise-reduced matrix or vector over Z/q.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResiduePoint {
    pub ring: ResidueRing,
    pub rows: u32,
    pub cols: u32,
    pub entries: Vec<u64>,
}

impl ResiduePoint {
    pub fn new(ring: ResidueRing, rows: u32, cols: u32, entries: Vec<u64>) -> Result<Self> {
        if entries.len() != (rows as usize) * (cols as usize) {
            return Err(Error::domain("residue point shape mismatch".to_string()));
        }
        if entries.iter().any(|&e| e >= ring.q()) {
            return Err(Error::domain("residue entries must lie in [0, q)".to_string()));
        }
        Ok(ResiduePoint {
            ring,
            rows,
            cols,
            entries,
        })
    }

    pub fn q(&self) -> u64 {
        self.ring.q()
    }

    pub fn get(&self, r: u32, c: u32) -> u64 {
        self.entries[(r * self.cols + c) as usize]
    }

    pub fn matmul(&self, rhs: &ResiduePoint) -> Result<ResiduePoint> {
        if self.q() != rhs.q() {
            return Err(Error::domain("residue matmul over different rings".to_string()));
        }
        if self.cols != rhs.rows {
            return Err(Error::domain("residue matmul shape mismatch".to_string()));
        }
        let q = self.q() as u128;
        let mut entries = vec![0u64; (self.rows * rhs.cols) as usize];
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc: u128 = 0;
                for k in 0..self.cols {
                    acc = (acc + self.get(r, k) as u128 * rhs.get(k, c) as u128) % q;
                }
                entries[(r * rhs.cols + c) as usize] = acc as u64;
            }
        }
        ResiduePoint::new(self.ring.clone(), self.rows, rhs.cols, entries)
    }
}

/// Entrywise reduction into [0, q); a monoid homomorphism on matrices.
pub fn reduce_point(x: &LatticePoint, q: u64) -> Result<ResiduePoint> {
    let ring = ResidueRing::new(q)?;
    let entries = x
        .entries()
        .iter()
        .map(|&e| e.rem_euclid(q as i64) as u64)
        .collect();
    ResiduePoint::new(ring, x.rows(), x.cols(), entries)
}

/// |SL_n(Z/p^k)| by the closed formula.
fn sl_order_prime_power(n: u32, p: u128, k: u32) -> Result<u128> {
    let dim = (n * n - 1) as u32;
    let mut order: u128 = 1;
    let mul = |a: u128, b: u128| -> Result<u128> {
        a.checked_mul(b)
            .ok_or_else(|| Error::data("group order overflow".to_string()))
    };
    for _ in 0..(k - 1) * dim {
        order = mul(order, p)?;
    }
    for _ in 0..n * (n - 1) / 2 {
        order = mul(order, p)?;
    }
    let mut pi: u128 = p;
    for _ in 2..=n {
        pi = mul(pi, p)?;
        order = mul(order, pi - 1)?;
    }
    Ok(order)
}

/// |G(Z/q)|: closed formula with CRT for SL_n, exhaustive count otherwise.
pub fn group_order(spec: &GroupSpec, q: u64, budget: &Budget) -> Result<u128> {
    if q == 0 {
        return Err(Error::domain("modulus must be positive".to_string()));
    }
    if q == 1 {
        return Ok(1);
    }
    match spec {
        GroupSpec::SpecialLinear { n } => {
            let mut order: u128 = 1;
            for &(p, k) in numeric::factorize(q as u128)?.factors() {
                order = order
                    .checked_mul(sl_order_prime_power(*n, p, k)?)
                    .ok_or_else(|| Error::data("group order overflow".to_string()))?;
            }
            Ok(order)
        }
        GroupSpec::QuadricGroup { .. } => {
            let mut count: u128 = 0;
            for_each_element(spec, q, budget, |_| count += 1)?;
            Ok(count)
        }
    }
}

fn iteration_cost(spec: &GroupSpec, q: u64) -> u128 {
    let q = q as u128;
    match spec {
        // solved-last-entry path iterates q^3 triples
        GroupSpec::SpecialLinear { n } if *n == 2 => q.saturating_pow(3),
        _ => {
            let entries = (spec.ambient() * spec.ambient()) as u32;
            q.saturating_pow(entries)
        }
    }
}

/// Visits the flattened entries of every element of G(Z/q) exactly once.
///
/// SL_2 uses a solved path (a, b, c free, d from the determinant congruence)
/// costing q^3 candidates; other groups scan all matrices mod q.
pub fn for_each_element<F: FnMut(&[u64])>(
    spec: &GroupSpec,
    q: u64,
    budget: &Budget,
    mut visit: F,
) -> Result<()> {
    if q == 0 {
        return Err(Error::domain("modulus must be positive".to_string()));
    }
    budget.admit(
        iteration_cost(spec, q),
        &format!("residue group scan mod {q}"),
        None,
    )?;
    if q == 1 {
        let n = spec.ambient() as usize;
        visit(&vec![0; n * n]);
        return Ok(());
    }
    match spec {
        GroupSpec::SpecialLinear { n } if *n == 2 => {
            let mut e = [0u64; 4];
            for a in 0..q {
                let g = numeric::gcd_u64(a, q);
                let qg = q / g;
                // inverse of a/g mod q/g; any value works when q/g = 1
                let inv = if qg == 1 {
                    0
                } else {
                    numeric::invmod_u64(a / g % qg, qg).expect("a/g is a unit mod q/g")
                };
                for b in 0..q {
                    for c in 0..q {
                        let rhs = (1 + b as u128 * c as u128 % q as u128) % q as u128;
                        let rhs = rhs as u64;
                        if rhs % g != 0 {
                            continue;
                        }
                        let d0 = if qg == 1 {
                            0
                        } else {
                            (rhs / g % qg) as u128 * inv as u128 % qg as u128
                        } as u64;
                        e[0] = a;
                        e[1] = b;
                        e[2] = c;
                        for t in 0..g {
                            e[3] = d0 + t * qg;
                            visit(&e);
                        }
                    }
                }
            }
            Ok(())
        }
        _ => {
            let v = VarietySpec::group(spec.clone());
            let n = spec.ambient() as usize;
            let mut e = vec![0u64; n * n];
            loop {
                if v.is_on_variety_mod(&e, q)? {
                    visit(&e);
                }
                // odometer increment
                let mut i = 0;
                loop {
                    if i == e.len() {
                        return Ok(());
                    }
                    e[i] += 1;
                    if e[i] < q {
                        break;
                    }
                    e[i] = 0;
                    i += 1;
                }
            }
        }
    }
}

/// All elements of G(Z/q), each exactly once.
pub fn enumerate_group_mod(spec: &GroupSpec, q: u64, budget: &Budget) -> Result<Vec<ResiduePoint>> {
    let ring = ResidueRing::new(q)?;
    let n = spec.ambient();
    let mut out = Vec::new();
    for_each_element(spec, q, budget, |e| {
        out.push(ResiduePoint {
            ring: ring.clone(),
            rows: n,
            cols: n,
            entries: e.to_vec(),
        });
    })?;
    Ok(out)
}

/// All residue solutions of the variety mod q (brute force except for group
/// varieties, which use the group scan).
pub fn enumerate_variety_mod(v: &VarietySpec, q: u64, budget: &Budget) -> Result<Vec<Vec<u64>>> {
    if q == 0 {
        return Err(Error::domain("modulus must be positive".to_string()));
    }
    if let VarietySpec::Group { group } = v {
        let mut out = Vec::new();
        for_each_element(group, q, budget, |e| out.push(e.to_vec()))?;
        return Ok(out);
    }
    let (r, c) = v.point_shape();
    let len = (r * c) as usize;
    budget.admit(
        (q as u128).saturating_pow(len as u32),
        &format!("residue variety scan mod {q}"),
        None,
    )?;
    if q == 1 {
        return Ok(vec![vec![0; len]]);
    }
    let mut out = Vec::new();
    let mut e = vec![0u64; len];
    loop {
        if v.is_on_variety_mod(&e, q)? {
            out.push(e.clone());
        }
        let mut i = 0;
        loop {
            if i == len {
                return Ok(out);
            }
            e[i] += 1;
            if e[i] < q {
                break;
            }
            e[i] = 0;
            i += 1;
        }
    }
}

/// The sieve's local density at a squarefree modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDensity {
    pub f: PolynomialMap,
    pub d: u64,
    /// Exact rational density, never a float.
    pub rho: BigRational,
}

impl LocalDensity {
    /// The density as a float, for reports; comparisons should use `rho`.
    pub fn value(&self) -> f64 {
        use num::ToPrimitive;
        self.rho.to_f64().unwrap_or(f64::NAN)
    }
}

/// rho(d) = d |G(Z/dN1) on {g = 0}| / |G(Z/dN1)| for squarefree d, where
/// N1 is the part of the normalizer N coprime to d. Computed prime by prime
/// and combined multiplicatively, which CRT makes exact.
pub fn local_density(
    f: &PolynomialMap,
    spec: &GroupSpec,
    d: u64,
    budget: &Budget,
) -> Result<LocalDensity> {
    if d == 0 {
        return Err(Error::domain("density modulus must be positive".to_string()));
    }
    let fac = numeric::factorize(d as u128)?;
    if !fac.is_squarefree() {
        return Err(Error::domain(format!("density modulus {d} is not squarefree")));
    }
    let n1 = coprime_part(f.normalizer, d)?;
    let mut rho = BigRational::one();
    for &(p, _) in fac.factors() {
        let p = p as u64;
        let m = p
            .checked_mul(n1)
            .ok_or_else(|| Error::data("density modulus overflow".to_string()))?;
        rho *= local_density_at_modulus(f, spec, m, budget)? * BigRational::from_integer(p.into());
    }
    Ok(LocalDensity {
        f: f.clone(),
        d,
        rho,
    })
}

/// |G(Z/m) on {g = 0}| / |G(Z/m)|.
fn local_density_at_modulus(
    f: &PolynomialMap,
    spec: &GroupSpec,
    m: u64,
    budget: &Budget,
) -> Result<BigRational> {
    let mut zeros: u128 = 0;
    let mut total: u128 = 0;
    for_each_element(spec, m, budget, |e| {
        total += 1;
        if f.g.eval_mod(e, m) == 0 {
            zeros += 1;
        }
    })?;
    Ok(BigRational::new(
        BigInt::from(zeros),
        BigInt::from(total),
    ))
}

fn coprime_part(n: u64, d: u64) -> Result<u64> {
    let mut out = 1u64;
    for &(p, k) in numeric::factorize(n as u128)?.factors() {
        if d as u128 % p != 0 {
            out = out
                .checked_mul((p as u64).pow(k))
                .ok_or_else(|| Error::data("normalizer overflow".to_string()))?;
        }
    }
    Ok(out)
}

/// The unique residue point mod the product of pairwise coprime moduli
/// reducing to each input.
pub fn crt_combine(residues: &[(u64, ResiduePoint)]) -> Result<ResiduePoint> {
    if residues.is_empty() {
        return Err(Error::domain("crt_combine needs at least one residue".to_string()));
    }
    let (rows, cols) = (residues[0].1.rows, residues[0].1.cols);
    for (q, p) in residues {
        if *q != p.q() {
            return Err(Error::domain("stated modulus disagrees with the residue ring".to_string()));
        }
        if p.rows != rows || p.cols != cols {
            return Err(Error::domain("crt_combine shape mismatch".to_string()));
        }
    }
    for i in 0..residues.len() {
        for j in i + 1..residues.len() {
            if numeric::gcd_u64(residues[i].0, residues[j].0) != 1 {
                return Err(Error::domain(format!(
                    "moduli {} and {} are not coprime",
                    residues[i].0, residues[j].0
                )));
            }
        }
    }
    let mut modulus: u64 = 1;
    let mut entries: Vec<u64> = residues[0].1.entries.clone();
    let mut first = true;
    for (q, p) in residues {
        if first {
            modulus = *q;
            first = false;
            continue;
        }
        let new_modulus = modulus
            .checked_mul(*q)
            .ok_or_else(|| Error::data("combined modulus overflow".to_string()))?;
        for (e, &add) in entries.iter_mut().zip(p.entries.iter()) {
            *e = crt_pair(*e, modulus, add, *q)?;
        }
        modulus = new_modulus;
    }
    ResiduePoint::new(ResidueRing::new(modulus)?, rows, cols, entries)
}

/// x with x = a mod m, x = b mod n for coprime m, n.
fn crt_pair(a: u64, m: u64, b: u64, n: u64) -> Result<u64> {
    let inv = numeric::invmod_u64(m % n, n)
        .ok_or_else(|| Error::domain("crt moduli not coprime".to_string()))?;
    let diff = (b as i128 - a as i128).rem_euclid(n as i128) as u128;
    let t = diff * inv as u128 % n as u128;
    Ok((a as u128 + t * m as u128) as u64)
}
