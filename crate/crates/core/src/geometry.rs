//! Variety and group specifications, integer lattice points with cached
//! heights, exact membership predicates, group actions, sparse integer
//! polynomials, and the spectral parameter tables used by the exponent
//! formulas.
//!
//! All membership checks are exact integer arithmetic; floating point
//! appears only in the cached height, which is recomputable from entries.

use crate::error::{Error, Result};
use crate::numeric::{self, Rational};
use serde::{Deserialize, Serialize};

/// An integer matrix or vector with a cached Euclidean height.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawPoint", into = "RawPoint")]
pub struct LatticePoint {
    rows: u32,
    cols: u32,
    entries: Vec<i64>,
    height_sq: u128,
}

#[derive(Serialize, Deserialize, Clone)]
struct RawPoint {
    rows: u32,
    cols: u32,
    entries: Vec<i64>,
}

impl From<RawPoint> for LatticePoint {
    fn from(r: RawPoint) -> Self {
        LatticePoint::new(r.rows, r.cols, r.entries).expect("invalid serialized lattice point")
    }
}

impl From<LatticePoint> for RawPoint {
    fn from(p: LatticePoint) -> Self {
        RawPoint {
            rows: p.rows,
            cols: p.cols,
            entries: p.entries,
        }
    }
}

fn sum_of_squares(entries: &[i64]) -> u128 {
    entries
        .iter()
        .map(|&e| (e as i128 * e as i128) as u128)
        .sum()
}

impl LatticePoint {
    pub fn new(rows: u32, cols: u32, entries: Vec<i64>) -> Result<Self> {
        if entries.len() != (rows as usize) * (cols as usize) {
            return Err(Error::domain(format!(
                "lattice point shape {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let height_sq = sum_of_squares(&entries);
        Ok(LatticePoint {
            rows,
            cols,
            entries,
            height_sq,
        })
    }

    pub fn vector(entries: Vec<i64>) -> Self {
        let n = entries.len() as u32;
        LatticePoint::new(n, 1, entries).unwrap()
    }

    pub fn square(n: u32, entries: Vec<i64>) -> Result<Self> {
        LatticePoint::new(n, n, entries)
    }

    pub fn identity(n: u32) -> Self {
        let mut e = vec![0i64; (n * n) as usize];
        for i in 0..n as usize {
            e[i * n as usize + i] = 1;
        }
        LatticePoint::new(n, n, e).unwrap()
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn get(&self, r: u32, c: u32) -> i64 {
        self.entries[(r * self.cols + c) as usize]
    }

    /// Euclidean height (norm of the flattened entries).
    pub fn height(&self) -> f64 {
        (self.height_sq as f64).sqrt()
    }

    /// Exact squared Euclidean height.
    pub fn height_sq(&self) -> u128 {
        self.height_sq
    }

    /// Sup-norm height (largest absolute entry).
    pub fn sup_norm(&self) -> u64 {
        self.entries.iter().map(|e| e.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn transpose(&self) -> LatticePoint {
        let mut e = vec![0i64; self.entries.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                e[(c * self.rows + r) as usize] = self.get(r, c);
            }
        }
        LatticePoint::new(self.cols, self.rows, e).unwrap()
    }

    /// Exact matrix product with overflow detection.
    pub fn matmul(&self, rhs: &LatticePoint) -> Result<LatticePoint> {
        if self.cols != rhs.rows {
            return Err(Error::domain(format!(
                "matmul shape mismatch: {}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut e = vec![0i64; (self.rows * rhs.cols) as usize];
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc: i128 = 0;
                for k in 0..self.cols {
                    acc += self.get(r, k) as i128 * rhs.get(k, c) as i128;
                }
                e[(r * rhs.cols + c) as usize] = i64::try_from(acc)
                    .map_err(|_| Error::data("matmul entry overflow".to_string()))?;
            }
        }
        LatticePoint::new(self.rows, rhs.cols, e)
    }

    /// Deterministic sort key: (squared height, lexicographic entries).
    pub fn sort_key(&self) -> (u128, &[i64]) {
        (self.height_sq, &self.entries)
    }
}

/// Which norm bounds the enumeration ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    Euclidean,
    Sup,
}

impl NormMode {
    pub fn tag(&self) -> &'static str {
        match self {
            NormMode::Euclidean => "euclidean",
            NormMode::Sup => "sup",
        }
    }
}

/// A height cutoff H <= T, resolved to exact integer comparisons:
/// Euclidean uses the squared height against floor(T^2), sup-norm uses the
/// largest absolute entry against floor(T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightBound {
    t: f64,
    mode: NormMode,
    sq_bound: u128,
    abs_bound: u64,
}

impl HeightBound {
    pub fn new(t: f64, mode: NormMode) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::domain(format!("height bound must be finite and nonnegative, got {t}")));
        }
        // integral T squares exactly in integer arithmetic; floats would
        // already be lossy at T ~ 1e8
        let sq_bound = if t.fract() == 0.0 && t < 9e18 {
            let ti = t as u128;
            ti * ti
        } else {
            (t * t).floor() as u128
        };
        Ok(HeightBound {
            t,
            mode,
            sq_bound,
            abs_bound: t.floor() as u64,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn mode(&self) -> NormMode {
        self.mode
    }

    /// floor(T^2), the Euclidean squared-height cutoff.
    pub fn sq_bound(&self) -> u128 {
        self.sq_bound
    }

    /// floor(T), the sup-norm cutoff.
    pub fn abs_bound(&self) -> u64 {
        self.abs_bound
    }

    pub fn admits(&self, p: &LatticePoint) -> bool {
        match self.mode {
            NormMode::Euclidean => p.height_sq() <= self.sq_bound,
            NormMode::Sup => p.sup_norm() <= self.abs_bound,
        }
    }

    /// Mode-aware integer sort key.
    pub fn key(&self, p: &LatticePoint) -> u128 {
        match self.mode {
            NormMode::Euclidean => p.height_sq(),
            NormMode::Sup => p.sup_norm() as u128,
        }
    }
}

/// Exact determinant of a square lattice point (fraction-free Bareiss).
pub fn determinant(x: &LatticePoint) -> Result<i128> {
    if x.rows() != x.cols() {
        return Err(Error::domain("determinant of non-square matrix".to_string()));
    }
    let n = x.rows() as usize;
    let mut m: Vec<i128> = x.entries().iter().map(|&e| e as i128).collect();
    bareiss_det(&mut m, n)
}

fn bareiss_det(m: &mut [i128], n: usize) -> Result<i128> {
    let mut sign: i128 = 1;
    let mut prev: i128 = 1;
    for k in 0..n.saturating_sub(1) {
        if m[k * n + k] == 0 {
            let swap = (k + 1..n).find(|&r| m[r * n + k] != 0);
            match swap {
                Some(r) => {
                    for c in 0..n {
                        m.swap(k * n + c, r * n + c);
                    }
                    sign = -sign;
                }
                None => return Ok(0),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = m[i * n + j]
                    .checked_mul(m[k * n + k])
                    .and_then(|a| a.checked_sub(m[i * n + k].checked_mul(m[k * n + j])?))
                    .ok_or_else(|| Error::data("determinant overflow".to_string()))?;
                m[i * n + j] = num / prev;
            }
        }
        prev = m[k * n + k];
    }
    Ok(sign * m[n * n - 1])
}

/// Characteristic polynomial coefficients [1, c1, ..., cn] of a square
/// integer matrix, exact (Faddeev-LeVerrier; the divisions are exact).
pub fn char_poly(x: &LatticePoint) -> Result<Vec<i128>> {
    if x.rows() != x.cols() {
        return Err(Error::domain("char_poly of non-square matrix".to_string()));
    }
    let n = x.rows() as usize;
    let a: Vec<i128> = x.entries().iter().map(|&e| e as i128).collect();
    let mut coeffs = vec![0i128; n + 1];
    coeffs[0] = 1;
    let mut m = vec![0i128; n * n]; // M_0 = 0
    for k in 1..=n {
        // M_k = A*M_{k-1} + c_{k-1} I ; c_k = -tr(A*M_k)/k
        let mut am = vec![0i128; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc: i128 = 0;
                for l in 0..n {
                    acc = acc
                        .checked_add(
                            a[i * n + l]
                                .checked_mul(m[l * n + j])
                                .ok_or_else(|| Error::data("char_poly overflow".to_string()))?,
                        )
                        .ok_or_else(|| Error::data("char_poly overflow".to_string()))?;
                }
                am[i * n + j] = acc;
            }
        }
        for i in 0..n {
            am[i * n + i] += coeffs[k - 1];
        }
        m = am;
        let mut tr: i128 = 0;
        for i in 0..n {
            let mut acc: i128 = 0;
            for l in 0..n {
                acc = acc
                    .checked_add(
                        a[i * n + l]
                            .checked_mul(m[l * n + i])
                            .ok_or_else(|| Error::data("char_poly overflow".to_string()))?,
                    )
                    .ok_or_else(|| Error::data("char_poly overflow".to_string()))?;
            }
            tr += acc;
        }
        debug_assert_eq!(tr % k as i128, 0);
        coeffs[k] = -tr / k as i128;
    }
    Ok(coeffs)
}

/// A symmetric nondegenerate integer quadratic form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawForm", into = "RawForm")]
pub struct QuadraticForm {
    matrix: Vec<Vec<i64>>,
    signature: (u32, u32),
}

#[derive(Serialize, Deserialize, Clone)]
struct RawForm {
    matrix: Vec<Vec<i64>>,
}

impl TryFrom<RawForm> for QuadraticForm {
    type Error = Error;
    fn try_from(r: RawForm) -> Result<Self> {
        QuadraticForm::new(r.matrix)
    }
}

impl From<QuadraticForm> for RawForm {
    fn from(f: QuadraticForm) -> Self {
        RawForm { matrix: f.matrix }
    }
}

impl QuadraticForm {
    pub fn new(matrix: Vec<Vec<i64>>) -> Result<Self> {
        let m = matrix.len();
        if m == 0 || matrix.iter().any(|row| row.len() != m) {
            return Err(Error::domain("quadratic form matrix must be square".to_string()));
        }
        for i in 0..m {
            for j in 0..m {
                if matrix[i][j] != matrix[j][i] {
                    return Err(Error::domain("quadratic form matrix must be symmetric".to_string()));
                }
            }
        }
        let flat = LatticePoint::new(
            m as u32,
            m as u32,
            matrix.iter().flatten().copied().collect(),
        )?;
        if determinant(&flat)? == 0 {
            return Err(Error::domain("quadratic form must be nondegenerate".to_string()));
        }
        let signature = signature_of(&flat)?;
        Ok(QuadraticForm { matrix, signature })
    }

    pub fn diagonal(diag: &[i64]) -> Result<Self> {
        let m = diag.len();
        let mut matrix = vec![vec![0i64; m]; m];
        for (i, &d) in diag.iter().enumerate() {
            matrix[i][i] = d;
        }
        QuadraticForm::new(matrix)
    }

    pub fn size(&self) -> u32 {
        self.matrix.len() as u32
    }

    /// (positive, negative) eigenvalue counts.
    pub fn signature(&self) -> (u32, u32) {
        self.signature
    }

    pub fn matrix_point(&self) -> LatticePoint {
        LatticePoint::new(
            self.size(),
            self.size(),
            self.matrix.iter().flatten().copied().collect(),
        )
        .unwrap()
    }

    pub fn entry(&self, i: u32, j: u32) -> i64 {
        self.matrix[i as usize][j as usize]
    }
}

/// Signature of a symmetric integer matrix with nonzero determinant.
/// Every root of the characteristic polynomial is real, so Descartes'
/// rule of signs counts the positive roots exactly.
fn signature_of(x: &LatticePoint) -> Result<(u32, u32)> {
    let coeffs = char_poly(x)?;
    let n = x.rows();
    let pos = sign_changes(&coeffs);
    Ok((pos, n - pos))
}

fn sign_changes(coeffs: &[i128]) -> u32 {
    let mut changes = 0;
    let mut last = 0i128;
    for &c in coeffs {
        if c == 0 {
            continue;
        }
        if last != 0 && (c > 0) != (last > 0) {
            changes += 1;
        }
        last = c;
    }
    changes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cover {
    Spin,
    SpecialOrthogonal,
}

/// The acting algebraic group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupSpec {
    SpecialLinear { n: u32 },
    QuadricGroup { b: QuadraticForm, cover: Cover },
}

impl GroupSpec {
    pub fn sl(n: u32) -> Self {
        GroupSpec::SpecialLinear { n }
    }

    /// Algebraic dimension.
    pub fn dim_alg(&self) -> u32 {
        match self {
            GroupSpec::SpecialLinear { n } => n * n - 1,
            GroupSpec::QuadricGroup { b, .. } => {
                let m = b.size();
                m * (m - 1) / 2
            }
        }
    }

    /// Matrix size of the ambient embedding.
    pub fn ambient(&self) -> u32 {
        match self {
            GroupSpec::SpecialLinear { n } => *n,
            GroupSpec::QuadricGroup { b, .. } => b.size(),
        }
    }

    /// Exact membership test for an integer matrix.
    pub fn contains(&self, g: &LatticePoint) -> Result<bool> {
        let n = self.ambient();
        if g.rows() != n || g.cols() != n {
            return Err(Error::domain(format!(
                "group element must be {n}x{n}, got {}x{}",
                g.rows(),
                g.cols()
            )));
        }
        match self {
            GroupSpec::SpecialLinear { .. } => Ok(determinant(g)? == 1),
            GroupSpec::QuadricGroup { b, .. } => {
                // preserves the form and has determinant 1 (special subgroup;
                // spin covers are handled in these orthogonal coordinates)
                if determinant(g)? != 1 {
                    return Ok(false);
                }
                let bt = b.matrix_point();
                let lhs = g.transpose().matmul(&bt)?.matmul(g)?;
                Ok(lhs == bt)
            }
        }
    }
}

/// Orbit membership oracles. BFS closures are generic, but exhaustive orbit
/// extraction needs an exact membership predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitMembership {
    /// Orbit of a primitive vector under the full integral group: membership
    /// is gcd of the entries equal to 1.
    PrimitiveVector,
    /// No decidable membership; only the Zariski-closure equations (none by
    /// default) constrain candidates.
    ClosureOnly,
}

/// Which set of integral points is being studied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarietySpec {
    Group {
        group: GroupSpec,
    },
    /// {x in M_{m x n}: (transpose x) B x = A}
    QuadricRepresentation {
        b: QuadraticForm,
        a: QuadraticForm,
    },
    /// {(x, y): x^2 - D y^2 = 1}
    PellNormForm {
        d: u64,
    },
    Orbit {
        group: GroupSpec,
        base: LatticePoint,
        generators: Vec<LatticePoint>,
        membership: OrbitMembership,
    },
}

/// The standard generating set of SL_2(Z): both elementary matrices and
/// their inverses.
pub fn sl2_default_generators() -> Vec<LatticePoint> {
    [
        [1, 1, 0, 1],
        [1, -1, 0, 1],
        [1, 0, 1, 1],
        [1, 0, -1, 1],
    ]
    .iter()
    .map(|e| LatticePoint::square(2, e.to_vec()).unwrap())
    .collect()
}

impl VarietySpec {
    pub fn group(g: GroupSpec) -> Self {
        VarietySpec::Group { group: g }
    }

    pub fn sl(n: u32) -> Self {
        VarietySpec::group(GroupSpec::sl(n))
    }

    pub fn pell(d: u64) -> Result<Self> {
        let r = numeric::isqrt_u128(d as u128) as u64;
        if d == 0 || r * r == d {
            return Err(Error::domain(format!(
                "Pell form needs a nonsquare positive D, got {d}"
            )));
        }
        Ok(VarietySpec::PellNormForm { d })
    }

    pub fn quadric(b: QuadraticForm, a: QuadraticForm) -> Result<Self> {
        if a.size() > b.size() {
            return Err(Error::domain(format!(
                "represented form size {} exceeds ambient form size {}",
                a.size(),
                b.size()
            )));
        }
        Ok(VarietySpec::QuadricRepresentation { b, a })
    }

    pub fn orbit(
        group: GroupSpec,
        base: LatticePoint,
        generators: Vec<LatticePoint>,
        membership: OrbitMembership,
    ) -> Result<Self> {
        if base.rows() != group.ambient() {
            return Err(Error::domain("orbit base shape does not match the acting group".to_string()));
        }
        for g in &generators {
            if !group.contains(g)? {
                return Err(Error::domain("orbit generator is not a group element".to_string()));
            }
        }
        Ok(VarietySpec::Orbit {
            group,
            base,
            generators,
            membership,
        })
    }

    /// Orbit of (1,0) under SL_2(Z): the primitive vectors of the plane.
    pub fn primitive_vectors_sl2() -> Self {
        VarietySpec::orbit(
            GroupSpec::sl(2),
            LatticePoint::vector(vec![1, 0]),
            sl2_default_generators(),
            OrbitMembership::PrimitiveVector,
        )
        .unwrap()
    }

    /// Shape (rows, cols) of the points of this variety.
    pub fn point_shape(&self) -> (u32, u32) {
        match self {
            VarietySpec::Group { group } => (group.ambient(), group.ambient()),
            VarietySpec::QuadricRepresentation { b, a } => (b.size(), a.size()),
            VarietySpec::PellNormForm { .. } => (2, 1),
            VarietySpec::Orbit { base, .. } => (base.rows(), base.cols()),
        }
    }

    /// The group acting on this variety's points by left multiplication
    /// (Pell points compose through their own norm-form multiplication).
    pub fn acting_group(&self) -> Option<&GroupSpec> {
        match self {
            VarietySpec::Group { group } => Some(group),
            VarietySpec::QuadricRepresentation { .. } => None,
            VarietySpec::PellNormForm { .. } => None,
            VarietySpec::Orbit { group, .. } => Some(group),
        }
    }

    /// Exact check of all defining equations (and membership oracle for
    /// orbits that declare one).
    pub fn is_on_variety(&self, x: &LatticePoint) -> Result<bool> {
        let (r, c) = self.point_shape();
        if x.rows() != r || x.cols() != c {
            return Err(Error::domain(format!(
                "point shape {}x{} does not match variety shape {r}x{c}",
                x.rows(),
                x.cols()
            )));
        }
        match self {
            VarietySpec::Group { group } => group.contains(x),
            VarietySpec::QuadricRepresentation { b, a } => {
                let bt = b.matrix_point();
                let lhs = x.transpose().matmul(&bt)?.matmul(x)?;
                Ok(lhs == a.matrix_point())
            }
            VarietySpec::PellNormForm { d } => {
                let (x0, y0) = (x.entries()[0] as i128, x.entries()[1] as i128);
                Ok(x0 * x0 - (*d as i128) * y0 * y0 == 1)
            }
            VarietySpec::Orbit { membership, .. } => match membership {
                OrbitMembership::PrimitiveVector => {
                    let g = x
                        .entries()
                        .iter()
                        .fold(0u64, |acc, &e| numeric::gcd_u64(acc, e.unsigned_abs()));
                    Ok(g == 1)
                }
                OrbitMembership::ClosureOnly => Ok(true),
            },
        }
    }

    /// Same defining equations, reduced mod q. Used to validate residue
    /// classes before lift searches.
    pub fn is_on_variety_mod(&self, entries: &[u64], q: u64) -> Result<bool> {
        let (r, c) = self.point_shape();
        if entries.len() != (r * c) as usize {
            return Err(Error::domain("residue point shape mismatch".to_string()));
        }
        if q == 1 {
            return Ok(true);
        }
        match self {
            VarietySpec::Group { group } => match group {
                GroupSpec::SpecialLinear { n } => {
                    Ok(det_mod(entries, *n as usize, q) == 1 % q)
                }
                GroupSpec::QuadricGroup { b, .. } => {
                    let m = b.size() as usize;
                    if det_mod(entries, m, q) != 1 % q {
                        return Ok(false);
                    }
                    Ok(form_preserved_mod(entries, b, q))
                }
            },
            VarietySpec::QuadricRepresentation { b, a } => {
                let (m, n) = (b.size() as usize, a.size() as usize);
                for i in 0..n {
                    for j in 0..n {
                        let mut acc: u128 = 0;
                        for s in 0..m {
                            for t in 0..m {
                                let bval = b.entry(s as u32, t as u32).rem_euclid(q as i64) as u128;
                                acc += entries[s * n + i] as u128 * bval % q as u128
                                    * entries[t * n + j] as u128
                                    % q as u128;
                            }
                        }
                        let want = a.entry(i as u32, j as u32).rem_euclid(q as i64) as u128;
                        if acc % q as u128 != want {
                            return Ok(false);
                        }
                    }
                }
                Ok(true)
            }
            VarietySpec::PellNormForm { d } => {
                let (x, y) = (entries[0] as u128, entries[1] as u128);
                let q128 = q as u128;
                let lhs = (x * x % q128 + (q128 - (*d as u128) % q128) * (y * y % q128)) % q128;
                Ok(lhs == 1 % q128)
            }
            VarietySpec::Orbit { membership, .. } => match membership {
                OrbitMembership::PrimitiveVector => {
                    // residues of primitive vectors are exactly the tuples
                    // whose gcd with q is 1
                    let g = entries
                        .iter()
                        .fold(q, |acc, &e| numeric::gcd_u64(acc, e % q));
                    Ok(g == 1)
                }
                OrbitMembership::ClosureOnly => Ok(true),
            },
        }
    }
}

fn det_mod(entries: &[u64], n: usize, q: u64) -> u64 {
    // cofactor expansion; ambient sizes are tiny (n <= 4 at desk scale)
    fn go(m: &[u64], idx: &[usize], n: usize, q: u64) -> u64 {
        if idx.len() == 1 {
            return m[(n - idx.len()) * n + idx[0]] % q;
        }
        let row = n - idx.len();
        let mut acc: i128 = 0;
        for (k, &col) in idx.iter().enumerate() {
            let sub: Vec<usize> = idx.iter().copied().filter(|&c| c != col).collect();
            let minor = go(m, &sub, n, q) as i128;
            let sign = if k % 2 == 0 { 1 } else { -1 };
            acc += sign * (m[row * n + col] % q) as i128 * minor;
        }
        acc.rem_euclid(q as i128) as u64
    }
    go(entries, &(0..n).collect::<Vec<_>>(), n, q)
}

fn form_preserved_mod(entries: &[u64], b: &QuadraticForm, q: u64) -> bool {
    let m = b.size() as usize;
    for i in 0..m {
        for j in 0..m {
            let mut acc: i128 = 0;
            for s in 0..m {
                for t in 0..m {
                    acc += entries[s * m + i] as i128
                        * b.entry(s as u32, t as u32) as i128
                        * entries[t * m + j] as i128;
                }
            }
            let want = b.entry(i as u32, j as u32) as i128;
            if (acc - want).rem_euclid(q as i128) != 0 {
                return false;
            }
        }
    }
    true
}

/// Applies a verified group element to a point of the variety; the image is
/// re-verified to lie on the variety.
pub fn apply_group(g: &LatticePoint, x: &LatticePoint, v: &VarietySpec) -> Result<LatticePoint> {
    let image = match v {
        VarietySpec::PellNormForm { d } => {
            if !v.is_on_variety(g)? {
                return Err(Error::domain("Pell action element is not a Pell solution".to_string()));
            }
            let (x1, y1) = (g.entries()[0] as i128, g.entries()[1] as i128);
            let (x2, y2) = (x.entries()[0] as i128, x.entries()[1] as i128);
            let d = *d as i128;
            let nx = x1 * x2 + d * y1 * y2;
            let ny = x1 * y2 + y1 * x2;
            LatticePoint::vector(vec![
                i64::try_from(nx).map_err(|_| Error::data("Pell action overflow".to_string()))?,
                i64::try_from(ny).map_err(|_| Error::data("Pell action overflow".to_string()))?,
            ])
        }
        _ => {
            let group = v
                .acting_group()
                .ok_or_else(|| Error::domain("variety has no matrix group action".to_string()))?;
            if !group.contains(g)? {
                return Err(Error::domain("element is not in the acting group".to_string()));
            }
            g.matmul(x)?
        }
    };
    if !v.is_on_variety(&image)? {
        return Err(Error::data("group action left the variety".to_string()));
    }
    Ok(image)
}

/// Sparse integer polynomial in the flattened entries of a point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsePoly {
    /// Terms (coefficient, [(variable index, power), ...]); variables index
    /// the row-major flattened entries.
    pub terms: Vec<(i64, Vec<(u16, u8)>)>,
}

impl SparsePoly {
    pub fn constant(c: i64) -> Self {
        SparsePoly {
            terms: vec![(c, vec![])],
        }
    }

    /// Trace of an n x n matrix point.
    pub fn trace(n: u16) -> Self {
        SparsePoly {
            terms: (0..n).map(|i| (1i64, vec![(i * n + i, 1)])).collect(),
        }
    }

    /// A single entry of an r x c matrix point.
    pub fn entry(rows: u16, cols: u16, r: u16, c: u16) -> Self {
        assert!(r < rows && c < cols);
        SparsePoly {
            terms: vec![(1, vec![(r * cols + c, 1)])],
        }
    }

    pub fn add(mut self, other: SparsePoly) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn mul(self, other: SparsePoly) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (c1, m1) in &self.terms {
            for (c2, m2) in &other.terms {
                let c = c1.checked_mul(*c2).expect("coefficient overflow in polynomial product");
                let mut m = m1.clone();
                for &(v, p) in m2 {
                    match m.iter_mut().find(|(w, _)| *w == v) {
                        Some((_, e)) => {
                            *e = e.checked_add(p).expect("exponent overflow in polynomial product")
                        }
                        None => m.push((v, p)),
                    }
                }
                m.sort_unstable_by_key(|&(v, _)| v);
                terms.push((c, m));
            }
        }
        SparsePoly { terms }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|(c, _)| *c != 0)
            .map(|(_, m)| m.iter().map(|&(_, p)| p as u32).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn max_var(&self) -> Option<u16> {
        self.terms
            .iter()
            .flat_map(|(_, m)| m.iter().map(|&(v, _)| v))
            .max()
    }

    pub fn eval(&self, entries: &[i64]) -> Result<i128> {
        let mut acc: i128 = 0;
        for (c, monomial) in &self.terms {
            let mut term: i128 = *c as i128;
            for &(var, pow) in monomial {
                let x = *entries.get(var as usize).ok_or_else(|| {
                    Error::domain("polynomial variable out of range for point shape".to_string())
                })? as i128;
                for _ in 0..pow {
                    term = term
                        .checked_mul(x)
                        .ok_or_else(|| Error::data("polynomial evaluation overflow".to_string()))?;
                }
            }
            acc = acc
                .checked_add(term)
                .ok_or_else(|| Error::data("polynomial evaluation overflow".to_string()))?;
        }
        Ok(acc)
    }

    pub fn eval_mod(&self, entries: &[u64], q: u64) -> u64 {
        let q = q as u128;
        let mut acc: u128 = 0;
        for (c, monomial) in &self.terms {
            let mut term: u128 = (*c as i128).rem_euclid(q as i128) as u128;
            for &(var, pow) in monomial {
                let x = entries[var as usize] as u128 % q;
                for _ in 0..pow {
                    term = term * x % q;
                }
            }
            acc = (acc + term) % q;
        }
        acc as u64
    }
}

/// An integral polynomial g together with declared sieve invariants:
/// the number t of irreducible factors, the total degree, and the
/// normalizer N with f = g/N integral on the orbit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialMap {
    pub name: String,
    pub g: SparsePoly,
    /// Declared count of absolutely irreducible factors of f.
    pub t: u32,
    pub deg: u32,
    pub normalizer: u64,
}

impl PolynomialMap {
    pub fn new(name: &str, g: SparsePoly, t: u32, normalizer: u64) -> Result<Self> {
        if normalizer == 0 {
            return Err(Error::domain("normalizer must be positive".to_string()));
        }
        let deg = g.total_degree();
        Ok(PolynomialMap {
            name: name.to_string(),
            g,
            t,
            deg,
            normalizer,
        })
    }

    /// Trace on n x n matrices, the standard demo map (t = 1, N = 1).
    pub fn trace(n: u16) -> Self {
        PolynomialMap::new("trace", SparsePoly::trace(n), 1, 1).unwrap()
    }

    /// f(x) = g(x)/N, checked to be integral.
    pub fn eval(&self, x: &LatticePoint) -> Result<i128> {
        let g = self.g.eval(x.entries())?;
        let n = self.normalizer as i128;
        if g.rem_euclid(n) != 0 {
            return Err(Error::data(format!(
                "g({:?}) = {g} is not divisible by the declared normalizer {n}",
                x.entries()
            )));
        }
        Ok(g / n)
    }

    /// gcd of g over a sample of points; equals N for a weakly primitive f.
    pub fn sampled_gcd(&self, points: &[LatticePoint]) -> Result<u128> {
        let mut g: u128 = 0;
        for p in points {
            let v = self.g.eval(p.entries())?;
            g = numeric::gcd_u128(g, v.unsigned_abs());
            if g == 1 {
                break;
            }
        }
        Ok(g)
    }
}

/// Spectral and growth parameters of a group or orbit: integrability
/// exponent p, Hoelder exponent a, archimedean dimension d, algebraic
/// dimension, and the ball growth exponents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralParams {
    #[serde(with = "rational_serde")]
    pub p: Rational,
    #[serde(with = "rational_serde")]
    pub a: Rational,
    #[serde(with = "rational_serde")]
    pub d: Rational,
    pub dim: u32,
    #[serde(with = "rational_opt_serde", default, skip_serializing_if = "Option::is_none")]
    pub alpha_group: Option<Rational>,
    #[serde(with = "rational_opt_serde", default, skip_serializing_if = "Option::is_none")]
    pub alpha_orbit: Option<Rational>,
}

impl SpectralParams {
    pub fn n_e(&self) -> u64 {
        numeric::n_e(self.p).expect("spectral p >= 2 by construction")
    }

    fn validate(self) -> Result<Self> {
        let zero = Rational::from_integer(0);
        if self.p < Rational::from_integer(2) {
            return Err(Error::domain("spectral parameter p must be >= 2".to_string()));
        }
        if self.a <= zero || self.a > Rational::from_integer(1) {
            return Err(Error::domain("Hoelder parameter a must be in (0, 1]".to_string()));
        }
        if self.d <= zero {
            return Err(Error::domain("dimension parameter d must be positive".to_string()));
        }
        for alpha in [self.alpha_group, self.alpha_orbit].into_iter().flatten() {
            if alpha <= zero {
                return Err(Error::domain("growth exponents must be positive".to_string()));
            }
        }
        if let Some(ag) = self.alpha_group {
            if ag > Rational::from_integer(self.dim as i64) {
                return Err(Error::domain(
                    "group growth exponent cannot exceed the dimension".to_string(),
                ));
            }
        }
        Ok(self)
    }

    pub fn new(
        p: Rational,
        a: Rational,
        d: Rational,
        dim: u32,
        alpha_group: Option<Rational>,
        alpha_orbit: Option<Rational>,
    ) -> Result<Self> {
        SpectralParams {
            p,
            a,
            d,
            dim,
            alpha_group,
            alpha_orbit,
        }
        .validate()
    }
}

pub mod rational_serde {
    use super::Rational;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        if r.is_integer() {
            s.serialize_i64(r.to_integer())
        } else {
            s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(i) => Ok(Rational::from_integer(i)),
            Repr::Str(s) => parse_rational(&s).map_err(de::Error::custom),
        }
    }

    pub fn parse_rational(s: &str) -> std::result::Result<Rational, String> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|e| format!("bad numerator: {e}"))?;
            let d: i64 = d.trim().parse().map_err(|e| format!("bad denominator: {e}"))?;
            if d == 0 {
                return Err("zero denominator".to_string());
            }
            Ok(Rational::new(n, d))
        } else {
            let n: i64 = s.parse().map_err(|e| format!("bad rational: {e}"))?;
            Ok(Rational::from_integer(n))
        }
    }
}

pub use rational_serde::parse_rational;

mod rational_opt_serde {
    use super::Rational;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        r: &Option<Rational>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match r {
            Some(r) => super::rational_serde::serialize(r, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Rational>, D::Error> {
        super::rational_serde::deserialize(d).map(Some)
    }
}

/// The parameter table for the supported group families. Anything outside
/// the table is refused: parameters must be user-supplied, never defaulted.
pub fn default_spectral_params(spec: &GroupSpec) -> Result<SpectralParams> {
    let one = Rational::from_integer(1);
    match spec {
        GroupSpec::SpecialLinear { n } => {
            let n = *n;
            if n < 2 {
                return Err(Error::domain("special linear group needs n >= 2".to_string()));
            }
            let dim = n * n - 1;
            SpectralParams::new(
                Rational::from_integer(2 * (n as i64 - 1)),
                one,
                Rational::from_integer(dim as i64),
                dim,
                Some(Rational::from_integer((n * n - n) as i64)),
                None,
            )
        }
        GroupSpec::QuadricGroup { b, .. } => {
            let m = b.size();
            let (pos, neg) = b.signature();
            let dim = m * (m - 1) / 2;
            let split = pos.abs_diff(neg) <= 1;
            let lorentzian = pos.min(neg) == 1 && m >= 4;
            if m >= 3 && split {
                let (p, alpha) = if m % 2 == 1 {
                    (
                        Rational::from_integer(m as i64 - 1),
                        Rational::new((m as i64 - 1) * (m as i64 - 1), 4),
                    )
                } else {
                    (
                        Rational::from_integer(m as i64),
                        Rational::new(m as i64 * (m as i64 + 2), 4),
                    )
                };
                SpectralParams::new(
                    p,
                    one,
                    Rational::from_integer(dim as i64),
                    dim,
                    Some(alpha),
                    Some(Rational::from_integer(m as i64 - 2)),
                )
            } else if lorentzian {
                SpectralParams::new(
                    Rational::new(9 * (m as i64 - 1), 7),
                    one,
                    Rational::from_integer(dim as i64),
                    dim,
                    None,
                    Some(Rational::from_integer(m as i64 - 2)),
                )
            } else {
                Err(Error::domain(format!(
                    "no parameter table row for signature ({pos},{neg}): parameters must be user-supplied"
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn sl2(e: [i64; 4]) -> LatticePoint {
        LatticePoint::square(2, e.to_vec()).unwrap()
    }

    #[test]
    fn height_examples() {
        assert_eq!(LatticePoint::identity(2).height_sq(), 2);
        assert!((LatticePoint::identity(2).height() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(sl2([3, 2, 1, 1]).height_sq(), 15);
        assert_eq!(LatticePoint::vector(vec![0, 0]).height(), 0.0);
        assert_eq!(sl2([3, -2, 1, 1]).sup_norm(), 3);
    }

    #[test]
    fn membership_examples() {
        let v = VarietySpec::sl(2);
        assert!(v.is_on_variety(&sl2([1, 1, 0, 1])).unwrap());
        assert!(!v.is_on_variety(&sl2([1, 1, 1, 1])).unwrap());
        let pell = VarietySpec::pell(2).unwrap();
        assert!(pell.is_on_variety(&LatticePoint::vector(vec![17, 12])).unwrap());
        assert!(!pell.is_on_variety(&LatticePoint::vector(vec![2, 1])).unwrap());
        assert!(pell.is_on_variety(&LatticePoint::identity(2)).is_err());
    }

    #[test]
    fn pell_rejects_squares() {
        assert!(VarietySpec::pell(4).is_err());
        assert!(VarietySpec::pell(0).is_err());
        assert!(VarietySpec::pell(3).is_ok());
    }

    #[test]
    fn action_examples() {
        let v = VarietySpec::primitive_vectors_sl2();
        let x = LatticePoint::vector(vec![1, 0]);
        let id = LatticePoint::identity(2);
        assert_eq!(apply_group(&id, &x, &v).unwrap(), x);
        assert_eq!(apply_group(&sl2([1, 1, 0, 1]), &x, &v).unwrap(), x);
        assert_eq!(
            apply_group(&sl2([0, 1, -1, 0]), &x, &v).unwrap(),
            LatticePoint::vector(vec![0, -1])
        );
        // non-group element refused
        assert!(apply_group(&sl2([2, 0, 0, 1]), &x, &v).is_err());
    }

    #[test]
    fn quadric_membership_and_action() {
        let b = QuadraticForm::diagonal(&[1, 1, -1]).unwrap();
        assert_eq!(b.signature(), (2, 1));
        let a = QuadraticForm::diagonal(&[1]).unwrap();
        let v = VarietySpec::quadric(b.clone(), a).unwrap();
        let x = LatticePoint::vector(vec![1, 0, 0]);
        assert!(v.is_on_variety(&x).unwrap());
        // Berggren matrix: an integral automorph of x^2 + y^2 - z^2
        let g = LatticePoint::square(3, vec![1, -2, 2, 2, -1, 2, 2, -2, 3]).unwrap();
        let gspec = GroupSpec::QuadricGroup {
            b: b.clone(),
            cover: Cover::SpecialOrthogonal,
        };
        assert!(gspec.contains(&g).unwrap());
        let y = g.matmul(&x).unwrap();
        assert!(v.is_on_variety(&y).unwrap());
    }

    #[test]
    fn signature_from_charpoly() {
        for (diag, want) in [
            (vec![1i64, 1], (2u32, 0u32)),
            (vec![1, -1], (1, 1)),
            (vec![1, 1, -1, -1], (2, 2)),
            (vec![-3, -5, -7], (0, 3)),
        ] {
            let f = QuadraticForm::diagonal(&diag).unwrap();
            assert_eq!(f.signature(), want, "diag {diag:?}");
        }
        // non-diagonal: [[0,1],[1,0]] has eigenvalues +-1
        let f = QuadraticForm::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(f.signature(), (1, 1));
        assert!(QuadraticForm::new(vec![vec![1, 2], vec![3, 1]]).is_err());
        assert!(QuadraticForm::new(vec![vec![1, 1], vec![1, 1]]).is_err());
    }

    #[test]
    fn determinant_and_charpoly() {
        assert_eq!(determinant(&sl2([3, 2, 1, 1])).unwrap(), 1);
        let m = LatticePoint::square(3, vec![2, 0, 0, 0, 3, 0, 0, 0, 5]).unwrap();
        assert_eq!(determinant(&m).unwrap(), 30);
        // char poly of diag(2,3,5): x^3 - 10x^2 + 31x - 30
        assert_eq!(char_poly(&m).unwrap(), vec![1, -10, 31, -30]);
    }

    #[test]
    fn spectral_param_table() {
        let sl2p = default_spectral_params(&GroupSpec::sl(2)).unwrap();
        assert_eq!(sl2p.p, Rational::from_integer(2));
        assert_eq!(sl2p.a, Rational::from_integer(1));
        assert_eq!(sl2p.d, Rational::from_integer(3));
        assert_eq!(sl2p.alpha_group, Some(Rational::from_integer(2)));
        assert_eq!(sl2p.n_e(), 1);

        let sl3p = default_spectral_params(&GroupSpec::sl(3)).unwrap();
        assert_eq!(sl3p.p, Rational::from_integer(4));
        assert_eq!(sl3p.d, Rational::from_integer(8));
        assert_eq!(sl3p.alpha_group, Some(Rational::from_integer(6)));
        assert_eq!(sl3p.n_e(), 2);

        let b5 = QuadraticForm::diagonal(&[1, 1, 1, -1, -1]).unwrap();
        let q5 = default_spectral_params(&GroupSpec::QuadricGroup {
            b: b5,
            cover: Cover::Spin,
        })
        .unwrap();
        assert_eq!(q5.p, Rational::from_integer(4));
        assert_eq!(q5.alpha_group, Some(Rational::from_integer(4)));
        assert_eq!(q5.dim, 10);
        assert_eq!(q5.alpha_orbit, Some(Rational::from_integer(3)));

        let b4 = QuadraticForm::diagonal(&[1, -1, -1, -1]).unwrap();
        let l4 = default_spectral_params(&GroupSpec::QuadricGroup {
            b: b4,
            cover: Cover::Spin,
        })
        .unwrap();
        assert_eq!(l4.p, Rational::new(27, 7));
        assert_eq!(l4.alpha_group, None);
        assert_eq!(l4.alpha_orbit, Some(Rational::from_integer(2)));
        assert_eq!(l4.n_e(), 2);

        // definite form of size 5: outside the table
        let bdef = QuadraticForm::diagonal(&[1, 1, 1, 1, 1]).unwrap();
        let err = default_spectral_params(&GroupSpec::QuadricGroup {
            b: bdef,
            cover: Cover::Spin,
        });
        assert!(err.unwrap_err().to_string().contains("user-supplied"));
    }

    #[test]
    fn polynomial_maps() {
        let tr = PolynomialMap::trace(2);
        assert_eq!(tr.deg, 1);
        assert_eq!(tr.eval(&sl2([3, 2, 1, 1])).unwrap(), 4);
        assert_eq!(tr.eval(&sl2([0, 1, -1, 0])).unwrap(), 0);
        let e = SparsePoly::entry(2, 2, 1, 0);
        assert_eq!(e.eval(&[9, 8, 7, 6]).unwrap(), 7);
        assert_eq!(SparsePoly::trace(2).eval_mod(&[1, 0, 0, 2], 3), 0);
        let shifted = SparsePoly::trace(2).add(SparsePoly::constant(-2));
        assert_eq!(shifted.eval(&[1, 0, 0, 1]).unwrap(), 0);
        assert_eq!(shifted.total_degree(), 1);
    }

    #[test]
    fn sampled_gcd_detects_normalizer() {
        // g = 2*trace has gcd 2 over any sample
        let g = SparsePoly {
            terms: vec![(2, vec![(0, 1)]), (2, vec![(3, 1)])],
        };
        let f = PolynomialMap::new("double-trace", g, 1, 2).unwrap();
        let pts = vec![sl2([1, 0, 0, 1]), sl2([2, 1, 1, 1]), sl2([1, 1, 0, 1])];
        assert_eq!(f.sampled_gcd(&pts).unwrap(), 2);
        assert_eq!(f.eval(&sl2([2, 1, 1, 1])).unwrap(), 3);
    }

    #[test]
    fn action_height_growth_is_quadratic() {
        // height(g x) <= C * height(g)^2 * height(x) on a fixed sample
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let v = VarietySpec::primitive_vectors_sl2();
        let gens = sl2_default_generators();
        let mut g = LatticePoint::identity(2);
        let mut x = LatticePoint::vector(vec![1, 0]);
        let c = 4.0;
        for _ in 0..200 {
            let step = &gens[rng.gen_range(0..gens.len())];
            g = step.matmul(&g).unwrap();
            if g.height() > 1e6 {
                g = LatticePoint::identity(2);
            }
            x = apply_group(step, &x, &v).unwrap();
            if x.height() > 1e6 {
                x = LatticePoint::vector(vec![1, 0]);
            }
            let y = apply_group(&g, &x, &v).unwrap();
            assert!(y.height() <= c * g.height().powi(2) * x.height());
        }
    }

    #[test]
    fn serde_round_trips() {
        let v = VarietySpec::primitive_vectors_sl2();
        let s = serde_json::to_string(&v).unwrap();
        let back: VarietySpec = serde_json::from_str(&s).unwrap();
        assert_eq!(v, back);
        let p = default_spectral_params(&GroupSpec::sl(3)).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: SpectralParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        let lor = QuadraticForm::diagonal(&[1, -1, -1, -1]).unwrap();
        let lp = default_spectral_params(&GroupSpec::QuadricGroup {
            b: lor,
            cover: Cover::Spin,
        })
        .unwrap();
        let s = serde_json::to_string(&lp).unwrap();
        assert!(s.contains("27/7"));
        let back: SpectralParams = serde_json::from_str(&s).unwrap();
        assert_eq!(lp, back);
    }
}
