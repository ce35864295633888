//! Height-bounded enumeration of integral points by three methods
//! (exhaustive backtracking, an SL_2 fast path over coprime bottom rows,
//! and generator BFS for orbits), a growth-exponent estimator, and a
//! checksummed on-disk point cache.

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::geometry::{
    self, GroupSpec, HeightBound, LatticePoint, NormMode, OrbitMembership, VarietySpec,
};
use crate::numeric;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{HashSet, VecDeque};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exhaustive,
    Parametrized,
    OrbitBfs,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Exhaustive => "exhaustive",
            Method::Parametrized => "parametrized",
            Method::OrbitBfs => "orbit-bfs",
        }
    }
}

/// The points of a variety inside a height ball, sorted by
/// (height, lexicographic entries), with a completeness flag.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub variety: VarietySpec,
    pub t: f64,
    pub norm_mode: NormMode,
    pub method: Method,
    pub points: Vec<LatticePoint>,
    pub complete: bool,
}

impl EnumerationResult {
    pub fn count(&self) -> u64 {
        self.points.len() as u64
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.points.iter().any(|x| x == p)
    }
}

fn sort_points(points: &mut [LatticePoint], bound: &HeightBound) {
    points.sort_unstable_by(|a, b| {
        bound
            .key(a)
            .cmp(&bound.key(b))
            .then_with(|| a.entries().cmp(b.entries()))
    });
}

fn floor_div(a: i128, b: i128) -> i128 {
    a.div_euclid(b)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -((-a).div_euclid(b))
}

/// Streams the entries [a, b, c, d] of every SL_2(Z) matrix in the ball,
/// shard `index` of `shards` (sharded by bottom row).
///
/// Bottom rows (c, d) are the coprime pairs in the ball; for each, the
/// valid top rows form the arithmetic progression (a0 + t c, b0 + t d)
/// and the admissible t range is solved exactly, so no candidate outside
/// the ball is ever visited.
pub fn for_each_sl2_shard<F: FnMut(i64, i64, i64, i64)>(
    bound: &HeightBound,
    shards: u64,
    index: u64,
    mut visit: F,
) -> Result<()> {
    if shards == 0 || index >= shards {
        return Err(Error::domain(format!("shard {index} of {shards} is invalid")));
    }
    let c_max = match bound.mode() {
        NormMode::Euclidean => numeric::isqrt_u128(bound.sq_bound()) as i64,
        NormMode::Sup => i64::try_from(bound.abs_bound()).unwrap_or(i64::MAX),
    };
    let mut row_index: u64 = 0;
    for c in -c_max..=c_max {
        let d_max = match bound.mode() {
            NormMode::Euclidean => {
                numeric::isqrt_u128(bound.sq_bound() - (c as i128 * c as i128) as u128) as i64
            }
            NormMode::Sup => c_max,
        };
        for d in -d_max..=d_max {
            if numeric::gcd_i64(c, d) != 1 {
                continue;
            }
            row_index += 1;
            if (row_index - 1) % shards != index {
                continue;
            }
            // a0*d - b0*c = 1
            let (g, x, y) = numeric::ext_gcd(d, -c);
            debug_assert_eq!(g, 1);
            let (a0, b0) = (x as i128, y as i128);
            let (c1, d1) = (c as i128, d as i128);
            let (lo, hi) = match bound.mode() {
                NormMode::Euclidean => {
                    let s = c1 * c1 + d1 * d1;
                    let rem = bound.sq_bound() as i128 - s;
                    if rem < 1 {
                        continue;
                    }
                    let k = a0 * a0 + b0 * b0 - rem;
                    let p = a0 * c1 + b0 * d1;
                    // s t^2 + 2 p t + k <= 0
                    let disc4 = p * p - s * k;
                    if disc4 < 0 {
                        continue;
                    }
                    let r = numeric::isqrt_u128(disc4 as u128) as i128;
                    let ok = |t: i128| s * t * t + 2 * p * t + k <= 0;
                    let mut lo = ceil_div(-p - r, s);
                    let mut hi = floor_div(-p + r, s);
                    // isqrt truncation can be off by one in either direction
                    while ok(lo - 1) {
                        lo -= 1;
                    }
                    while lo <= hi && !ok(lo) {
                        lo += 1;
                    }
                    while ok(hi + 1) {
                        hi += 1;
                    }
                    while hi >= lo && !ok(hi) {
                        hi -= 1;
                    }
                    if lo > hi {
                        continue;
                    }
                    (lo, hi)
                }
                NormMode::Sup => {
                    let m = bound.abs_bound() as i128;
                    let range = |base: i128, step: i128| -> Option<(i128, i128)> {
                        // |base + t*step| <= m; negate both to make step positive
                        let (base, step) = if step < 0 { (-base, -step) } else { (base, step) };
                        if step == 0 {
                            if base.abs() <= m {
                                Some((i128::MIN / 4, i128::MAX / 4))
                            } else {
                                None
                            }
                        } else {
                            Some((ceil_div(-m - base, step), floor_div(m - base, step)))
                        }
                    };
                    let (Some((la, ha)), Some((lb, hb))) = (range(a0, c1), range(b0, d1)) else {
                        continue;
                    };
                    let lo = la.max(lb);
                    let hi = ha.min(hb);
                    if lo > hi {
                        continue;
                    }
                    (lo, hi)
                }
            };
            for t in lo..=hi {
                let a = a0 + t * c1;
                let b = b0 + t * d1;
                visit(a as i64, b as i64, c, d);
            }
        }
    }
    Ok(())
}

fn sl2_outer_cost(bound: &HeightBound) -> u128 {
    let side = 2 * match bound.mode() {
        NormMode::Euclidean => numeric::isqrt_u128(bound.sq_bound()),
        NormMode::Sup => bound.abs_bound() as u128,
    } + 1;
    side.saturating_mul(side)
}

/// Fast-path enumeration of SL_2(Z) in the ball.
pub fn enumerate_sl2(t: f64, mode: NormMode, budget: &Budget) -> Result<EnumerationResult> {
    enumerate_sl2_shard(t, mode, 1, 0, budget)
}

/// One shard of the SL_2 fast path; merging all shards reproduces the full
/// enumeration exactly.
pub fn enumerate_sl2_shard(
    t: f64,
    mode: NormMode,
    shards: u64,
    index: u64,
    budget: &Budget,
) -> Result<EnumerationResult> {
    let bound = HeightBound::new(t, mode)?;
    budget.admit(sl2_outer_cost(&bound), "SL_2 bottom-row scan", feasible_t(budget, 2))?;
    let mut points = Vec::new();
    for_each_sl2_shard(&bound, shards, index, |a, b, c, d| {
        points.push(LatticePoint::square(2, vec![a, b, c, d]).unwrap());
    })?;
    sort_points(&mut points, &bound);
    Ok(EnumerationResult {
        variety: VarietySpec::sl(2),
        t,
        norm_mode: mode,
        method: Method::Parametrized,
        points,
        complete: shards == 1,
    })
}

/// Streaming count of SL_2(Z) points in the ball.
pub fn count_sl2(t: f64, mode: NormMode, budget: &Budget) -> Result<u64> {
    let bound = HeightBound::new(t, mode)?;
    budget.admit(sl2_outer_cost(&bound), "SL_2 bottom-row scan", feasible_t(budget, 2))?;
    let mut n = 0u64;
    for_each_sl2_shard(&bound, 1, 0, |_, _, _, _| n += 1)?;
    Ok(n)
}

fn feasible_t(budget: &Budget, free_entries: u32) -> Option<String> {
    let side = (budget.candidates as f64).powf(1.0 / free_entries as f64);
    let t = ((side - 1.0) / 2.0).floor();
    Some(format!("the budget admits T <= {t:.0}"))
}

/// Exhaustive ground-truth enumeration by constrained backtracking.
pub fn enumerate_exhaustive(
    v: &VarietySpec,
    t: f64,
    mode: NormMode,
    budget: &Budget,
) -> Result<EnumerationResult> {
    let bound = HeightBound::new(t, mode)?;
    let mut points = Vec::new();
    for_each_point_exhaustive(v, &bound, budget, |entries| {
        let (r, c) = v.point_shape();
        points.push(LatticePoint::new(r, c, entries.to_vec()).unwrap());
    })?;
    sort_points(&mut points, &bound);
    Ok(EnumerationResult {
        variety: v.clone(),
        t,
        norm_mode: mode,
        method: Method::Exhaustive,
        points,
        complete: true,
    })
}

/// Streaming exhaustive scan; the visitor sees each point's entries once.
pub fn for_each_point_exhaustive<F: FnMut(&[i64])>(
    v: &VarietySpec,
    bound: &HeightBound,
    budget: &Budget,
    mut visit: F,
) -> Result<()> {
    match v {
        VarietySpec::Group { group } => match group {
            GroupSpec::SpecialLinear { n } => scan_sl(*n, bound, budget, &mut visit),
            GroupSpec::QuadricGroup { b, .. } => {
                let a = b.clone();
                scan_quadric(b, &a, bound, budget, &mut visit, true)
            }
        },
        VarietySpec::QuadricRepresentation { b, a } => {
            scan_quadric(b, a, bound, budget, &mut visit, false)
        }
        VarietySpec::PellNormForm { d } => scan_pell(*d, bound, budget, &mut visit),
        VarietySpec::Orbit { membership, base, .. } => match membership {
            OrbitMembership::PrimitiveVector => {
                let len = (base.rows() * base.cols()) as usize;
                scan_primitive(len, bound, budget, &mut visit)
            }
            OrbitMembership::ClosureOnly => Err(Error::domain(
                "orbit without a decidable membership predicate cannot be enumerated exhaustively; use orbit_bfs".to_string(),
            )),
        },
    }
}

fn entry_range(bound: &HeightBound, used_sq: u128) -> i64 {
    match bound.mode() {
        NormMode::Euclidean => numeric::isqrt_u128(bound.sq_bound() - used_sq) as i64,
        NormMode::Sup => bound.abs_bound() as i64,
    }
}

fn box_cost(bound: &HeightBound, free_entries: u32) -> u128 {
    let side = 2 * entry_range(bound, 0) as u128 + 1;
    side.saturating_pow(free_entries)
}

fn admit_box(bound: &HeightBound, free_entries: u32, budget: &Budget, what: &str) -> Result<()> {
    budget.admit(box_cost(bound, free_entries), what, feasible_t(budget, free_entries))
}

/// SL_n scan: free entries backtrack with height pruning; the last entry is
/// solved from the determinant condition instead of searched.
fn scan_sl<F: FnMut(&[i64])>(
    n: u32,
    bound: &HeightBound,
    budget: &Budget,
    visit: &mut F,
) -> Result<()> {
    let len = (n * n) as usize;
    admit_box(bound, len as u32 - 1, budget, "SL_n exhaustive scan")?;
    let mut e = vec![0i64; len];
    fn rec<F: FnMut(&[i64])>(
        e: &mut [i64],
        idx: usize,
        used_sq: u128,
        n: u32,
        bound: &HeightBound,
        visit: &mut F,
    ) -> Result<()> {
        let len = e.len();
        if idx == len - 1 {
            // det = cofactor * x + rest, linear in the last entry
            let cof = last_cofactor(e, n)?;
            e[len - 1] = 0;
            let rest = geometry::determinant(&LatticePoint::new(n, n, e.to_vec())?)?;
            if cof != 0 {
                let num = 1 - rest;
                if num.rem_euclid(cof) == 0 {
                    let x = num / cof;
                    if let Ok(x64) = i64::try_from(x) {
                        e[len - 1] = x64;
                        let xsq = (x * x) as u128;
                        let ok = match bound.mode() {
                            NormMode::Euclidean => used_sq + xsq <= bound.sq_bound(),
                            NormMode::Sup => x64.unsigned_abs() <= bound.abs_bound(),
                        };
                        if ok {
                            visit(e);
                        }
                    }
                }
            } else if rest == 1 {
                let r = entry_range(bound, used_sq);
                for x in -r..=r {
                    e[len - 1] = x;
                    visit(e);
                }
            }
            e[len - 1] = 0;
            return Ok(());
        }
        let r = entry_range(bound, used_sq);
        for x in -r..=r {
            e[idx] = x;
            rec(e, idx + 1, used_sq + (x as i128 * x as i128) as u128, n, bound, visit)?;
        }
        e[idx] = 0;
        Ok(())
    }
    rec(&mut e, 0, 0, n, bound, visit)
}

/// Cofactor of the last (row-major) entry: the minor obtained by deleting
/// the last row and column, with positive sign.
fn last_cofactor(e: &[i64], n: u32) -> Result<i128> {
    let n = n as usize;
    if n == 1 {
        return Ok(1);
    }
    let mut minor = Vec::with_capacity((n - 1) * (n - 1));
    for r in 0..n - 1 {
        for c in 0..n - 1 {
            minor.push(e[r * n + c]);
        }
    }
    geometry::determinant(&LatticePoint::new(n as u32 - 1, n as u32 - 1, minor)?)
}

/// Quadric scan over m x n matrices x with (transpose x) B x = A, column by
/// column; every completed column is checked against all earlier columns.
fn scan_quadric<F: FnMut(&[i64])>(
    b: &geometry::QuadraticForm,
    a: &geometry::QuadraticForm,
    bound: &HeightBound,
    budget: &Budget,
    visit: &mut F,
    require_det_one: bool,
) -> Result<()> {
    let (m, n) = (b.size() as usize, a.size() as usize);
    admit_box(bound, (m * n) as u32, budget, "quadric exhaustive scan")?;
    // column-major workspace; emitted row-major
    let mut cols = vec![vec![0i64; m]; n];
    let bmat = b.matrix_point();
    let form_pair = |x: &[i64], y: &[i64]| -> i128 {
        let mut acc = 0i128;
        for s in 0..m {
            for t in 0..m {
                acc += x[s] as i128 * bmat.get(s as u32, t as u32) as i128 * y[t] as i128;
            }
        }
        acc
    };
    struct Ctx<'a, F> {
        m: usize,
        n: usize,
        bound: &'a HeightBound,
        a: &'a geometry::QuadraticForm,
        visit: &'a mut F,
        require_det_one: bool,
    }
    fn rec<F: FnMut(&[i64])>(
        cols: &mut Vec<Vec<i64>>,
        col: usize,
        row: usize,
        used_sq: u128,
        ctx: &mut Ctx<'_, F>,
        form_pair: &impl Fn(&[i64], &[i64]) -> i128,
    ) -> Result<()> {
        if col == ctx.n {
            let mut e = vec![0i64; ctx.m * ctx.n];
            for c in 0..ctx.n {
                for r in 0..ctx.m {
                    e[r * ctx.n + c] = cols[c][r];
                }
            }
            if ctx.require_det_one {
                let p = LatticePoint::new(ctx.m as u32, ctx.n as u32, e.clone())?;
                if geometry::determinant(&p)? != 1 {
                    return Ok(());
                }
            }
            (ctx.visit)(&e);
            return Ok(());
        }
        if row == ctx.m {
            for prev in 0..=col {
                let want = ctx.a.entry(prev as u32, col as u32) as i128;
                if form_pair(&cols[prev], &cols[col]) != want {
                    return Ok(());
                }
            }
            return rec(cols, col + 1, 0, used_sq, ctx, form_pair);
        }
        let r = entry_range(ctx.bound, used_sq);
        for x in -r..=r {
            cols[col][row] = x;
            rec(cols, col, row + 1, used_sq + (x as i128 * x as i128) as u128, ctx, form_pair)?;
        }
        cols[col][row] = 0;
        Ok(())
    }
    let mut ctx = Ctx {
        m,
        n,
        bound,
        a,
        visit,
        require_det_one,
    };
    rec(&mut cols, 0, 0, 0, &mut ctx, &form_pair)
}

fn scan_pell<F: FnMut(&[i64])>(
    d: u64,
    bound: &HeightBound,
    budget: &Budget,
    visit: &mut F,
) -> Result<()> {
    let y_max = entry_range(bound, 0);
    budget.admit(y_max as u128 + 1, "Pell exhaustive scan", None)?;
    for y in 0..=y_max {
        let xx = 1i128 + d as i128 * y as i128 * y as i128;
        let x = numeric::isqrt_u128(xx as u128) as i128;
        if x * x != xx {
            continue;
        }
        let p = [x as i64, y];
        let ok = match bound.mode() {
            NormMode::Euclidean => (x * x + (y as i128) * (y as i128)) as u128 <= bound.sq_bound(),
            NormMode::Sup => (x as u64).max(y as u64) <= bound.abs_bound(),
        };
        if !ok {
            continue;
        }
        let mut emit = |a: i64, b: i64| visit(&[a, b]);
        emit(p[0], p[1]);
        emit(-p[0], p[1]);
        if y != 0 {
            emit(p[0], -p[1]);
            emit(-p[0], -p[1]);
        }
    }
    Ok(())
}

fn scan_primitive<F: FnMut(&[i64])>(
    len: usize,
    bound: &HeightBound,
    budget: &Budget,
    visit: &mut F,
) -> Result<()> {
    admit_box(bound, len as u32, budget, "primitive-vector scan")?;
    let mut e = vec![0i64; len];
    fn rec<F: FnMut(&[i64])>(
        e: &mut [i64],
        idx: usize,
        used_sq: u128,
        bound: &HeightBound,
        visit: &mut F,
    ) {
        if idx == e.len() {
            let g = e.iter().fold(0u64, |acc, &x| numeric::gcd_u64(acc, x.unsigned_abs()));
            if g == 1 {
                visit(e);
            }
            return;
        }
        let r = entry_range(bound, used_sq);
        for x in -r..=r {
            e[idx] = x;
            rec(e, idx + 1, used_sq + (x as i128 * x as i128) as u128, bound, visit);
        }
        e[idx] = 0;
    }
    rec(&mut e, 0, 0, bound, visit);
    Ok(())
}

/// Fundamental solution (x1, y1) of x^2 - D y^2 = 1 with y1 > 0 minimal,
/// by the continued fraction expansion of sqrt(D).
pub fn pell_fundamental(d: u64) -> Result<(i64, i64)> {
    let a0 = numeric::isqrt_u128(d as u128) as i128;
    if a0 * a0 == d as i128 {
        return Err(Error::domain(format!("D = {d} is a perfect square")));
    }
    let d = d as i128;
    let (mut m, mut den, mut a) = (0i128, 1i128, a0);
    let (mut p_prev, mut p) = (1i128, a0);
    let (mut q_prev, mut q) = (0i128, 1i128);
    for _ in 0..100_000 {
        if p * p - d * q * q == 1 {
            let x = i64::try_from(p).map_err(|_| Error::data("fundamental solution overflow".to_string()))?;
            let y = i64::try_from(q).map_err(|_| Error::data("fundamental solution overflow".to_string()))?;
            return Ok((x, y));
        }
        m = den * a - m;
        den = (d - m * m) / den;
        a = (a0 + m) / den;
        let p_next = a
            .checked_mul(p)
            .and_then(|v| v.checked_add(p_prev))
            .ok_or_else(|| Error::data("fundamental solution overflow".to_string()))?;
        let q_next = a
            .checked_mul(q)
            .and_then(|v| v.checked_add(q_prev))
            .ok_or_else(|| Error::data("fundamental solution overflow".to_string()))?;
        (p_prev, p) = (p, p_next);
        (q_prev, q) = (q, q_next);
    }
    Err(Error::data(format!("no fundamental solution found for D = {d} within iteration cap")))
}

/// The nonnegative-branch solutions (x_k, y_k), k = 0, 1, ..., with
/// x, y >= 0 and height within the bound, in increasing height order.
pub fn pell_positive_solutions(d: u64, bound: &HeightBound) -> Result<Vec<(i64, i64)>> {
    let (x1, y1) = pell_fundamental(d)?;
    let admits = |x: i128, y: i128| -> bool {
        match bound.mode() {
            NormMode::Euclidean => ((x * x + y * y) as u128) <= bound.sq_bound(),
            NormMode::Sup => (x as u64).max(y as u64) <= bound.abs_bound(),
        }
    };
    let mut out = Vec::new();
    let (mut x, mut y) = (1i128, 0i128);
    while admits(x, y) {
        out.push((x as i64, y as i64));
        let nx = x
            .checked_mul(x1 as i128)
            .and_then(|v| v.checked_add((d as i128).checked_mul(y1 as i128)?.checked_mul(y)?));
        let ny = x
            .checked_mul(y1 as i128)
            .and_then(|v| v.checked_add((x1 as i128).checked_mul(y)?));
        match (nx, ny) {
            (Some(nx), Some(ny)) => {
                if i64::try_from(nx).is_err() || i64::try_from(ny).is_err() {
                    break;
                }
                (x, y) = (nx, ny);
            }
            _ => break,
        }
    }
    Ok(out)
}

/// Parametrized Pell enumeration: powers of the fundamental unit with sign
/// flips; complete without any scan.
pub fn enumerate_pell(d: u64, t: f64, mode: NormMode) -> Result<EnumerationResult> {
    let v = VarietySpec::pell(d)?;
    let bound = HeightBound::new(t, mode)?;
    let mut points = Vec::new();
    for (x, y) in pell_positive_solutions(d, &bound)? {
        points.push(LatticePoint::vector(vec![x, y]));
        points.push(LatticePoint::vector(vec![-x, y]));
        if y != 0 {
            points.push(LatticePoint::vector(vec![x, -y]));
            points.push(LatticePoint::vector(vec![-x, -y]));
        }
    }
    sort_points(&mut points, &bound);
    Ok(EnumerationResult {
        variety: v,
        t,
        norm_mode: mode,
        method: Method::Parametrized,
        points,
        complete: true,
    })
}

/// Breadth-first closure of the orbit base under the generators, keeping
/// points of height <= T * slack.
///
/// A height cap can hide points reachable only through taller
/// intermediates, so the result is complete only after validation against
/// the exhaustive method.
pub fn orbit_bfs(
    v: &VarietySpec,
    t: f64,
    mode: NormMode,
    slack: f64,
    budget: &Budget,
) -> Result<EnumerationResult> {
    let VarietySpec::Orbit { base, generators, .. } = v else {
        return Err(Error::domain("orbit_bfs needs an orbit variety".to_string()));
    };
    if generators.is_empty() {
        return Err(Error::domain("orbit_bfs needs at least one generator".to_string()));
    }
    if slack < 1.0 || !slack.is_finite() {
        return Err(Error::domain("slack must be a finite value >= 1".to_string()));
    }
    let bound = HeightBound::new(t, mode)?;
    let cap = HeightBound::new(t * slack, mode)?;
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut queue: VecDeque<LatticePoint> = VecDeque::new();
    let mut visited: u128 = 0;
    if cap.admits(base) {
        seen.insert(base.entries().to_vec());
        queue.push_back(base.clone());
    }
    while let Some(p) = queue.pop_front() {
        for g in generators {
            visited += 1;
            if visited > budget.candidates as u128 {
                return Err(Error::resource(format!(
                    "orbit frontier exceeded the budget of {} candidates; partial result discarded as incomplete",
                    budget.candidates
                )));
            }
            let q = g.matmul(&p)?;
            if cap.admits(&q) && seen.insert(q.entries().to_vec()) {
                queue.push_back(q);
            }
        }
    }
    let mut points: Vec<LatticePoint> = seen
        .into_iter()
        .filter_map(|e| {
            let p = LatticePoint::new(base.rows(), base.cols(), e).unwrap();
            bound.admits(&p).then_some(p)
        })
        .collect();
    sort_points(&mut points, &bound);
    Ok(EnumerationResult {
        variety: v.clone(),
        t,
        norm_mode: mode,
        method: Method::OrbitBfs,
        points,
        complete: false,
    })
}

/// BFS validated against the exhaustive oracle at the same T; complete is
/// set only if the two sets agree exactly.
pub fn orbit_bfs_validated(
    v: &VarietySpec,
    t: f64,
    mode: NormMode,
    slack: f64,
    budget: &Budget,
) -> Result<EnumerationResult> {
    let mut bfs = orbit_bfs(v, t, mode, slack, budget)?;
    let exact = enumerate_exhaustive(v, t, mode, budget)?;
    if bfs.points == exact.points {
        bfs.complete = true;
    }
    Ok(bfs)
}

/// Streams every point of the ball through the fastest complete method
/// without materializing the result.
pub fn for_each_point<F: FnMut(&[i64])>(
    v: &VarietySpec,
    bound: &HeightBound,
    budget: &Budget,
    mut visit: F,
) -> Result<()> {
    match v {
        VarietySpec::Group { group: GroupSpec::SpecialLinear { n } } if *n == 2 => {
            budget.admit(sl2_outer_cost(bound), "SL_2 bottom-row scan", feasible_t(budget, 2))?;
            for_each_sl2_shard(bound, 1, 0, |a, b, c, d| visit(&[a, b, c, d]))
        }
        VarietySpec::PellNormForm { d } => {
            for (x, y) in pell_positive_solutions(*d, bound)? {
                visit(&[x, y]);
                visit(&[-x, y]);
                if y != 0 {
                    visit(&[x, -y]);
                    visit(&[-x, -y]);
                }
            }
            Ok(())
        }
        _ => for_each_point_exhaustive(v, bound, budget, |e| visit(e)),
    }
}

/// Count without materializing, choosing the fastest complete method.
pub fn count_points(v: &VarietySpec, t: f64, mode: NormMode, budget: &Budget) -> Result<u64> {
    match v {
        VarietySpec::Group { group: GroupSpec::SpecialLinear { n } } if *n == 2 => {
            count_sl2(t, mode, budget)
        }
        VarietySpec::PellNormForm { d } => Ok(enumerate_pell(*d, t, mode)?.count()),
        _ => {
            let bound = HeightBound::new(t, mode)?;
            let mut n = 0u64;
            for_each_point_exhaustive(v, &bound, budget, |_| n += 1)?;
            Ok(n)
        }
    }
}

/// Log-log growth fit of ball counts over a height grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub grid: Vec<(f64, u64)>,
    /// Least-squares slope of log count against log T over the upper half
    /// of the grid.
    pub alpha_hat: f64,
    /// Root-mean-square residual of that fit.
    pub fit_residual: f64,
}

/// Fits the growth exponent from precomputed (T, count) pairs.
pub fn growth_fit(grid: &[(f64, u64)]) -> Result<GrowthEstimate> {
    if grid.len() < 4 {
        return Err(Error::domain(format!(
            "growth grid needs at least 4 points, got {}",
            grid.len()
        )));
    }
    if let Some(first_usable) = grid.iter().find(|(_, n)| *n > 0) {
        if grid[0].1 == 0 {
            return Err(Error::domain(format!(
                "zero count at the smallest grid point; first usable T is {}",
                first_usable.0
            )));
        }
    } else {
        return Err(Error::domain("all grid counts are zero".to_string()));
    }
    for w in grid.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::domain("growth grid must be strictly increasing in T".to_string()));
        }
        if w[1].1 < w[0].1 {
            return Err(Error::data("ball counts decreased as T grew".to_string()));
        }
    }
    let upper = &grid[grid.len() / 2..];
    let pts: Vec<(f64, f64)> = upper
        .iter()
        .map(|&(t, n)| (t.ln(), (n as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::domain("degenerate growth grid".to_string()));
    }
    let alpha_hat = (n * sxy - sx * sy) / denom;
    let intercept = (sy - alpha_hat * sx) / n;
    let ss: f64 = pts
        .iter()
        .map(|p| (p.1 - (intercept + alpha_hat * p.0)).powi(2))
        .sum();
    Ok(GrowthEstimate {
        grid: grid.to_vec(),
        alpha_hat,
        fit_residual: (ss / n).sqrt(),
    })
}

/// Counts over the grid, then fits.
pub fn growth_exponent(
    v: &VarietySpec,
    t_grid: &[f64],
    mode: NormMode,
    budget: &Budget,
) -> Result<GrowthEstimate> {
    let mut grid = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        grid.push((t, count_points(v, t, mode, budget)?));
    }
    growth_fit(&grid)
}

/// Geometric grid of n points from lo to hi inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * ratio.powi(i as i32)
            }
        })
        .collect()
}

/// Merges shard results for the same enumeration task into one sorted,
/// deduplicated result.
pub fn merge_results(parts: Vec<EnumerationResult>) -> Result<EnumerationResult> {
    let Some(first) = parts.first() else {
        return Err(Error::domain("merge needs at least one result".to_string()));
    };
    for p in &parts[1..] {
        if p.variety != first.variety
            || p.t != first.t
            || p.norm_mode != first.norm_mode
            || p.method != first.method
        {
            return Err(Error::domain(
                "merge inputs must share variety, T, norm mode and method".to_string(),
            ));
        }
    }
    let bound = HeightBound::new(first.t, first.norm_mode)?;
    let (variety, t, norm_mode, method) =
        (first.variety.clone(), first.t, first.norm_mode, first.method);
    let any_complete = parts.iter().any(|p| p.complete);
    let mut points: Vec<LatticePoint> = parts.into_iter().flat_map(|p| p.points).collect();
    sort_points(&mut points, &bound);
    points.dedup_by(|a, b| a.entries() == b.entries());
    Ok(EnumerationResult {
        variety,
        t,
        norm_mode,
        method,
        points,
        complete: any_complete,
    })
}

const CACHE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    schema_version: u32,
    variety_hash: String,
    #[serde(rename = "T")]
    t: f64,
    norm_mode: NormMode,
    method: Method,
    complete: bool,
    count: u64,
    checksum: String,
}

/// Stable hash of a variety spec (hex prefix of the digest of its canonical
/// serialized form); names cache files and report artifacts.
pub fn variety_hash(v: &VarietySpec) -> String {
    let json = serde_json::to_string(v).expect("variety specs serialize");
    let digest = Sha256::digest(json.as_bytes());
    let mut out = String::with_capacity(16);
    for b in digest.iter().take(8) {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Directory for cached enumerations: $HOMOCOUNT_CACHE or .homocount-cache.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os("HOMOCOUNT_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".homocount-cache"))
}

fn cache_file_name(hash: &str, t: f64, mode: NormMode, method: Method) -> String {
    format!("{hash}-{}-{}-T{t:?}.points", method.tag(), mode.tag())
}

fn body_bytes(points: &[LatticePoint]) -> Vec<u8> {
    let mut body = Vec::new();
    for p in points {
        serde_json::to_writer(&mut body, p.entries()).expect("entry arrays serialize");
        body.push(b'\n');
    }
    body
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Persists an enumeration atomically (write temp, then rename); returns
/// the cache file path.
pub fn cache_store(result: &EnumerationResult, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let body = body_bytes(&result.points);
    let header = CacheHeader {
        schema_version: CACHE_SCHEMA_VERSION,
        variety_hash: variety_hash(&result.variety),
        t: result.t,
        norm_mode: result.norm_mode,
        method: result.method,
        complete: result.complete,
        count: result.points.len() as u64,
        checksum: hex_digest(&body),
    };
    let path = dir.join(cache_file_name(
        &header.variety_hash,
        result.t,
        result.norm_mode,
        result.method,
    ));
    let tmp = dir.join(format!(
        ".tmp-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0)
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        serde_json::to_writer(&mut f, &header)
            .map_err(|e| Error::cache(format!("header serialization failed: {e}")))?;
        f.write_all(b"\n")?;
        f.write_all(&body)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Loads a cached enumeration. Ok(None) means a clean miss (no file for
/// this exact task); corrupt or mismatched files are cache errors so the
/// caller recomputes instead of silently trusting them.
pub fn cache_load(
    v: &VarietySpec,
    t: f64,
    mode: NormMode,
    method: Method,
    dir: &Path,
) -> Result<Option<EnumerationResult>> {
    let hash = variety_hash(v);
    let path = dir.join(cache_file_name(&hash, t, mode, method));
    let file = match std::fs::File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut reader = std::io::BufReader::new(file);
    let mut header_line = String::new();
    reader.read_line(&mut header_line)?;
    let header: CacheHeader = serde_json::from_str(header_line.trim_end())
        .map_err(|e| Error::cache(format!("unreadable cache header in {}: {e}", path.display())))?;
    if header.schema_version != CACHE_SCHEMA_VERSION {
        return Err(Error::cache(format!(
            "cache schema version {} does not match {}",
            header.schema_version, CACHE_SCHEMA_VERSION
        )));
    }
    if header.variety_hash != hash || header.t != t || header.norm_mode != mode || header.method != method
    {
        return Err(Error::cache(format!(
            "cache header does not describe the requested task: {}",
            path.display()
        )));
    }
    let mut body = Vec::new();
    std::io::Read::read_to_end(&mut reader, &mut body)?;
    if hex_digest(&body) != header.checksum {
        return Err(Error::cache(format!("cache body checksum mismatch in {}", path.display())));
    }
    let (rows, cols) = v.point_shape();
    let mut points = Vec::with_capacity(header.count as usize);
    for line in body.split(|&b| b == b'\n') {
        if line.is_empty() {
            continue;
        }
        let entries: Vec<i64> = serde_json::from_slice(line)
            .map_err(|e| Error::cache(format!("unreadable cache row: {e}")))?;
        points.push(LatticePoint::new(rows, cols, entries)?);
    }
    if points.len() as u64 != header.count {
        return Err(Error::cache(format!(
            "cache row count {} does not match header count {}",
            points.len(),
            header.count
        )));
    }
    Ok(Some(EnumerationResult {
        variety: v.clone(),
        t,
        norm_mode: mode,
        method,
        points,
        complete: header.complete,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> Budget {
        Budget::default()
    }

    fn eu() -> NormMode {
        NormMode::Euclidean
    }

    fn entries_set(r: &EnumerationResult) -> std::collections::BTreeSet<Vec<i64>> {
        r.points.iter().map(|p| p.entries().to_vec()).collect()
    }

    #[test]
    fn sl2_tiny_balls() {
        let r = enumerate_sl2(1.5, eu(), &budget()).unwrap();
        assert_eq!(r.count(), 4);
        let want: std::collections::BTreeSet<Vec<i64>> = [
            vec![1, 0, 0, 1],
            vec![-1, 0, 0, -1],
            vec![0, 1, -1, 0],
            vec![0, -1, 1, 0],
        ]
        .into_iter()
        .collect();
        assert_eq!(entries_set(&r), want);
        assert!(r.complete);
        assert_eq!(enumerate_sl2(0.5, eu(), &budget()).unwrap().count(), 0);
        let ex = enumerate_exhaustive(&VarietySpec::sl(2), 1.5, eu(), &budget()).unwrap();
        assert_eq!(entries_set(&ex), want);
    }

    #[test]
    fn pell_ball_t100() {
        let v = VarietySpec::pell(2).unwrap();
        let ex = enumerate_exhaustive(&v, 100.0, eu(), &budget()).unwrap();
        assert_eq!(ex.count(), 10);
        let par = enumerate_pell(2, 100.0, eu()).unwrap();
        assert_eq!(entries_set(&ex), entries_set(&par));
        assert_eq!(par.points, ex.points);
    }

    #[test]
    fn pell_fundamental_solutions() {
        assert_eq!(pell_fundamental(2).unwrap(), (3, 2));
        assert_eq!(pell_fundamental(3).unwrap(), (2, 1));
        assert_eq!(pell_fundamental(61).unwrap(), (1766319049, 226153980));
        assert!(pell_fundamental(9).is_err());
    }

    #[test]
    fn methods_agree_up_to_50() {
        for t in [1.5, 3.0, 7.0, 12.5, 20.0, 35.0, 50.0] {
            let fast = enumerate_sl2(t, eu(), &budget()).unwrap();
            let slow = enumerate_exhaustive(&VarietySpec::sl(2), t, eu(), &budget()).unwrap();
            assert_eq!(fast.points, slow.points, "T = {t}");
        }
    }

    #[test]
    fn methods_agree_sup_norm() {
        for t in [1.0, 2.0, 5.5, 9.0] {
            let fast = enumerate_sl2(t, NormMode::Sup, &budget()).unwrap();
            let slow =
                enumerate_exhaustive(&VarietySpec::sl(2), t, NormMode::Sup, &budget()).unwrap();
            assert_eq!(fast.points, slow.points, "T = {t}");
        }
    }

    #[test]
    fn monotone_in_t() {
        let small = entries_set(&enumerate_sl2(10.0, eu(), &budget()).unwrap());
        let large = entries_set(&enumerate_sl2(25.0, eu(), &budget()).unwrap());
        assert!(small.is_subset(&large));
        assert!(small.len() < large.len());
    }

    #[test]
    fn closed_under_inverse_and_transpose() {
        let r = enumerate_sl2(20.0, eu(), &budget()).unwrap();
        let set = entries_set(&r);
        for p in &r.points {
            let e = p.entries();
            let inv = vec![e[3], -e[1], -e[2], e[0]];
            let tr = vec![e[0], e[2], e[1], e[3]];
            assert!(set.contains(&inv), "inverse of {e:?} missing");
            assert!(set.contains(&tr), "transpose of {e:?} missing");
        }
    }

    #[test]
    fn shard_partition_is_exact() {
        let full = enumerate_sl2(30.0, eu(), &budget()).unwrap();
        for k in [2u64, 3, 5] {
            let shards: Vec<EnumerationResult> = (0..k)
                .map(|i| enumerate_sl2_shard(30.0, eu(), k, i, &budget()).unwrap())
                .collect();
            let total: usize = shards.iter().map(|s| s.points.len()).sum();
            assert_eq!(total, full.points.len(), "shards overlap or miss at k={k}");
            let merged = merge_results(shards).unwrap();
            assert_eq!(merged.points, full.points, "k = {k}");
        }
    }

    #[test]
    fn quadratic_ball_growth() {
        let b = budget();
        let c250 = count_sl2(250.0, eu(), &b).unwrap() as f64 / 250.0f64.powi(2);
        let n500 = count_sl2(500.0, eu(), &b).unwrap() as f64;
        assert!(n500 >= 0.5 * c250 * 500.0f64.powi(2));
        assert!(n500 <= 2.0 * c250 * 500.0f64.powi(2));
    }

    #[test]
    fn growth_exponent_sl2() {
        let grid = geometric_grid(100.0, 3000.0, 8);
        let est = growth_exponent(&VarietySpec::sl(2), &grid, eu(), &budget()).unwrap();
        assert!((est.alpha_hat - 2.0).abs() <= 0.1, "alpha = {}", est.alpha_hat);
        for w in est.grid.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn growth_exponent_pell_is_flat() {
        let grid = geometric_grid(100.0, 1_000_000.0, 8);
        let est = growth_exponent(&VarietySpec::pell(2).unwrap(), &grid, eu(), &budget()).unwrap();
        assert!(est.alpha_hat <= 0.2, "alpha = {}", est.alpha_hat);
    }

    #[test]
    fn growth_fit_edge_cases() {
        let est = growth_fit(&[(10.0, 5), (20.0, 5), (40.0, 5), (80.0, 5)]).unwrap();
        assert!(est.alpha_hat.abs() < 1e-12);
        assert!(growth_fit(&[(10.0, 5), (20.0, 6), (40.0, 8)]).is_err());
        let err = growth_fit(&[(10.0, 0), (20.0, 0), (40.0, 3), (80.0, 5)]).unwrap_err();
        assert!(err.to_string().contains("40"), "{err}");
    }

    #[test]
    fn orbit_bfs_unit_vectors() {
        let v = VarietySpec::primitive_vectors_sl2();
        let r = orbit_bfs(&v, 1.5, eu(), 1.0, &budget()).unwrap();
        for unit in [[1, 0], [0, 1], [-1, 0], [0, -1]] {
            assert!(
                r.contains(&LatticePoint::vector(unit.to_vec())),
                "missing {unit:?}"
            );
        }
        // below the base height the closure is empty
        let small = orbit_bfs(&v, 0.5, eu(), 1.0, &budget()).unwrap();
        assert_eq!(small.count(), 0);
    }

    #[test]
    fn orbit_bfs_validated_matches_exhaustive() {
        let v = VarietySpec::primitive_vectors_sl2();
        let r = orbit_bfs_validated(&v, 20.0, eu(), 1.0, &budget()).unwrap();
        let exact = enumerate_exhaustive(&v, 20.0, eu(), &budget()).unwrap();
        assert_eq!(r.points, exact.points);
        assert!(r.complete);
    }

    #[test]
    fn budget_refusals_name_feasible_t() {
        let tiny = Budget::new(100);
        let err = enumerate_sl2(1000.0, eu(), &tiny).unwrap_err();
        match err {
            Error::Resource(msg) => assert!(msg.contains("T <="), "{msg}"),
            other => panic!("expected resource error, got {other}"),
        }
        let err = enumerate_exhaustive(&VarietySpec::sl(2), 1000.0, eu(), &tiny).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
        let err = orbit_bfs(
            &VarietySpec::primitive_vectors_sl2(),
            50.0,
            eu(),
            1.0,
            &Budget::new(10),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn quadric_representation_scan() {
        // column vectors of norm 1 under diag(1,1,-1): x^2 + y^2 - z^2 = 1
        let b = geometry::QuadraticForm::diagonal(&[1, 1, -1]).unwrap();
        let a = geometry::QuadraticForm::diagonal(&[1]).unwrap();
        let v = VarietySpec::quadric(b, a).unwrap();
        let r = enumerate_exhaustive(&v, 6.0, eu(), &budget()).unwrap();
        assert!(r.contains(&LatticePoint::vector(vec![1, 0, 0])));
        assert!(r.contains(&LatticePoint::vector(vec![3, 4, 5].to_vec())) == false);
        assert!(r.contains(&LatticePoint::vector(vec![1, 4, 4])));
        for p in &r.points {
            assert!(v.is_on_variety(p).unwrap());
        }
        // symmetry under sign flips of the first coordinate
        let set = entries_set(&r);
        for e in &set {
            assert!(set.contains(&vec![-e[0], e[1], e[2]]));
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempdir("round-trip");
        let r = enumerate_sl2(10.0, eu(), &budget()).unwrap();
        let path = cache_store(&r, &dir).unwrap();
        assert!(path.exists());
        let loaded = cache_load(&r.variety, 10.0, eu(), Method::Parametrized, &dir)
            .unwrap()
            .unwrap();
        assert_eq!(loaded, r);
        // different T is a clean miss
        assert!(cache_load(&r.variety, 20.0, eu(), Method::Parametrized, &dir)
            .unwrap()
            .is_none());
        // no stray temp files after the atomic rename
        let strays: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .starts_with(".tmp-")
            })
            .collect();
        assert!(strays.is_empty());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn cache_rejects_corruption() {
        let dir = tempdir("corrupt");
        let r = enumerate_sl2(5.0, eu(), &budget()).unwrap();
        let path = cache_store(&r, &dir).unwrap();
        let data = std::fs::read(&path).unwrap();
        // truncate the body
        std::fs::write(&path, &data[..data.len() - 3]).unwrap();
        let err = cache_load(&r.variety, 5.0, eu(), Method::Parametrized, &dir).unwrap_err();
        assert!(matches!(err, Error::Cache(_)), "{err}");
        // bump the schema version
        let text = String::from_utf8(data).unwrap();
        std::fs::write(&path, text.replace("\"schema_version\":1", "\"schema_version\":999"))
            .unwrap();
        let err = cache_load(&r.variety, 5.0, eu(), Method::Parametrized, &dir).unwrap_err();
        assert!(err.to_string().contains("schema"), "{err}");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    fn tempdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "homocount-cache-test-{tag}-{}",
            std::process::id()
        ));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn merge_rejects_mismatched_tasks() {
        let a = enumerate_sl2(5.0, eu(), &budget()).unwrap();
        let b = enumerate_sl2(6.0, eu(), &budget()).unwrap();
        assert!(merge_results(vec![a.clone(), b]).is_err());
        let merged = merge_results(vec![a.clone(), a.clone()]).unwrap();
        assert_eq!(merged.points, a.points);
    }
}
