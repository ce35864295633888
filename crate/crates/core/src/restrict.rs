//! Subvariety point counting inside group balls: slice counts, the
//! non-concentration comparison (subvariety growth is strictly slower than
//! group growth), and the generic-matrix complement count with exact
//! discriminant tests.

use crate::budget::Budget;
use crate::enumerate::{count_points, for_each_point, growth_fit};
use crate::error::{Error, Result};
use crate::exponents;
use crate::geometry::{
    char_poly, GroupSpec, HeightBound, LatticePoint, NormMode, SparsePoly, SpectralParams,
    VarietySpec,
};
use num::bigint::BigInt;
use num::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// A proper affine subvariety of a group variety, cut out by extra
/// polynomial equations in the matrix entries. The dimension and degree
/// are caller-declared (no Groebner machinery here); reports carry them
/// alongside fitted exponents so a wrong declaration surfaces in the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSubvariety")]
pub struct SubvarietySpec {
    pub ambient: GroupSpec,
    pub extra_polynomials: Vec<SparsePoly>,
    pub declared_dim: u32,
    pub declared_deg: u32,
}

#[derive(Deserialize)]
struct RawSubvariety {
    ambient: GroupSpec,
    extra_polynomials: Vec<SparsePoly>,
    declared_dim: u32,
    declared_deg: u32,
}

impl TryFrom<RawSubvariety> for SubvarietySpec {
    type Error = Error;
    fn try_from(r: RawSubvariety) -> Result<Self> {
        SubvarietySpec::new(r.ambient, r.extra_polynomials, r.declared_dim, r.declared_deg)
    }
}

impl SubvarietySpec {
    pub fn new(
        ambient: GroupSpec,
        extra_polynomials: Vec<SparsePoly>,
        declared_dim: u32,
        declared_deg: u32,
    ) -> Result<Self> {
        if extra_polynomials.is_empty() {
            return Err(Error::domain(
                "a proper subvariety needs at least one extra polynomial".to_string(),
            ));
        }
        if declared_dim >= ambient.dim_alg() {
            return Err(Error::domain(format!(
                "declared dimension {declared_dim} is not below the ambient dimension {}",
                ambient.dim_alg()
            )));
        }
        if declared_deg == 0 {
            return Err(Error::domain("declared degree must be positive".to_string()));
        }
        let (rows, cols) = VarietySpec::group(ambient.clone()).point_shape();
        let nvars = rows as u64 * cols as u64;
        for p in &extra_polynomials {
            if let Some(v) = p.max_var() {
                if v as u64 >= nvars {
                    return Err(Error::domain(format!(
                        "polynomial uses variable {v}, but the ambient points have {nvars} entries"
                    )));
                }
            }
        }
        Ok(SubvarietySpec {
            ambient,
            extra_polynomials,
            declared_dim,
            declared_deg,
        })
    }

    fn ambient_variety(&self) -> VarietySpec {
        VarietySpec::group(self.ambient.clone())
    }

    fn cuts_out(&self, entries: &[i64]) -> Result<bool> {
        for p in &self.extra_polynomials {
            if p.eval(entries)? != 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Growth comparison between a subvariety and its ambient group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonConcentrationReport {
    /// Rows (T, count on Y, count on G).
    pub grid: Vec<(f64, u64, u64)>,
    pub exponent_y: f64,
    pub exponent_g: f64,
    pub declared_dim: u32,
    /// alpha(G) * (1 - a(dim G - dim Y)/(dim G (a+d) 2 n_e)): the proven
    /// ceiling on the subvariety growth exponent.
    pub theorem_exponent_bound: f64,
}

fn stream_filtered_count<P: FnMut(&[i64]) -> Result<bool>>(
    v: &VarietySpec,
    t: f64,
    budget: &Budget,
    mut keep: P,
) -> Result<u64> {
    let bound = HeightBound::new(t, NormMode::Euclidean)?;
    let mut n = 0u64;
    let mut failure: Option<Error> = None;
    for_each_point(v, &bound, budget, |e| {
        if failure.is_some() {
            return;
        }
        match keep(e) {
            Ok(true) => n += 1,
            Ok(false) => {}
            Err(err) => failure = Some(err),
        }
    })?;
    match failure {
        Some(err) => Err(err),
        None => Ok(n),
    }
}

/// Exact count of ambient ball points lying on the subvariety.
pub fn count_subvariety(y: &SubvarietySpec, t: f64, budget: &Budget) -> Result<u64> {
    stream_filtered_count(&y.ambient_variety(), t, budget, |e| y.cuts_out(e))
}

/// Exact count of ball points on the union of the subvarieties (all must
/// share the ambient group). Never exceeds the sum of the parts.
pub fn count_subvariety_union(ys: &[SubvarietySpec], t: f64, budget: &Budget) -> Result<u64> {
    let Some(first) = ys.first() else {
        return Err(Error::domain("union of zero subvarieties".to_string()));
    };
    if ys.iter().any(|y| y.ambient != first.ambient) {
        return Err(Error::domain("union members live in different ambient groups".to_string()));
    }
    stream_filtered_count(&first.ambient_variety(), t, budget, |e| {
        for y in ys {
            if y.cuts_out(e)? {
                return Ok(true);
            }
        }
        Ok(false)
    })
}

/// Counts Y and G over the grid, fits both growth exponents, and computes
/// the proven exponent ceiling for Y. The report asserts nothing itself.
pub fn nonconcentration_report(
    y: &SubvarietySpec,
    t_grid: &[f64],
    params: &SpectralParams,
    budget: &Budget,
) -> Result<NonConcentrationReport> {
    if t_grid.len() < 4 {
        return Err(Error::domain(format!(
            "non-concentration grid needs at least 4 heights, got {}",
            t_grid.len()
        )));
    }
    let v = y.ambient_variety();
    let mut grid = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let n_y = count_subvariety(y, t, budget)?;
        let n_g = count_points(&v, t, NormMode::Euclidean, budget)?;
        if n_y > n_g {
            return Err(Error::data(format!(
                "subvariety count {n_y} exceeds ambient count {n_g} at T={t}"
            )));
        }
        grid.push((t, n_y, n_g));
    }
    let fit_y = growth_fit(&grid.iter().map(|&(t, a, _)| (t, a)).collect::<Vec<_>>())?;
    let fit_g = growth_fit(&grid.iter().map(|&(t, _, b)| (t, b)).collect::<Vec<_>>())?;
    let alpha = params
        .alpha_group
        .ok_or_else(|| Error::domain("group growth exponent: parameters must be user-supplied".to_string()))?;
    let bound = alpha * exponents::subvariety_exponent(params, y.declared_dim)?;
    Ok(NonConcentrationReport {
        grid,
        exponent_y: fit_y.alpha_hat,
        exponent_g: fit_g.alpha_hat,
        declared_dim: y.declared_dim,
        theorem_exponent_bound: bound.to_f64().expect("small rational"),
    })
}

fn big(v: i128) -> BigInt {
    BigInt::from(v)
}

/// Determinant by fraction-free Gaussian elimination; divisions are exact.
fn bareiss_det_big(mut m: Vec<BigInt>, n: usize) -> BigInt {
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k * n + k].is_zero() {
            let Some(swap) = (k + 1..n).find(|&r| !m[r * n + k].is_zero()) else {
                return BigInt::zero();
            };
            for c in 0..n {
                m.swap(k * n + c, swap * n + c);
            }
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = &m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j];
                m[i * n + j] = t / &prev;
            }
            m[i * n + k] = BigInt::zero();
        }
        prev = m[k * n + k].clone();
    }
    sign * m[n * n - 1].clone()
}

/// Resultant of p (monic, descending coefficients) and its derivative via
/// the Sylvester determinant, then the discriminant sign convention.
/// Degree <= 1 has no root pairs; the discriminant is 1 by convention.
pub fn poly_discriminant(p: &[BigInt]) -> Result<BigInt> {
    if p.is_empty() || !p[0].is_one() {
        return Err(Error::domain("discriminant expects a monic polynomial".to_string()));
    }
    let n = p.len() - 1;
    if n <= 1 {
        return Ok(BigInt::one());
    }
    let dp: Vec<BigInt> = (0..n).map(|i| &p[i] * big((n - i) as i128)).collect();
    let size = 2 * n - 1;
    let mut m = vec![BigInt::zero(); size * size];
    for r in 0..n - 1 {
        for (j, c) in p.iter().enumerate() {
            m[r * size + r + j] = c.clone();
        }
    }
    for r in 0..n {
        for (j, c) in dp.iter().enumerate() {
            m[(n - 1 + r) * size + r + j] = c.clone();
        }
    }
    let res = bareiss_det_big(m, size);
    let negate = (n * (n - 1) / 2) % 2 == 1;
    Ok(if negate { -res } else { res })
}

/// Discriminant of the characteristic polynomial: zero exactly when two
/// eigenvalues (real or complex) coincide.
pub fn eigenvalue_discriminant(x: &LatticePoint) -> Result<BigInt> {
    let p: Vec<BigInt> = char_poly(x)?.into_iter().map(big).collect();
    poly_discriminant(&p)
}

/// Discriminant of the characteristic polynomial of x^t x: zero exactly
/// when two singular values coincide.
pub fn singular_value_discriminant(x: &LatticePoint) -> Result<BigInt> {
    let gram = x.transpose().matmul(x)?;
    let p: Vec<BigInt> = char_poly(&gram)?.into_iter().map(big).collect();
    poly_discriminant(&p)
}

fn leading_minor(entries: &[i64], n: usize, k: usize) -> BigInt {
    let m: Vec<BigInt> = (0..k * k)
        .map(|i| big(entries[(i / k) * n + i % k] as i128))
        .collect();
    bareiss_det_big(m, k)
}

/// All leading principal minors 1..n are nonzero.
pub fn leading_minors_nonzero(x: &LatticePoint) -> Result<bool> {
    if x.rows() != x.cols() {
        return Err(Error::domain("principal minors of a non-square matrix".to_string()));
    }
    let n = x.rows() as usize;
    Ok((1..=n).all(|k| !leading_minor(x.entries(), n, k).is_zero()))
}

/// The four genericity predicates: nonzero entries, nonvanishing leading
/// principal minors, distinct eigenvalues, distinct singular values.
pub fn is_generic(x: &LatticePoint) -> Result<bool> {
    if x.entries().iter().any(|&e| e == 0) {
        return Ok(false);
    }
    if !leading_minors_nonzero(x)? {
        return Ok(false);
    }
    if eigenvalue_discriminant(x)?.is_zero() {
        return Ok(false);
    }
    Ok(!singular_value_discriminant(x)?.is_zero())
}

/// (all points, generic points) in the SL_n ball of height T.
pub fn generic_count(n: u32, t: f64, budget: &Budget) -> Result<(u64, u64)> {
    let v = VarietySpec::sl(n);
    let bound = HeightBound::new(t, NormMode::Euclidean)?;
    let mut total = 0u64;
    let mut generic = 0u64;
    let mut failure: Option<Error> = None;
    for_each_point(&v, &bound, budget, |e| {
        if failure.is_some() {
            return;
        }
        total += 1;
        let x = match LatticePoint::new(n, n, e.to_vec()) {
            Ok(x) => x,
            Err(err) => {
                failure = Some(err);
                return;
            }
        };
        match is_generic(&x) {
            Ok(true) => generic += 1,
            Ok(false) => {}
            Err(err) => failure = Some(err),
        }
    })?;
    match failure {
        Some(err) => Err(err),
        None => Ok((total, generic)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::default_spectral_params;
    use num::Signed;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn budget() -> Budget {
        Budget::default()
    }

    fn sl2_sub(polys: Vec<SparsePoly>, dim: u32) -> SubvarietySpec {
        SubvarietySpec::new(GroupSpec::sl(2), polys, dim, 1).unwrap()
    }

    fn lower_left() -> SparsePoly {
        SparsePoly::entry(2, 2, 1, 0)
    }

    fn upper_right() -> SparsePoly {
        SparsePoly::entry(2, 2, 0, 1)
    }

    fn trace_minus(k: i64) -> SparsePoly {
        SparsePoly::trace(2).add(SparsePoly::constant(-k))
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(SubvarietySpec::new(GroupSpec::sl(2), vec![], 1, 1).is_err());
        assert!(SubvarietySpec::new(GroupSpec::sl(2), vec![lower_left()], 3, 1).is_err());
        assert!(SubvarietySpec::new(GroupSpec::sl(2), vec![lower_left()], 1, 0).is_err());
        let too_many_vars = SparsePoly::entry(3, 3, 2, 2);
        assert!(SubvarietySpec::new(GroupSpec::sl(2), vec![too_many_vars], 1, 1).is_err());
    }

    #[test]
    fn unipotent_slice_t10() {
        // lower-left zero forces +-(upper unitriangular); 2 + b^2 <= 100
        // leaves b in [-9, 9], two signs: 38 points
        let y = sl2_sub(vec![lower_left()], 1);
        assert_eq!(count_subvariety(&y, 10.0, &budget()).unwrap(), 38);
    }

    #[test]
    fn identity_slice_is_single_point() {
        let y = sl2_sub(vec![trace_minus(2), upper_right(), lower_left()], 0);
        for t in [1.5, 10.0] {
            assert_eq!(count_subvariety(&y, t, &budget()).unwrap(), 1, "T={t}");
        }
    }

    #[test]
    fn unreachable_trace_slice_is_empty() {
        let y = sl2_sub(vec![trace_minus(1_000_000)], 1);
        assert_eq!(count_subvariety(&y, 10.0, &budget()).unwrap(), 0);
    }

    #[test]
    fn extra_constraint_never_increases_count() {
        let b = budget();
        let loose = sl2_sub(vec![lower_left()], 1);
        let tight = sl2_sub(vec![lower_left(), trace_minus(2)], 1);
        let n_loose = count_subvariety(&loose, 10.0, &b).unwrap();
        let n_tight = count_subvariety(&tight, 10.0, &b).unwrap();
        // the tight slice is the 19 upper unitriangulars with +1 diagonal
        assert_eq!(n_loose, 38);
        assert_eq!(n_tight, 19);
        assert!(n_tight <= n_loose);
    }

    #[test]
    fn union_matches_inclusion_exclusion() {
        let b = budget();
        let yb = sl2_sub(vec![upper_right()], 1);
        let yc = sl2_sub(vec![lower_left()], 1);
        let both = sl2_sub(vec![upper_right(), lower_left()], 1);
        let t = 30.0;
        let nb = count_subvariety(&yb, t, &b).unwrap();
        let nc = count_subvariety(&yc, t, &b).unwrap();
        let nboth = count_subvariety(&both, t, &b).unwrap();
        let nunion = count_subvariety_union(&[yb, yc], t, &b).unwrap();
        // b = c = 0 leaves the diagonal: exactly +-identity
        assert_eq!(nboth, 2);
        assert_eq!(nunion, nb + nc - nboth);
        assert!(nunion <= nb + nc);
    }

    #[test]
    fn union_rejects_mixed_ambient() {
        let y2 = sl2_sub(vec![lower_left()], 1);
        let y3 = SubvarietySpec::new(GroupSpec::sl(3), vec![SparsePoly::entry(3, 3, 2, 0)], 4, 1)
            .unwrap();
        assert!(count_subvariety_union(&[y2, y3], 5.0, &budget()).is_err());
    }

    #[test]
    fn nonconcentration_sl2_unipotent_slice() {
        let y = sl2_sub(vec![lower_left()], 1);
        let params = default_spectral_params(&GroupSpec::sl(2)).unwrap();
        let grid: Vec<f64> = crate::enumerate::geometric_grid(100.0, 3000.0, 6);
        let r = nonconcentration_report(&y, &grid, &params, &budget()).unwrap();
        assert!((r.exponent_y - 1.0).abs() <= 0.15, "exponent_y = {}", r.exponent_y);
        assert!((r.exponent_g - 2.0).abs() <= 0.1, "exponent_g = {}", r.exponent_g);
        assert!((r.theorem_exponent_bound - 11.0 / 6.0).abs() < 1e-12);
        for &(t, n_y, n_g) in &r.grid {
            assert!(n_y <= n_g, "T={t}");
        }
        // frozen empirical margin, and the theorem-shape margin with slack
        assert!(r.exponent_y <= r.exponent_g - 0.5);
        assert!(r.exponent_y <= (11.0 / 12.0) * r.exponent_g + 0.15);
    }

    #[test]
    fn nonconcentration_rejects_short_grid() {
        let y = sl2_sub(vec![lower_left()], 1);
        let params = default_spectral_params(&GroupSpec::sl(2)).unwrap();
        let out = nonconcentration_report(&y, &[100.0, 200.0, 400.0], &params, &budget());
        assert!(matches!(out.unwrap_err(), Error::Domain(_)));
    }

    #[test]
    fn generic_tiny_ball_has_none() {
        // the four points of height <= 1.5 are +-I and +-J; all contain
        // zero entries
        assert_eq!(generic_count(2, 1.5, &budget()).unwrap(), (4, 0));
    }

    #[test]
    fn generic_ratio_band_t10() {
        let (n, g) = generic_count(2, 10.0, &budget()).unwrap();
        assert!(g as f64 / n as f64 >= 0.5, "{g}/{n}");
    }

    #[test]
    fn generic_ratio_trend() {
        let b = budget();
        let (n100, g100) = generic_count(2, 100.0, &b).unwrap();
        let (n400, g400) = generic_count(2, 400.0, &b).unwrap();
        let r100 = g100 as f64 / n100 as f64;
        let r400 = g400 as f64 / n400 as f64;
        assert!(r400 >= r100 - 0.05, "{r400} vs {r100}");
    }

    #[test]
    fn generic_sl3_small_ball() {
        let b = budget();
        let (n3, g3) = generic_count(3, 3.0, &b).unwrap();
        assert_eq!(
            n3,
            count_points(&VarietySpec::sl(3), 3.0, NormMode::Euclidean, &b).unwrap()
        );
        // height <= 3 means all entries +-1, whose determinant is even
        assert_eq!(g3, 0);
        let (n4, g4) = generic_count(3, 4.0, &b).unwrap();
        assert!(n4 > n3);
        assert!(g4 >= 1, "a generic point of height sqrt(15) exists");
    }

    #[test]
    fn generic_example_matrix_sl3() {
        let x = LatticePoint::new(3, 3, vec![2, 1, 1, 1, 2, 1, 1, 1, 1]).unwrap();
        assert_eq!(x.height_sq(), 15);
        assert!(is_generic(&x).unwrap());
    }

    #[test]
    fn predicates_distinguish_eigen_and_singular() {
        // the rotation J has distinct eigenvalues +-i but equal singular
        // values; the shear has a repeated eigenvalue
        let j = LatticePoint::new(2, 2, vec![0, -1, 1, 0]).unwrap();
        assert_eq!(eigenvalue_discriminant(&j).unwrap(), big(-4));
        assert!(singular_value_discriminant(&j).unwrap().is_zero());
        let shear = LatticePoint::new(2, 2, vec![1, 1, 0, 1]).unwrap();
        assert!(eigenvalue_discriminant(&shear).unwrap().is_zero());
        let x = LatticePoint::new(2, 2, vec![2, 1, 1, 1]).unwrap();
        assert_eq!(eigenvalue_discriminant(&x).unwrap(), big(5));
        assert_eq!(singular_value_discriminant(&x).unwrap(), big(45));
        assert!(is_generic(&x).unwrap());
    }

    #[test]
    fn discriminant_closed_forms_n2() {
        // disc of x^2 - t x + 1 is t^2 - 4; the Gram matrix has trace
        // equal to the squared height and determinant 1
        let b = budget();
        let ball = crate::enumerate::enumerate_sl2(6.0, NormMode::Euclidean, &b).unwrap();
        for p in &ball.points {
            let tr = (p.get(0, 0) + p.get(1, 1)) as i128;
            assert_eq!(eigenvalue_discriminant(p).unwrap(), big(tr * tr - 4));
            let h = p.height_sq() as i128;
            assert_eq!(singular_value_discriminant(p).unwrap(), big(h * h - 4));
        }
    }

    #[test]
    fn cubic_discriminant_known_values() {
        // lambda^3 - 1 has disc -27; a cyclic permutation matrix realizes it
        let perm = LatticePoint::new(3, 3, vec![0, 1, 0, 0, 0, 1, 1, 0, 0]).unwrap();
        assert_eq!(eigenvalue_discriminant(&perm).unwrap(), big(-27));
        // (lambda - 1)^2 (lambda + 2) = lambda^3 - 3 lambda + 2
        let p = [big(1), big(0), big(-3), big(2)];
        assert!(poly_discriminant(&p).unwrap().is_zero());
        // general cubic formula on lambda^3 + 2 lambda^2 - lambda + 3:
        // 18bcd - 4b^3 d + b^2 c^2 - 4c^3 - 27d^2
        let p = [big(1), big(2), big(-1), big(3)];
        let (b2, c, d) = (2i128, -1i128, 3i128);
        let expect = 18 * b2 * c * d - 4 * b2.pow(3) * d + b2 * b2 * c * c - 4 * c.pow(3)
            - 27 * d * d;
        assert_eq!(poly_discriminant(&p).unwrap(), big(expect));
    }

    #[test]
    fn discriminant_rejects_non_monic() {
        assert!(poly_discriminant(&[big(2), big(1)]).is_err());
        assert!(poly_discriminant(&[]).is_err());
    }

    /// Degree of gcd(p, q) over Q via a pseudo-remainder sequence.
    fn gcd_degree(p: &[BigInt], q: &[BigInt]) -> usize {
        fn trim(v: &mut Vec<BigInt>) {
            while v.len() > 1 && v[0].is_zero() {
                v.remove(0);
            }
        }
        fn content_reduce(v: &mut [BigInt]) {
            let mut g = BigInt::zero();
            for c in v.iter() {
                g = num::integer::gcd(g, c.abs());
            }
            if !g.is_zero() && !g.is_one() {
                for c in v.iter_mut() {
                    *c = &*c / &g;
                }
            }
        }
        let mut a: Vec<BigInt> = p.to_vec();
        let mut b: Vec<BigInt> = q.to_vec();
        trim(&mut a);
        trim(&mut b);
        loop {
            if b.iter().all(|c| c.is_zero()) {
                return a.len() - 1;
            }
            if b.len() > a.len() {
                std::mem::swap(&mut a, &mut b);
                continue;
            }
            // pseudo-division: lc(b)^(deg a - deg b + 1) * a mod b
            let shift = a.len() - b.len();
            let lcb = b[0].clone();
            let mut r = a.clone();
            for c in r.iter_mut() {
                *c = &*c * lcb.pow(shift as u32 + 1);
            }
            for k in 0..=shift {
                let factor = r[k].clone() / b[0].clone();
                for (j, bc) in b.iter().enumerate() {
                    let t = &r[k + j] - &factor * bc;
                    r[k + j] = t;
                }
            }
            let mut rem: Vec<BigInt> = r[shift + 1..].to_vec();
            if rem.is_empty() {
                rem.push(BigInt::zero());
            }
            trim(&mut rem);
            content_reduce(&mut rem);
            a = b;
            b = rem;
        }
    }

    #[test]
    fn discriminant_vanishes_iff_gcd_nontrivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            // half the trials force a repeated root via (x - a)^2 (x - b)
            let p: Vec<BigInt> = if trial % 2 == 0 {
                let a = rng.gen_range(-6i128..=6);
                let bb = rng.gen_range(-6i128..=6);
                vec![big(1), big(-2 * a - bb), big(a * a + 2 * a * bb), big(-a * a * bb)]
            } else {
                vec![
                    big(1),
                    big(rng.gen_range(-9i128..=9)),
                    big(rng.gen_range(-9i128..=9)),
                    big(rng.gen_range(-9i128..=9)),
                ]
            };
            let n = p.len() - 1;
            let dp: Vec<BigInt> = (0..n).map(|i| &p[i] * big((n - i) as i128)).collect();
            let disc = poly_discriminant(&p).unwrap();
            let g = gcd_degree(&p, &dp);
            assert_eq!(disc.is_zero(), g >= 1, "p = {p:?}, gcd degree {g}");
        }
    }

    #[test]
    fn subvariety_spec_serde_round_trip() {
        let y = sl2_sub(vec![lower_left(), trace_minus(2)], 1);
        let json = serde_json::to_string(&y).unwrap();
        let back: SubvarietySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, y);
        let bad = r#"{"ambient":{"special-linear":{"n":2}},"extra_polynomials":[],"declared_dim":1,"declared_deg":1}"#;
        assert!(serde_json::from_str::<SubvarietySpec>(bad).is_err());
    }
}
