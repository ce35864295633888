//! Closed-form evaluation of the explicit lifting, restriction, sieve and
//! Linnik constants in exact rational arithmetic.
//!
//! Two different "least even integer" conventions coexist in these
//! formulas: the global one derived from the integrability parameter p
//! ([`crate::numeric::n_e`]) and the spin-variety one driven by the form
//! size m ([`even_ceil`] of floor(m/2)). They are kept as separately named
//! functions so neither silently stands in for the other.

use crate::error::{Error, Result};
use crate::geometry::{default_spectral_params, GroupSpec, SpectralParams};
use crate::numeric::Rational;
use num::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn rat(n: i64) -> Rational {
    Rational::from_integer(n)
}

/// Least even integer >= x.
pub fn even_ceil(x: u64) -> u64 {
    if x % 2 == 0 {
        x.max(0)
    } else {
        x + 1
    }
}

fn need_alpha_group(params: &SpectralParams) -> Result<Rational> {
    params.alpha_group.ok_or_else(|| {
        Error::domain("group growth exponent absent: parameters must be user-supplied".to_string())
    })
}

fn need_alpha_orbit(params: &SpectralParams) -> Result<Rational> {
    params.alpha_orbit.ok_or_else(|| {
        Error::domain("orbit growth exponent absent: parameters must be user-supplied".to_string())
    })
}

fn two_ne(params: &SpectralParams) -> Rational {
    rat(2 * params.n_e() as i64)
}

/// Group lifting exponent: dim/alpha * (a+d)/a * 2 n_e(p).
pub fn sigma0_group(params: &SpectralParams) -> Result<Rational> {
    let alpha = need_alpha_group(params)?;
    Ok(rat(params.dim as i64) / alpha * ((params.a + params.d) / params.a) * two_ne(params))
}

/// Lifting exponent for the spin variety of a split form of size m >= 3,
/// with the size-driven even convention: n_e = least even >= floor(m/2).
pub fn sigma_m_spin(m: u64) -> Result<Rational> {
    if m < 3 {
        return Err(Error::domain("spin lifting exponent needs m >= 3".to_string()));
    }
    let ne = even_ceil(m / 2) as i64;
    let m = m as i64;
    let core = m * m - m + 1;
    Ok(if m % 2 == 1 {
        Rational::new(4 * m * core * ne, m - 1)
    } else {
        Rational::new(4 * (m - 1) * core * ne, m + 2)
    })
}

/// Group-level companion of [`sigma_m_spin`]; the variety value is exactly
/// twice this (the spin action doubles heights quadratically).
pub fn sigma_group_spin(m: u64) -> Result<Rational> {
    if m < 3 {
        return Err(Error::domain("spin lifting exponent needs m >= 3".to_string()));
    }
    let ne = even_ceil(m / 2) as i64;
    let m = m as i64;
    let core = m * m - m + 1;
    Ok(if m % 2 == 1 {
        Rational::new(2 * m * core * ne, m - 1)
    } else {
        Rational::new(2 * (m - 1) * core * ne, m + 2)
    })
}

/// Non-concentration multiplier for a proper subvariety of dimension dim_Y:
/// 1 - a (dim - dim_Y) / (dim (a+d) 2 n_e(p)).
pub fn subvariety_exponent(params: &SpectralParams, dim_y: u32) -> Result<Rational> {
    if dim_y >= params.dim {
        return Err(Error::domain(format!(
            "subvariety dimension {dim_y} must be strictly below the group dimension {}",
            params.dim
        )));
    }
    let dim = rat(params.dim as i64);
    let codim = rat((params.dim - dim_y) as i64);
    Ok(rat(1) - params.a * codim / (dim * (params.a + params.d) * two_ne(params)))
}

/// Special linear ball exponent for subvariety counts, with an explicit
/// even parameter: n^2 - n - (n^2 - 1 - dim_Y) / ((n^2 + n) 2 n_e).
pub fn sl_exponent_with_ne(n: u32, dim_y: u32, ne: u64) -> Result<Rational> {
    if n < 2 {
        return Err(Error::domain("special linear exponent needs n >= 2".to_string()));
    }
    if dim_y >= n * n - 1 {
        return Err(Error::domain(format!(
            "subvariety dimension {dim_y} must be strictly below {}",
            n * n - 1
        )));
    }
    if ne == 0 {
        return Err(Error::domain("even parameter must be positive".to_string()));
    }
    let n = n as i64;
    Ok(rat(n * n - n)
        - Rational::new(n * n - 1 - dim_y as i64, (n * n + n) * 2 * ne as i64))
}

/// [`sl_exponent_with_ne`] at its printed convention n_e = least even
/// integer >= n - 1.
pub fn sl_exponent(n: u32, dim_y: u32) -> Result<Rational> {
    sl_exponent_with_ne(n, dim_y, even_ceil(n as u64 - 1))
}

/// A strict threshold together with the least integer exceeding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    #[serde(with = "crate::geometry::rational_serde")]
    pub value: Rational,
    pub least_admissible: i64,
}

impl Threshold {
    fn new(value: Rational) -> Self {
        Threshold {
            value,
            least_admissible: value.floor().to_integer() + 1,
        }
    }
}

/// Almost-prime threshold on symmetric varieties:
/// r > 9 alpha_orbit^{-1} (1+dim)(1+3 dim) 2 n_e(p) t deg.
pub fn r_symmetric(params: &SpectralParams, t: u32, deg: u32) -> Result<Threshold> {
    if t == 0 || deg == 0 {
        return Err(Error::domain("t and deg must be positive".to_string()));
    }
    let alpha = need_alpha_orbit(params)?;
    let dim = params.dim as i64;
    let value = rat(9) / alpha
        * rat(1 + dim)
        * rat(1 + 3 * dim)
        * two_ne(params)
        * rat(t as i64)
        * rat(deg as i64);
    Ok(Threshold::new(value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinnikThreshold {
    #[serde(with = "crate::geometry::rational_serde")]
    pub sigma0: Rational,
    pub r: Threshold,
}

/// sigma0 = alpha^{-1} dim (1+dim) 2 n_e(p), the least group-level sigma
/// admitting a Linnik threshold.
pub fn sigma0_linnik_group(params: &SpectralParams) -> Result<Rational> {
    let alpha = need_alpha_group(params)?;
    let dim = rat(params.dim as i64);
    Ok(dim * (dim + rat(1)) * two_ne(params) / alpha)
}

/// Symmetric-orbit companion of [`sigma0_linnik_group`] with (1+3 dim).
pub fn sigma0_linnik_symmetric(params: &SpectralParams) -> Result<Rational> {
    let alpha = need_alpha_orbit(params)?;
    let dim = rat(params.dim as i64);
    Ok(dim * (rat(1) + rat(3) * dim) * two_ne(params) / alpha)
}

/// Linnik-type threshold on the group: sigma must exceed
/// sigma0 = alpha^{-1} dim (1+dim) 2 n_e(p), and then
/// r > 9 alpha sigma / (alpha sigma - dim) * sigma0 * t deg.
pub fn r_linnik_group(
    params: &SpectralParams,
    sigma: Rational,
    t: u32,
    deg: u32,
) -> Result<LinnikThreshold> {
    if t == 0 || deg == 0 {
        return Err(Error::domain("t and deg must be positive".to_string()));
    }
    let alpha = need_alpha_group(params)?;
    let dim = rat(params.dim as i64);
    let sigma0 = sigma0_linnik_group(params)?;
    if sigma <= sigma0 {
        return Err(Error::domain(format!(
            "sigma = {sigma} must strictly exceed sigma0 = {sigma0}"
        )));
    }
    let value =
        rat(9) * alpha * sigma / (alpha * sigma - dim) * sigma0 * rat(t as i64) * rat(deg as i64);
    Ok(LinnikThreshold {
        sigma0,
        r: Threshold::new(value),
    })
}

/// Linnik-type threshold on a symmetric orbit: sigma0 uses (1+3 dim) and
/// the orbit growth exponent.
pub fn r_linnik_symmetric(
    params: &SpectralParams,
    sigma: Rational,
    t: u32,
    deg: u32,
) -> Result<LinnikThreshold> {
    if t == 0 || deg == 0 {
        return Err(Error::domain("t and deg must be positive".to_string()));
    }
    let alpha = need_alpha_orbit(params)?;
    let dim = rat(params.dim as i64);
    let sigma0 = sigma0_linnik_symmetric(params)?;
    if sigma <= sigma0 {
        return Err(Error::domain(format!(
            "sigma = {sigma} must strictly exceed sigma0 = {sigma0}"
        )));
    }
    let value = sigma / (alpha * sigma - dim)
        * rat(9)
        * rat(t as i64)
        * rat(deg as i64)
        * dim
        * (rat(1) + rat(3) * dim)
        * two_ne(params);
    Ok(LinnikThreshold {
        sigma0,
        r: Threshold::new(value),
    })
}

/// Level-regime constant kappa = (9 t (1+dim)(1+3 dim) 2 n_e(p))^{-1}.
pub fn kappa(params: &SpectralParams, t: u32) -> Result<Rational> {
    if t == 0 {
        return Err(Error::domain("t must be positive".to_string()));
    }
    let dim = params.dim as i64;
    Ok(rat(1) / (rat(9) * rat(t as i64) * rat(1 + dim) * rat(1 + 3 * dim) * two_ne(params)))
}

/// Sieve level exponent tau0 = (2 n_e(p) dim (1+dim))^{-1}, or the
/// symmetric variant with (1+3 dim).
pub fn tau0(params: &SpectralParams, symmetric: bool) -> Rational {
    let dim = params.dim as i64;
    let last = if symmetric { 1 + 3 * dim } else { 1 + dim };
    rat(1) / (two_ne(params) * rat(dim) * rat(last))
}

/// Equidistribution defect delta0 = (2 n_e(p))^{-1} a/(a+d).
pub fn delta0(params: &SpectralParams) -> Rational {
    params.a / (params.a + params.d) / two_ne(params)
}

/// One evaluated formula for the reports: name, inputs, exact value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub name: String,
    pub inputs: BTreeMap<String, String>,
    /// Exact value as a rational string.
    pub value_exact: String,
    pub value: f64,
    /// The formula itself, spelled out in the report for auditability.
    pub formula: String,
}

fn fmt_rat(r: Rational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn report(
    name: &str,
    inputs: &[(&str, String)],
    value: Rational,
    formula: &str,
) -> ExponentReport {
    ExponentReport {
        name: name.to_string(),
        inputs: inputs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
        value_exact: fmt_rat(value),
        value: value.to_f64().unwrap_or(f64::NAN),
        formula: formula.to_string(),
    }
}

/// Evaluates every formula that the given parameters support, for the
/// report tables. t = deg = 1 and sigma = 2 sigma0 are used where a free
/// choice is needed; the inputs map records them.
pub fn standard_table(params: &SpectralParams) -> Vec<ExponentReport> {
    let base: Vec<(&str, String)> = vec![
        ("p", fmt_rat(params.p)),
        ("a", fmt_rat(params.a)),
        ("d", fmt_rat(params.d)),
        ("dim", params.dim.to_string()),
        ("n_e", params.n_e().to_string()),
    ];
    let with = |extra: &[(&'static str, String)]| -> Vec<(&'static str, String)> {
        let mut v = base.clone();
        v.extend(extra.iter().map(|(k, s)| (*k, s.clone())));
        v
    };
    let mut rows = Vec::new();
    if let Ok(s0) = sigma0_group(params) {
        rows.push(report(
            "sigma0_group",
            &with(&[("alpha", fmt_rat(params.alpha_group.unwrap()))]),
            s0,
            "dim/alpha * (a+d)/a * 2 n_e",
        ));
    }
    rows.push(report(
        "delta0",
        &base,
        delta0(params),
        "a/(a+d) / (2 n_e)",
    ));
    rows.push(report(
        "tau0_group",
        &base,
        tau0(params, false),
        "1 / (2 n_e * dim * (1+dim))",
    ));
    rows.push(report(
        "tau0_symmetric",
        &base,
        tau0(params, true),
        "1 / (2 n_e * dim * (1+3 dim))",
    ));
    if let Ok(k) = kappa(params, 1) {
        rows.push(report(
            "kappa",
            &with(&[("t", "1".to_string())]),
            k,
            "1 / (9 t (1+dim)(1+3 dim) 2 n_e)",
        ));
    }
    if let Ok(th) = r_symmetric(params, 1, 1) {
        rows.push(report(
            "r_symmetric",
            &with(&[
                ("alpha_orbit", fmt_rat(params.alpha_orbit.unwrap())),
                ("t", "1".to_string()),
                ("deg", "1".to_string()),
                ("least_admissible", th.least_admissible.to_string()),
            ]),
            th.value,
            "9/alpha_orbit * (1+dim)(1+3 dim) 2 n_e * t * deg",
        ));
    }
    if let Ok(sigma0) = sigma0_linnik_group(params) {
        let sigma = sigma0 * rat(2);
        if let Ok(th) = r_linnik_group(params, sigma, 1, 1) {
            rows.push(report(
                "r_linnik_group",
                &with(&[
                    ("alpha", fmt_rat(params.alpha_group.unwrap())),
                    ("sigma", fmt_rat(sigma)),
                    ("sigma0", fmt_rat(th.sigma0)),
                    ("t", "1".to_string()),
                    ("deg", "1".to_string()),
                    ("least_admissible", th.r.least_admissible.to_string()),
                ]),
                th.r.value,
                "9 alpha sigma/(alpha sigma - dim) * sigma0 * t * deg",
            ));
        }
    }
    if let Ok(sigma0) = sigma0_linnik_symmetric(params) {
        let sigma = sigma0 * rat(2);
        if let Ok(th) = r_linnik_symmetric(params, sigma, 1, 1) {
            rows.push(report(
                "r_linnik_symmetric",
                &with(&[
                    ("alpha_orbit", fmt_rat(params.alpha_orbit.unwrap())),
                    ("sigma", fmt_rat(sigma)),
                    ("sigma0", fmt_rat(th.sigma0)),
                    ("t", "1".to_string()),
                    ("deg", "1".to_string()),
                    ("least_admissible", th.r.least_admissible.to_string()),
                ]),
                th.r.value,
                "sigma/(alpha sigma - dim) * 9 t deg dim (1+3 dim) 2 n_e",
            ));
        }
    }
    if params.dim >= 2 {
        if let Ok(sub) = subvariety_exponent(params, params.dim - 1) {
            rows.push(report(
                "subvariety_exponent",
                &with(&[("dim_Y", (params.dim - 1).to_string())]),
                sub,
                "1 - a (dim - dim_Y)/(dim (a+d) 2 n_e)",
            ));
        }
    }
    rows
}

/// SL_n spectral parameters extended with the symmetric-square orbit
/// growth exponent (n^2 - n)/2.
pub fn sl_symmetric_orbit_params(n: u32) -> Result<SpectralParams> {
    let mut params = default_spectral_params(&GroupSpec::sl(n))?;
    params.alpha_orbit = Some(Rational::new((n * n - n) as i64, 2));
    Ok(params)
}
