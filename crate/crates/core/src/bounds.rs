//! Tail bounds for `ln(Z_{n0+n} / Z_{n0})`.
//!
//! Bernstein, semi-exponential, Fuk-Nagaev and Hoeffding bounds control the
//! standardized statistic `Z_{n0,n}`; von Bahr-Esseen, Rio, its corollary and the
//! Azuma-Hoeffding bound control the per-generation deviation
//! `ln(Z_{n0+n}/Z_{n0}) / n - mu`. Values are returned raw (they exceed 1 for small
//! `x`) and can be clamped with [`BoundValue::clamped`]. Theorems stated for `x > 0`
//! are extended to `x = 0` by continuity where the limit is finite.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::{moment_profile, EnvironmentModel, DEFAULT_K_MAX};
use crate::process::Scale;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundComponent {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundValue {
    pub components: Vec<BoundComponent>,
}

impl BoundValue {
    fn single(name: &'static str, value: f64) -> Self {
        Self {
            components: vec![BoundComponent { name, value }],
        }
    }

    fn pair(a: (&'static str, f64), b: (&'static str, f64)) -> Self {
        Self {
            components: vec![
                BoundComponent {
                    name: a.0,
                    value: a.1,
                },
                BoundComponent {
                    name: b.0,
                    value: b.1,
                },
            ],
        }
    }

    /// Raw bound: the sum of the components.
    pub fn value(&self) -> f64 {
        self.components.iter().map(|c| c.value).sum()
    }

    pub fn clamped(&self) -> f64 {
        self.value().min(1.0)
    }

    pub fn component(&self, i: usize) -> Option<f64> {
        self.components.get(i).map(|c| c.value)
    }
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} must be finite and >= 0")))
    }
}

fn check_positive_x(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} requires x > 0 (got {x}); the polynomial term diverges at 0"
        )))
    }
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        Err(Error::Domain("n must be at least 1".into()))
    } else {
        Ok(n as f64)
    }
}

fn check_positive(value: f64, name: &str) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {value} must be positive")))
    }
}

/// `h(t) = (1 + t) ln(1 + t) - t`, with its Taylor series near 0.
pub(crate) fn bennett_h(t: f64) -> f64 {
    if t < 1e-3 {
        let t2 = t * t;
        t2 * (0.5 - t / 6.0 + t2 / 12.0 - t2 * t / 20.0 + t2 * t2 / 30.0)
    } else {
        (1.0 + t) * t.ln_1p() - t
    }
}

/// `2 exp{-x^2 / (2 (1 + 6 (1 + H) x / (sigma sqrt n)))}` under Bernstein's condition.
pub fn bernstein_bound(x: f64, n: usize, sigma: f64, h: f64) -> Result<BoundValue> {
    check_x(x)?;
    let nf = check_n(n)?;
    check_positive(sigma, "sigma")?;
    check_positive(h, "H")?;
    let denom = 2.0 * (1.0 + 6.0 * (1.0 + h) * x / (sigma * nf.sqrt()));
    Ok(BoundValue::single(
        "bernstein",
        2.0 * (-x * x / denom).exp(),
    ))
}

/// `3 exp{-x^2 / (8 (u + (sigma sqrt n)^-alpha x^(2 - alpha)))}` under a semi-exponential moment.
pub fn semi_exp_bound(x: f64, n: usize, sigma: f64, alpha: f64, u: f64) -> Result<BoundValue> {
    check_x(x)?;
    let nf = check_n(n)?;
    check_positive(sigma, "sigma")?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(u >= 1.0 && u.is_finite()) {
        return Err(Error::Domain(format!("u = {u} must be >= 1")));
    }
    let denom = 8.0 * (u + (sigma * nf.sqrt()).powf(-alpha) * x.powf(2.0 - alpha));
    Ok(BoundValue::single(
        "semi_exponential",
        3.0 * (-x * x / denom).exp(),
    ))
}

/// `exp{-x^2 / (2 V^2)} + C_p / (n^((p-2)/2) x^p)` with `V^2 = (p+2)^2 e^p` and
/// `C_p = 2^(p+1) (1 + 2/p)^p E|(X - mu)/sigma|^p`.
pub fn fuk_nagaev_bound(x: f64, n: usize, p: f64, std_abs_p_moment: f64) -> Result<BoundValue> {
    check_positive_x(x, "the Fuk-Nagaev bound")?;
    let nf = check_n(n)?;
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::Domain(format!("Fuk-Nagaev needs p >= 2 (got {p})")));
    }
    check_positive(std_abs_p_moment, "E|(X - mu)/sigma|^p")?;
    let v2 = (p + 2.0).powi(2) * p.exp();
    let c_p = 2f64.powf(p + 1.0) * (1.0 + 2.0 / p).powf(p) * std_abs_p_moment;
    Ok(BoundValue::pair(
        ("gaussian", (-x * x / (2.0 * v2)).exp()),
        ("polynomial", c_p / (nf.powf((p - 2.0) / 2.0) * x.powf(p))),
    ))
}

/// `C_p / (x^p n^(p-1))` with `C_p = 2^(p+1) E|X - mu|^p + (2p)^p e^-p`; per-generation scale.
///
/// The two components are the random-walk and normalized-population parts of `C_p`.
pub fn von_bahr_esseen_bound(x: f64, n: usize, p: f64, abs_p_moment: f64) -> Result<BoundValue> {
    check_positive_x(x, "the von Bahr-Esseen bound")?;
    let nf = check_n(n)?;
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Domain(format!(
            "von Bahr-Esseen needs p in (1, 2] (got {p})"
        )));
    }
    check_positive(abs_p_moment, "E|X - mu|^p")?;
    let scale = x.powf(p) * nf.powf(p - 1.0);
    Ok(BoundValue::pair(
        ("walk", 2f64.powf(p + 1.0) * abs_p_moment / scale),
        ("normalization", (2.0 * p).powf(p) * (-p).exp() / scale),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HoeffdingRegime {
    /// `0 <= x <= sigma sqrt(n) / 2`: leading coefficient 2.
    Moderate,
    /// `x > sigma sqrt(n) / 2`: coefficient 1 plus `exp{-x sigma sqrt(n) / 2}`.
    Large,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoeffdingBound {
    pub regime: HoeffdingRegime,
    /// Bennett-type form `exp{-(sigma^2 n / H^2) h(H x / (2 sigma sqrt n))}`.
    pub sharp: BoundValue,
    /// `exp{-x^2 / (8 (1 + H x / (6 sigma sqrt n)))}`.
    pub relaxed: BoundValue,
    /// The Bennett-type form with exponent `(x/2H)[(1 + 2 sigma sqrt(n)/(H x)) ln(1 + H x/(2 sigma sqrt n)) - 1]`,
    /// i.e. `sigma sqrt(n)` times smaller than `sharp`'s. Kept for comparison only: it
    /// does not sit below `relaxed` once `sigma sqrt(n) > 1`.
    pub sharp_literal: BoundValue,
}

/// Hoeffding-type bound for `X <= mu + H`, in both regimes.
pub fn hoeffding_bound(x: f64, n: usize, sigma: f64, h: f64) -> Result<HoeffdingBound> {
    check_x(x)?;
    let nf = check_n(n)?;
    check_positive(sigma, "sigma")?;
    check_positive(h, "H")?;
    let a = sigma * nf.sqrt();
    let t = h * x / (2.0 * a);
    let bennett = (a * a / (h * h)) * bennett_h(t);
    let literal = (a / (h * h)) * bennett_h(t);
    let relaxed = x * x / (8.0 * (1.0 + h * x / (6.0 * a)));
    let make = |exponent: f64| -> (HoeffdingRegime, BoundValue) {
        let main = (-exponent).exp();
        if x <= a / 2.0 {
            (
                HoeffdingRegime::Moderate,
                BoundValue::single("main", 2.0 * main),
            )
        } else {
            (
                HoeffdingRegime::Large,
                BoundValue::pair(("main", main), ("normalization", (-x * a / 2.0).exp())),
            )
        }
    };
    let (regime, sharp) = make(bennett);
    Ok(HoeffdingBound {
        regime,
        sharp,
        relaxed: make(relaxed).1,
        sharp_literal: make(literal).1,
    })
}

fn check_range(r: f64) -> Result<()> {
    check_positive(r, "range R")
}

/// `psi_1(x) = x^2/(2R^2) + x^4/(36R^4)`.
pub fn rio_psi1(x: f64, r: f64) -> f64 {
    let t = x / (2.0 * r);
    let t2 = t * t;
    2.0 * t2 + 4.0 * t2 * t2 / 9.0
}

/// `psi_2(x) = (x^2/(4R^2) - x/R) ln(1 - x/(2R))`, nonnegative on `[0, 2R)`.
pub fn rio_psi2(x: f64, r: f64) -> f64 {
    let t = x / (2.0 * r);
    -t * (2.0 - t) * (-t).ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RioBound {
    /// `exp{-n max(psi_1, psi_2)} + exp{-n x / 2}`.
    pub sharp: BoundValue,
    /// `(1 - x/(2R))^((n x / R)(1 - x/(4R))) + exp{-n x / 2}`.
    pub factored: BoundValue,
}

/// Rio-type bound for `L <= X - mu <= U`, `R = U - L`, valid on `x in [0, 2R)`.
pub fn rio_bound(x: f64, n: usize, r: f64) -> Result<RioBound> {
    check_x(x)?;
    let nf = check_n(n)?;
    check_range(r)?;
    if x >= 2.0 * r {
        return Err(Error::Domain(format!(
            "Rio bound needs x < 2R = {} (got {x})",
            2.0 * r
        )));
    }
    let psi = rio_psi1(x, r).max(rio_psi2(x, r));
    let tail = (-nf * x / 2.0).exp();
    let t = x / (2.0 * r);
    let power = nf * x / r * (1.0 - x / (4.0 * r));
    Ok(RioBound {
        sharp: BoundValue::pair(("main", (-nf * psi).exp()), ("normalization", tail)),
        factored: BoundValue::pair(
            ("main", (power * (-t).ln_1p()).exp()),
            ("normalization", tail),
        ),
    })
}

/// `exp{-n x^2 / (2R^2)} + exp{-n x / 2}` for all `x >= 0`.
pub fn rio_corollary_bound(x: f64, n: usize, r: f64) -> Result<BoundValue> {
    check_x(x)?;
    let nf = check_n(n)?;
    check_range(r)?;
    Ok(BoundValue::pair(
        ("main", (-nf * x * x / (2.0 * r * r)).exp()),
        ("normalization", (-nf * x / 2.0).exp()),
    ))
}

/// `2 exp{-n x^2 / (2R^2)}` on `0 <= x <= R^2`, where the corollary's second term is the smaller.
pub fn azuma_hoeffding_bound(x: f64, n: usize, r: f64) -> Result<BoundValue> {
    check_x(x)?;
    let nf = check_n(n)?;
    check_range(r)?;
    if x > r * r {
        return Err(Error::Domain(format!(
            "Azuma-Hoeffding bound needs x <= R^2 = {} (got {x})",
            r * r
        )));
    }
    Ok(BoundValue::single(
        "azuma_hoeffding",
        2.0 * (-nf * x * x / (2.0 * r * r)).exp(),
    ))
}

/// `(1 - x)^(n x (2 - x)) <= exp{-2 n x^2}` on `[0, 1]`, compared on the log scale.
pub fn rio_remark_check(x: f64, n: usize) -> bool {
    if !(0.0..=1.0).contains(&x) || n == 0 {
        return false;
    }
    let nf = n as f64;
    let lhs = nf * x * (2.0 - x) * (-x).ln_1p();
    lhs <= -2.0 * nf * x * x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Bernstein,
    SemiExponential,
    FukNagaev,
    VonBahrEsseen,
    Hoeffding,
    Rio,
    RioCorollary,
    AzumaHoeffding,
}

impl Theorem {
    pub const ALL: [Theorem; 8] = [
        Theorem::Bernstein,
        Theorem::SemiExponential,
        Theorem::FukNagaev,
        Theorem::VonBahrEsseen,
        Theorem::Hoeffding,
        Theorem::Rio,
        Theorem::RioCorollary,
        Theorem::AzumaHoeffding,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Theorem::Bernstein => "bernstein",
            Theorem::SemiExponential => "semi_exponential",
            Theorem::FukNagaev => "fuk_nagaev",
            Theorem::VonBahrEsseen => "von_bahr_esseen",
            Theorem::Hoeffding => "hoeffding",
            Theorem::Rio => "rio",
            Theorem::RioCorollary => "rio_corollary",
            Theorem::AzumaHoeffding => "azuma_hoeffding",
        }
    }

    pub fn scale(self) -> Scale {
        match self {
            Theorem::Bernstein
            | Theorem::SemiExponential
            | Theorem::FukNagaev
            | Theorem::Hoeffding => Scale::Standardized,
            Theorem::VonBahrEsseen
            | Theorem::Rio
            | Theorem::RioCorollary
            | Theorem::AzumaHoeffding => Scale::PerGeneration,
        }
    }

    /// Whether `x` lies in the theorem's stated domain for these constants.
    pub fn admits(self, x: f64, c: &BoundConstants) -> bool {
        if !(x.is_finite() && x >= 0.0) {
            return false;
        }
        match self {
            Theorem::FukNagaev | Theorem::VonBahrEsseen => x > 0.0,
            Theorem::Rio => x < 2.0 * c.range,
            Theorem::AzumaHoeffding => x <= c.range * c.range,
            _ => true,
        }
    }

    /// Ten-point default threshold grid inside the theorem's domain.
    pub fn default_x_grid(self, c: &BoundConstants) -> Vec<f64> {
        let r = c.range;
        let fractions: &[f64] = match self {
            Theorem::Bernstein | Theorem::SemiExponential | Theorem::Hoeffding => {
                return vec![0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0];
            }
            Theorem::FukNagaev => {
                return vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0];
            }
            Theorem::VonBahrEsseen => &[0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
            Theorem::Rio => &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8],
            Theorem::RioCorollary => &[0.0, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0],
            Theorem::AzumaHoeffding => {
                return (0..10).map(|i| r * r * (i as f64 / 9.0)).collect();
            }
        };
        fractions.iter().map(|f| f * r).collect()
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown theorem id {s:?}")))
    }
}

/// Every constant the eight bounds consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub sigma: f64,
    /// Bernstein's-condition constant.
    pub bernstein_h: f64,
    /// Upper deviation constant with `X <= mu + H`.
    pub hoeffding_h: f64,
    pub alpha: f64,
    pub u: f64,
    pub fn_p: f64,
    /// `E|(X - mu)/sigma|^p` at `p = fn_p`.
    pub fn_std_abs_moment: f64,
    pub vbe_p: f64,
    /// `E|X - mu|^p` at `p = vbe_p`.
    pub vbe_abs_moment: f64,
    /// `R = U - L`.
    pub range: f64,
}

impl BoundConstants {
    /// Exact constants of `env`, with the default Bernstein constant `max|X - mu|`.
    pub fn from_env(env: &EnvironmentModel, alpha: f64, fn_p: f64, vbe_p: f64) -> Result<Self> {
        let fn_profile = moment_profile(env, alpha, fn_p, DEFAULT_K_MAX)?;
        let vbe_profile = moment_profile(env, alpha, vbe_p, DEFAULT_K_MAX)?;
        Ok(Self {
            sigma: fn_profile.sigma(),
            bernstein_h: fn_profile.bernstein_h,
            hoeffding_h: fn_profile.upper,
            alpha,
            u: fn_profile.u,
            fn_p,
            fn_std_abs_moment: fn_profile.std_abs_p_moment,
            vbe_p,
            vbe_abs_moment: vbe_profile.abs_p_moment,
            range: fn_profile.range(),
        })
    }
}

/// Evaluates `theorem` at `(x, n)`. Hoeffding and Rio report their sharp forms.
pub fn evaluate(theorem: Theorem, x: f64, n: usize, c: &BoundConstants) -> Result<BoundValue> {
    match theorem {
        Theorem::Bernstein => bernstein_bound(x, n, c.sigma, c.bernstein_h),
        Theorem::SemiExponential => semi_exp_bound(x, n, c.sigma, c.alpha, c.u),
        Theorem::FukNagaev => fuk_nagaev_bound(x, n, c.fn_p, c.fn_std_abs_moment),
        Theorem::VonBahrEsseen => von_bahr_esseen_bound(x, n, c.vbe_p, c.vbe_abs_moment),
        Theorem::Hoeffding => hoeffding_bound(x, n, c.sigma, c.hoeffding_h).map(|b| b.sharp),
        Theorem::Rio => rio_bound(x, n, c.range).map(|b| b.sharp),
        Theorem::RioCorollary => rio_corollary_bound(x, n, c.range),
        Theorem::AzumaHoeffding => azuma_hoeffding_bound(x, n, c.range),
    }
}

/// One row of a bound curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub theorem: Theorem,
    pub n: usize,
    pub x: f64,
    pub value: BoundValue,
}

pub const BOUND_CSV_HEADER: [&str; 8] = [
    "x",
    "raw_value",
    "clamped_value",
    "component_1",
    "component_2",
    "theorem_id",
    "scale",
    "n",
];

/// Evaluates `theorem` on every `(n, x)` pair.
pub fn bound_curve(
    theorem: Theorem,
    xs: &[f64],
    ns: &[usize],
    c: &BoundConstants,
) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(xs.len() * ns.len());
    for &n in ns {
        for &x in xs {
            out.push(CurvePoint {
                theorem,
                n,
                x,
                value: evaluate(theorem, x, n, c)?,
            });
        }
    }
    Ok(out)
}

/// Writes curves with [`BOUND_CSV_HEADER`]; a missing second component is left empty.
pub fn write_bound_csv<W: std::io::Write>(out: W, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUND_CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for p in points {
        w.write_record([
            p.x.to_string(),
            p.value.value().to_string(),
            p.value.clamped().to_string(),
            opt(p.value.component(0)),
            opt(p.value.component(1)),
            p.theorem.id().to_string(),
            p.theorem.scale().as_str().to_string(),
            p.n.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}
