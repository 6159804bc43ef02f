//! The planar piecewise-linear perturbation family and its polar Fourier form.
//!
//! The family perturbs the linear center `xdot = y, ydot = -x` by degree-one
//! polynomials, with two zones separated by `y = x^3`:
//!
//! ```text
//! zone y >= x^3:  xdot = y - x^3-side uses (a-block),  ydot uses (b-block)
//! zone y <= x^3:  xdot uses (alpha-block),             ydot uses (beta-block)
//! ```
//!
//! at orders eps and eps^2. In polar coordinates with theta as independent
//! variable the family reduces to `dr/dtheta = eps F1(theta,r) + eps^2
//! F2(theta,r) + O(eps^3)` with `F1`, `F2` finite Fourier series in theta
//! carrying r-powers -1, 0, +1; [`polar_first_order`] and
//! [`polar_second_order`] produce those series.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The 24 perturbation parameters.
///
/// Order-1 block `*1`, order-2 block `*2`. `a`/`b` are the x/y-component
/// coefficients of the piece active on `y >= x^3`, `alpha`/`beta` the same for
/// `y <= x^3`; within each triple the digits index `1, x, y` terms
/// (`a01 + a11 x + a21 y`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PWLCoefficients {
    pub a01: f64,
    pub a11: f64,
    pub a21: f64,
    pub b01: f64,
    pub b11: f64,
    pub b21: f64,
    pub alpha01: f64,
    pub alpha11: f64,
    pub alpha21: f64,
    pub beta01: f64,
    pub beta11: f64,
    pub beta21: f64,
    pub a02: f64,
    pub a12: f64,
    pub a22: f64,
    pub b02: f64,
    pub b12: f64,
    pub b22: f64,
    pub alpha02: f64,
    pub alpha12: f64,
    pub alpha22: f64,
    pub beta02: f64,
    pub beta12: f64,
    pub beta22: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
struct Order1Block {
    #[serde(default)]
    a01: f64,
    #[serde(default)]
    a11: f64,
    #[serde(default)]
    a21: f64,
    #[serde(default)]
    b01: f64,
    #[serde(default)]
    b11: f64,
    #[serde(default)]
    b21: f64,
    #[serde(default)]
    alpha01: f64,
    #[serde(default)]
    alpha11: f64,
    #[serde(default)]
    alpha21: f64,
    #[serde(default)]
    beta01: f64,
    #[serde(default)]
    beta11: f64,
    #[serde(default)]
    beta21: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
struct Order2Block {
    #[serde(default)]
    a02: f64,
    #[serde(default)]
    a12: f64,
    #[serde(default)]
    a22: f64,
    #[serde(default)]
    b02: f64,
    #[serde(default)]
    b12: f64,
    #[serde(default)]
    b22: f64,
    #[serde(default)]
    alpha02: f64,
    #[serde(default)]
    alpha12: f64,
    #[serde(default)]
    alpha22: f64,
    #[serde(default)]
    beta02: f64,
    #[serde(default)]
    beta12: f64,
    #[serde(default)]
    beta22: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
struct CoefficientsDoc {
    #[serde(default)]
    order1: Order1Block,
    #[serde(default)]
    order2: Order2Block,
}

impl Serialize for PWLCoefficients {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CoefficientsDoc {
            order1: Order1Block {
                a01: self.a01,
                a11: self.a11,
                a21: self.a21,
                b01: self.b01,
                b11: self.b11,
                b21: self.b21,
                alpha01: self.alpha01,
                alpha11: self.alpha11,
                alpha21: self.alpha21,
                beta01: self.beta01,
                beta11: self.beta11,
                beta21: self.beta21,
            },
            order2: Order2Block {
                a02: self.a02,
                a12: self.a12,
                a22: self.a22,
                b02: self.b02,
                b12: self.b12,
                b22: self.b22,
                alpha02: self.alpha02,
                alpha12: self.alpha12,
                alpha22: self.alpha22,
                beta02: self.beta02,
                beta12: self.beta12,
                beta22: self.beta22,
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PWLCoefficients {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = CoefficientsDoc::deserialize(d)?;
        let (o1, o2) = (doc.order1, doc.order2);
        let c = PWLCoefficients {
            a01: o1.a01,
            a11: o1.a11,
            a21: o1.a21,
            b01: o1.b01,
            b11: o1.b11,
            b21: o1.b21,
            alpha01: o1.alpha01,
            alpha11: o1.alpha11,
            alpha21: o1.alpha21,
            beta01: o1.beta01,
            beta11: o1.beta11,
            beta21: o1.beta21,
            a02: o2.a02,
            a12: o2.a12,
            a22: o2.a22,
            b02: o2.b02,
            b12: o2.b12,
            b22: o2.b22,
            alpha02: o2.alpha02,
            alpha12: o2.alpha12,
            alpha22: o2.alpha22,
            beta02: o2.beta02,
            beta12: o2.beta12,
            beta22: o2.beta22,
        };
        if !c.is_finite() {
            return Err(serde::de::Error::custom("coefficients must be finite"));
        }
        Ok(c)
    }
}

impl PWLCoefficients {
    pub fn is_finite(&self) -> bool {
        [
            self.a01,
            self.a11,
            self.a21,
            self.b01,
            self.b11,
            self.b21,
            self.alpha01,
            self.alpha11,
            self.alpha21,
            self.beta01,
            self.beta11,
            self.beta21,
            self.a02,
            self.a12,
            self.a22,
            self.b02,
            self.b12,
            self.b22,
            self.alpha02,
            self.alpha12,
            self.alpha22,
            self.beta02,
            self.beta12,
            self.beta22,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("coefficient JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coefficient serialization cannot fail")
    }
}

/// Canonical evaluation of `a11 + b21 + alpha11 + beta21`.
///
/// `apply_vanishing_delta1` stores `a11 = -(((b21 + alpha11) + beta21))`; by
/// re-using the same grouping here, the sum is bit-exactly zero for
/// coefficients produced by that map.
#[inline]
pub(crate) fn trace_sum(c: &PWLCoefficients) -> f64 {
    ((c.b21 + c.alpha11) + c.beta21) + c.a11
}

/// Whether the vanishing-Delta1 conditions hold exactly (at f64 granularity):
/// `a11 = -(b21 + alpha11 + beta21)`, `b01 = beta01`, `a01 = alpha01`.
pub fn satisfies_vanishing_delta1(c: &PWLCoefficients) -> bool {
    trace_sum(c) == 0.0 && c.b01 - c.beta01 == 0.0 && c.a01 - c.alpha01 == 0.0
}

/// Returns a copy satisfying the vanishing-Delta1 conditions:
/// `a11 := -(b21 + alpha11 + beta21)`, `b01 := beta01`, `a01 := alpha01`.
/// All other fields unchanged. The output is a fixed point of this map and
/// `gamma_coeffs` returns exactly (0, 0, 0) on it.
pub fn apply_vanishing_delta1(c: &PWLCoefficients) -> PWLCoefficients {
    let mut out = *c;
    out.a11 = -((c.b21 + c.alpha11) + c.beta21);
    out.b01 = c.beta01;
    out.a01 = c.alpha01;
    out
}

/// One term `r^p (c cos(h theta) + s sin(h theta))` of a [`TrigPolySeries`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub r_power: i32,
    pub harmonic: u32,
    pub cos_coeff: f64,
    pub sin_coeff: f64,
}

/// Finite Fourier series in theta with integer r-power weights:
/// `sum_k r^{p_k} (c_k cos(h_k theta) + s_k sin(h_k theta))`.
///
/// No two terms share the same `(r_power, harmonic)` key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrigPolySeries {
    terms: Vec<TrigTerm>,
}

impl TrigPolySeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `r^p (c cos(h theta) + s sin(h theta))`, merging with an existing
    /// `(p, h)` term if present. Zero terms are dropped.
    pub fn push(&mut self, r_power: i32, harmonic: u32, cos_coeff: f64, sin_coeff: f64) {
        if let Some(t) = self
            .terms
            .iter_mut()
            .find(|t| t.r_power == r_power && t.harmonic == harmonic)
        {
            t.cos_coeff += cos_coeff;
            t.sin_coeff += sin_coeff;
        } else {
            self.terms.push(TrigTerm {
                r_power,
                harmonic,
                cos_coeff,
                sin_coeff,
            });
        }
        self.terms
            .retain(|t| t.cos_coeff != 0.0 || t.sin_coeff != 0.0);
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True if some term carries a negative r-power.
    pub fn has_singular_r_power(&self) -> bool {
        self.terms.iter().any(|t| t.r_power < 0)
    }

    /// Value at `(theta, r)`. See [`evaluate_series`] for the checked variant.
    pub fn eval(&self, theta: f64, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let ang = t.harmonic as f64 * theta;
                r.powi(t.r_power) * (t.cos_coeff * ang.cos() + t.sin_coeff * ang.sin())
            })
            .sum()
    }

    /// Termwise derivative with respect to r.
    pub fn d_dr(&self) -> TrigPolySeries {
        let mut out = TrigPolySeries::new();
        for t in &self.terms {
            if t.r_power != 0 {
                let k = t.r_power as f64;
                out.push(
                    t.r_power - 1,
                    t.harmonic,
                    k * t.cos_coeff,
                    k * t.sin_coeff,
                );
            }
        }
        out
    }

    /// Closed-form integral over theta in `[theta_a, theta_b]` at fixed r.
    pub fn integrate_theta(&self, theta_a: f64, theta_b: f64, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let w = r.powi(t.r_power);
                if t.harmonic == 0 {
                    w * t.cos_coeff * (theta_b - theta_a)
                } else {
                    let h = t.harmonic as f64;
                    let anti = |th: f64| {
                        (t.cos_coeff * (h * th).sin() - t.sin_coeff * (h * th).cos()) / h
                    };
                    w * (anti(theta_b) - anti(theta_a))
                }
            })
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> TrigPolySeries {
        let mut out = TrigPolySeries::new();
        for t in &self.terms {
            out.push(
                t.r_power,
                t.harmonic,
                factor * t.cos_coeff,
                factor * t.sin_coeff,
            );
        }
        out
    }

    pub fn plus(&self, other: &TrigPolySeries) -> TrigPolySeries {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(t.r_power, t.harmonic, t.cos_coeff, t.sin_coeff);
        }
        out
    }
}

/// Checked evaluation: `DomainError` when a `1/r` term is present and r <= 0.
pub fn evaluate_series(s: &TrigPolySeries, theta: f64, r: f64) -> Result<f64> {
    if r <= 0.0 && s.has_singular_r_power() {
        return Err(Error::Domain(format!(
            "series with 1/r term evaluated at r = {r}"
        )));
    }
    Ok(s.eval(theta, r))
}

/// First-order polar right-hand sides `(F1_plus, F1_minus)`:
///
/// `F1+ = -(a01 cos + b01 sin) - (r/2)(a11 + b21)
///        - (r/2)[(a11 - b21) cos 2theta + (a21 + b11) sin 2theta]`
///
/// and the same with (alpha, beta) for `F1-`. Uses the order-1 block only.
pub fn polar_first_order(c: &PWLCoefficients) -> (TrigPolySeries, TrigPolySeries) {
    let build = |p0: f64, p1: f64, p2: f64, q0: f64, q1: f64, q2: f64| {
        // (p0,p1,p2) = x-component coefficients of the piece, (q0,q1,q2) = y-component
        let mut s = TrigPolySeries::new();
        s.push(0, 1, -p0, -q0);
        s.push(1, 0, -0.5 * (p1 + q2), 0.0);
        s.push(1, 2, -0.5 * (p1 - q2), -0.5 * (p2 + q1));
        s
    };
    let plus = build(c.a01, c.a11, c.a21, c.b01, c.b11, c.b21);
    let minus = build(
        c.alpha01, c.alpha11, c.alpha21, c.beta01, c.beta11, c.beta21,
    );
    (plus, minus)
}

/// Second-order polar right-hand sides `(F2_plus, F2_minus)`, assembled from
/// the 26 Fourier constants of the vanishing-Delta1 reduction (r-powers -1, 0,
/// +1; harmonics up to 4).
///
/// The constants are only valid after substituting the vanishing-Delta1
/// conditions, so coefficients violating them are refused.
pub fn polar_second_order(c: &PWLCoefficients) -> Result<(TrigPolySeries, TrigPolySeries)> {
    if !satisfies_vanishing_delta1(c) {
        let g = crate::melnikov::gamma_coeffs(c);
        return Err(Error::ConditionViolation((g.gamma0, g.gamma1, g.gamma2)));
    }
    let (al01, al11, al21) = (c.alpha01, c.alpha11, c.alpha21);
    let (be01, be11, be21) = (c.beta01, c.beta11, c.beta21);
    let (a21, b11, b21) = (c.a21, c.b11, c.b21);

    let mut plus = TrigPolySeries::new();
    // 1/r block
    let c202p = -al01 * be01;
    let s202p = 0.5 * (al01 * al01 - be01 * be01);
    plus.push(-1, 2, c202p, s202p);
    // r^0 block
    let c211p = 0.5 * (-2.0 * c.a02 + a21 * al01 - b11 * al01 + al11 * be01 + be01 * be21);
    let s211p = 0.5 * (a21 * be01 - 2.0 * c.b02 - b11 * be01 - al01 * al11 - al01 * be21);
    let c213p = 0.5 * (-a21 * al01 - b11 * al01 + 2.0 * b21 * be01 + al11 * be01 + be01 * be21);
    let s213p = 0.5 * (-a21 * be01 - b11 * be01 - 2.0 * b21 * al01 - al01 * al11 - al01 * be21);
    plus.push(0, 1, c211p, s211p);
    plus.push(0, 3, c213p, s213p);
    // r block
    let c220p =
        0.25 * (-2.0 * c.a12 - a21 * al11 - a21 * be21 + b11 * al11 + b11 * be21 - 2.0 * c.b22);
    let c222p = 0.5 * (-c.a12 - a21 * b21 + b11 * b21 + b11 * al11 + b11 * be21 + c.b22);
    let s222p = 0.25
        * (a21 * a21 - 2.0 * c.a22 - b11 * b11 - 2.0 * c.b12
            + 2.0 * b21 * al11
            + 2.0 * b21 * be21
            + (al11 + be21) * (al11 + be21));
    let c224p = 0.25 * (a21 + b11) * (2.0 * b21 + al11 + be21);
    let s224p = 0.125
        * (-a21 * a21 - 2.0 * a21 * b11 - b11 * b11
            + (2.0 * b21 + al11 + be21) * (2.0 * b21 + al11 + be21));
    plus.push(1, 0, c220p, 0.0);
    plus.push(1, 2, c222p, s222p);
    plus.push(1, 4, c224p, s224p);

    let mut minus = TrigPolySeries::new();
    let c202m = -al01 * be01;
    let s202m = 0.5 * (al01 * al01 - be01 * be01);
    minus.push(-1, 2, c202m, s202m);
    let c211m = 0.5 * (al01 * al21 - al01 * be11 - 2.0 * c.alpha02 - al11 * be01 - be01 * be21);
    let s211m = 0.5 * (al01 * (al11 + be21) + al21 * be01 - be01 * be11 - 2.0 * c.beta02);
    let c213m = 0.5 * (be01 * (be21 - al11) - al01 * (al21 + be11));
    let s213m = 0.5 * (al01 * (al11 - be21) - be01 * (al21 + be11));
    minus.push(0, 1, c211m, s211m);
    minus.push(0, 3, c213m, s213m);
    let c220m = 0.25
        * (al11 * al21 - al11 * be11 - 2.0 * c.alpha12 + al21 * be21
            - be11 * be21
            - 2.0 * c.beta22);
    let c222m = 0.5 * (-al11 * be11 - c.alpha12 - al21 * be21 + c.beta22);
    let s222m = 0.25
        * (al11 * al11 + al21 * al21
            - 2.0 * c.alpha22
            - be11 * be11
            - 2.0 * c.beta12
            - be21 * be21);
    let c224m = -0.25 * (al11 - be21) * (al21 + be11);
    let s224m = 0.125
        * (al11 * al11 - 2.0 * al11 * be21 - al21 * al21 - 2.0 * al21 * be11 - be11 * be11
            + be21 * be21);
    minus.push(1, 0, c220m, 0.0);
    minus.push(1, 2, c222m, s222m);
    minus.push(1, 4, c224m, s224m);

    Ok((plus, minus))
}
