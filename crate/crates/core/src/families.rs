//! Built-in coefficient families.
//!
//! Drift-parameter functions that recur throughout the test fixtures and the
//! CLI registry: constants, `1 ± (T-t)^β`, the hyperbolic-cotangent family
//! tied to stationary mean reversion, and the rational drift `1/(t + c)`.

use crate::coeffs::CoefficientFn;
use crate::scalar::Scalar;

/// α(t) = 1 + sign · (T-t)^β on `[0, T)`, `β > 0`.
pub fn alpha_poly<S: Scalar>(sign: S, beta: S, horizon: S) -> CoefficientFn<S> {
    let tag = if sign >= S::zero() { "poly1p" } else { "poly1m" };
    let s = if sign >= S::zero() { S::one() } else { -S::one() };
    let eval = move |t: S| S::one() + s * (horizon - t).powf(beta);
    let deriv = move |t: S| -s * beta * (horizon - t).powf(beta - S::one());
    // ∫_a^b [1 + s (T-u)^β] du = (b-a) + s ((T-a)^{β+1} - (T-b)^{β+1})/(β+1)
    let prim = move |a: S, b: S| {
        (b - a)
            + s * ((horizon - a).powf(beta + S::one()) - (horizon - b).powf(beta + S::one()))
                / (beta + S::one())
    };
    CoefficientFn::new(eval)
        .with_deriv(deriv)
        .with_primitive(prim)
        .with_end_defect(move |h: S, rem: S| s * ((horizon - h) + rem).powf(beta))
        .with_domain_end(horizon)
        .with_label(format!("{tag}:{beta}"))
}

/// α(t) = q₀ (T-t) coth(q₀ (T-t)) on `[0, T)`, `q₀ ≠ 0`.
///
/// This is the drift shape for which conditioning a stationary-rate OU
/// process reproduces the bridge exactly; α(t) → 1 as t ↑ T.
pub fn alpha_coth<S: Scalar>(q0: S, horizon: S) -> CoefficientFn<S> {
    let eval = move |t: S| {
        let x = q0 * (horizon - t);
        x_coth(x)
    };
    // dα/dt = -q₀ (coth x - x/sinh²x), x = q₀(T-t).
    let deriv = move |t: S| {
        let x = q0 * (horizon - t);
        -q0 * coth_minus_x_csch2(x)
    };
    CoefficientFn::new(eval)
        .with_deriv(deriv)
        .with_end_defect(move |h: S, rem: S| x_coth_minus_one(q0 * ((horizon - h) + rem)))
        .with_domain_end(horizon)
        .with_label(format!("coth:{q0}"))
}

/// x coth(x), continuously extended by 1 at x = 0.
fn x_coth<S: Scalar>(x: S) -> S {
    if x == S::zero() {
        return S::one();
    }
    x / x.tanh()
}

/// x coth(x) - 1 without cancellation: series x²/3 - x⁴/45 + 2x⁶/945 for
/// small |x|, direct otherwise.
fn x_coth_minus_one<S: Scalar>(x: S) -> S {
    if x.abs() < S::of(0.05) {
        let x2 = x * x;
        return x2 / S::of(3.0) - x2 * x2 / S::of(45.0)
            + x2 * x2 * x2 * S::of(2.0) / S::of(945.0);
    }
    x / x.tanh() - S::one()
}

/// coth(x) - x/sinh²(x); both terms blow up like 1/x near zero, so a series
/// takes over for small |x|: 2x/3 - 4x³/45 + 4x⁵/315 + O(x⁷).
fn coth_minus_x_csch2<S: Scalar>(x: S) -> S {
    if x.abs() < S::of(0.05) {
        let x2 = x * x;
        return x
            * (S::of(2.0) / S::of(3.0) - x2 * S::of(4.0) / S::of(45.0)
                + x2 * x2 * S::of(4.0) / S::of(315.0));
    }
    let sh = x.sinh();
    S::one() / x.tanh() - x / (sh * sh)
}

/// q(t) = 1/(t + c) with c outside `[-T, 0]`: the drift family whose 0→0
/// bridge over `[0, T]` is the classical Wiener bridge.
pub fn q_recip<S: Scalar>(c: S) -> CoefficientFn<S> {
    let eval = move |t: S| S::one() / (t + c);
    let deriv = move |t: S| -S::one() / ((t + c) * (t + c));
    // ∫_a^b du/(u+c) = ln|(b+c)/(a+c)|; the domain never crosses -c.
    let prim = move |a: S, b: S| ((b + c) / (a + c)).abs().ln();
    let end = if c > S::zero() { S::infinity() } else { -c };
    CoefficientFn::new(eval)
        .with_deriv(deriv)
        .with_primitive(prim)
        .with_domain_end(end)
        .with_label(format!("recip:{c}"))
}
