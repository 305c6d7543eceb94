//! Closed-form Gaussian laws of OU-type processes and their bridges.
//!
//! For the linear process dZ_t = q(t) Z_t dt + σ(t) dB_t the transition of
//! Z_t given Z_s = x is Gaussian with mean e^{q̄(t)-q̄(s)} x and variance
//!
//!   γ(s,t) = ∫_s^t e^{2(q̄(t)-q̄(u))} σ²(u) du,    q̄(t) = ∫_0^t q(u) du.
//!
//! Conditioning Z to hit `b` at the horizon gives a Gauss–Markov bridge with
//! transition mean
//!
//!   n_{x,b}(s,t) = (γ(s,t)/γ(s,T)) e^{q̄(T)-q̄(t)} b
//!                + (γ(t,T)/γ(s,T)) e^{q̄(t)-q̄(s)} x
//!
//! and variance σ(s,t) = γ(s,t) γ(t,T) / γ(s,T). Both the Gaussian form and
//! the raw three-density ratio that defines the bridge are exposed so the
//! identity between them can be tested rather than assumed.

use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::alpha_law::AlphaBridgeLaw;
use crate::coeffs::CoefficientFn;
use crate::error::{Error, Result};
use crate::quad::{CumulativeIntegral, EVAL_BUDGET};
use crate::scalar::Scalar;

/// A one-dimensional Gaussian with nonnegative variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct GaussLaw<S> {
    pub mean: S,
    pub variance: S,
}

impl<S: Scalar> GaussLaw<S> {
    pub fn new(mean: S, variance: S) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < S::zero() {
            return Err(Error::InvalidSpec(format!(
                "Gauss law needs finite mean and variance >= 0, got ({mean}, {variance})"
            )));
        }
        Ok(GaussLaw { mean, variance })
    }

    pub fn sd(&self) -> S {
        self.variance.sqrt()
    }

    pub fn log_pdf(&self, y: S) -> S {
        let two_pi = S::of(std::f64::consts::TAU);
        let d = y - self.mean;
        -S::of(0.5) * ((two_pi * self.variance).ln() + d * d / self.variance)
    }

    pub fn pdf(&self, y: S) -> S {
        self.log_pdf(y).exp()
    }

    /// Map a standard normal draw to a sample of this law.
    pub fn from_standard_normal(&self, z: S) -> S {
        self.mean + self.sd() * z
    }
}

type CacheSlot<S> = OnceLock<Result<Arc<CumulativeIntegral<S>>>>;

struct OuInner<S> {
    q: CoefficientFn<S>,
    sigma: CoefficientFn<S>,
    horizon: S,
    /// q̄ tabulation, built only when `q` carries no closed-form primitive.
    qbar_cache: CacheSlot<S>,
    /// J(u) = ∫_0^u e^{-2 q̄(w)} σ²(w) dw, so γ(s,t) = e^{2 q̄(t)} (J(t)-J(s)).
    weight_cache: CacheSlot<S>,
}

/// An OU-type process dZ = q(t) Z dt + σ(t) dB on `[0, T]` with σ(t) ≠ 0.
///
/// Cloning shares the internal quadrature caches.
#[derive(Clone)]
pub struct OuSpec<S> {
    inner: Arc<OuInner<S>>,
}

impl<S: std::fmt::Debug> std::fmt::Debug for OuSpec<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OuSpec")
            .field("q", &self.inner.q)
            .field("sigma", &self.inner.sigma)
            .field("horizon", &self.inner.horizon)
            .finish()
    }
}

impl<S: Scalar> OuSpec<S> {
    pub fn new(q: CoefficientFn<S>, sigma: CoefficientFn<S>, horizon: S) -> Result<Self> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if q.domain_end() <= horizon || sigma.domain_end() <= horizon {
            return Err(Error::InvalidSpec(
                "q and sigma must be defined on all of [0, T]".into(),
            ));
        }
        // σ(t) ≠ 0 on [0, T], checked on a dense grid. A sign change would
        // force a zero by continuity, so mixed signs are rejected too.
        let n = 512;
        let s0 = sigma.eval(S::zero());
        for i in 0..=n {
            let t = horizon * S::from_usize(i).unwrap() / S::from_usize(n).unwrap();
            let v = sigma.eval(t);
            if !v.is_finite() || v == S::zero() || (v > S::zero()) != (s0 > S::zero()) {
                return Err(Error::InvalidSpec(format!(
                    "sigma must be nonzero of constant sign on [0, T]; sigma({t}) = {v}"
                )));
            }
        }
        Ok(OuSpec {
            inner: Arc::new(OuInner {
                q,
                sigma,
                horizon,
                qbar_cache: OnceLock::new(),
                weight_cache: OnceLock::new(),
            }),
        })
    }

    pub fn q(&self) -> &CoefficientFn<S> {
        &self.inner.q
    }

    pub fn sigma(&self) -> &CoefficientFn<S> {
        &self.inner.sigma
    }

    pub fn horizon(&self) -> S {
        self.inner.horizon
    }

    fn cache_tol() -> S {
        S::epsilon() * S::of(50.0)
    }

    fn qbar_table(&self) -> Result<Arc<CumulativeIntegral<S>>> {
        self.inner
            .qbar_cache
            .get_or_init(|| {
                let q = self.inner.q.clone();
                CumulativeIntegral::build(
                    Arc::new(move |u: S| q.eval(u)),
                    S::zero(),
                    self.inner.horizon,
                    Self::cache_tol(),
                    EVAL_BUDGET,
                )
                .map(Arc::new)
            })
            .clone()
    }

    /// q̄(t) - q̄(s).
    pub fn qbar_between(&self, s: S, t: S) -> Result<S> {
        if let Some(v) = self.inner.q.primitive_between(s, t) {
            return Ok(v);
        }
        self.qbar_table()?.eval_between(s, t)
    }

    fn weight_table(&self) -> Result<Arc<CumulativeIntegral<S>>> {
        self.inner
            .weight_cache
            .get_or_init(|| {
                let me = self.clone();
                CumulativeIntegral::build(
                    Arc::new(move |u: S| {
                        let sig = me.inner.sigma.eval(u);
                        match me.qbar_between(S::zero(), u) {
                            Ok(qb) => (-(qb + qb)).exp() * sig * sig,
                            Err(_) => S::nan(),
                        }
                    }),
                    S::zero(),
                    self.inner.horizon,
                    Self::cache_tol(),
                    EVAL_BUDGET,
                )
                .map(Arc::new)
            })
            .clone()
    }

    /// γ(s,t), the conditional variance of Z_t given Z_s.
    pub fn gamma(&self, s: S, t: S) -> Result<S> {
        let horizon = self.inner.horizon;
        if !(S::zero() <= s && s <= t && t <= horizon) {
            return Err(Error::InvalidSpec(format!(
                "gamma: need 0 <= s <= t <= T, got s={s}, t={t}"
            )));
        }
        if s == t {
            return Ok(S::zero());
        }
        let j = self.weight_table()?.eval_between(s, t)?;
        let qb = self.qbar_between(S::zero(), t)?;
        Ok((qb + qb).exp() * j)
    }

    /// Transition law of Z_t given Z_s = x.
    pub fn transition(&self, s: S, t: S, x: S) -> Result<GaussLaw<S>> {
        if s == t {
            return Err(Error::DegenerateTransition {
                at: s.to_f64_lossy(),
            });
        }
        let mean = self.qbar_between(s, t)?.exp() * x;
        let var = self.gamma(s, t)?;
        GaussLaw::new(mean, var)
    }

    /// Bridge conditional mean n_{a,b}(s,t).
    pub fn bridge_mean(&self, a: S, b: S, s: S, t: S) -> Result<S> {
        let horizon = self.inner.horizon;
        if !(S::zero() <= s && s <= t && t < horizon) {
            return Err(Error::InvalidSpec(format!(
                "bridge_mean: need 0 <= s <= t < T, got s={s}, t={t}"
            )));
        }
        if s == t {
            return Ok(a);
        }
        let g_st = self.gamma(s, t)?;
        let g_s_end = self.gamma(s, horizon)?;
        let g_t_end = self.gamma(t, horizon)?;
        let b_coef = (g_st / g_s_end) * self.qbar_between(t, horizon)?.exp();
        let a_coef = (g_t_end / g_s_end) * self.qbar_between(s, t)?.exp();
        Ok(b_coef * b + a_coef * a)
    }

    /// Coefficient of the start value in n_{x,b}(s,t); the lag-covariance
    /// slope of the bridge.
    pub fn bridge_slope(&self, s: S, t: S) -> Result<S> {
        let horizon = self.inner.horizon;
        let g_s_end = self.gamma(s, horizon)?;
        let g_t_end = self.gamma(t, horizon)?;
        Ok((g_t_end / g_s_end) * self.qbar_between(s, t)?.exp())
    }

    /// Bridge conditional variance σ(s,t) = γ(s,t) γ(t,T) / γ(s,T).
    pub fn bridge_variance(&self, s: S, t: S) -> Result<S> {
        let horizon = self.inner.horizon;
        if !(S::zero() <= s && s <= t && t < horizon) {
            return Err(Error::InvalidSpec(format!(
                "bridge_variance: need 0 <= s <= t < T, got s={s}, t={t}"
            )));
        }
        if s == t {
            return Ok(S::zero());
        }
        let g_st = self.gamma(s, t)?;
        let g_t_end = self.gamma(t, horizon)?;
        let g_s_end = self.gamma(s, horizon)?;
        Ok(g_st * g_t_end / g_s_end)
    }

    /// Gaussian transition law of the bridge pinned to `b` at the horizon.
    pub fn bridge_transition(&self, b: S, s: S, t: S, x: S) -> Result<GaussLaw<S>> {
        if s == t {
            return Err(Error::DegenerateTransition {
                at: s.to_f64_lossy(),
            });
        }
        let mean = self.bridge_mean(x, b, s, t)?;
        let var = self.bridge_variance(s, t)?;
        GaussLaw::new(mean, var)
    }

    /// Log of the defining density ratio
    /// p_{s,t}(x,y) p_{t,T}(y,b) / p_{s,T}(x,b), computed from the raw
    /// transition densities. Equals `bridge_transition(..).log_pdf(y)` up to
    /// quadrature error.
    pub fn bridge_transition_log_ratio(&self, b: S, s: S, t: S, x: S, y: S) -> Result<S> {
        let horizon = self.inner.horizon;
        if !(S::zero() <= s && s < t && t < horizon) {
            return Err(Error::InvalidSpec(format!(
                "log-ratio needs 0 <= s < t < T, got s={s}, t={t}"
            )));
        }
        let first = self.transition(s, t, x)?.log_pdf(y);
        let second = self.transition(t, horizon, y)?.log_pdf(b);
        let third = self.transition(s, horizon, x)?.log_pdf(b);
        Ok(first + second - third)
    }
}

/// A general α-Wiener bridge: dX = -(α(t)/(T-t)) X dt + dB, X_0 = 0.
#[derive(Clone, Debug)]
pub struct AlphaBridge<S> {
    alpha: CoefficientFn<S>,
    horizon: S,
}

impl<S: Scalar> AlphaBridge<S> {
    pub fn new(alpha: CoefficientFn<S>, horizon: S) -> Result<Self> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if alpha.domain_end() < horizon {
            return Err(Error::InvalidSpec(
                "alpha must be defined on all of [0, T)".into(),
            ));
        }
        Ok(AlphaBridge { alpha, horizon })
    }

    pub fn alpha(&self) -> &CoefficientFn<S> {
        &self.alpha
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }
}

/// An OU-type bridge from `a` to `b` over `[0, T]` derived from `ou`.
#[derive(Clone, Debug)]
pub struct OuBridge<S> {
    pub ou: OuSpec<S>,
    pub a: S,
    pub b: S,
}

impl<S: Scalar> OuBridge<S> {
    pub fn new(ou: OuSpec<S>, a: S, b: S) -> Self {
        OuBridge { ou, a, b }
    }
}

/// The object whose law everything is computed about.
#[derive(Clone, Debug)]
pub enum BridgeSpec<S> {
    Alpha(AlphaBridge<S>),
    Ou(OuBridge<S>),
}

impl<S: Scalar> BridgeSpec<S> {
    pub fn horizon(&self) -> S {
        match self {
            BridgeSpec::Alpha(a) => a.horizon(),
            BridgeSpec::Ou(o) => o.ou.horizon(),
        }
    }

    pub fn initial_value(&self) -> S {
        match self {
            BridgeSpec::Alpha(_) => S::zero(),
            BridgeSpec::Ou(o) => o.a,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BridgeSpec::Alpha(a) => format!(
                "alpha-bridge|alpha={}|T={:?}",
                a.alpha().label(),
                a.horizon().to_f64_lossy()
            ),
            BridgeSpec::Ou(o) => format!(
                "ou-bridge|q={}|sigma={}|T={:?}|a={:?}|b={:?}",
                o.ou.q().label(),
                o.ou.sigma().label(),
                o.ou.horizon().to_f64_lossy(),
                o.a.to_f64_lossy(),
                o.b.to_f64_lossy()
            ),
        }
    }

    /// FNV-1a content hash of the structural description, hex-encoded.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for byte in self.describe().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// Unified first- and second-moment view of a bridge law; what the
/// equivalence harness and the moments command consume.
pub enum BridgeLaw<S> {
    Alpha(AlphaBridgeLaw<S>),
    Ou(OuBridge<S>),
}

impl<S: Scalar> BridgeLaw<S> {
    pub fn new(spec: &BridgeSpec<S>) -> Result<Self> {
        match spec {
            BridgeSpec::Alpha(a) => Ok(BridgeLaw::Alpha(AlphaBridgeLaw::new(a.clone())?)),
            BridgeSpec::Ou(o) => Ok(BridgeLaw::Ou(o.clone())),
        }
    }

    pub fn mean(&self, t: S) -> Result<S> {
        match self {
            BridgeLaw::Alpha(_) => Ok(S::zero()),
            BridgeLaw::Ou(o) => {
                if t == S::zero() {
                    Ok(o.a)
                } else {
                    o.ou.bridge_mean(o.a, o.b, S::zero(), t)
                }
            }
        }
    }

    pub fn variance(&self, t: S) -> Result<S> {
        match self {
            BridgeLaw::Alpha(law) => law.variance(t),
            BridgeLaw::Ou(o) => o.ou.bridge_variance(S::zero(), t),
        }
    }

    /// Cov at a pair of times (order-insensitive).
    pub fn covariance(&self, s: S, t: S) -> Result<S> {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        match self {
            BridgeLaw::Alpha(law) => law.covariance(s, t),
            BridgeLaw::Ou(o) => {
                if s == t {
                    return o.ou.bridge_variance(S::zero(), t);
                }
                let var_s = o.ou.bridge_variance(S::zero(), s)?;
                Ok(o.ou.bridge_slope(s, t)? * var_s)
            }
        }
    }
}

/// Limit behaviour of an α-bridge at its horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EndpointRegime {
    /// lim α > 0: the path extension hits 0 at T with probability one.
    ConvergesToZero,
    /// lim α < 0: the second moment blows up at T.
    SecondMomentDiverges,
    /// α ≡ 0: plain Wiener process, nondegenerate Gaussian value at T.
    NondegenerateLimit,
    /// Anything else; in particular lim α = 0 with α ≢ 0 admits several
    /// behaviours and is deliberately not classified.
    Unknown,
}

pub(crate) struct AlphaLimitProbe<S> {
    pub values: Vec<S>,
    pub stable: bool,
    pub last: S,
}

/// Evaluate α at t_k = T(1 - 2^{-k}), k = 1..40, and ask whether the tail
/// settled (last five within 1e-6 of each other).
pub(crate) fn probe_alpha_limit<S: Scalar>(
    alpha: &CoefficientFn<S>,
    horizon: S,
) -> AlphaLimitProbe<S> {
    let values: Vec<S> = (1..=40)
        .map(|k| alpha.eval(horizon * (S::one() - S::of(2f64.powi(-k)))))
        .collect();
    let tail = &values[values.len() - 5..];
    let mut lo = tail[0];
    let mut hi = tail[0];
    for &v in tail {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let stable = tail.iter().all(|v| v.is_finite()) && hi - lo <= S::of(1e-6);
    AlphaLimitProbe {
        last: *values.last().unwrap(),
        values,
        stable,
    }
}

/// Numerical classification of the endpoint regime. Reports `Unknown`
/// rather than guessing whenever the probes do not justify a verdict.
pub fn endpoint_regime<S: Scalar>(spec: &AlphaBridge<S>) -> EndpointRegime {
    let horizon = spec.horizon();
    let probe = probe_alpha_limit(spec.alpha(), horizon);
    if !probe.stable {
        return EndpointRegime::Unknown;
    }
    let limit = probe.last;
    if limit > S::of(1e-6) {
        return EndpointRegime::ConvergesToZero;
    }
    if limit < S::of(-1e-6) {
        return EndpointRegime::SecondMomentDiverges;
    }
    // Limit is zero within tolerance: only the identically-zero function
    // earns the nondegenerate-limit verdict.
    let n = 256;
    let cap = horizon * (S::one() - S::of(2f64.powi(-40)));
    let bulk_zero = (0..=n).all(|i| {
        let t = cap * S::from_usize(i).unwrap() / S::from_usize(n).unwrap();
        spec.alpha().eval(t).abs() <= S::of(1e-9)
    });
    let probes_zero = probe.values.iter().all(|v| v.abs() <= S::of(1e-9));
    if bulk_zero && probes_zero {
        EndpointRegime::NondegenerateLimit
    } else {
        EndpointRegime::Unknown
    }
}

// Free-function forms of the operations above.

pub fn gamma<S: Scalar>(ou: &OuSpec<S>, s: S, t: S) -> Result<S> {
    ou.gamma(s, t)
}

pub fn ou_transition<S: Scalar>(ou: &OuSpec<S>, s: S, t: S, x: S) -> Result<GaussLaw<S>> {
    ou.transition(s, t, x)
}

pub fn bridge_mean<S: Scalar>(ou: &OuSpec<S>, a: S, b: S, s: S, t: S) -> Result<S> {
    ou.bridge_mean(a, b, s, t)
}

pub fn bridge_variance<S: Scalar>(ou: &OuSpec<S>, s: S, t: S) -> Result<S> {
    ou.bridge_variance(s, t)
}

pub fn bridge_transition_density<S: Scalar>(
    ou: &OuSpec<S>,
    b: S,
    s: S,
    t: S,
    x: S,
    y: S,
) -> Result<S> {
    Ok(ou.bridge_transition(b, s, t, x)?.pdf(y))
}

/// (propagator φ(s,t), mean, Var X_t, Cov(X_s, X_t)) of an α-bridge.
pub fn alpha_bridge_moments<S: Scalar>(
    spec: &AlphaBridge<S>,
    s: S,
    t: S,
) -> Result<(S, S, S, S)> {
    let law = AlphaBridgeLaw::new(spec.clone())?;
    Ok((
        law.propagator(s, t)?,
        S::zero(),
        law.variance(t)?,
        law.covariance(s, t)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;

    fn const_ou(q0: f64, sigma0: f64, horizon: f64) -> OuSpec<f64> {
        OuSpec::new(
            CoefficientFn::constant(q0),
            CoefficientFn::constant(sigma0),
            horizon,
        )
        .unwrap()
    }

    /// Closed-form γ for constant coefficients, via expm1 so q₀ → 0 is safe.
    fn gamma_const_oracle(q0: f64, sigma0: f64, s: f64, t: f64) -> f64 {
        if q0 == 0.0 {
            return sigma0 * sigma0 * (t - s);
        }
        sigma0 * sigma0 * (2.0 * q0 * (t - s)).exp_m1() / (2.0 * q0)
    }

    #[test]
    fn gamma_standard_wiener() {
        let ou = const_ou(0.0, 1.0, 1.0);
        assert!((ou.gamma(0.25, 0.75).unwrap() - 0.5).abs() < 1e-13);
        assert_eq!(ou.gamma(0.3, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn gamma_constant_coefficients_matches_closed_form() {
        for &(q0, s0) in &[(1.0, 1.0), (-0.7, 2.0), (2.5, 0.3), (1e-9, 1.0)] {
            let ou = const_ou(q0, s0, 1.0);
            for &(s, t) in &[(0.0, 1.0), (0.2, 0.9), (0.5, 0.500001)] {
                let got = ou.gamma(s, t).unwrap();
                let want = gamma_const_oracle(q0, s0, s, t);
                assert!(
                    (got - want).abs() <= 1e-11 * want.max(1e-12),
                    "q0={q0} s0={s0} ({s},{t}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn gamma_partial_derivative_in_first_slot() {
        // ∂₁γ(u,T) = -σ²(u) e^{2(q̄(T)-q̄(u))}, by finite differences.
        let ou = const_ou(0.8, 1.3, 1.0);
        for &u in &[0.1, 0.5, 0.85] {
            let h = 1e-6;
            let fd = (ou.gamma(u + h, 1.0).unwrap() - ou.gamma(u - h, 1.0).unwrap()) / (2.0 * h);
            let want = -1.3f64 * 1.3 * (2.0 * 0.8 * (1.0 - u)).exp();
            assert!((fd - want).abs() < 1e-5 * want.abs(), "u={u}: {fd} vs {want}");
        }
    }

    #[test]
    fn transition_moments() {
        let ou = const_ou(1.0, 1.0, 1.0);
        let law = ou.transition(0.0, 1.0, 2.0).unwrap();
        let e = std::f64::consts::E;
        assert!((law.mean - 2.0 * e).abs() < 1e-12);
        assert!((law.variance - (e * e - 1.0) / 2.0).abs() < 1e-11);
        assert!(matches!(
            ou.transition(0.5, 0.5, 1.0),
            Err(Error::DegenerateTransition { .. })
        ));
    }

    #[test]
    fn transition_density_normalizes() {
        let ou = const_ou(-0.6, 1.7, 1.0);
        let law = ou.transition(0.1, 0.8, 0.5).unwrap();
        let f = |y: f64| law.pdf(y);
        let lo = law.mean - 10.0 * law.sd();
        let hi = law.mean + 10.0 * law.sd();
        let total = crate::quad::adaptive(
            &f,
            lo,
            hi,
            crate::quad::QuadTol::absolute(1e-10),
            crate::quad::EVAL_BUDGET,
        )
        .unwrap()
        .value;
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bridge_mean_hits_both_ends() {
        let ou = const_ou(1.5, 1.0, 1.0);
        let (a, b) = (2.0, -1.0);
        assert!((ou.bridge_mean(a, b, 0.3, 0.3).unwrap() - a).abs() < 1e-14);
        let near_end = ou.bridge_mean(a, b, 0.0, 1.0 - 1e-6).unwrap();
        assert!((near_end - b).abs() < 1e-3);
    }

    #[test]
    fn bridge_mean_constant_q_sinh_form() {
        let (q0, horizon) = (1.3, 1.0);
        let ou = const_ou(q0, 1.0, horizon);
        let (a, b) = (0.7, -0.4);
        for &t in &[0.2, 0.5, 0.9] {
            let got = ou.bridge_mean(a, b, 0.0, t).unwrap();
            let want = a * (q0 * (horizon - t)).sinh() / (q0 * horizon).sinh()
                + b * (q0 * t).sinh() / (q0 * horizon).sinh();
            assert!((got - want).abs() < 1e-11, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn bridge_variance_wiener_and_sinh_forms() {
        let ou = const_ou(0.0, 1.0, 1.0);
        assert!((ou.bridge_variance(0.0, 0.5).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(ou.bridge_variance(0.4, 0.4).unwrap(), 0.0);

        let (q0, s0) = (0.9, 1.4);
        let ou = const_ou(q0, s0, 1.0);
        for &(s, t) in &[(0.0, 0.5), (0.2, 0.8)] {
            let got = ou.bridge_variance(s, t).unwrap();
            let want = s0 * s0 / q0 * ((q0 * (1.0 - t)).sinh() * (q0 * (t - s)).sinh())
                / (q0 * (1.0 - s)).sinh();
            assert!((got - want).abs() < 1e-11 * want, "({s},{t})");
        }
    }

    #[test]
    fn conditioning_never_inflates_variance() {
        let ou = const_ou(1.1, 0.8, 1.0);
        for i in 1..20 {
            let s = 0.04 * i as f64;
            let t = s + 0.03;
            let bridged = ou.bridge_variance(s, t).unwrap();
            let free = ou.gamma(s, t).unwrap();
            assert!(bridged <= free + 1e-15, "s={s}");
        }
    }

    #[test]
    fn bridge_transition_matches_density_ratio() {
        let ou = const_ou(0.7, 1.2, 1.0);
        let (b, s, t, x, y) = (0.3, 0.2, 0.6, -0.5, 0.4);
        let gauss_form = ou.bridge_transition(b, s, t, x).unwrap().log_pdf(y);
        let ratio_form = ou.bridge_transition_log_ratio(b, s, t, x, y).unwrap();
        assert!((gauss_form - ratio_form).abs() < 1e-11);
    }

    #[test]
    fn bridge_transition_reduces_to_brownian_bridge() {
        // q ≡ 0, σ ≡ 1: mean ((T-t)x + (t-s)b)/(T-s), var (t-s)(T-t)/(T-s).
        let ou = const_ou(0.0, 1.0, 1.0);
        let (b, s, t, x) = (0.8, 0.2, 0.6, -0.3);
        let law = ou.bridge_transition(b, s, t, x).unwrap();
        let want_mean = ((1.0 - t) * x + (t - s) * b) / (1.0 - s);
        let want_var = (t - s) * (1.0 - t) / (1.0 - s);
        assert!((law.mean - want_mean).abs() < 1e-12);
        assert!((law.variance - want_var).abs() < 1e-12);
    }

    #[test]
    fn wiener_bridge_covariance_pattern() {
        // q ≡ 0, σ ≡ 1, 0→0 bridge: Cov(U_s, U_t) = s(T-t)/T for s <= t.
        let ou = const_ou(0.0, 1.0, 1.0);
        let law = BridgeLaw::new(&BridgeSpec::Ou(OuBridge::new(ou, 0.0, 0.0))).unwrap();
        for &(s, t) in &[(0.1, 0.4), (0.3, 0.9), (0.5, 0.5)] {
            let got = law.covariance(s, t).unwrap();
            assert!((got - s * (1.0 - t)).abs() < 1e-12, "({s},{t}): {got}");
        }
    }

    #[test]
    fn bridge_transition_peak_height() {
        let ou = const_ou(0.4, 1.0, 1.0);
        let (b, s, t, x) = (0.0, 0.1, 0.5, 1.0);
        let law = ou.bridge_transition(b, s, t, x).unwrap();
        let peak = law.pdf(law.mean);
        let want = 1.0 / (std::f64::consts::TAU * law.variance).sqrt();
        assert!((peak - want).abs() < 1e-13);
    }

    #[test]
    fn alpha_bridge_moments_fixtures() {
        // α ≡ 1: Wiener-bridge variance t(T-t)/T.
        let spec = AlphaBridge::new(CoefficientFn::constant(1.0f64), 1.0).unwrap();
        let (phi, mean, var, cov) = alpha_bridge_moments(&spec, 0.5, 0.5).unwrap();
        assert_eq!(mean, 0.0);
        assert!((var - 0.25).abs() < 1e-12);
        assert!((cov - var).abs() < 1e-12, "cov at s=t is the variance");
        assert!((phi - 1.0).abs() < 1e-14);

        // α ≡ 0: standard Wiener process, Var X_t = t.
        let spec = AlphaBridge::new(CoefficientFn::constant(0.0f64), 1.0).unwrap();
        let (_, _, var, _) = alpha_bridge_moments(&spec, 0.2, 0.7).unwrap();
        assert!((var - 0.7).abs() < 1e-12);
    }

    #[test]
    fn endpoint_regime_fixtures() {
        let mk = |a: f64| AlphaBridge::new(CoefficientFn::constant(a), 1.0).unwrap();
        assert_eq!(endpoint_regime(&mk(1.0)), EndpointRegime::ConvergesToZero);
        assert_eq!(
            endpoint_regime(&mk(-0.5)),
            EndpointRegime::SecondMomentDiverges
        );
        assert_eq!(endpoint_regime(&mk(0.0)), EndpointRegime::NondegenerateLimit);

        // lim α = 0 but α ≢ 0 admits several behaviours; must stay Unknown.
        let slow = AlphaBridge::new(
            CoefficientFn::new(|t: f64| -1.0 / (1.0 - t).ln()).with_domain_end(1.0),
            1.0,
        )
        .unwrap();
        assert_eq!(endpoint_regime(&slow), EndpointRegime::Unknown);

        // Oscillating α with no limit.
        let wobble = AlphaBridge::new(
            CoefficientFn::new(|t: f64| (1.0 / (1.0 - t)).sin()).with_domain_end(1.0),
            1.0,
        )
        .unwrap();
        assert_eq!(endpoint_regime(&wobble), EndpointRegime::Unknown);

        let coth = AlphaBridge::new(families::alpha_coth(2.0, 1.0), 1.0).unwrap();
        assert_eq!(endpoint_regime(&coth), EndpointRegime::ConvergesToZero);
    }

    #[test]
    fn free_function_forms_delegate() {
        let ou = const_ou(0.7, 1.1, 1.0);
        assert_eq!(gamma(&ou, 0.1, 0.6).unwrap(), ou.gamma(0.1, 0.6).unwrap());
        assert_eq!(
            ou_transition(&ou, 0.1, 0.6, 0.3).unwrap(),
            ou.transition(0.1, 0.6, 0.3).unwrap()
        );
        assert_eq!(
            bridge_mean(&ou, 1.0, -1.0, 0.1, 0.6).unwrap(),
            ou.bridge_mean(1.0, -1.0, 0.1, 0.6).unwrap()
        );
        assert_eq!(
            bridge_variance(&ou, 0.1, 0.6).unwrap(),
            ou.bridge_variance(0.1, 0.6).unwrap()
        );
        let density = bridge_transition_density(&ou, 0.0, 0.1, 0.6, 0.3, 0.2).unwrap();
        assert!((density - ou.bridge_transition(0.0, 0.1, 0.6, 0.3).unwrap().pdf(0.2)).abs() == 0.0);
    }

    #[test]
    fn sigma_validation_rejects_zero_crossing() {
        let q = CoefficientFn::constant(0.0);
        let sigma = CoefficientFn::new(|t: f64| t - 0.5);
        assert!(OuSpec::new(q, sigma, 1.0).is_err());
    }

    #[test]
    fn law_digest_distinguishes_specs() {
        let a = BridgeSpec::Alpha(AlphaBridge::new(CoefficientFn::constant(1.0), 1.0).unwrap());
        let b = BridgeSpec::Alpha(AlphaBridge::new(CoefficientFn::constant(2.0), 1.0).unwrap());
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.digest());
    }
}
