//! The Gaussian law of a general α-Wiener bridge.
//!
//! Everything about the law flows through three running integrals in the
//! flattened coordinate v = -ln(T - t):
//!
//!   A(t) = ∫_0^t α(u)/(T-u) du            (log-propagator weight)
//!   E(t) = ∫_0^t e^{2A(s)} ds              (Itô-isometry weight)
//!   F(t) = ∫_0^t 2(α(s) - 1) e^{2A(s)} ds  (deviation from the Wiener case)
//!
//! The propagator is φ(s,t) = e^{-(A(t)-A(s))} and the variance is
//! Var X_t = e^{-2A(t)} E(t), products of moderate-exponent factors that
//! stay accurate arbitrarily close to the horizon. The third kernel feeds
//! the drift identification downstream: the identity
//! d/ds[(T-s) e^{2A(s)}] = (2α(s) - 1) e^{2A(s)} gives
//!
//!   (T-t) e^{2A(t)} = T + F(t) + E(t),
//!
//! which is what cancels the two 1/(T-t)-sized terms of the identified
//! drift against each other in exact arithmetic.

use std::sync::Arc;

use crate::analytic::AlphaBridge;
use crate::error::{Error, Result};
use crate::quad::{CumulativeIntegral, EVAL_BUDGET};
use crate::scalar::Scalar;

/// Probes walk to T(1 - 2^{-40}); the caches extend one octave further.
const V_RANGE_OCTAVES: i32 = 41;

pub struct AlphaBridgeLaw<S> {
    spec: AlphaBridge<S>,
    /// Largest queryable time, T(1 - 2^{-41}).
    t_max: S,
    a_int: Arc<CumulativeIntegral<S>>,
    e_int: Arc<CumulativeIntegral<S>>,
    f_int: Arc<CumulativeIntegral<S>>,
}

impl<S: Scalar> AlphaBridgeLaw<S> {
    pub fn new(spec: AlphaBridge<S>) -> Result<Self> {
        let horizon = spec.horizon();
        let v0 = -horizon.ln();
        let vmax = S::of(V_RANGE_OCTAVES as f64) * S::of(std::f64::consts::LN_2) - horizon.ln();
        let t_max = horizon * (S::one() - S::of(2f64.powi(-V_RANGE_OCTAVES)));
        let rel = S::epsilon() * S::of(50.0);

        // α is queried through its deviation from 1 at remaining time
        // rem = e^{-v}: exact for the built-in families, so both integrands
        // stay clean down to rem ~ 2^{-41} T.
        let alpha = spec.alpha().clone();
        let a_int = Arc::new(CumulativeIntegral::build(
            Arc::new(move |v: S| S::one() + alpha.end_defect_at(horizon, (-v).exp())),
            v0,
            vmax,
            rel,
            EVAL_BUDGET,
        )?);

        let a_for_e = a_int.clone();
        let e_int = Arc::new(CumulativeIntegral::build(
            Arc::new(move |v: S| match a_for_e.eval(v) {
                Ok(a) => ((a + a) - v).exp(),
                Err(_) => S::nan(),
            }),
            v0,
            vmax,
            rel,
            EVAL_BUDGET,
        )?);

        let a_for_f = a_int.clone();
        let alpha_f = spec.alpha().clone();
        let f_int = Arc::new(CumulativeIntegral::build(
            Arc::new(move |v: S| {
                let rem = (-v).exp();
                match a_for_f.eval(v) {
                    Ok(a) => {
                        S::of(2.0) * alpha_f.end_defect_at(horizon, rem) * ((a + a) - v).exp()
                    }
                    Err(_) => S::nan(),
                }
            }),
            v0,
            vmax,
            rel,
            EVAL_BUDGET,
        )?);

        Ok(AlphaBridgeLaw {
            spec,
            t_max,
            a_int,
            e_int,
            f_int,
        })
    }

    pub fn spec(&self) -> &AlphaBridge<S> {
        &self.spec
    }

    pub fn horizon(&self) -> S {
        self.spec.horizon()
    }

    /// Largest time the tabulated kernels cover.
    pub fn t_max(&self) -> S {
        self.t_max
    }

    fn v_of(&self, t: S) -> Result<S> {
        let horizon = self.horizon();
        if !(S::zero() <= t) || t > self.t_max {
            return Err(Error::OutOfRange {
                at: t.to_f64_lossy(),
                lo: 0.0,
                hi: self.t_max.to_f64_lossy(),
            });
        }
        Ok(-(horizon - t).ln())
    }

    /// A(t) = ∫_0^t α(u)/(T-u) du.
    pub fn weight(&self, t: S) -> Result<S> {
        if t == S::zero() {
            return Ok(S::zero());
        }
        self.a_int.eval(self.v_of(t)?)
    }

    /// E(t) = ∫_0^t e^{2A(s)} ds.
    pub fn isometry(&self, t: S) -> Result<S> {
        if t == S::zero() {
            return Ok(S::zero());
        }
        self.e_int.eval(self.v_of(t)?)
    }

    /// F(t) = ∫_0^t 2(α(s)-1) e^{2A(s)} ds.
    pub fn wiener_defect(&self, t: S) -> Result<S> {
        if t == S::zero() {
            return Ok(S::zero());
        }
        self.f_int.eval(self.v_of(t)?)
    }

    /// log φ(s,t) = -(A(t) - A(s)).
    pub fn log_propagator(&self, s: S, t: S) -> Result<S> {
        if s == t {
            return Ok(S::zero());
        }
        if s > t {
            return Err(Error::InvalidSpec(format!(
                "propagator needs s <= t, got s={s}, t={t}"
            )));
        }
        Ok(-self.a_int.eval_between(self.v_of(s)?, self.v_of(t)?)?)
    }

    pub fn propagator(&self, s: S, t: S) -> Result<S> {
        Ok(self.log_propagator(s, t)?.exp())
    }

    /// Var X_t = e^{-2A(t)} E(t).
    pub fn variance(&self, t: S) -> Result<S> {
        if t == S::zero() {
            return Ok(S::zero());
        }
        let a = self.weight(t)?;
        Ok((-(a + a)).exp() * self.isometry(t)?)
    }

    /// Cov(X_s, X_t) = φ(s,t) Var X_s for s <= t.
    pub fn covariance(&self, s: S, t: S) -> Result<S> {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        if s == t {
            return self.variance(t);
        }
        Ok(self.propagator(s, t)? * self.variance(s)?)
    }

    /// Conditional variance of X_t given X_s:
    /// ∫_s^t φ(u,t)² du = e^{-2A(t)} (E(t) - E(s)).
    pub fn conditional_variance(&self, s: S, t: S) -> Result<S> {
        if s == t {
            return Ok(S::zero());
        }
        let de = self.e_int.eval_between(self.v_of(s)?, self.v_of(t)?)?;
        let a = self.weight(t)?;
        Ok(((-(a + a)).exp() * de).max(S::zero()))
    }
}
