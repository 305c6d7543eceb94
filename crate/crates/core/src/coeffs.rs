//! Scalar coefficient functions of time and the time grids they are
//! evaluated on.
//!
//! A [`CoefficientFn`] bundles a pointwise evaluator with an optional
//! analytic derivative and an optional closed-form primitive
//! `(s, t) ↦ ∫_s^t f(u) du`. Integrals of coefficient functions prefer the
//! primitive and fall back to adaptive quadrature.
//!
//! The horizon `T` of a bridge is a singular point for the drift weight
//! `1/(T - u)`; [`log_phi`] integrates through it with the substitution
//! `u = T - e^{-v}`, which turns `∫ α(u)/(T-u) du` into the integral of the
//! bounded function `v ↦ α(T - e^{-v})`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{self, QuadTol, EVAL_BUDGET};
use crate::scalar::Scalar;

type EvalFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;
type PrimitiveFn<S> = Arc<dyn Fn(S, S) -> S + Send + Sync>;
type DefectFn<S> = Arc<dyn Fn(S, S) -> S + Send + Sync>;

/// A continuous scalar function of time on `[0, domain_end)`.
#[derive(Clone)]
pub struct CoefficientFn<S> {
    label: String,
    eval: EvalFn<S>,
    deriv: Option<EvalFn<S>>,
    primitive: Option<PrimitiveFn<S>>,
    /// (horizon, rem) ↦ f(horizon - rem) - 1, exact in rem. Optional; only
    /// meaningful for drift-rate functions pinned to 1 at a horizon, where
    /// reconstructing the deviation from a rounded `t` would lose all
    /// relative precision.
    end_defect: Option<DefectFn<S>>,
    domain_end: S,
}

impl<S: Scalar> CoefficientFn<S> {
    pub fn new(eval: impl Fn(S) -> S + Send + Sync + 'static) -> Self {
        CoefficientFn {
            label: "custom".to_string(),
            eval: Arc::new(eval),
            deriv: None,
            primitive: None,
            end_defect: None,
            domain_end: S::infinity(),
        }
    }

    pub fn constant(c: S) -> Self {
        CoefficientFn {
            label: format!("const:{c}"),
            eval: Arc::new(move |_| c),
            deriv: Some(Arc::new(|_| S::zero())),
            primitive: Some(Arc::new(move |s, t| c * (t - s))),
            end_defect: Some(Arc::new(move |_, _| c - S::one())),
            domain_end: S::infinity(),
        }
    }

    /// Piecewise-linear interpolation of `(t, value)` samples, constant
    /// beyond the tabulated range. The derivative is the segment slope and
    /// the primitive is the exact trapezoid cumulative.
    pub fn tabulated(mut samples: Vec<(S, S)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidSpec(
                "tabulated coefficient needs at least two samples".into(),
            ));
        }
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if samples.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidSpec(
                "tabulated coefficient needs strictly increasing abscissae".into(),
            ));
        }
        if samples.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidSpec(
                "tabulated coefficient needs finite samples".into(),
            ));
        }
        let xs: Arc<Vec<S>> = Arc::new(samples.iter().map(|p| p.0).collect());
        let ys: Arc<Vec<S>> = Arc::new(samples.iter().map(|p| p.1).collect());
        // Exact cumulative of the interpolant at every node.
        let mut cums = Vec::with_capacity(xs.len());
        cums.push(S::zero());
        for w in samples.windows(2) {
            let area = S::of(0.5) * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
            let last = *cums.last().unwrap();
            cums.push(last + area);
        }
        let cums = Arc::new(cums);

        let (xs_e, ys_e) = (xs.clone(), ys.clone());
        let eval = move |t: S| -> S { table_value(&xs_e, &ys_e, t) };
        let (xs_d, ys_d) = (xs.clone(), ys.clone());
        let deriv = move |t: S| -> S { table_slope(&xs_d, &ys_d, t) };
        let (xs_p, ys_p, cums_p) = (xs.clone(), ys.clone(), cums.clone());
        let prim_at = move |t: S| -> S { table_cumulative(&xs_p, &ys_p, &cums_p, t) };
        let prim = move |s: S, t: S| prim_at(t) - prim_at(s);

        Ok(CoefficientFn {
            label: format!("table:{}pts", xs.len()),
            eval: Arc::new(eval),
            deriv: Some(Arc::new(deriv)),
            primitive: Some(Arc::new(prim)),
            end_defect: None,
            domain_end: S::infinity(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_deriv(mut self, deriv: impl Fn(S) -> S + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    pub fn with_primitive(mut self, prim: impl Fn(S, S) -> S + Send + Sync + 'static) -> Self {
        self.primitive = Some(Arc::new(prim));
        self
    }

    pub fn with_domain_end(mut self, end: S) -> Self {
        self.domain_end = end;
        self
    }

    /// Attach the exact deviation-from-1 near a horizon,
    /// (horizon, rem) ↦ f(horizon - rem) - 1.
    pub fn with_end_defect(mut self, defect: impl Fn(S, S) -> S + Send + Sync + 'static) -> Self {
        self.end_defect = Some(Arc::new(defect));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain_end(&self) -> S {
        self.domain_end
    }

    pub fn eval(&self, t: S) -> S {
        (self.eval)(t)
    }

    pub fn has_deriv(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn has_primitive(&self) -> bool {
        self.primitive.is_some()
    }

    /// Analytic derivative when attached, otherwise central differences with
    /// the given step. Fails when the stencil leaves `[0, domain_end)` or an
    /// evaluation is non-finite.
    pub fn deriv_at(&self, t: S, fd_step: S) -> Result<S> {
        if let Some(d) = &self.deriv {
            let v = d(t);
            if v.is_finite() {
                return Ok(v);
            }
            return Err(Error::DerivativeUnavailable {
                at: t.to_f64_lossy(),
            });
        }
        let h = fd_step;
        if !(h > S::zero()) || t - h < S::zero() || t + h >= self.domain_end {
            return Err(Error::DerivativeUnavailable {
                at: t.to_f64_lossy(),
            });
        }
        let hi = self.eval(t + h);
        let lo = self.eval(t - h);
        let v = (hi - lo) / (S::of(2.0) * h);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::DerivativeUnavailable {
                at: t.to_f64_lossy(),
            })
        }
    }

    pub fn primitive_between(&self, s: S, t: S) -> Option<S> {
        self.primitive.as_ref().map(|p| p(s, t))
    }

    /// f(horizon - rem) - 1, exactly when the family provides it and by
    /// subtraction otherwise. `rem` is the distance to the horizon.
    pub fn end_defect_at(&self, horizon: S, rem: S) -> S {
        match &self.end_defect {
            Some(d) => d(horizon, rem),
            None => self.eval(horizon - rem) - S::one(),
        }
    }

    pub fn has_end_defect(&self) -> bool {
        self.end_defect.is_some()
    }
}

impl<S: std::fmt::Debug> std::fmt::Debug for CoefficientFn<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientFn")
            .field("label", &self.label)
            .field("deriv", &self.deriv.is_some())
            .field("primitive", &self.primitive.is_some())
            .field("domain_end", &self.domain_end)
            .finish()
    }
}

fn table_segment<S: Scalar>(xs: &[S], t: S) -> usize {
    // Index of the segment whose right node is the first x > t, clamped.
    match xs.partition_point(|&x| x <= t) {
        0 => 0,
        n if n >= xs.len() => xs.len() - 2,
        n => n - 1,
    }
}

fn table_value<S: Scalar>(xs: &[S], ys: &[S], t: S) -> S {
    if t <= xs[0] {
        return ys[0];
    }
    if t >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let k = table_segment(xs, t);
    let w = (t - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + w * (ys[k + 1] - ys[k])
}

fn table_slope<S: Scalar>(xs: &[S], ys: &[S], t: S) -> S {
    if t <= xs[0] || t >= xs[xs.len() - 1] {
        return S::zero();
    }
    let k = table_segment(xs, t);
    (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])
}

fn table_cumulative<S: Scalar>(xs: &[S], ys: &[S], cums: &[S], t: S) -> S {
    let n = xs.len();
    if t <= xs[0] {
        return ys[0] * (t - xs[0]);
    }
    if t >= xs[n - 1] {
        return cums[n - 1] + ys[n - 1] * (t - xs[n - 1]);
    }
    let k = table_segment(xs, t);
    let dt = t - xs[k];
    let slope = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
    cums[k] + ys[k] * dt + S::of(0.5) * slope * dt * dt
}

/// Strictly increasing evaluation times in `[0, T)`, kept clear of the
/// singular endpoint by `eps_end`.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct TimeGrid<S> {
    points: Vec<S>,
    horizon: S,
    eps_end: S,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn new(points: Vec<S>, horizon: S, eps_end: S) -> Result<Self> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if !(eps_end > S::zero()) {
            return Err(Error::InvalidGrid("eps_end must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid must be nonempty".into()));
        }
        if points.iter().any(|p| !p.is_finite()) || points[0] < S::zero() {
            return Err(Error::InvalidGrid(
                "grid points must be finite and nonnegative".into(),
            ));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "grid points must be strictly increasing".into(),
            ));
        }
        let last = *points.last().unwrap();
        if last > horizon - eps_end {
            return Err(Error::GridBeyondHorizon {
                last: last.to_f64_lossy(),
                horizon: horizon.to_f64_lossy(),
            });
        }
        Ok(TimeGrid {
            points,
            horizon,
            eps_end,
        })
    }

    pub fn default_eps_end(horizon: S) -> S {
        S::of(1e-9) * horizon
    }

    /// `n` evenly spaced points on `[0, upto]`, including both ends.
    pub fn uniform(n: usize, upto: S, horizon: S) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidGrid("need at least one point".into()));
        }
        let points = if n == 1 {
            vec![S::zero()]
        } else {
            (0..n)
                .map(|i| upto * S::from_usize(i).unwrap() / S::from_usize(n - 1).unwrap())
                .collect()
        };
        TimeGrid::new(points, horizon, Self::default_eps_end(horizon))
    }

    /// `n` evenly spaced interior points `i * T / (n + 1)`, excluding both
    /// endpoints. The layout used by the law-equivalence harness.
    pub fn interior(n: usize, horizon: S) -> Result<Self> {
        let denom = S::from_usize(n + 1).unwrap();
        let points = (1..=n)
            .map(|i| horizon * S::from_usize(i).unwrap() / denom)
            .collect();
        TimeGrid::new(points, horizon, Self::default_eps_end(horizon))
    }

    /// 256 uniform points on `[0, 0.9 T]` plus the geometric tail
    /// `T (1 - 2^{-k})`, k = 4..18, resolving the endpoint boundary layer.
    pub fn refined_default(horizon: S) -> Result<Self> {
        let mut points: Vec<S> = (0..256)
            .map(|i| {
                S::of(0.9) * horizon * S::from_usize(i).unwrap() / S::from_usize(255).unwrap()
            })
            .collect();
        for k in 4..=18 {
            let t = horizon * (S::one() - S::of(2f64.powi(-k)));
            if t > *points.last().unwrap() {
                points.push(t);
            }
        }
        TimeGrid::new(points, horizon, Self::default_eps_end(horizon))
    }

    /// `{0} ∪ {T (1 - 2^{-k})}`, k = 1..18: the endpoint-study grid.
    pub fn endpoint_probe(horizon: S) -> Result<Self> {
        let mut points = vec![S::zero()];
        for k in 1..=18 {
            points.push(horizon * (S::one() - S::of(2f64.powi(-k))));
        }
        TimeGrid::new(points, horizon, Self::default_eps_end(horizon))
    }

    pub fn points(&self) -> &[S] {
        &self.points
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn eps_end(&self) -> S {
        self.eps_end
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// ∫_s^t f(u) du with absolute-error target `tol`.
///
/// Uses the closed-form primitive when one is attached, otherwise adaptive
/// quadrature. `s = t` returns exactly zero.
pub fn integrate<S: Scalar>(f: &CoefficientFn<S>, s: S, t: S, tol: S) -> Result<S> {
    if !(tol > S::zero()) {
        return Err(Error::InvalidSpec("integrate: tol must be positive".into()));
    }
    if !(S::zero() <= s && s <= t && t < f.domain_end()) {
        return Err(Error::InvalidSpec(format!(
            "integrate: need 0 <= s <= t < domain_end, got s={s}, t={t}"
        )));
    }
    if s == t {
        return Ok(S::zero());
    }
    if let Some(v) = f.primitive_between(s, t) {
        return Ok(v);
    }
    let g = |u: S| f.eval(u);
    Ok(quad::adaptive(&g, s, t, QuadTol::absolute(tol), EVAL_BUDGET)?.value)
}

/// Default tolerance for the propagator integrals: tight enough that the
/// cocycle property holds to ~1e-10 at f64.
fn phi_tol<S: Scalar>() -> QuadTol<S> {
    let eps = S::epsilon() * S::of(100.0);
    QuadTol { abs: eps, rel: eps }
}

/// log φ(s,t) = -∫_s^t α(u)/(T-u) du, the log-propagator of the bridge
/// drift. Computed through the substitution u = T - e^{-v}, under which the
/// integrand becomes α(T - e^{-v}) and the endpoint singularity disappears.
pub fn log_phi<S: Scalar>(alpha: &CoefficientFn<S>, horizon: S, s: S, t: S) -> Result<S> {
    if !(S::zero() <= s && s <= t && t < horizon) {
        return Err(Error::InvalidSpec(format!(
            "log_phi: need 0 <= s <= t < T, got s={s}, t={t}, T={horizon}"
        )));
    }
    if s == t {
        return Ok(S::zero());
    }
    let vs = -(horizon - s).ln();
    let vt = -(horizon - t).ln();
    let g = move |v: S| alpha.eval(horizon - (-v).exp());
    let out = quad::adaptive(&g, vs, vt, phi_tol(), EVAL_BUDGET)?;
    Ok(-out.value)
}
