//! Path sampling for bridges and OU-type processes.
//!
//! Two independent routes to the same law:
//!
//! * [`sample_exact`] draws each grid step from the exact Gauss–Markov
//!   conditional computed by the `analytic` layer, so marginals are exact in
//!   distribution on any grid.
//! * [`sample_euler`] integrates the defining SDE with Euler–Maruyama
//!   substeps, independent of the analytic layer's moment formulas except
//!   for the bridge-drift coefficients it quotes.
//!
//! Grids never include the horizon itself; the drift is singular there.
//! Path generation is embarrassingly parallel: every path owns a counter
//! RNG stream, so the ensemble is bit-identical for any worker count.

use std::io::Write;

use serde::Serialize;

use crate::alpha_law::AlphaBridgeLaw;
use crate::analytic::{AlphaBridge, BridgeSpec};
use crate::coeffs::TimeGrid;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    Exact,
    EulerMaruyama { substeps: u32 },
}

/// N sampled paths on a grid, with full provenance for reproduction.
#[derive(Debug, Clone)]
pub struct PathEnsemble<S> {
    pub grid: TimeGrid<S>,
    pub seed: u64,
    pub scheme: Scheme,
    pub spec_digest: String,
    n_paths: usize,
    /// Row-major: path i occupies `values[i*len .. (i+1)*len]`.
    values: Vec<S>,
}

impl<S: Scalar> PathEnsemble<S> {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_times(&self) -> usize {
        self.grid.len()
    }

    pub fn path(&self, i: usize) -> &[S] {
        let n = self.n_times();
        &self.values[i * n..(i + 1) * n]
    }

    /// All path values at grid index `j`.
    pub fn at_time_index(&self, j: usize) -> Vec<S> {
        (0..self.n_paths).map(|i| self.path(i)[j]).collect()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// CSV with header `t,path0,path1,...`; floats carry 17 significant
    /// digits so files diff stably across runs.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for i in 0..self.n_paths {
            write!(w, ",path{i}")?;
        }
        writeln!(w)?;
        for (j, &t) in self.grid.points().iter().enumerate() {
            write!(w, "{:.16e}", t.to_f64_lossy())?;
            for i in 0..self.n_paths {
                write!(w, ",{:.16e}", self.path(i)[j].to_f64_lossy())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Binary layout: magic `BRLB`, u16 version (= 1), u64 n_times,
    /// u64 n_paths, grid as little-endian f64, then paths row-major as
    /// little-endian f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"BRLB")?;
        w.write_all(&1u16.to_le_bytes())?;
        w.write_all(&(self.n_times() as u64).to_le_bytes())?;
        w.write_all(&(self.n_paths as u64).to_le_bytes())?;
        for &t in self.grid.points() {
            w.write_all(&t.to_f64_lossy().to_le_bytes())?;
        }
        for &v in &self.values {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    }
}

/// Parse the binary ensemble format back into (grid times, path matrix).
pub fn read_binary(bytes: &[u8]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let bad = |m: &str| Error::Io(format!("bad ensemble binary: {m}"));
    if bytes.len() < 22 || &bytes[0..4] != b"BRLB" {
        return Err(bad("missing BRLB magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != 1 {
        return Err(bad("unsupported version"));
    }
    let n_times = u64::from_le_bytes(bytes[6..14].try_into().unwrap()) as usize;
    let n_paths = u64::from_le_bytes(bytes[14..22].try_into().unwrap()) as usize;
    let need = n_paths
        .checked_add(1)
        .and_then(|rows| n_times.checked_mul(rows))
        .and_then(|cells| cells.checked_mul(8))
        .and_then(|payload| payload.checked_add(22))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if bytes.len() != need {
        return Err(bad("length mismatch"));
    }
    let mut off = 22;
    let mut read_f64 = || {
        let v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        off += 8;
        v
    };
    let grid: Vec<f64> = (0..n_times).map(|_| read_f64()).collect();
    let paths: Vec<Vec<f64>> = (0..n_paths)
        .map(|_| (0..n_times).map(|_| read_f64()).collect())
        .collect();
    Ok((grid, paths))
}

fn worker_count(n_paths: usize) -> usize {
    let cap = std::env::var("BRIDGE_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1);
    let avail = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    cap.unwrap_or(avail).min(n_paths).max(1)
}

/// Fill paths in parallel. `step` maps (path index, row) to the simulated
/// path; rows are disjoint slices of the ensemble buffer.
fn fill_paths<S: Scalar>(
    values: &mut [S],
    n_times: usize,
    n_paths: usize,
    step: &(dyn Fn(usize, &mut [S]) + Sync),
) {
    let workers = worker_count(n_paths);
    if workers == 1 {
        for (i, row) in values.chunks_mut(n_times).enumerate() {
            step(i, row);
        }
        return;
    }
    let block = n_paths.div_ceil(workers);
    std::thread::scope(|scope| {
        for (w, chunk) in values.chunks_mut(block * n_times).enumerate() {
            scope.spawn(move || {
                for (local, row) in chunk.chunks_mut(n_times).enumerate() {
                    step(w * block + local, row);
                }
            });
        }
    });
}

fn check_grid<S: Scalar>(spec: &BridgeSpec<S>, grid: &TimeGrid<S>, n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::InvalidSpec("need at least one path".into()));
    }
    if grid.horizon() != spec.horizon() {
        return Err(Error::HorizonMismatch {
            a: grid.horizon().to_f64_lossy(),
            b: spec.horizon().to_f64_lossy(),
        });
    }
    let last = *grid.points().last().unwrap();
    if last >= spec.horizon() {
        return Err(Error::GridBeyondHorizon {
            last: last.to_f64_lossy(),
            horizon: spec.horizon().to_f64_lossy(),
        });
    }
    Ok(())
}

/// Per-interval affine-Gaussian step: x' = slope * x + shift + sd * z.
struct ExactStep<S> {
    slope: S,
    shift: S,
    sd: S,
}

fn exact_steps<S: Scalar>(spec: &BridgeSpec<S>, grid: &TimeGrid<S>) -> Result<Vec<ExactStep<S>>> {
    let pts = grid.points();
    // A leading step from (t=0, initial value) unless the grid starts at 0.
    let mut froms: Vec<S> = Vec::with_capacity(pts.len());
    let mut tos: Vec<S> = Vec::with_capacity(pts.len());
    if pts[0] > S::zero() {
        froms.push(S::zero());
        tos.push(pts[0]);
    }
    for w in pts.windows(2) {
        froms.push(w[0]);
        tos.push(w[1]);
    }

    match spec {
        BridgeSpec::Alpha(a) => {
            let law = AlphaBridgeLaw::new(a.clone())?;
            froms
                .iter()
                .zip(&tos)
                .map(|(&s, &t)| {
                    Ok(ExactStep {
                        slope: law.propagator(s, t)?,
                        shift: S::zero(),
                        sd: law.conditional_variance(s, t)?.max(S::zero()).sqrt(),
                    })
                })
                .collect()
        }
        BridgeSpec::Ou(o) => froms
            .iter()
            .zip(&tos)
            .map(|(&s, &t)| {
                let law = o.ou.bridge_transition(o.b, s, t, S::zero())?;
                Ok(ExactStep {
                    slope: o.ou.bridge_slope(s, t)?,
                    shift: law.mean, // n_{0,b}(s,t): the x-independent part
                    sd: law.variance.max(S::zero()).sqrt(),
                })
            })
            .collect(),
    }
}

/// Draw `n_paths` exact paths of the bridge law on `grid`.
pub fn sample_exact<S: Scalar>(
    spec: &BridgeSpec<S>,
    grid: &TimeGrid<S>,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble<S>> {
    check_grid(spec, grid, n_paths)?;
    let steps = exact_steps(spec, grid)?;
    let n_times = grid.len();
    let starts_at_zero = grid.points()[0] == S::zero();
    let init = spec.initial_value();

    let mut values = vec![S::zero(); n_times * n_paths];
    let step_fn = move |i: usize, row: &mut [S]| {
        let mut rng = RngStream::new(seed, i as u64);
        let mut x = init;
        let mut j = 0usize;
        if starts_at_zero {
            row[j] = x;
            j += 1;
        }
        for st in &steps[..] {
            let z = S::of(rng.next_normal());
            x = st.slope * x + st.shift + st.sd * z;
            row[j] = x;
            j += 1;
        }
    };
    fill_paths(&mut values, n_times, n_paths, &step_fn);

    Ok(PathEnsemble {
        grid: grid.clone(),
        seed,
        scheme: Scheme::Exact,
        spec_digest: spec.digest(),
        n_paths,
        values,
    })
}

/// Precomputed Euler substep: drift is affine in the state.
struct EulerStep<S> {
    dt: S,
    sqrt_dt: S,
    drift_lin: S,
    drift_shift: S,
    diffusion: S,
    /// Grid index to record into after taking this substep, if any.
    record: Option<usize>,
    t: S,
}

fn euler_steps<S: Scalar>(
    spec: &BridgeSpec<S>,
    grid: &TimeGrid<S>,
    substeps: u32,
) -> Result<Vec<EulerStep<S>>> {
    let pts = grid.points();
    let horizon = spec.horizon();
    let m = S::from_u32(substeps).unwrap();

    // Drift/diffusion coefficient tables at substep start times.
    enum Coeffs<S> {
        Alpha(AlphaBridge<S>),
        Ou,
    }
    let kind = match spec {
        BridgeSpec::Alpha(a) => Coeffs::Alpha(a.clone()),
        BridgeSpec::Ou(_) => Coeffs::Ou,
    };

    let mut out = Vec::new();
    let mut intervals: Vec<(S, S, Option<usize>)> = Vec::new();
    if pts[0] > S::zero() {
        intervals.push((S::zero(), pts[0], Some(0)));
    }
    for (j, w) in pts.windows(2).enumerate() {
        intervals.push((w[0], w[1], Some(j + 1)));
    }

    for (lo, hi, record) in intervals {
        let dt = (hi - lo) / m;
        for k in 0..substeps {
            let t = lo + dt * S::from_u32(k).unwrap();
            let (lin, shift, diffusion) = match (&kind, spec) {
                (Coeffs::Alpha(a), _) => {
                    (-a.alpha().eval(t) / (horizon - t), S::zero(), S::one())
                }
                (Coeffs::Ou, BridgeSpec::Ou(o)) => {
                    // Bridge SDE drift:
                    //   [q(t) - e^{2(q̄(T)-q̄(t))} σ²(t)/γ(t,T)] U
                    //   + e^{q̄(T)-q̄(t)} σ²(t) b / γ(t,T)
                    let ou = &o.ou;
                    let sig = ou.sigma().eval(t);
                    let sig2 = sig * sig;
                    let g_end = ou.gamma(t, horizon)?;
                    let ramp = ou.qbar_between(t, horizon)?.exp();
                    let lin = ou.q().eval(t) - ramp * ramp * sig2 / g_end;
                    let shift = ramp * sig2 * o.b / g_end;
                    (lin, shift, sig)
                }
                _ => unreachable!(),
            };
            out.push(EulerStep {
                dt,
                sqrt_dt: dt.sqrt(),
                drift_lin: lin,
                drift_shift: shift,
                diffusion,
                record: if k + 1 == substeps { record } else { None },
                t,
            });
        }
    }
    Ok(out)
}

/// Euler–Maruyama integration of the defining SDE with `substeps` uniform
/// substeps per grid interval.
pub fn sample_euler<S: Scalar>(
    spec: &BridgeSpec<S>,
    grid: &TimeGrid<S>,
    n_paths: usize,
    seed: u64,
    substeps: u32,
) -> Result<PathEnsemble<S>> {
    check_grid(spec, grid, n_paths)?;
    if substeps == 0 {
        return Err(Error::InvalidSpec("substeps must be >= 1".into()));
    }
    let steps = euler_steps(spec, grid, substeps)?;
    let n_times = grid.len();
    let starts_at_zero = grid.points()[0] == S::zero();
    let init = spec.initial_value();
    let blowup_cap = S::of(1e12);

    let mut values = vec![S::zero(); n_times * n_paths];
    let blown: std::sync::Mutex<Option<(f64, f64)>> = std::sync::Mutex::new(None);
    let step_fn = |i: usize, row: &mut [S]| {
        let mut rng = RngStream::new(seed, i as u64);
        let mut x = init;
        if starts_at_zero {
            row[0] = x;
        }
        for st in &steps {
            let drift = (st.drift_lin * x + st.drift_shift) * st.dt;
            if drift.abs() > blowup_cap {
                *blown.lock().unwrap() =
                    Some((st.t.to_f64_lossy(), drift.abs().to_f64_lossy()));
                return;
            }
            let z = S::of(rng.next_normal());
            x = x + drift + st.diffusion * st.sqrt_dt * z;
            if let Some(j) = st.record {
                row[j] = x;
            }
        }
    };
    fill_paths(&mut values, n_times, n_paths, &step_fn);
    if let Some((at, magnitude)) = blown.into_inner().unwrap() {
        return Err(Error::DriftBlowup { at, magnitude });
    }

    Ok(PathEnsemble {
        grid: grid.clone(),
        seed,
        scheme: Scheme::EulerMaruyama { substeps },
        spec_digest: spec.digest(),
        n_paths,
        values,
    })
}

/// One row of the endpoint decay/growth table.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(bound(serialize = "S: Serialize"))]
pub struct EndpointRow<S> {
    pub k: i32,
    pub t: S,
    pub mean_abs: S,
    pub mean_square: S,
}

/// Empirical endpoint diagnostics at t_k = T(1 - 2^{-k}), k = 1..18, using
/// the exact sampler. Finite-sample evidence for the limit behaviour, not a
/// certificate.
pub fn endpoint_study<S: Scalar>(
    spec: &AlphaBridge<S>,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<EndpointRow<S>>> {
    let grid = TimeGrid::endpoint_probe(spec.horizon())?;
    let ens = sample_exact(&BridgeSpec::Alpha(spec.clone()), &grid, n_paths, seed)?;
    let n = S::from_usize(n_paths).unwrap();
    let mut rows = Vec::with_capacity(18);
    for (j, &t) in grid.points().iter().enumerate().skip(1) {
        let mut abs_sum = S::zero();
        let mut sq_sum = S::zero();
        for i in 0..n_paths {
            let x = ens.path(i)[j];
            abs_sum += x.abs();
            sq_sum += x * x;
        }
        rows.push(EndpointRow {
            k: j as i32,
            t,
            mean_abs: abs_sum / n,
            mean_square: sq_sum / n,
        });
    }
    Ok(rows)
}
