//! Extremal shot noise limits driven by a truncated Poisson random measure.
//!
//! The measure has intensity `LEB × μ_{a,b}` with `μ_{a,b}((x, ∞]) = a x^{-b}`.
//! Only atoms with marks above `δ` are realised. The discarded atoms change a
//! path value by at most `δ`:
//!
//! * for slope `s <= 0` they contribute at most `δ` to a nonnegative supremum;
//! * for `s > 0` they contribute at most `t·s + δ`, while atoms accumulating at
//!   `(0, 0)` force the untruncated supremum to be at least `t·s`.
//!
//! So `max(truncated sup, floor)`, with floor `t·s` for `s > 0` and `0`
//! otherwise, is within `δ` of the untruncated value.

use rand::Rng;
use rand_distr::{Distribution, Open01, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::path::CadlagPath;
use crate::quadrature;

pub const DEFAULT_DELTA: f64 = 1e-3;
/// Slopes below this magnitude use the extremal closed form.
pub const SLOPE_EPSILON: f64 = 1e-8;
/// Absolute tolerance of the finite-dimensional quadrature.
pub const FDD_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrmParams {
    pub a: f64,
    pub b: f64,
    pub horizon: f64,
    pub delta: f64,
}

impl PrmParams {
    pub fn new(a: f64, b: f64, horizon: f64, delta: f64) -> Result<Self> {
        let p = PrmParams { a, b, horizon, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) || !(self.b > 0.0 && self.b.is_finite()) {
            return Err(invalid(format!("need a > 0 and b > 0, got a={} b={}", self.a, self.b)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon must be finite and >= 0, got {}", self.horizon)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InfiniteIntensity(format!(
                "truncation level {} gives infinitely many atoms",
                self.delta
            )));
        }
        if !self.expected_count().is_finite() {
            return Err(Error::InfiniteIntensity("expected atom count overflows".into()));
        }
        Ok(())
    }

    /// `T · a · δ^{-b}`.
    pub fn expected_count(&self) -> f64 {
        self.horizon * self.a * self.delta.powf(-self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub time: f64,
    pub mark: f64,
}

/// Atoms of the truncated measure, sorted by time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSet {
    pub atoms: Vec<Atom>,
    pub params: PrmParams,
}

impl AtomSet {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Union with atoms of a finer layer; the result's truncation level is
    /// the smaller of the two.
    pub fn merged(&self, other: &AtomSet) -> AtomSet {
        let mut atoms: Vec<Atom> = self.atoms.iter().chain(&other.atoms).copied().collect();
        atoms.sort_by(|x, y| x.time.total_cmp(&y.time));
        let mut params = self.params;
        params.delta = self.params.delta.min(other.params.delta);
        AtomSet { atoms, params }
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
    }
}

/// Atoms with marks above `δ` on `[0, T]`: a Poisson count, uniform times and
/// truncated Pareto marks `δ·U^{-1/b}`.
pub fn sample_atoms<R: Rng + ?Sized>(params: &PrmParams, rng: &mut R) -> Result<AtomSet> {
    params.validate()?;
    let n = poisson_count(params.expected_count(), rng);
    let inv_b = -1.0 / params.b;
    let mut atoms: Vec<Atom> = (0..n)
        .map(|_| {
            let time = params.horizon * rng.random::<f64>();
            let u: f64 = Open01.sample(rng);
            Atom { time, mark: params.delta * u.powf(inv_b) }
        })
        .collect();
    atoms.sort_by(|x, y| x.time.total_cmp(&y.time));
    Ok(AtomSet { atoms, params: *params })
}

/// Atoms with marks in `(lower, δ]`, independent of [`sample_atoms`]' layer.
pub fn sample_layer<R: Rng + ?Sized>(params: &PrmParams, lower: f64, rng: &mut R) -> Result<AtomSet> {
    params.validate()?;
    if !(lower > 0.0 && lower < params.delta) {
        return Err(invalid(format!("layer floor must be in (0, {}), got {lower}", params.delta)));
    }
    let (lo_tail, hi_tail) = (lower.powf(-params.b), params.delta.powf(-params.b));
    let n = poisson_count(params.horizon * params.a * (lo_tail - hi_tail), rng);
    let inv_b = -1.0 / params.b;
    let mut atoms: Vec<Atom> = (0..n)
        .map(|_| {
            let time = params.horizon * rng.random::<f64>();
            let u: f64 = Open01.sample(rng);
            Atom { time, mark: (hi_tail + u * (lo_tail - hi_tail)).powf(inv_b) }
        })
        .collect();
    atoms.sort_by(|x, y| x.time.total_cmp(&y.time));
    let mut p = *params;
    p.delta = lower;
    Ok(AtomSet { atoms, params: p })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseSpec {
    /// Common slope `s` of the responses, `log μ` in the prelimit.
    pub slope: f64,
    pub atoms: AtomSet,
}

impl ShotNoiseSpec {
    pub fn floor(&self, t: f64) -> f64 {
        if self.slope > 0.0 {
            t * self.slope
        } else {
            0.0
        }
    }

    /// `max(floor(t), max_{t_k <= t} (j_k + (t - t_k) s))`.
    pub fn value(&self, t: f64) -> f64 {
        let s = self.slope;
        self.atoms
            .atoms
            .iter()
            .take_while(|a| a.time <= t)
            .map(|a| a.mark + (t - a.time) * s)
            .fold(self.floor(t), f64::max)
    }

    /// Exact path on `[0, grid.last()]`. Between events the running maximum
    /// of the parallel responses is affine with slope `s`; breakpoints sit at
    /// atom times where the leader changes and where a decaying path reaches
    /// its floor.
    pub fn path(&self, grid: &[f64]) -> Result<CadlagPath> {
        let end = match grid.last() {
            Some(&e) => e,
            None => return Err(invalid("grid must be nonempty")),
        };
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid[0] < 0.0 || end > self.atoms.params.horizon {
            return Err(invalid("grid must be increasing within [0, T]"));
        }
        let s = self.slope;
        let atoms: Vec<Atom> = self.atoms.atoms.iter().copied().filter(|a| a.time <= end).collect();

        // Intercept of the leading response: value(t) = max(lead + s t, floor(t)).
        let mut lead = f64::NEG_INFINITY;
        let mut bps: Vec<f64> = Vec::new();
        let mut segs: Vec<(f64, f64)> = Vec::new();
        let push = |t: f64, seg: (f64, f64), bps: &mut Vec<f64>, segs: &mut Vec<(f64, f64)>| {
            if let (Some(&lt), Some(&ls)) = (bps.last(), segs.last()) {
                // same line continued: no new breakpoint
                let (lv, lslope): (f64, f64) = ls;
                if lslope == seg.1 && (lv + lslope * (t - lt) - seg.0).abs() <= 1e-12 * (1.0 + seg.0.abs()) {
                    return;
                }
                if t <= lt {
                    segs.pop();
                    bps.pop();
                }
            }
            bps.push(t);
            segs.push(seg);
        };

        // Times where the leading intercept changes, starting at 0.
        let mut changes: Vec<(f64, f64)> = vec![(0.0, lead)];
        for a in &atoms {
            let cand = a.mark - s * a.time;
            if cand > lead {
                lead = cand;
                match changes.last_mut() {
                    Some(last) if last.0 == a.time => last.1 = lead,
                    _ => changes.push((a.time, lead)),
                }
            }
        }
        for (idx, &(t, lead)) in changes.iter().enumerate() {
            let next = changes.get(idx + 1).map_or(f64::INFINITY, |c| c.0);
            if s > 0.0 {
                push(t, (s * t + lead.max(0.0), s), &mut bps, &mut segs);
            } else if s == 0.0 {
                push(t, (lead.max(0.0), 0.0), &mut bps, &mut segs);
            } else {
                let v = lead + s * t;
                if v > 0.0 {
                    push(t, (v, s), &mut bps, &mut segs);
                    let zero = -lead / s;
                    if zero < next && zero < end {
                        push(zero, (0.0, 0.0), &mut bps, &mut segs);
                    }
                } else {
                    push(t, (0.0, 0.0), &mut bps, &mut segs);
                }
            }
        }
        CadlagPath::new(bps, segs, end)
    }
}

/// Value at `u` of the shot noise driven by fresh atoms on `[0, u]`, without
/// materialising the atom set. Same law as sampling on `[0, T]`, `T >= u`,
/// and evaluating at `u`.
pub fn sample_value<R: Rng + ?Sized>(a: f64, b: f64, delta: f64, slope: f64, u: f64, rng: &mut R) -> Result<f64> {
    let params = PrmParams::new(a, b, u, delta)?;
    let n = poisson_count(params.expected_count(), rng);
    let inv_b = -1.0 / b;
    let mut best = if slope > 0.0 { u * slope } else { 0.0 };
    for _ in 0..n {
        let time = u * rng.random::<f64>();
        let w: f64 = Open01.sample(rng);
        best = best.max(delta * w.powf(inv_b) + (u - time) * slope);
    }
    Ok(best)
}

/// `max(0, sup_{t_k <= u} (j_k - s t_k))`, the time-reversed form of the
/// negative-slope value at `u`.
pub fn anchored_sup(atoms: &AtomSet, s: f64, u: f64) -> f64 {
    atoms.atoms.iter().take_while(|a| a.time <= u).map(|a| a.mark - s * a.time).fold(0.0, f64::max)
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// `P{sup_{t_k <= u} (j_k - s(u - t_k)) <= x}` for marks from `μ_{r,1}` and
/// slope `-s`, `s > 0`: `(x / (x + s u))^{r/s}`. Tends to `e^{-r u / x}` as
/// `s -> 0`, which is used below [`SLOPE_EPSILON`].
pub fn marginal_cdf_negslope(r: f64, s: f64, u: f64, x: f64) -> Result<f64> {
    check_nonneg("x", x)?;
    check_nonneg("u", u)?;
    if !(r > 0.0) || !(s >= 0.0) {
        return Err(invalid(format!("need r > 0 and s >= 0, got r={r} s={s}")));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if s < SLOPE_EPSILON {
        return Ok((-r * u / x).exp());
    }
    Ok((-(r / s) * (s * u / x).ln_1p()).exp())
}

/// `P{sup_{t_k <= u} j_k <= x} = exp(-u a x^{-b})`.
pub fn marginal_cdf_extremal(a: f64, b: f64, u: f64, x: f64) -> Result<f64> {
    check_nonneg("u", u)?;
    if !(x > 0.0) {
        return Err(invalid(format!("x must be positive, got {x}")));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    Ok((-u * a * x.powf(-b)).exp())
}

/// Law of the positive-slope value at `u`: `0` for `x <= u s`, else
/// `((x - u s) / x)^{r/s}`.
pub fn marginal_cdf_posslope(r: f64, s: f64, u: f64, x: f64) -> Result<f64> {
    check_nonneg("x", x)?;
    check_nonneg("u", u)?;
    if !(r > 0.0) || !(s > 0.0) {
        return Err(invalid(format!("need r > 0 and s > 0, got r={r} s={s}")));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    let floor = u * s;
    if x <= floor {
        return Ok(0.0);
    }
    Ok(((r / s) * (-floor / x).ln_1p()).exp())
}

/// Marginal law of the shot noise value at `u` for marks from `μ_{a,b}` and any
/// slope sign. Closed forms exist for `b = 1` or `s = 0`; other cases go
/// through [`fdd_cdf`].
pub fn marginal_cdf(a: f64, b: f64, s: f64, u: f64, x: f64) -> Result<f64> {
    if s == 0.0 {
        if x == 0.0 {
            return Ok(if u == 0.0 { 1.0 } else { 0.0 });
        }
        return marginal_cdf_extremal(a, b, u, x);
    }
    if b == 1.0 {
        return if s < 0.0 { marginal_cdf_negslope(a, -s, u, x) } else { marginal_cdf_posslope(a, s, u, x) };
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    if (s > 0.0 && x <= u * s) || x == 0.0 {
        return Ok(0.0);
    }
    fdd_cdf(a, b, s, &[u], &[x])
}

/// `P{V(u_i) <= x_i for all i}` for the shot noise `V` with marks from
/// `μ_{a,b}` and slope `s`, via the void probability `exp(-Λ(A))` of
/// `A = ∪_i {(t, y): t <= u_i, y > x_i - s (u_i - t)}`.
///
/// The boundary lines share slope `s`, so the lower envelope is affine on
/// each `(u_{j-1}, u_j]` with intercept `min_{i >= j} (x_i - s u_i)`; each
/// piece is integrated by adaptive Gauss-Legendre.
pub fn fdd_cdf(a: f64, b: f64, s: f64, times: &[f64], thresholds: &[f64]) -> Result<f64> {
    if times.is_empty() || times.len() != thresholds.len() {
        return Err(invalid("need d >= 1 times and one threshold per time"));
    }
    if !(a > 0.0) || !(b > 0.0) || !s.is_finite() {
        return Err(invalid(format!("need a > 0, b > 0 and finite slope, got a={a} b={b} s={s}")));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("times must be increasing and nonnegative"));
    }
    for (&u, &x) in times.iter().zip(thresholds) {
        if !(x > 0.0) || (s > 0.0 && x <= u * s) {
            return Err(Error::InfiniteIntensity(format!("threshold {x} at time {u} is not above the floor")));
        }
    }
    let d = times.len();
    // suffix minima of the intercepts x_i - s u_i
    let mut intercept = vec![0.0; d];
    let mut running = f64::INFINITY;
    for i in (0..d).rev() {
        running = running.min(thresholds[i] - s * times[i]);
        intercept[i] = running;
    }
    let tol = FDD_TOLERANCE / d as f64;
    let mut measure = 0.0;
    let mut start = 0.0;
    for j in 0..d {
        let c = intercept[j];
        let end = times[j];
        measure += quadrature::integrate(|t| a * (c + s * t).powf(-b), start, end, tol);
        start = end;
    }
    Ok((-measure).exp())
}
