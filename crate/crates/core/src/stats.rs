//! Empirical distributions and path distances.

use crate::error::{invalid, Error, Result};
use crate::path::CadlagPath;

/// Maximum breakpoint count accepted by [`j1_distance_bracket`].
pub const J1_MAX_BREAKPOINTS: usize = 10_000;
/// Number of grid points used for the J1 lower bound.
pub const J1_LOWER_GRID: usize = 1_000;
/// How many breakpoints the J1 matching may skip in one step.
const J1_WINDOW: usize = 4;

/// A nonempty sample, kept sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    sorted: Vec<f64>,
}

impl Sample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(invalid("sample contains NaN"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Sample { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }

    /// Fraction of values `<= x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Fraction of values `< x`.
    pub fn ecdf_left(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v < x) as f64 / self.len() as f64
    }
}

/// Exact one-sample Kolmogorov-Smirnov statistic
/// `sup_x |F̂(x) - F(x)|`, evaluated at every sample point from both sides.
pub fn ks_distance(sample: &Sample, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sample.len() as f64;
    let xs = sample.sorted();
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let f = cdf(x);
        let below = i as f64 / n;
        let at = j as f64 / n;
        d = d.max((at - f).abs()).max((below - f).abs());
        i = j;
    }
    d
}

/// DKW half-width `sqrt(ln(2 / (1 - confidence)) / (2N))`.
pub fn dkw_band(n: usize, confidence: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!("confidence must be in (0, 1), got {confidence}")));
    }
    Ok(((2.0 / (1.0 - confidence)).ln() / (2.0 * n as f64)).sqrt())
}

fn merged_times(f: &CadlagPath, g: &CadlagPath, grid: &[f64]) -> Vec<f64> {
    let mut ts: Vec<f64> =
        f.breakpoints().iter().chain(g.breakpoints()).chain(grid).copied().chain([f.end().min(g.end())]).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// `max |f - g|` over `grid ∪ breakpoints`, including left limits there.
pub fn uniform_distance(f: &CadlagPath, g: &CadlagPath, grid: &[f64]) -> f64 {
    let end = f.end().min(g.end());
    merged_times(f, g, grid)
        .into_iter()
        .filter(|&t| t <= end)
        .map(|t| {
            let right = (f.eval(t) - g.eval(t)).abs();
            let left = if t > 0.0 { (f.left_limit(t) - g.left_limit(t)).abs() } else { 0.0 };
            right.max(left)
        })
        .fold(0.0, f64::max)
}

/// Anchor times of a path for matching: its breakpoints plus the end.
fn anchors(p: &CadlagPath, end: f64) -> Vec<f64> {
    let mut a: Vec<f64> = p.breakpoints().iter().copied().filter(|&t| t < end).collect();
    a.push(end);
    a
}

/// `sup |f(λ(t)) - g(t)|` over `t ∈ [g0, g1]` where `λ` is linear from
/// `[g0, g1]` onto `[f0, f1]`. Both sides are linear between the merged
/// event points, so endpoints and left limits suffice.
fn matched_segment_cost(f: &CadlagPath, g: &CadlagPath, (f0, f1): (f64, f64), (g0, g1): (f64, f64)) -> f64 {
    let to_f = |t: f64| {
        if g1 > g0 {
            f0 + (t - g0) * (f1 - f0) / (g1 - g0)
        } else {
            f0
        }
    };
    let mut ts: Vec<f64> = vec![g0, g1];
    ts.extend(g.breakpoints().iter().copied().filter(|&t| t > g0 && t < g1));
    if f1 > f0 {
        ts.extend(
            f.breakpoints()
                .iter()
                .copied()
                .filter(|&s| s > f0 && s < f1)
                .map(|s| g0 + (s - f0) * (g1 - g0) / (f1 - f0)),
        );
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut cost: f64 = 0.0;
    for (k, &t) in ts.iter().enumerate() {
        let s = to_f(t);
        if k + 1 < ts.len() {
            cost = cost.max((f.eval(s) - g.eval(t)).abs());
        }
        if k > 0 {
            cost = cost.max((f.left_limit(s) - g.left_limit(t)).abs());
        }
    }
    cost
}

fn check_breakpoints(p: &CadlagPath) -> Result<()> {
    if p.breakpoints().len() > J1_MAX_BREAKPOINTS {
        return Err(Error::TooManyBreakpoints { count: p.breakpoints().len(), limit: J1_MAX_BREAKPOINTS });
    }
    Ok(())
}

/// Minimax dynamic program over monotone matchings of anchor times. Each
/// step may advance up to `window` anchors on either side; `None` removes
/// the restriction.
fn j1_upper(f: &CadlagPath, g: &CadlagPath, window: Option<usize>) -> f64 {
    let end = f.end().min(g.end());
    let fa = anchors(f, end);
    let ga = anchors(g, end);
    let (m, n) = (fa.len(), ga.len());
    let w = window.unwrap_or(m.max(n));
    let mut best = vec![f64::INFINITY; m * n];
    best[0] = 0.0;
    for i in 0..m {
        for j in 0..n {
            let here = best[i * n + j];
            if !here.is_finite() {
                continue;
            }
            for i2 in i + 1..(i + 1 + w).min(m) {
                for j2 in j + 1..(j + 1 + w).min(n) {
                    // the end anchors must be matched to each other
                    if (i2 == m - 1) != (j2 == n - 1) {
                        continue;
                    }
                    let shift = (fa[i2] - ga[j2]).abs();
                    let seg = matched_segment_cost(f, g, (fa[i], fa[i2]), (ga[j], ga[j2]));
                    let cost = here.max(shift).max(seg);
                    let slot = &mut best[i2 * n + j2];
                    if cost < *slot {
                        *slot = cost;
                    }
                }
            }
        }
    }
    // the identity is always admissible
    let identity = matched_segment_cost(f, g, (0.0, end), (0.0, end));
    let terminal = (f.eval(end) - g.eval(end)).abs();
    best[m * n - 1].min(identity).max(terminal)
}

/// `inf_{|s - t| <= w, s ∈ [0, end]} |f(s) - c|`.
fn window_gap(f: &CadlagPath, t: f64, w: f64, end: f64, c: f64) -> f64 {
    let lo = (t - w).max(0.0);
    let hi = (t + w).min(end);
    let mut cuts: Vec<f64> = vec![lo, hi];
    cuts.extend(f.breakpoints().iter().copied().filter(|&b| b > lo && b < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut gap = f64::INFINITY;
    let dist = |a: f64, b: f64| {
        let (l, h) = if a <= b { (a, b) } else { (b, a) };
        if c < l {
            l - c
        } else if c > h {
            c - h
        } else {
            0.0
        }
    };
    if cuts.len() == 1 {
        return (f.eval(lo) - c).abs();
    }
    for k in 0..cuts.len() - 1 {
        // f is linear on [cuts[k], cuts[k+1]) with closure value at the right end
        gap = gap.min(dist(f.eval(cuts[k]), f.left_limit(cuts[k + 1])));
    }
    gap.min((f.eval(hi) - c).abs())
}

/// Bracket `(lower, upper)` around the Skorokhod J1 distance on the common
/// domain `[0, min(end_f, end_g)]`.
///
/// `upper` is attained by a piecewise-linear time change that matches
/// breakpoints monotonically, so it is a true upper bound. `lower` uses the
/// fact that any admissible time change within `upper` of the identity must
/// map each `t` into `[t - upper, t + upper]`.
pub fn j1_distance_bracket(f: &CadlagPath, g: &CadlagPath) -> Result<(f64, f64)> {
    check_breakpoints(f)?;
    check_breakpoints(g)?;
    let upper = j1_upper(f, g, Some(J1_WINDOW));
    let end = f.end().min(g.end());
    let mut ts: Vec<f64> = (0..=J1_LOWER_GRID).map(|k| end * k as f64 / J1_LOWER_GRID as f64).collect();
    ts.extend(g.breakpoints().iter().copied().filter(|&b| b <= end));
    let mut lower = (f.eval(0.0) - g.eval(0.0)).abs();
    for &t in &ts {
        lower = lower.max(window_gap(f, t, upper, end, g.eval(t)));
    }
    Ok((lower.min(upper), upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step(jumps: &[(f64, f64)], base: f64, end: f64) -> CadlagPath {
        let mut b = vec![0.0];
        let mut s = vec![(base, 0.0)];
        for &(t, v) in jumps {
            b.push(t);
            s.push((v, 0.0));
        }
        CadlagPath::new(b, s, end).unwrap()
    }

    #[test]
    fn ecdf_examples() {
        let s = Sample::new(vec![3.0, 1.0, 2.0]).unwrap();
        assert!((s.ecdf(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.ecdf(0.0), 0.0);
        assert_eq!(s.ecdf(5.0), 1.0);
        assert!(Sample::new(vec![]).is_err());
    }

    #[test]
    fn ks_examples() {
        let s = Sample::new(vec![0.5]).unwrap();
        assert_eq!(ks_distance(&s, |x| x.clamp(0.0, 1.0)), 0.5);
        let s = Sample::new(vec![2.0]).unwrap();
        assert_eq!(ks_distance(&s, |_| 0.5), 0.5);
    }

    #[test]
    fn ks_uniforms_within_dkw() {
        use rand::Rng;
        let n = 100_000;
        let band = dkw_band(n, 0.99).unwrap();
        let mut passes = 0;
        for seed in 0..20 {
            let mut rng = crate::rng::stream(seed, 0);
            let s = Sample::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap();
            if ks_distance(&s, |x| x.clamp(0.0, 1.0)) <= band {
                passes += 1;
            }
        }
        assert!(passes >= 19, "{passes}");
    }

    #[test]
    fn ks_handles_ties() {
        let s = Sample::new(vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        // F jumps to 1/2 at 1 and to 1 at 2, matching the sample exactly.
        let cdf = |x: f64| {
            if x < 1.0 {
                0.0
            } else if x < 2.0 {
                0.5
            } else {
                1.0
            }
        };
        assert_eq!(ks_distance(&s, cdf), 0.5);
    }

    #[test]
    fn dkw_examples() {
        assert!((dkw_band(100_000, 0.99).unwrap() - 0.005_147).abs() < 1e-6);
        assert!((dkw_band(1, 0.5).unwrap() - 0.832_554_611_157_697_7).abs() < 1e-12);
        let mut prev = 0.0;
        for c in [0.5, 0.9, 0.99, 0.999, 0.999_999] {
            let b = dkw_band(50, c).unwrap();
            assert!(b > prev);
            prev = b;
        }
        assert!(dkw_band(0, 0.9).is_err());
        assert!(dkw_band(10, 1.0).is_err());
    }

    #[test]
    fn ecdf_integrates_to_mean() {
        let s = Sample::new(vec![0.5, 1.5, 1.5, 4.0, 7.25]).unwrap();
        let xs = s.sorted();
        // ∫_0^max (1 - F̂) over the step breakpoints
        let mut integral = xs[0];
        for w in xs.windows(2) {
            integral += (w[1] - w[0]) * (1.0 - s.ecdf(w[0]));
        }
        assert!((integral - s.mean()).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn ks_invariant_under_monotone_maps(values in prop::collection::vec(0.01f64..20.0, 1..200)) {
            let s = Sample::new(values.clone()).unwrap();
            let logged = Sample::new(values.iter().map(|v| v.ln()).collect()).unwrap();
            let cdf = |x: f64| 1.0 - (-x / 3.0).exp();
            let a = ks_distance(&s, cdf);
            let b = ks_distance(&logged, |y| cdf(y.exp()));
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_distance_examples() {
        let g = step(&[(0.3, 1.0)], 0.0, 1.0);
        assert_eq!(uniform_distance(&g, &g, &[0.5]), 0.0);
        let f = step(&[(0.3, 1.25)], 0.25, 1.0);
        assert_eq!(uniform_distance(&f, &g, &[]), 0.25);
        let a = step(&[(0.5, 1.0)], 0.0, 1.0);
        let b = step(&[(0.6, 1.0)], 0.0, 1.0);
        assert_eq!(uniform_distance(&a, &b, &[]), 1.0);
    }

    #[test]
    fn j1_identical_and_shifted_jump() {
        let a = step(&[(0.5, 1.0)], 0.0, 1.0);
        assert_eq!(j1_distance_bracket(&a, &a).unwrap(), (0.0, 0.0));
        let eps = 0.01;
        let b = step(&[(0.5 + eps, 1.0)], 0.0, 1.0);
        let (lo, hi) = j1_distance_bracket(&a, &b).unwrap();
        assert!(hi <= eps + 1e-12, "{hi}");
        assert!(lo <= hi);
    }

    #[test]
    fn j1_vertical_offset_cannot_be_absorbed() {
        let g = step(&[(0.5, 1.0)], 0.0, 1.0);
        let c = 0.3;
        let f = step(&[(0.5, 1.0 + c)], c, 1.0);
        let (lo, hi) = j1_distance_bracket(&f, &g).unwrap();
        assert!((hi - c).abs() < 1e-12);
        assert!(lo >= c * (1.0 - 1e-9), "{lo}");
    }

    #[test]
    fn j1_rejects_huge_paths() {
        let levels = vec![0.0; J1_MAX_BREAKPOINTS + 1];
        let p = CadlagPath::step_on_lattice(&levels, 1).unwrap();
        assert!(matches!(j1_distance_bracket(&p, &p), Err(Error::TooManyBreakpoints { .. })));
    }

    fn arb_step() -> impl Strategy<Value = CadlagPath> {
        (prop::collection::vec((0.01f64..0.99, -2.0f64..2.0), 0..5), -1.0f64..1.0).prop_map(|(mut jumps, base)| {
            jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
            jumps.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-6);
            step(&jumps, base, 1.0)
        })
    }

    proptest! {
        #[test]
        fn j1_bracket_is_ordered_and_below_uniform(f in arb_step(), g in arb_step()) {
            let (lo, hi) = j1_distance_bracket(&f, &g).unwrap();
            prop_assert!(lo <= hi);
            prop_assert!(hi <= uniform_distance(&f, &g, &[]) + 1e-12);
        }

        #[test]
        fn windowed_dp_is_bounded_by_exhaustive_matching(f in arb_step(), g in arb_step()) {
            let windowed = j1_upper(&f, &g, Some(1));
            let full = j1_upper(&f, &g, None);
            prop_assert!(full <= windowed);
            prop_assert_eq!(j1_upper(&f, &g, Some(J1_WINDOW + 2)), full);
        }
    }
}
