//! Smooth curves, their adapted scale and the strip tubes that cover them.
//!
//! A curve `f: [0,1] -> [0,1]` is Hölder(alpha, beta) when
//! `|f'(x) - f'(y)| <= alpha beta |x - y|^(alpha - 1)`. Library curves carry
//! a certified `beta` derived analytically from their parameters; the grid
//! checks in this module exist to catch mistakes in those derivations.
//!
//! Curve evaluation and arc-length quadrature are done in `f64` regardless of
//! the scalar type used for strips.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::continuation_offsets;
use crate::scalar::Real;
use crate::strip::{dyadic_log, max_scale, ScaleParams, StripId};

/// A curve with a certified smoothness class.
pub trait HolderCurve: Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn slope(&self, x: f64) -> f64;
    fn alpha(&self) -> f64;
    /// Certified Hölder constant.
    fn beta(&self) -> f64;
    /// `sup |f'|` over `[0, 1]`.
    fn max_slope(&self) -> f64;
}

/// The library of analytic curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CurveSpec {
    /// `f(x) = c`
    Const { c: f64 },
    /// `f(x) = a x + b`
    Line { a: f64, b: f64 },
    /// `f(x) = a (x - x0)^2 + c`
    Quad { a: f64, x0: f64, c: f64 },
    /// `f(x) = a sin(2 pi b x) + c`
    Sine { a: f64, b: f64, c: f64 },
    /// `f(x) = c + a |x - x0|^alpha`, Hölder(alpha) for `1 < alpha <= 2`
    Power { a: f64, alpha: f64, x0: f64, c: f64 },
}

impl HolderCurve for CurveSpec {
    fn value(&self, x: f64) -> f64 {
        match *self {
            CurveSpec::Const { c } => c,
            CurveSpec::Line { a, b } => a * x + b,
            CurveSpec::Quad { a, x0, c } => a * (x - x0) * (x - x0) + c,
            CurveSpec::Sine { a, b, c } => a * (2.0 * PI * b * x).sin() + c,
            CurveSpec::Power { a, alpha, x0, c } => c + a * (x - x0).abs().powf(alpha),
        }
    }

    fn slope(&self, x: f64) -> f64 {
        match *self {
            CurveSpec::Const { .. } => 0.0,
            CurveSpec::Line { a, .. } => a,
            CurveSpec::Quad { a, x0, .. } => 2.0 * a * (x - x0),
            CurveSpec::Sine { a, b, .. } => 2.0 * PI * a * b * (2.0 * PI * b * x).cos(),
            CurveSpec::Power { a, alpha, x0, .. } => {
                let u = x - x0;
                a * alpha * u.signum() * u.abs().powf(alpha - 1.0)
            }
        }
    }

    fn alpha(&self) -> f64 {
        match *self {
            CurveSpec::Power { alpha, .. } => alpha,
            _ => 2.0,
        }
    }

    fn beta(&self) -> f64 {
        match *self {
            CurveSpec::Const { .. } | CurveSpec::Line { .. } => 0.0,
            // |f'(x) - f'(y)| = 2|a||x - y|
            CurveSpec::Quad { a, .. } => a.abs(),
            // |f''| <= 4 pi^2 |a| b^2
            CurveSpec::Sine { a, b, .. } => 2.0 * PI * PI * a.abs() * b * b,
            // sign(u)|u|^g is Hölder(g) with constant 2^(1-g), g = alpha - 1
            CurveSpec::Power { a, alpha, .. } => a.abs() * 2f64.powf(2.0 - alpha),
        }
    }

    fn max_slope(&self) -> f64 {
        match *self {
            CurveSpec::Const { .. } => 0.0,
            CurveSpec::Line { a, .. } => a.abs(),
            CurveSpec::Quad { a, x0, .. } => 2.0 * a.abs() * x0.abs().max((1.0 - x0).abs()),
            CurveSpec::Sine { a, b, .. } => 2.0 * PI * a.abs() * b,
            CurveSpec::Power { a, alpha, x0, .. } => {
                a.abs() * alpha * x0.abs().max((1.0 - x0).abs()).powf(alpha - 1.0)
            }
        }
    }
}

impl CurveSpec {
    /// Checks parameter ranges and that the graph stays inside the unit square.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::CurveSpec {
            spec: self.to_string(),
            reason: reason.to_string(),
        };
        let params: Vec<f64> = match *self {
            CurveSpec::Const { c } => vec![c],
            CurveSpec::Line { a, b } => vec![a, b],
            CurveSpec::Quad { a, x0, c } => vec![a, x0, c],
            CurveSpec::Sine { a, b, c } => vec![a, b, c],
            CurveSpec::Power { a, alpha, x0, c } => vec![a, alpha, x0, c],
        };
        if params.iter().any(|v| !v.is_finite()) {
            return Err(bad("parameters must be finite"));
        }
        let (lo, hi) = match *self {
            CurveSpec::Sine { a, b, c } => {
                if b <= 0.0 {
                    return Err(bad("frequency b must be positive"));
                }
                (c - a.abs(), c + a.abs())
            }
            CurveSpec::Power { x0, .. } | CurveSpec::Quad { x0, .. } => {
                if let CurveSpec::Power { alpha, .. } = *self {
                    if !(alpha > 1.0 && alpha <= 2.0) {
                        return Err(bad("alpha must lie in (1, 2]"));
                    }
                }
                let mut vals = vec![self.value(0.0), self.value(1.0)];
                if (0.0..=1.0).contains(&x0) {
                    vals.push(self.value(x0));
                }
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            _ => {
                let (a, b) = (self.value(0.0), self.value(1.0));
                (a.min(b), a.max(b))
            }
        };
        if lo < 0.0 || hi > 1.0 {
            return Err(bad("graph leaves the unit square"));
        }
        Ok(())
    }

    /// A library curve with the given smoothness: a centered parabola for
    /// `alpha = 2`, a centered power cusp `|x - 1/2|^alpha` otherwise.
    pub fn for_smoothness(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(invalid("alpha", alpha, "must lie in (1, 2]"));
        }
        if !(beta > 0.0) {
            return Err(invalid("beta", beta, "must be positive"));
        }
        let curve = if alpha == 2.0 {
            CurveSpec::Quad {
                a: beta,
                x0: 0.5,
                c: 0.5 - beta / 8.0,
            }
        } else {
            let a = beta / 2f64.powf(2.0 - alpha);
            CurveSpec::Power {
                a,
                alpha,
                x0: 0.5,
                c: 0.5 - a * 0.5f64.powf(alpha) / 2.0,
            }
        };
        curve.validate()?;
        Ok(curve)
    }
}

impl fmt::Display for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CurveSpec::Const { c } => write!(f, "const:c={c}"),
            CurveSpec::Line { a, b } => write!(f, "line:a={a},b={b}"),
            CurveSpec::Quad { a, x0, c } => write!(f, "quad:a={a},x0={x0},c={c}"),
            CurveSpec::Sine { a, b, c } => write!(f, "sine:a={a},b={b},c={c}"),
            CurveSpec::Power { a, alpha, x0, c } => {
                write!(f, "power:a={a},alpha={alpha},x0={x0},c={c}")
            }
        }
    }
}

impl FromStr for CurveSpec {
    type Err = Error;

    /// Parses `name:key=value,...`, e.g. `sine:a=0.1,b=1,c=0.5`. Omitted keys
    /// take the family defaults.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| Error::CurveSpec {
            spec: s.to_string(),
            reason,
        };
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let keys: &[(&str, f64)] = match name.trim() {
            "const" => &[("c", 0.5)],
            "line" => &[("a", 0.0), ("b", 0.5)],
            "quad" => &[("a", 1.0), ("x0", 0.5), ("c", 0.375)],
            "sine" => &[("a", 0.1), ("b", 1.0), ("c", 0.5)],
            "power" => &[("a", 0.5), ("alpha", 1.5), ("x0", 0.5), ("c", 0.4)],
            other => return Err(bad(format!("unknown curve family `{other}`"))),
        };
        let mut vals: Vec<f64> = keys.iter().map(|(_, v)| *v).collect();
        for kv in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{kv}`")))?;
            let idx = keys
                .iter()
                .position(|(name, _)| *name == k.trim())
                .ok_or_else(|| bad(format!("unknown parameter `{}`", k.trim())))?;
            vals[idx] = v
                .trim()
                .parse()
                .map_err(|_| bad(format!("`{}` is not a number", v.trim())))?;
        }
        let curve = match name.trim() {
            "const" => CurveSpec::Const { c: vals[0] },
            "line" => CurveSpec::Line { a: vals[0], b: vals[1] },
            "quad" => CurveSpec::Quad { a: vals[0], x0: vals[1], c: vals[2] },
            "sine" => CurveSpec::Sine { a: vals[0], b: vals[1], c: vals[2] },
            _ => CurveSpec::Power { a: vals[0], alpha: vals[1], x0: vals[2], c: vals[3] },
        };
        curve.validate()?;
        Ok(curve)
    }
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)
}

/// Number of intervals in the arc-length table.
pub const ARC_TABLE_INTERVALS: usize = 4096;

/// Cumulative arc length of a curve, tabulated for inversion.
#[derive(Debug, Clone)]
pub struct ArcLength<C> {
    curve: C,
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl<C: HolderCurve> ArcLength<C> {
    pub fn new(curve: C) -> Self {
        let m = ARC_TABLE_INTERVALS;
        // Chebyshev-Lobatto nodes cluster at the ends of [0, 1]
        let mut nodes: Vec<f64> = (0..=m)
            .map(|i| 0.5 * (1.0 - (PI * i as f64 / m as f64).cos()))
            .collect();
        nodes[0] = 0.0;
        nodes[m] = 1.0;
        let mut cumulative = Vec::with_capacity(m + 1);
        cumulative.push(0.0);
        let speed = |x: f64| (1.0 + curve.slope(x).powi(2)).sqrt();
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            acc += integrate(&speed, w[0], w[1], 1e-15);
            cumulative.push(acc);
        }
        Self { curve, nodes, cumulative }
    }

    pub fn curve(&self) -> &C {
        &self.curve
    }

    fn speed(&self, x: f64) -> f64 {
        (1.0 + self.curve.slope(x).powi(2)).sqrt()
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Arc length of the graph over `[0, x]`.
    pub fn length_to(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let i = self.nodes.partition_point(|&v| v <= x).saturating_sub(1).min(ARC_TABLE_INTERVALS - 1);
        self.cumulative[i] + integrate(&|t| self.speed(t), self.nodes[i], x, 1e-15)
    }

    /// Arc length over `[a, b]`.
    pub fn length_between(&self, a: f64, b: f64) -> f64 {
        integrate(&|t| self.speed(t), a, b, 1e-14)
    }

    /// Normalized cumulative arc length `s(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.length_to(x) / self.total()
    }

    /// `x` with `s(x) = u`, by bracketing in the table then safeguarded Newton.
    pub fn inverse(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.total();
        let i = self
            .cumulative
            .partition_point(|&c| c <= target)
            .saturating_sub(1)
            .min(ARC_TABLE_INTERVALS - 1);
        let (mut lo, mut hi) = (self.nodes[i], self.nodes[i + 1]);
        let base = self.cumulative[i];
        let mut x = lo + (hi - lo) * ((target - base) / (self.cumulative[i + 1] - base)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let g = base + integrate(&|t| self.speed(t), self.nodes[i], x, 1e-15) - target;
            if g.abs() <= 1e-13 * self.total() {
                break;
            }
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - g / self.speed(x);
            x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        x
    }
}

/// Adapted scale for Hölder(alpha, beta) at sample size `n`, with its
/// `(w, t)`. Not restricted to the anisotropic range.
///
/// This is the smallest integer `j` with `2 beta w(j)^alpha <= t(j)`, i.e.
/// `ceil((J + log2 beta) / (1 + alpha))`.
pub fn adapted_scale(alpha: f64, beta: f64, n: usize) -> (i64, f64, f64) {
    let big_j = dyadic_log(n) as f64;
    let w = |j: i64| 2f64.powi(-(j as i32));
    let t = |j: i64| 2f64.powf(-(big_j - j as f64) + 1.0);
    let fits = |j: i64| 2.0 * beta * w(j).powf(alpha) <= t(j);
    let mut j = ((big_j + beta.log2()) / (1.0 + alpha)).ceil() as i64;
    while !fits(j) {
        j += 1;
    }
    while fits(j - 1) {
        j -= 1;
    }
    (j, w(j), t(j))
}

/// `2 beta w^alpha <= t < 16 beta w^alpha`.
pub fn sandwich_holds(alpha: f64, beta: f64, w: f64, t: f64) -> bool {
    let c = beta * w.powf(alpha);
    2.0 * c <= t && t < 16.0 * c
}

/// Adapted scale `j*`, required to fall in the valid scale range.
pub fn optimal_scale(alpha: f64, beta: f64, n: usize) -> Result<u32> {
    if !(1.0..=2.0).contains(&alpha) {
        return Err(invalid("alpha", alpha, "must lie in [1, 2]"));
    }
    if !(beta > 0.0) {
        return Err(invalid("beta", beta, "must be positive"));
    }
    let (j, _, _) = adapted_scale(alpha, beta, n);
    let max = max_scale(n);
    if j < 0 || j > max as i64 {
        return Err(Error::NoValidScale { j_star: j, max });
    }
    Ok(j as u32)
}

/// Strip associated to the curve on cell `k`: nearest quantized height and
/// slope at the cell center (ties to even).
pub fn associated_region<T: Real>(c: &impl HolderCurve, p: &ScaleParams<T>, k: u32) -> Result<StripId> {
    let xk = p.cell_center(k).as_f64();
    let l1 = (c.value(xk) / p.delta1.as_f64()).round_ties_even() as i64;
    let l2 = (c.slope(xk) / p.delta2.as_f64()).round_ties_even() as i64;
    if l1 < 0 || l1 >= p.l1_count as i64 || l2.abs() > p.l2_max as i64 {
        return Err(Error::IndexOutOfRange { k, l1, l2 });
    }
    Ok(StripId::new(p.j, k, l1 as u32, l2 as i32))
}

/// Associated strips of every cell, left to right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tube {
    pub j: u32,
    pub regions: Vec<StripId>,
}

pub fn tube<T: Real>(c: &impl HolderCurve, p: &ScaleParams<T>) -> Result<Tube> {
    Ok(Tube {
        j: p.j,
        regions: (0..p.cells).map(|k| associated_region(c, p, k)).collect::<Result<_>>()?,
    })
}

/// Gaps between consecutive tube midlines, measured at the next cell center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeStep {
    pub u: i64,
    pub v: i64,
    /// `|g_{k+1}(x_{k+1}) - g_k(x_{k+1})|`, at most `t`.
    pub height_gap: f64,
    /// `|g'_{k+1} - g'_k|`, at most `t/w`.
    pub slope_gap: f64,
}

pub fn tube_steps<T: Real>(tube: &Tube, p: &ScaleParams<T>) -> Vec<TubeStep> {
    let (d1, d2, w) = (p.delta1.as_f64(), p.delta2.as_f64(), p.w.as_f64());
    tube.regions
        .windows(2)
        .map(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            let (u, v) = continuation_offsets(a, b);
            let next_height = b.l1 as f64 * d1;
            let extrapolated = a.l1 as f64 * d1 + a.l2 as f64 * d2 * w;
            TubeStep {
                u,
                v,
                height_gap: (next_height - extrapolated).abs(),
                slope_gap: ((b.l2 - a.l2) as f64 * d2).abs(),
            }
        })
        .collect()
}

/// Fraction of the curve's arc length lying over the strip's cell.
pub fn relative_arclength<C: HolderCurve, T: Real>(arc: &ArcLength<C>, p: &ScaleParams<T>, id: &StripId) -> f64 {
    let w = p.w.as_f64();
    let x0 = id.k as f64 * w;
    arc.length_between(x0, x0 + w) / arc.total()
}

/// Mean strip count under the mixture, `n((1 - eps) 2/n + eps gamma)`.
pub fn expected_intensity<C: HolderCurve, T: Real>(
    arc: &ArcLength<C>,
    n: usize,
    epsilon: f64,
    p: &ScaleParams<T>,
    id: &StripId,
) -> f64 {
    let gamma = relative_arclength(arc, p, id);
    n as f64 * ((1.0 - epsilon) * 2.0 / n as f64 + epsilon * gamma)
}

/// Worst observed ratio `|f'(x) - f'(y)| / (alpha beta |x - y|^(alpha-1))`
/// and `|f(x) - f(y) - f'(y)(x - y)| / (beta |x - y|^alpha)` over `pairs`
/// random pairs stratified in `|x - y|`.
pub fn holder_grid_ratios(c: &impl HolderCurve, pairs: usize, seed: u64) -> (f64, f64) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (alpha, beta) = (c.alpha(), c.beta());
    let (mut r1, mut r2) = (0.0f64, 0.0f64);
    for i in 0..pairs {
        // gaps spread log-uniformly over 1e-6..1
        let level = -6.0 * (i as f64 + rng.gen::<f64>()) / pairs as f64;
        let gap = 10f64.powf(level).min(1.0);
        let x = rng.gen::<f64>() * (1.0 - gap);
        let y = x + gap;
        let (fx, fy, sx, sy) = (c.value(x), c.value(y), c.slope(x), c.slope(y));
        // discount the rounding error of the differences themselves
        let eps = 8.0 * f64::EPSILON;
        let dx = gap;
        let dslope = ((sx - sy).abs() - eps * (sx.abs() + sy.abs())).max(0.0);
        let taylor = ((fx - fy - sy * (x - y)).abs() - eps * (fx.abs() + fy.abs() + (sy * gap).abs())).max(0.0);
        let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
        r1 = r1.max(ratio(dslope, alpha * beta * dx.powf(alpha - 1.0)));
        r2 = r2.max(ratio(taylor, beta * dx.powf(alpha)));
    }
    (r1, r2)
}
