//! The multiscale dictionary of anisotropic strips.
//!
//! At scale `j` a strip is a parallelogram with vertical sides, `w = 2^-j`
//! wide and `t = 2^-(J-j)+1` thick, where `J = ceil(log2 n)`. Every strip has
//! area `w * t = 2^(1-J)`, about `2/n`. A strip is named by
//! `(j, k, l1, l2)`: `k` picks the horizontal cell `[k w, (k+1) w)`, `l1` the
//! height `l1 * delta1` of the midline at the cell center and `l2` the slope
//! `l2 * delta2`, with `delta1 = t/4` and `delta2 = t/(4w)`.
//!
//! Only scales with `t <= w` are used, i.e. `0 <= j <= (J-1)/2`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{Point2, Real};

/// `ceil(log2 n)` for `n >= 1`.
pub fn dyadic_log(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Largest scale index whose strips are anisotropic (`t <= w`).
pub fn max_scale(n: usize) -> u32 {
    dyadic_log(n).saturating_sub(1) / 2
}

/// Discrete coordinates of one strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StripId {
    pub j: u32,
    pub k: u32,
    pub l1: u32,
    pub l2: i32,
}

impl StripId {
    pub fn new(j: u32, k: u32, l1: u32, l2: i32) -> Self {
        Self { j, k, l1, l2 }
    }
}

/// Dimensions of the strips at one scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams<T> {
    pub n: usize,
    /// Dyadic log of `n`.
    pub big_j: u32,
    pub j: u32,
    /// Largest absolute midline slope.
    pub slope_bound: T,
    pub w: T,
    pub t: T,
    pub delta1: T,
    pub delta2: T,
    /// `1/w`, the number of horizontal cells.
    pub cells: u32,
    /// `1/delta1`, the number of midline offsets.
    pub l1_count: u32,
    /// `floor(S / delta2)`; slopes run over `-l2_max..=l2_max`.
    pub l2_max: i32,
}

/// Builds the strip dimensions for sample size `n`, scale `j` and slope bound `slope_bound`.
pub fn scale_params<T: Real>(n: usize, j: u32, slope_bound: T) -> Result<ScaleParams<T>> {
    if n < 2 {
        return Err(invalid("n", n, "sample size must be at least 2"));
    }
    if !(slope_bound > T::one()) || !slope_bound.is_finite() {
        return Err(invalid("S", slope_bound, "slope bound must be finite and > 1"));
    }
    let big_j = dyadic_log(n);
    let max = max_scale(n);
    if j > max {
        return Err(Error::ScaleOutOfRange { j, max });
    }
    let (ji, bj) = (j as i32, big_j as i32);
    let w = T::exp2i(-ji);
    let t = T::exp2i(-(bj - ji) + 1);
    let delta1 = T::exp2i(-(bj - ji) - 1);
    let delta2 = T::exp2i(-(bj - 2 * ji) - 1);
    let inv_delta2 = 2.0f64.powi(bj - 2 * ji + 1);
    let l2_max = (slope_bound.as_f64() * inv_delta2).floor();
    if l2_max > i32::MAX as f64 {
        return Err(invalid("S", slope_bound, "slope range too large to index"));
    }
    Ok(ScaleParams {
        n,
        big_j,
        j,
        slope_bound,
        w,
        t,
        delta1,
        delta2,
        cells: 1 << j,
        l1_count: 1 << (big_j - j + 1),
        l2_max: l2_max as i32,
    })
}

/// All valid scales for a sample of size `n`, coarsest first.
pub fn all_scales<T: Real>(n: usize, slope_bound: T) -> Result<Vec<ScaleParams<T>>> {
    (0..=max_scale(n))
        .map(|j| scale_params(n, j, slope_bound))
        .collect()
}

/// Continuous realization of a strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripGeometry<T> {
    pub center: Point2<T>,
    pub slope: T,
    /// Half-open horizontal extent `[x0, x1)`.
    pub x_range: (T, T),
    pub half_thickness: T,
}

impl<T: Real> StripGeometry<T> {
    pub fn midline(&self, x: T) -> T {
        self.center.y + self.slope * (x - self.center.x)
    }

    /// Point membership: `x` in the half-open cell, `|y - midline(x)| <= t/2`.
    #[inline]
    pub fn contains(&self, pt: Point2<T>) -> bool {
        if !(pt.x >= self.x_range.0 && pt.x < self.x_range.1) {
            return false;
        }
        let d = pt.y - self.slope * (pt.x - self.center.x);
        (d - self.center.y).abs() <= self.half_thickness
    }

    /// Vertices in counter-clockwise order starting bottom-left.
    pub fn corners(&self) -> [Point2<T>; 4] {
        let (x0, x1) = self.x_range;
        let h = self.half_thickness;
        let (m0, m1) = (self.midline(x0), self.midline(x1));
        [
            Point2::new(x0, m0 - h),
            Point2::new(x1, m1 - h),
            Point2::new(x1, m1 + h),
            Point2::new(x0, m0 + h),
        ]
    }
}

impl<T: Real> ScaleParams<T> {
    /// Number of distinct slopes, `2 * l2_max + 1`.
    pub fn l2_count(&self) -> usize {
        2 * self.l2_max as usize + 1
    }

    /// Number of strips at this scale.
    pub fn strip_count(&self) -> usize {
        self.cells as usize * self.l1_count as usize * self.l2_count()
    }

    pub fn is_valid(&self, id: &StripId) -> bool {
        id.j == self.j
            && id.k < self.cells
            && id.l1 < self.l1_count
            && id.l2.unsigned_abs() <= self.l2_max as u32
    }

    /// Horizontal center of cell `k`.
    #[inline]
    pub fn cell_center(&self, k: u32) -> T {
        (T::of(k as f64) + T::of(0.5)) * self.w
    }

    /// Cell holding abscissa `x`, if `x` lies in `[0, 1)`.
    #[inline]
    pub fn cell_of(&self, x: T) -> Option<u32> {
        if !(x >= T::zero() && x < T::one()) {
            return None;
        }
        let k = (x / self.w).floor().to_u32()?;
        (k < self.cells).then_some(k)
    }

    #[inline]
    pub fn slope_of(&self, l2: i32) -> T {
        T::of(l2 as f64) * self.delta2
    }

    pub fn geometry(&self, id: &StripId) -> StripGeometry<T> {
        let x0 = T::of(id.k as f64) * self.w;
        StripGeometry {
            center: Point2::new(self.cell_center(id.k), T::of(id.l1 as f64) * self.delta1),
            slope: self.slope_of(id.l2),
            x_range: (x0, x0 + self.w),
            half_thickness: self.t / T::of(2.0),
        }
    }

    /// Exact band test on a precomputed residual `d = y - slope (x - cx)`.
    #[inline]
    pub(crate) fn in_band(&self, d: T, l1: i64) -> bool {
        (d - T::of(l1 as f64) * self.delta1).abs() <= self.t / T::of(2.0)
    }

    /// Range of midline offsets `l1` whose band contains a point with residual `d`.
    ///
    /// Agrees exactly with [`StripGeometry::contains`]: when `d / delta1` is
    /// close to an integer the band test itself decides the endpoints.
    #[inline]
    pub(crate) fn l1_interval(&self, d: T) -> Option<(u32, u32)> {
        let a = d / self.delta1;
        let fl = a.floor();
        let frac = a - fl;
        let tol = T::epsilon() * (a.abs() + T::of(4.0)) * T::of(16.0);
        let base = fl.to_i64()?;
        let (lo, hi) = if frac > tol && frac < T::one() - tol {
            (base - 1, base + 2)
        } else {
            let mut range: Option<(i64, i64)> = None;
            for l1 in base - 3..=base + 3 {
                if self.in_band(d, l1) {
                    range = Some(match range {
                        None => (l1, l1),
                        Some((lo, _)) => (lo, l1),
                    });
                }
            }
            range?
        };
        let lo = lo.max(0);
        let hi = hi.min(self.l1_count as i64 - 1);
        (lo <= hi).then_some((lo as u32, hi as u32))
    }
}

/// Every strip id at this scale, ordered by `(k, l1, l2)`.
pub fn enumerate_strips<T: Real>(p: &ScaleParams<T>) -> impl Iterator<Item = StripId> + '_ {
    let j = p.j;
    let l2_max = p.l2_max;
    (0..p.cells).flat_map(move |k| {
        (0..p.l1_count)
            .flat_map(move |l1| (-l2_max..=l2_max).map(move |l2| StripId { j, k, l1, l2 }))
    })
}

/// Membership of `pt` in the strip `id`.
pub fn contains<T: Real>(p: &ScaleParams<T>, id: &StripId, pt: Point2<T>) -> bool {
    p.geometry(id).contains(pt)
}

/// All strips at this scale containing `pt`, ordered by `(l1, l2)`.
pub fn strips_containing<T: Real>(pt: Point2<T>, p: &ScaleParams<T>) -> Vec<StripId> {
    let mut out = Vec::new();
    let Some(k) = p.cell_of(pt.x) else {
        return out;
    };
    let xr = pt.x - p.cell_center(k);
    for l2 in -p.l2_max..=p.l2_max {
        let d = pt.y - p.slope_of(l2) * xr;
        if let Some((lo, hi)) = p.l1_interval(d) {
            out.extend((lo..=hi).map(|l1| StripId::new(p.j, k, l1, l2)));
        }
    }
    out.sort_unstable();
    out
}
