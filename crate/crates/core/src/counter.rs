//! Strip membership counts `N(R)`.
//!
//! Counting walks one row `(k, l2)` at a time: the points of cell `k` are
//! projected along slope `l2 * delta2` and each point adds one to the short
//! run of offsets `l1` whose band contains it. A row buffer of `1/delta1`
//! counters is reused across rows, so memory stays proportional to the row
//! length unless a full [`CountTable`] is requested.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{Point2, Real};
use crate::strip::{all_scales, ScaleParams, StripId};

/// Points in the unit square.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud<T> {
    points: Vec<Point2<T>>,
}

impl<T: Real> PointCloud<T> {
    /// Validates that every coordinate lies in `[0, 1]`.
    pub fn new(points: Vec<Point2<T>>) -> Result<Self> {
        for (index, pt) in points.iter().enumerate() {
            let inside = |v: T| v >= T::zero() && v <= T::one();
            if !(inside(pt.x) && inside(pt.y)) {
                return Err(Error::PointOutOfRange {
                    index,
                    x: pt.x.as_f64(),
                    y: pt.y.as_f64(),
                });
            }
        }
        Ok(Self { points })
    }

    pub fn from_pairs(pairs: &[(T, T)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&p| p.into()).collect())
    }

    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point2<T>> {
        self.points
    }
}

/// Points of one scale grouped by cell, stored as `(x - cx, y)`.
pub(crate) struct CellBuckets<T> {
    cells: Vec<Vec<(T, T)>>,
}

impl<T: Real> CellBuckets<T> {
    pub(crate) fn new(cloud: &PointCloud<T>, p: &ScaleParams<T>) -> Self {
        let mut cells = vec![Vec::new(); p.cells as usize];
        for pt in cloud.points() {
            if let Some(k) = p.cell_of(pt.x) {
                cells[k as usize].push((pt.x - p.cell_center(k), pt.y));
            }
        }
        Self { cells }
    }
}

/// Sweeps every row of cell `k`.
///
/// `visit(l2, row, hits)` sees the finished row counts and the offsets whose
/// count first exceeded `nstar` in this row. Returns the number of
/// increments performed.
fn sweep_cell<T: Real>(
    p: &ScaleParams<T>,
    pts: &[(T, T)],
    nstar: u32,
    row: &mut [u32],
    hits: &mut Vec<u32>,
    mut visit: impl FnMut(i32, &[u32], &[u32]),
) -> u64 {
    let mut increments = 0u64;
    for l2 in -p.l2_max..=p.l2_max {
        let slope = p.slope_of(l2);
        let (mut touched_lo, mut touched_hi) = (u32::MAX, 0u32);
        hits.clear();
        for &(xr, y) in pts {
            let d = y - slope * xr;
            let Some((lo, hi)) = p.l1_interval(d) else {
                continue;
            };
            touched_lo = touched_lo.min(lo);
            touched_hi = touched_hi.max(hi);
            for l1 in lo..=hi {
                let c = &mut row[l1 as usize];
                *c += 1;
                if *c == nstar.wrapping_add(1) {
                    hits.push(l1);
                }
            }
            increments += (hi - lo + 1) as u64;
        }
        visit(l2, row, hits);
        if touched_lo <= touched_hi {
            row[touched_lo as usize..=touched_hi as usize].fill(0);
        }
    }
    increments
}

/// Dense per-scale table of strip counts; absent strips count zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pub j: u32,
    cells: u32,
    l1_count: u32,
    l2_max: i32,
    /// Row-major over `(k, l2)`, each row indexed by `l1`.
    counts: Vec<u32>,
    increments: u64,
}

impl CountTable {
    fn l2_count(&self) -> usize {
        2 * self.l2_max as usize + 1
    }

    fn index(&self, id: &StripId) -> Option<usize> {
        if id.j != self.j
            || id.k >= self.cells
            || id.l1 >= self.l1_count
            || id.l2.unsigned_abs() > self.l2_max as u32
        {
            return None;
        }
        let row = id.k as usize * self.l2_count() + (id.l2 + self.l2_max) as usize;
        Some(row * self.l1_count as usize + id.l1 as usize)
    }

    /// `N(R)`; zero for ids outside this scale.
    pub fn get(&self, id: &StripId) -> u32 {
        self.index(id).map_or(0, |i| self.counts[i])
    }

    /// Nonzero entries ordered by `(k, l1, l2)`.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (StripId, u32)> + '_ {
        let mut v: Vec<(StripId, u32)> = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (self.id_at(i), c))
            .collect();
        v.sort_unstable();
        v.into_iter()
    }

    fn id_at(&self, i: usize) -> StripId {
        let l1 = (i % self.l1_count as usize) as u32;
        let row = i / self.l1_count as usize;
        let k = (row / self.l2_count()) as u32;
        let l2 = (row % self.l2_count()) as i32 - self.l2_max;
        StripId::new(self.j, k, l1, l2)
    }

    pub fn nonzero_len(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Sum of all counts, equal to the number of membership increments.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn max_count(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Increments performed while building the table.
    pub fn increments(&self) -> u64 {
        self.increments
    }
}

/// `N(R)` for every strip at scale `p.j`.
pub fn count_scale<T: Real>(cloud: &PointCloud<T>, p: &ScaleParams<T>) -> CountTable {
    let buckets = CellBuckets::new(cloud, p);
    let l1_count = p.l1_count as usize;
    let cell_len = p.l2_count() * l1_count;
    let mut counts = vec![0u32; p.cells as usize * cell_len];
    let increments: u64 = counts
        .par_chunks_mut(cell_len)
        .zip(buckets.cells.par_iter())
        .map(|(cell_counts, pts)| {
            let mut row = vec![0u32; l1_count];
            let mut hits = Vec::new();
            sweep_cell(p, pts, u32::MAX, &mut row, &mut hits, |l2, row, _| {
                let r = (l2 + p.l2_max) as usize * l1_count;
                cell_counts[r..r + l1_count].copy_from_slice(row);
            })
        })
        .sum();
    CountTable {
        j: p.j,
        cells: p.cells,
        l1_count: p.l1_count,
        l2_max: p.l2_max,
        counts,
        increments,
    }
}

/// One table per valid scale, coarsest first.
pub fn count_all_scales<T: Real>(cloud: &PointCloud<T>, slope_bound: T) -> Result<Vec<CountTable>> {
    if cloud.len() < 2 {
        return Err(crate::error::invalid("n", cloud.len(), "sample size must be at least 2"));
    }
    Ok(all_scales(cloud.len(), slope_bound)?
        .iter()
        .map(|p| count_scale(cloud, p))
        .collect())
}

/// Strips with `N(R) > nstar`, ordered by `(k, l1, l2)`, without building a table.
pub fn significant_strips<T: Real>(
    cloud: &PointCloud<T>,
    p: &ScaleParams<T>,
    nstar: u32,
) -> Vec<StripId> {
    let buckets = CellBuckets::new(cloud, p);
    let per_cell: Vec<Vec<StripId>> = buckets
        .cells
        .par_iter()
        .enumerate()
        .map(|(k, pts)| {
            let mut found = Vec::new();
            if pts.len() <= nstar as usize {
                return found;
            }
            let mut row = vec![0u32; p.l1_count as usize];
            let mut hits = Vec::new();
            sweep_cell(p, pts, nstar, &mut row, &mut hits, |l2, _, hits| {
                found.extend(hits.iter().map(|&l1| StripId::new(p.j, k as u32, l1, l2)));
            });
            found.sort_unstable();
            found
        })
        .collect();
    per_cell.into_iter().flatten().collect()
}

/// Total membership increments `sum_i |{R : X_i in R}|` at one scale.
pub fn membership_increments<T: Real>(cloud: &PointCloud<T>, p: &ScaleParams<T>) -> u64 {
    let buckets = CellBuckets::new(cloud, p);
    buckets
        .cells
        .par_iter()
        .map(|pts| {
            let mut total = 0u64;
            for l2 in -p.l2_max..=p.l2_max {
                let slope = p.slope_of(l2);
                for &(xr, y) in pts {
                    if let Some((lo, hi)) = p.l1_interval(y - slope * xr) {
                        total += (hi - lo + 1) as u64;
                    }
                }
            }
            total
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strip::{enumerate_strips, scale_params, strips_containing};
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    fn random_cloud(n: usize, seed: u64) -> PointCloud<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new((0..n).map(|_| Point2::new(rng.gen(), rng.gen())).collect()).unwrap()
    }

    fn brute_force(cloud: &PointCloud<f64>, p: &ScaleParams<f64>) -> HashMap<StripId, u32> {
        let mut out = HashMap::new();
        for id in enumerate_strips(p) {
            let g = p.geometry(&id);
            let c = cloud.points().iter().filter(|pt| g.contains(**pt)).count() as u32;
            if c > 0 {
                out.insert(id, c);
            }
        }
        out
    }

    #[test]
    fn rejects_points_outside_unit_square() {
        assert!(PointCloud::from_pairs(&[(0.5, 1.5)]).is_err());
        assert!(PointCloud::from_pairs(&[(f64::NAN, 0.5)]).is_err());
        assert!(PointCloud::from_pairs(&[(0.0, 1.0), (1.0, 0.0)]).is_ok());
    }

    #[test]
    fn empty_cloud_gives_empty_table() {
        let p = scale_params::<f64>(64, 1, 2.0).unwrap();
        let t = count_scale(&PointCloud::default(), &p);
        assert_eq!(t.nonzero_len(), 0);
        assert_eq!(t.iter_nonzero().count(), 0);
    }

    #[test]
    fn identical_points() {
        let n = 50;
        let pt = Point2::new(0.4, 0.515);
        let cloud = PointCloud::new(vec![pt; n]).unwrap();
        let p = scale_params::<f64>(1024, 2, 2.0).unwrap();
        let t = count_scale(&cloud, &p);
        let ids = strips_containing(pt, &p);
        let nz: Vec<_> = t.iter_nonzero().collect();
        assert_eq!(nz.len(), ids.len());
        for ((id, c), want) in nz.iter().zip(&ids) {
            assert_eq!(id, want);
            assert_eq!(*c, n as u32);
        }
    }

    #[test]
    fn matches_brute_force() {
        for (n, seed) in [(16usize, 1u64), (48, 2), (100, 3)] {
            let cloud = random_cloud(n, seed);
            for p in all_scales::<f64>(n, 2.0).unwrap() {
                let t = count_scale(&cloud, &p);
                let brute = brute_force(&cloud, &p);
                assert_eq!(t.nonzero_len(), brute.len());
                for (id, c) in t.iter_nonzero() {
                    assert_eq!(brute.get(&id), Some(&c), "{id:?}");
                }
            }
        }
    }

    #[test]
    fn table_sum_equals_point_major_increments() {
        let cloud = random_cloud(200, 9);
        for p in all_scales::<f64>(200, 2.0).unwrap() {
            let t = count_scale(&cloud, &p);
            let point_major: u64 = cloud
                .points()
                .iter()
                .map(|pt| strips_containing(*pt, &p).len() as u64)
                .sum();
            assert_eq!(t.total(), point_major);
            assert_eq!(t.increments(), point_major);
            assert_eq!(membership_increments(&cloud, &p), point_major);
        }
    }

    #[test]
    fn significant_strips_match_table() {
        let cloud = random_cloud(256, 4);
        for p in all_scales::<f64>(256, 2.0).unwrap() {
            let t = count_scale(&cloud, &p);
            for nstar in [0u32, 2, 4, 6] {
                let want: Vec<_> = t.iter_nonzero().filter(|(_, c)| *c > nstar).map(|(id, _)| id).collect();
                assert_eq!(significant_strips(&cloud, &p, nstar), want);
            }
        }
    }

    #[test]
    fn count_all_scales_covers_valid_range() {
        let cloud = random_cloud(1024, 5);
        let tables = count_all_scales(&cloud, 2.0).unwrap();
        assert_eq!(tables.iter().map(|t| t.j).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        assert!(tables.iter().all(|t| t.max_count() <= 1024));
    }

    #[test]
    fn single_precision_agrees_with_its_own_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<Point2<f32>> = (0..64).map(|_| Point2::new(rng.gen(), rng.gen())).collect();
        let cloud = PointCloud::new(pts).unwrap();
        for p in all_scales::<f32>(64, 2.0).unwrap() {
            let t = count_scale(&cloud, &p);
            for id in enumerate_strips(&p) {
                let g = p.geometry(&id);
                let c = cloud.points().iter().filter(|pt| g.contains(**pt)).count() as u32;
                assert_eq!(t.get(&id), c);
            }
        }
    }
}
