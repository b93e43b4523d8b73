//! Significant strips, longest good-continuation runs and the decision rule.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::counter::{significant_strips, CountTable, PointCloud};
use crate::error::{invalid, Result};
use crate::graph::{is_edge, successors};
use crate::scalar::Real;
use crate::strip::{all_scales, ScaleParams, StripId};
use crate::thresholds::ThresholdSet;

/// Strips of one scale with `N(R) > N*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignificanceGraph {
    pub j: u32,
    pub significant: BTreeSet<StripId>,
}

impl SignificanceGraph {
    pub fn new(j: u32, significant: impl IntoIterator<Item = StripId>) -> Self {
        Self {
            j,
            significant: significant.into_iter().collect(),
        }
    }

    pub fn is_significant(&self, id: &StripId) -> bool {
        self.significant.contains(id)
    }

    pub fn len(&self) -> usize {
        self.significant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.significant.is_empty()
    }
}

pub fn significance_graph(table: &CountTable, nstar: u32) -> SignificanceGraph {
    SignificanceGraph::new(
        table.j,
        table.iter_nonzero().filter(|&(_, c)| c > nstar).map(|(id, _)| id),
    )
}

/// Longest run of significant strips joined by good-continuation edges.
///
/// Dynamic program over cells in decreasing `k`: the best run starting at a
/// strip is one plus the best run among its significant successors. Among
/// maximal runs the lexicographically smallest `(k, l1, l2)` sequence is
/// returned. Length counts strips, so a lone significant strip has length 1.
pub fn longest_significant_path<T: Real>(
    sig: &SignificanceGraph,
    p: &ScaleParams<T>,
) -> (usize, Vec<StripId>) {
    if sig.is_empty() {
        return (0, Vec::new());
    }
    // best run length from each strip, and the successor that realizes it
    let mut best: HashMap<StripId, (usize, Option<StripId>)> = HashMap::with_capacity(sig.len());
    for id in sig.significant.iter().rev() {
        let mut entry = (1usize, None);
        // successors come ordered by (l1, l2), so the first maximizer is the smallest
        for s in successors(id, p) {
            if let Some(&(len, _)) = best.get(&s) {
                if len + 1 > entry.0 {
                    entry = (len + 1, Some(s));
                }
            }
        }
        best.insert(*id, entry);
    }
    let (start, &(len, _)) = sig
        .significant
        .iter()
        .map(|id| (id, &best[id]))
        .fold(None::<(&StripId, &(usize, Option<StripId>))>, |acc, cur| match acc {
            Some(a) if a.1 .0 >= cur.1 .0 => Some(a),
            _ => Some(cur),
        })
        .expect("nonempty");
    let mut path = Vec::with_capacity(len);
    let mut cur = Some(*start);
    while let Some(id) = cur {
        path.push(id);
        cur = best[&id].1;
    }
    (len, path)
}

/// Longest run found at one scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaleRun {
    pub j: u32,
    pub lmax_j: usize,
    pub witness: Vec<StripId>,
    pub significant: usize,
    /// False when the scale was skipped because it could not change the result.
    pub evaluated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionResult {
    pub n: usize,
    pub scales: Vec<u32>,
    pub per_scale: Vec<ScaleRun>,
    pub lmax: usize,
    pub lstar: f64,
    pub nstar: u32,
    pub reject: bool,
}

impl DetectionResult {
    /// Witness of the overall longest run (coarsest scale on ties).
    pub fn witness(&self) -> &[StripId] {
        self.per_scale
            .iter()
            .find(|r| r.evaluated && r.lmax_j == self.lmax)
            .map_or(&[], |r| &r.witness)
    }
}

/// How much of the scale range a detection must visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanMode {
    /// Every scale is counted and reported.
    #[default]
    Exhaustive,
    /// Scales are visited finest first; a scale with `1/w` cells no larger
    /// than the best run so far is skipped. `lmax` stays exact.
    ExactMax,
    /// Only the decision is exact: scales with `1/w <= L*` are skipped and
    /// the scan stops at the first rejecting scale.
    Decision,
}

/// Runs the full significant-runs test on `cloud`.
pub fn detect<T: Real>(cloud: &PointCloud<T>, slope_bound: T, ts: &ThresholdSet) -> Result<DetectionResult> {
    detect_with(cloud, slope_bound, ts, ScanMode::Exhaustive)
}

pub fn detect_with<T: Real>(
    cloud: &PointCloud<T>,
    slope_bound: T,
    ts: &ThresholdSet,
    mode: ScanMode,
) -> Result<DetectionResult> {
    let n = cloud.len();
    if n < 2 {
        return Err(invalid("n", n, "sample size must be at least 2"));
    }
    let scales = all_scales(n, slope_bound)?;
    let mut runs: Vec<ScaleRun> = scales
        .iter()
        .map(|p| ScaleRun {
            j: p.j,
            lmax_j: 0,
            witness: Vec::new(),
            significant: 0,
            evaluated: false,
        })
        .collect();
    let mut lmax = 0usize;
    let order: Vec<usize> = match mode {
        ScanMode::Exhaustive => (0..scales.len()).collect(),
        _ => (0..scales.len()).rev().collect(),
    };
    for i in order {
        let p = &scales[i];
        let cells = p.cells as usize;
        let skip = match mode {
            ScanMode::Exhaustive => false,
            ScanMode::ExactMax => cells <= lmax,
            ScanMode::Decision => (cells as f64) <= ts.lstar || lmax as f64 > ts.lstar,
        };
        if skip {
            continue;
        }
        let sig = SignificanceGraph::new(p.j, significant_strips(cloud, p, ts.nstar));
        let (len, witness) = longest_significant_path(&sig, p);
        runs[i] = ScaleRun {
            j: p.j,
            lmax_j: len,
            witness,
            significant: sig.len(),
            evaluated: true,
        };
        lmax = lmax.max(len);
    }
    Ok(DetectionResult {
        n,
        scales: scales.iter().map(|p| p.j).collect(),
        per_scale: runs,
        lmax,
        lstar: ts.lstar,
        nstar: ts.nstar,
        reject: lmax as f64 > ts.lstar,
    })
}

/// Checks a witness edge by edge against the significance labels.
pub fn is_valid_run(path: &[StripId], sig: &SignificanceGraph) -> bool {
    path.iter().all(|id| sig.is_significant(id)) && path.windows(2).all(|w| is_edge(&w[0], &w[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::count_scale;
    use crate::graph::predecessors;
    use crate::scalar::Point2;
    use crate::strip::scale_params;
    use crate::thresholds::Provenance;
    use rand::{Rng, SeedableRng};

    fn ts(nstar: u32, lstar: f64) -> ThresholdSet {
        ThresholdSet::fixed(nstar, lstar, 0.1).with_overrides(None, None, Provenance::Override)
    }

    /// Exhaustive longest path by depth-first enumeration of every path.
    fn exhaustive(sig: &SignificanceGraph, p: &ScaleParams<f64>) -> usize {
        fn dfs(id: &StripId, sig: &SignificanceGraph, p: &ScaleParams<f64>) -> usize {
            1 + crate::strip::enumerate_strips(p)
                .filter(|s| s.k == id.k + 1 && sig.is_significant(s) && is_edge(id, s))
                .map(|s| dfs(&s, sig, p))
                .max()
                .unwrap_or(0)
        }
        sig.significant.iter().map(|id| dfs(id, sig, p)).max().unwrap_or(0)
    }

    #[test]
    fn strict_threshold() {
        let a = StripId::new(0, 0, 1, 0);
        let b = StripId::new(0, 0, 2, 0);
        let c = StripId::new(0, 0, 3, 0);
        let pts = [(0.5, 0.5)];
        let cloud = PointCloud::<f64>::from_pairs(&pts).unwrap();
        let p = scale_params::<f64>(16, 0, 2.0).unwrap();
        let t = count_scale(&cloud, &p);
        let sig = significance_graph(&t, 0);
        assert_eq!(sig.len(), t.nonzero_len());
        let sig = significance_graph(&t, 1);
        assert!(sig.is_empty());
        let hand = SignificanceGraph::new(0, [a, b, c]);
        assert_eq!(hand.len(), 3);
    }

    #[test]
    fn empty_and_chain() {
        let p = scale_params::<f64>(1024, 2, 2.0).unwrap();
        assert_eq!(longest_significant_path(&SignificanceGraph::new(2, []), &p), (0, vec![]));
        let a = StripId::new(2, 0, 100, 3);
        let b = StripId::new(2, 1, 104, 4);
        let c = StripId::new(2, 2, 110, 6);
        let lone = StripId::new(2, 3, 500, 0);
        let sig = SignificanceGraph::new(2, [a, b, c, lone]);
        let (len, path) = longest_significant_path(&sig, &p);
        assert_eq!((len, path.clone()), (3, vec![a, b, c]));
        assert!(is_valid_run(&path, &sig));
    }

    #[test]
    fn ties_resolve_to_lexicographically_smallest() {
        let p = scale_params::<f64>(1024, 2, 2.0).unwrap();
        let a1 = StripId::new(2, 0, 100, 0);
        let a2 = StripId::new(2, 0, 100, 1);
        let b1 = StripId::new(2, 1, 101, 0);
        let b2 = StripId::new(2, 1, 99, 1);
        let sig = SignificanceGraph::new(2, [a1, a2, b1, b2]);
        let (len, path) = longest_significant_path(&sig, &p);
        assert_eq!(len, 2);
        assert_eq!(path, vec![a1, b2]);
    }

    #[test]
    fn dynamic_program_matches_exhaustive_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let p = scale_params::<f64>(256, 3, 2.0).unwrap();
        for trial in 0..40 {
            // grow random chains so long paths actually occur
            let mut set = BTreeSet::new();
            let size = rng.gen_range(1..=120);
            while set.len() < size {
                let seed_id = StripId::new(3, rng.gen_range(0..p.cells), rng.gen_range(0..p.l1_count), rng.gen_range(-p.l2_max..=p.l2_max));
                set.insert(seed_id);
                let mut cur = seed_id;
                for _ in 0..rng.gen_range(0..5) {
                    let s = successors(&cur, &p);
                    if s.is_empty() {
                        break;
                    }
                    cur = s[rng.gen_range(0..s.len())];
                    set.insert(cur);
                }
            }
            let sig = SignificanceGraph::new(3, set);
            let (len, path) = longest_significant_path(&sig, &p);
            assert_eq!(len, exhaustive(&sig, &p), "trial {trial}");
            assert_eq!(path.len(), len);
            assert!(is_valid_run(&path, &sig));
            // maximal: no significant predecessor of the first strip
            assert!(predecessors(&path[0], &p).iter().all(|q| !sig.is_significant(q)) || len == p.cells as usize);
        }
    }

    #[test]
    fn identical_points_give_isolated_runs() {
        let cloud = PointCloud::new(vec![Point2::new(0.4, 0.515); 64]).unwrap();
        let r = detect(&cloud, 2.0, &ts(8, 1.0)).unwrap();
        assert_eq!(r.lmax, 1);
        assert!(!r.reject);
        assert!(r.per_scale.iter().all(|s| s.evaluated && s.lmax_j == 1));
    }

    #[test]
    fn pruned_modes_agree_with_exhaustive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..6 {
            let pts: Vec<_> = (0..512).map(|_| Point2::new(rng.gen::<f64>(), rng.gen::<f64>())).collect();
            let cloud = PointCloud::new(pts).unwrap();
            for nstar in [4u32, 6] {
                let t = ts(nstar, 2.0);
                let full = detect(&cloud, 2.0, &t).unwrap();
                let exact = detect_with(&cloud, 2.0, &t, ScanMode::ExactMax).unwrap();
                let dec = detect_with(&cloud, 2.0, &t, ScanMode::Decision).unwrap();
                assert_eq!(full.lmax, exact.lmax);
                assert_eq!(full.reject, dec.reject);
                for (a, b) in full.per_scale.iter().zip(&exact.per_scale) {
                    if b.evaluated {
                        assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_in_threshold() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<_> = (0..400).map(|_| Point2::new(rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let cloud = PointCloud::new(pts).unwrap();
        let lens: Vec<usize> = (2..9).map(|ns| detect(&cloud, 2.0, &ts(ns, 3.0)).unwrap().lmax).collect();
        assert!(lens.windows(2).all(|w| w[1] <= w[0]), "{lens:?}");
    }
}
