//! Good-continuation graphs over the strips of one scale.
//!
//! The edge set is implicit: `(k, l1, l2) -> (k + 1, l1 + l2 + u, l2 + v)`
//! for `|u| <= 4`, `|v| <= 4`. Successor and predecessor lists are generated
//! arithmetically and clipped to the index ranges of the scale.

use crate::scalar::Real;
use crate::strip::{ScaleParams, StripId};

/// Largest allowed offset in either good-continuation coordinate.
pub const MAX_OFFSET: i64 = 4;

/// Out-degree of a vertex far from every index boundary.
pub const FULL_DEGREE: usize = 81;

/// A directed edge of the anisotropy graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GoodContinuationEdge {
    pub from: StripId,
    pub to: StripId,
}

impl GoodContinuationEdge {
    /// Offsets `(u, v)` realized by the edge.
    pub fn offsets(&self) -> (i64, i64) {
        continuation_offsets(&self.from, &self.to)
    }
}

/// `(u, v)` with `to.l1 = from.l1 + from.l2 + u` and `to.l2 = from.l2 + v`.
pub fn continuation_offsets(from: &StripId, to: &StripId) -> (i64, i64) {
    let u = to.l1 as i64 - from.l1 as i64 - from.l2 as i64;
    let v = to.l2 as i64 - from.l2 as i64;
    (u, v)
}

pub fn is_edge(a: &StripId, b: &StripId) -> bool {
    if a.j != b.j || b.k != a.k + 1 {
        return false;
    }
    let (u, v) = continuation_offsets(a, b);
    u.abs() <= MAX_OFFSET && v.abs() <= MAX_OFFSET
}

fn push_if_valid<T: Real>(p: &ScaleParams<T>, out: &mut Vec<StripId>, k: u32, l1: i64, l2: i64) {
    if l1 >= 0 && l1 < p.l1_count as i64 && l2.abs() <= p.l2_max as i64 {
        out.push(StripId::new(p.j, k, l1 as u32, l2 as i32));
    }
}

/// Good continuations of `id`, ordered by `(l1, l2)`.
pub fn successors<T: Real>(id: &StripId, p: &ScaleParams<T>) -> Vec<StripId> {
    let mut out = Vec::with_capacity(FULL_DEGREE);
    if id.k + 1 >= p.cells {
        return out;
    }
    let base = id.l1 as i64 + id.l2 as i64;
    for u in -MAX_OFFSET..=MAX_OFFSET {
        for v in -MAX_OFFSET..=MAX_OFFSET {
            push_if_valid(p, &mut out, id.k + 1, base + u, id.l2 as i64 + v);
        }
    }
    out
}

/// Strips having `id` as a good continuation.
pub fn predecessors<T: Real>(id: &StripId, p: &ScaleParams<T>) -> Vec<StripId> {
    let mut out = Vec::with_capacity(FULL_DEGREE);
    if id.k == 0 {
        return out;
    }
    for v in -MAX_OFFSET..=MAX_OFFSET {
        let l2 = id.l2 as i64 - v;
        for u in -MAX_OFFSET..=MAX_OFFSET {
            push_if_valid(p, &mut out, id.k - 1, id.l1 as i64 - l2 - u, l2);
        }
    }
    out.sort_unstable();
    out
}

/// Vertex count of the graph at this scale.
pub fn vertex_count<T: Real>(p: &ScaleParams<T>) -> usize {
    p.strip_count()
}

/// Upper bound on the number of path starts used in the null analysis,
/// `(1/w)(1/delta1)(1/delta2) 2S`, plus the `l2 = 0` row.
pub fn vertex_bound<T: Real>(p: &ScaleParams<T>) -> f64 {
    let cells = p.cells as f64;
    let l1 = p.l1_count as f64;
    let inv_d2 = 1.0 / p.delta2.as_f64();
    cells * l1 * inv_d2 * 2.0 * p.slope_bound.as_f64() + cells * l1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strip::{enumerate_strips, scale_params};

    #[test]
    fn successor_example() {
        let p = scale_params::<f64>(1024, 2, 2.0).unwrap();
        let id = StripId::new(2, 1, 256, 64);
        let s = successors(&id, &p);
        assert_eq!(s.len(), 81);
        assert!(s.iter().all(|t| t.k == 2 && (316..=324).contains(&t.l1) && (60..=68).contains(&t.l2)));
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn last_cell_has_no_successors() {
        let p = scale_params::<f64>(1024, 2, 2.0).unwrap();
        assert!(successors(&StripId::new(2, 3, 10, 0), &p).is_empty());
        assert!(predecessors(&StripId::new(2, 0, 10, 0), &p).is_empty());
    }

    #[test]
    fn clipped_near_corner() {
        let p = scale_params::<f64>(1024, 2, 2.0).unwrap();
        let id = StripId::new(2, 0, 1, -p.l2_max);
        let s = successors(&id, &p);
        // l2' must stay >= -l2_max (v >= 0) and l1' = 1 - 256 + u < 0 always
        assert!(s.is_empty());
        let id = StripId::new(2, 0, 300, -p.l2_max);
        let s = successors(&id, &p);
        // l1' = 44 + u stays valid; only v in 0..=4 survive
        assert_eq!(s.len(), 9 * 5);
    }

    #[test]
    fn is_edge_examples() {
        let a = StripId::new(0, 3, 10, 2);
        assert!(is_edge(&a, &StripId::new(0, 4, 12, 3)));
        assert!(!is_edge(&a, &StripId::new(0, 4, 17, 2)));
        assert!(!is_edge(&a, &StripId::new(0, 5, 12, 2)));
        assert!(!is_edge(&a, &StripId::new(1, 4, 12, 3)));
    }

    #[test]
    fn vertex_counts() {
        let p = scale_params::<f64>(1024, 2, 2.0).unwrap();
        assert_eq!(vertex_count(&p), 1_050_624);
        assert!(vertex_count(&p) as f64 <= vertex_bound(&p));
        assert_eq!(vertex_bound(&p), 1_050_624.0);
        let p = scale_params::<f64>(16, 0, 2.0).unwrap();
        assert_eq!(vertex_count(&p), 4128);
        assert_eq!(vertex_count(&p), enumerate_strips(&p).count());
    }

    #[test]
    fn edge_relation_agrees_with_lists() {
        let p = scale_params::<f64>(64, 1, 2.0).unwrap();
        let all: Vec<_> = enumerate_strips(&p).collect();
        let mut edges = 0usize;
        for a in all.iter().step_by(7) {
            let succ = successors(a, &p);
            for b in all.iter().filter(|b| b.k == a.k + 1) {
                assert_eq!(is_edge(a, b), succ.contains(b));
                if is_edge(a, b) {
                    assert!(predecessors(b, &p).contains(a));
                    edges += 1;
                }
            }
        }
        assert!(edges > 0);
    }
}
