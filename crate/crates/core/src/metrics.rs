//! Front quality metrics: grid-occupancy entropy (diversity), the additive
//! epsilon indicator (convergence) and pairwise solution distances for
//! diverse subset selection.

use thiserror::Error;

use crate::objectives::ObjectiveVector;
use crate::search::Solution;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("front must not be empty")]
    EmptyFront,
    #[error("objective vector length mismatch")]
    LengthMismatch,
    #[error("invalid grid bounds: min must be < max per dimension")]
    InvalidBounds,
    #[error("solutions come from different specifications")]
    SpecMismatch,
}

/// Reference box and resolution for entropy cells.
#[derive(Debug, Clone)]
pub struct GridSpec {
    bounds: Vec<(f64, f64)>,
    cells_per_dim: usize,
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, cells_per_dim: usize) -> Result<Self, MetricError> {
        if cells_per_dim == 0 || bounds.iter().any(|(lo, hi)| lo >= hi) {
            return Err(MetricError::InvalidBounds);
        }
        Ok(GridSpec { bounds, cells_per_dim })
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }
}

/// Grid-occupancy Shannon entropy in [0, 1]. Vectors are normalized into the
/// reference box (clamping out-of-bounds components), assigned to cells, and
/// the cell distribution entropy is normalized by `ln(min(|front|, b^k))`.
pub fn entropy(front: &[ObjectiveVector], grid: &GridSpec) -> Result<f64, MetricError> {
    entropy_report(front, grid).map(|(h, _)| h)
}

/// Entropy plus the number of clamped (out-of-box) components.
pub fn entropy_report(
    front: &[ObjectiveVector],
    grid: &GridSpec,
) -> Result<(f64, u64), MetricError> {
    if front.is_empty() {
        return Err(MetricError::EmptyFront);
    }
    let k = grid.dims();
    if front.iter().any(|v| v.len() != k) {
        return Err(MetricError::LengthMismatch);
    }
    let b = grid.cells_per_dim;
    let mut clamped = 0u64;
    let mut counts: std::collections::HashMap<Vec<usize>, usize> = std::collections::HashMap::new();
    for v in front {
        let mut cell = Vec::with_capacity(k);
        for (i, &(lo, hi)) in grid.bounds.iter().enumerate() {
            let mut u = (v.get(i) as f64 - lo) / (hi - lo);
            if !(0.0..=1.0).contains(&u) {
                clamped += 1;
                u = u.clamp(0.0, 1.0);
            }
            cell.push(((u * b as f64) as usize).min(b - 1));
        }
        *counts.entry(cell).or_insert(0) += 1;
    }
    let n = front.len() as f64;
    let max_cells = (b as f64).powi(k as i32).min(n);
    let denom = max_cells.ln();
    if denom <= 0.0 {
        return Ok((0.0, clamped));
    }
    let h: f64 = counts
        .values()
        .map(|&c| {
            let rho = c as f64 / n;
            -rho * rho.ln()
        })
        .sum();
    Ok(((h / denom).clamp(0.0, 1.0), clamped))
}

/// Additive epsilon indicator: the smallest uniform shift making `a` weakly
/// dominate every reference point; computed on raw objective values.
pub fn epsilon_indicator(
    a: &[ObjectiveVector],
    reference: &[ObjectiveVector],
) -> Result<f64, MetricError> {
    epsilon_indicator_impl(a, reference, None)
}

/// Epsilon indicator with each dimension scaled by the reference box width.
pub fn epsilon_indicator_scaled(
    a: &[ObjectiveVector],
    reference: &[ObjectiveVector],
    bounds: &[(f64, f64)],
) -> Result<f64, MetricError> {
    if bounds.iter().any(|(lo, hi)| lo >= hi) {
        return Err(MetricError::InvalidBounds);
    }
    epsilon_indicator_impl(a, reference, Some(bounds))
}

fn epsilon_indicator_impl(
    a: &[ObjectiveVector],
    reference: &[ObjectiveVector],
    bounds: Option<&[(f64, f64)]>,
) -> Result<f64, MetricError> {
    if a.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyFront);
    }
    let k = a[0].len();
    if a.iter().chain(reference).any(|v| v.len() != k) {
        return Err(MetricError::LengthMismatch);
    }
    if let Some(b) = bounds {
        if b.len() != k {
            return Err(MetricError::LengthMismatch);
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for r in reference {
        let mut best = f64::INFINITY;
        for cand in a {
            let mut eps = f64::NEG_INFINITY;
            for i in 0..k {
                let mut d = (cand.get(i) - r.get(i)) as f64;
                if let Some(b) = bounds {
                    d /= b[i].1 - b[i].0;
                }
                eps = eps.max(d);
            }
            best = best.min(eps);
        }
        worst = worst.max(best);
    }
    Ok(worst.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// Count of differing decisions: bindings, route links present in
    /// exactly one solution, and order/phase resolutions that differ.
    DecisionHamming,
    /// Euclidean distance of objective vectors.
    ObjectiveEuclidean,
}

pub fn pairwise_distance(
    s1: &Solution,
    s2: &Solution,
    kind: DistanceKind,
) -> Result<f64, MetricError> {
    if s1.spec_fingerprint != s2.spec_fingerprint {
        return Err(MetricError::SpecMismatch);
    }
    match kind {
        DistanceKind::ObjectiveEuclidean => {
            if s1.objectives.len() != s2.objectives.len() {
                return Err(MetricError::LengthMismatch);
            }
            let sq: f64 = s1
                .objectives
                .components()
                .iter()
                .zip(s2.objectives.components())
                .map(|(a, b)| ((a - b) as f64).powi(2))
                .sum();
            Ok(sq.sqrt())
        }
        DistanceKind::DecisionHamming => {
            let mut d = 0u64;
            for (a, b) in s1.bindings.iter().zip(&s2.bindings) {
                if a != b {
                    d += 1;
                }
            }
            for m in 0..s1.routes.len() {
                let l1: std::collections::BTreeSet<_> = s1.route_links(m).into_iter().collect();
                let l2: std::collections::BTreeSet<_> = s2.route_links(m).into_iter().collect();
                d += l1.symmetric_difference(&l2).count() as u64;
            }
            // Order/phase resolutions: a pair decided differently (or in
            // exactly one solution) counts once.
            let recs = |s: &Solution| -> std::collections::BTreeMap<String, (u8, i64)> {
                s.orders
                    .iter()
                    .map(|(pair, dir, k)| {
                        let key = format!("{pair:?}");
                        let dirv = match dir {
                            crate::search::Direction::Forward => 0,
                            crate::search::Direction::Backward => 1,
                        };
                        (key, (dirv, *k))
                    })
                    .collect()
            };
            let r1 = recs(s1);
            let r2 = recs(s2);
            for (key, v1) in &r1 {
                match r2.get(key) {
                    Some(v2) if v2 == v1 => {}
                    _ => d += 1,
                }
            }
            for key in r2.keys() {
                if !r1.contains_key(key) {
                    d += 1;
                }
            }
            Ok(d as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[i64]) -> ObjectiveVector {
        ObjectiveVector::new(c.to_vec())
    }

    #[test]
    fn entropy_of_single_point_is_zero() {
        let grid = GridSpec::new(vec![(0.0, 1.0), (0.0, 1.0)], 2).unwrap();
        assert_eq!(entropy(&[v(&[0, 0])], &grid).unwrap(), 0.0);
    }

    #[test]
    fn entropy_of_uniform_cells_is_one() {
        let grid = GridSpec::new(vec![(0.0, 2.0), (0.0, 2.0)], 2).unwrap();
        let front = vec![v(&[0, 0]), v(&[0, 2]), v(&[2, 0]), v(&[2, 2])];
        let h = entropy(&front, &grid).unwrap();
        assert!((h - 1.0).abs() < 1e-9);
    }

    #[test]
    fn entropy_matches_worked_example() {
        // 4 points, 3 in one cell and 1 in another of a 2x2 grid.
        let grid = GridSpec::new(vec![(0.0, 2.0), (0.0, 2.0)], 2).unwrap();
        let front = vec![v(&[0, 0]), v(&[0, 0]), v(&[0, 0]), v(&[2, 2])];
        let h = entropy(&front, &grid).unwrap();
        let expected = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln()) / 4f64.ln();
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 0.406).abs() < 1e-3);
    }

    #[test]
    fn entropy_clamps_out_of_bounds() {
        let grid = GridSpec::new(vec![(0.0, 1.0)], 2).unwrap();
        let (_, clamped) = entropy_report(&[v(&[5]), v(&[0])], &grid).unwrap();
        assert_eq!(clamped, 1);
    }

    #[test]
    fn epsilon_identities() {
        let a = vec![v(&[1, 2]), v(&[2, 1])];
        assert_eq!(epsilon_indicator(&a, &a).unwrap(), 0.0);
        assert_eq!(epsilon_indicator(&[v(&[2, 2])], &[v(&[1, 1])]).unwrap(), 1.0);
        assert_eq!(epsilon_indicator(&[v(&[0, 3]), v(&[3, 0])], &[v(&[1, 1])]).unwrap(), 2.0);
    }

    #[test]
    fn epsilon_never_increases_when_adding_points() {
        let r = vec![v(&[0, 0])];
        let a1 = vec![v(&[5, 1])];
        let a2 = vec![v(&[5, 1]), v(&[1, 2])];
        assert!(epsilon_indicator(&a2, &r).unwrap() <= epsilon_indicator(&a1, &r).unwrap());
    }

    #[test]
    fn scaled_epsilon_divides_by_box_width() {
        let a = vec![v(&[2, 2])];
        let r = vec![v(&[0, 0])];
        let eps = epsilon_indicator_scaled(&a, &r, &[(0.0, 4.0), (0.0, 8.0)]).unwrap();
        assert!((eps - 0.5).abs() < 1e-12);
    }
}
