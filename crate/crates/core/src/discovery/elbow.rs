use serde::{Deserialize, Serialize};

use super::validity::ValidityScores;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elbow {
    pub k: usize,
    /// Set when the curve has no bend (every chord distance is zero).
    pub flat: bool,
    /// Normalized perpendicular distance to the chord, per input point.
    pub distances: Vec<f64>,
}

/// Knee of an inertia curve: the point farthest from the chord joining the
/// endpoints once both axes are min-max normalized. Ties go to the smaller
/// `k`; a curve without a bend returns the smallest `k` flagged as flat.
pub fn detect_elbow(ks: &[usize], inertia: &[f64]) -> Result<Elbow> {
    if ks.len() != inertia.len() {
        return Err(Error::DimensionMismatch {
            expected: ks.len(),
            got: inertia.len(),
        });
    }
    if ks.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "elbow detection needs at least 3 points, got {}",
            ks.len()
        )));
    }
    if ks.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::InvalidArgument(
            "elbow k values must be consecutive".into(),
        ));
    }
    if inertia.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("inertia curve".into()));
    }
    let (k0, k1) = (ks[0] as f64, ks[ks.len() - 1] as f64);
    let (lo, hi) = inertia
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let flat_result = || Elbow {
        k: ks[0],
        flat: true,
        distances: vec![0.0; ks.len()],
    };
    if hi - lo <= 0.0 {
        return Ok(flat_result());
    }
    let pts: Vec<(f64, f64)> = ks
        .iter()
        .zip(inertia)
        .map(|(&k, &v)| ((k as f64 - k0) / (k1 - k0), (v - lo) / (hi - lo)))
        .collect();
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = (dx * dx + dy * dy).sqrt();
    let distances: Vec<f64> = pts
        .iter()
        .map(|p| (dy * (p.0 - a.0) - dx * (p.1 - a.1)).abs() / len)
        .collect();
    let mut best = 0;
    for (i, &dist) in distances.iter().enumerate() {
        if dist > distances[best] {
            best = i;
        }
    }
    if distances[best] <= 1e-12 {
        return Ok(flat_result());
    }
    Ok(Elbow {
        k: ks[best],
        flat: false,
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    Elbow,
    Score,
    Coincident,
    /// No candidate was usable; no clusters are proposed.
    NoDiscovery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub k_star: usize,
    pub k_score: usize,
    pub k_elbow: Option<usize>,
    pub rule: SelectionRule,
}

/// Best composite per evaluated `k`, in ascending `k`.
pub(crate) fn best_by_k(per_k: &[ValidityScores]) -> Vec<(usize, f64)> {
    let mut best: Vec<(usize, f64)> = Vec::new();
    for s in per_k {
        match best.iter_mut().find(|(k, _)| *k == s.k) {
            Some(entry) if s.composite > entry.1 => entry.1 = s.composite,
            Some(_) => {}
            None => best.push((s.k, s.composite)),
        }
    }
    best.sort_by_key(|&(k, _)| k);
    best
}

/// Chooses `k_elbow` when its score is at least `tolerance · Q(k_score)`,
/// otherwise `k_score`. An elbow outside the evaluated range defers to the
/// score. `k_score` is the smallest `k` attaining the maximum composite.
pub fn select_k(
    per_k: &[ValidityScores],
    k_elbow: Option<usize>,
    tolerance: f64,
) -> Result<Selection> {
    let best = best_by_k(per_k);
    let Some(&(k_score, q_score)) =
        best.iter()
            .fold(None, |acc: Option<&(usize, f64)>, cur| match acc {
                Some(a) if a.1 >= cur.1 => Some(a),
                _ => Some(cur),
            })
    else {
        return Err(Error::EmptyInput("select_k needs at least one scored k"));
    };
    let elbow_q = k_elbow.and_then(|ke| best.iter().find(|(k, _)| *k == ke).map(|&(_, q)| q));
    let (k_star, rule) = match (k_elbow, elbow_q) {
        (Some(ke), _) if ke == k_score => (k_score, SelectionRule::Coincident),
        (Some(ke), Some(q)) if q >= tolerance * q_score => (ke, SelectionRule::Elbow),
        _ => (k_score, SelectionRule::Score),
    };
    Ok(Selection {
        k_star,
        k_score,
        k_elbow,
        rule,
    })
}
