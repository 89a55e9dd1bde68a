//! Dominance filtering and front-quality indicators (minimization).

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::numerics::sqrt;

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Mutually nondominated points, sorted lexicographically, no duplicates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParetoFront {
    points: Vec<Vec<f64>>,
}

impl ParetoFront {
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let m = points.first().map_or(0, |p| p.len());
    for (i, p) in points.iter().enumerate() {
        if p.len() != m {
            bail!(Shape, "point {i} has {} objectives, expected {m}", p.len());
        }
        if p.iter().any(|v| !v.is_finite()) {
            bail!(Numeric, "point {i} has a non-finite coordinate");
        }
    }
    Ok(m)
}

/// Keeps exactly the nondominated points.
///
/// After a lexicographic sort a point can only be dominated by points before
/// it, and if it is dominated at all then some kept point dominates it, so one
/// pass against the kept set suffices.
pub fn nondominated_filter(points: &[Vec<f64>]) -> Result<ParetoFront> {
    check_points(points)?;
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| lex_cmp(a, b));
    sorted.dedup();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for p in sorted {
        if !kept.iter().any(|q| dominates(q, p)) {
            kept.push(p.clone());
        }
    }
    Ok(ParetoFront { points: kept })
}

fn clip_to_reference(points: &[Vec<f64>], reference: &[f64]) -> Vec<Vec<f64>> {
    let mut clipped = 0usize;
    let out = points
        .iter()
        .map(|p| {
            p.iter()
                .zip(reference)
                .map(|(&v, &r)| {
                    if v > r {
                        clipped += 1;
                        r
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    if clipped > 0 {
        log::warn!("clipped {clipped} coordinates to the hypervolume reference point");
    }
    out
}

/// 2D sweep over a front sorted by the first objective.
fn hv2(front: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, p) in front.iter().enumerate() {
        let next_x = front.get(i + 1).map_or(reference[0], |q| q[0]);
        total += (next_x - p[0]) * (reference[1] - p[1]);
    }
    total
}

/// Exact hypervolume dominated by `points` inside the box bounded by
/// `reference`. Supports one to three objectives; points outside the box are
/// clipped onto it.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    let m = reference.len();
    if points.is_empty() {
        return Ok(0.0);
    }
    if check_points(points)? != m {
        bail!(Shape, "points have {} objectives, reference has {m}", points[0].len());
    }
    if m == 0 || m > 3 {
        bail!(Unsupported, "exact hypervolume supports 1 to 3 objectives, got {m}");
    }
    let clipped = clip_to_reference(points, reference);
    let front = nondominated_filter(&clipped)?.into_points();
    Ok(match m {
        1 => reference[0] - front[0][0],
        2 => hv2(&front, reference),
        _ => {
            // slabs between consecutive third coordinates, each with the 2D
            // front of every point at or below the slab
            let mut by_z = front;
            by_z.sort_by(|a, b| a[2].total_cmp(&b[2]));
            let mut active: Vec<Vec<f64>> = Vec::new();
            let mut total = 0.0;
            for (i, p) in by_z.iter().enumerate() {
                active.push(vec![p[0], p[1]]);
                let top = by_z.get(i + 1).map_or(reference[2], |q| q[2]);
                if top > p[2] {
                    let slab = nondominated_filter(&active)?;
                    total += hv2(slab.points(), &reference[..2]) * (top - p[2]);
                    active = slab.into_points();
                }
            }
            total
        }
    })
}

/// Monte Carlo hypervolume estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

pub const MC_MIN_SAMPLES: usize = 10_000;

/// Fraction of uniform points in `[0, reference]` dominated (weakly) by some
/// front point, scaled by the box volume.
pub fn hypervolume_mc<R: Rng + ?Sized>(points: &[Vec<f64>], reference: &[f64], samples: usize, rng: &mut R) -> Result<McEstimate> {
    if samples < MC_MIN_SAMPLES {
        bail!(Parameter, "need at least {MC_MIN_SAMPLES} samples, got {samples}");
    }
    if points.is_empty() {
        return Ok(McEstimate { estimate: 0.0, stderr: 0.0 });
    }
    if check_points(points)? != reference.len() {
        bail!(Shape, "points and reference point disagree on the number of objectives");
    }
    let front = clip_to_reference(points, reference);
    let volume: f64 = reference.iter().product();
    let mut x = vec![0.0; reference.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (xi, &r) in x.iter_mut().zip(reference) {
            *xi = rng.random::<f64>() * r;
        }
        if front.iter().any(|p| p.iter().zip(&x).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    Ok(McEstimate { estimate: p * volume, stderr: volume * sqrt(p * (1.0 - p) / n) })
}

fn euclid_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| if x > y { (x - y) * (x - y) } else { 0.0 }).sum()
}

fn generational(p: &[Vec<f64>], s: &[Vec<f64>], dist_sq: fn(&[f64], &[f64]) -> f64) -> Result<f64> {
    if p.is_empty() || s.is_empty() {
        bail!(Parameter, "generational distance needs two nonempty sets");
    }
    let m = check_points(p)?;
    if check_points(s)? != m {
        bail!(Shape, "point sets disagree on the number of objectives");
    }
    let total: f64 = p
        .iter()
        .map(|a| s.iter().map(|b| dist_sq(a, b)).fold(f64::INFINITY, f64::min))
        .sum();
    Ok(sqrt(total) / p.len() as f64)
}

/// `GD(P, S) = (1/|P|) * sqrt(sum_{p in P} min_{s in S} d(p, s)^2)`.
pub fn gd(p: &[Vec<f64>], s: &[Vec<f64>]) -> Result<f64> {
    generational(p, s, euclid_sq)
}

pub fn igd(p: &[Vec<f64>], s: &[Vec<f64>]) -> Result<f64> {
    gd(s, p)
}

/// GD with `d+(p, s) = sqrt(sum_k max(p_k - s_k, 0)^2)`.
pub fn gd_plus(p: &[Vec<f64>], s: &[Vec<f64>]) -> Result<f64> {
    generational(p, s, plus_sq)
}

pub fn igd_plus(p: &[Vec<f64>], s: &[Vec<f64>]) -> Result<f64> {
    gd_plus(s, p)
}
