//! Scalarization, preference sampling, objective normalization, constraint
//! gating and the multiple-gradient-descent solvers.
//!
//! The min-norm solver follows the usual Frank-Wolfe scheme over the simplex of
//! task weights: start from uniform weights, move towards the vertex with the
//! smallest inner product with the current combined gradient, and pick the
//! step with the exact two-point line search.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{bail, ensure_finite, ensure_len, Error, Result};
use crate::numerics::{axpy, dot, norm};

/// Point on the probability simplex weighting the objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preference(Vec<f64>);

impl Preference {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            bail!(Parameter, "empty preference vector");
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            bail!(Parameter, "preference weights must be finite and nonnegative: {weights:?}");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > Self::TOLERANCE {
            bail!(Parameter, "preference weights sum to {total}, not 1");
        }
        Ok(Self(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Concentration of the Dirichlet preference sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams(Vec<f64>);

impl DirichletParams {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.len() < 2 || beta.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            bail!(Parameter, "Dirichlet concentrations must be positive, at least two: {beta:?}");
        }
        Ok(Self(beta))
    }

    pub fn uniform(objectives: usize) -> Result<Self> {
        Self::new(vec![1.0; objectives])
    }

    pub fn beta(&self) -> &[f64] {
        &self.0
    }
}

/// Draws `r ~ Dir(beta)` by normalizing independent Gamma draws.
pub fn sample_preference<R: Rng + ?Sized>(beta: &DirichletParams, rng: &mut R) -> Preference {
    let gammas: Vec<Gamma<f64>> = beta.0.iter().map(|&b| Gamma::new(b, 1.0).expect("validated shape")).collect();
    loop {
        let draws: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            let mut w: Vec<f64> = draws.iter().map(|d| d / total).collect();
            // push the rounding residue onto the largest weight
            let resid = 1.0 - w.iter().sum::<f64>();
            let imax = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0);
            w[imax] += resid;
            return Preference(w);
        }
    }
}

fn binomial2(n: usize) -> usize {
    (n + 2) * (n + 1) / 2
}

/// Deterministic evaluation preferences.
///
/// Two objectives: `r_i = (i/(n-1), 1 - i/(n-1))`. Three objectives: the
/// simplex lattice with the smallest resolution `H` holding at least `n`
/// points, then an evenly strided subset of exactly `n` of them.
pub fn equidistant_preferences(objectives: usize, count: usize) -> Result<Vec<Preference>> {
    if count < 2 {
        bail!(Parameter, "need at least two preferences, got {count}");
    }
    match objectives {
        2 => Ok((0..count)
            .map(|i| {
                let a = i as f64 / (count - 1) as f64;
                Preference(vec![a, 1.0 - a])
            })
            .collect()),
        3 => {
            let mut h = 1;
            while binomial2(h) < count {
                h += 1;
            }
            let mut lattice = Vec::with_capacity(binomial2(h));
            for a in 0..=h {
                for b in 0..=h - a {
                    let c = h - a - b;
                    let hf = h as f64;
                    lattice.push(Preference(vec![a as f64 / hf, b as f64 / hf, c as f64 / hf]));
                }
            }
            let last = lattice.len() - 1;
            Ok((0..count).map(|j| lattice[j * last / (count - 1)].clone()).collect())
        }
        m => bail!(Unsupported, "equidistant preferences are defined for 2 or 3 objectives, got {m}"),
    }
}

/// `r^T L`.
pub fn scalarize(r: &Preference, losses: &[f64]) -> Result<f64> {
    ensure_len("loss vector", losses.len(), r.len())?;
    Ok(dot(r.weights(), losses))
}

/// Running extrema of detached objective evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    min: f64,
    max: f64,
    count: usize,
    /// Cleared at epoch boundaries when set.
    pub reset_each_epoch: bool,
}

/// A normalized value with its derivative with respect to the raw value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalized {
    pub value: f64,
    pub slope: f64,
    pub degenerate: bool,
}

impl NormStats {
    pub fn new(reset_each_epoch: bool) -> Self {
        Self { min: f64::INFINITY, max: f64::NEG_INFINITY, count: 0, reset_each_epoch }
    }

    pub fn from_values(values: &[f64], reset_each_epoch: bool) -> Self {
        let mut s = Self::new(reset_each_epoch);
        values.iter().for_each(|&v| s.observe(v));
        s
    }

    pub fn observe(&mut self, v: f64) {
        if v.is_finite() {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
            self.count += 1;
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.reset_each_epoch);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        (self.count > 0).then_some((self.min, self.max))
    }
}

/// `(v - min) / (max - min)` with the statistics held constant. Degenerate
/// statistics (`max == min`) give `0` with zero slope.
pub fn normalize_objective(value: f64, stats: &NormStats) -> Result<Normalized> {
    let Some((lo, hi)) = stats.bounds() else {
        bail!(State, "normalization statistics are empty");
    };
    let span = hi - lo;
    if !(span > 0.0) {
        return Ok(Normalized { value: 0.0, slope: 0.0, degenerate: true });
    }
    Ok(Normalized { value: (value - lo) / span, slope: 1.0 / span, degenerate: false })
}

/// `cos(r, L)` and its gradient with respect to `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosinePenalty {
    pub value: f64,
    pub grad_losses: Vec<f64>,
    pub degenerate: bool,
}

pub const COSINE_PENALTY_WEIGHT: f64 = 0.001;

pub fn cosine_penalty(r: &Preference, losses: &[f64]) -> Result<CosinePenalty> {
    ensure_len("loss vector", losses.len(), r.len())?;
    let (nr, nl) = (norm(r.weights()), norm(losses));
    if !(nr > 0.0) || !(nl > 0.0) {
        return Ok(CosinePenalty { value: 0.0, grad_losses: vec![0.0; losses.len()], degenerate: true });
    }
    let rl = dot(r.weights(), losses);
    let value = rl / (nr * nl);
    let grad_losses = r
        .weights()
        .iter()
        .zip(losses)
        .map(|(ri, li)| ri / (nr * nl) - rl * li / (nr * nl * nl * nl))
        .collect();
    Ok(CosinePenalty { value, grad_losses, degenerate: false })
}

pub const DEGENERATE_SEGMENT: f64 = 1e-12;

/// Minimizer over `gamma in [0, 1]` of `|gamma g1 + (1 - gamma) g2|^2`.
/// Returns `(gamma, degenerate)`; when `g1` and `g2` coincide every `gamma`
/// gives the same point and `0.5` is returned.
pub fn closed_form_gamma(g1: &[f64], g2: &[f64]) -> Result<(f64, bool)> {
    ensure_len("second gradient", g2.len(), g1.len())?;
    let diff_sq: f64 = g1.iter().zip(g2).map(|(a, b)| (a - b) * (a - b)).sum();
    if diff_sq < DEGENERATE_SEGMENT {
        return Ok((0.5, true));
    }
    let num: f64 = g1.iter().zip(g2).map(|(a, b)| (b - a) * b).sum();
    Ok(((num / diff_sq).clamp(0.0, 1.0), false))
}

/// Two-point line search from dot products: `tt = θᵀθ`, `tb = θᵀθ̄`,
/// `bb = θ̄ᵀθ̄`. Returns the weight on `θ`.
pub fn line_search_from_dots(tt: f64, tb: f64, bb: f64) -> f64 {
    if tb >= tt {
        1.0
    } else if tb >= bb {
        0.0
    } else {
        (bb - tb) / (tt - 2.0 * tb + bb)
    }
}

/// `argmin_{δ in [0,1]} |δθ + (1-δ)θ̄|^2` by the three-branch rule.
pub fn line_search_delta(theta: &[f64], theta_bar: &[f64]) -> Result<f64> {
    ensure_len("second vector", theta_bar.len(), theta.len())?;
    Ok(line_search_from_dots(dot(theta, theta), dot(theta, theta_bar), dot(theta_bar, theta_bar)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrankWolfeConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FrankWolfeConfig {
    fn default() -> Self {
        Self { max_iters: 10_000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrankWolfeResult {
    pub gamma: Vec<f64>,
    pub iterations: usize,
    /// `|sum_t gamma_t g_t|^2` at the start and after every iteration.
    pub norm_sq_history: Vec<f64>,
}

impl FrankWolfeResult {
    pub fn norm_sq(&self) -> f64 {
        *self.norm_sq_history.last().expect("history holds the initial point")
    }
}

/// Gram matrix `M_ij = g_iᵀ g_j`, summed in a fixed order.
pub fn gram_matrix(grads: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let t = grads.len();
    if t == 0 {
        bail!(Parameter, "no gradients");
    }
    let n = grads[0].len();
    for (i, g) in grads.iter().enumerate() {
        ensure_len("gradient", g.len(), n)?;
        ensure_finite(&alloc::format!("gradient {i}"), g)?;
    }
    let mut m = vec![vec![0.0; t]; t];
    for i in 0..t {
        for j in i..t {
            let v = dot(grads[i], grads[j]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

fn quad(m: &[Vec<f64>], gamma: &[f64]) -> f64 {
    gamma.iter().enumerate().map(|(i, gi)| gi * dot(&m[i], gamma)).sum()
}

/// Frank-Wolfe on a precomputed Gram matrix.
pub fn frank_wolfe_gram(m: &[Vec<f64>], cfg: &FrankWolfeConfig) -> Result<FrankWolfeResult> {
    let t = m.len();
    if t == 0 || m.iter().any(|row| row.len() != t) {
        bail!(Shape, "Gram matrix must be square and nonempty");
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        bail!(Numeric, "Gram matrix has non-finite entries");
    }
    let mut gamma = vec![1.0 / t as f64; t];
    let mut history = vec![quad(m, &gamma)];
    if t == 1 {
        return Ok(FrankWolfeResult { gamma, iterations: 0, norm_sq_history: history });
    }
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mg: Vec<f64> = m.iter().map(|row| dot(row, &gamma)).collect();
        let vertex = (0..t).min_by(|&a, &b| mg[a].total_cmp(&mg[b])).expect("t > 0");
        let tt = dot(&gamma, &mg);
        let keep = line_search_from_dots(tt, mg[vertex], m[vertex][vertex]);
        let step = 1.0 - keep;
        for g in gamma.iter_mut() {
            *g *= keep;
        }
        gamma[vertex] += step;
        history.push(quad(m, &gamma));
        if step < cfg.tol {
            break;
        }
    }
    Ok(FrankWolfeResult { gamma, iterations, norm_sq_history: history })
}

/// Weights of the min-norm point of the convex hull of `grads`.
pub fn frank_wolfe_gamma(grads: &[&[f64]], cfg: &FrankWolfeConfig) -> Result<FrankWolfeResult> {
    frank_wolfe_gram(&gram_matrix(grads)?, cfg)
}

/// `sum_t gamma_t g_t`.
pub fn mgd_direction(grads: &[&[f64]], gamma: &[f64]) -> Result<Vec<f64>> {
    ensure_len("gamma", gamma.len(), grads.len())?;
    let n = grads.first().map_or(0, |g| g.len());
    let mut out = vec![0.0; n];
    for (g, &w) in grads.iter().zip(gamma) {
        ensure_len("gradient", g.len(), n)?;
        axpy(w, g, &mut out);
    }
    Ok(out)
}

/// Which objectives stay active: objective 0 always; hardware objective `m`
/// is dropped once its normalized prediction is at or below its constraint.
/// A constraint of `0` never drops anything and `1` always drops.
pub fn active_objectives(predictions: &[f64], constraints: &[f64]) -> Result<Vec<bool>> {
    ensure_len("constraints", constraints.len(), predictions.len())?;
    if let Some(c) = constraints.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::Parameter(alloc::format!("constraint {c} outside [0, 1]")));
    }
    let mut out = vec![true];
    out.extend(predictions.iter().zip(constraints).map(|(&p, &c)| !(c >= 1.0 || (c > 0.0 && p <= c))));
    Ok(out)
}

/// Zeroes the gradient of every satisfied hardware constraint in place.
/// `grads[0]` is the accuracy gradient and is never touched.
pub fn gate_constrained_gradient(grads: &mut [Vec<f64>], predictions: &[f64], constraints: &[f64]) -> Result<Vec<bool>> {
    ensure_len("per-objective gradients", grads.len(), predictions.len() + 1)?;
    let active = active_objectives(predictions, constraints)?;
    for (g, &on) in grads.iter_mut().zip(&active) {
        if !on {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(active)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn preference_validation() {
        assert!(Preference::new(vec![0.3, 0.7]).is_ok());
        assert!(Preference::new(vec![0.3, 0.6]).is_err());
        assert!(Preference::new(vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn equidistant_examples() {
        let p = equidistant_preferences(2, 24).unwrap();
        assert_eq!(p.len(), 24);
        assert_eq!(p[0].weights(), &[0.0, 1.0]);
        assert_eq!(p[23].weights(), &[1.0, 0.0]);
        let p = equidistant_preferences(2, 3).unwrap();
        let w: Vec<_> = p.iter().map(|x| x.weights().to_vec()).collect();
        assert_eq!(w, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        for m in [2, 3] {
            let p = equidistant_preferences(m, 24).unwrap();
            assert_eq!(p.len(), 24);
            for (i, a) in p.iter().enumerate() {
                assert!(Preference::new(a.weights().to_vec()).is_ok());
                for b in &p[i + 1..] {
                    assert_ne!(a, b);
                }
            }
        }
        assert!(matches!(equidistant_preferences(4, 24), Err(Error::Unsupported(_))));
        assert!(equidistant_preferences(2, 1).is_err());
    }

    #[test]
    fn scalarize_examples() {
        let r = Preference::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(scalarize(&r, &[0.3, 0.9]).unwrap(), 0.3);
        let r = Preference::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(scalarize(&r, &[0.2, 0.8]).unwrap(), 0.5);
        let r = Preference::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(scalarize(&r, &[4.0, 8.0]).unwrap(), 7.0);
        assert!(scalarize(&r, &[1.0]).is_err());
    }

    #[test]
    fn normalization_examples() {
        let s = NormStats::from_values(&[2.0, 4.0, 6.0], false);
        assert_eq!(normalize_objective(4.0, &s).unwrap().value, 0.5);
        assert_eq!(normalize_objective(2.0, &s).unwrap().value, 0.0);
        assert_eq!(normalize_objective(6.0, &s).unwrap().value, 1.0);
        let h = 1e-5;
        let fd = (normalize_objective(4.0 + h, &s).unwrap().value - normalize_objective(4.0 - h, &s).unwrap().value) / (2.0 * h);
        assert!((fd - normalize_objective(4.0, &s).unwrap().slope).abs() < 1e-9);
        assert!(matches!(normalize_objective(1.0, &NormStats::new(true)), Err(Error::State(_))));
        let flat = NormStats::from_values(&[3.0, 3.0], false);
        let n = normalize_objective(3.0, &flat).unwrap();
        assert!(n.degenerate && n.value == 0.0);
    }

    #[test]
    fn cosine_examples() {
        let r = Preference::new(vec![0.5, 0.5]).unwrap();
        assert!((cosine_penalty(&r, &[2.0, 2.0]).unwrap().value - 1.0).abs() < 1e-15);
        let r = Preference::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(cosine_penalty(&r, &[0.0, 3.0]).unwrap().value, 0.0);
        assert!((cosine_penalty(&r, &[1.0, 1.0]).unwrap().value - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(cosine_penalty(&r, &[0.0, 0.0]).unwrap().degenerate);
    }

    #[test]
    fn closed_form_examples() {
        let (g, _) = closed_form_gamma(&[1.0, 0.0], &[0.0, 2.0]).unwrap();
        assert!((g - 0.8).abs() < 1e-15);
        let point: Vec<f64> = [1.0, 0.0].iter().zip(&[0.0, 2.0]).map(|(a, b)| g * a + (1.0 - g) * b).collect();
        assert!((point[0] - 0.8).abs() < 1e-15 && (point[1] - 0.4).abs() < 1e-15);
        assert_eq!(closed_form_gamma(&[1.0, 0.0], &[3.0, 0.0]).unwrap().0, 1.0);
        assert_eq!(closed_form_gamma(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), (0.5, true));
    }

    #[test]
    fn line_search_examples() {
        assert!((line_search_delta(&[1.0, 0.0], &[0.0, 2.0]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(line_search_delta(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(line_search_delta(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn frank_wolfe_examples() {
        let cfg = FrankWolfeConfig::default();
        let r = frank_wolfe_gamma(&[&[1.0, 0.0], &[0.0, 2.0]], &cfg).unwrap();
        assert!((r.gamma[0] - 0.8).abs() < 1e-4 && (r.gamma[1] - 0.2).abs() < 1e-4);
        let r = frank_wolfe_gamma(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]], &cfg).unwrap();
        let g = mgd_direction(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]], &r.gamma).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-4 && (g[1] - 0.5).abs() < 1e-4, "{g:?}");
        assert!((r.norm_sq() - 0.5).abs() < 1e-4);
        assert!(r.gamma[2] < 1e-3, "{:?}", r.gamma);
        let same = [0.3, -0.4];
        let r = frank_wolfe_gamma(&[&same, &same, &same], &cfg).unwrap();
        let g = mgd_direction(&[&same, &same, &same], &r.gamma).unwrap();
        assert!((norm(&g) - norm(&same)).abs() < 1e-12);
        assert_eq!(frank_wolfe_gamma(&[&[1.0, 2.0]], &cfg).unwrap().gamma, vec![1.0]);
        assert!(matches!(frank_wolfe_gamma(&[&[f64::NAN], &[1.0]], &cfg), Err(Error::Numeric(_))));
    }

    #[test]
    fn frank_wolfe_is_monotone_and_below_vertices() {
        let mut rng = seeded(21);
        for _ in 0..200 {
            let t = rng.random_range(2..7);
            let n = rng.random_range(1..21);
            let grads: Vec<Vec<f64>> = (0..t).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let refs: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
            let r = frank_wolfe_gamma(&refs, &FrankWolfeConfig::default()).unwrap();
            assert!((r.gamma.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(r.gamma.iter().all(|&g| g >= 0.0));
            for w in r.norm_sq_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            let vmin = grads.iter().map(|g| dot(g, g)).fold(f64::INFINITY, f64::min);
            assert!(r.norm_sq() <= vmin + 1e-9);
        }
    }

    #[test]
    fn min_norm_point_optimality() {
        let mut rng = seeded(22);
        for _ in 0..200 {
            let g1: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g2: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (gamma, _) = closed_form_gamma(&g1, &g2).unwrap();
            let d = mgd_direction(&[&g1, &g2], &[gamma, 1.0 - gamma]).unwrap();
            for g in [&g1, &g2] {
                assert!(dot(&d, g) >= dot(&d, &d) - 1e-6);
            }
        }
        // iterative solver: optimality up to its convergence level
        let cfg = FrankWolfeConfig { max_iters: 200_000, tol: 0.0 };
        for _ in 0..20 {
            let t = rng.random_range(3..5);
            let grads: Vec<Vec<f64>> = (0..t).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let refs: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
            let r = frank_wolfe_gamma(&refs, &cfg).unwrap();
            let d = mgd_direction(&refs, &r.gamma).unwrap();
            for g in &grads {
                assert!(dot(&d, g) >= dot(&d, &d) - 1e-4, "{} < {}", dot(&d, g), dot(&d, &d));
            }
        }
    }

    #[test]
    fn mgd_direction_examples() {
        let g1 = [1.0, 2.0];
        let g2 = [-1.0, -2.0];
        assert_eq!(mgd_direction(&[&g1, &g2], &[0.0, 1.0]).unwrap(), g2.to_vec());
        let r = frank_wolfe_gamma(&[&g1, &g2], &FrankWolfeConfig::default()).unwrap();
        assert_eq!(r.gamma, vec![0.5, 0.5]);
        assert_eq!(mgd_direction(&[&g1, &g2], &r.gamma).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn gating_examples() {
        let mut grads = vec![vec![1.0], vec![2.0]];
        assert_eq!(gate_constrained_gradient(&mut grads, &[0.9], &[1.0]).unwrap(), vec![true, false]);
        assert_eq!(grads[1], vec![0.0]);
        let mut grads = vec![vec![1.0], vec![2.0]];
        assert_eq!(gate_constrained_gradient(&mut grads, &[0.0], &[0.0]).unwrap(), vec![true, true]);
        assert_eq!(active_objectives(&[0.4], &[0.4]).unwrap(), vec![true, false]);
        assert_eq!(active_objectives(&[0.41], &[0.4]).unwrap(), vec![true, true]);
        assert!(active_objectives(&[0.4], &[1.2]).is_err());
    }

    #[test]
    fn dirichlet_means() {
        let mut rng = seeded(4);
        let n = 100_000;
        for (beta, expect) in [(vec![1.0, 1.0], 0.5), (vec![10.0, 1.0], 10.0 / 11.0)] {
            let p = DirichletParams::new(beta.clone()).unwrap();
            let (a, b) = (beta[0], beta[1]);
            let var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
            let mean = (0..n).map(|_| sample_preference(&p, &mut rng).weights()[0]).sum::<f64>() / n as f64;
            assert!((mean - expect).abs() < 3.0 * (var / n as f64).sqrt(), "{beta:?}: {mean}");
        }
    }

    #[test]
    fn dirichlet_uniform_marginal_ks() {
        let mut rng = seeded(8);
        let p = DirichletParams::uniform(2).unwrap();
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_preference(&p, &mut rng).weights()[0]).collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).abs().max((x - i as f64 / n as f64).abs()))
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }
}
