//! Perron data of `[P]_A`, the local chain and separation tables.
//!
//! Everything time-dependent is carried in the rescaled form
//! `w_t = μ_t^α / λ^t` restricted to `A`. The recursion
//! `w_{t+1} = w_t [P]_A / λ` stays bounded (it converges to `(α·γ) μ*`), so
//! long horizons never underflow.

use serde::Serialize;

use crate::chain::{Distribution, MarkovChain, SubChain};
use crate::error::{Error, Result};
use crate::linalg::{dot, l1_distance, mat_vec, powi, sum, vec_mat};

/// Successive-iterate L1 tolerance of the power iteration.
pub const POWER_TOL: f64 = 1e-13;
pub const POWER_MAX_ITER: usize = 1_000_000;
/// Eigen-residual bound every accepted triple satisfies.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

/// Principal eigenvalue `λ`, quasi-stationary law `μ*` and right
/// eigenvector `γ` (normalized so that `μ*·γ = 1`), all indexed by `A`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralTriple {
    pub lambda: f64,
    pub mu_star: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `‖μ*[P]_A − λμ*‖₁`.
    pub left_residual: f64,
    /// `‖[P]_Aγ − λγ‖∞ / ‖γ‖∞`.
    pub right_residual: f64,
    pub iterations: usize,
}

impl SpectralTriple {
    pub fn mu_star_distribution(&self) -> Distribution {
        Distribution::from_raw(self.mu_star.clone())
    }

    pub fn min_gamma(&self) -> f64 {
        self.gamma.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mean relaxation time `T = 1/(1-λ)`.
    pub fn relaxation_time(&self) -> f64 {
        1.0 / (1.0 - self.lambda)
    }

    /// Eigen-residuals recomputed against `sub`.
    pub fn residuals(&self, sub: &SubChain) -> (f64, f64) {
        let left = vec_mat(&self.mu_star, sub.matrix());
        let l = left.iter().zip(&self.mu_star).map(|(a, b)| (a - self.lambda * b).abs()).sum();
        let right = mat_vec(sub.matrix(), &self.gamma);
        let gmax = self.gamma.iter().copied().fold(0.0, f64::max);
        let r = right
            .iter()
            .zip(&self.gamma)
            .map(|(a, b)| (a - self.lambda * b).abs())
            .fold(0.0, f64::max)
            / gmax;
        (l, r)
    }
}

/// Deterministic power iteration on `[P]_A` from the left and the right.
pub fn principal_triple(sub: &SubChain) -> Result<SpectralTriple> {
    let n = sub.len();
    let m = sub.matrix();

    let (mu, left_iters) = power_iterate(n, |v| vec_mat(v, m))?;
    let (gamma_raw, right_iters) = power_iterate(n, |v| mat_vec(m, v))?;

    let lambda = sum(&vec_mat(&mu, m));
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Numerical(format!("principal eigenvalue {lambda} outside (0, 1)")));
    }
    if mu.iter().chain(&gamma_raw).any(|v| *v <= 0.0) {
        return Err(Error::Numerical("Perron vectors are not strictly positive".into()));
    }
    let scale = dot(&mu, &gamma_raw);
    let gamma: Vec<f64> = gamma_raw.iter().map(|g| g / scale).collect();

    let mut triple = SpectralTriple {
        lambda,
        mu_star: mu,
        gamma,
        left_residual: 0.0,
        right_residual: 0.0,
        iterations: left_iters.max(right_iters),
    };
    let (l, r) = triple.residuals(sub);
    triple.left_residual = l;
    triple.right_residual = r;
    if l > EIGEN_RESIDUAL_TOL || r > EIGEN_RESIDUAL_TOL {
        return Err(Error::NonConvergence { iterations: triple.iterations, residual: l.max(r) });
    }
    Ok(triple)
}

/// Iterates `v ↦ apply(v)/Σ apply(v)` from the uniform vector until the L1
/// change drops below [`POWER_TOL`].
fn power_iterate(n: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> Result<(Vec<f64>, usize)> {
    let mut v = vec![1.0 / n as f64; n];
    let mut diff = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        let mut next = apply(&v);
        let total = sum(&next);
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Numerical(format!("power iteration collapsed (mass {total})")));
        }
        next.iter_mut().for_each(|x| *x /= total);
        diff = l1_distance(&next, &v);
        v = next;
        if diff <= POWER_TOL {
            return Ok(polish(v, it, diff, &apply));
        }
    }
    Err(Error::NonConvergence { iterations: POWER_MAX_ITER, residual: diff })
}

/// Keeps iterating past the stopping tolerance until the change stalls, so
/// the eigenvector is accurate to rounding rather than to [`POWER_TOL`].
fn polish(mut v: Vec<f64>, mut it: usize, mut best: f64, apply: &impl Fn(&[f64]) -> Vec<f64>) -> (Vec<f64>, usize) {
    let budget = it.max(50);
    let mut stalls = 0;
    for _ in 0..budget {
        if best == 0.0 || stalls >= 3 {
            break;
        }
        let mut next = apply(&v);
        let total = sum(&next);
        next.iter_mut().for_each(|x| *x /= total);
        let diff = l1_distance(&next, &v);
        v = next;
        it += 1;
        if diff < 0.5 * best {
            best = diff;
            stalls = 0;
        } else {
            stalls += 1;
        }
    }
    (v, it)
}

/// Doob transform `P̃(x,y) = γ(y)P(x,y)/(γ(x)λ)` and its invariant law
/// `ν = μ*γ`.
#[derive(Debug, Clone, Serialize)]
pub struct LocalChain {
    pub p_tilde: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
}

pub fn local_chain(sub: &SubChain, triple: &SpectralTriple) -> LocalChain {
    let n = sub.len();
    let m = sub.matrix();
    let g = &triple.gamma;
    let p_tilde = (0..n)
        .map(|x| (0..n).map(|y| g[y] * m[(x, y)] / (g[x] * triple.lambda)).collect())
        .collect();
    let nu = triple.mu_star.iter().zip(g).map(|(m, g)| m * g).collect();
    LocalChain { p_tilde, nu }
}

impl LocalChain {
    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// `P̃^t` by repeated multiplication.
    pub fn power(&self, t: usize) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut acc: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        for _ in 0..t {
            acc = acc
                .iter()
                .map(|row| (0..n).map(|j| (0..n).map(|k| row[k] * self.p_tilde[k][j]).sum()).collect())
                .collect();
        }
        acc
    }
}

/// Hitting distribution on `G` from `μ*`, indexed like the goal states.
pub fn hitting_measure(sub: &SubChain, triple: &SpectralTriple) -> Distribution {
    let flow = vec_mat(&triple.mu_star, sub.exit());
    Distribution::from_raw(flow.into_iter().map(|f| f / (1.0 - triple.lambda)).collect())
}

/// `α·γ = λ^δ` and the time shift `δ = log_λ(α·γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeShift {
    pub factor: f64,
    pub delta: f64,
}

fn check_alpha(alpha: &Distribution, triple: &SpectralTriple) -> Result<()> {
    if alpha.len() != triple.mu_star.len() {
        return Err(Error::InvalidDistribution(format!(
            "initial law has {} entries, transient set has {}",
            alpha.len(),
            triple.mu_star.len()
        )));
    }
    Ok(())
}

/// Time shift of an initial law on `A`.
pub fn time_shift(alpha: &Distribution, triple: &SpectralTriple) -> Result<TimeShift> {
    check_alpha(alpha, triple)?;
    let factor = dot(alpha.weights(), &triple.gamma);
    Ok(TimeShift { factor, delta: factor.ln() / triple.lambda.ln() })
}

/// Tilted law `α̃(x) = α(x)γ(x)/(α·γ)` for the local chain.
pub fn tilt(alpha: &Distribution, triple: &SpectralTriple) -> Result<Distribution> {
    let shift = time_shift(alpha, triple)?;
    Ok(Distribution::from_raw(
        alpha.weights().iter().zip(&triple.gamma).map(|(a, g)| a * g / shift.factor).collect(),
    ))
}

/// Separation of the tilted local chain from `ν`, for one initial law.
///
/// Pointwise values `s̃(t,y) = 1 − w_t(y)/((α·γ)μ*(y))` are stored
/// unclamped; they can be negative. Only the maximum over `y` lies in
/// `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SeparationTable {
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub shift: TimeShift,
    mu_star: Vec<f64>,
    w: Vec<Vec<f64>>,
    sep_pointwise: Vec<Vec<f64>>,
    sep: Vec<f64>,
}

impl SeparationTable {
    /// Builds the table for `t = 0..=horizon`.
    pub fn new(sub: &SubChain, triple: &SpectralTriple, alpha: &Distribution, horizon: usize) -> Result<Self> {
        let shift = time_shift(alpha, triple)?;
        if !(shift.factor > 0.0) {
            return Err(Error::InvalidDistribution("initial law has no mass on the transient set".into()));
        }
        let mut table = SeparationTable {
            alpha: alpha.weights().to_vec(),
            lambda: triple.lambda,
            shift,
            mu_star: triple.mu_star.clone(),
            w: Vec::with_capacity(horizon + 1),
            sep_pointwise: Vec::with_capacity(horizon + 1),
            sep: Vec::with_capacity(horizon + 1),
        };
        table.push(alpha.weights().to_vec())?;
        table.extend(sub, horizon)?;
        Ok(table)
    }

    /// Grows the table up to `horizon` (no-op if already that long).
    pub fn extend(&mut self, sub: &SubChain, horizon: usize) -> Result<()> {
        while self.horizon() < horizon {
            let last = self.w.last().expect("table holds t = 0");
            let next: Vec<f64> = vec_mat(last, sub.matrix()).into_iter().map(|v| v / self.lambda).collect();
            self.push(next)?;
        }
        Ok(())
    }

    fn push(&mut self, w: Vec<f64>) -> Result<()> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite w at t = {}", self.w.len())));
        }
        let pointwise: Vec<f64> =
            w.iter().zip(&self.mu_star).map(|(w, m)| 1.0 - w / (self.shift.factor * m)).collect();
        self.sep.push(pointwise.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        self.sep_pointwise.push(pointwise);
        self.w.push(w);
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.w.len() - 1
    }

    /// `w_t = μ_t^α / λ^t` on `A`.
    pub fn w(&self, t: usize) -> &[f64] {
        &self.w[t]
    }

    /// `s̃(t)`, with the convention `s̃(−1) = 1`.
    pub fn sep(&self, t: isize) -> f64 {
        if t < 0 { 1.0 } else { self.sep[t as usize] }
    }

    pub fn sep_series(&self) -> &[f64] {
        &self.sep
    }

    pub fn sep_pointwise(&self, t: usize) -> &[f64] {
        &self.sep_pointwise[t]
    }

    /// `min_y w_t(y)/μ*(y)`, which equals `(α·γ)(1 − s̃(t))`.
    pub fn min_ratio(&self, t: usize) -> f64 {
        self.w[t].iter().zip(&self.mu_star).map(|(w, m)| w / m).fold(f64::INFINITY, f64::min)
    }

    /// `λ^{-t} P(τ_G > t)`.
    pub fn scaled_survival(&self, t: usize) -> f64 {
        sum(&self.w[t])
    }

    /// `λ^{-t} P(τ_{*,G} > t)` for a minimal CSQST.
    pub fn scaled_metastability_survival(&self, t: usize) -> f64 {
        self.scaled_survival(t) - self.min_ratio(t)
    }

    /// Leading term `λ^{t+δ}(1 − s̃(t)) = λ^t min_y w_t(y)/μ*(y)`.
    pub fn leading(&self, t: usize) -> f64 {
        powi(self.lambda, t) * self.min_ratio(t)
    }
}

/// Two-sided bound on `P(τ_G > t)` from the separation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RoughBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn rough_bounds(table: &SeparationTable, triple: &SpectralTriple, t: usize) -> Result<RoughBounds> {
    if t > table.horizon() {
        return Err(Error::Horizon(format!("t = {t} beyond table horizon {}", table.horizon())));
    }
    let base = powi(table.lambda, t) * table.shift.factor;
    let s = table.sep(t as isize);
    Ok(RoughBounds { lower: base * (1.0 - s), upper: base * (1.0 + s * (1.0 / triple.min_gamma() - 1.0)) })
}

/// Convenience bundle for one chain.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub sub: SubChain,
    pub triple: SpectralTriple,
}

impl Spectral {
    pub fn analyze(chain: &MarkovChain) -> Result<Self> {
        let sub = chain.restrict()?;
        let triple = principal_triple(&sub)?;
        Ok(Spectral { sub, triple })
    }

    pub fn table(&self, alpha: &Distribution, horizon: usize) -> Result<SeparationTable> {
        SeparationTable::new(&self.sub, &self.triple, alpha, horizon)
    }

    pub fn dirac_table(&self, x: usize, horizon: usize) -> Result<SeparationTable> {
        self.table(&Distribution::dirac(self.sub.len(), x), horizon)
    }
}
