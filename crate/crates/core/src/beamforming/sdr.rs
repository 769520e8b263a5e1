//! Log-barrier Newton solver for the convex SDR subproblem
//!
//! `min  -sum_u log2(sigma^2 + sum_{v in S_u} Tr(H_{v,u} W_v)) + sum_v Tr(C_v W_v)`
//! `s.t. W_v >= 0,  sum_{v in cell m} Tr(Q_m W_v) <= P`
//!
//! where `S_u` is user `u`'s own stream plus the streams counted by the
//! interference mask. Each Hermitian block is parametrized by its `K^2`
//! real coordinates (diagonal, then real and imaginary parts above it).
//! Internally `W = (P / q_m) X` and the noise is scaled to one.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use num_complex::Complex64;

use super::rates::quadratic_form;
use super::{CovarianceSet, EffectiveChannels, InterferenceMask};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hpd_inverse, real_spd_solve, CMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Barrier weight of the first centering step.
    pub initial_t: f64,
    /// Factor applied to the barrier weight after each centering.
    pub growth: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
    /// Stop once the duality gap bound is below `gap_tol * max(1, |f|)`.
    pub gap_tol: f64,
    pub max_newton_per_center: usize,
    pub max_centerings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            initial_t: 1.0,
            growth: 10.0,
            newton_tol: 1e-8,
            gap_tol: 1e-7,
            max_newton_per_center: 100,
            max_centerings: 40,
        }
    }
}

/// One convexified subproblem.
#[derive(Debug, Clone)]
pub struct Subproblem<'a> {
    pub channels: &'a EffectiveChannels,
    pub noise: f64,
    pub power_budget: f64,
    pub mask: InterferenceMask,
    /// `C_v`, one Hermitian PSD matrix per block, in bits per unit of `W`.
    pub linear: Vec<CMatrix>,
}

impl Subproblem<'_> {
    /// Whether block `(source, stream)` contributes to user `(cell, user)`'s
    /// numerator term.
    pub fn in_total(&self, source: usize, stream: usize, cell: usize, user: usize) -> bool {
        (source == cell && stream == user) || self.mask.counts(source, stream, cell, user)
    }

    /// Objective in bits at an arbitrary set of blocks.
    pub fn objective(&self, cov: &CovarianceSet) -> f64 {
        let layout = &self.channels.layout;
        let mut value = 0.0;
        for u in 0..layout.total() {
            let (m, k) = layout.locate(u);
            let mut total = self.noise;
            for i in 0..layout.cells() {
                for j in 0..layout.users_in(i) {
                    if self.in_total(i, j, m, k) {
                        total += quadratic_form(&cov.blocks[layout.index(i, j)], self.channels.by_index(i, u));
                    }
                }
            }
            value -= libm::log2(total);
        }
        for (c, w) in self.linear.iter().zip(&cov.blocks) {
            value += c.trace_product_re(w);
        }
        value
    }

    /// `sum_k Tr(Q_m W_{m,k})` for every cell.
    pub fn cell_powers(&self, cov: &CovarianceSet) -> Vec<f64> {
        let layout = &self.channels.layout;
        (0..layout.cells())
            .map(|m| {
                (0..layout.users_in(m))
                    .map(|k| self.channels.grams[m].trace_product_re(&cov.blocks[layout.index(m, k)]))
                    .sum()
            })
            .collect()
    }
}

/// Optimality residuals of a returned point, relative where noted.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// Lagrangian gradient, relative to `1 + ||grad||_inf`.
    pub stationarity: f64,
    /// `sum |Tr(Z X)| + sum lambda s`, relative to `1 + |f|`.
    pub complementarity: f64,
    /// Budget excess (relative to `P`) or negative eigenvalue of `X`.
    pub primal_infeasibility: f64,
    /// Most negative eigenvalue of a dual block, relative to its norm.
    pub dual_infeasibility: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .max(self.complementarity)
            .max(self.primal_infeasibility)
            .max(self.dual_infeasibility)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub covariances: CovarianceSet,
    /// Objective in bits, see [`Subproblem::objective`].
    pub objective: f64,
    pub kkt: KktReport,
    pub newton_steps: usize,
}

/// Number of real coordinates of a `k x k` Hermitian block.
fn dim(k: usize) -> usize {
    k * k
}

/// Linear functional `X -> Tr(A X)` in block coordinates.
fn coefficients(a: &CMatrix, out: &mut [f64]) {
    let k = a.rows();
    for i in 0..k {
        out[i] = a[(i, i)].re;
    }
    let mut idx = k;
    for i in 0..k {
        for j in (i + 1)..k {
            let z = a[(i, j)] + a[(j, i)].conj();
            // Tr(A E_re) = 2 Re A_ij, Tr(A E_im) = 2 Im A_ij for Hermitian A.
            out[idx] = z.re;
            out[idx + 1] = z.im;
            idx += 2;
        }
    }
}

fn hermitian_from(x: &[f64], k: usize) -> CMatrix {
    let mut a = CMatrix::zeros(k, k);
    for i in 0..k {
        a[(i, i)] = Complex64::new(x[i], 0.0);
    }
    let mut idx = k;
    for i in 0..k {
        for j in (i + 1)..k {
            a[(i, j)] = Complex64::new(x[idx], x[idx + 1]);
            a[(j, i)] = Complex64::new(x[idx], -x[idx + 1]);
            idx += 2;
        }
    }
    a
}

/// Hermitian `G` with `coefficients(G) = g`.
fn gradient_matrix(g: &[f64], k: usize) -> CMatrix {
    let mut a = CMatrix::zeros(k, k);
    for i in 0..k {
        a[(i, i)] = Complex64::new(g[i], 0.0);
    }
    let mut idx = k;
    for i in 0..k {
        for j in (i + 1)..k {
            a[(i, j)] = Complex64::new(0.5 * g[idx], 0.5 * g[idx + 1]);
            a[(j, i)] = a[(i, j)].conj();
            idx += 2;
        }
    }
    a
}

/// Basis matrices `E_a` of the block coordinates as sparse `(p, q, value)`.
fn basis(k: usize) -> Vec<Vec<(usize, usize, Complex64)>> {
    let one = Complex64::new(1.0, 0.0);
    let j = Complex64::new(0.0, 1.0);
    let mut out: Vec<Vec<_>> = (0..k).map(|i| alloc::vec![(i, i, one)]).collect();
    for p in 0..k {
        for q in (p + 1)..k {
            out.push(alloc::vec![(p, q, one), (q, p, one)]);
            out.push(alloc::vec![(p, q, j), (q, p, -j)]);
        }
    }
    out
}

struct Block {
    offset: usize,
    size: usize,
    cell: usize,
}

/// The subproblem in scaled coordinates.
struct Scaled {
    blocks: Vec<Block>,
    n: usize,
    cells: usize,
    /// Per user: coefficients of `T_u - 1`.
    totals: Vec<Vec<f64>>,
    linear: Vec<f64>,
    /// Per cell: coefficients of the normalized power.
    power: Vec<Vec<f64>>,
    /// `W = scale[m] X` for blocks of cell `m`.
    scale: Vec<f64>,
    bases: Vec<Vec<Vec<(usize, usize, Complex64)>>>,
}

impl Scaled {
    fn new(problem: &Subproblem) -> Result<Self> {
        let eff = problem.channels;
        let layout = &eff.layout;
        let cells = layout.cells();
        if !(problem.power_budget > 0.0) || !(problem.noise > 0.0) {
            return Err(Error::Domain("power budget and noise must be positive"));
        }
        if problem.linear.len() != layout.total() {
            return Err(Error::DimensionMismatch(format!(
                "{} linear terms for {} users",
                problem.linear.len(),
                layout.total()
            )));
        }
        let mut blocks = Vec::with_capacity(layout.total());
        let mut n = 0;
        for u in 0..layout.total() {
            let (m, _) = layout.locate(u);
            let size = layout.users_in(m);
            blocks.push(Block { offset: n, size, cell: m });
            n += dim(size);
        }
        let scale: Vec<f64> = (0..cells)
            .map(|m| {
                let q_bar = eff.grams[m].trace().re / layout.users_in(m) as f64;
                problem.power_budget / q_bar
            })
            .collect();
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Domain("analog Gram matrix has no power"));
        }
        let mut totals = Vec::with_capacity(layout.total());
        for u in 0..layout.total() {
            let (m, k) = layout.locate(u);
            let mut c = alloc::vec![0.0; n];
            for i in 0..cells {
                let g_scale = libm::sqrt(scale[i] / problem.noise);
                for j in 0..layout.users_in(i) {
                    if problem.in_total(i, j, m, k) {
                        let g: Vec<Complex64> = eff.by_index(i, u).iter().map(|z| z * g_scale).collect();
                        let b = &blocks[layout.index(i, j)];
                        coefficients(&CMatrix::outer(&g), &mut c[b.offset..b.offset + dim(b.size)]);
                    }
                }
            }
            totals.push(c);
        }
        let mut linear = alloc::vec![0.0; n];
        for (b, c) in blocks.iter().zip(&problem.linear) {
            if c.rows() != b.size || c.cols() != b.size || !c.is_finite() {
                return Err(Error::DimensionMismatch(format!("linear term for a {} x {} block", b.size, b.size)));
            }
            coefficients(&c.scale(LN_2 * scale[b.cell]), &mut linear[b.offset..b.offset + dim(b.size)]);
        }
        let mut power = alloc::vec![alloc::vec![0.0; n]; cells];
        for b in &blocks {
            let q = eff.grams[b.cell].scale(scale[b.cell] / problem.power_budget);
            coefficients(&q, &mut power[b.cell][b.offset..b.offset + dim(b.size)]);
        }
        let bases = (0..=layout.max_users()).map(basis).collect();
        Ok(Self {
            blocks,
            n,
            cells,
            totals,
            linear,
            power,
            scale,
            bases,
        })
    }

    fn nu(&self) -> f64 {
        (self.blocks.iter().map(|b| b.size).sum::<usize>() + self.cells) as f64
    }

    fn start(&self) -> Vec<f64> {
        let mut x = alloc::vec![0.0; self.n];
        for b in &self.blocks {
            // Half of the budget, spread evenly: Tr(Q' X) = K alpha per block.
            let per_cell = self.blocks.iter().filter(|o| o.cell == b.cell).count() as f64;
            let alpha = 0.5 / (per_cell * b.size as f64);
            for i in 0..b.size {
                x[b.offset + i] = alpha;
            }
        }
        x
    }

    fn objective(&self, x: &[f64]) -> Option<f64> {
        let mut f = dot(&self.linear, x);
        for c in &self.totals {
            let t = 1.0 + dot(c, x);
            if !(t > 0.0) {
                return None;
            }
            f -= libm::log(t);
        }
        Some(f)
    }

    /// Barrier function `t f - sum ln det X - sum ln slack`, `None` outside
    /// the interior.
    fn barrier(&self, x: &[f64], t: f64) -> Option<f64> {
        let mut value = t * self.objective(x)?;
        for b in &self.blocks {
            let (_, log_det) = hpd_inverse(&hermitian_from(&x[b.offset..], b.size))?;
            value -= log_det;
        }
        for p in &self.power {
            let slack = 1.0 - dot(p, x);
            if !(slack > 0.0) {
                return None;
            }
            value -= libm::log(slack);
        }
        value.is_finite().then_some(value)
    }

    /// Gradient and Hessian of the barrier function (row-major).
    fn derivatives(&self, x: &[f64], t: f64) -> Option<(Vec<f64>, Vec<f64>, Vec<CMatrix>)> {
        let n = self.n;
        let mut g: Vec<f64> = self.linear.iter().map(|c| t * c).collect();
        let mut h = alloc::vec![0.0; n * n];
        for c in &self.totals {
            let tu = 1.0 + dot(c, x);
            let w = t / (tu * tu);
            let nz: Vec<usize> = (0..n).filter(|&a| c[a] != 0.0).collect();
            for &a in &nz {
                g[a] -= t * c[a] / tu;
                for &b in &nz {
                    h[a * n + b] += w * c[a] * c[b];
                }
            }
        }
        let mut inverses = Vec::with_capacity(self.blocks.len());
        let mut coef = alloc::vec![0.0; dim(self.bases.len())];
        for blk in &self.blocks {
            let (k, off) = (blk.size, blk.offset);
            let (y, _) = hpd_inverse(&hermitian_from(&x[off..], k))?;
            let d = dim(k);
            coefficients(&y, &mut coef[..d]);
            for a in 0..d {
                g[off + a] -= coef[a];
            }
            for (a, ea) in self.bases[k].iter().enumerate() {
                // Y E_a Y = sum value * Y[:, p] Y[q, :].
                let m = CMatrix::from_fn(k, k, |r, s| {
                    ea.iter().map(|&(p, q, v)| v * y[(r, p)] * y[(q, s)]).sum()
                });
                coefficients(&m, &mut coef[..d]);
                for b in 0..d {
                    h[(off + a) * n + off + b] += coef[b];
                }
            }
            inverses.push(y);
        }
        for p in &self.power {
            let slack = 1.0 - dot(p, x);
            if !(slack > 0.0) {
                return None;
            }
            let nz: Vec<usize> = (0..n).filter(|&a| p[a] != 0.0).collect();
            for &a in &nz {
                g[a] += p[a] / slack;
                for &b in &nz {
                    h[a * n + b] += p[a] * p[b] / (slack * slack);
                }
            }
        }
        Some((g, h, inverses))
    }

    /// Residuals with duals recovered from the final barrier point.
    /// `Z_v` is the block of `grad f + sum_m lambda_m grad p_m`, so
    /// stationarity holds up to rounding. `lambda_m` comes from the
    /// centrality condition `Tr(Z_v X_v) = k_v / t` summed over the cell;
    /// `1 / (t s_m)` is used only for cells whose power is negligible,
    /// since a nearly tight slack cannot be resolved in `1 - p_m x`.
    /// What remains to check is `Z_v >= 0`, complementarity and primal
    /// feasibility.
    fn kkt(&self, x: &[f64], t: f64, f: f64) -> KktReport {
        let n = self.n;
        let mut grad = self.linear.clone();
        for c in &self.totals {
            let tu = 1.0 + dot(c, x);
            for a in 0..n {
                grad[a] -= c[a] / tu;
            }
        }
        let mut primal: f64 = 0.0;
        let mut gap = 0.0;
        let mut lambdas = Vec::with_capacity(self.power.len());
        for (m, p) in self.power.iter().enumerate() {
            let used = dot(p, x);
            let slack = 1.0 - used;
            primal = primal.max(-slack);
            let mut centred = 0.0;
            let mut size = 0;
            for blk in self.blocks.iter().filter(|b| b.cell == m) {
                let d = dim(blk.size);
                centred += dot(&grad[blk.offset..blk.offset + d], &x[blk.offset..blk.offset + d]);
                size += blk.size;
            }
            let lambda = if used > 0.5 {
                ((size as f64 / t - centred) / used).max(0.0)
            } else {
                1.0 / (t * slack.max(f64::MIN_POSITIVE))
            };
            gap += lambda * slack.max(0.0);
            lambdas.push(lambda);
        }
        for (p, lambda) in self.power.iter().zip(&lambdas) {
            for a in 0..n {
                grad[a] += lambda * p[a];
            }
        }
        let mut dual: f64 = 0.0;
        let mut residual: f64 = 0.0;
        let mut coef = alloc::vec![0.0; n];
        for blk in &self.blocks {
            let d = dim(blk.size);
            let z = gradient_matrix(&grad[blk.offset..blk.offset + d], blk.size);
            coefficients(&z, &mut coef[..d]);
            for a in 0..d {
                residual = residual.max((coef[a] - grad[blk.offset + a]).abs());
            }
            let xb = hermitian_from(&x[blk.offset..], blk.size);
            primal = primal.max(-hermitian_eigen(&xb).min_value());
            let eig = hermitian_eigen(&z);
            dual = dual.max(-eig.min_value() / (1.0 + eig.max_value().abs()));
            gap += z.trace_product_re(&xb).abs();
        }
        KktReport {
            stationarity: residual / (1.0 + max_abs(&grad)),
            complementarity: gap / (1.0 + f.abs()),
            primal_infeasibility: primal.max(0.0),
            dual_infeasibility: dual.max(0.0),
        }
    }

    fn covariances(&self, x: &[f64]) -> CovarianceSet {
        CovarianceSet {
            blocks: self
                .blocks
                .iter()
                .map(|b| hermitian_from(&x[b.offset..], b.size).scale(self.scale[b.cell]))
                .collect(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves the relaxed subproblem to the tolerances in `options`.
pub fn solve_relaxed_subproblem(problem: &Subproblem, options: &SolverOptions) -> Result<SubproblemSolution> {
    let scaled = Scaled::new(problem)?;
    let nu = scaled.nu();
    let mut x = scaled.start();
    let mut t = options.initial_t;
    let mut steps = 0;
    for _ in 0..options.max_centerings {
        center(&scaled, &mut x, t, options, &mut steps)?;
        let f = scaled.objective(&x).ok_or(Error::Domain("iterate left the domain"))?;
        if nu / t <= options.gap_tol * f.abs().max(1.0) {
            polish(&scaled, &mut x, t, &mut steps);
            let f = scaled.objective(&x).ok_or(Error::Domain("iterate left the domain"))?;
            let covariances = scaled.covariances(&x);
            let objective = problem.objective(&covariances);
            return Ok(SubproblemSolution {
                covariances,
                objective,
                kkt: scaled.kkt(&x, t, f),
                newton_steps: steps,
            });
        }
        t *= options.growth;
    }
    Err(Error::SolverNonConvergence {
        iterations: steps,
        residual: nu / t,
    })
}

/// Solves `H dx = -g` after symmetric diagonal scaling; variables of
/// nearly switched-off blocks carry curvature many orders of magnitude
/// above the rest.
fn newton_direction(h: &[f64], g: &[f64], n: usize) -> Option<Vec<f64>> {
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = h[i * n + i];
            if v > 0.0 {
                1.0 / libm::sqrt(v)
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled: Vec<f64> = (0..n * n).map(|idx| h[idx] * d[idx / n] * d[idx % n]).collect();
    let rhs: Vec<f64> = (0..n).map(|i| -g[i] * d[i]).collect();
    // Rounding can leave the scaled Hessian indefinite; add increasing
    // damping until the factorization succeeds.
    let mut damping = 0.0;
    for _ in 0..8 {
        if let Some(y) = real_spd_solve(&scaled, n, &rhs) {
            return Some(y.iter().zip(&d).map(|(a, b)| a * b).collect());
        }
        let next = if damping == 0.0 { 1e-14 } else { damping * 100.0 };
        for i in 0..n {
            scaled[i * n + i] += next - damping;
        }
        damping = next;
    }
    None
}

/// A few undamped Newton steps at the final weight, which drive the
/// stationarity residual from `O(decrement)` to `O(decrement^2)`.
fn polish(s: &Scaled, x: &mut Vec<f64>, t: f64, steps: &mut usize) {
    for _ in 0..4 {
        let Some((g, h, _)) = s.derivatives(x, t) else { return };
        let Some(dx) = newton_direction(&h, &g, s.n) else { return };
        if -dot(&g, &dx) < 1e-24 {
            return;
        }
        let mut alpha = 1.0;
        while alpha > 1e-3 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + alpha * d).collect();
            if s.barrier(&trial, t).is_some() {
                *x = trial;
                *steps += 1;
                break;
            }
            alpha *= 0.5;
        }
        if alpha <= 1e-3 {
            return;
        }
    }
}

fn center(s: &Scaled, x: &mut Vec<f64>, t: f64, options: &SolverOptions, steps: &mut usize) -> Result<()> {
    let n = s.n;
    for step in 0..options.max_newton_per_center {
        let (g, h, _) = s.derivatives(x, t).ok_or(Error::Domain("iterate left the domain"))?;
        let dx = newton_direction(&h, &g, n).ok_or(Error::SolverNonConvergence {
            iterations: *steps,
            residual: max_abs(&g),
        })?;
        let slope = dot(&g, &dx);
        let decrement_sq = -slope;
        *steps += 1;
        // Past a few steps in the quadratic region, rounding rather than
        // curvature limits the decrement; the point is centered enough.
        if decrement_sq / 2.0 <= options.newton_tol || (step >= 12 && decrement_sq < 1e-4) {
            return Ok(());
        }
        let current = s.barrier(x, t).ok_or(Error::Domain("iterate left the domain"))?;
        // Inside the quadratic region the full step is feasible and
        // decreasing; comparing barrier values there only adds rounding noise.
        let quadratic = decrement_sq < 0.0625;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + alpha * d).collect();
            if let Some(v) = s.barrier(&trial, t) {
                if quadratic || v <= current + 0.25 * alpha * slope {
                    *x = trial;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                return Err(Error::SolverNonConvergence {
                    iterations: *steps,
                    residual: decrement_sq,
                });
            }
        }
    }
    Err(Error::SolverNonConvergence {
        iterations: *steps,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::UserLayout;
    use crate::linalg::CVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_channels(rng: &mut ChaCha8Rng, counts: &[usize]) -> EffectiveChannels {
        let layout = UserLayout::new(counts.to_vec());
        let mut vectors = Vec::new();
        for &count in counts {
            for _ in 0..layout.total() {
                let v: CVector = (0..count)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 1e-3)
                    .collect();
                vectors.push(v);
            }
        }
        let grams = counts.iter().map(|&k| CMatrix::identity(k).scale(65.0)).collect();
        EffectiveChannels::from_parts(layout, vectors, grams).unwrap()
    }

    #[test]
    fn coefficient_round_trip() {
        let x = [0.5, 2.0, -1.0, 0.3, 0.7, -0.2, 0.1, 0.9, 1.5];
        let a = hermitian_from(&x, 3);
        assert!(a.hermitian_defect() == 0.0);
        let b = hermitian_from(&[1.0, 0.2, 3.0, 0.4, -0.5, 0.6, 0.7, -0.8, 0.9], 3);
        let mut c = [0.0; 9];
        coefficients(&b, &mut c);
        assert!((dot(&c, &x) - b.trace_product_re(&a)).abs() < 1e-12);
        for (idx, e) in basis(3).iter().enumerate() {
            let mut unit = [0.0; 9];
            unit[idx] = 1.0;
            let m = hermitian_from(&unit, 3);
            for &(p, q, v) in e {
                assert_eq!(m[(p, q)], v);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let eff = random_channels(&mut rng, &[2, 2]);
        let linear: Vec<CMatrix> = (0..4)
            .map(|u| CMatrix::outer(&eff.by_index(0, u).clone()).scale(1e4))
            .collect();
        let problem = Subproblem {
            channels: &eff,
            noise: 1e-9,
            power_budget: 1.0,
            mask: InterferenceMask::FULL,
            linear,
        };
        let s = Scaled::new(&problem).unwrap();
        let mut x = s.start();
        for v in x.iter_mut() {
            *v += rng.gen_range(-0.01..0.01);
        }
        let t = 3.0;
        let (g, h, _) = s.derivatives(&x, t).unwrap();
        let eps = 1e-6;
        for a in 0..s.n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[a] += eps;
            xm[a] -= eps;
            let fd = (s.barrier(&xp, t).unwrap() - s.barrier(&xm, t).unwrap()) / (2.0 * eps);
            assert!((fd - g[a]).abs() < 1e-4 * (1.0 + g[a].abs()), "grad {a}: {fd} vs {}", g[a]);
            let (gp, _, _) = s.derivatives(&xp, t).unwrap();
            let (gm, _, _) = s.derivatives(&xm, t).unwrap();
            for b in 0..s.n {
                let fd = (gp[b] - gm[b]) / (2.0 * eps);
                let an = h[b * s.n + a];
                assert!((fd - an).abs() < 1e-4 * (1.0 + an.abs()), "hess {a},{b}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn single_user_puts_power_on_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eff = random_channels(&mut rng, &[1]);
        let problem = Subproblem {
            channels: &eff,
            noise: 1e-9,
            power_budget: 2.0,
            mask: InterferenceMask::FULL,
            linear: alloc::vec![CMatrix::zeros(1, 1)],
        };
        let sol = solve_relaxed_subproblem(&problem, &SolverOptions::default()).unwrap();
        let w = sol.covariances.blocks[0][(0, 0)].re;
        assert!((w * 65.0 - 2.0).abs() < 1e-6, "{w}");
        assert!(sol.kkt.max_residual() < 1e-6, "{:?}", sol.kkt);
    }
}
