//! Reference checks for the relaxed beamforming subproblem, written against
//! nalgebra so they share no linear algebra with the solver.
//!
//! Every cell is whitened by the Cholesky factor of its Gram matrix,
//! `V = L^H W L`, which turns the power constraint into `sum_k Tr V_k <= P`.
//! The feasible set is then a product of trace-capped PSD cones, whose
//! projection acts on eigenvalues only.

#![allow(dead_code)]

use mixfield_core::beamforming::{CovarianceSet, Subproblem};
use mixfield_core::linalg::CMatrix;
use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub type Mat = DMatrix<Complex<f64>>;

pub fn to_na(m: &CMatrix) -> Mat {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn from_na(m: &Mat) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Problem data copied out of the solver's types.
pub struct Oracle {
    /// `(cell, user)` of every global user.
    users: Vec<(usize, usize)>,
    /// Global block index of every `(cell, user)`.
    offsets: Vec<usize>,
    counts: Vec<usize>,
    /// `h[source][u]`, effective channel of user `u` from `source`.
    h: Vec<Vec<DVector<Complex<f64>>>>,
    linear: Vec<Mat>,
    noise: f64,
    budget: f64,
    intra: bool,
    inter: bool,
    /// Lower Cholesky factor of every cell's Gram matrix.
    chol: Vec<Mat>,
}

impl Oracle {
    pub fn new(p: &Subproblem) -> Self {
        let layout = &p.channels.layout;
        let cells = layout.cells();
        let counts: Vec<usize> = (0..cells).map(|m| layout.users_in(m)).collect();
        let mut offsets = Vec::new();
        let mut users = Vec::new();
        let mut acc = 0;
        for (m, &k) in counts.iter().enumerate() {
            offsets.push(acc);
            acc += k;
            users.extend((0..k).map(|j| (m, j)));
        }
        let h = (0..cells)
            .map(|s| {
                (0..users.len())
                    .map(|u| DVector::from_vec(p.channels.by_index(s, u).clone()))
                    .collect()
            })
            .collect();
        let chol = p
            .channels
            .grams
            .iter()
            .map(|g| {
                let g = to_na(g);
                let g = (&g + g.adjoint()) * Complex::new(0.5, 0.0);
                g.cholesky().expect("Gram matrices are positive definite").l()
            })
            .collect();
        Self {
            users,
            offsets,
            counts,
            h,
            linear: p.linear.iter().map(to_na).collect(),
            noise: p.noise,
            budget: p.power_budget,
            intra: p.mask.intra,
            inter: p.mask.inter,
            chol,
        }
    }

    fn block(&self, cell: usize, user: usize) -> usize {
        self.offsets[cell] + user
    }

    fn contributes(&self, source: usize, stream: usize, cell: usize, user: usize) -> bool {
        if source == cell {
            stream == user || (self.intra && stream != user)
        } else {
            self.inter
        }
    }

    fn received(&self, w: &[Mat], u: usize) -> f64 {
        let (m, k) = self.users[u];
        let mut total = self.noise;
        for (s, &count) in self.counts.iter().enumerate() {
            for j in 0..count {
                if self.contributes(s, j, m, k) {
                    let h = &self.h[s][u];
                    total += (h.adjoint() * &w[self.block(s, j)] * h)[(0, 0)].re;
                }
            }
        }
        total
    }

    /// Minimized objective `-sum_u log2(total_u) + sum_v Re Tr(C_v W_v)`.
    pub fn objective(&self, w: &[Mat]) -> f64 {
        let mut f = 0.0;
        for u in 0..self.users.len() {
            f -= self.received(w, u).log2();
        }
        for (c, wv) in self.linear.iter().zip(w) {
            f += (c * wv).trace().re;
        }
        f
    }

    /// Hermitian gradient with respect to every block.
    fn gradient(&self, w: &[Mat]) -> Vec<Mat> {
        let mut g = self.linear.clone();
        for u in 0..self.users.len() {
            let (m, k) = self.users[u];
            let scale = 1.0 / (std::f64::consts::LN_2 * self.received(w, u));
            for (s, &count) in self.counts.iter().enumerate() {
                for j in 0..count {
                    if self.contributes(s, j, m, k) {
                        let h = &self.h[s][u];
                        g[self.block(s, j)] -= h * h.adjoint() * Complex::new(scale, 0.0);
                    }
                }
            }
        }
        g
    }

    /// `W = L^{-H} V L^{-1}` for every block.
    fn unwhiten(&self, v: &[Mat]) -> Vec<Mat> {
        let mut w = Vec::with_capacity(v.len());
        for (m, &count) in self.counts.iter().enumerate() {
            let l_inv = self.chol[m].clone().try_inverse().expect("invertible factor");
            for j in 0..count {
                w.push(l_inv.adjoint() * &v[self.block(m, j)] * &l_inv);
            }
        }
        w
    }

    fn whiten(&self, w: &[Mat]) -> Vec<Mat> {
        let mut v = Vec::with_capacity(w.len());
        for (m, &count) in self.counts.iter().enumerate() {
            let l = &self.chol[m];
            for j in 0..count {
                v.push(l.adjoint() * &w[self.block(m, j)] * l);
            }
        }
        v
    }

    /// Euclidean projection of whitened blocks onto `{V_k >= 0, sum Tr V_k <= P}` per cell.
    fn project(&self, v: &[Mat]) -> Vec<Mat> {
        let mut out = v.to_vec();
        for (m, &count) in self.counts.iter().enumerate() {
            let mut eig = Vec::new();
            let mut all = Vec::new();
            for j in 0..count {
                let b = &v[self.block(m, j)];
                let e = ((b + b.adjoint()) * Complex::new(0.5, 0.0)).symmetric_eigen();
                all.extend(e.eigenvalues.iter().copied());
                eig.push(e);
            }
            let shift = cap_shift(&all, self.budget);
            for (j, e) in eig.into_iter().enumerate() {
                let vals = e.eigenvalues.map(|x| Complex::new((x - shift).max(0.0), 0.0));
                let q = &e.eigenvectors;
                out[self.block(m, j)] = q * Mat::from_diagonal(&vals) * q.adjoint();
            }
        }
        out
    }

    pub fn is_feasible(&self, w: &[Mat], tol: f64) -> bool {
        let v = self.whiten(w);
        self.counts.iter().enumerate().all(|(m, &count)| {
            let mut trace = 0.0;
            for j in 0..count {
                let b = &v[self.block(m, j)];
                let e = ((b + b.adjoint()) * Complex::new(0.5, 0.0)).symmetric_eigen();
                if e.eigenvalues.min() < -tol * self.budget {
                    return false;
                }
                trace += b.trace().re;
            }
            trace <= self.budget * (1.0 + tol)
        })
    }

    /// Random feasible point: Wishart blocks per cell, scaled to a random
    /// share of the budget, half of them on the boundary.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Vec<Mat> {
        let mut v = Vec::new();
        for &count in &self.counts {
            let start = v.len();
            for _ in 0..count {
                let rank = rng.gen_range(1..=count);
                let g = Mat::from_fn(count, rank, |_, _| Complex::new(gauss(rng), gauss(rng)));
                v.push(&g * g.adjoint());
            }
            let trace: f64 = v[start..].iter().map(|b| b.trace().re).sum();
            let share = if rng.gen_bool(0.5) { 1.0 } else { rng.gen::<f64>() };
            let s = Complex::new(share * self.budget / trace, 0.0);
            for b in &mut v[start..] {
                *b *= s;
            }
        }
        self.unwhiten(&v)
    }

    /// Projected gradient with Armijo backtracking, started at `w`. Returns
    /// the best objective seen.
    pub fn refine(&self, w: &[Mat], iterations: usize) -> f64 {
        let mut v = self.project(&self.whiten(w));
        let mut f = self.objective(&self.unwhiten(&v));
        let mut step = f64::NAN;
        for _ in 0..iterations {
            let gw = self.gradient(&self.unwhiten(&v));
            // Chain rule through W = L^{-H} V L^{-1}.
            let mut gv = Vec::with_capacity(gw.len());
            for (m, &count) in self.counts.iter().enumerate() {
                let l_inv = self.chol[m].clone().try_inverse().expect("invertible factor");
                for j in 0..count {
                    gv.push(&l_inv * &gw[self.block(m, j)] * l_inv.adjoint());
                }
            }
            let norm: f64 = gv.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            if !step.is_finite() {
                step = self.budget / norm;
            }
            let mut improved = false;
            for _ in 0..60 {
                let trial: Vec<Mat> = v.iter().zip(&gv).map(|(a, g)| a - g * Complex::new(step, 0.0)).collect();
                let trial = self.project(&trial);
                let mut decrease = 0.0;
                let mut dist = 0.0;
                for ((t, a), g) in trial.iter().zip(&v).zip(&gv) {
                    let d = t - a;
                    decrease += (g.adjoint() * &d).trace().re;
                    dist += d.norm_squared();
                }
                let ft = self.objective(&self.unwhiten(&trial));
                if ft.is_finite() && ft <= f + decrease + dist / (2.0 * step) {
                    improved = ft < f;
                    v = trial;
                    f = f.min(ft);
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        f
    }

    pub fn blocks(cov: &CovarianceSet) -> Vec<Mat> {
        cov.blocks.iter().map(to_na).collect()
    }

    pub fn to_covariances(w: &[Mat]) -> CovarianceSet {
        CovarianceSet {
            blocks: w.iter().map(from_na).collect(),
        }
    }
}

/// Shift `tau >= 0` such that `sum max(x - tau, 0) <= cap`, tight when the
/// positive part exceeds the cap.
fn cap_shift(values: &[f64], cap: f64) -> f64 {
    let positive: f64 = values.iter().map(|x| x.max(0.0)).sum();
    if positive <= cap {
        return 0.0;
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|x| *x > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        acc += x;
        let t = (acc - cap) / (i + 1) as f64;
        if t < *x {
            tau = t;
        } else {
            break;
        }
    }
    tau
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
