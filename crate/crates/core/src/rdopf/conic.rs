//! Primal-dual interior-point solver for small dense second-order-cone
//! programs
//!
//! ```text
//! minimize    c'x
//! subject to  A x = b
//!             G x + s = h,   s ∈ K
//! ```
//!
//! where `K` is a product of one nonnegative orthant and second-order cones.
//! The iteration runs on the homogeneous self-dual embedding with
//! Nesterov-Todd scaling and Mehrotra predictor-corrector steps, so primal
//! infeasibility is reported as a certificate rather than a stall.

use nalgebra::{DMatrix, DVector};

/// Cone layout of the rows of `G`: `nonneg` orthant rows first, then one
/// block per second-order cone with the given dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cones {
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl Cones {
    pub fn dim(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Degree of the cone (number of orthant rows plus number of SOCs).
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    fn soc_ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let mut start = self.nonneg;
        self.soc.iter().map(move |&d| {
            let r = start..start + d;
            start += d;
            r
        })
    }
}

#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub c: DVector<f64>,
    /// Constant objective term; only enters reported costs and the
    /// relative gap.
    pub c0: f64,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub cones: Cones,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicSettings {
    pub feastol: f64,
    pub abstol: f64,
    pub reltol: f64,
    pub max_iter: usize,
    /// Looser tolerances accepted when the iteration stalls.
    pub inaccurate_factor: f64,
}

impl Default for ConicSettings {
    fn default() -> Self {
        ConicSettings {
            feastol: 1e-9,
            abstol: 1e-8,
            reltol: 1e-9,
            max_iter: 100,
            inaccurate_factor: 1e3,
        }
    }
}

/// Per-iteration progress record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub pcost: f64,
    pub dcost: f64,
    pub gap: f64,
    pub pres: f64,
    pub dres: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    /// Stalled within `inaccurate_factor` of the tolerances.
    Inaccurate,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub s: DVector<f64>,
    pub pcost: f64,
    pub dcost: f64,
    pub status: ConicStatus,
    pub trace: Vec<IterRecord>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ConicError {
    #[error("problem is primal infeasible (certificate residual {residual:.2e})")]
    PrimalInfeasible { residual: f64 },
    #[error("problem is dual infeasible (unbounded, certificate residual {residual:.2e})")]
    DualInfeasible { residual: f64 },
    #[error("numerical failure after {} iterations: {reason}", trace.len())]
    Numerical {
        reason: String,
        trace: Vec<IterRecord>,
    },
    #[error("bad problem dimensions: {0}")]
    Dimensions(String),
}

/// J-norm squared `x0² − ‖x1‖²`.
fn jdot(x: &[f64], y: &[f64]) -> f64 {
    x[0] * y[0] - x[1..].iter().zip(&y[1..]).map(|(a, b)| a * b).sum::<f64>()
}

/// Nesterov-Todd scaling at a strictly feasible pair `(s, z)`.
#[derive(Debug, Clone)]
struct Scaling {
    /// `sqrt(s/z)` on the orthant.
    d: Vec<f64>,
    /// Per SOC: `w̄` and `β` with `W = β [w0, w1'; w1, I + w1 w1'/(1 + w0)]`.
    wbar: Vec<DVector<f64>>,
    beta: Vec<f64>,
    /// Scaled point `λ = W z = W⁻¹ s`.
    lambda: DVector<f64>,
}

/// Norm-like `x0² − ‖x1‖²` computed without cancellation.
fn jnorm2(x: &[f64]) -> f64 {
    let n1 = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    (x[0] - n1) * (x[0] + n1)
}

/// `β M v`, or `J M J v / β` when `inverse`.
fn soc_apply(wb: &DVector<f64>, beta: f64, v: &[f64], out: &mut [f64], inverse: bool) {
    let sign = if inverse { -1.0 } else { 1.0 };
    let w1v1: f64 = wb
        .iter()
        .skip(1)
        .zip(&v[1..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * sign;
    let scale = if inverse { 1.0 / beta } else { beta };
    let v0 = v[0];
    out[0] = scale * (wb[0] * v0 + w1v1);
    let coef = v0 + w1v1 / (1.0 + wb[0]);
    for k in 1..v.len() {
        out[k] = scale * (v[k] + sign * coef * wb[k]);
    }
}

impl Scaling {
    fn identity(cones: &Cones) -> Self {
        Scaling {
            d: vec![1.0; cones.nonneg],
            wbar: cones
                .soc
                .iter()
                .map(|&n| {
                    let mut e = DVector::zeros(n);
                    e[0] = 1.0;
                    e
                })
                .collect(),
            beta: vec![1.0; cones.soc.len()],
            lambda: unit(cones),
        }
    }

    fn new(cones: &Cones, s: &DVector<f64>, z: &DVector<f64>) -> Option<Self> {
        let l = cones.nonneg;
        let mut d = Vec::with_capacity(l);
        let mut lambda = DVector::zeros(s.len());
        for i in 0..l {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            d.push((s[i] / z[i]).sqrt());
            lambda[i] = (s[i] * z[i]).sqrt();
        }
        let mut wbar = Vec::with_capacity(cones.soc.len());
        let mut betas = Vec::with_capacity(cones.soc.len());
        for r in cones.soc_ranges() {
            let sv = s.rows(r.start, r.len());
            let zv = z.rows(r.start, r.len());
            let js = jnorm2(sv.as_slice());
            let jz = jnorm2(zv.as_slice());
            if !(js > 0.0 && jz > 0.0 && sv[0] > 0.0 && zv[0] > 0.0) {
                return None;
            }
            let sb = sv / js.sqrt();
            let zb = zv / jz.sqrt();
            let gamma = ((1.0 + sb.dot(&zb)) / 2.0).sqrt();
            let mut wb = sb.clone_owned();
            wb[0] += zb[0];
            for k in 1..r.len() {
                wb[k] -= zb[k];
            }
            wb /= 2.0 * gamma;
            let beta = (js / jz).powf(0.25);
            soc_apply(
                &wb,
                beta,
                zv.as_slice(),
                &mut lambda.as_mut_slice()[r.clone()],
                false,
            );
            wbar.push(wb);
            betas.push(beta);
        }
        Some(Scaling {
            d,
            wbar,
            beta: betas,
            lambda,
        })
    }

    /// `W v` (or `W⁻¹ v` with `inverse`).
    fn apply(&self, cones: &Cones, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for i in 0..cones.nonneg {
            out[i] = if inverse {
                v[i] / self.d[i]
            } else {
                v[i] * self.d[i]
            };
        }
        for (k, r) in cones.soc_ranges().enumerate() {
            soc_apply(
                &self.wbar[k],
                self.beta[k],
                &v.as_slice()[r.clone()],
                &mut out.as_mut_slice()[r],
                inverse,
            );
        }
        out
    }

    /// `H = (W⁻¹G)'(W⁻¹G)` accumulated cone block by cone block over the
    /// nonzero columns of each block.
    fn gram(&self, cones: &Cones, g: &DMatrix<f64>, pattern: &[Vec<usize>]) -> DMatrix<f64> {
        let n = g.ncols();
        let mut h = DMatrix::zeros(n, n);
        for (i, cols) in pattern.iter().take(cones.nonneg).enumerate() {
            let f = 1.0 / (self.d[i] * self.d[i]);
            for &a in cols {
                for &b in cols {
                    h[(a, b)] += f * g[(i, a)] * g[(i, b)];
                }
            }
        }
        for (k, r) in cones.soc_ranges().enumerate() {
            let cols = &pattern[cones.nonneg + k];
            let mut scaled = DMatrix::zeros(r.len(), cols.len());
            let mut col_in = vec![0.0; r.len()];
            let mut col_out = vec![0.0; r.len()];
            for (j, &c) in cols.iter().enumerate() {
                for i in 0..r.len() {
                    col_in[i] = g[(r.start + i, c)];
                }
                soc_apply(&self.wbar[k], self.beta[k], &col_in, &mut col_out, true);
                for i in 0..r.len() {
                    scaled[(i, j)] = col_out[i];
                }
            }
            let gram = scaled.transpose() * &scaled;
            for (x, &a) in cols.iter().enumerate() {
                for (y, &b) in cols.iter().enumerate() {
                    h[(a, b)] += gram[(x, y)];
                }
            }
        }
        h
    }
}

/// Nonzero columns of `G` per orthant row, then per second-order cone.
fn sparsity(cones: &Cones, g: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let nz = |rows: std::ops::Range<usize>| -> Vec<usize> {
        (0..g.ncols())
            .filter(|&c| rows.clone().any(|r| g[(r, c)] != 0.0))
            .collect()
    };
    let mut out: Vec<Vec<usize>> = (0..cones.nonneg).map(|i| nz(i..i + 1)).collect();
    out.extend(cones.soc_ranges().map(nz));
    out
}

/// Jordan product `u ∘ v`.
fn jprod(cones: &Cones, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for i in 0..cones.nonneg {
        out[i] = u[i] * v[i];
    }
    for r in cones.soc_ranges() {
        let us = u.rows(r.start, r.len());
        let vs = v.rows(r.start, r.len());
        out[r.start] = us.dot(&vs);
        for k in 1..r.len() {
            out[r.start + k] = us[0] * vs[k] + vs[0] * us[k];
        }
    }
    out
}

/// Solves `λ ∘ x = v` for `x`.
fn jdiv(cones: &Cones, lambda: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for i in 0..cones.nonneg {
        out[i] = v[i] / lambda[i];
    }
    for r in cones.soc_ranges() {
        let l = lambda.rows(r.start, r.len());
        let vs = v.rows(r.start, r.len());
        let jl = jdot(l.as_slice(), l.as_slice());
        let l1v1: f64 = (1..r.len()).map(|k| l[k] * vs[k]).sum();
        let x0 = (l[0] * vs[0] - l1v1) / jl;
        out[r.start] = x0;
        for k in 1..r.len() {
            out[r.start + k] = (vs[k] - x0 * l[k]) / l[0];
        }
    }
    out
}

/// Identity element of the cone.
fn unit(cones: &Cones) -> DVector<f64> {
    let mut e = DVector::zeros(cones.dim());
    for i in 0..cones.nonneg {
        e[i] = 1.0;
    }
    for r in cones.soc_ranges() {
        e[r.start] = 1.0;
    }
    e
}

/// Smallest `t` with `x + t e` in the cone (negative when `x` is interior).
fn boundary_shift(cones: &Cones, x: &DVector<f64>) -> f64 {
    let mut t = f64::NEG_INFINITY;
    for i in 0..cones.nonneg {
        t = t.max(-x[i]);
    }
    for r in cones.soc_ranges() {
        let xs = x.rows(r.start, r.len());
        let n1 = xs.rows(1, r.len() - 1).norm();
        t = t.max(n1 - xs[0]);
    }
    t
}

/// Largest `α ≥ 0` keeping `x + α d` in the cone (`x` interior).
fn max_step(cones: &Cones, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..cones.nonneg {
        if d[i] < 0.0 {
            alpha = alpha.min(-x[i] / d[i]);
        }
    }
    for r in cones.soc_ranges() {
        let xs = x.rows(r.start, r.len());
        let ds = d.rows(r.start, r.len());
        let a = jdot(ds.as_slice(), ds.as_slice());
        let b = jdot(xs.as_slice(), ds.as_slice());
        let c = jdot(xs.as_slice(), xs.as_slice()).max(0.0);
        alpha = alpha.min(smallest_positive_root(a, b, c));
        if ds[0] < 0.0 {
            alpha = alpha.min(-xs[0] / ds[0]);
        }
    }
    alpha
}

/// Smallest positive root of `a t² + 2 b t + c` with `c ≥ 0`.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return f64::INFINITY;
    }
    if a.abs() <= 1e-14 * scale {
        return if b < 0.0 {
            c / (-2.0 * b)
        } else {
            f64::INFINITY
        };
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let q = -(b + b.signum() * disc.sqrt());
    let mut best = f64::INFINITY;
    for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
        if root > 0.0 && root < best {
            best = root;
        }
    }
    best
}

/// Row-compressed copy of a dense constraint matrix for matrix-vector
/// products.
struct Sparse {
    rows: Vec<Vec<(usize, f64)>>,
    ncols: usize,
}

impl Sparse {
    fn new(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Sparse {
            rows,
            ncols: m.ncols(),
        }
    }

    fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows
                .iter()
                .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum::<f64>()),
        )
    }

    fn tr_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                out[j] += v * y[i];
            }
        }
        out
    }
}

enum Factor {
    /// Cholesky of `H` and of the Schur complement `A H⁻¹ A'`.
    Schur {
        h: nalgebra::Cholesky<f64, nalgebra::Dyn>,
        s: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    },
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// Factored reduced KKT system for one scaling.
struct Kkt<'a> {
    prob: &'a ConicProblem,
    sa: &'a Sparse,
    sg: &'a Sparse,
    scaling: &'a Scaling,
    factor: Factor,
}

const REG: f64 = 1e-11;

impl<'a> Kkt<'a> {
    fn new(
        prob: &'a ConicProblem,
        sa: &'a Sparse,
        sg: &'a Sparse,
        scaling: &'a Scaling,
        pattern: &[Vec<usize>],
    ) -> Option<Self> {
        let n = prob.c.len();
        let p = prob.b.len();
        let hmat = scaling.gram(&prob.cones, &prob.g, pattern);
        let mut exact = DMatrix::zeros(n + p, n + p);
        exact.view_mut((0, 0), (n, n)).copy_from(&hmat);
        exact
            .view_mut((0, n), (n, p))
            .copy_from(&prob.a.transpose());
        exact.view_mut((n, 0), (p, n)).copy_from(&prob.a);
        let schur = hmat.clone().cholesky().and_then(|h| {
            let hinv_at = h.solve(&prob.a.transpose());
            let s = (&prob.a * hinv_at).cholesky()?;
            Some(Factor::Schur { h, s })
        });
        let factor = match schur {
            Some(f) => f,
            None => {
                let mut lu = exact.clone().lu();
                if !lu.is_invertible() {
                    let mut reg = exact.clone();
                    let scale = (0..n).map(|i| hmat[(i, i)].abs()).fold(1.0, f64::max);
                    for i in 0..n {
                        reg[(i, i)] += REG * scale;
                    }
                    for i in n..n + p {
                        reg[(i, i)] -= REG;
                    }
                    lu = reg.lu();
                    if !lu.is_invertible() {
                        return None;
                    }
                }
                Factor::Lu(lu)
            }
        };
        Some(Kkt {
            prob,
            sa,
            sg,
            scaling,
            factor,
        })
    }

    /// `[H A'; A 0] [x; y] = rhs`.
    fn solve_block(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.factor {
            Factor::Lu(lu) => lu.solve(rhs),
            Factor::Schur { h, s } => {
                let n = self.prob.c.len();
                let p = self.prob.b.len();
                let u = rhs.rows(0, n).clone_owned();
                let v = rhs.rows(n, p).clone_owned();
                let hu = h.solve(&u);
                let y = s.solve(&(self.sa.mul(&hu) - v));
                let x = h.solve(&(u - self.sa.tr_mul(&y)));
                let mut out = DVector::zeros(n + p);
                out.rows_mut(0, n).copy_from(&x);
                out.rows_mut(n, p).copy_from(&y);
                Some(out)
            }
        }
    }

    /// Solves
    /// ```text
    /// A'dy + G'dz     = r1
    /// −A dx           = r2
    /// −G dx + W'W dz  = r3
    /// ```
    fn solve(
        &self,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let prob = self.prob;
        let cones = &prob.cones;
        let (mut dx, mut dy, mut dz) = self.solve_reduced(r1, r2, r3)?;
        // refinement against the unreduced system
        let scale = r1.amax().max(r2.amax()).max(r3.amax()).max(1e-300);
        for _ in 0..3 {
            let e1 = r1 - self.sa.tr_mul(&dy) - self.sg.tr_mul(&dz);
            let e2 = r2 + self.sa.mul(&dx);
            let wdz = self
                .scaling
                .apply(cones, &self.scaling.apply(cones, &dz, false), false);
            let e3 = r3 + self.sg.mul(&dx) - wdz;
            if e1.amax().max(e2.amax()).max(e3.amax()) <= 1e-14 * scale {
                break;
            }
            let (cx, cy, cz) = self.solve_reduced(&e1, &e2, &e3)?;
            dx += cx;
            dy += cy;
            dz += cz;
        }
        if dx
            .iter()
            .chain(dy.iter())
            .chain(dz.iter())
            .all(|v| v.is_finite())
        {
            Some((dx, dy, dz))
        } else {
            None
        }
    }

    fn solve_reduced(
        &self,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let n = r1.len();
        let p = r2.len();
        let cones = &self.prob.cones;
        // G'(W'W)⁻¹ r3
        let w_r3 = self
            .scaling
            .apply(cones, &self.scaling.apply(cones, r3, true), true);
        let mut rhs = DVector::zeros(n + p);
        rhs.rows_mut(0, n).copy_from(&(r1 - self.sg.tr_mul(&w_r3)));
        rhs.rows_mut(n, p).copy_from(&(-r2));
        let sol = self.solve_block(&rhs)?;
        let dx = sol.rows(0, n).clone_owned();
        let dy = sol.rows(n, p).clone_owned();
        // dz = (W'W)⁻¹ (r3 + G dx)
        let t = self.scaling.apply(cones, &(r3 + self.sg.mul(&dx)), true);
        let dz = self.scaling.apply(cones, &t, true);
        Some((dx, dy, dz))
    }
}

fn check_dims(prob: &ConicProblem) -> Result<(), ConicError> {
    let n = prob.c.len();
    let m = prob.cones.dim();
    let bad = |m: String| Err(ConicError::Dimensions(m));
    if prob.a.ncols() != n || prob.g.ncols() != n {
        return bad(format!("A/G must have {n} columns"));
    }
    if prob.a.nrows() != prob.b.len() {
        return bad("A rows must match b".into());
    }
    if prob.g.nrows() != m || prob.h.len() != m {
        return bad(format!("G and h must have {m} rows"));
    }
    if prob.cones.soc.iter().any(|&d| d < 2) {
        return bad("second-order cones need dimension >= 2".into());
    }
    Ok(())
}

pub fn solve(prob: &ConicProblem, settings: &ConicSettings) -> Result<ConicSolution, ConicError> {
    check_dims(prob)?;
    let cones = &prob.cones;
    let n = prob.c.len();
    let p = prob.b.len();
    let m = cones.dim();
    let e = unit(cones);
    let degree = cones.degree() as f64;
    let mut trace = Vec::new();
    let numerical = |reason: &str, trace: &Vec<IterRecord>| ConicError::Numerical {
        reason: reason.to_string(),
        trace: trace.clone(),
    };

    let pattern = sparsity(cones, &prob.g);
    let sa = Sparse::new(&prob.a);
    let sg = Sparse::new(&prob.g);
    // Starting point from two least-squares problems with W = I.
    let ident = Scaling::identity(cones);
    let kkt0 = Kkt::new(prob, &sa, &sg, &ident, &pattern)
        .ok_or_else(|| numerical("singular initial KKT", &trace))?;
    let (mut x, _, dzp) = kkt0
        .solve(&DVector::zeros(n), &(-&prob.b), &(-&prob.h))
        .ok_or_else(|| numerical("initial primal solve failed", &trace))?;
    let mut s = -dzp;
    let (_, mut y, mut z) = kkt0
        .solve(&(-&prob.c), &DVector::zeros(p), &DVector::zeros(m))
        .ok_or_else(|| numerical("initial dual solve failed", &trace))?;
    let ts = boundary_shift(cones, &s);
    if ts >= -1e-8 * s.norm().max(1.0) {
        s += &e * (1.0 + ts);
    }
    let tz = boundary_shift(cones, &z);
    if tz >= -1e-8 * z.norm().max(1.0) {
        z += &e * (1.0 + tz);
    }
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let nb = prob.b.norm().max(1.0);
    let nh = prob.h.norm().max(1.0);
    let nc = prob.c.norm().max(1.0);
    let mut best: Option<(f64, ConicSolution)> = None;

    for iter in 0..=settings.max_iter {
        // residuals of the embedding
        let aty = sa.tr_mul(&y);
        let gtz = sg.tr_mul(&z);
        let ax = sa.mul(&x);
        let gx = sg.mul(&x);
        let rx = &aty + &gtz + &prob.c * tau;
        let ry = &prob.b * tau - &ax;
        let rz = &prob.h * tau - &gx - &s;
        let cx = prob.c.dot(&x);
        let by = prob.b.dot(&y);
        let hz = prob.h.dot(&z);
        let rt = -cx - by - hz - kappa;

        let gap = s.dot(&z);
        let pcost = cx / tau + prob.c0;
        let dcost = -(by + hz) / tau + prob.c0;
        let pres =
            ((&ax / tau - &prob.b).norm() / nb).max(((&gx + &s) / tau - &prob.h).norm() / nh);
        let dres = ((&aty + &gtz) / tau + &prob.c).norm() / nc;
        let gap_t = gap / (tau * tau);
        let relgap = if pcost < 0.0 {
            gap_t / -pcost
        } else if dcost > 0.0 {
            gap_t / dcost
        } else {
            f64::INFINITY
        };
        let step = trace.last().map_or(0.0, |r: &IterRecord| r.step);
        trace.push(IterRecord {
            iter,
            pcost,
            dcost,
            gap: gap_t,
            pres,
            dres,
            step,
        });
        log::trace!("conic it {iter}: pcost {pcost:.9e} dcost {dcost:.9e} gap {gap_t:.2e} pres {pres:.2e} dres {dres:.2e}");

        let make = |status: ConicStatus, trace: &Vec<IterRecord>| ConicSolution {
            x: &x / tau,
            y: &y / tau,
            z: &z / tau,
            s: &s / tau,
            pcost,
            dcost,
            status,
            trace: trace.clone(),
        };
        if pres <= settings.feastol
            && dres <= settings.feastol
            && (gap_t <= settings.abstol || relgap <= settings.reltol)
        {
            return Ok(make(ConicStatus::Optimal, &trace));
        }
        let loose = settings.inaccurate_factor;
        if pres <= settings.feastol * loose
            && dres <= settings.feastol * loose
            && (gap_t <= settings.abstol * loose || relgap <= settings.reltol * loose)
        {
            let score = pres.max(dres).max(gap_t.min(relgap));
            if best.as_ref().map_or(true, |(b, _)| score < *b) {
                best = Some((score, make(ConicStatus::Inaccurate, &trace)));
            }
        }

        // infeasibility certificates
        if by + hz < 0.0 {
            let res = (&aty + &gtz).norm() / -(by + hz);
            if res <= settings.feastol {
                return Err(ConicError::PrimalInfeasible { residual: res });
            }
        }
        if cx < 0.0 {
            let res = ax.norm().max((&gx + &s).norm()) / -cx;
            if res <= settings.feastol {
                return Err(ConicError::DualInfeasible { residual: res });
            }
        }
        if iter == settings.max_iter {
            break;
        }

        let Some(scaling) = Scaling::new(cones, &s, &z) else {
            break;
        };
        let Some(kkt) = Kkt::new(prob, &sa, &sg, &scaling, &pattern) else {
            break;
        };
        let lambda = scaling.lambda.clone();
        let mu = (gap + tau * kappa) / (degree + 1.0);

        // Coefficients of dτ.
        let Some((x1, y1, z1)) = kkt.solve(&(-&prob.c), &(-&prob.b), &(-&prob.h)) else {
            break;
        };
        let denom_base = -prob.c.dot(&x1) - prob.b.dot(&y1) - prob.h.dot(&z1);

        let newton = |dfac: f64,
                      ds_rhs: &DVector<f64>,
                      dk_rhs: f64|
         -> Option<(
            DVector<f64>,
            DVector<f64>,
            DVector<f64>,
            DVector<f64>,
            f64,
            f64,
        )> {
            let d_x = -&rx * dfac;
            let d_y = -&ry * dfac;
            let d_z = -&rz * dfac;
            let d_tau = -rt * dfac;
            let ldiv = jdiv(cones, &lambda, ds_rhs);
            let wt = scaling.apply(cones, &ldiv, false);
            let (x2, y2, z2) = kkt.solve(&d_x, &d_y, &(&d_z + &wt))?;
            let num = d_tau + dk_rhs / tau + prob.c.dot(&x2) + prob.b.dot(&y2) + prob.h.dot(&z2);
            let den = kappa / tau + denom_base;
            let dtau = num / den;
            let dx = &x2 + &x1 * dtau;
            let dy = &y2 + &y1 * dtau;
            let dz = &z2 + &z1 * dtau;
            // ds = W'(λ \ d_s − W dz)
            let wdz = scaling.apply(cones, &dz, false);
            let ds = scaling.apply(cones, &(&ldiv - wdz), false);
            let dkappa = (dk_rhs - kappa * dtau) / tau;
            Some((dx, dy, dz, ds, dtau, dkappa))
        };
        let step_len = |ds: &DVector<f64>, dz: &DVector<f64>, dtau: f64, dkappa: f64| -> f64 {
            let mut a = max_step(cones, &s, ds).min(max_step(cones, &z, dz));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // predictor
        let lsq = jprod(cones, &lambda, &lambda);
        let Some((_, _, dz_a, ds_a, dtau_a, dkappa_a)) = newton(1.0, &(-&lsq), -tau * kappa) else {
            break;
        };
        let alpha_a = step_len(&ds_a, &dz_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3);

        // corrector
        let ws = scaling.apply(cones, &ds_a, true);
        let wz = scaling.apply(cones, &dz_a, false);
        let corr = jprod(cones, &ws, &wz);
        let ds_rhs = -&lsq + &e * (sigma * mu) - corr;
        let dk_rhs = -tau * kappa + sigma * mu - dtau_a * dkappa_a;
        let Some((dx, dy, dz, ds, dtau, dkappa)) = newton(1.0 - sigma, &ds_rhs, dk_rhs) else {
            break;
        };
        let alpha = (0.99 * step_len(&ds, &dz, dtau, dkappa)).min(1.0);
        if !(alpha > 1e-12) {
            break;
        }
        x += &dx * alpha;
        y += &dy * alpha;
        z += &dz * alpha;
        s += &ds * alpha;
        tau += dtau * alpha;
        kappa += dkappa * alpha;
        if let Some(last) = trace.last_mut() {
            last.step = alpha;
        }
        if !(tau.is_finite() && kappa.is_finite()) {
            break;
        }
    }
    match best {
        Some((_, sol)) => Ok(sol),
        None => Err(numerical("no convergence", &trace)),
    }
}
