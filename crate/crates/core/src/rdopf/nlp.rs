//! Primal-dual interior-point method for smooth nonlinear programs
//!
//! ```text
//! minimize f(x)  subject to  g(x) = 0,  h(x) ≤ 0
//! ```
//!
//! following the MIPS step: a Newton step on the perturbed KKT conditions
//! with slack `z` for the inequalities, fraction-to-boundary step lengths and
//! a centering parameter `σ`. Negative curvature in the reduced Hessian is
//! handled by adding a multiple of the identity until the step is a descent
//! direction for the barrier model.

use nalgebra::{DMatrix, DVector};

pub trait Nlp {
    fn dim(&self) -> usize;
    /// Objective value and gradient.
    fn objective(&self, x: &DVector<f64>) -> (f64, DVector<f64>);
    /// Equality values and Jacobian (one row per constraint).
    fn equalities(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>);
    /// Inequality values and Jacobian.
    fn inequalities(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>);
    /// Hessian of `f + λ'g + μ'h`.
    fn lagrangian_hessian(
        &self,
        x: &DVector<f64>,
        lam: &DVector<f64>,
        mu: &DVector<f64>,
    ) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlpSettings {
    pub feastol: f64,
    pub gradtol: f64,
    pub comptol: f64,
    pub costtol: f64,
    pub max_iter: usize,
    /// Centering parameter.
    pub sigma: f64,
    /// Fraction-to-boundary factor.
    pub xi: f64,
    /// Initial slack floor; small values keep a warm start close.
    pub z0: f64,
    /// Keep the barrier fixed until its subproblem converges instead of
    /// tying it to the current complementarity.
    pub monotone: bool,
}

impl Default for NlpSettings {
    fn default() -> Self {
        NlpSettings {
            feastol: 1e-9,
            gradtol: 1e-8,
            comptol: 1e-9,
            costtol: 1e-6,
            max_iter: 150,
            sigma: 0.1,
            xi: 0.99995,
            z0: 1.0,
            monotone: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub x: DVector<f64>,
    pub lam: DVector<f64>,
    pub mu: DVector<f64>,
    pub f: f64,
    pub iterations: usize,
    /// Final `(feascond, gradcond, compcond)`.
    pub residuals: (f64, f64, f64),
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum NlpError {
    #[error("interior-point solve stopped after {iterations} iterations (feas {feas:.2e}, grad {grad:.2e}, comp {comp:.2e})")]
    NoConvergence {
        iterations: usize,
        feas: f64,
        grad: f64,
        comp: f64,
    },
    #[error("numerical failure at iteration {iteration}: {reason}")]
    Numerical { iteration: usize, reason: String },
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

pub fn solve(
    prob: &dyn Nlp,
    x0: &DVector<f64>,
    settings: &NlpSettings,
) -> Result<NlpSolution, NlpError> {
    let n = prob.dim();
    let mut x = x0.clone();
    let (mut f, mut df) = prob.objective(&x);
    let (mut g, mut dg) = prob.equalities(&x);
    let (mut h, mut dh) = prob.inequalities(&x);
    let neq = g.len();
    let niq = h.len();

    let mut lam = DVector::zeros(neq);
    let mut z = DVector::from_element(niq, settings.z0);
    for i in 0..niq {
        if h[i] < -settings.z0 {
            z[i] = -h[i];
        }
    }
    let mut gamma = settings.z0 * settings.z0;
    let mut mu = DVector::from_fn(niq, |i, _| gamma / z[i]);
    let e = DVector::from_element(niq, 1.0);

    let mut lx = &df + dg.transpose() * &lam + dh.transpose() * &mu;
    let conds = |x: &DVector<f64>,
                 g: &DVector<f64>,
                 h: &DVector<f64>,
                 z: &DVector<f64>,
                 lam: &DVector<f64>,
                 mu: &DVector<f64>,
                 lx: &DVector<f64>| {
        let maxh = h.iter().cloned().fold(0.0, f64::max);
        let feas = inf_norm(g).max(maxh) / (1.0 + inf_norm(x).max(inf_norm(z)));
        let grad = inf_norm(lx) / (1.0 + inf_norm(lam).max(inf_norm(mu)));
        let comp = z.dot(mu) / (1.0 + inf_norm(x));
        (feas, grad, comp)
    };
    let (mut feas, mut grad, mut comp) = conds(&x, &g, &h, &z, &lam, &mu, &lx);
    let mut f_prev = f;

    for iter in 0..settings.max_iter {
        let lxx = prob.lagrangian_hessian(&x, &lam, &mu);
        let zinv = z.map(|v| 1.0 / v);
        // dh' diag(μ/z) dh and dh' (μ∘h + γ e)/z
        let mut dh_scaled = dh.clone();
        for i in 0..niq {
            dh_scaled.row_mut(i).scale_mut(zinv[i]);
        }
        let mut weighted = dh.clone();
        for i in 0..niq {
            weighted.row_mut(i).scale_mut(mu[i] * zinv[i]);
        }
        let barrier = dh.transpose() * &weighted;
        let nvec = &lx + dh_scaled.transpose() * (mu.component_mul(&h) + &e * gamma);

        let diag_scale = (0..n)
            .map(|i| (lxx[(i, i)] + barrier[(i, i)]).abs())
            .fold(1.0, f64::max);
        let mut delta = 0.0;
        let mut step = None;
        for _attempt in 0..12 {
            let mut m = &lxx + &barrier;
            for i in 0..n {
                m[(i, i)] += delta;
            }
            let mut kkt = DMatrix::zeros(n + neq, n + neq);
            kkt.view_mut((0, 0), (n, n)).copy_from(&m);
            kkt.view_mut((0, n), (n, neq)).copy_from(&dg.transpose());
            kkt.view_mut((n, 0), (neq, n)).copy_from(&dg);
            if delta > 0.0 {
                for i in n..n + neq {
                    kkt[(i, i)] = -1e-14 * diag_scale;
                }
            }
            let mut rhs = DVector::zeros(n + neq);
            rhs.rows_mut(0, n).copy_from(&(-&nvec));
            rhs.rows_mut(n, neq).copy_from(&(-&g));
            let lu = kkt.clone().lu();
            let Some(mut sol) = lu.solve(&rhs) else {
                delta = if delta == 0.0 {
                    1e-8 * diag_scale
                } else {
                    delta * 10.0
                };
                continue;
            };
            let res = &rhs - &kkt * &sol;
            if let Some(corr) = lu.solve(&res) {
                sol += corr;
            }
            if !sol.iter().all(|v| v.is_finite()) {
                delta = if delta == 0.0 {
                    1e-8 * diag_scale
                } else {
                    delta * 10.0
                };
                continue;
            }
            let dx = sol.rows(0, n).clone_owned();
            let curvature = dx.dot(&(&m * &dx));
            if curvature < -1e-12 * dx.norm_squared() * diag_scale {
                delta = if delta == 0.0 {
                    1e-8 * diag_scale
                } else {
                    delta * 10.0
                };
                continue;
            }
            step = Some((dx, sol.rows(n, neq).clone_owned()));
            break;
        }
        let Some((dx, dlam)) = step else {
            return Err(NlpError::Numerical {
                iteration: iter,
                reason: "KKT system could not be regularized".into(),
            });
        };
        let dz = -&h - &z - &dh * &dx;
        let dmu = -&mu + zinv.component_mul(&(&e * gamma - mu.component_mul(&dz)));

        let mut alpha_p: f64 = 1.0;
        let mut alpha_d: f64 = 1.0;
        for i in 0..niq {
            if dz[i] < 0.0 {
                alpha_p = alpha_p.min(settings.xi * z[i] / -dz[i]);
            }
            if dmu[i] < 0.0 {
                alpha_d = alpha_d.min(settings.xi * mu[i] / -dmu[i]);
            }
        }
        x += &dx * alpha_p;
        z += &dz * alpha_p;
        lam += &dlam * alpha_d;
        mu += &dmu * alpha_d;
        if niq > 0 && !settings.monotone {
            gamma = settings.sigma * z.dot(&mu) / niq as f64;
        }

        (f, df) = prob.objective(&x);
        (g, dg) = prob.equalities(&x);
        (h, dh) = prob.inequalities(&x);
        if !(f.is_finite() && x.iter().all(|v| v.is_finite())) {
            return Err(NlpError::Numerical {
                iteration: iter,
                reason: "non-finite iterate".into(),
            });
        }
        lx = &df + dg.transpose() * &lam + dh.transpose() * &mu;
        (feas, grad, comp) = conds(&x, &g, &h, &z, &lam, &mu, &lx);
        if settings.monotone && niq > 0 {
            // shrink the barrier once its subproblem is solved well enough
            let dev = (0..niq)
                .map(|i| (z[i] * mu[i] - gamma).abs())
                .fold(0.0, f64::max);
            let sub = inf_norm(&g)
                .max(h.iter().cloned().fold(0.0, f64::max))
                .max(inf_norm(&lx))
                .max(dev);
            if sub <= 10.0 * gamma || (feas < settings.feastol && grad < settings.gradtol) {
                gamma =
                    (settings.comptol * 0.1 / niq as f64).max((0.2 * gamma).min(gamma.powf(1.5)));
            }
        }
        let cost = (f - f_prev).abs() / (1.0 + f_prev.abs());
        f_prev = f;
        log::trace!("nlp it {iter}: f {f:.10e} feas {feas:.2e} grad {grad:.2e} comp {comp:.2e} ap {alpha_p:.3} ad {alpha_d:.3}");
        if feas < settings.feastol
            && grad < settings.gradtol
            && comp < settings.comptol
            && cost < settings.costtol
        {
            return Ok(NlpSolution {
                x,
                lam,
                mu,
                f,
                iterations: iter + 1,
                residuals: (feas, grad, comp),
            });
        }
    }
    Err(NlpError::NoConvergence {
        iterations: settings.max_iter,
        feas,
        grad,
        comp,
    })
}
