//! Variable layout and affine pieces of the per-timestep dispatch problem,
//! shared by the cone relaxation and the exact AC formulation.
//!
//! Variables (all per unit): `W_ii` for every non-slack node, then
//! `(c_k, s_k) = (Re, Im)(V_u V_d*)` for every branch oriented from its
//! upstream end `u` to its downstream end `d`, then one column per
//! activation whose bound box is not degenerate.

use super::{RdopfConfig, StepData};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ActKind {
    PPlus,
    PMinus,
    QPlus,
    QMinus,
    LoadCurt,
    GenCurt,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Activation {
    pub node: usize,
    pub kind: ActKind,
    pub col: usize,
    pub lo: f64,
    pub hi: f64,
    /// Cost per unit of the variable (same units as the objective).
    pub price: f64,
}

/// Sparse affine expression `constant + Σ coef · x[col]`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Affine {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Affine {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(c, v)| v * x[c]).sum::<f64>()
    }

    fn add_w(&mut self, layout: &Layout, node: usize, coef: f64) {
        match layout.w_col[node] {
            Some(col) => self.terms.push((col, coef)),
            None => self.constant += coef,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BranchInfo {
    pub up: usize,
    pub down: usize,
    pub g: f64,
    pub b: f64,
    pub s_max: f64,
    /// Bounds on `θ_u − θ_d`.
    pub theta_lo: f64,
    pub theta_hi: f64,
}

/// Column layout plus everything derived from the step data that both
/// formulations need.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub n_nodes: usize,
    pub slack: usize,
    pub w_col: Vec<Option<usize>>,
    pub branches: Vec<BranchInfo>,
    pub acts: Vec<Activation>,
    pub n_cols: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub lambda_loss: f64,
    /// Money per unit of the per-unit objective (`0.25 h · S_base`).
    pub money: f64,
    /// Per-unit net injection `P^g − P^d` and `−Q^d` per node.
    pub p_net: Vec<f64>,
    pub q_net: Vec<f64>,
    /// `Q^d / P^d` per node, shed together with curtailed load.
    pub load_q_ratio: Vec<f64>,
}

impl Layout {
    pub fn new(net: &Network, step: &StepData, cfg: &RdopfConfig) -> Self {
        let n = net.num_nodes();
        let s_base = net.bases().s_base_kva;
        let slack = net.slack();
        let mut col = 0;
        let w_col: Vec<Option<usize>> = (0..n)
            .map(|i| {
                (i != slack).then(|| {
                    col += 1;
                    col - 1
                })
            })
            .collect();
        let branches: Vec<BranchInfo> = net
            .branches()
            .iter()
            .enumerate()
            .map(|(k, br)| {
                let (up, down) = net.oriented_ends(k);
                let y = br.admittance();
                let (lo, hi) = if up == br.from {
                    (br.theta_min, br.theta_max)
                } else {
                    (-br.theta_max, -br.theta_min)
                };
                BranchInfo {
                    up,
                    down,
                    g: y.re,
                    b: y.im,
                    s_max: br.s_max,
                    theta_lo: lo,
                    theta_hi: hi,
                }
            })
            .collect();
        col += 2 * branches.len();

        let mut acts = Vec::new();
        for i in 0..n {
            let f = &step.fas[i];
            let e = &step.envelope[i];
            let (gen_lo, gen_hi) = cfg.gen_curtailment_box(i, step.p_gen[i], e.gen_cap);
            let boxes = [
                (ActKind::PPlus, 0.0, e.p_max, f.lam_p_plus),
                (ActKind::PMinus, e.p_min, 0.0, f.lam_p_minus),
                (ActKind::QPlus, 0.0, e.q_max, f.lam_q_plus),
                (ActKind::QMinus, e.q_min, 0.0, f.lam_q_minus),
                (ActKind::LoadCurt, 0.0, e.load_cap, cfg.lambda_curt_load),
                (ActKind::GenCurt, gen_lo, gen_hi, cfg.lambda_curt_gen),
            ];
            for (kind, lo, hi, price) in boxes {
                if hi > lo {
                    acts.push(Activation {
                        node: i,
                        kind,
                        col,
                        lo: lo / s_base,
                        hi: hi / s_base,
                        price,
                    });
                    col += 1;
                } else if lo != 0.0 {
                    // degenerate but nonzero box: fixed activation
                    acts.push(Activation {
                        node: i,
                        kind,
                        col,
                        lo: lo / s_base,
                        hi: lo / s_base,
                        price,
                    });
                    col += 1;
                }
            }
        }
        Layout {
            n_nodes: n,
            slack,
            w_col,
            branches,
            acts,
            n_cols: col,
            v_min: cfg.v_min,
            v_max: cfg.v_max,
            lambda_loss: cfg.lambda_loss,
            money: crate::STEP_HOURS * s_base,
            p_net: (0..n)
                .map(|i| (step.p_gen[i] - step.p_load[i]) / s_base)
                .collect(),
            q_net: (0..n).map(|i| -step.q_load[i] / s_base).collect(),
            load_q_ratio: (0..n).map(|i| step.load_q_ratio(i)).collect(),
        }
    }

    pub fn c_col(&self, k: usize) -> usize {
        self.n_w() + 2 * k
    }

    pub fn s_col(&self, k: usize) -> usize {
        self.n_w() + 2 * k + 1
    }

    pub fn n_w(&self) -> usize {
        self.n_nodes - 1
    }

    /// `W_ii` as an affine expression (constant 1 at the slack).
    pub fn w_expr(&self, node: usize) -> Affine {
        let mut a = Affine::default();
        a.add_w(self, node, 1.0);
        a
    }

    /// Active and reactive power entering branch `k` at the upstream end
    /// (`from_up = true`) or at the downstream end.
    pub fn branch_pq(&self, k: usize, from_up: bool) -> (Affine, Affine) {
        let br = &self.branches[k];
        let (node, s_sign) = if from_up {
            (br.up, -1.0)
        } else {
            (br.down, 1.0)
        };
        let (g, b) = (br.g, br.b);
        let (cc, sc) = (self.c_col(k), self.s_col(k));
        // P = g(W − c) ∓ b s,  Q = −b(W − c) ∓ g s  (upper sign at the upstream end)
        let mut p = Affine::default();
        p.add_w(self, node, g);
        p.terms.push((cc, -g));
        p.terms.push((sc, s_sign * b));
        let mut q = Affine::default();
        q.add_w(self, node, -b);
        q.terms.push((cc, b));
        q.terms.push((sc, s_sign * g));
        (p, q)
    }

    /// Branch loss `g (W_uu + W_dd − 2c)` per unit.
    pub fn branch_loss(&self, k: usize) -> Affine {
        let br = &self.branches[k];
        let mut a = Affine::default();
        a.add_w(self, br.up, br.g);
        a.add_w(self, br.down, br.g);
        a.terms.push((self.c_col(k), -2.0 * br.g));
        a
    }

    /// Rows of the nodal balances, `(active, reactive)`, for non-slack nodes
    /// in node order. Each row reads `expr = 0`.
    pub fn balance_rows(&self) -> Vec<(usize, Affine, Affine)> {
        let mut p_rows: Vec<Affine> = vec![Affine::default(); self.n_nodes];
        let mut q_rows: Vec<Affine> = vec![Affine::default(); self.n_nodes];
        for k in 0..self.branches.len() {
            for from_up in [true, false] {
                let node = if from_up {
                    self.branches[k].up
                } else {
                    self.branches[k].down
                };
                let (p, q) = self.branch_pq(k, from_up);
                merge(&mut p_rows[node], &p, 1.0);
                merge(&mut q_rows[node], &q, 1.0);
            }
        }
        for a in &self.acts {
            let (row, coef) = match a.kind {
                ActKind::GenCurt => (&mut p_rows[a.node], 1.0),
                ActKind::LoadCurt | ActKind::PPlus | ActKind::PMinus => (&mut p_rows[a.node], -1.0),
                ActKind::QPlus | ActKind::QMinus => (&mut q_rows[a.node], -1.0),
            };
            row.terms.push((a.col, coef));
            if a.kind == ActKind::LoadCurt && self.load_q_ratio[a.node] != 0.0 {
                q_rows[a.node]
                    .terms
                    .push((a.col, -self.load_q_ratio[a.node]));
            }
        }
        (0..self.n_nodes)
            .filter(|&i| i != self.slack)
            .map(|i| {
                let mut p = p_rows[i].clone();
                p.constant -= self.p_net[i];
                let mut q = q_rows[i].clone();
                q.constant -= self.q_net[i];
                (i, p, q)
            })
            .collect()
    }

    /// Objective `λ_loss Σ loss + Σ price · activation` in money per step.
    pub fn objective(&self) -> Affine {
        let mut obj = Affine::default();
        for k in 0..self.branches.len() {
            merge(
                &mut obj,
                &self.branch_loss(k),
                self.lambda_loss * self.money,
            );
        }
        for a in &self.acts {
            obj.terms.push((a.col, a.price * self.money));
        }
        obj
    }

    /// Linear inequalities `expr ≤ 0`: voltage bounds, angle bounds and
    /// activation boxes.
    pub fn linear_inequalities(&self) -> Vec<Affine> {
        let mut rows = Vec::new();
        let (lo2, hi2) = (self.v_min * self.v_min, self.v_max * self.v_max);
        for i in 0..self.n_nodes {
            if let Some(col) = self.w_col[i] {
                rows.push(Affine {
                    constant: lo2,
                    terms: vec![(col, -1.0)],
                });
                rows.push(Affine {
                    constant: -hi2,
                    terms: vec![(col, 1.0)],
                });
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            let (cc, sc) = (self.c_col(k), self.s_col(k));
            // s − tan(θ_hi) c ≤ 0 and tan(θ_lo) c − s ≤ 0
            rows.push(Affine {
                constant: 0.0,
                terms: vec![(sc, 1.0), (cc, -br.theta_hi.tan())],
            });
            rows.push(Affine {
                constant: 0.0,
                terms: vec![(cc, br.theta_lo.tan()), (sc, -1.0)],
            });
        }
        for a in &self.acts {
            rows.push(Affine {
                constant: a.lo,
                terms: vec![(a.col, -1.0)],
            });
            rows.push(Affine {
                constant: -a.hi,
                terms: vec![(a.col, 1.0)],
            });
        }
        rows
    }
}

fn merge(into: &mut Affine, from: &Affine, scale: f64) {
    into.constant += scale * from.constant;
    into.terms
        .extend(from.terms.iter().map(|&(c, v)| (c, scale * v)));
}
