//! Small dense log-barrier method for maximizing a smooth concave function
//! over a polytope `{x : A x ≤ b}`.

use nalgebra::{DMatrix, DVector};

/// Smooth concave objective. `derivatives` fills the gradient and Hessian
/// and returns the value; values outside the domain are `-inf`.
///
/// Implementors may also carry smooth concave constraints `c_j(x) > 0`,
/// exposed through the log-barrier `Σ ln c_j(x)`.
pub(crate) trait Concave {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn derivatives(&self, x: &DVector<f64>, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) -> f64;

    fn n_constraints(&self) -> usize {
        0
    }

    /// `Σ ln c_j(x)`, or `-inf` when some `c_j(x) ≤ 0`.
    fn constraint_barrier(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    /// Adds the gradient and Hessian of `Σ ln c_j` to the buffers.
    fn constraint_barrier_derivatives(&self, _x: &DVector<f64>, _grad: &mut DVector<f64>, _hess: &mut DMatrix<f64>) {}
}

#[derive(Clone, Debug)]
pub(crate) struct Polytope {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Polytope {
    pub fn from_rows(rows: Vec<(Vec<f64>, f64)>, n: usize) -> Self {
        let m = rows.len();
        let mut a = DMatrix::zeros(m, n);
        let mut b = DVector::zeros(m);
        for (i, (row, rhs)) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                a[(i, j)] = v;
            }
            b[i] = rhs;
        }
        Self { a, b }
    }

    pub fn slacks(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b - &self.a * x
    }

    pub fn strictly_inside(&self, x: &DVector<f64>) -> bool {
        self.slacks(x).iter().all(|&s| s > 0.0)
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BarrierOptions {
    pub t0: f64,
    pub mu: f64,
    /// Stop once `m / t ≤ gap_tol · max(1, |f|)`.
    pub gap_tol: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 12.0,
            gap_tol: 1e-10,
            newton_tol: 1e-12,
            max_newton: 2000,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct BarrierResult {
    pub x: DVector<f64>,
    /// Relative duality-gap bound at exit.
    pub gap: f64,
    pub converged: bool,
}

fn barrier_value<C: Concave>(obj: &C, poly: &Polytope, x: &DVector<f64>, t: f64) -> f64 {
    let s = poly.slacks(x);
    if s.iter().any(|&v| v <= 0.0) {
        return f64::NEG_INFINITY;
    }
    let f = obj.value(x);
    let c = obj.constraint_barrier(x);
    if !f.is_finite() || !c.is_finite() {
        return f64::NEG_INFINITY;
    }
    t * f + c + s.iter().map(|v| v.ln()).sum::<f64>()
}

/// Maximizes `obj` over `poly` starting from a strictly interior `x0`.
pub(crate) fn maximize<C: Concave>(obj: &C, poly: &Polytope, x0: DVector<f64>, opts: &BarrierOptions) -> BarrierResult {
    let n = x0.len();
    let m = (poly.n_rows() + obj.n_constraints()) as f64;
    let mut x = x0;
    let mut t = opts.t0;
    let mut steps = 0usize;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut cgrad = DVector::zeros(n);
    let mut chess = DMatrix::zeros(n, n);
    loop {
        // centering
        let mut inner = 0usize;
        loop {
            inner += 1;
            if inner > 80 {
                break;
            }
            if steps >= opts.max_newton {
                let value = obj.value(&x);
                return BarrierResult {
                    gap: m / (t * value.abs().max(1.0)),
                    x,
                    converged: false,
                };
            }
            steps += 1;
            grad.fill(0.0);
            hess.fill(0.0);
            obj.derivatives(&x, &mut grad, &mut hess);
            cgrad.fill(0.0);
            chess.fill(0.0);
            obj.constraint_barrier_derivatives(&x, &mut cgrad, &mut chess);
            let s = poly.slacks(&x);
            let inv_s = s.map(|v| 1.0 / v);
            let g = &grad * t + &cgrad - poly.a.transpose() * &inv_s;
            let mut neg_h = -&hess * t - &chess;
            for (i, si) in inv_s.iter().enumerate() {
                let row = poly.a.row(i);
                let w = si * si;
                for p in 0..n {
                    let ap = row[p];
                    if ap == 0.0 {
                        continue;
                    }
                    for q in 0..n {
                        neg_h[(p, q)] += w * ap * row[q];
                    }
                }
            }
            let dx = match solve_spd(&neg_h, &g) {
                Some(d) => d,
                None => break,
            };
            let dec = g.dot(&dx);
            if !(dec > 0.0) || dec / 2.0 < opts.newton_tol {
                break;
            }
            let phi0 = barrier_value(obj, poly, &x, t);
            let mut alpha = 1.0;
            // keep strictly feasible first
            let adx = &poly.a * &dx;
            for (i, &ad) in adx.iter().enumerate() {
                if ad > 0.0 {
                    alpha = f64::min(alpha, 0.99 * s[i] / ad);
                }
            }
            let mut accepted = false;
            while alpha > 1e-16 {
                let cand = &x + &dx * alpha;
                let phi = barrier_value(obj, poly, &cand, t);
                if phi >= phi0 + 0.25 * alpha * dec {
                    let moved = alpha * dx.norm();
                    x = cand;
                    accepted = moved > 1e-15 * (1.0 + x.norm());
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let value = obj.value(&x);
        let gap = m / (t * value.abs().max(1.0));
        if gap <= opts.gap_tol {
            return BarrierResult {
                x,
                gap,
                converged: true,
            };
        }
        t *= opts.mu;
    }
}

/// Solves `H d = g` for symmetric positive definite `H`, with a small
/// diagonal shift when the factorization fails.
fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(g));
    }
    let scale = h.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut shift = 1e-12 * scale;
    for _ in 0..20 {
        let mut hs = h.clone();
        for i in 0..hs.nrows() {
            hs[(i, i)] += shift;
        }
        if let Some(ch) = hs.cholesky() {
            return Some(ch.solve(g));
        }
        shift *= 10.0;
    }
    None
}

struct PhaseOne;

impl Concave for PhaseOne {
    fn value(&self, x: &DVector<f64>) -> f64 {
        x[x.len() - 1]
    }
    fn derivatives(&self, x: &DVector<f64>, grad: &mut DVector<f64>, _hess: &mut DMatrix<f64>) -> f64 {
        let n = x.len();
        grad[n - 1] = 1.0;
        x[n - 1]
    }
}

/// Finds a strictly interior point of `poly` by maximizing the smallest
/// slack, starting from `guess`. Returns `None` when the interior is empty.
pub(crate) fn interior_point(poly: &Polytope, guess: &DVector<f64>) -> Option<DVector<f64>> {
    if poly.strictly_inside(guess) {
        return Some(guess.clone());
    }
    let n = guess.len();
    let m = poly.n_rows();
    let mut a = DMatrix::zeros(m, n + 1);
    a.view_mut((0, 0), (m, n)).copy_from(&poly.a);
    for i in 0..m {
        a[(i, n)] = 1.0;
    }
    // cap the auxiliary variable so the phase-one problem stays bounded
    let span = poly.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut a_ext = DMatrix::zeros(m + 1, n + 1);
    a_ext.view_mut((0, 0), (m, n + 1)).copy_from(&a);
    a_ext[(m, n)] = 1.0;
    let mut b_ext = DVector::zeros(m + 1);
    b_ext.rows_mut(0, m).copy_from(&poly.b);
    b_ext[m] = span;
    let ext = Polytope { a: a_ext, b: b_ext };
    let s0 = poly.slacks(guess).min();
    let mut x0 = DVector::zeros(n + 1);
    x0.rows_mut(0, n).copy_from(guess);
    x0[n] = s0 - 1.0 - s0.abs();
    let res = maximize(
        &PhaseOne,
        &ext,
        x0,
        &BarrierOptions {
            gap_tol: 1e-8,
            ..BarrierOptions::default()
        },
    );
    let x = res.x.rows(0, n).into_owned();
    poly.strictly_inside(&x).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// maximize -(x-2)^2 - (y-2)^2 over x + y <= 2, x, y >= 0 -> (1, 1)
    struct Bowl;
    impl Concave for Bowl {
        fn value(&self, x: &DVector<f64>) -> f64 {
            -(x[0] - 2.0).powi(2) - (x[1] - 2.0).powi(2)
        }
        fn derivatives(&self, x: &DVector<f64>, g: &mut DVector<f64>, h: &mut DMatrix<f64>) -> f64 {
            g[0] = -2.0 * (x[0] - 2.0);
            g[1] = -2.0 * (x[1] - 2.0);
            h[(0, 0)] = -2.0;
            h[(1, 1)] = -2.0;
            self.value(x)
        }
    }

    fn triangle() -> Polytope {
        Polytope::from_rows(
            vec![(vec![1.0, 1.0], 2.0), (vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0)],
            2,
        )
    }

    #[test]
    fn solves_constrained_quadratic() {
        let r = maximize(
            &Bowl,
            &triangle(),
            DVector::from_vec(vec![0.1, 0.1]),
            &BarrierOptions::default(),
        );
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{}", r.x);
    }

    #[test]
    fn phase_one_finds_interior() {
        let p = triangle();
        let x = interior_point(&p, &DVector::from_vec(vec![5.0, -3.0])).unwrap();
        assert!(p.strictly_inside(&x));
        let empty = Polytope::from_rows(vec![(vec![1.0], 0.0), (vec![-1.0], 0.0)], 1);
        assert!(interior_point(&empty, &DVector::from_vec(vec![0.3])).is_none());
    }
}
