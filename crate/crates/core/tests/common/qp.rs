//! Independent dense solver for the soft-margin SVM dual
//! `min 0.5 a'Qa - 1'a  s.t. y'a = 0, 0 <= a <= C`.
//!
//! Accelerated projected gradient (FISTA with restarts). The projection onto
//! the feasible set is `clip(v - nu*y, 0, C)` with `nu` found by bisection.
//! Optimality is certified by the primal-dual gap: the primal objective for
//! `w = sum a_i y_i phi(x_i)` with the best offset bounds the dual optimum.

pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub bias: f64,
}

fn kernel(a: f64, b: f64, gamma: f64) -> f64 {
    (-gamma * (a - b) * (a - b)).exp()
}

fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - nu * yi).clamp(0.0, c)).collect() };
    let h = |nu: f64| -> f64 { at(nu).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    // h is non-increasing in nu
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

fn objective(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let n = a.len();
    let mut f = 0.0;
    for i in 0..n {
        let qa: f64 = (0..n).map(|j| q[i][j] * a[j]).sum();
        f += 0.5 * a[i] * qa - a[i];
    }
    f
}

/// Minimises the total hinge loss over the offset for fixed decision
/// values `g`; returns (loss, midpoint of the minimising interval).
fn best_offset(g: &[f64], y: &[f64]) -> (f64, f64) {
    let hinge = |b: f64| -> f64 { g.iter().zip(y).map(|(gi, yi)| (1.0 - yi * (gi + b)).max(0.0)).sum() };
    let mut cands: Vec<f64> = g.iter().zip(y).map(|(gi, yi)| yi - gi).collect();
    cands.sort_by(f64::total_cmp);
    let best = cands.iter().map(|&b| hinge(b)).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + best.abs());
    let opt: Vec<f64> = cands.iter().copied().filter(|&b| hinge(b) <= best + tol).collect();
    (best, 0.5 * (opt[0] + opt[opt.len() - 1]))
}

pub fn solve(x: &[f64], labels: &[u8], gamma: f64, c: f64, gap_tol: f64) -> QpSolution {
    let n = x.len();
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let q: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * kernel(x[i], x[j], gamma)).collect()).collect();
    // Lipschitz bound from the Gershgorin radius
    let lip = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lip;
    let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| q[i][j] * a[j]).sum::<f64>() - 1.0).collect() };
    let certify = |a: &[f64]| -> (f64, f64) {
        let dual = -objective(&q, a);
        let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[j] * y[j] * kernel(x[j], x[i], gamma)).sum()).collect();
        let w2: f64 = (0..n).map(|i| a[i] * y[i] * g[i]).sum();
        let (hinge, b) = best_offset(&g, &y);
        (0.5 * w2 + c * hinge - dual, b)
    };

    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&q, &a);
    let mut gap = f64::INFINITY;
    let mut bias = 0.0;
    for k in 1..=5_000_000usize {
        if k % 500 == 0 {
            (gap, bias) = certify(&a);
            if gap <= gap_tol {
                break;
            }
            if k % 5000 == 0 {
                if let Some(p) = polish(&q, &y, &a, c) {
                    let (pg, pb) = certify(&p);
                    if pg <= gap_tol {
                        a = p;
                        (gap, bias) = (pg, pb);
                        break;
                    }
                }
            }
        }
        let gz = grad(&z);
        let v: Vec<f64> = z.iter().zip(&gz).map(|(zi, gi)| zi - step * gi).collect();
        let a_next = project(&v, &y, c);
        let f_next = objective(&q, &a_next);
        if f_next > f_prev {
            // adaptive restart
            t = 1.0;
            z = a.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = a_next.iter().zip(&a).map(|(an, ao)| an + (t - 1.0) / t_next * (an - ao)).collect();
        a = a_next;
        t = t_next;
        f_prev = f_next;
    }
    if gap > gap_tol {
        (gap, bias) = certify(&a);
    }
    QpSolution { objective: objective(&q, &a), alpha: a, gap, bias }
}

/// Exact minimiser on the active set suggested by `a`: multipliers near a
/// bound are pinned there and the equality-constrained problem on the rest
/// is solved as a linear system. `None` when the system is singular or the
/// result leaves the box.
fn polish(q: &[Vec<f64>], y: &[f64], a: &[f64], c: f64) -> Option<Vec<f64>> {
    let n = a.len();
    let eps = 1e-6 * c.max(1.0);
    let mut fixed = a.to_vec();
    let free: Vec<usize> = (0..n).filter(|&i| a[i] > eps && a[i] < c - eps).collect();
    for i in 0..n {
        if !free.contains(&i) {
            fixed[i] = if a[i] <= eps { 0.0 } else { c };
        }
    }
    let m = free.len();
    // [Q_FF y_F; y_F' 0] [a_F; nu] = [1 - Q_FB a_B; -y_B' a_B]
    let mut mat = vec![vec![0.0; m + 2]; m + 1];
    for (r, &i) in free.iter().enumerate() {
        for (s, &j) in free.iter().enumerate() {
            mat[r][s] = q[i][j];
        }
        mat[r][m] = y[i];
        mat[m][r] = y[i];
        let fixed_part: f64 = (0..n).filter(|j| !free.contains(j)).map(|j| q[i][j] * fixed[j]).sum();
        mat[r][m + 1] = 1.0 - fixed_part;
    }
    mat[m][m + 1] = -(0..n).filter(|j| !free.contains(j)).map(|j| y[j] * fixed[j]).sum::<f64>();
    let sol = gauss(mat)?;
    for (r, &i) in free.iter().enumerate() {
        if !(0.0..=c).contains(&sol[r]) {
            return None;
        }
        fixed[i] = sol[r];
    }
    Some(fixed)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-13 {
            return None;
        }
        m.swap(col, piv);
        let pivot = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot[col];
                for (v, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *v -= f * p;
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

pub fn decision(x: &[f64], labels: &[u8], sol: &QpSolution, gamma: f64, at: f64) -> f64 {
    x.iter()
        .zip(labels)
        .zip(&sol.alpha)
        .map(|((xi, &l), a)| a * if l == 1 { 1.0 } else { -1.0 } * kernel(*xi, at, gamma))
        .sum::<f64>()
        + sol.bias
}

pub struct Instance {
    pub x: Vec<f64>,
    pub labels: Vec<u8>,
    pub gamma: f64,
    pub c: f64,
}

/// Random 1-D problem with 2..=20 points and both classes present. Classes
/// overlap so that both bounded and free multipliers occur.
pub fn random_instance(seed: u64) -> Instance {
    use rand::Rng;
    let mut r = super::rng(seed);
    let n = r.random_range(2..=20usize);
    let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
    labels[0] = 0;
    labels[1] = 1;
    let x = labels.iter().map(|&l| r.random_range(0.0..0.7) + 0.3 * f64::from(l)).collect();
    let gamma = [0.0625, 0.5, 1.0, 4.0, 16.0][r.random_range(0..5usize)];
    let c = [0.1, 1.0, 10.0][r.random_range(0..3usize)];
    Instance { x, labels, gamma, c }
}
