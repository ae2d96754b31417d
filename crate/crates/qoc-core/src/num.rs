//! Small numerical utilities: scalar root bracketing, damped Newton /
//! Levenberg-Marquardt for low-dimensional systems, finite differences.

use nalgebra::{DMatrix, DVector};

/// Brent's method on a sign-changing bracket [a, b].
pub fn brentq<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa * fb > 0.0 {
        return None;
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..max_iter {
        let s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let cond_range = {
            let lo = (3.0 * a + b) / 4.0;
            !((lo.min(b) < s) && (s < lo.max(b)))
        };
        let s = if cond_range
            || (mflag && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!mflag && (s - b).abs() >= d.abs() / 2.0)
            || (mflag && (b - c).abs() < xtol)
            || (!mflag && d.abs() < xtol)
        {
            mflag = true;
            (a + b) / 2.0
        } else {
            mflag = false;
            s
        };
        let fs = f(s);
        d = b - c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
        if fb == 0.0 || (b - a).abs() < xtol {
            return Some(b);
        }
    }
    Some(b)
}

/// Forward-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<F: Fn(&DVector<f64>) -> DVector<f64>>(
    f: &F,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let f0 = f(x);
    let (m, n) = (f0.len(), x.len());
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut xp = x.clone();
        let hj = h * (1.0 + x[j].abs());
        xp[j] += hj;
        let fp = f(&xp);
        for i in 0..m {
            jac[(i, j)] = (fp[i] - f0[i]) / hj;
        }
    }
    jac
}

/// Central-difference Hessian of a scalar function.
pub fn fd_hessian<F: Fn(&DVector<f64>) -> f64>(f: &F, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let e = |si: f64, sj: f64| {
                let mut xp = x.clone();
                xp[i] += si * h;
                xp[j] += sj * h;
                f(&xp)
            };
            let v = (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Levenberg-Marquardt on a residual map with finite-difference Jacobian.
/// Returns the solution and final residual norm.
pub fn levenberg_marquardt<F: Fn(&DVector<f64>) -> DVector<f64>>(
    f: &F,
    x0: &DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> (DVector<f64>, f64) {
    let mut x = x0.clone();
    let mut r = f(&x);
    let mut cost = r.norm();
    let mut lambda = 1e-3;
    for _ in 0..max_iter {
        if cost < tol {
            break;
        }
        let jac = fd_jacobian(f, &x, 1e-7);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let n = x.len();
        let mut improved = false;
        for _ in 0..30 {
            let a = &jtj + DMatrix::identity(n, n) * lambda;
            let step = match a.lu().solve(&(-&jtr)) {
                Some(s) => s,
                None => break,
            };
            let xt = &x + &step;
            let rt = f(&xt);
            let ct = rt.norm();
            if ct < cost {
                x = xt;
                r = rt;
                cost = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    (x, cost)
}

/// Minimum-norm least squares via SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-12).expect("svd solve")
}

/// Nelder-Mead minimization; `scale` sets the initial simplex edge length.
pub fn nelder_mead<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    x0: &DVector<f64>,
    scale: f64,
    max_iter: usize,
    ftol: f64,
) -> (DVector<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.clone(), f(x0)));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += scale;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[n].1 - simplex[0].1).abs() < ftol {
            break;
        }
        let mut centroid = DVector::zeros(n);
        for (x, _) in simplex.iter().take(n) {
            centroid += x;
        }
        centroid /= n as f64;
        let worst = simplex[n].clone();
        let refl = &centroid * 2.0 - &worst.0;
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = &centroid * 3.0 - &worst.0 * 2.0;
            let fe = f(&exp);
            simplex[n] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (refl, fr);
        } else {
            let con = (&centroid + &worst.0) * 0.5;
            let fc = f(&con);
            if fc < worst.1 {
                simplex[n] = (con, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    entry.0 = (&entry.0 + &best) * 0.5;
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0].clone()
}
