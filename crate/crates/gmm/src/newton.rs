use nalgebra::{DMatrix, DVector};

pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton with a central-difference Jacobian. `f` returns `None`
/// outside its domain; the line search treats that as a rejected step.
pub(crate) fn damped_newton<F>(f: F, x0: &[f64], tol: f64, max_iter: usize) -> Option<NewtonOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let m = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    if fx.iter().any(|v| !v.is_finite()) {
        return None;
    }
    for _ in 0..max_iter {
        if max_abs(&fx) <= tol {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = match (f(&xp), f(&xm)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Some(finish(x, fx)),
            };
            for i in 0..m {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(m, fx.iter().map(|v| -v));
        let step = match jac.lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => break,
        };
        let n0 = norm2(&fx);
        let mut lam = 1.0;
        let mut accepted = false;
        while lam > 1e-8 {
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + lam * s).collect();
            if let Some(fnew) = f(&xn) {
                if fnew.iter().all(|v| v.is_finite()) && norm2(&fnew) < (1.0 - 1e-4 * lam) * n0 {
                    x = xn;
                    fx = fnew;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some(finish(x, fx))
}

fn finish(x: Vec<f64>, fx: Vec<f64>) -> NewtonOutcome {
    let max_abs = max_abs(&fx);
    NewtonOutcome {
        x,
        residual: fx,
        max_abs,
    }
}
