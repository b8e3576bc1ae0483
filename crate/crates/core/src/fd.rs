//! Centered finite-difference stencils used for derivative consistency checks
//! and for scenarios that only supply a scalar closure.

use crate::model::{Point, RealMatrix};

pub fn central_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn central_second_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

pub fn central_gradient<const D: usize>(
    f: impl Fn(&Point<D>) -> f64,
    x: &Point<D>,
    h: f64,
) -> Point<D> {
    let mut g = Point::<D>::zeros();
    for i in 0..D {
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

pub fn central_hessian<const D: usize>(
    f: impl Fn(&Point<D>) -> f64,
    x: &Point<D>,
    h: f64,
) -> RealMatrix<D> {
    let mut m = RealMatrix::<D>::zeros();
    let f0 = f(x);
    for i in 0..D {
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        m[(i, i)] = (f(&xp) - 2.0 * f0 + f(&xm)) / (h * h);
        for j in (i + 1)..D {
            let shifted = |si: f64, sj: f64| {
                let mut z = *x;
                z[i] += si * h;
                z[j] += sj * h;
                f(&z)
            };
            let v = (shifted(1.0, 1.0) - shifted(1.0, -1.0) - shifted(-1.0, 1.0)
                + shifted(-1.0, -1.0))
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}
