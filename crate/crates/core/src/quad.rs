//! Uniform tensor grids and composite Newton-Cotes weights.

use serde::{Deserialize, Serialize};

use crate::model::{BoxDomain, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadRule {
    #[default]
    Trapezoid,
    Simpson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformAxis {
    pub lo: f64,
    pub h: f64,
    pub n: usize,
}

impl UniformAxis {
    /// Axis over [lo, hi] with spacing at most `h_max`. Simpson needs an odd
    /// node count, which is enforced here.
    pub fn covering(lo: f64, hi: f64, h_max: f64, rule: QuadRule) -> Self {
        let len = hi - lo;
        let mut n = ((len / h_max).ceil() as usize + 1).max(2);
        if rule == QuadRule::Simpson && n % 2 == 0 {
            n += 1;
        }
        Self {
            lo,
            h: len / (n - 1) as f64,
            n,
        }
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.h
    }

    pub fn hi(&self) -> f64 {
        self.node(self.n - 1)
    }

    pub fn weights(&self, rule: QuadRule) -> Vec<f64> {
        match rule {
            QuadRule::Trapezoid => trapezoid_weights(self.n, self.h),
            QuadRule::Simpson => simpson_weights(self.n, self.h),
        }
    }
}

pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    if n == 1 {
        w[0] = 0.0;
    }
    w
}

/// Composite Simpson weights; `n` must be odd.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n % 2 == 1 && n >= 3, "Simpson rule needs an odd node count >= 3");
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            }
        })
        .collect()
}

/// Tensor grid; flat indices are row-major with the last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid<const D: usize> {
    pub axes: [UniformAxis; D],
}

impl<const D: usize> UniformGrid<D> {
    pub fn covering(bx: &BoxDomain<D>, h_max: f64, rule: QuadRule) -> Self {
        Self {
            axes: std::array::from_fn(|k| UniformAxis::covering(bx.lo[k], bx.hi[k], h_max, rule)),
        }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_spacing(&self) -> f64 {
        self.axes.iter().map(|a| a.h).fold(0.0, f64::max)
    }

    /// Number of nodes along the last axis: one grid "row".
    pub fn row_len(&self) -> usize {
        self.axes[D - 1].n
    }

    pub fn index(&self, mut flat: usize) -> [usize; D] {
        let mut idx = [0usize; D];
        for k in (0..D).rev() {
            idx[k] = flat % self.axes[k].n;
            flat /= self.axes[k].n;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Point<D> {
        let idx = self.index(flat);
        Point::<D>::from_fn(|k, _| self.axes[k].node(idx[k]))
    }

    pub fn weights(&self, rule: QuadRule) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self.axes.iter().map(|a| a.weights(rule)).collect();
        (0..self.len())
            .map(|f| {
                let idx = self.index(f);
                (0..D).map(|k| per_axis[k][idx[k]]).product()
            })
            .collect()
    }
}

/// Integral of `f` over [lo, hi] by the composite rule with spacing <= `h_max`.
pub fn integrate_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, h_max: f64, rule: QuadRule) -> f64 {
    let ax = UniformAxis::covering(lo, hi, h_max, rule);
    ax.weights(rule)
        .iter()
        .enumerate()
        .map(|(i, w)| w * f(ax.node(i)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rules_integrate_polynomials() {
        let t = integrate_1d(|x| x, 0.0, 2.0, 0.3, QuadRule::Trapezoid);
        assert!((t - 2.0).abs() < 1e-14);
        let s = integrate_1d(|x| x * x * x, -1.0, 2.0, 0.1, QuadRule::Simpson);
        assert!((s - 3.75).abs() < 1e-12);
    }

    #[test]
    fn grid_weights_sum_to_area() {
        let bx = BoxDomain::<2>::new(Point::<2>::new(-1.0, 0.0), Point::<2>::new(1.0, 0.5));
        for rule in [QuadRule::Trapezoid, QuadRule::Simpson] {
            let g = UniformGrid::covering(&bx, 0.07, rule);
            let s: f64 = g.weights(rule).iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
            assert!(g.max_spacing() <= 0.07);
        }
    }

    #[test]
    fn point_is_row_major() {
        let bx = BoxDomain::<2>::new(Point::<2>::new(0.0, 0.0), Point::<2>::new(1.0, 2.0));
        let g = UniformGrid::covering(&bx, 1.0, QuadRule::Trapezoid);
        assert_eq!(g.axes[0].n, 2);
        assert_eq!(g.axes[1].n, 3);
        assert_eq!(g.point(1), Point::<2>::new(0.0, 1.0));
        assert_eq!(g.point(3), Point::<2>::new(1.0, 0.0));
    }

    proptest! {
        #[test]
        fn covering_respects_bounds(lo in -5.0f64..5.0, len in 0.01f64..10.0, h in 1e-3f64..1.0) {
            for rule in [QuadRule::Trapezoid, QuadRule::Simpson] {
                let ax = UniformAxis::covering(lo, lo + len, h, rule);
                prop_assert!(ax.h <= h * (1.0 + 1e-12));
                prop_assert!((ax.hi() - (lo + len)).abs() < 1e-9);
                let w: f64 = ax.weights(rule).iter().sum();
                prop_assert!((w - len).abs() < 1e-9 * len.max(1.0));
            }
        }
    }
}
