//! Self-converging composite Simpson quadrature and a fixed-step RK4 helper.

use num_complex::Complex64;

use crate::linalg::{self, CMatrix};
use crate::{Error, Result};

/// Quantities that can be integrated: closed under scaled accumulation.
pub trait Integrand: Clone {
    fn scaled(&self, w: f64) -> Self;
    fn add_scaled(&mut self, w: f64, other: &Self);
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        *self += w * other;
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl<const N: usize> Integrand for [f64; N] {
    fn scaled(&self, w: f64) -> Self {
        self.map(|x| x * w)
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        for (x, y) in self.iter_mut().zip(other) {
            *x += w * y;
        }
    }
    fn magnitude(&self) -> f64 {
        self.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl Integrand for Complex64 {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        *self += other * w;
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Integrand for CMatrix {
    fn scaled(&self, w: f64) -> Self {
        self * Complex64::new(w, 0.0)
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        self.zip_apply(other, |x, y| *x += y * w);
    }
    fn magnitude(&self) -> f64 {
        linalg::max_abs(self)
    }
}

/// Settings for [`simpson`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimpsonOptions {
    /// Stop once two successive refinements differ by at most
    /// `tolerance · max(|I|, (b - a) · max|f|)`.
    pub tolerance: f64,
    /// Number of intervals on the first pass (rounded up to even).
    pub initial_intervals: usize,
    /// Give up once the interval count would exceed this.
    pub max_intervals: usize,
}

impl Default for SimpsonOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            initial_intervals: 16,
            max_intervals: 1 << 22,
        }
    }
}

/// Result of a converged quadrature.
#[derive(Clone, Debug)]
pub struct Quadrature<T> {
    pub value: T,
    pub intervals: usize,
    pub last_change: f64,
}

/// Composite Simpson rule on `[a, b]`, doubling the interval count until two
/// successive estimates agree. Function values are reused across levels.
pub fn simpson<T: Integrand>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    opts: SimpsonOptions,
) -> Result<Quadrature<T>> {
    let f_a = f(a);
    if a == b {
        return Ok(Quadrature {
            value: f_a.scaled(0.0),
            intervals: 0,
            last_change: 0.0,
        });
    }
    let f_b = f(b);
    let mut n = opts.initial_intervals.max(2);
    n += n % 2;
    let mut h = (b - a) / n as f64;

    let mut ends = f_a.clone();
    ends.add_scaled(1.0, &f_b);
    let mut f_max = f_a.magnitude().max(f_b.magnitude());

    // interior points split into the odd-indexed set (weight 4) and the
    // even-indexed set (weight 2)
    let mut odd = f_a.scaled(0.0);
    let mut even = f_a.scaled(0.0);
    for i in 1..n {
        let v = f(a + i as f64 * h);
        f_max = f_max.max(v.magnitude());
        if i % 2 == 1 {
            odd.add_scaled(1.0, &v);
        } else {
            even.add_scaled(1.0, &v);
        }
    }
    let estimate = |ends: &T, odd: &T, even: &T, h: f64| {
        let mut s = ends.clone();
        s.add_scaled(4.0, odd);
        s.add_scaled(2.0, even);
        s.scaled(h / 3.0)
    };
    let mut current = estimate(&ends, &odd, &even, h);
    let mut change = f64::INFINITY;

    while 2 * n <= opts.max_intervals {
        // previous interior points all become even-indexed
        even.add_scaled(1.0, &odd);
        let mut fresh = f_a.scaled(0.0);
        let h_new = h / 2.0;
        for i in 0..n {
            let v = f(a + (2 * i + 1) as f64 * h_new);
            f_max = f_max.max(v.magnitude());
            fresh.add_scaled(1.0, &v);
        }
        odd = fresh;
        n *= 2;
        h = h_new;
        let next = estimate(&ends, &odd, &even, h);
        let mut diff = next.clone();
        diff.add_scaled(-1.0, &current);
        change = diff.magnitude();
        current = next;
        let scale = current.magnitude().max((b - a).abs() * f_max);
        if change <= opts.tolerance * scale || scale == 0.0 {
            return Ok(Quadrature {
                value: current,
                intervals: n,
                last_change: change,
            });
        }
    }
    Err(Error::Quadrature {
        tolerance: opts.tolerance,
        change,
    })
}

/// Converged integral of a real function with default settings.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    Ok(simpson(f, a, b, SimpsonOptions::default())?.value)
}

/// One classical fourth-order Runge–Kutta step for `y' = f(t, y)`.
pub fn rk4_step<T: Integrand>(f: &impl Fn(f64, &T) -> T, t: f64, y: &T, h: f64) -> T {
    let k1 = f(t, y);
    let mut y2 = y.clone();
    y2.add_scaled(h / 2.0, &k1);
    let k2 = f(t + h / 2.0, &y2);
    let mut y3 = y.clone();
    y3.add_scaled(h / 2.0, &k2);
    let k3 = f(t + h / 2.0, &y3);
    let mut y4 = y.clone();
    y4.add_scaled(h, &k3);
    let k4 = f(t + h, &y4);
    let mut out = y.clone();
    out.add_scaled(h / 6.0, &k1);
    out.add_scaled(h / 3.0, &k2);
    out.add_scaled(h / 3.0, &k3);
    out.add_scaled(h / 6.0, &k4);
    out
}
