//! Small numerical kernels shared by the rest of the crate.
//!
//! Everything here works on uniformly spaced samples unless stated
//! otherwise.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// First derivative, fourth order. Central in the interior, one-sided at the
/// two nodes nearest each end. Falls back to second order below 5 nodes.
pub fn d1(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 5 {
        for i in 0..n {
            out[i] = if i == 0 {
                if n == 2 {
                    (f[1] - f[0]) / dx
                } else {
                    (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
                }
            } else if i == n - 1 {
                if n == 2 {
                    (f[1] - f[0]) / dx
                } else {
                    (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx)
                }
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * dx)
            };
        }
        return out;
    }
    let h = 12.0 * dx;
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / h;
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / h;
    for i in 2..n - 2 {
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / h;
    }
    let m = n - 1;
    out[m] =
        (25.0 * f[m] - 48.0 * f[m - 1] + 36.0 * f[m - 2] - 16.0 * f[m - 3] + 3.0 * f[m - 4]) / h;
    out[m - 1] = (3.0 * f[m] + 10.0 * f[m - 1] - 18.0 * f[m - 2] + 6.0 * f[m - 3] - f[m - 4]) / h;
    out
}

/// Second derivative, fourth order, same layout as [`d1`]. Needs 6 nodes for
/// the fourth-order end stencils; falls back to second order below that.
pub fn d2(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    let h2 = dx * dx;
    if n < 6 {
        for i in 1..n - 1 {
            out[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) / h2;
        }
        out[0] = out[1];
        out[n - 1] = out[n - 2];
        return out;
    }
    let h = 12.0 * h2;
    out[0] =
        (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5]) / h;
    out[1] = (10.0 * f[0] - 15.0 * f[1] - 4.0 * f[2] + 14.0 * f[3] - 6.0 * f[4] + f[5]) / h;
    for i in 2..n - 2 {
        out[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / h;
    }
    let m = n - 1;
    out[m] = (45.0 * f[m] - 154.0 * f[m - 1] + 214.0 * f[m - 2] - 156.0 * f[m - 3]
        + 61.0 * f[m - 4]
        - 10.0 * f[m - 5])
        / h;
    out[m - 1] = (10.0 * f[m] - 15.0 * f[m - 1] - 4.0 * f[m - 2] + 14.0 * f[m - 3]
        - 6.0 * f[m - 4]
        + f[m - 5])
        / h;
    out
}

/// Composite Simpson weights (already multiplied by `dx`). An even number of
/// nodes closes with a 3/8 panel on the last three intervals.
pub fn simpson_weights(n: usize, dx: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => return w,
        2 => {
            w[0] = 0.5 * dx;
            w[1] = 0.5 * dx;
            return w;
        }
        _ => {}
    }
    let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
    let mut i = 0;
    while i + 2 <= simpson_end {
        w[i] += dx / 3.0;
        w[i + 1] += 4.0 * dx / 3.0;
        w[i + 2] += dx / 3.0;
        i += 2;
    }
    if n.is_multiple_of(2) {
        let s = simpson_end;
        w[s] += 3.0 * dx / 8.0;
        w[s + 1] += 9.0 * dx / 8.0;
        w[s + 2] += 9.0 * dx / 8.0;
        w[s + 3] += 3.0 * dx / 8.0;
    }
    w
}

pub fn integrate(f: &[f64], dx: f64) -> f64 {
    simpson_weights(f.len(), dx)
        .iter()
        .zip(f)
        .map(|(w, v)| w * v)
        .sum()
}

/// Running integral `F(x_i) = ∫_0^{x_i} f`, fourth order per interval, so
/// it can be differentiated again without losing order.
pub fn cumulative_integral(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * dx * (f[i - 1] + f[i]);
        }
        return out;
    }
    let c = dx / 24.0;
    for i in 0..n - 1 {
        let piece = if i == 0 {
            c * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i == n - 2 {
            c * (f[i - 2] - 5.0 * f[i - 1] + 19.0 * f[i] + 9.0 * f[i + 1])
        } else {
            c * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        };
        out[i + 1] = out[i] + piece;
    }
    out
}

/// Cubic Lagrange interpolation of uniformly spaced samples `y` starting at
/// `x0` with spacing `h`. Clamps to the sample range.
pub fn lagrange4(y: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let n = y.len();
    match n {
        0 => return f64::NAN,
        1 => return y[0],
        2 | 3 => {
            let s = ((x - x0) / h).clamp(0.0, (n - 1) as f64);
            let i = (s as usize).min(n - 2);
            let t = s - i as f64;
            return y[i] * (1.0 - t) + y[i + 1] * t;
        }
        _ => {}
    }
    let s = ((x - x0) / h).clamp(0.0, (n - 1) as f64);
    let base = (s as usize).saturating_sub(1).min(n - 4);
    let t = s - base as f64;
    let (y0, y1, y2, y3) = (y[base], y[base + 1], y[base + 2], y[base + 3]);
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    y0 * l0 + y1 * l1 + y2 * l2 + y3 * l3
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored with
/// room for the fill produced by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// Panics if `(i, j)` lies outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Gaussian elimination with partial pivoting; overwrites `b` with the
    /// solution.
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::GridMismatch);
        }
        let reach = self.kl + self.ku;
        let mut scale = 0.0f64;
        for v in &self.data {
            scale = scale.max(v.abs());
        }
        if scale == 0.0 {
            return Err(Error::NonConvergence("banded solve (zero matrix)"));
        }
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= scale * 1e-300 {
                return Err(Error::NonConvergence("banded solve (singular matrix)"));
            }
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let c = self.idx(p, j);
                    self.data.swap(a, c);
                }
                b.swap(k, p);
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let factor = self.data[ik] / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.data[ik] = 0.0;
                for j in k + 1..=last_col {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= factor * kj;
                }
                b[i] -= factor * b[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=last_col {
                s -= self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
        Ok(())
    }
}

/// Finite-difference Jacobian of a map whose Jacobian is banded, using
/// `kl + ku + 1` evaluations of `f` (columns sharing a color are perturbed
/// together).
pub fn banded_jacobian<F>(
    x: &[f64],
    f0: &[f64],
    kl: usize,
    ku: usize,
    mut f: F,
) -> Result<BandMatrix>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let colors = kl + ku + 1;
    let mut jac = BandMatrix::zeros(n, kl, ku);
    let mut xp = x.to_vec();
    let mut steps = vec![0.0; n];
    for c in 0..colors.min(n) {
        xp.copy_from_slice(x);
        let mut j = c;
        while j < n {
            let h = 1e-7 * x[j].abs().max(1.0);
            steps[j] = h;
            xp[j] = x[j] + h;
            j += colors;
        }
        let fp = f(&xp)?;
        let mut j = c;
        while j < n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                jac.set(i, j, (fp[i] - f0[i]) / steps[j]);
            }
            j += colors;
        }
    }
    Ok(jac)
}

/// Root of a scalar function on `[lo, hi]`, preferring the one closest to
/// `guess`. `f` returns the value and its derivative. Newton steps are
/// accepted when they stay inside the current bracket, otherwise the step
/// bisects. If the end values do not bracket a root the interval is scanned
/// for a sign change nearest the guess.
pub fn find_root<F>(mut f: F, lo: f64, hi: f64, guess: f64, tol: f64) -> Option<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    if !(lo < hi) {
        return None;
    }
    let guess = guess.clamp(lo, hi);
    // Try plain Newton first: near the previous solution this is nearly
    // always enough and finds the branch the caller is following.
    let mut x = guess;
    for _ in 0..8 {
        let (v, dv) = f(x);
        if v == 0.0 {
            return Some(x);
        }
        if dv == 0.0 || !dv.is_finite() {
            break;
        }
        let next = x - v / dv;
        if !(next > lo && next < hi) {
            break;
        }
        if (next - x).abs() <= tol * (1.0 + x.abs()) {
            return Some(next);
        }
        x = next;
    }

    const PIECES: usize = 64;
    let width = (hi - lo) / PIECES as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut a = lo;
    let mut fa = f(a).0;
    for k in 1..=PIECES {
        let b = if k == PIECES {
            hi
        } else {
            lo + width * k as f64
        };
        let fb = f(b).0;
        if fa == 0.0 {
            best = Some(pick_closer(best, (a, a), guess));
        } else if fa.signum() != fb.signum() || fb == 0.0 {
            best = Some(pick_closer(best, (a, b), guess));
        }
        a = b;
        fa = fb;
    }
    let (a, b) = best?;
    if a == b {
        return Some(a);
    }
    bracketed(&mut f, a, b, tol)
}

fn pick_closer(best: Option<(f64, f64)>, cand: (f64, f64), guess: f64) -> (f64, f64) {
    let dist = |(a, b): (f64, f64)| {
        if guess >= a && guess <= b {
            0.0
        } else {
            (a - guess).abs().min((b - guess).abs())
        }
    };
    match best {
        Some(prev) if dist(prev) <= dist(cand) => prev,
        _ => cand,
    }
}

fn bracketed<F>(f: &mut F, mut a: f64, mut b: f64, tol: f64) -> Option<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut fa = f(a).0;
    let fb = f(b).0;
    if fb == 0.0 {
        return Some(b);
    }
    if fa == 0.0 {
        return Some(a);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (v, dv) = f(x);
        if v == 0.0 {
            return Some(x);
        }
        if v.signum() == fa.signum() {
            a = x;
            fa = v;
        } else {
            b = x;
        }
        let newton = if dv != 0.0 { x - v / dv } else { f64::NAN };
        let next = if newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= tol * (1.0 + x.abs()) || (b - a) <= tol * (1.0 + a.abs()) {
            return Some(next);
        }
        x = next;
    }
    Some(x)
}

/// Interpolating cubic spline with not-a-knot end conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    /// Needs at least 4 strictly increasing abscissae.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::InvalidConfig(
                "spline abscissae and ordinates differ in length".into(),
            ));
        }
        if n < 4 {
            return Err(Error::InvalidConfig("spline needs at least 4 nodes".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "spline abscissae must be finite and strictly increasing".into(),
            ));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let mut a = BandMatrix::zeros(n, 2, 2);
        let mut rhs = vec![0.0; n];
        // Not-a-knot: third derivative continuous across x[1] and x[n-2].
        a.set(0, 0, h[1]);
        a.set(0, 1, -(h[0] + h[1]));
        a.set(0, 2, h[0]);
        for i in 1..n - 1 {
            a.set(i, i - 1, h[i - 1]);
            a.set(i, i, 2.0 * (h[i - 1] + h[i]));
            a.set(i, i + 1, h[i]);
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        let (p, q) = (h[n - 3], h[n - 2]);
        a.set(n - 1, n - 3, q);
        a.set(n - 1, n - 2, -(p + q));
        a.set(n - 1, n - 1, p);
        a.solve(&mut rhs)?;
        Ok(CubicSpline { x, y, m: rhs })
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        match self
            .x
            .binary_search_by(|v| v.partial_cmp(&t).unwrap_or(core::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Value and first two derivatives. Outside the node range the end
    /// cubics are extended.
    pub fn eval_all(&self, t: f64) -> (f64, f64, f64) {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d =
            (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_all(t).0
    }

    /// Third derivative (piecewise constant).
    pub fn third(&self, t: f64) -> f64 {
        let i = self.segment(t);
        (self.m[i + 1] - self.m[i]) / (self.x[i + 1] - self.x[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn grid(n: usize, len: f64) -> (Vec<f64>, f64) {
        let dx = len / (n - 1) as f64;
        ((0..n).map(|i| i as f64 * dx).collect(), dx)
    }

    #[test]
    fn d1_exact_on_quartics() {
        let (x, dx) = grid(11, 2.0);
        let f: Vec<f64> = x.iter().map(|x| x.powi(4) - 2.0 * x.powi(3) + x).collect();
        let d = d1(&f, dx);
        for (xi, di) in x.iter().zip(&d) {
            let exact = 4.0 * xi.powi(3) - 6.0 * xi.powi(2) + 1.0;
            assert!((di - exact).abs() < 1e-10, "{xi}: {di} vs {exact}");
        }
    }

    #[test]
    fn d2_exact_on_quintics() {
        let (x, dx) = grid(13, 1.5);
        let f: Vec<f64> = x.iter().map(|x| x.powi(5) - x.powi(2)).collect();
        let d = d2(&f, dx);
        for (xi, di) in x.iter().zip(&d) {
            let exact = 20.0 * xi.powi(3) - 2.0;
            assert!((di - exact).abs() < 1e-8, "{xi}: {di} vs {exact}");
        }
    }

    #[test]
    fn derivative_order_on_sine() {
        let err = |n: usize| {
            let (x, dx) = grid(n, 1.0);
            let f: Vec<f64> = x.iter().map(|x| (3.0 * x).sin()).collect();
            d1(&f, dx)
                .iter()
                .zip(&x)
                .map(|(d, x)| (d - 3.0 * (3.0 * x).cos()).abs())
                .fold(0.0, f64::max)
        };
        let rate = (err(41) / err(81)).log2();
        assert!(rate > 3.8, "rate {rate}");
    }

    #[test]
    fn simpson_weights_integrate_cubics_for_any_parity() {
        for n in [3, 4, 5, 8, 9, 10] {
            let (x, dx) = grid(n, 3.0);
            let f: Vec<f64> = x.iter().map(|x| x * x * x - x).collect();
            let exact = 81.0 / 4.0 - 4.5;
            assert!((integrate(&f, dx) - exact).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn cumulative_integral_matches_antiderivative() {
        let (x, dx) = grid(201, PI);
        let f: Vec<f64> = x.iter().map(|x| x.cos()).collect();
        let c = cumulative_integral(&f, dx);
        for (xi, ci) in x.iter().zip(&c) {
            assert!((ci - xi.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.5).powi(3)).collect();
        for t in [0.1, 1.3, 2.71, 4.49] {
            assert!((lagrange4(&y, 0.0, 0.5, t) - t.powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_solve_matches_dense() {
        let n = 12;
        let mut a = BandMatrix::zeros(n, 2, 1);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 1).min(n - 1) {
                // Small diagonal forces pivoting.
                let v = if i == j {
                    0.01
                } else {
                    1.0 + (i * 7 + j * 3) as f64 % 5.0
                };
                a.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 2.0).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x_true[j]).sum())
            .collect();
        a.solve(&mut b).unwrap();
        for (u, v) in b.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn banded_jacobian_of_tridiagonal_map() {
        let x: Vec<f64> = (0..9).map(|i| 0.3 * i as f64).collect();
        let map = |x: &[f64]| -> Result<Vec<f64>> {
            let n = x.len();
            Ok((0..n)
                .map(|i| {
                    let l = if i > 0 { x[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                    x[i] * x[i] + 2.0 * l - r
                })
                .collect())
        };
        let f0 = map(&x).unwrap();
        let j = banded_jacobian(&x, &f0, 1, 1, map).unwrap();
        for i in 0..9 {
            assert!((j.get(i, i) - 2.0 * x[i]).abs() < 1e-5);
            if i > 0 {
                assert!((j.get(i, i - 1) - 2.0).abs() < 1e-5);
            }
            if i < 8 {
                assert!((j.get(i, i + 1) + 1.0).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn find_root_prefers_nearest() {
        // Roots at 1, 2, 3.
        let f = |x: f64| {
            let v = (x - 1.0) * (x - 2.0) * (x - 3.0);
            let d = 3.0 * x * x - 12.0 * x + 11.0;
            (v, d)
        };
        let r = find_root(f, 0.0, 4.0, 2.9, 1e-14).unwrap();
        assert!((r - 3.0).abs() < 1e-12);
        let r = find_root(f, 0.0, 4.0, 1.2, 1e-14).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(find_root(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 0.0, 1e-12).is_none());
    }

    #[test]
    fn spline_reproduces_cubic_and_sine() {
        let x: Vec<f64> = (0..6).map(|i| i as f64 * 0.7).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 * x * x * x - x + 1.0).collect();
        let s = CubicSpline::new(x, y).unwrap();
        for t in [0.05, 1.1, 2.2, 3.4] {
            let (v, d, dd) = s.eval_all(t);
            assert!((v - (2.0 * t * t * t - t + 1.0)).abs() < 1e-11);
            assert!((d - (6.0 * t * t - 1.0)).abs() < 1e-10);
            assert!((dd - 12.0 * t).abs() < 1e-9);
        }

        let x: Vec<f64> = (0..33).map(|i| i as f64 / 32.0).collect();
        let y: Vec<f64> = x.iter().map(|x| (PI * x).sin()).collect();
        let s = CubicSpline::new(x, y).unwrap();
        for k in 0..100 {
            let t = (k as f64 + 0.37) / 100.0;
            assert!((s.eval(t) - (PI * t).sin()).abs() < 1e-5);
        }
    }

    #[test]
    fn spline_rejects_bad_nodes() {
        assert!(CubicSpline::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]).is_err());
        assert!(CubicSpline::new(vec![0.0, 1.0, 1.0, 2.0], vec![0.0; 4]).is_err());
    }
}
