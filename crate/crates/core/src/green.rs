//! Periodic Green kernels of the unit torus, evaluated by an Ewald split.
//!
//! `G` solves `-Δ G = δ_0 - 1` with zero mean; `G2` solves `-Δ G2 = G` with zero
//! mean (Fourier coefficient `1/λ²`, `λ = 4π²|k|²`). The split parameter `eta`
//! moves work between the Gaussian-screened Fourier sum and the real-space
//! image sum of exponential integrals.

use std::f64::consts::PI;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(z)` for `z > 0`.
pub fn e1(z: f64) -> f64 {
    if z <= 1.0 {
        e1_plus_log(z) - z.ln()
    } else {
        e1_continued_fraction(z)
    }
}

/// `E1(z) + ln z`, finite as `z → 0` where it tends to `-γ_E`.
pub fn e1_plus_log(z: f64) -> f64 {
    if z > 1.0 {
        return e1_continued_fraction(z) + z.ln();
    }
    // E1(z) = -γ - ln z - Σ_{k≥1} (-z)^k / (k·k!)
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..60 {
        term *= -z / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - sum
}

fn e1_continued_fraction(z: f64) -> f64 {
    // modified Lentz on E1(z) = e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..200 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// `E2(z) = e^{-z} - z E1(z)`, with `E2(0) = 1`.
pub fn e2(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        (-z).exp() - z * e1(z)
    }
}

/// Truncation of the Ewald sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ewald {
    pub eta: f64,
    /// Fourier modes with `|k|² ≤ kmax2` are kept.
    pub kmax2: i64,
    /// Real-space images `n ∈ [-images, images]²` around the minimum image.
    pub images: i64,
}

impl Default for Ewald {
    fn default() -> Self {
        Self { eta: 0.015, kmax2: 72, images: 1 }
    }
}

/// Fourier-side tables for one truncation: `(kx, ky, coefficient)` for the
/// quarter lattice `kx, ky ≥ 0`, multiplicity folded in.
#[derive(Debug, Clone)]
struct Modes {
    kmax: usize,
    g: Vec<(usize, usize, f64)>,
    g2: Vec<(usize, usize, f64)>,
}

impl Modes {
    fn new(e: &Ewald) -> Self {
        let kmax = (e.kmax2 as f64).sqrt().floor() as usize;
        assert!(kmax < 32, "Fourier truncation too large");
        let mut g = Vec::new();
        let mut g2 = Vec::new();
        for kx in 0..=kmax {
            for ky in 0..=kmax {
                let k2 = (kx * kx + ky * ky) as i64;
                if k2 == 0 || k2 > e.kmax2 {
                    continue;
                }
                let lam = 4.0 * PI * PI * k2 as f64;
                let mult = if kx == 0 || ky == 0 { 2.0 } else { 4.0 };
                let damp = (-lam * e.eta).exp();
                g.push((kx, ky, mult * damp / lam));
                g2.push((kx, ky, mult * damp * (1.0 + lam * e.eta) / (lam * lam)));
            }
        }
        Self { kmax, g, g2 }
    }
}

/// Evaluator for `G`, `∇G`, `G2` and `∇G2` at one truncation.
#[derive(Debug, Clone)]
pub struct PeriodicGreen {
    pub ewald: Ewald,
    modes: Modes,
}

impl Default for PeriodicGreen {
    fn default() -> Self {
        Self::new(Ewald::default())
    }
}

#[inline]
fn min_image(d: f64) -> f64 {
    d - d.round()
}

fn trig_table(x: f64, kmax: usize) -> ([f64; 32], [f64; 32]) {
    debug_assert!(kmax < 32);
    let mut c = [0.0; 32];
    let mut s = [0.0; 32];
    let (s1, c1) = (2.0 * PI * x).sin_cos();
    c[0] = 1.0;
    if kmax >= 1 {
        c[1] = c1;
        s[1] = s1;
    }
    for k in 2..=kmax {
        c[k] = c[k - 1] * c1 - s[k - 1] * s1;
        s[k] = s[k - 1] * c1 + c[k - 1] * s1;
    }
    (c, s)
}

impl PeriodicGreen {
    pub fn new(ewald: Ewald) -> Self {
        let modes = Modes::new(&ewald);
        Self { ewald, modes }
    }

    /// Truncation with twice the Fourier radius and image shells, for checks.
    pub fn doubled(&self) -> Self {
        Self::new(Ewald {
            eta: self.ewald.eta,
            kmax2: 4 * self.ewald.kmax2,
            images: 2 * self.ewald.images,
        })
    }

    /// Fourier part: value and gradient with the given coefficient table.
    fn fourier(&self, r: [f64; 2], table: &[(usize, usize, f64)]) -> (f64, [f64; 2]) {
        let (cx, sx) = trig_table(r[0], self.modes.kmax);
        let (cy, sy) = trig_table(r[1], self.modes.kmax);
        let mut v = 0.0;
        let mut gx = 0.0;
        let mut gy = 0.0;
        for &(kx, ky, a) in table {
            // Σ over sign pairs of cos(2π(±kx x ± ky y)) folds to cos·cos
            v += a * cx[kx] * cy[ky];
            gx -= a * 2.0 * PI * kx as f64 * sx[kx] * cy[ky];
            gy -= a * 2.0 * PI * ky as f64 * cx[kx] * sy[ky];
        }
        (v, [gx, gy])
    }

    fn for_images(&self, r: [f64; 2], mut f: impl FnMut([f64; 2], f64, f64)) {
        let m = self.ewald.images;
        let inv4eta = 1.0 / (4.0 * self.ewald.eta);
        for nx in -m..=m {
            for ny in -m..=m {
                let d = [r[0] - nx as f64, r[1] - ny as f64];
                let rho2 = d[0] * d[0] + d[1] * d[1];
                let z = rho2 * inv4eta;
                if z > 45.0 {
                    continue;
                }
                f(d, rho2, z);
            }
        }
    }

    fn reduce(x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
        [min_image(x[0] - y[0]), min_image(x[1] - y[1])]
    }

    /// `G(x - y)`; singular when `x ≡ y`.
    pub fn g(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.g_at(Self::reduce(x, y))
    }

    /// `G` at a minimum-image displacement.
    pub fn g_at(&self, r: [f64; 2]) -> f64 {
        let r = [min_image(r[0]), min_image(r[1])];
        let (mut v, _) = self.fourier(r, &self.modes.g);
        self.for_images(r, |_, _, z| v += e1(z) / (4.0 * PI));
        v - self.ewald.eta
    }

    /// Regular part `R(r) = G(r) + (1/2π) ln|r|`, finite at `r = 0`.
    pub fn regular_at(&self, r: [f64; 2]) -> f64 {
        let r = [min_image(r[0]), min_image(r[1])];
        let (mut v, _) = self.fourier(r, &self.modes.g);
        let eta = self.ewald.eta;
        self.for_images(r, |d, _, z| {
            if d == r {
                v += (e1_plus_log(z) + (4.0 * eta).ln()) / (4.0 * PI);
            } else {
                v += e1(z) / (4.0 * PI);
            }
        });
        v - eta
    }

    /// `R(0)`.
    pub fn regular_origin(&self) -> f64 {
        self.regular_at([0.0, 0.0])
    }

    /// `∇_x G(x - y)`.
    pub fn grad_g(&self, x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
        self.grad_g_at(Self::reduce(x, y))
    }

    pub fn grad_g_at(&self, r: [f64; 2]) -> [f64; 2] {
        let r = [min_image(r[0]), min_image(r[1])];
        let (_, mut g) = self.fourier(r, &self.modes.g);
        self.for_images(r, |d, rho2, z| {
            let a = -(-z).exp() / (2.0 * PI * rho2);
            g[0] += a * d[0];
            g[1] += a * d[1];
        });
        g
    }

    /// Value and gradient of `G` in one pass.
    pub fn g_and_grad_at(&self, r: [f64; 2]) -> (f64, [f64; 2]) {
        let r = [min_image(r[0]), min_image(r[1])];
        let (mut v, mut g) = self.fourier(r, &self.modes.g);
        self.for_images(r, |d, rho2, z| {
            let ez = (-z).exp();
            v += e1(z) / (4.0 * PI);
            let a = -ez / (2.0 * PI * rho2);
            g[0] += a * d[0];
            g[1] += a * d[1];
        });
        (v - self.ewald.eta, g)
    }

    /// `G2(x - y)`; continuous everywhere.
    pub fn g2(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.g2_at(Self::reduce(x, y))
    }

    pub fn g2_at(&self, r: [f64; 2]) -> f64 {
        let r = [min_image(r[0]), min_image(r[1])];
        let (mut v, _) = self.fourier(r, &self.modes.g2);
        let eta = self.ewald.eta;
        self.for_images(r, |_, _, z| v += eta * e2(z) / (4.0 * PI));
        v - 0.5 * eta * eta
    }

    /// `∇_x G2(x - y)`.
    pub fn grad_g2(&self, x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
        self.grad_g2_at(Self::reduce(x, y))
    }

    pub fn grad_g2_at(&self, r: [f64; 2]) -> [f64; 2] {
        let r = [min_image(r[0]), min_image(r[1])];
        let (_, mut g) = self.fourier(r, &self.modes.g2);
        self.for_images(r, |d, rho2, z| {
            if rho2 == 0.0 {
                return;
            }
            let a = -e1(z) / (8.0 * PI);
            g[0] += a * d[0];
            g[1] += a * d[1];
        });
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_matches_reference_values() {
        // Abramowitz & Stegun table 5.1
        assert!((e1(0.5) - 0.559_773_594_776_160_8).abs() < 1e-14);
        assert!((e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-14);
        assert!((e1(2.0) - 0.048_900_510_708_061_12).abs() < 1e-15);
        assert!((e1(10.0) - 4.156_968_929_685_324e-6).abs() < 1e-19);
        assert!((e1_plus_log(1e-12) + EULER_GAMMA).abs() < 1e-11);
    }

    #[test]
    fn symmetric_periodic_and_doubled_truncation_agree() {
        let g = PeriodicGreen::default();
        let big = g.doubled();
        let pts = [([0.1, 0.2], [0.7, 0.9]), ([0.45, 0.05], [0.5, 0.5]), ([0.0, 0.0], [0.31, 0.77])];
        for (x, y) in pts {
            assert!((g.g(x, y) - g.g(y, x)).abs() < 1e-13);
            assert!((g.g([x[0] + 1.0, x[1]], y) - g.g(x, y)).abs() < 1e-13);
            assert!((g.g(x, y) - big.g(x, y)).abs() < 1e-12);
            assert!((g.g2(x, y) - big.g2(x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_of_split_parameter() {
        let a = PeriodicGreen::new(Ewald { eta: 0.015, kmax2: 72, images: 1 });
        let b = PeriodicGreen::new(Ewald { eta: 0.008, kmax2: 200, images: 2 });
        for r in [[0.3, 0.1], [0.02, -0.01], [0.5, 0.5]] {
            assert!((a.g_at(r) - b.g_at(r)).abs() < 1e-12);
            assert!((a.g2_at(r) - b.g2_at(r)).abs() < 1e-12);
            let (ga, gb) = (a.grad_g_at(r), b.grad_g_at(r));
            assert!((ga[0] - gb[0]).abs() < 1e-10 && (ga[1] - gb[1]).abs() < 1e-10);
        }
        assert!((a.regular_origin() - b.regular_origin()).abs() < 1e-12);
    }

    #[test]
    fn regular_part_bounded_near_singularity() {
        let g = PeriodicGreen::default();
        let r0 = g.regular_origin();
        let r = [1e-6, 0.0];
        let near = g.g_at(r) + r[0].ln() / (2.0 * PI);
        assert!((near - r0).abs() < 1e-9);
        assert!((g.regular_at(r) - near).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = PeriodicGreen::default();
        let r = [0.23, -0.11];
        let h = 1e-6;
        let grad = g.grad_g_at(r);
        let grad2 = g.grad_g2_at(r);
        for ax in 0..2 {
            let mut p = r;
            let mut m = r;
            p[ax] += h;
            m[ax] -= h;
            let fd = (g.g_at(p) - g.g_at(m)) / (2.0 * h);
            let fd2 = (g.g2_at(p) - g.g2_at(m)) / (2.0 * h);
            assert!((fd - grad[ax]).abs() < 1e-7);
            assert!((fd2 - grad2[ax]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_mean_over_the_cell() {
        // midpoint rule is spectrally accurate for the smooth G2
        let g = PeriodicGreen::default();
        let n = 64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += g.g2_at([(i as f64 + 0.5) / n as f64 - 0.5, (j as f64 + 0.5) / n as f64 - 0.5]);
            }
        }
        assert!((s / (n * n) as f64).abs() < 1e-9);
    }

    #[test]
    fn g_is_minus_laplacian_of_g2() {
        let g = PeriodicGreen::default();
        let r = [0.2, 0.3];
        let h = 1e-3;
        let lap = (g.g2_at([r[0] + h, r[1]]) + g.g2_at([r[0] - h, r[1]]) + g.g2_at([r[0], r[1] + h])
            + g.g2_at([r[0], r[1] - h])
            - 4.0 * g.g2_at(r))
            / (h * h);
        assert!((-lap - g.g_at(r)).abs() < 1e-5);
    }
}
