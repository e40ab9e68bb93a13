//! Quadrature rules on the unit interval and on triangles.
//!
//! Interval rules live on `[0, 1]` with weights summing to 1, so an integral
//! over a segment of length `L` is `L * sum(w_k f(x_k))`. Triangle rules are
//! given in barycentric coordinates with weights summing to 1, so an integral
//! over `T` is `|T| * sum(w_k f(x_k))`.

use std::f64::consts::PI;

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point Gauss-Legendre rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss rule needs at least one point");
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, refined by Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            points[i] = 0.5 * (1.0 - x);
            points[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(a + h * t))
            .sum::<f64>()
            * h
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature rule on a triangle in barycentric coordinates.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Symmetric 7-point rule of degree 5.
    pub fn seven_point() -> Self {
        let s15 = 15f64.sqrt();
        let a = (6.0 - s15) / 21.0;
        let b = (6.0 + s15) / 21.0;
        let wa = (155.0 - s15) / 1200.0;
        let wb = (155.0 + s15) / 1200.0;
        let third = 1.0 / 3.0;
        Self {
            points: vec![
                [third, third, third],
                [a, a, 1.0 - 2.0 * a],
                [a, 1.0 - 2.0 * a, a],
                [1.0 - 2.0 * a, a, a],
                [b, b, 1.0 - 2.0 * b],
                [b, 1.0 - 2.0 * b, b],
                [1.0 - 2.0 * b, b, b],
            ],
            weights: vec![9.0 / 40.0, wa, wa, wa, wb, wb, wb],
            degree: 5,
        }
    }

    /// Conical product (collapsed Gauss) rule with `n * n` points, degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        let g = GaussRule::new(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&s, &ws) in g.points.iter().zip(&g.weights) {
            for (&t, &wt) in g.points.iter().zip(&g.weights) {
                // Duffy map (s, t) in [0,1]^2 -> (x, y) = (s, (1-s) t), jacobian (1-s)
                let x = s;
                let y = (1.0 - s) * t;
                points.push([1.0 - x - y, x, y]);
                // reference triangle has area 1/2: normalize so weights sum to one
                weights.push(2.0 * ws * wt * (1.0 - s));
            }
        }
        Self {
            points,
            weights,
            degree: 2 * n - 2,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical quadrature points on the triangle with the given corners.
    pub fn map_points<'a>(
        &'a self,
        corners: &'a [[f64; 2]; 3],
    ) -> impl Iterator<Item = ([f64; 2], [f64; 3], f64)> + 'a {
        self.points.iter().zip(&self.weights).map(move |(l, &w)| {
            let x = l[0] * corners[0][0] + l[1] * corners[1][0] + l[2] * corners[2][0];
            let y = l[0] * corners[0][1] + l[1] * corners[1][1] + l[2] * corners[2][1];
            ([x, y], *l, w)
        })
    }
}
