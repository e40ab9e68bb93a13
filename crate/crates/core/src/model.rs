//! Model problems: interior operators, exact solutions and derived data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::quadrature::QuadratureRule;
use crate::fem::FeFunction;
use crate::mesh::{make_initial_mesh, DomainId, Mesh, Point};

/// Strongly monotone, Lipschitz interior operator
/// `u -> -div A(x, grad u) + b(x, grad u) + c(x, u)`.
pub trait InteriorOperator: fmt::Debug + Send + Sync {
    fn flux(&self, x: Point, grad: [f64; 2]) -> [f64; 2];

    /// Derivative of the flux with respect to the gradient.
    fn flux_jacobian(&self, x: Point, grad: [f64; 2]) -> [[f64; 2]; 2];

    fn b(&self, _x: Point, _grad: [f64; 2]) -> f64 {
        0.0
    }

    fn c(&self, _x: Point, _value: f64) -> f64 {
        0.0
    }

    /// Strong monotonicity constant.
    fn monotonicity(&self) -> f64;

    /// Lipschitz constant.
    fn lipschitz(&self) -> f64;
}

/// `A(x, g) = scale * g`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledLaplace {
    pub scale: f64,
}

impl InteriorOperator for ScaledLaplace {
    fn flux(&self, _x: Point, g: [f64; 2]) -> [f64; 2] {
        [self.scale * g[0], self.scale * g[1]]
    }

    fn flux_jacobian(&self, _x: Point, _g: [f64; 2]) -> [[f64; 2]; 2] {
        [[self.scale, 0.0], [0.0, self.scale]]
    }

    fn monotonicity(&self) -> f64 {
        self.scale
    }

    fn lipschitz(&self) -> f64 {
        self.scale
    }
}

/// `A(x, g) = chi(|g|) g` with `chi(t) = 1 + tanh(t) / t`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChiOperator;

impl ChiOperator {
    pub fn chi(t: f64) -> f64 {
        if t < 1e-3 {
            let t2 = t * t;
            2.0 - t2 / 3.0 + 2.0 * t2 * t2 / 15.0 - 17.0 * t2 * t2 * t2 / 315.0
        } else {
            1.0 + t.tanh() / t
        }
    }

    /// `chi'(t) / t`, finite at `t = 0`.
    pub fn chi_prime_over_t(t: f64) -> f64 {
        if t < 1e-3 {
            let t2 = t * t;
            -2.0 / 3.0 + 8.0 * t2 / 15.0 - 102.0 * t2 * t2 / 315.0
        } else {
            let c = t.cosh();
            (t / (c * c) - t.tanh()) / (t * t * t)
        }
    }
}

impl InteriorOperator for ChiOperator {
    fn flux(&self, _x: Point, g: [f64; 2]) -> [f64; 2] {
        let chi = Self::chi(g[0].hypot(g[1]));
        [chi * g[0], chi * g[1]]
    }

    fn flux_jacobian(&self, _x: Point, g: [f64; 2]) -> [[f64; 2]; 2] {
        let t = g[0].hypot(g[1]);
        let chi = Self::chi(t);
        let d = Self::chi_prime_over_t(t);
        [
            [chi + d * g[0] * g[0], d * g[0] * g[1]],
            [d * g[1] * g[0], chi + d * g[1] * g[1]],
        ]
    }

    fn monotonicity(&self) -> f64 {
        1.0
    }

    fn lipschitz(&self) -> f64 {
        2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExampleId {
    LaplaceLShape,
    ScaledLaplaceLShape,
    NonlinearZShape,
}

impl ExampleId {
    pub fn name(self) -> &'static str {
        match self {
            ExampleId::LaplaceLShape => "laplace_lshape",
            ExampleId::ScaledLaplaceLShape => "scaled_laplace_lshape",
            ExampleId::NonlinearZShape => "nonlinear_zshape",
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExampleId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "laplace_lshape" | "laplace" => Ok(ExampleId::LaplaceLShape),
            "scaled_laplace_lshape" | "scaled_laplace" => Ok(ExampleId::ScaledLaplaceLShape),
            "nonlinear_zshape" | "nonlinear" => Ok(ExampleId::NonlinearZShape),
            other => Err(format!("unknown example '{other}'")),
        }
    }
}

/// `u = Re(z^beta)` with the branch cut along the ray of angle `cut`.
#[derive(Debug, Clone, Copy)]
pub struct CornerSingularity {
    pub beta: f64,
    pub cut: f64,
}

impl CornerSingularity {
    fn polar(&self, x: Point) -> (f64, f64) {
        let r = x[0].hypot(x[1]);
        let mut phi = x[1].atan2(x[0]);
        if phi < self.cut {
            phi += 2.0 * PI;
        }
        (r, phi)
    }

    pub fn value(&self, x: Point) -> f64 {
        let (r, phi) = self.polar(x);
        r.powf(self.beta) * (self.beta * phi).cos()
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        // f'(z) = beta z^(beta-1) = u_x - i u_y
        let (r, phi) = self.polar(x);
        let m = self.beta * r.powf(self.beta - 1.0);
        let a = (self.beta - 1.0) * phi;
        [m * a.cos(), -m * a.sin()]
    }

    pub fn hessian(&self, x: Point) -> [[f64; 2]; 2] {
        // f''(z) = u_xx - i u_xy
        let (r, phi) = self.polar(x);
        let m = self.beta * (self.beta - 1.0) * r.powf(self.beta - 2.0);
        let a = (self.beta - 2.0) * phi;
        let (uxx, uxy) = (m * a.cos(), -m * a.sin());
        [[uxx, uxy], [uxy, -uxx]]
    }
}

/// Data of a coupled interior/exterior model problem with known solution.
#[derive(Debug)]
pub struct ProblemSpec {
    pub example: ExampleId,
    pub domain: DomainId,
    pub operator: Box<dyn InteriorOperator>,
    pub interior: CornerSingularity,
    /// The exterior solution is `log|x - source|`.
    pub source: Point,
}

impl ProblemSpec {
    pub fn new(example: ExampleId) -> Self {
        let (domain, operator, interior): (_, Box<dyn InteriorOperator>, _) = match example {
            ExampleId::LaplaceLShape => (
                DomainId::LShape,
                Box::new(ScaledLaplace { scale: 1.0 }),
                CornerSingularity {
                    beta: 2.0 / 3.0,
                    cut: -PI / 4.0,
                },
            ),
            ExampleId::ScaledLaplaceLShape => (
                DomainId::LShape,
                Box::new(ScaledLaplace { scale: 0.1 }),
                CornerSingularity {
                    beta: 2.0 / 3.0,
                    cut: -PI / 4.0,
                },
            ),
            ExampleId::NonlinearZShape => (
                DomainId::ZShape,
                Box::new(ChiOperator),
                CornerSingularity {
                    beta: 4.0 / 7.0,
                    cut: -PI / 8.0,
                },
            ),
        };
        Self {
            example,
            domain,
            operator,
            interior,
            source: [-0.125, 0.125],
        }
    }

    pub fn initial_mesh(&self) -> Mesh {
        make_initial_mesh(self.domain)
    }

    pub fn u(&self, x: Point) -> f64 {
        self.interior.value(x)
    }

    pub fn grad_u(&self, x: Point) -> [f64; 2] {
        self.interior.gradient(x)
    }

    /// Volume source `f = -div A(grad u)` (b and c vanish for all examples).
    pub fn f(&self, x: Point) -> f64 {
        let g = self.grad_u(x);
        let h = self.interior.hessian(x);
        let j = self.operator.flux_jacobian(x, g);
        let mut s = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                s += j[i][k] * h[k][i];
            }
        }
        -s + self.operator.b(x, g) + self.operator.c(x, self.u(x))
    }

    pub fn u_ext(&self, x: Point) -> f64 {
        (x[0] - self.source[0]).hypot(x[1] - self.source[1]).ln()
    }

    pub fn grad_u_ext(&self, x: Point) -> [f64; 2] {
        let d = [x[0] - self.source[0], x[1] - self.source[1]];
        let r2 = d[0] * d[0] + d[1] * d[1];
        [d[0] / r2, d[1] / r2]
    }

    /// Jump of the traces, `u - u_ext` on the boundary.
    pub fn u0(&self, x: Point) -> f64 {
        self.u(x) - self.u_ext(x)
    }

    pub fn grad_u0(&self, x: Point) -> [f64; 2] {
        let (a, b) = (self.grad_u(x), self.grad_u_ext(x));
        [a[0] - b[0], a[1] - b[1]]
    }

    /// Jump of the conormal derivatives, `A(grad u).n - d_n u_ext`.
    pub fn phi0(&self, x: Point, normal: [f64; 2]) -> f64 {
        let a = self.operator.flux(x, self.grad_u(x));
        let e = self.grad_u_ext(x);
        (a[0] - e[0]) * normal[0] + (a[1] - e[1]) * normal[1]
    }

    /// Exact exterior normal derivative.
    pub fn phi(&self, x: Point, normal: [f64; 2]) -> f64 {
        let e = self.grad_u_ext(x);
        e[0] * normal[0] + e[1] * normal[1]
    }
}

/// `<A u, xi_i>` for every hat function `xi_i`.
pub fn apply_interior_operator(
    op: &dyn InteriorOperator,
    u: &FeFunction,
    mesh: &Mesh,
) -> Vec<f64> {
    let rule = QuadratureRule::seven_point();
    let mut out = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let geo = mesh.geometry(t);
        let v = mesh.triangles()[t].vertices;
        let vals = [u.values[v[0]], u.values[v[1]], u.values[v[2]]];
        let g = u.gradient_on(t, mesh, &geo);
        let corners = mesh.corners(t);
        for (x, l, w) in rule.map_points(&corners) {
            let a = op.flux(x, g);
            let uh = l[0] * vals[0] + l[1] * vals[1] + l[2] * vals[2];
            let low = op.b(x, g) + op.c(x, uh);
            for k in 0..3 {
                let gk = geo.gradients[k];
                out[v[k]] += w * geo.area * (a[0] * gk[0] + a[1] * gk[1] + low * l[k]);
            }
        }
    }
    out
}

/// Empirical monotonicity and Lipschitz ratios over random discrete pairs.
///
/// Returns the smallest observed `<A(gw) - A(gv), gw - gv> / |gw - gv|^2` and
/// the largest `|A(gw) - A(gv)| / |gw - gv|`, both in the L2 sense over the mesh.
pub fn monotonicity_probe(
    op: &dyn InteriorOperator,
    mesh: &Mesh,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InsufficientData("monotonicity probe needs trials".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = QuadratureRule::seven_point();
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let n = mesh.n_vertices();
    for _ in 0..trials {
        // magnitudes from 1e-3 to 1e2 to cover both regimes of the nonlinearity
        let scale = 10f64.powf(rng.gen_range(-3.0..2.0));
        let v = FeFunction::new((0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect());
        let w = FeFunction::new((0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect());
        let (mut inner, mut diff2, mut flux2) = (0.0, 0.0, 0.0);
        for t in 0..mesh.n_triangles() {
            let geo = mesh.geometry(t);
            let gv = v.gradient_on(t, mesh, &geo);
            let gw = w.gradient_on(t, mesh, &geo);
            let d = [gw[0] - gv[0], gw[1] - gv[1]];
            let corners = mesh.corners(t);
            for (x, _, wq) in rule.map_points(&corners) {
                let av = op.flux(x, gv);
                let aw = op.flux(x, gw);
                let da = [aw[0] - av[0], aw[1] - av[1]];
                let m = wq * geo.area;
                inner += m * (da[0] * d[0] + da[1] * d[1]);
                diff2 += m * (d[0] * d[0] + d[1] * d[1]);
                flux2 += m * (da[0] * da[0] + da[1] * da[1]);
            }
        }
        if diff2 > 0.0 {
            min_ratio = min_ratio.min(inner / diff2);
            max_ratio = max_ratio.max((flux2 / diff2).sqrt());
        }
    }
    Ok((min_ratio, max_ratio))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(f: impl Fn(Point) -> f64, x: Point) -> [f64; 2] {
        let h = 1e-6;
        [
            (f([x[0] + h, x[1]]) - f([x[0] - h, x[1]])) / (2.0 * h),
            (f([x[0], x[1] + h]) - f([x[0], x[1] - h])) / (2.0 * h),
        ]
    }

    #[test]
    fn corner_singularity_derivatives_match_finite_differences() {
        for ex in [ExampleId::LaplaceLShape, ExampleId::NonlinearZShape] {
            let p = ProblemSpec::new(ex);
            for x in [[0.1, 0.05], [-0.2, 0.13], [-0.1, -0.2], [0.2, 0.2]] {
                let g = p.grad_u(x);
                let fd = fd_gradient(|y| p.u(y), x);
                assert!((g[0] - fd[0]).abs() < 1e-7 && (g[1] - fd[1]).abs() < 1e-7);
                let h = p.interior.hessian(x);
                let gx = fd_gradient(|y| p.grad_u(y)[0], x);
                assert!((h[0][0] - gx[0]).abs() < 1e-5 && (h[0][1] - gx[1]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn exact_solution_is_harmonic_for_laplace() {
        let p = ProblemSpec::new(ExampleId::LaplaceLShape);
        assert!(p.f([0.1, 0.1]).abs() < 1e-12);
        let h = p.interior.hessian([-0.1, 0.2]);
        assert!((h[0][0] + h[1][1]).abs() < 1e-12);
    }

    #[test]
    fn normal_derivative_has_zero_flux_on_reentrant_edges() {
        // u has vanishing normal derivative on the edges meeting at the corner
        let p = ProblemSpec::new(ExampleId::LaplaceLShape);
        let g = p.grad_u([0.1, 0.0]);
        assert!(g[1].abs() < 1e-12);
        let g = p.grad_u([0.0, -0.1]);
        assert!(g[0].abs() < 1e-12);
        let z = ProblemSpec::new(ExampleId::NonlinearZShape);
        let g = z.grad_u([0.1, -0.1]);
        assert!((g[0] + g[1]).abs() < 1e-12);
    }

    #[test]
    fn chi_series_matches_closed_form() {
        for t in [9e-4, 1e-3, 1.1e-3] {
            let closed = 1.0 + f64::tanh(t) / t;
            assert!((ChiOperator::chi(t) - closed).abs() < 1e-14);
            let h = 1e-7;
            let fd = (ChiOperator::chi(t + h) - ChiOperator::chi(t - h)) / (2.0 * h) / t;
            assert!((ChiOperator::chi_prime_over_t(t) - fd).abs() < 1e-4);
        }
        assert_eq!(ChiOperator::chi(0.0), 2.0);
    }

    #[test]
    fn chi_jacobian_matches_finite_differences() {
        let op = ChiOperator;
        for g in [[0.3, -0.7], [2.0, 1.0], [1e-4, 2e-4]] {
            let j = op.flux_jacobian([0.0, 0.0], g);
            let h = 1e-7;
            for k in 0..2 {
                let mut gp = g;
                let mut gm = g;
                gp[k] += h;
                gm[k] -= h;
                let (ap, am) = (op.flux([0.0, 0.0], gp), op.flux([0.0, 0.0], gm));
                for i in 0..2 {
                    assert!((j[i][k] - (ap[i] - am[i]) / (2.0 * h)).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn identity_operator_probe_is_exactly_one() {
        let mesh = make_initial_mesh(DomainId::LShape);
        let (lo, hi) = monotonicity_probe(&ScaledLaplace { scale: 1.0 }, &mesh, 20, 7).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn example_ids_parse() {
        for ex in [
            ExampleId::LaplaceLShape,
            ExampleId::ScaledLaplaceLShape,
            ExampleId::NonlinearZShape,
        ] {
            assert_eq!(ex.name().parse::<ExampleId>().unwrap(), ex);
        }
        assert!("poisson".parse::<ExampleId>().is_err());
    }
}
