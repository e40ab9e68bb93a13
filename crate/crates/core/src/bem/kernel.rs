//! Closed-form potentials of a single straight panel for the kernel
//! `G(z) = -log|z| / (2 pi)`.
//!
//! Points are expressed in panel coordinates `xi = (x - a).t` and
//! `eta = (x - a).n`, with `u1 = -xi`, `u2 = L - xi` the signed offsets of the
//! endpoints. `theta` is the angle under which the panel is seen from `x`,
//! signed like `eta`.

use std::f64::consts::PI;

use crate::fem::quadrature::GaussRule;
use crate::mesh::Point;

const INV_2PI: f64 = 0.5 / PI;

#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub a: Point,
    pub b: Point,
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub length: f64,
}

#[derive(Debug, Clone, Copy)]
struct Local {
    xi: f64,
    eta: f64,
    u1: f64,
    u2: f64,
    r1sq: f64,
    r2sq: f64,
    theta: f64,
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

impl Panel {
    pub fn new(a: Point, b: Point) -> Self {
        let length = (b[0] - a[0]).hypot(b[1] - a[1]);
        let tangent = [(b[0] - a[0]) / length, (b[1] - a[1]) / length];
        Self {
            a,
            b,
            tangent,
            normal: [tangent[1], -tangent[0]],
            length,
        }
    }

    fn local(&self, x: Point) -> Local {
        let d = [x[0] - self.a[0], x[1] - self.a[1]];
        let xi = d[0] * self.tangent[0] + d[1] * self.tangent[1];
        let eta = d[0] * self.normal[0] + d[1] * self.normal[1];
        let u1 = -xi;
        let u2 = self.length - xi;
        Local {
            xi,
            eta,
            u1,
            u2,
            r1sq: u1 * u1 + eta * eta,
            r2sq: u2 * u2 + eta * eta,
            theta: (eta * self.length).atan2(eta * eta + u1 * u2),
        }
    }

    fn to_global(&self, d_xi: f64, d_eta: f64) -> [f64; 2] {
        [
            d_xi * self.tangent[0] + d_eta * self.normal[0],
            d_xi * self.tangent[1] + d_eta * self.normal[1],
        ]
    }

    /// `int_panel G(x - y) ds_y`. Finite everywhere.
    pub fn single_layer(&self, x: Point) -> f64 {
        let l = self.local(x);
        let f = 0.5 * (xlogy(l.u2, l.r2sq) - xlogy(l.u1, l.r1sq)) - self.length + l.eta * l.theta;
        -INV_2PI * f
    }

    /// Gradient of [`Panel::single_layer`]; singular at the endpoints.
    pub fn single_layer_gradient(&self, x: Point) -> [f64; 2] {
        let l = self.local(x);
        let d_xi = INV_2PI * 0.5 * (l.r2sq / l.r1sq).ln();
        let d_eta = -INV_2PI * l.theta;
        self.to_global(d_xi, d_eta)
    }

    /// Double layer potential of the affine density with endpoint values
    /// `ga`, `gb`. Off the panel only; on the panel line the principal value is
    /// the same formula with `theta = 0`.
    pub fn double_layer(&self, x: Point, ga: f64, gb: f64) -> f64 {
        let l = self.local(x);
        let slope = (gb - ga) / self.length;
        let i1 = if l.eta == 0.0 {
            l.xi * l.theta
        } else {
            0.5 * l.eta * (l.r2sq / l.r1sq).ln() + l.xi * l.theta
        };
        INV_2PI * (ga * l.theta + slope * i1)
    }

    pub fn double_layer_gradient(&self, x: Point, ga: f64, gb: f64) -> [f64; 2] {
        let l = self.local(x);
        let slope = (gb - ga) / self.length;
        let log_ratio = 0.5 * (l.r2sq / l.r1sq).ln();
        let dth_xi = l.eta / l.r1sq - l.eta / l.r2sq;
        let dth_eta = l.u1 / l.r1sq - l.u2 / l.r2sq;
        let di1_xi = l.eta * (l.u1 / l.r1sq - l.u2 / l.r2sq) + l.theta + l.xi * dth_xi;
        let di1_eta =
            log_ratio + l.eta * (l.eta / l.r2sq - l.eta / l.r1sq) + l.xi * dth_eta;
        self.to_global(
            INV_2PI * (ga * dth_xi + slope * di1_xi),
            INV_2PI * (ga * dth_eta + slope * di1_eta),
        )
    }

    /// Distance from `x` to the closed panel.
    pub fn distance(&self, x: Point) -> f64 {
        let l = self.local(x);
        let s = l.xi.clamp(0.0, self.length);
        (l.xi - s).hypot(l.eta)
    }
}

/// `int_E int_E G(x - y) ds_y ds_x` for a straight panel of length `len`.
pub fn single_layer_self(len: f64) -> f64 {
    INV_2PI * len * len * (1.5 - len.ln())
}

fn segment_distance(p: Point, q: Point, source: &Panel) -> f64 {
    let piece = Panel::new(p, q);
    source
        .distance(p)
        .min(source.distance(q))
        .min(piece.distance(source.a))
        .min(piece.distance(source.b))
}

/// Integration of potentials of a source panel along a target segment.
#[derive(Debug, Clone)]
pub struct NearFieldRule {
    gauss: GaussRule,
    admissibility: f64,
    max_depth: usize,
}

impl Default for NearFieldRule {
    fn default() -> Self {
        Self::new(4, 6.0)
    }
}

impl NearFieldRule {
    /// Gauss rule with `points` nodes on every piece; pieces are halved until
    /// their distance to the source exceeds `admissibility` times their length.
    pub fn new(points: usize, admissibility: f64) -> Self {
        Self {
            gauss: GaussRule::new(points),
            admissibility,
            max_depth: 36,
        }
    }

    /// `int_{[p, q]} f(x) ds_x`, where `f` is smooth away from `source`.
    pub fn integrate(&self, p: Point, q: Point, source: &Panel, f: &mut impl FnMut(Point) -> f64) -> f64 {
        self.recurse(p, q, source, self.max_depth, f)
    }

    fn recurse(
        &self,
        p: Point,
        q: Point,
        source: &Panel,
        depth: usize,
        f: &mut impl FnMut(Point) -> f64,
    ) -> f64 {
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        if depth == 0 || segment_distance(p, q, source) >= self.admissibility * len {
            let mut s = 0.0;
            for (&t, &w) in self.gauss.points.iter().zip(&self.gauss.weights) {
                s += w * f([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
            return s * len;
        }
        let m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        self.recurse(p, m, source, depth - 1, f) + self.recurse(m, q, source, depth - 1, f)
    }
}
