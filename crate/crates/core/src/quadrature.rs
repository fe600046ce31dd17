//! Gauss–Legendre rules, graded composite rules and collapsed simplex rules.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("Gauss-Legendre rule needs at least one node"));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Newton iteration on P_n from the Tricomi initial guess.
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, dp)
}

/// Ratio between consecutive geometric sub-panels of a graded end panel.
pub const GRADING_RATIO: f64 = 0.15;

/// Composite Gauss–Legendre rule per axis: `panels` uniform panels with
/// `order` nodes each, where the two end panels are additionally split into
/// `grading` geometrically shrinking sub-panels toward the interval ends,
/// each carrying `2 · order` nodes.
///
/// Grading resolves the `dist^{2-2s}` endpoint behavior that the domain
/// indicator induces in the outer integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OuterRule {
    pub panels: usize,
    pub order: usize,
    pub grading: usize,
}

impl Default for OuterRule {
    /// 64 uniform-panel nodes per axis.
    fn default() -> Self {
        Self {
            panels: 16,
            order: 4,
            grading: 12,
        }
    }
}

impl OuterRule {
    pub fn validate(&self) -> Result<()> {
        if self.panels == 0 || self.order == 0 {
            return Err(invalid("outer rule needs at least one panel and one node"));
        }
        Ok(())
    }

    /// The same rule at half resolution (used for error estimates).
    pub fn halved(&self) -> Self {
        Self {
            panels: (self.panels / 2).max(1),
            order: self.order,
            grading: self.grading,
        }
    }

    /// Nodes and weights on `[a, b]`.
    pub fn nodes(&self, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
        self.nodes_with_breaks(a, b, &[])
    }

    /// Nodes and weights on `[a, b]` with every panel additionally split at
    /// the given break points, so that integrands with kinks or thin layers
    /// there are integrated piecewise.
    pub fn nodes_with_breaks(&self, a: f64, b: f64, breaks: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let gl = GaussLegendre::new(self.order)?;
        let fine = GaussLegendre::new(2 * self.order)?;
        let panels = if self.grading > 0 { self.panels.max(2) } else { self.panels };
        let h = (b - a) / panels as f64;
        // (lo, hi, graded)
        let mut intervals: Vec<(f64, f64, bool)> = Vec::with_capacity(panels + 2 * self.grading);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let hi = if p + 1 == panels { b } else { lo + h };
            let graded_left = self.grading > 0 && p == 0;
            let graded_right = self.grading > 0 && p + 1 == panels;
            if graded_left {
                let mut edges = Vec::with_capacity(self.grading + 2);
                edges.push(lo);
                for g in (1..=self.grading).rev() {
                    edges.push(lo + h * libm::pow(GRADING_RATIO, g as f64));
                }
                edges.push(hi);
                intervals.extend(edges.windows(2).map(|w| (w[0], w[1], true)));
            } else if graded_right {
                let mut edges = Vec::with_capacity(self.grading + 2);
                edges.push(lo);
                for g in 1..=self.grading {
                    edges.push(hi - h * libm::pow(GRADING_RATIO, g as f64));
                }
                edges.push(hi);
                intervals.extend(edges.windows(2).map(|w| (w[0], w[1], true)));
            } else {
                intervals.push((lo, hi, false));
            }
        }
        let mut sorted: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
        sorted.sort_by(f64::total_cmp);
        let mut out = Vec::with_capacity(2 * self.order * (intervals.len() + sorted.len()));
        let mut next = 0;
        for (lo, hi, graded) in intervals {
            let rule = if graded { &fine } else { &gl };
            let mut left = lo;
            while next < sorted.len() && sorted[next] <= lo {
                next += 1;
            }
            while next < sorted.len() && sorted[next] < hi {
                let x = sorted[next];
                // Skip slivers that would only add rounding noise.
                if x - left > 1e-12 * (hi - lo) && hi - x > 1e-12 * (hi - lo) {
                    out.extend(rule.on(left, x));
                    left = x;
                }
                next += 1;
            }
            out.extend(rule.on(left, hi));
        }
        Ok(out)
    }
}

/// Collapsed-coordinate (Duffy) product rule on the simplex with ordered
/// vertices `v_0, ..., v_d`; `q` Gauss nodes per collapsed coordinate.
///
/// Points are `v_0 + Σ_j (v_j - v_{j-1}) s_j` with `1 ≥ s_1 ≥ ... ≥ s_d ≥ 0`
/// and `s_j = t_1 ⋯ t_j`.
pub fn simplex_rule(vertices: &[Vec<f64>], q: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let d = vertices.len().saturating_sub(1);
    if d == 0 {
        return Err(invalid("simplex needs at least two vertices"));
    }
    let gl = GaussLegendre::new(q)?;
    let unit: Vec<(f64, f64)> = gl.on(0.0, 1.0).collect();
    let mut edges = vec![vec![0.0; d]; d];
    for j in 0..d {
        for k in 0..d {
            edges[j][k] = vertices[j + 1][k] - vertices[j][k];
        }
    }
    let jac = crate::linalg::determinant(&edges).abs();
    let total = unit.len().pow(d as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut x = vertices[0].clone();
        let mut s = 1.0;
        let mut w = jac;
        for j in 0..d {
            let (t, wt) = unit[idx[j]];
            s *= t;
            w *= wt * libm::pow(t, (d - 1 - j) as f64);
            for k in 0..d {
                x[k] += edges[j][k] * s;
            }
        }
        out.push((x, w));
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < unit.len() {
                break;
            }
            *slot = 0;
        }
    }
    Ok(out)
}
