//! Gauss–Legendre rules and small helpers built on them.

use std::f64::consts::PI;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess followed by Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
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
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Values and derivatives of `P_0..=P_deg` at `x`.
pub fn legendre_table(deg: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; deg + 1];
    let mut dp = vec![0.0; deg + 1];
    p[0] = 1.0;
    if deg >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for k in 2..=deg {
        let kf = k as f64;
        p[k] = ((2.0 * kf - 1.0) * x * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf;
        // P'_k = P'_{k-2} + (2k - 1) P_{k-1}
        dp[k] = dp[k - 2] + (2.0 * kf - 1.0) * p[k - 1];
    }
    (p, dp)
}

/// Composite Gauss rule on `[a, b]` with `panels` equal panels.
pub fn composite(rule: &GaussLegendre, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * rule.len());
    for k in 0..panels {
        let lo = a + h * k as f64;
        let hi = if k + 1 == panels { b } else { lo + h };
        out.extend(rule.mapped(lo, hi));
    }
    out
}

/// Composite rule whose panel breakpoints are the sorted, deduplicated union
/// of `breaks` (clipped to `[a, b]`) with each gap subdivided so no panel is
/// longer than `max_panel`.
pub fn composite_with_breaks(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    breaks: &[f64],
    max_panel: f64,
) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-14 * (1.0 + y.abs()));
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        let panels = (len / max_panel).ceil().max(1.0) as usize;
        out.extend(composite(rule, w[0], w[1], panels));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..=20 {
            let g = GaussLegendre::new(n);
            assert!((g.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let num = g.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
            assert!((num - exact).abs() < 1e-12, "n={n}");
            let even = g.integrate(0.0, 1.0, |x| x.powi(2 * n as i32 - 2));
            assert!((even - 1.0 / (2.0 * n as f64 - 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let g = GaussLegendre::new(33);
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(g.nodes[16].abs() < 1e-15);
    }

    #[test]
    fn legendre_table_matches_recurrence() {
        let (p, dp) = legendre_table(7, 0.3);
        for (k, (&pk, &dpk)) in p.iter().zip(&dp).enumerate() {
            let (q, dq) = legendre_with_derivative(k, 0.3);
            assert!((pk - q).abs() < 1e-14);
            assert!((dpk - dq).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn composite_breaks() {
        let g = GaussLegendre::new(8);
        let rule = composite_with_breaks(&g, 0.0, 2.0, &[0.5, 0.5, 3.0], 0.4);
        let s: f64 = rule.iter().map(|(x, w)| w * (x - 0.5).abs()).sum();
        assert!((s - (0.125 + 1.125)).abs() < 1e-13);
    }
}
