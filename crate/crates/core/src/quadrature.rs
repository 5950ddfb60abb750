//! Quadrature rules and the exponential-integrator weight functions.

/// Gauss–Legendre nodes and weights on [−1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Tricomi initial guess, then Newton on P_n
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
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
            dp = if d != 0.0 { d } else { dp };
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    }

    /// `∫_a^b f`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        h * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `φ₁(z) = (e^z − 1)/z`, with `φ₁(0) = 1`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z * (0.5 + z / 6.0)
    } else {
        z.exp_m1() / z
    }
}

/// `ψ(z) = ∫_0^1 e^{z(1−θ)} (1 − θ) dθ = (z e^z − e^z + 1)/z²`, with `ψ(0) = 1/2`.
///
/// The product-trapezoid weight: `∫_0^H e^{z(H−s)/H} F(s) ds ≈ H[ψ F_0 + (φ₁ − ψ) F_H]`.
pub fn psi(z: f64) -> f64 {
    if z.abs() < 0.1 {
        // Σ_{n≥0} z^n (n+1)/(n+2)!
        let mut term = 0.5; // n = 0: 1/2!
        let mut sum = term;
        let mut fact = 2.0;
        let mut zn = 1.0;
        for n in 1..20 {
            fact *= (n + 2) as f64;
            zn *= z;
            term = zn * (n + 1) as f64 / fact;
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        (z * z.exp() - z.exp_m1()) / (z * z)
    }
}

/// `∫_0^L e^{−λs} s^{−η} ds` for `η ∈ [0, 1)`.
///
/// The substitution `s = v^p`, `p = 1/(1−η)`, removes the singularity; the
/// smooth integrand is then integrated by adaptive Gauss–Legendre with an
/// absolute error target `tol`. Returns `(value, error estimate)`.
pub fn weakly_singular_exp(lambda: f64, eta: f64, len: f64, tol: f64) -> (f64, f64) {
    assert!((0.0..1.0).contains(&eta) && len >= 0.0);
    let p = 1.0 / (1.0 - eta);
    let upper = len.powf(1.0 / p);
    let f = move |v: f64| p * (-lambda * v.powf(p)).exp();
    adaptive_gl(&f, 0.0, upper, tol)
}

/// Adaptive bisection driven by the difference between 7- and 15-point
/// Gauss–Legendre estimates.
pub fn adaptive_gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let lo = GaussLegendre::new(7);
    let hi = GaussLegendre::new(15);
    let mut stack = vec![(a, b, 0usize)];
    let (mut total, mut err) = (0.0, 0.0);
    while let Some((x0, x1, depth)) = stack.pop() {
        let coarse = lo.integrate(x0, x1, f);
        let fine = hi.integrate(x0, x1, f);
        let e = (fine - coarse).abs();
        let share = tol * (x1 - x0) / (b - a).max(f64::MIN_POSITIVE);
        if e <= share || depth >= 40 {
            total += fine;
            err += e;
        } else {
            let m = 0.5 * (x0 + x1);
            stack.push((m, x1, depth + 1));
            stack.push((x0, m, depth + 1));
        }
    }
    (total, err)
}

/// Least-squares line `y = a + b x`; returns `(a, b, standard error of b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (a, b, se)
}
