use serde::Serialize;

/// Smooth compactly supported test function
/// f(x) = exp(1 - 1/(1 - r²)) with r = |x - center| / radius, zero for r ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpFunction {
    center: Vec<f64>,
    radius: f64,
}

impl BumpFunction {
    /// Panics if `radius` is not a positive finite number.
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        assert!(
            radius > 0.0 && radius.is_finite(),
            "bump radius must be positive, got {radius}"
        );
        BumpFunction { center, radius }
    }

    pub fn new_1d(center: f64, radius: f64) -> Self {
        Self::new(vec![center], radius)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn scaled_r2(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2 = self.scaled_r2(x);
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - r2)).exp()
        }
    }

    /// Value and gradient in closed form.
    pub fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let r2 = self.scaled_r2(x);
        if r2 >= 1.0 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return 0.0;
        }
        let s = 1.0 - r2;
        let f = (1.0 - 1.0 / s).exp();
        let k = -2.0 * f / (s * s * self.radius * self.radius);
        for ((g, a), c) in grad.iter_mut().zip(x).zip(&self.center) {
            *g = k * (a - c);
        }
        f
    }

    /// Value and derivative of a one-dimensional bump.
    pub fn value_and_derivative_1d(&self, x: f64) -> (f64, f64) {
        let mut g = [0.0];
        let f = self.value_and_gradient(&[x], &mut g);
        (f, g[0])
    }

    /// Support along one coordinate axis.
    pub fn support_interval(&self, axis: usize) -> (f64, f64) {
        (
            self.center[axis] - self.radius,
            self.center[axis] + self.radius,
        )
    }

    /// The supremum norm (attained at the center).
    pub fn sup_norm(&self) -> f64 {
        1.0
    }
}

/// `n` one-dimensional bumps of common radius with centers evenly spaced on [lo, hi].
pub fn bump_battery_1d(n: usize, lo: f64, hi: f64, radius: f64) -> Vec<BumpFunction> {
    match n {
        0 => Vec::new(),
        1 => vec![BumpFunction::new_1d(0.5 * (lo + hi), radius)],
        _ => (0..n)
            .map(|i| {
                let c = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                BumpFunction::new_1d(c, radius)
            })
            .collect(),
    }
}
