//! Small numeric helpers shared across modules.

/// Compensated (Kahan) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Order-insensitive compensated sum of a slice.
pub fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    kahan_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// ln(n!) by direct summation; exact enough for the factorials used here.
pub fn ln_factorial(n: usize) -> f64 {
    kahan_sum((2..=n).map(|k| (k as f64).ln()))
}

/// Trapezoid rule on an explicit (not necessarily uniform) grid.
pub fn trapezoid(ts: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(ts.len(), values.len());
    let mut acc = KahanSum::new();
    for i in 1..ts.len() {
        acc.add(0.5 * (ts[i] - ts[i - 1]) * (values[i] + values[i - 1]));
    }
    acc.value()
}

/// Uniform grid of `points` values covering [a, b] inclusive.
pub fn linspace(a: f64, b: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2);
    let h = (b - a) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { b } else { a + h * i as f64 })
        .collect()
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = kahan_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = kahan_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}
