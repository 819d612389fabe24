//! Small numeric helpers: compensated summation, sample moments, quadrature.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated sum of a sequence.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

/// Mean and standard error of the mean. Empty input gives `(0, 0)`.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (0.0, 0.0);
    }
    let mean = sum(values.iter().copied()) / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let ss = sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let sd = (ss / (m - 1) as f64).sqrt();
    (mean, sd / (m as f64).sqrt())
}

/// Sample standard deviation (denominator `m - 1`).
pub fn sample_sd(values: &[f64]) -> f64 {
    let (_, se) = mean_and_stderr(values);
    se * (values.len() as f64).sqrt()
}

/// Composite Simpson rule on `[lo, hi]` with `panels` sub-intervals
/// (rounded up to an even count).
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> f64 {
    let panels = panels.max(2);
    let panels = panels + panels % 2;
    let h = (hi - lo) / panels as f64;
    let mut acc = CompensatedSum::new();
    acc.add(f(lo));
    acc.add(f(hi));
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.add(w * f(lo + i as f64 * h));
    }
    acc.total() * h / 3.0
}
