//! One-dimensional exhaustive search with nested refinement.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CfoGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Number of refinement passes; each shrinks the step by `factor`.
    pub levels: usize,
    pub factor: usize,
}

impl CfoGrid {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo: lo.min(hi), hi: lo.max(hi), step: 1e-3, levels: 2, factor: 10 }
    }

    /// The finest spacing reached after all refinements.
    pub fn resolution(&self) -> f64 {
        self.step / (self.factor.max(1) as f64).powi(self.levels as i32)
    }

    pub fn coarse_points(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        if !(span > 0.0) || !(self.step > 0.0) {
            return vec![self.lo];
        }
        let count = (span / self.step + 1e-9).floor() as usize;
        let mut pts: Vec<f64> = (0..=count).map(|k| self.lo + k as f64 * self.step).collect();
        if self.hi - pts[pts.len() - 1] > 1e-12 {
            pts.push(self.hi);
        }
        pts
    }

    /// Returns `(argmin, min)`. Non-finite objective values never win.
    pub fn minimize(&self, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
        let mut best = (self.lo, f64::INFINITY);
        let mut consider = |x: f64, best: &mut (f64, f64)| {
            let v = f(x);
            if v.is_finite() && v < best.1 {
                *best = (x, v);
            }
        };
        for x in self.coarse_points() {
            consider(x, &mut best);
        }
        let factor = self.factor.max(1) as i64;
        let mut step = self.step;
        for _ in 0..self.levels {
            let centre = best.0;
            step /= factor as f64;
            for k in -factor..=factor {
                if k == 0 {
                    continue;
                }
                let x = centre + k as f64 * step;
                if x >= self.lo - 1e-12 && x <= self.hi + 1e-12 {
                    consider(x, &mut best);
                }
            }
        }
        best
    }
}
