//! Adaptive target normalization that preserves de-normalized outputs.

use super::network::ValueHead;

pub const DEFAULT_ALPHA: f64 = 3e-4;
pub const SCALE_FLOOR: f64 = 1e-4;

/// Running first and second moments of the value targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopArt {
    pub mean: f64,
    pub second_moment: f64,
    pub alpha: f64,
}

impl Default for PopArt {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHA)
    }
}

impl PopArt {
    /// Identity normalization (`μ = 0`, `σ = 1`).
    pub fn new(alpha: f64) -> Self {
        Self {
            mean: 0.0,
            second_moment: 1.0,
            alpha,
        }
    }

    pub fn scale(&self) -> f64 {
        libm::sqrt((self.second_moment - self.mean * self.mean).max(0.0)).max(SCALE_FLOOR)
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.mean) / self.scale()
    }

    pub fn denormalize(&self, n: f64) -> f64 {
        self.scale() * n + self.mean
    }

    /// Move the statistics toward the batch moments of `targets` and
    /// rewrite each head's final affine layer in every parameter vector of
    /// `params` so that `denormalize(head(x))` is unchanged for all `x`.
    pub fn update(&mut self, targets: &[f64], heads: &[ValueHead], params: &mut [&mut [f64]]) {
        if targets.is_empty() {
            return;
        }
        let n = targets.len() as f64;
        let m1 = targets.iter().sum::<f64>() / n;
        let m2 = targets.iter().map(|y| y * y).sum::<f64>() / n;
        let (old_mean, old_scale) = (self.mean, self.scale());
        self.mean += self.alpha * (m1 - self.mean);
        self.second_moment += self.alpha * (m2 - self.second_moment);
        let new_scale = self.scale();
        let ratio = old_scale / new_scale;
        for theta in params.iter_mut() {
            for head in heads {
                for &w in &head.weights {
                    theta[w] *= ratio;
                }
                let b = &mut theta[head.bias];
                *b = (old_scale * *b + old_mean - self.mean) / new_scale;
            }
        }
    }
}
