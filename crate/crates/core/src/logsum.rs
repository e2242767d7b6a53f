/// Streaming log-sum-exp: accumulates `ln sum_k exp(x_k)` in a single pass,
/// rescaling whenever a new maximum arrives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    #[inline]
    pub(crate) fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

pub(crate) fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = LogSumExp::default();
    for x in xs {
        acc.push(x);
    }
    acc.value()
}
