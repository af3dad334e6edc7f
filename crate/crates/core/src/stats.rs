//! Small order-stable sample statistics used by the disorder averages.

/// Mean, unbiased variance and their standard errors of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    /// Standard error of the unbiased variance estimator.
    pub variance_stderr: f64,
}

/// Summarize `values`, summing in index order so the result does not depend
/// on how the values were produced.
pub fn summarize(values: &[f64]) -> SampleSummary {
    let n = values.len();
    if n == 0 {
        return SampleSummary {
            count: 0,
            mean: f64::NAN,
            variance: f64::NAN,
            stderr: f64::NAN,
            variance_stderr: f64::NAN,
        };
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    if n == 1 {
        return SampleSummary {
            count: 1,
            mean,
            variance: 0.0,
            stderr: 0.0,
            variance_stderr: 0.0,
        };
    }
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    let variance = m2 / (nf - 1.0);
    let mu2 = m2 / nf;
    let mu4 = m4 / nf;
    // Var[s²] = (μ₄ - (n-3)/(n-1) σ⁴) / n
    let var_of_var = ((mu4 - (nf - 3.0) / (nf - 1.0) * mu2 * mu2) / nf).max(0.0);
    SampleSummary {
        count: n,
        mean,
        variance,
        stderr: (variance / nf).sqrt(),
        variance_stderr: var_of_var.sqrt(),
    }
}
