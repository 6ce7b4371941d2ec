//! Small statistics shared by the pool drivers and fits.

/// `⟨ln Z⟩` over samples above a floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogTypical {
    /// Mean of `ln Z` over `Z > floor`; `-inf` when no sample qualifies.
    pub mean: f64,
    /// Standard error of `mean`; `NaN` with fewer than two samples.
    pub stderr: f64,
    pub frac_nonzero: f64,
    pub count: usize,
}

pub fn log_typical<I: IntoIterator<Item = f64>>(values: I, floor: f64) -> LogTypical {
    let (mut n, mut total, mut s, mut s2) = (0usize, 0usize, 0.0, 0.0);
    for z in values {
        total += 1;
        if z > floor {
            let l = z.ln();
            n += 1;
            s += l;
            s2 += l * l;
        }
    }
    let frac_nonzero = if total > 0 { n as f64 / total as f64 } else { 0.0 };
    if n == 0 {
        return LogTypical { mean: f64::NEG_INFINITY, stderr: f64::NAN, frac_nonzero, count: 0 };
    }
    let mean = s / n as f64;
    let stderr = if n > 1 {
        let var = ((s2 - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0);
        (var / n as f64).sqrt()
    } else {
        f64::NAN
    };
    LogTypical { mean, stderr, frac_nonzero, count: n }
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, se_a, se_b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64, f64)> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let s2 = rss / (nf - 2.0);
    let se_b = (s2 / sxx).sqrt();
    let se_a = (s2 * (1.0 / nf + mx * mx / sxx)).sqrt();
    Some((a, b, se_a, se_b))
}
