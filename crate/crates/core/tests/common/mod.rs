#![allow(dead_code)]

//! Independent oracles shared by the integration tests.

/// Exact minimizer of `1/2 sum (x_i - y_i)^2 + mu sum |x_{i+1} - x_i|` by the
/// direct taut-string scan (Condat's algorithm).
pub fn taut_string(y: &[f64], mu: f64) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    if n == 0 {
        return x;
    }
    let (mut k, mut k0, mut kminus, mut kplus) = (0usize, 0usize, 0usize, 0usize);
    let (mut umin, mut umax) = (mu, -mu);
    let (mut vmin, mut vmax) = (y[0] - mu, y[0] + mu);
    loop {
        while k == n - 1 {
            if umin < 0.0 {
                while k0 <= kminus {
                    x[k0] = vmin;
                    k0 += 1;
                }
                k = k0;
                kminus = k0;
                vmin = y[k0];
                umin = mu;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                while k0 <= kplus {
                    x[k0] = vmax;
                    k0 += 1;
                }
                k = k0;
                kplus = k0;
                vmax = y[k0];
                umax = -mu;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    x[k0] = vmin;
                    k0 += 1;
                }
                return x;
            }
        }
        umin += y[k + 1] - vmin;
        if umin < -mu {
            while k0 <= kminus {
                x[k0] = vmin;
                k0 += 1;
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = y[k0];
            vmax = vmin + 2.0 * mu;
            umin = mu;
            umax = -mu;
            continue;
        }
        umax += y[k + 1] - vmax;
        if umax > mu {
            while k0 <= kplus {
                x[k0] = vmax;
                k0 += 1;
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = y[k0];
            vmin = vmax - 2.0 * mu;
            umin = mu;
            umax = -mu;
            continue;
        }
        k += 1;
        if umin >= mu {
            kminus = k;
            vmin += (umin - mu) / (kminus - k0 + 1) as f64;
            umin = mu;
        }
        if umax <= -mu {
            kplus = k;
            vmax += (umax + mu) / (kplus - k0 + 1) as f64;
            umax = -mu;
        }
    }
}

/// Discrete energy `1/2 sum (x - y)^2 + mu sum |dx|`.
pub fn tv_energy(x: &[f64], y: &[f64], mu: f64) -> f64 {
    let fid: f64 = x.iter().zip(y).map(|(a, b)| 0.5 * (a - b).powi(2)).sum();
    let tv: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    fid + mu * tv
}

/// `(sum (a - b)^2 h)^{1/2}`.
pub fn weighted_l2(a: &[f64], b: &[f64], h: f64) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * h).sqrt()
}

/// The unit step at 1/2 sampled at `n` cell centers.
pub fn unit_step(n: usize) -> Vec<f64> {
    (0..n).map(|i| if (i as f64 + 0.5) / n as f64 > 0.5 { 1.0 } else { 0.0 }).collect()
}
