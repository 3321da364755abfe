//! Independent reference implementations used as test oracles.

use std::f64::consts::PI;

/// Step-by-step NI-LIF over `[T, n]` row-major input, one element at a time.
pub fn nilif_scalar(u: &[f32], t: usize, gamma: f32, v_th: f32, d: u32) -> Vec<f32> {
    let n = u.len() / t;
    let mut out = vec![0.0f32; u.len()];
    for i in 0..n {
        let mut mu = 0.0f32;
        let mut m = 0.0f32;
        for step in 0..t {
            mu = gamma * (mu - v_th * m) + u[step * n + i];
            let mut count = (mu / v_th).floor();
            if count < 0.0 {
                count = 0.0;
            }
            if count > d as f32 {
                count = d as f32;
            }
            m = count;
            out[step * n + i] = m / d as f32;
        }
    }
    out
}

/// Direct 2-D DFT of one plane: `(re, im)` per bin.
pub fn dft(x: &[f32], h: usize, w: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(h * w);
    for u in 0..h {
        for v in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for z in 0..w {
                    let th = -2.0 * PI * ((u * y) as f64 / h as f64 + (v * z) as f64 / w as f64);
                    re += x[y * w + z] as f64 * th.cos();
                    im += x[y * w + z] as f64 * th.sin();
                }
            }
            out.push((re, im));
        }
    }
    out
}

/// Mean bin modulus of the spectrum of `a − b`, over all planes.
pub fn fft_l1(a: &[f32], b: &[f32], h: usize, w: usize) -> f64 {
    let diff: Vec<f32> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut acc = 0.0;
    for plane in diff.chunks_exact(h * w) {
        for (re, im) in dft(plane, h, w) {
            acc += re.hypot(im);
        }
    }
    acc / diff.len() as f64
}

/// Mean SSIM of one plane, 2-D Gaussian window slid over the valid region.
pub fn ssim_plane(a: &[f32], b: &[f32], h: usize, w: usize) -> f64 {
    let mut k = h.min(w).min(11);
    if k.is_multiple_of(2) {
        k -= 1;
    }
    let c = (k / 2) as f64;
    let mut win = vec![0.0f64; k * k];
    for i in 0..k {
        for j in 0..k {
            let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            win[i * k + j] = (-r2 / (2.0 * 1.5 * 1.5)).exp();
        }
    }
    let s: f64 = win.iter().sum();
    win.iter_mut().for_each(|v| *v /= s);
    let (c1, c2) = (1e-4, 9e-4);
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=h - k {
        for x0 in 0..=w - k {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let g = win[i * k + j];
                    let (p, q) = (a[(y0 + i) * w + x0 + j] as f64, b[(y0 + i) * w + x0 + j] as f64);
                    ma += g * p;
                    mb += g * q;
                    saa += g * p * p;
                    sbb += g * q * q;
                    sab += g * p * q;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

/// Trainable scalar count of the network, tallied by hand from its layout.
pub fn network_params(base: usize, layout: &[usize; 6], t: usize) -> usize {
    let conv_bn = |ci: usize, co: usize, k: usize| co * ci * k * k + 2 * co;
    let gate = |n: usize| {
        let h = (n / 4).max(1);
        2 * n * h + h + n
    };
    let srb = |c: usize| {
        let q = c / 4;
        let fdm = 2;
        let mplb = 4 * conv_bn(q, q, 1) + 3 * conv_bn(2 * q, q, 1) + 4 * q + conv_bn(c, c, 3);
        let mda = gate(t) + gate(c) + 7 * 7 + 1;
        fdm + 2 * conv_bn(c, c, 3) + mplb + conv_bn(c, c, 1) + mda
    };
    let ch = [base, 2 * base, 4 * base];
    let e = base / 2;
    let mut n = conv_bn(3, base, 3);
    for l in 0..3 {
        n += (layout[l] + layout[5 - l]) * srb(ch[l]);
    }
    n += conv_bn(ch[0], ch[1], 3) + conv_bn(ch[1], ch[2], 3);
    n += (3 * e * 9 + conv_bn(ch[1] + e, ch[1], 1)) + (3 * e * 9 + conv_bn(ch[2] + e, ch[2], 1));
    n += conv_bn(ch[2], ch[1], 3) + conv_bn(ch[1], ch[0], 3);
    n += conv_bn(2 * ch[1], ch[1], 1) + conv_bn(2 * ch[0], ch[0], 1);
    n += ch.iter().map(|c| c * 3 * 9 + 3).sum::<usize>();
    n
}
