#![allow(dead_code)]

use siseg::hypothesis::LineParametrization;
use siseg::network::{Dense, LayerSpec, NetworkSpec, PiecewiseLinearActivation};

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let pair = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64, depth: u32) -> f64 {
    let (k, err) = gk15(f, a, b);
    if depth == 0 || err <= rel * k.abs() || err < 1e-300 {
        return k;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, rel, depth - 1) + adaptive(f, m, b, rel, depth - 1)
}

/// Gaussian mass of `[lo, hi]` by adaptive quadrature of the density.
pub fn gaussian_mass(lo: f64, hi: f64, sigma: f64) -> f64 {
    let lo = lo.max(-40.0 * sigma);
    let hi = hi.min(40.0 * sigma);
    if lo >= hi {
        return 0.0;
    }
    let density = move |x: f64| (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    // split at the mode so the peak is never in the middle of a panel
    let mut cuts = vec![lo];
    if lo < 0.0 && hi > 0.0 {
        cuts.push(0.0);
    }
    cuts.push(hi);
    cuts.windows(2).map(|w| adaptive(&density, w[0], w[1], 1e-13, 40)).sum()
}

/// Two-sided truncated-normal p-value by quadrature.
pub fn quadrature_truncated_p(z: f64, sigma: f64, intervals: &[(f64, f64)]) -> f64 {
    let t = z.abs();
    let mut num = 0.0;
    let mut den = 0.0;
    for &(lo, hi) in intervals {
        den += gaussian_mass(lo, hi, sigma);
        num += gaussian_mass(lo, hi.min(-t), sigma);
        num += gaussian_mass(lo.max(t), hi, sigma);
    }
    num / den
}

/// Line along the first pixel only: `x(z) = a + b z` with `a = (a0, 0, ..)`, `b = (b0, 0, ..)`.
pub fn first_pixel_line(n: usize, a0: f64, b0: f64) -> LineParametrization {
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    a[0] = a0;
    b[0] = b0;
    let mut eta = vec![0.0; n];
    eta[0] = 1.0;
    LineParametrization {
        a,
        b,
        z_obs: 0.0,
        eta,
        sigma_eta: 1.0,
    }
}

/// 2x2 input, one hidden unit reading pixel 0 through `activation`, broadcast to
/// all four outputs with unit weight.
pub fn single_unit_net(activation: PiecewiseLinearActivation, output_bias: f64) -> NetworkSpec {
    NetworkSpec::new(
        2,
        2,
        vec![
            LayerSpec::Dense(Dense {
                in_features: 4,
                out_features: 1,
                weight: vec![1.0, 0.0, 0.0, 0.0],
                bias: vec![0.0],
            }),
            LayerSpec::Activation(activation),
            LayerSpec::Dense(Dense {
                in_features: 1,
                out_features: 4,
                weight: vec![1.0; 4],
                bias: vec![output_bias; 4],
            }),
            LayerSpec::OutputSign { threshold: 0.0 },
        ],
    )
    .unwrap()
}

/// `n x n` identity dense layer with zero bias and a sign output.
pub fn identity_dense(side: usize) -> NetworkSpec {
    let n = side * side;
    let weight = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
    NetworkSpec::new(
        side,
        side,
        vec![
            LayerSpec::Dense(Dense {
                in_features: n,
                out_features: n,
                weight,
                bias: vec![0.0; n],
            }),
            LayerSpec::OutputSign { threshold: 0.0 },
        ],
    )
    .unwrap()
}
