//! Semi-analytic solution of the constant-coefficient problem
//!
//! ```text
//!   y_t = d y_xx + f(x),   y_t(t,0) = d y_x(t,0) + g₀,   y_t(t,ℓ) = −d y_x(t,ℓ) + g_ℓ,   y(0) = 0
//! ```
//!
//! with time-independent sources. The generator is self-adjoint on
//! L²(0,ℓ) × ℝ² with eigenpairs `λ = d κ²`,
//! `X(x) = cos κx − κ sin κx`, where `κ = 0` or `(κ² − 1) sin κℓ = 2κ cos κℓ`.
//! The final state splits into a stationary part, obtained by quadrature,
//! and a transient `Σ aₙ e^{−λₙ T} Xₙ / (λₙ ‖Xₙ‖²)` that only needs the
//! modes with `λₙ T` below a cutoff.
//!
//! None of this shares code with the finite-difference solver.

use crate::error::{Error, Result};

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Composite 5-point Gauss–Legendre rule on `[lo, hi]`.
pub fn gauss_legendre(lo: f64, hi: f64, panels: usize, g: impl Fn(f64) -> f64) -> f64 {
    let width = (hi - lo) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        let mut panel = 0.0;
        for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            panel += weight * g(mid + half * node);
        }
        acc += half * panel;
    }
    acc
}

/// Exponent beyond which `e^{−λT}` is dropped.
const TRANSIENT_CUTOFF: f64 = 60.0;

#[derive(Debug, Clone)]
pub struct WentzellOracle {
    diffusion: f64,
    ell: f64,
    final_time: f64,
    wavenumbers: Vec<f64>,
    panels: usize,
}

impl WentzellOracle {
    pub fn new(diffusion: f64, ell: f64, final_time: f64) -> Result<Self> {
        if !(diffusion > 0.0 && ell > 0.0 && final_time > 0.0) {
            return Err(Error::InvalidParameter(
                "oracle needs positive diffusion, length and final time".into(),
            ));
        }
        let kappa_max = (TRANSIENT_CUTOFF / (diffusion * final_time)).sqrt();
        let wavenumbers = eigen_wavenumbers(ell, kappa_max);
        Ok(Self {
            diffusion,
            ell,
            final_time,
            wavenumbers,
            panels: 400,
        })
    }

    /// Positive wavenumbers of the modes kept in the transient sum.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// `Y(T)` at the points `xs` for sources `(f, g₀, g_ℓ)`. The returned
    /// vector holds the interior profile; the boundary values are its ends
    /// when `xs` includes `0` and `ℓ`.
    pub fn final_state(&self, f: impl Fn(f64) -> f64, g_left: f64, g_right: f64, xs: &[f64]) -> Vec<f64> {
        let (d, ell, t_end) = (self.diffusion, self.ell, self.final_time);
        let integral = |g: &dyn Fn(f64) -> f64, hi: f64| gauss_legendre(0.0, hi, self.panels, g);

        // Projection onto constants and stationary part U with ⟨U, 1⟩ = 0:
        //   −d U'' = f − P₀,  U'(0) = (P₀ − g₀)/d
        let mass = integral(&f, ell) + g_left + g_right;
        let p0 = mass / (ell + 2.0);
        let slope0 = (p0 - g_left) / d;
        let raw = |x: f64| slope0 * x - integral(&|s| (x - s) * (f(s) - p0), x) / d;
        let raw_mean = (integral(&raw, ell) + raw(0.0) + raw(ell)) / (ell + 2.0);

        let modes: Vec<(f64, f64)> = self
            .wavenumbers
            .iter()
            .map(|&kappa| {
                let mode = |x: f64| (kappa * x).cos() - kappa * (kappa * x).sin();
                let norm_sq = integral(&|x| mode(x).powi(2), ell) + mode(0.0).powi(2) + mode(ell).powi(2);
                let load = integral(&|x| f(x) * mode(x), ell) + g_left * mode(0.0) + g_right * mode(ell);
                let lambda = d * kappa * kappa;
                (kappa, load * (-lambda * t_end).exp() / (lambda * norm_sq))
            })
            .collect();

        xs.iter()
            .map(|&x| {
                let transient: f64 = modes
                    .iter()
                    .map(|(kappa, c)| c * ((kappa * x).cos() - kappa * (kappa * x).sin()))
                    .sum();
                p0 * t_end + raw(x) - raw_mean - transient
            })
            .collect()
    }
}

/// Roots of `(κ² − 1) sin κℓ − 2κ cos κℓ` in `(0, kappa_max]`.
fn eigen_wavenumbers(ell: f64, kappa_max: f64) -> Vec<f64> {
    let h = |k: f64| (k * k - 1.0) * (k * ell).sin() - 2.0 * k * (k * ell).cos();
    let step = 1e-3 * std::f64::consts::PI / ell;
    let mut roots = Vec::new();
    let mut lo = step;
    let mut h_lo = h(lo);
    while lo < kappa_max + std::f64::consts::PI / ell {
        let hi = lo + step;
        let h_hi = h(hi);
        if h_lo == 0.0 {
            roots.push(lo);
        } else if h_lo * h_hi < 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if h(a) * h(m) <= 0.0 {
                    b = m;
                } else {
                    a = m;
                }
                if b - a < 1e-15 * b {
                    break;
                }
            }
            roots.push(0.5 * (a + b));
        }
        lo = hi;
        h_lo = h_hi;
    }
    roots.retain(|k| *k <= kappa_max + std::f64::consts::PI / ell);
    roots
}
