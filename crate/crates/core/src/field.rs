//! Grids, product-space fields and the quadratures that define their inner
//! products.
//!
//! The state space is L²(0,ℓ) × ℝ²: an interior profile together with the
//! two boundary temperatures. Boundary temperatures are the endpoint nodes
//! of the profile, so the trace coupling `y_Γ = y|_Γ` holds by construction.
//! All integrals use the composite trapezoid rule.

use crate::error::{ensure_len, Error, Result};

/// Smallest accepted number of cells.
pub const MIN_CELLS: usize = 4;
/// Smallest accepted number of time steps.
pub const MIN_STEPS: usize = 2;

/// Uniform grid on `[0, ell]` with `n_cells + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    ell: f64,
    n_cells: usize,
}

impl SpatialGrid {
    pub fn new(ell: f64, n_cells: usize) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "domain length must be positive, got {ell}"
            )));
        }
        if n_cells < MIN_CELLS {
            return Err(Error::InvalidParameter(format!(
                "n_cells must be at least {MIN_CELLS}, got {n_cells}"
            )));
        }
        Ok(Self { ell, n_cells })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn dx(&self) -> f64 {
        self.ell / self.n_cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.ell
        } else {
            i as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    /// Composite trapezoid weights for ∫₀^ℓ.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.dx();
        let mut w = vec![h; self.n_nodes()];
        w[0] = 0.5 * h;
        w[self.n_cells] = 0.5 * h;
        w
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| f(self.node(i))).collect()
    }

    /// Same domain with every cell split in two.
    pub fn refined(&self) -> Self {
        Self {
            ell: self.ell,
            n_cells: 2 * self.n_cells,
        }
    }
}

/// Uniform steps `t_k = k Δt` covering `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, n_steps: usize) -> Result<Self> {
        if !(final_time.is_finite() && final_time > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        if n_steps < MIN_STEPS {
            return Err(Error::InvalidParameter(format!(
                "n_steps must be at least {MIN_STEPS}, got {n_steps}"
            )));
        }
        Ok(Self { final_time, n_steps })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_times(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.final_time
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_times()).map(|k| self.time(k)).collect()
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.n_times()];
        w[0] = 0.5 * dt;
        w[self.n_steps] = 0.5 * dt;
        w
    }

    pub fn refined(&self) -> Self {
        Self {
            final_time: self.final_time,
            n_steps: 2 * self.n_steps,
        }
    }
}

/// Space and time grids of one discretisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grids {
    pub space: SpatialGrid,
    pub time: TimeGrid,
}

impl Grids {
    pub fn new(ell: f64, n_cells: usize, final_time: f64, n_steps: usize) -> Result<Self> {
        Ok(Self {
            space: SpatialGrid::new(ell, n_cells)?,
            time: TimeGrid::new(final_time, n_steps)?,
        })
    }

    /// Halves both Δx and Δt.
    pub fn refined(&self) -> Self {
        Self {
            space: self.space.refined(),
            time: self.time.refined(),
        }
    }
}

/// An element of L²(0,ℓ) × ℝ² sampled on the grid.
///
/// `left()` and `right()` are views of the first and last node, not
/// separate storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    values: Vec<f64>,
}

impl ProductState {
    pub fn from_nodes(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &SpatialGrid, c: f64) -> Self {
        Self {
            values: vec![c; grid.n_nodes()],
        }
    }

    pub fn sample(grid: &SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self { values: grid.sample(f) }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn left(&self) -> f64 {
        self.values[0]
    }

    pub fn right(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self - other`, node by node.
    pub fn difference(&self, other: &ProductState) -> Result<ProductState> {
        ensure_len("product states", self.len(), other.len())?;
        Ok(ProductState {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> ProductState {
        ProductState {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &ProductState) -> Result<()> {
        ensure_len("product states", self.len(), other.len())?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn norm(&self, grid: &SpatialGrid) -> Result<f64> {
        Ok(product_inner(self, self, grid)?.sqrt())
    }
}

/// Spatial source `f(x)` sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSource {
    values: Vec<f64>,
}

impl SpaceSource {
    pub fn new(grid: &SpatialGrid, values: Vec<f64>) -> Result<Self> {
        ensure_len("source values", grid.n_nodes(), values.len())?;
        Ok(Self { values })
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self {
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn sample(grid: &SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self { values: grid.sample(f) }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SpaceSource, b: f64) -> Result<SpaceSource> {
        ensure_len("sources", self.len(), other.len())?;
        Ok(SpaceSource {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> SpaceSource {
        SpaceSource {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Boundary sources `G(t,0)` and `G(t,ℓ)` sampled at every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySourcePair {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl BoundarySourcePair {
    pub fn new(time: &TimeGrid, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        ensure_len("left boundary series", time.n_times(), left.len())?;
        ensure_len("right boundary series", time.n_times(), right.len())?;
        Ok(Self { left, right })
    }

    pub fn zeros(time: &TimeGrid) -> Self {
        Self {
            left: vec![0.0; time.n_times()],
            right: vec![0.0; time.n_times()],
        }
    }

    pub fn sample(time: &TimeGrid, left: impl Fn(f64) -> f64, right: impl Fn(f64) -> f64) -> Self {
        let t = time.times();
        Self {
            left: t.iter().map(|&s| left(s)).collect(),
            right: t.iter().map(|&s| right(s)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.left.iter().chain(&self.right).all(|v| *v == 0.0)
    }

    /// ∫₀^T (G(t,0)² + G(t,ℓ)²) dt.
    pub fn norm_sq(&self, time: &TimeGrid) -> Result<f64> {
        ensure_len("boundary series", time.n_times(), self.left.len())?;
        ensure_len("boundary series", time.n_times(), self.right.len())?;
        Ok(time
            .trapezoid_weights()
            .iter()
            .zip(self.left.iter().zip(&self.right))
            .map(|(w, (l, r))| w * (l * l + r * r))
            .sum())
    }
}

/// Trapezoid ∫₀^ℓ u v dx for nodal samples.
pub fn space_inner(u: &[f64], v: &[f64], grid: &SpatialGrid) -> Result<f64> {
    ensure_len("grid nodes", grid.n_nodes(), u.len())?;
    ensure_len("grid nodes", grid.n_nodes(), v.len())?;
    let h = grid.dx();
    let n = grid.n_cells();
    let inner: f64 = (1..n).map(|i| u[i] * v[i]).sum();
    Ok(h * (inner + 0.5 * (u[0] * v[0] + u[n] * v[n])))
}

/// ⟨u, v⟩ on L²(0,ℓ) × ℝ²: trapezoid integral plus the two boundary products.
pub fn product_inner(u: &ProductState, v: &ProductState, grid: &SpatialGrid) -> Result<f64> {
    let integral = space_inner(&u.values, &v.values, grid)?;
    Ok(integral + u.left() * v.left() + u.right() * v.right())
}

/// Trapezoid in time of `product_inner(u(t), v(t))`.
pub fn spacetime_inner(u: &[ProductState], v: &[ProductState], grids: &Grids) -> Result<f64> {
    ensure_len("time levels", grids.time.n_times(), u.len())?;
    ensure_len("time levels", grids.time.n_times(), v.len())?;
    let w = grids.time.trapezoid_weights();
    let mut acc = 0.0;
    for ((wk, uk), vk) in w.iter().zip(u).zip(v) {
        acc += wk * product_inner(uk, vk, &grids.space)?;
    }
    Ok(acc)
}

/// Trapezoid √(∫₀^ℓ f² dx).
pub fn l2_space_norm(f: &SpaceSource, grid: &SpatialGrid) -> Result<f64> {
    Ok(space_inner(&f.values, &f.values, grid)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize) -> SpatialGrid {
        SpatialGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn grid_nodes_are_exact_at_the_ends() {
        let g = SpatialGrid::new(0.7, 9).unwrap();
        let x = g.nodes();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[9], 0.7);
        assert!(x.windows(2).all(|w| w[1] > w[0]));
        let t = TimeGrid::new(1.3, 7).unwrap();
        assert_eq!(t.time(7), 1.3);
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(SpatialGrid::new(1.0, 3).is_err());
        assert!(SpatialGrid::new(0.0, 8).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(-1.0, 8).is_err());
    }

    #[test]
    fn inner_of_constant_one_is_three() {
        let g = unit(16);
        let one = ProductState::constant(&g, 1.0);
        assert!((product_inner(&one, &one, &g).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn inner_with_zero_is_zero() {
        let g = unit(16);
        let u = ProductState::sample(&g, |x| (3.0 * x).exp());
        assert_eq!(product_inner(&u, &ProductState::zeros(&g), &g).unwrap(), 0.0);
    }

    #[test]
    fn inner_of_parabola_converges_to_one_thirtieth() {
        // ∫₀¹ x²(1−x)² dx = 1/30; the profile vanishes at both ends
        let mut errs = Vec::new();
        for n in [16, 32, 64, 128] {
            let g = unit(n);
            let u = ProductState::sample(&g, |x| x * (1.0 - x));
            errs.push((product_inner(&u, &u, &g).unwrap() - 1.0 / 30.0).abs());
        }
        let h = 1.0 / 128.0;
        assert!(errs[3] < h * h);
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let u = ProductState::zeros(&unit(8));
        let v = ProductState::zeros(&unit(16));
        assert!(matches!(
            product_inner(&u, &v, &unit(8)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spacetime_inner_examples() {
        let grids = Grids::new(1.0, 32, 1.0, 16).unwrap();
        let zero: Vec<_> = (0..17).map(|_| ProductState::zeros(&grids.space)).collect();
        assert_eq!(spacetime_inner(&zero, &zero, &grids).unwrap(), 0.0);

        let one: Vec<_> = (0..17).map(|_| ProductState::constant(&grids.space, 1.0)).collect();
        assert!((spacetime_inner(&one, &one, &grids).unwrap() - 3.0).abs() < 1e-13);

        // ∫₀¹∫₀¹ sin²(πx) dx dt = 1/2; boundary values vanish
        let mut errs = Vec::new();
        let mut grids = Grids::new(1.0, 8, 1.0, 4).unwrap();
        for _ in 0..4 {
            let s: Vec<_> = (0..grids.time.n_times())
                .map(|_| ProductState::sample(&grids.space, |x| (std::f64::consts::PI * x).sin()))
                .collect();
            errs.push((spacetime_inner(&s, &s, &grids).unwrap() - 0.5).abs());
            grids = grids.refined();
        }
        // trapezoid is spectrally accurate for periodic integrands; only check the bound
        assert!(errs.iter().all(|e| *e < 1e-12), "{errs:?}");
    }

    #[test]
    fn l2_norm_examples() {
        let g = unit(64);
        assert_eq!(l2_space_norm(&SpaceSource::zeros(&g), &g).unwrap(), 0.0);
        let one = SpaceSource::sample(&g, |_| 1.0);
        assert!((l2_space_norm(&one, &g).unwrap() - 1.0).abs() < 1e-14);
        let s = SpaceSource::sample(&g, |x| (std::f64::consts::PI * x).sin());
        assert!((l2_space_norm(&s, &g).unwrap() - 0.5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn smooth_non_periodic_quadrature_is_second_order() {
        // ∫₀¹ e^{2x} dx + e⁰ + e⁴ with u = v = e^x
        let exact = (2f64.exp() - 1.0) / 2.0 + 1.0 + 2f64.exp();
        let errs: Vec<f64> = [16, 32, 64, 128, 256]
            .iter()
            .map(|&n| {
                let g = unit(n);
                let u = ProductState::sample(&g, f64::exp);
                (product_inner(&u, &u, &g).unwrap() - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
        }
    }

    fn state(n: usize) -> impl Strategy<Value = ProductState> {
        proptest::collection::vec(-10.0..10.0f64, n + 1).prop_map(ProductState::from_nodes)
    }

    proptest! {
        #[test]
        fn inner_is_symmetric_and_bilinear(u in state(12), v in state(12), w in state(12), a in -3.0..3.0f64) {
            let g = unit(12);
            let uv = product_inner(&u, &v, &g).unwrap();
            let vu = product_inner(&v, &u, &g).unwrap();
            prop_assert!((uv - vu).abs() <= 1e-12 * (1.0 + uv.abs()));

            let mut au_w = u.scaled(a);
            au_w.add_scaled(1.0, &w).unwrap();
            let lhs = product_inner(&au_w, &v, &g).unwrap();
            let rhs = a * uv + product_inner(&w, &v, &g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn cauchy_schwarz(u in state(12), v in state(12)) {
            let g = unit(12);
            let uv = product_inner(&u, &v, &g).unwrap();
            prop_assert!(uv.abs() <= u.norm(&g).unwrap() * v.norm(&g).unwrap() + 1e-12);
        }
    }
}
