//! Polar grids, gradient norms, the discrete p-energy, and grid distances
//! for the Euclidean and the ℓ¹-Finsler structure on the punctured plane.
//!
//! Nodes sit at `(r_i, θ_j)` with log-spaced radii `r_0 < … < r_M` and `N`
//! periodic angles. Values live on nodes, gradients on cells
//! `[r_i, r_{i+1}] × [θ_j, θ_{j+1}]`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::MeasureProfile;

/// Log-spaced radial × uniform periodic angular mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    radii: Vec<f64>,
    n_angles: usize,
}

impl PolarGrid {
    /// `m` radial cells between `r0` and `r_outer` (so `m + 1` rings), `n` angles.
    pub fn new(r0: f64, r_outer: f64, m: usize, n: usize) -> Result<Self> {
        if !(r0 > 0.0 && r0 < r_outer && r_outer.is_finite()) {
            return Err(Error::domain(format!(
                "grid needs 0 < r0 < R, got r0 = {r0}, R = {r_outer}"
            )));
        }
        let ratio = (r_outer / r0).ln();
        let mut radii: Vec<f64> = (0..=m).map(|i| r0 * (ratio * i as f64 / m as f64).exp()).collect();
        if let Some(last) = radii.last_mut() {
            *last = r_outer;
        }
        Self::from_radii(radii, n)
    }

    /// Grid with explicitly given radii (strictly increasing, positive).
    pub fn from_radii(radii: Vec<f64>, n: usize) -> Result<Self> {
        if radii.len() < 9 || n < 8 {
            return Err(Error::domain(format!(
                "grid needs M >= 8 radial cells and N >= 8 angles, got M = {}, N = {n}",
                radii.len().saturating_sub(1)
            )));
        }
        if !(radii[0] > 0.0) || radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::domain("grid radii must be positive, finite and strictly increasing"));
        }
        Ok(Self { radii, n_angles: n })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Number of radial cells `M`.
    pub fn cells_radial(&self) -> usize {
        self.radii.len() - 1
    }

    pub fn rings(&self) -> usize {
        self.radii.len()
    }

    pub fn angles(&self) -> usize {
        self.n_angles
    }

    pub fn nodes(&self) -> usize {
        self.radii.len() * self.n_angles
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_angles as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.dtheta() * j as f64
    }

    pub fn inner_radius(&self) -> f64 {
        self.radii[0]
    }

    pub fn outer_radius(&self) -> f64 {
        *self.radii.last().expect("non-empty")
    }

    /// Row-major index: radius first, then angle.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_angles + j % self.n_angles
    }

    /// `(i, j)` from a flat index.
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k / self.n_angles, k % self.n_angles)
    }

    /// Geometric-mean radius of radial cell `i`.
    pub fn cell_radius(&self, i: usize) -> f64 {
        (self.radii[i] * self.radii[i + 1]).sqrt()
    }

    /// Cartesian position of node `(i, j)`.
    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        let (s, c) = self.theta(j).sin_cos();
        (self.radii[i] * c, self.radii[i] * s)
    }

    /// Ring index `i` with `radii[i] == r` up to `1e-12` relative.
    pub fn ring_of(&self, r: f64) -> Option<usize> {
        self.radii.iter().position(|&x| (x - r).abs() <= 1e-12 * r.abs())
    }
}

/// Nodal values on a [`PolarGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PolarGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: PolarGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::domain(format!(
                "field has {} values for a grid with {} nodes",
                values.len(),
                grid.nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("field values must be finite"));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(r, θ)` on every node.
    pub fn from_fn(grid: PolarGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.nodes())
            .map(|k| {
                let (i, j) = grid.coords(k);
                f(grid.radii[i], grid.theta(j))
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Bilinear interpolation in `(log r, θ)`; `None` outside `[r_0, r_M]`.
    pub fn interpolate(&self, r: f64, theta: f64) -> Option<f64> {
        let g = &self.grid;
        if !(r >= g.inner_radius() && r <= g.outer_radius()) {
            return None;
        }
        let i = g.radii.partition_point(|&x| x <= r).clamp(1, g.cells_radial()) - 1;
        let s = (r / g.radii[i]).ln() / (g.radii[i + 1] / g.radii[i]).ln();
        let x = theta.rem_euclid(2.0 * PI) / g.dtheta();
        let j = (x.floor() as usize) % g.angles();
        let t = x - x.floor();
        let v = |a: usize, b: usize| self.at(a, b);
        Some(
            (1.0 - s) * ((1.0 - t) * v(i, j) + t * v(i, j + 1))
                + s * ((1.0 - t) * v(i + 1, j) + t * v(i + 1, j + 1)),
        )
    }

    /// Values clamped to `[lo, hi]`.
    pub fn clamped(&self, lo: f64, hi: f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.clamp(lo, hi)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

/// Which pointwise norm of `(∂_r u, ∂_θ u / r)` defines `g_u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradNormKind {
    /// `sqrt((∂_r u)^2 + (∂_θ u / r)^2)`.
    Euclidean,
    /// `max(|∂_r u|, |∂_θ u| / r)`, dual to the ℓ¹ tangent norm.
    FinslerMax,
}

/// Norm applied per cell; `SmoothMax(q)` is `(|a|^q + |b|^q)^(1/q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellNorm {
    Euclidean,
    Max,
    SmoothMax(f64),
}

impl From<GradNormKind> for CellNorm {
    fn from(kind: GradNormKind) -> Self {
        match kind {
            GradNormKind::Euclidean => CellNorm::Euclidean,
            GradNormKind::FinslerMax => CellNorm::Max,
        }
    }
}

impl CellNorm {
    pub fn value(self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.abs(), b.abs());
        match self {
            CellNorm::Euclidean => a.hypot(b),
            CellNorm::Max => a.max(b),
            CellNorm::SmoothMax(q) => {
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                if hi == 0.0 {
                    return 0.0;
                }
                hi * (1.0 + (lo / hi).powf(q)).powf(1.0 / q)
            }
        }
    }

    /// `g^p` and its partial derivatives in `a` and `b`.
    #[inline]
    pub fn phi(self, p: f64, a: f64, b: f64) -> (f64, f64, f64) {
        match self {
            CellNorm::Euclidean => {
                let s = a * a + b * b;
                if s == 0.0 {
                    return (0.0, 0.0, 0.0);
                }
                let phi = s.powf(0.5 * p);
                let c = p * phi / s;
                (phi, c * a, c * b)
            }
            CellNorm::Max => {
                let (aa, bb) = (a.abs(), b.abs());
                let g = aa.max(bb);
                if g == 0.0 {
                    return (0.0, 0.0, 0.0);
                }
                let phi = g.powf(p);
                let c = p * phi / g;
                if aa >= bb {
                    (phi, c * a.signum(), 0.0)
                } else {
                    (phi, 0.0, c * b.signum())
                }
            }
            CellNorm::SmoothMax(q) => {
                let (aa, bb) = (a.abs(), b.abs());
                let hi = aa.max(bb);
                if hi == 0.0 {
                    return (0.0, 0.0, 0.0);
                }
                let ra = (aa / hi).powf(q - 1.0);
                let rb = (bb / hi).powf(q - 1.0);
                // (|a|^q + |b|^q) / hi^q, one of the two ratios being 1.
                let sum = ra * (aa / hi) + rb * (bb / hi);
                let g = hi * sum.powf(1.0 / q);
                let phi = g.powf(p);
                // d g / d a = (|a| / g)^(q-1) sign(a) = ra * (hi / g)^(q-1) sign(a)
                let scale = (hi / g).powf(q - 1.0);
                let c = p * phi / g * scale;
                (phi, c * ra * a.signum(), c * rb * b.signum())
            }
        }
    }
}

/// Discrete p-energy `Σ_cells φ · μ(cell)` on a fixed grid and weight.
///
/// Each cell carries two radial differences (on its two rays) and two
/// angular differences (on its two rings). `φ` averages `g^p` over the four
/// pairings, which makes the energy convex in nodal values and, for `p = 2`
/// with the Euclidean norm, reduces to the 5-point Laplacian form.
#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    grid: PolarGrid,
    p: f64,
    norm: CellNorm,
    inv_dr: Vec<f64>,
    inv_arc: Vec<f64>,
    cell_mass: Vec<f64>,
}

struct RowTerms {
    energy: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl EnergyFunctional {
    pub fn new(grid: &PolarGrid, p: f64, norm: CellNorm, profile: &MeasureProfile) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::domain(format!("p-energy needs p > 1, got {p}")));
        }
        let m = grid.cells_radial();
        let dth = grid.dtheta();
        let mut cell_mass = Vec::with_capacity(m);
        for i in 0..m {
            let (t0, t1) = (grid.radii[i].log2(), grid.radii[i + 1].log2());
            profile.log2_mu(t0)?;
            profile.log2_mu(t1)?;
            cell_mass.push(profile.model().log2_radial_mass(t0, t1)?.exp2() * dth);
        }
        Ok(Self {
            grid: grid.clone(),
            p,
            norm,
            inv_dr: (0..m).map(|i| 1.0 / (grid.radii[i + 1] - grid.radii[i])).collect(),
            inv_arc: (0..m).map(|i| 1.0 / (grid.cell_radius(i) * dth)).collect(),
            cell_mass,
        })
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn norm(&self) -> CellNorm {
        self.norm
    }

    pub fn with_norm(&self, norm: CellNorm) -> Self {
        Self { norm, ..self.clone() }
    }

    /// `μ` of one cell in radial band `i`.
    pub fn cell_mass(&self, i: usize) -> f64 {
        self.cell_mass[i]
    }

    /// Cell partials `(∂_r u on ray j, on ray j+1, ∂_θ u / r on ring i, on ring i+1)`.
    #[inline]
    fn cell_diffs(&self, u: &[f64], i: usize, j: usize) -> [f64; 4] {
        let n = self.grid.n_angles;
        let j1 = (j + 1) % n;
        let (u00, u01) = (u[i * n + j], u[i * n + j1]);
        let (u10, u11) = (u[(i + 1) * n + j], u[(i + 1) * n + j1]);
        [
            (u10 - u00) * self.inv_dr[i],
            (u11 - u01) * self.inv_dr[i],
            (u01 - u00) * self.inv_arc[i],
            (u11 - u10) * self.inv_arc[i],
        ]
    }

    fn row(&self, u: &[f64], i: usize, with_gradient: bool) -> RowTerms {
        let n = self.grid.n_angles;
        let (mut lower, mut upper) = if with_gradient {
            (vec![0.0; n], vec![0.0; n])
        } else {
            (Vec::new(), Vec::new())
        };
        let mut energy = 0.0;
        let w = 0.25 * self.cell_mass[i];
        for j in 0..n {
            let d = self.cell_diffs(u, i, j);
            let mut phi = 0.0;
            let mut gd = [0.0; 4];
            for (ra, ta) in [(0usize, 2usize), (0, 3), (1, 2), (1, 3)] {
                let (f, fa, fb) = self.norm.phi(self.p, d[ra], d[ta]);
                phi += f;
                gd[ra] += fa;
                gd[ta] += fb;
            }
            energy += w * phi;
            if with_gradient {
                let j1 = (j + 1) % n;
                let (gr0, gr1) = (w * gd[0] * self.inv_dr[i], w * gd[1] * self.inv_dr[i]);
                let (ga0, ga1) = (w * gd[2] * self.inv_arc[i], w * gd[3] * self.inv_arc[i]);
                lower[j] -= gr0 + ga0;
                lower[j1] += ga0;
                lower[j1] -= gr1;
                upper[j] += gr0 - ga1;
                upper[j1] += gr1 + ga1;
            }
        }
        RowTerms { energy, lower, upper }
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let rows: Vec<f64> = (0..self.grid.cells_radial())
            .into_par_iter()
            .map(|i| self.row(u, i, false).energy)
            .collect();
        rows.iter().sum()
    }

    /// Energy and its gradient with respect to all nodal values.
    pub fn energy_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.grid.n_angles;
        let rows: Vec<RowTerms> = (0..self.grid.cells_radial())
            .into_par_iter()
            .map(|i| self.row(u, i, true))
            .collect();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut energy = 0.0;
        for (i, row) in rows.iter().enumerate() {
            energy += row.energy;
            for j in 0..n {
                grad[i * n + j] += row.lower[j];
                grad[(i + 1) * n + j] += row.upper[j];
            }
        }
        energy
    }

    /// Per-cell energy density `φ` (average of `g^p` over the four pairings).
    pub fn cell_density(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let d = self.cell_diffs(u, i, j);
        [(0usize, 2usize), (0, 3), (1, 2), (1, 3)]
            .iter()
            .map(|&(a, b)| self.norm.phi(self.p, d[a], d[b]).0)
            .sum::<f64>()
            * 0.25
    }

    pub(crate) fn inv_dr(&self, i: usize) -> f64 {
        self.inv_dr[i]
    }

    pub(crate) fn inv_arc(&self, i: usize) -> f64 {
        self.inv_arc[i]
    }
}

/// `g_u` at the center of cell `(i, j)` from the averaged cell differences.
pub fn grad_norm(field: &ScalarField, kind: GradNormKind, cell: (usize, usize)) -> Result<f64> {
    let g = field.grid();
    let (i, j) = cell;
    if i >= g.cells_radial() || j >= g.angles() {
        return Err(Error::domain(format!("cell ({i}, {j}) outside the grid")));
    }
    let j1 = (j + 1) % g.angles();
    let u = |a, b| field.at(a, b);
    let dr = (g.radii[i + 1] - g.radii[i]).recip();
    let arc = (g.cell_radius(i) * g.dtheta()).recip();
    let ur = 0.5 * ((u(i + 1, j) - u(i, j)) + (u(i + 1, j1) - u(i, j1))) * dr;
    let ut = 0.5 * ((u(i, j1) - u(i, j)) + (u(i + 1, j1) - u(i + 1, j))) * arc;
    Ok(CellNorm::from(kind).value(ur, ut))
}

/// `∫ g_u^p dμ` by the cell quadrature of [`EnergyFunctional`].
pub fn p_energy(field: &ScalarField, p: f64, kind: GradNormKind, profile: &MeasureProfile) -> Result<f64> {
    Ok(EnergyFunctional::new(field.grid(), p, kind.into(), profile)?.energy(field.values()))
}

/// Grid node `(ring, angle)`.
pub type Node = (usize, usize);

/// Shortest ℓ¹-Finsler path lengths from `source` to every node, plus the
/// distance to the origin hub (last entry).
pub fn finsler_distances_from(grid: &PolarGrid, source: Node) -> Result<Vec<f64>> {
    let (mr, n) = (grid.rings(), grid.angles());
    if source.0 >= mr || source.1 >= n {
        return Err(Error::domain(format!("node {source:?} is not on the grid")));
    }
    let hub = grid.nodes();
    let dth = grid.dtheta();
    let r = grid.radii();
    let mut dist = vec![f64::INFINITY; hub + 1];
    let mut heap = BinaryHeap::new();
    let s = grid.index(source.0, source.1);
    dist[s] = 0.0;
    heap.push(Reverse((OrderedFloat(0.0), s)));
    let relax = |heap: &mut BinaryHeap<_>, dist: &mut Vec<f64>, k: usize, d: f64| {
        if d < dist[k] {
            dist[k] = d;
            heap.push(Reverse((OrderedFloat(d), k)));
        }
    };
    while let Some(Reverse((OrderedFloat(d), k))) = heap.pop() {
        if d > dist[k] {
            continue;
        }
        if k == hub {
            // Through the origin every inner node is one radial segment away.
            for j in 0..n {
                relax(&mut heap, &mut dist, grid.index(0, j), d + r[0]);
            }
            continue;
        }
        let (i, j) = grid.coords(k);
        let (jp, jm) = ((j + 1) % n, (j + n - 1) % n);
        relax(&mut heap, &mut dist, grid.index(i, jp), d + r[i] * dth);
        relax(&mut heap, &mut dist, grid.index(i, jm), d + r[i] * dth);
        if i == 0 {
            relax(&mut heap, &mut dist, hub, d + r[0]);
        }
        for i2 in [i.wrapping_sub(1), i + 1] {
            if i2 >= mr {
                continue;
            }
            let dr = (r[i2] - r[i]).abs();
            let mid = 0.5 * (r[i2] + r[i]);
            relax(&mut heap, &mut dist, grid.index(i2, j), d + dr);
            relax(&mut heap, &mut dist, grid.index(i2, jp), d + dr + mid * dth);
            relax(&mut heap, &mut dist, grid.index(i2, jm), d + dr + mid * dth);
        }
    }
    Ok(dist)
}

/// Grid upper approximant of the ℓ¹-Finsler distance between two nodes.
pub fn finsler_distance(grid: &PolarGrid, x: Node, y: Node) -> Result<f64> {
    if y.0 >= grid.rings() || y.1 >= grid.angles() {
        return Err(Error::domain(format!("node {y:?} is not on the grid")));
    }
    let d = finsler_distances_from(grid, x)?[grid.index(y.0, y.1)];
    if !d.is_finite() {
        return Err(Error::domain(format!("nodes {x:?} and {y:?} are not connected")));
    }
    Ok(d)
}

/// Euclidean distance between two nodes.
pub fn euclidean_distance(grid: &PolarGrid, x: Node, y: Node) -> f64 {
    let (a, b) = (grid.position(x.0, x.1), grid.position(y.0, y.1));
    (a.0 - b.0).hypot(a.1 - b.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightModel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat() -> MeasureProfile {
        MeasureProfile::new(WeightModel::power(0.0).unwrap()).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = PolarGrid::new(0.1, 1.0, 16, 12).unwrap();
        assert_eq!(g.rings(), 17);
        assert_eq!(g.nodes(), 17 * 12);
        assert_eq!(g.outer_radius(), 1.0);
        assert_relative_eq!(g.radii()[8], 0.1f64.sqrt(), max_relative = 1e-14);
        assert_eq!(g.index(3, 12), g.index(3, 0));
        assert!(PolarGrid::new(0.1, 1.0, 7, 12).is_err());
        assert!(PolarGrid::new(0.1, 1.0, 8, 7).is_err());
        assert!(PolarGrid::new(0.0, 1.0, 8, 8).is_err());
        assert!(PolarGrid::new(1.0, 0.5, 8, 8).is_err());
    }

    #[test]
    fn gradient_norm_examples() {
        let g = PolarGrid::new(0.1, 1.0, 32, 32).unwrap();
        let u = ScalarField::from_fn(g.clone(), |r, _| r).unwrap();
        for cell in [(0, 0), (10, 5), (31, 31)] {
            assert_relative_eq!(grad_norm(&u, GradNormKind::FinslerMax, cell).unwrap(), 1.0, max_relative = 1e-12);
        }
        let u = ScalarField::from_fn(g.clone(), |r, _| 1.0 / r).unwrap();
        for i in [0, 7, 31] {
            let rc = g.cell_radius(i);
            assert_relative_eq!(grad_norm(&u, GradNormKind::FinslerMax, (i, 3)).unwrap(), rc.powi(-2), max_relative = 1e-12);
        }
        let u = ScalarField::from_fn(g.clone(), |_, t| t).unwrap();
        for i in [0, 9, 31] {
            let rc = g.cell_radius(i);
            assert_relative_eq!(grad_norm(&u, GradNormKind::FinslerMax, (i, 4)).unwrap(), 1.0 / rc, max_relative = 1e-12);
        }
    }

    #[test]
    fn energy_examples() {
        let prof = flat();
        let g = PolarGrid::new(0.5, 1.0, 128, 128).unwrap();
        let c = ScalarField::from_fn(g.clone(), |_, _| 3.0).unwrap();
        assert_eq!(p_energy(&c, 2.0, GradNormKind::Euclidean, &prof).unwrap(), 0.0);
        let u = ScalarField::from_fn(g, |r, _| r).unwrap();
        let e = p_energy(&u, 2.0, GradNormKind::Euclidean, &prof).unwrap();
        assert_relative_eq!(e, 0.75 * PI, max_relative = 1e-12);

        let g = PolarGrid::new(0.1, 1.0, 128, 64).unwrap();
        let u = ScalarField::from_fn(g, |r, _| -r.ln() / 10f64.ln()).unwrap();
        let e = p_energy(&u, 2.0, GradNormKind::Euclidean, &prof).unwrap();
        assert_relative_eq!(e, 2.0 * PI / 10f64.ln(), max_relative = 1e-3);
    }

    #[test]
    fn energy_refinement_order() {
        // Exact energy of u = 1/r on [0.5, 1], p = 2, flat weight: 2π ∫ r^-3 = π (4 - 1).
        let prof = flat();
        let exact = 3.0 * PI;
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&m| {
                let g = PolarGrid::new(0.5, 1.0, m, m).unwrap();
                let u = ScalarField::from_fn(g, |r, t| 1.0 / r + 0.1 * t.cos() * r).unwrap();
                let e = p_energy(&u, 2.0, GradNormKind::Euclidean, &prof).unwrap();
                let exact = exact + exact_cross_terms();
                (e - exact).abs()
            })
            .collect();
        assert!(errs[0] / errs[1] >= 1.8 && errs[1] / errs[2] >= 1.8, "{errs:?}");
    }

    /// Energy of `1/r + 0.1 r cos θ` minus that of `1/r` on [0.5, 1].
    fn exact_cross_terms() -> f64 {
        // |∇u|^2 = (−r^-2 + 0.1 cos θ)^2 + (0.1 sin θ)^2.
        // θ-integral kills the cross term; remainder 0.01 · 2π · ∫ r dr.
        0.01 * 2.0 * PI * (1.0 - 0.25) / 2.0
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let prof = flat();
        let g = PolarGrid::new(0.2, 1.0, 8, 8).unwrap();
        let u = ScalarField::from_fn(g.clone(), |r, t| r * r + (2.0 * t).sin() * r + 0.3 * t.cos()).unwrap();
        for norm in [CellNorm::Euclidean, CellNorm::SmoothMax(8.0), CellNorm::Max] {
            let f = EnergyFunctional::new(&g, 1.7, norm, &prof).unwrap();
            let mut grad = vec![0.0; g.nodes()];
            f.energy_and_gradient(u.values(), &mut grad);
            for k in [0, 5, 17, 40, 71] {
                let h = 1e-6;
                let mut up = u.values().to_vec();
                up[k] += h;
                let mut dn = u.values().to_vec();
                dn[k] -= h;
                let fd = (f.energy(&up) - f.energy(&dn)) / (2.0 * h);
                assert_relative_eq!(grad[k], fd, max_relative = 1e-5, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn distance_examples() {
        let g = PolarGrid::new(0.01, 1.0, 64, 64).unwrap();
        let ring = |r: f64| g.ring_of(r).unwrap();
        let d = finsler_distance(&g, (ring(1.0), 0), (ring(1.0), 16)).unwrap();
        assert_relative_eq!(d, PI / 2.0, max_relative = 1e-12);
        assert!(d >= 2f64.sqrt() && d <= 2.0);
        let i = 40;
        let d = finsler_distance(&g, (i, 0), (i, 1)).unwrap();
        assert_relative_eq!(d, g.radii()[i] * g.dtheta(), max_relative = 1e-12);
        let d = finsler_distance(&g, (10, 3), (50, 3)).unwrap();
        assert_relative_eq!(d, g.radii()[50] - g.radii()[10], max_relative = 1e-12);
        assert!(finsler_distance(&g, (0, 0), (65, 0)).is_err());
    }

    #[test]
    fn distance_sandwich_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let g = PolarGrid::new(0.01, 1.0, 48, 48).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x = (rng.random_range(0..g.rings()), rng.random_range(0..g.angles()));
            let y = (rng.random_range(0..g.rings()), rng.random_range(0..g.angles()));
            let d = finsler_distance(&g, x, y).unwrap();
            let e = euclidean_distance(&g, x, y);
            assert!(e <= d + 1e-12 && d <= 2f64.sqrt() * e * 1.05 + 1e-12, "{x:?} {y:?} {d} {e}");
        }
    }

    proptest! {
        #[test]
        fn norm_sandwich(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let e = CellNorm::Euclidean.value(a, b);
            let m = CellNorm::Max.value(a, b);
            prop_assert!(m <= e * (1.0 + 1e-15));
            prop_assert!(e <= 2f64.sqrt() * m * (1.0 + 1e-15));
            let s = CellNorm::SmoothMax(16.0).value(a, b);
            prop_assert!(s >= m * (1.0 - 1e-15) && s <= m * 2f64.powf(1.0 / 16.0) * (1.0 + 1e-15));
        }

        #[test]
        fn cellwise_norm_sandwich(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
            let g = PolarGrid::new(0.1, 1.0, 8, 8).unwrap();
            let u = ScalarField::from_fn(g.clone(), |r, t| c0 * r + c1 * (t + 0.3).sin() + c2 * r * (2.0 * t).cos()).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    let e = grad_norm(&u, GradNormKind::Euclidean, (i, j)).unwrap();
                    let m = grad_norm(&u, GradNormKind::FinslerMax, (i, j)).unwrap();
                    prop_assert!(m <= e * (1.0 + 1e-14) && e <= 2f64.sqrt() * m * (1.0 + 1e-14));
                }
            }
        }
    }
}
