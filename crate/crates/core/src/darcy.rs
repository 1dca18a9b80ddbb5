//! Darcy-flow forward operator `-div(kappa grad p) = f` on a rectangle.
//!
//! Vertex-centred finite volumes with harmonic face averaging of `kappa`.
//! Boundary conditions:
//!
//! * `p = p_D` on the bottom edge `y = 0` (Dirichlet rows, eliminated symmetrically),
//! * `-kappa dp/dx = q_in` on the left edge `x = 0` (prescribed inflow),
//! * zero flux on the right and top edges.
//!
//! The source is layered in `y`; on a shared layer boundary the larger value wins.
//! Pressure is observed by bilinear interpolation at fixed physical points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::grid::{Grid2D, GridField};
use crate::linalg::{BandCholesky, SymBand};
use crate::model::{ForwardModel, Linearization};

/// Lower bound applied to the permeability under the identity parameterization.
pub const KAPPA_FLOOR: f64 = 1e-3;

/// Map from the unknown `u` to the permeability `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// `kappa = max(u, KAPPA_FLOOR)`; derivative 1 above the floor, 0 below.
    #[default]
    IdentityFloor,
    /// `kappa = exp(u)`.
    Exp,
}

impl Parameterization {
    pub fn kappa(self, u: f64) -> f64 {
        match self {
            Parameterization::IdentityFloor => u.max(KAPPA_FLOOR),
            Parameterization::Exp => u.exp(),
        }
    }

    /// Parameter value representing the permeability `kappa`.
    pub fn inverse(self, kappa: f64) -> f64 {
        match self {
            Parameterization::IdentityFloor => kappa,
            Parameterization::Exp => kappa.ln(),
        }
    }

    pub fn dkappa(self, u: f64) -> f64 {
        match self {
            Parameterization::IdentityFloor => {
                if u > KAPPA_FLOOR {
                    1.0
                } else {
                    0.0
                }
            }
            Parameterization::Exp => u.exp(),
        }
    }
}

/// Boundary data and source of the Darcy problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarcyBoundary {
    /// Pressure on the bottom edge.
    pub dirichlet_value: f64,
    /// Prescribed inflow `-kappa dp/dx` on the left edge.
    pub left_inflow: f64,
    /// `(y_start, value)` layers sorted by `y_start`; `f(y)` is the value of
    /// the last layer with `y_start <= y`, zero below the first.
    pub source_layers: Vec<(f64, f64)>,
}

impl Default for DarcyBoundary {
    fn default() -> Self {
        Self {
            dirichlet_value: 100.0,
            left_inflow: 500.0,
            source_layers: vec![(4.0, 137.0), (5.0, 274.0)],
        }
    }
}

impl DarcyBoundary {
    /// Pure Dirichlet/no-flux problem with no source.
    pub fn homogeneous(dirichlet_value: f64) -> Self {
        Self {
            dirichlet_value,
            left_inflow: 0.0,
            source_layers: Vec::new(),
        }
    }

    pub fn source(&self, y: f64) -> f64 {
        self.source_layers
            .iter()
            .take_while(|(start, _)| *start <= y)
            .last()
            .map_or(0.0, |(_, v)| *v)
    }
}

#[derive(Debug, Clone, Copy)]
struct Face {
    a: usize,
    b: usize,
    /// face length / node distance
    geom: f64,
}

fn harmonic(ka: f64, kb: f64) -> f64 {
    2.0 * ka * kb / (ka + kb)
}

/// `d harmonic(ka, kb) / d ka`.
fn harmonic_da(ka: f64, kb: f64) -> f64 {
    let s = ka + kb;
    2.0 * kb * kb / (s * s)
}

/// Bilinear point evaluation of grid fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationOperator {
    grid: Grid2D,
    locations: Vec<[f64; 2]>,
    stencils: Vec<Vec<(usize, f64)>>,
}

impl ObservationOperator {
    pub fn new(grid: Grid2D, locations: Vec<[f64; 2]>) -> Result<Self> {
        let stencils = locations
            .iter()
            .map(|&p| bilinear_stencil(&grid, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            locations,
            stencils,
        })
    }

    /// `per_axis x per_axis` points at the centres of a uniform partition of
    /// the domain, i.e. `x_k = (2k + 1) / (2 per_axis) * lx`. For `per_axis = 8`
    /// these are grid nodes whenever `nx - 1` is a multiple of 16.
    pub fn lattice_locations(grid: &Grid2D, per_axis: usize) -> Vec<[f64; 2]> {
        let c = |k: usize, l: f64| (2 * k + 1) as f64 / (2 * per_axis) as f64 * l;
        (0..per_axis)
            .flat_map(|j| (0..per_axis).map(move |i| (i, j)))
            .map(|(i, j)| [c(i, grid.lx), c(j, grid.ly)])
            .collect()
    }

    pub fn lattice(grid: Grid2D, per_axis: usize) -> Result<Self> {
        Self::new(grid, Self::lattice_locations(&grid, per_axis))
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn locations(&self) -> &[[f64; 2]] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn stencil(&self, k: usize) -> &[(usize, f64)] {
        &self.stencils[k]
    }

    pub fn apply(&self, field: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.stencils
                .iter()
                .map(|st| st.iter().map(|&(n, w)| w * field[n]).sum()),
        )
    }

    pub fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (st, wk) in self.stencils.iter().zip(w) {
            for &(n, c) in st {
                out[n] += c * wk;
            }
        }
        out
    }
}

fn bilinear_stencil(grid: &Grid2D, p: [f64; 2]) -> Result<Vec<(usize, f64)>> {
    if !grid.contains(p) {
        return Err(validation(format!("observation point {p:?} lies outside the domain")));
    }
    let locate = |x: f64, h: f64, n: usize| {
        let s = x / h;
        let i = (s.floor() as usize).min(n - 2);
        (i, (s - i as f64).clamp(0.0, 1.0))
    };
    let (i, tx) = locate(p[0], grid.hx(), grid.nx);
    let (j, ty) = locate(p[1], grid.hy(), grid.ny);
    let mut st = Vec::with_capacity(4);
    for (di, wx) in [(0, 1.0 - tx), (1, tx)] {
        for (dj, wy) in [(0, 1.0 - ty), (1, ty)] {
            let w = wx * wy;
            if w != 0.0 {
                st.push((grid.index(i + di, j + dj), w));
            }
        }
    }
    Ok(st)
}

/// Assembled linear system `A(kappa) p = b` for one permeability field.
#[derive(Debug, Clone)]
pub struct DarcySystem {
    grid: Grid2D,
    kappa: GridField,
    matrix: SymBand,
    rhs: Vec<f64>,
}

impl DarcySystem {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn kappa(&self) -> &GridField {
        &self.kappa
    }

    pub fn matrix(&self) -> &SymBand {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Factors the system and returns the pressure.
    pub fn solve_pressure(&self) -> Result<GridField> {
        let (p, _) = self.solve_factored()?;
        GridField::new(self.grid, p)
    }

    fn solve_factored(&self) -> Result<(Vec<f64>, BandCholesky)> {
        let factor = self.matrix.cholesky()?;
        let p = factor.solve(&self.rhs);
        let b_max = self.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let r_max = self
            .matrix
            .mul_vec(&p)
            .iter()
            .zip(&self.rhs)
            .fold(0.0f64, |m, (ap, b)| m.max((ap - b).abs()));
        let p_max = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = self.matrix.norm_inf() * p_max + b_max;
        if !(r_max <= 1e-10 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::Conditioning {
                detail: format!(
                    "pressure residual {r_max:e} vs |A||p| + |b| = {scale:e}; pivot ratio {:e}",
                    factor.pivot_ratio()
                ),
            });
        }
        Ok((p, factor))
    }
}

/// The Darcy forward map `u -> observed pressure`.
#[derive(Debug, Clone)]
pub struct DarcyModel {
    grid: Grid2D,
    boundary: DarcyBoundary,
    parameterization: Parameterization,
    observations: ObservationOperator,
    faces: Vec<Face>,
    dirichlet: Vec<bool>,
    /// integrated source plus boundary inflow per node
    load: Vec<f64>,
}

impl DarcyModel {
    pub fn new(
        grid: Grid2D,
        boundary: DarcyBoundary,
        parameterization: Parameterization,
        observations: ObservationOperator,
    ) -> Result<Self> {
        grid.validate()?;
        if observations.grid() != &grid {
            return Err(validation("observation operator built on a different grid"));
        }
        let (hx, hy) = (grid.hx(), grid.hy());
        let half = |k: usize, n: usize, h: f64| if k == 0 || k == n - 1 { 0.5 * h } else { h };
        let mut faces = Vec::with_capacity(2 * grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let a = grid.index(i, j);
                if i + 1 < grid.nx {
                    faces.push(Face {
                        a,
                        b: grid.index(i + 1, j),
                        geom: half(j, grid.ny, hy) / hx,
                    });
                }
                if j + 1 < grid.ny {
                    faces.push(Face {
                        a,
                        b: grid.index(i, j + 1),
                        geom: half(i, grid.nx, hx) / hy,
                    });
                }
            }
        }
        let mut dirichlet = vec![false; grid.len()];
        let mut load = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.index(i, j);
                let (wx, wy) = (half(i, grid.nx, hx), half(j, grid.ny, hy));
                let [_, y] = grid.point_unchecked(i, j);
                load[k] = boundary.source(y) * wx * wy;
                if i == 0 {
                    load[k] += boundary.left_inflow * wy;
                }
                dirichlet[k] = j == 0;
            }
        }
        Ok(Self {
            grid,
            boundary,
            parameterization,
            observations,
            faces,
            dirichlet,
            load,
        })
    }

    /// The default setup on `grid`: layered source, inflow on the left,
    /// fixed pressure at the bottom, 8x8 observation lattice.
    pub fn standard(grid: Grid2D, parameterization: Parameterization) -> Result<Self> {
        let obs = ObservationOperator::lattice(grid, 8)?;
        Self::new(grid, DarcyBoundary::default(), parameterization, obs)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn boundary(&self) -> &DarcyBoundary {
        &self.boundary
    }

    pub fn parameterization(&self) -> Parameterization {
        self.parameterization
    }

    pub fn observations(&self) -> &ObservationOperator {
        &self.observations
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet[node]
    }

    pub fn kappa_of(&self, u: &[f64]) -> Result<GridField> {
        GridField::new(self.grid, u.iter().map(|&v| self.parameterization.kappa(v)).collect())
    }

    /// Assembles `A(kappa) p = b`. Dirichlet rows are identities; their
    /// couplings are moved to the right-hand side so `A` stays symmetric.
    pub fn assemble(&self, kappa: &GridField) -> Result<DarcySystem> {
        if kappa.grid() != &self.grid {
            return Err(validation("permeability lives on a different grid"));
        }
        if let Some(k) = kappa.values().iter().position(|v| !(*v > 0.0)) {
            return Err(validation(format!("permeability must be positive (node {k})")));
        }
        let kv = kappa.values();
        let n = self.grid.len();
        let mut a = SymBand::zeros(n, self.grid.nx);
        let mut rhs = self.load.clone();
        let pd = self.boundary.dirichlet_value;
        for f in &self.faces {
            let t = harmonic(kv[f.a], kv[f.b]) * f.geom;
            match (self.dirichlet[f.a], self.dirichlet[f.b]) {
                (false, false) => {
                    a.add(f.a, f.a, t);
                    a.add(f.b, f.b, t);
                    a.add(f.a, f.b, -t);
                }
                (false, true) => {
                    a.add(f.a, f.a, t);
                    rhs[f.a] += t * pd;
                }
                (true, false) => {
                    a.add(f.b, f.b, t);
                    rhs[f.b] += t * pd;
                }
                (true, true) => {}
            }
        }
        for k in 0..n {
            if self.dirichlet[k] {
                a.set(k, k, 1.0);
                rhs[k] = pd;
            }
        }
        Ok(DarcySystem {
            grid: self.grid,
            kappa: kappa.clone(),
            matrix: a,
            rhs,
        })
    }

    pub fn pressure(&self, u: &[f64]) -> Result<GridField> {
        self.assemble(&self.kappa_of(u)?)?.solve_pressure()
    }

    /// `(dR/dkappa)^T lam`, restricted to non-Dirichlet residual rows.
    fn residual_kappa_adjoint(&self, kappa: &[f64], p: &[f64], lam: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; kappa.len()];
        for f in &self.faces {
            let la = if self.dirichlet[f.a] { 0.0 } else { lam[f.a] };
            let lb = if self.dirichlet[f.b] { 0.0 } else { lam[f.b] };
            let q = (p[f.a] - p[f.b]) * (la - lb) * f.geom;
            out[f.a] += harmonic_da(kappa[f.a], kappa[f.b]) * q;
            out[f.b] += harmonic_da(kappa[f.b], kappa[f.a]) * q;
        }
        out
    }

    /// `(dR/dkappa) dk`, zero on Dirichlet rows.
    fn residual_kappa_apply(&self, kappa: &[f64], p: &[f64], dk: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; kappa.len()];
        for f in &self.faces {
            let dt = (harmonic_da(kappa[f.a], kappa[f.b]) * dk[f.a] + harmonic_da(kappa[f.b], kappa[f.a]) * dk[f.b])
                * f.geom;
            let q = dt * (p[f.a] - p[f.b]);
            if !self.dirichlet[f.a] {
                out[f.a] += q;
            }
            if !self.dirichlet[f.b] {
                out[f.b] -= q;
            }
        }
        out
    }
}

/// Cached state at one parameter: permeability, pressure and the factor.
#[derive(Debug, Clone)]
pub struct DarcyLinearization<'a> {
    model: &'a DarcyModel,
    kappa: Vec<f64>,
    dkappa: Vec<f64>,
    pressure: Vec<f64>,
    factor: BandCholesky,
    value: DVector<f64>,
}

impl DarcyLinearization<'_> {
    pub fn pressure(&self) -> &[f64] {
        &self.pressure
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }
}

impl Linearization for DarcyLinearization<'_> {
    fn value(&self) -> &DVector<f64> {
        &self.value
    }

    /// `dp = -A^{-1} (dR/dkappa) (dkappa/du) v`, observed.
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let dk: Vec<f64> = v.iter().zip(&self.dkappa).map(|(a, b)| a * b).collect();
        let mut rhs = self.model.residual_kappa_apply(&self.kappa, &self.pressure, &dk);
        self.factor.solve_in_place(&mut rhs);
        -self.model.observations.apply(&rhs)
    }

    fn apply_adjoint(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut lam = self.model.observations.apply_transpose(w.as_slice());
        self.factor.solve_in_place(&mut lam);
        let g = self.model.residual_kappa_adjoint(&self.kappa, &self.pressure, &lam);
        DVector::from_iterator(g.len(), g.iter().zip(&self.dkappa).map(|(gi, di)| -gi * di))
    }

    fn jacobian_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        let n = self.model.grid.len();
        let b = rows.len();
        let mut out = DMatrix::zeros(b, n);
        let obs = &self.model.observations;
        let mut block = vec![0.0; n * b];
        for (r, &k) in rows.iter().enumerate() {
            for &(node, w) in obs.stencil(k) {
                block[node * b + r] += w;
            }
        }
        self.factor.solve_many_in_place(&mut block, b);
        let mut lam = vec![0.0; n];
        for r in 0..b {
            for (i, l) in lam.iter_mut().enumerate() {
                *l = block[i * b + r];
            }
            let g = self.model.residual_kappa_adjoint(&self.kappa, &self.pressure, &lam);
            for (c, (gi, di)) in g.iter().zip(&self.dkappa).enumerate() {
                out[(r, c)] = -gi * di;
            }
        }
        out
    }
}

impl DarcyModel {
    fn linearize_at(&self, u: &DVector<f64>) -> Result<DarcyLinearization<'_>> {
        if u.len() != self.grid.len() {
            return Err(validation(format!(
                "parameter has length {}, grid has {} nodes",
                u.len(),
                self.grid.len()
            )));
        }
        let kappa = self.kappa_of(u.as_slice())?;
        let system = self.assemble(&kappa)?;
        let (pressure, factor) = system.solve_factored()?;
        let value = self.observations.apply(&pressure);
        Ok(DarcyLinearization {
            model: self,
            dkappa: u.iter().map(|&v| self.parameterization.dkappa(v)).collect(),
            kappa: kappa.into_values(),
            pressure,
            factor,
            value,
        })
    }
}

impl ForwardModel for DarcyModel {
    type Linearization<'a> = DarcyLinearization<'a>;

    fn param_dim(&self) -> usize {
        self.grid.len()
    }

    fn obs_dim(&self) -> usize {
        self.observations.len()
    }

    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.pressure(u.as_slice())?;
        Ok(self.observations.apply(p.values()))
    }

    fn linearize(&self, u: &DVector<f64>) -> Result<Self::Linearization<'_>> {
        self.linearize_at(u)
    }
}
