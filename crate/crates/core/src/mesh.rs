//! Node-centered structured grid on the unit square, field storage and the
//! post-solve diagnostics (midline profile, DMP report, CSV dumps).

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid with `nx × ny` cells and `(nx + 1) × (ny + 1)` nodes,
/// boundary nodes included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid { nx, ny });
        }
        Ok(Self { nx, ny })
    }

    /// Square grid with `n` cells per direction.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        1.0 / self.ny as f64
    }

    pub fn nodes_x(&self) -> usize {
        self.nx + 1
    }

    pub fn nodes_y(&self) -> usize {
        self.ny + 1
    }

    pub fn len(&self) -> usize {
        self.nodes_x() * self.nodes_y()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index; rows of constant `j` are contiguous.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        j * (self.nx + 1) + i
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Nearest node strictly inside the domain, used for boundary extrapolation.
    pub fn interior_neighbor(&self, i: usize, j: usize) -> (usize, usize) {
        (i.clamp(1, self.nx - 1), j.clamp(1, self.ny - 1))
    }

    /// Node row nearest to `y = 0.5`.
    pub fn mid_row(&self) -> usize {
        (self.ny as f64 / 2.0).round() as usize
    }

    /// Node coordinates in storage order.
    pub fn coordinates(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.ny).flat_map(move |j| (0..=self.nx).map(move |i| (i, j)))
    }
}

/// What a node does during a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NodeRole {
    Interior,
    /// Prescribed potential on the domain boundary.
    DirichletPhi(f64),
    /// Impermeable wall: normal gradient variable `v` pinned to zero.
    ImpermeableWall,
    /// Prescribed potential on an internal electrode region.
    FixedRegion(f64),
}

impl NodeRole {
    /// Prescribed potential, if any.
    pub fn pinned_phi(&self) -> Option<f64> {
        match *self {
            NodeRole::DirichletPhi(value) | NodeRole::FixedRegion(value) => Some(value),
            _ => None,
        }
    }

    pub fn is_wall(&self) -> bool {
        matches!(self, NodeRole::ImpermeableWall)
    }
}

/// Node-centered scalar fields at one pseudo-time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    grid: GridSpec,
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl FieldState {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self {
            grid,
            phi: vec![0.0; n],
            u: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// State with `phi`, `u`, `v` sampled from closures of `(x, y)`.
    pub fn from_fn(
        grid: GridSpec,
        phi: impl Fn(f64, f64) -> f64,
        u: impl Fn(f64, f64) -> f64,
        v: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut state = Self::zeros(grid);
        for (i, j) in grid.coordinates() {
            let k = grid.index(i, j);
            let (x, y) = (grid.x(i), grid.y(j));
            state.phi[k] = phi(x, y);
            state.u[k] = u(x, y);
            state.v[k] = v(x, y);
        }
        state
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.grid != *grid || self.phi.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                got: self.phi.len(),
                expected: grid.len(),
            });
        }
        Ok(())
    }

    pub fn phi_at(&self, i: usize, j: usize) -> f64 {
        self.phi[self.grid.index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.phi
            .iter()
            .chain(&self.u)
            .chain(&self.v)
            .all(|x| x.is_finite())
    }

    /// `(x, phi)` along the node row nearest `y = 0.5`, ordered by `x`.
    pub fn profile_along_midline(&self) -> Vec<(f64, f64)> {
        let j = self.grid.mid_row();
        (0..=self.grid.nx())
            .map(|i| (self.grid.x(i), self.phi_at(i, j)))
            .collect()
    }

    /// `|(u, v)|` per node.
    pub fn speed(&self) -> Vec<f64> {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(u, v)| u.hypot(*v))
            .collect()
    }

    pub fn dmp_report(&self, lower: f64, upper: f64, tol: f64) -> DmpReport {
        DmpReport::new(&self.phi, lower, upper, tol)
    }

    /// CSV with header `x,y,phi,u,v`, rows `j`-major.
    pub fn write_field_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,phi,u,v")?;
        for (i, j) in self.grid.coordinates() {
            let k = self.grid.index(i, j);
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.grid.x(i),
                self.grid.y(j),
                self.phi[k],
                self.u[k],
                self.v[k]
            )?;
        }
        Ok(())
    }

    /// CSV with header `x,phi` along the midline.
    pub fn write_profile_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,phi")?;
        for (x, phi) in self.profile_along_midline() {
            writeln!(out, "{x:.16e},{phi:.16e}")?;
        }
        Ok(())
    }

    /// CSV with header `x,y,speed`, rows `j`-major.
    pub fn write_speed_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,speed")?;
        for ((i, j), s) in self.grid.coordinates().zip(self.speed()) {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                self.grid.x(i),
                self.grid.y(j),
                s
            )?;
        }
        Ok(())
    }
}

/// Extrema and bound violations of a potential field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DmpReport {
    pub min_phi: f64,
    pub max_phi: f64,
    pub undershoot: f64,
    pub overshoot: f64,
    /// Fraction of nodes with `phi < lower − tol`.
    pub under_fraction: f64,
    /// Fraction of nodes with `phi > upper + tol`.
    pub over_fraction: f64,
    pub satisfied: bool,
}

impl DmpReport {
    pub fn new(phi: &[f64], lower: f64, upper: f64, tol: f64) -> Self {
        debug_assert!(lower < upper && tol >= 0.0);
        let (min_phi, max_phi) = phi
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                (lo.min(p), hi.max(p))
            });
        let n = phi.len().max(1) as f64;
        let below = phi.iter().filter(|&&p| p < lower - tol).count();
        let above = phi.iter().filter(|&&p| p > upper + tol).count();
        Self {
            min_phi,
            max_phi,
            undershoot: (lower - min_phi).max(0.0),
            overshoot: (max_phi - upper).max(0.0),
            under_fraction: below as f64 / n,
            over_fraction: above as f64 / n,
            satisfied: min_phi >= lower - tol && max_phi <= upper + tol,
        }
    }
}
