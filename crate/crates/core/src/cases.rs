//! The four benchmark problems on the unit square.
//!
//! * A: potential drop from the left wall (`phi = 1`) to the right wall
//!   (`phi = 0`), impermeable top and bottom walls, field lines at π/4.
//! * B: outer boundary at `phi = 0`, central square of side 0.2 held at
//!   `phi = 1`, field lines at π/4.
//! * C: as B with field lines at π/6.
//! * D: as B with the cusped field of `A_z = r((x − 0.5)² − (y − 0.5)²)`.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{GridSpec, NodeRole};
use crate::tensor::DiffusionTensor;

/// Half-width of the central fixed-potential square in cases B, C and D.
pub const INNER_HALF_WIDTH: f64 = 0.1;

/// Field magnitudes below `FIELD_NULL_TOL · ratio` fall back to isotropy.
pub const FIELD_NULL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseName {
    A,
    B,
    C,
    D,
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseName::A => "A",
            CaseName::B => "B",
            CaseName::C => "C",
            CaseName::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for CaseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(CaseName::A),
            "B" | "b" => Ok(CaseName::B),
            "C" | "c" => Ok(CaseName::C),
            "D" | "d" => Ok(CaseName::D),
            other => Err(Error::Config(format!("unknown case '{other}'"))),
        }
    }
}

impl CaseName {
    /// Default field-line angle; `None` for the cusped geometry.
    pub fn default_angle(&self) -> Option<f64> {
        match self {
            CaseName::A | CaseName::B => Some(FRAC_PI_4),
            CaseName::C => Some(FRAC_PI_6),
            CaseName::D => None,
        }
    }
}

/// Diffusion tensor, either shared by every node or given per node.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorField {
    Uniform(DiffusionTensor),
    PerNode(Vec<DiffusionTensor>),
}

impl TensorField {
    #[inline]
    pub fn at(&self, k: usize) -> &DiffusionTensor {
        match self {
            TensorField::Uniform(t) => t,
            TensorField::PerNode(ts) => &ts[k],
        }
    }
}

/// Grid, tensor field, node roles and expected bounds for one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub name: String,
    pub grid: GridSpec,
    pub tensors: TensorField,
    pub roles: Vec<NodeRole>,
    pub bounds: (f64, f64),
}

impl CaseSpec {
    /// Builds case `name` with its default field geometry, or with field
    /// lines at `theta` when given (ignored for the cusped case).
    pub fn build(name: CaseName, grid: GridSpec, ratio: f64, theta: Option<f64>) -> Result<Self> {
        let angle = theta.or(name.default_angle());
        match (name, angle) {
            (CaseName::D, _) => case_d(grid, ratio),
            (CaseName::A, Some(theta)) => case_a_at(grid, theta, ratio),
            (name, Some(theta)) => {
                let mut case = electrode_case(grid, DiffusionTensor::from_angle(theta, ratio)?)?;
                case.name = name.to_string();
                Ok(case)
            }
            (_, None) => unreachable!("only the cusped case has no default angle"),
        }
    }

    pub fn tensor_at(&self, k: usize) -> &DiffusionTensor {
        self.tensors.at(k)
    }

    /// Checks role coverage, tensor validity and that pinned values lie in bounds.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if self.roles.len() != g.len() {
            return Err(Error::ShapeMismatch {
                got: self.roles.len(),
                expected: g.len(),
            });
        }
        if let TensorField::PerNode(ts) = &self.tensors {
            if ts.len() != g.len() {
                return Err(Error::ShapeMismatch {
                    got: ts.len(),
                    expected: g.len(),
                });
            }
            for t in ts {
                DiffusionTensor::new(t.kx(), t.ky(), t.kc())?;
            }
        }
        let (lower, upper) = self.bounds;
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::Config(format!("empty bounds [{lower}, {upper}]")));
        }
        for (i, j) in g.coordinates() {
            let role = self.roles[g.index(i, j)];
            let boundary = g.is_boundary(i, j);
            match role {
                NodeRole::Interior if boundary => {
                    return Err(Error::Config(format!(
                        "boundary node ({i}, {j}) is interior"
                    )))
                }
                NodeRole::ImpermeableWall if !boundary => {
                    return Err(Error::Config(format!(
                        "wall node ({i}, {j}) is not on the boundary"
                    )))
                }
                _ => {}
            }
            if let Some(value) = role.pinned_phi() {
                if !(lower..=upper).contains(&value) {
                    return Err(Error::Config(format!(
                        "pinned value {value} at ({i}, {j}) outside bounds"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn count_roles(&self, pred: impl Fn(&NodeRole) -> bool) -> usize {
        self.roles.iter().filter(|r| pred(r)).count()
    }
}

/// Every boundary node pinned to `value(x, y)`; bounds are the extremes of
/// the boundary data. Used for property checks on small grids.
pub fn dirichlet_case(
    grid: GridSpec,
    tensors: TensorField,
    value: impl Fn(f64, f64) -> f64,
) -> Result<CaseSpec> {
    let mut bounds = (f64::INFINITY, f64::NEG_INFINITY);
    let roles = grid
        .coordinates()
        .map(|(i, j)| {
            if grid.is_boundary(i, j) {
                let p = value(grid.x(i), grid.y(j));
                bounds = (bounds.0.min(p), bounds.1.max(p));
                NodeRole::DirichletPhi(p)
            } else {
                NodeRole::Interior
            }
        })
        .collect();
    let case = CaseSpec {
        name: "dirichlet".into(),
        grid,
        tensors,
        roles,
        bounds,
    };
    case.validate()?;
    Ok(case)
}

/// Case A with the default π/4 field.
pub fn case_a(grid: GridSpec, ratio: f64) -> Result<CaseSpec> {
    case_a_at(grid, FRAC_PI_4, ratio)
}

/// Case A with field lines at `theta`.
pub fn case_a_at(grid: GridSpec, theta: f64, ratio: f64) -> Result<CaseSpec> {
    let tensor = DiffusionTensor::from_angle(theta, ratio)?;
    let roles = grid
        .coordinates()
        .map(|(i, j)| {
            if i == 0 {
                NodeRole::DirichletPhi(1.0)
            } else if i == grid.nx() {
                NodeRole::DirichletPhi(0.0)
            } else if j == 0 || j == grid.ny() {
                NodeRole::ImpermeableWall
            } else {
                NodeRole::Interior
            }
        })
        .collect();
    let case = CaseSpec {
        name: CaseName::A.to_string(),
        grid,
        tensors: TensorField::Uniform(tensor),
        roles,
        bounds: (0.0, 1.0),
    };
    case.validate()?;
    Ok(case)
}

pub fn case_b(grid: GridSpec, ratio: f64) -> Result<CaseSpec> {
    CaseSpec::build(CaseName::B, grid, ratio, None)
}

pub fn case_c(grid: GridSpec, ratio: f64) -> Result<CaseSpec> {
    CaseSpec::build(CaseName::C, grid, ratio, None)
}

/// Cusped field geometry; boundary and electrode layout as in case B.
pub fn case_d(grid: GridSpec, ratio: f64) -> Result<CaseSpec> {
    let mut case = electrode_case(grid, DiffusionTensor::identity())?;
    let tensors = grid
        .coordinates()
        .map(|(i, j)| {
            let (bx, by) = cusp_field(grid.x(i), grid.y(j), ratio);
            if bx.hypot(by) < FIELD_NULL_TOL * ratio {
                Ok(DiffusionTensor::identity())
            } else {
                DiffusionTensor::from_direction(bx, by, ratio)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    case.tensors = TensorField::PerNode(tensors);
    case.name = CaseName::D.to_string();
    case.validate()?;
    Ok(case)
}

/// In-plane field `B = ∇ × (A_z ẑ)` for `A_z = ratio·((x − 0.5)² − (y − 0.5)²)`.
pub fn cusp_field(x: f64, y: f64, ratio: f64) -> (f64, f64) {
    (-2.0 * ratio * (y - 0.5), -2.0 * ratio * (x - 0.5))
}

fn in_inner_square(x: f64, y: f64) -> bool {
    const EPS: f64 = 1e-12;
    (x - 0.5).abs().max((y - 0.5).abs()) <= INNER_HALF_WIDTH + EPS
}

fn electrode_case(grid: GridSpec, tensor: DiffusionTensor) -> Result<CaseSpec> {
    let roles: Vec<NodeRole> = grid
        .coordinates()
        .map(|(i, j)| {
            if grid.is_boundary(i, j) {
                NodeRole::DirichletPhi(0.0)
            } else if in_inner_square(grid.x(i), grid.y(j)) {
                NodeRole::FixedRegion(1.0)
            } else {
                NodeRole::Interior
            }
        })
        .collect();
    if !roles.iter().any(|r| matches!(r, NodeRole::FixedRegion(_))) {
        return Err(Error::Config(format!(
            "grid {}x{} has no node inside the central square",
            grid.nx(),
            grid.ny()
        )));
    }
    let case = CaseSpec {
        name: CaseName::B.to_string(),
        grid,
        tensors: TensorField::Uniform(tensor),
        roles,
        bounds: (0.0, 1.0),
    };
    case.validate()?;
    Ok(case)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fixed(r: &NodeRole) -> bool {
        matches!(r, NodeRole::FixedRegion(_))
    }

    #[test]
    fn case_a_layout() {
        let g = GridSpec::new(12, 7).unwrap();
        let c = case_a(g, 1e4).unwrap();
        let t = c.tensor_at(0);
        assert!((t.kx() - 0.50005).abs() < 1e-12);
        assert!((t.kc() - 0.49995).abs() < 1e-12);
        assert_eq!(
            c.count_roles(|r| matches!(r, NodeRole::DirichletPhi(_))),
            2 * (7 + 1)
        );
        assert_eq!(c.count_roles(NodeRole::is_wall), 2 * (12 - 1));
        assert_eq!(c.roles[g.index(0, 0)], NodeRole::DirichletPhi(1.0));
        assert_eq!(c.roles[g.index(12, 7)], NodeRole::DirichletPhi(0.0));
        assert_eq!(c.bounds, (0.0, 1.0));
    }

    #[test]
    fn case_a_isotropic() {
        let c = case_a_at(GridSpec::square(4).unwrap(), 0.0, 1.0).unwrap();
        assert_eq!(*c.tensor_at(3), DiffusionTensor::identity());
    }

    #[test]
    fn inner_block_is_21_by_21_on_100_grid() {
        let g = GridSpec::square(100).unwrap();
        let b = case_b(g, 1e4).unwrap();
        assert_eq!(b.count_roles(fixed), 21 * 21);
        for (i, j) in g.coordinates() {
            let inside = (i as i64 - 50).abs() <= 10 && (j as i64 - 50).abs() <= 10;
            assert_eq!(fixed(&b.roles[g.index(i, j)]), inside);
        }
    }

    #[test]
    fn case_b_and_c_differ_only_in_angle() {
        let g = GridSpec::square(50).unwrap();
        let b = case_b(g, 1e4).unwrap();
        let c = case_c(g, 1e4).unwrap();
        assert_eq!(b.roles, c.roles);
        assert_eq!(b.bounds, c.bounds);
        let t = c.tensor_at(0);
        assert_relative_eq!(t.kx(), 0.750025, max_relative = 1e-14);
        assert_relative_eq!(t.ky(), 0.250075, max_relative = 1e-14);
        assert!((t.kc() - 0.4329694).abs() < 1e-7);
        for r in &b.roles {
            if let Some(v) = r.pinned_phi() {
                assert!(v == 0.0 || v == 1.0);
            }
        }
    }

    #[test]
    fn coarse_grid_without_inner_node_is_rejected() {
        // nodes at 0, 1/3, 2/3, 1: none within 0.1 of the center
        assert!(matches!(
            case_b(GridSpec::square(3).unwrap(), 10.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn cusp_field_values() {
        assert_eq!(cusp_field(0.5, 0.5, 1e4), (0.0, 0.0));
        let (bx, by) = cusp_field(1.0, 0.5, 1e4);
        assert_eq!((bx + 0.0, by), (0.0, -1e4));
        let (bx, by) = cusp_field(0.5, 1.0, 1e4);
        assert_eq!((bx, by + 0.0), (-1e4, 0.0));
    }

    #[test]
    fn case_d_tensors() {
        let g = GridSpec::square(100).unwrap();
        let d = case_d(g, 1e4).unwrap();
        let b = case_b(g, 1e4).unwrap();
        assert_eq!(d.roles, b.roles);
        assert_eq!(*d.tensor_at(g.index(50, 50)), DiffusionTensor::identity());

        let t = d.tensor_at(g.index(100, 50));
        assert!((t.kx() - 1e-4).abs() < 1e-15);
        assert!((t.ky() - 1.0).abs() < 1e-15);
        assert!(t.kc().abs() < 1e-15);

        // swapping x and y maps the tensor field onto itself with kx <-> ky
        for (i, j) in g.coordinates() {
            let a = d.tensor_at(g.index(i, j));
            let s = d.tensor_at(g.index(j, i));
            assert!((a.kx() - s.ky()).abs() < 1e-14);
            assert!((a.ky() - s.kx()).abs() < 1e-14);
            assert!((a.kc() - s.kc()).abs() < 1e-14);
        }
    }

    #[test]
    fn every_case_validates() {
        let g = GridSpec::square(20).unwrap();
        for name in [CaseName::A, CaseName::B, CaseName::C, CaseName::D] {
            let c = CaseSpec::build(name, g, 1e4, None).unwrap();
            c.validate().unwrap();
            assert_eq!(c.name, name.to_string());
        }
    }
}
