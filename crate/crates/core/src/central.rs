//! Explicit 9-point central-difference scheme for `φ_t = ∇·(K∇φ)`.
//!
//! Cross derivatives use the four-corner bracket, so the stencil has
//! negative weights whenever `kc ≠ 0`. Walls use ghost nodes that enforce
//! zero conormal flux `n·K∇φ = 0`; mirroring φ instead would only cancel the
//! isotropic part of the flux.

use crate::cases::CaseSpec;
use crate::error::{Error, Result};
use crate::hyper::ConvergenceHistory;
use crate::mesh::{FieldState, GridSpec};

/// Largest explicit step `1 / (2kx/Δx² + 2ky/Δy²)` over all nodes.
pub fn central_dt_limit(case: &CaseSpec) -> f64 {
    let g = case.grid;
    let (ix, iy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    (0..g.len())
        .map(|k| {
            let t = case.tensor_at(k);
            1.0 / (2.0 * t.kx() * ix + 2.0 * t.ky() * iy)
        })
        .fold(f64::INFINITY, f64::min)
}

fn check_dt(case: &CaseSpec, dt: f64) -> Result<()> {
    let limit = central_dt_limit(case);
    if !(dt.is_finite() && dt > 0.0 && dt <= limit) {
        return Err(Error::Config(format!(
            "dt = {dt} outside the explicit stability range (0, {limit}]"
        )));
    }
    Ok(())
}

/// Mirror index for ghost nodes one step outside `0..=n`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    if i < 0 {
        (-i) as usize
    } else if i as usize > n {
        2 * n - i as usize
    } else {
        i as usize
    }
}

/// `2h ∂/∂s` along a boundary line of `n + 1` values read through `f`:
/// central inside, one-sided at the ends.
#[inline]
fn twice_h_derivative(f: impl Fn(usize) -> f64, m: usize, n: usize) -> f64 {
    if m == 0 {
        2.0 * (f(1) - f(0))
    } else if m == n {
        2.0 * (f(n) - f(n - 1))
    } else {
        f(m + 1) - f(m - 1)
    }
}

/// φ at `(i, j)`, including ghost nodes one step outside the grid.
///
/// A ghost across a wall satisfies the discrete conormal condition at the
/// wall node, e.g. `ky (φ(m,1) − φ(m,−1)) / 2Δy + kc ∂xφ(m,0) = 0`.
/// Ghosts outside two sides at once fall back to mirroring.
fn value(phi: &[f64], case: &CaseSpec, i: isize, j: isize) -> f64 {
    let g = case.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let x_out = i < 0 || i as usize > nx;
    let y_out = j < 0 || j as usize > ny;
    match (x_out, y_out) {
        (false, false) => phi[g.index(i as usize, j as usize)],
        (true, true) => phi[g.index(reflect(i, nx), reflect(j, ny))],
        (false, true) => {
            let m = i as usize;
            let (row, sign) = if j < 0 { (0, 1.0) } else { (ny, -1.0) };
            let t = case.tensor_at(g.index(m, row));
            let d = twice_h_derivative(|q| phi[g.index(q, row)], m, nx);
            phi[g.index(m, reflect(j, ny))] + sign * t.kc() / t.ky() * g.hy() / g.hx() * d
        }
        (true, false) => {
            let m = j as usize;
            let (col, sign) = if i < 0 { (0, 1.0) } else { (nx, -1.0) };
            let t = case.tensor_at(g.index(col, m));
            let d = twice_h_derivative(|q| phi[g.index(col, q)], m, ny);
            phi[g.index(reflect(i, nx), m)] + sign * t.kc() / t.kx() * g.hx() / g.hy() * d
        }
    }
}

/// Stepper with a reusable output buffer.
pub struct CentralSolver<'a> {
    case: &'a CaseSpec,
    dt: f64,
    /// Nodes updated each step: interior and wall nodes, in grid order.
    free: Vec<(usize, usize)>,
    next: Vec<f64>,
}

impl<'a> CentralSolver<'a> {
    pub fn new(case: &'a CaseSpec, dt: f64) -> Result<Self> {
        check_dt(case, dt)?;
        let g = case.grid;
        let free = g
            .coordinates()
            .filter(|&(i, j)| case.roles[g.index(i, j)].pinned_phi().is_none())
            .collect();
        Ok(Self {
            case,
            dt,
            free,
            next: vec![0.0; g.len()],
        })
    }

    pub fn initial_state(&self) -> FieldState {
        let mut state = FieldState::zeros(self.case.grid);
        for (k, role) in self.case.roles.iter().enumerate() {
            if let Some(value) = role.pinned_phi() {
                state.phi[k] = value;
            }
        }
        state
    }

    /// One explicit step; returns `max|φⁿ⁺¹ − φⁿ| / Δt`.
    pub fn step(&mut self, state: &mut FieldState) -> Result<f64> {
        state.check_grid(&self.case.grid)?;
        let g: GridSpec = self.case.grid;
        let case = self.case;
        let (ix, iy, ixy) = (
            self.dt / (g.hx() * g.hx()),
            self.dt / (g.hy() * g.hy()),
            self.dt / (4.0 * g.hx() * g.hy()),
        );
        let phi = &state.phi;
        self.next.copy_from_slice(phi);
        let row = g.nodes_x() as isize;
        let mut worst = 0.0f64;
        for &(i, j) in &self.free {
            let k = g.index(i, j);
            let t = self.case.tensor_at(k);
            let (ii, jj) = (i as isize, j as isize);
            let inside = !g.is_boundary(i, j);
            let at = |di: isize, dj: isize| {
                if inside {
                    phi[(k as isize + dj * row + di) as usize]
                } else {
                    value(phi, case, ii + di, jj + dj)
                }
            };
            let c = phi[k];
            let p = c
                + t.kx() * ix * (at(1, 0) - 2.0 * c + at(-1, 0))
                + t.ky() * iy * (at(0, 1) - 2.0 * c + at(0, -1))
                + 2.0 * t.kc() * ixy * (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1));
            if !p.is_finite() {
                return Err(Error::Divergence {
                    step: state.step + 1,
                });
            }
            worst = worst.max((p - c).abs());
            self.next[k] = p;
        }
        std::mem::swap(&mut state.phi, &mut self.next);
        state.step += 1;
        Ok(worst / self.dt)
    }

    pub fn run(
        &mut self,
        state: &mut FieldState,
        tol: f64,
        max_steps: u64,
        every: u64,
    ) -> Result<ConvergenceHistory> {
        let mut history = ConvergenceHistory::new();
        let mut converged = false;
        for _ in 0..max_steps {
            let residual = self.step(state)?;
            history.record(state.step, residual, every);
            if residual <= tol {
                converged = true;
                break;
            }
        }
        history.finish(converged);
        Ok(history)
    }
}

/// One step of the central scheme.
pub fn central_step(state: &FieldState, case: &CaseSpec, dt: f64) -> Result<FieldState> {
    let mut solver = CentralSolver::new(case, dt)?;
    let mut next = state.clone();
    solver.step(&mut next)?;
    Ok(next)
}

/// Iterates from `φ = 0` (pinned values applied) until the residual drops
/// to `tol` or `max_steps` is reached.
pub fn central_solve_steady(
    case: &CaseSpec,
    dt: f64,
    tol: f64,
    max_steps: u64,
) -> Result<(FieldState, ConvergenceHistory)> {
    if !(tol.is_finite() && tol > 0.0) || max_steps < 1 {
        return Err(Error::Config(format!(
            "need tol > 0 and max_steps >= 1, got {tol} and {max_steps}"
        )));
    }
    let mut solver = CentralSolver::new(case, dt)?;
    let mut state = solver.initial_state();
    let history = solver.run(&mut state, tol, max_steps, 1000)?;
    Ok((state, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{case_a, case_a_at, dirichlet_case, TensorField};
    use crate::tensor::DiffusionTensor;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn uniform(kx: f64, ky: f64, kc: f64) -> TensorField {
        TensorField::Uniform(DiffusionTensor::new(kx, ky, kc).unwrap())
    }

    #[test]
    fn constant_is_fixed() {
        let g = GridSpec::new(5, 7).unwrap();
        let case = dirichlet_case(g, uniform(1.0, 0.3, 0.0), |_, _| 0.7).unwrap();
        let s = FieldState::from_fn(g, |_, _| 0.7, |_, _| 0.0, |_, _| 0.0);
        assert_eq!(central_step(&s, &case, 1e-3).unwrap().phi, s.phi);
    }

    #[test]
    fn parabola_increment() {
        let g = GridSpec::new(8, 6).unwrap();
        let case = dirichlet_case(g, uniform(1.0, 0.5, 0.0), |x, _| x * x).unwrap();
        let s = FieldState::from_fn(g, |x, _| x * x, |_, _| 0.0, |_, _| 0.0);
        let dt = 1e-3;
        let n = central_step(&s, &case, dt).unwrap();
        let k = g.index(3, 2);
        assert_relative_eq!(n.phi[k] - s.phi[k], 2.0 * dt, max_relative = 1e-10);
    }

    #[test]
    fn bilinear_increment() {
        // kx = ky = 1, kc = 0.4 is the closest SPD tensor to "pure cross"
        let g = GridSpec::square(6).unwrap();
        let case = dirichlet_case(g, uniform(1.0, 1.0, 0.4), |x, y| x * y).unwrap();
        let s = FieldState::from_fn(g, |x, y| x * y, |_, _| 0.0, |_, _| 0.0);
        let dt = 1e-3;
        let n = central_step(&s, &case, dt).unwrap();
        for (i, j) in [(2, 2), (1, 4), (5, 5)] {
            let k = g.index(i, j);
            assert_relative_eq!(n.phi[k] - s.phi[k], 2.0 * 0.4 * dt, max_relative = 1e-10);
        }
    }

    #[test]
    fn stability_bound_is_enforced() {
        let g = GridSpec::square(10).unwrap();
        let case = case_a(g, 1e4).unwrap();
        let limit = central_dt_limit(&case);
        // kx = ky = 0.50005
        assert_relative_eq!(limit, 1.0 / (4.0 * 0.50005 * 100.0), max_relative = 1e-12);
        assert!(CentralSolver::new(&case, limit).is_ok());
        assert!(matches!(
            CentralSolver::new(&case, limit * 1.001),
            Err(Error::Config(_))
        ));
        assert!(central_solve_steady(&case, limit, 0.0, 10).is_err());
    }

    #[test]
    fn stencil_sums_to_one() {
        // unit impulse: the step spreads it with weights that add to one
        let g = GridSpec::new(9, 7).unwrap();
        let case = dirichlet_case(g, uniform(0.8, 0.3, 0.2), |_, _| 0.0).unwrap();
        let mut s = FieldState::zeros(g);
        s.phi[g.index(4, 3)] = 1.0;
        let n = central_step(&s, &case, 1e-3).unwrap();
        assert!((n.phi.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(n.phi.iter().any(|&p| p < 0.0));
    }

    #[test]
    fn isotropic_case_a_is_linear() {
        let g = GridSpec::square(12).unwrap();
        let case = case_a_at(g, 0.0, 1.0).unwrap();
        let dt = central_dt_limit(&case);
        let (s, h) = central_solve_steady(&case, dt, 1e-10, 1_000_000).unwrap();
        assert!(h.converged);
        for (i, j) in g.coordinates() {
            assert!((s.phi_at(i, j) - (1.0 - g.x(i))).abs() < 1e-6);
        }
        let r = s.dmp_report(0.0, 1.0, 0.0);
        assert!(r.satisfied);
    }

    #[test]
    fn walls_enforce_zero_conormal_flux() {
        let g = GridSpec::new(6, 4).unwrap();
        let case = case_a(g, 100.0).unwrap();
        let t = case.tensor_at(0);
        let dt = central_dt_limit(&case);
        let walls: Vec<usize> = (1..6)
            .flat_map(|i| [g.index(i, 0), g.index(i, 4)])
            .collect();
        // linear field with kc ∂xφ + ky ∂yφ = 0 is steady up to the walls
        let b = t.kc() / t.ky();
        let s = FieldState::from_fn(g, |x, y| 1.0 - x + b * y, |_, _| 0.0, |_, _| 0.0);
        let n = central_step(&s, &case, dt).unwrap();
        for &k in &walls {
            assert!((n.phi[k] - s.phi[k]).abs() < 1e-13);
        }
        // 1 − x has a nonzero conormal flux through the walls, so it is not steady
        let s = FieldState::from_fn(g, |x, _| 1.0 - x, |_, _| 0.0, |_, _| 0.0);
        let n = central_step(&s, &case, dt).unwrap();
        let k = g.index(2, 0);
        let expected = s.phi[k] - 2.0 * dt * t.kc() / g.hy();
        assert_relative_eq!(n.phi[k], expected, max_relative = 1e-12);
    }

    #[test]
    fn corner_ghost_mirrors() {
        let g = GridSpec::new(4, 4).unwrap();
        let case = case_a(g, 10.0).unwrap();
        let phi: Vec<f64> = (0..g.len()).map(|k| k as f64).collect();
        assert_eq!(value(&phi, &case, -1, -1), phi[g.index(1, 1)]);
        assert_eq!(value(&phi, &case, 5, 5), phi[g.index(3, 3)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn diagonal_tensors_keep_the_dmp(
            data in prop::collection::vec(-3.0..3.0f64, 24),
            kx in 0.1..2.0f64,
            ky in 0.1..2.0f64,
        ) {
            let g = GridSpec::square(6).unwrap();
            let value = |x: f64, y: f64| data[((7.0 * x + 3.0 * y) * 6.0).round() as usize % data.len()];
            let case = dirichlet_case(g, uniform(kx, ky, 0.0), value).unwrap();
            let dt = central_dt_limit(&case);
            let (s, _) = central_solve_steady(&case, dt, 1e-9, 200_000).unwrap();
            let (lo, hi) = case.bounds;
            let r = s.dmp_report(lo, hi, 1e-12);
            prop_assert!(r.satisfied, "{:?}", r);
        }
    }
}
