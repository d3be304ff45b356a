//! Preconditioned hyperbolic-system scheme for `∇·(K∇φ) = 0`.
//!
//! The unknowns are the potential `φ` and the gradient variables `(u, v)`
//! with `α_s (u, v) = −K∇φ` at steady state. Each pseudo-time step
//! advances `(u, v)` with upwind-split fluxes and a point-implicit source
//! (one 2×2 solve per node), then advances `φ` using the new `(u, v)`.

use serde::Serialize;

use crate::cases::{CaseSpec, TensorField};
use crate::error::{Error, Result};
use crate::mesh::{FieldState, GridSpec};
use crate::tensor::DiffusionTensor;

/// Which gradient-variable level feeds the potential update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum HyperScheme {
    /// Gradient variables first; their new values drive the `φ` update.
    #[default]
    Refined,
    /// Fully explicit: the `φ` update sees the previous-level `(u, v)`.
    Unrefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub alpha_s: f64,
    pub dt: f64,
    /// Steady-state tolerance on `max|φⁿ⁺¹ − φⁿ| / Δt`.
    pub tol: f64,
    pub max_steps: u64,
    /// Residual sampling interval for the convergence history.
    pub report_every: u64,
    pub scheme: HyperScheme,
}

impl SolverConfig {
    pub fn new(alpha_s: f64, dt: f64) -> Self {
        Self {
            alpha_s,
            dt,
            tol: 1e-8,
            max_steps: 1_000_000,
            report_every: 1000,
            scheme: HyperScheme::Refined,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_scheme(mut self, scheme: HyperScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha_s.is_finite() && self.alpha_s > 0.0) {
            return bad(format!("alpha_s must be positive, got {}", self.alpha_s));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1".into());
        }
        // flux Jacobians have unit wave speeds
        let h = grid.hx().min(grid.hy());
        if self.dt > h {
            return bad(format!("dt = {} violates the CFL bound dt <= {h}", self.dt));
        }
        Ok(())
    }
}

/// Point-implicit source solve at one node.
///
/// The gradient-variable update solves `B (u, v)ⁿ⁺¹ = r` with
/// `B = [[1 + βy, −βc], [−βc, 1 + βx]]`; `m11, m12, m22` are the entries of `B⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceSolve {
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_c: f64,
    pub det_b: f64,
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl SourceSolve {
    pub fn new(tensor: &DiffusionTensor, alpha_s: f64, dt: f64) -> Result<Self> {
        let scale = alpha_s * dt / tensor.delta();
        let beta_x = tensor.kx() * scale;
        let beta_y = tensor.ky() * scale;
        let beta_c = tensor.kc() * scale;
        let det_b = (1.0 + beta_x) * (1.0 + beta_y) - beta_c * beta_c;
        let magnitude = (1.0 + beta_x.abs()) * (1.0 + beta_y.abs()) + beta_c * beta_c;
        if !det_b.is_finite() || det_b.abs() <= 64.0 * f64::EPSILON * magnitude {
            return Err(Error::SingularSource { alpha_s });
        }
        Ok(Self {
            beta_x,
            beta_y,
            beta_c,
            det_b,
            m11: (1.0 + beta_x) / det_b,
            m12: beta_c / det_b,
            m22: (1.0 + beta_y) / det_b,
        })
    }

    /// `B⁻¹ (ru, rv)`.
    #[inline]
    pub fn solve(&self, ru: f64, rv: f64) -> (f64, f64) {
        (self.m11 * ru + self.m12 * rv, self.m12 * ru + self.m22 * rv)
    }

    /// `B (u, v)`.
    #[inline]
    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        (
            (1.0 + self.beta_y) * u - self.beta_c * v,
            -self.beta_c * u + (1.0 + self.beta_x) * v,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceHistory {
    /// `(step, residual)` samples.
    pub samples: Vec<(u64, f64)>,
    pub final_residual: f64,
    pub converged: bool,
    pub steps: u64,
}

impl ConvergenceHistory {
    pub(crate) fn new() -> Self {
        Self {
            samples: Vec::new(),
            final_residual: f64::INFINITY,
            converged: false,
            steps: 0,
        }
    }

    pub(crate) fn record(&mut self, step: u64, residual: f64, every: u64) {
        if every > 0 && step.is_multiple_of(every) {
            self.samples.push((step, residual));
        }
        self.final_residual = residual;
        self.steps = step;
    }

    pub(crate) fn finish(&mut self, converged: bool) {
        self.converged = converged;
        if self.samples.last().map(|s| s.0) != Some(self.steps) && self.steps > 0 {
            self.samples.push((self.steps, self.final_residual));
        }
    }
}

enum SourceCache {
    Uniform(SourceSolve),
    PerNode(Vec<SourceSolve>),
}

/// Boundary node with the interior node its unpinned values are copied from.
#[derive(Debug, Clone, Copy)]
struct BoundaryNode {
    node: usize,
    source: usize,
    pinned: Option<f64>,
    wall: bool,
}

/// Stepper bound to one case and configuration, with reusable scratch
/// buffers and the per-node source inverses computed once.
pub struct HyperSolver<'a> {
    case: &'a CaseSpec,
    cfg: SolverConfig,
    sources: SourceCache,
    /// `true` where stage 2 updates `φ`.
    free: Vec<bool>,
    boundary: Vec<BoundaryNode>,
    next: FieldState,
}

impl<'a> HyperSolver<'a> {
    pub fn new(case: &'a CaseSpec, cfg: SolverConfig) -> Result<Self> {
        cfg.validate(&case.grid)?;
        let g = case.grid;
        let sources = match &case.tensors {
            TensorField::Uniform(t) => {
                SourceCache::Uniform(SourceSolve::new(t, cfg.alpha_s, cfg.dt)?)
            }
            TensorField::PerNode(ts) => SourceCache::PerNode(
                ts.iter()
                    .map(|t| SourceSolve::new(t, cfg.alpha_s, cfg.dt))
                    .collect::<Result<_>>()?,
            ),
        };
        let free = g
            .coordinates()
            .map(|(i, j)| !g.is_boundary(i, j) && case.roles[g.index(i, j)].pinned_phi().is_none())
            .collect();
        let boundary = boundary_nodes(&g)
            .map(|(i, j)| {
                let node = g.index(i, j);
                let (ii, jj) = g.interior_neighbor(i, j);
                BoundaryNode {
                    node,
                    source: g.index(ii, jj),
                    pinned: case.roles[node].pinned_phi(),
                    wall: case.roles[node].is_wall(),
                }
            })
            .collect();
        Ok(Self {
            case,
            cfg,
            sources,
            free,
            boundary,
            next: FieldState::zeros(g),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Initial state: pinned potentials applied, everything else zero.
    pub fn initial_state(&self) -> FieldState {
        let mut state = FieldState::zeros(self.case.grid);
        for (k, role) in self.case.roles.iter().enumerate() {
            if let Some(value) = role.pinned_phi() {
                state.phi[k] = value;
            }
        }
        state
    }

    /// Advances `state` by one pseudo-time step and returns the residual
    /// `max|φⁿ⁺¹ − φⁿ| / Δt`.
    pub fn step(&mut self, state: &mut FieldState) -> Result<f64> {
        state.check_grid(&self.case.grid)?;
        let g = self.case.grid;
        let cx = self.cfg.dt / (2.0 * g.hx());
        let cy = self.cfg.dt / (2.0 * g.hy());
        let next = &mut self.next;

        let mut finite = match &self.sources {
            SourceCache::Uniform(s) => gradient_stage(&g, cx, cy, state, next, |_| s),
            SourceCache::PerNode(all) => gradient_stage(&g, cx, cy, state, next, |k| &all[k]),
        };

        // boundary (u, v) stay at level n until the closure below
        for b in &self.boundary {
            next.u[b.node] = state.u[b.node];
            next.v[b.node] = state.v[b.node];
        }

        let (gu, gv) = match self.cfg.scheme {
            HyperScheme::Refined => (&next.u, &next.v),
            HyperScheme::Unrefined => (&state.u, &state.v),
        };
        let (phi, row) = (&state.phi, g.nodes_x());
        let center = 1.0 - 2.0 * cx - 2.0 * cy;
        for j in 1..g.ny() {
            for k in j * row + 1..(j + 1) * row - 1 {
                let p = center * phi[k]
                    + cx * (phi[k - 1] + phi[k + 1])
                    + cy * (phi[k - row] + phi[k + row])
                    + cx * (gu[k - 1] - gu[k + 1])
                    + cy * (gv[k - row] - gv[k + row]);
                next.phi[k] = if self.free[k] { p } else { phi[k] };
            }
        }

        // zeroth-order extrapolation of everything not pinned
        for b in &self.boundary {
            next.phi[b.node] = b.pinned.unwrap_or(next.phi[b.source]);
            next.u[b.node] = next.u[b.source];
            next.v[b.node] = if b.wall { 0.0 } else { next.v[b.source] };
        }

        let (change, finite_phi) = max_abs_difference(&next.phi, phi);
        finite &= finite_phi;
        let step = state.step + 1;
        if !finite {
            return Err(Error::Divergence { step });
        }
        std::mem::swap(&mut state.phi, &mut next.phi);
        std::mem::swap(&mut state.u, &mut next.u);
        std::mem::swap(&mut state.v, &mut next.v);
        state.step = step;
        Ok(change / self.cfg.dt)
    }

    /// Marches `state` until the residual drops to `tol` or `max_steps` is hit.
    pub fn run(&mut self, state: &mut FieldState) -> Result<ConvergenceHistory> {
        let mut history = ConvergenceHistory::new();
        let every = self.cfg.report_every;
        let mut converged = false;
        for _ in 0..self.cfg.max_steps {
            let residual = self.step(state)?;
            history.record(state.step, residual, every);
            if residual <= self.cfg.tol {
                converged = true;
                break;
            }
        }
        history.finish(converged);
        Ok(history)
    }
}

/// Stage 1: upwind fluxes plus the point-implicit source for `(u, v)` at
/// every node off the boundary. Returns `false` on a non-finite result.
fn gradient_stage<'s>(
    g: &GridSpec,
    cx: f64,
    cy: f64,
    state: &FieldState,
    next: &mut FieldState,
    source: impl Fn(usize) -> &'s SourceSolve,
) -> bool {
    let (phi, u, v) = (&state.phi, &state.u, &state.v);
    let row = g.nodes_x();
    let mut sum = [0.0; 2];
    for j in 1..g.ny() {
        for k in j * row + 1..(j + 1) * row - 1 {
            let ru = (1.0 - 2.0 * cx) * u[k]
                + cx * (u[k - 1] + u[k + 1])
                + cx * (phi[k - 1] - phi[k + 1]);
            let rv = (1.0 - 2.0 * cy) * v[k]
                + cy * (v[k - row] + v[k + row])
                + cy * (phi[k - row] - phi[k + row]);
            let (un, vn) = source(k).solve(ru, rv);
            sum[k & 1] += un + vn;
            next.u[k] = un;
            next.v[k] = vn;
        }
    }
    // NaN and infinities propagate into the sums
    (sum[0] + sum[1]).is_finite()
}

/// `max|a − b|` and whether every entry of `a` is finite.
fn max_abs_difference(a: &[f64], b: &[f64]) -> (f64, bool) {
    const LANES: usize = 8;
    let mut worst = [0.0f64; LANES];
    let mut sum = [0.0f64; LANES];
    let chunks = a.chunks_exact(LANES).zip(b.chunks_exact(LANES));
    for (ca, cb) in chunks {
        for l in 0..LANES {
            let d = (ca[l] - cb[l]).abs();
            worst[l] = if d > worst[l] { d } else { worst[l] };
            sum[l] += ca[l];
        }
    }
    let tail = a.len() - a.len() % LANES;
    let mut best = worst.iter().fold(0.0f64, |m, &w| m.max(w));
    let mut total: f64 = sum.iter().sum();
    for k in tail..a.len() {
        best = best.max((a[k] - b[k]).abs());
        total += a[k];
    }
    (best, total.is_finite())
}

fn boundary_nodes(g: &GridSpec) -> impl Iterator<Item = (usize, usize)> + '_ {
    let (nx, ny) = (g.nx(), g.ny());
    (0..=nx)
        .flat_map(move |i| [(i, 0), (i, ny)])
        .chain((1..ny).flat_map(move |j| [(0, j), (nx, j)]))
}

/// One pseudo-time step of the hyperbolic scheme.
pub fn hyper_step(state: &FieldState, case: &CaseSpec, cfg: &SolverConfig) -> Result<FieldState> {
    let mut solver = HyperSolver::new(case, *cfg)?;
    let mut next = state.clone();
    solver.step(&mut next)?;
    Ok(next)
}

/// Marches from the default initial state to steady state.
pub fn solve_steady(
    case: &CaseSpec,
    cfg: &SolverConfig,
) -> Result<(FieldState, ConvergenceHistory)> {
    let mut solver = HyperSolver::new(case, *cfg)?;
    let mut state = solver.initial_state();
    let history = solver.run(&mut state)?;
    Ok((state, history))
}

/// Flux `Γ = α_s (u, v)` and gradient-variable speed `|(u, v)|` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub gamma_x: Vec<f64>,
    pub gamma_y: Vec<f64>,
    pub speed: Vec<f64>,
}

pub fn flux_field(state: &FieldState, alpha_s: f64) -> FluxField {
    FluxField {
        gamma_x: state.u.iter().map(|u| alpha_s * u).collect(),
        gamma_y: state.v.iter().map(|v| alpha_s * v).collect(),
        speed: state.speed(),
    }
}

/// `max |α_s (u, v) + K ∇ₕφ|` over nodes whose neighbors are all off the
/// boundary, with central differences for `∇ₕ`.
pub fn flux_relation_residual(state: &FieldState, case: &CaseSpec, alpha_s: f64) -> f64 {
    let g = case.grid;
    let mut worst = 0.0f64;
    for j in 2..g.ny().saturating_sub(1) {
        for i in 2..g.nx().saturating_sub(1) {
            let k = g.index(i, j);
            let gx = (state.phi_at(i + 1, j) - state.phi_at(i - 1, j)) / (2.0 * g.hx());
            let gy = (state.phi_at(i, j + 1) - state.phi_at(i, j - 1)) / (2.0 * g.hy());
            let (fx, fy) = case.tensor_at(k).apply(gx, gy);
            let rx = alpha_s * state.u[k] + fx;
            let ry = alpha_s * state.v[k] + fy;
            worst = worst.max(rx.hypot(ry));
        }
    }
    worst
}
