//! Threshold analysis for the discrete maximum principle.
//!
//! Sign convention: thresholds are negative numbers (`α− ≤ α+ < 0`), as in
//! the analysis of the minimal 3×3 mesh. [`DmpInterval::magnitudes`] gives
//! the same sets mapped through `α ↦ −α` for the positive-`α_s` solver
//! convention.

use serde::Serialize;

use crate::error::{finite, Error, Result};
use crate::hyper::SourceSolve;
use crate::tensor::DiffusionTensor;

/// Roots of `|B|(α) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdPair {
    pub alpha_minus: f64,
    pub alpha_plus: f64,
}

impl ThresholdPair {
    /// `(|α+|, |α−|)`, ascending.
    pub fn magnitudes(&self) -> (f64, f64) {
        (-self.alpha_plus, -self.alpha_minus)
    }
}

fn positive(value: f64, what: &'static str) -> Result<f64> {
    finite(value, what)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Config(format!(
            "{what} must be positive, got {value}"
        )))
    }
}

/// `α± = [−tr ± √((kx − ky)² + 4kc²)] / (2Δt)`.
///
/// `α+` comes from the root product `Δ / Δt²`, which keeps it accurate
/// when the two roots differ by orders of magnitude.
pub fn alpha_thresholds(tensor: &DiffusionTensor, dt: f64) -> Result<ThresholdPair> {
    positive(dt, "dt")?;
    let s = tensor.trace() + tensor.discriminant().sqrt();
    Ok(ThresholdPair {
        alpha_minus: -s / (2.0 * dt),
        alpha_plus: -2.0 * tensor.delta() / (dt * s),
    })
}

/// `|B| = (1 + βx)(1 + βy) − βc²` as a function of `α`, expanded as
/// `1 + tr·s + Δ·s²` with `s = αΔt/Δ`.
pub fn det_b(tensor: &DiffusionTensor, alpha: f64, dt: f64) -> f64 {
    let s = alpha * dt / tensor.delta();
    1.0 + s * (tensor.trace() + tensor.delta() * s)
}

/// Largest `Δt` for which the admissible set is non-empty at small `C`:
/// `(tr² − tr·√(tr² − 4Δ)) / 2`, evaluated without cancellation.
pub fn dt_bound(tensor: &DiffusionTensor) -> f64 {
    let tr = tensor.trace();
    2.0 * tr * tensor.delta() / (tr + tensor.discriminant().sqrt())
}

/// `f_C(α) = (4Δt² + C·tr·Δt)α² + (4tr·Δt + 2CΔ)α + 4Δ`.
pub fn f_c(tensor: &DiffusionTensor, dt: f64, c: f64, alpha: f64) -> f64 {
    let (a, b, cc) = f_c_coefficients(tensor, dt, c);
    (a * alpha + b) * alpha + cc
}

fn f_c_coefficients(tensor: &DiffusionTensor, dt: f64, c: f64) -> (f64, f64, f64) {
    let (tr, delta) = (tensor.trace(), tensor.delta());
    (
        4.0 * dt * dt + c * tr * dt,
        4.0 * tr * dt + 2.0 * c * delta,
        4.0 * delta,
    )
}

/// Quarter discriminant of `f_C`, `(2tr·Δt + CΔ)² − 4Δ(4Δt² + C·tr·Δt)`,
/// in the expanded form `4Δt²(tr² − 4Δ) + C²Δ²`.
pub fn f_c_discriminant(tensor: &DiffusionTensor, dt: f64, c: f64) -> f64 {
    let delta = tensor.delta();
    4.0 * dt * dt * tensor.discriminant() + c * c * delta * delta
}

/// Roots `(α̃−, α̃+)` of `f_C`, ascending.
pub fn ftilde_roots(tensor: &DiffusionTensor, dt: f64, c: f64) -> Result<(f64, f64)> {
    positive(dt, "dt")?;
    finite(c, "C")?;
    if c < 0.0 {
        return Err(Error::Config(format!("C must be non-negative, got {c}")));
    }
    if c == 0.0 {
        let t = alpha_thresholds(tensor, dt)?;
        return Ok((t.alpha_minus, t.alpha_plus));
    }
    let (a, b, cc) = f_c_coefficients(tensor, dt, c);
    let quarter = f_c_discriminant(tensor, dt, c);
    if quarter.is_nan() || quarter < 0.0 {
        return Err(Error::NoRealRoots {
            discriminant: quarter,
        });
    }
    // b > 0, so the sign-aware form never subtracts
    let q = -(b + 2.0 * quarter.sqrt()) / 2.0;
    let (r1, r2) = (q / a, cc / q);
    Ok((r1.min(r2), r1.max(r2)))
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    fn ordered(lo: f64, hi: f64) -> Option<Self> {
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn negated(&self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

/// `I_DMP(C) = [α̃−(C), α−] ∪ [α+, α̃+(C)]`, either part possibly empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DmpInterval {
    pub outer: Option<Interval>,
    pub inner: Option<Interval>,
}

impl DmpInterval {
    pub fn contains(&self, alpha: f64) -> bool {
        self.outer.is_some_and(|i| i.contains(alpha))
            || self.inner.is_some_and(|i| i.contains(alpha))
    }

    /// `(outer, inner)` mapped through `α ↦ −α`.
    pub fn magnitudes(&self) -> (Option<Interval>, Option<Interval>) {
        (
            self.outer.map(|i| i.negated()),
            self.inner.map(|i| i.negated()),
        )
    }
}

pub fn i_dmp(tensor: &DiffusionTensor, dt: f64, c: f64) -> Result<DmpInterval> {
    let t = alpha_thresholds(tensor, dt)?;
    let (lo, hi) = ftilde_roots(tensor, dt, c)?;
    Ok(DmpInterval {
        outer: Interval::ordered(lo, t.alpha_minus),
        inner: Interval::ordered(t.alpha_plus, hi),
    })
}

/// Whether `−|alpha_s|` lies in `I_DMP(Δt/h)`, endpoints included.
pub fn dmp_holds(alpha_s: f64, tensor: &DiffusionTensor, dt: f64, h: f64) -> Result<bool> {
    finite(alpha_s, "alpha_s")?;
    positive(h, "h")?;
    Ok(i_dmp(tensor, dt, dt / h)?.contains(-alpha_s.abs()))
}

/// One row of the `|α̃+(C)|` table.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub c: f64,
    /// `Δt / C`; infinite at `C = 0`.
    pub h: f64,
    pub alpha_tilde_plus: Result<f64>,
}

/// `|α̃+(C)|` for each `C`, failures kept per row.
pub fn analysis_rows(tensor: &DiffusionTensor, dt: f64, cs: &[f64]) -> Vec<AnalysisRow> {
    cs.iter()
        .map(|&c| AnalysisRow {
            c,
            h: dt / c,
            alpha_tilde_plus: ftilde_roots(tensor, dt, c).map(|(_, hi)| hi.abs()),
        })
        .collect()
}

/// One-step coefficients of the potential update in terms of `φⁿ` on the
/// 5×5 neighborhood, with `(u, v)ⁿ ≡ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StencilCoeffs {
    /// `rows[dj + 2][di + 2]`.
    rows: [[f64; 5]; 5],
}

pub const DIAGONAL_OFFSETS: [(i32, i32); 4] = [(1, 1), (-1, -1), (1, -1), (-1, 1)];

impl StencilCoeffs {
    /// Coefficient at offset `(di, dj)`; zero outside `[−2, 2]²`.
    pub fn get(&self, di: i32, dj: i32) -> f64 {
        if di.abs() > 2 || dj.abs() > 2 {
            return 0.0;
        }
        self.rows[(dj + 2) as usize][(di + 2) as usize]
    }

    fn set(&mut self, di: i32, dj: i32, value: f64) {
        self.rows[(dj + 2) as usize][(di + 2) as usize] = value;
    }

    /// `((di, dj), coefficient)` in row-major order from `dj = −2`.
    pub fn iter(&self) -> impl Iterator<Item = ((i32, i32), f64)> + '_ {
        (-2..=2).flat_map(move |dj| (-2..=2).map(move |di| ((di, dj), self.get(di, dj))))
    }

    pub fn sum(&self) -> f64 {
        self.iter().map(|(_, c)| c).sum()
    }

    pub fn min(&self) -> f64 {
        self.iter().map(|(_, c)| c).fold(f64::INFINITY, f64::min)
    }

    pub fn cross_magnitude(&self) -> f64 {
        DIAGONAL_OFFSETS
            .iter()
            .map(|&(di, dj)| self.get(di, dj).abs())
            .fold(0.0, f64::max)
    }
}

/// Shared layout of both stencils. `weight` multiplies every term that
/// passes through the source solve.
fn stencil(s: &SourceSolve, cx: f64, cy: f64, weight: f64) -> StencilCoeffs {
    let mut st = StencilCoeffs {
        rows: [[0.0; 5]; 5],
    };
    let xx = weight * s.m11 * cx * cx;
    let yy = weight * s.m22 * cy * cy;
    let diag = weight * 2.0 * s.m12 * cx * cy;
    st.set(0, 0, 1.0 - 2.0 * cx - 2.0 * cy - 2.0 * xx - 2.0 * yy);
    for d in [-1, 1] {
        st.set(d, 0, cx);
        st.set(0, d, cy);
        st.set(2 * d, 0, xx);
        st.set(0, 2 * d, yy);
        st.set(d, d, diag);
        st.set(d, -d, -diag);
    }
    st
}

/// Coefficient display of the refined scheme on a square mesh:
///
/// * center `1 − 2C − (2 + βx + βy)/(2|B|)·C²·α_s`
/// * first neighbors `C/2`
/// * `(±2, 0)`: `(1 + βx)/|B|·(C/2)²·α_s`, `(0, ±2)`: `(1 + βy)/|B|·(C/2)²·α_s`
/// * `(1, 1)`, `(−1, −1)`: `βc/(2|B|)·C²·α_s`; the other diagonal the negative
///
/// with `C = Δt/h`. The `α_s` factor on the source terms is part of this
/// display but not of [`composed_stencil`]; the two agree at `α_s = 1`.
pub fn effective_stencil(
    tensor: &DiffusionTensor,
    alpha_s: f64,
    dt: f64,
    hx: f64,
    hy: f64,
) -> Result<StencilCoeffs> {
    let h = square_mesh(hx, hy)?;
    finite(alpha_s, "alpha_s")?;
    let s = SourceSolve::new(tensor, alpha_s, positive(dt, "dt")?)?;
    let c = dt / (2.0 * h);
    Ok(stencil(&s, c, c, alpha_s))
}

/// Exact one-step map of the two-stage update with `(u, v)ⁿ ≡ 0`: stage 1
/// substituted into stage 2. Any mesh aspect ratio.
pub fn composed_stencil(
    tensor: &DiffusionTensor,
    alpha_s: f64,
    dt: f64,
    hx: f64,
    hy: f64,
) -> Result<StencilCoeffs> {
    finite(alpha_s, "alpha_s")?;
    let s = SourceSolve::new(tensor, alpha_s, positive(dt, "dt")?)?;
    Ok(stencil(
        &s,
        dt / (2.0 * positive(hx, "hx")?),
        dt / (2.0 * positive(hy, "hy")?),
        1.0,
    ))
}

fn square_mesh(hx: f64, hy: f64) -> Result<f64> {
    positive(hx, "hx")?;
    positive(hy, "hy")?;
    if (hx - hy).abs() > 1e-12 * hx.max(hy) {
        return Err(Error::Unsupported(
            "stencil analysis needs a square mesh (hx = hy)",
        ));
    }
    Ok(hx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub is_monotone: bool,
    pub min_coefficient: f64,
    pub cross_magnitude: f64,
}

pub fn monotonicity_report(coeffs: &StencilCoeffs) -> MonotonicityReport {
    let min_coefficient = coeffs.min();
    MonotonicityReport {
        is_monotone: min_coefficient >= 0.0,
        min_coefficient,
        cross_magnitude: coeffs.cross_magnitude(),
    }
}

/// Neighbor order of [`MinimalMeshOperator::a_boundary`].
pub const BOUNDARY_ORDER: [(i32, i32); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// `L⁰ₕ` on the 3×3 mesh: one interior node, eight boundary nodes, with the
/// second-neighbor stencil entries folded onto the adjacent boundary node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimalMeshOperator {
    pub a_center: f64,
    pub a_boundary: [f64; 8],
    pub alpha_s: f64,
    pub det_b: f64,
}

impl MinimalMeshOperator {
    /// `G∂ = −A∂ / A`.
    pub fn boundary_weights(&self) -> Result<[f64; 8]> {
        if self.a_center == 0.0 {
            return Err(Error::SingularOperator);
        }
        Ok(self.a_boundary.map(|a| -a / self.a_center))
    }
}

pub fn minimal_mesh_matrices(
    tensor: &DiffusionTensor,
    alpha_s: f64,
    dt: f64,
    h: f64,
) -> Result<MinimalMeshOperator> {
    let st = effective_stencil(tensor, alpha_s, dt, h, h)?;
    let s = SourceSolve::new(tensor, alpha_s, dt)?;
    let a_boundary = BOUNDARY_ORDER.map(|(di, dj)| st.get(di, dj) + st.get(2 * di, 2 * dj));
    Ok(MinimalMeshOperator {
        a_center: st.get(0, 0) - 1.0,
        a_boundary,
        alpha_s,
        det_b: s.det_b,
    })
}

/// Nonnegativity of `G = A⁻¹` together with the boundary-weight bound
/// `Σ G∂ ≤ 1`, the latter in its reduced form: `α_s` and `|B|` of opposite
/// sign. Entrywise `G∂ ≥ 0` is not required; the folded diagonal entries
/// come in `±` pairs and would rule out every `kc ≠ 0`.
pub fn ciarlet_check(op: &MinimalMeshOperator) -> Result<bool> {
    let weights = op.boundary_weights()?;
    let total: f64 = weights.iter().sum();
    let g_nonneg = op.a_center > 0.0;
    let bound = total <= 1.0 + 1e-12 && op.alpha_s * op.det_b < 0.0;
    Ok(g_nonneg && bound)
}
