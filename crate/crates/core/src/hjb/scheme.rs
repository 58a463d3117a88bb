//! Explicit upwind time-stepping shared by the principal's solver and the
//! agent's deviation problem.
//!
//! Each step computes `phi^n = phi^{n+1} + dt * max_k L_k[phi^{n+1}]`, with
//! one-sided differences picked per candidate from its drift sign and a
//! central second difference in `w`. Boundary rows use the inward
//! one-sided difference and zero curvature, i.e. a linearly extrapolated
//! ghost node.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::Derivatives;

/// Discrete derivatives at node `(i, j)` of one time slice (`y` fastest).
#[inline]
pub(crate) fn node_derivatives(slice: &[f64], grid: &Grid, i: usize, j: usize) -> Derivatives {
    let (n_w, n_y) = (grid.n_w, grid.n_y);
    let (dw, dy) = (grid.dw(), grid.dy());
    let at = |i: usize, j: usize| slice[i * n_y + j];
    let c = at(i, j);

    let fwd_w = (i + 1 < n_w).then(|| (at(i + 1, j) - c) / dw);
    let bwd_w = (i > 0).then(|| (c - at(i - 1, j)) / dw);
    let (dw_fwd, dw_bwd) = match (fwd_w, bwd_w) {
        (Some(f), Some(b)) => (f, b),
        (Some(f), None) => (f, f),
        (None, Some(b)) => (b, b),
        (None, None) => (0.0, 0.0),
    };
    let dww = if i > 0 && i + 1 < n_w {
        (at(i + 1, j) - 2.0 * c + at(i - 1, j)) / (dw * dw)
    } else {
        0.0
    };

    let fwd_y = (j + 1 < n_y).then(|| (at(i, j + 1) - c) / dy);
    let bwd_y = (j > 0).then(|| (c - at(i, j - 1)) / dy);
    let (dy_fwd, dy_bwd) = match (fwd_y, bwd_y) {
        (Some(f), Some(b)) => (f, b),
        (Some(f), None) => (f, f),
        (None, Some(b)) => (b, b),
        (None, None) => (0.0, 0.0),
    };

    Derivatives {
        dw_fwd,
        dw_bwd,
        dy_fwd,
        dy_bwd,
        dww,
    }
}

/// Per-step local maximization used by [`sweep`].
pub(crate) trait StepOperator: Sync {
    type Tables: Sync;

    /// Coefficients for step `n` (sampled once per step).
    fn prepare(&self, n: usize) -> Result<Self::Tables>;

    /// Maximized generator at node `(i, j)` and the maximizing indices.
    fn node(&self, tables: &Self::Tables, i: usize, j: usize, d: &Derivatives) -> (f64, u16, u16);
}

pub(crate) struct SweepOutput {
    /// Either every slice (`n_t + 1` of them) or only slice 0.
    pub phi: Vec<f64>,
    /// Per-step policy indices (empty when history is not kept).
    pub policy_u: Vec<u16>,
    pub policy_pi: Vec<u16>,
}

/// Backward sweep from `terminal` at `T` to `t = 0`.
pub(crate) fn sweep<O: StepOperator>(
    grid: &Grid,
    terminal: &[f64],
    op: &O,
    keep_history: bool,
) -> Result<SweepOutput> {
    let len = grid.slice_len();
    debug_assert_eq!(terminal.len(), len);
    let dt = grid.dt();
    let n_t = grid.n_t;

    let (mut phi, mut policy_u, mut policy_pi) = if keep_history {
        let mut phi = vec![0.0; (n_t + 1) * len];
        phi[n_t * len..].copy_from_slice(terminal);
        (phi, vec![0u16; n_t * len], vec![0u16; n_t * len])
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    let mut next = terminal.to_vec();
    let mut cur = vec![0.0; len];
    let mut pu = vec![0u16; len];
    let mut pp = vec![0u16; len];

    for n in (0..n_t).rev() {
        let tables = op.prepare(n)?;
        step_rows(grid, &next, &mut cur, &mut pu, &mut pp, |i, j, src| {
            let d = node_derivatives(src, grid, i, j);
            let (h, u, p) = op.node(&tables, i, j, &d);
            (src[i * grid.n_y + j] + dt * h, u, p)
        });
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { step: n });
        }
        if keep_history {
            phi[n * len..(n + 1) * len].copy_from_slice(&cur);
            policy_u[n * len..(n + 1) * len].copy_from_slice(&pu);
            policy_pi[n * len..(n + 1) * len].copy_from_slice(&pp);
        }
        core::mem::swap(&mut next, &mut cur);
    }

    if !keep_history {
        phi = next;
    }
    Ok(SweepOutput {
        phi,
        policy_u,
        policy_pi,
    })
}

#[cfg(feature = "std")]
fn step_rows<F>(grid: &Grid, src: &[f64], out: &mut [f64], pu: &mut [u16], pp: &mut [u16], f: F)
where
    F: Fn(usize, usize, &[f64]) -> (f64, u16, u16) + Sync,
{
    use rayon::prelude::*;
    let n_y = grid.n_y;
    out.par_chunks_mut(n_y)
        .zip(pu.par_chunks_mut(n_y))
        .zip(pp.par_chunks_mut(n_y))
        .enumerate()
        .for_each(|(i, ((row, row_u), row_p))| {
            for j in 0..n_y {
                let (v, u, p) = f(i, j, src);
                row[j] = v;
                row_u[j] = u;
                row_p[j] = p;
            }
        });
}

#[cfg(not(feature = "std"))]
fn step_rows<F>(grid: &Grid, src: &[f64], out: &mut [f64], pu: &mut [u16], pp: &mut [u16], f: F)
where
    F: Fn(usize, usize, &[f64]) -> (f64, u16, u16) + Sync,
{
    let n_y = grid.n_y;
    for i in 0..grid.n_w {
        for j in 0..n_y {
            let (v, u, p) = f(i, j, src);
            out[i * n_y + j] = v;
            pu[i * n_y + j] = u;
            pp[i * n_y + j] = p;
        }
    }
}

/// Cell lookup along one axis: `(k, s)` with the point at `k + s` nodes.
/// Points within `1e-9` cells of a node snap to it with `s = 0`.
pub(crate) fn locate(x: f64, min: f64, max: f64, n: usize) -> Option<(usize, f64)> {
    if !(x >= min && x <= max) {
        return None;
    }
    let u = (x - min) / (max - min) * (n - 1) as f64;
    let r = libm::round(u);
    if (u - r).abs() < 1e-9 {
        return Some((r as usize, 0.0));
    }
    let k = (libm::floor(u) as usize).min(n - 2);
    Some((k, u - k as f64))
}

/// Bilinear interpolation of a slice.
pub(crate) fn interpolate(slice: &[f64], grid: &Grid, w: f64, y: f64) -> Option<f64> {
    let (i, sw) = locate(w, grid.w_min, grid.w_max, grid.n_w)?;
    let (j, sy) = locate(y, grid.y_min, grid.y_max, grid.n_y)?;
    let at = |i: usize, j: usize| slice[i * grid.n_y + j];
    let along_w = |j: usize| {
        if sw == 0.0 {
            at(i, j)
        } else {
            at(i, j) + (at(i + 1, j) - at(i, j)) * sw
        }
    };
    let lo = along_w(j);
    Some(if sy == 0.0 { lo } else { lo + (along_w(j + 1) - lo) * sy })
}

/// Bilinear interpolation of node derivatives.
pub(crate) fn interpolate_derivatives(slice: &[f64], grid: &Grid, w: f64, y: f64) -> Option<Derivatives> {
    let (i, sw) = locate(w, grid.w_min, grid.w_max, grid.n_w)?;
    let (j, sy) = locate(y, grid.y_min, grid.y_max, grid.n_y)?;
    let along_w = |j: usize| {
        let d0 = node_derivatives(slice, grid, i, j);
        if sw == 0.0 {
            d0
        } else {
            d0.lerp(&node_derivatives(slice, grid, i + 1, j), sw)
        }
    };
    let lo = along_w(j);
    Some(if sy == 0.0 { lo } else { lo.lerp(&along_w(j + 1), sy) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid {
            w_min: -1.0,
            w_max: 1.0,
            n_w: 5,
            y_min: 0.0,
            y_max: 2.0,
            n_y: 5,
            horizon: 1.0,
            n_t: 4,
        }
    }

    #[test]
    fn derivatives_of_a_plane_are_exact() {
        let g = grid();
        let mut slice = vec![0.0; g.slice_len()];
        for i in 0..g.n_w {
            for j in 0..g.n_y {
                slice[i * g.n_y + j] = 3.0 * g.w(i) - 2.0 * g.y(j);
            }
        }
        for i in 0..g.n_w {
            for j in 0..g.n_y {
                let d = node_derivatives(&slice, &g, i, j);
                for v in [d.dw_fwd, d.dw_bwd] {
                    assert!((v - 3.0).abs() < 1e-12);
                }
                for v in [d.dy_fwd, d.dy_bwd] {
                    assert!((v + 2.0).abs() < 1e-12);
                }
                assert!(d.dww.abs() < 1e-9);
            }
        }
        let v = interpolate(&slice, &g, 0.3, 1.1).unwrap();
        assert!((v - (0.9 - 2.2)).abs() < 1e-12);
    }

    #[test]
    fn locate_snaps_and_rejects() {
        assert_eq!(locate(0.5, 0.0, 1.0, 3), Some((1, 0.0)));
        assert_eq!(locate(1.0, 0.0, 1.0, 3), Some((2, 0.0)));
        let (k, s) = locate(0.75, 0.0, 1.0, 3).unwrap();
        assert_eq!(k, 1);
        assert!((s - 0.5).abs() < 1e-12);
        assert_eq!(locate(1.5, 0.0, 1.0, 3), None);
    }
}
