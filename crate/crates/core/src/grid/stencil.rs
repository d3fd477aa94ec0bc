use super::{GridSpec, Vec6};
use crate::error::{QmxError, Result};

/// Boundary treatment of a first-derivative stencil on a non-periodic axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Closure {
    /// One-sided second-order closure, exact on quadratics at the faces.
    SecondOrder,
    /// Diagonal-norm summation-by-parts closure (first order at the faces),
    /// paired with the trapezoid weights of [`GridSpec::axis_weight`].
    Sbp21,
}

/// Per-index three-tap first-derivative stencil along one axis.
#[derive(Clone, Debug)]
pub(crate) struct AxisStencil {
    pub taps: Vec<[(usize, f64); 3]>,
}

impl AxisStencil {
    pub fn new(grid: &GridSpec, axis0: usize, closure: Closure) -> Result<Self> {
        grid.check_axis_cells(axis0, 3)?;
        let n = grid.dims()[axis0];
        let h = grid.spacing()[axis0];
        let c = 0.5 / h;
        let mut taps = Vec::with_capacity(n);
        if grid.is_periodic(axis0) {
            for i in 0..n {
                let prev = (i + n - 1) % n;
                let next = (i + 1) % n;
                taps.push([(prev, -c), (next, c), (i, 0.0)]);
            }
        } else {
            let last = n - 1;
            for i in 0..n {
                let t = if i == 0 {
                    match closure {
                        Closure::SecondOrder => [(0, -3.0 * c), (1, 4.0 * c), (2, -c)],
                        Closure::Sbp21 => [(0, -1.0 / h), (1, 1.0 / h), (0, 0.0)],
                    }
                } else if i == last {
                    match closure {
                        Closure::SecondOrder => {
                            [(last, 3.0 * c), (last - 1, -4.0 * c), (last - 2, c)]
                        }
                        Closure::Sbp21 => [(last, 1.0 / h), (last - 1, -1.0 / h), (last, 0.0)],
                    }
                } else {
                    [(i - 1, -c), (i + 1, c), (i, 0.0)]
                };
                taps.push(t);
            }
        }
        Ok(Self { taps })
    }

    /// Derivative along this axis at node `idx` whose axis coordinate is `i`.
    #[inline]
    pub fn apply<const N: usize>(&self, field: &[[f64; N]], idx: usize, i: usize, stride: usize) -> [f64; N] {
        let base = idx - i * stride;
        let mut out = [0.0; N];
        for &(t, w) in &self.taps[i] {
            if w != 0.0 {
                let v = &field[base + t * stride];
                for c in 0..N {
                    out[c] += w * v[c];
                }
            }
        }
        out
    }
}

/// Runs `f(k, slab)` over consecutive slabs of `out` (one slab per third-axis
/// index). Each slab is written by exactly one call so results are identical
/// with or without worker threads.
pub(crate) fn for_each_slab<T, F>(out: &mut [T], slab_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(slab_len)
            .enumerate()
            .for_each(|(k, chunk)| f(k, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (k, chunk) in out.chunks_mut(slab_len).enumerate() {
            f(k, chunk);
        }
    }
}

fn axis_index(axis: usize) -> Result<usize> {
    if (1..=3).contains(&axis) {
        Ok(axis - 1)
    } else {
        Err(QmxError::AxisOutOfRange(axis))
    }
}

pub(crate) fn partial_with<const N: usize>(
    grid: &GridSpec,
    field: &[[f64; N]],
    axis0: usize,
    closure: Closure,
) -> Result<Vec<[f64; N]>> {
    if field.len() != grid.node_count() {
        return Err(QmxError::ShapeMismatch(format!(
            "{} values for {} nodes",
            field.len(),
            grid.node_count()
        )));
    }
    let st = AxisStencil::new(grid, axis0, closure)?;
    let dims = grid.dims();
    let stride = grid.strides()[axis0];
    let slab = dims[0] * dims[1];
    let mut out = vec![[0.0; N]; field.len()];
    for_each_slab(&mut out, slab, |k, chunk| {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let idx = i + dims[0] * (j + dims[1] * k);
                let ia = [i, j, k][axis0];
                chunk[i + dims[0] * j] = st.apply(field, idx, ia, stride);
            }
        }
    });
    Ok(out)
}

/// `sum_j A_j d_j u = (-curl H, curl E)` with the given face closure.
pub(crate) fn apply_flux(grid: &GridSpec, field: &[Vec6], closure: Closure) -> Result<Vec<Vec6>> {
    let d1 = partial_with(grid, field, 0, closure)?;
    let d2 = partial_with(grid, field, 1, closure)?;
    let d3 = partial_with(grid, field, 2, closure)?;
    Ok((0..field.len())
        .map(|n| {
            let (a, b, c) = (&d1[n], &d2[n], &d3[n]);
            // curl w = (d2 w3 - d3 w2, d3 w1 - d1 w3, d1 w2 - d2 w1)
            [
                -(b[5] - c[4]),
                -(c[3] - a[5]),
                -(a[4] - b[3]),
                b[2] - c[1],
                c[0] - a[2],
                a[1] - b[0],
            ]
        })
        .collect())
}

/// Discrete partial derivative along `axis` (1, 2 or 3): central differences
/// in the interior and on periodic axes, one-sided second-order closures at
/// non-periodic faces.
pub fn discrete_partial<const N: usize>(
    grid: &GridSpec,
    field: &[[f64; N]],
    axis: usize,
) -> Result<Vec<[f64; N]>> {
    partial_with(grid, field, axis_index(axis)?, Closure::SecondOrder)
}

pub fn discrete_partial_scalar(grid: &GridSpec, field: &[f64], axis: usize) -> Result<Vec<f64>> {
    let wrapped: Vec<[f64; 1]> = field.iter().map(|&x| [x]).collect();
    Ok(discrete_partial(grid, &wrapped, axis)?
        .into_iter()
        .map(|v| v[0])
        .collect())
}

/// `curl v = sum_j J_j d_j v`.
pub fn discrete_curl(grid: &GridSpec, v: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    let d1 = discrete_partial(grid, v, 1)?;
    let d2 = discrete_partial(grid, v, 2)?;
    let d3 = discrete_partial(grid, v, 3)?;
    let jm = crate::material::curl_matrices();
    Ok((0..v.len())
        .map(|n| {
            let mut out = [0.0; 3];
            for (jmat, d) in jm.iter().zip([&d1, &d2, &d3]) {
                for r in 0..3 {
                    for c in 0..3 {
                        out[r] += jmat[r][c] * d[n][c];
                    }
                }
            }
            out
        })
        .collect())
}

pub fn discrete_div(grid: &GridSpec, v: &[[f64; 3]]) -> Result<Vec<f64>> {
    let d1 = discrete_partial(grid, v, 1)?;
    let d2 = discrete_partial(grid, v, 2)?;
    let d3 = discrete_partial(grid, v, 3)?;
    Ok((0..v.len()).map(|n| d1[n][0] + d2[n][1] + d3[n][2]).collect())
}
