use std::sync::Arc;

use nalgebra::DMatrix;

use crate::domain::{ensure_same_mesh, Field, Kernel, Mesh};
use crate::error::{Error, Result};

/// Sparse row representation of `u ↦ J * u` on a mesh.
///
/// Entries already include the factor `h`. Offsets across a gap between
/// intervals are snapped to the nearest lattice offset, which keeps the
/// operator symmetric with row sums at most one.
#[derive(Debug, Clone)]
pub struct Convolution {
    mesh: Arc<Mesh>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Convolution {
    pub fn new(kernel: &Kernel, mesh: &Arc<Mesh>) -> Result<Self> {
        let h = mesh.h();
        if (kernel.h() - h).abs() > 1e-12 * h {
            return Err(Error::InvalidKernel(format!(
                "kernel sampled with h = {}, mesh uses h = {h}",
                kernel.h()
            )));
        }
        let reach = kernel.reach() as i64;
        let rows = match &**mesh {
            Mesh::Periodic(p) => {
                if kernel.radius() >= p.image_cutoff() as f64 - 1.0 {
                    return Err(Error::InvalidKernel(format!(
                        "radius {} exceeds the periodic image cutoff {}",
                        kernel.radius(),
                        p.image_cutoff()
                    )));
                }
                let n = p.n() as i64;
                (0..n)
                    .map(|i| {
                        let mut acc = vec![0.0; n as usize];
                        for k in -reach..=reach {
                            acc[(i - k).rem_euclid(n) as usize] += h * kernel.weight(k);
                        }
                        acc.into_iter()
                            .enumerate()
                            .filter(|(_, v)| *v != 0.0)
                            .collect()
                    })
                    .collect()
            }
            Mesh::Bounded(g) => {
                let nodes = g.nodes();
                (0..nodes.len())
                    .map(|i| {
                        let mut row = Vec::new();
                        for (j, &xj) in nodes.iter().enumerate() {
                            // |a - b| is exactly symmetric, so the snapping is too
                            let k = ((nodes[i] - xj).abs() / h).round() as i64;
                            if k <= reach {
                                let w = kernel.weight(k);
                                if w != 0.0 {
                                    row.push((j, h * w));
                                }
                            }
                        }
                        row
                    })
                    .collect()
            }
        };
        Ok(Self {
            mesh: mesh.clone(),
            rows,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        ensure_same_mesh(&self.mesh, u.mesh())?;
        Field::new(self.mesh.clone(), self.apply_slice(u.values()))
    }

    pub(crate) fn apply_slice(&self, u: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * u[j]).sum())
            .collect()
    }

    /// Adds `c · J` into a dense matrix.
    pub(crate) fn add_scaled_to(&self, c: f64, m: &mut DMatrix<f64>) {
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] += c * w;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let mut m = DMatrix::zeros(n, n);
        self.add_scaled_to(1.0, &mut m);
        m
    }
}

/// `(J * u)_i = h Σ_j J(x_i - x_j) u_j` with zero extension or periodic wrap.
pub fn convolve(kernel: &Kernel, u: &Field) -> Result<Field> {
    Convolution::new(kernel, u.mesh())?.apply(u)
}
