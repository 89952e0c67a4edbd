//! Labeled union-of-subspaces streams with gradual drift, abrupt shift and
//! planted outliers.
//!
//! Every cluster owns an orthonormal `d × r` basis; the bases of different
//! clusters start mutually orthogonal. Between windows each basis vector is
//! rotated by `drift_deg` towards a fixed partner direction outside its own
//! subspace. Points are `B·c + noise` with `c ~ N(0, I_r)`, scaled to unit
//! norm. Outliers are unit vectors in uniformly random directions and carry
//! [`OUTLIER_LABEL`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::math;
use crate::model::DataWindow;
use crate::Matrix;

/// Label reserved for planted outliers.
pub const OUTLIER_LABEL: &str = "outlier";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamParams {
    pub dim: usize,
    pub clusters: usize,
    pub subspace_dim: usize,
    pub per_window: usize,
    pub windows: usize,
    /// Rotation applied to every basis between consecutive windows, degrees.
    pub drift_deg: f64,
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for StreamParams {
    fn default() -> Self {
        Self {
            dim: 20,
            clusters: 3,
            subspace_dim: 2,
            per_window: 150,
            windows: 10,
            drift_deg: 0.0,
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            seed: 0,
        }
    }
}

impl StreamParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CoreError::InvalidGeometry(msg));
        if self.clusters == 0 || self.subspace_dim == 0 || self.per_window == 0 {
            return bad("clusters, subspace_dim and per_window must be positive".into());
        }
        if self.subspace_dim >= self.dim {
            return bad(format!("subspace_dim {} must be below dim {}", self.subspace_dim, self.dim));
        }
        if self.clusters * self.subspace_dim > self.dim {
            return bad(format!(
                "{} orthogonal subspaces of dimension {} do not fit in {} dimensions",
                self.clusters, self.subspace_dim, self.dim
            ));
        }
        if self.drift_deg != 0.0 && 2 * self.subspace_dim > self.dim {
            return bad("drift needs 2·subspace_dim ≤ dim".into());
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad(format!("outlier_fraction {} outside [0, 1)", self.outlier_fraction));
        }
        if !(self.noise_sigma >= 0.0) || !self.drift_deg.is_finite() {
            return bad("noise_sigma must be non-negative and drift finite".into());
        }
        Ok(())
    }

    pub fn outliers_per_window(&self) -> usize {
        math::floor(self.outlier_fraction * self.per_window as f64 + 0.5) as usize
    }
}

/// Abrupt replacement of one cluster's subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftEvent {
    pub cluster: usize,
    pub window: usize,
}

/// Lazily generated stream of labeled windows.
#[derive(Debug, Clone)]
pub struct SubspaceStream {
    params: StreamParams,
    shift: Option<ShiftEvent>,
    rng: ChaCha8Rng,
    bases: Vec<Matrix>,
    partners: Vec<Matrix>,
    generation: Vec<usize>,
    next_window: usize,
    next_id: u64,
}

pub fn gen_subspace_stream(params: StreamParams) -> Result<SubspaceStream> {
    SubspaceStream::new(params, None)
}

pub fn gen_shift_event(params: StreamParams, cluster: usize, shift_window: usize) -> Result<SubspaceStream> {
    if cluster >= params.clusters {
        return Err(CoreError::InvalidGeometry(format!("no cluster {cluster} to shift")));
    }
    if shift_window >= params.windows {
        return Err(CoreError::InvalidGeometry(format!(
            "shift window {shift_window} is past the last window {}",
            params.windows
        )));
    }
    SubspaceStream::new(params, Some(ShiftEvent { cluster, window: shift_window }))
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn unit_columns(mut m: Matrix) -> Matrix {
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    m
}

impl SubspaceStream {
    fn new(params: StreamParams, shift: Option<ShiftEvent>) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let (d, r, k) = (params.dim, params.subspace_dim, params.clusters);
        let q = gaussian(d, k * r, &mut rng).qr().q();
        let bases: Vec<Matrix> = (0..k).map(|c| q.columns(c * r, r).into_owned()).collect();
        let mut stream = Self {
            params,
            shift,
            rng,
            partners: Vec::with_capacity(k),
            bases,
            generation: alloc::vec![0; k],
            next_window: 0,
            next_id: 0,
        };
        for c in 0..k {
            let p = stream.draw_partner(c);
            stream.partners.push(p);
        }
        Ok(stream)
    }

    /// Orthonormal directions orthogonal to cluster `c`'s subspace.
    fn draw_partner(&mut self, c: usize) -> Matrix {
        let (d, r) = (self.params.dim, self.params.subspace_dim);
        if 2 * r > d {
            return Matrix::zeros(d, r);
        }
        let g = gaussian(d, r, &mut self.rng);
        let mut stacked = Matrix::zeros(d, 2 * r);
        stacked.columns_mut(0, r).copy_from(&self.bases[c]);
        stacked.columns_mut(r, r).copy_from(&g);
        stacked.qr().q().columns(r, r).into_owned()
    }

    fn redraw_cluster(&mut self, c: usize) {
        let (d, r) = (self.params.dim, self.params.subspace_dim);
        self.bases[c] = gaussian(d, r, &mut self.rng).qr().q();
        self.partners[c] = self.draw_partner(c);
        self.generation[c] += 1;
    }

    fn rotate(&mut self) {
        let theta = self.params.drift_deg.to_radians();
        if theta == 0.0 {
            return;
        }
        let (s, co) = (math::sin(theta), math::cos(theta));
        for (b, u) in self.bases.iter_mut().zip(self.partners.iter_mut()) {
            let nb = &*b * co + &*u * s;
            let nu = &*u * co - &*b * s;
            *b = nb;
            *u = nu;
        }
    }

    /// Current basis of cluster `c`.
    pub fn basis(&self, c: usize) -> &Matrix {
        &self.bases[c]
    }

    pub fn label_of(&self, c: usize) -> String {
        match self.generation[c] {
            0 => format!("c{c}"),
            g => format!("c{c}.{g}"),
        }
    }

    fn make_window(&mut self) -> DataWindow {
        let t = self.next_window;
        if t > 0 {
            self.rotate();
        }
        if let Some(ev) = self.shift {
            if ev.window == t {
                self.redraw_cluster(ev.cluster);
            }
        }
        let p = self.params;
        let n = p.per_window;
        let n_out = p.outliers_per_window().min(n);
        let n_in = n - n_out;

        let mut kinds: Vec<Option<usize>> = (0..n_in).map(|i| Some(i % p.clusters)).collect();
        kinds.extend(core::iter::repeat_n(None, n_out));
        kinds.shuffle(&mut self.rng);

        let mut x = Matrix::zeros(p.dim, n);
        let mut labels = Vec::with_capacity(n);
        for (col, kind) in kinds.iter().enumerate() {
            let v = match kind {
                Some(c) => {
                    let coef = gaussian(p.subspace_dim, 1, &mut self.rng);
                    let mut v = &self.bases[*c] * coef;
                    if p.noise_sigma > 0.0 {
                        v += gaussian(p.dim, 1, &mut self.rng) * p.noise_sigma;
                    }
                    labels.push(self.label_of(*c));
                    v
                }
                None => {
                    labels.push(String::from(OUTLIER_LABEL));
                    gaussian(p.dim, 1, &mut self.rng)
                }
            };
            x.set_column(col, &v.column(0));
        }
        let x = unit_columns(x);
        let ids = (0..n as u64).map(|i| self.next_id + i).collect();
        self.next_id += n as u64;
        self.next_window += 1;
        DataWindow::new(x, ids, Some(labels), t).expect("generated window is well-formed")
    }
}

impl Iterator for SubspaceStream {
    type Item = DataWindow;

    fn next(&mut self) -> Option<DataWindow> {
        if self.next_window >= self.params.windows {
            return None;
        }
        Some(self.make_window())
    }
}

/// Distance from `v` to the column span of the orthonormal `basis`.
pub fn subspace_residual(basis: &Matrix, v: &nalgebra::DVector<f64>) -> f64 {
    let proj = basis * (basis.transpose() * v);
    (v - proj).norm()
}
