//! Truncated (x, v) phase-space grid for the d = 1 verification solver.
//!
//! The transport flux field of the observable equation is divergence-free
//! with stream function m(x) n(v) (the product of the equilibrium marginal
//! densities), so face fluxes are built as differences of corner values of
//! that product. Each cell's net flux then telescopes to zero exactly in
//! floating point, which is what makes constants invariant and the
//! Theta-weighted mass conserved to roundoff. Corner values on the outer
//! boundary are set to zero: wall fluxes vanish (reflecting box) and the
//! only consistency loss sits in the outermost cells, whose equilibrium
//! weight is negligible by construction of the cutoffs.

use serde::{Deserialize, Serialize};

use crate::model::{Model, ModelError};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridCfg {
    pub n_x: usize,
    pub n_v: usize,
    /// Half-width of the x box.
    pub x_max: f64,
    /// sinh-stretch strength for x; 0 gives a uniform grid. Larger values
    /// concentrate points near the origin while still reaching x_max.
    pub x_stretch: f64,
    /// Half-width of the v box.
    pub v_max: f64,
    /// sinh-stretch strength for v; 0 gives a uniform grid.
    pub v_stretch: f64,
}

impl Default for GridCfg {
    fn default() -> Self {
        GridCfg {
            n_x: 128,
            n_v: 128,
            x_max: 1500.0,
            x_stretch: 8.0,
            v_max: 7.0,
            v_stretch: 0.0,
        }
    }
}

/// One coordinate axis: n cells with faces[0..=n] and centers[0..n].
#[derive(Debug, Clone)]
pub struct Axis {
    pub faces: Vec<f64>,
    pub centers: Vec<f64>,
}

impl Axis {
    /// Symmetric axis on [-max, max]: uniform for stretch = 0, otherwise
    /// faces at max * sinh(stretch u) / sinh(stretch) for uniform u.
    fn build(n: usize, max: f64, stretch: f64) -> Axis {
        assert!(n >= 4 && max > 0.0);
        let map = |u: f64| -> f64 {
            if stretch <= 0.0 {
                max * u
            } else {
                max * (stretch * u).sinh() / stretch.sinh()
            }
        };
        let mut faces = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let u = -1.0 + 2.0 * k as f64 / n as f64;
            faces.push(map(u));
        }
        // Enforce exact symmetry so odd data stays odd to roundoff.
        for k in 0..=n / 2 {
            let s = 0.5 * (faces[n - k] - faces[k]);
            faces[n - k] = s;
            faces[k] = -s;
        }
        let centers = (0..n)
            .map(|i| 0.5 * (faces[i] + faces[i + 1]))
            .collect();
        Axis { faces, centers }
    }

    pub fn n(&self) -> usize {
        self.centers.len()
    }
}

/// Two-point Gauss-Legendre integral of f over [a, b].
fn gl2(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let off = half / 3f64.sqrt();
    half * (f(mid - off) + f(mid + off))
}

/// Discretized phase space with equilibrium weights and transport fluxes.
#[derive(Debug, Clone)]
pub struct PhaseGrid {
    pub cfg: GridCfg,
    pub x: Axis,
    pub v: Axis,
    /// Cell masses of the x marginal (sums to its truncated mass, then the
    /// product weights are renormalized to total 1).
    pub wx: Vec<f64>,
    pub wv: Vec<f64>,
    /// Net renormalization applied so that sum(wx) * sum(wv) = 1.
    pub theta_norm: f64,
    /// Transport flux across x-face i in row j, positive toward +x;
    /// indexed fx[i][j], i in 0..=n_x, j in 0..n_v.
    pub fx: Vec<Vec<f64>>,
    /// Transport flux across v-face j in column i, positive toward +v;
    /// indexed fv[i][j], i in 0..n_x, j in 0..=n_v.
    pub fv: Vec<Vec<f64>>,
    /// Conductances of the velocity diffusion: beta[j] couples cells j and
    /// j+1 of every column, beta[j] = n(v_face_{j+1}) / (vc_{j+1} - vc_j).
    pub beta_v: Vec<f64>,
    /// Largest stable transport step: min over cells of Theta / sum|F|.
    pub dt_transport: f64,
}

impl PhaseGrid {
    pub fn new(model: &Model, cfg: GridCfg) -> Result<PhaseGrid, ModelError> {
        if model.d != 1 {
            return Err(ModelError::Unsupported(
                "the verification solver is one-dimensional".into(),
            ));
        }
        if cfg.n_x < 8 || cfg.n_v < 8 {
            return Err(ModelError::InvalidParameter(
                "grid needs at least 8 cells per axis".into(),
            ));
        }
        if !(cfg.x_max > 1.0 && cfg.v_max > 1.0) {
            return Err(ModelError::InvalidParameter(
                "cutoffs must exceed 1".into(),
            ));
        }
        let x = Axis::build(cfg.n_x, cfg.x_max, cfg.x_stretch);
        let v = Axis::build(cfg.n_v, cfg.v_max, cfg.v_stretch);

        // Unnormalized marginal densities; the common scale cancels after
        // the joint renormalization below.
        let mden = |s: f64| model.rho_mu_1d(s);
        let nden = |s: f64| model.rho_nu_1d(s);

        let mut wx: Vec<f64> = (0..cfg.n_x)
            .map(|i| gl2(x.faces[i], x.faces[i + 1], mden))
            .collect();
        let mut wv: Vec<f64> = (0..cfg.n_v)
            .map(|j| gl2(v.faces[j], v.faces[j + 1], nden))
            .collect();
        let sx: f64 = wx.iter().sum();
        let sv: f64 = wv.iter().sum();
        if !(sx > 0.0 && sv > 0.0) || !sx.is_finite() || !sv.is_finite() {
            return Err(ModelError::InvalidParameter(
                "equilibrium weights degenerate on the requested box".into(),
            ));
        }
        for w in wx.iter_mut() {
            *w /= sx;
        }
        for w in wv.iter_mut() {
            *w /= sv;
        }

        // Corner stream values m(xf) n(vf), normalized consistently with the
        // cell weights; zero on the boundary contour (reflecting walls).
        let mf: Vec<f64> = x.faces.iter().map(|&s| mden(s) / sx).collect();
        let nf: Vec<f64> = v.faces.iter().map(|&s| nden(s) / sv).collect();
        let corner = |i: usize, j: usize| -> f64 {
            if i == 0 || i == cfg.n_x || j == 0 || j == cfg.n_v {
                0.0
            } else {
                mf[i] * nf[j]
            }
        };

        let mut fx = vec![vec![0.0; cfg.n_v]; cfg.n_x + 1];
        for (i, row) in fx.iter_mut().enumerate() {
            for (j, f) in row.iter_mut().enumerate() {
                *f = corner(i, j + 1) - corner(i, j);
            }
        }
        let mut fv = vec![vec![0.0; cfg.n_v + 1]; cfg.n_x];
        for (i, col) in fv.iter_mut().enumerate() {
            for (j, f) in col.iter_mut().enumerate() {
                *f = corner(i, j) - corner(i + 1, j);
            }
        }

        let mut beta_v = vec![0.0; cfg.n_v - 1];
        for (j, b) in beta_v.iter_mut().enumerate() {
            *b = nf[j + 1] / (v.centers[j + 1] - v.centers[j]);
        }

        let mut dt_transport = f64::INFINITY;
        for i in 0..cfg.n_x {
            for j in 0..cfg.n_v {
                let theta = wx[i] * wv[j];
                let tot = fx[i][j].abs()
                    + fx[i + 1][j].abs()
                    + fv[i][j].abs()
                    + fv[i][j + 1].abs();
                if tot > 0.0 {
                    dt_transport = dt_transport.min(theta / tot);
                }
            }
        }

        Ok(PhaseGrid {
            cfg,
            x,
            v,
            wx,
            wv,
            theta_norm: sx * sv,
            fx,
            fv,
            beta_v,
            dt_transport,
        })
    }

    pub fn n_x(&self) -> usize {
        self.cfg.n_x
    }

    pub fn n_v(&self) -> usize {
        self.cfg.n_v
    }

    pub fn theta(&self, i: usize, j: usize) -> f64 {
        self.wx[i] * self.wv[j]
    }

    /// Discrete Theta integral of a grid function.
    pub fn integrate(&self, h: &[f64]) -> f64 {
        let nv = self.n_v();
        let mut acc = 0.0;
        for i in 0..self.n_x() {
            let mut row = 0.0;
            for j in 0..nv {
                row += self.wv[j] * h[i * nv + j];
            }
            acc += self.wx[i] * row;
        }
        acc
    }

    /// Discrete L2(Theta) inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let nv = self.n_v();
        let mut acc = 0.0;
        for i in 0..self.n_x() {
            let mut row = 0.0;
            for j in 0..nv {
                row += self.wv[j] * a[i * nv + j] * b[i * nv + j];
            }
            acc += self.wx[i] * row;
        }
        acc
    }

    /// Discrete squared L2(Theta) norm.
    pub fn norm_sq(&self, h: &[f64]) -> f64 {
        let nv = self.n_v();
        let mut acc = 0.0;
        for i in 0..self.n_x() {
            let mut row = 0.0;
            for j in 0..nv {
                let y = h[i * nv + j];
                row += self.wv[j] * y * y;
            }
            acc += self.wx[i] * row;
        }
        acc
    }

    /// Velocity Dirichlet form sum_i wx_i sum_j beta_j (h_{i,j+1} - h_{i,j})^2,
    /// the discrete square of the velocity gradient in L2(Theta).
    pub fn velocity_form(&self, h: &[f64]) -> f64 {
        let nv = self.n_v();
        let mut acc = 0.0;
        for i in 0..self.n_x() {
            let base = i * nv;
            let mut col = 0.0;
            for j in 0..nv - 1 {
                let d = h[base + j + 1] - h[base + j];
                col += self.beta_v[j] * d * d;
            }
            acc += self.wx[i] * col;
        }
        acc
    }
}
