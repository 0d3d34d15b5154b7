//! Staggered field storage and the slab-parallel leapfrog kernels.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Ex,
    Ey,
    Ez,
    Hx,
    Hy,
    Hz,
}

/// Index bookkeeping for an `n[0] x n[1] x n[2]` cell domain. Every field
/// array has `(n+1)^3` slots; slot `(i, j, k)` of `Ex` sits at
/// `(i + 1/2, j, k)`, of `Hx` at `(i, j + 1/2, k + 1/2)`, and so on.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Lattice {
    pub n: [usize; 3],
    pub stride: [usize; 3],
    pub len: usize,
    pub periodic: [bool; 3],
}

impl Lattice {
    pub fn new(n: [usize; 3], periodic: [bool; 3]) -> Self {
        let sx = n[0] + 1;
        let sxy = sx * (n[1] + 1);
        Self {
            n,
            stride: [1, sx, sxy],
            len: sxy * (n[2] + 1),
            periodic,
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.stride[1] * j + self.stride[2] * k
    }

    #[inline]
    pub fn idx_v(&self, p: [usize; 3]) -> usize {
        self.idx(p[0], p[1], p[2])
    }

    /// Interior node indices along `axis` that carry an updated tangential field.
    pub fn node_range(&self, axis: usize) -> Range<usize> {
        if self.periodic[axis] {
            1..self.n[axis] + 1
        } else {
            1..self.n[axis]
        }
    }

    /// Update range of electric component `c` along `axis`.
    pub fn e_range(&self, c: usize, axis: usize) -> Range<usize> {
        if c == axis {
            0..self.n[axis]
        } else {
            self.node_range(axis)
        }
    }

    /// Update range of magnetic component `c` along `axis`.
    pub fn h_range(&self, c: usize, axis: usize) -> Range<usize> {
        if c == axis {
            0..self.n[axis] + 1
        } else {
            0..self.n[axis]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Fields {
    pub e: [Vec<f32>; 3],
    pub h: [Vec<f32>; 3],
}

impl Fields {
    pub fn zeros(len: usize) -> Self {
        let z = || vec![0.0f32; len];
        Self {
            e: [z(), z(), z()],
            h: [z(), z(), z()],
        }
    }
}

/// Per-edge update coefficients: `E <- ca E + cb (curl H)_raw`, with the
/// 1/dx of the curl folded into `cb`. `eps` is the averaged relative
/// permittivity, kept for energy reductions.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EdgeCoefficients {
    pub ca: [Vec<f32>; 3],
    pub cb: [Vec<f32>; 3],
    pub eps: [Vec<f32>; 3],
}

/// `H <- H - ch (curl E)_raw` over the whole lattice.
pub(crate) fn update_h(lat: &Lattice, h: &mut [Vec<f32>; 3], e: &[Vec<f32>; 3], ch: f32) {
    let [nx, ny, nz] = lat.n;
    let sx = lat.stride[1];
    let sxy = lat.stride[2];
    let (ex, ey, ez) = (&e[0][..], &e[1][..], &e[2][..]);
    let [hx, hy, hz] = h;
    hx.par_chunks_mut(sxy)
        .zip(hy.par_chunks_mut(sxy))
        .zip(hz.par_chunks_mut(sxy))
        .enumerate()
        .for_each(|(k, ((hx, hy), hz))| {
            let base = k * sxy;
            if k < nz {
                let up = base + sxy;
                let n1 = nx + 1;
                for j in 0..ny {
                    let r = j * sx;
                    let out = &mut hx[r..r + n1];
                    let ez0 = &ez[base + r..base + r + n1];
                    let ez1 = &ez[base + r + sx..base + r + sx + n1];
                    let ey0 = &ey[base + r..base + r + n1];
                    let ey1 = &ey[up + r..up + r + n1];
                    for i in 0..n1 {
                        out[i] -= ch * ((ez1[i] - ez0[i]) - (ey1[i] - ey0[i]));
                    }
                }
                for j in 0..=ny {
                    let r = j * sx;
                    let out = &mut hy[r..r + nx];
                    let ex0 = &ex[base + r..base + r + nx];
                    let ex1 = &ex[up + r..up + r + nx];
                    let ez0 = &ez[base + r..base + r + nx];
                    let ez1 = &ez[base + r + 1..base + r + 1 + nx];
                    for i in 0..nx {
                        out[i] -= ch * ((ex1[i] - ex0[i]) - (ez1[i] - ez0[i]));
                    }
                }
            }
            for j in 0..ny {
                let r = j * sx;
                let out = &mut hz[r..r + nx];
                let ey0 = &ey[base + r..base + r + nx];
                let ey1 = &ey[base + r + 1..base + r + 1 + nx];
                let ex0 = &ex[base + r..base + r + nx];
                let ex1 = &ex[base + r + sx..base + r + sx + nx];
                for i in 0..nx {
                    out[i] -= ch * ((ey1[i] - ey0[i]) - (ex1[i] - ex0[i]));
                }
            }
        });
}

/// Electric half-step. Returns `sum(eps_r E^2)` per z-plane, in plane order.
pub(crate) fn update_e(
    lat: &Lattice,
    e: &mut [Vec<f32>; 3],
    h: &[Vec<f32>; 3],
    co: &EdgeCoefficients,
) -> Vec<f64> {
    let [nx, ny, nz] = lat.n;
    let sx = lat.stride[1];
    let sxy = lat.stride[2];
    let (hx, hy, hz) = (&h[0][..], &h[1][..], &h[2][..]);
    let ir = lat.node_range(0);
    let jr = lat.node_range(1);
    let kr = lat.node_range(2);
    let [ex, ey, ez] = e;
    ex.par_chunks_mut(sxy)
        .zip(ey.par_chunks_mut(sxy))
        .zip(ez.par_chunks_mut(sxy))
        .enumerate()
        .map(|(k, ((ex, ey), ez))| {
            let base = k * sxy;
            if kr.contains(&k) {
                let dn = base - sxy;
                for j in jr.clone() {
                    let r = j * sx;
                    let g = base + r;
                    let out = &mut ex[r..r + nx];
                    let ca = &co.ca[0][g..g + nx];
                    let cb = &co.cb[0][g..g + nx];
                    let hz0 = &hz[g - sx..g - sx + nx];
                    let hz1 = &hz[g..g + nx];
                    let hy0 = &hy[dn + r..dn + r + nx];
                    let hy1 = &hy[g..g + nx];
                    for i in 0..nx {
                        out[i] = ca[i] * out[i] + cb[i] * ((hz1[i] - hz0[i]) - (hy1[i] - hy0[i]));
                    }
                }
                let len = ir.len();
                for j in 0..ny {
                    let r = j * sx + ir.start;
                    let g = base + r;
                    let out = &mut ey[r..r + len];
                    let ca = &co.ca[1][g..g + len];
                    let cb = &co.cb[1][g..g + len];
                    let hx0 = &hx[dn + r..dn + r + len];
                    let hx1 = &hx[g..g + len];
                    let hz0 = &hz[g - 1..g - 1 + len];
                    let hz1 = &hz[g..g + len];
                    for i in 0..len {
                        out[i] = ca[i] * out[i] + cb[i] * ((hx1[i] - hx0[i]) - (hz1[i] - hz0[i]));
                    }
                }
            }
            if k < nz {
                let len = ir.len();
                for j in jr.clone() {
                    let r = j * sx + ir.start;
                    let g = base + r;
                    let out = &mut ez[r..r + len];
                    let ca = &co.ca[2][g..g + len];
                    let cb = &co.cb[2][g..g + len];
                    let hy0 = &hy[g - 1..g - 1 + len];
                    let hy1 = &hy[g..g + len];
                    let hx0 = &hx[g - sx..g - sx + len];
                    let hx1 = &hx[g..g + len];
                    for i in 0..len {
                        out[i] = ca[i] * out[i] + cb[i] * ((hy1[i] - hy0[i]) - (hx1[i] - hx0[i]));
                    }
                }
            }
            plane_energy(
                [&ex[..], &ey[..], &ez[..]],
                [
                    &co.eps[0][base..base + sxy],
                    &co.eps[1][base..base + sxy],
                    &co.eps[2][base..base + sxy],
                ],
            )
        })
        .collect()
}

fn plane_energy(e: [&[f32]; 3], eps: [&[f32]; 3]) -> f64 {
    let mut total = 0.0f64;
    for c in 0..3 {
        // Row-sized partial sums in f32 keep the loop vectorizable.
        for (ev, epsv) in e[c].chunks(64).zip(eps[c].chunks(64)) {
            let mut acc = 0.0f32;
            for (v, w) in ev.iter().zip(epsv) {
                acc += w * v * v;
            }
            total += acc as f64;
        }
    }
    total
}

/// Copies periodic ghost layers of the magnetic field (index n <- 0).
pub(crate) fn wrap_h(lat: &Lattice, h: &mut [Vec<f32>; 3]) {
    for axis in 0..3 {
        if !lat.periodic[axis] {
            continue;
        }
        for c in (0..3).filter(|&c| c != axis) {
            copy_layer(lat, &mut h[c], axis, 0, lat.n[axis]);
        }
    }
}

/// Copies periodic ghost layers of the electric field (index 0 <- n).
pub(crate) fn wrap_e(lat: &Lattice, e: &mut [Vec<f32>; 3]) {
    for axis in 0..3 {
        if !lat.periodic[axis] {
            continue;
        }
        for c in (0..3).filter(|&c| c != axis) {
            copy_layer(lat, &mut e[c], axis, lat.n[axis], 0);
        }
    }
}

fn copy_layer(lat: &Lattice, a: &mut [f32], axis: usize, from: usize, to: usize) {
    let [nx, ny, nz] = lat.n;
    let dims = [nx + 1, ny + 1, nz + 1];
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for q in 0..dims[v] {
        for p in 0..dims[u] {
            let mut src = [0usize; 3];
            src[axis] = from;
            src[u] = p;
            src[v] = q;
            let mut dst = src;
            dst[axis] = to;
            a[lat.idx_v(dst)] = a[lat.idx_v(src)];
        }
    }
}
