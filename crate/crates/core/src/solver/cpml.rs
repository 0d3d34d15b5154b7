//! Convolutional perfectly matched layer (recursive-convolution form).

use std::ops::Range;

use super::grid::Lattice;
use super::CpmlParams;
use crate::constants::{EPS0, ETA0};

#[derive(Debug, Clone)]
struct Profile {
    b: Vec<f32>,
    c: Vec<f32>,
    /// 1/kappa - 1
    kinv: Vec<f32>,
}

impl Profile {
    fn build(depths: impl Iterator<Item = Option<f64>>, p: &CpmlParams, smax: f64, dt: f64) -> Self {
        let mut out = Profile { b: vec![], c: vec![], kinv: vec![] };
        for d in depths {
            let (b, c, kappa) = match d {
                None => (0.0, 0.0, 1.0),
                Some(d) => {
                    let m = p.order;
                    let sigma = smax * d.powf(m);
                    let kappa = 1.0 + (p.kappa_max - 1.0) * d.powf(m);
                    let alpha = p.alpha_max * (1.0 - d);
                    let b = (-(sigma / kappa + alpha) * dt / EPS0).exp();
                    let denom = sigma * kappa + kappa * kappa * alpha;
                    let c = if denom > 0.0 { sigma * (b - 1.0) / denom } else { 0.0 };
                    (b, c, kappa)
                }
            };
            out.b.push(b as f32);
            out.c.push(c as f32);
            out.kinv.push((1.0 / kappa - 1.0) as f32);
        }
        out
    }
}

/// Absorbing layers on one axis, both ends.
#[derive(Debug, Clone)]
struct AxisLayer {
    axis: usize,
    p: usize,
    n: usize,
    e: Profile,
    h: Profile,
    /// Auxiliary states for the two tangential components, compact along `axis`.
    psi_e: [Vec<f32>; 2],
    psi_h: [Vec<f32>; 2],
    local_dims: [usize; 3],
}

#[derive(Debug, Clone)]
pub(crate) struct Cpml {
    layers: Vec<AxisLayer>,
}

/// Tangential partners of component `c` for derivatives along `axis`:
/// returns (sign, other component) such that `(curl F)_c` contains
/// `sign * d(F_other)/d(axis)`.
fn curl_term(c: usize, axis: usize) -> (f32, usize) {
    if axis == (c + 1) % 3 {
        (1.0, (c + 2) % 3)
    } else {
        (-1.0, (c + 1) % 3)
    }
}

fn intersect(a: &Range<usize>, b: Range<usize>) -> Range<usize> {
    a.start.max(b.start)..a.end.min(b.end).max(a.start.max(b.start))
}

impl Cpml {
    pub fn new(lat: &Lattice, axes: [bool; 3], cells: usize, params: &CpmlParams, dt: f64, dx: f64) -> Self {
        let m = params.order;
        let smax = params.sigma_max.unwrap_or(0.8 * (m + 1.0) / (ETA0 * dx));
        let pf = cells as f64;
        let mut layers = Vec::new();
        for axis in 0..3 {
            if !axes[axis] || cells == 0 {
                continue;
            }
            let n = lat.n[axis];
            let p = cells;
            let e_depth = (0..=n).map(|g| {
                if g <= p {
                    Some((p - g) as f64 / pf)
                } else if g >= n - p {
                    Some((g - (n - p)) as f64 / pf)
                } else {
                    None
                }
            });
            let h_depth = (0..n).map(|g| {
                if g < p {
                    Some((p as f64 - g as f64 - 0.5) / pf)
                } else if g >= n - p {
                    Some((g as f64 + 0.5 - (n - p) as f64) / pf)
                } else {
                    None
                }
            });
            let mut local_dims = [lat.n[0] + 1, lat.n[1] + 1, lat.n[2] + 1];
            local_dims[axis] = 2 * (p + 1);
            let size: usize = local_dims.iter().product();
            layers.push(AxisLayer {
                axis,
                p,
                n,
                e: Profile::build(e_depth, params, smax, dt),
                h: Profile::build(h_depth, params, smax, dt),
                psi_e: [vec![0.0; size], vec![0.0; size]],
                psi_h: [vec![0.0; size], vec![0.0; size]],
                local_dims,
            });
        }
        Self { layers }
    }

    /// Adds the stretched-coordinate correction to E after the main update.
    pub fn correct_e(&mut self, lat: &Lattice, e: &mut [Vec<f32>; 3], h: &[Vec<f32>; 3], cb: &[Vec<f32>; 3]) {
        for layer in &mut self.layers {
            let a = layer.axis;
            let (n, p) = (layer.n, layer.p);
            for (slot, c) in (0..3).filter(|&c| c != a).enumerate() {
                let (sign, hc) = curl_term(c, a);
                let full = lat.e_range(c, a);
                for (seg, shift) in [(intersect(&full, 0..p + 1), 0), (intersect(&full, n - p..n + 1), n - 2 * p - 1)] {
                    let mut ranges = [lat.e_range(c, 0), lat.e_range(c, 1), lat.e_range(c, 2)];
                    ranges[a] = seg;
                    let pass = Pass { lat, layer_dims: layer.local_dims, axis: a, shift, ranges };
                    let (src, dst, coef) = (&h[hc][..], &mut e[c][..], &cb[c][..]);
                    let st = lat.stride[a];
                    pass.run(&mut layer.psi_e[slot], &layer.e, |idx| src[idx] - src[idx - st], |idx, v| {
                        dst[idx] += coef[idx] * sign * v;
                    });
                }
            }
        }
    }

    /// Same for H; `ch` is the uniform magnetic update coefficient.
    pub fn correct_h(&mut self, lat: &Lattice, h: &mut [Vec<f32>; 3], e: &[Vec<f32>; 3], ch: f32) {
        for layer in &mut self.layers {
            let a = layer.axis;
            let (n, p) = (layer.n, layer.p);
            for (slot, c) in (0..3).filter(|&c| c != a).enumerate() {
                let (sign, ec) = curl_term(c, a);
                let full = lat.h_range(c, a);
                for (seg, shift) in [(intersect(&full, 0..p), 0), (intersect(&full, n - p..n), n - 2 * p - 1)] {
                    let mut ranges = [lat.h_range(c, 0), lat.h_range(c, 1), lat.h_range(c, 2)];
                    ranges[a] = seg;
                    let pass = Pass { lat, layer_dims: layer.local_dims, axis: a, shift, ranges };
                    let (src, dst) = (&e[ec][..], &mut h[c][..]);
                    let st = lat.stride[a];
                    let k = ch * sign;
                    pass.run(&mut layer.psi_h[slot], &layer.h, |idx| src[idx + st] - src[idx], |idx, v| {
                        dst[idx] -= k * v;
                    });
                }
            }
        }
    }
}

/// One sweep over a PML slab: `psi = b psi + c d`, then `apply(idx, (1/kappa - 1) d + psi)`.
struct Pass<'a> {
    lat: &'a Lattice,
    layer_dims: [usize; 3],
    axis: usize,
    /// Global-to-local offset along `axis` for this slab.
    shift: usize,
    ranges: [Range<usize>; 3],
}

impl Pass<'_> {
    #[inline(always)]
    fn run(
        &self,
        psi: &mut [f32],
        prof: &Profile,
        diff: impl Fn(usize) -> f32,
        mut apply: impl FnMut(usize, f32),
    ) {
        let [r0, r1, r2] = &self.ranges;
        if r0.is_empty() {
            return;
        }
        let ld = self.layer_dims;
        for k in r2.clone() {
            for j in r1.clone() {
                let row = self.lat.idx(0, j, k);
                let mut q = [0, j, k];
                if self.axis != 0 {
                    q[self.axis] -= self.shift;
                }
                let lrow = ld[0] * (q[1] + ld[1] * q[2]);
                if self.axis == 0 {
                    for i in r0.clone() {
                        let idx = row + i;
                        let li = lrow + i - self.shift;
                        let d = diff(idx);
                        let s = prof.b[i] * psi[li] + prof.c[i] * d;
                        psi[li] = s;
                        apply(idx, prof.kinv[i] * d + s);
                    }
                } else {
                    let g = if self.axis == 1 { j } else { k };
                    let (b, c, kinv) = (prof.b[g], prof.c[g], prof.kinv[g]);
                    let psi_row = &mut psi[lrow + r0.start..lrow + r0.end];
                    for (off, ps) in psi_row.iter_mut().enumerate() {
                        let idx = row + r0.start + off;
                        let d = diff(idx);
                        let s = b * *ps + c * d;
                        *ps = s;
                        apply(idx, kinv * d + s);
                    }
                }
            }
        }
    }
}
