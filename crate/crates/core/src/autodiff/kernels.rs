//! Forward and adjoint kernels for the fused multivector operations.
//!
//! Layout conventions: a multivector tensor is `[batch][channel][blade]`
//! row-major; `S = 2ⁿ` blades per channel and `K = n + 1` grades.

use crate::clifford::CayleyTable;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weights repeated per blade: `out[(co·p + ci)·S + r] = w[co, ci, grade(r)]`.
fn expand_weights(t: &CayleyTable, w: &[f64], p: usize, q: usize) -> Vec<f64> {
    let s = t.size();
    let k = t.dim() + 1;
    let grades = t.grades();
    let mut out = Vec::with_capacity(q * p * s);
    for pair in 0..q * p {
        let wrow = &w[pair * k..(pair + 1) * k];
        out.extend(grades.iter().map(|&g| wrow[g]));
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y[b,co,r] = Σ_ci w[co,ci,grade(r)] x[b,ci,r] + [r = 0] bias[co]`.
pub(crate) fn linear_forward(
    t: &CayleyTable,
    x: &[f64],
    w: &[f64],
    bias: Option<&[f64]>,
    batch: usize,
    p: usize,
    q: usize,
) -> Vec<f64> {
    let s = t.size();
    let wexp = expand_weights(t, w, p, q);
    let mut y = vec![0.0; batch * q * s];
    for b in 0..batch {
        let xb = &x[b * p * s..(b + 1) * p * s];
        for co in 0..q {
            let wrow = &wexp[co * p * s..(co + 1) * p * s];
            let yrow = &mut y[(b * q + co) * s..(b * q + co + 1) * s];
            if s == 1 {
                yrow[0] = dot(wrow, xb);
            } else {
                for (wc, xc) in wrow.chunks_exact(s).zip(xb.chunks_exact(s)) {
                    for r in 0..s {
                        yrow[r] += wc[r] * xc[r];
                    }
                }
            }
            if let Some(bias) = bias {
                yrow[0] += bias[co];
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    t: &CayleyTable,
    x: &[f64],
    w: &[f64],
    gy: &[f64],
    batch: usize,
    p: usize,
    q: usize,
    gx: Option<&mut [f64]>,
    gw: Option<&mut [f64]>,
    gbias: Option<&mut [f64]>,
) {
    let s = t.size();
    let k = t.dim() + 1;
    let grades = t.grades();
    if let Some(gx) = gx {
        let wexp = expand_weights(t, w, p, q);
        for b in 0..batch {
            let gxb = &mut gx[b * p * s..(b + 1) * p * s];
            for co in 0..q {
                let gyrow = &gy[(b * q + co) * s..(b * q + co + 1) * s];
                let wrow = &wexp[co * p * s..(co + 1) * p * s];
                if s == 1 {
                    let g = gyrow[0];
                    if g != 0.0 {
                        for (d, &wv) in gxb.iter_mut().zip(wrow) {
                            *d += wv * g;
                        }
                    }
                } else {
                    for (gc, wc) in gxb.chunks_exact_mut(s).zip(wrow.chunks_exact(s)) {
                        for r in 0..s {
                            gc[r] += wc[r] * gyrow[r];
                        }
                    }
                }
            }
        }
    }
    if let Some(gw) = gw {
        let mut gwexp = vec![0.0; q * p * s];
        for b in 0..batch {
            let xb = &x[b * p * s..(b + 1) * p * s];
            for co in 0..q {
                let gyrow = &gy[(b * q + co) * s..(b * q + co + 1) * s];
                let grow = &mut gwexp[co * p * s..(co + 1) * p * s];
                if s == 1 {
                    let g = gyrow[0];
                    if g != 0.0 {
                        for (d, &xv) in grow.iter_mut().zip(xb) {
                            *d += g * xv;
                        }
                    }
                } else {
                    for (gc, xc) in grow.chunks_exact_mut(s).zip(xb.chunks_exact(s)) {
                        for r in 0..s {
                            gc[r] += gyrow[r] * xc[r];
                        }
                    }
                }
            }
        }
        for pair in 0..q * p {
            let src = &gwexp[pair * s..(pair + 1) * s];
            let dst = &mut gw[pair * k..(pair + 1) * k];
            for r in 0..s {
                dst[grades[r]] += src[r];
            }
        }
    }
    if let Some(gbias) = gbias {
        for b in 0..batch {
            for co in 0..q {
                gbias[co] += gy[(b * q + co) * s];
            }
        }
    }
}

/// Grade-pair products `P[pair, r] = Σ sign · x[a] z[b]` over all
/// `e_a e_b = sign e_r` with `(grade a, grade b) = pair`.
fn grade_pair_products(t: &CayleyTable, x: &[f64], z: &[f64], out: &mut [f64]) {
    let s = t.size();
    out.iter_mut().for_each(|v| *v = 0.0);
    for term in t.terms() {
        out[term.pair * s + term.result] += term.sign * x[term.a] * z[term.b];
    }
}

/// `(pair, blade)` combinations that can be non-zero, in blade order.
fn pair_blade_combos(t: &CayleyTable) -> Vec<(usize, usize)> {
    (0..t.size())
        .flat_map(|r| t.pairs_for_blade(r).iter().map(move |&pair| (pair, r)))
        .collect()
}

/// Fully connected weights `[q][p][slot]` as `[p][slot][q]`.
fn transpose_mix(w: &[f64], p: usize, q: usize, slots: usize) -> Vec<f64> {
    let mut wt = vec![0.0; w.len()];
    for co in 0..q {
        for ci in 0..p {
            let src = &w[(co * p + ci) * slots..(co * p + ci + 1) * slots];
            for (slot, &v) in src.iter().enumerate() {
                wt[(ci * slots + slot) * q + co] = v;
            }
        }
    }
    wt
}

/// Weighted grade-pair geometric product layer.
///
/// Fully connected: `y[co]⁽ᵏ⁾ = Σ_ci Σ_ij w[co,ci,i,j,k] (x[ci]⁽ⁱ⁾ z[ci]⁽ʲ⁾)⁽ᵏ⁾`,
/// weights `[q][p][(n+1)²][n+1]`. Plain (`q == p`): `y[c]` uses only `x[c], z[c]`,
/// weights `[p][(n+1)²][n+1]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gp_layer_forward(
    t: &CayleyTable,
    x: &[f64],
    z: &[f64],
    w: &[f64],
    batch: usize,
    p: usize,
    q: usize,
    fully_connected: bool,
) -> Vec<f64> {
    if !fully_connected {
        return gp_plain_forward(t, x, z, w, batch, p);
    }
    let s = t.size();
    let k = t.dim() + 1;
    let slots = k * k * k;
    let grades = t.grades();
    let combos = pair_blade_combos(t);
    let wt = transpose_mix(w, p, q, slots);
    let mut y = vec![0.0; batch * q * s];
    let mut prod = vec![0.0; k * k * s];
    // [blade][co]
    let mut acc = vec![0.0; s * q];
    for b in 0..batch {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for ci in 0..p {
            let off = (b * p + ci) * s;
            grade_pair_products(t, &x[off..off + s], &z[off..off + s], &mut prod);
            for &(pair, r) in &combos {
                let pv = prod[pair * s + r];
                if pv == 0.0 {
                    continue;
                }
                let slot = pair * k + grades[r];
                let wrow = &wt[(ci * slots + slot) * q..(ci * slots + slot + 1) * q];
                for (a, &wv) in acc[r * q..(r + 1) * q].iter_mut().zip(wrow) {
                    *a += pv * wv;
                }
            }
        }
        for co in 0..q {
            let yrow = &mut y[(b * q + co) * s..(b * q + co + 1) * s];
            for (r, yv) in yrow.iter_mut().enumerate() {
                *yv = acc[r * q + co];
            }
        }
    }
    y
}

fn gp_plain_forward(t: &CayleyTable, x: &[f64], z: &[f64], w: &[f64], batch: usize, p: usize) -> Vec<f64> {
    let s = t.size();
    let k = t.dim() + 1;
    let pairs = k * k;
    let grades = t.grades();
    let mut y = vec![0.0; batch * p * s];
    let mut prod = vec![0.0; pairs * s];
    for b in 0..batch {
        for c in 0..p {
            let off = (b * p + c) * s;
            grade_pair_products(t, &x[off..off + s], &z[off..off + s], &mut prod);
            let wbase = c * pairs * k;
            for r in 0..s {
                let g = grades[r];
                y[off + r] = t
                    .pairs_for_blade(r)
                    .iter()
                    .map(|&pair| w[wbase + pair * k + g] * prod[pair * s + r])
                    .sum();
            }
        }
    }
    y
}

/// Accumulates `∂/∂x` and `∂/∂z` of one channel from the grade-pair adjoints.
fn scatter_pair_adjoints(t: &CayleyTable, gprod: &[f64], xs: &[f64], zs: &[f64], gxs: &mut [f64], gzs: &mut [f64]) {
    let s = t.size();
    for term in t.terms() {
        let gp = gprod[term.pair * s + term.result];
        if gp != 0.0 {
            gxs[term.a] += term.sign * gp * zs[term.b];
            gzs[term.b] += term.sign * gp * xs[term.a];
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn gp_layer_backward(
    t: &CayleyTable,
    x: &[f64],
    z: &[f64],
    w: &[f64],
    gy: &[f64],
    batch: usize,
    p: usize,
    q: usize,
    fully_connected: bool,
    gx: &mut [f64],
    gz: &mut [f64],
    gw: Option<&mut [f64]>,
) {
    if !fully_connected {
        return gp_plain_backward(t, x, z, w, gy, batch, p, gx, gz, gw);
    }
    let s = t.size();
    let k = t.dim() + 1;
    let slots = k * k * k;
    let grades = t.grades();
    let combos = pair_blade_combos(t);
    let wt = transpose_mix(w, p, q, slots);
    let mut gwt = gw.as_ref().map(|_| vec![0.0; wt.len()]);
    let mut prod = vec![0.0; k * k * s];
    let mut gprod = vec![0.0; k * k * s];
    // [blade][co]
    let mut gyt = vec![0.0; s * q];
    for b in 0..batch {
        for co in 0..q {
            for r in 0..s {
                gyt[r * q + co] = gy[(b * q + co) * s + r];
            }
        }
        let live: Vec<bool> = (0..s).map(|r| gyt[r * q..(r + 1) * q].iter().any(|&g| g != 0.0)).collect();
        for ci in 0..p {
            let off = (b * p + ci) * s;
            let xs = &x[off..off + s];
            let zs = &z[off..off + s];
            grade_pair_products(t, xs, zs, &mut prod);
            gprod.iter_mut().for_each(|v| *v = 0.0);
            for &(pair, r) in &combos {
                if !live[r] {
                    continue;
                }
                let slot = pair * k + grades[r];
                let row = (ci * slots + slot) * q..(ci * slots + slot + 1) * q;
                let gyrow = &gyt[r * q..(r + 1) * q];
                gprod[pair * s + r] = dot(&wt[row.clone()], gyrow);
                if let Some(gwt) = gwt.as_deref_mut() {
                    let pv = prod[pair * s + r];
                    if pv != 0.0 {
                        for (d, &g) in gwt[row].iter_mut().zip(gyrow) {
                            *d += pv * g;
                        }
                    }
                }
            }
            let (gxs, gzs) = (&mut gx[off..off + s], &mut gz[off..off + s]);
            scatter_pair_adjoints(t, &gprod, xs, zs, gxs, gzs);
        }
    }
    if let (Some(gw), Some(gwt)) = (gw, gwt) {
        for co in 0..q {
            for ci in 0..p {
                let dst = &mut gw[(co * p + ci) * slots..(co * p + ci + 1) * slots];
                for (slot, d) in dst.iter_mut().enumerate() {
                    *d += gwt[(ci * slots + slot) * q + co];
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gp_plain_backward(
    t: &CayleyTable,
    x: &[f64],
    z: &[f64],
    w: &[f64],
    gy: &[f64],
    batch: usize,
    p: usize,
    gx: &mut [f64],
    gz: &mut [f64],
    mut gw: Option<&mut [f64]>,
) {
    let s = t.size();
    let k = t.dim() + 1;
    let pairs = k * k;
    let grades = t.grades();
    let mut prod = vec![0.0; pairs * s];
    let mut gprod = vec![0.0; pairs * s];
    for b in 0..batch {
        for c in 0..p {
            let off = (b * p + c) * s;
            let xs = &x[off..off + s];
            let zs = &z[off..off + s];
            grade_pair_products(t, xs, zs, &mut prod);
            gprod.iter_mut().for_each(|v| *v = 0.0);
            let wbase = c * pairs * k;
            for r in 0..s {
                let g = gy[off + r];
                if g == 0.0 {
                    continue;
                }
                for &pair in t.pairs_for_blade(r) {
                    let wi = wbase + pair * k + grades[r];
                    gprod[pair * s + r] += w[wi] * g;
                    if let Some(gw) = gw.as_deref_mut() {
                        gw[wi] += g * prod[pair * s + r];
                    }
                }
            }
            let (gxs, gzs) = (&mut gx[off..off + s], &mut gz[off..off + s]);
            scatter_pair_adjoints(t, &gprod, xs, zs, gxs, gzs);
        }
    }
}

/// Channelwise geometric product of two equally shaped tensors.
pub(crate) fn geometric_product_forward(t: &CayleyTable, a: &[f64], b: &[f64]) -> Vec<f64> {
    let s = t.size();
    let mut y = vec![0.0; a.len()];
    for ((ya, aa), bb) in y.chunks_mut(s).zip(a.chunks(s)).zip(b.chunks(s)) {
        for i in 0..s {
            if aa[i] == 0.0 {
                continue;
            }
            for j in 0..s {
                let (r, sign) = t.entry(i, j);
                ya[r] += sign * aa[i] * bb[j];
            }
        }
    }
    y
}

pub(crate) fn geometric_product_backward(
    t: &CayleyTable,
    a: &[f64],
    b: &[f64],
    gy: &[f64],
    ga: &mut [f64],
    gb: &mut [f64],
) {
    let s = t.size();
    for (chunk, g) in gy.chunks(s).enumerate() {
        let off = chunk * s;
        for i in 0..s {
            for j in 0..s {
                let (r, sign) = t.entry(i, j);
                let gr = g[r];
                if gr == 0.0 {
                    continue;
                }
                ga[off + i] += sign * gr * b[off + j];
                gb[off + j] += sign * gr * a[off + i];
            }
        }
    }
}

/// Per-grade normalization: `x⁽ᵐ⁾ / (σ(φ_m)(q(x⁽ᵐ⁾) − 1) + 1)`.
pub(crate) fn norm_forward(t: &CayleyTable, x: &[f64], phi: &[f64], channels: usize) -> Vec<f64> {
    let s = t.size();
    let k = t.dim() + 1;
    let grades = t.grades();
    let mut y = vec![0.0; x.len()];
    let mut q = vec![0.0; k];
    for (row, (xr, yr)) in x.chunks(s).zip(y.chunks_mut(s)).enumerate() {
        let c = row % channels;
        q.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..s {
            q[grades[r]] += xr[r] * xr[r];
        }
        for r in 0..s {
            let m = grades[r];
            let den = sigmoid(phi[c * k + m]) * (q[m] - 1.0) + 1.0;
            yr[r] = xr[r] / den;
        }
    }
    y
}

pub(crate) fn norm_backward(
    t: &CayleyTable,
    x: &[f64],
    phi: &[f64],
    channels: usize,
    gy: &[f64],
    gx: Option<&mut [f64]>,
    gphi: Option<&mut [f64]>,
) {
    let s = t.size();
    let k = t.dim() + 1;
    let grades = t.grades();
    let mut q = vec![0.0; k];
    let mut dot = vec![0.0; k];
    let mut gx = gx;
    let mut gphi = gphi;
    for (row, (xr, gr)) in x.chunks(s).zip(gy.chunks(s)).enumerate() {
        let c = row % channels;
        q.iter_mut().for_each(|v| *v = 0.0);
        dot.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..s {
            q[grades[r]] += xr[r] * xr[r];
            dot[grades[r]] += gr[r] * xr[r];
        }
        for m in 0..k {
            let sg = sigmoid(phi[c * k + m]);
            let den = sg * (q[m] - 1.0) + 1.0;
            let coef = dot[m] / (den * den);
            if let Some(gphi) = gphi.as_deref_mut() {
                gphi[c * k + m] -= coef * (q[m] - 1.0) * sg * (1.0 - sg);
            }
            if let Some(gx) = gx.as_deref_mut() {
                for r in 0..s {
                    if grades[r] == m {
                        gx[row * s + r] += gr[r] / den - coef * sg * 2.0 * xr[r];
                    }
                }
            }
        }
    }
}

/// Grade-0 ReLU, higher grades gated by `σ(q(x⁽ᵐ⁾))`.
pub(crate) fn activation_forward(t: &CayleyTable, x: &[f64]) -> Vec<f64> {
    let s = t.size();
    let k = t.dim() + 1;
    let grades = t.grades();
    let mut y = vec![0.0; x.len()];
    let mut q = vec![0.0; k];
    for (xr, yr) in x.chunks(s).zip(y.chunks_mut(s)) {
        q.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..s {
            q[grades[r]] += xr[r] * xr[r];
        }
        yr[0] = xr[0].max(0.0);
        for r in 1..s {
            yr[r] = sigmoid(q[grades[r]]) * xr[r];
        }
    }
    y
}

pub(crate) fn activation_backward(t: &CayleyTable, x: &[f64], gy: &[f64], gx: &mut [f64]) {
    let s = t.size();
    let k = t.dim() + 1;
    let grades = t.grades();
    let mut q = vec![0.0; k];
    let mut dot = vec![0.0; k];
    for (row, (xr, gr)) in x.chunks(s).zip(gy.chunks(s)).enumerate() {
        q.iter_mut().for_each(|v| *v = 0.0);
        dot.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..s {
            q[grades[r]] += xr[r] * xr[r];
            dot[grades[r]] += gr[r] * xr[r];
        }
        let gxr = &mut gx[row * s..(row + 1) * s];
        if xr[0] > 0.0 {
            gxr[0] += gr[0];
        }
        for r in 1..s {
            let m = grades[r];
            let gate = sigmoid(q[m]);
            gxr[r] += gate * gr[r] + dot[m] * gate * (1.0 - gate) * 2.0 * xr[r];
        }
    }
}
