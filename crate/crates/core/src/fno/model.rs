use std::ops::Range;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hyper::FnoHyperparams;
use super::spectral::SpectralBasis;
use crate::error::{NsoError, Result};
use crate::fields::{Channel, SignalEnsemble, TimeGrid};
use crate::numerics::{gemm, RngStream};

/// Lower bound on the normalization standard deviation.
const STD_FLOOR: f64 = 1e-12;

/// Affine map `v ↦ (v − mean) / std` fitted on the training voltages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            mean: 0.0,
            std: 1.0,
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

/// Fits z-score statistics over every value of the ensemble and returns them
/// with the normalized ensemble.
pub fn normalize_inputs(train_voltage: &SignalEnsemble) -> Result<(Normalization, SignalEnsemble)> {
    let count = train_voltage.values.len();
    if count == 0 {
        return Err(NsoError::Dimension("cannot normalize an empty ensemble".into()));
    }
    let values = &train_voltage.values;
    let rough = values.iter().sum::<f64>() / count as f64;
    // Second pass removes the rounding bias of the first.
    let mean = rough + values.iter().map(|v| v - rough).sum::<f64>() / count as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    let norm = Normalization {
        mean,
        std: var.sqrt().max(STD_FLOOR),
    };
    let mut out = train_voltage.clone();
    out.values.mapv_inplace(|v| norm.apply(v));
    Ok((norm, out))
}

/// Parameter offsets of one spectral layer inside the flat vector.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LayerLayout {
    pub w: Range<usize>,
    pub b: Range<usize>,
    pub rr: Range<usize>,
    pub ri: Range<usize>,
}

/// Offsets of every parameter block in the flat vector.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layout {
    pub lift_w: Range<usize>,
    pub lift_b: Range<usize>,
    pub layers: Vec<LayerLayout>,
    pub proj_w: Range<usize>,
    pub proj_b: Range<usize>,
    pub out_w: Range<usize>,
    pub out_b: Range<usize>,
    pub len: usize,
}

impl Layout {
    pub fn new(hp: &FnoHyperparams) -> Self {
        let c = hp.width;
        let mut at = 0;
        let mut take = |k: usize| {
            let r = at..at + k;
            at += k;
            r
        };
        let lift_w = take(c * 2);
        let lift_b = take(c);
        let layers = (0..hp.layers)
            .map(|_| LayerLayout {
                w: take(c * c),
                b: take(c),
                rr: take(hp.modes * c * c),
                ri: take(hp.modes * c * c),
            })
            .collect();
        let proj_w = take(hp.proj_width * c);
        let proj_b = take(hp.proj_width);
        let out_w = take(hp.out_channels * hp.proj_width);
        let out_b = take(hp.out_channels);
        Self {
            lift_w,
            lift_b,
            layers,
            proj_w,
            proj_b,
            out_w,
            out_b,
            len: at,
        }
    }

    /// Named blocks in storage order.
    pub fn blocks(&self) -> Vec<(String, Range<usize>)> {
        let mut out = vec![
            ("lift.weight".to_string(), self.lift_w.clone()),
            ("lift.bias".to_string(), self.lift_b.clone()),
        ];
        for (k, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{k}.local.weight"), l.w.clone()));
            out.push((format!("layer{k}.local.bias"), l.b.clone()));
            out.push((format!("layer{k}.spectral.real"), l.rr.clone()));
            out.push((format!("layer{k}.spectral.imag"), l.ri.clone()));
        }
        out.push(("proj.weight".to_string(), self.proj_w.clone()));
        out.push(("proj.bias".to_string(), self.proj_b.clone()));
        out.push(("out.weight".to_string(), self.out_w.clone()));
        out.push(("out.bias".to_string(), self.out_b.clone()));
        out
    }
}

/// Network parameters, architecture and the frozen input normalization.
///
/// Weight matrices are row-major `out × in`; spectral weights are stored as
/// `modes × out × in` real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct FnoModel {
    pub hp: FnoHyperparams,
    pub norm: Normalization,
    pub params: Vec<f64>,
}

impl FnoModel {
    /// All-zero parameters.
    pub fn zeros(hp: &FnoHyperparams, norm: Normalization) -> Result<Self> {
        hp.validate()?;
        Ok(Self {
            hp: hp.clone(),
            norm,
            params: vec![0.0; Layout::new(hp).len],
        })
    }

    /// Dense weights and biases uniform in `±1/√fan_in`; spectral weights
    /// uniform in `[0, 1/width²)`.
    pub fn init(hp: &FnoHyperparams, norm: Normalization, rng: &RngStream) -> Result<Self> {
        let mut model = Self::zeros(hp, norm)?;
        let layout = model.layout();
        let mut g = rng.clone();
        let c = hp.width;
        let mut fill = |params: &mut [f64], r: &Range<usize>, lo: f64, hi: f64| {
            for p in &mut params[r.clone()] {
                *p = g.random_range(lo..hi);
            }
        };
        let dense = |fan_in: usize| 1.0 / (fan_in as f64).sqrt();
        let p = &mut model.params;
        fill(p, &layout.lift_w, -dense(2), dense(2));
        fill(p, &layout.lift_b, -dense(2), dense(2));
        let spectral_scale = 1.0 / (c * c) as f64;
        for l in &layout.layers {
            fill(p, &l.w, -dense(c), dense(c));
            fill(p, &l.b, -dense(c), dense(c));
            fill(p, &l.rr, 0.0, spectral_scale);
            fill(p, &l.ri, 0.0, spectral_scale);
        }
        fill(p, &layout.proj_w, -dense(c), dense(c));
        fill(p, &layout.proj_b, -dense(c), dense(c));
        let pw = hp.proj_width;
        fill(p, &layout.out_w, -dense(pw), dense(pw));
        fill(p, &layout.out_b, -dense(pw), dense(pw));
        Ok(model)
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(&self.hp)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// `(name, values)` for every parameter block in storage order.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        self.layout()
            .blocks()
            .into_iter()
            .map(|(name, r)| (name, &self.params[r]))
            .collect()
    }

    /// Mutable view of one named block.
    pub fn block_mut(&mut self, name: &str) -> Result<&mut [f64]> {
        let range = self
            .layout()
            .blocks()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r)
            .ok_or_else(|| NsoError::Lookup {
                kind: "parameter block",
                name: name.to_string(),
            })?;
        Ok(&mut self.params[range])
    }

    pub fn basis(&self, n: usize) -> Result<SpectralBasis> {
        SpectralBasis::new(n, self.hp.modes)
    }

    /// Mean squared error and its gradient on one batch. `voltage` is raw
    /// (un-normalized); `targets` holds `out_channels` arrays of `B × n`.
    pub fn loss_and_grad(
        &self,
        voltage: &Array2<f64>,
        grid: &TimeGrid,
        targets: &[&Array2<f64>],
    ) -> Result<(f64, Vec<f64>)> {
        let basis = self.basis(grid.len())?;
        let mut ws = Workspace::new(&self.hp, voltage.nrows(), grid.len());
        self.load_inputs(&mut ws, voltage, grid)?;
        self.forward_ws(&basis, &mut ws);
        let (loss, dout) = squared_error(&ws, targets)?;
        let mut grad = vec![0.0; self.params.len()];
        self.backward_ws(&basis, &mut ws, &dout, &mut grad);
        Ok((loss, grad))
    }

    pub(crate) fn load_inputs(
        &self,
        ws: &mut Workspace,
        voltage: &Array2<f64>,
        grid: &TimeGrid,
    ) -> Result<()> {
        let (b, n) = voltage.dim();
        if n != grid.len() || b != ws.b || n != ws.n {
            return Err(NsoError::Dimension(format!(
                "batch of {b}x{n} does not match workspace {}x{} / grid {}",
                ws.b,
                ws.n,
                grid.len()
            )));
        }
        let bn = b * n;
        for (dst, v) in ws.input[..bn].iter_mut().zip(voltage.iter()) {
            *dst = self.norm.apply(*v);
        }
        for (r, chunk) in ws.input[bn..].chunks_mut(n).enumerate() {
            debug_assert!(r < b);
            chunk.copy_from_slice(grid.points());
        }
        Ok(())
    }

    /// Forward pass; leaves every intermediate needed by the adjoint in `ws`.
    pub(crate) fn forward_ws(&self, basis: &SpectralBasis, ws: &mut Workspace) {
        let hp = &self.hp;
        let layout = self.layout();
        let p = &self.params;
        let (c, b, n, modes) = (hp.width, ws.b, ws.n, hp.modes);
        let (bn, cb) = (b * n, c * b);
        let act = hp.activation;

        gemm(
            c, 2, bn, 1.0, &p[layout.lift_w.clone()], 2, 1, &ws.input, bn, 1, 0.0, &mut ws.us[0], bn, 1,
        );
        add_bias(&mut ws.us[0], &p[layout.lift_b.clone()], bn);

        for (k, l) in layout.layers.iter().enumerate() {
            let (head, tail) = ws.us.split_at_mut(k + 1);
            let (prev, next) = (&head[k], &mut tail[0]);
            let (xr, xi) = (&mut ws.xr[k], &mut ws.xi[k]);
            // Forward transform into (mode, channel, sample) layout.
            gemm(cb, n, modes, 1.0, prev, n, 1, &basis.fc, modes, 1, 0.0, xr, 1, cb);
            gemm(cb, n, modes, 1.0, prev, n, 1, &basis.fs, modes, 1, 0.0, xi, 1, cb);
            let (rr, ri) = (&p[l.rr.clone()], &p[l.ri.clone()]);
            for m in 0..modes {
                let w = m * c * c..(m + 1) * c * c;
                let x = m * cb..(m + 1) * cb;
                let (rr_m, ri_m) = (&rr[w.clone()], &ri[w]);
                let (xr_m, xi_m) = (&xr[x.clone()], &xi[x.clone()]);
                let yr_m = &mut ws.yr[x.clone()];
                gemm(c, c, b, 1.0, rr_m, c, 1, xr_m, b, 1, 0.0, yr_m, b, 1);
                gemm(c, c, b, -1.0, ri_m, c, 1, xi_m, b, 1, 1.0, yr_m, b, 1);
                let yi_m = &mut ws.yi[x];
                gemm(c, c, b, 1.0, ri_m, c, 1, xr_m, b, 1, 0.0, yi_m, b, 1);
                gemm(c, c, b, 1.0, rr_m, c, 1, xi_m, b, 1, 1.0, yi_m, b, 1);
            }
            gemm(cb, modes, n, 1.0, &ws.yr, 1, cb, &basis.gc, n, 1, 0.0, next, n, 1);
            gemm(cb, modes, n, 1.0, &ws.yi, 1, cb, &basis.gs, n, 1, 1.0, next, n, 1);
            gemm(c, c, bn, 1.0, &p[l.w.clone()], c, 1, prev, bn, 1, 1.0, next, bn, 1);
            add_bias(next, &p[l.b.clone()], bn);
            next.iter_mut().for_each(|z| *z = act.apply(*z));
        }

        let last = &ws.us[hp.layers];
        let pw = hp.proj_width;
        gemm(pw, c, bn, 1.0, &p[layout.proj_w.clone()], c, 1, last, bn, 1, 0.0, &mut ws.hidden, bn, 1);
        add_bias(&mut ws.hidden, &p[layout.proj_b.clone()], bn);
        ws.hidden.iter_mut().for_each(|z| *z = act.apply(*z));
        let oc = hp.out_channels;
        gemm(oc, pw, bn, 1.0, &p[layout.out_w.clone()], pw, 1, &ws.hidden, bn, 1, 0.0, &mut ws.out, bn, 1);
        add_bias(&mut ws.out, &p[layout.out_b.clone()], bn);
    }

    /// Reverse pass: writes `∂loss/∂params` into `grad` given `dout`, the
    /// loss gradient with respect to the output (`out_channels × B × n`).
    pub(crate) fn backward_ws(
        &self,
        basis: &SpectralBasis,
        ws: &mut Workspace,
        dout: &[f64],
        grad: &mut [f64],
    ) {
        let hp = &self.hp;
        let layout = self.layout();
        let p = &self.params;
        let (c, b, n, modes) = (hp.width, ws.b, ws.n, hp.modes);
        let (bn, cb, pw, oc) = (b * n, c * b, hp.proj_width, hp.out_channels);
        let act = hp.activation;

        gemm(oc, bn, pw, 1.0, dout, bn, 1, &ws.hidden, 1, bn, 0.0, &mut grad[layout.out_w.clone()], pw, 1);
        row_sums(dout, bn, &mut grad[layout.out_b.clone()]);
        let dh = &mut ws.dh;
        gemm(pw, oc, bn, 1.0, &p[layout.out_w.clone()], 1, pw, dout, bn, 1, 0.0, dh, bn, 1);
        for (d, h) in dh.iter_mut().zip(&ws.hidden) {
            *d *= act.slope_from_output(*h);
        }
        let last = &ws.us[hp.layers];
        gemm(pw, bn, c, 1.0, dh, bn, 1, last, 1, bn, 0.0, &mut grad[layout.proj_w.clone()], c, 1);
        row_sums(dh, bn, &mut grad[layout.proj_b.clone()]);
        gemm(c, pw, bn, 1.0, &p[layout.proj_w.clone()], 1, c, dh, bn, 1, 0.0, &mut ws.du, bn, 1);

        for (k, l) in layout.layers.iter().enumerate().rev() {
            // du holds ∂/∂u^(k+1); turn it into ∂/∂z in place.
            for (d, u) in ws.du.iter_mut().zip(&ws.us[k + 1]) {
                *d *= act.slope_from_output(*u);
            }
            let dz = &ws.du;
            let prev = &ws.us[k];
            gemm(c, bn, c, 1.0, dz, bn, 1, prev, 1, bn, 0.0, &mut grad[l.w.clone()], c, 1);
            row_sums(dz, bn, &mut grad[l.b.clone()]);

            gemm(cb, n, modes, 1.0, dz, n, 1, &basis.gc, 1, n, 0.0, &mut ws.yr, 1, cb);
            gemm(cb, n, modes, 1.0, dz, n, 1, &basis.gs, 1, n, 0.0, &mut ws.yi, 1, cb);
            let (rr, ri) = (&p[l.rr.clone()], &p[l.ri.clone()]);
            let (xr, xi) = (&ws.xr[k], &ws.xi[k]);
            for m in 0..modes {
                let w = m * c * c..(m + 1) * c * c;
                let x = m * cb..(m + 1) * cb;
                let (dyr, dyi) = (&ws.yr[x.clone()], &ws.yi[x.clone()]);
                let (xr_m, xi_m) = (&xr[x.clone()], &xi[x.clone()]);
                {
                    let g_rr = &mut grad[l.rr.start + w.start..l.rr.start + w.end];
                    gemm(c, b, c, 1.0, dyr, b, 1, xr_m, 1, b, 0.0, g_rr, c, 1);
                    gemm(c, b, c, 1.0, dyi, b, 1, xi_m, 1, b, 1.0, g_rr, c, 1);
                }
                {
                    let g_ri = &mut grad[l.ri.start + w.start..l.ri.start + w.end];
                    gemm(c, b, c, -1.0, dyr, b, 1, xi_m, 1, b, 0.0, g_ri, c, 1);
                    gemm(c, b, c, 1.0, dyi, b, 1, xr_m, 1, b, 1.0, g_ri, c, 1);
                }
                let (rr_m, ri_m) = (&rr[w.clone()], &ri[w]);
                let dxr = &mut ws.dxr[x.clone()];
                gemm(c, c, b, 1.0, rr_m, 1, c, dyr, b, 1, 0.0, dxr, b, 1);
                gemm(c, c, b, 1.0, ri_m, 1, c, dyi, b, 1, 1.0, dxr, b, 1);
                let dxi = &mut ws.dxi[x];
                gemm(c, c, b, -1.0, ri_m, 1, c, dyr, b, 1, 0.0, dxi, b, 1);
                gemm(c, c, b, 1.0, rr_m, 1, c, dyi, b, 1, 1.0, dxi, b, 1);
            }

            let du_prev = &mut ws.du_next;
            gemm(c, c, bn, 1.0, &p[l.w.clone()], 1, c, dz, bn, 1, 0.0, du_prev, bn, 1);
            gemm(cb, modes, n, 1.0, &ws.dxr, 1, cb, &basis.fc, 1, modes, 1.0, du_prev, n, 1);
            gemm(cb, modes, n, 1.0, &ws.dxi, 1, cb, &basis.fs, 1, modes, 1.0, du_prev, n, 1);
            std::mem::swap(&mut ws.du, &mut ws.du_next);
        }

        gemm(c, bn, 2, 1.0, &ws.du, bn, 1, &ws.input, 1, bn, 0.0, &mut grad[layout.lift_w.clone()], 2, 1);
        row_sums(&ws.du, bn, &mut grad[layout.lift_b.clone()]);
    }
}

/// Scratch buffers for one batch shape. Activations are `channels × B × n`
/// row-major; spectral coefficients are `modes × channels × B`.
pub(crate) struct Workspace {
    pub b: usize,
    pub n: usize,
    pub input: Vec<f64>,
    pub us: Vec<Vec<f64>>,
    pub xr: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    pub yr: Vec<f64>,
    pub yi: Vec<f64>,
    pub hidden: Vec<f64>,
    pub out: Vec<f64>,
    pub dh: Vec<f64>,
    pub du: Vec<f64>,
    pub du_next: Vec<f64>,
    pub dxr: Vec<f64>,
    pub dxi: Vec<f64>,
}

impl Workspace {
    pub fn new(hp: &FnoHyperparams, b: usize, n: usize) -> Self {
        let act = hp.width * b * n;
        let spec = hp.modes * hp.width * b;
        Self {
            b,
            n,
            input: vec![0.0; 2 * b * n],
            us: vec![vec![0.0; act]; hp.layers + 1],
            xr: vec![vec![0.0; spec]; hp.layers],
            xi: vec![vec![0.0; spec]; hp.layers],
            yr: vec![0.0; spec],
            yi: vec![0.0; spec],
            hidden: vec![0.0; hp.proj_width * b * n],
            out: vec![0.0; hp.out_channels * b * n],
            dh: vec![0.0; hp.proj_width * b * n],
            du: vec![0.0; act],
            du_next: vec![0.0; act],
            dxr: vec![0.0; spec],
            dxi: vec![0.0; spec],
        }
    }
}

fn add_bias(x: &mut [f64], bias: &[f64], stride: usize) {
    for (chunk, b) in x.chunks_mut(stride).zip(bias) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn row_sums(x: &[f64], stride: usize, out: &mut [f64]) {
    for (chunk, o) in x.chunks(stride).zip(out.iter_mut()) {
        *o = chunk.iter().sum();
    }
}

/// Sum of squared errors of the workspace output against the targets.
pub(crate) fn squared_error_sum(ws: &Workspace, targets: &[&Array2<f64>]) -> Result<f64> {
    let bn = ws.b * ws.n;
    check_targets(ws, targets)?;
    let mut total = 0.0;
    for (ch, t) in targets.iter().enumerate() {
        let out = &ws.out[ch * bn..(ch + 1) * bn];
        total += out
            .iter()
            .zip(t.iter())
            .map(|(o, y)| (o - y) * (o - y))
            .sum::<f64>();
    }
    Ok(total)
}

/// Mean squared error and its gradient with respect to the output.
pub(crate) fn squared_error(ws: &Workspace, targets: &[&Array2<f64>]) -> Result<(f64, Vec<f64>)> {
    let bn = ws.b * ws.n;
    check_targets(ws, targets)?;
    let count = (bn * targets.len()) as f64;
    let mut dout = vec![0.0; ws.out.len()];
    for (ch, t) in targets.iter().enumerate() {
        let range = ch * bn..(ch + 1) * bn;
        for ((d, o), y) in dout[range.clone()].iter_mut().zip(&ws.out[range]).zip(t.iter()) {
            *d = 2.0 * (o - y) / count;
        }
    }
    Ok((squared_error_sum(ws, targets)? / count, dout))
}

fn check_targets(ws: &Workspace, targets: &[&Array2<f64>]) -> Result<()> {
    if targets.len() * ws.b * ws.n != ws.out.len()
        || targets.iter().any(|t| t.dim() != (ws.b, ws.n))
    {
        return Err(NsoError::Dimension(format!(
            "expected {} target arrays of {}x{}",
            ws.out.len() / (ws.b * ws.n),
            ws.b,
            ws.n
        )));
    }
    Ok(())
}

/// Network output for one voltage row: `out_channels` consecutive blocks of
/// `n` values.
pub fn forward(model: &FnoModel, v: &[f64], grid: &TimeGrid) -> Result<Vec<f64>> {
    if v.len() != grid.len() {
        return Err(NsoError::Dimension(format!(
            "voltage row has {} points, grid has {}",
            v.len(),
            grid.len()
        )));
    }
    let basis = model.basis(grid.len())?;
    let row = Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("shape matches");
    let mut ws = Workspace::new(&model.hp, 1, grid.len());
    model.load_inputs(&mut ws, &row, grid)?;
    model.forward_ws(&basis, &mut ws);
    Ok(ws.out)
}

/// Model output on an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub displacement: SignalEnsemble,
    pub latent: Option<SignalEnsemble>,
}

impl Prediction {
    pub fn channels(&self) -> Vec<&SignalEnsemble> {
        std::iter::once(&self.displacement).chain(self.latent.as_ref()).collect()
    }
}

/// Rows processed together by [`predict`] and evaluation passes.
const PREDICT_CHUNK: usize = 100;

/// Apply the model to every row, in parallel over fixed row chunks.
pub fn predict(model: &FnoModel, voltage: &SignalEnsemble) -> Result<Prediction> {
    let grid = &voltage.grid;
    let n = grid.len();
    let basis = model.basis(n)?;
    let rows = voltage.rows();
    let oc = model.hp.out_channels;
    let starts: Vec<usize> = (0..rows).step_by(PREDICT_CHUNK).collect();
    let chunks: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&s| {
            let e = (s + PREDICT_CHUNK).min(rows);
            let block = voltage.values.slice(ndarray::s![s..e, ..]).to_owned();
            let mut ws = Workspace::new(&model.hp, e - s, n);
            model.load_inputs(&mut ws, &block, grid)?;
            model.forward_ws(&basis, &mut ws);
            Ok(ws.out)
        })
        .collect::<Result<_>>()?;
    let mut outs: Vec<Array2<f64>> = (0..oc).map(|_| Array2::zeros((rows, n))).collect();
    for (&s, out) in starts.iter().zip(&chunks) {
        let b = out.len() / (oc * n);
        for (ch, arr) in outs.iter_mut().enumerate() {
            let src = &out[ch * b * n..(ch + 1) * b * n];
            for r in 0..b {
                arr.row_mut(s + r)
                    .as_slice_mut()
                    .expect("standard layout")
                    .copy_from_slice(&src[r * n..(r + 1) * n]);
            }
        }
    }
    let mut outs = outs.into_iter();
    let displacement =
        SignalEnsemble::new(grid.clone(), outs.next().expect("one channel"), Channel::Displacement)?;
    let latent = outs
        .next()
        .map(|v| SignalEnsemble::new(grid.clone(), v, Channel::Latent))
        .transpose()?;
    Ok(Prediction {
        displacement,
        latent,
    })
}

/// Mean squared error of the model over paired voltage / target rows,
/// averaged over rows, time points and output channels.
pub fn loss(model: &FnoModel, voltage: &SignalEnsemble, targets: &[&SignalEnsemble]) -> Result<f64> {
    if targets.len() != model.hp.out_channels
        || targets
            .iter()
            .any(|t| t.grid != voltage.grid || t.rows() != voltage.rows())
    {
        return Err(NsoError::Dimension(
            "loss targets must match the voltage ensemble and output channels".into(),
        ));
    }
    if voltage.rows() == 0 {
        return Err(NsoError::Dimension("loss needs a nonempty batch".into()));
    }
    let grid = &voltage.grid;
    let n = grid.len();
    let basis = model.basis(n)?;
    let rows = voltage.rows();
    let mut total = 0.0;
    for s in (0..rows).step_by(PREDICT_CHUNK) {
        let e = (s + PREDICT_CHUNK).min(rows);
        let block = voltage.values.slice(ndarray::s![s..e, ..]).to_owned();
        let tblocks: Vec<Array2<f64>> = targets
            .iter()
            .map(|t| t.values.slice(ndarray::s![s..e, ..]).to_owned())
            .collect();
        let trefs: Vec<&Array2<f64>> = tblocks.iter().collect();
        let mut ws = Workspace::new(&model.hp, e - s, n);
        model.load_inputs(&mut ws, &block, grid)?;
        model.forward_ws(&basis, &mut ws);
        total += squared_error_sum(&ws, &trefs)?;
    }
    Ok(total / (rows * n * targets.len()) as f64)
}
