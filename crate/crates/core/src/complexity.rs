//! Analytic FLOP and memory accounting.
//!
//! Conventions: a complex multiply-accumulate is 2 FLOPs, as is a real
//! multiply-add in the network; MB means 2^20 bytes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::error::Result;
use crate::nn::model::{FftRadNet, ModelSpec};
use crate::nn::module::Module;
use crate::nn::tensor::Scalar;

pub const MB: f64 = (1u64 << 20) as f64;
pub const COMPLEX_MAC: &str = "complex MAC = 2 FLOPs";
pub const REAL_MAC: &str = "real multiply-add = 2 FLOPs";
pub const MEGABYTE: &str = "MB = 2^20 bytes";
/// Average point-cloud size used for the point-cloud AoA row.
pub const POINT_CLOUD_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopReport {
    pub stage: String,
    pub flops: u64,
    /// Input footprint.
    pub bytes: u64,
    /// Trainable parameters, for learned stages.
    pub params: Option<u64>,
    pub assumptions: Vec<String>,
}

impl FlopReport {
    pub fn gflops(&self) -> f64 {
        self.flops as f64 / 1e9
    }

    pub fn megabytes(&self) -> f64 {
        self.bytes as f64 / MB
    }

    /// A pipeline of stages run in sequence: FLOPs and parameters add up,
    /// the input footprint is that of the first stage.
    pub fn compose(stage: &str, parts: &[FlopReport]) -> FlopReport {
        let mut assumptions: Vec<String> = Vec::new();
        for a in parts.iter().flat_map(|p| &p.assumptions) {
            if !assumptions.contains(a) {
                assumptions.push(a.clone());
            }
        }
        let params = parts.iter().filter_map(|p| p.params).reduce(|a, b| a + b);
        FlopReport {
            stage: stage.to_string(),
            flops: parts.iter().map(|p| p.flops).sum(),
            bytes: parts.first().map_or(0, |p| p.bytes),
            params,
            assumptions,
        }
    }
}

/// Beamforming every one of `n_cells` range-Doppler cells against all
/// `b_a x b_e` steering vectors: `2 * n_cells * n_tx * n_rx * b_a * b_e`.
pub fn flops_aoa(cfg: &ValidatedConfig, n_cells: usize, b_a: usize, b_e: usize) -> FlopReport {
    let nv = cfg.virtual_antennas() as u64;
    FlopReport {
        stage: "aoa".into(),
        flops: 2 * n_cells as u64 * nv * b_a as u64 * b_e as u64,
        // one complex64 value per cell and virtual antenna
        bytes: n_cells as u64 * nv * 8,
        params: None,
        assumptions: vec![COMPLEX_MAC.into(), format!("{n_cells} cells x {nv} virtual antennas x {b_a} x {b_e} angles")],
    }
}

pub fn tensor_bytes(shape: &[usize], bytes_per_value: usize) -> u64 {
    shape.iter().map(|&d| d as u64).product::<u64>() * bytes_per_value as u64
}

/// Per-component and total cost of one forward pass on a single frame.
pub fn model_flops_params<T: Scalar>(model: &FftRadNet<T>) -> Result<(FlopReport, Vec<FlopReport>)> {
    let input = tensor_bytes(&model.input_shape(1), 4);
    let parts: Vec<FlopReport> = model
        .cost_breakdown(1)?
        .into_iter()
        .map(|(name, c)| FlopReport { stage: name, flops: c.flops, bytes: 0, params: Some(c.params), assumptions: vec![REAL_MAC.into()] })
        .collect();
    let mut total = FlopReport::compose("fftradnet", &parts);
    total.bytes = input;
    Ok((total, parts))
}

/// Cost of any single module on `input` (batch included in the shape).
pub fn module_flops_params<T: Scalar>(stage: &str, module: &dyn Module<T>, input: [usize; 4]) -> Result<FlopReport> {
    let c = module.cost(input)?;
    Ok(FlopReport { stage: stage.into(), flops: c.flops, bytes: tensor_bytes(&input, 4), params: Some(c.params), assumptions: vec![REAL_MAC.into()] })
}

/// Pipeline comparison rows: the learned RD pipeline (if a model is given)
/// and three explicit-AoA alternatives, with `b_a x b_e` angle bins.
pub fn pipeline_reports(cfg: &ValidatedConfig, b_a: usize, b_e: usize, model: Option<&ModelSpec>) -> Result<Vec<FlopReport>> {
    let (b_r, b_d) = (cfg.b_r, cfg.b_d);
    let mut rows = Vec::new();

    let rd_bytes = tensor_bytes(&[b_r, b_d, 2 * cfg.n_rx], 4);
    let mut rd = match model {
        Some(spec) => {
            let net = FftRadNet::<f32>::new(spec, cfg, 0)?;
            model_flops_params(&net)?.0
        }
        None => FlopReport { stage: String::new(), flops: 0, bytes: 0, params: None, assumptions: vec!["no model given; network cost omitted".into()] },
    };
    rd.stage = "rd-fftradnet".into();
    rd.bytes = rd_bytes;
    rd.assumptions.push("no explicit AoA: angles are learned".into());
    rows.push(rd);

    let mut ra = flops_aoa(cfg, b_r * b_d, b_a, 1);
    ra.stage = "ra-map".into();
    ra.bytes = tensor_bytes(&[b_r, b_a], 4);
    rows.push(ra);

    let mut pc = flops_aoa(cfg, POINT_CLOUD_POINTS, b_a, b_e);
    pc.stage = "point-cloud".into();
    pc.assumptions.push("published estimate for this row is 8 GFLOPS; not reconciled".into());
    rows.push(pc);

    let mut rad = flops_aoa(cfg, b_r * b_d, b_a, b_e);
    rad.stage = "rad-cube".into();
    rad.bytes = tensor_bytes(&[b_r, b_d, b_a], 4);
    rows.push(rad);

    for r in &mut rows {
        if !r.assumptions.iter().any(|a| a == MEGABYTE) {
            r.assumptions.push(MEGABYTE.into());
        }
    }
    Ok(rows)
}

/// Aligned text table: stage, GFLOPS, parameters (millions), input MB.
pub fn render_table(rows: &[FlopReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:>12} {:>12} {:>12}", "stage", "GFLOPS", "params (M)", "input (MB)");
    for r in rows {
        let params = r.params.map_or_else(|| "-".to_string(), |p| format!("{:.3}", p as f64 / 1e6));
        let _ = writeln!(out, "{:<14} {:>12.2} {:>12} {:>12.2}", r.stage, r.gflops(), params, r.megabytes());
    }
    let mut notes: Vec<&String> = Vec::new();
    for a in rows.iter().flat_map(|r| &r.assumptions) {
        if !notes.contains(&a) {
            notes.push(a);
        }
    }
    for a in notes {
        let _ = writeln!(out, "  * {a}");
    }
    out
}
