//! Pre-encoder width sweep: accuracy against the memory of the first
//! feature map.

use std::io::Write;

use serde::Serialize;

use crate::complexity::tensor_bytes;
use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_model, EvalParams};
use crate::nn::{train_model, ModelSpec, Sample, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AblationRow {
    pub channels: usize,
    pub f1: f64,
    pub ap: f64,
    pub ar: f64,
    /// f32 bytes of one `(channels, b_r, b_d)` pre-encoder output.
    pub pre_encoder_bytes: u64,
}

pub fn pre_encoder_bytes(cfg: &ValidatedConfig, channels: usize) -> u64 {
    tensor_bytes(&[channels, cfg.b_r, cfg.b_d], 4)
}

/// Trains one model per entry of `channels` on `train` and scores it on
/// `held_out`. Rows come back in the order of `channels`.
#[allow(clippy::too_many_arguments)]
pub fn ablate(
    cfg: &ValidatedConfig,
    base: &ModelSpec,
    tc: &TrainConfig,
    train: &[Sample],
    held_out: &[Sample],
    channels: &[usize],
    params: &EvalParams,
    mut on_row: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(channels.len());
    for &c in channels {
        let spec = ModelSpec { pre_encoder_out_channels: c, ..base.clone() };
        let mut trainer = train_model(&spec, cfg, tc.clone(), train, |_, _| {})?;
        let (r, _) = evaluate_model(&mut trainer.model, held_out, params)?;
        let row = AblationRow { channels: c, f1: r.f1, ap: r.ap, ar: r.ar, pre_encoder_bytes: pre_encoder_bytes(cfg, c) };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_ablation_csv(rows: &[AblationRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RadarConfig;

    #[test]
    fn bytes_scale_with_channels() {
        let cfg = RadarConfig::paper().validate().unwrap();
        assert_eq!(pre_encoder_bytes(&cfg, 32), 16 * 1024 * 1024);
        assert_eq!(pre_encoder_bytes(&cfg, 0), 0);
    }

    #[test]
    fn csv_layout() {
        let rows = [AblationRow { channels: 24, f1: 1.5, ap: 2.0, ar: 6.0, pre_encoder_bytes: 96 }];
        let mut buf = Vec::new();
        write_ablation_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "channels,f1,ap,ar,pre_encoder_bytes\n24,1.5,2.0,6.0,96\n");
    }
}
