//! Classical signal chain: range-Doppler FFTs, angle correlation, CFAR,
//! point clouds and range-azimuth maps.

mod aoa;
mod cfar;
mod cloud;
mod rd;

pub use aoa::{aoa_correlate, refine_angle, AoaMap, CalibrationMatrix};
pub use cfar::{cfar_detect, CfarParams};
pub use cloud::{build_ra_map, extract_point_cloud, write_point_cloud_csv, RadarPoint, POINT_CLOUD_HEADER};
pub use rd::{range_doppler_transform, RdTensor, WindowKind};
