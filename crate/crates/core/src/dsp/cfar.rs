use crate::error::{Error, Result};

/// Cell-averaging CFAR parameters. The Doppler (second) axis wraps; the range
/// axis is clipped at its edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarParams {
    pub guard: usize,
    pub train: usize,
    pub scale: f64,
    /// Cells more than this many dB below the map maximum are never kept.
    /// `None` disables the floor.
    pub dynamic_range_db: Option<f64>,
}

impl Default for CfarParams {
    fn default() -> Self {
        Self { guard: 2, train: 4, scale: 10.0, dynamic_range_db: Some(40.0) }
    }
}

impl CfarParams {
    pub fn new(guard: usize, train: usize, scale: f64) -> Self {
        Self { guard, train, scale, dynamic_range_db: None }
    }
}

/// Peak cells `(row, column)` of a `rows x cols` power map.
///
/// A cell is kept when its power exceeds `scale` times the mean of the
/// training ring and it is the strongest cell of its guard window.
pub fn cfar_detect(power: &[f64], rows: usize, cols: usize, p: &CfarParams) -> Result<Vec<(usize, usize)>> {
    if p.guard >= p.train {
        return Err(Error::InvalidCfar(format!("guard {} must be below train {}", p.guard, p.train)));
    }
    if !(p.scale > 1.0) {
        return Err(Error::InvalidCfar(format!("scale {} must exceed 1", p.scale)));
    }
    if power.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!("power map of {} cells for {rows}x{cols}", power.len())));
    }
    let window = 2 * (p.guard + p.train) + 1;
    for axis in [rows, cols] {
        if window > axis {
            return Err(Error::WindowTooLarge { window, axis });
        }
    }
    let floor = match p.dynamic_range_db {
        Some(db) => power.iter().copied().fold(0.0, f64::max) * 10f64.powf(-db / 10.0),
        None => 0.0,
    };
    let (g, outer) = (p.guard as isize, (p.guard + p.train) as isize);
    let at = |r: usize, c: usize| power[r * cols + c];

    let mut peaks = Vec::new();
    for r in 0..rows {
        'cell: for c in 0..cols {
            let v = at(r, c);
            if v <= floor || v <= 0.0 {
                continue;
            }
            let (mut sum, mut n) = (0.0, 0usize);
            for dr in -outer..=outer {
                let rr = r as isize + dr;
                if rr < 0 || rr >= rows as isize {
                    continue;
                }
                for dc in -outer..=outer {
                    let cc = (c as isize + dc).rem_euclid(cols as isize) as usize;
                    let q = at(rr as usize, cc);
                    if dr.abs() <= g && dc.abs() <= g {
                        // ties go to the first cell in raster order
                        let earlier = dr < 0 || (dr == 0 && dc < 0);
                        if (dr, dc) != (0, 0) && (q > v || (earlier && q == v)) {
                            continue 'cell;
                        }
                    } else {
                        sum += q;
                        n += 1;
                    }
                }
            }
            if n > 0 && v > p.scale * sum / n as f64 {
                peaks.push((r, c));
            }
        }
    }
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flat_map_has_no_detections() {
        let p = CfarParams::new(2, 4, 10.0);
        assert!(cfar_detect(&vec![1.0; 32 * 32], 32, 32, &p).unwrap().is_empty());
    }

    #[test]
    fn single_spike_is_detected_alone() {
        let mut map = vec![1.0; 32 * 32];
        map[10 * 32 + 7] = 100.0;
        let p = CfarParams::new(2, 4, 10.0);
        assert_eq!(cfar_detect(&map, 32, 32, &p).unwrap(), vec![(10, 7)]);
    }

    #[test]
    fn doppler_axis_wraps() {
        let mut map = vec![1.0; 32 * 32];
        map[5 * 32] = 100.0;
        map[5 * 32 + 31] = 50.0;
        let p = CfarParams::new(2, 4, 10.0);
        assert_eq!(cfar_detect(&map, 32, 32, &p).unwrap(), vec![(5, 0)]);
    }

    #[test]
    fn parameter_errors() {
        let map = vec![1.0; 8 * 64];
        assert!(matches!(cfar_detect(&map, 8, 64, &CfarParams::new(2, 4, 10.0)), Err(Error::WindowTooLarge { window: 13, axis: 8 })));
        assert!(matches!(cfar_detect(&map, 8, 64, &CfarParams::new(4, 4, 10.0)), Err(Error::InvalidCfar(_))));
        assert!(matches!(cfar_detect(&map, 8, 64, &CfarParams::new(1, 2, 1.0)), Err(Error::InvalidCfar(_))));
    }

    proptest! {
        #[test]
        fn detections_are_guard_window_maxima(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let map: Vec<f64> = (0..24 * 24).map(|_| rng.random::<f64>().powi(8) * 100.0).collect();
            let p = CfarParams::new(1, 3, 3.0);
            for (r, c) in cfar_detect(&map, 24, 24, &p).unwrap() {
                for dr in -1i32..=1 {
                    for dc in -1i32..=1 {
                        let rr = r as i32 + dr;
                        if (0..24).contains(&rr) {
                            let cc = (c as i32 + dc).rem_euclid(24) as usize;
                            prop_assert!(map[rr as usize * 24 + cc] <= map[r * 24 + c]);
                        }
                    }
                }
            }
        }
    }
}
