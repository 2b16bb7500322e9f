//! Cached 3D complex FFTs on cubic grids.
//!
//! Data layout is x-fastest: site (i, j, k) lives at `i + n*(j + n*k)`.
//! The forward transform is unnormalized; the inverse divides by n³ so that
//! `inverse(forward(f)) == f`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<Fft3>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft3 {
    /// Shared plan for an n×n×n grid.
    pub fn for_size(n: usize) -> Arc<Fft3> {
        let mut map = cache().lock().expect("fft cache poisoned");
        map.entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Fft3 {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        data.par_chunks_mut(self.n * self.n)
            .for_each(|slab| slab.iter_mut().for_each(|v| *v *= scale));
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let n2 = n * n;
        assert_eq!(data.len(), n2 * n, "buffer does not match grid size");
        let scratch_len = plan.get_inplace_scratch_len();

        // x: contiguous lines.
        data.par_chunks_mut(n2).for_each(|slab| {
            let mut scratch = vec![Complex64::default(); scratch_len];
            plan.process_with_scratch(slab, &mut scratch);
        });

        // y: transpose each z-slab, transform, transpose back.
        data.par_chunks_mut(n2).for_each(|slab| {
            let mut scratch = vec![Complex64::default(); scratch_len];
            let mut tmp = vec![Complex64::default(); n2];
            transpose(slab, &mut tmp, n);
            plan.process_with_scratch(&mut tmp, &mut scratch);
            transpose(&tmp, slab, n);
        });

        // z: gather (k fastest) per y-plane, transform, scatter back.
        let mut gathered = vec![Complex64::default(); n2 * n];
        {
            let src: &[Complex64] = data;
            gathered.par_chunks_mut(n2).enumerate().for_each(|(j, plane)| {
                let mut scratch = vec![Complex64::default(); scratch_len];
                for kb in (0..n).step_by(TILE) {
                    for ib in (0..n).step_by(TILE) {
                        for k in kb..(kb + TILE).min(n) {
                            let row = &src[n * j + n2 * k..n * j + n2 * k + n];
                            for i in ib..(ib + TILE).min(n) {
                                plane[k + n * i] = row[i];
                            }
                        }
                    }
                }
                plan.process_with_scratch(plane, &mut scratch);
            });
        }
        data.par_chunks_mut(n2).enumerate().for_each(|(k, slab)| {
            for j in 0..n {
                let plane = &gathered[n2 * j..n2 * (j + 1)];
                let row = &mut slab[n * j..n * (j + 1)];
                for (i, v) in row.iter_mut().enumerate() {
                    *v = plane[k + n * i];
                }
            }
        });
    }
}

const TILE: usize = 8;

/// Blocked transpose of an n×n row-major matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = TILE;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (0..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                for j in bj..(bj + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(data: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); data.len()];
        for k3 in 0..n {
            for k2 in 0..n {
                for k1 in 0..n {
                    let mut acc = Complex64::default();
                    for z in 0..n {
                        for y in 0..n {
                            for x in 0..n {
                                let phase = -2.0 * PI * ((k1 * x + k2 * y + k3 * z) as f64) / n as f64;
                                acc += data[x + n * (y + n * z)] * Complex64::from_polar(1.0, phase);
                            }
                        }
                    }
                    out[k1 + n * (k2 + n * k3)] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 4;
        let data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let expected = naive_dft(&data, n);
        let mut got = data.clone();
        Fft3::for_size(n).forward(&mut got);
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
        Fft3::for_size(n).inverse(&mut got);
        for (a, b) in got.iter().zip(&data) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
