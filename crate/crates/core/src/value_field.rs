//! Expected reward `V(t, sigma) = E[R(t + eps)]` for every grid target.
//!
//! The field is the cross-correlation of the reward grid with the noise
//! kernel, evaluated with zero padding so that nothing wraps around. It is
//! computed in the frequency domain; the reward transform is cached per FFT
//! shape and two real kernels share one complex transform (real and
//! imaginary lanes), which halves the per-particle cost.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::darts::{ActionGrid, RewardGrid};
use crate::noise::{discretized_kernel, ExecutionSkillParams, Kernel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub state_id: u64,
    pub params: ExecutionSkillParams,
    pub grid: ActionGrid,
    pub values: Vec<f64>,
    pub max_value: f64,
    /// First index attaining `max_value`.
    pub argmax: usize,
}

impl ValueField {
    pub fn new(state_id: u64, params: ExecutionSkillParams, grid: ActionGrid, values: Vec<f64>) -> Self {
        let (argmax, max_value) = argmax_first(&values);
        Self {
            state_id,
            params,
            grid,
            values,
            max_value,
            argmax,
        }
    }
}

/// First index within round-off of the maximum, so exact ties in the
/// underlying field resolve to the lowest index.
fn argmax_first(values: &[f64]) -> (usize, f64) {
    let (hi, scale) = values
        .iter()
        .fold((f64::NEG_INFINITY, 0.0f64), |(m, s), &v| (m.max(v), s.max(v.abs())));
    let cut = hi - 1e-10 * scale;
    let i = values.iter().position(|&v| v >= cut).unwrap_or(0);
    (i, values.get(i).copied().unwrap_or(f64::NEG_INFINITY))
}

/// Centre of the best cell; ties go to the lowest index.
pub fn optimal_action(field: &ValueField) -> [f64; 2] {
    field.grid.cell_center(field.argmax)
}

/// Smallest `2^a 3^b >= n`.
fn fft_len(n: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 < 2 * n {
        let mut m = p2;
        while m < n {
            m *= 3;
        }
        best = best.min(m);
        p2 *= 2;
    }
    best
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let planner = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()));
    planner.lock().expect("fft planner poisoned").plan_fft(len, direction)
}

/// Runs `fft` over every consecutive chunk of `data`.
fn process(fft: &dyn Fft<f64>, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
    if data.is_empty() {
        return;
    }
    let need = fft.get_inplace_scratch_len();
    if scratch.len() < need {
        scratch.resize(need, Complex64::default());
    }
    fft.process_with_scratch(data, &mut scratch[..need]);
}

/// Reward spectra keyed by padded FFT size.
type SpectrumCache = RwLock<HashMap<(usize, usize), Arc<Vec<Complex64>>>>;

/// Convolution engine bound to one reward grid.
pub struct ValueFieldEngine {
    reward: RewardGrid,
    transforms: SpectrumCache,
}

impl std::fmt::Debug for ValueFieldEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ValueFieldEngine")
            .field("state_id", &self.reward.state_id)
            .field("grid", &self.reward.grid)
            .finish_non_exhaustive()
    }
}

impl ValueFieldEngine {
    pub fn new(reward: RewardGrid) -> Self {
        Self {
            reward,
            transforms: RwLock::new(HashMap::new()),
        }
    }

    pub fn reward(&self) -> &RewardGrid {
        &self.reward
    }

    pub fn grid(&self) -> &ActionGrid {
        &self.reward.grid
    }

    pub fn kernel(&self, params: &ExecutionSkillParams) -> Kernel {
        discretized_kernel(params, &self.reward.grid)
    }

    pub fn field(&self, params: &ExecutionSkillParams) -> ValueField {
        let values = self.convolve_raw(&self.kernel(params), None).0;
        ValueField::new(self.reward.state_id, *params, self.reward.grid, values)
    }

    /// Two fields for the price of one complex transform.
    pub fn field_pair(&self, a: &ExecutionSkillParams, b: &ExecutionSkillParams) -> [ValueField; 2] {
        let (va, vb) = self.convolve_raw(&self.kernel(a), Some(&self.kernel(b)));
        let g = self.reward.grid;
        let id = self.reward.state_id;
        [
            ValueField::new(id, *a, g, va),
            ValueField::new(id, *b, g, vb.expect("paired transform")),
        ]
    }

    /// Applies `f` to the field of every parameter set without keeping the
    /// fields alive. Parameter sets are paired by transform size and
    /// evaluated in parallel; output order matches input order.
    pub fn map_fields<T, F>(&self, params: &[ExecutionSkillParams], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &ValueField) -> T + Sync,
    {
        let dims: Vec<(usize, usize)> = params
            .iter()
            .map(|p| self.transform_dims(&self.kernel_halves(p)))
            .collect();
        let mut order: Vec<usize> = (0..params.len()).collect();
        order.sort_by_key(|&i| (dims[i], i));
        let mut computed: Vec<(usize, T)> = order
            .par_chunks(2)
            .flat_map_iter(|pair| match *pair {
                [a, b] => {
                    let [fa, fb] = self.field_pair(&params[a], &params[b]);
                    vec![(a, f(a, &fa)), (b, f(b, &fb))]
                }
                [a] => vec![(a, f(a, &self.field(&params[a])))],
                _ => unreachable!(),
            })
            .collect();
        computed.sort_by_key(|(i, _)| *i);
        computed.into_iter().map(|(_, t)| t).collect()
    }

    /// Fields for many parameter sets; see [`Self::map_fields`].
    pub fn fields(&self, params: &[ExecutionSkillParams]) -> Vec<ValueField> {
        self.map_fields(params, |_, f| f.clone())
    }

    /// Cross-correlates the reward with one or two kernels of matching
    /// resolution.
    pub fn convolve(&self, k1: &Kernel, k2: Option<&Kernel>) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        for k in std::iter::once(k1).chain(k2) {
            let rel = (k.resolution - self.reward.grid.resolution).abs() / self.reward.grid.resolution;
            if rel > 1e-12 {
                return Err(Error::MismatchedResolution {
                    reward: self.reward.grid.resolution,
                    kernel: k.resolution,
                });
            }
            if k.half_x >= self.reward.grid.nx() || k.half_y >= self.reward.grid.ny() {
                return Err(Error::InvalidParameter("kernel support exceeds the grid span".into()));
            }
        }
        Ok(self.convolve_raw(k1, k2))
    }

    fn kernel_halves(&self, p: &ExecutionSkillParams) -> (usize, usize) {
        let g = &self.reward.grid;
        let half =
            |s: f64, n: usize| ((crate::noise::KERNEL_TRUNCATION_SIGMAS * s / g.resolution).ceil() as usize).min(n - 1);
        (half(p.sigma_x, g.nx()), half(p.sigma_y, g.ny()))
    }

    fn transform_dims(&self, halves: &(usize, usize)) -> (usize, usize) {
        let g = &self.reward.grid;
        (fft_len(g.nx() + halves.0), fft_len(g.ny() + halves.1))
    }

    fn reward_transform(&self, fx: usize, fy: usize) -> Arc<Vec<Complex64>> {
        if let Some(t) = self.transforms.read().expect("cache poisoned").get(&(fx, fy)) {
            return Arc::clone(t);
        }
        let g = &self.reward.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let mut buf = vec![Complex64::default(); fx * fy];
        for r in 0..ny {
            for c in 0..nx {
                buf[r * fx + c].re = self.reward.values[r * nx + c];
            }
        }
        let mut scratch = Vec::new();
        process(&*plan(fx, FftDirection::Forward), &mut buf[..ny * fx], &mut scratch);
        let mut t = vec![Complex64::default(); fx * fy];
        transpose(&buf, fy, fx, &mut t);
        process(&*plan(fy, FftDirection::Forward), &mut t, &mut scratch);
        let t = Arc::new(t);
        self.transforms
            .write()
            .expect("cache poisoned")
            .entry((fx, fy))
            .or_insert(t)
            .clone()
    }

    fn convolve_raw(&self, k1: &Kernel, k2: Option<&Kernel>) -> (Vec<f64>, Option<Vec<f64>>) {
        let g = &self.reward.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let hx = k1.half_x.max(k2.map_or(0, |k| k.half_x));
        let hy = k1.half_y.max(k2.map_or(0, |k| k.half_y));
        let (fx, fy) = self.transform_dims(&(hx, hy));
        let rt = self.reward_transform(fx, fy);

        WORK.with(|work| {
            let work = &mut *work.borrow_mut();
            let (buf, t, scratch) = (&mut work.buf, &mut work.t, &mut work.scratch);
            buf.clear();
            buf.resize(fx * fy, Complex64::default());
            t.resize(fx * fy, Complex64::default());

            // Kernel offset d goes to position -d (mod n) so that the
            // circular convolution of the reward with it is a
            // cross-correlation.
            let place = |buf: &mut [Complex64], k: &Kernel, imag: bool| {
                let (kx, ky) = (k.half_x as isize, k.half_y as isize);
                let cols: Vec<usize> = (-kx..=kx).map(|dx| (-dx).rem_euclid(fx as isize) as usize).collect();
                for (ri, dy) in (-ky..=ky).enumerate() {
                    let row = (-dy).rem_euclid(fy as isize) as usize * fx;
                    let src = &k.weights[ri * cols.len()..(ri + 1) * cols.len()];
                    for (&c, &w) in cols.iter().zip(src) {
                        if imag {
                            buf[row + c].im = w;
                        } else {
                            buf[row + c].re = w;
                        }
                    }
                }
            };
            place(buf, k1, false);
            if let Some(k2) = k2 {
                place(buf, k2, true);
            }

            let row_fwd = plan(fx, FftDirection::Forward);
            // Only the wrapped kernel rows are non-zero.
            process(&*row_fwd, &mut buf[..(hy + 1) * fx], scratch);
            if hy > 0 {
                process(&*row_fwd, &mut buf[(fy - hy) * fx..], scratch);
            }
            transpose(buf, fy, fx, t);
            process(&*plan(fy, FftDirection::Forward), t, scratch);

            t.iter_mut().zip(rt.iter()).for_each(|(a, b)| *a *= b);

            process(&*plan(fy, FftDirection::Inverse), t, scratch);
            // Back to row-major, keeping only the first ny rows.
            transpose_rows(t, fx, fy, ny, buf);
            process(&*plan(fx, FftDirection::Inverse), &mut buf[..ny * fx], scratch);

            let scale = 1.0 / (fx * fy) as f64;
            let mut out1 = Vec::with_capacity(nx * ny);
            let mut out2 = k2.map(|_| Vec::with_capacity(nx * ny));
            for r in 0..ny {
                let row = &buf[r * fx..r * fx + nx];
                out1.extend(row.iter().map(|z| z.re * scale));
                if let Some(o) = out2.as_mut() {
                    o.extend(row.iter().map(|z| z.im * scale));
                }
            }
            (out1, out2)
        })
    }
}

/// Per-thread transform buffers, reused across calls.
#[derive(Default)]
struct Work {
    buf: Vec<Complex64>,
    t: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

thread_local! {
    static WORK: std::cell::RefCell<Work> = std::cell::RefCell::new(Work::default());
}

/// `src` is `rows x cols` row-major; `dst` becomes `cols x rows`.
fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    transpose_rows(src, rows, cols, cols, dst);
}

/// Like [`transpose`], but only the first `keep` rows of the result are
/// written.
fn transpose_rows(src: &[Complex64], rows: usize, cols: usize, keep: usize, dst: &mut [Complex64]) {
    const B: usize = 16;
    for rb in (0..rows).step_by(B) {
        for cb in (0..keep).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(keep) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// One-shot value field; prefer a shared [`ValueFieldEngine`] when many
/// fields are needed for the same reward grid.
pub fn compute_value_field(reward: &RewardGrid, params: &ExecutionSkillParams) -> Result<ValueField> {
    params.validate()?;
    Ok(ValueFieldEngine::new(reward.clone()).field(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darts::{generate_state, rasterize_reward, BoardGeometry};
    use crate::rng::SeedStreams;
    use proptest::prelude::*;

    fn direct(reward: &RewardGrid, k: &Kernel) -> Vec<f64> {
        let g = &reward.grid;
        let (nx, ny) = (g.nx() as isize, g.ny() as isize);
        let (hx, hy) = (k.half_x as isize, k.half_y as isize);
        let mut out = vec![0.0; (nx * ny) as usize];
        for j in 0..ny {
            for i in 0..nx {
                let mut acc = 0.0;
                for dy in -hy..=hy {
                    let y = j + dy;
                    if y < 0 || y >= ny {
                        continue;
                    }
                    for dx in -hx..=hx {
                        let x = i + dx;
                        if x < 0 || x >= nx {
                            continue;
                        }
                        acc += k.get(dx, dy) * reward.values[(y * nx + x) as usize];
                    }
                }
                out[(j * nx + i) as usize] = acc;
            }
        }
        out
    }

    fn board_reward(seed: u64, res: f64) -> RewardGrid {
        let s = generate_state(
            seed,
            BoardGeometry::default(),
            false,
            &mut SeedStreams::new(seed).stream("s"),
        );
        rasterize_reward(&s, &ActionGrid::square(res, 170.0).unwrap())
    }

    fn p(sx: f64, sy: f64, r: f64) -> ExecutionSkillParams {
        ExecutionSkillParams::new(sx, sy, r).unwrap()
    }

    #[test]
    fn fft_len_is_smooth_and_minimal() {
        assert_eq!(fft_len(137), 144);
        assert_eq!(fft_len(69), 72);
        assert_eq!(fft_len(97), 108);
        assert_eq!(fft_len(1), 1);
    }

    #[test]
    fn matches_direct_summation() {
        let reward = board_reward(3, 10.0);
        let engine = ValueFieldEngine::new(reward.clone());
        for q in [
            p(10.0, 10.0, 0.0),
            p(40.0, 120.0, 0.7),
            p(150.0, 3.0, -0.5),
            p(3.0, 3.0, 0.0),
        ] {
            let k = engine.kernel(&q);
            let fft = engine.field(&q).values;
            let dir = direct(&reward, &k);
            let err = fft.iter().zip(&dir).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9 * reward.max(), "{q:?}: {err}");
        }
    }

    #[test]
    fn paired_fields_match_single() {
        let engine = ValueFieldEngine::new(board_reward(4, 10.0));
        let (a, b) = (p(12.0, 50.0, 0.3), p(90.0, 20.0, -0.7));
        let [fa, fb] = engine.field_pair(&a, &b);
        let (sa, sb) = (engine.field(&a), engine.field(&b));
        for (x, y) in fa.values.iter().zip(&sa.values).chain(fb.values.iter().zip(&sb.values)) {
            assert!((x - y).abs() < 1e-10);
        }
        let many = engine.fields(&[a, b, a]);
        assert_eq!(many.len(), 3);
        assert!((many[2].values[100] - sa.values[100]).abs() < 1e-10);
    }

    #[test]
    fn constant_reward_interior_is_preserved() {
        let grid = ActionGrid::square(5.0, 170.0).unwrap();
        let reward = RewardGrid::new(0, grid, vec![7.0; grid.len()]).unwrap();
        let field = compute_value_field(&reward, &p(10.0, 10.0, 0.0)).unwrap();
        for (i, c) in grid.cells().enumerate() {
            if c[0].abs() <= 110.0 && c[1].abs() <= 110.0 {
                assert!((field.values[i] - 7.0).abs() < 7e-6, "{c:?}");
            }
        }
    }

    #[test]
    fn tiny_sigma_reproduces_reward() {
        let grid = ActionGrid::square(5.0, 50.0).unwrap();
        let mut values = vec![0.0; grid.len()];
        values[37] = 9.0;
        let reward = RewardGrid::new(0, grid, values.clone()).unwrap();
        let field = compute_value_field(&reward, &p(0.5, 0.5, 0.0)).unwrap();
        for (a, b) in field.values.iter().zip(&values) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(field.argmax, 37);
        assert_eq!(optimal_action(&field), grid.cell_center(37));
    }

    #[test]
    fn symmetric_ties_pick_lowest_index() {
        let grid = ActionGrid::square(1.0, 4.0).unwrap();
        let mut values = vec![0.0; grid.len()];
        let a = grid.index(2, 4);
        let b = grid.index(6, 4);
        values[a] = 5.0;
        values[b] = 5.0;
        let reward = RewardGrid::new(0, grid, values).unwrap();
        let field = compute_value_field(&reward, &p(0.2, 0.2, 0.0)).unwrap();
        assert!((field.values[a] - field.values[b]).abs() < 1e-12);
        assert_eq!(field.argmax, a.min(b));
    }

    #[test]
    fn wide_noise_pulls_optimum_to_centre() {
        let reward = board_reward(9, 5.0);
        let grid = reward.grid;
        let best_reward_cell = (0..grid.len())
            .max_by(|&i, &j| reward.values[i].partial_cmp(&reward.values[j]).unwrap().then(j.cmp(&i)))
            .unwrap();
        let field = compute_value_field(&reward, &p(150.0, 150.0, 0.0)).unwrap();
        let k = discretized_kernel(&p(150.0, 150.0, 0.0), &grid);
        let oracle = direct(&reward, &k);
        let (oracle_arg, _) = argmax_first(&oracle);
        let norm = |c: [f64; 2]| c[0].hypot(c[1]);
        assert!((field.values[field.argmax] - oracle[oracle_arg]).abs() < 1e-9);
        assert!(norm(optimal_action(&field)) < norm(grid.cell_center(best_reward_cell)));
    }

    #[test]
    fn mismatched_resolution_is_rejected() {
        let engine = ValueFieldEngine::new(board_reward(1, 10.0));
        let k = discretized_kernel(&p(10.0, 10.0, 0.0), &ActionGrid::square(5.0, 170.0).unwrap());
        assert!(matches!(
            engine.convolve(&k, None),
            Err(Error::MismatchedResolution { .. })
        ));
    }

    #[test]
    fn max_value_shrinks_with_noise() {
        let reward = board_reward(12, 5.0);
        let engine = ValueFieldEngine::new(reward);
        let ladder = [3.0, 6.0, 12.0, 25.0, 50.0, 100.0, 150.0];
        let maxes: Vec<f64> = ladder.iter().map(|&s| engine.field(&p(s, s, 0.0)).max_value).collect();
        for w in maxes.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{maxes:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn bounds_mass_and_oracle(seed in 0u64..1000, sx in 3.0f64..150.0, sy in 3.0f64..150.0, r in -0.75f64..0.75) {
            let reward = board_reward(seed, 10.0);
            let q = p(sx, sy, r);
            let field = compute_value_field(&reward, &q).unwrap();
            let (lo, hi) = (reward.min(), reward.max());
            for &v in &field.values {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
            prop_assert!(field.values.iter().sum::<f64>() <= reward.values.iter().sum::<f64>() + 1e-6);
            prop_assert_eq!(field.max_value, field.values[field.argmax]);
            let dir = direct(&reward, &discretized_kernel(&q, &reward.grid));
            for (a, b) in field.values.iter().zip(&dir) {
                prop_assert!((a - b).abs() <= 1e-6 * hi);
            }
        }
    }
}
