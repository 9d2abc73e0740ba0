//! The 2D-Darts environment: a standard board whose twenty sector values
//! are shuffled independently for every state.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sector values of a traditional board, clockwise from the top.
pub const STANDARD_SECTORS: [u32; 20] = [20, 1, 18, 4, 13, 6, 10, 15, 2, 17, 3, 19, 7, 16, 8, 11, 14, 9, 12, 5];
pub const BULL_VALUE: u32 = 50;
pub const OUTER_BULL_VALUE: u32 = 25;

/// Radii in mm. Regions are half-open `[inner, outer)`, so a point exactly
/// on a boundary belongs to the outer region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoardGeometry {
    pub bull_radius: f64,
    pub outer_bull_radius: f64,
    pub treble_inner: f64,
    pub treble_outer: f64,
    pub double_inner: f64,
    pub double_outer: f64,
    pub board_radius: f64,
    pub sector_count: usize,
}

impl Default for BoardGeometry {
    fn default() -> Self {
        Self {
            bull_radius: 6.35,
            outer_bull_radius: 15.9,
            treble_inner: 99.0,
            treble_outer: 107.0,
            double_inner: 162.0,
            double_outer: 170.0,
            board_radius: 170.0,
            sector_count: 20,
        }
    }
}

impl BoardGeometry {
    pub fn validate(&self) -> Result<()> {
        let radii = [
            0.0,
            self.bull_radius,
            self.outer_bull_radius,
            self.treble_inner,
            self.treble_outer,
            self.double_inner,
            self.double_outer,
        ];
        if radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(format!(
                "board radii must be strictly increasing: {radii:?}"
            )));
        }
        if self.double_outer != self.board_radius {
            return Err(Error::InvalidParameter("double ring must end at the board edge".into()));
        }
        if self.sector_count != STANDARD_SECTORS.len() {
            return Err(Error::InvalidParameter(format!(
                "sector_count must be {}, got {}",
                STANDARD_SECTORS.len(),
                self.sector_count
            )));
        }
        Ok(())
    }

    pub fn sector_width_deg(&self) -> f64 {
        360.0 / self.sector_count as f64
    }

    /// Sector index of a point: sector 0 is centred on +y, indices increase
    /// clockwise, and the first boundary sits half a sector from vertical.
    pub fn sector_index(&self, point: [f64; 2]) -> usize {
        let width = self.sector_width_deg();
        let theta = point[0].atan2(point[1]).to_degrees().rem_euclid(360.0);
        let k = ((theta + 0.5 * width) / width).floor() as usize;
        k % self.sector_count
    }
}

/// One dartboard presented to an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct DartboardState {
    pub state_id: u64,
    pub sector_values: Vec<u32>,
    pub bull_value: u32,
    pub outer_bull_value: u32,
    pub geometry: BoardGeometry,
}

/// The per-state JSON record; geometry travels separately in [`BoardConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub state_id: u64,
    pub sector_values: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bull_value: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_bull_value: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardConfig {
    #[serde(default)]
    pub geometry: BoardGeometry,
    /// Also shuffle the two bull values into the pool of sector values.
    #[serde(default)]
    pub shuffle_bull: bool,
    /// Action-grid resolution in mm.
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

fn default_resolution() -> f64 {
    5.0
}

impl Default for BoardConfig {
    fn default() -> Self {
        Self {
            geometry: BoardGeometry::default(),
            shuffle_bull: false,
            resolution: default_resolution(),
        }
    }
}

impl BoardConfig {
    /// Target grid restricted to the board's bounding square.
    pub fn action_grid(&self) -> Result<ActionGrid> {
        ActionGrid::square(self.resolution, self.geometry.board_radius)
    }
}

impl DartboardState {
    pub fn to_record(&self) -> StateRecord {
        let custom_bull = self.bull_value != BULL_VALUE || self.outer_bull_value != OUTER_BULL_VALUE;
        StateRecord {
            state_id: self.state_id,
            sector_values: self.sector_values.clone(),
            bull_value: custom_bull.then_some(self.bull_value),
            outer_bull_value: custom_bull.then_some(self.outer_bull_value),
        }
    }

    pub fn from_record(record: &StateRecord, geometry: BoardGeometry) -> Result<Self> {
        if record.sector_values.len() != geometry.sector_count {
            return Err(Error::InvalidParameter(format!(
                "state {} has {} sector values, expected {}",
                record.state_id,
                record.sector_values.len(),
                geometry.sector_count
            )));
        }
        Ok(Self {
            state_id: record.state_id,
            sector_values: record.sector_values.clone(),
            bull_value: record.bull_value.unwrap_or(BULL_VALUE),
            outer_bull_value: record.outer_bull_value.unwrap_or(OUTER_BULL_VALUE),
            geometry,
        })
    }
}

/// Draws a board with a uniformly random assignment of sector values.
pub fn generate_state<R: Rng + ?Sized>(
    state_id: u64,
    geometry: BoardGeometry,
    shuffle_bull: bool,
    rng: &mut R,
) -> DartboardState {
    if shuffle_bull {
        let mut pool: Vec<u32> = STANDARD_SECTORS.to_vec();
        pool.push(BULL_VALUE);
        pool.push(OUTER_BULL_VALUE);
        pool.shuffle(rng);
        let outer_bull_value = pool.pop().unwrap();
        let bull_value = pool.pop().unwrap();
        DartboardState {
            state_id,
            sector_values: pool,
            bull_value,
            outer_bull_value,
            geometry,
        }
    } else {
        let mut sector_values = STANDARD_SECTORS.to_vec();
        sector_values.shuffle(rng);
        DartboardState {
            state_id,
            sector_values,
            bull_value: BULL_VALUE,
            outer_bull_value: OUTER_BULL_VALUE,
            geometry,
        }
    }
}

pub fn reward_at(state: &DartboardState, point: [f64; 2]) -> f64 {
    let g = &state.geometry;
    let r = point[0].hypot(point[1]);
    if r < g.bull_radius {
        return f64::from(state.bull_value);
    }
    if r < g.outer_bull_radius {
        return f64::from(state.outer_bull_value);
    }
    if r >= g.board_radius {
        return 0.0;
    }
    let base = f64::from(state.sector_values[g.sector_index(point)]);
    if (g.treble_inner..g.treble_outer).contains(&r) {
        3.0 * base
    } else if (g.double_inner..g.double_outer).contains(&r) {
        2.0 * base
    } else {
        base
    }
}

/// A rectangular lattice of candidate target actions, symmetric about
/// `center`. Cells are indexed row-major with x varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub resolution: f64,
    pub center: [f64; 2],
    pub half_x: usize,
    pub half_y: usize,
}

impl ActionGrid {
    pub fn new(resolution: f64, center: [f64; 2], half_x: usize, half_y: usize) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        Ok(Self {
            resolution,
            center,
            half_x,
            half_y,
        })
    }

    /// Square grid centred on the origin with cell centres at multiples of
    /// `resolution` inside `[-half_extent, half_extent]`.
    pub fn square(resolution: f64, half_extent: f64) -> Result<Self> {
        if !(half_extent >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid half-extent must be non-negative, got {half_extent}"
            )));
        }
        let half = (half_extent / resolution + 1e-9).floor() as usize;
        Self::new(resolution, [0.0, 0.0], half, half)
    }

    pub fn nx(&self) -> usize {
        2 * self.half_x + 1
    }

    pub fn ny(&self) -> usize {
        2 * self.half_y + 1
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 2] {
        let nx = self.nx();
        let (i, j) = (idx % nx, idx / nx);
        [
            self.center[0] + (i as f64 - self.half_x as f64) * self.resolution,
            self.center[1] + (j as f64 - self.half_y as f64) * self.resolution,
        ]
    }

    pub fn cells(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(|i| self.cell_center(i))
    }

    /// Index of the cell whose centre is nearest to `point`, if inside.
    pub fn nearest_index(&self, point: [f64; 2]) -> Option<usize> {
        let fi = ((point[0] - self.center[0]) / self.resolution).round() + self.half_x as f64;
        let fj = ((point[1] - self.center[1]) / self.resolution).round() + self.half_y as f64;
        if fi < 0.0 || fj < 0.0 || fi >= self.nx() as f64 || fj >= self.ny() as f64 {
            return None;
        }
        Some(self.index(fi as usize, fj as usize))
    }
}

/// Reward sampled at every cell of an [`ActionGrid`]; zero beyond the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardGrid {
    pub state_id: u64,
    pub grid: ActionGrid,
    pub values: Vec<f64>,
}

impl RewardGrid {
    pub fn new(state_id: u64, grid: ActionGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "reward grid has {} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite reward {v}")));
        }
        Ok(Self { state_id, grid, values })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn rasterize_reward(state: &DartboardState, grid: &ActionGrid) -> RewardGrid {
    let values = grid.cells().map(|c| reward_at(state, c)).collect();
    RewardGrid {
        state_id: state.state_id,
        grid: *grid,
        values,
    }
}

pub fn write_states_jsonl<W: Write>(mut out: W, states: &[DartboardState]) -> Result<()> {
    for s in states {
        serde_json::to_writer(&mut out, &s.to_record())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_states_jsonl<R: BufRead>(input: R, geometry: BoardGeometry) -> Result<Vec<DartboardState>> {
    let mut states = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: StateRecord = serde_json::from_str(&line)?;
        states.push(DartboardState::from_record(&record, geometry)?);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStreams;
    use proptest::prelude::*;

    fn board(seed: u64) -> DartboardState {
        generate_state(
            0,
            BoardGeometry::default(),
            false,
            &mut SeedStreams::new(seed).stream("t"),
        )
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        assert_eq!(board(3), board(3));
        assert_ne!(board(3).sector_values, board(4).sector_values);
    }

    #[test]
    fn sector_values_are_a_permutation() {
        let mut v = board(11).sector_values;
        v.sort_unstable();
        assert_eq!(v, (1..=20).collect::<Vec<_>>());
    }

    #[test]
    fn sector_zero_value_is_uniform() {
        // Each of the 20 values should land in sector 0 about 5% of the time.
        let mut rng = SeedStreams::new(99).stream("freq");
        let mut counts = [0usize; 21];
        let n = 10_000;
        for i in 0..n {
            let s = generate_state(i, BoardGeometry::default(), false, &mut rng);
            counts[s.sector_values[0] as usize] += 1;
        }
        for (v, &c) in counts.iter().enumerate().skip(1) {
            let f = c as f64 / n as f64;
            assert!((f - 0.05).abs() < 0.01, "value {v}: {f}");
        }
    }

    #[test]
    fn bull_and_off_board() {
        let s = board(1);
        assert_eq!(reward_at(&s, [0.0, 0.0]), 50.0);
        assert_eq!(reward_at(&s, [0.0, 10.0]), 25.0);
        assert_eq!(reward_at(&s, [171.0, 0.0]), 0.0);
        assert_eq!(reward_at(&s, [0.0, 170.0]), 0.0);
        assert_eq!(reward_at(&s, [120.0, 130.0]), 0.0);
    }

    #[test]
    fn treble_and_double_bands() {
        // Independent construction: aim along the bisector of sector k.
        let s = board(5);
        for k in 0..20 {
            let phi = (18.0 * k as f64).to_radians();
            let at = |r: f64| [r * phi.sin(), r * phi.cos()];
            let v = f64::from(s.sector_values[k]);
            assert_eq!(reward_at(&s, at(103.0)), 3.0 * v);
            assert_eq!(reward_at(&s, at(166.0)), 2.0 * v);
            assert_eq!(reward_at(&s, at(50.0)), v);
            assert_eq!(reward_at(&s, at(135.0)), v);
        }
    }

    #[test]
    fn boundaries_belong_to_outer_region() {
        let s = board(2);
        let v = f64::from(s.sector_values[0]);
        assert_eq!(reward_at(&s, [0.0, 99.0]), 3.0 * v);
        assert_eq!(reward_at(&s, [0.0, 107.0]), v);
        assert_eq!(reward_at(&s, [0.0, 6.35]), 25.0);
        // Angular boundary at +9 degrees goes clockwise to sector 1.
        let phi = 9f64.to_radians();
        assert_eq!(
            reward_at(&s, [60.0 * phi.sin(), 60.0 * phi.cos()]),
            f64::from(s.sector_values[1])
        );
    }

    #[test]
    fn shuffle_bull_flag_moves_bull_values() {
        let mut rng = SeedStreams::new(0).stream("b");
        let moved = (0..50).any(|i| {
            let s = generate_state(i, BoardGeometry::default(), true, &mut rng);
            s.bull_value != BULL_VALUE
        });
        assert!(moved);
    }

    #[test]
    fn rasterize_matches_reward_at_and_is_repeatable() {
        let s = board(8);
        let grid = ActionGrid::square(5.0, 170.0).unwrap();
        assert_eq!(grid.nx(), 69);
        let a = rasterize_reward(&s, &grid);
        let b = rasterize_reward(&s, &grid);
        assert_eq!(a, b);
        let origin = grid.nearest_index([0.0, 0.0]).unwrap();
        assert_eq!(a.values[origin], 50.0);
        for (i, c) in grid.cells().enumerate() {
            if c[0].hypot(c[1]) > 170.0 {
                assert_eq!(a.values[i], 0.0);
            }
        }
    }

    #[test]
    fn grid_off_board_is_zero() {
        let s = board(8);
        let grid = ActionGrid::new(5.0, [500.0, 500.0], 4, 4).unwrap();
        assert!(rasterize_reward(&s, &grid).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn refinement_consistency() {
        let s = board(21);
        let coarse = ActionGrid::square(5.0, 170.0).unwrap();
        let fine = ActionGrid::square(1.0, 170.0).unwrap();
        let mass = |g: &ActionGrid| rasterize_reward(&s, g).values.iter().sum::<f64>() * g.cell_area();
        let (a, b) = (mass(&coarse), mass(&fine));
        assert!((a - b).abs() / b < 0.02, "{a} vs {b}");
    }

    #[test]
    fn jsonl_round_trip() {
        let states: Vec<_> = (0..3).map(board).collect();
        let mut buf = Vec::new();
        write_states_jsonl(&mut buf, &states).unwrap();
        let back = read_states_jsonl(&buf[..], BoardGeometry::default()).unwrap();
        assert_eq!(back, states);
    }

    #[test]
    fn geometry_validation() {
        assert!(BoardGeometry::default().validate().is_ok());
        let bad = BoardGeometry {
            treble_inner: 200.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn rotating_one_sector_shifts_value(r in 20.0f64..169.0, a in 0.0f64..360.0, seed in 0u64..50) {
            let s = board(seed);
            let g = s.geometry;
            let phi = a.to_radians();
            let p = [r * phi.sin(), r * phi.cos()];
            let q_phi = (a + 18.0).to_radians();
            let q = [r * q_phi.sin(), r * q_phi.cos()];
            let k = g.sector_index(p);
            // Skip points within float noise of an angular boundary.
            let off = ((a + 9.0).rem_euclid(18.0)).min(18.0 - (a + 9.0).rem_euclid(18.0));
            prop_assume!(off > 1e-6);
            prop_assert_eq!(g.sector_index(q), (k + 1) % 20);
            let ratio_p = reward_at(&s, p) / f64::from(s.sector_values[k]);
            let ratio_q = reward_at(&s, q) / f64::from(s.sector_values[(k + 1) % 20]);
            prop_assert_eq!(ratio_p, ratio_q);
        }

        #[test]
        fn piecewise_constant(x in -160.0f64..160.0, y in -160.0f64..160.0, dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
            let s = board(4);
            let g = s.geometry;
            let p = [x, y];
            let r = x.hypot(y);
            let radial = [g.bull_radius, g.outer_bull_radius, g.treble_inner, g.treble_outer, g.double_inner, g.board_radius]
                .iter().map(|b| (r - b).abs()).fold(f64::INFINITY, f64::min);
            let theta = x.atan2(y).to_degrees().rem_euclid(360.0);
            let ang = ((theta + 9.0).rem_euclid(18.0)).min(18.0 - (theta + 9.0).rem_euclid(18.0));
            let angular = if r < g.outer_bull_radius { f64::INFINITY } else { r * ang.to_radians().sin() };
            let clearance = radial.min(angular);
            let eps = 0.99 * clearance / (dx.hypot(dy) + 1e-12);
            let step = eps.min(1.0);
            let q = [x + dx * step, y + dy * step];
            prop_assert_eq!(reward_at(&s, p), reward_at(&s, q));
        }
    }
}
