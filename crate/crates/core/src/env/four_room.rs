//! Four-Room gridworld with two item types.
//!
//! State = (free cell, bitmask of collected items). Items are collected on
//! entry; moving into a wall leaves the agent in place. Once every item is
//! collected the state is an absorbing zero-reward terminal.

use serde::{Deserialize, Serialize};

use super::EpisodicEnv;
use crate::error::{Error, Result};
use crate::momdp::TabularMOMDP;

/// Sutton-style layout: 11x11 interior, four rooms joined by four doorways.
pub const DEFAULT_LAYOUT: [&str; 13] = [
    "#############",
    "#     #     #",
    "#     #     #",
    "#           #",
    "#     #     #",
    "#     #     #",
    "## ####     #",
    "#     ### ###",
    "#     #     #",
    "#     #     #",
    "#           #",
    "#     #     #",
    "#############",
];

/// Up, right, down, left as (row, col) deltas.
const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// Item type; serialized as the integer 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ItemType {
    One,
    Two,
}

impl TryFrom<u8> for ItemType {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(ItemType::One),
            2 => Ok(ItemType::Two),
            other => Err(format!("item type must be 1 or 2, got {other}")),
        }
    }
}

impl From<ItemType> for u8 {
    fn from(t: ItemType) -> u8 {
        match t {
            ItemType::One => 1,
            ItemType::Two => 2,
        }
    }
}

impl ItemType {
    fn objective(self) -> usize {
        match self {
            ItemType::One => 0,
            ItemType::Two => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemPlacement {
    pub row: usize,
    pub col: usize,
    #[serde(rename = "type")]
    pub kind: ItemType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FourRoomConfig {
    /// Rows of `#` (wall) and space (free).
    pub layout: Vec<String>,
    pub items: Vec<ItemPlacement>,
    /// Required number of items of each type, `[type 1, type 2]`.
    pub type_counts: [usize; 2],
    pub start: [usize; 2],
    pub max_episode_steps: usize,
    pub gamma: f64,
}

impl Default for FourRoomConfig {
    fn default() -> Self {
        let item = |row, col, kind| ItemPlacement { row, col, kind };
        Self {
            layout: DEFAULT_LAYOUT.iter().map(|s| s.to_string()).collect(),
            // Type-2 cluster beside the west doorway near the start; the
            // single Type-1 item sits past the north doorway.
            items: vec![
                item(3, 8, ItemType::One),
                item(7, 2, ItemType::Two),
                item(8, 2, ItemType::Two),
                item(8, 3, ItemType::Two),
            ],
            type_counts: [1, 3],
            start: [1, 1],
            max_episode_steps: 200,
            gamma: 0.99,
        }
    }
}

/// Cell/mask encoding of a validated configuration.
#[derive(Debug, Clone)]
pub struct FourRoomGrid {
    width: usize,
    /// Dense index of every free cell, `None` for walls.
    cell_index: Vec<Option<usize>>,
    cells: Vec<(usize, usize)>,
    items: Vec<ItemPlacement>,
    start: (usize, usize),
}

impl FourRoomGrid {
    pub fn new(config: &FourRoomConfig) -> Result<Self> {
        let height = config.layout.len();
        let width = config.layout.first().map_or(0, |r| r.chars().count());
        if height < 3 || width < 3 {
            return Err(Error::InvalidLayout("layout must be at least 3x3".into()));
        }
        let mut cell_index = Vec::with_capacity(height * width);
        let mut cells = Vec::new();
        for (r, line) in config.layout.iter().enumerate() {
            let chars: Vec<char> = line.chars().collect();
            if chars.len() != width {
                return Err(Error::InvalidLayout(format!(
                    "row {r} has length {}, expected {width}",
                    chars.len()
                )));
            }
            for (c, ch) in chars.into_iter().enumerate() {
                let border = r == 0 || c == 0 || r + 1 == height || c + 1 == width;
                match ch {
                    '#' => cell_index.push(None),
                    ' ' | '.' if !border => {
                        cell_index.push(Some(cells.len()));
                        cells.push((r, c));
                    }
                    ' ' | '.' => {
                        return Err(Error::InvalidLayout(format!("border cell ({r}, {c}) must be a wall")));
                    }
                    other => {
                        return Err(Error::InvalidLayout(format!("unknown character {other:?} at ({r}, {c})")));
                    }
                }
            }
        }
        let grid = Self {
            width,
            cell_index,
            cells,
            items: config.items.clone(),
            start: (config.start[0], config.start[1]),
        };
        let free = |(r, c): (usize, usize)| r < height && c < width && grid.cell_index[r * width + c].is_some();
        if !free(grid.start) {
            return Err(Error::InvalidLayout(format!("start {:?} is not a free cell", grid.start)));
        }
        if grid.items.len() > 16 {
            return Err(Error::InvalidLayout("at most 16 items are supported".into()));
        }
        let mut counts = [0usize; 2];
        for (i, it) in grid.items.iter().enumerate() {
            if !free((it.row, it.col)) {
                return Err(Error::InvalidLayout(format!("item {i} at ({}, {}) is on a wall", it.row, it.col)));
            }
            if (it.row, it.col) == grid.start {
                return Err(Error::InvalidLayout(format!("item {i} is on the start cell")));
            }
            if grid.items[..i].iter().any(|o| (o.row, o.col) == (it.row, it.col)) {
                return Err(Error::InvalidLayout(format!("item {i} shares cell ({}, {})", it.row, it.col)));
            }
            counts[it.kind.objective()] += 1;
        }
        if counts != config.type_counts {
            return Err(Error::InvalidLayout(format!(
                "item counts per type are {counts:?}, expected {:?}",
                config.type_counts
            )));
        }
        Ok(grid)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
    pub fn num_masks(&self) -> usize {
        1 << self.items.len()
    }
    pub fn num_states(&self) -> usize {
        self.num_cells() * self.num_masks()
    }
    pub fn full_mask(&self) -> usize {
        self.num_masks() - 1
    }
    pub fn items(&self) -> &[ItemPlacement] {
        &self.items
    }

    /// State index of `(row, col, mask)`, if the cell is free.
    pub fn state_index(&self, row: usize, col: usize, mask: usize) -> Option<usize> {
        let idx = self.cell_index.get(row * self.width + col).copied().flatten()?;
        (mask < self.num_masks()).then(|| idx * self.num_masks() + mask)
    }

    /// Inverse of [`state_index`](Self::state_index): `(row, col, mask)`.
    pub fn decode(&self, state: usize) -> (usize, usize, usize) {
        let (r, c) = self.cells[state / self.num_masks()];
        (r, c, state % self.num_masks())
    }

    pub fn start_state(&self) -> usize {
        self.state_index(self.start.0, self.start.1, 0).expect("validated start")
    }

    fn item_at(&self, row: usize, col: usize) -> Option<usize> {
        self.items.iter().position(|it| it.row == row && it.col == col)
    }

    /// Deterministic successor and reward of `(state, action)`.
    pub fn transition(&self, state: usize, action: usize) -> (usize, [f64; 2]) {
        let (r, c, mask) = self.decode(state);
        if mask == self.full_mask() {
            return (state, [0.0; 2]);
        }
        let (dr, dc) = MOVES[action];
        let (nr, nc) = ((r as isize + dr) as usize, (c as isize + dc) as usize);
        let (nr, nc) = if self.cell_index[nr * self.width + nc].is_some() {
            (nr, nc)
        } else {
            (r, c)
        };
        let mut reward = [0.0; 2];
        let mut next_mask = mask;
        if let Some(i) = self.item_at(nr, nc) {
            if mask & (1 << i) == 0 {
                next_mask |= 1 << i;
                reward[self.items[i].kind.objective()] = 1.0;
            }
        }
        (self.state_index(nr, nc, next_mask).expect("free cell"), reward)
    }

    pub fn build_model(&self, gamma: f64) -> Result<TabularMOMDP> {
        let (p, q) = (self.num_states(), MOVES.len());
        let mut transition = vec![0.0; p * q * p];
        let mut reward = vec![0.0; p * q * 2];
        for s in 0..p {
            for a in 0..q {
                let (s2, r) = self.transition(s, a);
                transition[(s * q + a) * p + s2] = 1.0;
                reward[(s * q + a) * 2..(s * q + a) * 2 + 2].copy_from_slice(&r);
            }
        }
        let mut initial = vec![0.0; p];
        initial[self.start_state()] = 1.0;
        TabularMOMDP::new(p, q, 2, gamma, transition, reward, initial)
    }

    pub fn terminal_states(&self) -> Vec<usize> {
        (0..self.num_cells()).map(|c| c * self.num_masks() + self.full_mask()).collect()
    }
}

/// Builds the episodic Four-Room environment from a configuration.
pub fn four_room_env(config: &FourRoomConfig) -> Result<EpisodicEnv> {
    let grid = FourRoomGrid::new(config)?;
    let model = grid.build_model(config.gamma)?;
    EpisodicEnv::new(model, config.max_episode_steps, &grid.terminal_states())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momdp::validate;

    #[test]
    fn default_sizes() {
        let cfg = FourRoomConfig::default();
        let grid = FourRoomGrid::new(&cfg).unwrap();
        assert_eq!(grid.num_cells(), 104);
        assert_eq!(grid.num_states(), 104 * 16);
        let env = four_room_env(&cfg).unwrap();
        validate(env.model()).unwrap();
        assert_eq!(env.model().num_objectives(), 2);
        assert_eq!(env.terminal_states().len(), 104);
    }

    #[test]
    fn wall_bump_stays_in_place() {
        let grid = FourRoomGrid::new(&FourRoomConfig::default()).unwrap();
        let s = grid.state_index(1, 1, 0).unwrap();
        let (s2, r) = grid.transition(s, 0);
        assert_eq!(s2, s);
        assert_eq!(r, [0.0, 0.0]);
    }

    #[test]
    fn collecting_type_two_sets_bit_once() {
        let grid = FourRoomGrid::new(&FourRoomConfig::default()).unwrap();
        let s = grid.state_index(6, 2, 0).unwrap();
        let (s2, r) = grid.transition(s, 2);
        assert_eq!(r, [0.0, 1.0]);
        let (row, col, mask) = grid.decode(s2);
        assert_eq!((row, col), (7, 2));
        assert_eq!(mask, 1 << 1);
        // Leaving and re-entering yields nothing.
        let (s3, _) = grid.transition(s2, 0);
        let (_, r) = grid.transition(s3, 2);
        assert_eq!(r, [0.0, 0.0]);
    }

    #[test]
    fn full_mask_is_absorbing() {
        let grid = FourRoomGrid::new(&FourRoomConfig::default()).unwrap();
        let s = grid.state_index(5, 5, grid.full_mask()).unwrap();
        for a in 0..4 {
            assert_eq!(grid.transition(s, a), (s, [0.0, 0.0]));
        }
    }

    #[test]
    fn layout_errors() {
        let mut cfg = FourRoomConfig::default();
        cfg.items[0].row = 0;
        assert!(matches!(four_room_env(&cfg), Err(Error::InvalidLayout(_))));
        let mut cfg = FourRoomConfig::default();
        cfg.items[1] = cfg.items[2].clone();
        assert!(matches!(four_room_env(&cfg), Err(Error::InvalidLayout(_))));
        let mut cfg = FourRoomConfig::default();
        cfg.type_counts = [2, 2];
        assert!(matches!(four_room_env(&cfg), Err(Error::InvalidLayout(_))));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = FourRoomConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"type\":2"));
        let back: FourRoomConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: FourRoomConfig = serde_json::from_str(r#"{"gamma": 0.95}"#).unwrap();
        assert_eq!(partial.items, cfg.items);
    }
}
