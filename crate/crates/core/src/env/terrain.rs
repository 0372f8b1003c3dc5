use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EnvError;

pub const TILE_LENGTH: f64 = 1.0;
pub const TILE_WIDTH: f64 = 4.0;
pub const TILE_HEIGHT: f64 = 0.1;
/// Steepest pitch accepted by [`generate_terrain`], degrees.
pub const MAX_PITCH_DEG: f64 = 6.0;
/// x of the leading edge of the first tile; the model stands at x = 0.
pub const TERRAIN_ORIGIN: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    /// Positive pitch climbs in +x.
    pub pitch_deg: f64,
    pub width: f64,
    pub length: f64,
    pub height: f64,
}

impl Tile {
    pub fn with_pitch(pitch_deg: f64) -> Self {
        Self {
            pitch_deg,
            width: TILE_WIDTH,
            length: TILE_LENGTH,
            height: TILE_HEIGHT,
        }
    }
}

/// Sequence of tiles laid end to end along x. Each tile starts where the
/// previous one ended, so the surface is a continuous polyline; it continues
/// flat before the first tile and after the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TerrainFile", into = "TerrainFile")]
pub struct TerrainSpec {
    pub tiles: Vec<Tile>,
    pub seed: u64,
    /// Surface height at the start of each tile, plus one trailing entry.
    knots: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TerrainFile {
    tiles: Vec<Tile>,
    seed: u64,
}

impl From<TerrainFile> for TerrainSpec {
    fn from(f: TerrainFile) -> Self {
        Self::from_tiles(f.tiles, f.seed)
    }
}

impl From<TerrainSpec> for TerrainFile {
    fn from(t: TerrainSpec) -> Self {
        Self {
            tiles: t.tiles,
            seed: t.seed,
        }
    }
}

impl TerrainSpec {
    pub fn from_tiles(tiles: Vec<Tile>, seed: u64) -> Self {
        let mut knots = Vec::with_capacity(tiles.len() + 1);
        let mut h = 0.0;
        knots.push(h);
        for t in &tiles {
            h += t.length * t.pitch_deg.to_radians().tan();
            knots.push(h);
        }
        let mut spec = Self { tiles, seed, knots };
        spec.rebase();
        spec
    }

    pub fn flat(n_tiles: usize) -> Self {
        Self::from_tiles(vec![Tile::with_pitch(0.0); n_tiles.max(1)], 0)
    }

    pub fn constant_slope(n_tiles: usize, pitch_deg: f64) -> Self {
        Self::from_tiles(vec![Tile::with_pitch(pitch_deg); n_tiles.max(1)], 0)
    }

    /// Shift heights so the surface passes through zero at x = 0.
    fn rebase(&mut self) {
        let h0 = self.height(0.0);
        for k in &mut self.knots {
            *k -= h0;
        }
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Index of the tile under `x`, or `None` off either end.
    pub fn tile_index(&self, x: f64) -> Option<usize> {
        let u = (x - TERRAIN_ORIGIN) / TILE_LENGTH;
        if u < 0.0 {
            return None;
        }
        let i = u.floor() as usize;
        (i < self.tiles.len()).then_some(i)
    }

    pub fn height(&self, x: f64) -> f64 {
        if self.knots.is_empty() {
            return 0.0;
        }
        match self.tile_index(x) {
            Some(i) => {
                let x0 = TERRAIN_ORIGIN + i as f64 * TILE_LENGTH;
                self.knots[i] + (x - x0) * self.tiles[i].pitch_deg.to_radians().tan()
            }
            None if x < TERRAIN_ORIGIN => self.knots[0],
            None => *self.knots.last().unwrap(),
        }
    }

    /// Surface inclination at `x`, radians.
    pub fn slope(&self, x: f64) -> f64 {
        self.tile_index(x)
            .map_or(0.0, |i| self.tiles[i].pitch_deg.to_radians())
    }

    pub fn pitches(&self) -> impl Iterator<Item = f64> + '_ {
        self.tiles.iter().map(|t| t.pitch_deg)
    }
}

/// `n_tiles` tiles with pitch drawn uniformly from `slope_range_deg`.
pub fn generate_terrain(seed: u64, n_tiles: usize, slope_range_deg: (f64, f64)) -> Result<TerrainSpec, EnvError> {
    let (lo, hi) = slope_range_deg;
    if n_tiles == 0 {
        return Err(EnvError::Terrain("n_tiles must be at least 1".into()));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < -MAX_PITCH_DEG || hi > MAX_PITCH_DEG {
        return Err(EnvError::Terrain(format!(
            "slope range [{lo}, {hi}] must lie within [-{MAX_PITCH_DEG}, {MAX_PITCH_DEG}] degrees"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tiles = (0..n_tiles)
        .map(|_| {
            let p = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            Tile::with_pitch(p)
        })
        .collect();
    Ok(TerrainSpec::from_tiles(tiles, seed))
}
