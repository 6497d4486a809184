//! Procedurally generated 1D heightfield terrain.
//!
//! All terrain kinds are sampled onto a uniform grid; height queries are
//! piecewise-linear between samples and constant beyond the span, so the
//! height function is total and continuous. Generation is a pure function
//! of `(kind, seed, params)`.

use std::fmt;
use std::path::Path;

use rand::Rng;

use crate::csvio::fmt_f64;
use crate::{seed, Error, Result};

/// Terrain family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerrainKind {
    /// Height 0 everywhere.
    Flat,
    /// Multi-octave gradient noise, normalized to `[0, max_extrusion]`.
    Perlin,
    /// Repeating stair flights (up, landing, down, landing).
    Stairs,
    /// Random rectangular blocks of varying width and height.
    Bricks,
}

impl TerrainKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Self::Flat),
            "perlin" | "rough" => Ok(Self::Perlin),
            "stairs" => Ok(Self::Stairs),
            "bricks" => Ok(Self::Bricks),
            other => Err(Error::Config(format!("unknown terrain kind `{other}`"))),
        }
    }
}

impl fmt::Display for TerrainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Flat => "flat",
            Self::Perlin => "perlin",
            Self::Stairs => "stairs",
            Self::Bricks => "bricks",
        };
        f.write_str(s)
    }
}

/// Generation parameters; unused fields are ignored by kinds that do not
/// need them.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainParams {
    /// Horizontal span `[x_min, x_max]` covered by samples (m).
    pub span: [f64; 2],
    /// Sample spacing (m).
    pub spacing: f64,
    /// Maximum height of perlin terrain (m).
    pub max_extrusion: f64,
    /// Perlin octave count.
    pub octaves: u32,
    /// Perlin base spatial frequency (cycles per meter).
    pub frequency: f64,
    /// Stair rise (m).
    pub stair_rise: f64,
    /// Stair run (m).
    pub stair_run: f64,
    /// Brick height range `[lo, hi]` (m).
    pub brick_height: [f64; 2],
    /// Brick width range `[lo, hi]` (m).
    pub brick_width: [f64; 2],
}

impl Default for TerrainParams {
    fn default() -> Self {
        Self {
            span: [-20.0, 20.0],
            spacing: 0.05,
            max_extrusion: 0.15,
            octaves: 3,
            frequency: 0.6,
            stair_rise: 0.1,
            stair_run: 0.3,
            brick_height: [0.0, 0.1],
            brick_width: [0.4, 0.8],
        }
    }
}

/// A sampled heightfield plus the recipe that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Terrain {
    pub kind: TerrainKind,
    pub seed: u64,
    /// x coordinate of the first sample (m).
    pub x0: f64,
    /// Sample spacing (m).
    pub spacing: f64,
    /// Sampled heights (m).
    pub heights: Vec<f64>,
    pub params: TerrainParams,
}

/// Builds a terrain. Deterministic in `(kind, seed, params)`.
pub fn generate_terrain(
    kind: TerrainKind,
    seed_value: u64,
    params: &TerrainParams,
) -> Result<Terrain> {
    if !(params.spacing > 0.0) {
        return Err(Error::Config("terrain spacing must be > 0".into()));
    }
    if !(params.span[0] < params.span[1]) {
        return Err(Error::Config("terrain span must be non-empty".into()));
    }
    let n = ((params.span[1] - params.span[0]) / params.spacing).round() as usize + 1;
    let xs: Vec<f64> = (0..n)
        .map(|i| params.span[0] + i as f64 * params.spacing)
        .collect();

    let heights = match kind {
        TerrainKind::Flat => vec![0.0; n],
        TerrainKind::Perlin => {
            if !(params.max_extrusion > 0.0) {
                return Err(Error::Config("perlin max_extrusion must be > 0".into()));
            }
            if params.octaves == 0 || !(params.frequency > 0.0) {
                return Err(Error::Config(
                    "perlin octaves and frequency must be > 0".into(),
                ));
            }
            let raw: Vec<f64> = xs
                .iter()
                .map(|&x| fractal_noise(seed_value, x, params.octaves, params.frequency))
                .collect();
            let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < 1e-12 {
                return Err(Error::Config("degenerate perlin heightfield".into()));
            }
            raw.iter()
                .map(|&v| (v - lo) / (hi - lo) * params.max_extrusion)
                .collect()
        }
        TerrainKind::Stairs => {
            if !(params.stair_rise > 0.0) || !(params.stair_run > 0.0) {
                return Err(Error::Config("stair rise and run must be > 0".into()));
            }
            xs.iter().map(|&x| stair_profile(x, params)).collect()
        }
        TerrainKind::Bricks => {
            if !(params.brick_width[0] > 0.0) || params.brick_width[1] < params.brick_width[0] {
                return Err(Error::Config("brick width range invalid".into()));
            }
            if params.brick_height[1] < params.brick_height[0] {
                return Err(Error::Config("brick height range invalid".into()));
            }
            brick_profile(seed_value, &xs, params)
        }
    };

    Ok(Terrain {
        kind,
        seed: seed_value,
        x0: params.span[0],
        spacing: params.spacing,
        heights,
        params: params.clone(),
    })
}

/// Height at `x`: linear interpolation between samples, constant beyond the
/// sampled span. Total over all finite x.
pub fn terrain_height(terrain: &Terrain, x: f64) -> f64 {
    let n = terrain.heights.len();
    if n == 1 {
        return terrain.heights[0];
    }
    let t = (x - terrain.x0) / terrain.spacing;
    if t <= 0.0 {
        return terrain.heights[0];
    }
    let last = (n - 1) as f64;
    if t >= last {
        return terrain.heights[n - 1];
    }
    let i = t.floor() as usize;
    let frac = t - i as f64;
    terrain.heights[i] * (1.0 - frac) + terrain.heights[i + 1] * frac
}

impl Terrain {
    pub fn height(&self, x: f64) -> f64 {
        terrain_height(self, x)
    }

    /// Flat terrain over the default span.
    pub fn flat() -> Self {
        generate_terrain(TerrainKind::Flat, 0, &TerrainParams::default())
            .expect("default flat terrain is valid")
    }

    /// Writes the heightfield as `x,height` CSV with a recipe comment line.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!(
            "# lfmc-terrain kind={} seed={}\n",
            self.kind, self.seed
        ));
        out.push_str("x,height\n");
        for (i, h) in self.heights.iter().enumerate() {
            let x = self.x0 + i as f64 * self.spacing;
            out.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(*h)));
        }
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Reads a heightfield written by [`Terrain::export_csv`].
    pub fn import_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut kind = TerrainKind::Flat;
        let mut seed_value = 0u64;
        let mut xs: Vec<f64> = Vec::new();
        let mut hs: Vec<f64> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line == "x,height" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for tok in rest.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("kind=") {
                        kind = TerrainKind::parse(v)?;
                    } else if let Some(v) = tok.strip_prefix("seed=") {
                        seed_value = v
                            .parse()
                            .map_err(|_| Error::Config(format!("bad terrain seed `{v}`")))?;
                    }
                }
                continue;
            }
            let mut parts = line.split(',');
            let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
                return Err(Error::Config(format!(
                    "terrain csv line {} malformed",
                    ln + 1
                )));
            };
            let x: f64 = a
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("terrain csv line {}: bad x", ln + 1)))?;
            let h: f64 = b
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("terrain csv line {}: bad height", ln + 1)))?;
            xs.push(x);
            hs.push(h);
        }
        if xs.len() < 2 {
            return Err(Error::Config(
                "terrain csv needs at least two samples".into(),
            ));
        }
        let spacing = xs[1] - xs[0];
        if !(spacing > 0.0) {
            return Err(Error::Config(
                "terrain csv samples must be increasing".into(),
            ));
        }
        for w in xs.windows(2) {
            if ((w[1] - w[0]) - spacing).abs() > 1e-9 {
                return Err(Error::Config("terrain csv samples must be uniform".into()));
            }
        }
        let params = TerrainParams {
            span: [xs[0], *xs.last().unwrap()],
            spacing,
            ..TerrainParams::default()
        };
        Ok(Self {
            kind,
            seed: seed_value,
            x0: xs[0],
            spacing,
            heights: hs,
            params,
        })
    }
}

// --- generation internals ---------------------------------------------------

/// Lattice gradient in [-1, 1] for integer coordinate `i`.
fn lattice_gradient(seed_value: u64, octave: u32, i: i64) -> f64 {
    let h = seed::derive(seed_value, "perlin", (u64::from(octave) << 32) ^ (i as u64));
    // Map the top 53 bits to [-1, 1).
    let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * unit - 1.0
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// One octave of 1D Perlin gradient noise.
fn perlin_1d(seed_value: u64, octave: u32, x: f64) -> f64 {
    let xi = x.floor() as i64;
    let t = x - xi as f64;
    let g0 = lattice_gradient(seed_value, octave, xi);
    let g1 = lattice_gradient(seed_value, octave, xi + 1);
    let a = g0 * t;
    let b = g1 * (t - 1.0);
    a + fade(t) * (b - a)
}

fn fractal_noise(seed_value: u64, x: f64, octaves: u32, frequency: f64) -> f64 {
    let mut total = 0.0;
    let mut freq = frequency;
    let mut amp = 1.0;
    for oct in 0..octaves {
        total += amp * perlin_1d(seed_value, oct, x * freq);
        freq *= 2.0;
        amp *= 0.5;
    }
    total
}

/// Repeating flight profile: up `n` steps, landing, down `n` steps, landing.
fn stair_profile(x: f64, p: &TerrainParams) -> f64 {
    const STEPS_PER_FLIGHT: f64 = 5.0;
    const LANDING: f64 = 1.0;
    if x <= 0.0 {
        // Flat approach on the -x side.
        return 0.0;
    }
    let flight = STEPS_PER_FLIGHT * p.stair_run;
    let period = 2.0 * flight + 2.0 * LANDING;
    let u = x % period;
    let peak = STEPS_PER_FLIGHT * p.stair_rise;
    if u < flight {
        (u / p.stair_run).floor() * p.stair_rise + p.stair_rise
    } else if u < flight + LANDING {
        peak
    } else if u < 2.0 * flight + LANDING {
        let d = u - flight - LANDING;
        peak - ((d / p.stair_run).floor() + 1.0) * p.stair_rise
    } else {
        0.0
    }
}

fn brick_profile(seed_value: u64, xs: &[f64], p: &TerrainParams) -> Vec<f64> {
    let mut rng = seed::rng(seed_value, "bricks", 0);
    let x_min = xs[0];
    let x_max = *xs.last().unwrap();
    // Brick edges laid out left to right, one height per brick.
    let mut edges = vec![x_min];
    let mut heights = Vec::new();
    let mut x = x_min;
    while x < x_max {
        let w = rng.random_range(p.brick_width[0]..=p.brick_width[1]);
        let h = rng.random_range(p.brick_height[0]..=p.brick_height[1]);
        x += w;
        edges.push(x);
        heights.push(h);
    }
    xs.iter()
        .map(|&xq| {
            // A strip around x = 0 stays flat so rollouts start on level ground.
            if xq.abs() < 1.0 {
                return 0.0;
            }
            let idx = edges.partition_point(|&e| e <= xq).saturating_sub(1);
            heights.get(idx).copied().unwrap_or(0.0)
        })
        .collect()
}
