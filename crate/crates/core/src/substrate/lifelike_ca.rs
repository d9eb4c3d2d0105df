//! Binary outer-totalistic automata on a toroidal Moore neighbourhood.
//!
//! Rows are stored as `u64` bitboards (bit `x` of row `y` is cell `(x, y)`), so
//! grids may be at most 64 cells wide. Neighbour counts are computed with
//! bit-sliced adders, 64 cells at a time.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{upsample_lattice, Frame};
use crate::rng::{uniform, uniform_range, Rng};
use crate::rollout::{NonFiniteState, Substrate};
use crate::theta::{Genome, SubstrateKind, Theta};

pub const RULE_BITS: u32 = 18;
pub const RULE_COUNT: u32 = 1 << RULE_BITS;
pub const MAX_WIDTH: usize = 64;

/// Birth mask in bits 0..=8, survive mask in bits 9..=17.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CaRule {
    packed: u32,
}

impl CaRule {
    pub const LIFE: CaRule = CaRule { packed: (1 << 3) | (1 << (9 + 2)) | (1 << (9 + 3)) };

    pub fn from_packed(packed: u32) -> Result<Self> {
        if packed >= RULE_COUNT {
            return Err(Error::InvalidArgument("packed rule must be below 2^18"));
        }
        Ok(CaRule { packed })
    }

    pub fn from_masks(birth: u16, survive: u16) -> Self {
        CaRule { packed: u32::from(birth & 0x1ff) | (u32::from(survive & 0x1ff) << 9) }
    }

    pub fn packed(self) -> u32 {
        self.packed
    }

    pub fn birth_mask(self) -> u16 {
        (self.packed & 0x1ff) as u16
    }

    pub fn survive_mask(self) -> u16 {
        ((self.packed >> 9) & 0x1ff) as u16
    }

    #[inline]
    pub fn births(self, count: usize) -> bool {
        self.birth_mask() >> count & 1 == 1
    }

    #[inline]
    pub fn survives(self, count: usize) -> bool {
        self.survive_mask() >> count & 1 == 1
    }

    /// Golly `B.../S...` notation with digits in ascending order.
    pub fn to_notation(self) -> String {
        let mut s = String::with_capacity(22);
        s.push('B');
        for d in 0..9 {
            if self.births(d) {
                s.push((b'0' + d as u8) as char);
            }
        }
        s.push_str("/S");
        for d in 0..9 {
            if self.survives(d) {
                s.push((b'0' + d as u8) as char);
            }
        }
        s
    }
}

impl fmt::Display for CaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_notation())
    }
}

impl Serialize for CaRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_notation())
    }
}

impl<'de> Deserialize<'de> for CaRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        rule_from_notation(&s).map_err(serde::de::Error::custom)
    }
}

/// Parse `B[0-8]*/S[0-8]*`. Digits may appear in any order but not twice.
pub fn rule_from_notation(text: &str) -> Result<CaRule> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let expect = |pos: &mut usize, c: u8, reason: &'static str| -> Result<()> {
        if bytes.get(*pos) == Some(&c) {
            *pos += 1;
            Ok(())
        } else {
            Err(Error::RuleParse { position: *pos, reason })
        }
    };
    let digits = |pos: &mut usize| -> Result<u16> {
        let mut mask = 0u16;
        while let Some(&b) = bytes.get(*pos) {
            if !b.is_ascii_digit() {
                break;
            }
            let d = b - b'0';
            if d > 8 {
                return Err(Error::RuleParse { position: *pos, reason: "neighbour count above 8" });
            }
            if mask >> d & 1 == 1 {
                return Err(Error::RuleParse { position: *pos, reason: "repeated digit" });
            }
            mask |= 1 << d;
            *pos += 1;
        }
        Ok(mask)
    };
    expect(&mut pos, b'B', "expected 'B'")?;
    let birth = digits(&mut pos)?;
    expect(&mut pos, b'/', "expected '/'")?;
    expect(&mut pos, b'S', "expected 'S'")?;
    let survive = digits(&mut pos)?;
    if pos != bytes.len() {
        return Err(Error::RuleParse { position: pos, reason: "trailing characters" });
    }
    Ok(CaRule::from_masks(birth, survive))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaState {
    width: usize,
    height: usize,
    rows: Vec<u64>,
}

impl CaState {
    pub fn dead(width: usize, height: usize) -> Self {
        assert!((1..=MAX_WIDTH).contains(&width), "grid width must be 1..=64");
        assert!(height >= 1, "grid height must be positive");
        CaState { width, height, rows: vec![0; height] }
    }

    pub fn from_cells(width: usize, height: usize, cells: &[u8]) -> Self {
        assert_eq!(cells.len(), width * height);
        let mut s = Self::dead(width, height);
        for y in 0..height {
            for x in 0..width {
                s.set(x, y, cells[y * width + x] != 0);
            }
        }
        s
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.rows[y] >> x & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, alive: bool) {
        if alive {
            self.rows[y] |= 1 << x;
        } else {
            self.rows[y] &= !(1u64 << x);
        }
    }

    pub fn population(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones() as usize).sum()
    }

    pub fn cells(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.get(x, y) as u8);
            }
        }
        out
    }

    /// Toroidal shift by `(dx, dy)`.
    pub fn translated(&self, dx: usize, dy: usize) -> Self {
        let mut out = Self::dead(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.set((x + dx) % self.width, (y + dy) % self.height, true);
                }
            }
        }
        out
    }

    #[inline]
    fn mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }
}

/// Every cell alive with probability `density`.
pub fn ca_init_with_density(rng: &mut Rng, width: usize, height: usize, density: f64) -> CaState {
    let mut state = CaState::dead(width, height);
    for y in 0..height {
        for x in 0..width {
            if uniform(rng) < density {
                state.set(x, y, true);
            }
        }
    }
    state
}

/// Draw a density once from `U(lo, hi)`, then fill cells independently.
pub fn ca_init(rng: &mut Rng, width: usize, height: usize, density: (f64, f64)) -> CaState {
    let p = uniform_range(rng, density.0, density.1);
    ca_init_with_density(rng, width, height, p)
}

/// One synchronous update of every cell.
pub fn ca_step(state: &CaState, rule: CaRule) -> CaState {
    let w = state.width;
    let h = state.height;
    let mask = state.mask();
    let rot_up = |x: u64| ((x << 1) | (x >> (w - 1))) & mask;
    let rot_down = |x: u64| ((x >> 1) | (x << (w - 1))) & mask;

    let mut births = [0u64; 9];
    let mut survives = [0u64; 9];
    for k in 0..9 {
        births[k] = if rule.births(k) { u64::MAX } else { 0 };
        survives[k] = if rule.survives(k) { u64::MAX } else { 0 };
    }
    let active: Vec<usize> = (0..9).filter(|&k| births[k] | survives[k] != 0).collect();

    let mut out = CaState::dead(w, h);
    for y in 0..h {
        let above = state.rows[(y + h - 1) % h];
        let mid = state.rows[y];
        let below = state.rows[(y + 1) % h];
        let neighbours = [
            rot_up(above),
            above,
            rot_down(above),
            rot_up(mid),
            rot_down(mid),
            rot_up(below),
            below,
            rot_down(below),
        ];
        // 4-bit counter per cell.
        let (mut s0, mut s1, mut s2, mut s3) = (0u64, 0u64, 0u64, 0u64);
        for b in neighbours {
            let c0 = s0 & b;
            s0 ^= b;
            let c1 = s1 & c0;
            s1 ^= c0;
            let c2 = s2 & c1;
            s2 ^= c1;
            s3 |= c2;
        }
        let planes = [(s0, !s0), (s1, !s1), (s2, !s2), (s3, !s3)];
        let mut next = 0u64;
        for &k in &active {
            let mut eq = u64::MAX;
            for (bit, (on, off)) in planes.iter().enumerate() {
                eq &= if k >> bit & 1 == 1 { *on } else { *off };
            }
            next |= eq & ((mid & survives[k]) | (!mid & births[k]));
        }
        out.rows[y] = next & mask;
    }
    out
}

/// Alive cells white, dead cells black, nearest-neighbour upsampled.
pub fn ca_render(state: &CaState, size: usize) -> Frame {
    upsample_lattice(state.height, state.width, size, |r, c| {
        if state.get(c, r) {
            [1.0; 3]
        } else {
            [0.0; 3]
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaConfig {
    pub width: usize,
    pub height: usize,
    pub density_lo: f64,
    pub density_hi: f64,
    pub render_size: usize,
}

impl Default for CaConfig {
    fn default() -> Self {
        CaConfig { width: 64, height: 64, density_lo: 0.05, density_hi: 0.4, render_size: 224 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifelikeCa {
    pub config: CaConfig,
}

impl LifelikeCa {
    pub fn new(config: CaConfig) -> Result<Self> {
        if !(1..=MAX_WIDTH).contains(&config.width) || config.height == 0 {
            return Err(Error::InvalidArgument("CA grid must be 1..=64 wide and non-empty"));
        }
        if !(0.0..=1.0).contains(&config.density_lo)
            || !(0.0..=1.0).contains(&config.density_hi)
            || config.density_lo > config.density_hi
        {
            return Err(Error::InvalidArgument("CA density range must lie in [0, 1]"));
        }
        Ok(LifelikeCa { config })
    }

    pub fn theta(rule: CaRule) -> Theta {
        Theta::bits(SubstrateKind::LifelikeCa, u64::from(rule.packed()), RULE_BITS)
    }
}

impl Substrate for LifelikeCa {
    type Params = CaRule;
    type State = CaState;

    fn kind(&self) -> SubstrateKind {
        SubstrateKind::LifelikeCa
    }

    fn genome_dim(&self) -> usize {
        RULE_BITS as usize
    }

    fn decode(&self, theta: &Theta) -> Result<CaRule> {
        theta.validate(SubstrateKind::LifelikeCa, RULE_BITS as usize)?;
        match theta.genome {
            Genome::Bits { packed, .. } => CaRule::from_packed(packed as u32),
            Genome::Real(_) => Err(Error::InvalidArgument("CA genome must be a bit genome")),
        }
    }

    fn init(&self, _rule: &CaRule, rng: &mut Rng) -> CaState {
        let c = &self.config;
        ca_init(rng, c.width, c.height, (c.density_lo, c.density_hi))
    }

    fn step(&self, rule: &CaRule, state: &CaState) -> Result<CaState, NonFiniteState> {
        Ok(ca_step(state, *rule))
    }

    fn render(&self, _rule: &CaRule, state: &CaState) -> Frame {
        ca_render(state, self.config.render_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng;
    use crate::rollout::{rollout, RolloutSpec};
    use proptest::prelude::*;

    /// Per-cell rule-table oracle, independent of the bitboard path.
    fn oracle_step(cells: &[u8], w: usize, h: usize, rule: CaRule) -> Vec<u8> {
        let mut out = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut n = 0;
                for (i, dy) in [h - 1, 0, 1].into_iter().enumerate() {
                    for (j, dx) in [w - 1, 0, 1].into_iter().enumerate() {
                        if i == 1 && j == 1 {
                            continue;
                        }
                        n += cells[((y + dy) % h) * w + (x + dx) % w] as usize;
                    }
                }
                let alive = cells[y * w + x] == 1;
                out[y * w + x] = if alive { rule.survives(n) } else { rule.births(n) } as u8;
            }
        }
        out
    }

    fn grid(w: usize, h: usize, live: &[(usize, usize)]) -> CaState {
        let mut s = CaState::dead(w, h);
        for &(x, y) in live {
            s.set(x, y, true);
        }
        s
    }

    #[test]
    fn notation_examples() {
        assert_eq!(rule_from_notation("B3/S23").unwrap().packed(), 6152);
        assert_eq!(rule_from_notation("B3/S23").unwrap(), CaRule::LIFE);
        assert_eq!(rule_from_notation("B/S").unwrap().packed(), 0);
        assert!(matches!(
            rule_from_notation("B3/S33"),
            Err(Error::RuleParse { position: 5, .. })
        ));
        assert!(matches!(rule_from_notation("B9/S"), Err(Error::RuleParse { position: 1, .. })));
        assert!(matches!(rule_from_notation("S23/B3"), Err(Error::RuleParse { position: 0, .. })));
        assert!(matches!(rule_from_notation("B3S23"), Err(Error::RuleParse { position: 2, .. })));
        assert!(matches!(rule_from_notation("B3/S23x"), Err(Error::RuleParse { position: 6, .. })));
        assert_eq!(rule_from_notation("B63/S32").unwrap().to_notation(), "B36/S23");
    }

    #[test]
    fn blinker_rotates() {
        let vertical = grid(5, 5, &[(2, 1), (2, 2), (2, 3)]);
        let horizontal = grid(5, 5, &[(1, 2), (2, 2), (3, 2)]);
        assert_eq!(ca_step(&vertical, CaRule::LIFE), horizontal);
        assert_eq!(ca_step(&horizontal, CaRule::LIFE), vertical);
    }

    #[test]
    fn glider_moves_diagonally() {
        // .#.
        // ..#
        // ###
        let glider = grid(8, 8, &[(1, 0), (2, 1), (0, 2), (1, 2), (2, 2)]);
        let mut s = glider.clone();
        for _ in 0..4 {
            s = ca_step(&s, CaRule::LIFE);
        }
        assert_eq!(s, glider.translated(1, 1));
    }

    #[test]
    fn empty_rule_kills_everything() {
        let mut rng = make_rng(1, 0);
        let s = ca_init_with_density(&mut rng, 16, 16, 0.5);
        assert!(s.population() > 0);
        assert_eq!(ca_step(&s, CaRule::from_masks(0, 0)).population(), 0);
    }

    #[test]
    fn init_density_hooks() {
        let mut rng = make_rng(3, 0);
        assert_eq!(ca_init_with_density(&mut rng, 64, 64, 0.0).population(), 0);
        assert_eq!(ca_init_with_density(&mut rng, 64, 64, 1.0).population(), 64 * 64);
    }

    #[test]
    fn init_density_within_binomial_band() {
        // Density p ~ U(0.05, 0.4); the observed fraction must lie within
        // [0.05, 0.4] widened by 3 standard deviations of Binomial(4096, p).
        let n = 64.0 * 64.0;
        for seed in 0..20 {
            let mut rng = make_rng(seed, 0);
            let s = ca_init(&mut rng, 64, 64, (0.05, 0.4));
            let frac = s.population() as f64 / n;
            let lo = 0.05 - 3.0 * libm::sqrt(0.05 * 0.95 / n);
            let hi = 0.4 + 3.0 * libm::sqrt(0.4 * 0.6 / n);
            assert!(frac >= lo && frac <= hi, "seed {seed}: {frac}");
        }
    }

    #[test]
    fn render_examples() {
        let dead = CaState::dead(64, 64);
        assert!(ca_render(&dead, 224).pixels().iter().all(|&p| p == 0.0));
        let mut alive = CaState::dead(64, 64);
        for y in 0..64 {
            for x in 0..64 {
                alive.set(x, y, true);
            }
        }
        assert!(ca_render(&alive, 224).pixels().iter().all(|&p| p == 1.0));
        let one = grid(64, 64, &[(10, 20)]);
        let f = ca_render(&one, 256);
        let white = f.pixels().chunks(3).filter(|p| p[0] == 1.0).count();
        assert_eq!(white, (256 / 64) * (256 / 64));
        assert_eq!(f.get(40, 80), [1.0; 3]);
    }

    #[test]
    fn rollout_zero_steps_is_rendered_init() {
        let ca = LifelikeCa::new(CaConfig { render_size: 64, ..CaConfig::default() }).unwrap();
        let theta = LifelikeCa::theta(CaRule::LIFE);
        let spec = RolloutSpec::new(0, vec![0], 7).unwrap();
        let traj = rollout(&ca, &theta, &spec).unwrap();
        let mut rng = make_rng(7, crate::rng::STREAM_INIT);
        let s0 = ca.init(&CaRule::LIFE, &mut rng);
        assert_eq!(traj.frames[0], ca_render(&s0, 64));
        let again = rollout(&ca, &theta, &spec).unwrap();
        assert_eq!(traj, again);
    }

    #[test]
    fn dead_grid_stays_dead_without_b0() {
        let dead = CaState::dead(7, 5);
        for packed in 0..RULE_COUNT {
            let rule = CaRule::from_packed(packed).unwrap();
            let next = ca_step(&dead, rule);
            assert_eq!(next.population() == 0, !rule.births(0), "{rule}");
        }
    }

    proptest! {
        #[test]
        fn matches_oracle(packed in 0u32..RULE_COUNT, w in 1usize..=64, h in 1usize..12, seed: u64) {
            let rule = CaRule::from_packed(packed).unwrap();
            let mut rng = make_rng(seed, 0);
            let s = ca_init_with_density(&mut rng, w, h, 0.4);
            let expected = oracle_step(&s.cells(), w, h, rule);
            prop_assert_eq!(ca_step(&s, rule).cells(), expected);
        }

        #[test]
        fn commutes_with_translation(packed in 0u32..RULE_COUNT, dx in 0usize..16, dy in 0usize..16, seed: u64) {
            let rule = CaRule::from_packed(packed).unwrap();
            let mut rng = make_rng(seed, 0);
            let s = ca_init_with_density(&mut rng, 16, 16, 0.3);
            prop_assert_eq!(ca_step(&s.translated(dx, dy), rule), ca_step(&s, rule).translated(dx, dy));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn notation_round_trip(packed in 0u32..RULE_COUNT) {
            let rule = CaRule::from_packed(packed).unwrap();
            prop_assert_eq!(rule_from_notation(&rule.to_notation()).unwrap(), rule);
        }
    }
}
