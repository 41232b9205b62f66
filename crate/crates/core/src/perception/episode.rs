use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::classifier::{GlyphClassifier, OracleClassifier};
use super::glyphs::{render_glyph, segment_distance, GlyphParams, NoiseParams};
use super::tracker::{Tracker, TrackerEvent};
use super::{default_tau, Frame, Glyph, RHO};
use crate::drl::{EvalReport, Policy, TrainError};
use crate::env::Environment;
use crate::game::{CellId, Player, Variant};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverConfig {
    pub glyph: GlyphParams,
    pub noise: NoiseParams,
    /// Strength of the patch disturbances; 0 renders clean squares.
    pub noise_level: f64,
    /// Frames with the hand in view per user move.
    pub occluded_frames: usize,
    /// Stable frames offered per user move before giving up.
    pub stable_frames: usize,
    /// Standard deviation of per-pixel camera noise.
    pub sensor_sigma: f64,
    /// Occlusion threshold; `None` uses the default for the board size.
    pub tau: Option<f64>,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        ObserverConfig {
            glyph: GlyphParams::default(),
            noise: NoiseParams::default(),
            noise_level: 0.0,
            occluded_frames: 2,
            stable_frames: 8,
            sensor_sigma: 0.004,
            tau: None,
        }
    }
}

/// Square patches of a board, each rendered once when its glyph appears.
#[derive(Debug, Clone)]
pub struct BoardRenderer {
    n: usize,
    patches: Vec<Vec<f64>>,
    glyph: GlyphParams,
    noise: NoiseParams,
    noise_level: f64,
    oracle: Option<OracleClassifier>,
}

impl BoardRenderer {
    /// An empty board. Every patch rendered is registered with `oracle`.
    pub fn new<R: Rng + ?Sized>(n: usize, config: &ObserverConfig, oracle: Option<OracleClassifier>, rng: &mut R) -> Self {
        let mut r = BoardRenderer {
            n,
            patches: Vec::with_capacity(n * n),
            glyph: config.glyph.clone(),
            noise: config.noise.clone(),
            noise_level: config.noise_level,
            oracle,
        };
        for _ in 0..n * n {
            let p = r.render(Glyph::Nothing, rng);
            r.patches.push(p);
        }
        r
    }

    fn render<R: Rng + ?Sized>(&self, glyph: Glyph, rng: &mut R) -> Vec<f64> {
        let p = render_glyph(glyph, &self.glyph, &self.noise, self.noise_level, rng);
        if let Some(o) = &self.oracle {
            o.insert(&p, glyph);
        }
        p
    }

    pub fn side(&self) -> usize {
        self.n * RHO
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, square: usize, glyph: Glyph, rng: &mut R) {
        self.patches[square] = self.render(glyph, rng);
    }

    /// Centre of `square` in frame pixels.
    pub fn centre(&self, square: usize) -> (f64, f64) {
        let (r, c) = (square / self.n, square % self.n);
        ((c * RHO + RHO / 2) as f64, (r * RHO + RHO / 2) as f64)
    }

    /// The board as seen by the camera. A hand is a disc a quarter of the
    /// board across at `hand`, with an arm reaching to the lower edge.
    pub fn frame<R: Rng + ?Sized>(&self, hand: Option<(f64, f64)>, sensor_sigma: f64, rng: &mut R) -> Frame {
        let side = self.side();
        let mut px = vec![0.0; side * side];
        for (sq, patch) in self.patches.iter().enumerate() {
            let (r, c) = (sq / self.n, sq % self.n);
            for y in 0..RHO {
                let start = (r * RHO + y) * side + c * RHO;
                px[start..start + RHO].copy_from_slice(&patch[y * RHO..(y + 1) * RHO]);
            }
        }
        if let Some(h) = hand {
            let radius = 0.125 * side as f64;
            let elbow = (h.0 + 0.3 * side as f64, side as f64 + radius);
            for y in 0..side {
                for x in 0..side {
                    let p = (x as f64, y as f64);
                    let d = segment_distance(p, h, elbow);
                    if d < radius {
                        px[y * side + x] = 0.45 + 0.1 * (d / radius);
                    }
                }
            }
        }
        if sensor_sigma > 0.0 {
            let normal = Normal::new(0.0, sensor_sigma).expect("finite sensor noise");
            px.iter_mut().for_each(|v| *v += normal.sample(rng));
        }
        Frame::from_pixels(side, px)
    }
}

/// How the tracker read one user move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recognition {
    Correct,
    Wrong { square: usize, glyph: Glyph },
    Missed,
}

impl Recognition {
    pub fn is_correct(self) -> bool {
        self == Recognition::Correct
    }
}

/// Renders a game as a stream of camera frames and reads the user's moves
/// back through a [`Tracker`]. Misread moves are replaced by the true move
/// so the game can go on.
pub struct MoveObserver<'c, C: GlyphClassifier + ?Sized> {
    variant: Variant,
    renderer: BoardRenderer,
    tracker: Tracker,
    classifier: &'c C,
    config: ObserverConfig,
    rng: ChaCha8Rng,
}

impl<'c, C: GlyphClassifier + ?Sized> MoveObserver<'c, C> {
    pub fn new(
        variant: Variant,
        classifier: &'c C,
        config: ObserverConfig,
        oracle: Option<OracleClassifier>,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let n = variant.side();
        let renderer = BoardRenderer::new(n, &config, oracle, &mut rng);
        let tau = config.tau.unwrap_or_else(|| default_tau(n * RHO));
        let mut obs = MoveObserver {
            variant,
            renderer,
            tracker: Tracker::with_tau(n, tau),
            classifier,
            config,
            rng,
        };
        // Fill the label histories before the first move; anything read on
        // the empty board is discarded.
        for _ in 0..3 {
            if let TrackerEvent::Committed { square, .. } = obs.feed(None) {
                obs.tracker.uncommit(square);
            }
        }
        obs
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn renderer(&self) -> &BoardRenderer {
        &self.renderer
    }

    pub fn square(&self, cell: CellId) -> usize {
        let (r, c) = cell.board_position(self.variant);
        r * self.variant.side() + c
    }

    fn feed(&mut self, hand: Option<(f64, f64)>) -> TrackerEvent {
        let frame = self.renderer.frame(hand, self.config.sensor_sigma, &mut self.rng);
        self.tracker
            .step(&frame, self.classifier)
            .expect("renderer and tracker share the board size")
    }

    /// A move the robot makes; it is known, so it is committed directly.
    pub fn robot_move(&mut self, cell: CellId, player: Player) {
        let sq = self.square(cell);
        let g = Glyph::of_player(player);
        self.renderer.draw(sq, g, &mut self.rng);
        self.tracker.commit(sq, g);
    }

    /// The user draws `player`'s glyph on `cell`: hand-occluded frames while
    /// drawing, then stable frames until the tracker commits a move.
    pub fn user_move(&mut self, cell: CellId, player: Player) -> Recognition {
        let sq = self.square(cell);
        let truth = Glyph::of_player(player);
        let (cx, cy) = self.renderer.centre(sq);
        let mut committed = None;
        for k in 0..self.config.occluded_frames {
            if k == self.config.occluded_frames / 2 {
                self.renderer.draw(sq, truth, &mut self.rng);
            }
            let hand = (
                cx + self.rng.gen_range(-6.0..6.0),
                cy + RHO as f64 * 0.3 + self.rng.gen_range(-6.0..6.0),
            );
            if let TrackerEvent::Committed { square, glyph, .. } = self.feed(Some(hand)) {
                committed.get_or_insert((square, glyph));
            }
        }
        if self.config.occluded_frames == 0 {
            self.renderer.draw(sq, truth, &mut self.rng);
        }
        for _ in 0..self.config.stable_frames {
            if committed.is_some() {
                break;
            }
            if let TrackerEvent::Committed { square, glyph, .. } = self.feed(None) {
                committed = Some((square, glyph));
            }
        }
        match committed {
            Some((square, glyph)) if square == sq && glyph == truth => Recognition::Correct,
            Some((square, glyph)) => {
                if square != sq {
                    self.tracker.uncommit(square);
                }
                self.tracker.commit(sq, truth);
                Recognition::Wrong { square, glyph }
            }
            None => {
                self.tracker.commit(sq, truth);
                Recognition::Missed
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionEpisode {
    pub noise_level: f64,
    pub eval: EvalReport,
    pub user_moves: u64,
    pub misrecognitions: u64,
    pub misrecognition_rate: f64,
}

/// Greedy games against the simulated user in which every user move is
/// read from rendered frames by the tracker. The environment keeps the true
/// moves; disagreements are counted as misrecognitions.
pub fn run_episode_with_perception<C: GlyphClassifier + ?Sized>(
    policy: &Policy,
    classifier: &C,
    config: &ObserverConfig,
    games: u64,
    seed: u64,
) -> Result<PerceptionEpisode, TrainError> {
    if games == 0 {
        return Err(TrainError::Config("games must be positive".into()));
    }
    let variant = policy.variant();
    let (mut user_moves, mut misses) = (0u64, 0u64);
    let mut results = Vec::with_capacity(games as usize);
    for g in 0..games {
        let mut env = Environment::new(policy.kit.clone(), seed::stream(seed, &format!("perception/user/{g}")));
        let render_rng = seed::stream(seed, &format!("perception/render/{g}"));
        let mut obs = MoveObserver::new(variant, classifier, config.clone(), None, render_rng);
        let robot = env.state().robot();
        let (mut seen, mut total) = (0, 0.0);
        loop {
            let a = policy.greedy_action(env.state_mut(), false)?;
            let out = env.step(a)?;
            total += out.reward.value();
            let history = env.state().game().history();
            for m in &history[seen..] {
                if m.player == robot {
                    obs.robot_move(m.cell, m.player);
                } else {
                    user_moves += 1;
                    misses += u64::from(!obs.user_move(m.cell, m.player).is_correct());
                }
            }
            seen = history.len();
            if out.terminal {
                let s = env.state();
                results.push((total / s.step_count() as f64, s.step_count(), s.outcome()));
                break;
            }
        }
    }
    Ok(PerceptionEpisode {
        noise_level: config.noise_level,
        eval: EvalReport::summarize(results),
        user_moves,
        misrecognitions: misses,
        misrecognition_rate: misses as f64 / user_moves.max(1) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub games: u64,
    pub user_moves: u64,
    pub mismatches: u64,
    /// Patches the oracle had never seen, i.e. frames with a hand in view
    /// that the tracker failed to reject.
    pub oracle_misses: u64,
}

/// Random games read through the tracker with an exact oracle classifier
/// and no camera noise, so any disagreement is the tracker's own. Each game
/// picks the user's symbol and who starts at random.
pub fn check_tracker_with_oracle(variant: Variant, games: u64, config: &ObserverConfig, seed: u64) -> OracleCheck {
    let config = ObserverConfig {
        sensor_sigma: 0.0,
        ..config.clone()
    };
    let mut check = OracleCheck {
        games,
        user_moves: 0,
        mismatches: 0,
        oracle_misses: 0,
    };
    let mut legal = Vec::new();
    for g in 0..games {
        let mut rng = seed::stream(seed, &format!("oracle/game/{g}"));
        let oracle = OracleClassifier::new();
        let user = if rng.gen_bool(0.5) { Player::Nought } else { Player::Cross };
        let first = if rng.gen_bool(0.5) { user } else { user.opponent() };
        let mut game = crate::game::GameState::new(variant, first);
        let render_rng = seed::stream(seed, &format!("oracle/render/{g}"));
        let mut obs = MoveObserver::new(variant, &oracle, config.clone(), Some(oracle.clone()), render_rng);
        while !game.status().is_over() {
            legal.clear();
            game.legal_moves_into(&mut legal);
            let cell = legal[rng.gen_range(0..legal.len())];
            let player = game.to_move();
            game.play(cell).expect("legal move");
            if player == user {
                check.user_moves += 1;
                check.mismatches += u64::from(!obs.user_move(cell, player).is_correct());
            } else {
                obs.robot_move(cell, player);
            }
        }
        check.oracle_misses += oracle.misses();
    }
    check
}
