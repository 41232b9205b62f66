//! Rules engine tour: solves the standard board with a plain negamax over
//! play/unplay, then plays a random ultimate game and shows the forced
//! subgrids.
//!
//! cargo run --release --example game_rules -- [seed]

use noughts::game::{render_board, CellId, GameState, GameStatus, Player, Variant};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Value for the side to move: 1 win, 0 draw, -1 loss.
fn negamax(s: &mut GameState, nodes: &mut u64) -> i32 {
    *nodes += 1;
    match s.status() {
        GameStatus::Win(p) => return if p == s.to_move() { 1 } else { -1 },
        GameStatus::Draw => return 0,
        GameStatus::Ongoing => {}
    }
    let mut best = -1;
    for c in s.legal_moves().expect("ongoing") {
        s.play(c).expect("legal");
        best = best.max(-negamax(s, nodes));
        s.unplay().expect("just played");
        if best == 1 {
            break;
        }
    }
    best
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(7), |s| s.parse())?;

    let mut s = GameState::new(Variant::Standard, Player::Cross);
    let mut nodes = 0;
    let v = negamax(&mut s, &mut nodes);
    println!("standard board, perfect play: {} ({nodes} nodes)", ["second player wins", "draw", "first player wins"][(v + 1) as usize]);
    for c in s.legal_moves()? {
        let mut after = s.apply(c)?;
        let reply = -negamax(&mut after, &mut 0);
        println!("  opening {:<13} -> {}", c.name(Variant::Standard), ["loses", "draws", "wins"][(reply + 1) as usize]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = GameState::new(Variant::Ultimate, Player::Cross);
    while !u.status().is_over() {
        let moves = u.legal_moves()?;
        let c: CellId = *moves.choose(&mut rng).expect("ongoing game has moves");
        if u.move_count() < 6 {
            println!(
                "{:?} to move, forced subgrid {:?}, {} legal, plays {}",
                u.to_move(),
                u.active_subgrid(),
                moves.len(),
                c.name(Variant::Ultimate)
            );
        }
        u.play(c)?;
    }
    println!("\nrandom ultimate game after {} moves: {:?}", u.move_count(), u.status());
    println!("{}", render_board(&u));
    println!("macro board: {:?}", u.macro_board());
    Ok(())
}
