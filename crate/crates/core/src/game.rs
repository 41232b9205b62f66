//! Rules engines for standard (3x3) and ultimate (9x9) noughts and crosses.
//!
//! A single [`GameState`] type serves both variants. Ultimate cells are
//! indexed subgrid-major (`index = subgrid * 9 + square`), so the square of a
//! move directly names the subgrid the opponent is sent to.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The eight winning lines of a 3x3 grid, row-major indices.
pub const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

/// Lines through each square of a 3x3 grid.
const LINES_THROUGH: [&[usize]; 9] = [
    &[0, 3, 6],
    &[0, 4],
    &[0, 5, 7],
    &[1, 3],
    &[1, 4, 6, 7],
    &[1, 5],
    &[2, 3, 7],
    &[2, 4],
    &[2, 5, 6],
];

/// Location names for the standard board, row-major.
pub const STANDARD_CELL_NAMES: [&str; 9] = [
    "upperLeft",
    "upperMiddle",
    "upperRight",
    "middleLeft",
    "middle",
    "middleRight",
    "lowerLeft",
    "lowerMiddle",
    "lowerRight",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("illegal move {0}")]
    IllegalMove(CellId),
    #[error("the game is already over")]
    GameOver,
    #[error("no move to undo")]
    EmptyHistory,
    #[error("cell index {index} out of range for the {variant} board")]
    CellOutOfRange { variant: Variant, index: usize },
    #[error("cannot parse {0:?}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Standard,
    Ultimate,
}

impl Variant {
    pub const fn cell_count(self) -> usize {
        match self {
            Variant::Standard => 9,
            Variant::Ultimate => 81,
        }
    }

    /// Side length of the full board in squares.
    pub const fn side(self) -> usize {
        match self {
            Variant::Standard => 3,
            Variant::Ultimate => 9,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Ultimate => "ultimate",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "3x3" => Ok(Variant::Standard),
            "ultimate" | "9x9" => Ok(Variant::Ultimate),
            _ => Err(GameError::Parse(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    Nought,
    Cross,
}

impl Player {
    pub const fn opponent(self) -> Player {
        match self {
            Player::Nought => Player::Cross,
            Player::Cross => Player::Nought,
        }
    }

    pub const fn mark(self) -> Mark {
        match self {
            Player::Nought => Mark::Nought,
            Player::Cross => Mark::Cross,
        }
    }

    pub const fn symbol(self) -> char {
        match self {
            Player::Nought => 'O',
            Player::Cross => 'X',
        }
    }
}

impl FromStr for Player {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "O" | "o" | "nought" | "Nought" => Ok(Player::Nought),
            "X" | "x" | "cross" | "Cross" => Ok(Player::Cross),
            _ => Err(GameError::Parse(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Mark {
    Nought,
    Cross,
    #[default]
    Empty,
}

impl Mark {
    pub const fn player(self) -> Option<Player> {
        match self {
            Mark::Nought => Some(Player::Nought),
            Mark::Cross => Some(Player::Cross),
            Mark::Empty => None,
        }
    }

    pub const fn symbol(self) -> char {
        match self {
            Mark::Nought => 'O',
            Mark::Cross => 'X',
            Mark::Empty => '.',
        }
    }

    fn from_symbol(c: char) -> Option<Mark> {
        match c {
            'O' => Some(Mark::Nought),
            'X' => Some(Mark::Cross),
            '.' => Some(Mark::Empty),
            _ => None,
        }
    }
}

/// State of one subgrid as seen from the macro board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum MacroCell {
    #[default]
    Open,
    Won(Player),
    Draw,
}

impl MacroCell {
    pub const fn is_open(self) -> bool {
        matches!(self, MacroCell::Open)
    }

    pub const fn symbol(self) -> char {
        match self {
            MacroCell::Open => '.',
            MacroCell::Won(p) => p.symbol(),
            MacroCell::Draw => 'D',
        }
    }

    fn from_symbol(c: char) -> Option<MacroCell> {
        match c {
            '.' => Some(MacroCell::Open),
            'O' => Some(MacroCell::Won(Player::Nought)),
            'X' => Some(MacroCell::Won(Player::Cross)),
            'D' => Some(MacroCell::Draw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GameStatus {
    Ongoing,
    Win(Player),
    Draw,
}

impl GameStatus {
    pub const fn is_over(self) -> bool {
        !matches!(self, GameStatus::Ongoing)
    }
}

/// A board square. Standard cells are row-major `0..9`; ultimate cells are
/// `subgrid * 9 + square` in `0..81`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(u8);

impl CellId {
    pub fn new(variant: Variant, index: usize) -> Result<Self, GameError> {
        if index < variant.cell_count() {
            Ok(CellId(index as u8))
        } else {
            Err(GameError::CellOutOfRange { variant, index })
        }
    }

    /// Ultimate cell from its subgrid and square, both in `0..9`.
    pub fn from_parts(subgrid: usize, square: usize) -> Result<Self, GameError> {
        if subgrid < 9 && square < 9 {
            Ok(CellId((subgrid * 9 + square) as u8))
        } else {
            Err(GameError::CellOutOfRange {
                variant: Variant::Ultimate,
                index: subgrid * 9 + square,
            })
        }
    }

    pub(crate) const fn raw(index: usize) -> Self {
        CellId(index as u8)
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub const fn subgrid(self) -> usize {
        self.0 as usize / 9
    }

    pub const fn square(self) -> usize {
        self.0 as usize % 9
    }

    /// Display coordinates `(row, col)` on the full board.
    pub const fn board_position(self, variant: Variant) -> (usize, usize) {
        match variant {
            Variant::Standard => (self.index() / 3, self.index() % 3),
            Variant::Ultimate => {
                let (g, q) = (self.subgrid(), self.square());
                (3 * (g / 3) + q / 3, 3 * (g % 3) + q % 3)
            }
        }
    }

    pub fn from_board_position(variant: Variant, row: usize, col: usize) -> Result<Self, GameError> {
        let side = variant.side();
        if row >= side || col >= side {
            return Err(GameError::CellOutOfRange {
                variant,
                index: row * side + col,
            });
        }
        Ok(match variant {
            Variant::Standard => CellId((row * 3 + col) as u8),
            Variant::Ultimate => {
                let g = (row / 3) * 3 + col / 3;
                let q = (row % 3) * 3 + col % 3;
                CellId((g * 9 + q) as u8)
            }
        })
    }

    /// `upperLeft` … `lowerRight` for standard; `a1` … `i9` (letter = board row,
    /// digit = board column) for ultimate.
    pub fn name(self, variant: Variant) -> String {
        match variant {
            Variant::Standard => STANDARD_CELL_NAMES[self.index()].to_string(),
            Variant::Ultimate => {
                let (row, col) = self.board_position(variant);
                format!("{}{}", (b'a' + row as u8) as char, col + 1)
            }
        }
    }

    pub fn parse(variant: Variant, s: &str) -> Result<Self, GameError> {
        let t = s.trim();
        if let Ok(i) = t.parse::<usize>() {
            return CellId::new(variant, i);
        }
        let err = || GameError::Parse(s.to_string());
        match variant {
            Variant::Standard => {
                let norm = t
                    .to_ascii_lowercase()
                    .replace(['_', '-', ' '], "")
                    .replace("top", "upper")
                    .replace("bottom", "lower")
                    .replace("center", "middle")
                    .replace("centre", "middle");
                let norm = if norm == "middlemiddle" { "middle".to_string() } else { norm };
                STANDARD_CELL_NAMES
                    .iter()
                    .position(|n| n.to_ascii_lowercase() == norm)
                    .map(|i| CellId(i as u8))
                    .ok_or_else(err)
            }
            Variant::Ultimate => {
                let bytes = t.as_bytes();
                if bytes.len() != 2 {
                    return Err(err());
                }
                let row = bytes[0].to_ascii_lowercase().wrapping_sub(b'a') as usize;
                let col = (bytes[1] as char).to_digit(10).ok_or_else(err)? as usize;
                if row >= 9 || !(1..=9).contains(&col) {
                    return Err(err());
                }
                CellId::from_board_position(variant, row, col - 1)
            }
        }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// One entry of the move history. Ordinals start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlacedMove {
    pub cell: CellId,
    pub player: Player,
    pub ordinal: u32,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GameState {
    variant: Variant,
    cells: [Mark; 81],
    macro_board: [MacroCell; 9],
    to_move: Player,
    active: Option<u8>,
    history: Vec<PlacedMove>,
}

impl fmt::Debug for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GameState({} to move {:?}: {})", self.variant, self.to_move, self)
    }
}

fn line_owner(cells: &[Mark], base: usize, line: &[usize; 3]) -> Option<Player> {
    let a = cells[base + line[0]];
    if a != Mark::Empty && a == cells[base + line[1]] && a == cells[base + line[2]] {
        a.player()
    } else {
        None
    }
}

fn grid_has_line_through(cells: &[Mark], base: usize, square: usize, player: Player) -> bool {
    let m = player.mark();
    LINES_THROUGH[square].iter().any(|&l| {
        let line = LINES[l];
        line.iter().all(|&q| q == square || cells[base + q] == m)
    })
}

impl GameState {
    pub fn new(variant: Variant, first: Player) -> Self {
        GameState {
            variant,
            cells: [Mark::Empty; 81],
            macro_board: [MacroCell::Open; 9],
            to_move: first,
            active: None,
            history: Vec::with_capacity(variant.cell_count()),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn cells(&self) -> &[Mark] {
        &self.cells[..self.variant.cell_count()]
    }

    pub fn cell(&self, cell: CellId) -> Mark {
        self.cells[cell.index()]
    }

    /// Macro board; all `Open` for the standard variant.
    pub fn macro_board(&self) -> &[MacroCell; 9] {
        &self.macro_board
    }

    pub fn to_move(&self) -> Player {
        self.to_move
    }

    /// The subgrid the player to move is confined to, if any.
    pub fn active_subgrid(&self) -> Option<usize> {
        self.active.map(usize::from)
    }

    pub fn history(&self) -> &[PlacedMove] {
        &self.history
    }

    pub fn move_count(&self) -> usize {
        self.history.len()
    }

    pub fn status(&self) -> GameStatus {
        match self.variant {
            Variant::Standard => {
                for line in &LINES {
                    if let Some(p) = line_owner(&self.cells, 0, line) {
                        return GameStatus::Win(p);
                    }
                }
                if self.cells[..9].iter().all(|&m| m != Mark::Empty) {
                    GameStatus::Draw
                } else {
                    GameStatus::Ongoing
                }
            }
            Variant::Ultimate => {
                for line in &LINES {
                    if let MacroCell::Won(p) = self.macro_board[line[0]] {
                        if line[1..].iter().all(|&g| self.macro_board[g] == MacroCell::Won(p)) {
                            return GameStatus::Win(p);
                        }
                    }
                }
                if self.macro_board.iter().all(|g| !g.is_open()) {
                    GameStatus::Draw
                } else {
                    GameStatus::Ongoing
                }
            }
        }
    }

    /// Legality ignoring whether the game has ended.
    fn is_playable(&self, cell: CellId) -> bool {
        let i = cell.index();
        if i >= self.variant.cell_count() || self.cells[i] != Mark::Empty {
            return false;
        }
        match self.variant {
            Variant::Standard => true,
            Variant::Ultimate => {
                let g = cell.subgrid();
                self.macro_board[g].is_open() && self.active.is_none_or(|a| a as usize == g)
            }
        }
    }

    pub fn is_legal(&self, cell: CellId) -> bool {
        self.is_playable(cell) && !self.status().is_over()
    }

    /// Appends the legal moves to `out` (nothing once the game is over).
    pub fn legal_moves_into(&self, out: &mut Vec<CellId>) {
        if self.status().is_over() {
            return;
        }
        match (self.variant, self.active) {
            (Variant::Standard, _) => {
                out.extend((0..9).filter(|&i| self.cells[i] == Mark::Empty).map(CellId::raw))
            }
            (Variant::Ultimate, Some(g)) => {
                let base = g as usize * 9;
                out.extend(
                    (base..base + 9)
                        .filter(|&i| self.cells[i] == Mark::Empty)
                        .map(CellId::raw),
                )
            }
            (Variant::Ultimate, None) => {
                for g in 0..9 {
                    if self.macro_board[g].is_open() {
                        out.extend(
                            (g * 9..g * 9 + 9)
                                .filter(|&i| self.cells[i] == Mark::Empty)
                                .map(CellId::raw),
                        );
                    }
                }
            }
        }
    }

    pub fn legal_moves(&self) -> Result<Vec<CellId>, GameError> {
        if self.status().is_over() {
            return Err(GameError::GameOver);
        }
        let mut out = Vec::with_capacity(self.variant.cell_count());
        self.legal_moves_into(&mut out);
        Ok(out)
    }

    /// Plays `cell` for the player to move, in place.
    pub fn play(&mut self, cell: CellId) -> Result<(), GameError> {
        if self.status().is_over() {
            return Err(GameError::GameOver);
        }
        if !self.is_playable(cell) {
            return Err(GameError::IllegalMove(cell));
        }
        self.place(cell);
        Ok(())
    }

    fn place(&mut self, cell: CellId) {
        let player = self.to_move;
        self.cells[cell.index()] = player.mark();
        if self.variant == Variant::Ultimate {
            let g = cell.subgrid();
            let base = g * 9;
            if grid_has_line_through(&self.cells, base, cell.square(), player) {
                self.macro_board[g] = MacroCell::Won(player);
            } else if self.cells[base..base + 9].iter().all(|&m| m != Mark::Empty) {
                self.macro_board[g] = MacroCell::Draw;
            }
            let target = cell.square();
            self.active = self.macro_board[target].is_open().then_some(target as u8);
        }
        self.history.push(PlacedMove {
            cell,
            player,
            ordinal: self.history.len() as u32 + 1,
        });
        self.to_move = player.opponent();
    }

    /// Reverts the last move in place.
    pub fn unplay(&mut self) -> Result<PlacedMove, GameError> {
        let last = self.history.pop().ok_or(GameError::EmptyHistory)?;
        self.cells[last.cell.index()] = Mark::Empty;
        self.to_move = last.player;
        if self.variant == Variant::Ultimate {
            // Moves only ever enter open subgrids.
            self.macro_board[last.cell.subgrid()] = MacroCell::Open;
            self.active = self.history.last().and_then(|prev| {
                let target = prev.cell.square();
                self.macro_board[target].is_open().then_some(target as u8)
            });
        }
        Ok(last)
    }

    pub fn apply(&self, cell: CellId) -> Result<GameState, GameError> {
        let mut next = self.clone();
        next.play(cell)?;
        Ok(next)
    }

    pub fn undo(&self) -> Result<GameState, GameError> {
        let mut prev = self.clone();
        prev.unplay()?;
        Ok(prev)
    }

    /// Whether placing `player`'s mark on the (empty) `cell` would win the game.
    pub fn wins_with(&self, cell: CellId, player: Player) -> bool {
        match self.variant {
            Variant::Standard => grid_has_line_through(&self.cells, 0, cell.index(), player),
            Variant::Ultimate => {
                let g = cell.subgrid();
                if !grid_has_line_through(&self.cells, g * 9, cell.square(), player) {
                    return false;
                }
                let won = MacroCell::Won(player);
                LINES_THROUGH[g].iter().any(|&l| {
                    LINES[l].iter().all(|&h| h == g || self.macro_board[h] == won)
                })
            }
        }
    }

    /// Legal moves that would immediately win the game for `player` if it were
    /// `player`'s turn.
    pub fn immediate_wins(&self, player: Player) -> Vec<CellId> {
        let mut moves = Vec::new();
        self.legal_moves_into(&mut moves);
        moves.retain(|&c| self.wins_with(c, player));
        moves
    }

    pub fn has_immediate_win(&self, player: Player) -> bool {
        if self.status().is_over() {
            return false;
        }
        let n = self.variant.cell_count();
        match self.active {
            Some(g) => {
                let base = g as usize * 9;
                (base..base + 9).any(|i| {
                    self.cells[i] == Mark::Empty && self.wins_with(CellId::raw(i), player)
                })
            }
            None => (0..n).any(|i| {
                let c = CellId::raw(i);
                self.is_playable(c) && self.wins_with(c, player)
            }),
        }
    }

    /// Textual board: one character per cell, row-major, rows split by `/`.
    /// Ultimate boards append ` macro=<9 chars> active=<0-8|->`.
    pub fn to_board_string(&self) -> String {
        let side = self.variant.side();
        let mut s = String::with_capacity(self.variant.cell_count() + 40);
        for row in 0..side {
            if row > 0 {
                s.push('/');
            }
            for col in 0..side {
                let c = CellId::from_board_position(self.variant, row, col).expect("in range");
                s.push(self.cells[c.index()].symbol());
            }
        }
        if self.variant == Variant::Ultimate {
            s.push_str(" macro=");
            s.extend(self.macro_board.iter().map(|m| m.symbol()));
            s.push_str(" active=");
            match self.active {
                Some(g) => s.push((b'0' + g) as char),
                None => s.push('-'),
            }
        }
        s
    }

    /// Parses the textual board. History is reconstructed in cell order,
    /// alternating from `first`, so ordinals are synthetic.
    pub fn parse_board(s: &str, first: Player) -> Result<GameState, GameError> {
        let err = || GameError::Parse(s.to_string());
        let mut fields = s.split_whitespace();
        let board = fields.next().ok_or_else(err)?;
        let rows: Vec<&str> = board.split('/').collect();
        let variant = match rows.len() {
            3 => Variant::Standard,
            9 => Variant::Ultimate,
            _ => return Err(err()),
        };
        let side = variant.side();
        let mut state = GameState::new(variant, first);
        for (row, line) in rows.iter().enumerate() {
            let chars: Vec<char> = line.chars().collect();
            if chars.len() != side {
                return Err(err());
            }
            for (col, &ch) in chars.iter().enumerate() {
                let c = CellId::from_board_position(variant, row, col)?;
                state.cells[c.index()] = Mark::from_symbol(ch).ok_or_else(err)?;
            }
        }
        let mut macro_field = None;
        let mut active_field = None;
        for f in fields {
            if let Some(m) = f.strip_prefix("macro=") {
                macro_field = Some(m);
            } else if let Some(a) = f.strip_prefix("active=") {
                active_field = Some(a);
            } else {
                return Err(err());
            }
        }
        if variant == Variant::Ultimate {
            for g in 0..9 {
                let base = g * 9;
                state.macro_board[g] = LINES
                    .iter()
                    .find_map(|l| line_owner(&state.cells, base, l))
                    .map(MacroCell::Won)
                    .unwrap_or(if state.cells[base..base + 9].iter().all(|&m| m != Mark::Empty) {
                        MacroCell::Draw
                    } else {
                        MacroCell::Open
                    });
            }
            if let Some(m) = macro_field {
                let given: Vec<MacroCell> =
                    m.chars().map(MacroCell::from_symbol).collect::<Option<_>>().ok_or_else(err)?;
                if given.as_slice() != state.macro_board {
                    return Err(err());
                }
            }
            state.active = match active_field {
                None | Some("-") => None,
                Some(a) => {
                    let g: u8 = a.parse().map_err(|_| err())?;
                    if g >= 9 || !state.macro_board[g as usize].is_open() {
                        return Err(err());
                    }
                    Some(g)
                }
            };
        } else if macro_field.is_some() || active_field.is_some() {
            return Err(err());
        }

        let firsts: Vec<usize> = (0..variant.cell_count())
            .filter(|&i| state.cells[i] == first.mark())
            .collect();
        let seconds: Vec<usize> = (0..variant.cell_count())
            .filter(|&i| state.cells[i] == first.opponent().mark())
            .collect();
        if firsts.len() != seconds.len() && firsts.len() != seconds.len() + 1 {
            return Err(err());
        }
        let mut player = first;
        let (mut a, mut b) = (firsts.into_iter(), seconds.into_iter());
        loop {
            let next = if player == first { a.next() } else { b.next() };
            let Some(i) = next else { break };
            state.history.push(PlacedMove {
                cell: CellId::raw(i),
                player,
                ordinal: state.history.len() as u32 + 1,
            });
            player = player.opponent();
        }
        state.to_move = player;
        Ok(state)
    }
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_board_string())
    }
}

impl FromStr for GameState {
    type Err = GameError;

    /// Parses assuming crosses moved first.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GameState::parse_board(s, Player::Cross)
    }
}

/// Multi-line rendering for terminals.
pub fn render_board(state: &GameState) -> String {
    let side = state.variant().side();
    let mut out = String::new();
    for row in 0..side {
        if state.variant() == Variant::Ultimate && row > 0 && row % 3 == 0 {
            out.push_str("------+-------+------\n");
        }
        for col in 0..side {
            if state.variant() == Variant::Ultimate && col > 0 && col % 3 == 0 {
                out.push_str("| ");
            }
            let c = CellId::from_board_position(state.variant(), row, col).expect("in range");
            out.push(state.cell(c).symbol());
            out.push(' ');
        }
        out.pop();
        out.push('\n');
    }
    out
}
