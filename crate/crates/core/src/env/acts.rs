//! The robot's dialogue-act catalogue.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::game::{CellId, Variant};

/// Gesture or motor command attached to a verbalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandTag {
    Hello,
    Please,
    Happy,
    No,
    Think,
    Asr,
    Read,
}

impl CommandTag {
    pub const ALL: [CommandTag; 7] = [
        CommandTag::Hello,
        CommandTag::Please,
        CommandTag::Happy,
        CommandTag::No,
        CommandTag::Think,
        CommandTag::Asr,
        CommandTag::Read,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        match self {
            CommandTag::Hello => "hello",
            CommandTag::Please => "please",
            CommandTag::Happy => "happy",
            CommandTag::No => "no",
            CommandTag::Think => "think",
            CommandTag::Asr => "asr",
            CommandTag::Read => "read",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feedback {
    Win,
    Loss,
    Draw,
}

/// Coarse act classes; game moves collapse into one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActKind {
    Greeting,
    ProvideName,
    FeedbackWin,
    FeedbackLoss,
    FeedbackDraw,
    GameMove,
    RequestPlay,
    RequestUserMove,
    ReplyPlayYes,
    Closing,
}

impl ActKind {
    pub const COUNT: usize = 10;

    pub const ALL: [ActKind; 10] = [
        ActKind::Greeting,
        ActKind::ProvideName,
        ActKind::FeedbackWin,
        ActKind::FeedbackLoss,
        ActKind::FeedbackDraw,
        ActKind::GameMove,
        ActKind::RequestPlay,
        ActKind::RequestUserMove,
        ActKind::ReplyPlayYes,
        ActKind::Closing,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DialogueAct {
    Greeting,
    ProvideName,
    Feedback(Feedback),
    GameMove(CellId),
    RequestPlay,
    RequestUserMove,
    ReplyPlayYes,
    Closing,
}

/// The nine conversational acts, in catalogue order.
pub const CONVERSATIONAL_ACTS: [DialogueAct; 9] = [
    DialogueAct::Greeting,
    DialogueAct::ProvideName,
    DialogueAct::Feedback(Feedback::Win),
    DialogueAct::Feedback(Feedback::Loss),
    DialogueAct::Feedback(Feedback::Draw),
    DialogueAct::RequestPlay,
    DialogueAct::RequestUserMove,
    DialogueAct::ReplyPlayYes,
    DialogueAct::Closing,
];

impl DialogueAct {
    pub const fn kind(self) -> ActKind {
        match self {
            DialogueAct::Greeting => ActKind::Greeting,
            DialogueAct::ProvideName => ActKind::ProvideName,
            DialogueAct::Feedback(Feedback::Win) => ActKind::FeedbackWin,
            DialogueAct::Feedback(Feedback::Loss) => ActKind::FeedbackLoss,
            DialogueAct::Feedback(Feedback::Draw) => ActKind::FeedbackDraw,
            DialogueAct::GameMove(_) => ActKind::GameMove,
            DialogueAct::RequestPlay => ActKind::RequestPlay,
            DialogueAct::RequestUserMove => ActKind::RequestUserMove,
            DialogueAct::ReplyPlayYes => ActKind::ReplyPlayYes,
            DialogueAct::Closing => ActKind::Closing,
        }
    }

    pub const fn is_game_move(self) -> bool {
        matches!(self, DialogueAct::GameMove(_))
    }

    pub const fn verbalisation(self) -> &'static str {
        match self {
            DialogueAct::Greeting => "Hello!",
            DialogueAct::ProvideName => "I am Pepper",
            DialogueAct::Feedback(Feedback::Win) => "Yes, I won!",
            DialogueAct::Feedback(Feedback::Loss) => "No, I lost.",
            DialogueAct::Feedback(Feedback::Draw) => "It's a draw.",
            DialogueAct::GameMove(_) => "I take this one",
            DialogueAct::RequestPlay => "Would you like to play a game?",
            DialogueAct::RequestUserMove => "your turn",
            DialogueAct::ReplyPlayYes => "Nice. Let me start.",
            DialogueAct::Closing => "Good bye!",
        }
    }

    pub const fn command(self) -> Option<CommandTag> {
        match self {
            DialogueAct::Greeting => Some(CommandTag::Hello),
            DialogueAct::ProvideName => Some(CommandTag::Please),
            DialogueAct::Feedback(Feedback::Win) => Some(CommandTag::Happy),
            DialogueAct::Feedback(Feedback::Loss) => Some(CommandTag::No),
            DialogueAct::Feedback(Feedback::Draw) => Some(CommandTag::Think),
            DialogueAct::RequestPlay => Some(CommandTag::Asr),
            DialogueAct::RequestUserMove => Some(CommandTag::Read),
            DialogueAct::GameMove(_) | DialogueAct::ReplyPlayYes | DialogueAct::Closing => None,
        }
    }

    /// Label in the `Kind(argument)` notation used by the dialogue corpus.
    pub fn label(self, variant: Variant) -> String {
        match self {
            DialogueAct::Greeting => "Salutation(greeting)".into(),
            DialogueAct::ProvideName => "Provide(name)".into(),
            DialogueAct::Feedback(Feedback::Win) => "Provide(feedback=win)".into(),
            DialogueAct::Feedback(Feedback::Loss) => "Provide(feedback=loose)".into(),
            DialogueAct::Feedback(Feedback::Draw) => "Provide(feedback=draw)".into(),
            DialogueAct::GameMove(c) => format!("GameMove(gridloc={})", c.name(variant)),
            DialogueAct::RequestPlay => "Request(playGame)".into(),
            DialogueAct::RequestUserMove => "Request(userGameMove)".into(),
            DialogueAct::ReplyPlayYes => "Reply(playGame=yes)".into(),
            DialogueAct::Closing => "Salutation(closing)".into(),
        }
    }

    /// Full utterance with the bracketed command, as the robot would say it.
    pub fn multimodal_text(self, variant: Variant) -> String {
        match (self, self.command()) {
            (DialogueAct::GameMove(c), _) => format!(
                "{} [who=rob^what=draw^where={}]",
                self.verbalisation(),
                c.name(variant)
            ),
            (_, Some(tag)) => format!("{} [who=rob^what={}]", self.verbalisation(), tag.name()),
            (_, None) => self.verbalisation().to_string(),
        }
    }

    pub fn parse_label(variant: Variant, label: &str) -> Option<DialogueAct> {
        if let Some(rest) = label.strip_prefix("GameMove(gridloc=") {
            let name = rest.strip_suffix(')')?;
            return CellId::parse(variant, name).ok().map(DialogueAct::GameMove);
        }
        CONVERSATIONAL_ACTS
            .iter()
            .copied()
            .find(|a| a.label(variant) == label)
    }
}

/// Fixed set of up to 128 action indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionSet(u128);

impl ActionSet {
    pub const fn empty() -> Self {
        ActionSet(0)
    }

    pub fn all(n: usize) -> Self {
        debug_assert!(n <= 128);
        if n == 128 {
            ActionSet(u128::MAX)
        } else {
            ActionSet((1u128 << n) - 1)
        }
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1u128 << i;
    }

    pub fn remove(&mut self, i: usize) {
        self.0 &= !(1u128 << i);
    }

    pub const fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn union(self, other: ActionSet) -> ActionSet {
        ActionSet(self.0 | other.0)
    }

    pub const fn difference(self, other: ActionSet) -> ActionSet {
        ActionSet(self.0 & !other.0)
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    /// The `k`-th member in ascending order.
    pub fn nth(self, k: usize) -> Option<usize> {
        self.iter().nth(k)
    }
}

impl FromIterator<usize> for ActionSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut s = ActionSet::empty();
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

/// Indexed action catalogue: game moves first (by cell index), then the
/// nine conversational acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActCatalogue {
    variant: Variant,
}

impl ActCatalogue {
    pub const fn new(variant: Variant) -> Self {
        ActCatalogue { variant }
    }

    pub const fn variant(self) -> Variant {
        self.variant
    }

    /// 18 for standard, 90 for ultimate.
    pub const fn len(self) -> usize {
        self.variant.cell_count() + CONVERSATIONAL_ACTS.len()
    }

    pub const fn is_empty(self) -> bool {
        false
    }

    pub fn act(self, index: usize) -> DialogueAct {
        let cells = self.variant.cell_count();
        if index < cells {
            DialogueAct::GameMove(CellId::new(self.variant, index).expect("in range"))
        } else {
            CONVERSATIONAL_ACTS[index - cells]
        }
    }

    pub fn index_of(self, act: DialogueAct) -> usize {
        let cells = self.variant.cell_count();
        match act {
            DialogueAct::GameMove(c) => c.index(),
            other => {
                cells
                    + CONVERSATIONAL_ACTS
                        .iter()
                        .position(|&a| a == other)
                        .expect("conversational act in catalogue")
            }
        }
    }

    pub fn acts(self) -> impl Iterator<Item = DialogueAct> {
        (0..self.len()).map(move |i| self.act(i))
    }

    /// Indices of all acts of the given kinds.
    pub fn indices_of_kinds(self, kinds: &[ActKind]) -> ActionSet {
        (0..self.len()).filter(|&i| kinds.contains(&self.act(i).kind())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_sizes() {
        assert_eq!(ActCatalogue::new(Variant::Standard).len(), 18);
        assert_eq!(ActCatalogue::new(Variant::Ultimate).len(), 90);
    }

    #[test]
    fn index_round_trip_and_labels() {
        for v in [Variant::Standard, Variant::Ultimate] {
            let cat = ActCatalogue::new(v);
            for (i, act) in cat.acts().enumerate() {
                assert_eq!(cat.index_of(act), i);
                assert_eq!(DialogueAct::parse_label(v, &act.label(v)), Some(act));
            }
        }
    }

    #[test]
    fn seven_command_tags_cover_conversational_acts() {
        let tags: std::collections::HashSet<_> =
            CONVERSATIONAL_ACTS.iter().filter_map(|a| a.command()).collect();
        assert_eq!(tags.len(), 7);
    }

    #[test]
    fn action_set_ops() {
        let mut s = ActionSet::empty();
        s.insert(3);
        s.insert(89);
        assert_eq!(s.len(), 2);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 89]);
        assert_eq!(s.nth(1), Some(89));
        s.remove(3);
        assert!(!s.contains(3));
        assert_eq!(ActionSet::all(18).len(), 18);
    }
}
