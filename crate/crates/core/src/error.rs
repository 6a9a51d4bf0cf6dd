use thiserror::Error;

/// Reasons a game cannot be created.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SetupError {
    #[error("a game needs three or four players, got {0}")]
    InvalidPlayerCount(usize),
    #[error("player id `{0}` is used twice")]
    DuplicatePlayer(String),
    #[error("corpus has no target sentences")]
    EmptyCorpus,
    #[error("bad config: {0}")]
    BadConfig(String),
}

/// Reasons an event is rejected. A rejected event never changes the state.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("not allowed in the current phase")]
    WrongPhase,
    #[error("not your turn")]
    NotYourTurn,
    #[error("unknown seat")]
    UnknownSeat,
    #[error("illegal payload: {0}")]
    IllegalPayload(String),
    #[error("the game is over")]
    GameAlreadyOver,
    #[error("already voted in this ballot")]
    AlreadyVoted,
    #[error("chat is only open during a debate")]
    ChatClosed,
    #[error("no debate messages left")]
    ChatLimitReached,
    #[error("not enough points")]
    InsufficientPoints,
    #[error("a player cannot freeze themselves")]
    CannotFreezeSelf,
    #[error("unknown target seat")]
    UnknownTarget,
    #[error("card is not in your hand")]
    CardNotHeld,
    #[error("deck and discard pile are both empty")]
    DeckAndDiscardEmpty,
}

impl RuleError {
    /// Stable code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            RuleError::WrongPhase => "WrongPhase",
            RuleError::NotYourTurn => "NotYourTurn",
            RuleError::UnknownSeat => "UnknownSeat",
            RuleError::IllegalPayload(_) => "IllegalPayload",
            RuleError::GameAlreadyOver => "GameAlreadyOver",
            RuleError::AlreadyVoted => "AlreadyVoted",
            RuleError::ChatClosed => "ChatClosed",
            RuleError::ChatLimitReached => "ChatLimitReached",
            RuleError::InsufficientPoints => "InsufficientPoints",
            RuleError::CannotFreezeSelf => "CannotFreezeSelf",
            RuleError::UnknownTarget => "UnknownTarget",
            RuleError::CardNotHeld => "CardNotHeld",
            RuleError::DeckAndDiscardEmpty => "DeckAndDiscardEmpty",
        }
    }
}
