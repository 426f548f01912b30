use thiserror::Error;

/// Errors raised by the core operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("duplicate trade id `{0}`")]
    DuplicateTradeId(String),
    #[error("trade `{0}` has the same buyer and seller")]
    SelfLoop(String),
    #[error("unknown firm `{0}`")]
    UnknownFirm(String),
    #[error("unknown trade `{0}`")]
    UnknownTrade(String),
    #[error("network has {0} trades; at most {max} are supported", max = crate::model::MAX_TRADES)]
    TooManyTrades(usize),
    #[error("price vectors belong to different networks (lengths {0} and {1})")]
    NetworkMismatch(usize, usize),
    #[error("expression error: {0}")]
    Expr(#[from] crate::expr::ExprError),
    #[error("firm `{0}` has no feasible bundle")]
    AllInfeasible(String),
    #[error("bundle {bundle} is not contained in the trades of firm `{firm}`")]
    BundleOutOfScope { firm: String, bundle: String },
    #[error("bundle {bundle} listed twice for firm `{firm}`")]
    DuplicateBundle { firm: String, bundle: String },
    #[error("expression for bundle {bundle} of firm `{firm}` references price of `{trade}` outside the bundle")]
    UnknownPriceSymbol { firm: String, bundle: String, trade: String },
    #[error("firm `{0}` is not a terminal buyer")]
    NotTerminalBuyer(String),
    #[error("firm `{0}` is not a terminal seller")]
    NotTerminalSeller(String),
    #[error("coalition members must all be terminal buyers or all terminal sellers: `{0}`")]
    NotTerminalBuyers(String),
    #[error("utility of firm `{0}` is not unit-demand (or unit-supply)")]
    NotUnitDemand(String),
    #[error("expression for trade `{trade}` is not strictly monotone in its price (at {at})")]
    NonMonotoneExpr { trade: String, at: f64 },
    #[error("utility profile does not cover firm `{0}`")]
    MissingUtility(String),
    #[error("bundle {0} is not demanded at the given prices")]
    NotDemanded(String),
    #[error("price pair does not follow the required comparison pattern: {0}")]
    PatternViolation(String),
    #[error("tie-breaking schedule exhausted at point {point} after {rounds} rounds")]
    ScheduleExhausted { point: usize, rounds: usize },
    #[error("empty price box")]
    EmptyBox,
    #[error("price vector {0} is not an equilibrium")]
    NotAnEquilibriumInput(String),
    #[error("empty equilibrium set")]
    EmptySet,
    #[error("no equilibrium found in the search box")]
    NoEquilibriumFound,
    #[error("not an induced exchange network: {0}")]
    NotInducedNetwork(String),
    #[error("invalid market: {0}")]
    InvalidMarket(String),
}

pub type Result<T> = std::result::Result<T, Error>;
