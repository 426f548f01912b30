//! Demand correspondences, competitive equilibria and structural checks for
//! trading networks whose utilities need not be quasi-linear.

pub mod adapters;
pub mod demand;
pub mod equilibrium;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod mechanisms;
pub mod model;
pub mod properties;
pub mod utility;

pub use error::{Error, Result};
pub use model::{join_meet_prices, Arrangement, Bundle, FirmId, PriceVector, Role, Trade, TradeNetwork};
pub use utility::{FirmUtility, PriceBox, UtilityProfile};
