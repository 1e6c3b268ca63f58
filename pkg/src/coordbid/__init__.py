"""Coordinated versus independent auto-bidding in repeated second-price auctions."""

__version__ = "0.1.0"

from .assumption import (
    delta_quadrature,
    estimate_delta,
    estimate_delta_i,
    estimate_G,
    estimate_L,
    estimate_value_curve,
    find_lambda_star,
)
from .auction import RoundOutcome, run_round
from .bidders import MD_ROS, TRIGGER_OVERBID, TRUTHFUL, Algorithm, BidderState, make_bidder, next_bid, observe
from .config import builtin_config, load_config
from .coordination import ALL_TRUTHFUL, HIGHEST_VALUE, INDEPENDENT, MechanismSpec, produce_bids
from .distributions import Beta, CappedNormal, Empirical, RandomStream, TruncNormal, Uniform
from .exceptions import ConfigError, NoRootInBracket, SimulationError
from .mirror_map import ENTROPY, md_update, md_update_argmin
from .simulator import MetricsSeries, ScenarioConfig, SummaryStats, run_once, run_paired, run_replications
from .stats import EstimateWithCI
