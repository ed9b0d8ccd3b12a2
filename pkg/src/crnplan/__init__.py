"""Planning with seeded simulations: common random numbers for comparing
policies and actions in finite-horizon MDPs."""

from .errors import (
    AgreementWarning,
    ConfigurationError,
    InsufficientDataError,
    InvalidDistributionError,
    RuleViolationError,
    TerminalStateError,
)
from .mdp import Policy, TabularMdp, exact_value, utility
from .seeding import SeedContext, SeedScheme, derive_seed, evaluate

__version__ = "0.1.0"
