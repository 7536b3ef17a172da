"""Pricing and hedging of DeFi lending positions as down-and-out barrier options.

The package covers: GBM path simulation under physical and risk-neutral
measures (:mod:`loanhedge.market`), the loan contract's liquidation rule and
payoffs (:mod:`loanhedge.contract`), closed-form no-spread pricing with Monte
Carlo validators (:mod:`loanhedge.analytic`), the self-financing wealth
recursion with transaction costs (:mod:`loanhedge.wealth`), delta and trained
recurrent hedging policies (:mod:`loanhedge.strategies`), the nonlinear
pricing drivers (:mod:`loanhedge.drivers`), and a config-driven experiment
harness (:mod:`loanhedge.harness`, CLI in :mod:`loanhedge.cli`).
"""

from .analytic import (
    BarrierCallQuote,
    BarrierOrMaturityRule,
    FirstHitLevelRule,
    FixedTimeRule,
    MCEstimate,
    StoppingRule,
    barrier_mc_grid,
    barrier_mc_price,
    digital_call,
    down_and_out_price,
    european_price_curve,
    mc_stopped_value,
    norm_cdf,
    vanilla_call,
)
from .contract import (
    LiquidationResult,
    LoanTerms,
    RateSet,
    first_hit_steps,
    liquidation_time,
    payoff,
    payoff_matrix,
    protocol_covered_payoff,
)
from .drivers import (
    DriverInput,
    ScaledState,
    driver_f,
    driver_g,
    driver_g_bar,
    scale_state,
    unscale_state,
)
from .errors import (
    ConfigError,
    GradientCheckError,
    MetricError,
    NumericsError,
    ParameterError,
    SpreadError,
    TrainingDivergedError,
)
from .market import (
    GbmParams,
    MeasureChange,
    PathBatch,
    Scheme,
    TimeGrid,
    risk_neutral_drift,
    simulate_paths,
)
from .strategies import (
    ConstantStrategy,
    DeltaStrategy,
    NeuralStrategy,
    PolicyParams,
    Strategy,
    TrainConfig,
    TrainingLog,
    delta_position,
    gradient_check,
    initial_policy_params,
    policy_eval,
    train_deep_hedge,
)
from .wealth import (
    CostModel,
    HedgeTrajectory,
    RelativeErrorStats,
    mean_relative_error,
    mean_squared_error,
    rebalance_cost,
    roll_forward,
    wealth_step,
    wealth_step_expanded,
)

__version__ = "0.1.0"
