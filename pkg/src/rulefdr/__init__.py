"""rulefdr: multiple-testing-aware evaluation of technical trading rules.

Pipeline: market data -> rule signals -> after-cost excess returns ->
shared-draw stationary-bootstrap p-values -> discrete-FDR selection ->
rolling out-of-sample portfolios, plus a Monte Carlo study validating the
selection machinery against fixed-lambda FDR and stepwise FWER baselines.
"""

from .backtest import (
    CostModel,
    ExcessReturnPanel,
    Performance,
    break_even_tc,
    closure_indicators,
    excess_returns,
    performance,
)
from .bootstrap import (
    BootstrapPlan,
    PValueSet,
    bootstrap_statistics,
    discrete_p_values,
    observed_statistics,
    panel_p_values,
    stationary_bootstrap_indices,
)
from .errors import (
    AlignmentError,
    ConfigError,
    DataError,
    InsufficientDataError,
    ParseError,
    RuleFdrError,
)
from .harness import (
    CrossValResult,
    PortfolioSeries,
    RollingConfig,
    WindowResult,
    annual_aggregate,
    build_portfolio,
    cross_validate,
    disaggregate_by_family,
    persistence,
    persistence_blocks,
    rolling_evaluate,
    stress_split,
)
from .market_data import (
    PriceSeries,
    ReturnSeries,
    RiskFreeSeries,
    StressSeries,
    align,
    daily_risk_free,
    load_price_series,
    load_risk_free_series,
    load_stress_series,
    log_returns,
)
from .mht import (
    DfdrSelection,
    LambdaGrid,
    ProportionEstimate,
    RwSelection,
    dfdr_procedure,
    dfdr_select,
    dfdr_select_negative,
    estimate_proportions,
    pi0_estimate,
    right_boundary_lambda,
    rw_stepm_select,
    storey_fixed_select,
)
from .montecarlo import SimDesign, SimOutcome, run_power_study, simulate_panel
from .rules import (
    DEFAULT_GRID,
    RuleSpec,
    SignalMatrix,
    Universe,
    enumerate_universe,
    generate_signal_matrix,
)

__version__ = "0.1.0"
