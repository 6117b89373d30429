"""Market-making simulation lab.

Hidden-price market with informed/uninformed (or noisy-observation)
traders, an exact Bayesian quoting policy, observable-only tabular and
network Q-learning policies, loss/spread metrics, and a CLI driving
reproducible seeded experiments to CSV.
"""

from .belief import (
    BayesianMarketMaker,
    Belief,
    Quote,
    ZeroLikelihood,
    belief_stats,
    diffuse,
    posterior_trade,
    solve_quotes,
    two_point_quote_oracle,
)
from .dqn import DqnMarketMaker, NonFiniteLoss, ReplayBuffer, ValueNet
from .env import (
    MarketParams,
    MarketState,
    ScenarioDriver,
    TradeEvent,
    TraderNoise,
    arrival_at,
    scenario_advance,
    step_price,
    trader_decision,
)
from .experiment import (
    ExperimentConfig,
    SweepSpec,
    load_config,
    run_experiment,
    run_sweep,
)
from .metrics import (
    AggregateStats,
    DegenerateSeries,
    NoTrades,
    RunRecord,
    fit_decay_rate,
    fit_growth_exponent,
    monetary_loss,
    percent_loss_per_trade,
    risk_rho,
)
from .qtable import (
    QTable,
    RLParams,
    TabularMarketMaker,
    compute_reward,
    imbalance,
    select_action,
    td_update,
    verify_argmax_claim,
    verify_update_claim,
)

__version__ = "0.1.0"
