"""Flow-level simulator of join-max-available-capacity scheduling.

Arriving flows always take the path with the most available capacity, ties
broken uniformly at random; each flow occupies exactly one resource unit
for its holding time and is lost when every path is full.

The replication loop runs on a compiled kernel when the extension built
(allpath._balance_core), otherwise on the pure-python twin.  Replications
are independent and the first warmup fraction of each is discarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

try:  # pragma: no cover - depends on the build
    from . import _balance_core as _kernel
    KERNEL = "cython"
except ImportError:  # pragma: no cover
    from . import _balance_py as _kernel
    KERNEL = "python"

from ._balance_py import HOLD_DCMIX, HOLD_DET, HOLD_EXP

WARMUP_FRACTION = 0.1

# Data-center mixture: rare fixed-size elephants among uniform mice,
# holding times for 1 Gbps paths.
DC_ELEPHANT_FRACTION = 0.01
DC_ELEPHANT_HOLDING_S = 100e6 * 8 / 1e9  # 100 MB chunk at 1 Gbps
DC_MOUSE_HOLDING_RANGE_S = (2e3 * 8 / 1e9, 50e3 * 8 / 1e9)  # 2..50 KB


class BalanceError(ValueError):
    pass


@dataclass
class TrafficMix:
    elephant_fraction: float = DC_ELEPHANT_FRACTION
    elephant_holding_s: float = DC_ELEPHANT_HOLDING_S
    mouse_holding_range_s: tuple = DC_MOUSE_HOLDING_RANGE_S

    def __post_init__(self):
        if not 0.0 <= self.elephant_fraction <= 1.0:
            raise BalanceError("elephant fraction must be a probability")
        lo, hi = self.mouse_holding_range_s
        if lo > hi or lo < 0:
            raise BalanceError("bad mouse holding range")

    @property
    def mean_holding_s(self):
        lo, hi = self.mouse_holding_range_s
        return (self.elephant_fraction * self.elephant_holding_s
                + (1 - self.elephant_fraction) * (lo + hi) / 2)

    def kernel_params(self):
        lo, hi = self.mouse_holding_range_s
        return HOLD_DCMIX, self.elephant_fraction, self.elephant_holding_s, lo, hi


def schedule(available, rng):
    """Chosen path index for the given available-capacity vector, or None.

    Picks argmax(available); ties are broken uniformly with rng.random();
    returns None (loss) when no path has spare capacity.
    """
    best = max(available)
    if best <= 0:
        return None
    winners = [i for i, s in enumerate(available) if s == best]
    if len(winners) == 1:
        return winners[0]
    return winners[int(rng.random() * len(winners)) % len(winners)]


def jain_index(u):
    """(sum u)^2 / (N * sum u^2); 1 is perfectly even, 1/N one-path-only."""
    if not len(u):
        raise BalanceError("empty utilization vector")
    if any(x < 0 for x in u):
        raise BalanceError("utilizations must be nonnegative")
    sq = sum(x * x for x in u)
    if sq == 0:
        raise BalanceError("all-zero utilization vector")
    s = sum(u)
    return s * s / (len(u) * sq)


@dataclass
class BalanceReport:
    capacities: list
    arrival_rate: float
    replications: int
    u: list  # mean utilization per path
    u_ci: list  # 95% half-width per path (None with a single replication)
    loss_probability: float
    loss_ci: float | None
    fairness_index: float
    u_reps: list  # per-replication utilization vectors
    lp_reps: list


def _ci_half_width(samples):
    n = len(samples)
    if n < 2:
        return None
    mean = sum(samples) / n
    var = sum((x - mean) ** 2 for x in samples) / (n - 1)
    from scipy.stats import t as t_dist

    return float(t_dist.ppf(0.975, n - 1)) * math.sqrt(var / n)


def _mix_seed(seed, rep):
    # distinct well-separated splitmix64 starting points per replication
    return (seed * 0x9E3779B97F4A7C15 + rep * 0xBF58476D1CE4E5B9 + 1) & ((1 << 64) - 1)


def simulate(capacities, arrival_rate, holding, duration, replications=1, seed=0,
             warmup_fraction=WARMUP_FRACTION):
    """Run independent replications; holding is ('exp', mean), ('det', value)
    or a TrafficMix."""
    capacities = [int(c) for c in capacities]
    if not capacities or any(c < 1 for c in capacities):
        raise BalanceError("capacities must be positive integers")
    if duration <= 0:
        raise BalanceError("duration must be positive")
    if arrival_rate <= 0:
        raise BalanceError("arrival rate must be positive")
    if replications < 1:
        raise BalanceError("need at least one replication")

    if isinstance(holding, TrafficMix):
        kind, p0, p1, p2, p3 = holding.kernel_params()
    else:
        name, value = holding
        if name == "exp":
            kind, p0, p1, p2, p3 = HOLD_EXP, float(value), 0.0, 0.0, 0.0
        elif name == "det":
            kind, p0, p1, p2, p3 = HOLD_DET, float(value), 0.0, 0.0, 0.0
        else:
            raise BalanceError("unknown holding distribution %r" % (name,))

    n = len(capacities)
    warmup = duration * warmup_fraction
    u_reps = []
    lp_reps = []
    for rep in range(replications):
        busy, span, arrivals, losses = _kernel.run_replication(
            capacities, arrival_rate, duration, warmup,
            _mix_seed(seed, rep), kind, p0, p1, p2, p3)
        u_reps.append([busy[i] / (span * capacities[i]) for i in range(n)])
        lp_reps.append(losses / arrivals if arrivals else 0.0)

    u = [sum(rep[i] for rep in u_reps) / replications for i in range(n)]
    lp = sum(lp_reps) / replications
    return BalanceReport(
        capacities=capacities,
        arrival_rate=arrival_rate,
        replications=replications,
        u=u,
        u_ci=[_ci_half_width([rep[i] for rep in u_reps]) for i in range(n)],
        loss_probability=lp,
        loss_ci=_ci_half_width(lp_reps),
        fairness_index=jain_index(u),
        u_reps=u_reps,
        lp_reps=lp_reps,
    )


def arrival_rate_for_load(rho, capacities, mean_holding_s):
    """Offered load rho = lambda * E[holding] / total capacity."""
    if rho <= 0:
        raise BalanceError("rho must be positive")
    return rho * sum(capacities) / mean_holding_s


def simulate_dc(capacities=None, rho=1.0, mix=None, duration=10.0, replications=10,
                seed=0, n_paths=6):
    """Data-center mixture scenario (defaults: N=6 paths of 20 units)."""
    if capacities is None:
        capacities = [20] * n_paths
    mix = mix or TrafficMix()
    lam = arrival_rate_for_load(rho, capacities, mix.mean_holding_s)
    return simulate(capacities, lam, mix, duration, replications, seed)
