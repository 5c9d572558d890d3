"""
advamp.analysis.verify
~~~~~~~~~~~~~~~~~~~~~~

Numerical verification suites for the amplification results.

Each suite solves explicit MDPs exactly (random MDPs, the discretized
Choc-Kale model or a smooth sticky chain) and measures how much room every
bound leaves. A check reports its slack (positive means the bound holds with
room to spare), the tolerance it is judged against, and whether any state
actually fell under the bound's premise; a check whose premise is met
nowhere passes vacuously.

Suites:
- ``counterfactual``: both sides of the counterfactual Q-value identity
- ``repetition``: repeated-action Q-values equal Q* where the action persists
- ``aggregation``: value loss of the best k-aggregate policy and the
  amplified advantage, lossless and with the aggregation loss
- ``identities``: the algebraic relation between the two amplification bounds
- ``kappa``: closed-form κ against bisection, and Lambert W residuals
- ``switching``: extended advantage of at least 2T above the threshold
- ``wrappers``: k=1 aggregation and T=0 switching change nothing
"""

import logging
import math
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from advamp import settings
from advamp.analysis import bounds
from advamp.analysis.lambertw import BRANCH_POINT, lambert_w
from advamp.envs.choc_kale import (
    CKParams,
    ChocKaleEnv,
    ObservationModel,
    build_discrete_mdp,
)
from advamp.learning.temporal import aggregate_step, base_step, switch_step
from advamp.mdp.models import DeterministicPolicy, FiniteMDP, QTable
from advamp.mdp.reparam import (
    aggregate_mdp,
    persistent_optimal_states,
    repetition_q,
    switching_cost_mdp,
)
from advamp.mdp.solvers import advantages, counterfactual_gap, smoothness, solve_q_star

logger = logging.getLogger(__name__)

COUNTERFACTUAL_GAMMA = 0.9
COUNTERFACTUAL_TOL = 1e-6
IDENTITY_TOL = 1e-10
KAPPA_TOL = 1e-6
LAMBERT_TOL = 1e-12
SWITCHING_GAMMA = 0.95
CHAIN_STATES = 40
CHAIN_STAY = 0.5
CHAIN_GAMMAS = (0.5, 0.8)
# switching costs on the chain, as fractions of the regret supremum
CHAIN_T_FRACTIONS = (0.02, 0.05)


class CheckResult(BaseModel):
    """Outcome of one verification check."""

    suite: str
    name: str
    passed: bool
    slack: float
    tolerance: float
    vacuous: bool = False
    detail: str = ""


class VerifyReport(BaseModel):
    """All checks of one verification run."""

    seed: int
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]


def _judge(
    suite: str, name: str, slack: float, tolerance: float, **kwargs
) -> CheckResult:
    # slack is "bound minus measured"; a check passes down to -tolerance
    passed = bool(slack >= -tolerance)
    if not passed:
        logger.warning(f"{suite}/{name} failed: slack {slack:.3e} < -{tolerance:.1e}")
    return CheckResult(
        suite=suite,
        name=name,
        passed=passed,
        slack=float(slack),
        tolerance=tolerance,
        **kwargs,
    )


def random_mdp(
    rng: np.random.Generator, n_states: int, n_actions: int, gamma: float
) -> FiniteMDP:
    """Dense random MDP with rewards in [0, 1)."""
    transition = rng.random((n_states, n_actions, n_states))
    transition /= transition.sum(axis=2, keepdims=True)
    reward = rng.random((n_states, n_actions))
    return FiniteMDP(transition=transition, reward=reward, discount=gamma)


def random_policy(
    rng: np.random.Generator, n_states: int, n_actions: int
) -> DeterministicPolicy:
    return DeterministicPolicy(
        action_of=rng.integers(n_actions, size=n_states), n_actions=int(n_actions)
    )


def sticky_chain_mdp(
    gamma: float,
    n_states: int = CHAIN_STATES,
    stay: float = CHAIN_STAY,
) -> FiniteMDP:
    """
    Smooth chain on which the amplification bounds have states to bind at.

    Action 0 steps left and action 1 steps right, each staying put with
    probability ``stay`` and clamped at the ends. Moving right pays a bonus
    of ``0.5 + 0.1·cos(πx)`` on top of a shared ``0.02·x`` at position
    ``x ∈ [0, 1]``, so Q* changes little across any transition while the
    right move keeps a clear advantage everywhere.
    """
    if n_states < 2:
        raise ValueError(f"the chain needs at least 2 states, got {n_states}")
    if not 0.0 <= stay < 1.0:
        raise ValueError(f"stay probability must lie in [0, 1), got {stay}")
    x = np.linspace(0.0, 1.0, n_states)
    states = np.arange(n_states)
    transition = np.zeros((n_states, 2, n_states))
    for action, step in ((0, -1), (1, 1)):
        moved = np.clip(states + step, 0, n_states - 1)
        np.add.at(transition, (states, action, states), stay)
        np.add.at(transition, (states, action, moved), 1.0 - stay)
    reward = np.column_stack([0.02 * x, 0.02 * x + 0.5 + 0.1 * np.cos(np.pi * x)])
    return FiniteMDP(transition=transition, reward=reward, discount=gamma)


def _ck_problem(gamma: float):
    mdp = build_discrete_mdp(CKParams(gamma=gamma), settings.DEFAULT_N_BUCKETS)
    q_star = solve_q_star(mdp)
    return mdp, q_star, smoothness(mdp, q_star)


def _chain_problem(gamma: float):
    mdp = sticky_chain_mdp(gamma)
    q_star = solve_q_star(mdp)
    return mdp, q_star, smoothness(mdp, q_star)


def _problems(
    ck_gammas: Sequence[float], chain_gammas: Sequence[float]
) -> Iterator[Tuple[str, float, FiniteMDP, QTable, float]]:
    """(instance, gamma, MDP, Q*, L) for every CK and chain discount."""
    for gamma in ck_gammas:
        yield ("ck", gamma, *_ck_problem(gamma))
    for gamma in chain_gammas:
        yield ("chain", gamma, *_chain_problem(gamma))


def _best_minus_rest(values: np.ndarray, best: np.ndarray) -> np.ndarray:
    """Per-row gap between the column ``best`` and the largest other column."""
    rows = np.arange(values.shape[0])
    others = values.copy()
    others[rows, best] = -np.inf
    return values[rows, best] - others.max(axis=1)


def check_counterfactual(
    seed: int, n_mdps: int = settings.VERIFY_RANDOM_MDPS
) -> List[CheckResult]:
    """Counterfactual identity on random MDPs with random policy pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_mdps):
        n_states = int(rng.integers(2, settings.VERIFY_MAX_STATES + 1))
        n_actions = int(rng.integers(2, settings.VERIFY_MAX_ACTIONS + 1))
        mdp = random_mdp(rng, n_states, n_actions, COUNTERFACTUAL_GAMMA)
        pi = random_policy(rng, n_states, n_actions)
        rho = random_policy(rng, n_states, n_actions)
        b = int(rng.integers(n_states))
        lhs, rhs = counterfactual_gap(mdp, pi, rho, b)
        worst = max(worst, abs(lhs - rhs))
    return [
        _judge(
            "counterfactual",
            "max_abs_gap",
            COUNTERFACTUAL_TOL - worst,
            0.0,
            detail=f"max |lhs - rhs| = {worst:.3e} over {n_mdps} MDPs",
        )
    ]


def check_repetition(seed: int) -> List[CheckResult]:
    """Repeating a persistent optimal action k times loses nothing."""
    results = []
    tol = settings.SOLVER_TOL
    for gamma in settings.VERIFY_GAMMAS:
        mdp, q_star, _ = _ck_problem(gamma)
        best = np.argmax(q_star.values, axis=1)
        rows = np.arange(mdp.n_states)
        for k in settings.VERIFY_K_VALUES:
            mask = persistent_optimal_states(mdp, q_star, k)
            repeated = repetition_q(mdp, q_star, k).values
            gaps = np.abs(repeated[rows, best] - q_star.values[rows, best])[mask]
            worst = float(gaps.max()) if gaps.size else 0.0
            results.append(
                _judge(
                    "repetition",
                    f"gamma={gamma:g},k={k}",
                    -worst,
                    2.0 * tol,
                    vacuous=not bool(mask.any()),
                    detail=f"{int(mask.sum())} persistent states",
                )
            )
    return results


def check_aggregation(seed: int) -> List[CheckResult]:
    """
    Aggregation value loss and amplified advantages.

    Runs on the Choc-Kale MDP and on the smooth chain. Choc-Kale transitions
    jump far enough that few states, if any, clear ``A ≥ 2kL`` there; the
    chain gives the advantage checks states to bind at.
    """
    results = []
    tol = settings.SOLVER_TOL
    problems = _problems(settings.VERIFY_GAMMAS, CHAIN_GAMMAS)
    for instance, gamma, mdp, q_star, L in problems:
        v_star = q_star.state_values()
        profile = advantages(q_star)
        best = profile.best_action
        for k in settings.VERIFY_K_VALUES:
            label = f"{instance},gamma={gamma:g},k={k}"
            q_agg = solve_q_star(aggregate_mdp(mdp, k))
            loss = v_star - q_agg.state_values()
            results.append(
                _judge(
                    "aggregation",
                    f"value_loss[{label}]",
                    float(np.min(bounds.thm1_bound(k, L, gamma) - loss)),
                    2.0 * tol,
                    detail=f"L = {L:.6g}, max loss = {float(loss.max()):.6g}",
                )
            )

            qualifying = profile.advantage >= 2.0 * k * L
            lossless = _best_minus_rest(repetition_q(mdp, q_star, k).values, best)
            aggregated = _best_minus_rest(q_agg.values, best)
            lossless_slack = [
                lossless[b] - bounds.lemma3_lower(profile.advantage[b], k, L, gamma)
                for b in np.flatnonzero(qualifying)
            ]
            amplified_slack = [
                aggregated[b] - bounds.thm2_lower(profile.advantage[b], k, L, gamma)
                for b in np.flatnonzero(qualifying)
            ]
            n_qualifying = int(qualifying.sum())
            results.append(
                _judge(
                    "aggregation",
                    f"lossless_advantage[{label}]",
                    min(lossless_slack, default=0.0),
                    2.0 * tol,
                    vacuous=n_qualifying == 0,
                    detail=f"{n_qualifying} states with A >= 2kL",
                )
            )
            results.append(
                _judge(
                    "aggregation",
                    f"amplified_advantage[{label}]",
                    min(amplified_slack, default=0.0),
                    2.0 * tol,
                    vacuous=n_qualifying == 0,
                    detail=f"{n_qualifying} states with A >= 2kL",
                )
            )
    return results


def check_identities(seed: int) -> List[CheckResult]:
    """The two amplification bounds differ by exactly the aggregation loss."""
    worst = 0.0
    for gamma in (0.5, 0.9, 0.95, 0.99):
        for k in (1, 2, 3, 5, 10):
            for L in (0.0, 0.01, 0.1, 1.0):
                for extra in (0.0, 1.0, 10.0):
                    A = 2.0 * k * L + extra
                    lossless = bounds.lemma3_lower(A, k, L, gamma)
                    amplified = bounds.thm2_lower(A, k, L, gamma)
                    expected = bounds.thm1_bound(k, L, gamma)
                    scale = max(1.0, abs(lossless), abs(amplified))
                    worst = max(worst, abs(lossless - amplified - expected) / scale)
    return [
        _judge(
            "identities",
            "lossless_minus_amplified",
            IDENTITY_TOL - worst,
            0.0,
            detail=f"max relative deviation {worst:.3e}",
        )
    ]


def check_kappa(seed: int) -> List[CheckResult]:
    """Closed-form κ on the parameter grid, and Lambert W residuals."""
    grid = settings.KAPPA_GRID
    worst = 0.0
    for gamma in grid["gamma"]:
        for L in grid["L"]:
            for T in grid["T"]:
                closed = bounds.kappa(gamma, L, T)
                oracle = bounds.kappa_bisection(gamma, L, T)
                worst = max(worst, abs(closed - oracle))
    n_points = len(grid["gamma"]) * len(grid["L"]) * len(grid["T"])
    results = [
        _judge(
            "kappa",
            "closed_form_vs_bisection",
            KAPPA_TOL - worst,
            0.0,
            detail=f"max |kappa - root| = {worst:.3e} over {n_points} points",
        )
    ]

    offsets = np.logspace(-6, math.log10(-BRANCH_POINT), 30)[:-1]
    principal = np.concatenate([BRANCH_POINT + offsets, np.logspace(-6, 6, 60)])
    lower = -offsets
    for branch, xs in ((0, principal), (-1, lower)):
        worst = 0.0
        for x in xs:
            w = lambert_w(float(x), branch=branch)
            worst = max(worst, abs(w * math.exp(w) - x) / max(1.0, abs(x)))
        results.append(
            _judge(
                "kappa",
                f"lambert_w_residual[branch={branch}]",
                LAMBERT_TOL - worst,
                0.0,
                detail=f"max relative residual {worst:.3e} over {len(xs)} points",
            )
        )
    return results


def _switching_checks(
    instance: str,
    mdp: FiniteMDP,
    q_star: QTable,
    L: float,
    gamma: float,
    penalties: Sequence[float],
) -> List[CheckResult]:
    results = []
    tol = settings.SOLVER_TOL
    profile = advantages(q_star)
    for T in penalties:
        name = f"extended_advantage[{instance},gamma={gamma:g},T={T:g}]"
        try:
            threshold = bounds.thm4_threshold(gamma, L, T)
        except ValueError as e:
            results.append(
                CheckResult(
                    suite="switching",
                    name=name,
                    passed=True,
                    slack=0.0,
                    tolerance=2.0 * tol,
                    vacuous=True,
                    detail=f"no threshold: {e}",
                )
            )
            continue
        extended = switching_cost_mdp(mdp, T)
        q_ext = solve_q_star(extended.mdp).values
        above = np.flatnonzero(profile.advantage >= threshold)
        slacks = []
        for b in above:
            a = int(profile.best_action[b])
            row = q_ext[extended.index(b, a)]
            others = np.delete(row, a)
            slacks.append(row[a] - others.max() - 2.0 * T)
        results.append(
            _judge(
                "switching",
                name,
                min(slacks, default=0.0),
                2.0 * tol,
                vacuous=above.size == 0,
                detail=f"threshold {threshold:.6g}, {above.size} states above it",
            )
        )
    return results


def check_switching(seed: int) -> List[CheckResult]:
    """
    States above the κ threshold keep an extended advantage of at least 2T.

    The Choc-Kale MDP is checked at the default switching costs. On the
    smooth chain the costs are fractions of the regret supremum, small
    enough for the threshold to fall below the chain's advantages.
    """
    mdp, q_star, L = _ck_problem(SWITCHING_GAMMA)
    results = _switching_checks(
        "ck", mdp, q_star, L, SWITCHING_GAMMA, settings.DEFAULT_T_GRID
    )
    for _, gamma, mdp, q_star, L in _problems((), CHAIN_GAMMAS):
        penalties = [
            fraction * bounds.kappa_limit(gamma, L) for fraction in CHAIN_T_FRACTIONS
        ]
        results += _switching_checks("chain", mdp, q_star, L, gamma, penalties)
    return results


def check_wrappers(seed: int, n_events: int = 200) -> List[CheckResult]:
    """k=1 aggregation and T=0 switching reproduce the event level."""
    results = []
    tol = settings.SOLVER_TOL
    mdp = build_discrete_mdp(CKParams(), settings.DEFAULT_N_BUCKETS)

    identity = aggregate_mdp(mdp, 1)
    gap = max(
        float(np.max(np.abs(identity.transition - mdp.transition))),
        float(np.max(np.abs(identity.reward - mdp.reward))),
        abs(identity.discount - mdp.discount),
    )
    results.append(_judge("wrappers", "aggregate_mdp[k=1]", -gap, 1e-12))

    q_star = solve_q_star(mdp).values
    extended = switching_cost_mdp(mdp, 0.0)
    q_ext = solve_q_star(extended.mdp).values
    gap = float(np.max(np.abs(q_ext - q_star[extended.base_state])))
    results.append(_judge("wrappers", "switching_cost_mdp[T=0]", -gap, 2.0 * tol))

    params = CKParams()
    model = ObservationModel(sigma_n=0.3)
    actions = np.random.default_rng(seed).integers(2, size=n_events)
    base_env = ChocKaleEnv(params, model)
    wrapped_env = ChocKaleEnv(params, model)
    base_rng = np.random.default_rng(seed)
    wrapped_rng = np.random.default_rng(seed)
    base_env.reset(base_rng)
    wrapped_env.reset(wrapped_rng)
    aggregate_mismatches = 0
    for action in actions:
        expected = base_step(base_env, action, base_rng)
        observed = aggregate_step(wrapped_env, action, 1, params.gamma, wrapped_rng)
        aggregate_mismatches += int(
            not np.array_equal(expected.observation, observed.observation)
            or not np.array_equal(expected.reward, observed.reward)
        )
    results.append(
        _judge(
            "wrappers",
            "aggregate_step[k=1]",
            -float(aggregate_mismatches),
            0.0,
            detail=f"{aggregate_mismatches} of {n_events} events differ",
        )
    )

    base_rng = np.random.default_rng(seed)
    wrapped_rng = np.random.default_rng(seed)
    base_env.reset(base_rng)
    wrapped_env.reset(wrapped_rng)
    switch_mismatches = 0
    n_actions = int(base_env.n_actions)
    prev_action = int(actions[0])
    for action in actions:
        expected = base_step(base_env, action, base_rng)
        observed = switch_step(wrapped_env, action, prev_action, 0.0, wrapped_rng)
        switch_mismatches += int(
            not np.array_equal(expected.observation, observed.observation // n_actions)
            or not np.array_equal(expected.reward, observed.reward)
        )
        prev_action = int(action)
    results.append(
        _judge(
            "wrappers",
            "switch_step[T=0]",
            -float(switch_mismatches),
            0.0,
            detail=f"{switch_mismatches} of {n_events} events differ",
        )
    )
    return results


SUITES: Dict[str, Callable[[int], List[CheckResult]]] = {
    "counterfactual": check_counterfactual,
    "repetition": check_repetition,
    "aggregation": check_aggregation,
    "identities": check_identities,
    "kappa": check_kappa,
    "switching": check_switching,
    "wrappers": check_wrappers,
}


def run_suites(scope: Optional[List[str]] = None, seed: int = 0) -> VerifyReport:
    """
    Run the named suites (all of them by default).

    Raises:
        ValueError: If ``scope`` names an unknown suite
    """
    names = list(SUITES) if not scope else list(scope)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ValueError(f"unknown verification suite(s): {', '.join(unknown)}")
    checks: List[CheckResult] = []
    for name in names:
        logger.info(f"Running {name} checks")
        checks.extend(SUITES[name](seed))
    return VerifyReport(seed=seed, checks=checks)
