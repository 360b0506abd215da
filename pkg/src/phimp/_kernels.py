"""Hot inner loops: numba-jitted by default, pure-NumPy fallback on request.

Set ``PHIMP_PURE_NUMPY=1`` in the environment before import to skip JIT
compilation; every kernel then runs its NumPy/Python implementation instead.
``benchmarks/bench_kernels.py`` times the two paths against each other.

All kernels take plain int64/float64 arrays; wrapping, validation and RNG
live in the calling modules. Samplers consume pre-drawn uniforms and
pre-computed CDF rows, so both paths make bit-identical draws.
"""

from __future__ import annotations

import os

import numpy as np

PURE_NUMPY = os.environ.get("PHIMP_PURE_NUMPY", "").strip().lower() in {"1", "true", "yes"}

if not PURE_NUMPY:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        PURE_NUMPY = True

NUMBA_ENABLED = not PURE_NUMPY


# ---------------------------------------------------------------------------
# loop implementations (numba-compilable)


def _walk_states_impl(step_table, start, symbols):
    # states[t] = state after consuming symbols[:t]; length n+1
    n = symbols.shape[0]
    states = np.empty(n + 1, dtype=np.int64)
    states[0] = start
    s = start
    for t in range(n):
        s = step_table[s, symbols[t]]
        states[t + 1] = s
    return states


def _count_path_impl(step_table, start, drive, emit, n_states, n_emit):
    # transition counts over consecutive states, emission counts over the
    # state entered at t paired with emit[t]; drive and emit have equal length
    trans = np.zeros((n_states, n_states), dtype=np.int64)
    emis = np.zeros((n_states, n_emit), dtype=np.int64)
    s = start
    for t in range(drive.shape[0]):
        nxt = step_table[s, drive[t]]
        trans[s, nxt] += 1
        emis[nxt, emit[t]] += 1
        s = nxt
    return trans, emis


def _forward_nll_steps_impl(transition, emission, initial, symbols):
    # out[t] = -log of the per-step normalizer; sum(out) = -log likelihood.
    # A zero normalizer floods the remaining steps with +inf.
    n = symbols.shape[0]
    n_states = transition.shape[0]
    out = np.empty(n, dtype=np.float64)
    alpha = initial.astype(np.float64)
    scratch = np.empty(n_states, dtype=np.float64)
    for t in range(n):
        y = symbols[t]
        norm = 0.0
        for j in range(n_states):
            acc = 0.0
            for i in range(n_states):
                acc += alpha[i] * transition[i, j]
            acc *= emission[j, y]
            scratch[j] = acc
            norm += acc
        if norm <= 0.0:
            for k in range(t, n):
                out[k] = np.inf
            return out
        for j in range(n_states):
            alpha[j] = scratch[j] / norm
        out[t] = -np.log(norm)
    return out


def _sample_symbols_impl(step_table, start, emit_cdf, u):
    # emit_cdf rows are cumulative distributions conditioned on the current
    # state; u holds pre-drawn uniforms, one per output symbol
    n = u.shape[0]
    n_symbols = emit_cdf.shape[1]
    out = np.empty(n, dtype=np.int64)
    s = start
    for t in range(n):
        ut = u[t]
        y = n_symbols - 1
        for k in range(n_symbols - 1):
            if ut < emit_cdf[s, k]:
                y = k
                break
        out[t] = y
        s = step_table[s, y]
    return out


def _sample_hmm_impl(transition_cdf, emission_cdf, start, u_state, u_emit):
    n = u_state.shape[0]
    n_states = transition_cdf.shape[1]
    n_symbols = emission_cdf.shape[1]
    out = np.empty(n, dtype=np.int64)
    s = start
    for t in range(n):
        us = u_state[t]
        nxt = n_states - 1
        for k in range(n_states - 1):
            if us < transition_cdf[s, k]:
                nxt = k
                break
        s = nxt
        ue = u_emit[t]
        y = n_symbols - 1
        for k in range(n_symbols - 1):
            if ue < emission_cdf[s, k]:
                y = k
                break
        out[t] = y
    return out


def _rollout_impl(step_table, start, policy_cdf, pair_cdf, u_action, u_pair,
                  n_actions, n_rewards):
    # pair_cdf[s, a] is cumulative over joint (observation, reward) indices
    # o * n_rewards + r; the event symbol fed to the map is
    # (o * n_actions + a) * n_rewards + r
    n = u_action.shape[0]
    n_pairs = pair_cdf.shape[2]
    actions = np.empty(n, dtype=np.int64)
    observations = np.empty(n, dtype=np.int64)
    rewards = np.empty(n, dtype=np.int64)
    s = start
    for t in range(n):
        ua = u_action[t]
        a = n_actions - 1
        for k in range(n_actions - 1):
            if ua < policy_cdf[s, k]:
                a = k
                break
        up = u_pair[t]
        pair = n_pairs - 1
        for k in range(n_pairs - 1):
            if up < pair_cdf[s, a, k]:
                pair = k
                break
        o = pair // n_rewards
        r = pair % n_rewards
        event = (o * n_actions + a) * n_rewards + r
        s = step_table[s, event]
        actions[t] = a
        observations[t] = o
        rewards[t] = r
    return actions, observations, rewards


def _match_positions_impl(seq, pattern):
    # 1 where pattern starts at position t, over t = 0 .. n-m
    n = seq.shape[0]
    m = pattern.shape[0]
    k = n - m + 1
    out = np.zeros(k, dtype=np.int64)
    for t in range(k):
        hit = 1
        for j in range(m):
            if seq[t + j] != pattern[j]:
                hit = 0
                break
        out[t] = hit
    return out


# ---------------------------------------------------------------------------
# NumPy fallbacks where vectorization beats the interpreted loop


def _forward_nll_steps_numpy(transition, emission, initial, symbols):
    n = symbols.shape[0]
    out = np.empty(n, dtype=np.float64)
    alpha = initial.astype(np.float64)
    for t in range(n):
        alpha = (alpha @ transition) * emission[:, symbols[t]]
        norm = float(alpha.sum())
        if norm <= 0.0:
            out[t:] = np.inf
            return out
        alpha /= norm
        out[t] = -np.log(norm)
    return out


def _match_positions_numpy(seq, pattern):
    n = seq.shape[0]
    m = pattern.shape[0]
    k = n - m + 1
    hits = np.ones(k, dtype=bool)
    for j in range(m):
        hits &= seq[j:j + k] == pattern[j]
    return hits.astype(np.int64)


# ---------------------------------------------------------------------------
# path selection

if NUMBA_ENABLED:
    walk_states = njit(cache=True)(_walk_states_impl)
    count_path = njit(cache=True)(_count_path_impl)
    forward_nll_steps = njit(cache=True)(_forward_nll_steps_impl)
    sample_symbols = njit(cache=True)(_sample_symbols_impl)
    sample_hmm_symbols = njit(cache=True)(_sample_hmm_impl)
    rollout_steps = njit(cache=True)(_rollout_impl)
    match_positions = njit(cache=True)(_match_positions_impl)
else:
    walk_states = _walk_states_impl
    count_path = _count_path_impl
    forward_nll_steps = _forward_nll_steps_numpy
    sample_symbols = _sample_symbols_impl
    sample_hmm_symbols = _sample_hmm_impl
    rollout_steps = _rollout_impl
    match_positions = _match_positions_numpy

# selected path first, pure fallback second; used by tests and the benchmark
IMPL_PAIRS = {
    "walk_states": (walk_states, _walk_states_impl),
    "count_path": (count_path, _count_path_impl),
    "forward_nll_steps": (forward_nll_steps, _forward_nll_steps_numpy),
    "sample_symbols": (sample_symbols, _sample_symbols_impl),
    "sample_hmm_symbols": (sample_hmm_symbols, _sample_hmm_impl),
    "rollout_steps": (rollout_steps, _rollout_impl),
    "match_positions": (match_positions, _match_positions_numpy),
}


def warm_up():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    table = np.zeros((1, 2), dtype=np.int64)
    symbols = np.array([0, 1], dtype=np.int64)
    uniform = np.array([0.3, 0.7])
    half = np.array([[0.5, 1.0]])
    walk_states(table, 0, symbols)
    count_path(table, 0, symbols, symbols, 1, 2)
    forward_nll_steps(np.eye(1), np.array([[0.5, 0.5]]), np.array([1.0]), symbols)
    sample_symbols(table, 0, half, uniform)
    sample_hmm_symbols(np.array([[1.0]]), half, 0, uniform, uniform)
    rollout_steps(np.zeros((1, 2), dtype=np.int64), 0,
                  np.array([[1.0]]), np.array([[[0.5, 1.0]]]), uniform, uniform, 1, 2)
    match_positions(symbols, symbols[:1])
