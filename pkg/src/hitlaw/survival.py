"""Exact quenched survival probabilities for pattern hitting times.

The hit set is the cylinder of a fixed word; the hitting time of a fiber
point is the first k >= 1 such that the word occurs starting at coordinate
k.  Because fiber coordinates are independent given the noise, the
probability of surviving (no occurrence yet) evolves by a linear recursion
over the states of the word's border automaton, with one stochastic step
matrix per base symbol.  That recursion is the estimator of record here;
Monte Carlo sampling of hitting times is provided as a cross-check only.

Occurrences starting at coordinate 0 do not count as hits (hitting times
start at k = 1); they do define the conditioning block for return times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base_process import BaseProcess, BaseWindow, sample_window
from .errors import ResourceLimitError
from .fiber import (FiberMeasure, Pattern, _check_compatible,
                    fiber_cylinder_measure, marginal_cylinder_measure)


@dataclass(frozen=True)
class PatternAutomaton:
    """Border automaton of a word: state = length of the longest suffix of
    the text read so far that is a prefix of the word; state n means the
    word just ended here.

    ``delta`` has a row for every state 0..n; the row for state n carries
    the continuation transitions (used when scanning past an occurrence),
    and equals the row of the word's longest proper border.
    """

    pattern: Pattern
    delta: np.ndarray   # (n+1, b) int
    border: int         # longest proper border of the full word

    @property
    def n(self) -> int:
        return self.pattern.n

    @property
    def b(self) -> int:
        return self.pattern.alphabet_size


def build_automaton(pat: Pattern) -> PatternAutomaton:
    """Classic prefix-function construction, O(n * alphabet)."""
    n, b = pat.n, pat.alphabet_size
    y = pat.symbols
    delta = np.zeros((n + 1, b), dtype=np.int64)
    delta[0, y[0]] = 1
    x = 0   # state of the longest proper border of the prefix read so far
    for i in range(1, n):
        delta[i, :] = delta[x, :]
        delta[i, y[i]] = i + 1
        x = int(delta[x, y[i]])
    delta[n, :] = delta[x, :]
    return PatternAutomaton(pattern=pat, delta=delta, border=x)


def masked_step_matrices(fm: FiberMeasure, aut: PatternAutomaton) -> np.ndarray:
    """Per-base-symbol step matrices on states 0..n-1, with all mass that
    would enter the accepting state dropped.  Shape (s, n, n), column =
    current state."""
    n = aut.n
    mats = np.zeros((fm.base_alphabet_size, n, n))
    for st in range(n):
        for c in range(aut.b):
            nxt = int(aut.delta[st, c])
            if nxt < n:
                mats[:, nxt, st] += fm.W[:, c]
    return mats


def full_step_matrices(fm: FiberMeasure, aut: PatternAutomaton) -> np.ndarray:
    """Per-base-symbol step matrices on all n+1 states, nothing dropped;
    the accepting state transitions onward through its border."""
    n = aut.n
    mats = np.zeros((fm.base_alphabet_size, n + 1, n + 1))
    for st in range(n + 1):
        for c in range(aut.b):
            mats[:, int(aut.delta[st, c]), st] += fm.W[:, c]
    return mats


def masked_arrival_matrices(fm: FiberMeasure, aut: PatternAutomaton) -> np.ndarray:
    """All n+1 states kept, but arrivals into the accepting state dropped.

    Used when occurrences start counting only after a delay: mass already
    sitting in the accepting state keeps evolving, new completions die.
    """
    mats = full_step_matrices(fm, aut)
    mats[:, aut.n, :] = 0.0
    return mats


def _run_masses(mats: np.ndarray, symbols: np.ndarray, v0: np.ndarray,
                record_reads: np.ndarray) -> np.ndarray:
    """Run the recursion over ``symbols`` and record the total surviving
    mass after the read counts listed in ``record_reads`` (sorted, may
    include 0 for the initial mass)."""
    out = np.empty(len(record_reads))
    ptr = 0
    v = v0.astype(float).copy()
    while ptr < len(record_reads) and record_reads[ptr] == 0:
        out[ptr] = v.sum()
        ptr += 1
    for r in range(1, len(symbols) + 1):
        v = mats[symbols[r - 1]] @ v
        while ptr < len(record_reads) and record_reads[ptr] == r:
            out[ptr] = v.sum()
            ptr += 1
    return out


@dataclass(frozen=True)
class CurveMeta:
    pattern: str
    window: str
    offset: int


@dataclass(frozen=True)
class SurvivalCurve:
    """Values of a survival probability on an increasing k-grid."""

    k_grid: np.ndarray
    values: np.ndarray
    meta: CurveMeta

    def __post_init__(self):
        k = np.asarray(self.k_grid, dtype=np.int64)
        v = np.asarray(self.values, dtype=float)
        if k.size != v.size or k.size == 0:
            raise ValueError("grid and values must be non-empty and equally long")
        if np.any(np.diff(k) <= 0):
            raise ValueError("k grid must be strictly increasing")
        if np.any(v < -1e-12) or np.any(v > 1.0 + 1e-12):
            raise ValueError("survival values must lie in [0, 1]")
        if np.any(np.diff(v) > 1e-12):
            raise ValueError("survival values must be nonincreasing in k")
        object.__setattr__(self, "k_grid", k)
        object.__setattr__(self, "values", v)

    def value_at(self, k: int) -> float:
        idx = np.searchsorted(self.k_grid, k)
        if idx >= self.k_grid.size or self.k_grid[idx] != k:
            raise ValueError(f"k={k} is not on this curve's grid")
        return float(self.values[idx])


def _normalize_k_grid(k_max: int, k_grid) -> np.ndarray:
    if k_grid is None:
        return np.arange(k_max + 1, dtype=np.int64)
    grid = np.asarray(k_grid, dtype=np.int64)
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("k grid must be strictly increasing and nonnegative")
    if grid[-1] > k_max:
        raise ValueError("k grid exceeds k_max")
    return grid


def quenched_survival(fm: FiberMeasure, window: BaseWindow, pat: Pattern,
                      offset: int = 0, k_max: int = 0,
                      k_grid=None) -> SurvivalCurve:
    """Exact P(no occurrence starts at coordinates 1..k) for each k on the
    grid (default 0..k_max), under the noise seen from ``offset``.

    Cost O(k_max * n * b); the window must cover
    offset .. offset + k_max + n - 1.
    """
    _check_compatible(fm, pat)
    if offset < 0 or k_max < 0:
        raise ValueError("offset and k_max must be >= 0")
    n = pat.n
    need = offset + k_max + n
    if k_max > 0 and need > len(window):
        raise ValueError(f"window covers {len(window)} symbols; need {need}")
    grid = _normalize_k_grid(k_max, k_grid)
    aut = build_automaton(pat)
    mats = masked_step_matrices(fm, aut)
    v0 = np.zeros(n)
    v0[0] = 1.0
    # survival at k is decided after reading coordinates 1 .. k+n-1
    record = np.where(grid == 0, 0, grid + n - 1)
    n_reads = int(record[-1])
    symbols = window.prefix(offset + n_reads + 1)[offset + 1:] if n_reads else np.empty(0, np.int64)
    values = _run_masses(mats, symbols, v0, record)
    meta = CurveMeta(pattern=str(pat), window=window.label, offset=offset)
    return SurvivalCurve(k_grid=grid, values=values, meta=meta)


def conditional_return_survival(fm: FiberMeasure, window: BaseWindow, pat: Pattern,
                                offset: int = 0, k_max: int = 0,
                                k_grid=None) -> SurvivalCurve:
    """Exact joint probability P(word occupies coordinates 0..n-1 and no
    occurrence starts at coordinates 1..j), for each j on the grid.

    Dividing by the cylinder measure (the value at j = 0) turns this into
    the conditional return-time survival.  The automaton starts from the
    word's longest proper border, i.e. the state reached after reading the
    word, and the recursion runs from coordinate n onward.
    """
    _check_compatible(fm, pat)
    if offset < 0 or k_max < 0:
        raise ValueError("offset and k_max must be >= 0")
    n = pat.n
    need = offset + k_max + n
    if need > len(window):
        raise ValueError(f"window covers {len(window)} symbols; need {need}")
    grid = _normalize_k_grid(k_max, k_grid)
    weight = fiber_cylinder_measure(fm, window, pat, offset)
    aut = build_automaton(pat)
    mats = masked_step_matrices(fm, aut)
    v0 = np.zeros(n)
    v0[aut.border] = 1.0
    symbols = window.prefix(offset + n + int(grid[-1]))[offset + n:]
    values = weight * _run_masses(mats, symbols, v0, grid.astype(np.int64))
    meta = CurveMeta(pattern=str(pat), window=window.label, offset=offset)
    return SurvivalCurve(k_grid=grid, values=values, meta=meta)


def _check_t_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise ValueError("t grid must be non-empty")
    if t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValueError("t grid must be increasing and nonnegative")
    return t


@dataclass(frozen=True)
class RescaledCurve:
    """Quenched survival viewed on the rescaled time grid t = k * mu(A)."""

    t_grid: np.ndarray
    k_values: np.ndarray
    values: np.ndarray
    mu_a: float
    meta: CurveMeta

    @property
    def observed(self) -> np.ndarray:
        return self.values


def rescaled_survival(fm: FiberMeasure, proc: BaseProcess, window: BaseWindow,
                      pat: Pattern, t_grid, step_cap: int = 10**7) -> RescaledCurve:
    """Exact survival at k(t) = floor(t / mu(A)) for each t, where mu(A) is
    the noise-averaged cylinder measure; the value at t = 0 is 1."""
    t = _check_t_grid(t_grid)
    mu_a = marginal_cylinder_measure(fm, proc, pat)
    ks = np.array([math.floor(ti / mu_a) for ti in t], dtype=np.int64)
    if ks[-1] > step_cap:
        offending = float(t[int(np.argmax(ks > step_cap))])
        raise ResourceLimitError(
            f"rescaled survival needs k={int(ks.max())} steps at t={offending}, "
            f"over the step cap {step_cap}")
    uniq = np.unique(ks)
    curve = quenched_survival(fm, window, pat, offset=0, k_max=int(uniq[-1]),
                              k_grid=uniq)
    values = curve.values[np.searchsorted(uniq, ks)]
    return RescaledCurve(t_grid=t, k_values=ks, values=values, mu_a=mu_a,
                         meta=curve.meta)


_SCAN_BLOCK = 4096


def _scan_hitting(fm: FiberMeasure, window: BaseWindow, aut: PatternAutomaton,
                  rng: np.random.Generator, cap: int, start_state: int,
                  first_coord: int) -> int | None:
    """Draw fiber coordinates lazily from ``first_coord`` onward and return
    the first hit k in [1, cap], or None if censored at ``cap``.

    An arrival in the accepting state at coordinate c is an occurrence
    ending there, i.e. starting at k = c - n + 1.  Memory stays O(n): only
    the automaton state survives between blocks.
    """
    n = aut.n
    delta_rows = [tuple(int(x) for x in row) for row in aut.delta]
    cum = np.cumsum(fm.W, axis=1)
    state = start_state
    coord = first_coord
    last_coord = cap + n - 1
    while coord <= last_coord:
        end = min(coord + _SCAN_BLOCK, last_coord + 1)
        window.ensure(end)
        rows = window.prefix(end)[coord:]
        u = rng.random(len(rows))
        xs = (u[:, np.newaxis] > cum[rows]).sum(axis=1).tolist()
        for i, x in enumerate(xs):
            state = delta_rows[state][x]
            if state == n:
                return coord + i - n + 1
        coord = end
    return None


def sample_hitting_time(fm: FiberMeasure, window: BaseWindow, pat: Pattern,
                        rng: np.random.Generator, cap: int) -> int | None:
    """Monte Carlo hitting time: first k in [1, cap] with an occurrence
    starting at coordinate k in a freshly drawn fiber point, or None
    (censored) if no hit happens by ``cap``.

    The window extends itself as the scan proceeds, so any cap within the
    noise realization's reach is valid; censoring is an answer, not an
    error.
    """
    _check_compatible(fm, pat)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    aut = build_automaton(pat)
    return _scan_hitting(fm, window, aut, rng, cap, start_state=0, first_coord=1)


@dataclass(frozen=True)
class AnnealedCurve:
    """Monte Carlo average of rescaled survival over independent noise windows."""

    t_grid: np.ndarray
    k_values: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_windows: int
    mu_a: float

    @property
    def observed(self) -> np.ndarray:
        return self.mean


def annealed_survival(fm: FiberMeasure, proc: BaseProcess, pat: Pattern,
                      t_grid, n_windows: int, seed,
                      step_cap: int = 10**7) -> AnnealedCurve:
    """Average the exact rescaled survival over ``n_windows`` independent
    noise realizations; reports the mean and its standard error per t.

    Window i uses the stream keyed by (seed, i).
    """
    if n_windows < 1:
        raise ValueError("n_windows must be >= 1")
    t = _check_t_grid(t_grid)
    mu_a = marginal_cylinder_measure(fm, proc, pat)
    k_max = math.floor(float(t[-1]) / mu_a)
    length = k_max + pat.n + 1
    rows = np.empty((n_windows, t.size))
    ks = None
    for i in range(n_windows):
        window = sample_window(proc, [seed, i], length)
        curve = rescaled_survival(fm, proc, window, pat, t, step_cap=step_cap)
        rows[i] = curve.values
        ks = curve.k_values
    mean = rows.mean(axis=0)
    if n_windows > 1:
        stderr = rows.std(axis=0, ddof=1) / math.sqrt(n_windows)
    else:
        stderr = np.zeros(t.size)
    return AnnealedCurve(t_grid=t, k_values=ks, mean=mean, stderr=stderr,
                         n_windows=n_windows, mu_a=mu_a)
