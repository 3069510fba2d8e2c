"""Exact error accounting for the product approximation of hitting laws.

For a target cylinder A, time horizon t and gap g, the survival probability
differs from the product of per-step one-miss probabilities by at most a
sum of per-offset discrepancies delta_i; each delta_i splits into a short
ENTRANCE mass (G), a MIXING discrepancy across the gap (H) and a short
RETURN mass (K).  Everything here is computed exactly from the automaton
recursion of :mod:`hitlaw.survival`, batched across the k offsets, with
compensated summation for the long accumulations.

The suprema defining delta and H run over all j >= 1 in principle; they are
evaluated over j <= jmax and therefore reported as certified lower bounds
of the true suprema.  The recursion-bound check stays valid under this
truncation because the unrolled recursion only ever consults j <= k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base_process import BaseProcess, BaseWindow, make_rng, sample_window
from .errors import ResourceLimitError
from .fiber import (FiberMeasure, Pattern, _check_compatible,
                    fiber_cylinder_measure, marginal_cylinder_measure,
                    sample_fiber_prefix)
from .survival import (_scan_hitting, build_automaton, full_step_matrices,
                       masked_arrival_matrices, masked_step_matrices)

_TOL = 1e-12


@dataclass(frozen=True)
class ErrorLedger:
    """All error terms for one (noise window, cylinder, t, gap) configuration.

    M is the expected-hits sum, G the short-entrance mass, H the mixing
    discrepancy, K the short-return mass, delta_sum the total per-offset
    discrepancy (a certified lower bound of its sup-defined value, see the
    module docstring).  lemma_lhs/lemma_rhs are the two sides of the
    recursion bound; sandwich_gap is the distance between the one-miss
    product and exp(-M).
    """

    n: int
    t: float
    g: int
    k: int
    jmax: int
    M: float
    G: float
    H: float
    K: float
    delta_sum: float
    lemma_lhs: float
    lemma_rhs: float
    sandwich_gap: float

    def __post_init__(self):
        for name in ("M", "G", "H", "K", "delta_sum", "lemma_lhs", "lemma_rhs",
                     "sandwich_gap"):
            if getattr(self, name) < -_TOL:
                raise ValueError(f"ledger entry {name} must be nonnegative")
        if self.lemma_lhs > self.lemma_rhs + _TOL:
            raise ValueError("recursion bound violated: lhs > rhs")
        if self.delta_sum > self.G + self.H + self.K + _TOL:
            raise ValueError("delta_sum exceeds G + H + K")


class _BatchRecursion:
    """State distributions of many automaton recursions advanced in lockstep.

    Column c's r-th read consumes ``symbols[starts[c] + r - 1]``; columns
    sharing a base symbol share a matrix multiply.
    """

    def __init__(self, symbols: np.ndarray, starts: np.ndarray, v0: np.ndarray,
                 n_symbols: int):
        self.symbols = symbols
        self.starts = np.asarray(starts, dtype=np.int64)
        self.V = np.tile(np.asarray(v0, dtype=float).reshape(-1, 1),
                         (1, self.starts.size))
        self.r = 0
        self._alphabet = range(n_symbols)

    def step(self, mats: np.ndarray) -> None:
        sym = self.symbols[self.starts + self.r]
        for a in self._alphabet:
            cols = sym == a
            if cols.any():
                self.V[:, cols] = mats[a] @ self.V[:, cols]
        self.r += 1

    def masses(self) -> np.ndarray:
        return self.V.sum(axis=0)


def _sliding_cylinder_measures(fm: FiberMeasure, symbols: np.ndarray,
                               pat: Pattern, offsets: np.ndarray) -> np.ndarray:
    idx = offsets[:, np.newaxis] + np.arange(pat.n)[np.newaxis, :]
    return fm.W[symbols[idx], np.asarray(pat.symbols)[np.newaxis, :]].prod(axis=1)


def _delta_terms(fm: FiberMeasure, window: BaseWindow, pat: Pattern, k: int,
                 jmax: int, g: int | None):
    """Batched exact evaluation of the per-offset discrepancies.

    Returns (mu, delta, survival_from_0_at_k) and, when a gap g is given,
    also (conditional mass at g, survival at g, mixing sup) per offset.
    """
    n, s = pat.n, fm.base_alphabet_size
    gap = g or 0
    need = k + gap + jmax + n
    if need > len(window):
        raise ValueError(f"window covers {len(window)} symbols; need {need}")
    symbols = window.prefix(need)
    aut = build_automaton(pat)
    masked = masked_step_matrices(fm, aut)

    offsets = np.arange(1, k + 1, dtype=np.int64)
    mu = _sliding_cylinder_measures(fm, symbols, pat, offsets)

    # survival recursions for offsets 0..k+gap; offset i's first read is
    # coordinate i+1, and its j-th survival value lands after j+n-1 reads
    e0 = np.zeros(n)
    e0[0] = 1.0
    s_offsets = np.arange(0, k + gap + 1, dtype=np.int64)
    s_rec = _BatchRecursion(symbols, s_offsets + 1, e0, s)
    for _ in range(n - 1):
        s_rec.step(masked)

    # conditional (return) recursions for offsets 1..k, starting from the
    # word's border state, first read at coordinate i+n
    eb = np.zeros(n)
    eb[aut.border] = 1.0
    c_rec = _BatchRecursion(symbols, offsets + n, eb, s)

    if g is not None:
        # delayed-mask recursions: all n+1 states, unmasked over the gap,
        # then arrivals into the accepting state die
        full = full_step_matrices(fm, aut)
        arr_masked = masked_arrival_matrices(fm, aut)
        ef = np.zeros(n + 1)
        ef[n] = 1.0
        h_rec = _BatchRecursion(symbols, offsets + n, ef, s)
        for _ in range(g):
            h_rec.step(full)

    d_sup = np.zeros(k)
    h_sup = np.zeros(k) if g is not None else None
    c_at_g = s_at_g = None
    s0_at_k = None
    for j in range(1, jmax + 1):
        s_rec.step(masked)
        c_rec.step(masked)
        s_mass = s_rec.masses()
        np.maximum(d_sup, np.abs(s_mass[1:k + 1] - c_rec.masses()), out=d_sup)
        if g is not None:
            h_rec.step(arr_masked)
            np.maximum(h_sup, np.abs(h_rec.masses() - s_mass[1 + g:k + g + 1]),
                       out=h_sup)
            if j == g:
                c_at_g = c_rec.masses().copy()
                s_at_g = s_mass[1:k + 1].copy()
        if j == k:
            s0_at_k = float(s_mass[0])
    assert s0_at_k is not None   # callers validate jmax >= k >= 1
    return mu, d_sup * mu, s0_at_k, c_at_g, s_at_g, h_sup


def _check_budget(k: int, pat: Pattern, op_budget: int | None) -> None:
    if op_budget is not None and k * pat.n * pat.alphabet_size > op_budget:
        raise ResourceLimitError(
            f"ledger computation needs k*n*b = {k * pat.n * pat.alphabet_size} "
            f"operations, over the budget {op_budget}")


def hits_sum(fm: FiberMeasure, window: BaseWindow, pat: Pattern, k: int) -> float:
    """M: the sum over offsets 1..k of the cylinder measure seen from there."""
    _check_compatible(fm, pat)
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 0.0
    need = k + pat.n
    if need > len(window):
        raise ValueError(f"window covers {len(window)} symbols; need {need}")
    offsets = np.arange(1, k + 1, dtype=np.int64)
    return math.fsum(_sliding_cylinder_measures(fm, window.prefix(need), pat, offsets))


def entrance_sum(fm: FiberMeasure, window: BaseWindow, pat: Pattern, k: int,
                 g: int) -> float:
    """G: summed mass of "in the cylinder and back within g steps", offsets
    1..k, via a g-step batched recursion."""
    _check_compatible(fm, pat)
    if k < 1 or g < 1:
        raise ValueError("need k >= 1 and g >= 1")
    n = pat.n
    need = k + g + n
    if need > len(window):
        raise ValueError(f"window covers {len(window)} symbols; need {need}")
    symbols = window.prefix(need)
    offsets = np.arange(1, k + 1, dtype=np.int64)
    mu = _sliding_cylinder_measures(fm, symbols, pat, offsets)
    aut = build_automaton(pat)
    masked = masked_step_matrices(fm, aut)
    eb = np.zeros(n)
    eb[aut.border] = 1.0
    rec = _BatchRecursion(symbols, offsets + n, eb, fm.base_alphabet_size)
    for _ in range(g):
        rec.step(masked)
    return math.fsum(mu * (1.0 - rec.masses()))


def compute_ledger(fm: FiberMeasure, proc: BaseProcess, window: BaseWindow,
                   pat: Pattern, t: float, g: int, jmax: int | None = None,
                   op_budget: int | None = None) -> ErrorLedger:
    """Exact M, G, H, K, delta and both sides of the recursion bound for the
    cylinder of ``pat`` at horizon t with gap g.

    k = floor(t / mu(A)) with mu(A) the noise-averaged cylinder measure;
    requires 1 <= g <= k and a window covering k + g + jmax + n symbols.
    jmax defaults to 4k.
    """
    _check_compatible(fm, pat)
    if t <= 0:
        raise ValueError("t must be positive")
    mu_a = marginal_cylinder_measure(fm, proc, pat)
    k = math.floor(t / mu_a)
    if not 1 <= g <= k:
        raise ValueError(f"need 1 <= g <= k; got g={g}, k={k}")
    if jmax is None:
        jmax = 4 * k
    if jmax < max(k, g):
        raise ValueError("jmax must cover both k and g")
    _check_budget(k, pat, op_budget)

    mu, delta, s0_at_k, c_at_g, s_at_g, h_sup = _delta_terms(
        fm, window, pat, k, jmax, g)

    one_minus = 1.0 - mu
    prod_term = float(np.prod(one_minus))
    prefix = np.concatenate([[1.0], np.cumprod(one_minus)[:-1]])

    m_sum = math.fsum(mu)
    ledger = ErrorLedger(
        n=pat.n, t=float(t), g=int(g), k=int(k), jmax=int(jmax),
        M=m_sum,
        G=math.fsum(mu * (1.0 - c_at_g)),
        H=math.fsum(mu * h_sup),
        K=math.fsum(mu * (1.0 - s_at_g)),
        delta_sum=math.fsum(delta),
        lemma_lhs=abs(s0_at_k - prod_term),
        lemma_rhs=math.fsum(delta * prefix),
        sandwich_gap=abs(prod_term - math.exp(-m_sum)),
    )
    return ledger


def verify_recursion_bound(fm: FiberMeasure, proc: BaseProcess,
                           window: BaseWindow, pat: Pattern, t: float,
                           jmax: int | None = None,
                           op_budget: int | None = None):
    """Both sides of the survival-vs-product bound, evaluated exactly.

    Returns (lhs, rhs, passed): lhs is |survival(k) - prod(1 - mu_i)|, rhs
    the discrepancy-weighted prefix-product sum.  jmax defaults to k, which
    already certifies the bound (the unrolled recursion consults j < k).
    """
    _check_compatible(fm, pat)
    if t <= 0:
        raise ValueError("t must be positive")
    mu_a = marginal_cylinder_measure(fm, proc, pat)
    k = math.floor(t / mu_a)
    if k < 1:
        raise ValueError(f"t={t} gives k=0; nothing to verify")
    if jmax is None:
        jmax = k
    if jmax < k:
        raise ValueError("jmax must be >= k")
    _check_budget(k, pat, op_budget)

    mu, delta, s0_at_k, _, _, _ = _delta_terms(fm, window, pat, k, jmax, None)
    one_minus = 1.0 - mu
    prod_term = float(np.prod(one_minus))
    prefix = np.concatenate([[1.0], np.cumprod(one_minus)[:-1]])
    lhs = abs(s0_at_k - prod_term)
    rhs = math.fsum(delta * prefix)
    return lhs, rhs, bool(lhs <= rhs + _TOL)


def verify_sandwich(xs, eps: float) -> bool:
    """Check exp(-(1+2e) sum x) <= prod(1-x) <= exp(-(1-2e) sum x) for
    x_1..x_k in [0, eps], 0 < eps <= 1/2, within 1e-14 slack."""
    if not 0.0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    x = np.asarray(xs, dtype=float)
    if x.size and (x.min() < 0.0 or x.max() > eps):
        raise ValueError("inputs must lie in [0, eps]")
    total = math.fsum(x)
    prod = float(np.prod(1.0 - x))
    lower = math.exp(-(1.0 + 2.0 * eps) * total)
    upper = math.exp(-(1.0 - 2.0 * eps) * total)
    return lower - 1e-14 <= prod <= upper + 1e-14


def gap_schedule(n: int, h0: float) -> int:
    """Gap floor(exp(h0 n / 4)), clamped to >= 1 (the raw floor can be 0 for
    small n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if h0 <= 0:
        raise ValueError("h0 must be positive")
    return max(1, math.floor(math.exp(h0 * n / 4.0)))


@dataclass(frozen=True)
class EntropyEstimates:
    """Per-n entropy slopes from cylinder decay and from return times.

    smb_slopes[n] holds -(1/n) log mu_omega(n-cylinder of x) samples,
    ow_slopes[n] holds (1/n) log R_n samples (censored scans excluded,
    counted in censored[n]).  h_hat averages the cylinder slopes at the
    largest n; h0 is the exact small-cylinder rate -log q_max.
    """

    n_values: tuple
    smb_slopes: dict
    ow_slopes: dict
    censored: dict
    h_hat: float
    h0: float
    cap: int
    widened_uncertainty: bool = False

    def ow_mean(self, n: int) -> float:
        vals = self.ow_slopes[n]
        return float(np.mean(vals)) if len(vals) else float("nan")


def estimate_entropies(fm: FiberMeasure, proc: BaseProcess, n_range,
                       samples: int, seed, cap: int = 10**6) -> EntropyEstimates:
    """Sample entropy slopes: cylinder-measure decay along fresh (noise,
    fiber) draws, and return times of each draw's own n-prefix.

    Scans are capped at ``cap`` steps; a censoring rate above 50% at any n
    flags the estimate as widened.
    """
    ns = tuple(int(n) for n in n_range)
    if len(ns) == 0 or any(n < 1 for n in ns):
        raise ValueError("n_range must be non-empty with n >= 1")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    smb: dict = {}
    ow: dict = {}
    censored: dict = {}
    widened = False
    for n in ns:
        smb_vals = np.empty(samples)
        ow_vals = []
        cens = 0
        for i in range(samples):
            window = sample_window(proc, [seed, n, i], n)
            rng = make_rng([seed, n, i, 1])
            xs = sample_fiber_prefix(fm, window, n, rng)
            prefix_word = Pattern(tuple(xs), fm.fiber_alphabet_size)
            mu = fiber_cylinder_measure(fm, window, prefix_word)
            smb_vals[i] = -math.log(mu) / n
            aut = build_automaton(prefix_word)
            ret = _scan_hitting(fm, window, aut, rng, cap,
                                start_state=aut.border, first_coord=n)
            if ret is None:
                cens += 1
            else:
                ow_vals.append(math.log(ret) / n)
        smb[n] = smb_vals
        ow[n] = np.asarray(ow_vals)
        censored[n] = cens
        if cens > samples / 2:
            widened = True
    n_top = max(ns)
    return EntropyEstimates(n_values=ns, smb_slopes=smb, ow_slopes=ow,
                            censored=censored,
                            h_hat=float(np.mean(smb[n_top])),
                            h0=fm.h0, cap=cap,
                            widened_uncertainty=widened)
