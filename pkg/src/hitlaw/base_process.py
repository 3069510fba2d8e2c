"""Driving noise process: an invertible ergodic symbol stream.

The driving system is realized as a stationary Bernoulli or finite-state
Markov stream with exact cylinder probabilities.  Both are exponentially
psi-mixing, and for both the mixing coefficients are computable in closed
form from transfer-matrix powers, so every downstream quantity that needs
the base law gets it exactly rather than by estimation.

Windows are finite realizations of the (two-sided) noise: they extend to
the right on demand, deterministically for a given seed, and shifted views
share the underlying buffer so that "the same noise seen k steps later"
is literally the same realization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError

_STOCHASTIC_ATOL = 1e-12

# Cap on the number of cylinder pairs psi_mixing_coefficient may enumerate.
_ENUMERATION_CAP = 10**7


def make_rng(seed) -> np.random.Generator:
    """One documented generator: PCG64 keyed by a 64-bit seed.

    ``seed`` may be an int or a sequence of ints; independent worker
    streams use composite keys ``(experiment_seed, worker_index)``.
    """
    return np.random.default_rng(seed)


def _check_probability_vector(w: np.ndarray, what: str) -> None:
    if w.ndim != 1 or w.size < 2:
        raise ValueError(f"{what} must be a vector of length >= 2")
    if not np.all((w > 0.0) & (w < 1.0)):
        raise ValueError(f"{what} entries must lie strictly inside (0, 1)")
    if abs(float(w.sum()) - 1.0) > _STOCHASTIC_ATOL:
        raise ValueError(f"{what} must sum to 1 within {_STOCHASTIC_ATOL}")


def stationary_distribution(q: np.ndarray) -> np.ndarray:
    """Stationary vector of a stochastic matrix, via the unit left eigenvector."""
    vals, vecs = np.linalg.eig(q.T)
    idx = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.real(vecs[:, idx])
    pi = pi / pi.sum()
    return pi


@dataclass(frozen=True)
class BaseProcess:
    """Stationary law of the driving symbols over the alphabet {0..s}.

    kind is "bernoulli" (``weights`` is a probability vector) or "markov"
    (``transition`` is a stochastic matrix and ``stationary`` its invariant
    vector).  All entries must lie strictly inside (0, 1): degenerate
    weights would break the mixing and small-cylinder hypotheses downstream.
    """

    kind: str
    weights: np.ndarray | None = None
    transition: np.ndarray | None = None
    stationary: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "bernoulli":
            if self.weights is None:
                raise ValueError("bernoulli process needs a weight vector")
            w = np.asarray(self.weights, dtype=float)
            _check_probability_vector(w, "weights")
            object.__setattr__(self, "weights", w)
        elif self.kind == "markov":
            if self.transition is None:
                raise ValueError("markov process needs a transition matrix")
            q = np.asarray(self.transition, dtype=float)
            if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 2:
                raise ValueError("transition must be a square matrix of size >= 2")
            if not np.all((q > 0.0) & (q < 1.0)):
                raise ValueError("transition entries must lie strictly inside (0, 1)")
            if np.max(np.abs(q.sum(axis=1) - 1.0)) > _STOCHASTIC_ATOL:
                raise ValueError("transition rows must sum to 1 within 1e-12")
            pi = (
                stationary_distribution(q)
                if self.stationary is None
                else np.asarray(self.stationary, dtype=float)
            )
            _check_probability_vector(pi, "stationary vector")
            if np.max(np.abs(pi @ q - pi)) > 1e-10:
                raise ValueError("stationary vector does not satisfy pi Q = pi")
            object.__setattr__(self, "transition", q)
            object.__setattr__(self, "stationary", pi)
        else:
            raise ValueError(f"unknown base process kind: {self.kind!r}")

    @classmethod
    def bernoulli(cls, weights) -> "BaseProcess":
        return cls(kind="bernoulli", weights=np.asarray(weights, dtype=float))

    @classmethod
    def markov(cls, transition, stationary=None) -> "BaseProcess":
        return cls(kind="markov", transition=np.asarray(transition, dtype=float),
                   stationary=stationary)

    @property
    def alphabet_size(self) -> int:
        if self.kind == "bernoulli":
            return int(self.weights.size)
        return int(self.transition.shape[0])

    def symbol_weights(self) -> np.ndarray:
        """Marginal law of a single symbol (the stationary vector for markov)."""
        return self.weights if self.kind == "bernoulli" else self.stationary


class _WindowBuffer:
    """Growable symbol buffer shared by a window and all its shifted views.

    Extension draws from the stored generator, so it is deterministic for a
    given seed and independent of how the extensions are interleaved.
    """

    def __init__(self, proc: BaseProcess, rng: np.random.Generator, length: int):
        self.proc = proc
        self.rng = rng
        self.symbols = np.empty(0, dtype=np.int64)
        if length > 0:
            self.extend_to(length)

    def extend_to(self, length: int) -> None:
        extra = length - self.symbols.size
        if extra <= 0:
            return
        proc, rng = self.proc, self.rng
        if proc.kind == "bernoulli":
            block = rng.choice(proc.alphabet_size, size=extra, p=proc.weights)
        else:
            cum = np.cumsum(proc.transition, axis=1)
            u = rng.random(extra)
            block = np.empty(extra, dtype=np.int64)
            if self.symbols.size == 0:
                state = int(np.searchsorted(np.cumsum(proc.stationary), u[0], side="right"))
                block[0] = state
                start = 1
            else:
                state = int(self.symbols[-1])
                start = 0
            for i in range(start, extra):
                state = int(np.searchsorted(cum[state], u[i], side="right"))
                block[i] = state
        self.symbols = np.concatenate([self.symbols, np.asarray(block, dtype=np.int64)])


class BaseWindow:
    """A finite stretch of one noise realization, starting at ``start_index``.

    ``shifted(k)`` returns a view of the same realization k steps later;
    views share the buffer, so extending any of them extends all.
    """

    def __init__(self, buf: _WindowBuffer, start_index: int = 0, label: str = ""):
        self._buf = buf
        self.start_index = start_index
        self.label = label

    def __len__(self) -> int:
        return max(0, self._buf.symbols.size - self.start_index)

    def __getitem__(self, i: int) -> int:
        if i < 0 or self.start_index + i >= self._buf.symbols.size:
            raise ValueError(f"window covers only {len(self)} symbols, asked for index {i}")
        return int(self._buf.symbols[self.start_index + i])

    def prefix(self, length: int) -> np.ndarray:
        """Symbols 0..length-1 of this window (no copy)."""
        if length > len(self):
            raise ValueError(f"window covers only {len(self)} symbols, asked for {length}")
        return self._buf.symbols[self.start_index:self.start_index + length]

    def ensure(self, length: int) -> None:
        """Extend the underlying realization so this window covers ``length`` symbols."""
        self._buf.extend_to(self.start_index + length)

    def shifted(self, k: int) -> "BaseWindow":
        if k < 0:
            raise ValueError("windows only extend to the right; shift must be >= 0")
        return BaseWindow(self._buf, self.start_index + k, label=f"{self.label}+{k}")


def sample_window(proc: BaseProcess, seed, length: int) -> BaseWindow:
    """Draw a stationary window of ``length`` symbols, reproducible from ``seed``."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    buf = _WindowBuffer(proc, make_rng(seed), length)
    return BaseWindow(buf, 0, label=f"seed={seed}")


def base_cylinder_prob(proc: BaseProcess, word) -> float:
    """Exact probability of observing ``word`` at consecutive positions."""
    w = np.asarray(word, dtype=np.int64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("word must be a non-empty symbol sequence")
    if np.any(w < 0) or np.any(w >= proc.alphabet_size):
        raise ValueError("word contains out-of-range symbols")
    if proc.kind == "bernoulli":
        return float(np.prod(proc.weights[w]))
    p = float(proc.stationary[w[0]])
    for a, b in zip(w[:-1], w[1:]):
        p *= float(proc.transition[a, b])
    return p


def psi_mixing_coefficient(proc: BaseProcess, gap: int, n: int, m: int) -> float:
    """Exact ratio-mixing coefficient between rank-n and rank-m cylinders.

    Maximizes |P(U and V after a gap) / (P(U) P(V)) - 1| over all rank-n
    cylinders U and rank-m cylinders V separated by ``gap`` extra steps.
    For a product measure this is exactly 0.  For a Markov stream the ratio
    depends only on the last symbol of U and the first of V, so the
    maximum over all cylinder pairs reduces to a maximum over symbol pairs
    of the (gap+1)-step transfer power against the stationary law; since
    every cylinder has positive mass, the reduction is exact.
    """
    if gap < 0:
        raise ValueError("gap must be >= 0")
    if n < 1 or m < 1:
        raise ValueError("cylinder ranks must be >= 1")
    s = proc.alphabet_size
    if s ** (n + m) > _ENUMERATION_CAP:
        raise ResourceLimitError(
            f"{s}^{n + m} cylinder pairs exceed the enumeration cap {_ENUMERATION_CAP}")
    if proc.kind == "bernoulli":
        return 0.0
    power = np.linalg.matrix_power(proc.transition, gap + 1)
    ratio = power / proc.stationary[np.newaxis, :]
    return float(np.max(np.abs(ratio - 1.0)))
