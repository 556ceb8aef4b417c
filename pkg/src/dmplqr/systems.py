"""Plant and cost containers plus the seeded benchmark generator.

The benchmark family is an open-loop unstable LTI plant with a prescribed
set of real poles (one unstable, two slow stable) and a fast stable bulk.
All randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence``, so a fixed seed reproduces the same plant bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .linalg import as_matrix, check_positive_definite, controllability_margin

#: accepted systems must have a normalized PBH margin above this
CONTROLLABILITY_TOL = 1e-8
#: accepted systems have no eigenvalue within this distance of zero
INVERTIBILITY_TOL = 1e-8
MAX_ATTEMPTS = 10


def make_rng(seed, *key):
    """Named portable generator: PCG64 fed by ``SeedSequence([seed, *key])``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, key)])))


@dataclass(frozen=True)
class PoleSpec:
    """Prescribed spectrum of the benchmark plant.

    Parameters
    ----------
    unstable : tuple of float
        Real unstable poles (> 0).
    slow_stable : tuple of float
        Real slow stable poles.
    fast_bound : float
        Every remaining pole has real part in ``[2 * fast_bound, fast_bound]``.
    imag_bound : float
        Upper bound on the imaginary part of the random complex fast pairs.
    """

    unstable: tuple = (0.4,)
    slow_stable: tuple = (-0.5, -1.2)
    fast_bound: float = -30.0
    imag_bound: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "unstable", tuple(float(p) for p in self.unstable))
        object.__setattr__(self, "slow_stable", tuple(float(p) for p in self.slow_stable))
        if any(p <= 0 for p in self.unstable):
            raise ValidationError("unstable poles must be positive")
        if any(p >= 0 for p in self.slow_stable):
            raise ValidationError("slow stable poles must be negative")
        if not self.fast_bound < 0:
            raise ValidationError("fast_bound must be negative")
        if self.slow_stable and not self.fast_bound < min(self.slow_stable):
            raise ValidationError("fast_bound must lie below every slow stable pole")
        if self.imag_bound < 0:
            raise ValidationError("imag_bound must be nonnegative")

    @property
    def prescribed(self):
        return self.unstable + self.slow_stable

    def to_dict(self):
        return {
            "unstable": list(self.unstable),
            "slow_stable": list(self.slow_stable),
            "fast_bound": self.fast_bound,
            "imag_bound": self.imag_bound,
        }


@dataclass
class LtiSystem:
    """Continuous-time plant ``dx/dt = A x + B u``."""

    A: np.ndarray
    B: np.ndarray
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = as_matrix(self.A, "A", square=True)
        self.B = as_matrix(self.B, "B")
        if self.B.shape[0] != self.A.shape[0]:
            raise ValidationError(f"dimension mismatch: A {self.A.shape} vs B {self.B.shape}")

    @property
    def n_x(self):
        return self.A.shape[0]

    @property
    def n_u(self):
        return self.B.shape[1]

    def controllability_margin(self):
        return controllability_margin(self.A, self.B)

    def to_dict(self):
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "n_x": self.n_x,
            "n_u": self.n_u,
            "seed": self.seed,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(np.array(d["A"], dtype=float), np.array(d["B"], dtype=float),
                       seed=d.get("seed"), meta=dict(d.get("meta", {})))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed system description: {exc}") from exc

    def fingerprint(self):
        """SHA-256 of the canonical serialization of ``A`` and ``B``.

        Floats are written with ``repr`` so the hash is exact; the seed and
        metadata do not enter it, only the matrices.
        """
        canon = json.dumps({"A": [[repr(float(v)) for v in row] for row in self.A],
                            "B": [[repr(float(v)) for v in row] for row in self.B]},
                           sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class CostSpec:
    """Quadratic stage cost ``x^T Q x + u^T R u`` with ``Q, R`` positive definite."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.Q = check_positive_definite(self.Q, "Q")
        self.R = check_positive_definite(self.R, "R")

    @classmethod
    def identity(cls, n_x, n_u=1):
        return cls(np.eye(n_x), np.eye(n_u))

    def check_against(self, sys):
        if self.Q.shape[0] != sys.n_x or self.R.shape[0] != sys.n_u:
            raise ValidationError(
                f"cost dimensions Q {self.Q.shape}, R {self.R.shape} do not match system (n_x={sys.n_x}, n_u={sys.n_u})")

    def to_dict(self):
        return {"Q": self.Q.tolist(), "R": self.R.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["Q"], dtype=float), np.array(d["R"], dtype=float))


def _quasi_triangular(rng, n, spec, coupling):
    T = np.zeros((n, n))
    i = 0
    for p in spec.prescribed:
        T[i, i] = p
        i += 1
    lo, hi = 2.0 * spec.fast_bound, spec.fast_bound
    while i < n:
        re = rng.uniform(lo, hi)
        if n - i >= 2 and spec.imag_bound > 0 and rng.random() < 0.5:
            im = rng.uniform(0.0, spec.imag_bound)
            T[i:i + 2, i:i + 2] = [[re, im], [-im, re]]
            i += 2
        else:
            T[i, i] = re
            i += 1
    U = np.triu(rng.standard_normal((n, n)), 1) * coupling
    # keep 2x2 blocks intact so the block eigenvalues are exactly the drawn pair
    for k in range(n - 1):
        if T[k + 1, k] != 0.0:
            U[k, k + 1] = 0.0
    return T + U


def generate_benchmark_system(seed, n_x=97, n_u=1, spec=None, coupling=1.0,
                              fast_input_weight=0.1, input_norm=None):
    """Draw a random plant with a prescribed spectrum.

    ``A = W T W^T`` where ``W`` is a random orthogonal matrix and ``T`` is
    quasi upper triangular: prescribed real poles first, then random fast
    real poles or complex pairs, plus standard normal strictly upper
    coupling scaled by ``coupling``. ``B`` is drawn in the Schur basis of
    ``T`` and rotated by ``W``.

    Parameters
    ----------
    seed : int
        Master seed.
    n_x, n_u : int
        State and input dimensions.
    spec : PoleSpec, optional
        Prescribed spectrum; defaults to ``PoleSpec()``.
    coupling : float
        Scale of the random upper-triangular coupling.
    fast_input_weight : float
        Multiplier on the rows of the Schur-basis input matrix that drive
        the fast bulk. Values below one make the fast modes weakly actuated,
        which keeps the LQR value matrix well conditioned.
    input_norm : float, optional
        If given, every column of ``B`` is rescaled to this Euclidean norm.

    Returns
    -------
    LtiSystem
        Controllable plant with no eigenvalue near zero. The generation
        parameters are recorded in ``meta``.

    Raises
    ------
    ValidationError
        On inconsistent dimensions.
    NumericalError
        If no controllable, invertible draw is found within the retry budget.
    """
    spec = PoleSpec() if spec is None else spec
    n_x, n_u = int(n_x), int(n_u)
    n_pres = len(spec.prescribed)
    if n_u < 1:
        raise ValidationError("n_u must be >= 1")
    if n_x < n_pres + 1:
        raise ValidationError(f"n_x={n_x} too small for {n_pres} prescribed poles plus a fast bulk")
    if coupling < 0 or fast_input_weight <= 0:
        raise ValidationError("coupling must be >= 0 and fast_input_weight > 0")
    if input_norm is not None and input_norm <= 0:
        raise ValidationError("input_norm must be positive")

    for attempt in range(MAX_ATTEMPTS):
        rng = make_rng(seed, attempt)
        T = _quasi_triangular(rng, n_x, spec, coupling)
        W, _ = np.linalg.qr(rng.standard_normal((n_x, n_x)))
        Bs = rng.standard_normal((n_x, n_u))
        Bs[n_pres:] *= fast_input_weight
        A = W @ T @ W.T
        B = W @ Bs
        if input_norm is not None:
            B = B * (input_norm / np.linalg.norm(B, axis=0))
        if np.min(np.abs(np.linalg.eigvals(A))) <= INVERTIBILITY_TOL:
            continue
        if controllability_margin(A, B) <= CONTROLLABILITY_TOL:
            continue
        meta = {
            "generator": "quasi-triangular-orthogonal",
            "rng": "numpy PCG64 via SeedSequence([seed, attempt])",
            "attempt": attempt,
            "spec": spec.to_dict(),
            "coupling": float(coupling),
            "fast_input_weight": float(fast_input_weight),
            "input_norm": None if input_norm is None else float(input_norm),
        }
        return LtiSystem(A, B, seed=int(seed), meta=meta)
    raise NumericalError(f"no controllable invertible system after {MAX_ATTEMPTS} attempts (seed={seed})")


def random_controllable_system(seed, n_x, n_u=1, stable_shift=None):
    """Small dense test system with standard normal entries.

    Used for oracles and property checks rather than the benchmark.
    ``stable_shift`` places the rightmost eigenvalue at ``-stable_shift``; a
    positive value makes the open loop Hurwitz, a negative one leaves a few
    unstable modes.
    """
    for attempt in range(MAX_ATTEMPTS):
        rng = make_rng(seed, attempt)
        A = rng.standard_normal((n_x, n_x)) / np.sqrt(n_x)
        B = rng.standard_normal((n_x, n_u))
        if stable_shift is not None:
            A = A - (np.max(np.linalg.eigvals(A).real) + stable_shift) * np.eye(n_x)
        if np.min(np.abs(np.linalg.eigvals(A))) > INVERTIBILITY_TOL and controllability_margin(A, B) > CONTROLLABILITY_TOL:
            return LtiSystem(A, B, seed=int(seed), meta={"generator": "gaussian", "attempt": attempt})
    raise NumericalError(f"no controllable test system found (seed={seed})")
