"""Regularized design matrix with rank-one updates, and confidence widths.

The design matrix starts at lam * I and accumulates outer products u u^T of
scaled gradient features.  Full mode maintains the inverse by the
Sherman-Morrison identity and the log-determinant ratio by the matrix
determinant lemma, with a periodic refresh from a direct factorization to
bound floating-point drift.  Diagonal mode keeps only the p diagonal entries
(the large-width approximation used for wide networks); its "log-det" is the
sum of per-coordinate log ratios.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "DesignMatrix",
    "GammaInputs",
    "gamma_theoretical",
    "gamma_constant",
    "ConstantWidth",
    "TheoreticalWidth",
    "RidgeWidth",
]

DEFAULT_REFRESH_EVERY = 512


class DesignMatrix:
    """lam*I plus a stream of rank-one updates; owned by one policy run."""

    def __init__(self, dim: int, lam: float, mode: str = "full",
                 refresh_every: int = DEFAULT_REFRESH_EVERY):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if lam <= 0:
            raise ValueError(f"lam must be positive, got {lam}")
        if mode not in ("full", "diagonal"):
            raise ValueError(f"mode must be 'full' or 'diagonal', got {mode!r}")
        if refresh_every < 1:
            raise ValueError(f"refresh_every must be >= 1, got {refresh_every}")
        self.dim = dim
        self.lam = lam
        self.mode = mode
        self.refresh_every = refresh_every
        self._updates = 0
        if mode == "full":
            self._z = lam * np.eye(dim)
            self._z_inv = np.eye(dim) / lam
            self._logdet = 0.0
        else:
            self._diag = np.full(dim, lam)

    def _check_vec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"vector has shape {v.shape}, expected ({self.dim},)")
        return v

    def rank_one_update(self, u) -> None:
        """Z += u u^T (full) or Z_kk += u_k^2 (diagonal)."""
        u = self._check_vec(u)
        if self.mode == "diagonal":
            self._diag += u * u
            self._updates += 1
            return
        zu = self._z_inv @ u
        denom = 1.0 + float(u @ zu)
        self._z += np.outer(u, u)
        self._z_inv -= np.outer(zu, zu) / denom
        self._logdet += math.log(denom)
        self._updates += 1
        if self._updates % self.refresh_every == 0:
            self.refresh()

    def refresh(self) -> None:
        """Recompute the inverse and log-det from a direct Cholesky factorization."""
        if self.mode == "diagonal":
            return
        chol = np.linalg.cholesky(self._z)
        inv_chol = np.linalg.solve(chol, np.eye(self.dim))
        self._z_inv = inv_chol.T @ inv_chol
        self._logdet = 2.0 * float(np.sum(np.log(np.diag(chol)))) - self.dim * math.log(self.lam)

    def quadratic_form(self, v) -> float:
        """v^T Z^{-1} v; nonnegative."""
        v = self._check_vec(v)
        if self.mode == "diagonal":
            return float(np.sum(v * v / self._diag))
        return float(v @ (self._z_inv @ v))

    def solve(self, rhs) -> np.ndarray:
        """Z^{-1} rhs using the maintained inverse (or the diagonal)."""
        rhs = self._check_vec(rhs)
        if self.mode == "diagonal":
            return rhs / self._diag
        return self._z_inv @ rhs

    def log_det_ratio(self) -> float:
        """log(det Z / det lam*I); zero for a fresh matrix, nondecreasing."""
        if self.mode == "diagonal":
            return float(np.sum(np.log(self._diag / self.lam)))
        return self._logdet

    @property
    def matrix(self) -> np.ndarray:
        """Dense Z (diagonal mode materializes it); for inspection and tests."""
        if self.mode == "diagonal":
            return np.diag(self._diag)
        return self._z.copy()

    @property
    def inverse(self) -> np.ndarray:
        """The maintained dense inverse (diagonal mode materializes it)."""
        if self.mode == "diagonal":
            return np.diag(1.0 / self._diag)
        return self._z_inv.copy()

    @property
    def updates(self) -> int:
        return self._updates


@dataclass(frozen=True)
class GammaInputs:
    """Knobs of the theoretical exploration width.

    c1, c2, c3 are the absolute constants of the width formula; they are
    proved to exist but never pinned down, so they are user-supplied and
    default to 1.  j_steps may be math.inf to switch the geometric
    optimization-error term off.
    """

    nu: float
    delta: float
    s_norm: float
    lam: float
    width: int
    depth: int
    t: int
    eta: float
    j_steps: float
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.s_norm <= 0:
            raise ValueError(f"s_norm must be positive, got {self.s_norm}")
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.width < 1 or self.depth < 2 or self.t < 0:
            raise ValueError("width >= 1, depth >= 2 and t >= 0 required")
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.j_steps < 0:
            raise ValueError(f"j_steps must be >= 0, got {self.j_steps}")
        if min(self.c1, self.c2, self.c3) < 0:
            raise ValueError("c1, c2, c3 must be nonnegative")


def gamma_theoretical(inputs: GammaInputs, logdet: float) -> float:
    """Evaluate the full exploration-width formula at round t.

    gamma = sqrt(1 + c1 * w) * (nu * sqrt(logdet + c2 * w' - 2 log delta)
                                + sqrt(lam) * S)
            + (lam + c3 * t * L) * [decay + approx]

    where w, w' and approx are width-dependent correction terms that all
    carry a factor m^{-1/6} sqrt(log m) and vanish as the width grows, and
    decay = (1 - eta*m*lam)^{J/2} sqrt(t/lam) is the optimization error of
    J gradient steps (zero under the J = inf sentinel).
    """
    if logdet < 0:
        raise ValueError(f"logdet must be nonnegative, got {logdet}")
    nu, delta, s, lam = inputs.nu, inputs.delta, inputs.s_norm, inputs.lam
    m, L, t, eta, j = inputs.width, inputs.depth, inputs.t, inputs.eta, inputs.j_steps
    decay_base = eta * m * lam
    if decay_base >= 1.0:
        raise ValueError(
            f"eta*m*lam = {decay_base:.6g} >= 1: step size too large for the "
            "geometric decay term to be meaningful"
        )
    mfac = m ** (-1.0 / 6.0) * math.sqrt(math.log(m)) if m > 1 else 0.0
    front = math.sqrt(1.0 + inputs.c1 * mfac * L**4 * t ** (7.0 / 6.0) * lam ** (-7.0 / 6.0))
    inner = logdet + inputs.c2 * mfac * L**4 * t ** (5.0 / 3.0) * lam ** (-1.0 / 6.0) \
        - 2.0 * math.log(delta)
    if inner < 0:
        raise ValueError(
            f"argument of the inner square root is negative ({inner:.6g}); "
            "the supplied constants are inconsistent"
        )
    if math.isinf(j):
        decay = 0.0
    else:
        decay = (1.0 - decay_base) ** (j / 2.0) * math.sqrt(t / lam)
    approx = mfac * L ** 3.5 * t ** (5.0 / 3.0) * lam ** (-5.0 / 3.0) * (1.0 + math.sqrt(t / lam))
    return front * (nu * math.sqrt(inner) + math.sqrt(lam) * s) \
        + (lam + inputs.c3 * t * L) * (decay + approx)


class ConstantWidth:
    """Fixed exploration width gamma_t = gamma for every round."""

    def __init__(self, gamma: float):
        if gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {gamma}")
        self.gamma = gamma

    def __call__(self, t: int, logdet: float) -> float:
        return self.gamma


def gamma_constant(gamma: float) -> ConstantWidth:
    """Width provider returning the same gamma at every round."""
    return ConstantWidth(gamma)


class TheoreticalWidth:
    """Width provider evaluating the full formula with the round index filled in."""

    def __init__(self, inputs: GammaInputs):
        self.inputs = inputs

    def __call__(self, t: int, logdet: float) -> float:
        return gamma_theoretical(replace(self.inputs, t=t), logdet)


class RidgeWidth:
    """Closed-form ridge width: nu * sqrt(logdet - 2 log delta) + sqrt(lam) * S."""

    def __init__(self, nu: float, delta: float, s_norm: float, lam: float):
        if nu <= 0 or not 0 < delta < 1 or s_norm <= 0 or lam <= 0:
            raise ValueError("require nu > 0, 0 < delta < 1, s_norm > 0, lam > 0")
        self.nu = nu
        self.delta = delta
        self.s_norm = s_norm
        self.lam = lam

    def __call__(self, t: int, logdet: float) -> float:
        return self.nu * math.sqrt(logdet - 2.0 * math.log(self.delta)) \
            + math.sqrt(self.lam) * self.s_norm
