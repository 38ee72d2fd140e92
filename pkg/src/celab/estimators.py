"""Conventional baselines: LS, genie LMMSE, and empirical LMMSE.

The LMMSE filter uses the per-coefficient LS error variance
sigma_eff^2 = sigma^2 / E_p as its regularizer, which generalizes the
unit-energy-pilot form to the unnormalized QAM constellation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalFailureError

_COND_LIMIT = 1e12


def estimate_ls(y_p: np.ndarray, x_p: np.ndarray) -> np.ndarray:
    """LS channel estimate Y_p X_p* (X_p X_p*)^-1 for one subcarrier.

    Also accepts stacked inputs [n_sc x N_r x N_p] / [n_sc x N_t x N_p].
    """
    y_p = np.asarray(y_p, dtype=complex)
    x_p = np.asarray(x_p, dtype=complex)
    gram = x_p @ np.conj(np.swapaxes(x_p, -1, -2))
    cond = np.linalg.cond(gram)
    if not np.all(np.isfinite(cond)) or np.max(cond) > _COND_LIMIT:
        raise NumericalFailureError(
            f"pilot Gram matrix ill-conditioned (cond={np.max(cond):.3e})"
        )
    cross = y_p @ np.conj(np.swapaxes(x_p, -1, -2))
    # A G^-1 via a Hermitian solve: (G^-1 A^H)^H.
    return np.conj(np.swapaxes(np.linalg.solve(gram, np.conj(np.swapaxes(cross, -1, -2))), -1, -2))


def _check_corr(r_hh: np.ndarray) -> np.ndarray:
    r_hh = np.asarray(r_hh, dtype=complex)
    if r_hh.ndim != 2 or r_hh.shape[0] != r_hh.shape[1]:
        raise InvalidArgumentError("correlation matrix must be square")
    if not np.allclose(r_hh, r_hh.conj().T, atol=1e-8):
        raise InvalidArgumentError("correlation matrix must be Hermitian")
    return r_hh


def lmmse_filter(r_hh: np.ndarray, sigma_eff2: float) -> np.ndarray:
    """R (R + sigma_eff^2 I)^-1, reusable across estimates at the same noise level."""
    r_hh = _check_corr(r_hh)
    if sigma_eff2 < 0:
        raise InvalidArgumentError("noise variance must be >= 0")
    if sigma_eff2 == 0:
        return np.eye(r_hh.shape[0], dtype=complex)
    n = r_hh.shape[0]
    return np.linalg.solve((r_hh + sigma_eff2 * np.eye(n)).conj().T, r_hh.conj().T).conj().T


def estimate_lmmse(h_ls, r_hh, sigma2: float, pilot_energy: float) -> np.ndarray:
    """Frequency-domain LMMSE filtering of one (r, t) LS channel vector."""
    if pilot_energy <= 0:
        raise InvalidArgumentError("pilot energy must be > 0")
    filt = lmmse_filter(r_hh, sigma2 / pilot_energy)
    return filt @ np.asarray(h_ls, dtype=complex)


@dataclass(frozen=True)
class EmLmmseState:
    """Running channel-correlation estimate for one (r, t) antenna pair."""

    corr: np.ndarray
    subframes_seen: int = 0
    window: int = 100

    @classmethod
    def initial(cls, n_sc: int, window: int = 100) -> "EmLmmseState":
        return cls(corr=np.eye(n_sc, dtype=complex), subframes_seen=0, window=window)


def update_empirical_correlation(state: EmLmmseState, h_hat) -> EmLmmseState:
    """Capped-window moving average of h h* outer products."""
    h_hat = np.asarray(h_hat, dtype=complex)
    w = min(state.subframes_seen + 1, state.window)
    corr = (1.0 - 1.0 / w) * state.corr + (1.0 / w) * np.outer(h_hat, h_hat.conj())
    return EmLmmseState(corr=corr, subframes_seen=state.subframes_seen + 1, window=state.window)


def estimate_em_lmmse(state: EmLmmseState, h_ls, sigma2: float, pilot_energy: float) -> np.ndarray:
    """LMMSE filtering with the empirical correlation in place of the true one."""
    return estimate_lmmse(h_ls, state.corr, sigma2, pilot_energy)
