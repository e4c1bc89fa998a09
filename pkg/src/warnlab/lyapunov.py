"""Stationary covariances of stable linear SDE systems.

The stationary covariance V of dX = A X dt + sigma B dW_Q solves the Lyapunov
identity A V + V A* = -sigma^2 BQB*. In an eigenbasis of a diagonalizable A
the entries decouple,

    <V u_k, u_j> = -sigma^2 <BQB* u_k, u_j> / (lambda_k + conj(lambda_j)),

and for a Jordan block J = lambda I + N the coordinate covariance satisfies
2 Re(lambda) V[i, j] + V[i+1, j] + V[i, j+1] = -sigma^2 C[i, j] (indices past
the block rim read as zero), solved here by back-substitution along
antidiagonals. ``finite_lyapunov_solve`` is the brute-force dense route kept
intentionally independent of the closed forms so the two can cross-check each
other.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import NumericalError
from .spectrum import MultiplicationSymbolModel, SpectralModel, WeylVector, spectral_abscissa

_HERMITIAN_TOL = 1e-10
_XI_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CovarianceReport:
    """Stationary covariance entries at a single parameter value.

    ``entries`` is keyed by basis index pairs; for a purely diagonal model the
    basis index coincides with the mode id, while Jordan blocks occupy
    consecutive indices (their sub-blocks are repeated in ``block_matrices``
    keyed by mode id).
    """

    p: float
    entries: Mapping[tuple[int, int], complex]
    provenance: str
    block_matrices: Mapping[int, np.ndarray] = field(default_factory=dict)
    norm_surrogate: float | None = None
    standard_errors: Mapping[tuple[int, int], float] | None = None

    def __post_init__(self):
        if self.provenance not in ("analytic", "empirical"):
            raise ValueError("provenance: must be 'analytic' or 'empirical'")
        scale = max([1.0] + [abs(v) for v in self.entries.values()])
        for (k, j), v in self.entries.items():
            w = self.entries.get((j, k))
            if w is not None and abs(v - w.conjugate()) > _HERMITIAN_TOL * scale:
                raise ValueError(f"entries: Hermitian symmetry violated at ({k}, {j})")
            if k == j and (abs(v.imag) > _HERMITIAN_TOL * scale or v.real < -_HERMITIAN_TOL * scale):
                raise ValueError(f"entries: diagonal entry ({k}, {k}) must be real >= 0")

    def write_csv(self, path) -> None:
        with_se = self.standard_errors is not None
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["p", "k", "j", "re", "im", "provenance"]
            if with_se:
                header.append("stderr")
            writer.writerow(header)
            for (k, j) in sorted(self.entries):
                v = self.entries[(k, j)]
                row = [repr(float(self.p)), k, j, repr(float(v.real)), repr(float(v.imag)), self.provenance]
                if with_se:
                    row.append(repr(float(self.standard_errors[(k, j)])))
                writer.writerow(row)

    def to_dict(self) -> dict:
        out = {
            "p": float(self.p),
            "provenance": self.provenance,
            "entries": [
                {
                    "k": k,
                    "j": j,
                    "re": float(v.real),
                    "im": float(v.imag),
                    **(
                        {"stderr": float(self.standard_errors[(k, j)])}
                        if self.standard_errors is not None
                        else {}
                    ),
                }
                for (k, j), v in sorted(self.entries.items())
            ],
            "norm_surrogate": self.norm_surrogate,
        }
        if self.block_matrices:
            out["blocks"] = {
                str(k): [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]
                for k, m in self.block_matrices.items()
            }
        return out

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class XiEstimate:
    """Limit estimate of sigma(p)^2 / (2 lambda_{k*}(p)) as p increases to p*."""

    value: complex
    samples: tuple
    converged: bool
    tolerance: float = _XI_TOL


def stationary_covariance_entry(lambda_k: complex, lambda_j: complex, b_kj: complex, sigma: float) -> complex:
    """Closed-form covariance pairing -sigma^2 b_kj / (lambda_k + conj(lambda_j)).

    Raises:
        NumericalError: on a degenerate on-axis pair (denominator zero) or if
            either eigenvalue fails strict stability.
    """
    lk = complex(lambda_k)
    lj = complex(lambda_j)
    denom = lk + lj.conjugate()
    if denom == 0:
        raise NumericalError(
            f"degenerate pair: lambda_k + conj(lambda_j) = 0 for ({lk}, {lj})"
        )
    if lk.real >= 0.0 or lj.real >= 0.0:
        raise NumericalError(
            f"stationary covariance needs Re(lambda) < 0, got ({lk}, {lj})"
        )
    sigma = float(sigma)
    if sigma < 0.0:
        raise ValueError("sigma: must be >= 0")
    return -(sigma * sigma) * complex(b_kj) / denom


def jordan_stationary_covariance(lam: complex, m: int, noise_block, sigma: float) -> np.ndarray:
    """Stationary coordinate covariance of a single Jordan block.

    Solves J V + V J^H = -sigma^2 C for J = lam I + N (superdiagonal ones) by
    back-substitution along antidiagonals, starting at the (m, m) corner.
    """
    lam = complex(lam)
    if lam.real >= 0.0:
        raise NumericalError(f"Jordan block eigenvalue must satisfy Re(lambda) < 0, got {lam}")
    if int(m) != m or m < 1:
        raise ValueError("m: block size must be a positive integer")
    m = int(m)
    c = np.asarray(noise_block, dtype=complex)
    if c.shape != (m, m):
        raise ValueError(f"noise_block: expected shape ({m}, {m}), got {c.shape}")
    scale = max(1.0, float(np.max(np.abs(c))))
    if np.max(np.abs(c - c.conj().T)) > _HERMITIAN_TOL * scale:
        raise ValueError("noise_block: must be Hermitian")
    sigma = float(sigma)
    if sigma < 0.0:
        raise ValueError("sigma: must be >= 0")
    two_re = 2.0 * lam.real
    s2 = sigma * sigma
    v = np.zeros((m, m), dtype=complex)
    for s in range(2 * m - 2, -1, -1):
        for i in range(max(0, s - m + 1), min(m - 1, s) + 1):
            j = s - i
            rhs = -s2 * c[i, j]
            if i + 1 < m:
                rhs -= v[i + 1, j]
            if j + 1 < m:
                rhs -= v[i, j + 1]
            v[i, j] = rhs / two_re
    return 0.5 * (v + v.conj().T)


def finite_lyapunov_solve(a, c, sigma: float) -> np.ndarray:
    """Dense Kronecker solve of A V + V A^H = -sigma^2 C.

    Brute-force oracle: vectorizes the identity row-major and solves the
    n^2 x n^2 system directly. No structure of A is exploited.
    """
    a = np.asarray(a, dtype=complex)
    c = np.asarray(c, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or c.shape != a.shape:
        raise ValueError("finite_lyapunov_solve: A and C must be square with equal shapes")
    eigs = np.linalg.eigvals(a)
    if float(np.max(eigs.real)) >= 0.0:
        raise NumericalError(
            f"finite_lyapunov_solve: spectrum not strictly stable (max Re = {np.max(eigs.real)})"
        )
    n = a.shape[0]
    eye = np.eye(n)
    kron = np.kron(a, eye) + np.kron(eye, a.conj())
    try:
        vec = np.linalg.solve(kron, -(float(sigma) ** 2) * c.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("finite_lyapunov_solve: Kronecker system is singular") from exc
    if not np.all(np.isfinite(vec)):
        raise NumericalError("finite_lyapunov_solve: non-finite solution")
    v = vec.reshape(n, n)
    return 0.5 * (v + v.conj().T)


def noise_limit_xi(model: SpectralModel, p_sequence, tolerance: float = _XI_TOL) -> XiEstimate:
    """Evaluate sigma(p)^2 / (2 lambda_{k*}(p)) along an increasing sequence.

    The returned estimate carries the whole sample path; ``converged`` records
    whether the last two values differ by less than ``tolerance``.
    """
    p_seq = np.asarray(p_sequence, dtype=float)
    if p_seq.ndim != 1 or p_seq.size < 2:
        raise ValueError("p_sequence: need at least two parameter values")
    if np.any(np.diff(p_seq) <= 0):
        raise ValueError("p_sequence: must be strictly increasing toward p*")
    samples = []
    for p in p_seq:
        lam = model.lambda_at(model.critical_index, float(p))
        if lam == 0:
            raise NumericalError(f"critical eigenvalue vanishes at p={p}")
        s = model.sigma_at(float(p))
        samples.append((float(p), (s * s) / (2.0 * lam)))
    value = samples[-1][1]
    converged = abs(samples[-1][1] - samples[-2][1]) < tolerance
    return XiEstimate(value=value, samples=tuple(samples), converged=converged, tolerance=tolerance)


def multiplication_covariance_norm(model: MultiplicationSymbolModel, p: float) -> float:
    """Sup of 1 / (2 |p + f|) over the grid: the stationary covariance norm
    surrogate of the multiplication drift p + T_f with unit noise."""
    shifted = float(p) + model.values
    if np.any(shifted >= 0.0):
        raise NumericalError(
            f"p + f >= 0 on the grid at p={p}: drift not strictly stable "
            f"(p* = {-model.esssup})"
        )
    return float(1.0 / (2.0 * np.min(-shifted)))


def quadratic_form_pairing(model: MultiplicationSymbolModel, p: float, h) -> float:
    """Quadratic form sum_i mu_i |h(x_i)|^2 / (4 (p + f(x_i))^2).

    This is <V_inf h, V_inf h>-type growth data for the multiplication model;
    it diverges as p increases to p* whenever h charges the argmax set of f.
    """
    if isinstance(h, WeylVector):
        h = h.coefficients
    h = np.asarray(h)
    if h.shape != model.grid.shape:
        raise ValueError("h: shape mismatch with the model grid")
    shifted = float(p) + model.values
    if np.any(shifted >= 0.0):
        raise NumericalError(
            f"p + f >= 0 on the grid at p={p}: quadratic form undefined "
            f"(p* = {-model.esssup})"
        )
    return float(np.sum(model.weights * np.abs(h) ** 2 / (4.0 * shifted * shifted)))


def stationary_pairing(model: MultiplicationSymbolModel, p: float, h) -> float:
    """Covariance pairing <V_inf h, h> = sum_i mu_i |h(x_i)|^2 / (2 |p + f(x_i)|)
    for the multiplication drift with unit noise."""
    if isinstance(h, WeylVector):
        h = h.coefficients
    h = np.asarray(h)
    if h.shape != model.grid.shape:
        raise ValueError("h: shape mismatch with the model grid")
    shifted = float(p) + model.values
    if np.any(shifted >= 0.0):
        raise NumericalError(
            f"p + f >= 0 on the grid at p={p}: pairing undefined (p* = {-model.esssup})"
        )
    return float(np.sum(model.weights * np.abs(h) ** 2 / (2.0 * (-shifted))))


def unit_gaussian_profile(model: MultiplicationSymbolModel) -> np.ndarray:
    """Gaussian exp(-x^2/2) on the grid, normalized in the weighted l2 norm."""
    h = np.exp(-0.5 * model.grid**2)
    nrm2 = float(np.sum(model.weights * h * h))
    return h / np.sqrt(nrm2)


def assemble_drift_matrix(model: SpectralModel, p: float) -> np.ndarray:
    """Block-diagonal matrix of the drift at p in the (generalized) eigenbasis:
    one Jordan block lam_k I + N per mode."""
    dim = model.total_dim
    a = np.zeros((dim, dim), dtype=complex)
    for c in model.curves:
        lam = model.lambda_at(c.id, p)
        m = model.block_size(c.id)
        off = model.block_offset(c.id)
        for i in range(m):
            a[off + i, off + i] = lam
            if i + 1 < m:
                a[off + i, off + i + 1] = 1.0
    return a


def analytic_covariance_report(model: SpectralModel, p: float) -> CovarianceReport:
    """Assemble the full stationary covariance at p from the closed forms.

    Pairings between two simple modes and within a Jordan block use the
    closed-form routes; pairings that couple a Jordan block to a different
    mode fall back to the dense solve on the assembled block-diagonal drift.
    """
    if spectral_abscissa(model, p) >= 0.0:
        raise NumericalError(f"drift not strictly stable at p={p}")
    sigma = model.sigma_at(p)
    dim = model.total_dim
    v = np.full((dim, dim), np.nan + 0j)
    lams = {c.id: model.lambda_at(c.id, p) for c in model.curves}
    blocks = {}
    for ck in model.curves:
        mk = model.block_size(ck.id)
        off_k = model.block_offset(ck.id)
        if mk > 1:
            blk = jordan_stationary_covariance(
                lams[ck.id], mk, model.noise_block(ck.id), sigma
            )
            blocks[ck.id] = blk
            v[off_k : off_k + mk, off_k : off_k + mk] = blk
        for cj in model.curves:
            if model.block_size(cj.id) == 1 and mk == 1:
                off_j = model.block_offset(cj.id)
                v[off_k, off_j] = stationary_covariance_entry(
                    lams[ck.id], lams[cj.id], model.noise_matrix[off_k, off_j], sigma
                )
    if np.any(np.isnan(v)):
        dense = finite_lyapunov_solve(assemble_drift_matrix(model, p), model.noise_matrix, sigma)
        mask = np.isnan(v)
        v[mask] = dense[mask]
    v = 0.5 * (v + v.conj().T)
    entries = {(i, j): complex(v[i, j]) for i in range(dim) for j in range(dim)}
    surrogate = float(np.max(v.diagonal().real)) if dim else None
    return CovarianceReport(
        p=float(p),
        entries=entries,
        provenance="analytic",
        block_matrices=blocks,
        norm_surrogate=surrogate,
    )
