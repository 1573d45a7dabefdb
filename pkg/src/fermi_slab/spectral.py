"""Finite-difference fiber Hamiltonians and their low-lying spectra.

Only eigenpairs below a cutoff are computed (bisection on Sturm sequences,
then inverse iteration). Eigenvectors are stored on the full grid, with the
Dirichlet boundary rows set to zero, and normalised so that
``h * sum(psi**2) == 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import LinAlgError, eigvalsh_tridiagonal, lapack

from .grid import GridSpec, PotentialProfile

__all__ = [
    "FiberHamiltonian",
    "SpectralDecomposition",
    "SpectralError",
    "build_hamiltonian",
    "eigendecompose",
    "sturm_count",
]

log = logging.getLogger(__name__)

# relative gap below which neighbouring eigenvalues are treated as a cluster
CLUSTER_GAP = 1e-10
# relative gap below which inverse-iteration vectors are explicitly orthogonalised
ORTHO_GROUP_GAP = 1e-5
# largest matrix the dense fallback is allowed to form
DENSE_FALLBACK_MAX = 6000


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class FiberHamiltonian:
    """Symmetric tridiagonal discretisation of ``-1/2 d^2/dz^2 + V``.

    ``diagonal`` and ``off_diagonal`` refer to the interior nodes only; the two
    boundary nodes are eliminated by the Dirichlet condition.
    """

    grid: GridSpec
    potential: PotentialProfile
    diagonal: np.ndarray
    off_diagonal: np.ndarray

    @property
    def size(self) -> int:
        return self.diagonal.size

    @property
    def spectral_scale(self) -> float:
        """Width scale used for relative tolerances: ``max|V| + 2/h^2``."""
        return self.potential.sup_norm + 2.0 / self.grid.spacing**2

    def gershgorin_bounds(self) -> tuple[float, float]:
        v = self.potential.values[1:-1]
        return float(v.min()), float(v.max()) + 2.0 / self.grid.spacing**2

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Apply the operator to grid vectors (shape ``(n,)`` or ``(n, k)``)."""
        inner = psi[1:-1]
        out = np.zeros_like(psi)
        d = self.diagonal if inner.ndim == 1 else self.diagonal[:, None]
        e = self.off_diagonal if inner.ndim == 1 else self.off_diagonal[:, None]
        out[1:-1] = d * inner
        out[1:-2] += e * inner[1:]
        out[2:-1] += e * inner[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        return (
            np.diag(self.diagonal)
            + np.diag(self.off_diagonal, 1)
            + np.diag(self.off_diagonal, -1)
        )


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs ``lambda_j <= cutoff`` in ascending order.

    ``eigenvectors[:, j]`` is the grid-normalised ``psi_j`` sampled on all
    ``n`` nodes.
    """

    grid: GridSpec
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    cutoff: float

    def __len__(self):
        return self.eigenvalues.size

    def densities(self) -> np.ndarray:
        """``psi_j(z)**2`` as an ``(n, k)`` array."""
        return self.eigenvectors**2


def build_hamiltonian(grid: GridSpec, V: PotentialProfile) -> FiberHamiltonian:
    """Second-order central differences for ``-1/2 d^2/dz^2 + V`` on ``grid``."""
    if V.grid != grid:
        raise ValueError("potential is sampled on a different grid than the Hamiltonian")
    h = grid.spacing
    n_inner = grid.n_points - 2
    diag = 1.0 / h**2 + V.values[1:-1]
    off = np.full(n_inner - 1, -0.5 / h**2)
    diag.flags.writeable = False
    off.flags.writeable = False
    return FiberHamiltonian(grid, V, diag, off)


def sturm_count(diagonal: np.ndarray, off_diagonal: np.ndarray, x: float) -> int:
    """Number of eigenvalues strictly below ``x`` (Sylvester inertia of ``T - x``).

    Uses the LDL^T pivot recurrence ``q_i = d_i - x - e_{i-1}^2 / q_{i-1}``.
    """
    e2 = np.asarray(off_diagonal, dtype=float) ** 2
    d = np.asarray(diagonal, dtype=float)
    tiny = np.finfo(float).tiny ** 0.5 * max(1.0, float(np.max(np.abs(d))))
    count = 0
    q = d[0] - x
    for i in range(d.size):
        if i > 0:
            q = d[i] - x - e2[i - 1] / q
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            count += 1
    return count


def _groups(eigenvalues: np.ndarray, gap: float) -> np.ndarray:
    """Label runs of eigenvalues whose consecutive spacing is below ``gap``."""
    if eigenvalues.size == 0:
        return np.empty(0, dtype=int)
    breaks = np.concatenate([[True], np.diff(eigenvalues) >= gap])
    return np.cumsum(breaks) - 1


def _orthonormality_defect(vecs: np.ndarray) -> float:
    if vecs.shape[1] == 0:
        return 0.0
    gram = vecs.T @ vecs
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


def _project_out(x: np.ndarray, basis: np.ndarray) -> np.ndarray:
    # classical Gram-Schmidt applied twice
    for _ in range(2):
        x = x - basis @ (basis.T @ x)
    return x


def _inverse_iteration(H: FiberHamiltonian, eigenvalues: np.ndarray, sweeps: int = 3) -> np.ndarray:
    """Eigenvectors for known eigenvalues by shifted tridiagonal solves.

    Each vector starts from the same deterministic vector and is refined by
    ``sweeps`` solves of ``(T - lambda) x = b`` (LAPACK ``gtsv``, partial
    pivoting). A vector is orthogonalised against the earlier members of its
    group (spacing below ``ORTHO_GROUP_GAP * scale``) after the last sweep,
    and after every sweep inside a degenerate cluster.
    """
    n = H.size
    d, e = H.diagonal, H.off_diagonal
    gtsv = lapack.get_lapack_funcs("gtsv", (d,))
    scale = H.spectral_scale
    start = 1.0 + 0.5 * np.sin(np.arange(1, n + 1) * 0.7853981 + 0.1)
    start /= np.linalg.norm(start)
    tiny = np.finfo(float).eps * scale
    group = _groups(eigenvalues, ORTHO_GROUP_GAP * scale)
    cluster = _groups(eigenvalues, CLUSTER_GAP * scale)
    vecs = np.empty((n, eigenvalues.size))
    g_start = c_start = 0
    for j, lam in enumerate(eigenvalues):
        if j > 0 and group[j] != group[j - 1]:
            g_start = j
        if j > 0 and cluster[j] != cluster[j - 1]:
            c_start = j
        x = start
        for sweep in range(sweeps):
            _, _, _, x, info = gtsv(e, d - lam, e, x)
            if info > 0:
                # exactly singular shift: nudge it off the eigenvalue
                _, _, _, x, info = gtsv(e, d - lam - tiny, e, x)
            if info != 0 or not np.all(np.isfinite(x)):
                raise LinAlgError(f"inverse iteration failed for eigenvalue {lam!r}")
            if c_start < j:
                x = _project_out(x / np.linalg.norm(x), vecs[:, c_start:j])
            if sweep == sweeps - 1 and g_start < j:
                x = _project_out(x / np.linalg.norm(x), vecs[:, g_start:j])
            norm = np.linalg.norm(x)
            if not norm > 0:
                raise LinAlgError(f"inverse iteration stagnated in a cluster at {lam!r}")
            x = x / norm
        vecs[:, j] = x
    return vecs


def eigendecompose(H: FiberHamiltonian, cutoff: float) -> SpectralDecomposition:
    """All eigenpairs of ``H`` with eigenvalue ``<= cutoff``.

    Bisection on Sturm sequences (LAPACK ``stebz``) locates the eigenvalues;
    inverse iteration gives the vectors, orthogonalised within groups of
    close eigenvalues. If inverse iteration stagnates the decomposition falls
    back to a dense solver. The returned count is checked against an
    independent Sturm-sequence count.
    """
    if not np.isfinite(cutoff):
        raise ValueError(f"cutoff must be finite, got {cutoff!r}")
    grid = H.grid
    lo, _ = H.gershgorin_bounds()
    n_full = grid.n_points
    if cutoff < lo:
        return SpectralDecomposition(grid, np.empty(0), np.empty((n_full, 0)), float(cutoff))

    w = eigvalsh_tridiagonal(
        H.diagonal, H.off_diagonal, select="v", select_range=(lo - 1.0, float(cutoff)),
        lapack_driver="stebz",
    )
    w = np.sort(w)
    try:
        v = _inverse_iteration(H, w)
    except LinAlgError as exc:
        if H.size > DENSE_FALLBACK_MAX:
            raise SpectralError(f"{exc}; matrix too large for the dense fallback") from exc
        log.warning("%s; falling back to a dense decomposition", exc)
        w, v = scipy.linalg.eigh(H.to_dense(), subset_by_index=(0, w.size - 1))

    expected = sturm_count(H.diagonal, H.off_diagonal, cutoff)
    if expected != w.size:
        # an eigenvalue sitting on the cutoff may be counted either way
        near = np.sum(np.abs(w - cutoff) <= 1e-12 * H.spectral_scale)
        if abs(expected - w.size) > near:
            raise SpectralError(
                f"eigenvalue count {w.size} disagrees with Sturm count {expected} at cutoff {cutoff}"
            )

    vecs = np.zeros((n_full, w.size))
    vecs[1:-1] = v / np.sqrt(grid.spacing)
    vecs.flags.writeable = False
    w.flags.writeable = False
    return SpectralDecomposition(grid, w, vecs, float(cutoff))
