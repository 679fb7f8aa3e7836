"""Dense real-matrix primitives.

Vectorization follows the column-stacking convention throughout, so that
``vec(a @ x @ b) == kron(b.T, a) @ vec(x)``.
"""

import numpy as np
import scipy.linalg

from .errors import CQLQGError, ShapeError

HURWITZ_MARGIN = 1e-9
TOL_PR = 1e-10

INTERLEAVED = "interleaved"
STACKED = "stacked"
LAYOUTS = (INTERLEAVED, STACKED)


def as_matrix(m, name="matrix"):
    """Convert ``m`` to a finite 2-D float array."""
    a = np.array(m, dtype=float, ndmin=2)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be two-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ShapeError(f"{name} contains non-finite entries")
    return a


def _require_square(m, name="matrix"):
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")


def vec(m):
    """Stack the columns of ``m`` into a vector."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, shape):
    """Inverse of :func:`vec` for a matrix of the given shape."""
    return np.asarray(v).reshape(shape, order="F")


def vech(m):
    """Half-vectorization: column-wise stacking of the lower triangle."""
    m = np.asarray(m)
    _require_square(m)
    n = m.shape[0]
    return np.concatenate([m[j:, j] for j in range(n)])


def unvech(v, n=None):
    """Rebuild the symmetric matrix whose half-vectorization is ``v``."""
    v = np.asarray(v)
    if n is None:
        n = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if v.size != n * (n + 1) // 2:
        raise ShapeError(f"vector of length {v.size} is not a half-vectorization of order {n}")
    m = np.zeros((n, n), dtype=v.dtype)
    k = 0
    for j in range(n):
        m[j:, j] = v[k:k + n - j]
        k += n - j
    return m + np.tril(m, -1).T


def duplication_matrix(n):
    """0/1 matrix ``L`` of shape n^2 x n(n+1)/2 with ``vec(M) = L @ vech(M)``."""
    if n < 1:
        raise ShapeError("duplication matrix order must be positive")
    dup = np.zeros((n * n, n * (n + 1) // 2))
    k = 0
    for j in range(n):
        for i in range(j, n):
            dup[i + j * n, k] = 1.0
            dup[j + i * n, k] = 1.0
            k += 1
    return dup


def commutation_matrix(m, n=None):
    """Permutation ``K`` with ``K @ vec(X) = vec(X.T)`` for X of shape (m, n)."""
    n = m if n is None else n
    k = np.zeros((m * n, m * n))
    for i in range(m):
        for j in range(n):
            # X[i, j] sits at i + j*m in vec(X) and at j + i*n in vec(X.T)
            k[j + i * n, i + j * m] = 1.0
    return k


def symmetrizer_matrix(n):
    """Matrix of the symmetrizer M -> (M + M^T)/2 acting on vec of n x n."""
    return (np.eye(n * n) + commutation_matrix(n)) / 2


def kron(a, b):
    return np.kron(a, b)


def symmetrize(m):
    m = np.asarray(m)
    _require_square(m, "symmetrize argument")
    return (m + m.T) / 2


def antisymmetrize(m):
    m = np.asarray(m)
    _require_square(m, "antisymmetrize argument")
    return (m - m.T) / 2


def frobenius_inner(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch in inner product: {x.shape} vs {y.shape}")
    return float(np.sum(x * y))


def canonical_J(order, layout=INTERLEAVED):
    """Canonical antisymmetric matrix of even order.

    ``interleaved`` puts copies of [[0, 1], [-1, 0]] on the diagonal;
    ``stacked`` gives [[0, I], [-I, 0]].
    """
    if order < 0 or order % 2:
        raise ShapeError(f"canonical matrix order must be even, got {order}")
    k = order // 2
    j2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    if layout == INTERLEAVED:
        return np.kron(np.eye(k), j2)
    if layout == STACKED:
        return np.kron(j2, np.eye(k))
    raise ValueError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")


def interleave_permutation(order):
    """Permutation matrix ``p`` with ``p @ J_stacked @ p.T == J_interleaved``."""
    k = order // 2
    p = np.zeros((order, order))
    for i in range(k):
        p[2 * i, i] = 1.0
        p[2 * i + 1, k + i] = 1.0
    return p


def spectral_abscissa(a):
    try:
        eigs = scipy.linalg.eigvals(a)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise CQLQGError(f"eigenvalue computation failed: {exc}") from exc
    if not np.all(np.isfinite(eigs)):
        raise CQLQGError("eigenvalue computation returned non-finite values")
    return float(np.max(eigs.real))


def is_hurwitz(a, margin=HURWITZ_MARGIN):
    """Return ``(stable, abscissa)`` where stable means max Re(eig) < -margin."""
    a = np.asarray(a, dtype=float)
    _require_square(a)
    if not np.all(np.isfinite(a)):
        return False, float("inf")
    abscissa = spectral_abscissa(a)
    return abscissa < -margin, abscissa


def is_symplectic(sigma, j0, tol=TOL_PR):
    sigma = np.asarray(sigma, dtype=float)
    j0 = np.asarray(j0, dtype=float)
    _require_square(sigma, "sigma")
    if sigma.shape != j0.shape:
        raise ShapeError(f"sigma {sigma.shape} and J0 {j0.shape} differ in shape")
    return bool(np.linalg.norm(sigma @ j0 @ sigma.T - j0) <= tol * (1 + np.linalg.norm(sigma) ** 2))


def random_symplectic(rng, j0, scale=0.5):
    """Draw a symplectic matrix as exp(J0 S) for a random symmetric S."""
    n = j0.shape[0]
    s = rng.standard_normal((n, n))
    s = scale * (s + s.T) / 2
    return scipy.linalg.expm(j0 @ s)


def williamson(m, j0):
    """Symplectic ``sigma`` with ``sigma m sigma^T`` diagonal, for m > 0.

    Returns ``(sigma, d)`` where d holds the symplectic eigenvalues, each
    repeated for the two coordinates of its mode.
    """
    m = symmetrize(as_matrix(m, "m"))
    j0 = as_matrix(j0, "J0")
    n = m.shape[0]
    if j0.shape != m.shape:
        raise ShapeError(f"m {m.shape} and J0 {j0.shape} differ in shape")
    w, v = np.linalg.eigh(m)
    if w[0] <= 0:
        raise ValueError("Williamson normal form needs a positive definite matrix")
    if np.allclose(j0, canonical_J(n, INTERLEAVED)):
        perm = np.eye(n)
    elif np.allclose(j0, canonical_J(n, STACKED)):
        perm = interleave_permutation(n)
    else:
        raise ValueError("J0 is not in a canonical layout")
    root_inv = perm @ (v / np.sqrt(w)) @ v.T @ perm.T
    anti = antisymmetrize(root_inv @ canonical_J(n) @ root_inv)
    t, o = scipy.linalg.schur(anti, output="real")
    omega = np.empty(n)
    for i in range(0, n, 2):
        if t[i, i + 1] < 0:
            # flip the orientation of this plane
            o[:, [i, i + 1]] = o[:, [i + 1, i]]
        omega[i] = omega[i + 1] = abs(t[i, i + 1])
    d = 1.0 / omega
    sigma = perm.T @ (np.sqrt(d)[:, None] * (o.T @ root_inv)) @ perm
    return sigma, perm.T @ d
