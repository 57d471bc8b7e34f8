"""Symmetric indefinite factorization of KKT matrices and bordered solves.

:class:`KktFactorization` wraps LAPACK's Bunch-Kaufman ``LDL'`` (through
:func:`scipy.linalg.ldl`), so 2x2 pivots handle the zero block of a saddle
matrix.  :func:`solve_augmented` solves a system bordered by a few extra rows
and columns while reusing that factorization, via the block elimination

    [H  V] [x1]   [b1]        w1 = H^-1 b1,   Y = H^-1 V,   C = S - X Y,
    [X  S] [x2] = [b2]        C x2 = b2 - X w1,   x1 = w1 - Y x2.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as la

from .errors import BorderSingular, DimensionMismatch, NumericallySingular, StructurallySingular

SINGULAR_RTOL = 1e-12


class KktFactorization:
    """``A = L D L'`` with symmetric row/column permutation ``perm``.

    ``L[perm]`` is unit lower triangular and ``D`` is block diagonal with 1x1
    and 2x2 blocks.  The class attribute ``count`` counts factorizations made
    in this process; tests use it to check that bordered solves never
    refactor the base matrix.
    """

    count = 0

    def __init__(self, A):
        A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch("matrix must be square")
        self.n = A.shape[0]
        self.scale = float(np.abs(A).max(initial=0.0))
        if self.n and not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(self.scale, 1.0)):
            raise ValueError("matrix is not symmetric")
        if self.n and np.any(~A.any(axis=1)):
            raise StructurallySingular("matrix has an all-zero row")
        lu, d, perm = la.ldl(A, lower=True, hermitian=False)
        KktFactorization.count += 1
        self.L = lu
        self.D = d
        self.perm = perm
        self._Lp = lu[perm]
        self._blocks = self._block_structure(d)
        eig = np.concatenate([np.linalg.eigvalsh(d[s][:, s]) for s in self._blocks]) if self.n else np.zeros(0)
        tol = SINGULAR_RTOL * max(self.scale, 1.0)
        self.inertia = (int(np.sum(eig > tol)), int(np.sum(eig < -tol)), int(np.sum(np.abs(eig) <= tol)))
        if self.inertia[2]:
            raise NumericallySingular(f"{self.inertia[2]} pivot(s) below {tol:.1e}")
        # banded copy of D for the block-diagonal solve
        ab = np.zeros((3, self.n))
        ab[1] = np.diag(d)
        if self.n > 1:
            ab[0, 1:] = np.diag(d, 1)
            ab[2, :-1] = np.diag(d, -1)
        self._Dband = ab

    @staticmethod
    def _block_structure(d):
        n = d.shape[0]
        blocks = []
        i = 0
        while i < n:
            if i + 1 < n and d[i + 1, i] != 0.0:
                blocks.append(slice(i, i + 2))
                i += 2
            else:
                blocks.append(slice(i, i + 1))
                i += 1
        return blocks

    def reconstruct(self):
        return self.L @ self.D @ self.L.T

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise DimensionMismatch(f"right-hand side has {b.shape[0]} rows, expected {self.n}")
        if self.n == 0:
            return b.copy()
        y = la.solve_triangular(self._Lp, b[self.perm], lower=True, unit_diagonal=True)
        z = la.solve_banded((1, 1), self._Dband, y)
        xp = la.solve_triangular(self._Lp.T, z, lower=False, unit_diagonal=True)
        x = np.empty_like(xp)
        x[self.perm] = xp
        return x


def factorize(A):
    return KktFactorization(A)


def solve(f, b):
    return f.solve(b)


class AugmentedSystem:
    """Base factorization bordered by ``V`` (columns), ``X`` (rows) and ``S``.

    ``keys`` optionally names each border column; columns of ``Y = H^-1 V``
    are then looked up in (and added to) the shared ``cache`` dict, so a tweak
    session that adds one border column at a time solves with the base
    factorization once per new column.
    """

    def __init__(self, base, V, X, S, keys=None, cache=None):
        self.base = base
        n = base.n
        self.V = np.asarray(V, dtype=float).reshape(n, -1)
        w = self.V.shape[1]
        self.X = np.asarray(X, dtype=float).reshape(w, n)
        self.S = np.asarray(S, dtype=float).reshape(w, w)
        self.keys = list(keys) if keys is not None else None
        if self.keys is not None and len(self.keys) != w:
            raise DimensionMismatch("one key per border column is required")
        self.cache = {} if cache is None else cache
        self._Y = None
        self._C = None

    @property
    def width(self):
        return self.V.shape[1]

    @property
    def Y(self):
        if self._Y is None:
            cols = []
            for j in range(self.width):
                key = self.keys[j] if self.keys is not None else None
                if key is not None and key in self.cache:
                    cols.append(self.cache[key])
                    continue
                col = self.base.solve(self.V[:, j])
                if key is not None:
                    self.cache[key] = col
                cols.append(col)
            self._Y = np.column_stack(cols) if cols else np.zeros((self.base.n, 0))
        return self._Y

    @property
    def C(self):
        if self._C is None:
            self._C = self.S - self.X @ self.Y
        return self._C


def solve_augmented(aug, b1, b2):
    """Solve the bordered system reusing ``aug.base``; raises :class:`BorderSingular`."""
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float).reshape(-1)
    if b2.shape[0] != aug.width:
        raise DimensionMismatch("b2 length must equal the border width")
    w1 = aug.base.solve(b1)
    if aug.width == 0:
        return w1, np.zeros(0)
    C = aug.C
    scale = max(1.0, np.abs(C).max(initial=0.0), np.abs(aug.S).max(initial=0.0))
    try:
        with warnings.catch_warnings():
            # an exactly singular C is reported below as BorderSingular
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu, piv = la.lu_factor(C, check_finite=True)
    except (ValueError, la.LinAlgError):
        raise BorderSingular("border Schur complement is not finite") from None
    if np.abs(np.diag(lu)).min() <= 1e-11 * scale:
        raise BorderSingular("border Schur complement is singular")
    x2 = la.lu_solve((lu, piv), b2 - aug.X @ w1)
    x1 = w1 - aug.Y @ x2
    return x1, x2
