"""Biased multi-subset qubit-boson model on a truncated Fock x collective-spin space.

Basis ordering is ``|n> (x) |m_1> (x) ... (x) |m_2M>`` where halves ``2j-1`` and
``2j`` belong to subset ``j``.  Spin states are listed from ``m = +j`` down to
``m = -j``.  All operators are returned in units of the boson frequency, i.e.
the Hamiltonian is ``H/omega``::

    H/omega = a^+a + (1/(2N eta)) sum_j [ Jz_{2j-1} + Jz_{2j}
                                         + eps_j (Jx_{2j-1} - Jx_{2j})
                                         + h_j   (Jx_{2j-1} + Jx_{2j}) ]
              + g/(2N sqrt(eta)) sum_j (Jx_{2j-1} + Jx_{2j}) (a + a^+)

With this normalisation the semiclassical energy per qubit is exactly the
Landau functional of :mod:`multicrit.series` with ``z = 2 sqrt(eta) g <a>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np
import scipy.sparse as sp

HERMITIAN_TOL = 1e-12


class ModelError(ValueError):
    """Invalid model parameters or inconsistent Hilbert space."""


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters.

    ``n_fractions[j]`` is the fraction ``N_j/N`` of subset ``j``; each of its two
    halves holds ``N_j = n_j N`` qubits, so the model has ``2N`` qubits in total.
    """

    n_fractions: tuple[float, ...]
    g_tilde: float
    eps_tilde: tuple[float, ...]
    h_tilde: tuple[float, ...] | None = None
    eta: float = 1e-3
    N: int = 1
    omega: float = 1.0

    def __post_init__(self):
        n = tuple(float(x) for x in self.n_fractions)
        M = len(n)
        if M < 1:
            raise ModelError("need at least one subset")
        eps = tuple(float(x) for x in self.eps_tilde)
        h = tuple(0.0 for _ in n) if self.h_tilde is None else tuple(float(x) for x in self.h_tilde)
        if len(eps) != M or len(h) != M:
            raise ModelError(f"eps_tilde and h_tilde must have length M={M}")
        if any(x <= 0 for x in n):
            raise ModelError("all number fractions must be positive")
        if abs(sum(n) - 1.0) > 1e-12:
            raise ModelError(f"number fractions must sum to 1, got {sum(n)!r}")
        if self.g_tilde < 0:
            raise ModelError("g_tilde must be non-negative")
        if self.eta <= 0:
            raise ModelError("eta must be positive")
        if self.N < 1:
            raise ModelError("N must be >= 1")
        object.__setattr__(self, "n_fractions", n)
        object.__setattr__(self, "eps_tilde", eps)
        object.__setattr__(self, "h_tilde", h)
        object.__setattr__(self, "g_tilde", float(self.g_tilde))
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def M(self) -> int:
        return len(self.n_fractions)

    @property
    def symmetric(self) -> bool:
        """True when no symmetry-breaking bias is applied."""
        return not any(self.h_tilde)

    def half_sizes(self) -> tuple[int, ...]:
        """Qubit count ``N_j`` of each half, one entry per subset."""
        sizes = []
        for nj in self.n_fractions:
            x = nj * self.N
            k = int(round(x))
            if k < 1 or abs(x - k) > 1e-9:
                raise ModelError(f"N*n_j = {x} is not a positive integer")
            sizes.append(k)
        return tuple(sizes)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class HilbertSpace:
    n_max: int
    spin_dims: tuple[int, ...]
    total_dim: int = field(init=False)

    def __post_init__(self):
        if self.n_max < 1:
            raise ModelError("n_max must be >= 1")
        object.__setattr__(self, "spin_dims", tuple(int(d) for d in self.spin_dims))
        object.__setattr__(self, "total_dim", (self.n_max + 1) * int(np.prod(self.spin_dims)))

    @classmethod
    def for_params(cls, params: ModelParams, n_max: int) -> "HilbertSpace":
        dims = []
        for Nj in params.half_sizes():
            dims += [Nj + 1, Nj + 1]
        return cls(n_max, tuple(dims))

    @property
    def spin_dim(self) -> int:
        return int(np.prod(self.spin_dims))


def collective_spin_ops(half_size: int):
    """Spin-``N_j/2`` matrices ``(Jx, Jy, Jz)`` in the Dicke basis, as CSR matrices."""
    if half_size < 1:
        raise ModelError("collective spin needs at least one qubit")
    j = half_size / 2
    m = j - np.arange(half_size + 1)
    # <m+1|J+|m>, placed on the superdiagonal since m decreases with index
    jp_elems = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jp = sp.diags(jp_elems, 1, format="csr", dtype=complex)
    jm = jp.T.conj().tocsr()
    jx = ((jp + jm) / 2).tocsr()
    jy = ((jp - jm) / 2j).tocsr()
    jz = sp.diags(m, 0, format="csr", dtype=complex)
    return jx, jy, jz


def _kron_all(ops):
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), ops)


def _spin_embed(op, k, dims):
    ops = [sp.identity(d, dtype=complex, format="csr") for d in dims]
    ops[k] = op
    return _kron_all(ops)


def annihilation(n_max: int):
    return sp.diags(np.sqrt(np.arange(1, n_max + 1)), 1, format="csr", dtype=complex)


class ModelOperators:
    """Operator cache for one ``(params, space)`` pair.

    The Hamiltonian is affine in the coupling, ``H = H0 + g*H1``; both parts are
    kept so time-dependent ramps cost one sparse axpy per evaluation.
    """

    def __init__(self, params: ModelParams, space: HilbertSpace):
        if HilbertSpace.for_params(params, space.n_max).spin_dims != space.spin_dims:
            raise ModelError("Hilbert space does not match the model parameters")
        self.params = params
        self.space = space
        dims = space.spin_dims
        sizes = [d - 1 for d in dims]
        self._spin = [collective_spin_ops(s) for s in sizes]
        Is = sp.identity(space.spin_dim, dtype=complex, format="csr")
        If = sp.identity(space.n_max + 1, dtype=complex, format="csr")
        a = annihilation(space.n_max)
        self.a = sp.kron(a, Is, format="csr")
        self.adag = self.a.T.conj().tocsr()
        self.number = sp.kron(a.T.conj() @ a, Is, format="csr")

        jx = [_spin_embed(ops[0], k, dims) for k, ops in enumerate(self._spin)]
        jz = [_spin_embed(ops[2], k, dims) for k, ops in enumerate(self._spin)]
        jz_tot = sum(jz[1:], jz[0])
        jx_sym = sum(jx[1:], jx[0])

        p = params
        scale = 1.0 / (2 * p.N * p.eta)
        hs = jz_tot.copy()
        for j in range(p.M):
            x1, x2 = jx[2 * j], jx[2 * j + 1]
            hs = hs + p.eps_tilde[j] * (x1 - x2) + p.h_tilde[j] * (x1 + x2)
        self.spin_hamiltonian = (scale * hs).tocsr()
        self.jz_spin = jz_tot
        self.jx_spin = jx_sym

        self.jz = sp.kron(If, jz_tot, format="csr")
        self.H0 = (self.number + sp.kron(If, self.spin_hamiltonian)).tocsr()
        self.H1 = (sp.kron(a + a.T.conj(), jx_sym) / (2 * p.N * np.sqrt(p.eta))).tocsr()

    def hamiltonian(self, g_tilde: float | None = None):
        g = self.params.g_tilde if g_tilde is None else g_tilde
        return (self.H0 + g * self.H1).tocsr()

    def parity(self):
        """``exp(i pi [a^+a + sum_k (Jz_k + N_k/2)])`` as a diagonal +-1 matrix."""
        n = np.arange(self.space.n_max + 1)
        exc = np.zeros(1)
        for d in self.space.spin_dims:
            # index i of a spin block counts down from m=+j, so N_k/2 + m = N_k - i
            exc = np.add.outer(exc, (d - 1) - np.arange(d)).ravel()
        total = np.add.outer(n, exc).ravel()
        return sp.diags(np.where(total % 2 == 0, 1.0, -1.0).astype(complex), format="csr")

    def half_swap(self):
        """Permutation exchanging the two halves of every subset."""
        dims = self.space.spin_dims
        idx = np.arange(self.space.spin_dim).reshape(dims)
        axes = []
        for j in range(len(dims) // 2):
            axes += [2 * j + 1, 2 * j]
        perm = idx.transpose(axes).ravel()
        swap = sp.identity(self.space.spin_dim, dtype=complex, format="csr")[perm]
        return sp.kron(sp.identity(self.space.n_max + 1, format="csr"), swap, format="csr")

    def symmetry(self):
        """Z2 generator of the biased model at zero symmetry-breaking field.

        Parity alone commutes with ``H`` only at zero bias; staggered biases
        additionally require exchanging the halves.
        """
        return (self.parity() @ self.half_swap()).tocsr()


def build_hamiltonian(params: ModelParams, space: HilbertSpace, g_tilde_override=None):
    """Sparse ``H/omega`` for the given parameters."""
    return ModelOperators(params, space).hamiltonian(g_tilde_override)


def hermiticity_residual(H) -> float:
    H = sp.csr_matrix(H)
    norm = sp.linalg.norm(H)
    if norm == 0:
        return 0.0
    return sp.linalg.norm(H - H.T.conj()) / norm


def ground_state_at_zero_coupling(params: ModelParams, space: HilbertSpace) -> np.ndarray:
    """Photon vacuum times the local ground state of every spin half.

    Each half ``2j-1`` (``2j``) feels ``Jz + (h_j +- eps_j) Jx`` in units of Omega.
    """
    vecs = []
    for j, Nj in enumerate(params.half_sizes()):
        jx, _, jz = collective_spin_ops(Nj)
        for sign in (+1, -1):
            field_x = params.h_tilde[j] + sign * params.eps_tilde[j]
            w, v = np.linalg.eigh((jz + field_x * jx).toarray())
            vecs.append(v[:, 0])
    vac = np.zeros(space.n_max + 1, dtype=complex)
    vac[0] = 1.0
    psi = reduce(np.kron, vecs, vac)
    return psi / np.linalg.norm(psi)
