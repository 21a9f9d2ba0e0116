"""Parity-blocked diagonalization, doublet pairing and truncation control."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .hilbert import BasisSpec, HermitianOperator
from .model import ModelParams, build_hamiltonian, critical_values, parity_operator
from .precision import Precision, qzeros, quad_context, refine_eigenpairs, to_double

log = logging.getLogger(__name__)

# fraction of columns whose residual is checked after each sector solve
_RESIDUAL_SAMPLES = 48
RESIDUAL_TOL = 1e-10


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ParitySector:
    parity: int
    indices: np.ndarray  # product-basis states in this sector
    energies: np.ndarray
    vectors: np.ndarray  # columns in sector coordinates
    positions: np.ndarray  # global (sorted) index of each column


@dataclass(frozen=True)
class DoubletRecord:
    n: int
    index_plus: int
    index_minus: int
    energy_plus: float
    energy_minus: float
    gap: float
    reduced_energy: float


@dataclass(frozen=True)
class DoubletPairing:
    doublets: list
    unpaired: int


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Energy-sorted eigensystem of a parity-symmetric Hamiltonian.

    Eigenvectors live per parity sector (``sectors``); use :meth:`vectors`
    for product-basis columns.  ``energy_unit`` converts to reduced energy.
    """

    energies: np.ndarray
    parity_labels: np.ndarray
    sectors: tuple
    sector_of: np.ndarray
    basis: BasisSpec
    energy_unit: float
    degeneracy_tol: float
    residual: float
    precision: Precision = Precision.DOUBLE
    params: ModelParams | None = None
    hamiltonian: HermitianOperator | None = field(default=None, repr=False)
    _refined: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return len(self.energies)

    @property
    def reduced(self) -> np.ndarray:
        return self.energies / self.energy_unit

    @property
    def spectral_norm(self) -> float:
        return float(np.abs(self.energies).max())

    @property
    def column_of(self) -> np.ndarray:
        col = np.empty(self.size, dtype=np.intp)
        for s in self.sectors:
            col[s.positions] = np.arange(len(s.positions))
        return col

    @property
    def eigenvectors(self) -> np.ndarray:
        """All eigenvectors as dense product-basis columns (memory heavy)."""
        return self.vectors(np.arange(self.size))

    def vectors(self, idx: Sequence[int]) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.intp))
        out = np.zeros((self.basis.product_dim, len(idx)))
        col = self.column_of
        for s_id, sec in enumerate(self.sectors):
            sel = np.nonzero(self.sector_of[idx] == s_id)[0]
            if len(sel):
                out[np.ix_(sec.indices, sel)] = sec.vectors[:, col[idx[sel]]]
        return out

    def to_eigenbasis(self, psi: np.ndarray) -> np.ndarray:
        """Coefficients ``<E_k|psi>`` for every level, in sorted order."""
        psi = np.asarray(psi)
        dtype = np.result_type(psi.dtype, float)
        out = np.zeros(self.size, dtype=dtype)
        for sec in self.sectors:
            out[sec.positions] = sec.vectors.T @ psi[sec.indices]
        return out

    def from_eigenbasis(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs)
        out = np.zeros(self.basis.product_dim, dtype=np.result_type(coeffs.dtype, float))
        for sec in self.sectors:
            out[sec.indices] = sec.vectors @ coeffs[sec.positions]
        return out

    def matrix_elements(self, op: HermitianOperator, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        """``<E_a| O |E_b>`` for ``a`` in rows, ``b`` in cols."""
        va = self.vectors(rows)
        vb = va if np.array_equal(rows, cols) else self.vectors(cols)
        return va.T @ op.apply(vb)

    def block_ids(self) -> np.ndarray:
        """Degenerate-block label of every level."""
        gaps = np.diff(self.energies)
        return np.concatenate([[0], np.cumsum(gaps >= self.degeneracy_tol)])

    @property
    def degenerate_blocks(self) -> list[tuple[int, int]]:
        ids = self.block_ids()
        edges = np.nonzero(np.diff(ids))[0] + 1
        starts = np.concatenate([[0], edges])
        stops = np.concatenate([edges, [self.size]])
        return list(zip(starts.tolist(), stops.tolist()))

    def refined(self, idx: Sequence[int]):
        """Quad-precision ``(energies, product-basis vectors)`` for the given levels."""
        if self.hamiltonian is None or not self.hamiltonian.is_quad:
            raise SpectralError("quad refinement needs a decomposition built in the quad tier")
        idx = [int(i) for i in np.atleast_1d(idx)]
        todo = [i for i in idx if i not in self._refined]
        col = self.column_of
        dim = self.basis.product_dim
        by_sector: dict[int, list[int]] = {}
        for i in todo:
            by_sector.setdefault(int(self.sector_of[i]), []).append(i)
        for s_id, items in by_sector.items():
            sec = self.sectors[s_id]

            def matvec(x, sec=sec):
                full = qzeros(dim)
                full[sec.indices] = x
                return self.hamiltonian.apply(full)[sec.indices]

            vals, vecs = refine_eigenpairs(
                matvec, sec.energies, sec.vectors, [col[i] for i in items]
            )
            for i, e, v in zip(items, vals, vecs):
                full = qzeros(dim)
                full[sec.indices] = v
                self._refined[i] = (e, full)
        energies = [self._refined[i][0] for i in idx]
        vecs = np.stack([self._refined[i][1] for i in idx], axis=1)
        return energies, vecs


def _factor_parity(a: np.ndarray, p: np.ndarray) -> int:
    """+1 if ``P A P = A``, -1 if ``P A P = -A`` (P = diag(p)), 0 otherwise."""
    a = to_double(a) if a.dtype == object else a
    flipped = a * np.outer(p, p)
    if np.array_equal(flipped, a):
        return 1
    if np.array_equal(flipped, -a):
        return -1
    return 0


def _check_commutes(h: HermitianOperator, pi: HermitianOperator) -> np.ndarray:
    """Validate [H, Pi] = 0 and return the parity label of every product state."""
    if len(pi.terms) != 1:
        raise SpectralError("parity operator must be a single Kronecker term")
    coef, pa, pb = pi.terms[0]
    pa, pb = to_double(pa), to_double(pb)
    if np.count_nonzero(pa - np.diag(np.diagonal(pa))) or np.count_nonzero(pb - np.diag(np.diagonal(pb))):
        raise SpectralError("parity operator must be diagonal in the product basis")
    da, db = float(coef) * np.diagonal(pa), np.diagonal(pb)
    labels = np.kron(da, db)
    if not np.all(np.abs(np.abs(labels) - 1) == 0):
        raise SpectralError("parity operator must have eigenvalues +-1")
    scale = 0.0
    for c, a, b in h.terms:
        sign = _factor_parity(a, np.sign(da)) * _factor_parity(b, db)
        if sign == 1:
            continue
        # term not manifestly even: measure its odd part directly
        plus = np.nonzero(labels > 0)[0]
        minus = np.nonzero(labels < 0)[0]
        odd = HermitianOperator(((c, a, b),), h.basis).block(plus, minus)
        odd = to_double(odd) if odd.dtype == object else odd
        scale = max(scale, float(np.abs(odd).max()) if odd.size else 0.0)
    hmax = max(abs(float(np.real(c))) * np.abs(to_double(a)).max() * np.abs(to_double(b)).max() for c, a, b in h.terms)
    if scale > 1e-12 * hmax:
        raise SpectralError(f"Hamiltonian does not commute with parity (odd part {scale:.3e})")
    return labels.astype(int)


def _bandwidth(block: np.ndarray) -> int:
    rows, cols = np.nonzero(block)
    return int(np.abs(rows - cols).max()) if len(rows) else 0


def _solve_sector(block: np.ndarray):
    n = block.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0)), 0.0
    if _bandwidth(block) <= 1:
        d = np.diagonal(block).copy()
        e = np.diagonal(block, 1).copy()
        w, v = sla.eigh_tridiagonal(d, e)
        hv_cols = None
    else:
        w, v = sla.eigh(block, check_finite=False)
        hv_cols = block
    # gauge: largest-magnitude component positive
    big = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[big, np.arange(n)])
    signs[signs == 0] = 1
    v *= signs
    step = max(1, n // _RESIDUAL_SAMPLES)
    cols = np.arange(0, n, step)
    if hv_cols is None:
        hv = block @ v[:, cols]
    else:
        hv = hv_cols @ v[:, cols]
    res = np.linalg.norm(hv - v[:, cols] * w[cols], axis=0).max()
    return w, v, float(res)


def diagonalize(
    h: HermitianOperator,
    pi: HermitianOperator,
    energy_unit: float = 1.0,
    params: ModelParams | None = None,
    workers: int = 1,
) -> SpectralDecomposition:
    """Solve ``H`` sector by sector in the eigenbasis of the parity ``pi``.

    Each sector block is real symmetric; tridiagonal blocks (the Rabi model)
    go to the tridiagonal solver, all others to the dense one.  A quad-tier
    ``h`` is solved in double here and refined lazily through
    :meth:`SpectralDecomposition.refined`.
    """
    if not h.is_real:
        raise SpectralError("the parity-blocked solver expects a real symmetric Hamiltonian")
    labels = _check_commutes(h, pi)
    sector_idx = [np.nonzero(labels == p)[0] for p in (1, -1)]

    def work(idx):
        block = h.block(idx, idx)
        if block.dtype == object:
            block = to_double(block)
        return _solve_sector(np.ascontiguousarray(block, dtype=float))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            results = list(pool.map(work, sector_idx))
    else:
        results = [work(idx) for idx in sector_idx]

    energies = np.concatenate([r[0] for r in results])
    sector_of = np.concatenate([np.full(len(r[0]), s, dtype=np.intp) for s, r in enumerate(results)])
    order = np.argsort(energies, kind="stable")
    energies = energies[order]
    sector_of = sector_of[order]
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    sectors = []
    offset = 0
    for s, (idx, (w, v, _)) in enumerate(zip(sector_idx, results)):
        sectors.append(ParitySector((1, -1)[s], idx, w, v, rank[offset : offset + len(w)]))
        offset += len(w)
    hnorm = float(np.abs(energies).max()) if len(energies) else 1.0
    residual = max(r[2] for r in results)
    if residual > RESIDUAL_TOL * max(hnorm, 1.0):
        raise SpectralError(f"eigensolver residual {residual:.3e} exceeds tolerance")
    tol = max(1e-10 * energy_unit, 100 * residual)
    labels_sorted = np.where(sector_of == 0, 1, -1)
    precision = Precision.QUAD if h.is_quad else Precision.DOUBLE
    return SpectralDecomposition(
        energies, labels_sorted, tuple(sectors), sector_of, h.basis, float(energy_unit),
        float(tol), residual, precision, params, h if h.is_quad else None,
    )


def pair_doublets(spec: SpectralDecomposition, lo: float = -np.inf, hi: float = np.inf) -> DoubletPairing:
    """Greedy nearest-in-energy pairing of opposite-parity levels.

    ``lo``/``hi`` bound the reduced energy.  Positive-parity levels are
    walked in ascending order and matched to the nearest still-unpaired
    negative-parity level inside the window.
    """
    red = spec.reduced
    inside = np.nonzero((red >= lo) & (red <= hi))[0]
    plus = inside[spec.parity_labels[inside] > 0]
    minus = inside[spec.parity_labels[inside] < 0]
    e_minus = spec.energies[minus]
    taken = np.zeros(len(minus), dtype=bool)
    records = []
    for k in plus:
        e = spec.energies[k]
        pos = int(np.searchsorted(e_minus, e))
        left, right = pos - 1, pos
        while left >= 0 and taken[left]:
            left -= 1
        while right < len(minus) and taken[right]:
            right += 1
        best = None
        if left >= 0:
            best = left
        if right < len(minus) and (best is None or e_minus[right] - e < e - e_minus[best]):
            best = right
        if best is None:
            continue
        taken[best] = True
        m = minus[best]
        records.append((k, m))
    records.sort(key=lambda km: min(km))
    out = []
    for n, (k, m) in enumerate(records):
        ep, em = float(spec.energies[k]), float(spec.energies[m])
        out.append(DoubletRecord(n, int(k), int(m), ep, em, abs(ep - em), 0.5 * (ep + em) / spec.energy_unit))
    unpaired = len(inside) - 2 * len(out)
    return DoubletPairing(out, unpaired)


def _nearest_opposite(spec: SpectralDecomposition, k: int) -> int:
    opp = np.nonzero(spec.parity_labels != spec.parity_labels[k])[0]
    e = spec.energies[opp]
    pos = int(np.searchsorted(e, spec.energies[k]))
    cands = [c for c in (pos - 1, pos) if 0 <= c < len(opp)]
    if not cands:
        raise SpectralError("no opposite-parity level available")
    best = min(cands, key=lambda c: abs(e[c] - spec.energies[k]))
    return int(opp[best])


def is_broken_phase(spec: SpectralDecomposition, reduced: float) -> bool:
    """True below the excited-state critical line of a superradiant Hamiltonian."""
    if spec.params is not None:
        if spec.params.lam <= critical_values(spec.params).lambda_c:
            return False
    return reduced < -1.0


def eigenspace_window(
    spec: SpectralDecomposition, target: float, count: int, broken: bool | None = None
) -> list[tuple[int, int]]:
    """``count`` eigenspaces closest to a reduced energy, as (plus, minus) index pairs.

    Below the critical line these are the doublets; above it, ``count``
    consecutive levels each paired with its nearest opposite-parity level.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if broken is None:
        broken = is_broken_phase(spec, target)
    if broken:
        pairs = pair_doublets(spec).doublets
        if count > len(pairs):
            raise SpectralError(f"requested {count} doublets, spectrum has {len(pairs)}")
        centers = np.array([d.reduced_energy for d in pairs])
        i = int(np.argmin(np.abs(centers - target)))
        start = i - (count - 1) // 2
        if start < 0 or start + count > len(pairs):
            raise SpectralError("eigenspace window extends past the spectrum edge")
        return [(d.index_plus, d.index_minus) for d in pairs[start : start + count]]
    if count > spec.size:
        raise SpectralError(f"requested {count} levels, spectrum has {spec.size}")
    i = int(np.argmin(np.abs(spec.reduced - target)))
    start = i - (count - 1) // 2
    if start < 0 or start + count > spec.size:
        raise SpectralError("eigenspace window extends past the spectrum edge")
    out = []
    for k in range(start, start + count):
        m = _nearest_opposite(spec, k)
        out.append((k, m) if spec.parity_labels[k] > 0 else (m, k))
    return out


# -- truncation control -------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    n_max: int | None
    rtol: float
    history: list  # (n_max, max relative change vs next cutoff or None)
    message: str = ""


def lowest_levels(count: int) -> Callable[[SpectralDecomposition], np.ndarray]:
    def tracked(spec):
        if spec.size < count:
            return None
        return spec.energies[:count].copy()

    tracked.__name__ = f"lowest_{count}_levels"
    return tracked


def levels_below(reduced: float) -> Callable[[SpectralDecomposition], np.ndarray]:
    """Every level under a reduced energy; the count is fixed by the first cutoff."""
    state = {}

    def tracked(spec):
        vals = spec.energies[spec.reduced < reduced]
        if "count" not in state:
            state["count"] = len(vals)
        if len(vals) < state["count"]:
            return None
        return vals[: state["count"]].copy()

    tracked.__name__ = f"levels_below_{reduced}"
    return tracked


def convergence_check(
    params: ModelParams,
    schedule: Sequence[int],
    tracked: Callable[[SpectralDecomposition], np.ndarray] | None = None,
    rtol: float = 1e-8,
    floor: float = 0.0,
    solver: Callable[[ModelParams], SpectralDecomposition] | None = None,
) -> ConvergenceReport:
    """Smallest cutoff in ``schedule`` whose tracked scalars agree with the next cutoff.

    The change of each scalar is ``|a - b| / max(|b|, floor)``; convergence
    at cutoff ``n`` requires every change to ``n``'s successor to be below
    ``rtol``.  Exhausting the schedule yields ``converged=False``.
    """
    schedule = list(schedule)
    if len(schedule) < 2:
        raise ValueError("convergence needs at least two cutoffs")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("cutoff schedule must be strictly increasing")
    for n in schedule:
        BasisSpec(n, params.j)
    tracked = tracked or lowest_levels(20)
    solver = solver or solve
    prev = None
    history = []
    for n in schedule:
        spec = solver(params.replace(n_max=n))
        vals = tracked(spec)
        if vals is not None:
            vals = np.asarray(vals, dtype=float)
        if prev is not None and prev[1] is not None and vals is not None and len(vals) == len(prev[1]):
            denom = np.maximum(np.abs(vals), floor)
            with np.errstate(divide="ignore", invalid="ignore"):
                rel = np.where(denom > 0, np.abs(prev[1] - vals) / denom, np.abs(prev[1] - vals) * np.inf)
            rel = np.nan_to_num(rel, nan=0.0, posinf=np.inf)
            change = float(rel.max()) if rel.size else 0.0
            history.append((prev[0], change))
            if change < rtol:
                return ConvergenceReport(True, prev[0], rtol, history, f"converged at n_max={prev[0]}")
        elif prev is not None:
            history.append((prev[0], None))
        prev = (n, vals)
    history.append((prev[0], None))
    return ConvergenceReport(
        False, None, rtol, history,
        f"no cutoff in {schedule} reached relative change < {rtol:g}",
    )


# -- cached solves ------------------------------------------------------------

_MAGIC = b"ESQSPEC1"


def cache_key(params: ModelParams) -> str:
    payload = json.dumps(params.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:24]


def save_decomposition(spec: SpectralDecomposition, path: str | os.PathLike) -> None:
    """Binary layout: magic, header length, JSON header, then eigenvalues,
    parity labels and, sector by sector, state indices, sector energies and
    column-major eigenvectors."""
    header = {
        "params": spec.params.to_dict() if spec.params else None,
        "n_max": spec.basis.n_max,
        "spin_j": spec.basis.spin_j,
        "size": spec.size,
        "precision": spec.precision.value,
        "energy_unit": spec.energy_unit,
        "degeneracy_tol": spec.degeneracy_tol,
        "residual": spec.residual,
        "sectors": [{"parity": s.parity, "size": len(s.energies)} for s in spec.sectors],
    }
    raw = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(np.uint64(len(raw)).tobytes())
            fh.write(raw)
            fh.write(np.ascontiguousarray(spec.energies, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(spec.parity_labels, dtype="<i8").tobytes())
            for s in spec.sectors:
                fh.write(np.ascontiguousarray(s.indices, dtype="<i8").tobytes())
                fh.write(np.ascontiguousarray(s.energies, dtype="<f8").tobytes())
                fh.write(np.asarray(s.vectors, dtype="<f8").tobytes(order="F"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_decomposition(path: str | os.PathLike) -> SpectralDecomposition:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise SpectralError(f"{path} is not a cached decomposition")
        hlen = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        header = json.loads(fh.read(hlen))
        size = header["size"]
        energies = np.frombuffer(fh.read(8 * size), dtype="<f8").copy()
        labels = np.frombuffer(fh.read(8 * size), dtype="<i8").astype(int)
        raw_sectors = []
        for s in header["sectors"]:
            n = s["size"]
            idx = np.frombuffer(fh.read(8 * n), dtype="<i8").astype(np.intp)
            w = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
            v = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape((n, n), order="F").copy()
            raw_sectors.append((s["parity"], idx, w, v))
    params = ModelParams(**header["params"]) if header["params"] else None
    sector_of = np.where(labels > 0, 0, 1).astype(np.intp)
    sectors = []
    for s_id, (p, idx, w, v) in enumerate(raw_sectors):
        sectors.append(ParitySector(p, idx, w, v, np.nonzero(sector_of == s_id)[0]))
    precision = Precision.parse(header["precision"])
    h = build_hamiltonian(params) if (params is not None and precision is Precision.QUAD) else None
    return SpectralDecomposition(
        energies, labels, tuple(sectors), sector_of, BasisSpec(header["n_max"], header["spin_j"]),
        header["energy_unit"], header["degeneracy_tol"], header["residual"], precision, params, h,
    )


def solve(params: ModelParams, cache_dir: str | os.PathLike | None = None, workers: int = 1) -> SpectralDecomposition:
    """Diagonalize the model Hamiltonian, reusing an on-disk cache when given."""
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"spec-{cache_key(params)}.bin"
        if path.exists():
            log.debug("cache hit %s", path)
            return load_decomposition(path)
    spec = diagonalize(build_hamiltonian(params), parity_operator(params), params.energy_unit, params, workers)
    if path is not None:
        save_decomposition(spec, path)
    return spec
