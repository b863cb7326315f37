"""Point-set registration used to bring a swarm back into formation.

The registration energy between the current shape X and the target shape V
under a correspondence is

    E = sum_i ||x_i - f(v_i)||^2 + lam * J(f)

where J is the thin-plate bending integral. With ``lam = 0`` the warp drops
out and E is the summed squared displacement of the correspondence, so
registration reduces to a linear assignment problem, solved here by softassign
deterministic annealing and checked against an exact solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .core import Vec2, WorldState


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Assignment:
    slot_of: tuple[int, ...]
    cost: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "slot_of", tuple(int(s) for s in self.slot_of))
        if sorted(self.slot_of) != list(range(len(self.slot_of))):
            raise ValueError(f"slot_of is not a permutation: {self.slot_of}")

    @classmethod
    def identity(cls, n: int, cost: float = 0.0) -> "Assignment":
        return cls(tuple(range(n)), cost)


@dataclass(frozen=True)
class TpsParams:
    lam: float = 0.0

    def __post_init__(self) -> None:
        if not self.lam >= 0.0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")


@dataclass(frozen=True)
class AnnealSchedule:
    t0: Optional[float] = None  # None: largest squared point-to-slot distance
    decay: float = 0.93
    final_ratio: float = 1e-6
    max_iter: int = 200
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.t0 is not None and not self.t0 > 0.0:
            raise ValueError("t0 must be positive")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")
        if not 0.0 < self.final_ratio < 1.0:
            raise ValueError("final_ratio must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class CorrespondenceMatrix:
    entries: np.ndarray
    temperature: float
    iterations: int


def _as_points(shape, name: str) -> np.ndarray:
    pts = np.asarray(shape, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{name} must be an (n, 2) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} has non-finite points")
    return pts


def squared_distances(cshape, tshape) -> np.ndarray:
    c = _as_points(cshape, "CShape")
    t = _as_points(tshape, "TShape")
    diff = c[:, None, :] - t[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def assignment_cost(cshape, tshape, slot_of: Sequence[int]) -> float:
    c = _as_points(cshape, "CShape")
    t = _as_points(tshape, "TShape")
    d = c - t[list(slot_of)]
    return float(np.sum(d * d))


def tps_kernel(r: np.ndarray) -> np.ndarray:
    """r^2 log r with the removable singularity at 0 filled in."""
    out = np.zeros_like(r)
    nz = r > 0.0
    out[nz] = r[nz] ** 2 * np.log(r[nz])
    return out


def tps_fit(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interpolating thin-plate spline src -> dst: kernel weights (n, 2) and affine part (3, 2)."""
    n = len(src)
    r = np.sqrt(squared_distances(src, src))
    k = tps_kernel(r)
    p = np.hstack([np.ones((n, 1)), src])  # homogeneous (1, x, y) rows
    lhs = np.zeros((n + 3, n + 3))
    lhs[:n, :n] = k
    lhs[:n, n:] = p
    lhs[n:, :n] = p.T
    rhs = np.zeros((n + 3, 2))
    rhs[:n] = dst
    sol = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def tps_evaluate(src: np.ndarray, weights: np.ndarray, affine: np.ndarray, pts: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    r = np.sqrt(squared_distances(pts, src))
    return tps_kernel(r) @ weights + np.hstack([np.ones((len(pts), 1)), pts]) @ affine


def bending_energy(src, dst) -> float:
    """Bending integral of the interpolating spline, 8*pi * sum_c w_c^T K w_c."""
    src = _as_points(src, "source")
    dst = _as_points(dst, "target")
    if len(src) < 3:
        return 0.0
    w, _ = tps_fit(src, dst)
    k = tps_kernel(np.sqrt(squared_distances(src, src)))
    return float(8.0 * math.pi * np.einsum("ic,ij,jc->", w, k, w))


def tps_energy(x_shape, v_shape, correspondence: Assignment, params: TpsParams = TpsParams()) -> float:
    x = _as_points(x_shape, "X")
    v = _as_points(v_shape, "V")
    if len(x) != len(v) or len(x) != len(correspondence.slot_of):
        raise ValueError(f"size mismatch: |X|={len(x)}, |V|={len(v)}, "
                         f"assignment={len(correspondence.slot_of)}")
    if len(x) == 0:
        raise ValueError("point sets must be non-empty")
    matched = v[list(correspondence.slot_of)]
    data = float(np.sum((x - matched) ** 2))
    if params.lam == 0.0:
        return data
    return data + params.lam * bending_energy(matched, x)


def _scaling_residual(log_kernel, log_u, log_v):
    p = np.exp(log_kernel + log_u[:, None] + log_v[None, :])
    return p, np.concatenate([p.sum(axis=1) - 1.0, p.sum(axis=0) - 1.0])


def sinkhorn_log(log_kernel: np.ndarray, log_u: np.ndarray, log_v: np.ndarray,
                 max_iter: int, tol: float) -> tuple[np.ndarray, np.ndarray, int]:
    """Scale ``exp(log_kernel)`` to doubly stochastic; returns the log scalings and iterations used.

    Each iteration is a row/column normalization sweep. Plain sweeps crawl when
    the matrix is close to a permutation with a few competing entries, so from
    the second sweep on a damped Newton step on the scaling equations precedes
    every sweep.
    """
    n = log_kernel.shape[0]
    for it in range(1, max_iter + 1):
        if it > 1:
            log_u, log_v = _newton_step(log_kernel, log_u, log_v)
        log_u = -logsumexp(log_kernel + log_v[None, :], axis=1)
        log_v = -logsumexp(log_kernel + log_u[:, None], axis=0)
        p = np.exp(log_kernel + log_u[:, None] + log_v[None, :])
        # columns are exact after the v update; rows carry the residual
        if np.max(np.abs(p.sum(axis=1) - 1.0)) < tol:
            return log_u, log_v, it
    raise ConvergenceError(f"no convergence in {max_iter} iterations (n={n})")


def _newton_step(log_kernel, log_u, log_v):
    n = len(log_u)
    p, res = _scaling_residual(log_kernel, log_u, log_v)
    norm0 = float(np.max(np.abs(res)))
    jac = np.zeros((2 * n, 2 * n))
    jac[:n, :n] = np.diag(p.sum(axis=1))
    jac[:n, n:] = p
    jac[n:, :n] = p.T
    jac[n:, n:] = np.diag(p.sum(axis=0))
    step = np.linalg.lstsq(jac, -res, rcond=1e-13)[0]
    alpha = 1.0
    for _ in range(30):
        cand_u = log_u + alpha * step[:n]
        cand_v = log_v + alpha * step[n:]
        _, r = _scaling_residual(log_kernel, cand_u, cand_v)
        if np.all(np.isfinite(r)) and np.max(np.abs(r)) < norm0:
            return cand_u, cand_v
        alpha *= 0.5
    return log_u, log_v


def greedy_round(p: np.ndarray) -> tuple[int, ...]:
    """Permutation from repeatedly taking the largest remaining entry (ties: lowest row, column)."""
    n = p.shape[0]
    work = p.astype(float).copy()
    slot_of = [-1] * n
    for _ in range(n):
        flat = int(np.argmax(work))
        i, j = divmod(flat, n)
        slot_of[i] = j
        work[i, :] = -np.inf
        work[:, j] = -np.inf
    return tuple(slot_of)


def anneal(cshape, tshape, schedule: AnnealSchedule = AnnealSchedule(),
           record: bool = False) -> tuple[Assignment, list[CorrespondenceMatrix]]:
    """Softassign annealing; also returns the per-temperature matrices when ``record``."""
    cost = squared_distances(cshape, tshape)
    n, m = cost.shape
    if n != m:
        raise ValueError(f"shapes differ in size: {n} vs {m}")
    if n == 0:
        raise ValueError("point sets must be non-empty")
    t0 = schedule.t0 if schedule.t0 is not None else float(cost.max())
    if not t0 > 0.0:
        t0 = 1.0
    t_final = schedule.final_ratio * t0
    log_u, log_v = np.zeros(n), np.zeros(n)
    trace: list[CorrespondenceMatrix] = []
    temp = t0
    p = None
    while True:
        log_k = -cost / temp
        try:
            log_u, log_v, iters = sinkhorn_log(log_k, log_u, log_v, schedule.max_iter, schedule.tol)
        except ConvergenceError as exc:
            raise ConvergenceError(f"Sinkhorn failed at temperature {temp:.6g}: {exc}") from None
        p = np.exp(log_k + log_u[:, None] + log_v[None, :])
        if record:
            trace.append(CorrespondenceMatrix(p, temp, iters))
        if temp <= t_final:
            break
        # rescale the duals so the warm start matches the next temperature
        log_u = log_u * (1.0 / schedule.decay)
        log_v = log_v * (1.0 / schedule.decay)
        temp *= schedule.decay
    slot_of = greedy_round(p)
    return Assignment(slot_of, assignment_cost(cshape, tshape, slot_of)), trace


def anneal_assignment(cshape, tshape, schedule: AnnealSchedule = AnnealSchedule()) -> Assignment:
    return anneal(cshape, tshape, schedule)[0]


def exact_assignment(cost, method: str = "auto") -> Assignment:
    """Minimum-cost permutation of a square cost matrix.

    ``exhaustive`` is a subset DP (n <= 12) that breaks ties toward the
    lexicographically smallest permutation; ``hungarian`` delegates to scipy and
    works for any n. ``auto`` picks exhaustive when it is allowed.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {c.shape}")
    n = c.shape[0]
    if method == "auto":
        method = "exhaustive" if n <= 12 else "hungarian"
    if method == "hungarian":
        rows, cols = linear_sum_assignment(c)
        slot_of = tuple(int(j) for _, j in sorted(zip(rows, cols)))
        return Assignment(slot_of, float(c[np.arange(n), list(slot_of)].sum()))
    if method != "exhaustive":
        raise ValueError(f"unknown method {method!r}")
    if n > 12:
        raise ValueError("exhaustive mode supports n <= 12")
    return _subset_dp(c)


def _subset_dp(c: np.ndarray) -> Assignment:
    n = c.shape[0]
    full = (1 << n) - 1
    # best[mask]: cheapest way to fill rows popcount(mask).. with the columns outside mask
    best = [math.inf] * (1 << n)
    best[full] = 0.0
    for mask in range(full - 1, -1, -1):
        row = bin(mask).count("1")
        b = math.inf
        for j in range(n):
            if not mask >> j & 1:
                v = c[row, j] + best[mask | 1 << j]
                if v < b:
                    b = v
        best[mask] = b
    scale = max(1.0, abs(best[0]))
    slot_of, mask = [], 0
    for row in range(n):
        for j in range(n):
            if not mask >> j & 1 and c[row, j] + best[mask | 1 << j] <= best[mask] + 1e-12 * scale:
                slot_of.append(j)
                mask |= 1 << j
                break
    return Assignment(tuple(slot_of), float(sum(c[i, j] for i, j in enumerate(slot_of))))


def turn_back_step(world: WorldState, tshape, assignment: Assignment) -> list[Vec2]:
    """Straight-line targets: each agent heads for the slot it was assigned."""
    t = _as_points(tshape, "TShape")
    if len(assignment.slot_of) != len(world.agents):
        raise ValueError("assignment size does not match the swarm")
    return [Vec2(float(t[s, 0]), float(t[s, 1])) for s in assignment.slot_of]


def shapes_match(cshape, tshape, assignment: Assignment, tol: float) -> bool:
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    c = _as_points(cshape, "CShape")
    t = _as_points(tshape, "TShape")
    d = np.linalg.norm(c - t[list(assignment.slot_of)], axis=1)
    return bool(np.max(d) <= tol)
