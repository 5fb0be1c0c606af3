"""Bounded functions on finite spaces and graph limits along converging spaces.

A function sequence {f_n} converges to f (written LIM f_n = f) when the norms
stay bounded and f_n(x_n) -> f(x) along every tracked convergent sequence
x_n in K_n^q, for every compact level q.  Tracked sequences are the
nearest-point liftings of the limit points plus anything the caller
registers; tolerances apply from the burn-in index on.

The one-sided envelopes LIMSUP and LIMINF replace the limit along each
tracked sequence by the tail maximum or minimum; the sandwich lemma
(LIMSUP f_n <= f <= LIMINF f_n implies LIM f_n = f) is provided as an
executable verdict.  Closedness of the space of convergent pairs
<f, {f_n}> under the norm max(||f||, sup_n ||f_n||) is checked at 3x the
tolerance, which is what the triangle inequality gives.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import PreconditionError
from .spaces import FiniteSpace, SpaceSequence, TrackedSequence

__all__ = [
    "Fn",
    "ExtFn",
    "FnSequence",
    "ConvergenceVerdict",
    "EquiContinuityFit",
    "check_LIM",
    "compute_LIMSUP",
    "compute_LIMINF",
    "sandwich_to_LIM",
    "lift_to_members",
    "check_strict_continuity_estimate",
    "check_P_closedness",
    "pair_norm",
]


@dataclass(frozen=True)
class Fn:
    """A bounded real function on a finite space (finite values only)."""

    space: FiniteSpace
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape[0] != self.space.size:
            raise ValueError("values must match the space size")
        if not np.all(np.isfinite(v)):
            raise ValueError("Fn values must be finite; use ExtFn for extended values")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def norm(self) -> float:
        return float(np.abs(self.values).max())

    def __add__(self, other):
        if isinstance(other, Fn):
            self._check_same_space(other)
            return Fn(self.space, self.values + other.values)
        return Fn(self.space, self.values + float(other))

    def __sub__(self, other):
        if isinstance(other, Fn):
            self._check_same_space(other)
            return Fn(self.space, self.values - other.values)
        return Fn(self.space, self.values - float(other))

    def __rmul__(self, c: float) -> "Fn":
        return Fn(self.space, float(c) * self.values)

    def truncate_above(self, c: float) -> "Fn":
        return Fn(self.space, np.minimum(self.values, float(c)))

    def truncate_below(self, c: float) -> "Fn":
        return Fn(self.space, np.maximum(self.values, float(c)))

    def as_ext(self) -> "ExtFn":
        return ExtFn(self.space, self.values)

    def _check_same_space(self, other: "Fn") -> None:
        if other.space is not self.space and other.space != self.space:
            raise ValueError("operands live on different spaces")


@dataclass(frozen=True)
class ExtFn:
    """An extended-real function; +inf and -inf are allowed, NaN is not."""

    space: FiniteSpace
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape[0] != self.space.size:
            raise ValueError("values must match the space size")
        if np.any(np.isnan(v)):
            raise ValueError("ExtFn values must not be NaN")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def bounded_above(self) -> bool:
        return bool(self.values.max() < np.inf)

    @property
    def bounded_below(self) -> bool:
        return bool(self.values.min() > -np.inf)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def as_fn(self) -> Fn:
        if not self.finite:
            raise ValueError("extended function has infinite values")
        return Fn(self.space, self.values)


@dataclass(frozen=True)
class FnSequence:
    """One member function per member space of a converging space sequence."""

    spaces: SpaceSequence
    members: tuple

    def __post_init__(self) -> None:
        if len(self.members) != self.spaces.n_members:
            raise ValueError("need one member function per member space")
        for f, sp in zip(self.members, self.spaces.members):
            if f.space != sp:
                raise ValueError("member function on the wrong space")
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def norm(self) -> float:
        return max(f.norm for f in self.members)

    def truncate_above(self, c: float) -> "FnSequence":
        return FnSequence(self.spaces, tuple(f.truncate_above(c) for f in self.members))

    def truncate_below(self, c: float) -> "FnSequence":
        return FnSequence(self.spaces, tuple(f.truncate_below(c) for f in self.members))


@dataclass(frozen=True)
class ConvergenceVerdict:
    """Pass/fail verdict of a LIM-type check, with per-level diagnostics."""

    passed: bool
    tol: float
    n0: int
    uniform_bound: float
    per_level: dict
    notes: tuple = ()

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, np.ndarray):
                return x.tolist()
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            if isinstance(x, dict):
                return {str(k): clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            return x

        return json.dumps(
            {
                "passed": self.passed,
                "tol": self.tol,
                "n0": self.n0,
                "uniform_bound": self.uniform_bound,
                "per_level": clean(self.per_level),
                "notes": list(self.notes),
            },
            sort_keys=True,
        )


def _gather(fs: FnSequence, tracked: Sequence[TrackedSequence]) -> tuple[np.ndarray, np.ndarray]:
    """Stack f_n(z_n) along each tracked sequence: rows = sequences, cols = members."""
    idx = np.stack([t.member_indices for t in tracked], axis=0)
    vals = np.stack(
        [fs.members[n].values[idx[:, n]] for n in range(fs.spaces.n_members)], axis=1
    )
    limit_idx = np.array([t.limit_index for t in tracked], dtype=int)
    return vals, limit_idx


def _tracked_for_level(
    fs: FnSequence, q, extra: Iterable[TrackedSequence]
) -> list[TrackedSequence]:
    tracked = list(fs.spaces.tracked(q))
    tracked.extend(t for t in extra if t.q == q)
    return tracked


def check_LIM(
    fs: FnSequence,
    f: Fn,
    tol: float,
    n0: int | None = None,
    extra: Sequence[TrackedSequence] = (),
) -> ConvergenceVerdict:
    """Verdict on LIM f_n = f at the given tolerance and burn-in index."""
    n0 = fs.spaces.n0 if n0 is None else n0
    per_level: dict = {}
    passed = True
    notes: list[str] = []
    for q in fs.spaces.compacts.labels:
        tracked = _tracked_for_level(fs, q, extra)
        vals, limit_idx = _gather(fs, tracked)
        dev = np.abs(vals - f.values[limit_idx][:, None])
        tail = dev[:, n0:]
        worst_per_seq = tail.max(axis=1)
        i_worst = int(np.argmax(worst_per_seq))
        worst = float(worst_per_seq[i_worst])
        per_member = dev.max(axis=0)
        level_ok = worst <= tol
        passed = passed and level_ok
        if per_member.size - n0 >= 2 and per_member[-1] > per_member[n0] + tol:
            notes.append(f"level {q}: deviations grow along the tail")
        per_level[q] = {
            "worst_dev": worst,
            "witness_limit_index": int(limit_idx[i_worst]),
            "per_member_dev": per_member,
            "passed": level_ok,
        }
    return ConvergenceVerdict(
        passed=passed,
        tol=tol,
        n0=n0,
        uniform_bound=fs.norm,
        per_level=per_level,
        notes=tuple(notes),
    )


def _envelope(
    fs: FnSequence,
    n0: int | None,
    extra: Sequence[TrackedSequence],
    upper: bool,
) -> ExtFn:
    n0 = fs.spaces.n0 if n0 is None else n0
    fill = -np.inf if upper else np.inf
    out = np.full(fs.spaces.limit.size, fill)
    for q in fs.spaces.compacts.labels:
        tracked = _tracked_for_level(fs, q, extra)
        vals, limit_idx = _gather(fs, tracked)
        tail = vals[:, n0:]
        cand = tail.max(axis=1) if upper else tail.min(axis=1)
        for i, p in enumerate(limit_idx):
            out[p] = max(out[p], cand[i]) if upper else min(out[p], cand[i])
    return ExtFn(fs.spaces.limit, out)


def compute_LIMSUP(
    fs: FnSequence, n0: int | None = None, extra: Sequence[TrackedSequence] = ()
) -> ExtFn:
    """Upper envelope: tail max of f_n along every tracked sequence, sup over levels.
    Limit points not reached by any tracked sequence come back as -inf."""
    return _envelope(fs, n0, extra, upper=True)


def compute_LIMINF(
    fs: FnSequence, n0: int | None = None, extra: Sequence[TrackedSequence] = ()
) -> ExtFn:
    """Lower envelope, mirror of compute_LIMSUP; unreached points are +inf."""
    return _envelope(fs, n0, extra, upper=False)


def sandwich_to_LIM(
    fs: FnSequence,
    f: Fn,
    tol: float,
    n0: int | None = None,
    extra: Sequence[TrackedSequence] = (),
) -> ConvergenceVerdict:
    """If LIMSUP f_n <= f <= LIMINF f_n within tol on every compact level, the
    two-sided limit holds; returns the check_LIM verdict, annotated when the
    sandwich itself fails."""
    upper = compute_LIMSUP(fs, n0=n0, extra=extra)
    lower = compute_LIMINF(fs, n0=n0, extra=extra)
    notes = []
    for qi, q in enumerate(fs.spaces.compacts.labels):
        idx = fs.spaces.compacts.limit_sets[qi]
        touched = np.isfinite(upper.values[idx]) & np.isfinite(lower.values[idx])
        over = (upper.values[idx] - f.values[idx])[touched]
        under = (f.values[idx] - lower.values[idx])[touched]
        if over.size and over.max() > tol:
            notes.append(f"level {q}: LIMSUP exceeds target by {over.max():.3g}")
        if under.size and under.max() > tol:
            notes.append(f"level {q}: target exceeds LIMINF by {under.max():.3g}")
    verdict = check_LIM(fs, f, tol, n0=n0, extra=extra)
    if notes:
        return ConvergenceVerdict(
            passed=False,
            tol=verdict.tol,
            n0=verdict.n0,
            uniform_bound=verdict.uniform_bound,
            per_level=verdict.per_level,
            notes=verdict.notes + tuple(notes),
        )
    return verdict


def lift_to_members(f: Fn, seq: SpaceSequence) -> FnSequence:
    """Pull a limit function back to every member space through the embeddings:
    each member point takes the value of f at the nearest limit point.  The
    sup norms never grow, and the lifted sequence converges back to f."""
    if f.space != seq.limit:
        raise PreconditionError("function must live on the limit space")
    members = []
    for m in seq.members:
        nearest = seq.limit.nearest(m.coords)
        members.append(Fn(m, f.values[nearest]))
    return FnSequence(seq, tuple(members))


@dataclass(frozen=True)
class EquiContinuityFit:
    """Fit of the two-constant continuity bound
    sup_K |Tf - Tg| <= delta * C0 + C1 * sup_Khat |f - g|."""

    ok: bool
    records: tuple
    notes: tuple = ()


def check_strict_continuity_estimate(
    apply_T: Callable[[Fn], Fn],
    probes: Sequence[tuple],
    candidate_hats: Sequence[np.ndarray],
    c1_grid: Sequence[float] = (0.0, 1.0),
    c0_cap_factor: float = 2.0,
) -> EquiContinuityFit:
    """Fit constants for the double bound over probe groups.

    Each probe is (f, g, K, delta, r) with K a point-index array and r the
    probe norm bound.  Probes sharing (K, delta, r) are fitted together: the
    smallest candidate K_hat (ordered) and smallest C1 from the grid such
    that the required C0 stays below c0_cap_factor * r wins.  Failure to fit
    is reported, not raised.
    """
    groups: dict = {}
    for f, g, K, delta, r in probes:
        key = (tuple(np.asarray(K, dtype=int).tolist()), float(delta), float(r))
        groups.setdefault(key, []).append((f, g))
    records = []
    all_ok = True
    for (K_key, delta, r), pairs in groups.items():
        K = np.asarray(K_key, dtype=int)
        diffs = []
        for f, g in pairs:
            tf, tg = apply_T(f), apply_T(g)
            lhs = float(np.abs(tf.values[K] - tg.values[K]).max())
            diffs.append((lhs, f, g))
        fit = None
        for hat_i, Khat in enumerate(candidate_hats):
            Khat = np.asarray(Khat, dtype=int)
            for c1 in c1_grid:
                need = 0.0
                for lhs, f, g in diffs:
                    rhs_var = float(np.abs(f.values[Khat] - g.values[Khat]).max())
                    need = max(need, (lhs - c1 * rhs_var) / delta)
                need = max(0.0, need)
                if need <= c0_cap_factor * r:
                    fit = {"K": K, "delta": delta, "r": r, "hat_index": hat_i,
                           "C0": need, "C1": float(c1)}
                    break
            if fit is not None:
                break
        if fit is None:
            all_ok = False
            fit = {"K": K, "delta": delta, "r": r, "hat_index": None, "C0": None, "C1": None}
        records.append(fit)
    return EquiContinuityFit(ok=all_ok, records=tuple(records))


def pair_norm(fs: FnSequence, f: Fn) -> float:
    """Norm of the pair <f, {f_n}>: the larger of the two sup norms."""
    return max(fs.norm, f.norm)


def check_P_closedness(
    pairs: Sequence[tuple],
    tol: float,
    n0: int | None = None,
    extra: Sequence[TrackedSequence] = (),
) -> bool:
    """Closedness probe for the subspace of convergent pairs.

    `pairs` is a Cauchy sequence of (FnSequence, Fn) pairs, each assumed to
    pass check_LIM at tol; the norm-limit is realized by the final pair.
    The Cauchy property is a precondition (non-increasing increments, last
    increment below tol).  Returns whether the final pair passes check_LIM
    at 3 * tol, the constant the triangle inequality yields.
    """
    if len(pairs) < 2:
        raise PreconditionError("need at least two pairs")
    increments = []
    for (fs_a, f_a), (fs_b, f_b) in zip(pairs[:-1], pairs[1:]):
        d_members = max(
            float(np.abs(fa.values - fb.values).max())
            for fa, fb in zip(fs_a.members, fs_b.members)
        )
        d_limit = float(np.abs(f_a.values - f_b.values).max())
        increments.append(max(d_members, d_limit))
    if any(b > a + 1e-12 for a, b in zip(increments[:-1], increments[1:])):
        raise PreconditionError("pair sequence is not Cauchy: increments grow")
    if increments[-1] > tol:
        raise PreconditionError(
            f"pair sequence is not Cauchy at tolerance {tol}: last increment {increments[-1]:.3g}"
        )
    fs_last, f_last = pairs[-1]
    verdict = check_LIM(fs_last, f_last, 3.0 * tol, n0=n0, extra=extra)
    return verdict.passed
