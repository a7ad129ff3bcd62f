"""Optimal delay-power tradeoff curve.

Two independent routes: a threshold walk that descends the frontier one
vertex at a time, and a brute-force lower convex hull of every
deterministic policy's reward pair.  Their agreement is the package's
central cross-check.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import SingularChain
from .model import ModelParams, Policy, ThresholdPolicy, threshold_to_policy
from .mrp import DelayPowerPoint, EvalCache, evaluate
from .policies import (
    DEFAULT_ENUMERATION_CAP,
    enumerate_deterministic,
    initial_threshold_policy,
    neighbors_increase_threshold,
)

log = logging.getLogger(__name__)

# Two points are the same vertex if both coordinates agree to this.
POINT_TOL = 1e-12
# A middle point within this perpendicular distance of the chord joining
# its neighbors is treated as collinear and dropped.
COLLINEAR_TOL = 1e-9


@dataclass(frozen=True)
class Segment:
    start: DelayPowerPoint
    end: DelayPowerPoint

    @property
    def slope(self) -> float:
        """Delay increase per unit of power saved (nonnegative on the curve)."""
        return (self.end.delay - self.start.delay) / (self.start.power - self.end.power)


@dataclass(frozen=True)
class ParetoCurve:
    """Piecewise-linear frontier, ordered by strictly decreasing power."""

    vertices: tuple[DelayPowerPoint, ...]
    skipped_singular: int = 0

    @property
    def segments(self) -> tuple[Segment, ...]:
        return tuple(
            Segment(a, b) for a, b in zip(self.vertices, self.vertices[1:])
        )

    @property
    def min_power(self) -> float:
        return self.vertices[-1].power

    @property
    def max_power(self) -> float:
        return self.vertices[0].power

    def validate(self) -> None:
        """Check frontier invariants: power strictly decreasing, delay
        nondecreasing, slopes nonnegative and strictly increasing."""
        vs = self.vertices
        for a, b in zip(vs, vs[1:]):
            if not b.power < a.power:
                raise ValueError(f"power not strictly decreasing: {a.power} -> {b.power}")
            if b.delay < a.delay - POINT_TOL:
                raise ValueError(f"delay decreasing: {a.delay} -> {b.delay}")
        slopes = [s.slope for s in self.segments]
        for s in slopes:
            if s < -POINT_TOL:
                raise ValueError(f"negative segment slope {s}")
        for s1, s2 in zip(slopes, slopes[1:]):
            if not s2 > s1 - POINT_TOL:
                raise ValueError(f"slopes not increasing: {s1} -> {s2}")

    def interpolate(self, power: float) -> float:
        """Optimal delay at a given power budget (piecewise linear).

        Budgets above the maximum-power vertex return the minimum delay;
        budgets below the minimum-power vertex are infeasible.
        """
        if power < self.min_power - 1e-9:
            raise ValueError(
                f"power {power} below the feasible minimum {self.min_power}"
            )
        ps = np.array([v.power for v in reversed(self.vertices)])
        ds = np.array([v.delay for v in reversed(self.vertices)])
        return float(np.interp(power, ps, ds))

    def to_csv(self) -> str:
        lines = ["power,delay,thresholds"]
        for v in self.vertices:
            ts = " ".join(str(t) for t in v.thresholds) if v.thresholds else ""
            lines.append(f"{v.power:.17g},{v.delay:.17g},{ts}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "vertices": [
                {
                    "power": v.power,
                    "delay": v.delay,
                    "thresholds": list(v.thresholds) if v.thresholds else None,
                    "policy": v.policy.f.tolist() if v.policy is not None else None,
                }
                for v in self.vertices
            ],
            "segments": [
                {"slope": s.slope} for s in self.segments
            ],
        }
        return json.dumps(doc, indent=2)


def _perp_distance(a: DelayPowerPoint, b: DelayPowerPoint, c: DelayPowerPoint) -> float:
    """Perpendicular distance of b from the line through a and c."""
    ux, uy = c.power - a.power, c.delay - a.delay
    vx, vy = b.power - a.power, b.delay - a.delay
    norm = (ux * ux + uy * uy) ** 0.5
    if norm == 0.0:
        return (vx * vx + vy * vy) ** 0.5
    return abs(ux * vy - uy * vx) / norm


def _drop_collinear(points: list[DelayPowerPoint], tol: float = COLLINEAR_TOL) -> list[DelayPowerPoint]:
    out = list(points)
    # prune interior points lying on the chord of their neighbors
    changed = True
    while changed and len(out) > 2:
        changed = False
        for i in range(1, len(out) - 1):
            if _perp_distance(out[i - 1], out[i], out[i + 1]) <= tol:
                del out[i]
                changed = True
                break
    return out


def lower_convex_hull(points: Sequence[DelayPowerPoint]) -> ParetoCurve:
    """Pareto-optimal lower-left convex boundary of a reward point cloud.

    Monotone-chain scan in the (power, delay) plane; collinear interior
    points are dropped; hull vertices past the minimum-delay point are
    dominated and discarded.
    """
    if not points:
        raise ValueError("need at least one point")
    pts = sorted(points, key=lambda p: (p.power, p.delay))
    # keep only the least-delay representative of (near-)equal powers
    dedup: list[DelayPowerPoint] = []
    for p in pts:
        if dedup and abs(p.power - dedup[-1].power) <= POINT_TOL:
            if p.delay < dedup[-1].delay:
                dedup[-1] = p
            continue
        dedup.append(p)
    hull: list[DelayPowerPoint] = []
    for p in dedup:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (a.power - o.power) * (p.delay - o.delay) - (
                a.delay - o.delay
            ) * (p.power - o.power)
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    # Pareto prefix: walk from min power while delay strictly decreases.
    frontier = [hull[0]]
    for p in hull[1:]:
        if p.delay < frontier[-1].delay - POINT_TOL:
            frontier.append(p)
        else:
            break
    frontier.reverse()  # decreasing power, increasing delay
    return ParetoCurve(vertices=tuple(_drop_collinear(frontier)))


def _threshold_point(
    params: ModelParams, tp: ThresholdPolicy, cache: EvalCache
) -> DelayPowerPoint:
    policy = threshold_to_policy(params, tp)
    try:
        base = evaluate(params, policy, cache)
    except SingularChain as exc:
        raise SingularChain(
            f"singular chain for thresholds {tp.thresholds}: {exc}"
        ) from exc
    return DelayPowerPoint(
        power=base.power, delay=base.delay, policy=policy, thresholds=tp.thresholds
    )


def algorithm1(params: ModelParams) -> ParetoCurve:
    """Frontier by the threshold walk.

    Starts from the zero-delay immediate-transmission strategy and, at each
    step, raises one threshold of some current strategy by 1, accepting the
    candidates that reduce power at the smallest delay-per-power slope.
    Tied candidates are all kept for the next expansion; the recorded
    vertex is the tied point of least power (lexicographically smallest
    thresholds among equals).
    """
    cache = EvalCache()
    tp0 = initial_threshold_policy(params)
    cur_pt = _threshold_point(params, tp0, cache)
    walk = [cur_pt]
    current: dict[tuple[int, ...], ThresholdPolicy] = {tp0.thresholds: tp0}
    slope_tol = 1e-9
    while True:
        p_p, d_p = cur_pt.power, cur_pt.delay
        # Neighbors with the exact same reward pair only reassign unreachable
        # states: they are alternative representations of the current vertex,
        # so their own neighbors must be explored too (transitively).
        candidates: dict[tuple[int, ...], tuple[float, float, ThresholdPolicy]] = {}
        pending = list(current.values())
        while pending:
            tp = pending.pop()
            for nb in neighbors_increase_threshold(params, tp):
                if nb.thresholds in current or nb.thresholds in candidates:
                    continue
                pt = _threshold_point(params, nb, cache)
                if abs(pt.power - p_p) <= POINT_TOL and abs(pt.delay - d_p) <= POINT_TOL:
                    current[nb.thresholds] = nb
                    pending.append(nb)
                    continue
                candidates[nb.thresholds] = (pt.power, pt.delay, nb)
        accepted = [
            (p, d, nb)
            for (p, d, nb) in candidates.values()
            if d >= d_p - slope_tol and p < p_p - 1e-12
        ]
        if not accepted:
            break
        slopes = [(max(d - d_p, 0.0) / (p_p - p), p, d, nb) for p, d, nb in accepted]
        s_min = min(s for s, _, _, _ in slopes)
        tied = [(s, p, d, nb) for (s, p, d, nb) in slopes if s <= s_min + slope_tol]
        # vertex representative: least power, then lexicographic thresholds
        _, p_c, d_c, best = min(
            tied, key=lambda t: (t[1], t[3].thresholds)
        )
        cur_pt = _threshold_point(params, best, cache)
        walk.append(cur_pt)
        current = {nb.thresholds: nb for (_, _, _, nb) in tied}
    return ParetoCurve(vertices=tuple(_drop_collinear(walk)))


def deterministic_cloud(
    params: ModelParams, cap: int = DEFAULT_ENUMERATION_CAP
) -> tuple[list[DelayPowerPoint], int]:
    """Reward pairs of every deterministic policy; singular chains are
    skipped and counted."""
    points: list[DelayPowerPoint] = []
    skipped = 0
    for policy in enumerate_deterministic(params, cap=cap):
        try:
            pt = evaluate(params, policy)
        except SingularChain:
            skipped += 1
            continue
        points.append(pt)
    if skipped:
        log.warning("skipped %d deterministic policies with singular chains", skipped)
    return points, skipped


def brute_force_frontier(
    params: ModelParams, cap: int = DEFAULT_ENUMERATION_CAP
) -> ParetoCurve:
    """Frontier by exhaustive enumeration: the oracle route."""
    points, skipped = deterministic_cloud(params, cap=cap)
    curve = lower_convex_hull(points)
    return ParetoCurve(vertices=curve.vertices, skipped_singular=skipped)


def cloud_to_csv(params: ModelParams, points: Sequence[DelayPowerPoint]) -> str:
    """CSV of a deterministic point cloud, flagging threshold policies."""
    from .policies import is_threshold

    lines = ["power,delay,actions,is_threshold"]
    for pt in points:
        acts = ""
        thr = ""
        if pt.policy is not None:
            amap = pt.policy.action_map()
            acts = " ".join(str(a) for a in amap)
            thr = "1" if is_threshold(params, pt.policy) is not None else "0"
        lines.append(f"{pt.power:.17g},{pt.delay:.17g},{acts},{thr}")
    return "\n".join(lines) + "\n"
