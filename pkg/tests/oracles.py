"""Independent oracles the test suite checks the package against.

Everything here is derived from first principles with none of the
package's numerics: plain Euler integration, closed-form circular arcs,
rank-statistic enumeration, and brute-force search over small discrete
spaces.  The only package artifact an oracle may consume is a value
field passed in as a black-box interpolation callable, used when the
oracle's job is to probe the strategies that field implies.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Kinematics


def euler_rollout(
    pose: tuple[float, float, float],
    omega: float,
    duration: float,
    speed: float,
    n_steps: int = 20000,
) -> tuple[float, float, float]:
    """Forward-Euler unicycle integration at a very fine step."""
    x, y, psi = pose
    h = duration / n_steps
    for _ in range(n_steps):
        x += h * speed * math.cos(psi)
        y += h * speed * math.sin(psi)
        psi += h * omega
    return x, y, ((psi + math.pi) % TWO_PI) - math.pi


def arc_endpoint(
    pose: tuple[float, float, float], omega: float, duration: float, speed: float
) -> tuple[float, float, float]:
    """Closed-form constant-turn endpoint via the chord construction.

    The path is a circle of radius speed/omega about the center lying a
    radius to the left of the heading; derived independently from the
    rotation of the center-to-pose vector.
    """
    x, y, psi = pose
    if abs(omega) < 1e-15:
        return (
            x + speed * duration * math.cos(psi),
            y + speed * duration * math.sin(psi),
            psi,
        )
    r = speed / omega
    cx = x - r * math.sin(psi)
    cy = y + r * math.cos(psi)
    a = omega * duration
    dx, dy = x - cx, y - cy
    nx = cx + dx * math.cos(a) - dy * math.sin(a)
    ny = cy + dx * math.sin(a) + dy * math.cos(a)
    return nx, ny, ((psi + a + math.pi) % TWO_PI) - math.pi


def body_frame_pose(
    target: tuple[float, float, float], frame: tuple[float, float, float]
) -> tuple[float, float, float]:
    """Pose of ``target`` in ``frame``'s body axes via an explicit 2x2."""
    tx, ty, tp = target
    fx, fy, fp = frame
    c, s = math.cos(fp), math.sin(fp)
    dx, dy = tx - fx, ty - fy
    return (
        c * dx + s * dy,
        -s * dx + c * dy,
        ((tp - fp + math.pi) % TWO_PI) - math.pi,
    )


# ---------------------------------------------------------------------------
# Rank-sum statistic


def rank_sum_exact(a, b) -> tuple[float, float]:
    """U statistic and exact two-sided p via full relabeling enumeration.

    Uses midranks over the pooled sample, U = R_a - n(n+1)/2, and
    counts relabelings at least as extreme on either side (doubled,
    capped at 1).  Quadratic-time ranks; intended for small samples.
    """

    def u_of(sample_a, pooled):
        ranks = np.empty(len(pooled))
        order = np.argsort(pooled, kind="stable")
        sorted_vals = np.asarray(pooled)[order]
        i = 0
        while i < len(pooled):
            j = i
            while j < len(pooled) and sorted_vals[j] == sorted_vals[i]:
                j += 1
            ranks[order[i:j]] = 0.5 * (i + j - 1) + 1.0
            i = j
        r_a = ranks[list(sample_a)].sum()
        n = len(sample_a)
        return r_a - n * (n + 1) / 2.0

    a = list(map(float, a))
    b = list(map(float, b))
    pooled = a + b
    n = len(a)
    U = u_of(range(n), pooled)
    le = ge = total = 0
    for combo in itertools.combinations(range(len(pooled)), n):
        u = u_of(combo, pooled)
        le += u <= U + 1e-9
        ge += u >= U - 1e-9
        total += 1
    return U, min(1.0, 2.0 * min(le / total, ge / total))


# ---------------------------------------------------------------------------
# Three-vehicle assignment space


def feasible_bruteforce() -> list[tuple[int, ...]]:
    """All six-entry off-diagonal binaries passing the assignment rules.

    Entry order (u01, u02, u10, u12, u20, u21); row budget one, and no
    pair avoiding each other simultaneously.
    """
    out = []
    for bits in itertools.product((0, 1), repeat=6):
        u01, u02, u10, u12, u20, u21 = bits
        if u01 + u02 > 1 or u10 + u12 > 1 or u20 + u21 > 1:
            continue
        if (u01 and u10) or (u02 and u20) or (u12 and u21):
            continue
        out.append(bits)
    return out


def assignment_bruteforce(R: np.ndarray) -> tuple[np.ndarray, float]:
    """Exhaustive maximizer with lexicographic (row-major) tie-break."""
    best_obj = -math.inf
    best_key = None
    for bits in feasible_bruteforce():
        u01, u02, u10, u12, u20, u21 = bits
        U = np.array([[0, u01, u02], [u10, 0, u12], [u20, u21, 0]])
        obj = float((R * U).sum())
        key = tuple(U.ravel())
        if obj > best_obj + 1e-9 or (abs(obj - best_obj) <= 1e-9 and key < best_key):
            best_obj, best_key = obj, key
    return np.array(best_key).reshape(3, 3), best_obj


# ---------------------------------------------------------------------------
# Game rollouts for boundary falsification


def _advance(poses: np.ndarray, omegas: np.ndarray, dt: float, speed: float):
    """Vectorized exact constant-turn step on (n, 3) pose arrays."""
    x, y, psi = poses[:, 0], poses[:, 1], poses[:, 2]
    out = np.empty_like(poses)
    straight = np.abs(omegas) < 1e-12
    r = speed / np.where(straight, 1.0, omegas)
    a = omegas * dt
    out[:, 0] = np.where(
        straight,
        x + speed * dt * np.cos(psi),
        x + r * (np.sin(psi + a) - np.sin(psi)),
    )
    out[:, 1] = np.where(
        straight,
        y + speed * dt * np.sin(psi),
        y - r * (np.cos(psi + a) - np.cos(psi)),
    )
    out[:, 2] = ((psi + a + math.pi) % TWO_PI) - math.pi
    return out


def _rel_batch(target: np.ndarray, frame: np.ndarray) -> np.ndarray:
    c = np.cos(frame[:, 2])
    s = np.sin(frame[:, 2])
    dx = target[:, 0] - frame[:, 0]
    dy = target[:, 1] - frame[:, 1]
    th = ((target[:, 2] - frame[:, 2] + math.pi) % TWO_PI) - math.pi
    return np.stack([c * dx + s * dy, -s * dx + c * dy, th], axis=1)


def sample_strategies(
    rng: np.random.Generator, n: int, steps: int, dt: float, wmax: float
) -> np.ndarray:
    """Piecewise-constant random turn-rate plans, (n, steps).

    Half the plans switch among the saturated extremes and zero, half
    draw continuous rates; segment lengths are 0.5 to 2.5 seconds.
    """
    plans = np.empty((n, steps))
    for i in range(n):
        t = 0
        while t < steps:
            seg = int(rng.uniform(0.5, 2.5) / dt)
            if i % 2 == 0:
                u = rng.choice((-wmax, 0.0, wmax))
            else:
                u = rng.uniform(-wmax, wmax)
            plans[i, t : t + seg] = u
            t += seg
    return plans


def falsify_claim(
    interp,
    rel0: tuple[float, float, float],
    claimed_safe: bool,
    speed: float,
    wmax: float,
    capture_radius: float,
    n_samples: int = 10000,
    horizon: float = 12.0,
    dt: float = 0.05,
    seed: int = 0,
) -> bool:
    """Whether the Monte-Carlo game supports the claimed side.

    For a claimed-safe state the field's greedy evader must keep every
    sampled pursuer plan outside the capture disc; for a claimed-capture
    state the field's greedy pursuer must capture every sampled evader
    plan.  ``interp`` maps (n, 3) relative poses to field values and is
    the only contact with the system under test.
    """
    rng = np.random.default_rng(seed)
    steps = int(horizon / dt)
    plans = sample_strategies(rng, n_samples, steps, dt, wmax)
    E = np.zeros((n_samples, 3))
    P = np.tile(np.asarray(rel0, dtype=float), (n_samples, 1))
    min_sep = np.hypot(P[:, 0] - E[:, 0], P[:, 1] - E[:, 1])
    candidates = (-wmax, 0.0, wmax)
    for k in range(steps):
        if claimed_safe:
            # Greedy evader: pick the candidate raising the field most.
            best_vals = None
            best_E = None
            for u in candidates:
                E2 = _advance(E, np.full(n_samples, u), dt, speed)
                vals = interp(_rel_batch(P, E2))
                if best_vals is None:
                    best_vals, best_E = vals, E2
                else:
                    better = vals > best_vals
                    best_vals = np.where(better, vals, best_vals)
                    best_E[better] = E2[better]
            E = best_E
            P = _advance(P, plans[:, k], dt, speed)
        else:
            best_vals = None
            best_P = None
            for u in candidates:
                P2 = _advance(P, np.full(n_samples, u), dt, speed)
                vals = interp(_rel_batch(P2, E))
                if best_vals is None:
                    best_vals, best_P = vals, P2
                else:
                    better = vals < best_vals
                    best_vals = np.where(better, vals, best_vals)
                    best_P[better] = P2[better]
            P = best_P
            E = _advance(E, plans[:, k], dt, speed)
        sep = np.hypot(P[:, 0] - E[:, 0], P[:, 1] - E[:, 1])
        min_sep = np.minimum(min_sep, sep)
    if claimed_safe:
        return bool((min_sep >= capture_radius).all())
    return bool((min_sep < capture_radius).all())
