"""Spatial generation on a flat torus.

Base-station deployment, user point processes, rectangular blocker fields
and all minimum-image distance/angle computations live here. Points are
stored as ``(n, 2)`` float arrays in meters.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import as_generator

SQRT3_2 = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class Torus:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"torus dimensions must be positive, got {self.width} x {self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def area_km2(self) -> float:
        return self.area / 1e6

    def wrap(self, points) -> np.ndarray:
        """Map points into ``[0, W) x [0, H)``."""
        pts = np.array(points, dtype=float, copy=True)
        pts[..., 0] = np.mod(pts[..., 0], self.width)
        pts[..., 1] = np.mod(pts[..., 1], self.height)
        # np.mod can return exactly W for tiny negative inputs
        pts[..., 0][pts[..., 0] >= self.width] = 0.0
        pts[..., 1][pts[..., 1] >= self.height] = 0.0
        return pts

    def contains(self, points) -> bool:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return bool(np.all((pts[:, 0] >= 0) & (pts[:, 0] < self.width)
                           & (pts[:, 1] >= 0) & (pts[:, 1] < self.height)))


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NetworkLayout:
    torus: Torus
    bs_positions: np.ndarray
    inter_site_distance: float
    height_offset: float = 22.5

    def __post_init__(self):
        object.__setattr__(self, "bs_positions", _frozen(self.bs_positions))

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)


class UserGenerator(str, enum.Enum):
    PPP = "ppp"
    MATERN = "matern"


@dataclass(frozen=True)
class UserSet:
    positions: np.ndarray
    generator: UserGenerator = UserGenerator.PPP
    # Matern only: parent points and the parent index of every user
    parents: np.ndarray | None = None
    parent_of: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions))

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class BlockerField:
    """Rectangles given by center, length (local x), width (local y) and angle in radians."""

    centers: np.ndarray
    lengths: np.ndarray
    widths: np.ndarray
    angles: np.ndarray
    target_fraction: float = 0.10

    def __post_init__(self):
        object.__setattr__(self, "centers", _frozen(self.centers))
        for name in ("lengths", "widths", "angles"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.lengths)

    @property
    def areas(self) -> np.ndarray:
        return self.lengths * self.widths

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @classmethod
    def empty(cls) -> "BlockerField":
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros(0), 0.0)


# -- distances and angles ----------------------------------------------------

def min_image(delta, torus: Torus) -> np.ndarray:
    """Wrap displacement vectors to the minimum image."""
    d = np.asarray(delta, dtype=float)
    wx = d[..., 0] - torus.width * np.round(d[..., 0] / torus.width)
    wy = d[..., 1] - torus.height * np.round(d[..., 1] / torus.height)
    return np.stack([wx, wy], axis=-1)


def toroidal_distance(a, b, torus: Torus):
    """Minimum-image Euclidean distance; broadcasts over leading axes."""
    d = np.abs(np.asarray(b, dtype=float) - np.asarray(a, dtype=float))
    dx = np.minimum(d[..., 0] % torus.width, torus.width - d[..., 0] % torus.width)
    dy = np.minimum(d[..., 1] % torus.height, torus.height - d[..., 1] % torus.height)
    out = np.hypot(dx, dy)
    return float(out) if out.ndim == 0 else out


def toroidal_angle(src, dst, torus: Torus) -> float:
    """Direction from ``src`` to ``dst`` in radians, in ``[0, 2*pi)``."""
    d = min_image(np.asarray(dst, dtype=float) - np.asarray(src, dtype=float), torus)
    if d[0] == 0.0 and d[1] == 0.0:
        raise ValueError("degenerate direction: coincident points")
    ang = math.atan2(d[1], d[0]) % (2 * math.pi)
    return 0.0 if ang >= 2 * math.pi else ang


def angles_deg(delta) -> np.ndarray:
    """Vectorized direction of displacement vectors in degrees, ``[0, 360)``."""
    d = np.asarray(delta, dtype=float)
    ang = np.degrees(np.arctan2(d[..., 1], d[..., 0])) % 360.0
    return np.where(ang >= 360.0, 0.0, ang)


# -- base stations -------------------------------------------------------------

def make_hex_layout(torus: Torus, inter_site_distance: float, height_offset: float = 22.5) -> NetworkLayout:
    """Hexagonal grid of BSs that tiles ``torus``.

    Rows are ``isd*sqrt(3)/2`` apart and every other row is shifted by
    ``isd/2``. The grid is anchored at ``(isd/4, isd*sqrt(3)/4)`` so that
    neither row family touches the seam at ``x = 0``.
    """
    isd = float(inter_site_distance)
    if not isd > 0:
        raise ValueError(f"inter_site_distance must be positive, got {inter_site_distance}")
    pitch_y = isd * SQRT3_2
    cols_f, rows_f = torus.width / isd, torus.height / pitch_y
    cols, rows = round(cols_f), round(rows_f)
    if cols < 1 or rows < 1 or abs(cols_f - cols) > 0.01 * cols or abs(rows_f - rows) > 0.01 * rows:
        raise ValueError(
            f"torus {torus.width} x {torus.height} is not tiled by a hex grid with isd={isd} "
            f"({cols_f:.3f} columns, {rows_f:.3f} rows)")
    pts = []
    for r in range(rows):
        y = pitch_y / 2 + r * pitch_y
        x0 = isd / 4 + (r % 2) * isd / 2
        pts.extend((x0 + c * isd, y) for c in range(cols))
    return NetworkLayout(torus, torus.wrap(pts), isd, height_offset)


def scaled_torus(cols: int, rows: int, inter_site_distance: float) -> Torus:
    """Torus that holds exactly ``cols x rows`` hex sites."""
    return Torus(cols * inter_site_distance, rows * inter_site_distance * SQRT3_2)


# -- users -----------------------------------------------------------------------

def sample_ppp(torus: Torus, density: float, rng_seed=None) -> UserSet:
    """Homogeneous PPP; ``density`` in users per km^2."""
    if density < 0:
        raise ValueError("density must be non-negative")
    rng = as_generator(rng_seed)
    n = rng.poisson(density * torus.area_km2)
    pts = rng.uniform(size=(n, 2)) * (torus.width, torus.height)
    return UserSet(torus.wrap(pts), UserGenerator.PPP)


def offspring_counts(total_users: int, n_parents: int) -> np.ndarray:
    base, rem = divmod(int(total_users), int(n_parents))
    counts = np.full(n_parents, base, dtype=int)
    counts[:rem] += 1
    return counts


def sample_matern(torus: Torus, total_users: int, n_parents: int = 30, radius: float = 50.0,
                  rng_seed=None) -> UserSet:
    """Matern cluster process with a fixed number of parents.

    Parents are ``n_parents`` uniform points; each gets an equal share of
    ``total_users`` offspring (the first ``total_users % n_parents`` parents
    get one extra), placed uniformly in a disk around the parent and wrapped
    onto the torus.
    """
    if n_parents < 1:
        raise ValueError("n_parents must be >= 1")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if total_users < 0:
        raise ValueError("total_users must be non-negative")
    rng = as_generator(rng_seed)
    parents = rng.uniform(size=(n_parents, 2)) * (torus.width, torus.height)
    counts = offspring_counts(total_users, n_parents)
    parent_of = np.repeat(np.arange(n_parents), counts)
    rho = radius * np.sqrt(rng.uniform(size=len(parent_of)))
    phi = rng.uniform(0.0, 2 * np.pi, size=len(parent_of))
    pts = parents[parent_of] + np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])
    return UserSet(torus.wrap(pts), UserGenerator.MATERN, _frozen(parents), parent_of)


# -- blockers --------------------------------------------------------------------

def sample_blockers(torus: Torus, target_fraction: float = 0.10,
                    length_range=(5.0, 20.0), width_range=(5.0, 20.0),
                    angle_range=(0.0, math.pi), rng_seed=None) -> BlockerField:
    """Draw rectangles until their summed area first reaches ``target_fraction`` of the torus.

    Overlaps are not subtracted.
    """
    if not 0 < target_fraction < 1:
        raise ValueError("target_fraction must be in (0, 1)")
    if min(length_range) <= 0 or min(width_range) <= 0:
        raise ValueError("blocker dimensions must be positive")
    rng = as_generator(rng_seed)
    target = target_fraction * torus.area
    centers, lengths, widths, angles = [], [], [], []
    total = 0.0
    while total < target:
        c = rng.uniform(size=2) * (torus.width, torus.height)
        ln = rng.uniform(*length_range)
        wd = rng.uniform(*width_range)
        an = rng.uniform(*angle_range)
        centers.append(c)
        lengths.append(ln)
        widths.append(wd)
        angles.append(an)
        total += ln * wd
    return BlockerField(np.array(centers), lengths, widths, angles, target_fraction)


def _segments_hit_rects(p0, d, centers, half_l, half_w, cos_a, sin_a) -> np.ndarray:
    """Slab test of segments ``p0 + t*d, t in [0,1]`` against oriented rectangles.

    ``p0``/``d`` have shape (n, 2); ``centers`` has shape (n, r, 2) or (r, 2).
    Returns an (n, r) bool array.
    """
    rel = p0[:, None, :] - centers
    # rotate into the rectangle frame
    qx = rel[..., 0] * cos_a + rel[..., 1] * sin_a
    qy = -rel[..., 0] * sin_a + rel[..., 1] * cos_a
    dx = d[:, None, 0] * cos_a + d[:, None, 1] * sin_a
    dy = -d[:, None, 0] * sin_a + d[:, None, 1] * cos_a
    t_lo = np.zeros(qx.shape)
    t_hi = np.ones(qx.shape)
    ok = np.ones(qx.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for q, dd, h in ((qx, dx, half_l), (qy, dy, half_w)):
            flat = np.abs(dd) < 1e-12
            ok &= ~(flat & (np.abs(q) > h))
            t1 = (-h - q) / dd
            t2 = (h - q) / dd
            t_lo = np.where(flat, t_lo, np.maximum(t_lo, np.minimum(t1, t2)))
            t_hi = np.where(flat, t_hi, np.minimum(t_hi, np.maximum(t1, t2)))
    return ok & (t_lo <= t_hi)


_IMAGE_SHIFTS = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)


def blocked_segments(starts, deltas, blockers: BlockerField, torus: Torus, chunk: int = 2048) -> np.ndarray:
    """For each segment ``start -> start + delta`` report whether any blocker (or its torus image) cuts it."""
    starts = np.asarray(starts, dtype=float).reshape(-1, 2)
    deltas = np.asarray(deltas, dtype=float).reshape(-1, 2)
    out = np.zeros(len(starts), dtype=bool)
    if len(blockers) == 0 or len(starts) == 0:
        return out
    half_l = blockers.lengths / 2
    half_w = blockers.widths / 2
    cos_a, sin_a = np.cos(blockers.angles), np.sin(blockers.angles)
    rect_radius = float(np.max(np.hypot(half_l, half_w)))
    # minimum-image segments span at most a quarter torus from their midpoint,
    # so only the nearest rectangle image can reach them when rectangles are small
    nearest_only = rect_radius < min(torus.width, torus.height) / 4
    for lo in range(0, len(starts), chunk):
        p0 = starts[lo:lo + chunk]
        d = deltas[lo:lo + chunk]
        if nearest_only:
            mid = p0 + d / 2
            centers = mid[:, None, :] + min_image(blockers.centers[None, :, :] - mid[:, None, :], torus)
            hit = _segments_hit_rects(p0, d, centers, half_l, half_w, cos_a, sin_a)
        else:
            hit = np.zeros((len(p0), len(blockers)), dtype=bool)
            for shift in _IMAGE_SHIFTS:
                centers = blockers.centers + shift * (torus.width, torus.height)
                hit |= _segments_hit_rects(p0, d, centers, half_l, half_w, cos_a, sin_a)
        out[lo:lo + chunk] = hit.any(axis=1)
    return out


def is_blocked(user, bs, blockers: BlockerField, torus: Torus) -> bool:
    """Whether the minimum-image segment between ``user`` and ``bs`` crosses a blocker."""
    user = np.asarray(user, dtype=float)
    delta = min_image(np.asarray(bs, dtype=float) - user, torus)
    return bool(blocked_segments(user[None, :], delta[None, :], blockers, torus)[0])


def blocked_matrix(users, bss, blockers: BlockerField, torus: Torus) -> np.ndarray:
    """(n_users, n_bs) bool matrix of blocked links."""
    users = np.asarray(users, dtype=float).reshape(-1, 2)
    bss = np.asarray(bss, dtype=float).reshape(-1, 2)
    delta = min_image(bss[None, :, :] - users[:, None, :], torus)
    starts = np.broadcast_to(users[:, None, :], delta.shape)
    flat = blocked_segments(starts.reshape(-1, 2), delta.reshape(-1, 2), blockers, torus)
    return flat.reshape(len(users), len(bss))
