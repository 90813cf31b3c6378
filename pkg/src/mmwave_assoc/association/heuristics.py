"""Greedy association schemes: misalignment-threshold (BEAM-ALIGN), SNR-1 and SNR-dynamic.

All three enforce the user-beam constraint (one BS per user receive beam)
so their output is feasible for the exact model, and all break SNR ties by
ascending (user, BS) index. Within every BS beam the airtime is split
evenly among the accepted users.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .instance import Association, Instance, from_accepted


class SigmaSource(str, enum.Enum):
    CALIBRATED = "calibrated"
    MANUAL = "manual"


@dataclass(frozen=True)
class BeamAlignConfig:
    sigma_deg: float
    source: SigmaSource = SigmaSource.MANUAL

    def __post_init__(self):
        if not self.sigma_deg > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma_deg}")

    @classmethod
    def calibrated(cls, theta_b_deg: float, table: dict | None = None) -> "BeamAlignConfig":
        table = load_sigma_table() if table is None else table
        key = _theta_key(theta_b_deg)
        if key not in table:
            raise KeyError(f"no calibrated sigma for theta_b={theta_b_deg} (have {sorted(table)})")
        return cls(float(table[key]), SigmaSource.CALIBRATED)


def _theta_key(theta: float) -> str:
    return f"{float(theta):g}"


def load_sigma_table() -> dict[str, float]:
    """The shipped misalignment thresholds, keyed by BS beamwidth in degrees."""
    text = resources.files("mmwave_assoc").joinpath("data/sigma_table.json").read_text()
    return {k: float(v) for k, v in json.loads(text)["sigma_deg"].items()}


def _capacity_left(instance: Instance) -> np.ndarray:
    s = instance.radio.s
    size = instance.n_bs * instance.radio.m_bs
    return np.full(size, np.inf) if math.isinf(s) else np.full(size, float(s))


def beam_align(instance: Instance, cfg: BeamAlignConfig) -> Association:
    """Each BS accepts requests in descending SNR if ``|misalignment| < sigma`` and the beam has room."""
    snr = instance.snr_db
    cand = instance.candidate & (np.abs(instance.links.misalign_bs) < cfg.sigma_deg)
    bkey = instance.bs_beam_key
    ukey = instance.user_beam_key
    room = _capacity_left(instance)
    user_beam_busy = np.zeros(instance.n_users * instance.radio.m_user, dtype=bool)
    accepted = np.zeros(snr.shape, dtype=bool)
    for j in range(instance.n_bs):
        # a user has one link per BS, so only earlier BSs can have claimed its receive beam
        users = np.flatnonzero(cand[:, j])
        users = users[~user_beam_busy[ukey[users, j]]]
        if len(users) == 0:
            continue
        # per beam, SNR descending then user index; the first `room` requests win
        beams = bkey[users, j]
        order = np.lexsort((users, -snr[users, j], beams))
        users, beams = users[order], beams[order]
        first = np.r_[0, np.flatnonzero(beams[1:] != beams[:-1]) + 1]
        rank = np.arange(len(beams)) - np.repeat(first, np.diff(np.r_[first, len(beams)]))
        win = users[rank < room[beams]]
        accepted[win, j] = True
        user_beam_busy[ukey[win, j]] = True
    return from_accepted(instance, accepted, "beam_align", sigma_deg=cfg.sigma_deg)


def snr_one(instance: Instance) -> Association:
    """Single connectivity: users, strongest first, take their best BS whose beam still has room."""
    snr = np.where(instance.candidate, instance.snr_db, -np.inf)
    bkey = instance.bs_beam_key
    room = _capacity_left(instance)
    best = snr.max(axis=1) if instance.n_bs else np.full(instance.n_users, -np.inf)
    users = np.arange(instance.n_users)
    accepted = np.zeros(snr.shape, dtype=bool)
    bs_idx = np.arange(instance.n_bs)
    for i in users[np.lexsort((users, -best))]:
        if not np.isfinite(best[i]):
            continue
        for j in bs_idx[np.lexsort((bs_idx, -snr[i]))]:
            if not np.isfinite(snr[i, j]):
                break
            if room[bkey[i, j]] >= 1:
                accepted[i, j] = True
                room[bkey[i, j]] -= 1
                break
    return from_accepted(instance, accepted, "snr_one")


def snr_dynamic(instance: Instance, order: str = "user") -> Association:
    """Greedy multi-connectivity on SNR alone.

    ``order="user"`` (default): users, strongest best link first, each take
    every candidate link (strongest first) whose BS beam has room and whose
    receive beam is free. Early users thereby hog beams, which is what makes
    this baseline collapse at high density.

    ``order="link"``: every candidate link is pooled and accepted strongest
    first under the same two checks. This behaves close to a throughput
    greedy and is kept for comparison.
    """
    if order not in ("user", "link"):
        raise ValueError(f"order must be 'user' or 'link', got {order!r}")
    snr = np.where(instance.candidate, instance.snr_db, -np.inf)
    accepted = np.zeros(snr.shape, dtype=bool)
    bkey = instance.bs_beam_key
    ukey = instance.user_beam_key
    room = _capacity_left(instance)
    user_beam_busy = np.zeros(instance.n_users * instance.radio.m_user, dtype=bool)

    def offer(i, j):
        b, u = bkey[i, j], ukey[i, j]
        if room[b] >= 1 and not user_beam_busy[u]:
            accepted[i, j] = True
            room[b] -= 1
            user_beam_busy[u] = True

    cand = np.argwhere(instance.candidate)
    if order == "link":
        if len(cand):
            key = snr[cand[:, 0], cand[:, 1]]
            for i, j in cand[np.lexsort((cand[:, 1], cand[:, 0], -key))]:
                offer(i, j)
    elif len(cand):
        best = snr.max(axis=1)
        users = np.arange(instance.n_users)
        bs_idx = np.arange(instance.n_bs)
        for i in users[np.lexsort((users, -best))]:
            for j in bs_idx[np.lexsort((bs_idx, -snr[i]))]:
                if not np.isfinite(snr[i, j]):
                    break
                offer(i, j)
    return from_accepted(instance, accepted, "snr_dynamic", order=order)


def pooled_misalignment(runs) -> dict[float, np.ndarray]:
    """BS-side misalignment of every active link, grouped by BS beamwidth."""
    pooled: dict[float, list[np.ndarray]] = {}
    for assoc, instance in runs:
        theta = float(instance.radio.theta_b_deg)
        pooled.setdefault(theta, []).append(instance.links.misalign_bs[assoc.active])
    return {k: np.concatenate(v) for k, v in pooled.items()}


def calibrate_sigma(runs) -> dict[float, float]:
    """Twice the population std of active-link misalignment per BS beamwidth, capped at half the beamwidth.

    ``runs`` is an iterable of ``(association, instance)`` pairs, normally
    from the optimal scheme.
    """
    pooled = pooled_misalignment(runs)
    out = {}
    for theta, alphas in pooled.items():
        if len(alphas) == 0:
            raise ValueError(f"empty calibration set for theta_b={theta:g}")
        sigma = min(2.0 * float(np.std(alphas)), theta / 2.0)
        if sigma == 0.0:
            warnings.warn(f"degenerate calibration for theta_b={theta:g}: all misalignments equal",
                          RuntimeWarning, stacklevel=2)
        out[theta] = sigma
    if not out:
        raise ValueError("empty calibration set")
    return out
