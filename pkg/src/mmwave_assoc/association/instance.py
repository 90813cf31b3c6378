"""Problem instances, association results, feasibility checks and the P1 objective."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import LinkTable, RadioConfig, capacity_from_shares, db_to_linear, satisfaction
from ..geometry import NetworkLayout


@dataclass(frozen=True)
class Instance:
    """Everything an association scheme may look at.

    ``links`` is the channel the scheme decides on; candidate links are the
    ones whose SNR reaches ``gamma_min``.
    """

    radio: RadioConfig
    links: LinkTable
    positions: np.ndarray | None = None
    layout: NetworkLayout | None = None

    @property
    def n_users(self) -> int:
        return self.links.shape[0]

    @property
    def n_bs(self) -> int:
        return self.links.shape[1]

    @property
    def snr_db(self) -> np.ndarray:
        return self.links.snr_db

    @property
    def snr(self) -> np.ndarray:
        return db_to_linear(self.links.snr_db)

    @property
    def candidate(self) -> np.ndarray:
        return self.links.snr_db >= self.radio.gamma_min_db

    @property
    def bs_beam_key(self) -> np.ndarray:
        """Global id of the BS beam (j, d) used by each link."""
        return np.arange(self.n_bs)[None, :] * self.radio.m_bs + self.links.bs_beam

    @property
    def user_beam_key(self) -> np.ndarray:
        """Global id of the user beam (i, d) used by each link."""
        return np.arange(self.n_users)[:, None] * self.radio.m_user + self.links.user_beam

    def link_rate(self, with_overhead: bool = True) -> np.ndarray:
        """Rate of each link if it owned its BS beam for the whole time."""
        rate = capacity_from_shares(1.0, self.snr, self.radio)
        return rate if with_overhead else rate / (1.0 - self.radio.xi)

    @classmethod
    def synthetic(cls, radio: RadioConfig, snr_db, bs_beam, user_beam, misalign_bs=None,
                  misalign_user=None) -> "Instance":
        """Instance from raw per-link arrays, with no geometry behind it."""
        snr_db = np.asarray(snr_db, dtype=float)
        shape = snr_db.shape
        zeros = np.zeros(shape)
        mb = zeros if misalign_bs is None else np.asarray(misalign_bs, dtype=float)
        mu = zeros if misalign_user is None else np.asarray(misalign_user, dtype=float)
        links = LinkTable(
            distance_2d=zeros.copy(), distance_3d=zeros.copy(), angle_bs_to_user=zeros.copy(),
            angle_user_to_bs=zeros.copy(),
            bs_beam=np.broadcast_to(np.asarray(bs_beam, dtype=int), shape).copy(),
            user_beam=np.broadcast_to(np.asarray(user_beam, dtype=int), shape).copy(),
            misalign_bs=np.broadcast_to(mb, shape).copy(), misalign_user=np.broadcast_to(mu, shape).copy(),
            los=np.ones(shape, dtype=bool), sf_los=zeros.copy(), sf_nlos=zeros.copy(),
            path_loss=zeros.copy(), rain_attenuation=zeros.copy(), gain_bs=zeros.copy(),
            gain_user=zeros.copy(), snr_db=snr_db.copy())
        return cls(radio, links)


@dataclass
class Association:
    """Share matrix ``x`` plus the airtime fraction each link actually gets.

    For the optimal scheme with finite ``s`` the time share is ``x/s``; the
    heuristics store ``x = 1`` per accepted link and split each BS beam's
    airtime evenly among its occupants.
    """

    x: np.ndarray
    time_share: np.ndarray
    p: np.ndarray
    scheme: str
    objective: float | None = None
    optimal: bool | None = None
    gap: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def active(self) -> np.ndarray:
        return self.x >= 1

    @property
    def degree(self) -> np.ndarray:
        return self.active.sum(axis=1)

    @classmethod
    def empty(cls, instance: Instance, scheme: str) -> "Association":
        shape = (instance.n_users, instance.n_bs)
        return cls(np.zeros(shape, dtype=int), np.zeros(shape), np.zeros(instance.n_users), scheme)


def user_capacities(instance: Instance, time_share, snr=None) -> np.ndarray:
    snr = instance.snr if snr is None else snr
    return capacity_from_shares(time_share, snr, instance.radio).sum(axis=1)


def beam_occupancy(instance: Instance, active) -> np.ndarray:
    """Number of active links sharing each link's BS beam (0 for inactive links)."""
    keys = instance.bs_beam_key
    active = np.asarray(active, dtype=bool)
    counts = np.bincount(keys[active], minlength=instance.n_bs * instance.radio.m_bs)
    return np.where(active, counts[keys], 0)


def from_accepted(instance: Instance, accepted, scheme: str, **info) -> Association:
    """Association for a set of accepted links, airtime split evenly within each BS beam."""
    accepted = np.asarray(accepted, dtype=bool)
    occ = beam_occupancy(instance, accepted)
    share = np.divide(1.0, occ, out=np.zeros(occ.shape), where=accepted)
    p = satisfaction(user_capacities(instance, share), instance.radio.r_min_bps)
    return Association(accepted.astype(int), share, np.atleast_1d(p), scheme, info=info)


def p1_objective(instance: Instance, time_share, penalty_m: float, overhead_in_rate: bool = True) -> float:
    """Throughput minus ``M`` times the total unsatisfied fraction, with each p at its best value."""
    radio = instance.radio
    rate = capacity_from_shares(time_share, instance.snr, radio).sum(axis=1)
    rate_for_p = rate if overhead_in_rate else rate / (1.0 - radio.xi)
    p = np.minimum(1.0, rate_for_p / radio.r_min_bps)
    return float(rate.sum() - penalty_m * np.sum(1.0 - p))


def feasibility_violations(assoc: Association, instance: Instance, tol: float = 1e-9) -> list[str]:
    """Return human-readable violations of C1-C3, share bounds and the satisfaction identity."""
    radio = instance.radio
    out = []
    x = np.asarray(assoc.x)
    active = x >= 1
    if np.any(x < 0):
        out.append("negative shares")
    if not radio.unbounded:
        if np.any(x > radio.s):
            out.append("x exceeds s")
        load = np.bincount(instance.bs_beam_key.ravel(), weights=x.ravel().astype(float),
                           minlength=instance.n_bs * radio.m_bs)
        if np.any(load > radio.s):
            out.append(f"C1: BS beam over capacity (max load {load.max():g} > s={radio.s})")
    airtime = np.bincount(instance.bs_beam_key.ravel(), weights=np.asarray(assoc.time_share).ravel(),
                          minlength=instance.n_bs * radio.m_bs)
    if np.any(airtime > 1 + tol):
        out.append(f"BS beam airtime {airtime.max():.12g} > 1")
    if np.any((np.asarray(assoc.time_share) > tol) & ~active):
        out.append("airtime on an inactive link")
    per_user_beam = np.bincount(instance.user_beam_key[active], minlength=instance.n_users * radio.m_user)
    if np.any(per_user_beam > 1):
        out.append("C2: a user beam serves more than one BS")
    if np.any(active & ~instance.candidate):
        out.append("C3: active link below gamma_min")
    p = satisfaction(user_capacities(instance, assoc.time_share), radio.r_min_bps)
    if np.any(np.abs(np.atleast_1d(p) - assoc.p) > tol):
        out.append("stored satisfaction does not match capacities")
    return out
