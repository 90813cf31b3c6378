"""Link budget: sectorized beams, antenna gain, path loss, rain, SNR and capacity.

Angles are in degrees throughout. Every scalar formula accepts numpy arrays
and broadcasts, so the link table for a whole realization is built in one
pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import NetworkLayout, angles_deg, min_image

UNBOUNDED = math.inf


def db_to_linear(x_db):
    return np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def _check_beamwidth(theta: float, name: str) -> int:
    if not theta > 0:
        raise ValueError(f"{name} must be positive, got {theta}")
    m = 360.0 / theta
    if abs(m - round(m)) > 1e-9:
        raise ValueError(f"{name}={theta} does not divide 360")
    return int(round(m))


def parse_shares(s) -> float | int:
    """Normalize the shares-per-beam setting: a positive int, or ``inf`` for unbounded."""
    if isinstance(s, str):
        if s.strip().lower() in ("inf", "infinity", "unbounded"):
            return UNBOUNDED
        s = int(s)
    if isinstance(s, float) and math.isinf(s) and s > 0:
        return UNBOUNDED
    if isinstance(s, bool) or int(s) != s or s < 1:
        raise ValueError(f"shares per beam must be a positive integer or 'inf', got {s!r}")
    return int(s)


@dataclass(frozen=True)
class RadioConfig:
    f_c_ghz: float = 28.0
    w_hz: float = 1e8
    p_tx_dbm: float = 20.0
    n0_dbm: float = -84.0
    nf_db: float = 7.8
    gamma_min_db: float = 5.0
    r_min_bps: float = 5e8
    xi: float = 0.25
    theta_b_deg: float = 10.0
    theta_u_deg: float = 5.0
    s: int | float = 2
    sf_los_std_db: float = 4.0
    sf_nlos_std_db: float = 7.82

    def __post_init__(self):
        _check_beamwidth(self.theta_b_deg, "theta_b_deg")
        _check_beamwidth(self.theta_u_deg, "theta_u_deg")
        object.__setattr__(self, "s", parse_shares(self.s))
        if not self.w_hz > 0:
            raise ValueError("bandwidth must be positive")
        if not 0 <= self.xi < 1:
            raise ValueError("overhead xi must be in [0, 1)")
        if not self.r_min_bps > 0:
            raise ValueError("r_min_bps must be positive")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.s)

    @property
    def m_bs(self) -> int:
        return int(round(360.0 / self.theta_b_deg))

    @property
    def m_user(self) -> int:
        return int(round(360.0 / self.theta_u_deg))

    @property
    def noise_dbm(self) -> float:
        return self.n0_dbm + self.nf_db

    @property
    def gamma_min(self) -> float:
        return float(db_to_linear(self.gamma_min_db))


@dataclass(frozen=True)
class BeamIndexing:
    beamwidth: float

    def __post_init__(self):
        _check_beamwidth(self.beamwidth, "beamwidth")

    @property
    def beam_count(self) -> int:
        return int(round(360.0 / self.beamwidth))

    @property
    def boresights(self) -> np.ndarray:
        return np.arange(self.beam_count) * self.beamwidth


@dataclass(frozen=True)
class RainModel:
    rate_mm_h: float = 0.0
    k: float = 0.124
    alpha: float = 1.061

    def __post_init__(self):
        if self.rate_mm_h < 0:
            raise ValueError("rain rate must be non-negative")

    @property
    def specific_attenuation_db_per_km(self) -> float:
        return self.k * self.rate_mm_h ** self.alpha


NO_RAIN = RainModel(0.0)


# -- scalar formulas -----------------------------------------------------------

def antenna_gain_db(misalign, beamwidth):
    """Sectorized antenna gain in dB for a signed misalignment (degrees)."""
    theta = np.asarray(beamwidth, dtype=float)
    if np.any(theta <= 0):
        raise ValueError("beamwidth must be positive")
    a = np.asarray(misalign, dtype=float)
    theta_3db = theta / 2.58
    main = 20.0 * np.log10(1.6162 / np.sin(np.radians(theta_3db / 2.0))) - 3.01 * (2.0 * a / theta_3db) ** 2
    side = -0.4111 * np.log(theta_3db) - 10.579
    out = np.where(np.abs(a) > theta / 2.0, side, main)
    return float(out) if out.ndim == 0 else out


def los_path_loss_db(r, f_c_ghz, sf=0.0):
    return 32.4 + 21.0 * np.log10(r) + 20.0 * np.log10(f_c_ghz) + sf


def path_loss_db(r, f_c_ghz, los, sf_los=0.0, sf_nlos=0.0):
    """3GPP LOS/NLOS path loss; shadow fading values are passed in, not drawn."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("distance must be positive")
    pl_los = los_path_loss_db(r, f_c_ghz, sf_los)
    pl_nlos = np.maximum(pl_los, 35.3 * np.log10(r) + 22.4 + 21.3 * np.log10(f_c_ghz) + sf_nlos)
    out = np.where(los, pl_los, pl_nlos)
    return float(out) if out.ndim == 0 else out


def rain_attenuation_db(model: RainModel, r):
    """Rain loss for a path of ``r`` meters; the specific attenuation is in dB/km."""
    r = np.asarray(r, dtype=float)
    out = model.specific_attenuation_db_per_km * r / 1000.0
    return float(out) if out.ndim == 0 else out


def assign_beams(geo_angle, indexing: BeamIndexing):
    """Nearest boresight to ``geo_angle`` and the signed misalignment ``geo - boresight``.

    A geo angle exactly between two boresights goes to the upper one, so the
    misalignment lies in ``[-theta/2, theta/2)``.
    """
    theta = indexing.beamwidth
    g = np.asarray(geo_angle, dtype=float)
    idx = np.floor((g + theta / 2.0) / theta).astype(int) % indexing.beam_count
    mis = g - idx * theta
    mis = np.where(mis >= 180.0, mis - 360.0, mis)
    mis = np.where(mis < -180.0, mis + 360.0, mis)
    if idx.ndim == 0:
        return int(idx), float(mis)
    return idx, mis


def snr_db(radio: RadioConfig, gain_bs_db, gain_user_db, path_loss, rain_db=0.0):
    """SNR in dB; transmit power is split evenly over the BS's beams."""
    return (radio.p_tx_dbm - 10.0 * math.log10(radio.m_bs) + gain_bs_db + gain_user_db
            - path_loss - rain_db - radio.noise_dbm)


def capacity_from_shares(time_share, snr, radio: RadioConfig):
    """Per-link rate ``(1 - xi) * share * W * log2(1 + snr)``; sum over BSs for the user rate."""
    return (1.0 - radio.xi) * np.asarray(time_share, dtype=float) * radio.w_hz * np.log2(1.0 + np.asarray(snr, dtype=float))


def user_capacity(x_row, snr_row, radio: RadioConfig, occupancy_row=None) -> float:
    """Capacity of one user from its share counts.

    With finite ``s`` the time share on a link is ``x/s``. With unbounded
    ``s`` a link's share is ``1/occupancy`` of its BS beam, so
    ``occupancy_row`` is required.
    """
    x = np.asarray(x_row, dtype=float)
    if radio.unbounded:
        if occupancy_row is None:
            raise ValueError("unbounded shares need the beam occupancy of each link")
        occ = np.asarray(occupancy_row, dtype=float)
        share = np.divide(np.minimum(x, 1.0), occ, out=np.zeros_like(x), where=occ > 0)
    else:
        share = x / radio.s
    return float(np.sum(capacity_from_shares(share, snr_row, radio)))


def satisfaction(capacity, r_min):
    out = np.minimum(1.0, np.asarray(capacity, dtype=float) / r_min)
    return float(out) if out.ndim == 0 else out


# -- per-link views -------------------------------------------------------------

@dataclass(frozen=True)
class LinkGeometry:
    distance_2d: float
    distance_3d: float
    geo_angle_bs_to_user: float
    geo_angle_user_to_bs: float
    bs_beam: int
    user_beam: int
    misalign_bs: float
    misalign_user: float
    los: bool


@dataclass(frozen=True)
class LinkBudget:
    geometry: LinkGeometry
    path_loss: float
    shadow_fading: float
    rain_attenuation: float
    gain_bs: float
    gain_user: float
    snr: float

    @property
    def snr_db(self) -> float:
        return float(linear_to_db(self.snr))

    @property
    def spectral_efficiency(self) -> float:
        return math.log2(1.0 + self.snr)


def link_snr(radio: RadioConfig, geometry: LinkGeometry, sf_los: float = 0.0, sf_nlos: float = 0.0,
             rain: RainModel = NO_RAIN) -> LinkBudget:
    """Full budget for a single link."""
    pl = path_loss_db(geometry.distance_3d, radio.f_c_ghz, geometry.los, sf_los, sf_nlos)
    at = rain_attenuation_db(rain, geometry.distance_3d)
    gb = antenna_gain_db(geometry.misalign_bs, radio.theta_b_deg)
    gu = antenna_gain_db(geometry.misalign_user, radio.theta_u_deg)
    value_db = snr_db(radio, gb, gu, pl, at)
    return LinkBudget(geometry, pl, sf_los if geometry.los else sf_nlos, at, gb, gu, float(db_to_linear(value_db)))


# -- vectorized link table -------------------------------------------------------

@dataclass(frozen=True)
class LinkTable:
    """Dense ``(n_users, n_bs)`` arrays describing every user-BS pair."""

    distance_2d: np.ndarray
    distance_3d: np.ndarray
    angle_bs_to_user: np.ndarray
    angle_user_to_bs: np.ndarray
    bs_beam: np.ndarray
    user_beam: np.ndarray
    misalign_bs: np.ndarray
    misalign_user: np.ndarray
    los: np.ndarray
    sf_los: np.ndarray
    sf_nlos: np.ndarray
    path_loss: np.ndarray
    rain_attenuation: np.ndarray
    gain_bs: np.ndarray
    gain_user: np.ndarray
    snr_db: np.ndarray

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            getattr(self, name).setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.snr_db.shape

    @property
    def snr(self) -> np.ndarray:
        return db_to_linear(self.snr_db)

    def geometry(self, i: int, j: int) -> LinkGeometry:
        return LinkGeometry(float(self.distance_2d[i, j]), float(self.distance_3d[i, j]),
                            float(self.angle_bs_to_user[i, j]), float(self.angle_user_to_bs[i, j]),
                            int(self.bs_beam[i, j]), int(self.user_beam[i, j]),
                            float(self.misalign_bs[i, j]), float(self.misalign_user[i, j]),
                            bool(self.los[i, j]))

    def budget(self, i: int, j: int) -> LinkBudget:
        los = bool(self.los[i, j])
        return LinkBudget(self.geometry(i, j), float(self.path_loss[i, j]),
                          float(self.sf_los[i, j] if los else self.sf_nlos[i, j]),
                          float(self.rain_attenuation[i, j]), float(self.gain_bs[i, j]),
                          float(self.gain_user[i, j]), float(db_to_linear(self.snr_db[i, j])))

    def degraded(self, radio: RadioConfig, los=None, rain: RainModel = NO_RAIN) -> "LinkTable":
        """Same geometry and shadowing draws under a different LOS mask and rain."""
        los = self.los if los is None else np.asarray(los, dtype=bool)
        return _budget_table(radio, self.distance_2d, self.distance_3d, self.angle_bs_to_user,
                             self.angle_user_to_bs, self.bs_beam, self.user_beam, self.misalign_bs,
                             self.misalign_user, los, self.sf_los, self.sf_nlos, rain)


def _budget_table(radio, d2, d3, zb, zu, bb, ub, ab, au, los, sf_los, sf_nlos, rain) -> LinkTable:
    pl = path_loss_db(d3, radio.f_c_ghz, los, sf_los, sf_nlos)
    at = np.broadcast_to(np.asarray(rain_attenuation_db(rain, d3), dtype=float), d3.shape).copy()
    gb = np.asarray(antenna_gain_db(ab, radio.theta_b_deg), dtype=float)
    gu = np.asarray(antenna_gain_db(au, radio.theta_u_deg), dtype=float)
    s = snr_db(radio, gb, gu, pl, at)
    arrays = [np.array(a) for a in (d2, d3, zb, zu, bb, ub, ab, au, los, sf_los, sf_nlos, pl, at, gb, gu, s)]
    return LinkTable(*arrays)


def build_link_table(users, layout: NetworkLayout, radio: RadioConfig, sf_los=None, sf_nlos=None,
                     los=None, rain: RainModel = NO_RAIN) -> LinkTable:
    """Link table for user positions ``users`` (shape (n, 2)) against every BS of ``layout``.

    Shadow fading arrays default to zero and ``los`` to all-LOS.
    """
    users = np.asarray(users, dtype=float).reshape(-1, 2)
    n, b = len(users), layout.n_bs
    delta = min_image(users[:, None, :] - layout.bs_positions[None, :, :], layout.torus)
    d2 = np.hypot(delta[..., 0], delta[..., 1])
    d3 = np.sqrt(d2 ** 2 + layout.height_offset ** 2)
    zb = angles_deg(delta)
    zu = angles_deg(-delta)
    bb, ab = assign_beams(zb, BeamIndexing(radio.theta_b_deg))
    ub, au = assign_beams(zu, BeamIndexing(radio.theta_u_deg))
    bb = np.asarray(bb, dtype=int).reshape(n, b)
    ub = np.asarray(ub, dtype=int).reshape(n, b)
    ab = np.asarray(ab, dtype=float).reshape(n, b)
    au = np.asarray(au, dtype=float).reshape(n, b)
    zeros = np.zeros((n, b))
    sf_los = zeros if sf_los is None else np.asarray(sf_los, dtype=float).reshape(n, b)
    sf_nlos = zeros if sf_nlos is None else np.asarray(sf_nlos, dtype=float).reshape(n, b)
    los = np.ones((n, b), dtype=bool) if los is None else np.asarray(los, dtype=bool).reshape(n, b)
    return _budget_table(radio, d2, d3, zb, zu, bb, ub, ab, au, los, sf_los, sf_nlos, rain)
