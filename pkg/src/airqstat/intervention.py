"""Difference-in-difference OLS estimation of the lockdown effect per
activity zone, with standard errors, t statistics, and p-values."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sla
from scipy import stats

from .errors import EmptyCellError, NoDataError, TooFewRowsError
from .model import ActivityZone, Period, PeriodSpec, StationPanel, period_of


@dataclass(frozen=True, eq=False)
class DidPanel:
    """Rows of (outcome, treated-time indicator, group indicator)."""

    outcome: np.ndarray
    treated_time: np.ndarray
    group: np.ndarray
    station_ids: Optional[tuple[str, ...]] = None
    dates: Optional[tuple[date, ...]] = None

    def __post_init__(self):
        y = np.asarray(self.outcome, dtype=float)
        i = np.asarray(self.treated_time)
        z = np.asarray(self.group)
        if not (y.size == i.size == z.size):
            raise ValueError("outcome, treated_time, and group must align")
        if not np.all(np.isfinite(y)):
            raise ValueError("outcomes must be finite")
        if not (np.isin(i, (0, 1)).all() and np.isin(z, (0, 1)).all()):
            raise ValueError("treated_time and group must be 0/1")
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "treated_time", i.astype(float))
        object.__setattr__(self, "group", z.astype(float))

    @property
    def n(self) -> int:
        return self.outcome.size


@dataclass(frozen=True)
class DidFit:
    """Four OLS coefficients for [1, I, Z, I*Z] with inference."""

    beta: tuple[float, float, float, float]
    se: tuple[float, float, float, float]
    t_stat: tuple[float, float, float, float]
    p_value: tuple[float, float, float, float]
    n: int
    dof: int
    residual_variance: float

    def to_dict(self) -> dict:
        return {
            "beta": list(self.beta),
            "se": list(self.se),
            "t": list(self.t_stat),
            "p": list(self.p_value),
            "n": self.n,
            "dof": self.dof,
            "residual_variance": self.residual_variance,
        }


def _signed_inf(value: float) -> float:
    if value > 0:
        return float("inf")
    if value < 0:
        return float("-inf")
    return 0.0


def fit_did(panel: DidPanel, cluster: Optional[Sequence] = None) -> DidFit:
    """OLS on the saturated 2x2 design via QR factorization.

    By default, homoskedastic standard errors come from the residual
    variance times the diagonal of (X'X)^-1 computed from the R factor, and
    p-values are two-sided under a t distribution with n - 4 degrees of
    freedom. By the saturated design's algebra, beta_3 equals the double
    difference of cell means.

    Passing ``cluster`` labels switches to CR1 cluster-robust standard
    errors with G - 1 inference degrees of freedom (reported in ``dof``).
    """
    n = panel.n
    if n < 5:
        raise TooFewRowsError(f"need at least 5 rows, got {n}")
    i, z = panel.treated_time, panel.group
    for iv in (0.0, 1.0):
        for zv in (0.0, 1.0):
            if not np.any((i == iv) & (z == zv)):
                raise EmptyCellError(f"design cell (I={int(iv)}, Z={int(zv)}) is empty")
    x = np.column_stack([np.ones(n), i, z, i * z])
    y = panel.outcome
    q, r = np.linalg.qr(x)
    beta = sla.solve_triangular(r, q.T @ y)
    resid = y - x @ beta
    dof = n - 4
    residual_variance = float(resid @ resid) / dof
    r_inv = sla.solve_triangular(r, np.eye(4))
    xtx_inv = r_inv @ r_inv.T
    if cluster is None:
        se = np.sqrt(residual_variance * np.diag(xtx_inv))
    else:
        labels = np.asarray(cluster)
        if labels.size != n:
            raise ValueError("cluster labels must align with panel rows")
        groups = np.unique(labels)
        n_groups = groups.size
        if n_groups < 2:
            raise ValueError("need at least 2 clusters")
        meat = np.zeros((4, 4))
        for g in groups:
            member = labels == g
            score = x[member].T @ resid[member]
            meat += np.outer(score, score)
        correction = (n_groups / (n_groups - 1)) * ((n - 1) / (n - 4))
        cov = correction * xtx_inv @ meat @ xtx_inv
        se = np.sqrt(np.diag(cov))
        dof = n_groups - 1
    t_stat = np.empty(4)
    p_value = np.empty(4)
    for k in range(4):
        if se[k] > 0:
            t_stat[k] = beta[k] / se[k]
            p_value[k] = 2.0 * stats.t.sf(abs(t_stat[k]), dof)
        else:
            # noiseless fit: the coefficient is known exactly
            t_stat[k] = _signed_inf(beta[k])
            p_value[k] = 0.0 if beta[k] != 0 else 1.0
    return DidFit(
        beta=tuple(float(b) for b in beta),
        se=tuple(float(s) for s in se),
        t_stat=tuple(float(t) for t in t_stat),
        p_value=tuple(float(p) for p in p_value),
        n=n,
        dof=dof,
        residual_variance=residual_variance,
    )


def build_did_panel(
    panel: StationPanel,
    pollutant: str,
    period: PeriodSpec,
    zone: ActivityZone,
) -> DidPanel:
    """Daily rows over the BL and DL windows: I = 1 during lockdown and
    Z = 1 for the named zone, every other station forming the control."""
    members = {st.id for st in panel.stations_in_zone(zone)}
    if not members:
        raise NoDataError(f"no stations in zone {zone.value}")
    outcome: list[float] = []
    treated: list[int] = []
    group: list[int] = []
    ids: list[str] = []
    days: list[date] = []
    for obs in panel.observations:
        window = period_of(obs.date, period)
        if window not in (Period.BL, Period.DL):
            continue
        value = obs.value(pollutant)
        if value is None:
            continue
        outcome.append(value)
        treated.append(1 if window is Period.DL else 0)
        group.append(1 if obs.station_id in members else 0)
        ids.append(obs.station_id)
        days.append(obs.date)
    if not outcome:
        raise NoDataError("no observations in the BL/DL windows")
    treated_arr = np.array(treated)
    if not (treated_arr == 0).any() or not (treated_arr == 1).any():
        raise NoDataError("need data in both the BL and DL windows")
    return DidPanel(
        outcome=np.array(outcome),
        treated_time=treated_arr,
        group=np.array(group),
        station_ids=tuple(ids),
        dates=tuple(days),
    )


def did_by_zone(
    panel: StationPanel,
    pollutant: str,
    period: PeriodSpec,
    zone: ActivityZone,
    cluster_by_station: bool = False,
) -> DidFit:
    """Lockdown intervention estimate for one zone against all others."""
    did_panel = build_did_panel(panel, pollutant, period, zone)
    cluster = did_panel.station_ids if cluster_by_station else None
    return fit_did(did_panel, cluster=cluster)
