"""Synthetic day scenarios on a hexagonal patch.

Requests leaving cell ``i`` at step ``t`` are Poisson with rate
``base_rate * profile(t) * hotspot(i) * surge(t, i)``.  Each request picks a
destination uniformly among cells within ``max_trip`` hops, lasts
``max(1, distance)`` steps and costs ``price_base + price_per_hex * distance``
rounded to cents.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .grid import build_hex_grid, hex_distance
from .simulator import RideRequest, Scenario

PROFILES = ("flat", "commute", "evening")


def time_profile(name: str, T: int) -> np.ndarray:
    """Positive per-step multipliers with mean 1 (``flat`` is all ones)."""
    t = (np.arange(T) + 0.5) / T
    if name == "flat":
        w = np.ones(T)
    elif name == "commute":
        w = 0.3 + np.exp(-(((t - 0.35) / 0.06) ** 2)) + np.exp(-(((t - 0.75) / 0.07) ** 2))
    elif name == "evening":
        w = 0.3 + 1.5 * np.exp(-(((t - 0.8) / 0.1) ** 2))
    else:
        raise ValueError(f"unknown time profile {name!r}; expected one of {PROFILES}")
    return w / w.mean()


@dataclass
class Hotspot:
    q: int
    r: int
    weight: float = 3.0
    spread: int = 1  # cells within this many hops get the full weight

    def __post_init__(self):
        if self.weight < 0 or self.spread < 0:
            raise ValueError("hotspot weight and spread must be nonnegative")


@dataclass
class Surge:
    step: int
    multiplier: float
    duration: int = 1
    cells: list[tuple[int, int]] | None = None  # axial coords; None = everywhere

    def __post_init__(self):
        if self.multiplier < 0 or self.duration < 1:
            raise ValueError("surge multiplier must be >= 0 and duration >= 1")


@dataclass
class ScenarioGenSpec:
    radius: int = 2
    T: int = 144
    blocked: list[tuple[int, int]] = field(default_factory=list)
    base_rate: float = 0.2
    profile: str = "flat"
    hotspots: list[Hotspot] = field(default_factory=list)
    surges: list[Surge] = field(default_factory=list)
    max_trip: int | None = None
    price_base: float = 3.0
    price_per_hex: float = 1.0
    num_drivers: int = 20
    placement: str = "uniform"  # uniform | demand | center | corner
    kappa: float = 0.5
    online_rate: float = 0.0
    offline_rate: float = 0.0
    allow_online_offline: bool = False

    def validate(self) -> None:
        if self.radius < 0 or self.T < 1:
            raise ValueError("radius must be >= 0 and T >= 1")
        for name in ("base_rate", "online_rate", "offline_rate", "price_base", "price_per_hex", "kappa"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite nonnegative number, got {v}")
        if self.num_drivers < 0:
            raise ValueError("num_drivers must be >= 0")
        if self.placement not in ("uniform", "demand", "center", "corner"):
            raise ValueError(f"unknown placement rule {self.placement!r}")
        if self.max_trip is not None and self.max_trip < 0:
            raise ValueError("max_trip must be >= 0")
        time_profile(self.profile, self.T)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioGenSpec":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown generator fields {sorted(extra)}")
        data["hotspots"] = [Hotspot(**h) for h in data.get("hotspots", [])]
        data["surges"] = [
            Surge(**{**s, "cells": [tuple(c) for c in s["cells"]] if s.get("cells") is not None else None})
            for s in data.get("surges", [])
        ]
        data["blocked"] = [tuple(c) for c in data.get("blocked", [])]
        return cls(**data)


def rate_surface(spec: ScenarioGenSpec, grid) -> np.ndarray:
    """``(T, n)`` Poisson means of departures per cell and step."""
    n = grid.n
    spatial = np.ones(n)
    for h in spec.hotspots:
        for i, c in enumerate(grid.coords):
            if hex_distance(c, (h.q, h.r)) <= h.spread:
                spatial[i] = max(spatial[i], h.weight)
    rates = spec.base_rate * np.outer(time_profile(spec.profile, spec.T), spatial)
    for s in spec.surges:
        cells = range(n) if s.cells is None else [grid.index_of(c) for c in s.cells]
        rows = slice(s.step, min(spec.T, s.step + s.duration))
        for i in cells:
            rates[rows, i] *= s.multiplier
    return rates


def start_corner(grid) -> tuple[int, int]:
    """First cell in index order at maximal distance from the origin."""
    far = max(hex_distance(c, (0, 0)) for c in grid.coords)
    return next(c for c in grid.coords if hex_distance(c, (0, 0)) == far)


def _place_drivers(spec: ScenarioGenSpec, grid, rates, rng) -> np.ndarray:
    n = grid.n
    if spec.placement == "uniform":
        w = np.ones(n)
    elif spec.placement == "demand":
        w = rates.sum(axis=0)
        if w.sum() == 0:
            w = np.ones(n)
    elif spec.placement == "center":
        w = np.array([1.0 if hex_distance(c, (0, 0)) <= 0 else 0.0 for c in grid.coords])
        if w.sum() == 0:
            w = np.ones(n)
    else:  # corner
        corner = start_corner(grid)
        w = np.array([1.0 if hex_distance(c, corner) <= 1 else 0.0 for c in grid.coords])
    return rng.multinomial(spec.num_drivers, w / w.sum()).astype(np.int64)


def generate_scenario(spec: ScenarioGenSpec, seed: int) -> Scenario:
    """Reproducible scenario: the same ``(spec, seed)`` always yields the same requests."""
    spec.validate()
    grid = build_hex_grid(spec.radius, spec.blocked)
    n, T = grid.n, spec.T
    rng = np.random.default_rng(seed)
    rates = rate_surface(spec, grid)
    if (rates < 0).any() or not np.isfinite(rates).all():
        raise ValueError("demand rates must be finite and nonnegative")
    counts = rng.poisson(rates)
    dist = grid.distance_matrix()
    reach = [
        np.flatnonzero(dist[i] <= spec.max_trip) if spec.max_trip is not None else np.arange(n)
        for i in range(n)
    ]
    requests = []
    for t in range(T):
        for i in range(n):
            for _ in range(int(counts[t, i])):
                j = int(rng.choice(reach[i]))
                hops = int(dist[i, j])
                price = round(spec.price_base + spec.price_per_hex * hops, 2)
                requests.append(RideRequest(i, j, t, t + max(1, hops), price, len(requests)))
    drivers = _place_drivers(spec, grid, rates, rng)
    online = rng.poisson(spec.online_rate, (T, n)).astype(np.int64)
    offline = rng.poisson(spec.offline_rate, (T, n)).astype(np.int64)
    return Scenario(
        grid,
        T,
        requests,
        drivers,
        spec.kappa,
        online,
        offline,
        spec.allow_online_offline,
    )


def surge_spec(
    T: int = 40,
    surge_step: int = 30,
    surge_steps: int = 8,
    radius: int = 2,
    surge_rate: float = 1.5,
    **overrides,
) -> ScenarioGenSpec:
    """Quiet day with a multi-step demand surge in the corner opposite the drivers.

    Drivers start around one corner; from ``surge_step`` on, the cells
    around the far corner receive ``surge_rate`` departures per step for
    ``surge_steps`` steps.  Trips stay inside their cell.
    """
    base = dict(
        radius=radius,
        T=T,
        base_rate=0.05,
        num_drivers=10,
        placement="corner",
        kappa=0.1,
        price_base=4.0,
        price_per_hex=1.0,
        max_trip=0,
    )
    base.update(overrides)
    spec = ScenarioGenSpec(**base)
    mult = surge_rate / spec.base_rate if spec.base_rate > 0 else 0.0
    grid = build_hex_grid(spec.radius, spec.blocked)
    q, r = start_corner(grid)
    area = [c for c in grid.coords if hex_distance(c, (-q, -r)) <= 1]
    spec.surges = list(spec.surges) + [Surge(surge_step, mult, surge_steps, area)]
    return spec


def poisson_count_bounds(spec: ScenarioGenSpec, sigmas: float = 4.0) -> tuple[float, float, float]:
    """Expected request total of ``spec`` and a ``sigmas``-wide band around it."""
    grid = build_hex_grid(spec.radius, spec.blocked)
    mu = float(rate_surface(spec, grid).sum())
    half = sigmas * math.sqrt(mu)
    return mu, mu - half, mu + half


def total_requests(scenarios: Sequence[Scenario]) -> list[int]:
    return [len(s.requests) for s in scenarios]
