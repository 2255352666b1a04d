"""Independent American-put binomial pricer used as a cross-check oracle.

Classic array rollback on a multiplicative stock tree.  The lattice solver
prices the same discrete model when the put scenario is built by
``american_put_scenario``: zero default intensity, driver -r*y, obstacle and
terminal equal to the put payoff on spot*exp(sigma*w).  Matching that model
means symmetric branch probabilities and a per-step discount implied by the
time-stepping scheme: 1 - r*dt for the explicit scheme, 1/(1 + r*dt) for the
implicit one.
"""

from __future__ import annotations

import numpy as np

from .driver import DriverForm, TransformedDriver, parse_driver
from .lattice import IntensitySpec
from .solver import Scenario, Scheme


def crr_american_put(
    spot: float,
    strike: float,
    rate: float,
    sigma: float,
    horizon: float,
    n_steps: int,
    scheme: Scheme = Scheme.EXPLICIT,
) -> float:
    """Price an American put by backward rollback on a CRR stock tree."""
    dt = horizon / n_steps
    up = np.exp(sigma * np.sqrt(dt))
    down = 1.0 / up
    q = 0.5
    disc = (1.0 - rate * dt) if scheme is Scheme.EXPLICIT else 1.0 / (1.0 + rate * dt)
    j = np.arange(n_steps + 1)
    prices = spot * up**j * down ** (n_steps - j)
    values = np.maximum(strike - prices, 0.0)
    for k in range(n_steps - 1, -1, -1):
        j = np.arange(k + 1)
        prices = spot * up**j * down ** (k - j)
        cont = disc * (q * values[1 : k + 2] + (1.0 - q) * values[: k + 1])
        values = np.maximum(cont, np.maximum(strike - prices, 0.0))
    return float(values[0])


def american_put_scenario(
    spot: float,
    strike: float,
    rate: float,
    sigma: float,
    horizon: float,
    n_steps: int,
    scheme: Scheme = Scheme.EXPLICIT,
) -> Scenario:
    """Zero-intensity put scenario whose exact price the CRR oracle reproduces."""
    payoff = f"max({strike!r} - {spot!r}*exp({sigma!r}*w), 0)"
    return Scenario(
        horizon=horizon,
        n_steps=n_steps,
        intensity=IntensitySpec.constant(0.0, n_steps),
        delta_steps=0,
        driver=TransformedDriver(base=parse_driver(f"-{rate!r}*y"), form=DriverForm.H),
        obstacle=parse_driver(payoff),
        terminal=parse_driver(payoff),
        scheme=scheme,
        oracle_params={
            "spot": spot,
            "strike": strike,
            "rate": rate,
            "sigma": sigma,
        },
        name="american-put",
    )
