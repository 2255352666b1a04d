"""Shared scenario builders for the test suite."""

from __future__ import annotations

import numpy as np

from rabsde import IntensitySpec
from rabsde.driver import DriverForm, TransformedDriver, parse_driver
from rabsde.solver import Scenario, Scheme


def make_scenario(
    *,
    horizon: float = 1.0,
    n_steps: int = 4,
    lam: float | list[float] = 0.5,
    delta_steps: int = 0,
    driver: str = "0",
    form: str = "M",
    obstacle: str = "-1e9",
    terminal: str = "w",
    scheme: str = "explicit",
    implicit_tol: float = 1e-13,
) -> Scenario:
    if isinstance(lam, (int, float)):
        intensity = IntensitySpec.constant(float(lam), n_steps)
    else:
        intensity = IntensitySpec(values=tuple(lam), lambda_max=max(lam))
    return Scenario(
        horizon=horizon,
        n_steps=n_steps,
        intensity=intensity,
        delta_steps=delta_steps,
        driver=TransformedDriver(base=parse_driver(driver), form=DriverForm(form)),
        obstacle=parse_driver(obstacle),
        terminal=parse_driver(terminal),
        scheme=Scheme(scheme),
        implicit_tol=implicit_tol,
    )


def _c(rng: np.random.Generator, lo: float, hi: float) -> float:
    return round(float(rng.uniform(lo, hi)), 3)


def random_scenario(
    rng: np.random.Generator,
    *,
    n_steps: int | None = None,
    lam: float | None = None,
    delta_steps: int | None = None,
    scheme: str = "explicit",
    form: str = "M",
    binding: bool = True,
    max_coeff: float = 0.4,
) -> Scenario:
    """Random scenario whose terminal dominates the horizon obstacle by
    construction; obstacles shadow the terminal shape so reflection binds on
    a decent fraction of draws when the driver drifts downward."""
    n = int(rng.integers(2, 11)) if n_steps is None else n_steps
    lam_v = round(float(rng.uniform(0.05, 0.8)), 3) if lam is None else lam
    delta = int(rng.integers(0, 3)) if delta_steps is None else delta_steps
    a = _c(rng, -max_coeff, max_coeff if not binding else 0.0)
    b = _c(rng, -max_coeff, max_coeff)
    d = _c(rng, -0.3 * lam_v, 0.3 * lam_v) if lam_v > 0 else 0.0
    e0 = _c(rng, -0.2, 0.2)
    terms = [f"{a!r}*y", f"{b!r}*z", f"{e0!r}"]
    if lam_v > 0:
        terms.insert(1, f"{d!r}*u")
    if delta > 0:
        terms.insert(1, f"{_c(rng, -0.2, 0.2)!r}*ey")
    driver = " + ".join(terms).replace("+ -", "- ")
    q0 = _c(rng, -0.5, 0.5)
    q1 = _c(rng, -0.6, 0.6)
    q2 = _c(rng, -0.5, 0.5)
    terminal = f"{q0!r} + {q1!r}*w + {q2!r}*h"
    if binding:
        m0 = _c(rng, 0.02, 0.25)
        m1 = _c(rng, 0.0, m0 / 1.0)
        obstacle = f"{q0 - m0!r} + {m1!r}*t + {q1!r}*w + {q2!r}*h"
    else:
        obstacle = "-1e9"
    return make_scenario(
        horizon=1.0,
        n_steps=n,
        lam=lam_v,
        delta_steps=delta,
        driver=driver,
        form=form,
        obstacle=obstacle,
        terminal=terminal,
        scheme=scheme,
    )
