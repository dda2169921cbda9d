"""Dimension-6 fourth-order operators: closed forms versus solver versus the change-law oracle.

The oracle builds Q1 and Q0(1) on the conformally flat torus from flat-torus operators
only, through Q_hat w = exp(-4 phi)(Q1 w + 4 L1(phi w)) and Q_hat_0(1) = 6 exp(-6 phi) L0(phi).
"""

from dataclasses import dataclass

import numpy as np

from _common import parse_config
from bgforms.exterior import exterior_derivative
from bgforms.fields import FormField, ScalarField, random_lowfreq_form
from bgforms.reference import ref_dim6
from bgforms.solver import Geometry, operator_Gk, operator_Lk, operator_Qk
from bgforms.verification import GEOMETRIES


@dataclass
class Config:
    """Prefactor and bracket study for Q1, G1, L0, Q0 at n = 6."""

    seed: int = 0
    geometry: str = "conf6_fine"


def rel(a, b):
    return (a - b).max_abs() / max(a.max_abs(), b.max_abs())


def main(cfg: Config) -> None:
    spec = GEOMETRIES[cfg.geometry]
    conf = spec.build()
    flat = Geometry.flat(spec.grid)
    cv, grid = conf.curvature, spec.grid
    phi = spec.phi.sample(grid)
    c1 = exterior_derivative(random_lowfreq_form(grid, 0, 2, cfg.seed))
    w1 = random_lowfreq_form(grid, 1, 2, cfg.seed + 1)
    w0 = random_lowfreq_form(grid, 0, 2, cfg.seed + 2)
    q1 = operator_Qk(c1, conf)
    oracle = (operator_Qk(c1, flat) + operator_Lk(c1 * phi, flat) * 4.0) * ScalarField(grid, np.exp(-4 * phi.values))
    print(f"Q1 solver vs change-law oracle       {rel(q1, oracle):.3e}")
    sols = {"Q1": (q1, c1), "G1": (operator_Gk(w1, conf), w1), "L0": (operator_Lk(w0, conf), w0)}
    for name, (val, w) in sols.items():
        for pf in ("literal", "consistent"):
            print(f"{name} solver vs closed form ({pf:<10}) {rel(val, ref_dim6(name, w, cv, pf)):.3e}")
    one = FormField(grid, 0, np.ones((1,) + (1,) * 6))
    q0 = operator_Qk(one, conf)
    oracle0 = operator_Lk(FormField(grid, 0, phi.values[None]), flat) * ScalarField(grid, 6 * np.exp(-6 * phi.values))
    print(f"Q0(1) solver vs change-law oracle    {rel(q0, oracle0):.3e}")
    print(f"Q0(1) solver vs closed form          {rel(q0, ref_dim6('Q0', one, cv)):.3e}")


if __name__ == "__main__":
    main(parse_config(Config))
