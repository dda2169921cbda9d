"""Critical L_{n/2-1} against delta d / 2 on flat tori, with timing."""

import time
from dataclasses import dataclass, field

from _common import parse_config
from bgforms.exterior import codifferential, exterior_derivative
from bgforms.fields import TorusGrid, random_lowfreq_form
from bgforms.solver import Geometry, operator_Lk


@dataclass
class Config:
    """Flat critical-L experiment."""

    dims: list = field(default_factory=lambda: [4, 6])
    size4: int = 16
    size6: int = 8
    forms: int = 10
    max_mode: int = 3
    seed: int = 0


def main(cfg: Config) -> None:
    for n in cfg.dims:
        size = cfg.size4 if n == 4 else cfg.size6
        geom = Geometry.flat(TorusGrid(n, (size,) * n))
        k = n // 2 - 1
        t0 = time.perf_counter()
        worst = 0.0
        for i in range(cfg.forms):
            w = random_lowfreq_form(geom.grid, k, cfg.max_mode, cfg.seed + i, strict=False)
            want = codifferential(exterior_derivative(w), geom.metric) * 0.5
            got = operator_Lk(w, geom)
            worst = max(worst, (got - want).max_abs() / want.max_abs())
        print(f"n={n} grid={size}^{n} k={k} forms={cfg.forms} max_rel_err={worst:.3e} "
              f"seconds={time.perf_counter() - t0:.1f}")


if __name__ == "__main__":
    main(parse_config(Config))
