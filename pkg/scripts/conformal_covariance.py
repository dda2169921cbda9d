"""Change laws of L_k, G_k, Q_k under h -> exp(2 phi) h, solver against solver."""

from dataclasses import dataclass, field

from _common import parse_config
from bgforms.verification import PHI4, PHI6, check_conformal_covariance


@dataclass
class Config:
    """Covariance experiment for one dimension."""

    n: int = 4
    degrees: list = field(default_factory=lambda: [0, 1])
    seed: int = 0
    constant: float = 0.0  # nonzero: use the constant conformal factor phi = constant


def main(cfg: Config) -> None:
    if cfg.constant:
        phi = [{"amplitude": cfg.constant, "mode": [0] * cfg.n, "phase": "cos"}]
        sizes = (8,) * cfg.n
    else:
        phi, sizes = (PHI4 if cfg.n == 4 else PHI6), None
    for k in cfg.degrees:
        rep = check_conformal_covariance(cfg.n, k, phi, cfg.seed, sizes=sizes)
        print(f"== {rep.scenario}")
        for r in rep.results:
            print(f"  {'ok  ' if r.passed else 'FAIL'} {r.name:<62} {r.residual:.3e}  tol {r.tolerance:.0e}")


if __name__ == "__main__":
    main(parse_config(Config))
