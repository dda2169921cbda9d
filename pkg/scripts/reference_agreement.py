"""Solver against the closed-form low-dimensional operators on flat and conformally flat tori."""

from dataclasses import dataclass, field

from _common import parse_config
from bgforms.verification import check_reference_agreement


@dataclass
class Config:
    """Reference agreement experiment; geometries are presets from bgforms.verification."""

    geometries: list = field(default_factory=lambda: ["conf4", "flat4"])
    seed: int = 0
    forms: int = 1


def main(cfg: Config) -> None:
    for name in cfg.geometries:
        n = 4 if name.endswith("4") or "4_" in name else 6
        rep = check_reference_agreement(n, name, cfg.seed, forms=cfg.forms)
        print(f"== {rep.scenario} ({'pass' if rep.passed else 'FAIL'})")
        for r in rep.results:
            flag = "ok  " if r.passed else "FAIL"
            print(f"  {flag} {r.name:<40} {r.residual:.3e}  tol {r.tolerance:.0e}  {r.note}")


if __name__ == "__main__":
    main(parse_config(Config))
