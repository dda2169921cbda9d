"""Exact normalization constants c_k^l and c_k and the flat principal-part constants."""

from dataclasses import dataclass, field

from _common import parse_config
from bgforms.reference import ConstantTable, principal_constant


@dataclass
class Config:
    """Dimensions to tabulate."""

    dims: list = field(default_factory=lambda: [4, 6, 8])


def main(cfg: Config) -> None:
    print(f"{'n':>2} {'k':>2} {'l':>2} {'c_k^l':>12} {'c_k':>12} {'L_k^l principal pair':>28}")
    for n in cfg.dims:
        for row in ConstantTable(n).rows():
            a, b = principal_constant("Lell", n, row["k"], row["ell"])
            ck = "" if row["c_k"] is None else str(row["c_k"])
            print(f"{n:>2} {row['k']:>2} {row['ell']:>2} {str(row['c_k_ell']):>12} {ck:>12} {str(a) + ', ' + str(b):>28}")


if __name__ == "__main__":
    main(parse_config(Config))
