"""Theta(U, L) for a few regions and the mass left after cutting U out of the face."""
import math
import warnings
from dataclasses import dataclass

from horomass import evaluators as ev
from horomass import metrics


@dataclass
class Config:
    k: float = 1.5
    Ls: tuple = (2.0, 3.0, 4.0)


def main(cfg: Config):
    model = metrics.ads_schwarzschild(3, 1.0)
    sigma = lambda L: math.exp(cfg.k * L)  # noqa: E731
    regions = {
        "half-space": ev.RegionSpec.halfspace(0, 1.0),
        "cone 0.3": ev.RegionSpec.cone((0.0, 0.0), 0.3),
        "off-centre cone": ev.RegionSpec.cone((0.5, -0.2), 0.6),
        "slab": ev.RegionSpec.slab(1, -0.1, 0.1),
    }
    L = cfg.Ls[-1]
    full = ev.face_mass(model, L, sigma(L)).value
    print(f"face mass at L={L}: {full:.8g}; threshold exponent q-n = {model.q - model.n:g}")
    for name, reg in regions.items():
        expo = ev.theta_decay_exponent(reg, cfg.Ls, sigma)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            kept = ev.excluded_region_mass(model, reg, L, sigma).value
        print(f"{name:>16}: Theta exponent {expo:7.3f}, kept/face {kept / full:.6f}")


if __name__ == "__main__":
    main(Config())
