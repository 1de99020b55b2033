"""Horosphere, sphere and face masses of AdS-Schwarzschild as the surface recedes."""
import argparse
import math
from dataclasses import dataclass

from horomass import evaluators as ev
from horomass import metrics
from horomass.massform import StaticPotential


@dataclass
class Config:
    n: int = 3
    m: float = 1.0
    Ls: tuple = (3.0, 4.0, 5.0, 6.0)
    radii: tuple = (25.0, 50.0, 100.0, 200.0)
    sigma_k: float = 1.5


def main(cfg: Config):
    model = metrics.ads_schwarzschild(cfg.n, cfg.m)
    target = 2 * (cfg.n - 1) * ev.sphere_area(cfg.n - 1) * cfg.m
    e1 = [1.0] + [0.0] * (cfg.n - 1)
    print(f"target 2(n-1)|S^(n-1)|m = {target:.10g}")
    print(f"{'L':>6} {'horosphere':>16} {'tail':>10} {'face':>16}")
    horo = []
    for L in cfg.Ls:
        h = ev.horosphere_mass(model, e1, L)
        f = ev.face_mass(model, L, math.exp(cfg.sigma_k * L))
        horo.append(h)
        print(f"{L:6.2f} {h.value:16.10f} {h.tail_bound:10.2e} {f.value:16.10f}")
    fit = ev.extrapolate_readings("L", cfg.Ls, horo)
    print(f"horosphere limit {fit.limit:.10g} +- {fit.uncertainty:.2e}  (rate {fit.rate:.3g})")
    print(f"{'r':>8} {'sphere':>16} {'ah_geometric':>16}")
    for r in cfg.radii:
        s = ev.sphere_mass_integral(model, StaticPotential.t(cfg.n), r).value
        a = ev.ah_geometric(model, r)["p0"].value
        print(f"{r:8.1f} {s:16.10f} {a:16.10f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--m", type=float, default=1.0)
    a = p.parse_args()
    main(Config(n=a.n, m=a.m))
