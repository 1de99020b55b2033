"""Mass vector of a tilted bump before and after a rotation of the chart."""
from dataclasses import dataclass

import numpy as np

from horomass import evaluators as ev
from horomass import metrics


@dataclass
class Config:
    amplitude: float = 0.1
    axis: tuple = (0.6, 0.0, 0.8)
    radii: tuple = (40.0, 80.0, 160.0)
    angle: float = 0.7


def rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def main(cfg: Config):
    model = metrics.angular_bump(3, cfg.amplitude, 3.0, np.array(cfg.axis))
    for label, m in (("original", model), ("rotated", model.rotated(rotation(cfg.angle)))):
        mv = ev.mass_vector(m, cfg.radii)
        print(f"{label:>9}: p0 {mv.p0:.8f}, p {np.array2string(mv.p, precision=6)}, "
              f"p0^2 - |p|^2 = {mv.minkowski_sq:.8f}, timelike={not mv.positivity_violated}")


if __name__ == "__main__":
    main(Config())
