"""Command-line driver: mass sweeps, cylinder reports, Theta sweeps and the self-test."""
from __future__ import annotations

import argparse
import io
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import evaluators as ev
from . import metrics
from .errors import ConfigError, HoromassError, ValidationError
from .massform import StaticPotential
from .quadrature import QuadratureRule, RuleKind, sphere_area

# ----------------------------------------------------------------- config

_STR, _INT, _FLOAT, _LIST, _BOOL = "str", "int", "float", "list", "bool"

SCHEMA = {
    "model.name": (_STR, "ads"),
    "model.n": (_INT, 3),
    "model.m": (_FLOAT, 1.0),
    "model.q": (_FLOAT, None),
    "model.amplitude": (_FLOAT, 0.1),
    "model.width": (_FLOAT, 1.0),
    "model.axis": (_LIST, None),
    "model.scale": (_FLOAT, 1.0),
    "model.r_min": (_FLOAT, 1.0),
    "evaluator.name": (_STR, "horosphere"),
    "evaluator.direction": (_LIST, None),
    "evaluator.potential": (_STR, "t"),
    "sweep.L": (_LIST, None),
    "sweep.r": (_LIST, None),
    "sweep.sigma_k": (_FLOAT, 1.5),
    "sweep.rho_max": (_FLOAT, None),
    "rule.radial_order": (_INT, 16),
    "rule.angular_order": (_INT, None),
    "region.kind": (_STR, "halfspace"),
    "region.axis": (_INT, 0),
    "region.sign": (_FLOAT, 1.0),
    "region.apex": (_LIST, None),
    "region.angle": (_FLOAT, 0.5),
    "region.lo": (_FLOAT, 0.0),
    "region.hi": (_FLOAT, 1.0),
    "region.complement": (_BOOL, False),
    "output.csv": (_STR, None),
    "output.svg": (_STR, None),
    "output.normalize": (_BOOL, False),
    "run.threads": (_INT, 1),
}
# components of an expression perturbation, e.g. perturbation.h11 = 0.1*r**-5
_COMPONENT_KEY = re.compile(r"^perturbation\.h(\d)(\d)$")

MODELS = ("ads", "hyperbolic", "flat", "schwarzschild-af", "bump", "scaled-ads", "expression")
EVALUATORS = ("horosphere", "face", "sphere", "ah", "adm", "adm-geometric")
REGIONS = ("full", "empty", "halfspace", "cone", "slab")


def _fmt(x) -> str:
    return f"{x:.17g}"


def _parse_value(key: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == _STR:
            return raw
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _BOOL:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        return tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None


def _render_value(kind: str, v) -> str:
    if kind == _LIST:
        return ",".join(_fmt(x) for x in v)
    if kind == _FLOAT:
        return _fmt(v)
    if kind == _BOOL:
        return "true" if v else "false"
    return str(v)


@dataclass
class ExperimentConfig:
    """Flat dotted-key configuration; only explicitly set keys are stored."""

    values: dict = field(default_factory=dict)
    components: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cfg = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            cfg.set(key, raw)
        return cfg

    def set(self, key: str, raw: str):
        if _COMPONENT_KEY.match(key):
            self.components[key] = raw.strip()
            return
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = _parse_value(key, SCHEMA[key][0], raw)

    def get(self, key: str):
        return self.values.get(key, SCHEMA[key][1])

    def to_text(self) -> str:
        """Normalized form: sorted keys, canonical number formatting."""
        lines = [f"{k} = {_render_value(SCHEMA[k][0], self.values[k])}" for k in sorted(self.values)]
        lines += [f"{k} = {self.components[k]}" for k in sorted(self.components)]
        return "\n".join(lines) + "\n"

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.to_text() == other.to_text()


# ----------------------------------------------------------- builders

def build_model(cfg: ExperimentConfig) -> metrics.MetricModel:
    name, n = cfg.get("model.name"), cfg.get("model.n")
    if name not in MODELS:
        raise ConfigError(f"model.name: unknown model {name!r} (choose from {', '.join(MODELS)})")
    try:
        if name == "ads":
            return metrics.ads_schwarzschild(n, cfg.get("model.m"))
        if name == "hyperbolic":
            return metrics.hyperbolic_background(n)
        if name == "flat":
            return metrics.euclidean_background(n)
        if name == "schwarzschild-af":
            if n != 3:
                raise ConfigError("model.n: schwarzschild-af is three-dimensional")
            return metrics.schwarzschild_af(cfg.get("model.m"))
        if name == "bump":
            q = cfg.get("model.q")
            return metrics.angular_bump(n, cfg.get("model.amplitude"), float(n) if q is None else q,
                                        cfg.get("model.axis"), cfg.get("model.width"), cfg.get("model.r_min"))
        if name == "scaled-ads":
            return metrics.custom_perturbation(metrics.PerturbationSpec(
                "scaled_ads", n, None, {"m": cfg.get("model.m"), "scale": cfg.get("model.scale")}))
        comps = {k.split(".", 1)[1]: v for k, v in cfg.components.items()}
        if not comps:
            raise ConfigError("model.name = expression needs perturbation.hIJ entries")
        return metrics.custom_perturbation(metrics.PerturbationSpec(
            "expression", n, cfg.get("model.q"), {"components": comps, "r_min": cfg.get("model.r_min")}))
    except ValidationError as exc:
        raise ConfigError(f"model: {exc}") from exc


def _rule(cfg, kind):
    ang = cfg.get("rule.angular_order")
    if ang is None:
        ang = 32 if kind is RuleKind.SPHERE_PRODUCT else 16
    return QuadratureRule(kind, cfg.get("rule.radial_order"), ang)


def _direction(cfg, n):
    d = cfg.get("evaluator.direction")
    if d is None:
        return np.eye(n)[0]
    if len(d) != n:
        raise ConfigError(f"evaluator.direction: needs {n} components")
    d = np.asarray(d)
    return d / np.linalg.norm(d)


def _potential(cfg, n):
    name = cfg.get("evaluator.potential")
    if name == "t":
        return StaticPotential.t(n)
    m = re.fullmatch(r"z(\d+)", name)
    if m and 1 <= int(m.group(1)) <= n:
        return StaticPotential.z(n, int(m.group(1)) - 1)
    raise ConfigError(f"evaluator.potential: expected t or z1..z{n}, got {name!r}")


def _sweep(cfg, key):
    vals = cfg.get(key)
    if not vals:
        raise ConfigError(f"{key}: sweep list is empty or missing")
    return list(vals)


# ---------------------------------------------------------- mass command

@dataclass(frozen=True)
class SweepResult:
    evaluator: str
    param_name: str
    params: tuple
    readings: tuple
    fit: Optional[ev.Fit]


def run_mass(cfg: ExperimentConfig) -> SweepResult:
    evname = cfg.get("evaluator.name")
    if evname not in EVALUATORS:
        raise ConfigError(f"evaluator.name: unknown evaluator {evname!r}")
    model = build_model(cfg)
    n = model.n
    norm = 1.0
    if cfg.get("output.normalize") and evname not in ("adm", "adm-geometric"):
        norm = 1.0 / (2.0 * (n - 1) * sphere_area(n - 1))
    readings = []
    if evname in ("horosphere", "face"):
        pname, params = "L", _sweep(cfg, "sweep.L")
        rule = _rule(cfg, RuleKind.HOROSPHERE_POLAR)
        a = _direction(cfg, n)
        for L in params:
            if evname == "horosphere":
                readings.append(ev.horosphere_mass(model, a, L, cfg.get("sweep.rho_max"), rule))
            else:
                readings.append(ev.face_mass(model, L, math.exp(cfg.get("sweep.sigma_k") * L), a, rule))
        log_param = False
    else:
        pname, params = "r", _sweep(cfg, "sweep.r")
        rule = _rule(cfg, RuleKind.SPHERE_PRODUCT)
        for r in params:
            if evname == "sphere":
                readings.append(ev.sphere_mass_integral(model, _potential(cfg, n), r, rule))
            elif evname == "ah":
                readings.append(ev.ah_geometric(model, r, rule)["p0"])
            else:
                f = ev.adm_flux if evname == "adm" else ev.adm_geometric
                v = f(model, r, rule)
                readings.append(ev.MassReading(v, abs(v - f(model, r, rule.halved())), 0.0, {"r": r}))
        log_param = True
    readings = [ev.MassReading(norm * x.value, norm * x.quad_error, norm * x.tail_bound, x.params)
                for x in readings]
    fit = None
    if len(params) >= 3:
        scale = max(abs(x.value) for x in readings)
        fit = ev.extrapolate_readings(pname, params, readings, log_param, atol=1e-12 * scale)
    return SweepResult(evname, pname, tuple(params), tuple(readings), fit)


MASS_COLUMNS = ("evaluator", "param_name", "param_value", "value", "quad_error", "tail_bound",
                "extrapolated", "fit_rate", "fit_residual")


def mass_csv(res: SweepResult) -> str:
    buf = io.StringIO()
    buf.write(",".join(MASS_COLUMNS) + "\n")
    f = res.fit
    tail = ("", "", "") if f is None else (_fmt(f.limit), _fmt(f.rate), _fmt(f.residual))
    for p, r in zip(res.params, res.readings):
        row = (res.evaluator, res.param_name, _fmt(p), _fmt(r.value), _fmt(r.quad_error),
               _fmt(r.tail_bound)) + tail
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def line_chart_svg(xs: Sequence[float], ys: Sequence[float], limit: Optional[float] = None,
                   xlabel: str = "", ylabel: str = "value", width: int = 480, height: int = 320) -> str:
    """Self-contained SVG: axes, a polyline with markers, optional dashed limit rule."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    lo_y = min(ys.min(), limit if limit is not None else ys.min())
    hi_y = max(ys.max(), limit if limit is not None else ys.max())
    pad = 0.05 * (hi_y - lo_y) or 0.5 * max(abs(hi_y), 1e-12)
    lo_y, hi_y = lo_y - pad, hi_y + pad
    lo_x, hi_x = xs.min(), xs.max()
    if hi_x == lo_x:
        lo_x, hi_x = lo_x - 0.5, hi_x + 0.5
    ml, mr, mt, mb = 70, 20, 20, 45

    def px(x):
        return ml + (x - lo_x) / (hi_x - lo_x) * (width - ml - mr)

    def py(y):
        return height - mb - (y - lo_y) / (hi_y - lo_y) * (height - mt - mb)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>']
    for x in xs:
        out.append(f'<text x="{px(x):.2f}" y="{height - mb + 16}" font-size="11" '
                   f'text-anchor="middle">{x:.6g}</text>')
    for y in (lo_y + pad, hi_y - pad):
        out.append(f'<text x="{ml - 6}" y="{py(y) + 4:.2f}" font-size="11" text-anchor="end">{y:.6g}</text>')
    out.append(f'<text x="{(ml + width - mr) / 2:.1f}" y="{height - 8}" font-size="12" '
               f'text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="14" y="{(mt + height - mb) / 2:.1f}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {(mt + height - mb) / 2:.1f})">{ylabel}</text>')
    if limit is not None and math.isfinite(limit):
        out.append(f'<line x1="{ml}" y1="{py(limit):.2f}" x2="{width - mr}" y2="{py(limit):.2f}" '
                   f'stroke="gray" stroke-dasharray="6,4"/>')
    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    out.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>')
    for x, y in zip(xs, ys):
        out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ------------------------------------------------------ cylinder report

CYLINDER_COLUMNS = ("piece", "L", "sigma", "value", "envelope", "fitted_exponent",
                    "envelope_exponent", "predicted_exponent")


def cylinder_csv(cfg: ExperimentConfig) -> str:
    model = build_model(cfg)
    Ls = _sweep(cfg, "sweep.L")
    k = cfg.get("sweep.sigma_k")
    a = _direction(cfg, model.n)
    V = StaticPotential.horosphere(a)
    reps = [ev.cylinder_flux_report(model, L, math.exp(k * L), V) for L in Ls]
    pred = ev.predicted_exponents(model.n, model.q, k) if math.isfinite(model.q) else {}
    buf = io.StringIO()
    buf.write(",".join(CYLINDER_COLUMNS) + "\n")
    for piece in ("F+", "F-", "S_L", "E+", "E-"):
        vals = [r.contribution(piece) for r in reps]
        envs = [r.envelope[piece] for r in reps]
        fitted = ev._slope(Ls, vals) if len(Ls) > 1 else math.nan
        fitted_env = ev._slope(Ls, envs) if len(Ls) > 1 else math.nan
        for L, r, v, e in zip(Ls, reps, vals, envs):
            buf.write(",".join([piece, _fmt(L), _fmt(r.sigma), _fmt(v), _fmt(e), _fmt(fitted),
                                _fmt(fitted_env), _fmt(pred.get(piece, math.nan))]) + "\n")
    for L, r in zip(Ls, reps):
        buf.write(",".join(["total", _fmt(L), _fmt(r.sigma), _fmt(r.total), "", "", "", ""]) + "\n")
    return buf.getvalue()


# ----------------------------------------------------------------- theta

THETA_COLUMNS = ("L", "sigma", "theta", "theta_full", "theta_exponent", "threshold",
                 "excluded_mass", "face_mass")


def build_region(cfg: ExperimentConfig, n: int) -> ev.RegionSpec:
    kind = cfg.get("region.kind")
    if kind not in REGIONS:
        raise ConfigError(f"region.kind: unknown region {kind!r}")
    if kind == "full":
        reg = ev.RegionSpec.full()
    elif kind == "empty":
        reg = ev.RegionSpec.empty()
    elif kind == "halfspace":
        reg = ev.RegionSpec.halfspace(cfg.get("region.axis"), cfg.get("region.sign"))
    elif kind == "cone":
        apex = cfg.get("region.apex") or (0.0,) * (n - 1)
        if len(apex) != n - 1:
            raise ConfigError(f"region.apex: needs {n - 1} components")
        try:
            reg = ev.RegionSpec.cone(apex, cfg.get("region.angle"))
        except ValidationError as exc:
            raise ConfigError(f"region.angle: {exc}") from exc
    else:
        reg = ev.RegionSpec.slab(cfg.get("region.axis"), cfg.get("region.lo"), cfg.get("region.hi"))
    if kind in ("halfspace", "slab") and not 0 <= cfg.get("region.axis") < n - 1:
        raise ConfigError(f"region.axis: must index one of the {n - 1} boundary coordinates")
    return ev.RegionSpec.complement(reg) if cfg.get("region.complement") else reg


def theta_csv(cfg: ExperimentConfig) -> str:
    model = build_model(cfg)
    n = model.n
    Ls = _sweep(cfg, "sweep.L")
    k = cfg.get("sweep.sigma_k")
    region = build_region(cfg, n)
    sig = lambda L: math.exp(k * L)  # noqa: E731
    thetas = [ev.theta(region, L, sig, n) for L in Ls]
    expo = ev.theta_decay_exponent(region, Ls, sig, n) if len(Ls) > 1 else math.nan
    buf = io.StringIO()
    buf.write(",".join(THETA_COLUMNS) + "\n")
    for L, th in zip(Ls, thetas):
        ex = ev.excluded_region_mass(model, region, L, sig, check_decay=False).value
        fm = ev.face_mass(model, L, sig(L)).value
        buf.write(",".join(_fmt(v) for v in (L, sig(L), th, ev.theta(ev.RegionSpec.full(), L, sig, n),
                                             expo, model.q - n, ex, fm)) + "\n")
    return buf.getvalue()


# ------------------------------------------------------------------ main

_FLAG_KEYS = {
    "evaluator": "evaluator.name", "model": "model.name", "m": "model.m", "n": "model.n", "q": "model.q",
    "amplitude": "model.amplitude", "width": "model.width", "axis": "model.axis", "scale": "model.scale",
    "direction": "evaluator.direction", "potential": "evaluator.potential",
    "L": "sweep.L", "r": "sweep.r", "sigma_k": "sweep.sigma_k", "rho_max": "sweep.rho_max",
    "radial_order": "rule.radial_order", "angular_order": "rule.angular_order",
    "region": "region.kind", "region_axis": "region.axis", "apex": "region.apex", "angle": "region.angle",
    "csv": "output.csv", "svg": "output.svg", "threads": "run.threads",
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key")
    for flag, key in _FLAG_KEYS.items():
        p.add_argument("--" + flag.replace("_", "-"), dest=flag, help=key)
    p.add_argument("--normalize", action="store_true",
                   help="divide AH masses by 2(n-1)|S^{n-1}| so AdS reads m")
    p.add_argument("--print-config", action="store_true", help="print the normalized config and exit")


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"--config: {exc}") from exc
        cfg = ExperimentConfig.from_text(text)
    for flag, key in _FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg.set(key, val)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        cfg.set(k.strip(), v)
    if getattr(args, "normalize", False):
        cfg.set("output.normalize", "true")
    return cfg


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cmd_mass(cfg):
    res = run_mass(cfg)
    _write(cfg.get("output.csv"), mass_csv(res))
    if cfg.get("output.svg"):
        lim = res.fit.limit if res.fit is not None else None
        Path(cfg.get("output.svg")).write_text(
            line_chart_svg(res.params, [r.value for r in res.readings], lim, res.param_name,
                           f"{res.evaluator} mass"))


def _cmd_selftest(args) -> int:
    from .acceptance import format_table, run_checks

    only = [int(c) for c in args.only.split(",")] if args.only else None
    results = run_checks(only, tolerance_scale=args.tolerance_scale)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="horomass", description="Mass of asymptotically hyperbolic metrics "
                                     "from horospheres, spheres and cylinder boundaries.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("mass", "run one evaluator over a sweep"),
                           ("cylinder-report", "face/edge fluxes of the parabolic cylinder"),
                           ("theta", "Theta(U, L) and excluded-region masses")):
        _add_common(sub.add_parser(name, help=helptext))
    st = sub.add_parser("selftest", help="run the acceptance checks")
    st.add_argument("--only", help="comma-separated criterion numbers")
    st.add_argument("--tolerance-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return _cmd_selftest(args)
    try:
        cfg = config_from_args(args)
        if args.print_config:
            sys.stdout.write(cfg.to_text())
            return 0
        from .quadrature import set_default_workers

        set_default_workers(cfg.get("run.threads"))
        if args.command == "mass":
            _cmd_mass(cfg)
        elif args.command == "cylinder-report":
            _write(cfg.get("output.csv"), cylinder_csv(cfg))
        else:
            _write(cfg.get("output.csv"), theta_csv(cfg))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except HoromassError as exc:
        print(f"evaluator error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
