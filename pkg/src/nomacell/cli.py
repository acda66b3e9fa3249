"""Experiment runner.

Parses flat key = value config files (dotted section names), dispatches
analytic, Monte Carlo and optimization sweeps, and writes one CSV per
method with a fixed column schema.  All dB-to-linear conversions happen
here; the library works in linear units throughout.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .design import baseline_goodput, maximize_goodput
from .geometry import GroupingPolicy
from .laplace import Inversion1DConfig, Inversion2DConfig, invert_1d, invert_2d
from .model import NetworkParams, PairConfig
from .montecarlo import estimate_outage
from .outage import (OutageReport, far_outage_average, far_outage_conditional,
                     near_outage_average, near_outage_conditional_approx,
                     near_outage_conditional_exact)
from .asymptotic import optimize_chernoff_far, optimize_chernoff_near
from .scenario import build_scenario

__all__ = ["ExperimentConfig", "load_config", "run", "validate", "main",
           "ConfigError", "preset_path", "PRESETS"]

CSV_COLUMNS = ("sweep_value", "p_far", "p_near", "stderr_far", "stderr_near",
               "goodput", "method", "seed")
PRESETS = ("fig1", "fig2", "fig3", "fig4", "fig5a", "fig5b", "fig6", "fig7")

_SWEEP_AXES = ("rate_far", "k_factor_db", "lambda_b", "kappa")
_METHODS = ("exact", "approx", "mc", "asymptotic", "optimize")


class ConfigError(ValueError):
    """Configuration file violates the schema."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a scenario, one sweep axis, methods to run."""

    params: NetworkParams
    pair: PairConfig
    kappa: float = 0.9
    k_factor_db: float = 20.0
    h_norm2: float | None = None
    seed: int = 20240717
    policies: tuple[str, ...] = ("distance",)
    scheme: str = "aligned"
    mode: str = "conditional"
    sweep_axis: str = "rate_far"
    sweep_values: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
    methods: tuple[str, ...] = ("exact", "mc")
    rate_ratio: float | None = 2.0
    trials: int = 20000
    window_radius: float = 5000.0
    exclusion: str = "none"
    epsilon: float = 0.01
    inv1d: Inversion1DConfig = Inversion1DConfig()
    inv2d: Inversion2DConfig = Inversion2DConfig()
    out: str = "results"
    label: str = "experiment"

    def __post_init__(self):
        if self.sweep_axis not in _SWEEP_AXES:
            raise ConfigError(f"sweep.axis must be one of {_SWEEP_AXES}")
        if not self.sweep_values:
            raise ConfigError("sweep.values must be a nonempty sorted grid")
        if list(self.sweep_values) != sorted(self.sweep_values):
            raise ConfigError("sweep.values must be sorted ascending")
        for m in self.methods:
            if m not in _METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {_METHODS}")
        if self.mode not in ("conditional", "average"):
            raise ConfigError("mode must be conditional or average")
        for p in self.policies:
            if p not in ("random", "distance"):
                raise ConfigError(f"unknown grouping policy {p!r}")


def _dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


_KEYS = {
    "network.lambda_b": float, "network.lambda_u": float, "network.alpha": float,
    "network.p_dbm": float, "network.rho_i_dbm": float, "network.sigma2_dbm": float,
    "network.sigma2_zero": str, "network.m": int, "network.n": int,
    "network.pairs": int, "network.cell_constant": float,
    "channel.kappa": float, "channel.k_factor_db": float, "channel.h_norm2": float,
    "pair.beta_near2": float, "pair.rate_near": float, "pair.rate_far": float,
    "pair.rate_ratio": float, "pair.d_near": float, "pair.d_far": float,
    "grouping": str, "design": str, "mode": str,
    "sweep.axis": str, "sweep.values": str, "methods": str,
    "mc.trials": int, "mc.window_radius": float, "mc.exclusion": str,
    "optimize.epsilon": float,
    "inv1d.a": float, "inv1d.m_euler": int, "inv1d.q": int,
    "inv2d.l": int, "inv2d.p_eps": int, "inv2d.e_r": float,
    "seed": int, "out": str,
}


def _parse_lines(text: str):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            entries[key] = _KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: field {key}: {exc}") from None
    return entries


def load_config(path: str | Path, label: str | None = None) -> ExperimentConfig:
    """Parse and validate a config file."""
    path = Path(path)
    entries = _parse_lines(path.read_text(encoding="utf-8"))
    get = entries.get

    sigma2 = _dbm_to_watt(get("network.sigma2_dbm", -99.0))
    if get("network.sigma2_zero", "false").lower() in ("true", "yes", "1"):
        sigma2 = 0.0
    try:
        params = NetworkParams(
            lambda_b=get("network.lambda_b", 1e-5),
            lambda_u=get("network.lambda_u", 2e-4),
            alpha=get("network.alpha", 3.5),
            P=_dbm_to_watt(get("network.p_dbm", 20.0)),
            rho_I=_dbm_to_watt(get("network.rho_i_dbm", 15.0)),
            sigma2=sigma2,
            M=get("network.m", 3),
            N=get("network.n", 2),
            K=get("network.pairs", 2),
            c=get("network.cell_constant", 1.25),
        )
        pair = PairConfig(
            beta_k2=get("pair.beta_near2", 0.3),
            R_k=get("pair.rate_near", 1.0),
            R_kt=get("pair.rate_far", 0.5),
            d_k=get("pair.d_near", 50.0),
            d_kt=get("pair.d_far", 125.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    grouping = get("grouping", "distance")
    policies = ("random", "distance") if grouping == "both" else (grouping,)
    if "sweep.values" in entries:
        values = entries["sweep.values"]
        try:
            sweep_values = tuple(float(v) for v in values.split(",") if v.strip())
        except ValueError:
            raise ConfigError(
                f"field sweep.values: cannot parse grid {values!r}") from None
        if not sweep_values:
            raise ConfigError("field sweep.values: nonempty grid required")
    else:
        sweep_values = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)

    ratio = get("pair.rate_ratio", 2.0)
    return ExperimentConfig(
        params=params,
        pair=pair,
        kappa=get("channel.kappa", 0.9),
        k_factor_db=get("channel.k_factor_db", 20.0),
        h_norm2=get("channel.h_norm2", None),
        seed=get("seed", 20240717),
        policies=policies,
        scheme=get("design", "aligned"),
        mode=get("mode", "conditional"),
        sweep_axis=get("sweep.axis", "rate_far"),
        sweep_values=sweep_values,
        methods=tuple(m.strip() for m in get("methods", "exact,mc").split(",")),
        rate_ratio=ratio if ratio > 0 else None,
        trials=get("mc.trials", 20000),
        window_radius=get("mc.window_radius", 5000.0),
        exclusion=get("mc.exclusion", "none"),
        epsilon=get("optimize.epsilon", 0.01),
        inv1d=Inversion1DConfig(A=get("inv1d.a", 23.5),
                                m_euler=get("inv1d.m_euler", 11),
                                q=get("inv1d.q", 15)),
        inv2d=Inversion2DConfig(L=get("inv2d.l", 80),
                                p_eps=get("inv2d.p_eps", 8),
                                e_r=get("inv2d.e_r", 1e-8)),
        out=get("out", "results"),
        label=label or path.stem,
    )


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return Path(str(resources.files("nomacell").joinpath(f"presets/{name}.cfg")))


def _scenario_at(cfg: ExperimentConfig, axis_value: float):
    """Materialize the scenario for one sweep point."""
    params, pair = cfg.params, cfg.pair
    kappa, kdb = cfg.kappa, cfg.k_factor_db
    if cfg.sweep_axis == "rate_far":
        R_kt = axis_value
        R_k = cfg.rate_ratio * R_kt if cfg.rate_ratio else pair.R_k
        pair = pair.with_rates(R_k=R_k, R_kt=R_kt)
    elif cfg.sweep_axis == "k_factor_db":
        kdb = axis_value
    elif cfg.sweep_axis == "lambda_b":
        params = replace(params, lambda_b=axis_value)
    elif cfg.sweep_axis == "kappa":
        kappa = axis_value
    return build_scenario(params, pair, kappa=kappa, k_factor_db=kdb,
                          seed=cfg.seed, policy=GroupingPolicy(cfg.policies[0]),
                          scheme=cfg.scheme, h_norm2=cfg.h_norm2)


def _goodput(pair: PairConfig, p_near: float, p_far: float) -> float:
    return pair.R_k * (1.0 - p_near) + pair.R_kt * (1.0 - p_far)


def _point_rows(cfg: ExperimentConfig, method: str, axis_value: float):
    """Evaluate one (method, sweep point); yields (tag, OutageReport)."""
    sc = _scenario_at(cfg, axis_value)
    link = sc.link(1)
    params = sc.params
    if method in ("exact", "approx") and cfg.mode == "conditional":
        pf = far_outage_conditional(link.eff_far, link.pair, params, cfg.inv1d)
        if method == "exact":
            pn = near_outage_conditional_exact(link.eff_near, link.pair, params,
                                               cfg.inv2d)
        else:
            pn = near_outage_conditional_approx(link.eff_near, link.pair, params,
                                                cfg.inv1d)
        yield method, OutageReport(
            pf.probability, pn.probability, method,
            goodput=_goodput(link.pair, pn.probability, pf.probability))
    elif method in ("exact", "approx") and cfg.mode == "average":
        # `approx` on averages means the interference-limited closed forms.
        il = method == "approx"
        for policy_name in cfg.policies:
            policy = GroupingPolicy(policy_name)
            sc_p = build_scenario(params, link.pair, kappa=sc.kappa,
                                  k_factor_db=cfg.k_factor_db
                                  if cfg.sweep_axis != "k_factor_db" else axis_value,
                                  seed=cfg.seed, policy=policy, scheme=cfg.scheme,
                                  h_norm2=cfg.h_norm2)
            lk = sc_p.link(1)
            pf = far_outage_average(lk.eff_far, lk.pair, params, policy,
                                    cfg.inv1d, interference_limited=il)
            pn = near_outage_average(lk.eff_near, lk.pair, params, policy,
                                     cfg.inv2d, interference_limited=il)
            tag = f"{method}-{policy_name}"
            yield tag, OutageReport(
                pf.probability, pn.probability, tag,
                goodput=_goodput(lk.pair, pn.probability, pf.probability))
    elif method == "mc":
        for policy_name in cfg.policies:
            policy = GroupingPolicy(policy_name)
            sc_p = build_scenario(params, link.pair, kappa=sc.kappa,
                                  k_factor_db=cfg.k_factor_db
                                  if cfg.sweep_axis != "k_factor_db" else axis_value,
                                  seed=cfg.seed, policy=policy, scheme=cfg.scheme,
                                  h_norm2=cfg.h_norm2)
            mode = ("conditional" if cfg.mode == "conditional"
                    else f"average-{policy_name}")
            rep = estimate_outage(sc_p, mode, cfg.trials, cfg.seed,
                                  window_radius=cfg.window_radius,
                                  exclusion=cfg.exclusion)
            tag = "mc" if cfg.mode == "conditional" else f"mc-{policy_name}"
            yield tag, OutageReport(
                rep.far.p_hat, rep.near.p_hat, tag,
                goodput=_goodput(sc_p.pairs[0], rep.near.p_hat, rep.far.p_hat),
                stderr_far=rep.far.stderr, stderr_near=rep.near.stderr)
            if cfg.mode == "conditional":
                break
    elif method == "asymptotic":
        bf, _ = optimize_chernoff_far(link.eff_far, link.pair, params)
        bn, _ = optimize_chernoff_near(link.eff_near, link.pair, params)
        yield method, OutageReport(min(bf, 1.0), min(bn, 1.0), method)
    elif method == "optimize":
        sc_plain = build_scenario(params, link.pair, kappa=sc.kappa,
                                  k_factor_db=cfg.k_factor_db
                                  if cfg.sweep_axis != "k_factor_db" else axis_value,
                                  seed=cfg.seed, policy=sc.policy, scheme="plain",
                                  h_norm2=cfg.h_norm2)
        runs = (
            ("optimize-proposed",
             lambda: maximize_goodput(link, cfg.epsilon, params, cfg.inv1d)),
            ("optimize-oma-precoded",
             lambda: baseline_goodput("oma", link, cfg.epsilon, params, cfg.inv1d)),
            ("optimize-oma-plain",
             lambda: baseline_goodput("oma", sc_plain.link(1), cfg.epsilon,
                                      params, cfg.inv1d)),
            ("optimize-noma-plain",
             lambda: baseline_goodput("noma", sc_plain.link(1), cfg.epsilon,
                                      params, cfg.inv1d)),
        )
        for tag, fn in runs:
            sol = fn()
            yield tag, OutageReport(sol.p_far, sol.p_near, tag,
                                    goodput=sol.goodput)
    else:
        raise ConfigError(f"method {method!r} incompatible with mode {cfg.mode!r}")


def _format(x) -> str:
    if x is None:
        return ""
    return f"{x:.17g}"


def run(cfg: ExperimentConfig, deterministic: bool = False,
        stream=None) -> list[Path]:
    """Execute the configured sweep; returns the CSV paths written."""
    stream = stream or sys.stdout
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables: dict[str, list[tuple[float, OutageReport]]] = {}
    failures = 0
    for value in cfg.sweep_values:
        for method in cfg.methods:
            try:
                for tag, report in _point_rows(cfg, method, value):
                    tables.setdefault(tag, []).append((value, report))
            except Exception as exc:  # sweep continues; point reported
                failures += 1
                print(f"warning: {method} failed at {cfg.sweep_axis}={value}: {exc}",
                      file=stream)
                tables.setdefault(method, []).append(
                    (value, OutageReport(math.nan, math.nan, method)))
    paths = []
    for tag, rows in sorted(tables.items()):
        path = out_dir / f"{cfg.label}_{tag}.csv"
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            if not deterministic:
                fh.write(f"# generated {time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for value, rep in rows:
                fields = (_format(value), _format(rep.p_far),
                          _format(rep.p_near), _format(rep.stderr_far),
                          _format(rep.stderr_near), _format(rep.goodput),
                          rep.method, str(cfg.seed))
                fh.write(",".join(fields) + "\n")
        paths.append(path)
        print(f"wrote {path} ({len(rows)} rows)", file=stream)
    if failures:
        print(f"{failures} grid point(s) failed numerically", file=stream)
    return paths


def validate(seed: int = 0, inv_a: float | None = None, trials: int = 20000,
             stream=None) -> bool:
    """Kernel-oracle and analytic-vs-Monte-Carlo consistency suite.

    Prints one PASS/FAIL line per check and returns overall success.
    `inv_a` overrides the 1D discretization parameter (small values must
    be caught by the error-bound check and the oracle failures).
    """
    from scipy.special import erfc

    stream = stream or sys.stdout
    checks = []
    cfg1 = Inversion1DConfig() if inv_a is None else Inversion1DConfig(A=inv_a)
    checks.append(("1d discretization bound <= 1e-10",
                   cfg1.discretization_error <= 1e-10))
    pairs_1d = [
        ("1d: 1/s @ 1 -> 1", lambda s: 1 / s, 1.0, 1.0),
        ("1d: 1/(s(s+1)) @ 2 -> 1-e^-2", lambda s: 1 / (s * (s + 1)), 2.0,
         1.0 - math.exp(-2.0)),
        ("1d: e^{-sqrt s}/s @ 1 -> erfc(1/2)", lambda s: np.exp(-np.sqrt(s)) / s,
         1.0, float(erfc(0.5))),
    ]
    for name, F, tau, want in pairs_1d:
        got = invert_1d(F, tau, cfg1)
        checks.append((name, abs(got - want) <= 1e-7))
    pairs_2d = [
        ("2d: 1/(st) @ (1,1) -> 1", lambda s, t: 1 / (s * t), (1.0, 1.0), 1.0),
        ("2d: 1/((s+1)(t+2)) @ (1,.5) -> e^-2",
         lambda s, t: 1 / ((s + 1) * (t + 2)), (1.0, 0.5), math.exp(-2.0)),
        ("2d: 1/(st(1+s+t)) @ (1,2) -> 1-e^-1",
         lambda s, t: 1 / (s * t * (1 + s + t)), (1.0, 2.0),
         1.0 - math.exp(-1.0)),
    ]
    for name, F, (t1, t2), want in pairs_2d:
        got = invert_2d(F, t1, t2)
        checks.append((name, abs(got - want) <= 1e-5))

    params = NetworkParams()
    sc = build_scenario(params, PairConfig(), seed=20240717)
    link = sc.link(1)
    pf = far_outage_conditional(link.eff_far, link.pair, params, cfg1).probability
    pn = near_outage_conditional_exact(link.eff_near, link.pair, params).probability
    rep = estimate_outage(sc, "conditional", trials, seed)
    tol_f = 4.0 * max(rep.far.stderr, 1e-4)
    tol_n = 4.0 * max(rep.near.stderr, 1e-4)
    checks.append((f"analytic far vs mc ({trials} trials)",
                   abs(pf - rep.far.p_hat) <= tol_f))
    checks.append((f"analytic near vs mc ({trials} trials)",
                   abs(pn - rep.near.p_hat) <= tol_n))

    ok = True
    for name, passed in checks:
        ok &= passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name}", file=stream)
    print(f"validation {'passed' if ok else 'FAILED'}", file=stream)
    return ok


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nomacell",
                                description="MIMO-NOMA small-cell outage "
                                            "and design experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("config", help="config file path or preset name "
                                           f"({', '.join(PRESETS)})")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--trials", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--deterministic", action="store_true",
                        help="suppress the timestamp header line in CSVs")

    for name, help_text in (("analyze", "run analytic methods over the sweep"),
                            ("simulate", "run the Monte Carlo estimator"),
                            ("optimize", "run goodput optimization"),
                            ("sweep", "run all methods configured in the file")):
        sp = sub.add_parser(name, help=help_text)
        add_common(sp)
    sp = sub.add_parser("validate", help="run the kernel/consistency suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=20000)
    sp.add_argument("--inv-a", type=float, default=None,
                    help="override the 1D discretization parameter A")
    return p


def _resolve_config(arg: str) -> ExperimentConfig:
    path = Path(arg)
    if path.exists():
        return load_config(path)
    if arg in PRESETS:
        return load_config(preset_path(arg), label=arg)
    raise ConfigError(f"no such config file or preset: {arg}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return 0 if validate(args.seed, args.inv_a, args.trials) else 1
        cfg = _resolve_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.trials is not None:
            cfg = replace(cfg, trials=args.trials)
        if args.out is not None:
            cfg = replace(cfg, out=args.out)
        if args.command == "analyze":
            methods = tuple(m for m in cfg.methods if m in
                            ("exact", "approx", "asymptotic")) or ("exact",)
            cfg = replace(cfg, methods=methods)
        elif args.command == "simulate":
            cfg = replace(cfg, methods=("mc",))
        elif args.command == "optimize":
            cfg = replace(cfg, methods=("optimize",))
        run(cfg, deterministic=args.deterministic)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
