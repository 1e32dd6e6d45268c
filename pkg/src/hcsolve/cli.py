"""Command line front end: configuration files, the time loop and outputs.

    hcsolve run --config FILE [--out DIR]
    hcsolve list-problems
    hcsolve verify
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import re
import sys
import time
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

import numpy as np

from . import adaptive as ad, field, irk, operators as ops, problems, sparse_index as si
from .basis import Family
from .exceptions import CapacityError, ConfigError, HCSolveError, NewtonError

__all__ = ["RunConfig", "RunRecord", "parse_config", "run", "verify", "main"]


@dataclass(frozen=True)
class RunConfig:
    """One simulation: problem, basis overrides, time stepping and adaptivity.

    Basis overrides left as ``None`` take the problem's recommended values;
    ``adaptive`` falls back to the problem's tuned hyperparameters.
    """

    problem: str = "ex1"
    beta: tuple | None = None
    x0: tuple | None = None
    N: int | None = None
    gamma: float | None = None
    family: str | None = None
    r: int | None = None
    alpha: float | None = None
    dt: float | None = None
    T: float | None = None
    stages: int = 2
    adaptive: ad.AdaptiveConfig | None = None
    out_dir: str | None = None
    oversample: float = 2.0
    snapshot_interval: int = 0
    use_cache: bool = True

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.T is not None and not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.dt is not None and self.T is not None and self.T < self.dt:
            raise ConfigError("T must be at least dt")
        if self.stages not in (1, 2, 3):
            raise ConfigError("stages must be 1, 2 or 3")
        if self.N is not None and self.N < 1:
            raise ConfigError("N must be at least 1")
        if not self.oversample >= 1.0:
            raise ConfigError("oversample must be at least 1")
        if self.snapshot_interval < 0:
            raise ConfigError("snapshot_interval must be nonnegative")

    def spec(self) -> problems.ProblemSpec:
        """The problem with basis overrides applied."""
        p = problems.builtin(self.problem)
        d = p.d

        def per_dim(v, name):
            if v is None:
                return None
            v = tuple(v) if isinstance(v, (tuple, list)) else (v,)
            if len(v) == 1:
                v = v * d
            if len(v) != d:
                raise ConfigError(f"{name} needs 1 or {d} values, got {len(v)}")
            return v

        beta = per_dim(self.beta, "beta")
        x0 = per_dim(self.x0, "x0")
        params = []
        for i, q in enumerate(p.params):
            ch = {}
            if self.family is not None:
                ch["family"] = Family(self.family)
            if self.r is not None:
                ch["r"] = self.r
            if self.alpha is not None:
                ch["alpha1"] = ch["alpha2"] = self.alpha
            if beta is not None:
                ch["beta"] = beta[i]
            if x0 is not None:
                ch["x0"] = x0[i]
            try:
                params.append(q.with_(**ch))
            except ValueError as err:
                raise ConfigError(str(err)) from err
        out = p.with_params(params)
        if self.N is not None:
            out.N = int(self.N)
        if self.gamma is not None:
            out.gamma = self.gamma
        if self.dt is not None:
            out.dt = float(self.dt)
        if self.T is not None:
            out.T = float(self.T)
        if out.T < out.dt:
            raise ConfigError("T must be at least dt")
        return out

    def adaptive_config(self, spec=None) -> ad.AdaptiveConfig:
        if self.adaptive is not None:
            return self.adaptive
        spec = spec or problems.builtin(self.problem)
        return ad.AdaptiveConfig.from_mapping(spec.adaptive)


@dataclass
class RunRecord:
    columns: list
    rows: list = dc_field(default_factory=list)
    field: field.SpectralField | None = None
    final_error: float | None = None
    basis_steps: int = 0
    status: str = "ok"


# ---------------------------------------------------------------------------
# configuration files

_RUN_KEYS = {
    "problem": str, "dt": float, "T": float, "stages": int, "oversample": float,
    "snapshot_interval": int, "out": str, "use_cache": bool,
}
_BASIS_KEYS = {
    "beta": "floats", "x0": "floats", "N": int, "gamma": "gamma", "family": str,
    "r": int, "alpha": float,
}
_ADAPT_KEYS = {
    "delta": float, "d_max": "floats", "mu": float, "q": float, "nu": float,
    "n_max": int, "eta0": float, "sigma": float, "budget": int, "indicator_mode": str,
    "enable_move": bool, "enable_scale": bool, "enable_order": bool,
}
_SECTIONS = {"run": _RUN_KEYS, "basis": _BASIS_KEYS, "adaptive": _ADAPT_KEYS}
_TOP = "run"
_BOOLS = {"1": True, "yes": True, "true": True, "on": True,
          "0": False, "no": False, "false": False, "off": False}


def _line_numbers(text):
    """``(section, key) -> line`` for the file as written (1-based)."""
    out = {}
    section = _TOP
    for k, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m:
            out.setdefault((section, m.group(1).strip().lower()), k)
    return out


def _convert(kind, raw):
    if kind is bool:
        v = _BOOLS.get(raw.strip().lower())
        if v is None:
            raise ValueError(f"expected a boolean, got {raw!r}")
        return v
    if kind == "floats":
        vals = tuple(float(v) for v in raw.replace("(", "").replace(")", "").split(",") if v.strip())
        if not vals:
            raise ValueError("expected one or more numbers")
        return vals if len(vals) > 1 else vals[0]
    if kind == "gamma":
        s = raw.strip().lower()
        return si.FULL_TENSOR if s in ("full", "-inf") else float(s)
    if kind is int:
        f = float(raw)
        if f != int(f):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(f)
    return kind(raw.strip())


def parse_config(path) -> RunConfig:
    """Read an INI-style run file.

    Keys before the first section header belong to ``[run]``. Unknown
    sections and keys are rejected.

    Raises
    ------
    ConfigError
        Missing file, syntax error, unknown key or bad value; the message
        names the line.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        # the header line shifts configparser's line numbers by one
        cp.read_string(f"[{_TOP}]\n" + text, source=str(path))
    except configparser.Error as err:
        msg = re.sub(r"line (\d+)", lambda m: f"line {int(m.group(1)) - 1}", str(err))
        raise ConfigError(f"{path}: {msg}") from err
    lines = _line_numbers(text)
    values = {name: {} for name in _SECTIONS}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        keys = _SECTIONS[section]
        for key, raw in cp.items(section):
            where = f"{path}:{lines.get((section, key.lower()), '?')}"
            if key not in keys:
                raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
            try:
                values[section][key] = _convert(keys[key], raw)
            except ValueError as err:
                raise ConfigError(f"{where}: bad value for {key!r}: {err}") from err
    run_vals = values["run"]
    if "problem" not in run_vals:
        raise ConfigError(f"{path}: missing required key 'problem'")
    spec = problems.builtin(run_vals["problem"])
    adapt = dict(spec.adaptive)
    adapt.update(values["adaptive"])
    try:
        acfg = ad.AdaptiveConfig.from_mapping(adapt)
    except ValueError as err:
        raise ConfigError(f"{path}: [adaptive] {err}") from err
    kw = dict(run_vals)
    if "out" in kw:
        kw["out_dir"] = kw.pop("out")
    kw.update(values["basis"])
    for name in ("beta", "x0"):
        if name in kw and not isinstance(kw[name], tuple):
            kw[name] = (kw[name],)
    try:
        cfg = RunConfig(adaptive=acfg, **kw)
        cfg.spec()
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err
    return cfg


# ---------------------------------------------------------------------------
# time loop

def _columns(d):
    cols = ["t", "relative_error", "F_p"]
    for name in ("F_x", "E_L", "E_R", "beta", "x0"):
        cols += [f"{name}_{i + 1}" for i in range(d)]
    return cols + ["N", "set_size", "newton_iters"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


class _Discretisation:
    """Operators for the current set and basis, rebuilt when either changes."""

    def __init__(self, spec, use_cache, oversample):
        self.spec = spec
        self.use_cache = use_cache
        self.oversample = oversample
        # every linear term except the potential commutes with translation
        self.shift_free = all(kind != "potential" for kind, _ in spec.terms)
        self._key_A = self._key_F = None

    def get(self, f):
        params = f.params
        key_A = (f.index_set, tuple(p.with_(x0=0.0) for p in params) if self.shift_free else params)
        changed = False
        if key_A != self._key_A:
            self.A = problems.assemble_operator(self.spec, f.index_set, params, use_cache=self.use_cache)
            self._key_A = key_A
            changed = True
        key_F = (f.index_set, params)
        if key_F != self._key_F:
            self.F = ops.make_nonlinear_rhs(self.spec, f.index_set, params, self.oversample)
            self._key_F = key_F
        return self.A, self.F, changed


def _adaptive_on(cfg: ad.AdaptiveConfig):
    return cfg.enable_move or cfg.enable_scale or cfg.enable_order


def run(config: RunConfig, out_dir=None) -> RunRecord:
    """Integrate the configured problem to ``T``; one row per step.

    With ``out_dir`` (or ``config.out_dir``) the rows go to ``run.csv`` as
    they are produced, and ``field_final.txt`` and ``summary.txt`` are written
    at the end. On a Newton or capacity failure the rows so far and a summary
    with the failure are kept on disk and the exception propagates.
    """
    spec = config.spec()
    acfg = config.adaptive_config(spec)
    out_dir = out_dir if out_dir is not None else config.out_dir
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    s = si.build(spec.d, spec.N, spec.gamma, acfg.budget)
    u = field.analyze(lambda x: spec.initial(x), s, spec.params, config.oversample)
    record = RunRecord(_columns(spec.d))
    stepper = irk.IRKStepper(irk.gauss_tableau(config.stages))
    disc = _Discretisation(spec, config.use_cache, config.oversample)
    state = None
    adaptive = _adaptive_on(acfg)
    n_steps = max(1, math.ceil(spec.T / spec.dt - 1e-9))

    handle = writer = None
    if out is not None:
        handle = open(out / "run.csv", "w", newline="")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(record.columns)
        handle.flush()
    t = 0.0
    try:
        for k in range(n_steps):
            t_next = min(spec.T, (k + 1) * spec.dt)
            tic = time.perf_counter()
            A, F, changed = disc.get(u)
            if changed:
                stepper.reset()
            c, info = stepper.step(A, F, u.coeffs, t, t_next - t)
            u = u.with_coeffs(c)
            if adaptive:
                u, state = ad.adapt(u, acfg, state)
            t = t_next
            record.basis_steps += len(u.index_set)
            row = _row(u, spec, acfg, t, info.iterations)
            # wall time stays out of run.csv so that repeated runs are byte-identical
            row["wall_ms"] = 1e3 * (time.perf_counter() - tic)
            record.rows.append(row)
            if writer is not None:
                writer.writerow([_fmt(row[c]) for c in record.columns])
                handle.flush()
            if out is not None and config.snapshot_interval and (k + 1) % config.snapshot_interval == 0:
                field.write_snapshot(u, out / f"field_{k + 1:05d}.txt")
    except (NewtonError, CapacityError) as err:
        record.status = f"failed: {type(err).__name__}: {err}"
        record.field = u
        if out is not None:
            _write_summary(out, record, spec, t)
        raise
    finally:
        if handle is not None:
            handle.close()
    record.field = u
    record.final_error = record.rows[-1]["relative_error"] if record.rows else None
    if out is not None:
        field.write_snapshot(u, out / "field_final.txt")
        _write_summary(out, record, spec, t)
    return record


def _row(u, spec, acfg, t, iters):
    rec = ad.indicators(u, acfg)
    row = {
        "t": t,
        "relative_error": problems.relative_error(u, spec, t) if spec.has_exact else None,
        "F_p": rec["F_p"],
        "N": u.N,
        "set_size": len(u.index_set),
        "newton_iters": iters,
    }
    for i in range(u.d):
        row[f"F_x_{i + 1}"] = rec["F_x"][i]
        row[f"E_L_{i + 1}"] = rec["E_L"][i]
        row[f"E_R_{i + 1}"] = rec["E_R"][i]
        row[f"beta_{i + 1}"] = u.params[i].beta
        row[f"x0_{i + 1}"] = u.params[i].x0
    return row


def _write_summary(out, record, spec, t):
    u = record.field
    lines = [
        f"problem = {spec.name}",
        f"status = {record.status}",
        f"steps = {len(record.rows)}",
        f"t_final = {_fmt(t)}",
        f"final_error = {_fmt(record.rows[-1]['relative_error']) if record.rows else ''}",
        f"basis_function_steps = {record.basis_steps}",
    ]
    if u is not None:
        lines += [
            f"N = {u.N}",
            f"set_size = {len(u.index_set)}",
            "beta = " + ", ".join(_fmt(b) for b in u.beta),
            "x0 = " + ", ".join(_fmt(x) for x in u.x0),
        ]
    (out / "summary.txt").write_text("\n".join(lines) + "\n", newline="\n")


# ---------------------------------------------------------------------------
# self-check

@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.3e} ({self.limit})"


def _check_orthonormality():
    from .basis import quad_rule, eval_table

    worst = 0.0
    for name in ("ex1", "ex2", "ex3", "ex4", "ex5"):
        for p in problems.builtin(name).params:
            rule = quad_rule(64, p)
            tab = eval_table(p, 30, rule.nodes)
            g = (tab * rule.weights) @ tab.T
            worst = max(worst, float(np.max(np.abs(g - np.eye(31)))))
    return Check("orthonormality", worst < 1e-10, worst, "< 1e-10")


def _check_inverse(rng):
    from .basis import BasisParams, inv_const, quad_rule, eval_table, deriv_table

    worst = 0.0
    for alpha, r, beta in ((-0.5, 1, 0.6), (0.0, 1, 0.4), (-0.5, 0, 0.4), (-0.5, 1, 2.5)):
        p = BasisParams(alpha1=alpha, alpha2=alpha, r=r, beta=beta)
        for N in (5, 20, 30):
            rule = quad_rule(2 * (N + 1), p)
            tab = eval_table(p, N, rule.nodes)
            dtab = deriv_table(p, N, rule.nodes)
            K = inv_const(N, alpha, alpha, r)
            c = rng.standard_normal((50, N + 1))
            uu = (c @ tab) ** 2 @ rule.weights
            du = c @ dtab
            worst = max(
                worst,
                float(np.max(du**2 @ rule.weights / (beta**3 * K * uu))),
                float(np.max((rule.nodes * du) ** 2 @ rule.weights / (beta * K * uu))),
            )
    return Check("inverse inequalities", worst <= 1.0, worst, "squared ratio to bound <= 1")


def _check_irk(tableau):
    errs = []
    for dt in (0.2, 0.1, 0.05, 0.025):
        u = np.array([1.0])
        stepper = irk.IRKStepper(tableau)
        for k in range(round(1 / dt)):
            u, _ = stepper.step(np.eye(1), None, u, k * dt, dt)
        errs.append(abs(u[0] - math.exp(-1.0)))
    errs = np.maximum(errs, 1e-300)
    slope = float(np.mean(-np.diff(np.log2(errs))))
    return Check("IRK order slope", 3.7 <= slope <= 4.3, slope, "in [3.7, 4.3]")


def _check_fractional():
    from .basis import BasisParams
    from .specfun import a_const, hyp2f1

    p = BasisParams(alpha1=-0.5, alpha2=-0.5, r=1, beta=0.6)
    s = si.build(1, 50, 0)
    f = field.analyze(lambda x: (1 + x[:, 0] ** 2) ** -6, s, (p,))
    A = ops.assemble_fractional(s, (p,), 1.0)
    g = f.with_coeffs(A.matvec(f.coeffs))
    x = np.array([0.0, 1.0, 3.0])
    ref = np.array([(1 + v * v) ** -6.5 * a_const(0.5, 6) * hyp2f1(6.5, -0.5, 0.5, v * v / (1 + v * v)) for v in x])
    err = float(np.max(np.abs(field.synthesize(g, x[:, None]) - ref) / np.abs(ref)))
    return Check("fractional 2F1 oracle", err < 1e-3, err, "relative < 1e-3")


def _check_residual(name, t, N, limit):
    r = problems.residual_check(problems.builtin(name), t, N=N)
    return Check(f"residual {name} t={t:g}", r < limit, r, f"< {limit:g}")


def verify(tableau=None, stream=None) -> list:
    """Run the built-in oracle checks and print one line per check."""
    stream = stream or sys.stdout
    rng = np.random.default_rng(0)
    checks = [
        _check_orthonormality,
        lambda: _check_inverse(rng),
        lambda: _check_irk(tableau or irk.gauss_tableau(2)),
        _check_fractional,
        lambda: _check_residual("ex1", 0.0, 60, 1e-2),
        lambda: _check_residual("ex5", 0.0, 15, 1e-2),
    ]
    report = []
    for fn in checks:
        c = fn()
        report.append(c)
        print(c.line(), file=stream, flush=True)
    return report


# ---------------------------------------------------------------------------
# entry point

def _parser():
    ap = argparse.ArgumentParser(prog="hcsolve", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="integrate a configured problem")
    r.add_argument("--config", required=True, help="INI-style run file")
    r.add_argument("--out", help="output directory (default: the config's 'out' or ./hcsolve_out)")
    sub.add_parser("list-problems", help="list the built-in problems")
    sub.add_parser("verify", help="run the oracle self-checks")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list-problems":
            for name in problems.list_problems():
                p = problems.builtin(name)
                print(f"{name}\td={p.d}\tN={p.N}\tgamma={p.gamma}\t{p.family.value}\t{p.description}")
            return 0
        if args.command == "verify":
            report = verify()
            return 0 if all(c.passed for c in report) else 5
        cfg = parse_config(args.config)
        out = args.out or cfg.out_dir or "hcsolve_out"
        rec = run(cfg, out)
        print(f"final relative error {_fmt(rec.final_error)}; output in {out}")
        return 0
    except HCSolveError as err:
        print(f"hcsolve: {type(err).__name__}: {err}", file=sys.stderr)
        return err.exit_code
    except Exception as err:  # pragma: no cover - last resort
        print(f"hcsolve: internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
