"""Command-line driver: read a TOML config, run experiments, write artifacts.

Usage::

    fastreact [--config PATH] [--out DIR] [--quiet] [--seed N] [--strict] \
        {solve,converge,bounds,manifold,all}

Exit status: 0 success, 1 invalid parameters, 2 a slope or residual check
missed (with ``--strict`` also a calibrated-constant check), 64 unreadable
config, 66 unwritable output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from .core import ParameterError, h2_norm
from .analytic import solve_full, solve_limit
from .output import Table, emit_csv, emit_svg

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("fastreact")

EXIT_OK, EXIT_INVALID, EXIT_ACCEPTANCE = 0, 1, 2
EXIT_CONFIG, EXIT_OUTPUT = 64, 66

SUBCOMMANDS = ("solve", "converge", "bounds", "manifold", "all")

SCHEMA_HINT = """\
expected a TOML file with
  [system]   alpha, beta, gamma, delta, mu, nu      (floats)
  [ladder]   eps = [..]                              (>= 4 decreasing floats)
  [lattice]  dim (int), cutoff, dk
  [data]     on_critical (bool)
  [data.v0]  a = [..], amp = [..]                    (Gaussian mixture)
  [data.u0]  a = [..], amp = [..]                    (optional)
  [time]     T, samples (int), decades
  [oracle]   seed, random_sets, times = [..], eigen_modes   (optional)
  [[bounds.families]] name = "..", overrides = {..}         (optional)"""

SYSTEM_KEYS = ("alpha", "beta", "gamma", "delta", "mu", "nu")

SLOPE_WINDOW = (0.9, 1.1)
DISTANCE_WINDOW = (0.95, 1.05)
MIN_R2 = 0.99
ORACLE_RTOL = 1e-6
IDENTITY_RTOL = 1e-10


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OracleSettings:
    seed: int = 0
    random_sets: int = 20
    times: tuple[float, ...] = ex.ORACLE_TIMES
    eigen_modes: int = 50


@dataclass(frozen=True)
class RunConfig:
    experiment: ex.ExperimentConfig
    oracle: OracleSettings
    digest: str


def default_config_path() -> Path:
    return Path(str(resources.files("fastreact") / "configs" / "p1.toml"))


def _table(doc: dict, name: str, keys: tuple, required: bool = True) -> dict:
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing table [{name}]")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    extra = set(sec) - set(keys)
    if extra:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")
    return sec


def _mixture(sec: dict, where: str) -> ex.GaussianMixture:
    extra = set(sec) - {"a", "amp"}
    if extra or "a" not in sec or "amp" not in sec:
        raise ConfigError(f"[{where}] needs exactly the keys a and amp")
    a, amp = sec["a"], sec["amp"]
    if not isinstance(a, list) or not isinstance(amp, list):
        raise ConfigError(f"[{where}] a and amp must be lists")
    return ex.GaussianMixture(tuple(map(float, a)), tuple(map(float, amp)))


def parse_config(doc: dict, digest: str = "") -> RunConfig:
    """Turn a parsed TOML document into a run configuration.

    Structural problems raise ConfigError; parameter values are validated
    later, when the experiment is built.
    """
    extra = set(doc) - {"system", "ladder", "lattice", "data", "time", "oracle", "bounds"}
    if extra:
        raise ConfigError(f"unknown table(s): {', '.join(sorted(extra))}")
    try:
        system = _table(doc, "system", SYSTEM_KEYS)
        missing = [k for k in SYSTEM_KEYS if k not in system]
        if missing:
            raise ConfigError(f"[system] is missing {', '.join(missing)}")
        ladder = _table(doc, "ladder", ("eps",))
        lattice = _table(doc, "lattice", ("dim", "cutoff", "dk"), required=False)
        data = _table(doc, "data", ("on_critical", "v0", "u0"))
        time = _table(doc, "time", ("T", "samples", "decades"), required=False)
        oracle = _table(doc, "oracle", ("seed", "random_sets", "times", "eigen_modes"), required=False)
        bounds = _table(doc, "bounds", ("families",), required=False)
        if "v0" not in data:
            raise ConfigError("missing table [data.v0]")
        families = []
        for fam in bounds.get("families", []):
            if set(fam) != {"name", "overrides"}:
                raise ConfigError("each [[bounds.families]] needs exactly name and overrides")
            bad = set(fam["overrides"]) - set(SYSTEM_KEYS)
            if bad:
                raise ConfigError(f"family {fam['name']!r} overrides unknown key(s) {', '.join(sorted(bad))}")
            families.append((str(fam["name"]), {k: float(v) for k, v in fam["overrides"].items()}))
        defaults = ex.ExperimentConfig(base={})
        cfg = ex.ExperimentConfig(
            base={k: float(system[k]) for k in SYSTEM_KEYS},
            eps_ladder=tuple(float(e) for e in ladder["eps"]),
            dim=int(lattice.get("dim", defaults.dim)),
            cutoff=float(lattice.get("cutoff", defaults.cutoff)),
            dk=float(lattice.get("dk", defaults.dk)),
            v0=_mixture(data["v0"], "data.v0"),
            u0=_mixture(data["u0"], "data.u0") if "u0" in data else None,
            on_critical=bool(data.get("on_critical", True)),
            T=float(time.get("T", defaults.T)),
            samples=int(time.get("samples", defaults.samples)),
            decades=float(time.get("decades", defaults.decades)),
            families=tuple(families),
        )
        osettings = OracleSettings(
            seed=int(oracle.get("seed", 0)),
            random_sets=int(oracle.get("random_sets", 20)),
            times=tuple(float(t) for t in oracle.get("times", ex.ORACLE_TIMES)),
            eigen_modes=int(oracle.get("eigen_modes", 50)),
        )
    except (TypeError, KeyError, AttributeError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from exc
    return RunConfig(cfg, osettings, digest)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
        doc = tomllib.loads(raw.decode("utf-8"))
    except (OSError, UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(doc, hashlib.sha256(raw).hexdigest())


# --------------------------------------------------------------------------
# Checks and artifacts


@dataclass
class Check:
    name: str
    kind: str  # "slope", "residual" or "calibrated"
    value: float
    target: str
    passed: bool

    def as_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "value": self.value, "target": self.target, "passed": self.passed}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _fit_summary(fit) -> dict | str:
    return fit.as_dict() if fit is not None else "exact"


@dataclass
class Runner:
    cfg: RunConfig
    out: Path
    quiet: bool = False
    files: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    @property
    def exp(self) -> ex.ExperimentConfig:
        return self.cfg.experiment

    # emission ---------------------------------------------------------------

    def _record(self, path: Path):
        name = path.name
        if name not in self.files:
            self.files.append(name)

    def csv(self, name: str, table: Table):
        self._record(emit_csv(table, self.out / name))

    def json(self, name: str, obj):
        path = self.out / name
        path.write_text(_dump(obj), encoding="utf-8")
        self._record(path)

    def svg(self, name: str, table: Table, kind: str, **kw):
        if emit_svg(table, kind, self.out / name, **kw):
            self._record(self.out / name)

    def check(self, name: str, kind: str, value: float, target: str, passed: bool):
        c = Check(name, kind, float(value), target, bool(passed))
        self.checks.append(c)
        if not self.quiet:
            print(f"{'PASS' if c.passed else 'FAIL'}  {name}: {value:.6g} (target {target})")

    def _slope_check(self, name: str, fit, window=SLOPE_WINDOW, min_r2: float | None = None):
        if fit is None:
            self.check(name, "slope", 0.0, "exact (identically zero)", True)
            return
        ok = window[0] <= fit.slope <= window[1]
        target = f"[{window[0]}, {window[1]}]"
        if min_r2 is not None:
            ok = ok and fit.r_squared >= min_r2
            target += f", r2 >= {min_r2}"
        self.check(name, "slope", fit.slope, target, ok)

    # subcommands -----------------------------------------------------------

    def solve(self):
        exp, oc = self.exp, self.cfg.oracle
        lat = exp.lattice()
        times = exp.times()
        rows = []
        for e in exp.eps_ladder:
            p = exp.params_at(e)
            state0 = exp.initial_data(lat, p)
            for t in times:
                full = solve_full(p, state0, t)
                lim = solve_limit(p, state0.v_hat, t)
                rows.append((e, t, h2_norm(full.u_hat), h2_norm(full.v_hat), h2_norm(lim.u_hat), h2_norm(lim.v_hat)))
        self.csv("solve.csv", Table(("eps", "t", "u_h2", "v_h2", "u_limit_h2", "v_limit_h2"), rows))

        rng = np.random.default_rng(oc.seed)
        sets = [exp.params_at(exp.eps_ladder[0])] + ex.random_params(rng, oc.random_sets)
        orows, worst = [], 0.0
        for i, p in enumerate(sets):
            for t, err in ex.oracle_errors(p, exp.initial_data(lat, p), oc.times):
                orows.append((i, p.eps, t, err))
                worst = max(worst, err)
        self.csv("oracle.csv", Table(("set", "eps", "t", "rel_error_h2"), orows))
        self.check("oracle equivalence (max relative H2 gap)", "residual", worst, f"<= {ORACLE_RTOL:g}",
                   worst <= ORACLE_RTOL)

        erows, eworst = [], 0.0
        eig_sets = [exp.params_at(e) for e in exp.eps_ladder] + sets[1:]
        for i, p in enumerate(eig_sets):
            k2 = rng.choice(lat.k2, size=min(oc.eigen_modes, lat.size), replace=False)
            poly, pair = ex.eigen_residuals(p, k2)
            erows += [(i, p.eps, q, a, b) for q, a, b in zip(k2, poly, pair)]
            eworst = max(eworst, float(poly.max()), float(pair.max()))
        self.csv("eigen.csv", Table(("set", "eps", "k2", "charpoly_rel", "pairing_rel"), erows))
        self.check("eigen-structure identities (max relative residual)", "residual", eworst,
                   f"<= {IDENTITY_RTOL:g}", eworst <= IDENTITY_RTOL)

    def converge(self):
        res = ex.convergence_ladder(self.exp)
        table = Table(("eps", "t_sup", "error_h2", "slope"), res.rows())
        self.csv("converge.csv", table)
        self.svg("converge.svg", table, "rate", x="eps", y="error_h2", fit=res.fit)
        summary = {"on_critical": res.on_critical, "fit": _fit_summary(res.fit)}
        if res.on_critical:
            self._slope_check("semiflow error rate", res.fit, min_r2=MIN_R2)
        else:
            rows = [
                (e, t, err, lay)
                for e, err_t, lay_t in zip(res.eps, res.error, res.layer)
                for t, err, lay in zip(res.times, err_t, lay_t)
            ]
            self.csv("converge_layer.csv", Table(("eps", "t", "error_h2", "layer_h2"), rows))
            summary["layer_corrected_fit"] = _fit_summary(res.layer_fit)
            self._slope_check("layer-corrected error rate", res.layer_fit)
            chk = ex.layer_bound_check(res, "unit")
            summary["layer_bound"] = {"C": chk.C, "ratios": chk.ratios, "passed": chk.passed}
            self.check("initial-layer bound (worst ratio)", "calibrated", float(chk.ratios.max()), "<= 1",
                       chk.passed)
        self.fits["converge"] = summary
        self.json("converge_fit.json", summary)

    def bounds(self):
        cfgs = [self.exp] + [self.exp.family(n, o) for n, o in self.exp.families]
        rows, summary = [], {}
        for cfg in cfgs:
            rep = ex.proposition_bounds(cfg)
            rows += rep.rows()
            summary[rep.family] = {}
            for b, entry in rep.entries.items():
                summary[rep.family][b] = {
                    "C": entry.C,
                    "max_ratio": entry.max_ratio,
                    "ratios": entry.ratios,
                    "exact": entry.exact,
                    "passed": entry.passed,
                }
                self.check(f"bound ({b}) family {rep.family}", "calibrated", entry.max_ratio, "<= 1", entry.passed)
        self.csv("bounds.csv", Table(("family", "bound", "eps", "t", "lhs", "rhs"), rows))
        self.fits["bounds"] = summary
        self.json("bounds.json", summary)

    def manifold(self):
        res = ex.manifold_convergence(self.exp)
        cols = ("eps", "sigma_slow", "distance", "rate_gap", "identity_gap", "residual", "eigvec_gap")
        table = Table(cols, res.rows())
        self.csv("manifold.csv", table)
        self.svg("manifold.svg", table, "rate", x="eps", y="distance", fit=res.distance_fit)
        beta, crit = self.exp.base["beta"], -2.0 * self.exp.base["alpha"]
        lines = Table(("eps", "sigma_slow", "sigma_critical", "beta"),
                      [(e, s, crit, beta) for e, s in zip(res.eps, res.sigma_slow)])
        self.svg("manifold_lines.svg", lines, "manifold")
        eig_pass = bool(np.all(res.eigvec_ratios <= 1 + ex.ROUNDING_RTOL))
        summary = {
            "distance_fit": _fit_summary(res.distance_fit),
            "rate_gap_fit": _fit_summary(res.rate_gap_fit),
            "eigvec": {"C": res.eigvec_C, "ratios": res.eigvec_ratios, "passed": eig_pass},
        }
        self.fits["manifold"] = summary
        self.json("manifold_fit.json", summary)
        r = float(res.residual.max())
        self.check("slow-manifold invariance residual", "residual", r, "<= 1e-10", r <= 1e-10)
        self._slope_check("graph distance rate", res.distance_fit, DISTANCE_WINDOW)
        g = float(res.identity_gap.max())
        self.check("reduced rate equals slow eigenvalue", "residual", g, f"<= {IDENTITY_RTOL:g}", g <= IDENTITY_RTOL)
        self._slope_check("reduced rate gap rate", res.rate_gap_fit)
        self.check("scaled eigenvector gap / (C eps) (worst ratio)", "calibrated", float(res.eigvec_ratios.max()),
                   "<= 1", eig_pass)

    def manifest(self, subcommand: str) -> dict:
        return {
            "tool": "fastreact",
            "version": __version__,
            "subcommand": subcommand,
            "config_sha256": self.cfg.digest,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "files": [{"path": f, "sha256": _sha256(self.out / f)} for f in self.files],
            "checks": [c.as_dict() for c in self.checks],
            "fits": self.fits,
        }


def run(subcommand: str, config_path=None, out_dir=".", quiet: bool = False, seed: int | None = None,
        strict: bool = False) -> int:
    """Run one subcommand and return the process exit status."""
    if subcommand not in SUBCOMMANDS:
        print(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}", file=sys.stderr)
        return EXIT_CONFIG
    path = Path(config_path) if config_path is not None else default_config_path()
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"error: {exc}\n{SCHEMA_HINT}", file=sys.stderr)
        return EXIT_CONFIG
    if seed is not None:
        cfg = replace(cfg, oracle=replace(cfg.oracle, seed=seed))
    try:
        cfg.experiment.validate()
    except ParameterError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc}", file=sys.stderr)
        return EXIT_OUTPUT

    runner = Runner(cfg, out, quiet)
    steps = ("solve", "converge", "bounds", "manifold") if subcommand == "all" else (subcommand,)
    try:
        for step in steps:
            getattr(runner, step)()
        (out / "run.json").write_text(_dump(runner.manifest(subcommand)), encoding="utf-8")
    except ParameterError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT

    gating = [c for c in runner.checks if strict or c.kind != "calibrated"]
    if any(not c.passed for c in gating):
        return EXIT_ACCEPTANCE
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fastreact", description="Fast-reaction limit experiments.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, default=None, help="TOML config (default: shipped P1 family)")
    ap.add_argument("--out", type=Path, default=Path("."), help="output directory")
    ap.add_argument("--quiet", action="store_true", help="suppress the check summary")
    ap.add_argument("--seed", type=int, default=None, help="seed for randomized parameter sets")
    ap.add_argument("--strict", action="store_true",
                    help="also fail on checks of calibrated constants")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    return run(args.subcommand, args.config, args.out, args.quiet, args.seed, args.strict)


if __name__ == "__main__":
    sys.exit(main())
