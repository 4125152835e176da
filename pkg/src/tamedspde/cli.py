"""Command-line front end: ``tamedspde <study> --config run.cfg``.

Configuration files are line oriented, one ``section.key = value`` per line;
``#`` starts a comment.  Unknown keys, duplicates and bad values are all
reported with their line numbers before any computation starts.
"""

import argparse
import io
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import experiments as ex
from .errors import ConfigurationError, IntegrationError, NumericError
from .operators import NoiseSpec, SHIPPED_MODELS, assumption_report
from .noise import NoiseSource
from .spectral import SpectralField
from .stepper import LevelConfig, integrate, write_snapshots
from .taming import (
    TamingContext,
    verify_growth_preserved,
    verify_tame_bound,
    verify_weak_coercivity,
)

log = logging.getLogger("tamedspde")

STUDIES = ("simulate", "moments", "converge", "gap", "diverge", "check", "schedule")


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _ints(text):
    return tuple(int(x) for x in text.replace(",", " ").split())


def _str(text):
    return text.strip().strip('"')


# key -> (parser, default); None means "model or study decides"
SCHEMA = {
    "model.name": (_str, "ginzburg_landau"),
    "model.d": (int, None),
    "model.p": (float, None),
    "model.length": (float, None),
    "model.flux": (_str, None),
    "model.gamma": (float, None),
    "model.c1": (float, None),
    "model.c2": (float, None),
    "model.c3": (float, None),
    "model.K": (float, None),
    "model.mu": (float, None),
    "model.reaction_sign": (float, -1.0),
    "model.noise": (_str, None),
    "model.noise_scale": (float, None),
    "model.noise_decay": (float, None),
    "schedule.m_list": (_ints, (4, 8, 16)),
    "schedule.delta": (float, 0.5),
    "schedule.rule": (_str, "paper_m2"),
    "schedule.n_max": (int, None),
    "schedule.T": (float, 1.0),
    "schedule.reference_m": (int, None),
    "schedule.reference_n": (int, None),
    "run.study": (_str, None),
    "run.seed": (int, 0),
    "run.samples": (int, 200),
    "run.workers": (int, 1),
    "run.chunk_size": (int, 25),
    "run.out": (_str, "out"),
    "run.epsilon": (float, 1.0),
    "run.override_stability_guard": (_bool, False),
    "run.u0_scale": (float, 1.0),
    "run.reference_scheme": (_str, "tamed"),
    "simulate.scheme": (_str, "tamed"),
    "simulate.n": (int, None),
    "gap.m": (int, 8),
    "gap.n_list": (_ints, (256, 512, 1024, 2048)),
    "gap.substeps": (int, 4),
    "diverge.u0": (float, 5.0),
    "diverge.dt": (float, 0.1),
    "diverge.steps": (int, 20),
    "diverge.threshold": (float, 1e10),
    "check.samples": (int, 500),
    "check.radius": (float, 5.0),
    "check.m": (int, 8),
    "check.n_list": (_ints, (100, 10000)),
}

MODEL_KEYS = {
    "ginzburg_landau": {"d", "p", "length", "flux", "K", "mu"},
    "swift_hohenberg": {"p", "gamma", "length", "K", "mu"},
    "fitzhugh_nagumo": {"c1", "c2", "c3", "length", "K", "mu"},
    "scalar_toy": {"K", "mu"},
}
NOISE_KEYS = {"noise": "kind", "noise_scale": "scale", "noise_decay": "decay"}


@dataclass
class RunConfig:
    """Validated run configuration; ``values`` holds every schema key, defaults filled."""

    values: dict
    lines: dict = field(default_factory=dict)
    model: object = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def study(self):
        return self.values["run.study"]

    def with_overrides(self, **kw):
        vals = dict(self.values)
        for k, v in kw.items():
            if v is not None:
                vals[k] = v
        return replace(self, values=vals)


def _build_model(values, lines):
    name = values["model.name"]
    if name not in SHIPPED_MODELS:
        raise ConfigurationError(
            f"line {lines.get('model.name', '-')}: unknown model {name!r}; "
            f"expected one of {tuple(SHIPPED_MODELS)}"
        )
    allowed = MODEL_KEYS[name]
    errors, kwargs, noise = [], {}, {}
    for key, val in values.items():
        sec, _, short = key.partition(".")
        if sec != "model" or val is None or short in ("name", "reaction_sign"):
            continue
        if short in NOISE_KEYS:
            noise[NOISE_KEYS[short]] = val
        elif short in allowed:
            kwargs[short] = val
        else:
            errors.append(f"line {lines[key]}: key {key!r} does not apply to model {name}")
    if errors:
        raise ConfigurationError("\n".join(errors))
    if noise:
        if name == "scalar_toy":
            noise.setdefault("scale", 0.0)
        kwargs["noise"] = NoiseSpec(**noise)
    try:
        model = SHIPPED_MODELS[name](**kwargs)
    except ConfigurationError as exc:
        where = sorted(lines[k] for k in ("model.p", "model.d") if k in lines)
        prefix = f"line {', '.join(map(str, where))}: " if where else ""
        raise ConfigurationError(prefix + str(exc)) from None
    if values["model.reaction_sign"] != -1.0:
        model = replace(model, reaction_sign=values["model.reaction_sign"])
    return model


def parse_config(text):
    """Parse and validate a configuration document into a :class:`RunConfig`."""
    values, lines, errors = {}, {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key = key.strip()
        if not eq:
            errors.append(f"line {lineno}: expected 'section.key = value', got {raw.strip()!r}")
            continue
        if key not in SCHEMA:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in lines:
            errors.append(f"line {lineno}: duplicate key {key!r} (first set on line {lines[key]})")
            continue
        try:
            values[key] = SCHEMA[key][0](val.strip())
        except ValueError as exc:
            errors.append(f"line {lineno}: bad value for {key!r}: {exc}")
            continue
        lines[key] = lineno
    if errors:
        raise ConfigurationError("\n".join(errors))
    full = {k: values.get(k, default) for k, (_, default) in SCHEMA.items()}
    checks = [
        ("run.study", lambda v: v is None or v in STUDIES, f"study must be one of {STUDIES}"),
        ("run.samples", lambda v: v >= 1, "samples must be >= 1"),
        ("run.workers", lambda v: v >= 1, "workers must be >= 1"),
        ("run.chunk_size", lambda v: v >= 1, "chunk_size must be >= 1"),
        ("run.epsilon", lambda v: v > 0, "epsilon must be > 0"),
        ("run.reference_scheme", lambda v: v in ("tamed", "reference"),
         "reference_scheme must be tamed or reference"),
        ("simulate.scheme", lambda v: v in ("tamed", "untamed", "reference"),
         "scheme must be tamed, untamed or reference"),
        ("schedule.delta", lambda v: v > 0, "delta must be > 0"),
        ("schedule.rule", lambda v: v in ("paper_m2", "exact_c4"),
         "rule must be paper_m2 or exact_c4"),
        ("schedule.T", lambda v: v > 0, "T must be > 0"),
        ("schedule.m_list", lambda v: len(v) > 0 and all(b > a for a, b in zip(v, v[1:])),
         "m_list must be nonempty and strictly increasing"),
    ]
    for key, ok, msg in checks:
        if not ok(full[key]):
            errors.append(f"line {lines.get(key, '-')}: {msg}, got {full[key]!r}")
    if errors:
        raise ConfigurationError("\n".join(errors))
    return RunConfig(full, lines, _build_model(full, lines))


# outputs --------------------------------------------------------------------

PLOT_HEAD = 'set datafile separator ","\nset key top right\nset terminal pngcairo size 800,600\n'


def _plot_script(study, csv_name):
    png = csv_name.replace(".csv", ".png")
    s = PLOT_HEAD + f'set output "{png}"\n'
    if study == "moments":
        return s + (
            'set logscale y\nset xlabel "level"\nset ylabel "moment estimate"\n'
            f'plot "{csv_name}" using 1:(strcol(2) eq "sup_sq_q1" ? $8 : 1/0):9 '
            'with yerrorlines title "E sup |u|^2", \\\n'
            f'     "{csv_name}" using 1:(strcol(2) eq "sup_sq_q2" ? $8 : 1/0):9 '
            'with yerrorlines title "E sup |u|^4", \\\n'
            f'     "{csv_name}" using 1:(strcol(2) eq "v1_int_q1" ? $8 : 1/0):9 '
            'with yerrorlines title "E int ||u||_V1^2"\n'
        )
    if study == "converge":
        return s + (
            'set logscale y\nset xlabel "level"\nset ylabel "E |u_l(T) - u_ref(T)|^2"\n'
            f'plot "{csv_name}" using 1:7:8 with yerrorlines title "strong error"\n'
        )
    if study == "gap":
        return s + (
            'set logscale xy\nset xlabel "tau"\nset ylabel "mean gap"\n'
            f'plot "{csv_name}" using ($6/$5):7:8 with yerrorlines title "gap"\n'
        )
    return None


@dataclass
class Outcome:
    csv: str = None
    meta: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    extra_files: dict = field(default_factory=dict)


def _meta_text(meta):
    return "".join(f"{k} = {v}\n" for k, v in meta.items())


def _run_schedule(cfg):
    model = cfg.model
    sched = ex.make_schedule(cfg["schedule.m_list"], cfg["schedule.delta"], cfg["schedule.rule"],
                             cfg["schedule.n_max"], model, cfg["schedule.T"])
    return sched


def _study_schedule(cfg):
    sched = _run_schedule(cfg)
    rows = [ex.LevelRow(i, lv.m, lv.n, lv.k, sched.c_m(lv), sched.c_m(lv) * sched.T / lv.n,
                        lv.n_target, 0.0, 0) for i, lv in enumerate(sched.levels)]
    return Outcome(ex._csv(rows), {"describe": sched.describe().replace("\n", "; ")},
                   extra_files={"schedule.txt": sched.describe() + "\n"})


def _study_moments(cfg):
    sched = _run_schedule(cfg)
    r = ex.run_moments(cfg.model, sched, cfg["run.samples"], cfg["run.seed"],
                       u0_scale=cfg["run.u0_scale"], workers=cfg["run.workers"],
                       chunk_size=cfg["run.chunk_size"], epsilon=cfg["run.epsilon"],
                       override_guard=cfg["run.override_stability_guard"])
    fails = []
    if r.divergences:
        fails.append(f"{r.divergences} divergence flags under the tamed scheme")
    if not r.jensen_ok():
        fails.append("Jensen ordering between q=1 and q=2 violated beyond one standard error")
    return Outcome(r.to_csv(), {"scheme": "tamed", "uniformity_ratio": ex.fmt(r.uniformity_ratio())},
                   fails)


def _study_converge(cfg):
    sched = _run_schedule(cfg)
    ref = None
    if cfg["schedule.reference_m"] is not None or cfg["schedule.reference_n"] is not None:
        ref = (cfg["schedule.reference_m"] or 2 * sched.levels[-1].m,
               cfg["schedule.reference_n"] or sched.n_max)
    r = ex.run_convergence(cfg.model, sched, cfg["run.samples"], cfg["run.seed"], ref,
                           reference_scheme=cfg["run.reference_scheme"],
                           u0_scale=cfg["run.u0_scale"], workers=cfg["run.workers"],
                           chunk_size=cfg["run.chunk_size"], epsilon=cfg["run.epsilon"],
                           override_guard=cfg["run.override_stability_guard"])
    fails = []
    if r.divergences:
        fails.append(f"{r.divergences} divergence flags under the tamed scheme")
    if not r.strictly_decreasing():
        fails.append("strong error not strictly decreasing beyond one standard error")
    meta = {"scheme": "tamed", "reference_scheme": r.reference_scheme,
            "reference": f"m={r.reference[0]} n={r.reference[1]}"}
    return Outcome(r.to_csv(), meta, fails)


def _study_gap(cfg):
    sched = ex.fixed_cutoff_schedule(cfg["gap.m"], cfg["gap.n_list"], cfg.model, cfg["schedule.T"])
    r = ex.run_gap_study(cfg.model, sched, cfg["run.samples"], cfg["run.seed"],
                         substeps=cfg["gap.substeps"], u0_scale=cfg["run.u0_scale"],
                         workers=cfg["run.workers"], chunk_size=cfg["run.chunk_size"],
                         epsilon=cfg["run.epsilon"],
                         override_guard=cfg["run.override_stability_guard"])
    fails = []
    if r.slope_ok is False:
        fails.append(f"gap slope {r.slope:.4g} outside [{r.band[0]}, {r.band[1]}]")
    meta = {"scheme": "tamed", "slope": ex.fmt(r.slope), "band_checked": r.noisy}
    return Outcome(r.to_csv(), meta, fails)


def _study_diverge(cfg):
    model = cfg.model if cfg.model.name == "scalar_toy" else SHIPPED_MODELS["scalar_toy"]()
    r = ex.run_divergence_contrast(model, cfg["diverge.u0"], cfg["diverge.dt"],
                                   cfg["diverge.steps"], cfg["run.samples"], cfg["run.seed"],
                                   cfg["diverge.threshold"])
    fails = []
    if r.tamed_flags:
        fails.append(f"{r.tamed_flags} tamed samples diverged")
    if not r.tamed_bounded:
        fails.append(f"tamed max |u| = {r.tamed_max_abs:.6g} exceeds bound {r.bound:.6g}")
    return Outcome(r.to_csv(), {"scheme": "untamed+tamed", "model": model.name}, fails)


def _study_check(cfg):
    model = cfg.model
    n_s, radius, m = cfg["check.samples"], cfg["check.radius"], cfg["check.m"]
    reports, text = assumption_report(model, n_s, radius, m, cfg["run.seed"])
    mm = 0 if model.name == "scalar_toy" else m
    for n in cfg["check.n_list"]:
        ctx = TamingContext(n, mm)
        reports += [
            verify_tame_bound(model, ctx, max(n_s, 1000), radius, cfg["run.seed"]),
            verify_growth_preserved(model, ctx, n_s, radius, cfg["run.seed"]),
            verify_weak_coercivity(model, ctx, n_s, radius, cfg["run.seed"]),
        ]
    rows = ["check,key,n,max_violation,tolerance,passed"]
    fails = []
    for r in reports:
        n = r.extras.get("n", "")
        for key, val in r.violations.items():
            rows.append(f"{r.check},{key},{n},{ex.fmt(val)},{ex.fmt(r.tolerance)},"
                        f"{str(r.passed).lower()}")
        if not r.passed:
            fails.append(f"{r.check} (n={n}) max violation {r.max_violation:.6g}")
    return Outcome("\n".join(rows) + "\n", {"scheme": "none"}, fails,
                   extra_files={"check.txt": text})


def _study_simulate(cfg):
    model = cfg.model
    sched = _run_schedule(cfg)
    lv = sched.levels[0]
    if cfg["simulate.n"] is not None:
        lv = replace(lv, n=cfg["simulate.n"])
    basis = model.basis(lv.m)
    lcfg = LevelConfig(lv.m, lv.n, lv.k, sched.T)
    source = NoiseSource(cfg["run.seed"], [0], lv.n, lv.k, sched.T) if model.has_noise else None
    u0 = ex.default_initial(model, basis, cfg["run.u0_scale"])
    if source is None:
        u0 = SpectralField(basis, u0.coeffs[None, :])
    rec = integrate(model, lcfg, source, u0, cfg["simulate.scheme"], epsilon=cfg["run.epsilon"],
                    override_guard=cfg["run.override_stability_guard"],
                    galerkin=sched.c_m(lv), keep_snapshots=True)
    buf = io.StringIO()
    write_snapshots(rec, buf, sample=0)
    fails = ["trajectory diverged"] if rec.any_diverged else []
    return Outcome(buf.getvalue(), {"scheme": cfg["simulate.scheme"],
                                    "level": f"m={lv.m} n={lv.n} k={lv.k}"}, fails)


DISPATCH = {
    "simulate": _study_simulate,
    "moments": _study_moments,
    "converge": _study_converge,
    "gap": _study_gap,
    "diverge": _study_diverge,
    "check": _study_check,
    "schedule": _study_schedule,
}


def run(config):
    """Run the configured study, write its artifacts and return the exit status."""
    study = config.study
    if study not in STUDIES:
        raise ConfigurationError(f"no study selected; expected one of {STUDIES}")
    out = Path(config["run.out"])
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "FAILED"
    if marker.exists():
        marker.unlink()
    start = time.time()
    try:
        outcome = DISPATCH[study](config)
    except (IntegrationError, NumericError) as exc:
        outcome = Outcome(failures=[f"{type(exc).__name__}: {exc}"])
    meta = {
        "study": study,
        "model": config.model.name,
        "seed": config["run.seed"],
        "samples": config["run.samples"],
        "workers": config["run.workers"],
        **outcome.meta,
        "wall_time_s": f"{time.time() - start:.3f}",
        "status": "FAILED" if outcome.failures else "passed",
    }
    csv_name = f"{study}.csv"
    if outcome.csv is not None:
        (out / csv_name).write_text(outcome.csv)
    (out / f"{study}.meta.txt").write_text(_meta_text(meta))
    script = _plot_script(study, csv_name)
    if script and outcome.csv is not None:
        (out / f"{study}.gp").write_text(script)
    for name, text in outcome.extra_files.items():
        (out / name).write_text(text)
    if outcome.failures:
        marker.write_text("\n".join(outcome.failures) + "\n")
        for f in outcome.failures:
            log.error("%s: %s", study, f)
        return 1
    log.info("%s: passed (%s)", study, out / csv_name)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="tamedspde", description=__doc__.splitlines()[0])
    ap.add_argument("study", choices=STUDIES)
    ap.add_argument("--config", type=Path, help="configuration file (section.key = value)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--workers", type=int, help="worker processes (overrides $WORKERS)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--override-stability-guard", action="store_true",
                    help="run explicit schemes even when c(m)*dt exceeds epsilon")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text)
        workers = args.workers
        if workers is None and os.environ.get("WORKERS"):
            workers = int(os.environ["WORKERS"])
        cfg = cfg.with_overrides(**{
            "run.study": args.study,
            "run.seed": args.seed,
            "run.samples": args.samples,
            "run.workers": workers,
            "run.out": args.out,
            "run.override_stability_guard": True if args.override_stability_guard else None,
        })
        return run(cfg)
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
