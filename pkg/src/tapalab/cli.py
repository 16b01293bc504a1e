"""Command-line driver: ``tapalab {verify,bias-hist,decay,grad-check,sweep}``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage or
configuration errors. Configuration files are flat ``key = value`` text;
list values are comma separated and pairs inside a list use ``:``.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .attention import GRAD_STEP, GRAD_TOL, AttentionConfig, run_gradcheck
from .checks import FAMILIES, VerifyConfig, run_verify
from .encodings import PositionMap, RoPEParams, TAPAParams
from .exceptions import ConfigurationError, PreconditionError, TapalabError
from .experiments import HistogramSpec, histogram_mean_oracle, run_bias_histogram, run_decay_comparison
from .numeric import SamplerSpec
from .reporting import histogram_svg, line_plot_svg, write_csv, write_json
from .theory import CI_MULTIPLIER, SumParams, TheoryCheckReport, cs_sums, eps_bound, gamma_bias, lemma1_check, lemma2_check

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FORMATS = ("csv", "json", "svg")
ENCODINGS = ("rope", "rope_pi", "tapa")


def _check_common(cfg):
    if not (isinstance(cfg.seed, int) and 0 <= cfg.seed < 2**64):
        raise ConfigurationError("seed must be an unsigned 64-bit integer")
    if cfg.workers < 1:
        raise ConfigurationError("workers must be at least 1")


@dataclass(frozen=True)
class EncodingDefaults:
    """Shared encoding hyper-parameters (base frequency 5e5, alpha 0.1, theta 0.5)."""

    seed: int = 0
    workers: int = 1
    D: int = 128
    theta0: float = 2e-6
    theta: float = 0.5
    alpha: float = 0.1
    position_scale: float = 4.0
    mu0: float = 1.0
    nu0: float = 0.0
    b: float = 1.0
    encodings: tuple = ("rope", "tapa")

    def __post_init__(self):
        _check_common(self)
        for name in self.encodings:
            if name not in ENCODINGS:
                raise ConfigurationError(f"unknown encoding {name!r}; choose from {', '.join(ENCODINGS)}")
        if not self.encodings:
            raise ConfigurationError("no encodings configured")


@dataclass(frozen=True)
class HistConfig(EncodingDefaults):
    short_range: tuple = (0, 100)
    long_range: tuple = (10_000, 10_100)
    n_pairs: int = 10_000
    bins: int = 50


@dataclass(frozen=True)
class DecayConfig(EncodingDefaults):
    D: int = 8
    distances: tuple = (0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024)
    n_samples: int = 100_000


@dataclass(frozen=True)
class GradConfig:
    seed: int = 0
    workers: int = 1
    trials: int = 1000
    tol: float = GRAD_TOL
    h: float = GRAD_STEP

    def __post_init__(self):
        _check_common(self)
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if not self.tol >= 0:
            raise ConfigurationError("tol must be non-negative")


@dataclass(frozen=True)
class SweepConfig:
    seed: int = 0
    workers: int = 1
    theta0s: tuple = (1e-2, 1e-4, 1e-6, 1e-10)
    dims: tuple = (64, 128, 512, 2048)
    lambdas: tuple = (2.0, 10.0, 1e3, 1e6)
    alphas: tuple = (0.1, 0.3, 0.5)
    eps0: float = 0.25
    mu0: float = 1.0
    nu0: float = 0.0

    def __post_init__(self):
        _check_common(self)


@dataclass
class ReportBundle:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {"command": self.command, "config": self.config, "pass": self.passed,
                "checks": [c.to_dict() for c in self.checks], **self.extra}


# -- configuration -----------------------------------------------------------


def _coerce(default, raw: str, sep=","):
    raw = raw.strip()
    if isinstance(default, tuple):
        items = [s for s in (x.strip() for x in raw.split(sep)) if s]
        proto = default[0] if default else 0.0
        return tuple(_coerce(proto, s, ":") for s in items)
    if isinstance(default, bool):
        if raw.lower() not in ("true", "false", "1", "0"):
            raise ValueError(f"not a boolean: {raw!r}")
        return raw.lower() in ("true", "1")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            x = float(raw)
            if not x.is_integer():
                raise ValueError(f"not an integer: {raw!r}") from None
            return int(x)
    if isinstance(default, float):
        return float(raw)
    return raw


def _public_fields(cls):
    return {f.name: f for f in dataclasses.fields(cls)}


def build_config(cls, path=None, overrides=(), seed=None, workers=None):
    """Defaults of ``cls`` updated by the config file, then ``KEY=VALUE`` overrides, then flags."""
    fields = _public_fields(cls)
    defaults = cls()
    raw = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            text = Path(path).read_text(encoding="utf-8")
            parser.read_string("[config]\n" + text)
        except (OSError, configparser.Error) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        raw.update(parser["config"])
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"override {item!r} is not KEY=VALUE")
        raw[key.strip()] = value
    values = {}
    for key, text in raw.items():
        if key not in fields:
            raise ConfigurationError(f"unknown config key {key!r}")
        try:
            values[key] = _coerce(getattr(defaults, key), text)
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {exc}") from None
    if seed is not None:
        values["seed"] = seed
    if workers is not None:
        values["workers"] = workers
    return cls(**values)


def _config_record(cfg) -> dict:
    # worker count never changes results, so it stays out of the byte-compared bundle
    d = dataclasses.asdict(cfg)
    d.pop("workers", None)
    return d


def _encoding(name: str, cfg: EncodingDefaults) -> AttentionConfig:
    if name == "rope":
        return AttentionConfig("rope", rope=RoPEParams(cfg.D, cfg.theta0), label=name)
    if name == "rope_pi":
        return AttentionConfig("rope", rope=RoPEParams(cfg.D, cfg.theta0),
                               position_map=PositionMap("interpolation", cfg.position_scale), label=name)
    return AttentionConfig("tapa", tapa=TAPAParams(cfg.D, cfg.theta, cfg.alpha), label=name)


def _selected(names, only):
    if not only:
        return list(names)
    missing = [o for o in only if o not in names]
    if missing:
        raise ConfigurationError(f"--only {missing[0]!r} does not match any of {', '.join(names)}")
    return [n for n in names if n in only]


# -- commands ----------------------------------------------------------------


def cmd_verify(cfg: VerifyConfig, only=None, out=None, formats=FORMATS) -> ReportBundle:
    bundle = ReportBundle("verify", _config_record(cfg), run_verify(cfg, only))
    if out is not None and "csv" in formats:
        write_csv(out / "checks.csv", ["name", "lhs", "rhs", "margin", "pass"],
                  [[c.name, c.lhs, c.rhs, c.margin, c.passed] for c in bundle.checks])
    return bundle


def cmd_bias_hist(cfg: HistConfig, only=None, out=None, formats=FORMATS) -> ReportBundle:
    sampler = SamplerSpec(cfg.D, cfg.mu0, cfg.nu0, cfg.b, cfg.seed)
    bundle = ReportBundle("bias-hist", _config_record(cfg))
    hists, summary = [], []
    for j, name in enumerate(_selected(cfg.encodings, only)):
        spec = HistogramSpec(tuple(cfg.short_range), tuple(cfg.long_range), cfg.n_pairs, cfg.bins,
                             _encoding(name, cfg), sampler)
        h = run_bias_histogram(spec, cfg.workers, stream_index=j)
        oracle = histogram_mean_oracle(spec)
        hists.append((name, h))
        summary.append([name, h.mean, h.std, h.n])
        params = {"encoding": name, "n": h.n, "mean": h.mean, "std": h.std, "ci95": h.ci95_half_width,
                  "oracle": oracle}
        bundle.checks.append(TheoryCheckReport(f"histogram_oracle_{name}", params, abs(h.mean - oracle),
                                               CI_MULTIPLIER * h.ci95_half_width, "<="))
    means = {name: h.mean for name, h in hists}
    if "rope" in means and "tapa" in means:
        bundle.checks.append(TheoryCheckReport("histogram_contrast", {"rope_mean": means["rope"], "tapa_mean": means["tapa"]},
                                               abs(means["rope"]), 5 * abs(means["tapa"]), ">"))
    if out is not None:
        if "csv" in formats:
            for name, h in hists:
                write_csv(out / f"hist_{name}.csv", ["bin_left", "bin_right", "count"],
                          zip(h.bin_edges[:-1], h.bin_edges[1:], h.counts))
            write_csv(out / "hist_summary.csv", ["encoding", "mean", "std", "n"], summary)
        if "svg" in formats:
            (out / "hist.svg").write_text(histogram_svg(
                [(name, h.bin_edges, h.counts) for name, h in hists],
                title="score difference, short minus long distance", xlabel="delta"), encoding="utf-8")
    return bundle


def cmd_decay(cfg: DecayConfig, only=None, out=None, formats=FORMATS) -> ReportBundle:
    if not cfg.distances:
        raise ConfigurationError("empty distance list")
    sampler = SamplerSpec(cfg.D, cfg.mu0, cfg.nu0, cfg.b, cfg.seed)
    encs = [_encoding(n, cfg) for n in _selected(cfg.encodings, only)]
    curves = run_decay_comparison(encs, cfg.distances, sampler, cfg.n_samples, 0, cfg.workers)
    bundle = ReportBundle("decay", _config_record(cfg))
    for c in curves:
        for r in c.rows:
            params = {"encoding": c.encoding, "distance": r.distance, "estimate": r.estimate,
                      "ci95": r.ci95, "oracle": r.oracle}
            bundle.checks.append(TheoryCheckReport(f"decay_{c.encoding}", params, abs(r.estimate - r.oracle),
                                                   CI_MULTIPLIER * r.ci95, "<="))
    bundle.extra["slopes"] = {c.encoding: c.slope for c in curves}
    if out is not None:
        if "csv" in formats:
            write_csv(out / "decay.csv", ["encoding", "distance", "estimate", "ci95", "oracle"],
                      [[c.encoding, r.distance, r.estimate, r.ci95, r.oracle] for c in curves for r in c.rows])
            write_csv(out / "decay_summary.csv", ["encoding", "slope"],
                      [[c.encoding, math.nan if c.slope is None else c.slope] for c in curves])
        if "svg" in formats:
            series = []
            for c in curves:
                xs = [r.distance for r in c.rows]
                series.append((c.encoding, xs, [abs(r.estimate) for r in c.rows]))
                series.append((f"{c.encoding} (oracle)", xs, [abs(r.oracle) for r in c.rows]))
            (out / "decay.svg").write_text(line_plot_svg(
                series, title="normalized expected score", xlabel="distance", ylabel="|estimate|",
                logx=True, logy=True), encoding="utf-8")
    return bundle


def cmd_gradcheck(cfg: GradConfig, only=None, out=None, formats=FORMATS) -> ReportBundle:
    if only:
        raise ConfigurationError("grad-check has no named sub-checks for --only")
    results = run_gradcheck(cfg.trials, cfg.seed, cfg.h)
    bundle = ReportBundle("grad-check", _config_record(cfg))
    for r in results:
        params = {"trial": r.trial, "D": r.D, "theta": r.theta, "alpha": r.alpha, "m": r.m, "n": r.n}
        bundle.checks.append(TheoryCheckReport("gradcheck", params, r.max_rel_err, cfg.tol, "<="))
    if out is not None and "csv" in formats:
        write_csv(out / "gradcheck.csv", ["trial", "max_rel_err"], [[r.trial, r.max_rel_err] for r in results])
    return bundle


def cmd_sweep(cfg: SweepConfig, only=None, out=None, formats=FORMATS) -> ReportBundle:
    """Tabulate C, S, the distance bias and the lemma bounds; inadmissible points get NaN bounds."""
    if only:
        raise ConfigurationError("sweep has no named sub-checks for --only")
    bundle = ReportBundle("sweep", _config_record(cfg))
    rows = []
    for th in cfg.theta0s:
        for D in cfg.dims:
            for lam in cfg.lambdas:
                for a in cfg.alphas:
                    p = SumParams(lam, th, int(D), a, cfg.eps0)
                    c, s = cs_sums(float(lam), float(th), int(D))
                    b1c = b1s = b2 = math.nan
                    try:
                        rc, rs = lemma1_check(p)
                        b1c, b1s = rc.rhs, rs.rhs
                        bundle.checks += [rc, rs]
                        r2 = lemma2_check(p)
                        b2 = r2.rhs
                        bundle.checks.append(r2)
                    except PreconditionError:
                        pass
                    rows.append([th, int(D), lam, a, c, s, gamma_bias(lam, cfg.mu0, cfg.nu0, p),
                                 eps_bound(p), b1c, b1s, b2])
    if out is not None and "csv" in formats:
        write_csv(out / "sweep.csv", ["theta0", "D", "lambda", "alpha", "C", "S", "gamma", "eps",
                                      "lemma1_C_bound", "lemma1_S_bound", "lemma2_bound"], rows)
    return bundle


COMMANDS = {
    "verify": (VerifyConfig, cmd_verify),
    "bias-hist": (HistConfig, cmd_bias_hist),
    "decay": (DecayConfig, cmd_decay),
    "grad-check": (GradConfig, cmd_gradcheck),
    "sweep": (SweepConfig, cmd_sweep),
}


# -- entry point -------------------------------------------------------------


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _formats(text):
    out = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in out if s not in FORMATS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"formats must be drawn from {','.join(FORMATS)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", type=Path, default=Path("tapalab-out"), help="output directory")
    common.add_argument("--only", action="append", default=[], metavar="NAME",
                        help="restrict to a check family (verify) or encoding (bias-hist, decay); repeatable")
    common.add_argument("--format", type=_formats, default=FORMATS, dest="formats",
                        help="comma-separated subset of csv,json,svg")
    common.add_argument("--workers", type=int, help="worker threads for Monte Carlo draws")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides",
                        help="override one config key; repeatable")
    parser = argparse.ArgumentParser(prog="tapalab", description="Numerical checks for RoPE and TAPA attention.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "verify": f"run the default verification grid ({', '.join(FAMILIES)})",
        "bias-hist": "histogram of short-minus-long score differences",
        "decay": "expected score versus distance per encoding",
        "grad-check": "analytic versus finite-difference TAPA gradients",
        "sweep": "tabulate the bias sums and lemma bounds over a grid",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _print_summary(bundle: ReportBundle):
    groups = {}
    for c in bundle.checks:
        groups.setdefault(c.name, []).append(c)
    for name, reps in groups.items():
        ok = all(r.passed for r in reps)
        worst = min(r.margin for r in reps)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {sum(r.passed for r in reps)}/{len(reps)} min margin {worst:.6g}")
        for r in reps:
            if not r.passed:
                print(f"    failed {r.name} lhs={r.lhs:.17g} rhs={r.rhs:.17g} params={r.params}")
    for key, value in bundle.extra.items():
        print(f"{key}: {value}")
    print(f"overall: {'pass' if bundle.passed else 'FAIL'}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    cls, run = COMMANDS[args.command]
    try:
        cfg = build_config(cls, args.config, args.overrides, args.seed, args.workers)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        bundle = run(cfg, args.only, out, args.formats)
    except (TapalabError, OSError) as exc:
        print(f"tapalab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if "json" in args.formats:
        write_json(out / "report.json", bundle.to_dict())
    _print_summary(bundle)
    return EXIT_PASS if bundle.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
