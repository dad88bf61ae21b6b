"""Command-line front end: ``mcfdtd <command> [--config PATH] [--out DIR] ...``.

Exit codes: 0 success, 1 failed ``--verify`` checks, 2 invalid configuration
or arguments, 3 numerical failure (divergence, singular arithmetic).
Outputs are staged in a temporary directory and only moved into ``--out``
once the whole command has succeeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import bench as bench_mod
from . import config as cfg
from . import csd
from . import multicomplex as mc
from .fdtd.grid import Diverged
from .postprocess import TaylorModel, magnitude, relative_spread, to_db
from .scenarios import cavity as cav
from .scenarios import filter as flt

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class Outputs:
    """Collects files in a staging directory; ``commit`` publishes them."""

    def __init__(self, out: Path, conf: cfg.RunConfig, command: str | None = None):
        self.out = out
        self.conf = conf
        self.command = command or conf.kind
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".mcfdtd-", dir=self.out.parent))
        self.files = []
        self.notes = {}

    def csv(self, name: str, header, rows, extra_lines=()) -> None:
        buf = io.StringIO()
        for line in self.conf.header_lines() + list(extra_lines):
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        self.text(name, buf.getvalue())

    def text(self, name: str, content: str) -> None:
        (self.stage / name).write_text(content)
        self.files.append(name)

    def commit(self) -> None:
        manifest = {
            "artifact": "mcfdtd",
            "version": __version__,
            "command": self.command,
            "config": self.conf.path.name,
            "config_sha256": self.conf.sha256,
            "files": sorted(self.files),
            "notes": self.notes,
        }
        (self.stage / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        self.out.mkdir(parents=True, exist_ok=True)
        for name in self.files + ["manifest.json"]:
            shutil.move(str(self.stage / name), str(self.out / name))
        self.discard()

    def discard(self) -> None:
        shutil.rmtree(self.stage, ignore_errors=True)


def _fan_out(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*jobs)))


# ---------------------------------------------------------------------------
# stub-sweep

def run_stub(conf: cfg.RunConfig, out: Outputs, threads: int) -> str:
    plan = conf.plan
    f = lambda x: csd.stub_susceptance(x, plan.wavelength)  # noqa: E731
    exact = csd.stub_derivatives(plan.length, plan.wavelength)
    lines = []
    for sw in plan.sweeps:
        rows = []
        for method in sw.methods:
            rows += csd.error_sweep(f, plan.length, exact[sw.derivative], method, sw.h_values, order=sw.derivative)
        out.csv(f"{sw.name}.csv", csd.CSV_HEADER, rows, [f"derivative {sw.derivative} analytic {exact[sw.derivative]!r}"])
        best = {}
        for h, err, m in rows:
            if m not in best or err < best[m][1]:
                best[m] = (h, err)
        for m, (h, err) in best.items():
            lines.append(f"{sw.name:8s} {m:16s} best error {err:.3e} at h = {h:.0e}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# cavity

def _cavity_point(setup, which, h, method, normalize, guard, every, want_series):
    if method == "mcsd":
        if want_series:
            err, run = cav.mcsd_error(setup, which, h, normalize, guard, every, return_run=True)
            return err, run
        return cav.mcsd_error(setup, which, h, normalize, guard, every), None
    return cav.cfd_error(setup, which, h, normalize, guard, every), None


def run_cavity(conf: cfg.RunConfig, out: Outputs, threads: int) -> str:
    p = conf.plan
    label = "".join(n * k for n, k in sorted(p.request.items()))
    norm_note = f"norm {p.normalize} guard {p.guard!r} sample_every {p.sample_every} convention physical"
    out.notes.update(derivative=f"Ez_{label}", normalize=p.normalize, guard=p.guard, convention="physical")
    lines = []
    if p.study == "h-sweep":
        jobs = [(p.setup, p.request, h, m, p.normalize, p.guard, p.sample_every, p.series)
                for m in p.methods for h in p.h_values]
        results = _fan_out(_cavity_point, jobs, threads)
        rows = [(job[2], err, job[3]) for job, (err, _) in zip(jobs, results)]
        out.csv("error-vs-h.csv", ("h", "linf_error", "method"), rows, [norm_note])
        for job, (err, run) in zip(jobs, results):
            if run is not None:
                out.text(f"center-{job[3]}-h{job[2]:.0e}.csv", run.to_csv("center", conf.header_lines()))
        for h, err, m in rows:
            lines.append(f"{m:5s} h = {h:.0e}  l_inf = {err:.4e}")
    else:
        h = p.h_values[0]
        setups = [p.setup.with_spacing(d) for d in p.spacings]
        jobs = [(s, p.request, h, m, p.normalize, p.guard, p.sample_every, False) for m in p.methods for s in setups]
        results = _fan_out(_cavity_point, jobs, threads)
        rows = [(job[0].spacing, err, job[3]) for job, (err, _) in zip(jobs, results)]
        out.csv("error-vs-spacing.csv", ("spacing_m", "linf_error", "method"), rows, [norm_note, f"h {h!r}"])
        for m in p.methods:
            pts = sorted((s, e) for s, e, mm in rows if mm == m)
            for (s0, e0), (s1, e1) in zip(pts, pts[1:]):
                slope = math.log(e1 / e0) / math.log(s1 / s0) if e0 > 0 and e1 > 0 else float("nan")
                lines.append(f"{m:5s} slope {s0 * 1e3:.2f}-{s1 * 1e3:.2f} mm: {slope:.3f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# filter and taylor

def _label(req: dict) -> str:
    return "".join(n * k for n, k in req.items() if k)


def _filter_mcsd(layout, orders, requests, h, inc, which):
    return flt.mcsd_sensitivity(layout, orders, requests, h, inc, which)


def _filter_cfd(layout, request, h, inc, which):
    return flt.cfd_sensitivity(layout, request, h, inc, which)


def run_filter(conf: cfg.RunConfig, out: Outputs, threads: int) -> str:
    p = conf.plan
    L = p.layout
    inc = flt.incident(L)
    nominal, _ = flt.run(L)
    sp = flt.sparams(L, nominal, inc)
    s11 = to_db(magnitude(sp.s11))[:, 0]
    s21 = to_db(magnitude(sp.s21))[:, 0]
    out.csv("sparams.csv", ("f_GHz", "S11_dB", "S21_dB"), zip(sp.freqs / 1e9, s11, s21))
    band = (sp.freqs >= p.band_hz[0]) & (sp.freqs <= p.band_hz[1])
    curves = {(_label(r), m): [] for r in p.requests for m in p.methods}
    if "mcsd" in p.methods:
        jobs = [(L, p.orders, p.requests, h, inc, p.which) for h in p.h_values]
        for res in _fan_out(_filter_mcsd, jobs, threads):
            for r in p.requests:
                curves[(_label(r), "mcsd")].append((res.h, res.curves[_label(r)]))
    if "cfd" in p.methods:
        jobs = [(L, r, h, inc, p.which) for r in p.requests for h in p.h_values]
        for res in _fan_out(_filter_cfd, jobs, threads):
            key = next(iter(res.curves))
            curves[(key, "cfd")].append((res.h, res.curves[key]))
    out.notes.update(convention="fractional", quantity=f"|{p.which}| linear")
    spread_rows, lines = [], []
    for label in dict.fromkeys(_label(r) for r in p.requests):
        rows = []
        for m in p.methods:
            for h, c in curves[(label, m)]:
                rows += [(f, v, h, m) for f, v in zip(sp.freqs / 1e9, c)]
            spread = relative_spread([c[band] for _, c in curves[(label, m)]])
            spread_rows.append((label, m, spread))
            lines.append(f"d|{p.which}|/d{label:6s} {m:5s} relative spread over h: {spread:.3e}")
        out.csv(f"sensitivity-{label}.csv", ("f_GHz", "value", "h", "method"), rows,
                [f"derivative of |{p.which}| per unit fractional stretch"])
    out.csv("spread.csv", ("derivative", "method", "relative_spread"), spread_rows,
            [f"band {p.band_hz[0]!r}..{p.band_hz[1]!r} Hz"])
    return "\n".join(lines)


def run_taylor(conf: cfg.RunConfig, out: Outputs, threads: int) -> str:
    p = conf.plan
    st = flt.taylor_study(p.layout, p.max_order, p.h, p.span, p.points, p.frequency)
    model = TaylorModel.from_derivatives(st.nominal_mm, st.derivatives)
    rows, ranges, lines = [], [], []
    for d, ref in zip(st.d_mm, st.reference):
        rows.append((d, 20 * math.log10(abs(ref)), "full-wave"))
    grid = np.linspace(st.d_mm.min(), st.d_mm.max(), 41)
    for k in range(1, p.max_order + 1):
        mk = model.truncated(k)
        for d, v in zip(grid, mk.evaluate(grid)):
            rows.append((d, 20 * math.log10(abs(v)), k))
        r = mk.effective_range(st.d_mm, st.reference, p.band_db, metric=flt.db_mismatch)
        ranges.append((k, r / st.nominal_mm))
        lines.append(f"order {k}: effective range +/-{100 * r / st.nominal_mm:.1f}% of d0")
    note = f"frequency {st.frequency!r} Hz d0 {st.nominal_mm!r} mm band {p.band_db!r} dB"
    out.csv("taylor.csv", ("d_mm", "S21_dB", "model_order"), rows, [note])
    out.csv("taylor-range.csv", ("model_order", "effective_range_fraction"), ranges, [note])
    out.notes.update(frequency_hz=st.frequency, d0_mm=st.nominal_mm, band_db=p.band_db)
    return "\n".join([f"band edge {st.frequency / 1e9:.3f} GHz, d0 = {st.nominal_mm:.4f} mm"] + lines)


# ---------------------------------------------------------------------------
# bench-ops

def run_bench(conf: cfg.RunConfig, out: Outputs, threads: int) -> str:
    p = conf.plan
    rows = bench_mod.operation_table(p.orders, p.size, p.steps)
    header = ("order", "adds", "muls", "product_adds", "add_ratio", "mul_ratio", "claimed_add_ratio",
              "claimed_mul_ratio", "schoolbook_mul_ratio", "seconds_per_step")
    out.csv("ops.csv", header, [(r.order, r.adds, r.muls, r.product_adds, r.add_ratio, r.mul_ratio,
                                  r.claimed_add_ratio, r.claimed_mul_ratio, r.schoolbook_mul_ratio,
                                  r.seconds_per_step) for r in rows], [f"grid {p.size}^3"])
    lines = [f"{'N':>2} {'add ratio':>10} {'2^N':>5} {'ok':>3} {'mul ratio':>10} {'3^N':>5} {'ok':>3} "
             f"{'(4^N+2^N)/2':>12} {'ms/step':>8}"]
    for r in rows[1:]:
        ok_a = "yes" if bench_mod.within(r.add_ratio, r.claimed_add_ratio, p.tolerance) else "no"
        ok_m = "yes" if bench_mod.within(r.mul_ratio, r.claimed_mul_ratio, p.tolerance) else "no"
        lines.append(f"{r.order:>2} {r.add_ratio:>10.3f} {r.claimed_add_ratio:>5} {ok_a:>3} {r.mul_ratio:>10.3f} "
                     f"{r.claimed_mul_ratio:>5} {ok_m:>3} {r.schoolbook_mul_ratio:>12.1f} {1e3 * r.seconds_per_step:>8.2f}")
    return "\n".join(lines)


RUNNERS = {"stub-sweep": run_stub, "cavity": run_cavity, "filter": run_filter, "taylor": run_taylor,
           "bench-ops": run_bench}


# ---------------------------------------------------------------------------
# built-in oracle checks

def _check_stub_first():
    est = csd.csd_derivative(csd.stub_susceptance, [0.125], csd.DerivativeRequest(((0, 1),), (1e-10,)))
    err = abs(est - 4 * math.pi)
    return err <= 1e-12, f"|CSD - 4 pi| = {err:.1e}"


def _check_zeta():
    est = csd.csd_derivative(csd.stub_susceptance, [0.125], csd.DerivativeRequest(((0, 2),), (1e-3,)))
    ref = csd.zeta_second_derivative(0.125, 1e-3)
    rel = abs(est - ref) / abs(ref)
    return rel <= 1e-12, f"bicomplex vs complex expansion {rel:.1e}"


def _check_algebra():
    j1, j2 = mc.Multicomplex.unit(1, 2), mc.Multicomplex.unit(2, 2)
    ok = (j1 * j1).real == -1.0 and j1 * j2 == j2 * j1
    try:
        (1 + j1 * j2).inv()
        ok = False
    except mc.NotInvertible:
        pass
    z = mc.Multicomplex([0.3, 0.1, -0.2, 0.05, 0.01, 0.02, -0.03, 0.04])
    s, c = z.sin(), z.cos()
    resid = float(np.abs((s * s + c * c - 1).coeffs).max())
    return ok and resid < 1e-14, f"unit laws, zero divisor, sin^2+cos^2-1 = {resid:.1e}"


def _check_coefficient():
    from .fdtd.solver import material_coefficient
    from .fdtd.grid import EPS0
    er, h, dt = 2.2, 1e-5, 1e-12
    got = material_coefficient(np.array([er, h, h, 0.0]), dt)
    ref = dt / EPS0 * np.array([er**2 + 2 * h * h, -er * h, -er * h, 2 * h * h]) / (er * (er**2 + 4 * h * h))
    rel = float(np.abs(got - ref).max() / abs(ref[0]))
    return rel <= 1e-14, f"permittivity coefficient decomposition {rel:.1e}"


def _check_cavity_frequency():
    f = cav.CavitySetup().oracle.frequency
    return abs(f - 1.8015e9) < 1e6, f"f11 = {f / 1e9:.5f} GHz"


def _check_null_perturbation():
    s = cav.CavitySetup(a=0.02, b=0.02, steps=50)
    spec = cav.dimension_parameters(s, {"a": 1, "b": 1}, 0.0)
    sim, _ = cav.build(s, spec)
    ref, _ = cav.build(s)
    a, b = sim.run(s.steps).series["center"], ref.run(s.steps).series["center"]
    ok = np.array_equal(a[:, 0], b[:, 0]) and not np.any(a[:, 1:])
    return ok, "h = 0 reproduces the real run bit for bit"


def _check_taylor():
    m = TaylorModel.from_derivatives(1.0, [2.0, -3.0, 4.0, 6.0])
    xs = np.linspace(0.0, 2.0, 5)
    exact = 2.0 - 3.0 * (xs - 1) + 2.0 * (xs - 1) ** 2 + (xs - 1) ** 3
    err = float(np.abs(m.evaluate(xs) - exact).max())
    return err < 1e-14, f"cubic reproduced to {err:.1e}"


CHECKS = [
    ("stub first derivative", _check_stub_first),
    ("bicomplex expansion", _check_zeta),
    ("algebra", _check_algebra),
    ("coefficient decomposition", _check_coefficient),
    ("cavity frequency", _check_cavity_frequency),
    ("null perturbation", _check_null_perturbation),
    ("Taylor exactness", _check_taylor),
]


def verify(stream=None) -> bool:
    stream = stream or sys.stdout
    width = max(len(n) for n, _ in CHECKS)
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}", file=stream)
    return all_ok


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration (default: the shipped one)")
    common.add_argument("--out", type=Path, help="output directory (default: ./out/<command>)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--emit", choices=["csv"], default="csv", help="output format")
    common.add_argument("--verify", action="store_true", help="run the built-in oracle checks first")
    parser = argparse.ArgumentParser(prog="mcfdtd", description="Multicomplex-step FDTD sensitivity runs.")
    parser.add_argument("--version", action="version", version=f"mcfdtd {__version__}")
    parser.add_argument("--verify", action="store_true", help="run the built-in oracle checks")
    sub = parser.add_subparsers(dest="command")
    helps = {
        "stub-sweep": "derivative error versus step for the shorted stub",
        "cavity": "cavity derivative error versus step or mesh",
        "filter": "filter S-parameters and their sensitivities",
        "taylor": "Taylor models of S21 in substrate thickness",
        "bench-ops": "operation counts of perturbed versus real stepping",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    verify_ok = True
    if args.verify:
        verify_ok = verify()
    if args.command is None:
        if not args.verify:
            parser.print_help()
            return EXIT_CONFIG
        return EXIT_OK if verify_ok else EXIT_VERIFY
    if args.threads < 1:
        print("mcfdtd: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    path = args.config or cfg.shipped(cfg.DEFAULT_CONFIGS[args.command])
    try:
        conf = cfg.load(path, args.command)
    except cfg.ConfigError as exc:
        print(f"mcfdtd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Outputs(args.out or Path("out") / args.command, conf, args.command)
    try:
        summary = RUNNERS[args.command](conf, out, args.threads)
    except (Diverged, mc.NotInvertible, FloatingPointError) as exc:
        out.discard()
        print(f"mcfdtd: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BaseException:
        out.discard()
        raise
    out.commit()
    print(summary)
    print(f"outputs in {out.out} (config sha256 {conf.sha256[:12]})")
    return EXIT_OK if verify_ok else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
