"""Command line driver: ``skclt <subcommand> [flags]``.

Exit codes: 0 success, 2 regime error, 3 validation failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from skclt.errors import ConvergenceError, RegimeError
from skclt.io import write_csv, write_json
from skclt.gibbs_exact import CSV_COLUMNS
from skclt.mc import SAMPLE_COLUMNS, SUMMARY_COLUMNS, ChainConfig, disorder_ensemble
from skclt.params import ModelParams

EXIT_OK, EXIT_REGIME, EXIT_VALIDATION, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "beta": 0.25, "h": 0.3, "n_spins": 12, "sizes": "32,64,128,256", "replicas": 1,
    "disorders": 200, "sweeps": 20000, "burnin": 2000, "thin": 5, "chains": 4, "seed": 0,
    "out": None, "format": "csv", "workers": 1, "samples_out": None, "sigma2": None, "dump": None,
}


class ValidationFailure(Exception):
    pass


def _sizes(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skclt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spins=False, sizes=False, chains=False):
        sp.add_argument("--config", help="JSON file with flag values; explicit flags override it")
        sp.add_argument("--beta", type=float, default=None)
        sp.add_argument("--h", type=float, default=None)
        if spins:
            sp.add_argument("--n-spins", dest="n_spins", type=int, default=None)
        if sizes:
            sp.add_argument("--sizes", default=None, help="comma-separated system sizes")
        if chains:
            sp.add_argument("--disorders", type=int, default=None)
            sp.add_argument("--sweeps", type=int, default=None)
            sp.add_argument("--burnin", type=int, default=None)
            sp.add_argument("--thin", type=int, default=None)
            sp.add_argument("--chains", type=int, default=None)
            sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("csv", "json"), default=None)
        return sp

    sp = common(sub.add_parser("theory", help="closed-form predictions as JSON"))
    sp.add_argument("--n", "--replicas", dest="replicas", type=int, default=None)
    sp = common(sub.add_parser("enumerate", help="exact Gibbs averages for small N"), spins=True)
    sp.add_argument("--disorders", type=int, default=None)
    common(sub.add_parser("validate", help="Monte Carlo vs enumeration"), sizes=True, chains=True)
    sp = common(sub.add_parser("mc", help="per-disorder Monte Carlo summaries"), spins=True, chains=True)
    sp.add_argument("--samples-out", dest="samples_out", default=None, help="also stream thinned samples here")
    common(sub.add_parser("clt-scan", help="annealed CLT scan over sizes"), sizes=True, chains=True)
    common(sub.add_parser("quenched-scan", help="quenched CLT scan over sizes"), sizes=True, chains=True)
    common(sub.add_parser("quenched-mean", help="law of the Gibbs mean across disorders"), sizes=True, chains=True)
    sp = common(sub.add_parser("stein-check", help="solve and check the Stein test functions"))
    sp.add_argument("--sigma2", type=float, default=None)
    sp.add_argument("--dump", default=None, help="directory for (x, f, f') CSV files")
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    opts = dict(DEFAULTS)
    if args.command == "validate":
        opts.update(sizes="8,10,12", disorders=20)
    elif args.command == "enumerate":
        opts.update(disorders=1)
    elif args.command == "theory":
        opts.update(format="json")
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        cfg = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        for k, v in cfg.items():
            opts[k.replace("-", "_")] = v
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command"):
            opts[k] = v
    opts["command"] = args.command
    return opts


def _config(o) -> ChainConfig:
    return ChainConfig(sweeps=int(o["sweeps"]), burn_in=int(o["burnin"]), thin=int(o["thin"]),
                       n_chains=int(o["chains"]))


def _out(o, default_name) -> Path:
    return Path(o["out"] or default_name)


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _manifest(o, name, grid, config=None):
    from skclt.experiments import RunManifest
    return RunManifest(name, int(o["seed"]), grid, config.to_dict() if config else None,
                       {k: v for k, v in o.items() if k != "command"})


def _emit(rows, path: Path, fmt: str, columns=None) -> Path:
    if fmt == "json":
        return write_json(path, rows)
    return write_csv(path, rows, columns)


def _with_manifest(o, name, grid, config, body):
    out = _out(o, f"{name}.{o['format']}")
    mpath = _sidecar(out, ".manifest.json")
    man = _manifest(o, name, grid, config)
    man.write(mpath)
    try:
        outputs, ok = body(out)
    except Exception:
        man.finalize(mpath, [], status="error")
        raise
    man.finalize(mpath, outputs, status="ok" if ok else "validation_failed")
    if not ok:
        raise ValidationFailure(f"{name}: validation failed, see {out}")
    return out


def cmd_theory(o):
    from skclt.experiments import run_theory
    params = ModelParams(float(o["beta"]), float(o["h"]))
    report = run_theory(params, int(o["replicas"]))
    out = _out(o, "theory.json")
    if o["format"] == "csv" and o["out"]:
        d = report.to_dict()
        flat = {k: v for k, v in d.items() if not isinstance(v, list)}
        flat.update({f"q{i + 1}": v for i, v in enumerate(d["q"])})
        write_csv(out, [flat])
    else:
        write_json(out, report.to_dict())
    print(out)


def cmd_enumerate(o):
    from skclt.experiments import run_exact_average
    params = ModelParams(float(o["beta"]), float(o["h"]), int(o["n_spins"]))
    n_dis = int(o["disorders"])

    def body(out):
        avg, rows = run_exact_average(params, n_dis, int(o["seed"]))
        if o["format"] == "json":
            write_json(out, {"per_disorder": rows, "overlap_dev2": avg.overlap_dev2, "mean_H": avg.mean_H,
                             "second_H": avg.second_H, "quenched_var_H": avg.quenched_var_H,
                             "annealed_var_H": avg.annealed_var_H, "var_mean_H": avg.var_mean_H})
        else:
            write_csv(out, rows, CSV_COLUMNS)
        return [out], True

    print(_with_manifest(o, "enumerate", [params.to_dict()], None, body))


def cmd_validate(o):
    from skclt.experiments import run_validate
    cfg = _config(o)
    sizes = _sizes(o["sizes"])

    def body(out):
        rows, ok = run_validate(float(o["beta"]), float(o["h"]), sizes, int(o["disorders"]), cfg, int(o["seed"]))
        _emit(rows, out, o["format"])
        bad = [r for r in rows if not r["within_4se"]]
        for r in bad:
            print(f"beyond 4 SE: N={r['N']} disorder={r['disorder_idx']} {r['observable']} z={r['z']:.2f}",
                  file=sys.stderr)
        return [out], ok

    grid = [ModelParams(float(o["beta"]), float(o["h"]), n).to_dict() for n in sizes]
    print(_with_manifest(o, "validate", grid, cfg, body))


def cmd_mc(o):
    cfg = _config(o)
    params = ModelParams(float(o["beta"]), float(o["h"]), int(o["n_spins"]))

    def body(out):
        ens = disorder_ensemble(params, int(o["disorders"]), cfg, int(o["seed"]), workers=int(o["workers"]))
        _emit(ens.summary_rows(), out, o["format"], SUMMARY_COLUMNS)
        outputs = [out]
        if o.get("samples_out"):
            outputs.append(write_csv(o["samples_out"], ens.sample_rows(), SAMPLE_COLUMNS))
        return outputs, True

    print(_with_manifest(o, "mc", [params.to_dict()], cfg, body))


def _scan(o, name, analysis):
    from skclt.experiments import simulate_sizes
    cfg = _config(o)
    sizes = _sizes(o["sizes"])
    beta, h = float(o["beta"]), float(o["h"])

    def body(out):
        ens = simulate_sizes(beta, h, sizes, int(o["disorders"]), cfg, int(o["seed"]), int(o["workers"]))
        return analysis(ens, out), True

    grid = [ModelParams(beta, h, n).to_dict() for n in sizes]
    print(_with_manifest(o, name, grid, cfg, body))


def cmd_clt_scan(o):
    from skclt.experiments import scan_rows

    def analysis(ens, out):
        rows, summary, _ = scan_rows(ens)
        _emit([r.flat() for r in rows], out, o["format"])
        side = write_json(_sidecar(out, ".summary.json"), summary)
        return [out, side]

    _scan(o, "clt-scan", analysis)


def cmd_quenched_scan(o):
    from skclt.experiments import scan_rows

    def analysis(ens, out):
        rows, summary, levy = scan_rows(ens)
        keep = ("N", "beta", "h", "n_disorders", "master_seed", "sweeps", "burn_in", "thin", "n_chains",
                "levy_quenched_median", "levy_quenched_iqr", "levy_quenched_null_median", "var_quenched_H",
                "var_quenched_H_se", "sigma_Q2_sim", "sigma_Q2_sim_se", "sigma_Q2_rs_hessian",
                "sigma_Q2_variant_A", "sigma_Q2_variant_B", "quenched_stein", "quenched_stein_se",
                "quenched_stein_naive", "variance_concentration", "variance_concentration_se",
                "variance_concentration_naive")
        _emit([{k: r.flat()[k] for k in keep} for r in rows], out, o["format"])
        per = [{"N": n, "disorder_idx": i, "seed": e.disorder_seed, "levy": float(v)}
               for n in sorted(levy) for i, (e, v) in enumerate(zip(ens[n].estimates, levy[n]))]
        side = write_csv(_sidecar(out, ".per_disorder.csv"), per)
        summ = write_json(_sidecar(out, ".summary.json"), summary)
        return [out, side, summ]

    _scan(o, "quenched-scan", analysis)


def cmd_quenched_mean(o):
    from skclt.experiments import quenched_mean_table, quenched_variance_limit
    from skclt.theory import theory_report

    def analysis(ens, out):
        sizes = sorted(ens)
        theory = theory_report(ModelParams(float(o["beta"]), float(o["h"])), 1)
        sq = quenched_variance_limit(ens) if len(sizes) >= 2 else {"limit": theory.sigma_Q2_rs_hessian}
        tables = [quenched_mean_table(ens[n], theory.sigma_A2_H, sq["limit"]) for n in sizes]
        rows = [{"N": t["N"], "beta": float(o["beta"]), "h": float(o["h"]), "n_disorders": t["n_disorders"],
                 "master_seed": int(o["seed"]), "variance_gap_theory": t["variance_gap_theory"],
                 "across_disorder_variance": t["across_disorder_variance"],
                 "across_disorder_variance_se": t["across_disorder_variance_se"], "levy": t["levy"]}
                for t in tables]
        _emit(rows, out, o["format"])
        cf = [{"N": t["N"], **c} for t in tables for c in t["cf"]]
        side = write_csv(_sidecar(out, ".cf.csv"), cf)
        means = [{"N": t["N"], "disorder_idx": i, "mean_H": m} for t in tables for i, m in enumerate(t["means"])]
        side2 = write_csv(_sidecar(out, ".means.csv"), means)
        return [out, side, side2]

    _scan(o, "quenched-mean", analysis)


def cmd_stein_check(o):
    from skclt import stats
    from skclt.theory import sigma_A2
    sigma2 = o.get("sigma2")
    if sigma2 is None:
        sigma2 = sigma_A2(ModelParams(float(o["beta"]), float(o["h"])))
    sigma = math.sqrt(float(sigma2))
    rows, ok = [], True
    for tf in stats.battery():
        st = stats.stein_solve(tf, None, sigma, check=False)
        resid = st.ode_residual()
        passed = all(st.observed[k] <= st.bounds[k] + 1e-6 for k in st.bounds) and resid < 1e-8
        ok &= passed
        rows.append({"function": tf.name, "sigma2": sigma ** 2, "lipschitz": tf.lipschitz,
                     **{f"sup_{k}": v for k, v in st.observed.items()},
                     **{f"bound_{k}": v for k, v in st.bounds.items()}, "ode_residual": resid, "ok": passed})
        if o.get("dump"):
            write_csv(Path(o["dump"]) / f"stein_{tf.name}.csv", st.dump_rows(), ["x", "f", "fprime"])
    out = _out(o, f"stein-check.{o['format']}")
    _emit(rows, out, o["format"])
    print(out)
    if not ok:
        raise ValidationFailure("Stein bound check failed")


COMMANDS = {"theory": cmd_theory, "enumerate": cmd_enumerate, "validate": cmd_validate, "mc": cmd_mc,
            "clt-scan": cmd_clt_scan, "quenched-scan": cmd_quenched_scan, "quenched-mean": cmd_quenched_mean,
            "stein-check": cmd_stein_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args)
        COMMANDS[args.command](opts)
    except (RegimeError, ConvergenceError) as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except ValidationFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_REGIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
