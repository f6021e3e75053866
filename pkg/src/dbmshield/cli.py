"""Command line interface: ``dbmshield <subcommand> ...``.

Exit codes
----------
0  success
1  unexpected internal error
2  usage error (unknown subcommand or flag, malformed flag value)
3  configuration error (invalid config file, logins file or parameter)
4  file or I/O error
5  remote error reported by a site or while reaching it
6  refused by a site's access policy (unauthorized, forbidden operation,
   export disabled, disclosure guard)
7  replay produced outputs that differ from the manifest checksums

The environment variable ``DBMSHIELD_CONFIG_DIR`` names a directory searched
for relative ``--config`` and ``--logins`` paths that do not exist in the
working directory.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import write_csv
from .experiment.runner import parse_experiment_config, render_report, run_experiment
from .experiment.snp import SnpDataSpec, gen_snp_data
from .federation import protocol as P
from .federation.client import (
    DEFAULT_TIMEOUT, RemoteCallError, RemoteError, login, pool_samples, read_logins,
)
from .federation.server import SiteServer, load_site_config, parse_address
from .plotting import write_monitoring_svg
from .training import METRICS, MonitoringLog

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_REMOTE = 5
EXIT_REFUSED = 6
EXIT_REPLAY_MISMATCH = 7

CONFIG_DIR_ENV = "DBMSHIELD_CONFIG_DIR"
PATH_ARGS = ("out", "labels", "logins", "config", "dir")
MANIFEST_FORMAT = "dbmshield-manifest"
REFUSAL_KINDS = {P.UNAUTHORIZED, P.FORBIDDEN_OPERATION, P.EXPORT_DISABLED, P.DISCLOSURE_GUARD}
EVAL_OPS = ("reconstruction_error", "exact_loglikelihood", "rbm_loglikelihood",
            "dbm_loglikelihood", "logproblowerbound")

log = logging.getLogger("dbmshield")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{message} (see '{self.prog} --help')", EXIT_USAGE)


# -- helpers -----------------------------------------------------------------------

def int_list(text):
    try:
        values = [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def name_list(text):
    return [x for x in text.replace(" ", "").split(",") if x]


def resolve_config_path(path):
    """Return ``path`` if it exists, else look it up in ``$DBMSHIELD_CONFIG_DIR``."""
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p.resolve()
    base = os.environ.get(CONFIG_DIR_ENV)
    if base and (Path(base) / p).exists():
        return (Path(base) / p).resolve()
    return p.resolve()


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_manifest(args, outputs, path):
    """Record command, resolved arguments, versions and output checksums."""
    recorded = {}
    for k, v in vars(args).items():
        if k in ("handler", "replay", "verbose"):
            continue
        if k in PATH_ARGS and v is not None:
            v = Path(v).resolve()
        recorded[k] = _jsonable(v)
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "command": args.command,
        "args": recorded,
        "outputs": {str(Path(p).resolve()): sha256(p) for p in outputs},
        "versions": {"dbmshield": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return Path(path)


def _finish(args, outputs, manifest_path):
    if getattr(args, "replay", None):
        return outputs
    outputs = [Path(p) for p in outputs]
    write_manifest(args, outputs, manifest_path)
    print(f"wrote {len(outputs)} file(s); manifest {manifest_path}")
    return outputs


def _open_sites(args, workspace):
    records = read_logins(resolve_config_path(args.logins))
    return login(records, assign=True, timeout=args.timeout, workspace=workspace)


# -- subcommands -------------------------------------------------------------------

def cmd_serve(args):
    cfg = load_site_config(resolve_config_path(args.config))
    if args.address:
        cfg = replace(cfg, listen_address=parse_address(args.address))
    server = SiteServer(cfg)
    host, port = server.bind()
    print(f"serving on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return []


def cmd_gen_data(args):
    spec = SnpDataSpec(args.n_samples, args.n_variables, args.n_patterns, args.pattern_size,
                       args.noise_p, args.seed)
    data = gen_snp_data(spec)
    out = Path(args.out)
    write_csv(data.data, out)
    outputs = [out]
    if args.labels:
        with open(args.labels, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "label"])
            w.writerows((i + 1, lbl) for i, lbl in enumerate(data.labels))
        outputs.append(Path(args.labels))
    return _finish(args, outputs, out.with_name(out.name + ".manifest.json"))


def _write_site_monitoring(per_site, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("site", "epoch", "metric", "dataset_label", "value"))
        for site in sorted(per_site):
            for e in per_site[site].entries:
                w.writerow([site, e.epoch, e.metric, e.dataset_label, repr(e.value)])


def cmd_train(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fit_args = {
        "data": "D.Train" if args.split > 0 else "D",
        "label": args.model,
        "nhiddens": args.nhiddens,
        "epochs": args.epochs,
        "learningrate": args.learningrate,
        "epochspretraining": args.pretrain_epochs,
        "learningratepretraining": args.pretrain_lr,
        "batchsize": args.batchsize,
        "n_particles": args.n_particles,
        "monitoring_metrics": args.monitoring_metrics,
    }
    if args.monitor:
        fit_args["monitoringdata"] = ["D.Train", "D.Test"] if args.split > 0 else ["D"]
    with _open_sites(args, args.workspace) as h:
        h.call("set_seed", {"seed": args.seed})
        if args.split > 0:
            h.call("splitdata", {"data": "D", "ratio": args.split,
                                 "train": "D.Train", "test": "D.Test"})
        results = h.call("fitdbm", fit_args)
    logs = {site: MonitoringLog.from_records(r["monitoring"]) for site, r in results.items()}
    mon_csv = out / "monitoring.csv"
    _write_site_monitoring(logs, mon_csv)
    series = {}
    for site, mlog in logs.items():
        prefix = f"{site}: " if len(logs) > 1 else ""
        for e in mlog.entries:
            xs, ys = series.setdefault((e.metric, prefix + e.dataset_label), ([], []))
            xs.append(e.epoch)
            ys.append(e.value)
    svg = write_monitoring_svg(series, out / "monitoring.svg", title=f"Training of {args.model}")
    for site, r in sorted(results.items()):
        note = " (replaced existing object)" if r["overwritten"] else ""
        print(f"{site}: trained {r['label']}{note}")
    return _finish(args, [mon_csv, svg], out / "manifest.json")


def cmd_sample(args):
    req = {"model": args.model, "n": args.n}
    if args.burnin is not None:
        req["burnin"] = args.burnin
    if args.condition:
        idx, vals = [], []
        for item in args.condition.split(","):
            col, sep, val = item.partition("=")
            if not sep:
                raise CliError(f"--condition entries must be index=value, got {item!r}", EXIT_CONFIG)
            idx.append(int(col))
            vals.append(int(val))
        req.update(conditionindices=idx, conditionvalues=vals)
    with _open_sites(args, args.workspace) as h:
        if args.seed is not None:
            h.call("set_seed", {"seed": args.seed})
        drawn = h.call("samples", req)
    pooled = pool_samples(drawn)
    out = Path(args.out)
    write_csv(pooled, out)
    print(f"pooled {pooled.n_rows} synthetic rows from {len(drawn)} site(s)")
    return _finish(args, [out], out.with_name(out.name + ".manifest.json"))


def cmd_evaluate(args):
    ais = {"ntemperatures": args.ntemperatures, "nparticles": args.nparticles}
    rows = []
    with _open_sites(args, args.workspace) as h:
        if args.seed is not None:
            h.call("set_seed", {"seed": args.seed})
        for metric in args.metrics:
            req = {"model": args.model, "data": args.data}
            if metric != "reconstruction_error":
                req.update(ais)
            for site, payload in sorted(h.call(metric, req).items()):
                rows.append((site, metric, args.data, payload["value"]))
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("site", "metric", "dataset_label", "value"))
        w.writerows((s, m, d, repr(float(v))) for s, m, d, v in rows)
    for s, m, d, v in rows:
        print(f"{s}\t{m}\t{d}\t{v:.6g}")
    return _finish(args, [out], out.with_name(out.name + ".manifest.json"))


def cmd_experiment(args):
    text, base = "", None
    if args.config:
        path = resolve_config_path(args.config)
        text, base = path.read_text(), path.parent
    overrides = {"sites": ",".join(map(str, args.sites)) if args.sites else None,
                 "mode": args.mode, "seed": args.seed,
                 "output_dir": str(Path(args.out).resolve()) if args.out else None}
    cfg = parse_experiment_config(text, base_dir=base, overrides=overrides)
    results = run_experiment(cfg)
    for r in results:
        m = r.metrics
        print(f"{r.n_sites:>3} site(s): marginal diff {m.marginal_max_abs_diff:.3f}, "
              f"recovery {m.pattern_recovery_rate:.3f}, within/between lift "
              f"{m.within_set_cooccurrence:.2f}/{m.between_set_cooccurrence:.2f}, "
              f"noise {m.noise_rate:.3f}")
    out = cfg.output_dir
    outputs = sorted(p for p in out.iterdir()
                     if p.is_file() and p.name != "manifest.json" and p.suffix != ".json")
    return _finish(args, outputs, out / "manifest.json")


def cmd_report(args):
    written = render_report(Path(args.dir))
    for p in written:
        print(p)
    return _finish(args, written, Path(args.dir) / "report.manifest.json")


# -- parser ------------------------------------------------------------------------

def _add_remote(p, default_workspace="dbmshield"):
    p.add_argument("--logins", required=True, help="CSV with columns server,url,user,password,table")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT,
                   help="per-request timeout in seconds (default %(default)s)")
    p.add_argument("--workspace", default=default_workspace,
                   help="server-side workspace name shared by train/sample/evaluate")


def build_parser():
    parser = _Parser(prog="dbmshield", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"dbmshield {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--replay", metavar="MANIFEST",
                        help="re-run the command recorded in a manifest and verify its outputs")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("serve", help="run a federation site server")
    p.add_argument("--config", required=True, help="site config file")
    p.add_argument("--address", help="override listen address host:port")
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("gen-data", help="write the SNP-like benchmark data as CSV")
    d = SnpDataSpec()
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="also write case/control labels to this CSV")
    p.add_argument("--n-samples", type=int, default=d.n_samples)
    p.add_argument("--n-variables", type=int, default=d.n_variables)
    p.add_argument("--n-patterns", type=int, default=d.n_patterns)
    p.add_argument("--pattern-size", type=int, default=d.pattern_size)
    p.add_argument("--noise-p", type=float, default=d.noise_p)
    p.add_argument("--seed", type=int, default=d.seed)
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("train", help="train a DBM at every site listed in a logins file")
    _add_remote(p)
    p.add_argument("--nhiddens", type=int_list, default=[50, 25, 15])
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--learningrate", type=float, default=0.05)
    p.add_argument("--pretrain-epochs", type=int, default=30)
    p.add_argument("--pretrain-lr", type=float, default=0.005)
    p.add_argument("--batchsize", type=int, default=20)
    p.add_argument("--n-particles", type=int, default=100)
    p.add_argument("--split", type=float, default=0.2, help="test fraction (0 disables the split)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", default="dbm", help="server-side label for the model")
    p.add_argument("--monitoring-metrics", type=name_list, default=["reconstruction_error"],
                   help=f"comma-separated subset of {','.join(METRICS)}")
    p.add_argument("--no-monitor", dest="monitor", action="store_false",
                   help="skip per-epoch monitoring")
    p.add_argument("--out", default="train-output", help="directory for monitoring CSV and SVG")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("sample", help="draw and pool synthetic rows from trained site models")
    _add_remote(p)
    p.add_argument("--model", default="dbm")
    p.add_argument("--n", type=int, required=True, help="rows per site")
    p.add_argument("--burnin", type=int)
    p.add_argument("--condition", help="clamp visible units, e.g. 0=1,4=0 (0-based columns)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("evaluate", help="compute aggregate model metrics at every site")
    _add_remote(p)
    p.add_argument("--model", default="dbm")
    p.add_argument("--data", default="D.Test", help="server-side dataset label")
    p.add_argument("--metrics", type=name_list,
                   default=["reconstruction_error", "dbm_loglikelihood", "logproblowerbound"],
                   help=f"comma-separated subset of {','.join(EVAL_OPS)}")
    p.add_argument("--ntemperatures", type=int, default=100)
    p.add_argument("--nparticles", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("experiment", help="run the multi-site SNP pattern scenarios")
    p.add_argument("--config", help="experiment config file (key = value lines)")
    p.add_argument("--sites", type=int_list, help="site counts, e.g. 1,2,20")
    p.add_argument("--mode", choices=["in-process", "networked"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("report", help="render heatmaps and the metrics table of an experiment")
    p.add_argument("--dir", required=True, help="experiment output directory")
    p.set_defaults(handler=cmd_report)
    return parser


COMMANDS = {
    "serve": cmd_serve,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def _validate(args):
    if args.command == "evaluate":
        bad = [m for m in args.metrics if m not in EVAL_OPS]
        if bad:
            raise CliError(f"unknown evaluation metric(s): {', '.join(bad)}", EXIT_CONFIG)
    if args.command == "train":
        bad = [m for m in args.monitoring_metrics if m not in METRICS]
        if bad:
            raise CliError(f"unknown monitoring metric(s): {', '.join(bad)}", EXIT_CONFIG)
        if not 0 <= args.split < 1:
            raise CliError("--split must lie in [0, 1)", EXIT_CONFIG)


def replay(manifest_path):
    """Re-run a recorded command and compare output checksums."""
    try:
        manifest = json.loads(Path(manifest_path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"manifest is not valid JSON: {exc}", EXIT_CONFIG) from None
    if manifest.get("format") != MANIFEST_FORMAT:
        raise CliError(f"{manifest_path} is not a dbmshield manifest", EXIT_CONFIG)
    command = manifest.get("command")
    if command not in COMMANDS:
        raise CliError(f"manifest names unknown command {command!r}", EXIT_CONFIG)
    args = argparse.Namespace(**manifest["args"])
    args.handler = COMMANDS[command]
    args.replay = str(manifest_path)
    args.handler(args)
    mismatched = [p for p, digest in manifest["outputs"].items()
                  if not Path(p).is_file() or sha256(p) != digest]
    if mismatched:
        raise CliError(f"replay differs from manifest for {len(mismatched)} file(s): "
                       f"{mismatched[0]}", EXIT_REPLAY_MISMATCH)
    print(f"replay of {command} reproduced {len(manifest['outputs'])} file(s) bit-identically")


def _remote_code(exc):
    kinds = set(exc.kinds.values()) if isinstance(exc, RemoteCallError) else {exc.kind}
    return EXIT_REFUSED if kinds & REFUSAL_KINDS else EXIT_REMOTE


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.replay:
            if args.command:
                raise CliError("--replay takes no subcommand", EXIT_USAGE)
            replay(args.replay)
            return EXIT_OK
        if not args.command:
            parser.print_help()
            return EXIT_USAGE
        _validate(args)
        args.handler(args)
        return EXIT_OK
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except CliError as exc:
        code, msg = exc.code, str(exc)
    except (RemoteCallError, RemoteError) as exc:
        code, msg = _remote_code(exc), f"remote error: {exc}"
    except (ValueError, TypeError) as exc:
        code, msg = EXIT_CONFIG, f"invalid configuration: {exc}"
    except OSError as exc:
        code, msg = EXIT_IO, f"I/O error: {exc}"
    except KeyboardInterrupt:
        code, msg = 130, "interrupted"
    except Exception as exc:  # noqa: BLE001
        code, msg = EXIT_INTERNAL, f"internal error: {type(exc).__name__}: {exc}"
    print(f"dbmshield: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
