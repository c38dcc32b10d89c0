"""Command line entry point.

Exit codes: 0 success, 1 usage or validation error, 2 runtime or protocol
error.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import bench
from .errors import ParseError, SpinfarmError, UsageError, ValidationError
from .geometry import FORMATS, SYNTH_KINDS, load_point_cloud, synth_cloud
from .runtime import (CostModel, WorkerConfig, parse_address, run_distributed, run_local,
                      run_worker, workers_from_slowdowns)
from .scheduling import SchedulerKind, chunk_sequence
from .spinimage import (DEFAULT_B, DEFAULT_N_FRACTION, DEFAULT_S, DEFAULT_W, SpinImageParams,
                        default_n, format_images, parse_images)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

KIND_CHOICES = [k.value for k in SchedulerKind]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_params(p):
    p.add_argument("--W", type=int, default=DEFAULT_W, help="image width in bins")
    p.add_argument("--B", type=float, default=DEFAULT_B, help="bin size")
    p.add_argument("--S", type=float, default=DEFAULT_S, help="support angle in radians")


def _add_emulation(p):
    p.add_argument("--image-cost", type=float, default=None,
                   help="modelled seconds per image (emulation); default uses real compute time")
    p.add_argument("--cost-variance", type=float, default=0.0)
    p.add_argument("--cost-seed", type=int, default=0)


def _add_source(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="point cloud file")
    src.add_argument("--synth", choices=SYNTH_KINDS, help="synthetic cloud kind")
    p.add_argument("--format", choices=FORMATS, default=None,
                   help="input format (default from file extension, else xyzn)")
    p.add_argument("--m", type=int, default=1000, help="synthetic point count")
    p.add_argument("--seed", type=int, default=0, help="synthetic cloud seed")
    count = p.add_mutually_exclusive_group()
    count.add_argument("--n", type=int, help="number of spin images")
    count.add_argument("--n-fraction", type=float, default=DEFAULT_N_FRACTION,
                       help="images as a fraction of the points (default 0.1)")
    p.add_argument("--kind", choices=KIND_CHOICES, default="static")
    p.add_argument("--output", default="-", help="spin-image file ('-' for stdout)")
    p.add_argument("--report", help="write the run report as JSON here")


def build_parser():
    parser = _Parser(prog="spinfarm", description="Spin-image generation with loop scheduling.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="generate spin images with local workers")
    _add_source(gen)
    _add_params(gen)
    _add_emulation(gen)
    gen.add_argument("--workers", type=int, default=None, help="worker count (default 1)")
    gen.add_argument("--slowdowns", default=None,
                     help="comma-separated per-worker slowdowns in worker id order")
    gen.add_argument("--dispatch-threads", type=int, default=2)

    trace = sub.add_parser("schedule-trace", help="print the chunks a scheduler issues")
    trace.add_argument("--kind", choices=KIND_CHOICES, required=True)
    trace.add_argument("--n", type=int, required=True)
    trace.add_argument("--p", type=int, required=True)

    b = sub.add_parser("bench", help="run a scaling experiment from a JSON spec")
    b.add_argument("--spec", required=True)
    b.add_argument("--out", required=True, help="directory for report.csv and report.json")

    ins = sub.add_parser("inspect", help="print one image from a spin-image file")
    ins.add_argument("--file", required=True)
    ins.add_argument("--index", type=int, required=True, help="origin index of the image")

    wk = sub.add_parser("worker", help="join a distributed run")
    wk.add_argument("--connect", required=True, help="master host:port")
    wk.add_argument("--id", type=int, default=0, help="label used in logs")
    wk.add_argument("--slowdown", type=float, default=1.0)
    wk.add_argument("--connect-timeout", type=float, default=30.0)
    _add_params(wk)
    _add_emulation(wk)

    srv = sub.add_parser("serve", help="run as master for remote workers")
    srv.add_argument("--listen", required=True, help="host:port to bind")
    srv.add_argument("--expected-workers", type=int, required=True)
    srv.add_argument("--accept-timeout", type=float, default=60.0)
    _add_source(srv)
    _add_params(srv)
    return parser


def _load_cloud(args):
    if args.synth:
        return synth_cloud(args.synth, args.m, args.seed)
    fmt = args.format or ("off" if Path(args.input).suffix.lower() == ".off" else "xyzn")
    return load_point_cloud(args.input, fmt)


def _params(args):
    return SpinImageParams(args.W, args.B, args.S)


def _count(args, cloud):
    if args.n is not None:
        if not 1 <= args.n <= cloud.M:
            raise UsageError(f"--n must lie in [1, {cloud.M}], got {args.n}")
        return args.n
    if not 0 < args.n_fraction <= 1:
        raise UsageError(f"--n-fraction must lie in (0, 1], got {args.n_fraction}")
    return default_n(cloud.M, args.n_fraction)


def _cost_model(args):
    if args.image_cost is None:
        return None
    return CostModel(args.image_cost, args.cost_variance, args.cost_seed)


def _write_output(args, images, report):
    text = format_images(images)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
    if args.report:
        doc = asdict(report)
        Path(args.report).write_text(json.dumps(doc, indent=2) + "\n")


def cmd_generate(args):
    cloud = _load_cloud(args)
    params = _params(args)
    N = _count(args, cloud)
    if args.slowdowns:
        try:
            slowdowns = [float(s) for s in args.slowdowns.split(",")]
        except ValueError:
            raise UsageError(f"--slowdowns must be comma-separated numbers, got {args.slowdowns!r}") from None
        if args.workers is not None and args.workers != len(slowdowns):
            raise UsageError(f"--workers {args.workers} disagrees with {len(slowdowns)} slowdowns")
        workers = workers_from_slowdowns(slowdowns)
    else:
        count = 1 if args.workers is None else args.workers
        workers = [WorkerConfig(k) for k in range(1, count + 1)]
    images, report = run_local(cloud, N, params, args.kind, workers,
                               cost_model=_cost_model(args),
                               dispatch_threads=args.dispatch_threads)
    _write_output(args, images, report)
    logging.getLogger(__name__).info("generated %d images with %d workers (%s) in %.3f s",
                                     N, len(workers), report.kind, report.t_par_s)
    return EXIT_OK


def cmd_schedule_trace(args):
    for start, end in chunk_sequence(args.kind, args.n, args.p):
        print(f"{start} {end} {end - start}")
    return EXIT_OK


def cmd_bench(args):
    spec = bench.ExperimentSpec.from_file(args.spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, stats = bench.run_experiment(spec)
    bench.emit_report(rows, stats, "csv", out / "report.csv")
    bench.emit_report(rows, stats, "json", out / "report.json")
    print(f"{len(rows)} runs written to {out}")
    return EXIT_OK


def cmd_inspect(args):
    images = parse_images(Path(args.file).read_text())
    for img in images:
        if img.origin_index == args.index:
            print(f"spinimage {img.origin_index} {img.width}")
            for row in img.bins.tolist():
                print(" ".join(str(v) for v in row))
            return EXIT_OK
    raise UsageError(f"no image with origin index {args.index} in {args.file}")


def cmd_worker(args):
    config = WorkerConfig(args.id, args.slowdown)
    stats = run_worker(parse_address(args.connect), _params(args), config,
                       cost_model=_cost_model(args), connect_timeout=args.connect_timeout)
    logging.getLogger(__name__).info("worker done: %d chunks, %.3f s computing",
                                     len(stats.chunks), stats.compute_s)
    return EXIT_OK


def cmd_serve(args):
    cloud = _load_cloud(args)
    params = _params(args)
    N = _count(args, cloud)
    images, report = run_distributed(
        cloud, N, params, args.kind, parse_address(args.listen, default_host="0.0.0.0"),
        args.expected_workers, accept_timeout=args.accept_timeout,
        on_listening=lambda addr: print(f"listening on {addr[0]}:{addr[1]}", file=sys.stderr, flush=True))
    _write_output(args, images, report)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "schedule-trace": cmd_schedule_trace,
    "bench": cmd_bench,
    "inspect": cmd_inspect,
    "worker": cmd_worker,
    "serve": cmd_serve,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ValidationError, UsageError) as exc:
        print(f"spinfarm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"spinfarm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpinfarmError, OSError) as exc:
        print(f"spinfarm: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
