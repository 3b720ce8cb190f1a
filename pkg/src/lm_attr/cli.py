"""``lm-attr`` command line."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import render
from .config import build_input, build_model, build_target, load_config, method_params
from .errors import CapabilityError, ConfigError, LMAttrError, SizeError, TransportError
from .orchestrate import AttributionResult, attribute, evaluation_budget

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BACKEND = 0, 1, 2, 3

BACKENDS = {
    "mock": "table-driven conditional probabilities (scores, generates, logits)",
    "toylm": "mean-pooling toy LM with analytic gradients (scores, generates, logits, gradients)",
    "http": "OpenAI-compatible completions endpoint (scores, generates); key from LM_ATTR_API_KEY",
    "subprocess": "line-delimited JSON child process (scores, generates)",
}

RENDER_FORMATS = ("svg", "html", "term", "csv", "png", "pdf")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lm-attr", description="feature attribution for generative text models")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an attribution from a config document")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, help="override method.seed")
    run.add_argument("--out", help="result JSON path (default: stdout only shows the table)")
    run.add_argument("--figure", help="also save a matplotlib heatmap (png/pdf/svg by suffix)")
    run.add_argument("--no-cache", action="store_true")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--timeout-s", type=float)
    run.add_argument("--timing", action="store_true", help="record wall_ms in the result file")

    rend = sub.add_parser("render", help="render a saved result")
    rend.add_argument("result")
    rend.add_argument("--format", choices=RENDER_FORMATS, default="term")
    rend.add_argument("-o", "--out")
    rend.add_argument("--orientation", choices=("features-top", "features-left"), default="features-top")

    budget = sub.add_parser("budget", help="estimate model evaluations for a config")
    budget.add_argument("--config", required=True)

    sub.add_parser("backends", help="list model backends")
    return parser


def cmd_run(args) -> int:
    doc = load_config(args.config)
    name, seed, hyper = method_params(doc["method"])
    if args.seed is not None:
        seed = args.seed
    inp = build_input(doc["input"])
    target = build_target(doc.get("target"))
    model = build_model(doc["model"], timeout_s=args.timeout_s)
    started = time.perf_counter()
    try:
        result = attribute(
            model, inp, name, target, seed=seed, workers=args.workers, cache=not args.no_cache, **hyper
        )
    finally:
        model.close()
    print(f"wall time {1000 * (time.perf_counter() - started):.1f} ms", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(result.to_json(timing=args.timing), encoding="utf-8")
    if args.figure:
        render.plot_heatmap(result, args.figure)
    sys.stdout.write(render.render_terminal(result))
    return EXIT_OK


def _load_result(path) -> AttributionResult:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read result {path}: {exc}") from exc
    return AttributionResult.from_json(text)


def cmd_render(args) -> int:
    result = _load_result(args.result)
    fmt = args.format
    if fmt in ("png", "pdf"):
        if not args.out:
            raise ConfigError(f"--format {fmt} needs -o/--out")
        render.plot_heatmap(result, args.out)
        return EXIT_OK
    if fmt == "svg":
        text = render.render_heatmap(result)
    elif fmt == "html":
        text = render.render_html(result)
    elif fmt == "csv":
        text = render.render_csv(result)
    else:
        text = render.render_terminal(result, orientation=args.orientation)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_budget(args) -> int:
    doc = load_config(args.config)
    name, _, hyper = method_params(doc["method"])
    inp = build_input(doc["input"])
    try:
        count = evaluation_budget(name, inp.n_groups, **hyper)
    except SizeError as exc:
        print(f"refused: {exc}")
        return EXIT_CONFIG
    print(f"{count} evaluations")
    return EXIT_OK


def cmd_backends(args) -> int:
    for name, desc in BACKENDS.items():
        print(f"{name:<11} {desc}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "render": cmd_render, "budget": cmd_budget, "backends": cmd_backends}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CapabilityError, SizeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except LMAttrError as exc:
        cause = getattr(exc, "cause", None)
        if isinstance(cause, TransportError):
            print(f"backend error: {exc}", file=sys.stderr)
            return EXIT_BACKEND
        if isinstance(cause, ConfigError):
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
