"""Command-line front end: ``prunekit <command> ...``.

Exit codes: 0 success, 1 usage error, 2 pruning step failed,
3 I/O or checkpoint format error, 4 nothing to do (``bake`` on a
checkpoint without pruned parameters).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from .checkpoint import CheckpointError, read_checkpoint, to_bytes
from .plan import PlanError, execute_plan, load_plan
from .reparam import remove
from .report import sparsity_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STEP = 2
EXIT_IO = 3
EXIT_NOTHING = 4

METHOD_CHOICES = [
    "identity",
    "random_unstructured",
    "l1_unstructured",
    "random_structured",
    "ln_structured",
    "custom_from_mask",
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_amount(text: str):
    """``"3"`` is a count, ``"0.5"`` a fraction."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid amount {text!r}") from None


def parse_norm_arg(text: str):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return parse_amount(text)
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(f"invalid norm order {text!r}") from None


def _write_atomic(path: str, data: bytes) -> None:
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _run_steps(args, steps) -> int:
    store = read_checkpoint(args.input)
    execute_plan(steps, store)
    data = to_bytes(store)
    _write_atomic(args.output, data)
    print(sparsity_report(store).format())
    return EXIT_OK


def cmd_inspect(args) -> int:
    store = read_checkpoint(args.input)
    for name in store.names():
        t = store[name]
        status = "pruned" if name in store.hooks else "dense"
        print(f"{name}\t{'x'.join(map(str, t.shape))}\t{t.dtype}\t{status}")
    for name, t in store.buffers.items():
        if not (name.endswith("_mask") and name[:-5] in store.hooks):
            print(f"{name}\t{'x'.join(map(str, t.shape))}\t{t.dtype}\tbuffer")
    return EXIT_OK


def cmd_prune(args) -> int:
    step = {"select": args.param, "method": args.method}
    if args.amount is not None:
        step["amount"] = args.amount
    if args.dim is not None:
        step["dim"] = args.dim
    if args.n is not None:
        step["n"] = args.n
    if args.method in ("random_unstructured", "random_structured"):
        step["seed"] = args.seed
    if args.mask is not None:
        step["mask"] = json.loads(Path(args.mask).read_text())
    return _run_steps(args, [step])


def cmd_global(args) -> int:
    return _run_steps(args, [{"global": args.include, "amount": args.amount, "seed": args.seed}])


def cmd_plan(args) -> int:
    return _run_steps(args, load_plan(args.plan))


def cmd_bake(args) -> int:
    store = read_checkpoint(args.input)
    names = args.param or list(store.hooks)
    for name in names:
        if name not in store.hooks:
            raise PlanError(f"parameter {name!r} is not pruned")
    for name in names:
        remove(store, name)
    _write_atomic(args.output, to_bytes(store))
    if not names:
        print("nothing to bake: no pruned parameters")
        return EXIT_NOTHING
    print(f"baked {len(names)} parameter(s): {', '.join(names)}")
    return EXIT_OK


def cmd_report(args) -> int:
    report = sparsity_report(read_checkpoint(args.input))
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.format())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prunekit", description="Prune tensors stored in .pkt checkpoints.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("inspect", help="list tensors, shapes and pruning status")
    p.add_argument("input")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("prune", help="prune one parameter (or a glob of them)")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--param", required=True, help="parameter name or glob pattern")
    p.add_argument("--method", required=True, choices=METHOD_CHOICES)
    p.add_argument("--amount", type=parse_amount, help="integer count or fraction in [0, 1]")
    p.add_argument("--dim", type=int)
    p.add_argument("--n", type=parse_norm_arg, help="norm order for ln_structured (number or 'inf')")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask", help="JSON file with a nested-list mask for custom_from_mask")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("global", help="prune the smallest magnitudes pooled across parameters")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--include", nargs="+", required=True, metavar="PATTERN")
    p.add_argument("--amount", type=parse_amount, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_global)

    p = sub.add_parser("plan", help="run a JSON pruning plan")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--plan", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bake", help="make pruning permanent and drop masks")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--param", action="append", help="parameter to bake (default: all pruned)")
    p.set_defaults(func=cmd_bake)

    p = sub.add_parser("report", help="print sparsity per parameter")
    p.add_argument("input")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PlanError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STEP
    except (OSError, CheckpointError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
