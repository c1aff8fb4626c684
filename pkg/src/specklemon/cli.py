"""Command-line interface; a thin client over the monitoring service.

Exit codes: 0 success (and thresholds passed), 2 thresholds failed,
1 any other error.
"""

import argparse
import sys

import yaml

from .client import ClientError, HarnessClient
from .config import default_config_yaml, load_config
from .service import (
    BenchRequest,
    EvalRequest,
    PredictRequest,
    SynthRequest,
    TrainRequest,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD_FAIL = 2


def _load_config_dict(path: "str | None") -> "dict | None":
    """Parse the YAML locally so remote servers never need our filesystem."""
    if path is None:
        return None
    return load_config(path).model_dump()


def _emit(payload) -> None:
    yaml.safe_dump(payload, sys.stdout, sort_keys=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specklemon",
        description="Synthesize speckle datasets, train and evaluate the "
                    "ablation monitor, benchmark and run predictions.",
    )
    parser.add_argument("--server", default=None,
                        help="URL of a running specklemon service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize dataset files from the configured sweeps")
    p.add_argument("--config", default=None, help="harness config YAML")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="dataset seed override")
    p.add_argument("--mode", choices=["both", "groove", "drill"], default="both")

    p = sub.add_parser("train", help="train a monitor network on a dataset file")
    p.add_argument("--config", default=None)
    p.add_argument("--dataset", required=True, help="dataset .spkl file")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None, help="training seed override")
    p.add_argument("--resume", action="store_true", help="continue from the existing checkpoint")

    p = sub.add_parser("eval", help="evaluate a checkpoint against a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--threshold-file", default=None,
                   help="YAML of acceptance thresholds; exit 2 if any fails")
    p.add_argument("--out", default=None)
    p.add_argument("--split", choices=["val", "train", "all"], default="val")

    p = sub.add_parser("bench", help="measure single-triplet forward latency")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--warmup", type=int, default=20)
    p.add_argument("--out", default=None)

    p = sub.add_parser("predict", help="predict on a saved frame stack (.npy)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--frames", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = sub.add_parser("init-config", help="print (or write) the default config YAML")
    p.add_argument("--out", default=None, help="write to this path instead of stdout")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        uvicorn.run("specklemon.service:app", host=args.host, port=args.port)
        return EXIT_OK

    if args.command == "init-config":
        text = default_config_yaml()
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
            print(f"wrote {args.out}")
        else:
            sys.stdout.write(text)
        return EXIT_OK

    client = HarnessClient(args.server)
    try:
        if args.command == "synth":
            resp = client.synth(SynthRequest(
                config=_load_config_dict(args.config), out_dir=args.out,
                seed=args.seed, mode=args.mode,
            ))
            _emit(resp.model_dump())
            return EXIT_OK

        if args.command == "train":
            resp = client.train(TrainRequest(
                config=_load_config_dict(args.config), dataset=args.dataset,
                out_dir=args.out, seed=args.seed, resume=args.resume,
            ))
            _emit(resp.model_dump())
            return EXIT_OK

        if args.command == "eval":
            thresholds = None
            if args.threshold_file:
                with open(args.threshold_file) as fh:
                    thresholds = yaml.safe_load(fh)
            resp = client.eval(EvalRequest(
                checkpoint=args.checkpoint, dataset=args.dataset,
                thresholds=thresholds, out_dir=args.out, split=args.split,
            ))
            _emit(resp.model_dump())
            if resp.passed is False:
                return EXIT_THRESHOLD_FAIL
            return EXIT_OK

        if args.command == "bench":
            resp = client.bench(BenchRequest(
                checkpoint=args.checkpoint, iterations=args.iterations,
                warmup=args.warmup, out_dir=args.out,
            ))
            _emit(resp.model_dump())
            return EXIT_OK

        if args.command == "predict":
            resp = client.predict(PredictRequest(
                checkpoint=args.checkpoint, frames=args.frames,
            ))
            _emit(resp.model_dump())
            return EXIT_OK

    except ClientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for line in exc.errors:
            print(f"  - {line}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
