"""The `extract` command line: pretrained model + labeled text -> VDSR bundle.

Exit codes match the vds toolkit: 0 success, 1 usage, 2 data problem,
3 consistency/numerical failure (the orientation probe).
"""

import argparse
import json
import sys

from .errors import ExtractorError, UsageError
from .pipeline import ExtractSpec, extract


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="extract",
                description="Run zero-shot prompts through a causal LM and "
                            "bundle the representations as VDSR.")
    p.add_argument("--model", required=True,
                   help="checkpoint id; falls back to a seeded random "
                        "GPT-2-class model when unreachable")
    p.add_argument("--dataset", required=True,
                   help="builtin:tiny or a JSONL file of {text, label}")
    p.add_argument("--template", required=True,
                   help="file whose text contains {text} exactly once")
    p.add_argument("--verbalizer", required=True,
                   help="JSON file mapping class name -> label string; "
                        "key order fixes class ids")
    p.add_argument("--n-train", type=int, required=True)
    p.add_argument("--n-test", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="output .vdsr path")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        with open(args.template, "r", encoding="utf-8") as f:
            template = f.read()
        with open(args.verbalizer, "r", encoding="utf-8") as f:
            verbalizer = json.load(f)
        if not isinstance(verbalizer, dict):
            raise UsageError("verbalizer JSON must be an object")
        spec = ExtractSpec(model_id=args.model, dataset_id=args.dataset,
                           template=template, verbalizer=verbalizer,
                           n_train=args.n_train, n_test=args.n_test,
                           seed=args.seed)
        summary = extract(spec, args.out)
    except ExtractorError as e:
        sys.stderr.write(f"{type(e).__name__}: {e}\n")
        return e.exit_code
    except OSError as e:
        sys.stderr.write(f"{type(e).__name__}: {e}\n")
        return 2
    except (json.JSONDecodeError, ValueError) as e:
        sys.stderr.write(f"{type(e).__name__}: {e}\n")
        return 2
    print(f"wrote {summary['out']}")
    for key in ("model", "d", "v", "n_train", "n_test",
                "probe_max_abs_diff", "head_sha256"):
        print(f"{key}={summary[key]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
