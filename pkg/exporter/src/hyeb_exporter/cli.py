"""Command-line surface for exporting and merging dataset files."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from hycal.errors import FileIOError, ValidationError

from .export import ExportSpec, export, merge


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyeb-export",
        description="Embed image folders with a vision-language encoder and "
        "write HYEB dataset files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="embed one image-folder dataset")
    p.add_argument("--root", required=True, help="folder with train/ and test/ splits")
    p.add_argument("--name", required=True, help="dataset name (metadata only)")
    p.add_argument("--out", required=True, help="output .hyeb path")
    p.add_argument("--encoder", default="clip",
                   help="clip[:model_id] or pixel-stats[:dim] (default: clip)")
    p.add_argument("--template", default="a photo of a {}",
                   help="prompt template with a {} placeholder")
    p.add_argument("--cap", type=int, default=None, help="per-class sample cap per split")
    p.add_argument("--domain-id", type=int, default=0)
    p.add_argument("--class-id-offset", type=int, default=0,
                   help="first class id; keeps ids disjoint across exports")

    m = sub.add_parser("merge", help="combine single-domain exports into one file")
    m.add_argument("--inputs", nargs="+", required=True)
    m.add_argument("--out", required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        if args.command == "export":
            spec = ExportSpec(
                dataset_name=args.name,
                data_root=args.root,
                output_path=args.out,
                encoder=args.encoder,
                prompt_template=args.template,
                per_class_cap=args.cap,
                domain_id=args.domain_id,
                class_id_offset=args.class_id_offset,
            )
            out = export(spec)
        else:
            out = merge(args.inputs, args.out)
        print(f"wrote {out}")
        return 0
    except (ValueError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, FileIOError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
